use std::sync::{Arc, OnceLock};

use gns_core::field::DEFAULT_DEALIAS;
use gns_core::verifier::{apriori_root, interpolation_check, ladyzhenskaya_ratio, young_step_holds, LADYZHENSKAYA_CONSTANT};
use gns_core::*;
use proptest::prelude::*;

fn tensor(k: u32) -> &'static TriadTensor {
    static T1: OnceLock<TriadTensor> = OnceLock::new();
    static T2: OnceLock<TriadTensor> = OnceLock::new();
    let cell = if k == 1 { &T1 } else { &T2 };
    cell.get_or_init(|| assemble_tensor(&Arc::new(build_basis(k).unwrap())))
}

fn state(k: u32) -> impl Strategy<Value = CoefficientVector> {
    let t = tensor(k);
    let n = t.basis().len();
    proptest::collection::vec(-10.0..10.0_f64, n)
        .prop_filter("nonzero", |v| v.iter().any(|x| *x != 0.0))
        .prop_map(move |v| CoefficientVector::new(t.basis().clone(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nonlinearity_is_energy_neutral(c in state(2)) {
        let n = tensor(2).nonlinear_term(&c).unwrap();
        let pairing = n.dot(&c).unwrap();
        prop_assert!(pairing.abs() <= 1e-10 * c.norm_l2().powi(3));
    }

    #[test]
    fn nonlinearity_is_quadratic(c in state(1), alpha in -5.0..5.0_f64) {
        let t = tensor(1);
        let a = t.nonlinear_term(&c.scaled(alpha)).unwrap();
        let b = t.nonlinear_term(&c).unwrap().scaled(alpha * alpha);
        prop_assert!(a.difference(&b).unwrap().norm_l2() <= 1e-12 * b.norm_l2().max(1e-300));
    }

    #[test]
    fn transport_is_antisymmetric(u in state(1), v in state(1), w in state(1)) {
        let t = tensor(1);
        let p = t.trilinear(&u, &v, &w).unwrap();
        let q = t.trilinear(&u, &w, &v).unwrap();
        let scale = u.norm_l2() * v.norm_l2() * w.norm_l2();
        prop_assert!((p + q).abs() <= 1e-12 * scale);
    }

    #[test]
    fn norms_are_homogeneous(c in state(2), alpha in -20.0..20.0_f64) {
        let s = c.scaled(alpha);
        let a = alpha.abs();
        prop_assert!((s.norm_l2() - a * c.norm_l2()).abs() <= 1e-13 * a * c.norm_l2());
        prop_assert!((s.norm_h1() - a * c.norm_h1()).abs() <= 1e-13 * a * c.norm_h1());
        let (l4s, l4) = (s.norm_l4(DEFAULT_DEALIAS), c.norm_l4(DEFAULT_DEALIAS));
        prop_assert!((l4s - a * l4).abs() <= 1e-12 * a * l4);
    }

    #[test]
    fn poincare_holds_on_mean_zero_fields(c in state(2)) {
        prop_assert!(c.norm_l2() <= c.norm_h1());
    }

    #[test]
    fn ladyzhenskaya_ratio_is_scale_invariant(c in state(1), alpha in prop_oneof![-50.0..-0.01_f64, 0.01..50.0_f64]) {
        let r = ladyzhenskaya_ratio(&c).unwrap().ratio;
        let s = ladyzhenskaya_ratio(&c.scaled(alpha)).unwrap().ratio;
        prop_assert!((r - s).abs() <= 1e-12 * r);
    }

    #[test]
    fn interpolation_follows_from_ratio_bound(c in state(1), eps in prop_oneof![Just(0.1), Just(1.0), Just(10.0), 0.01..100.0_f64]) {
        let lady = ladyzhenskaya_ratio(&c).unwrap();
        let (x, y) = (c.grad_sq(), c.energy());
        if lady.ratio <= LADYZHENSKAYA_CONSTANT && young_step_holds(x, y, eps, 1e-12) {
            prop_assert!(interpolation_check(&c, eps, 1e-12).unwrap().satisfied);
        }
    }

    #[test]
    fn young_step_holds_pointwise(x in 0.0..1e6_f64, y in 0.0..1e6_f64, eps in 1e-3..1e3_f64) {
        prop_assert!(young_step_holds(x, y, eps, 1e-12));
    }

    #[test]
    fn apriori_root_solves_the_quadratic(c1 in 0.0..1e4_f64, c2 in 0.0..1e4_f64) {
        let b = apriori_root(c1, c2);
        prop_assert!(b >= 0.0);
        let scale = b * b + c1 + c2 * b;
        prop_assert!((b * b - c1 - c2 * b).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn polarization_is_an_orthonormal_triad(k in prop::array::uniform3(-6..=6_i32)) {
        prop_assume!(k != [0, 0, 0]);
        let (e1, e2) = polarization_pair(k).unwrap();
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let kf = k.map(|v| v as f64);
        prop_assert!(dot(kf, e1).abs() < 1e-14 && dot(kf, e2).abs() < 1e-14);
        prop_assert!((dot(e1, e1) - 1.0).abs() < 1e-14 && (dot(e2, e2) - 1.0).abs() < 1e-14);
        prop_assert!(dot(e1, e2).abs() < 1e-14);
        let cross = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
        let kn = dot(kf, kf).sqrt();
        let d: f64 = (0..3).map(|a| (cross[a] - kf[a] / kn).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d < 1e-14 || (d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn random_band_respects_its_shell(seed in any::<u64>(), shell in 1..12_u32) {
        let b = tensor(2).basis().clone();
        let c = project_initial(&InitialCondition::RandomBand { max_shell: shell, seed, amplitude: 2.0 }, b.clone()).unwrap();
        prop_assert!((c.norm_l2() - 2.0).abs() < 1e-12);
        for (m, v) in b.modes().iter().zip(c.values()) {
            prop_assert!(m.eigenvalue <= shell as f64 || *v == 0.0);
        }
        let again = project_initial(&InitialCondition::RandomBand { max_shell: shell, seed, amplitude: 2.0 }, b).unwrap();
        prop_assert_eq!(c, again);
    }
}

#[test]
fn basis_construction_is_deterministic() {
    assert_eq!(build_basis(3).unwrap(), build_basis(3).unwrap());
}
