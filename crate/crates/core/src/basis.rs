//! Orthonormal divergence-free Fourier basis on the periodic box `[0, 2π)³`.
//!
//! The box stands in for a general domain: its mean-zero solenoidal real
//! Fourier modes are orthonormal in L² and diagonalize the Dirichlet form,
//! `(∇φ_j, ∇φ_m) = λ_m δ_jm` with `λ = |k|²`. Wall boundaries are not modelled.
//!
//! Each mode is `φ(x) = A e cos(k·x)` or `φ(x) = A e sin(k·x)` with
//! `A = √(2/(2π)³)`, `k` the lexicographically positive member of `{k, -k}`
//! and `e ⊥ k` one of two unit polarization vectors.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::trig::{GridPairSum, TrigFn, BOX_VOLUME};

pub type Wavevector = [i32; 3];

/// Normalization amplitude `√(2/(2π)³)` giving `‖φ‖_{L²} = 1`.
pub fn mode_amplitude() -> f64 {
    libm::sqrt(2.0 / BOX_VOLUME)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Cos,
    Sin,
}

impl Polarization {
    pub fn number(self) -> u8 {
        match self {
            Polarization::First => 1,
            Polarization::Second => 2,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Cos => f.write_str("cos"),
            Parity::Sin => f.write_str("sin"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub k: Wavevector,
    pub polarization: Polarization,
    pub parity: Parity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisMode {
    pub index: ModeIndex,
    /// Unit polarization vector, orthogonal to `index.k`.
    pub polarization: [f64; 3],
    /// Dirichlet-form eigenvalue `|k|²`.
    pub eigenvalue: f64,
}

impl BasisMode {
    pub fn wavevector(&self) -> Wavevector {
        self.index.k
    }

    pub(crate) fn trig(&self) -> TrigFn {
        TrigFn::of(self.index.parity)
    }

    /// Pointwise value `φ(x)`.
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let k = self.index.k;
        let theta = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
        let s = match self.index.parity {
            Parity::Cos => libm::cos(theta),
            Parity::Sin => libm::sin(theta),
        } * mode_amplitude();
        let e = self.polarization;
        [s * e[0], s * e[1], s * e[2]]
    }
}

/// Identity of a basis; bases are fully determined by their cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisId {
    pub cutoff: u32,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    modes: Vec<BasisMode>,
    cutoff: u32,
}

pub fn is_positive_representative(k: Wavevector) -> bool {
    match k.iter().find(|&&c| c != 0) {
        Some(&c) => c > 0,
        None => false,
    }
}

/// Maps `k` to the positive member of `{k, -k}`, returning the sign used.
pub fn canonical(k: Wavevector) -> Option<(Wavevector, i32)> {
    if k == [0, 0, 0] {
        None
    } else if is_positive_representative(k) {
        Some((k, 1))
    } else {
        Some(([-k[0], -k[1], -k[2]], -1))
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    [v[0] / n, v[1] / n, v[2] / n]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Deterministic orthonormal pair spanning the plane orthogonal to `k`.
///
/// `e1 = normalize(k × a)` with `a` the first standard axis not parallel to
/// `k`, and `e2 = normalize(k × e1)`.
pub fn polarization_pair(k: Wavevector) -> Result<([f64; 3], [f64; 3])> {
    if k == [0, 0, 0] {
        return Err(invalid("polarization of the zero wavevector is undefined"));
    }
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let e1 = axes
        .iter()
        .map(|&a| cross(kf, a))
        .find(|c| c.iter().any(|&x| x != 0.0))
        .map(normalize)
        .expect("a nonzero vector is parallel to at most one axis");
    let e2 = normalize(cross(kf, e1));
    Ok((e1, e2))
}

fn norm_sq(k: Wavevector) -> i32 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

/// All modes with `|k|_∞ ≤ cutoff`, `k ≠ 0`, ordered by `(λ, k, polarization, parity)`.
pub fn build_basis(cutoff: u32) -> Result<BasisSet> {
    if cutoff == 0 {
        return Err(invalid("cutoff must be at least 1 (cutoff 0 gives an empty basis)"));
    }
    let c = cutoff as i32;
    let mut reps: Vec<Wavevector> = Vec::new();
    for kx in -c..=c {
        for ky in -c..=c {
            for kz in -c..=c {
                let k = [kx, ky, kz];
                if is_positive_representative(k) {
                    reps.push(k);
                }
            }
        }
    }
    reps.sort_by(|a, b| match norm_sq(*a).cmp(&norm_sq(*b)) {
        Ordering::Equal => a.cmp(b),
        o => o,
    });
    let mut modes = Vec::with_capacity(reps.len() * 4);
    for k in reps {
        let (e1, e2) = polarization_pair(k)?;
        for (pol, e) in [(Polarization::First, e1), (Polarization::Second, e2)] {
            for parity in [Parity::Cos, Parity::Sin] {
                modes.push(BasisMode {
                    index: ModeIndex {
                        k,
                        polarization: pol,
                        parity,
                    },
                    polarization: e,
                    eigenvalue: norm_sq(k) as f64,
                });
            }
        }
    }
    Ok(BasisSet { modes, cutoff })
}

impl BasisSet {
    pub fn modes(&self) -> &[BasisMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn id(&self) -> BasisId {
        BasisId {
            cutoff: self.cutoff,
            len: self.modes.len(),
        }
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.modes.iter().map(|m| m.eigenvalue)
    }

    /// Minimum collocation resolution for alias-free products of two fields.
    pub fn min_resolution(&self) -> usize {
        2 * self.cutoff as usize + 1
    }

    pub fn position(&self, index: &ModeIndex) -> Option<usize> {
        // modes sharing a wavevector are contiguous, four per k
        let start = self.first_of(index.k)?;
        self.modes[start..start + 4]
            .iter()
            .position(|m| m.index == *index)
            .map(|p| start + p)
    }

    /// Index of the first of the four modes carrying wavevector `k`.
    pub fn first_of(&self, k: Wavevector) -> Option<usize> {
        let key = (norm_sq(k), k);
        let pos = self
            .modes
            .partition_point(|m| (norm_sq(m.index.k), m.index.k) < key);
        (pos < self.modes.len() && self.modes[pos].index.k == k).then_some(pos)
    }
}

/// Grid-quadrature deviations of the mass and stiffness matrices from `I` and `diag(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramReport {
    pub mass_deviation: f64,
    pub stiffness_deviation: f64,
}

/// Mass and stiffness matrices by `M³` grid quadrature; exact when `M ≥ 2·cutoff+1`.
pub fn gram_report(basis: &BasisSet, resolution: usize) -> Result<GramReport> {
    let required = basis.min_resolution();
    if resolution < required {
        return Err(Error::Resolution {
            required,
            given: resolution,
        });
    }
    let sums = GridPairSum::new(resolution, 2 * basis.cutoff() as i32);
    let scale = mode_amplitude() * mode_amplitude() * sums.cell_volume();
    let mut mass_dev: f64 = 0.0;
    let mut stiff_dev: f64 = 0.0;
    for (i, a) in basis.modes().iter().enumerate() {
        for (j, b) in basis.modes().iter().enumerate().skip(i) {
            let ee = dot(a.polarization, b.polarization);
            let ka = a.wavevector();
            let kb = b.wavevector();
            let kk = (ka[0] * kb[0] + ka[1] * kb[1] + ka[2] * kb[2]) as f64;
            let mass = if ee == 0.0 {
                0.0
            } else {
                scale * ee * sums.pair((a.trig(), ka), (b.trig(), kb))
            };
            let stiff = if ee == 0.0 || kk == 0.0 {
                0.0
            } else {
                scale * ee * kk * sums.pair((a.trig().derivative(), ka), (b.trig().derivative(), kb))
            };
            let (mass_target, stiff_target) = if i == j { (1.0, a.eigenvalue) } else { (0.0, 0.0) };
            mass_dev = mass_dev.max((mass - mass_target).abs());
            stiff_dev = stiff_dev.max((stiff - stiff_target).abs());
        }
    }
    Ok(GramReport {
        mass_deviation: mass_dev,
        stiffness_deviation: stiff_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_one_has_fifty_two_modes() {
        // (3³ - 1)/2 = 13 representatives, two polarizations, two parities
        let b = build_basis(1).unwrap();
        assert_eq!(b.len(), 52);
        assert_eq!(build_basis(2).unwrap().len(), 4 * (125 - 1) / 2);
    }

    #[test]
    fn cutoff_zero_is_rejected() {
        assert!(matches!(build_basis(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unit_wavevector_has_unit_eigenvalue() {
        let b = build_basis(2).unwrap();
        let m = b.modes().iter().find(|m| m.index.k == [1, 0, 0]).unwrap();
        assert_eq!(m.eigenvalue, 1.0);
        assert_eq!(b.first_of([0, 0, 1]), Some(0));
        assert_eq!(b.first_of([1, 0, 0]), Some(8));
    }

    #[test]
    fn polarization_rule_examples() {
        let (e1, e2) = polarization_pair([1, 0, 0]).unwrap();
        assert_eq!(e1, [0.0, 0.0, 1.0]);
        assert_eq!(e2, [0.0, -1.0, 0.0]);
        let (e1, _) = polarization_pair([0, 2, 0]).unwrap();
        assert_eq!(e1, [0.0, 0.0, -1.0]);
        assert!(polarization_pair([0, 0, 0]).is_err());
    }

    #[test]
    fn polarization_triad_is_orthonormal() {
        for k in [[1, 1, 0], [1, -2, 3], [0, 0, 5], [2, 2, 2]] {
            let (e1, e2) = polarization_pair(k).unwrap();
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            let kn = libm::sqrt(dot(kf, kf));
            assert!(dot(kf, e1).abs() < 1e-14);
            assert!(dot(kf, e2).abs() < 1e-14);
            assert!(dot(e1, e2).abs() < 1e-14);
            let c = cross(e1, e2);
            let plus = libm::sqrt((0..3).map(|a| (c[a] + kf[a] / kn).powi(2)).sum::<f64>());
            let minus = libm::sqrt((0..3).map(|a| (c[a] - kf[a] / kn).powi(2)).sum::<f64>());
            assert!(plus.min(minus) < 1e-14);
            assert!((plus.max(minus) - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn every_mode_is_solenoidal_and_unit() {
        let b = build_basis(3).unwrap();
        for m in b.modes() {
            let k = m.index.k;
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            assert!(dot(kf, m.polarization).abs() < 1e-14);
            assert!((dot(m.polarization, m.polarization) - 1.0).abs() < 1e-15);
            assert_eq!(m.eigenvalue, norm_sq(k) as f64);
        }
    }

    #[test]
    fn ordering_is_deterministic_and_sorted() {
        let a = build_basis(2).unwrap();
        let b = build_basis(2).unwrap();
        assert_eq!(a, b);
        for w in a.modes().windows(2) {
            let ka = (w[0].eigenvalue as i64, w[0].index.k, w[0].index.polarization, w[0].index.parity);
            let kb = (w[1].eigenvalue as i64, w[1].index.k, w[1].index.polarization, w[1].index.parity);
            assert!(ka < kb);
        }
    }

    #[test]
    fn position_round_trips() {
        let b = build_basis(2).unwrap();
        for (j, m) in b.modes().iter().enumerate() {
            assert_eq!(b.position(&m.index), Some(j));
        }
        assert_eq!(b.first_of([3, 0, 0]), None);
    }

    #[test]
    fn gram_resolution_threshold() {
        let b1 = build_basis(1).unwrap();
        let r = gram_report(&b1, 3).unwrap();
        assert!(r.mass_deviation <= 1e-12 && r.stiffness_deviation <= 1e-12);
        let b2 = build_basis(2).unwrap();
        assert_eq!(
            gram_report(&b2, 3),
            Err(Error::Resolution { required: 5, given: 3 })
        );
    }
}
