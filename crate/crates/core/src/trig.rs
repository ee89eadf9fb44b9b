//! Exponential-sum bookkeeping for products of real trigonometric modes.
//!
//! A real mode `cos(k·x)` or `sin(k·x)` is stored as `a₊ e^{ik·x} + a₋ e^{-ik·x}`.
//! Integrals of products of such factors over the box `[0, 2π)³` reduce to
//! sums over sign patterns with a Kronecker condition on the wavevectors.

use num_complex::Complex64;

use crate::basis::{Parity, Wavevector};

/// Volume of the periodic box `[0, 2π)³`.
pub const BOX_VOLUME: f64 = 8.0 * core::f64::consts::PI * core::f64::consts::PI * core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TrigFn {
    pub plus: Complex64,
    pub minus: Complex64,
}

impl TrigFn {
    pub fn of(parity: Parity) -> Self {
        match parity {
            Parity::Cos => TrigFn {
                plus: Complex64::new(0.5, 0.0),
                minus: Complex64::new(0.5, 0.0),
            },
            Parity::Sin => TrigFn {
                plus: Complex64::new(0.0, -0.5),
                minus: Complex64::new(0.0, 0.5),
            },
        }
    }

    /// d/dθ of the function.
    pub fn derivative(self) -> Self {
        let i = Complex64::new(0.0, 1.0);
        TrigFn {
            plus: i * self.plus,
            minus: -i * self.minus,
        }
    }

    fn coeff(self, sign: i32) -> Complex64 {
        if sign > 0 {
            self.plus
        } else {
            self.minus
        }
    }
}

#[inline]
fn signed_sum(terms: &[(i32, Wavevector)]) -> Wavevector {
    let mut q = [0i32; 3];
    for (s, k) in terms {
        for a in 0..3 {
            q[a] += s * k[a];
        }
    }
    q
}

/// Exact `∫ f₁(k₁·x) f₂(k₂·x) f₃(k₃·x) dx` over the box.
pub(crate) fn triple_integral(factors: [(TrigFn, Wavevector); 3]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for s1 in [1, -1] {
        for s2 in [1, -1] {
            for s3 in [1, -1] {
                let q = signed_sum(&[(s1, factors[0].1), (s2, factors[1].1), (s3, factors[2].1)]);
                if q == [0, 0, 0] {
                    acc += factors[0].0.coeff(s1) * factors[1].0.coeff(s2) * factors[2].0.coeff(s3);
                }
            }
        }
    }
    acc.re * BOX_VOLUME
}

/// Grid sum `Σ_x f₁(k₁·x) f₂(k₂·x)` over an `M³` uniform grid, evaluated with
/// per-axis numerical root-of-unity sums (no orthogonality is assumed).
pub(crate) struct GridPairSum {
    m: usize,
    max_q: i32,
    // axis sums s(q) = Σ_l e^{i q 2π l / M}, q ∈ [-max_q, max_q]
    axis: alloc::vec::Vec<Complex64>,
}

impl GridPairSum {
    pub fn new(m: usize, max_q: i32) -> Self {
        let axis = (-max_q..=max_q)
            .map(|q| {
                let mut s = Complex64::new(0.0, 0.0);
                for l in 0..m {
                    let phase = (q as i64 * l as i64).rem_euclid(m as i64) as f64;
                    let theta = 2.0 * core::f64::consts::PI * phase / m as f64;
                    s += Complex64::new(libm::cos(theta), libm::sin(theta));
                }
                s
            })
            .collect();
        GridPairSum { m, max_q, axis }
    }

    fn axis_sum(&self, q: i32) -> Complex64 {
        self.axis[(q + self.max_q) as usize]
    }

    pub fn pair(&self, f1: (TrigFn, Wavevector), f2: (TrigFn, Wavevector)) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for s1 in [1, -1] {
            for s2 in [1, -1] {
                let q = signed_sum(&[(s1, f1.1), (s2, f2.1)]);
                let grid = self.axis_sum(q[0]) * self.axis_sum(q[1]) * self.axis_sum(q[2]);
                acc += f1.0.coeff(s1) * f2.0.coeff(s2) * grid;
            }
        }
        acc.re
    }

    /// Cell volume `(2π/M)³`.
    pub fn cell_volume(&self) -> f64 {
        let h = 2.0 * core::f64::consts::PI / self.m as f64;
        h * h * h
    }
}
