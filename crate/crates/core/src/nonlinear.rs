//! Triadic interaction tensor `B_ijm = ((φ_i·∇)φ_j, φ_m)` and the quadratic
//! Galerkin nonlinearity `N_m(c) = Σ_ij B_ijm c_i c_j`.
//!
//! Entries are computed in closed form from exponential sums; only triads whose
//! wavevectors close (`±k_i ± k_j ± k_m = 0`) are stored. Skew-symmetry in the
//! last two indices is checked by [`TriadTensor::skew_report`], never imposed.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{canonical, dot, mode_amplitude, BasisSet};
use crate::error::{Error, Result};
use crate::field::CoefficientVector;
use crate::trig::triple_integral;

/// Entries with magnitude below this are treated as structural zeros.
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadEntry {
    pub i: u32,
    pub j: u32,
    pub m: u32,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct TriadTensor {
    basis: Arc<BasisSet>,
    // sorted by (i, j, m)
    entries: Vec<TriadEntry>,
}

/// Exact `((φ_i·∇)φ_j, φ_m)` for arbitrary modes of `basis`.
pub fn triad_value(basis: &BasisSet, i: usize, j: usize, m: usize) -> f64 {
    let (a, b, c) = (&basis.modes()[i], &basis.modes()[j], &basis.modes()[m]);
    let kb = b.wavevector();
    let ei_kj = a.polarization[0] * kb[0] as f64 + a.polarization[1] * kb[1] as f64 + a.polarization[2] * kb[2] as f64;
    let ej_em = dot(b.polarization, c.polarization);
    if ei_kj == 0.0 || ej_em == 0.0 {
        return 0.0;
    }
    let amp = mode_amplitude();
    let integral = triple_integral([
        (a.trig(), a.wavevector()),
        (b.trig().derivative(), kb),
        (c.trig(), c.wavevector()),
    ]);
    amp * amp * amp * ei_kj * ej_em * integral
}

/// Assembles all nonzero triads. Deterministic: entries are produced in `(i, j, m)` order.
pub fn assemble_tensor(basis: &Arc<BasisSet>) -> TriadTensor {
    let modes = basis.modes();
    let mut entries = Vec::new();
    let mut candidates: Vec<usize> = Vec::with_capacity(8);
    for i in 0..modes.len() {
        let ki = modes[i].wavevector();
        for j in 0..modes.len() {
            let kj = modes[j].wavevector();
            candidates.clear();
            for q in [
                [ki[0] + kj[0], ki[1] + kj[1], ki[2] + kj[2]],
                [ki[0] - kj[0], ki[1] - kj[1], ki[2] - kj[2]],
            ] {
                if let Some((rep, _)) = canonical(q) {
                    if let Some(start) = basis.first_of(rep) {
                        candidates.extend(start..start + 4);
                    }
                }
            }
            candidates.sort_unstable();
            candidates.dedup();
            for &m in &candidates {
                let value = triad_value(basis, i, j, m);
                if value.abs() > DROP_TOL {
                    entries.push(TriadEntry {
                        i: i as u32,
                        j: j as u32,
                        m: m as u32,
                        value,
                    });
                }
            }
        }
    }
    TriadTensor {
        basis: basis.clone(),
        entries,
    }
}

impl TriadTensor {
    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn entries(&self) -> &[TriadEntry] {
        &self.entries
    }

    /// Mutable entries, for fault-injection tests of the skew check.
    pub fn entries_mut(&mut self) -> &mut [TriadEntry] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored `B_ijm`, zero when absent.
    pub fn get(&self, i: usize, j: usize, m: usize) -> f64 {
        let key = (i as u32, j as u32, m as u32);
        self.entries
            .binary_search_by(|e| (e.i, e.j, e.m).cmp(&key))
            .map(|p| self.entries[p].value)
            .unwrap_or(0.0)
    }

    fn check(&self, c: &CoefficientVector) -> Result<()> {
        if c.basis().id() != self.basis.id() {
            return Err(Error::Dimension {
                expected: self.basis.len(),
                found: c.len(),
            });
        }
        Ok(())
    }

    /// `out_m = Σ_ij B_ijm c_i c_j` on raw slices.
    pub fn apply_into(&self, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for e in &self.entries {
            out[e.m as usize] += e.value * c[e.i as usize] * c[e.j as usize];
        }
    }

    /// `out_m = Σ_ij B_ijm (a_i b_j + b_i a_j)`, the derivative of `N` at `a` along `b`.
    pub fn linearized_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for e in &self.entries {
            let (i, j) = (e.i as usize, e.j as usize);
            out[e.m as usize] += e.value * (a[i] * b[j] + b[i] * a[j]);
        }
    }

    pub fn nonlinear_term(&self, c: &CoefficientVector) -> Result<CoefficientVector> {
        self.check(c)?;
        let mut out = vec![0.0; c.len()];
        self.apply_into(c.values(), &mut out);
        Ok(CoefficientVector::from_raw(self.basis.clone(), out))
    }

    /// `(u_a u_{b;a}, v_b) = Σ B_ijm u_i u_j v_m`.
    pub fn weak_pairing(&self, u: &CoefficientVector, v: &CoefficientVector) -> Result<f64> {
        self.trilinear(u, u, v)
    }

    /// `((a·∇)b, c) = Σ B_ijm a_i b_j c_m`.
    pub fn trilinear(&self, a: &CoefficientVector, b: &CoefficientVector, c: &CoefficientVector) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        self.check(c)?;
        let (a, b, c) = (a.values(), b.values(), c.values());
        Ok(self
            .entries
            .iter()
            .map(|e| e.value * a[e.i as usize] * b[e.j as usize] * c[e.m as usize])
            .sum())
    }

    /// `max |B_ijm + B_imj|` over all stored index triples.
    pub fn skew_report(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| (e.value + self.get(e.i as usize, e.m as usize, e.j as usize)).abs())
            .fold(0.0, f64::max)
    }
}
