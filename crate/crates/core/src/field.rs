//! Galerkin states, collocation grids and the norms used by the estimates.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{mode_amplitude, BasisSet, Parity};
use crate::error::{invalid, Error, Result};
use crate::transform::PhaseTable;
use crate::trig::BOX_VOLUME;

/// Coefficients `c_j` of `u = Σ c_j φ_j` on a shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    basis: Arc<BasisSet>,
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(basis: Arc<BasisSet>, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::Dimension {
                expected: basis.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("coefficient vector has non-finite entries"));
        }
        Ok(CoefficientVector { basis, values })
    }

    pub fn zeros(basis: Arc<BasisSet>) -> Self {
        let n = basis.len();
        CoefficientVector {
            basis,
            values: vec![0.0; n],
        }
    }

    /// Unit coefficient on mode `j`.
    pub fn unit(basis: Arc<BasisSet>, j: usize, amplitude: f64) -> Self {
        let mut c = Self::zeros(basis);
        c.values[j] = amplitude;
        c
    }

    pub(crate) fn from_raw(basis: Arc<BasisSet>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), basis.len());
        CoefficientVector { basis, values }
    }

    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for fault injection and in-place updates; entries must stay finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_basis(&self, other: &CoefficientVector) -> Result<()> {
        if self.basis.id() != other.basis.id() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        CoefficientVector {
            basis: self.basis.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self - other`.
    pub fn difference(&self, other: &CoefficientVector) -> Result<Self> {
        self.ensure_same_basis(other)?;
        Ok(CoefficientVector {
            basis: self.basis.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// `Σ c_j²`, equal to `‖u‖²` by orthonormality.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `Σ λ_j c_j² = ‖∇u‖²`.
    pub fn grad_sq(&self) -> f64 {
        self.values
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(v, l)| l * v * v)
            .sum()
    }

    pub fn norm_l2(&self) -> f64 {
        libm::sqrt(self.energy())
    }

    pub fn norm_h1(&self) -> f64 {
        libm::sqrt(self.grad_sq())
    }

    /// Quadrature `‖u‖_{L⁴}` on a grid with at least `max(⌈f·(2K+1)⌉, 4K+1)` nodes per axis.
    pub fn norm_l4(&self, dealias_factor: f64) -> f64 {
        let table = PhaseTable::new(self.basis.cutoff() as usize, l4_resolution(self.basis.cutoff(), dealias_factor));
        norm_l4_on(self, &table)
    }

    pub fn dot(&self, other: &CoefficientVector) -> Result<f64> {
        self.ensure_same_basis(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }
}

/// Default dealiasing factor for the L⁴ quadrature grid.
pub const DEFAULT_DEALIAS: f64 = 1.5;

/// Grid size making the quartic integrand `|u|⁴` (bandwidth `4K`) exactly integrable.
pub fn l4_resolution(cutoff: u32, dealias_factor: f64) -> usize {
    let k = cutoff as usize;
    let scaled = libm::ceil(dealias_factor.max(0.0) * (2 * k + 1) as f64) as usize;
    scaled.max(4 * k + 1)
}

pub(crate) fn norm_l4_on(c: &CoefficientVector, table: &PhaseTable) -> f64 {
    let grid = synthesize_velocity(c, table);
    let m = table.resolution();
    let h = 2.0 * core::f64::consts::PI / m as f64;
    let sum: f64 = (0..m * m * m)
        .map(|p| {
            let s = grid[0][p] * grid[0][p] + grid[1][p] * grid[1][p] + grid[2][p] * grid[2][p];
            s * s
        })
        .sum();
    libm::sqrt(libm::sqrt(sum * h * h * h))
}

/// Complex amplitudes `û_a(k)` (positive representatives only) with
/// `u_a(x) = Re Σ û_a(k) e^{ik·x}`, optionally differentiated along `derivative`.
fn velocity_spectrum(c: &CoefficientVector, table: &PhaseTable, derivative: Option<usize>) -> [Vec<Complex64>; 3] {
    let s = table.side();
    let zero = Complex64::new(0.0, 0.0);
    let mut spec = [vec![zero; s * s * s], vec![zero; s * s * s], vec![zero; s * s * s]];
    let amp = mode_amplitude();
    for (mode, &cj) in c.basis.modes().iter().zip(&c.values) {
        if cj == 0.0 {
            continue;
        }
        let k = mode.index.k;
        let mut w = match mode.index.parity {
            Parity::Cos => Complex64::new(amp * cj, 0.0),
            Parity::Sin => Complex64::new(0.0, -amp * cj),
        };
        if let Some(b) = derivative {
            w *= Complex64::new(0.0, k[b] as f64);
        }
        let idx = table.box_index(k);
        for a in 0..3 {
            spec[a][idx] += w * mode.polarization[a];
        }
    }
    spec
}

pub(crate) fn synthesize_velocity(c: &CoefficientVector, table: &PhaseTable) -> [Vec<f64>; 3] {
    let [sx, sy, sz] = velocity_spectrum(c, table, None);
    [table.synthesize(&sx), table.synthesize(&sy), table.synthesize(&sz)]
}

/// Velocity samples on an `M³` grid, stored row-major as `[x][y][z][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    resolution: usize,
    cutoff: u32,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(resolution: usize, cutoff: u32, values: Vec<f64>) -> Result<Self> {
        let expected = resolution * resolution * resolution * 3;
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: values.len(),
            });
        }
        Ok(GridField {
            resolution,
            cutoff,
            values,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        let p = ((x * self.resolution + y) * self.resolution + z) * 3;
        [self.values[p], self.values[p + 1], self.values[p + 2]]
    }

    /// Node coordinate along one axis.
    pub fn node(&self, l: usize) -> f64 {
        2.0 * core::f64::consts::PI * l as f64 / self.resolution as f64
    }

    pub fn cell_volume(&self) -> f64 {
        let h = 2.0 * core::f64::consts::PI / self.resolution as f64;
        h * h * h
    }

    /// Quadrature of `|u|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()
    }

    fn component(&self, a: usize) -> Vec<f64> {
        self.values.iter().skip(a).step_by(3).copied().collect()
    }
}

fn check_resolution(cutoff: u32, resolution: usize) -> Result<()> {
    let required = 2 * cutoff as usize + 1;
    if resolution < required {
        return Err(Error::Resolution {
            required,
            given: resolution,
        });
    }
    Ok(())
}

/// Collocation samples of `Σ c_j φ_j`; requires `M ≥ 2·cutoff + 1`.
pub fn to_grid(c: &CoefficientVector, resolution: usize) -> Result<GridField> {
    let cutoff = c.basis.cutoff();
    check_resolution(cutoff, resolution)?;
    let table = PhaseTable::new(cutoff as usize, resolution);
    let comps = synthesize_velocity(c, &table);
    let points = resolution * resolution * resolution;
    let mut values = Vec::with_capacity(points * 3);
    for p in 0..points {
        values.extend_from_slice(&[comps[0][p], comps[1][p], comps[2][p]]);
    }
    Ok(GridField {
        resolution,
        cutoff,
        values,
    })
}

/// Velocity gradient samples; `at(p)[3a + b] = ∂u_a/∂x_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientGrid {
    resolution: usize,
    // nine component arrays, index 3a + b
    components: Vec<Vec<f64>>,
}

impl GradientGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn at(&self, p: usize) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c[p];
        }
        out
    }

    pub fn component(&self, a: usize, b: usize) -> &[f64] {
        &self.components[3 * a + b]
    }
}

pub fn gradient_grid(c: &CoefficientVector, resolution: usize) -> Result<GradientGrid> {
    check_resolution(c.basis.cutoff(), resolution)?;
    let table = PhaseTable::new(c.basis.cutoff() as usize, resolution);
    Ok(gradient_on(c, &table))
}

pub(crate) fn gradient_on(c: &CoefficientVector, table: &PhaseTable) -> GradientGrid {
    let mut components = vec![Vec::new(); 9];
    for b in 0..3 {
        let spec = velocity_spectrum(c, table, Some(b));
        for a in 0..3 {
            components[3 * a + b] = table.synthesize(&spec[a]);
        }
    }
    GradientGrid {
        resolution: table.resolution(),
        components,
    }
}

/// Spectral divergence `∂_a u_a` sampled on the grid.
pub fn divergence_grid(c: &CoefficientVector, resolution: usize) -> Result<Vec<f64>> {
    let g = gradient_grid(c, resolution)?;
    let points = resolution * resolution * resolution;
    Ok((0..points)
        .map(|p| g.components[0][p] + g.components[4][p] + g.components[8][p])
        .collect())
}

/// Discrete L² projection of grid samples onto the basis; exact for fields
/// band-limited below `M - K` per axis.
pub fn project_grid(grid: &GridField, basis: Arc<BasisSet>) -> Result<CoefficientVector> {
    check_resolution(basis.cutoff(), grid.resolution)?;
    let table = PhaseTable::new(basis.cutoff() as usize, grid.resolution);
    let spectra = [
        table.analyze(&grid.component(0)),
        table.analyze(&grid.component(1)),
        table.analyze(&grid.component(2)),
    ];
    let scale = mode_amplitude() * BOX_VOLUME;
    let values = basis
        .modes()
        .iter()
        .map(|mode| {
            let idx = table.box_index(mode.index.k);
            let e = mode.polarization;
            let g = spectra[0][idx] * e[0] + spectra[1][idx] * e[1] + spectra[2][idx] * e[2];
            match mode.index.parity {
                Parity::Cos => scale * g.re,
                Parity::Sin => -scale * g.im,
            }
        })
        .collect();
    CoefficientVector::new(basis, values)
}

/// Built-in initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Seeded negative-helicity combination on the shell `|k|² = shell`,
    /// scaled to L² norm `amplitude`. Its curl is `-√shell` times itself.
    Beltrami { shell: u32, seed: u64, amplitude: f64 },
    /// Seeded Gaussian coefficients on all modes with `λ ≤ max_shell`, scaled to L² norm `amplitude`.
    RandomBand { max_shell: u32, seed: u64, amplitude: f64 },
    /// `amplitude·(sin x cos y cos z, -cos x sin y cos z, 0)`.
    TaylorGreen { amplitude: f64 },
    Explicit(Vec<f64>),
}

pub(crate) fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn normalized(mut values: Vec<f64>, amplitude: f64, what: &str) -> Result<Vec<f64>> {
    let n = libm::sqrt(values.iter().map(|v| v * v).sum::<f64>());
    if n == 0.0 {
        let mut msg = what.to_string();
        msg.push_str(" selects no modes of this basis");
        return Err(invalid(msg));
    }
    for v in &mut values {
        *v *= amplitude / n;
    }
    Ok(values)
}

/// `c_m(0) = (u₀, φ_m)`.
pub fn project_initial(spec: &InitialCondition, basis: Arc<BasisSet>) -> Result<CoefficientVector> {
    let n = basis.len();
    match spec {
        InitialCondition::Explicit(values) => CoefficientVector::new(basis, values.clone()),
        InitialCondition::TaylorGreen { amplitude } => {
            let m = basis.min_resolution();
            let h = 2.0 * core::f64::consts::PI / m as f64;
            let mut values = Vec::with_capacity(m * m * m * 3);
            for ix in 0..m {
                let x = h * ix as f64;
                for iy in 0..m {
                    let y = h * iy as f64;
                    for iz in 0..m {
                        let z = h * iz as f64;
                        let cz = libm::cos(z);
                        values.push(amplitude * libm::sin(x) * libm::cos(y) * cz);
                        values.push(-amplitude * libm::cos(x) * libm::sin(y) * cz);
                        values.push(0.0);
                    }
                }
            }
            let grid = GridField::new(m, basis.cutoff(), values)?;
            project_grid(&grid, basis)
        }
        InitialCondition::RandomBand {
            max_shell,
            seed,
            amplitude,
        } => {
            let mut r = rng(*seed);
            let values: Vec<f64> = basis
                .modes()
                .iter()
                .map(|m| {
                    let g: f64 = StandardNormal.sample(&mut r);
                    if m.eigenvalue <= *max_shell as f64 {
                        g
                    } else {
                        0.0
                    }
                })
                .collect();
            let values = normalized(values, *amplitude, "random band")?;
            CoefficientVector::new(basis, values)
        }
        InitialCondition::Beltrami {
            shell,
            seed,
            amplitude,
        } => {
            let mut r = rng(*seed);
            let mut values = vec![0.0; n];
            // modes come in blocks of four per wavevector:
            // (e1 cos, e1 sin, e2 cos, e2 sin)
            let mut j = 0;
            while j < n {
                let mode = &basis.modes()[j];
                if mode.eigenvalue == *shell as f64 {
                    let a: f64 = StandardNormal.sample(&mut r);
                    let b: f64 = StandardNormal.sample(&mut r);
                    // a (e1 cos + e2 sin) + b (e1 sin - e2 cos)
                    values[j] = a;
                    values[j + 1] = b;
                    values[j + 2] = -b;
                    values[j + 3] = a;
                }
                j += 4;
            }
            let values = normalized(values, *amplitude, "Beltrami shell")?;
            CoefficientVector::new(basis, values)
        }
    }
}

/// Seeded isotropic direction over all modes with L² norm `delta`.
pub fn random_direction(basis: Arc<BasisSet>, seed: u64, delta: f64) -> Result<CoefficientVector> {
    let mut r = rng(seed);
    let values: Vec<f64> = (0..basis.len()).map(|_| StandardNormal.sample(&mut r)).collect();
    let values = normalized(values, delta, "random direction")?;
    CoefficientVector::new(basis, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;

    fn basis(k: u32) -> Arc<BasisSet> {
        Arc::new(build_basis(k).unwrap())
    }

    #[test]
    fn pythagoras_and_parseval() {
        let b = basis(1);
        let mut c = CoefficientVector::zeros(b.clone());
        assert_eq!(c.norm_l2(), 0.0);
        c.values_mut()[0] = 3.0;
        c.values_mut()[1] = 4.0;
        assert_eq!(c.norm_l2(), 5.0);
        assert_eq!(CoefficientVector::unit(b, 7, 1.0).norm_l2(), 1.0);
    }

    #[test]
    fn h1_of_single_modes() {
        let b = basis(2);
        let j1 = b.modes().iter().position(|m| m.eigenvalue == 1.0).unwrap();
        let j4 = b.modes().iter().position(|m| m.eigenvalue == 4.0).unwrap();
        assert_eq!(CoefficientVector::unit(b.clone(), j1, 1.0).norm_h1(), 1.0);
        assert_eq!(CoefficientVector::unit(b, j4, 2.0).norm_h1(), 4.0);
    }

    #[test]
    fn explicit_length_is_checked() {
        let b = basis(1);
        let err = project_initial(&InitialCondition::Explicit(vec![0.0; 3]), b.clone()).unwrap_err();
        assert_eq!(err, Error::Dimension { expected: 52, found: 3 });
        let zero = project_initial(&InitialCondition::Explicit(vec![0.0; 52]), b).unwrap();
        assert_eq!(zero.norm_l2(), 0.0);
    }

    #[test]
    fn beltrami_energy_sits_on_its_shell() {
        let b = basis(2);
        let c = project_initial(&InitialCondition::Beltrami { shell: 1, seed: 3, amplitude: 1.0 }, b.clone()).unwrap();
        for (m, v) in b.modes().iter().zip(c.values()) {
            if m.eigenvalue != 1.0 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!((c.norm_l2() - 1.0).abs() < 1e-14);
        let err = project_initial(&InitialCondition::Beltrami { shell: 7, seed: 3, amplitude: 1.0 }, b);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn under_resolved_grid_is_refused() {
        let b = basis(2);
        let c = CoefficientVector::zeros(b);
        assert_eq!(to_grid(&c, 4).unwrap_err(), Error::Resolution { required: 5, given: 4 });
        assert!(to_grid(&c, 5).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn l4_resolution_is_alias_free() {
        assert_eq!(l4_resolution(1, 1.5), 5);
        assert_eq!(l4_resolution(3, 1.5), 13);
        assert_eq!(l4_resolution(2, 3.0), 15);
    }
}
