//! Time integration of the Galerkin system
//!
//! `ċ_m = -νλ_m c_m - Σ_ij B_ijm c_i c_j + f_m(t)`
//!
//! with an integrating-factor (Lawson) RK4 scheme: the diagonal viscous part
//! is propagated exactly by `exp(-νλ_m dt)`, the remainder by classical RK4
//! in the transformed variable.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{build_basis, BasisSet};
use crate::error::{invalid, Error, Result};
use crate::field::{l4_resolution, norm_l4_on, project_initial, CoefficientVector, InitialCondition, DEFAULT_DEALIAS};
use crate::nonlinear::{assemble_tensor, TriadTensor};
use crate::transform::PhaseTable;

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSchedule {
    Zero,
    /// `f(t) = amplitude·e^{-rate·t} Σ_{j∈pattern} φ_j`.
    ExponentialDecay { amplitude: f64, rate: f64, pattern: Vec<usize> },
    /// `f(t) = amplitude Σ_{j∈pattern} φ_j`; its accumulated norm grows without bound.
    Constant { amplitude: f64, pattern: Vec<usize> },
}

impl ForcingSchedule {
    pub fn validate(&self, modes: usize) -> Result<()> {
        let (amplitude, pattern) = match self {
            ForcingSchedule::Zero => return Ok(()),
            ForcingSchedule::ExponentialDecay { amplitude, rate, pattern } => {
                if !rate.is_finite() || *rate < 0.0 {
                    return Err(invalid("forcing decay rate must be finite and nonnegative"));
                }
                (amplitude, pattern)
            }
            ForcingSchedule::Constant { amplitude, pattern } => (amplitude, pattern),
        };
        if !amplitude.is_finite() {
            return Err(invalid("forcing amplitude must be finite"));
        }
        if pattern.is_empty() {
            return Err(invalid("forcing pattern lists no modes"));
        }
        if let Some(&j) = pattern.iter().find(|&&j| j >= modes) {
            return Err(invalid(alloc::format!("forcing pattern mode {j} is outside the basis of {modes} modes")));
        }
        Ok(())
    }

    fn parts(&self) -> Option<(f64, &[usize])> {
        match self {
            ForcingSchedule::Zero => None,
            ForcingSchedule::ExponentialDecay { amplitude, pattern, .. } | ForcingSchedule::Constant { amplitude, pattern } => {
                Some((*amplitude, pattern))
            }
        }
    }

    /// Time profile `s(t)` with `f(t) = s(t)·Σ φ_j`, and `s'(t)`.
    fn profile(&self, t: f64) -> (f64, f64) {
        match self {
            ForcingSchedule::Zero => (0.0, 0.0),
            ForcingSchedule::ExponentialDecay { amplitude, rate, .. } => {
                let s = amplitude * libm::exp(-rate * t);
                (s, -rate * s)
            }
            ForcingSchedule::Constant { amplitude, .. } => (*amplitude, 0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForcingSchedule::Zero)
    }

    /// Adds `f(t)` to `out`.
    pub fn add_coefficients(&self, t: f64, out: &mut [f64]) {
        if let Some((_, pattern)) = self.parts() {
            let (s, _) = self.profile(t);
            for &j in pattern {
                out[j] += s;
            }
        }
    }

    /// `f(t)` and `ḟ(t)` as dense vectors.
    pub fn coefficients(&self, t: f64, modes: usize) -> (Vec<f64>, Vec<f64>) {
        let mut f = vec![0.0; modes];
        let mut df = vec![0.0; modes];
        if let Some((_, pattern)) = self.parts() {
            let (s, ds) = self.profile(t);
            for &j in pattern {
                f[j] += s;
                df[j] += ds;
            }
        }
        (f, df)
    }

    /// `‖Σ_{j∈pattern} φ_j‖`, counting repeated indices.
    pub fn pattern_norm(&self) -> f64 {
        match self.parts() {
            None => 0.0,
            Some((_, pattern)) => {
                let mut sorted: Vec<usize> = pattern.to_vec();
                sorted.sort_unstable();
                let mut sum = 0.0;
                let mut i = 0;
                while i < sorted.len() {
                    let run = sorted[i..].iter().take_while(|&&j| j == sorted[i]).count();
                    sum += (run * run) as f64;
                    i += run;
                }
                libm::sqrt(sum)
            }
        }
    }

    pub fn norm_at(&self, t: f64) -> f64 {
        self.profile(t).0.abs() * self.pattern_norm()
    }

    /// Whether `sup_t ∫₀ᵗ‖f‖ds` stays finite on an infinite horizon.
    pub fn satisfies_assumption_a(&self) -> bool {
        match self {
            ForcingSchedule::Zero => true,
            ForcingSchedule::ExponentialDecay { amplitude, rate, .. } => *rate > 0.0 || *amplitude == 0.0,
            ForcingSchedule::Constant { amplitude, .. } => *amplitude == 0.0,
        }
    }

    /// Closed-form `sup_t ∫₀ᵗ‖f‖ds` over an infinite horizon, when finite.
    pub fn accumulation_limit(&self) -> Option<f64> {
        match self {
            ForcingSchedule::Zero => Some(0.0),
            ForcingSchedule::ExponentialDecay { amplitude, rate, .. } if *rate > 0.0 => {
                Some(amplitude.abs() * self.pattern_norm() / rate)
            }
            _ if self.satisfies_assumption_a() => Some(0.0),
            _ => None,
        }
    }

    /// Same schedule expressed on another basis, matching modes by index.
    pub fn remapped(&self, from: &BasisSet, to: &BasisSet) -> Result<Self> {
        let map = |pattern: &[usize]| -> Result<Vec<usize>> {
            pattern
                .iter()
                .map(|&j| {
                    from.modes()
                        .get(j)
                        .and_then(|m| to.position(&m.index))
                        .ok_or_else(|| invalid(alloc::format!("forcing mode {j} has no counterpart in the target basis")))
                })
                .collect()
        };
        Ok(match self {
            ForcingSchedule::Zero => ForcingSchedule::Zero,
            ForcingSchedule::ExponentialDecay { amplitude, rate, pattern } => ForcingSchedule::ExponentialDecay {
                amplitude: *amplitude,
                rate: *rate,
                pattern: map(pattern)?,
            },
            ForcingSchedule::Constant { amplitude, pattern } => ForcingSchedule::Constant {
                amplitude: *amplitude,
                pattern: map(pattern)?,
            },
        })
    }
}

/// Rule for the cumulative time integrals stored with each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Trapezoid rule on the sample times.
    Trapezoid,
    /// Trapezoid rule plus the endpoint correction `h²/12·(g'(a) - g'(b))`
    /// per interval, with `g'` taken exactly from the equations of motion.
    #[default]
    CorrectedTrapezoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub viscosity: f64,
    pub horizon: f64,
    pub dt: f64,
    pub cutoff: u32,
    pub initial: InitialCondition,
    pub forcing: ForcingSchedule,
    pub stride: usize,
    pub seed: u64,
    /// `false` drops the triad term, leaving the forced Stokes system.
    pub nonlinear: bool,
    pub quadrature: Quadrature,
}

impl ScenarioConfig {
    pub fn new(viscosity: f64, horizon: f64, dt: f64, cutoff: u32, initial: InitialCondition) -> Self {
        ScenarioConfig {
            viscosity,
            horizon,
            dt,
            cutoff,
            initial,
            forcing: ForcingSchedule::Zero,
            stride: 1,
            seed: 0,
            nonlinear: true,
            quadrature: Quadrature::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.viscosity > 0.0 && self.viscosity.is_finite()) {
            return Err(invalid("viscosity must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon T must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("step dt must be positive"));
        }
        if self.dt > self.horizon {
            return Err(invalid("step dt exceeds the horizon T"));
        }
        if self.stride == 0 {
            return Err(invalid("sample stride must be at least 1"));
        }
        if self.cutoff == 0 {
            return Err(invalid("cutoff must be at least 1"));
        }
        self.steps().map(|_| ())
    }

    /// Number of fixed steps; `T/dt` must be an integer to within `1e-9` relative.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.horizon / self.dt;
        let n = libm::round(ratio);
        if (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(invalid("horizon T must be an integer multiple of dt"));
        }
        Ok(n as usize)
    }
}

/// Per-sample norms and cumulative integrals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// `‖u‖²`
    pub energy: f64,
    /// `‖∇u‖²`
    pub grad_sq: f64,
    /// `‖u‖_{L⁴}`
    pub l4: f64,
    /// `∫₀ᵗ‖∇u‖²ds`
    pub int_grad_sq: f64,
    /// `∫₀ᵗ‖f‖ds`
    pub int_forcing_norm: f64,
    /// `∫₀ᵗ‖∇u‖⁴ds`
    pub int_grad4: f64,
    /// `∫₀ᵗ(f, u)ds`
    pub int_forcing_work: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CoefficientVector>,
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&CoefficientVector> {
        self.states.last()
    }
}

/// A run that produced a non-finite state.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub time: f64,
    pub partial: Trajectory,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("integration diverged at t = {}", .0.time)]
    Diverged(Box<Divergence>),
}

impl SimulationError {
    pub fn divergence_time(&self) -> Option<f64> {
        match self {
            SimulationError::Diverged(d) => Some(d.time),
            SimulationError::Invalid(_) => None,
        }
    }
}

/// The Galerkin ODE system for one basis, viscosity and forcing.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    basis: Arc<BasisSet>,
    tensor: Option<Arc<TriadTensor>>,
    viscosity: f64,
    forcing: ForcingSchedule,
    l4_table: PhaseTable,
}

impl GalerkinSystem {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let basis = Arc::new(build_basis(config.cutoff)?);
        let tensor = config.nonlinear.then(|| Arc::new(assemble_tensor(&basis)));
        Self::from_parts(basis, tensor, config.viscosity, config.forcing.clone())
    }

    pub fn from_parts(
        basis: Arc<BasisSet>,
        tensor: Option<Arc<TriadTensor>>,
        viscosity: f64,
        forcing: ForcingSchedule,
    ) -> Result<Self> {
        forcing.validate(basis.len())?;
        if let Some(t) = &tensor {
            if t.basis().id() != basis.id() {
                return Err(Error::Dimension {
                    expected: basis.len(),
                    found: t.basis().len(),
                });
            }
        }
        let l4_table = PhaseTable::new(basis.cutoff() as usize, l4_resolution(basis.cutoff(), DEFAULT_DEALIAS));
        Ok(GalerkinSystem {
            basis,
            tensor,
            viscosity,
            forcing,
            l4_table,
        })
    }

    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn tensor(&self) -> Option<&Arc<TriadTensor>> {
        self.tensor.as_ref()
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn forcing(&self) -> &ForcingSchedule {
        &self.forcing
    }

    /// `R(c, t) = -N(c) + f(t)`.
    fn remainder(&self, t: f64, c: &[f64], out: &mut [f64]) {
        match &self.tensor {
            Some(tensor) => {
                tensor.apply_into(c, out);
                out.iter_mut().for_each(|v| *v = -*v);
            }
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
        self.forcing.add_coefficients(t, out);
    }

    /// `N(c)` on raw slices; zero when the nonlinearity is disabled.
    pub fn nonlinear_into(&self, c: &[f64], out: &mut [f64]) {
        match &self.tensor {
            Some(tensor) => tensor.apply_into(c, out),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// `ċ = -νλc - N(c) + f(t)`.
    pub fn time_derivative(&self, t: f64, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; c.len()];
        self.remainder(t, c, &mut out);
        for ((o, &ci), mode) in out.iter_mut().zip(c).zip(self.basis.modes()) {
            *o -= self.viscosity * mode.eigenvalue * ci;
        }
        out
    }

    /// One integrating-factor RK4 step from `(t, c)`.
    pub fn step(&self, c: &CoefficientVector, t: f64, dt: f64) -> Result<CoefficientVector> {
        if c.basis().id() != self.basis.id() {
            return Err(Error::Dimension {
                expected: self.basis.len(),
                found: c.len(),
            });
        }
        let n = c.len();
        let c0 = c.values();
        let (full, half): (Vec<f64>, Vec<f64>) = self
            .basis
            .eigenvalues()
            .map(|l| {
                let rate = self.viscosity * l;
                (libm::exp(-rate * dt), libm::exp(-0.5 * rate * dt))
            })
            .unzip();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut stage = vec![0.0; n];

        self.remainder(t, c0, &mut k1);
        for m in 0..n {
            stage[m] = half[m] * (c0[m] + 0.5 * dt * k1[m]);
        }
        self.remainder(t + 0.5 * dt, &stage, &mut k2);
        for m in 0..n {
            stage[m] = half[m] * c0[m] + 0.5 * dt * k2[m];
        }
        self.remainder(t + 0.5 * dt, &stage, &mut k3);
        for m in 0..n {
            stage[m] = full[m] * c0[m] + dt * half[m] * k3[m];
        }
        self.remainder(t + dt, &stage, &mut k4);

        let next: Vec<f64> = (0..n)
            .map(|m| {
                full[m] * c0[m] + dt / 6.0 * (full[m] * k1[m] + 2.0 * half[m] * (k2[m] + k3[m]) + k4[m])
            })
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t + dt });
        }
        Ok(CoefficientVector::from_raw(self.basis.clone(), next))
    }

    /// Integrand values and their time derivatives at a sample:
    /// `(‖∇u‖², ‖f‖, ‖∇u‖⁴, (f, u))`.
    fn integrands(&self, t: f64, c: &[f64], dc: Option<&[f64]>) -> ([f64; 4], [f64; 4]) {
        let (f, df) = self.forcing.coefficients(t, c.len());
        let lambda = self.basis.eigenvalues();
        let grad_sq: f64 = c.iter().zip(lambda).map(|(v, l)| l * v * v).sum();
        let f_norm = self.forcing.norm_at(t);
        let work: f64 = f.iter().zip(c).map(|(a, b)| a * b).sum();
        let values = [grad_sq, f_norm, grad_sq * grad_sq, work];
        let derivs = match dc {
            None => [0.0; 4],
            Some(dc) => {
                let d_grad: f64 = 2.0
                    * c.iter()
                        .zip(dc)
                        .zip(self.basis.eigenvalues())
                        .map(|((v, dv), l)| l * v * dv)
                        .sum::<f64>();
                let (s, ds) = self.forcing.profile(t);
                let d_fnorm = if s == 0.0 { 0.0 } else { ds * s.signum() * self.forcing.pattern_norm() };
                let d_work: f64 = df.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()
                    + f.iter().zip(dc).map(|(a, b)| a * b).sum::<f64>();
                [d_grad, d_fnorm, 2.0 * grad_sq * d_grad, d_work]
            }
        };
        (values, derivs)
    }
}

/// Accumulates diagnostics sample by sample.
struct Recorder<'a> {
    system: &'a GalerkinSystem,
    quadrature: Quadrature,
    trajectory: Trajectory,
    last: Option<(f64, [f64; 4], [f64; 4])>,
    totals: [f64; 4],
}

impl<'a> Recorder<'a> {
    fn new(system: &'a GalerkinSystem, quadrature: Quadrature) -> Self {
        Recorder {
            system,
            quadrature,
            trajectory: Trajectory {
                times: Vec::new(),
                states: Vec::new(),
                diagnostics: Vec::new(),
            },
            last: None,
            totals: [0.0; 4],
        }
    }

    /// `dc` is the exact time derivative of the state, required by the corrected rule.
    fn record(&mut self, t: f64, c: CoefficientVector, dc: Option<&[f64]>) {
        let (values, derivs) = self.system.integrands(t, c.values(), dc);
        if let Some((t0, v0, d0)) = self.last {
            let h = t - t0;
            for q in 0..4 {
                let mut inc = 0.5 * h * (v0[q] + values[q]);
                if self.quadrature == Quadrature::CorrectedTrapezoid {
                    inc += h * h / 12.0 * (d0[q] - derivs[q]);
                }
                self.totals[q] += inc;
            }
        }
        self.last = Some((t, values, derivs));
        let diag = Diagnostics {
            energy: c.energy(),
            grad_sq: values[0],
            l4: norm_l4_on(&c, &self.system.l4_table),
            int_grad_sq: self.totals[0],
            int_forcing_norm: self.totals[1],
            int_grad4: self.totals[2],
            int_forcing_work: self.totals[3],
        };
        self.trajectory.times.push(t);
        self.trajectory.states.push(c);
        self.trajectory.diagnostics.push(diag);
    }

    fn finish(self) -> Trajectory {
        self.trajectory
    }
}

fn sample_steps(steps: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..=steps).filter(move |&s| s % stride == 0 || s == steps)
}

/// Builds the system and initial state of `config` and marches to the horizon.
pub fn simulate(config: &ScenarioConfig) -> core::result::Result<Trajectory, SimulationError> {
    let system = GalerkinSystem::new(config)?;
    let initial = project_initial(&config.initial, system.basis().clone())?;
    simulate_from(&system, initial, config)
}

/// Fixed-step march of `system` from `initial` using the timing fields of `config`.
pub fn simulate_from(
    system: &GalerkinSystem,
    initial: CoefficientVector,
    config: &ScenarioConfig,
) -> core::result::Result<Trajectory, SimulationError> {
    config.validate()?;
    if initial.basis().id() != system.basis().id() {
        return Err(Error::Dimension {
            expected: system.basis().len(),
            found: initial.len(),
        }
        .into());
    }
    let steps = config.steps()?;
    let needs_derivative = config.quadrature == Quadrature::CorrectedTrapezoid;
    let mut recorder = Recorder::new(system, config.quadrature);
    let mut state = initial;
    for s in 0..=steps {
        let t = s as f64 * config.dt;
        if s % config.stride == 0 || s == steps {
            let dc = needs_derivative.then(|| system.time_derivative(t, state.values()));
            recorder.record(t, state.clone(), dc.as_deref());
        }
        if s == steps {
            break;
        }
        state = match system.step(&state, t, config.dt) {
            Ok(next) => next,
            Err(Error::Divergence { time }) => {
                return Err(SimulationError::Diverged(Box::new(Divergence {
                    time,
                    partial: recorder.finish(),
                })))
            }
            Err(e) => return Err(e.into()),
        };
    }
    Ok(recorder.finish())
}

/// Recomputes diagnostics for stored samples, as [`simulate_from`] would have
/// recorded them.
pub fn replay<I>(system: &GalerkinSystem, quadrature: Quadrature, samples: I) -> Result<Trajectory>
where
    I: IntoIterator<Item = (f64, CoefficientVector)>,
{
    let mut recorder = Recorder::new(system, quadrature);
    let mut previous: Option<f64> = None;
    for (t, state) in samples {
        if state.basis().id() != system.basis().id() {
            return Err(Error::Dimension {
                expected: system.basis().len(),
                found: state.len(),
            });
        }
        if previous.is_some_and(|p| t <= p) {
            return Err(invalid("sample times must increase"));
        }
        previous = Some(t);
        let dc = (quadrature == Quadrature::CorrectedTrapezoid).then(|| system.time_derivative(t, state.values()));
        recorder.record(t, state, dc.as_deref());
    }
    Ok(recorder.finish())
}

/// Closed-form solution of the linear (Stokes) system on the sample times of `config`.
///
/// Supports zero and exponentially decaying forcing:
/// `c_m(t) = c_m(0)e^{-a t} + A w_m (e^{-r t} - e^{-a t})/(a - r)`, `a = νλ_m`.
pub fn stokes_oracle(config: &ScenarioConfig) -> Result<Trajectory> {
    config.validate()?;
    let (amplitude, rate) = match &config.forcing {
        ForcingSchedule::Zero => (0.0, 0.0),
        ForcingSchedule::ExponentialDecay { amplitude, rate, .. } => (*amplitude, *rate),
        ForcingSchedule::Constant { .. } => {
            return Err(invalid("the Stokes oracle supports zero or exponential-decay forcing only"))
        }
    };
    let basis = Arc::new(build_basis(config.cutoff)?);
    let system = GalerkinSystem::from_parts(basis.clone(), None, config.viscosity, config.forcing.clone())?;
    let initial = project_initial(&config.initial, basis.clone())?;
    let (weights, _) = config.forcing.coefficients(0.0, basis.len());
    let weights: Vec<f64> = if amplitude == 0.0 {
        vec![0.0; basis.len()]
    } else {
        weights.iter().map(|w| w / amplitude).collect()
    };
    let steps = config.steps()?;
    let mut recorder = Recorder::new(&system, config.quadrature);
    for s in sample_steps(steps, config.stride) {
        let t = s as f64 * config.dt;
        let values: Vec<f64> = initial
            .values()
            .iter()
            .zip(basis.modes())
            .zip(&weights)
            .map(|((&c0, mode), &w)| {
                let a = config.viscosity * mode.eigenvalue;
                let mut c = c0 * libm::exp(-a * t);
                if w != 0.0 {
                    let gap = a - rate;
                    let duhamel = if gap == 0.0 {
                        t * libm::exp(-a * t)
                    } else {
                        libm::exp(-rate * t) * -libm::expm1(-gap * t) / gap
                    };
                    c += amplitude * w * duhamel;
                }
                c
            })
            .collect();
        let state = CoefficientVector::from_raw(basis.clone(), values);
        let dc = system.time_derivative(t, state.values());
        recorder.record(t, state, Some(&dc));
    }
    Ok(recorder.finish())
}

/// One row of a resolution-refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub cutoff: u32,
    pub modes: usize,
    /// Final-time coefficients on the modes of the coarsest basis.
    pub low_modes: Vec<f64>,
    /// L² distance of `low_modes` to the previous row.
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
}

impl RefinementTable {
    pub fn differences(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.difference).collect()
    }

    /// Successive differences are nonincreasing.
    pub fn is_monotone(&self) -> bool {
        self.differences().windows(2).all(|w| w[1] <= w[0])
    }
}

/// Shared initial data embedded into each basis of a refinement study.
#[derive(Debug, Clone)]
pub struct RefinementPlan {
    base: ScenarioConfig,
    coarse: Arc<BasisSet>,
    runs: Vec<(ScenarioConfig, Arc<BasisSet>, CoefficientVector)>,
}

impl RefinementPlan {
    pub fn new(base: &ScenarioConfig, cutoffs: &[u32]) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(invalid("refinement needs at least one cutoff"));
        }
        if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("refinement cutoffs must be strictly increasing"));
        }
        let coarse = Arc::new(build_basis(cutoffs[0])?);
        let seed_cutoff = match base.initial {
            InitialCondition::Explicit(_) => base.cutoff,
            _ => base.cutoff.max(cutoffs[cutoffs.len() - 1]),
        };
        let seed_basis = Arc::new(build_basis(seed_cutoff)?);
        let full = project_initial(&base.initial, seed_basis.clone())?;
        let coarse_init = embed(&full, coarse.clone());
        if (full.energy() - coarse_init.energy()).abs() > 1e-12 * full.energy().max(f64::MIN_POSITIVE) {
            return Err(invalid("initial data is not representable at the smallest cutoff"));
        }
        let forcing_basis = build_basis(base.cutoff)?;
        let mut runs = Vec::with_capacity(cutoffs.len());
        for &k in cutoffs {
            let basis = Arc::new(build_basis(k)?);
            let mut config = base.clone();
            config.cutoff = k;
            config.forcing = base.forcing.remapped(&forcing_basis, &basis)?;
            let init = embed(&coarse_init, basis.clone());
            config.initial = InitialCondition::Explicit(init.values().to_vec());
            runs.push((config, basis, init));
        }
        Ok(RefinementPlan {
            base: base.clone(),
            coarse,
            runs,
        })
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn base(&self) -> &ScenarioConfig {
        &self.base
    }

    /// Config of run `idx`, with the embedded initial data as an explicit list.
    pub fn config(&self, idx: usize) -> &ScenarioConfig {
        &self.runs[idx].0
    }

    pub fn run(&self, idx: usize) -> core::result::Result<Trajectory, SimulationError> {
        simulate(&self.runs[idx].0)
    }

    pub fn table(&self, trajectories: &[Trajectory]) -> Result<RefinementTable> {
        if trajectories.len() != self.runs.len() {
            return Err(Error::Dimension {
                expected: self.runs.len(),
                found: trajectories.len(),
            });
        }
        let mut rows: Vec<RefinementRow> = Vec::with_capacity(trajectories.len());
        for ((config, basis, _), traj) in self.runs.iter().zip(trajectories) {
            let last = traj.last_state().ok_or_else(|| invalid("empty trajectory"))?;
            let low = embed(last, self.coarse.clone()).into_values();
            let difference = rows.last().map(|prev| {
                libm::sqrt(prev.low_modes.iter().zip(&low).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            });
            rows.push(RefinementRow {
                cutoff: config.cutoff,
                modes: basis.len(),
                low_modes: low,
                difference,
            });
        }
        Ok(RefinementTable { rows })
    }
}

/// Copies coefficients between bases by mode identity; unmatched modes are dropped or zero.
pub fn embed(c: &CoefficientVector, target: Arc<BasisSet>) -> CoefficientVector {
    let mut values = vec![0.0; target.len()];
    for (mode, &v) in c.basis().modes().iter().zip(c.values()) {
        if let Some(j) = target.position(&mode.index) {
            values[j] = v;
        }
    }
    CoefficientVector::from_raw(target, values)
}

/// Sequential refinement study over increasing cutoffs.
pub fn refine_study(base: &ScenarioConfig, cutoffs: &[u32]) -> core::result::Result<RefinementTable, SimulationError> {
    let plan = RefinementPlan::new(base, cutoffs)?;
    let trajectories = (0..plan.len()).map(|i| plan.run(i)).collect::<core::result::Result<Vec<_>, _>>()?;
    Ok(plan.table(&trajectories)?)
}
