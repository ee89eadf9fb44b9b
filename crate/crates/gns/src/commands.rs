//! Subcommand implementations. Each returns the process exit code or a
//! [`Failure`] carrying it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use gns_core::field::to_grid;
use gns_core::integrator::{replay, simulate_from, RefinementPlan};
use gns_core::verifier::{self, BoundReport, Tolerances, TwinOutcome};
use gns_core::{
    assemble_tensor, build_basis, project_initial, stokes_oracle, CoefficientVector, GalerkinSystem, ScenarioConfig,
    SimulationError, Trajectory,
};

use crate::config::{ConfigError, RunConfig};
use crate::io::{self, IoError, Manifest};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

pub const THREADS_VAR: &str = "GNS_THREADS";

/// Samples at which the L⁴ inequalities are evaluated in `verify`.
const INEQUALITY_SAMPLES: usize = 20;
const INTERPOLATION_EPSILONS: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        usage(e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        usage(e.to_string())
    }
}

impl From<gns_core::Error> for Failure {
    fn from(e: gns_core::Error) -> Self {
        usage(e.to_string())
    }
}

/// Worker count from `GNS_THREADS`; 1 when unset.
pub fn thread_count() -> Result<usize, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(usage(format!("{THREADS_VAR} must be a positive integer, found `{v}`"))),
        },
    }
}

/// Runs independent jobs on up to `threads` scoped workers, preserving order.
pub fn run_jobs<T, F>(jobs: Vec<F>, threads: usize) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if threads <= 1 || jobs.len() <= 1 {
        return jobs.into_iter().map(|f| f()).collect();
    }
    let mut out = Vec::with_capacity(jobs.len());
    let mut jobs = jobs.into_iter().peekable();
    while jobs.peek().is_some() {
        let batch: Vec<F> = jobs.by_ref().take(threads).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = batch.into_iter().map(|f| s.spawn(f)).collect();
            out.extend(handles.into_iter().map(|h| h.join().expect("worker panicked")));
        });
    }
    out
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

struct Run<'a> {
    command: &'a str,
    config: &'a RunConfig,
    dir: &'a Path,
    outputs: Vec<String>,
    started: Instant,
}

impl<'a> Run<'a> {
    fn new(command: &'a str, config: &'a RunConfig, dir: &'a Path) -> Result<Self, Failure> {
        prepare_dir(dir)?;
        Ok(Run {
            command,
            config,
            dir,
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn manifest(mut self, seed: u64, failure_time: Option<f64>, exit_code: i32) -> Result<i32, Failure> {
        let path = self.path("manifest.json");
        let m = Manifest {
            scenario: self.config.scenario_id.clone(),
            command: self.command.to_string(),
            config: self.config.echo(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            outputs: self.outputs.clone(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            failure_time,
            exit_code,
        };
        io::write_manifest(&path, &m)?;
        Ok(exit_code)
    }
}

fn write_run(run: &mut Run, traj: &Trajectory, states: bool) -> Result<(), Failure> {
    let p = run.path("trajectory.csv");
    io::write_trajectory(&p, traj)?;
    if states {
        let p = run.path("states.csv");
        io::write_states(&p, traj)?;
    }
    Ok(())
}

fn report_failures(reports: &[BoundReport]) -> i32 {
    let failed: Vec<&BoundReport> = reports.iter().filter(|r| !r.satisfied).collect();
    for r in failed.iter().take(10) {
        eprintln!(
            "violated: {} at t = {} (lhs {:e} > rhs {:e})",
            r.name,
            r.time.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
            r.lhs,
            r.rhs
        );
    }
    if failed.len() > 10 {
        eprintln!("... {} violations in total", failed.len());
    }
    if failed.is_empty() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub states: bool,
    pub export_grid: Option<usize>,
}

pub fn simulate(config_path: &Path, dir: &Path, opts: &SimulateOptions) -> Result<i32, Failure> {
    let config = RunConfig::from_path(config_path)?;
    let mut run = Run::new("simulate", &config, dir)?;
    let sc = &config.scenario;
    let system = GalerkinSystem::new(sc)?;
    let initial = project_initial(&sc.initial, system.basis().clone())?;
    match simulate_from(&system, initial, sc) {
        Ok(traj) => {
            write_run(&mut run, &traj, opts.states)?;
            if let Some(m) = opts.export_grid {
                let grid = to_grid(traj.last_state().expect("nonempty trajectory"), m)?;
                let p = run.path("grid_final.bin");
                io::write_grid_binary(&p, &grid)?;
                if m <= 16 {
                    let p = run.path("grid_final.csv");
                    io::write_grid_csv(&p, &grid)?;
                }
            }
            run.manifest(sc.seed, None, EXIT_PASS)
        }
        Err(SimulationError::Diverged(d)) => {
            write_run(&mut run, &d.partial, opts.states)?;
            eprintln!("integration diverged at t = {}", d.time);
            run.manifest(sc.seed, Some(d.time), EXIT_DIVERGED)
        }
        Err(SimulationError::Invalid(e)) => Err(e.into()),
    }
}

/// Stokes closed-form trajectory for the configured data and forcing.
pub fn oracle(config_path: &Path, dir: &Path, states: bool) -> Result<i32, Failure> {
    let config = RunConfig::from_path(config_path)?;
    let mut run = Run::new("oracle", &config, dir)?;
    let traj = stokes_oracle(&config.scenario)?;
    write_run(&mut run, &traj, states)?;
    run.manifest(config.scenario.seed, None, EXIT_PASS)
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub states: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

fn mismatch(what: impl Into<String>) -> Failure {
    usage(format!("basis metadata mismatch: {}", what.into()))
}

/// Checks a recorded trajectory (and its state dump, when present) against the estimates.
pub fn verify(trajectory: &Path, config_path: &Path, opts: &VerifyOptions) -> Result<i32, Failure> {
    let config = RunConfig::from_path(config_path)?;
    let sc = &config.scenario;
    let tol = config.tolerances;
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| trajectory.parent().map(Path::to_path_buf).unwrap_or_default());
    let sibling = |name: &str| trajectory.parent().map(|p| p.join(name)).filter(|p| p.exists());

    if let Some(mpath) = sibling("manifest.json") {
        let recorded = RunConfig::parse(&io::read_manifest(&mpath)?.config)?;
        let r = &recorded.scenario;
        if r.cutoff != sc.cutoff {
            return Err(mismatch(format!("trajectory has cutoff {}, config has {}", r.cutoff, sc.cutoff)));
        }
        if r.viscosity != sc.viscosity {
            return Err(mismatch(format!("trajectory has nu = {}, config has {}", r.viscosity, sc.viscosity)));
        }
    }

    let table = io::read_trajectory(trajectory)?;
    let times = table.column(0);
    let energies = table.column(1);
    let int_grad = table.column(4);
    let int_f = table.column(5);

    let system = GalerkinSystem::new(sc)?;
    let basis = system.basis().clone();
    let states_path = opts.states.clone().or_else(|| sibling("states.csv"));
    let replayed = match &states_path {
        None => None,
        Some(p) => {
            let raw = io::read_states(p)?;
            if let Some((_, v)) = raw.first() {
                if v.len() != basis.len() {
                    return Err(mismatch(format!(
                        "{} lists {} modes per sample, cutoff {} has {}",
                        p.display(),
                        v.len(),
                        sc.cutoff,
                        basis.len()
                    )));
                }
            }
            if raw.len() != times.len() || raw.iter().zip(&times).any(|((t, _), s)| t != s) {
                return Err(mismatch(format!("{} and {} sample different times", p.display(), trajectory.display())));
            }
            let samples = raw
                .into_iter()
                .map(|(t, v)| CoefficientVector::new(basis.clone(), v).map(|c| (t, c)))
                .collect::<Result<Vec<_>, _>>()?;
            Some(replay(&system, sc.quadrature, samples)?)
        }
    };
    let work: Vec<f64> = match (&replayed, sc.forcing.is_zero()) {
        (Some(tr), _) => tr.diagnostics.iter().map(|d| d.int_forcing_work).collect(),
        (None, true) => vec![0.0; times.len()],
        (None, false) => {
            return Err(usage("forced scenarios need the state dump (states.csv) to evaluate ∫(f,u)ds"));
        }
    };

    let mut reports = verifier::energy_identity_series(&times, &energies, &int_grad, &work, sc.viscosity, tol.energy);
    let u0_norm = energies[0].sqrt();
    let f_acc = int_f.iter().copied().fold(0.0, f64::max);
    let apriori =
        verifier::apriori_bound_series(&times, &energies, &int_grad, sc.viscosity, u0_norm, f_acc, tol.algebraic.max(tol.energy));
    let (sup_e, t_sup) = times
        .iter()
        .zip(&energies)
        .fold((f64::NEG_INFINITY, None), |(s, a), (&t, &e)| if e > s { (e, Some(t)) } else { (s, a) });
    reports.push(apriori.norm);
    reports.push(apriori.energy);
    reports.push(BoundReport::new("parseval_sup", sup_e, apriori.b_star * apriori.b_star, tol.energy, t_sup));
    reports.push(verifier::assumption_a_series(&times, &int_f, &sc.forcing, tol.algebraic).report);

    if let Some(tr) = &replayed {
        for (k, d) in tr.diagnostics.iter().enumerate() {
            let t = Some(times[k]);
            let row = &table.rows[k];
            let pairs = [
                ("state_energy", d.energy, row[1]),
                ("state_grad_sq", d.grad_sq, row[2]),
                ("state_l4", d.l4, row[3]),
                ("state_int_grad2", d.int_grad_sq, row[4]),
                ("state_int_f", d.int_forcing_norm, row[5]),
                ("state_int_grad4", d.int_grad4, row[6]),
            ];
            for (name, from_states, recorded) in pairs {
                let scale = tol.algebraic * from_states.abs().max(recorded.abs()).max(f64::MIN_POSITIVE);
                reports.push(BoundReport::new(name, (from_states - recorded).abs(), scale, 0.0, t));
            }
        }
        let weak = verifier::weak_residual(tr, &system)?;
        reports.extend(weak.reports(tol.weak_residual));
        for k in verifier::spread_indices(tr.len(), INEQUALITY_SAMPLES) {
            let (t, d) = (times[k], &tr.diagnostics[k]);
            if d.energy == 0.0 {
                continue;
            }
            let (l2, h1) = (d.energy.sqrt(), d.grad_sq.sqrt());
            reports.push(verifier::ladyzhenskaya_from_norms(l2, h1, d.l4, Some(t))?.report);
            for eps in INTERPOLATION_EPSILONS {
                let mut r = verifier::interpolation_from_norms(l2, h1, d.l4, eps, tol.algebraic)?;
                r.time = Some(t);
                reports.push(r);
            }
        }
    }

    prepare_dir(&dir)?;
    io::write_report(&dir.join("report.json"), &reports)?;
    Ok(report_failures(&reports))
}

#[derive(Debug, Clone, Default)]
pub struct TwinOptions {
    pub delta: f64,
    pub seed: Option<u64>,
}

fn diverged(run: Run, seed: u64, e: SimulationError) -> Result<i32, Failure> {
    match e {
        SimulationError::Diverged(d) => {
            eprintln!("integration diverged at t = {}", d.time);
            run.manifest(seed, Some(d.time), EXIT_DIVERGED)
        }
        SimulationError::Invalid(e) => Err(e.into()),
    }
}

/// Runs the twin pair and every pair-based check on all samples.
pub fn twin_reports(outcome: &TwinOutcome, viscosity: f64, tol: &Tolerances) -> Result<Vec<BoundReport>, gns_core::Error> {
    let mut reports = outcome.envelope.clone();
    reports.extend(outcome.splitting.iter().cloned());
    reports.extend(verifier::pointwise_bound_check(&outcome.u, &outcome.w, tol.algebraic)?);
    reports.extend(verifier::by_parts_check(&outcome.u, &outcome.w, viscosity, tol.algebraic)?);
    Ok(reports)
}

/// Simulates `u` and `w = u + δ·direction`, concurrently when allowed.
pub fn run_twin(sc: &ScenarioConfig, delta: f64, seed: u64, threads: usize) -> Result<(Trajectory, Trajectory), SimulationError> {
    let system = GalerkinSystem::new(sc)?;
    let u0 = project_initial(&sc.initial, system.basis().clone())?;
    let w0 = verifier::twin_initial(&u0, delta, seed)?;
    let jobs: Vec<Box<dyn FnOnce() -> Result<Trajectory, SimulationError> + Send>> = vec![
        Box::new(|| simulate_from(&system, u0, sc)),
        Box::new(|| simulate_from(&system, w0, sc)),
    ];
    let mut out = run_jobs(jobs, threads).into_iter();
    let u = out.next().expect("two runs")?;
    let w = out.next().expect("two runs")?;
    Ok((u, w))
}

pub fn twin(config_path: &Path, dir: &Path, opts: &TwinOptions) -> Result<i32, Failure> {
    let config = RunConfig::from_path(config_path)?;
    if !(opts.delta >= 0.0 && opts.delta.is_finite()) {
        return Err(usage(format!("--delta must be nonnegative, found {}", opts.delta)));
    }
    let threads = thread_count()?;
    let sc = &config.scenario;
    let seed = opts.seed.unwrap_or(sc.seed);
    let mut run = Run::new("twin", &config, dir)?;
    let (u, w) = match run_twin(sc, opts.delta, seed, threads) {
        Ok(pair) => pair,
        Err(e) => return diverged(run, seed, e),
    };
    let outcome = TwinOutcome::from_runs(u, w, sc.viscosity, &config.tolerances, 10)?;
    let reports = twin_reports(&outcome, sc.viscosity, &config.tolerances)?;
    let p = run.path("separation.csv");
    io::write_separation(&p, &outcome.series)?;
    let p = run.path("report.json");
    io::write_report(&p, &reports)?;
    let code = report_failures(&reports);
    run.manifest(seed, None, code)
}

pub fn parse_cutoffs(text: &str) -> Result<Vec<u32>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse::<u32>().map_err(|_| usage(format!("--cutoffs expects a comma list of integers, found `{text}`"))))
        .collect()
}

/// `max_k (d_{k+1} - d_k) ≤ 0` over successive refinement differences.
pub fn monotonicity_report(differences: &[f64]) -> BoundReport {
    let worst = differences.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let lhs = if worst.is_finite() { worst } else { 0.0 };
    BoundReport::new("refinement_monotone", lhs, 0.0, 0.0, None)
}

pub fn refine(config_path: &Path, dir: &Path, cutoffs: &[u32]) -> Result<i32, Failure> {
    let config = RunConfig::from_path(config_path)?;
    let threads = thread_count()?;
    let sc = &config.scenario;
    let plan = RefinementPlan::new(sc, cutoffs)?;
    let mut run = Run::new("refine", &config, dir)?;
    let jobs: Vec<_> = (0..plan.len()).map(|i| { let plan = &plan; move || plan.run(i) }).collect();
    let results = run_jobs(jobs, threads);
    let mut trajectories = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(t) => trajectories.push(t),
            Err(e) => return diverged(run, sc.seed, e),
        }
    }
    let table = plan.table(&trajectories)?;
    let p = run.path("convergence.csv");
    io::write_convergence(&p, &table)?;
    let reports = vec![monotonicity_report(&table.differences())];
    let p = run.path("report.json");
    io::write_report(&p, &reports)?;
    let code = report_failures(&reports);
    run.manifest(sc.seed, None, code)
}

fn output(path: Option<&Path>) -> Result<Box<dyn std::io::Write>, Failure> {
    Ok(match path {
        None => Box::new(std::io::stdout().lock()),
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| usage(format!("cannot create {}: {e}", p.display())))?),
    })
}

/// A closed stdout (`| head`) ends the listing quietly.
fn listing(result: csv::Result<()>) -> Result<i32, Failure> {
    match result {
        Ok(()) => Ok(EXIT_PASS),
        Err(e) => match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe => Ok(EXIT_PASS),
            _ => Err(usage(e.to_string())),
        },
    }
}

pub fn basis_info(cutoff: u32, out: Option<&Path>) -> Result<i32, Failure> {
    let basis = build_basis(cutoff)?;
    listing(io::write_basis(output(out)?, &basis))
}

pub fn tensor_dump(cutoff: u32, out: Option<&Path>) -> Result<i32, Failure> {
    let tensor = assemble_tensor(&Arc::new(build_basis(cutoff)?));
    listing(io::write_tensor(output(out)?, &tensor))
}
