//! Flat `key=value` scenario files.
//!
//! ```text
//! # Taylor-Green decay
//! nu=1
//! T=1
//! dt=1e-3
//! cutoff=2
//! ic=taylor_green
//! forcing=exp:1:1:0,1
//! ```
//!
//! `ic` is one of `taylor_green[:amp]`, `beltrami:<shell>:<seed>[:<amp>]`,
//! `random_band:<max_shell>:<seed>:<amp>` or `explicit:c0,c1,...`.
//! `forcing` is `zero`, `exp:<amp>:<rate>:<j,...>` or `const:<amp>:<j,...>`
//! with 0-based mode indices.

use std::fmt;
use std::str::FromStr;

use gns_core::verifier::Tolerances;
use gns_core::{ForcingSchedule, InitialCondition, Quadrature, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line, when the problem is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn at(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        message: message.into(),
    }
}

const KEYS: &[&str] = &[
    "scenario",
    "nu",
    "T",
    "dt",
    "cutoff",
    "ic",
    "forcing",
    "stride",
    "seed",
    "nonlinear",
    "quadrature",
    "envelope_slack",
    "energy_tol",
    "weak_tol",
];

/// A parsed scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario_id: String,
    pub scenario: ScenarioConfig,
    pub tolerances: Tolerances,
}

fn number<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| at(line, format!("`{key}` expects a number, found `{v}`")))
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = number(line, key, v)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(at(line, format!("`{key}` must be positive and finite, found `{v}`")));
    }
    Ok(x)
}

fn indices(line: usize, v: &str) -> Result<Vec<usize>, ConfigError> {
    v.split(',').map(|j| number(line, "mode index", j)).collect()
}

pub fn parse_initial(line: usize, v: &str) -> Result<InitialCondition, ConfigError> {
    let parts: Vec<&str> = v.split(':').collect();
    let amp = |i: usize| -> Result<f64, ConfigError> {
        match parts.get(i) {
            None => Ok(1.0),
            Some(s) => number(line, "ic amplitude", s),
        }
    };
    match parts[0] {
        "taylor_green" if parts.len() <= 2 => Ok(InitialCondition::TaylorGreen { amplitude: amp(1)? }),
        "beltrami" if (3..=4).contains(&parts.len()) => Ok(InitialCondition::Beltrami {
            shell: number(line, "beltrami shell", parts[1])?,
            seed: number(line, "beltrami seed", parts[2])?,
            amplitude: amp(3)?,
        }),
        "random_band" if parts.len() == 4 => Ok(InitialCondition::RandomBand {
            max_shell: number(line, "random_band max shell", parts[1])?,
            seed: number(line, "random_band seed", parts[2])?,
            amplitude: amp(3)?,
        }),
        "explicit" if parts.len() == 2 => Ok(InitialCondition::Explicit(
            parts[1].split(',').map(|c| number(line, "explicit coefficient", c)).collect::<Result<_, _>>()?,
        )),
        _ => Err(at(
            line,
            format!("unrecognized initial condition `{v}` (taylor_green[:amp], beltrami:<shell>:<seed>[:<amp>], random_band:<max_shell>:<seed>:<amp>, explicit:<c,...>)"),
        )),
    }
}

pub fn parse_forcing(line: usize, v: &str) -> Result<ForcingSchedule, ConfigError> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["zero"] => Ok(ForcingSchedule::Zero),
        ["exp", a, r, p] => Ok(ForcingSchedule::ExponentialDecay {
            amplitude: number(line, "forcing amplitude", a)?,
            rate: number(line, "forcing rate", r)?,
            pattern: indices(line, p)?,
        }),
        ["const", a, p] => Ok(ForcingSchedule::Constant {
            amplitude: number(line, "forcing amplitude", a)?,
            pattern: indices(line, p)?,
        }),
        _ => Err(at(line, format!("unrecognized forcing `{v}` (zero, exp:<amp>:<rate>:<j,...>, const:<amp>:<j,...>)"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen: Vec<(&str, usize, &str)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(at(line, format!("expected key=value, found `{body}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(at(line, format!("unknown key `{key}`")));
            }
            if let Some((_, first, _)) = seen.iter().find(|(k, _, _)| *k == key) {
                return Err(at(line, format!("duplicate key `{key}` (first set on line {first})")));
            }
            if value.is_empty() {
                return Err(at(line, format!("`{key}` has no value")));
            }
            seen.push((key, line, value));
        }
        let get = |key: &str| seen.iter().find(|(k, _, _)| *k == key).map(|(_, l, v)| (*l, *v));
        let required = |key: &str| {
            get(key).ok_or_else(|| ConfigError {
                line: None,
                message: format!("missing required key `{key}`"),
            })
        };

        let (l, v) = required("nu")?;
        let viscosity = positive(l, "nu", v)?;
        let (l, v) = required("T")?;
        let horizon = positive(l, "T", v)?;
        let (dt_line, v) = required("dt")?;
        let dt = positive(dt_line, "dt", v)?;
        let (l, v) = required("cutoff")?;
        let cutoff: u32 = number(l, "cutoff", v)?;
        if cutoff == 0 {
            return Err(at(l, "`cutoff` must be at least 1"));
        }
        let (l, v) = required("ic")?;
        let initial = parse_initial(l, v)?;

        let mut scenario = ScenarioConfig::new(viscosity, horizon, dt, cutoff, initial);
        if let Some((l, v)) = get("forcing") {
            scenario.forcing = parse_forcing(l, v)?;
        }
        if let Some((l, v)) = get("stride") {
            scenario.stride = number(l, "stride", v)?;
            if scenario.stride == 0 {
                return Err(at(l, "`stride` must be at least 1"));
            }
        }
        if let Some((l, v)) = get("seed") {
            scenario.seed = number(l, "seed", v)?;
        }
        if let Some((l, v)) = get("nonlinear") {
            scenario.nonlinear = match v {
                "on" => true,
                "off" => false,
                _ => return Err(at(l, format!("`nonlinear` expects on|off, found `{v}`"))),
            };
        }
        if let Some((l, v)) = get("quadrature") {
            scenario.quadrature = match v {
                "trapezoid" => Quadrature::Trapezoid,
                "corrected" => Quadrature::CorrectedTrapezoid,
                _ => return Err(at(l, format!("`quadrature` expects trapezoid|corrected, found `{v}`"))),
            };
        }
        let modes = 2 * ((2 * cutoff as usize + 1).pow(3) - 1);
        if let InitialCondition::Explicit(values) = &scenario.initial {
            if values.len() != modes {
                let (l, _) = required("ic")?;
                return Err(at(l, format!("explicit data lists {} coefficients; cutoff {cutoff} has {modes} modes", values.len())));
            }
        }
        if let Some((l, _)) = get("forcing") {
            scenario.forcing.validate(modes).map_err(|e| at(l, e.to_string()))?;
        }
        if dt > horizon {
            return Err(at(dt_line, format!("dt = {dt} exceeds T = {horizon}")));
        }
        if scenario.steps().is_err() {
            return Err(at(dt_line, format!("T = {horizon} is not an integer multiple of dt = {dt}")));
        }

        let mut tolerances = Tolerances::default();
        let slack = |key: &str, default: f64| -> Result<f64, ConfigError> {
            match get(key) {
                None => Ok(default),
                Some((l, v)) => {
                    let x: f64 = number(l, key, v)?;
                    if !(x >= 0.0 && x.is_finite()) {
                        return Err(at(l, format!("`{key}` must be nonnegative, found `{v}`")));
                    }
                    Ok(x)
                }
            }
        };
        tolerances.envelope_slack = slack("envelope_slack", tolerances.envelope_slack)?;
        tolerances.energy = slack("energy_tol", tolerances.energy)?;
        tolerances.weak_residual = slack("weak_tol", tolerances.weak_residual)?;

        let scenario_id = get("scenario").map(|(_, v)| v.to_string()).unwrap_or_else(|| "unnamed".to_string());
        Ok(RunConfig {
            scenario_id,
            scenario,
            tolerances,
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Canonical text that parses back to `self`.
    pub fn echo(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("scenario", self.scenario_id.clone());
        put("nu", s.viscosity.to_string());
        put("T", s.horizon.to_string());
        put("dt", s.dt.to_string());
        put("cutoff", s.cutoff.to_string());
        put("ic", initial_text(&s.initial));
        put("forcing", forcing_text(&s.forcing));
        put("stride", s.stride.to_string());
        put("seed", s.seed.to_string());
        put("nonlinear", if s.nonlinear { "on" } else { "off" }.to_string());
        put(
            "quadrature",
            match s.quadrature {
                Quadrature::Trapezoid => "trapezoid",
                Quadrature::CorrectedTrapezoid => "corrected",
            }
            .to_string(),
        );
        put("envelope_slack", self.tolerances.envelope_slack.to_string());
        put("energy_tol", self.tolerances.energy.to_string());
        put("weak_tol", self.tolerances.weak_residual.to_string());
        out
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn initial_text(ic: &InitialCondition) -> String {
    match ic {
        InitialCondition::TaylorGreen { amplitude } => format!("taylor_green:{amplitude}"),
        InitialCondition::Beltrami { shell, seed, amplitude } => format!("beltrami:{shell}:{seed}:{amplitude}"),
        InitialCondition::RandomBand { max_shell, seed, amplitude } => format!("random_band:{max_shell}:{seed}:{amplitude}"),
        InitialCondition::Explicit(values) => format!("explicit:{}", join(values)),
    }
}

pub fn forcing_text(f: &ForcingSchedule) -> String {
    match f {
        ForcingSchedule::Zero => "zero".to_string(),
        ForcingSchedule::ExponentialDecay { amplitude, rate, pattern } => format!("exp:{amplitude}:{rate}:{}", join(pattern)),
        ForcingSchedule::Constant { amplitude, pattern } => format!("const:{amplitude}:{}", join(pattern)),
    }
}
