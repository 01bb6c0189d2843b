//! Run configuration: a JSON file of record with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use phred_core::analysis::{FrequencyGrid, SignalKind};
use phred_core::irka::{InitStrategy, IrkaOptions};
use phred_core::linalg::DEFAULT_DENSE_CEILING;

use crate::model::{Model, ModelSpec};
use crate::CliError;

pub const DENSE_CEILING_ENV: &str = "PHRED_DENSE_CEILING";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    IrkaPh,
    OneStep,
    EffortBal,
    Balanced,
    IrkaGeneral,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::IrkaPh, Method::OneStep, Method::EffortBal, Method::Balanced, Method::IrkaGeneral];

    pub fn name(self) -> &'static str {
        match self {
            Method::IrkaPh => "irka_ph",
            Method::OneStep => "one_step",
            Method::EffortBal => "effort_bal",
            Method::Balanced => "balanced",
            Method::IrkaGeneral => "irka_general",
        }
    }

    pub fn parse(s: &str) -> Result<Method, CliError> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| CliError::Config(format!("unknown method '{s}' (expected one of irka_ph, one_step, effort_bal, balanced, irka_general)")))
    }

    /// Methods that keep the port-Hamiltonian structure.
    pub fn structured(self) -> bool {
        matches!(self, Method::IrkaPh | Method::OneStep | Method::EffortBal)
    }

    pub fn uses_init(self) -> bool {
        matches!(self, Method::IrkaPh | Method::OneStep | Method::IrkaGeneral)
    }
}

/// Where the full-order model comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Files { manifest: PathBuf },
    Generated(ModelSpec),
}

/// The JSON file of record. Every field is optional; flags override fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSource>,
    /// Previously reduced models (manifests) to include in simulate and freq.
    #[serde(default)]
    pub reduced: Vec<PathBuf>,
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub order: Option<usize>,
    /// `A:STEP:B`, `A,B,C` or a single order.
    pub orders: Option<String>,
    pub init: Option<String>,
    pub grid: Option<String>,
    pub signal: Option<String>,
    pub tol_shift: Option<f64>,
    pub max_iter: Option<usize>,
    pub stagnation_window: Option<usize>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub t_end: Option<f64>,
    pub samples: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    /// One-based `[input, output]` pair for simulation.
    pub channel: Option<[usize; 2]>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overridden_by(mut self, flags: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(model, method, methods, order, orders, init, grid, signal, tol_shift, max_iter, stagnation_window, jobs, seed, out, t_end, samples, rtol, atol, channel);
        if !flags.reduced.is_empty() {
            self.reduced = flags.reduced;
        }
        self
    }
}

/// How the initial interpolation data is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Strategy(InitStrategy),
    File(PathBuf),
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CliError> {
    s.trim().parse().map_err(|_| CliError::Config(format!("invalid {what} '{s}'")))
}

pub fn parse_orders(s: &str) -> Result<Vec<usize>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let orders: Vec<usize> = match parts[..] {
        [one] => one.split(',').map(|t| num(t, "order")).collect::<Result<_, _>>()?,
        [a, step, b] => {
            let (a, step, b): (usize, usize, usize) = (num(a, "order")?, num(step, "order step")?, num(b, "order")?);
            if step == 0 || b < a {
                return Err(CliError::Config(format!("invalid order range '{s}'")));
            }
            (a..=b).step_by(step).collect()
        }
        _ => return Err(CliError::Config(format!("invalid order range '{s}' (expected A:STEP:B)"))),
    };
    if orders.is_empty() || orders.contains(&0) {
        return Err(CliError::Config(format!("orders must be positive, got '{s}'")));
    }
    Ok(orders)
}

pub fn parse_init(s: &str, seed: u64) -> Result<InitSpec, CliError> {
    let parts: Vec<&str> = s.splitn(2, ':').collect();
    let args = |rest: &str, k: usize| -> Result<Vec<f64>, CliError> {
        let v: Vec<f64> = rest.split(':').map(|t| num(t, "init parameter")).collect::<Result<_, _>>()?;
        if v.len() != k {
            return Err(CliError::Config(format!("init '{s}' needs {k} parameters")));
        }
        Ok(v)
    };
    let strategy = match (parts[0], parts.get(1)) {
        ("file", Some(p)) => return Ok(InitSpec::File(PathBuf::from(p))),
        ("logspace", Some(rest)) => {
            let v = args(rest, 2)?;
            InitStrategy::Logspace { lo: v[0], hi: v[1] }
        }
        ("lhp-logspace", Some(rest)) => {
            let v = args(rest, 2)?;
            InitStrategy::LhpLogspace { lo: v[0], hi: v[1] }
        }
        ("complex", Some(rest)) => {
            let v = args(rest, 4)?;
            InitStrategy::ComplexGrid { re_lo: v[0], re_hi: v[1], im_lo: v[2], im_hi: v[3] }
        }
        ("perturbed-poles", Some(rest)) => InitStrategy::PerturbedPoles { eps: args(rest, 1)?[0] },
        ("reflected-poles", None) => InitStrategy::ReflectedPoles,
        ("random", Some(rest)) => {
            let v = args(rest, 2)?;
            InitStrategy::Random { lo: v[0], hi: v[1], seed }
        }
        _ => {
            return Err(CliError::Config(format!(
                "invalid init '{s}' (expected logspace:LO:HI, file:PATH, perturbed-poles:EPS, reflected-poles, lhp-logspace:LO:HI, complex:RLO:RHI:ILO:IHI or random:LO:HI)"
            )))
        }
    };
    Ok(InitSpec::Strategy(strategy))
}

pub fn parse_grid(s: &str) -> Result<FrequencyGrid, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        ["logspace", lo, hi, n] => FrequencyGrid::logspace(num(lo, "grid bound")?, num(hi, "grid bound")?, num(n, "grid size")?)
            .map_err(|e| CliError::Config(e.to_string())),
        _ => Err(CliError::Config(format!("invalid grid '{s}' (expected logspace:LO:HI:N)"))),
    }
}

pub fn parse_signal(s: &str) -> Result<SignalKind, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        ["decaying"] => Ok(SignalKind::decaying_default()),
        ["decaying", a, b] => Ok(SignalKind::DecayingSinusoid { alpha: num(a, "decay rate")?, beta: num(b, "frequency")? }),
        ["square"] => Ok(SignalKind::square_default()),
        ["square", p] => Ok(SignalKind::SquareWave { period: num(p, "period")? }),
        ["zero"] => Ok(SignalKind::Zero),
        _ => Err(CliError::Config(format!("invalid signal '{s}' (expected decaying:ALPHA:BETA, square:PERIOD or zero)"))),
    }
}

/// Dense-solver size limit, from the environment when set.
pub fn dense_ceiling() -> Result<usize, CliError> {
    match std::env::var(DENSE_CEILING_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{DENSE_CEILING_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(DEFAULT_DENSE_CEILING),
    }
}

/// A validated configuration with every field resolved to its default where unset.
#[derive(Clone, Debug)]
pub struct Settings {
    pub model: ModelSource,
    pub reduced: Vec<PathBuf>,
    pub methods: Vec<Method>,
    pub orders: Vec<usize>,
    pub init: InitSpec,
    pub grid: FrequencyGrid,
    pub signal: SignalKind,
    pub irka: IrkaOptions,
    pub jobs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub t_end: f64,
    pub samples: usize,
    pub rtol: f64,
    pub atol: f64,
    pub channel: (usize, usize),
    pub dense_ceiling: usize,
}

impl Settings {
    /// Parses everything except the model itself; has no side effects.
    pub fn resolve(cfg: &RunConfig) -> Result<Settings, CliError> {
        let model = cfg.model.clone().ok_or_else(|| CliError::Config("no model given (use --model, --family or a config file)".into()))?;
        let mut methods = Vec::new();
        if let Some(m) = &cfg.method {
            for part in m.split(',').filter(|p| !p.trim().is_empty()) {
                methods.push(Method::parse(part)?);
            }
        }
        if let Some(list) = &cfg.methods {
            for m in list {
                methods.push(Method::parse(m)?);
            }
        }
        let orders = match (&cfg.orders, cfg.order) {
            (Some(s), _) => parse_orders(s)?,
            (None, Some(0)) => return Err(CliError::Config("reduction order must be positive".into())),
            (None, Some(r)) => vec![r],
            (None, None) => Vec::new(),
        };
        let seed = cfg.seed.unwrap_or(0);
        let init = parse_init(cfg.init.as_deref().unwrap_or("logspace:1e-3:1e-1"), seed)?;
        let grid = match &cfg.grid {
            Some(g) => parse_grid(g)?,
            None => FrequencyGrid::default(),
        };
        let signal = parse_signal(cfg.signal.as_deref().unwrap_or("decaying"))?;
        let defaults = IrkaOptions::default();
        let irka = IrkaOptions {
            max_iterations: cfg.max_iter.unwrap_or(defaults.max_iterations),
            shift_tolerance: cfg.tol_shift.unwrap_or(defaults.shift_tolerance),
            stagnation_window: cfg.stagnation_window.unwrap_or(defaults.stagnation_window),
        };
        if irka.max_iterations == 0 || !(irka.shift_tolerance > 0.0) {
            return Err(CliError::Config("--max-iter must be positive and --tol-shift must be > 0".into()));
        }
        let jobs = cfg.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        let t_end = cfg.t_end.unwrap_or(50.0);
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(CliError::Config(format!("simulation horizon must be positive, got {t_end}")));
        }
        let channel = match cfg.channel {
            Some([i, o]) if i >= 1 && o >= 1 => (i - 1, o - 1),
            Some(c) => return Err(CliError::Config(format!("channels are one-based, got {c:?}"))),
            None => (0, 0),
        };
        let sim = phred_core::analysis::SimOptions::default();
        Ok(Settings {
            model,
            reduced: cfg.reduced.clone(),
            methods,
            orders,
            init,
            grid,
            signal,
            irka,
            jobs,
            seed,
            out: cfg.out.clone().unwrap_or_else(|| PathBuf::from("phred-out")),
            t_end,
            samples: cfg.samples.unwrap_or(sim.samples),
            rtol: cfg.rtol.unwrap_or(sim.rtol),
            atol: cfg.atol.unwrap_or(sim.atol),
            channel,
            dense_ceiling: dense_ceiling()?,
        })
    }

    pub fn load_model(&self) -> Result<Model, CliError> {
        match &self.model {
            ModelSource::Files { manifest } => Model::load(manifest),
            ModelSource::Generated(spec) => Ok(Model::Ph(spec.build()?)),
        }
    }

    pub fn sim_options(&self) -> phred_core::analysis::SimOptions {
        phred_core::analysis::SimOptions { rtol: self.rtol, atol: self.atol, samples: self.samples, ..Default::default() }
    }
}
