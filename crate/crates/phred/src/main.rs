use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use phred::commands;
use phred::config::{ModelSource, RunConfig, Settings};
use phred::CliError;

#[derive(Parser)]
#[command(name = "phred", version, about = "Structure-preserving model reduction of port-Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a benchmark model as Matrix Market files plus a manifest
    Model(Flags),
    /// Reduce a model once and write the reduced matrices and report.json
    Reduce(Flags),
    /// Sweep methods over orders and tabulate relative errors
    Compare(Flags),
    /// Simulate full and reduced models and report output errors
    Simulate(Flags),
    /// Tabulate sigma and phase of full, reduced and error systems
    Freq(Flags),
    /// Check the structural invariants and stability of a model
    Validate(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model manifest (or directory containing manifest.json)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Benchmark family to generate: msd or ladder
    #[arg(long)]
    family: Option<String>,
    /// State dimension of the generated benchmark
    #[arg(long)]
    n: Option<usize>,
    /// Generator parameter KEY=VALUE, VALUE a number or comma list (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Reduced model manifest to include in simulate and freq (repeatable)
    #[arg(long)]
    reduced: Vec<PathBuf>,
    /// Method name, or a comma list for compare
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    /// A:STEP:B, A,B,C or a single order
    #[arg(long)]
    orders: Option<String>,
    /// logspace:LO:HI | file:PATH | perturbed-poles:EPS | reflected-poles | lhp-logspace:LO:HI | complex:RLO:RHI:ILO:IHI | random:LO:HI
    #[arg(long)]
    init: Option<String>,
    /// logspace:LO:HI:N with LO and HI in rad/s
    #[arg(long)]
    grid: Option<String>,
    /// decaying:ALPHA:BETA | square:PERIOD | zero
    #[arg(long)]
    signal: Option<String>,
    #[arg(long)]
    tol_shift: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Stop when the H2 estimate has not improved for this many iterations (0 disables)
    #[arg(long)]
    stagnation_window: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation horizon
    #[arg(long)]
    t_end: Option<f64>,
    /// Output samples per trajectory
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// One-based input and output channel, IN:OUT
    #[arg(long)]
    channel: Option<String>,
}

fn param_value(key: &str, v: &str) -> Result<Value, CliError> {
    let nums: Result<Vec<f64>, _> = v.split(',').map(|x| x.trim().parse::<f64>()).collect();
    let nums = nums.map_err(|_| CliError::Config(format!("invalid value for parameter {key}: '{v}'")))?;
    Ok(match nums[..] {
        [x] => json!(x),
        _ => json!(nums),
    })
}

fn generated(f: &Flags) -> Result<Option<ModelSource>, CliError> {
    let Some(family) = &f.family else {
        if f.n.is_some() || !f.params.is_empty() {
            return Err(CliError::Config("--n and --param need --family".into()));
        }
        return Ok(None);
    };
    let n = f.n.ok_or_else(|| CliError::Config("--family needs --n".into()))?;
    let mut spec = Map::new();
    spec.insert("family".into(), json!(family));
    spec.insert("n".into(), json!(n));
    for p in &f.params {
        let (k, v) = p.split_once('=').ok_or_else(|| CliError::Config(format!("--param expects KEY=VALUE, got '{p}'")))?;
        spec.insert(k.trim().to_string(), param_value(k, v)?);
    }
    let spec = serde_json::from_value(Value::Object(spec)).map_err(|e| CliError::Config(format!("model spec: {e}")))?;
    Ok(Some(ModelSource::Generated(spec)))
}

fn channel(s: &str) -> Result<[usize; 2], CliError> {
    let bad = || CliError::Config(format!("--channel expects IN:OUT, got '{s}'"));
    let (i, o) = s.split_once(':').ok_or_else(bad)?;
    Ok([i.trim().parse().map_err(|_| bad())?, o.trim().parse().map_err(|_| bad())?])
}

fn settings(f: Flags) -> Result<Settings, CliError> {
    let generated = generated(&f)?;
    let model = match (f.model.clone(), generated) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --model or --family, not both".into())),
        (Some(manifest), None) => Some(ModelSource::Files { manifest }),
        (None, g) => g,
    };
    let flags = RunConfig {
        model,
        reduced: f.reduced,
        method: f.method,
        methods: None,
        order: f.order,
        orders: f.orders,
        init: f.init,
        grid: f.grid,
        signal: f.signal,
        tol_shift: f.tol_shift,
        max_iter: f.max_iter,
        stagnation_window: f.stagnation_window,
        jobs: f.jobs,
        seed: f.seed,
        out: f.out,
        t_end: f.t_end,
        samples: f.samples,
        rtol: f.rtol,
        atol: f.atol,
        channel: f.channel.as_deref().map(channel).transpose()?,
    };
    let cfg = match &f.config {
        Some(path) => {
            let base = RunConfig::from_file(path)?;
            if base.model.is_some() && flags.model.is_some() {
                return Err(CliError::Config("the config file already names a model; drop --model/--family".into()));
            }
            base.overridden_by(flags)
        }
        None => flags,
    };
    Settings::resolve(&cfg)
}

fn run(verb: Verb) -> Result<(Value, bool), CliError> {
    let (flags, cmd): (Flags, fn(&Settings) -> Result<(Value, bool), CliError>) = match verb {
        Verb::Model(f) => (f, |s| commands::cmd_model(s).map(|v| (v, true))),
        Verb::Reduce(f) => (f, |s| commands::cmd_reduce(s).map(|v| (v, true))),
        Verb::Compare(f) => (f, |s| commands::cmd_compare(s).map(|v| (v, true))),
        Verb::Simulate(f) => (f, |s| commands::cmd_simulate(s).map(|v| (v, true))),
        Verb::Freq(f) => (f, |s| commands::cmd_freq(s).map(|v| (v, true))),
        Verb::Validate(f) => (f, commands::cmd_validate),
    };
    cmd(&settings(flags)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.verb) {
        Ok((summary, ok)) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json serializes"));
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("phred: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
