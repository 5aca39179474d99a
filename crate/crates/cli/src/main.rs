//! `purity`: figure reproduction, channel trajectories, simulated records and
//! purity estimates from the command line.
//!
//! Failures print `{"error": {"kind": ..., "message": ...}}` on stderr and exit
//! with status 2 for invalid input, 1 for everything else.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use purity_core::channel::validate_bath;
use purity_core::estimation::{estimate_purity_homodyne, purity_from_q, Bootstrap};
use purity_core::experiments::{self, parse_document, Format};
use purity_core::sampling::{
    read_homodyne_csv, sample_homodyne, sample_q, write_homodyne_csv, THREE_QUADRATURE_PHASES,
};
use purity_core::{
    BathParams, Error, ExperimentConfig, ExperimentKind, GaussianParams, GaussianState, PurityEstimate, QSampleBatch,
    Seed, Trajectory,
};
use serde::Deserialize;

const DEFAULT_SEED: u64 = 20030407;

#[derive(Parser)]
#[command(
    name = "purity",
    version,
    about = "Purity of Gaussian states: simulated measurements and noisy channels"
)]
struct Cli {
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML or JSON config. A JSON report from `figure` is accepted as its own config.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Record {
    /// Joint (x, p) heterodyne samples from the Husimi Q-function.
    Q,
    /// Rotated-quadrature homodyne samples.
    Homodyne,
}

#[derive(Subcommand)]
enum Command {
    /// Run a figure-style experiment: varnx, trequad, varr, varnth,
    /// evolution-r0, evolution-time or ratio.
    Figure {
        name: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        resamples: Option<usize>,
    },
    /// Closed-form trajectory of a state in a noisy channel.
    Evolve {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        bath: BathArgs,
        /// Largest Γt on the uniform grid.
        #[arg(long, allow_hyphen_values = true)]
        t_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Draw a simulated measurement record.
    Sample {
        record: Record,
        #[command(flatten)]
        state: StateArgs,
        /// Number of samples; for homodyne, the total split evenly over phases.
        #[arg(long)]
        n: Option<usize>,
        /// Homodyne phase; repeat for several (default 0, π/4, π/2).
        #[arg(long = "theta", allow_hyphen_values = true)]
        thetas: Vec<f64>,
    },
    /// Estimate purity from a record CSV (`x,p` or `theta,value`).
    Estimate {
        record: Record,
        #[arg(long, value_name = "CSV")]
        input: PathBuf,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long)]
        level: Option<f64>,
    },
}

#[derive(Args, Default)]
struct StateArgs {
    /// State JSON file with keys x0, p0, sxx, spp, sxp.
    #[arg(long, value_name = "FILE")]
    state: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    nbar: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
}

#[derive(Args, Default)]
struct BathArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Bath thermal parameter N.
    #[arg(long = "bath-n", allow_hyphen_values = true)]
    bath_n: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m2: Option<f64>,
}

/// Either parametrization of a state in a config file.
#[derive(Deserialize)]
#[serde(untagged)]
enum StateSpec {
    Params(GaussianParams),
    Moments(GaussianState),
}

/// Config document for `evolve`, `sample` and `estimate`.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    state: Option<StateSpec>,
    bath: Option<BathParams>,
    n: Option<usize>,
    thetas: Option<Vec<f64>>,
    t_grid: Option<Vec<f64>>,
    resamples: Option<usize>,
    level: Option<f64>,
    seed: Option<Seed>,
    output_path: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| Error::io(path, e)),
        None => io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn resolve_state(args: &StateArgs, config: Option<StateSpec>) -> Result<GaussianState, Error> {
    let flags = [args.x0, args.p0, args.nbar, args.r, args.phi];
    if let Some(path) = &args.state {
        if flags.iter().any(Option::is_some) {
            return Err(usage("--state cannot be combined with --x0/--p0/--nbar/--r/--phi"));
        }
        return Ok(serde_json::from_str(&read(path)?)?);
    }
    let base = match config {
        Some(StateSpec::Moments(s)) if flags.iter().all(Option::is_none) => return Ok(s),
        Some(StateSpec::Moments(s)) => s.params()?,
        Some(StateSpec::Params(p)) => p,
        None => GaussianParams::vacuum(),
    };
    GaussianParams::new(
        args.x0.unwrap_or(base.x0),
        args.p0.unwrap_or(base.p0),
        args.nbar.unwrap_or(base.nbar),
        args.r.unwrap_or(base.r),
        args.phi.unwrap_or(base.phi),
    )?
    .to_state()
}

fn resolve_bath(args: &BathArgs, config: Option<BathParams>) -> Result<BathParams, Error> {
    let base = config.unwrap_or(BathParams {
        gamma: 1.0,
        n: 0.0,
        m1: 0.0,
        m2: 0.0,
    });
    validate_bath(&BathParams {
        gamma: args.gamma.unwrap_or(base.gamma),
        n: args.bath_n.unwrap_or(base.n),
        m1: args.m1.unwrap_or(base.m1),
        m2: args.m2.unwrap_or(base.m2),
    })
}

fn run_config(cli: &Cli) -> Result<RunConfig, Error> {
    match &cli.config {
        Some(path) => parse_document(&read(path)?),
        None => Ok(RunConfig::default()),
    }
}

fn figure(cli: &Cli, name: &str, trials: Option<usize>, resamples: Option<usize>) -> Result<(), Error> {
    let kind: ExperimentKind = name.parse()?;
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::parse_as(&read(path)?, Some(kind))?,
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(s) = cli.seed {
        config.seed = Seed(s);
    }
    if let Some(t) = trials {
        config.trials = t;
    }
    if let Some(r) = resamples {
        config.resamples = r;
    }
    let report = experiments::run(&config)?;
    let format = cli.format.map_or(Format::Csv, Format::from);
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_path.as_ref().map(PathBuf::from));
    write_output(out.as_deref(), report.to_string(format)?.as_bytes())
}

fn evolve(
    cli: &Cli,
    state: &StateArgs,
    bath: &BathArgs,
    t_max: Option<f64>,
    points: Option<usize>,
) -> Result<(), Error> {
    let cfg = run_config(cli)?;
    let start = resolve_state(state, cfg.state)?;
    let bath = resolve_bath(bath, cfg.bath)?;
    let grid = match (cfg.t_grid, t_max, points) {
        (Some(g), None, None) => g,
        (_, t_max, points) => {
            let t_max = t_max.unwrap_or(5.0);
            let points = points.unwrap_or(51);
            if !(t_max > 0.0) || points < 2 {
                return Err(usage("--t-max must be > 0 and --points at least 2"));
            }
            (0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect()
        }
    };
    if grid.is_empty() || grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(usage("t_grid must be non-empty with entries >= 0"));
    }
    let traj = Trajectory::compute(&start.params()?, &bath, &grid)?;
    let mut buf = Vec::new();
    match cli.format.unwrap_or(OutFormat::Csv) {
        OutFormat::Csv => traj.write_csv(&mut buf)?,
        OutFormat::Json => {
            let rows: Vec<_> = (0..traj.len())
                .map(|i| {
                    let s = &traj.states[i];
                    serde_json::json!({
                        "gamma_t": traj.times[i], "mu": traj.mus[i], "r": traj.rs[i], "phi": traj.phis[i],
                        "sxx": s.cov.sxx(), "spp": s.cov.spp(), "sxp": s.cov.sxp(),
                        "x0": s.mean.x, "p0": s.mean.p,
                    })
                })
                .collect();
            serde_json::to_writer_pretty(&mut buf, &rows)?;
            buf.push(b'\n');
        }
    }
    write_output(cli.out.as_deref().or(cfg.output_path.as_deref()), &buf)
}

fn sample(cli: &Cli, record: Record, state: &StateArgs, n: Option<usize>, thetas: &[f64]) -> Result<(), Error> {
    let cfg = run_config(cli)?;
    let st = resolve_state(state, cfg.state)?;
    let seed = Seed(cli.seed.or(cfg.seed.map(|s| s.0)).unwrap_or(DEFAULT_SEED));
    let n = n.or(cfg.n).unwrap_or(10_000);
    let format = cli.format.unwrap_or(OutFormat::Csv);
    let mut buf = Vec::new();
    match record {
        Record::Q => {
            let batch = sample_q(&st, n, seed)?;
            match format {
                OutFormat::Csv => batch.write_csv(&mut buf)?,
                OutFormat::Json => serde_json::to_writer(&mut buf, batch.pairs())?,
            }
        }
        Record::Homodyne => {
            let thetas = if thetas.is_empty() {
                cfg.thetas.unwrap_or_else(|| THREE_QUADRATURE_PHASES.to_vec())
            } else {
                thetas.to_vec()
            };
            if thetas.is_empty() {
                return Err(usage("at least one homodyne phase is required"));
            }
            let per = n / thetas.len();
            let batches = thetas
                .iter()
                .enumerate()
                .map(|(k, &t)| sample_homodyne(&st, t, per, seed.derive(k as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            match format {
                OutFormat::Csv => write_homodyne_csv(&batches, &mut buf)?,
                OutFormat::Json => serde_json::to_writer(&mut buf, &batches)?,
            }
        }
    }
    if format == OutFormat::Json {
        buf.push(b'\n');
    }
    write_output(cli.out.as_deref().or(cfg.output_path.as_deref()), &buf)
}

fn estimate(
    cli: &Cli,
    record: Record,
    input: &Path,
    resamples: Option<usize>,
    level: Option<f64>,
) -> Result<(), Error> {
    let cfg = run_config(cli)?;
    let defaults = Bootstrap::default();
    let bootstrap = Bootstrap::new(
        resamples.or(cfg.resamples).unwrap_or(defaults.resamples),
        level.or(cfg.level).unwrap_or(defaults.level),
        cli.seed.map(Seed).or(cfg.seed).unwrap_or(defaults.seed),
    );
    let file = fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let est: PurityEstimate = match record {
        Record::Q => purity_from_q(&QSampleBatch::read_csv(file)?, &bootstrap)?,
        Record::Homodyne => {
            let batches = read_homodyne_csv(file)?;
            let [b0, b45, b90] = <[_; 3]>::try_from(batches).map_err(|b: Vec<_>| {
                usage(format!(
                    "homodyne estimate needs exactly three phases, found {}",
                    b.len()
                ))
            })?;
            estimate_purity_homodyne(&b0, &b45, &b90, &bootstrap)?
        }
    };
    let mut buf = Vec::new();
    match cli.format.unwrap_or(OutFormat::Json) {
        OutFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &est)?;
            buf.push(b'\n');
        }
        OutFormat::Csv => {
            let method = serde_json::to_value(est.method)?;
            writeln!(buf, "method,mu_hat,ci_low,ci_high,level,n").map_err(|e| Error::io("<buffer>", e))?;
            writeln!(
                buf,
                "{},{},{},{},{},{}",
                method.as_str().unwrap_or_default(),
                est.mu_hat,
                est.ci_low,
                est.ci_high,
                est.level,
                est.n
            )
            .map_err(|e| Error::io("<buffer>", e))?;
        }
    }
    write_output(cli.out.as_deref().or(cfg.output_path.as_deref()), &buf)
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Figure {
            name,
            trials,
            resamples,
        } => figure(cli, name, *trials, *resamples),
        Command::Evolve {
            state,
            bath,
            t_max,
            points,
        } => evolve(cli, state, bath, *t_max, *points),
        Command::Sample {
            record,
            state,
            n,
            thetas,
        } => sample(cli, *record, state, *n, thetas),
        Command::Estimate {
            record,
            input,
            resamples,
            level,
        } => estimate(cli, *record, input, *resamples, *level),
    }
}

fn report_error(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.render().to_string().trim());
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            match e {
                Error::Io { .. } => ExitCode::FAILURE,
                _ => ExitCode::from(2),
            }
        }
    }
}
