//! Reproducible figure-style experiments.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]: row `i`,
//! trial `j` draws from `seed.derive(i).derive(j)`, so reports are
//! bit-identical across runs and thread counts. Reports carry the fully
//! resolved config, and a JSON report can be fed back as a config.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::{integrate_cov_ode, mu_of_t, phi_of_t, r_of_t, validate_bath, BathParams};
use crate::error::{Error, Result};
use crate::estimation::{estimate_purity_homodyne, purity_from_q, Bootstrap, PurityEstimate};
use crate::gaussian::{purity, GaussianParams};
use crate::rng::Seed;
use crate::sampling::{sample_q, sample_three_quadratures};

/// RK4 step used for the oracle residual column, in units of 1/Γ.
pub const ORACLE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExperimentKind {
    FigVarnx,
    FigTrequad,
    FigVarr,
    FigVarnth,
    EvolutionR0Sweep,
    EvolutionTime,
    RatioCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::FigVarnx,
        ExperimentKind::FigTrequad,
        ExperimentKind::FigVarr,
        ExperimentKind::FigVarnth,
        ExperimentKind::EvolutionR0Sweep,
        ExperimentKind::EvolutionTime,
        ExperimentKind::RatioCheck,
    ];

    /// Short name used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FigVarnx => "varnx",
            ExperimentKind::FigTrequad => "trequad",
            ExperimentKind::FigVarr => "varr",
            ExperimentKind::FigVarnth => "varnth",
            ExperimentKind::EvolutionR0Sweep => "evolution-r0",
            ExperimentKind::EvolutionTime => "evolution-time",
            ExperimentKind::RatioCheck => "ratio",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace('_', "-");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == lower || format!("fig-{}", k.name()) == lower)
            .or_else(|| serde_json::from_value(serde_json::Value::String(s.to_ascii_uppercase())).ok())
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub state: GaussianParams,
    pub bath: Option<BathParams>,
    pub n_grid: Vec<usize>,
    pub r_grid: Vec<f64>,
    pub nbar_grid: Vec<f64>,
    /// Dimensionless times Γt.
    pub t_grid: Vec<f64>,
    /// Bath thermal parameters compared side by side in the r₀ sweep.
    pub channel_n: Vec<f64>,
    pub trials: usize,
    pub resamples: usize,
    pub level: f64,
    pub seed: Seed,
    pub output_path: Option<String>,
}

/// Config document as written by hand: everything but `experiment` optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    experiment: Option<ExperimentKind>,
    state: Option<GaussianParams>,
    bath: Option<BathParams>,
    n_grid: Option<Vec<usize>>,
    r_grid: Option<Vec<f64>>,
    nbar_grid: Option<Vec<f64>>,
    t_grid: Option<Vec<f64>>,
    channel_n: Option<Vec<f64>>,
    trials: Option<usize>,
    resamples: Option<usize>,
    level: Option<f64>,
    seed: Option<Seed>,
    output_path: Option<String>,
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect()
}

impl ExperimentConfig {
    pub fn default_for(kind: ExperimentKind) -> Self {
        let fig_state = GaussianParams::squeezed_thermal(0.5, 1.5, 0.0).expect("valid");
        let mut cfg = ExperimentConfig {
            experiment: kind,
            state: fig_state,
            bath: None,
            n_grid: Vec::new(),
            r_grid: Vec::new(),
            nbar_grid: Vec::new(),
            t_grid: Vec::new(),
            channel_n: Vec::new(),
            trials: 1,
            resamples: 400,
            level: 0.68,
            seed: Seed(20030407),
            output_path: None,
        };
        match kind {
            ExperimentKind::FigVarnx => {
                cfg.n_grid = vec![1_000, 3_000, 10_000, 30_000, 100_000];
            }
            ExperimentKind::FigTrequad => {
                cfg.n_grid = vec![3_000, 9_000, 30_000, 90_000, 300_000];
            }
            ExperimentKind::FigVarr => {
                cfg.n_grid = vec![30_000];
                cfg.r_grid = vec![0.0, 0.5, 1.0, 1.5, 2.0];
            }
            ExperimentKind::FigVarnth => {
                cfg.state = GaussianParams::squeezed_thermal(0.5, 1.0, 0.0).expect("valid");
                cfg.n_grid = vec![10_000];
                cfg.nbar_grid = vec![0.1, 0.5, 1.0, 2.0, 4.0];
            }
            ExperimentKind::EvolutionR0Sweep => {
                cfg.state = GaussianParams::vacuum();
                cfg.bath = Some(BathParams::thermal(1.0, 0.0).expect("valid"));
                cfg.r_grid = linspace(0.0, 2.0, 21);
                cfg.t_grid = vec![1.0];
                cfg.channel_n = vec![0.0, 0.5, 1.0];
            }
            ExperimentKind::EvolutionTime => {
                cfg.state = GaussianParams::vacuum();
                cfg.bath = Some(BathParams::thermal(1.0, 0.5).expect("valid"));
                cfg.t_grid = linspace(0.0, 5.0, 51);
            }
            ExperimentKind::RatioCheck => {
                cfg.state = GaussianParams::vacuum();
                cfg.bath = Some(BathParams::thermal(1.0, 1.0).expect("valid"));
                cfg.r_grid = vec![0.0, 1.5];
                cfg.t_grid = vec![1.0];
            }
        }
        cfg
    }

    /// Parses a TOML or JSON config, or a JSON report (its embedded config is
    /// used). Missing fields take the experiment's defaults.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_as(text, None)
    }

    /// Like [`parse`](Self::parse), with `kind` supplying the experiment when
    /// the document names none. A document naming a different one is an error.
    pub fn parse_as(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let doc: ConfigDoc = if is_json(text) {
            let mut value: serde_json::Value = serde_json::from_str(text)?;
            if let Some(cfg) = value.get_mut("config") {
                value = cfg.take();
            }
            serde_json::from_value(value)?
        } else {
            toml::from_str(text)?
        };
        let kind = match (doc.experiment, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for `{a}`, but `{b}` was requested")));
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(Error::Config("missing `experiment`".into())),
        };
        let d = Self::default_for(kind);
        let cfg = ExperimentConfig {
            experiment: kind,
            state: doc.state.unwrap_or(d.state),
            bath: doc.bath.or(d.bath),
            n_grid: doc.n_grid.unwrap_or(d.n_grid),
            r_grid: doc.r_grid.unwrap_or(d.r_grid),
            nbar_grid: doc.nbar_grid.unwrap_or(d.nbar_grid),
            t_grid: doc.t_grid.unwrap_or(d.t_grid),
            channel_n: doc.channel_n.unwrap_or(d.channel_n),
            trials: doc.trials.unwrap_or(d.trials),
            resamples: doc.resamples.unwrap_or(d.resamples),
            level: doc.level.unwrap_or(d.level),
            seed: doc.seed.unwrap_or(d.seed),
            output_path: doc.output_path.or(d.output_path),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        fn ascending<T: PartialOrd>(name: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(Error::Config(format!("`{name}` must not be empty")));
            }
            if v.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(format!("`{name}` must be strictly ascending")));
            }
            Ok(())
        }
        self.state.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("`trials` must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config("`level` must lie in (0, 1)".into()));
        }
        let single_n = |min: usize| -> Result<()> {
            ascending("n_grid", &self.n_grid)?;
            if self.n_grid[0] < min {
                return Err(Error::Config(format!("`n_grid` entries must be at least {min}")));
            }
            Ok(())
        };
        match self.experiment {
            ExperimentKind::FigVarnx => single_n(3)?,
            ExperimentKind::FigTrequad => single_n(6)?,
            ExperimentKind::FigVarr | ExperimentKind::FigVarnth => {
                single_n(3)?;
                if self.n_grid.len() != 1 {
                    return Err(Error::Config("`n_grid` must hold exactly one sample size here".into()));
                }
                if self.experiment == ExperimentKind::FigVarr {
                    ascending("r_grid", &self.r_grid)?;
                    if self.r_grid[0] < 0.0 {
                        return Err(Error::Config("`r_grid` entries must be >= 0".into()));
                    }
                } else {
                    ascending("nbar_grid", &self.nbar_grid)?;
                    if self.nbar_grid[0] < 0.0 {
                        return Err(Error::Config("`nbar_grid` entries must be >= 0".into()));
                    }
                }
            }
            ExperimentKind::EvolutionR0Sweep | ExperimentKind::EvolutionTime | ExperimentKind::RatioCheck => {
                let bath = self
                    .bath
                    .ok_or_else(|| Error::Config("this experiment requires `bath`".into()))?;
                validate_bath(&bath)?;
                ascending("t_grid", &self.t_grid)?;
                if self.t_grid[0] < 0.0 {
                    return Err(Error::Config("`t_grid` entries must be >= 0".into()));
                }
                if self.experiment != ExperimentKind::EvolutionTime {
                    ascending("r_grid", &self.r_grid)?;
                    if self.r_grid[0] < 0.0 {
                        return Err(Error::Config("`r_grid` entries must be >= 0".into()));
                    }
                }
                if self.experiment == ExperimentKind::EvolutionR0Sweep {
                    ascending("channel_n", &self.channel_n)?;
                    for &n in &self.channel_n {
                        validate_bath(&BathParams { n, ..bath })?;
                    }
                }
            }
        }
        Ok(())
    }

    fn bootstrap(&self, seed: Seed) -> Bootstrap {
        Bootstrap::new(self.resamples, self.level, seed)
    }
}

fn is_json(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

/// Deserializes a JSON document (if it starts with `{`) or a TOML one.
pub fn parse_document<T: DeserializeOwned>(text: &str) -> Result<T> {
    if is_json(text) {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub library: String,
    pub version: String,
    pub seed: Seed,
}

/// One report row; `None` marks a cell with no value (written empty in CSV).
pub type ReportRow = Vec<Option<f64>>;

/// Tabular result: `rows[i][j]` is column `j` at grid point `i`; `None` marks a
/// value that could not be formed (e.g. every trial degenerate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

impl ExperimentReport {
    fn new(config: &ExperimentConfig, columns: &[&str], rows: Vec<Vec<Option<f64>>>) -> Self {
        ExperimentReport {
            config: config.clone(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
            provenance: Provenance {
                library: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: config.seed,
            },
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV with two `#` comment lines (provenance and the JSON config) ahead of
    /// the header. Missing values are empty fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<csv>", e);
        writeln!(
            w,
            "# {} {} seed={}",
            self.provenance.library, self.provenance.version, self.provenance.seed.0
        )
        .map_err(io)?;
        writeln!(w, "# config={}", serde_json::to_string(&self.config)?).map_err(io)?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.columns)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()))?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn to_string(&self, format: Format) -> Result<String> {
        let mut buf = Vec::new();
        match format {
            Format::Csv => self.write_csv(&mut buf)?,
            Format::Json => {
                self.write_json(&mut buf)?;
                buf.push(b'\n');
            }
        }
        Ok(String::from_utf8(buf).expect("utf-8 output"))
    }
}

/// Parses the CSV produced by [`ExperimentReport::write_csv`] back into
/// `(columns, rows)`.
pub fn parse_report_csv(text: &str) -> Result<(Vec<String>, Vec<ReportRow>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::Config(format!("bad csv number `{f}`: {e}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((columns, rows))
}

/// Writes `report` to `path` in the requested format.
pub fn emit(report: &ExperimentReport, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = report.to_string(format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::FigVarnx => run_fig_varnx(config),
        ExperimentKind::FigTrequad => run_fig_trequad(config),
        ExperimentKind::FigVarr => run_fig_varr(config),
        ExperimentKind::FigVarnth => run_fig_varnth(config),
        ExperimentKind::EvolutionR0Sweep | ExperimentKind::EvolutionTime | ExperimentKind::RatioCheck => {
            run_evolution(config)
        }
    }
}

fn expect_kind(config: &ExperimentConfig, kinds: &[ExperimentKind]) -> Result<()> {
    config.validate()?;
    if !kinds.contains(&config.experiment) {
        return Err(Error::Config(format!(
            "config is for `{}`, not {:?}",
            config.experiment, kinds
        )));
    }
    Ok(())
}

/// Per-grid-point summary of repeated estimates.
struct EstimateSummary {
    mu_hat: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    rel_half_width: Option<f64>,
    rel_error: Option<f64>,
    trial_sd: Option<f64>,
    degenerate: usize,
}

fn summarize(truth: f64, results: Vec<Result<PurityEstimate>>) -> Result<EstimateSummary> {
    let mut ests = Vec::with_capacity(results.len());
    let mut degenerate = 0;
    for r in results {
        match r {
            Ok(e) => ests.push(e),
            Err(Error::DegenerateSample(_)) => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    let k = ests.len() as f64;
    let mean = |f: &dyn Fn(&PurityEstimate) -> f64| (k > 0.0).then(|| ests.iter().map(f).sum::<f64>() / k);
    let mu_hat = mean(&|e| e.mu_hat);
    let trial_sd = mu_hat
        .filter(|_| ests.len() > 1)
        .map(|m| (ests.iter().map(|e| (e.mu_hat - m).powi(2)).sum::<f64>() / (k - 1.0)).sqrt());
    Ok(EstimateSummary {
        mu_hat,
        ci_low: mean(&|e| e.ci_low),
        ci_high: mean(&|e| e.ci_high),
        rel_half_width: mean(&|e| e.relative_half_width()),
        rel_error: mean(&|e| (e.mu_hat - truth).abs() / truth),
        trial_sd,
        degenerate,
    })
}

const Q_COLUMNS: [&str; 8] = [
    "mu_true",
    "mu_hat",
    "ci_low",
    "ci_high",
    "rel_ci_half_width",
    "rel_error",
    "trial_sd",
    "degenerate",
];

fn q_row(config: &ExperimentConfig, params: &GaussianParams, n: usize, row_seed: Seed) -> Result<Vec<Option<f64>>> {
    let state = params.to_state()?;
    let truth = purity(&state.cov);
    let results = (0..config.trials as u64)
        .into_par_iter()
        .map(|j| {
            let s = row_seed.derive(j);
            purity_from_q(&sample_q(&state, n, s.derive(0))?, &config.bootstrap(s.derive(1)))
        })
        .collect();
    let sum = summarize(truth, results)?;
    Ok(vec![
        Some(truth),
        sum.mu_hat,
        sum.ci_low,
        sum.ci_high,
        sum.rel_half_width,
        sum.rel_error,
        sum.trial_sd,
        Some(sum.degenerate as f64),
    ])
}

fn with_grid(grid: f64, mut rest: Vec<Option<f64>>) -> Vec<Option<f64>> {
    rest.insert(0, Some(grid));
    rest
}

fn q_columns(first: &'static str) -> Vec<&'static str> {
    let mut cols = vec![first];
    cols.extend(Q_COLUMNS);
    cols
}

/// Q-joint estimates versus number of data.
pub fn run_fig_varnx(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::FigVarnx])?;
    let rows = config
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            Ok(with_grid(
                n as f64,
                q_row(config, &config.state, n, config.seed.derive(i as u64))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(config, &q_columns("n"), rows))
}

/// Three-quadrature homodyne estimates versus total number of data, split
/// evenly over θ = 0, π/4, π/2.
pub fn run_fig_trequad(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::FigTrequad])?;
    let state = config.state.to_state()?;
    let truth = purity(&state.cov);
    let rows = config
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let row_seed = config.seed.derive(i as u64);
            let results = (0..config.trials as u64)
                .into_par_iter()
                .map(|j| {
                    let s = row_seed.derive(j);
                    let [b0, b45, b90] = sample_three_quadratures(&state, n, s.derive(0))?;
                    estimate_purity_homodyne(&b0, &b45, &b90, &config.bootstrap(s.derive(1)))
                })
                .collect();
            let sum = summarize(truth, results)?;
            Ok(vec![
                Some(n as f64),
                Some(truth),
                sum.mu_hat,
                sum.ci_low,
                sum.ci_high,
                sum.rel_half_width,
                sum.rel_error,
                sum.trial_sd,
                Some(sum.degenerate as f64),
                sum.mu_hat.map(|m| m - truth),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cols = q_columns("n");
    cols.push("bias");
    Ok(ExperimentReport::new(config, &cols, rows))
}

/// Q-joint estimates versus squeezing r at fixed sample size.
pub fn run_fig_varr(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::FigVarr])?;
    let n = config.n_grid[0];
    let rows = config
        .r_grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let params = GaussianParams { r, ..config.state }.normalized()?;
            Ok(with_grid(r, q_row(config, &params, n, config.seed.derive(i as u64))?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(config, &q_columns("r"), rows))
}

/// Q-joint estimates versus thermal photon number at fixed sample size.
pub fn run_fig_varnth(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(config, &[ExperimentKind::FigVarnth])?;
    let n = config.n_grid[0];
    let rows = config
        .nbar_grid
        .iter()
        .enumerate()
        .map(|(i, &nbar)| {
            let params = GaussianParams { nbar, ..config.state }.normalized()?;
            Ok(with_grid(
                nbar,
                q_row(config, &params, n, config.seed.derive(i as u64))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(config, &q_columns("nbar"), rows))
}

/// `|μ_closed(t) − purity(RK4(t))|` for one input.
fn oracle_residual(params: &GaussianParams, bath: &BathParams, gamma_t: f64) -> Result<f64> {
    let t = gamma_t / bath.gamma;
    let numeric = integrate_cov_ode(&params.to_state()?, bath, t, ORACLE_STEP / bath.gamma)?;
    Ok((mu_of_t(params, bath, t)? - purity(&numeric.cov)).abs())
}

/// Closed-form purity trajectories with an RK4 residual column.
///
/// * `EVOLUTION_R0_SWEEP`: μ and r at Γt = `t_grid[0]` versus r₀ for each bath
///   in `channel_n` (sharing Γ and M with `bath`); the input purity comes from
///   `state.nbar`.
/// * `EVOLUTION_TIME`: μ, r, φ versus Γt in `bath` for a coherent input, a
///   squeezed vacuum (r₀ = 1.5), a thermal input with n̄₀ = 9.5, and the
///   configured `state`.
/// * `RATIO_CHECK`: μ at Γt = `t_grid[0]` versus r₀ and its ratio to the r₀ = 0
///   value.
pub fn run_evolution(config: &ExperimentConfig) -> Result<ExperimentReport> {
    expect_kind(
        config,
        &[
            ExperimentKind::EvolutionR0Sweep,
            ExperimentKind::EvolutionTime,
            ExperimentKind::RatioCheck,
        ],
    )?;
    let bath = config.bath.expect("validated");
    let at = |p: &GaussianParams, b: &BathParams, gt: f64| mu_of_t(p, b, gt / b.gamma);
    match config.experiment {
        ExperimentKind::EvolutionR0Sweep => {
            let gt = config.t_grid[0];
            let baths: Vec<BathParams> = config.channel_n.iter().map(|&n| BathParams { n, ..bath }).collect();
            let rows = config
                .r_grid
                .iter()
                .map(|&r0| {
                    let p = GaussianParams {
                        r: r0,
                        x0: 0.0,
                        p0: 0.0,
                        ..config.state
                    }
                    .normalized()?;
                    let mut row = vec![Some(r0)];
                    let mut residual: f64 = 0.0;
                    for b in &baths {
                        row.push(Some(at(&p, b, gt)?));
                        row.push(Some(r_of_t(&p, b, gt / b.gamma)?));
                        residual = residual.max(oracle_residual(&p, b, gt)?);
                    }
                    row.push(Some(residual));
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            let names: Vec<String> = config
                .channel_n
                .iter()
                .flat_map(|n| [format!("mu_N{n}"), format!("r_N{n}")])
                .collect();
            let mut cols = vec!["r0"];
            cols.extend(names.iter().map(String::as_str));
            cols.push("ode_residual");
            Ok(ExperimentReport::new(config, &cols, rows))
        }
        ExperimentKind::EvolutionTime => {
            let inputs = [
                GaussianParams::vacuum(),
                GaussianParams::squeezed_thermal(0.0, 1.5, 0.0)?,
                GaussianParams::thermal(9.5)?,
                config.state.normalized()?,
            ];
            let rows = config
                .t_grid
                .par_iter()
                .map(|&gt| {
                    let mut row = vec![Some(gt)];
                    let mut residual: f64 = 0.0;
                    for p in &inputs {
                        let t = gt / bath.gamma;
                        row.push(Some(mu_of_t(p, &bath, t)?));
                        row.push(Some(r_of_t(p, &bath, t)?));
                        row.push(Some(phi_of_t(p, &bath, t)?));
                        residual = residual.max(oracle_residual(p, &bath, gt)?);
                    }
                    row.push(Some(residual));
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut cols = vec!["gamma_t".to_string()];
            for input in ["coherent", "squeezed", "thermal", "state"] {
                cols.extend(["mu", "r", "phi"].map(|q| format!("{q}_{input}")));
            }
            cols.push("ode_residual".into());
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            Ok(ExperimentReport::new(config, &cols, rows))
        }
        ExperimentKind::RatioCheck => {
            let gt = config.t_grid[0];
            let base = GaussianParams {
                r: 0.0,
                x0: 0.0,
                p0: 0.0,
                ..config.state
            }
            .normalized()?;
            let reference = at(&base, &bath, gt)?;
            let rows = config
                .r_grid
                .iter()
                .map(|&r0| {
                    let p = GaussianParams { r: r0, ..base }.normalized()?;
                    let mu = at(&p, &bath, gt)?;
                    Ok(vec![
                        Some(r0),
                        Some(mu),
                        Some(mu / reference),
                        Some(oracle_residual(&p, &bath, gt)?),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ExperimentReport::new(
                config,
                &["r0", "mu", "ratio", "ode_residual"],
                rows,
            ))
        }
        _ => unreachable!("checked by expect_kind"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            let tag = serde_json::to_value(k).unwrap();
            assert_eq!(tag.as_str().unwrap().parse::<ExperimentKind>().unwrap(), k);
        }
        assert_eq!(
            serde_json::to_value(ExperimentKind::EvolutionR0Sweep).unwrap(),
            serde_json::json!("EVOLUTION_R0_SWEEP")
        );
        assert!("nope".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn defaults_validate() {
        for k in ExperimentKind::ALL {
            ExperimentConfig::default_for(k).validate().unwrap();
        }
    }

    #[test]
    fn toml_config_fills_defaults() {
        let cfg = ExperimentConfig::parse(
            r#"
            experiment = "FIG_VARNX"
            n_grid = [100, 200]
            seed = 5
            [state]
            x0 = 0.0
            p0 = 0.0
            nbar = 1.0
            r = 0.0
            phi = 0.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.n_grid, vec![100, 200]);
        assert_eq!(cfg.seed, Seed(5));
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.state.nbar, 1.0);
    }

    #[test]
    fn kind_hint_and_partial_state() {
        let cfg = ExperimentConfig::parse_as("[state]\nr = 0.5", Some(ExperimentKind::FigVarr)).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::FigVarr);
        assert_eq!(
            cfg.state,
            GaussianParams {
                r: 0.5,
                ..GaussianParams::vacuum()
            }
        );
        assert!(ExperimentConfig::parse_as("experiment = \"FIG_VARR\"", Some(ExperimentKind::FigVarnx)).is_err());
        assert!(ExperimentConfig::parse("experiment = \"FIG_VARR\"\n[state]\nsqueeze = 1.0").is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::FigVarnx);
        cfg.n_grid = vec![10_000, 1_000];
        assert!(cfg.validate().is_err());
        cfg.n_grid = vec![];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::FigVarnx);
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::EvolutionTime);
        cfg.bath = None;
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::EvolutionR0Sweep);
        cfg.bath = Some(BathParams {
            gamma: 1.0,
            n: 1.0,
            m1: 1.0,
            m2: 0.0,
        });
        // N = 0 channel cannot carry |M| = 1.
        assert!(matches!(cfg.validate(), Err(Error::UnphysicalBath(_))));
        assert!(ExperimentConfig::parse("n_grid = [1]").is_err());
        assert!(ExperimentConfig::parse("experiment = \"FIG_VARNX\"\nbogus = 1").is_err());
    }

    #[test]
    fn ratio_check_report() {
        let report = run(&ExperimentConfig::default_for(ExperimentKind::RatioCheck)).unwrap();
        let ratio = report.column("ratio").unwrap();
        assert_eq!(ratio[0], Some(1.0));
        assert!((ratio[1].unwrap() - 0.537).abs() < 1e-3);
        assert!(report.column("ode_residual").unwrap().iter().all(|r| r.unwrap() < 1e-8));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::FigVarnx);
        cfg.n_grid = vec![200, 400];
        cfg.resamples = 20;
        let report = run(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);

        let csv = report.to_string(Format::Csv).unwrap();
        let (cols, rows) = parse_report_csv(&csv).unwrap();
        assert_eq!(cols, report.columns);
        assert_eq!(rows, report.rows);
        assert!(csv
            .lines()
            .nth(2)
            .unwrap()
            .starts_with("n,mu_true,mu_hat,ci_low,ci_high"));

        let json = report.to_string(Format::Json).unwrap();
        let again = run(&ExperimentConfig::parse(&json).unwrap()).unwrap();
        assert_eq!(again, report);
        let back: ExperimentReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
