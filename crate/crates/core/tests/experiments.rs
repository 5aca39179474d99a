//! Figure-style experiments: qualitative orderings over 100 trials, and
//! bit-for-bit reproducibility.

use purity_core::experiments::{parse_report_csv, run, Format};
use purity_core::{ExperimentConfig, ExperimentKind, ExperimentReport, Seed};

fn config(kind: ExperimentKind, trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default_for(kind);
    c.trials = trials;
    // Orderings use across-trial errors; bootstrap intervals are not needed.
    c.resamples = 0;
    c
}

fn col(report: &ExperimentReport, name: &str) -> Vec<f64> {
    report.column(name).unwrap().into_iter().map(Option::unwrap).collect()
}

#[test]
fn varnx_errors_shrink_with_data() {
    let report = run(&config(ExperimentKind::FigVarnx, 100)).unwrap();
    let err = col(&report, "rel_error");
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
    assert!(col(&report, "mu_true").iter().all(|&m| (m - 0.5).abs() < 1e-12));
    // A few percent at N_x = 1e5.
    let last = *err.last().unwrap();
    assert!(last > 0.005 && last < 0.05, "{last}");
}

#[test]
fn trequad_bias_is_positive_and_flagged() {
    let mut c = config(ExperimentKind::FigTrequad, 100);
    c.n_grid = vec![30_000, 90_000];
    let report = run(&c).unwrap();
    let bias = col(&report, "bias");
    let sd = col(&report, "trial_sd");
    let ok = col(&report, "degenerate");
    for i in 0..bias.len() {
        let se = sd[i] / (100.0 - ok[i]).sqrt();
        assert!(bias[i] > 3.0 * se, "row {i}: {} ± {se}", bias[i]);
    }
}

#[test]
fn varr_errors_grow_with_squeezing() {
    let report = run(&config(ExperimentKind::FigVarr, 100)).unwrap();
    let err = col(&report, "rel_error");
    assert!(err.windows(2).all(|w| w[1] > w[0]), "{err:?}");
    let mu = col(&report, "mu_hat");
    assert!(mu.iter().all(|m| (m - 0.5).abs() < 0.02), "{mu:?}");
}

#[test]
fn varnth_tracks_thermal_purity_and_errors_fall() {
    let report = run(&config(ExperimentKind::FigVarnth, 100)).unwrap();
    let nbar = col(&report, "nbar");
    let truth = col(&report, "mu_true");
    for (n, m) in nbar.iter().zip(&truth) {
        assert!((m - 1.0 / (2.0 * n + 1.0)).abs() < 1e-12);
    }
    let err = col(&report, "rel_error");
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
    let (hat, sd) = (col(&report, "mu_hat"), col(&report, "trial_sd"));
    let last = hat.len() - 1;
    assert!((hat[last] - 1.0 / 9.0).abs() < 3.0 * sd[last] / 10.0);
}

#[test]
fn evolution_time_orders_the_three_inputs() {
    let report = run(&ExperimentConfig::default_for(ExperimentKind::EvolutionTime)).unwrap();
    let (coh, sq, th) = (
        col(&report, "mu_coherent"),
        col(&report, "mu_squeezed"),
        col(&report, "mu_thermal"),
    );
    for i in 1..coh.len() {
        assert!(coh[i] >= sq[i] && sq[i] > th[i], "row {i}");
    }
    assert!(th.windows(2).all(|w| w[1] > w[0]));
    assert!((th[0] - 0.05).abs() < 1e-12);
    // μ(Γt = 5) = μ₀μ∞ / (μ₀ + e⁻⁵(μ∞ − μ₀)) for the thermal input.
    let expected = 0.05 * 0.5 / (0.05 + (-5.0f64).exp() * 0.45);
    assert!((th.last().unwrap() - expected).abs() < 1e-12);
    assert!(col(&report, "ode_residual").iter().all(|&r| r < 1e-8));
}

#[test]
fn r0_sweep_favours_coherent_inputs() {
    let report = run(&ExperimentConfig::default_for(ExperimentKind::EvolutionR0Sweep)).unwrap();
    for name in ["mu_N0", "mu_N0.5", "mu_N1"] {
        let mu = col(&report, name);
        assert!(mu.windows(2).all(|w| w[1] < w[0]), "{name}: {mu:?}");
    }
    assert!(col(&report, "ode_residual").iter().all(|&r| r < 1e-8));
}

#[test]
fn ratio_check_reproduces_published_ratio() {
    let report = run(&ExperimentConfig::default_for(ExperimentKind::RatioCheck)).unwrap();
    assert!((col(&report, "ratio")[1] - 0.537).abs() < 5e-4);
}

#[test]
fn reports_are_bit_reproducible() {
    let mut c = config(ExperimentKind::FigVarnx, 3);
    c.n_grid = vec![500, 5_000];
    c.resamples = 50;
    c.seed = Seed(99);
    let a = run(&c).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = single.install(|| run(&c).unwrap());
    assert_eq!(a.to_string(Format::Json).unwrap(), b.to_string(Format::Json).unwrap());
    assert_eq!(a.to_string(Format::Csv).unwrap(), b.to_string(Format::Csv).unwrap());

    c.seed = Seed(100);
    assert_ne!(run(&c).unwrap().rows, a.rows);
}

#[test]
fn json_report_refeeds_as_config() {
    for kind in [ExperimentKind::FigVarr, ExperimentKind::EvolutionTime] {
        let mut c = config(kind, 2);
        if kind == ExperimentKind::FigVarr {
            c.n_grid = vec![1_000];
        }
        let first = run(&c).unwrap().to_string(Format::Json).unwrap();
        let again = run(&ExperimentConfig::parse(&first).unwrap())
            .unwrap()
            .to_string(Format::Json)
            .unwrap();
        assert_eq!(first, again);
    }
}

#[test]
fn csv_schema_and_round_trip() {
    let report = run(&ExperimentConfig::default_for(ExperimentKind::RatioCheck)).unwrap();
    let text = report.to_string(Format::Csv).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "r0,mu,ratio,ode_residual");
    let (cols, rows) = parse_report_csv(&text).unwrap();
    assert_eq!(cols, report.columns);
    assert_eq!(rows, report.rows);
    // The embedded config reproduces the run.
    let cfg_line = text.lines().nth(1).unwrap().strip_prefix("# config=").unwrap();
    assert_eq!(run(&ExperimentConfig::parse(cfg_line).unwrap()).unwrap(), report);
}

#[test]
fn emit_writes_files_and_reports_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&ExperimentConfig::default_for(ExperimentKind::RatioCheck)).unwrap();
    let path = dir.path().join("ratio.json");
    purity_core::experiments::emit(&report, Format::Json, &path).unwrap();
    let back: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, report);
    let err = purity_core::experiments::emit(&report, Format::Csv, dir.path().join("missing/x.csv")).unwrap_err();
    assert!(err.to_string().contains("missing"), "{err}");
}
