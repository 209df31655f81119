use std::io::Write;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;

use cpk::coupling::{DEFAULT_POOL_SIZE, DEFAULT_TAIL};
use cpk::estimate::FitOptions;
use cpk::montecarlo::{mixing_study, MixingConfig};
use cpk::simulate::DEFAULT_BURN_IN;
use cpk::{FamilyKind, Hypothesis, IntensitySpec, SweepRow};

use crate::config::{
    config_error, output, parse_list, read_counts, read_json, read_mixing_config, read_paths,
    read_simulate_config, resolve_seed, sidecar_path, write_json, Document, FitConfig, Provenance,
    TestConfig,
};
use crate::{Command, FitArgs, MixingArgs, ReconstructArgs, SimulateArgs, StudyArgs, TestArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Test(a) => test(a),
        Command::Mixing(a) => mixing(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Study(a) => study(a),
    }
}

fn parse_family(raw: &str) -> Result<FamilyKind> {
    raw.parse()
        .map_err(|e: cpk::Error| config_error(e.to_string()))
}

fn write_sidecar(csv: Option<&Path>, body: &impl Serialize, provenance: &Provenance) -> Result<()> {
    if let Some(p) = csv {
        write_json(Some(&sidecar_path(p)), &Document { body, provenance })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateRun {
    model: IntensitySpec,
    n: usize,
    burn_in: usize,
    seed: u64,
    lambda_start: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    rows: usize,
    mean_intensity: f64,
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = read_simulate_config(&a.config)?;
    let n =
        a.n.or(cfg.n)
            .ok_or_else(|| config_error("trajectory length missing: pass --n or set \"n\""))?;
    let seed = resolve_seed(a.seed, cfg.seed)?;
    let run = SimulateRun {
        n,
        burn_in: a.burn_in.or(cfg.burn_in).unwrap_or(DEFAULT_BURN_IN),
        seed: seed.0,
        lambda_start: a
            .lambda_start
            .or(cfg.lambda_start)
            .unwrap_or_else(|| cfg.model.mean_bound()),
        model: cfg.model,
    };
    let traj = cpk::simulate(&run.model, run.lambda_start, run.n, run.burn_in, run.seed)?;
    cpk::io::write_trajectory_csv(&traj, output(a.out.as_deref())?)?;
    let summary = SimulateSummary {
        rows: traj.len(),
        mean_intensity: traj.mean_intensity(),
    };
    write_sidecar(
        a.out.as_deref(),
        &summary,
        &Provenance::new("simulate", &run)?.seeded(seed),
    )
}

#[derive(Serialize)]
struct FitRun<'a> {
    counts: &'a Path,
    family: FamilyKind,
    theta_init: Option<Vec<f64>>,
    fit: FitOptions,
}

fn fit(a: FitArgs) -> Result<()> {
    let cfg: FitConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    let family = match &a.family {
        Some(f) => parse_family(f)?,
        None => cfg
            .family
            .ok_or_else(|| config_error("family missing: pass --family or set \"family\""))?,
    };
    let mut options = cfg.fit;
    if a.lambda_start.is_some() {
        options.lambda_start = a.lambda_start;
    }
    let counts = read_counts(&a.counts)?;
    let result = cpk::fit_cmle(family, &counts, cfg.theta_init.as_deref(), &options)?;
    let run = FitRun {
        counts: &a.counts,
        family,
        theta_init: cfg.theta_init,
        fit: FitOptions {
            lambda_start: Some(result.lambda_start),
            ..options
        },
    };
    let provenance = Provenance::new("fit", &run)?;
    write_json(
        a.out.as_deref(),
        &Document {
            body: &result,
            provenance: &provenance,
        },
    )
}

#[derive(Serialize)]
struct TestRun<'a> {
    counts: &'a Path,
    hypothesis: Hypothesis,
    alpha: f64,
    lambda_start: Option<f64>,
    fit: FitOptions,
}

fn test(a: TestArgs) -> Result<()> {
    let cfg: TestConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TestConfig::default(),
    };
    let hypothesis = match (&a.family, &a.hypothesis) {
        (Some(f), _) => Hypothesis::Composite {
            family: parse_family(f)?,
        },
        (None, Some(p)) => read_json(p)?,
        (None, None) => cfg.hypothesis.clone().ok_or_else(|| {
            config_error("null hypothesis missing: pass --family or --hypothesis")
        })?,
    };
    let alpha = a.alpha.or(cfg.alpha).unwrap_or(0.05);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(config_error(format!(
            "--alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let counts = read_counts(&a.counts)?;
    let lambda_start = a.lambda_start.or(cfg.lambda_start);
    let report = cpk::run_test(&counts, &hypothesis, alpha, lambda_start, &cfg.fit)?;
    let run = TestRun {
        counts: &a.counts,
        hypothesis,
        alpha,
        lambda_start: report.lambda_start,
        fit: cfg.fit,
    };
    let provenance = Provenance::new("test", &run)?;
    write_json(
        a.out.as_deref(),
        &Document {
            body: &report,
            provenance: &provenance,
        },
    )
}

fn mixing(a: MixingArgs) -> Result<()> {
    let file = read_mixing_config(&a.config)?;
    let n_values = match &a.n_values {
        Some(raw) => parse_list(raw)?,
        None => file
            .n_values
            .clone()
            .ok_or_else(|| config_error("lags missing: pass --n-values or set \"n_values\""))?,
    };
    let seed = resolve_seed(a.seed, file.seed)?;
    let cfg = MixingConfig {
        model: file.model,
        n_values,
        tail: a.tail.or(file.tail).unwrap_or(DEFAULT_TAIL),
        replicates: a.replicates.or(file.replicates).unwrap_or(10_000),
        seed: seed.0,
        pool_size: a.pool_size.or(file.pool_size).unwrap_or(DEFAULT_POOL_SIZE),
    };
    let summary = mixing_study(&cfg)?;
    let rows: Vec<Vec<f64>> = summary
        .mixing
        .as_ref()
        .map(|m| {
            m.rows
                .iter()
                .map(|r| vec![r.n as f64, r.estimate, r.bound, r.se, r.trunc_err])
                .collect()
        })
        .unwrap_or_default();
    cpk::io::write_table_csv(
        &["n", "empirical_nonconv", "bound", "se", "trunc_err"],
        &rows,
        output(a.out.as_deref())?,
    )?;
    write_sidecar(
        a.out.as_deref(),
        &summary,
        &Provenance::new("mixing", &cfg)?.seeded(seed),
    )
}

#[derive(Serialize)]
struct ReconstructRun<'a> {
    trajectory: &'a Path,
    model: IntensitySpec,
    depths: Vec<usize>,
}

#[derive(Serialize)]
struct ReconstructSummary {
    rows: Vec<SweepRow>,
    total_violations: usize,
}

/// The model recorded by `simulate` in the trajectory's sidecar.
fn sidecar_model(trajectory: &Path) -> Result<IntensitySpec> {
    let path = sidecar_path(trajectory);
    if !path.exists() {
        return Err(config_error(format!(
            "no --config given and no sidecar {} to take the model from",
            path.display()
        )));
    }
    let doc: Value = read_json(&path)?;
    let model = doc
        .pointer("/provenance/config/model")
        .cloned()
        .ok_or_else(|| config_error(format!("{} records no model", path.display())))?;
    serde_json::from_value(model).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let model = match &a.config {
        Some(p) => read_simulate_config(p)?.model,
        None => sidecar_model(&a.trajectory)?,
    };
    let depths = parse_list(&a.depths)?;
    let (counts, intensities) = read_paths(&a.trajectory)?;
    let rows = cpk::reconstruction_sweep(&model, &counts, &intensities, &depths)?;
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.depth as f64, r.max_abs_error, r.bound])
        .collect();
    cpk::io::write_table_csv(
        &["d", "max_err", "bound"],
        &table,
        output(a.out.as_deref())?,
    )?;
    let total_violations = rows.iter().map(|r| r.violations).sum();
    if total_violations > 0 {
        eprintln!("warning: {total_violations} steps exceed the pathwise bound");
    }
    let run = ReconstructRun {
        trajectory: &a.trajectory,
        model,
        depths,
    };
    write_sidecar(
        a.out.as_deref(),
        &ReconstructSummary {
            rows,
            total_violations,
        },
        &Provenance::new("reconstruct", &run)?,
    )
}

fn study(a: StudyArgs) -> Result<()> {
    let mut cfg: cpk::StudyConfig = read_json(&a.config)?;
    let seed = resolve_seed(a.seed, Some(cfg.seed()))?;
    cfg.set_seed(seed.0);
    let summary = cpk::run_study(&cfg)?;
    if let Some(path) = &a.values_out {
        write_values(path, &summary)?;
    }
    let provenance = Provenance::new("study", &cfg)?.seeded(seed);
    write_json(
        a.out.as_deref(),
        &Document {
            body: &summary,
            provenance: &provenance,
        },
    )
}

fn write_values(path: &Path, summary: &cpk::MCSummary) -> Result<()> {
    let mut out = output(Some(path))?;
    match &summary.rejections {
        Some(rej) => {
            writeln!(out, "replicate,value,reject")?;
            for (i, (v, r)) in summary.values.iter().zip(rej).enumerate() {
                writeln!(out, "{i},{},{}", cpk::io::fmt_g17(*v), u8::from(*r))?;
            }
        }
        None => {
            writeln!(out, "replicate,value")?;
            for (i, v) in summary.values.iter().enumerate() {
                writeln!(out, "{i},{}", cpk::io::fmt_g17(*v))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
