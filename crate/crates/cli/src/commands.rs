//! The four pipelines behind the CLI subcommands. Each writes its
//! artifacts atomically (temp file + rename), so failed runs leave no
//! partial outputs, and reduces parallel results in index order, so equal
//! configs produce byte-identical files regardless of scheduling.

use crate::config::{RunConfig, SweepSpec};
use anyhow::{bail, Context, Result};
use gda_core::certify::{certify, verify_global_bounds, Certificate, Theorem2Case};
use gda_core::classify::classify_trajectory;
use gda_core::dynamics::integrate;
use gda_core::energy::energy_audit;
use gda_core::output;
use gda_core::payoff::Payoff;
use rayon::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)
        .with_context(|| format!("creating output directory {}", parent.display()))?;
    let tmp = path.with_extension(format!(
        "{}.tmp-{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Effective energy parameter: explicit override, else certified r, else 0.
fn resolve_r(cfg: &RunConfig, cert: Option<&Certificate>) -> f64 {
    cfg.r_override
        .or_else(|| cert.and_then(|c| c.r))
        .unwrap_or(0.0)
}

fn certificate_for(cfg: &RunConfig, payoff: &Payoff) -> Result<Certificate> {
    certify(payoff, &cfg.certify_box, cfg.certify_samples, cfg.seed).context("certification failed")
}

/// `simulate`: one trajectory CSV and one energy-audit JSON per start.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if cfg.initial.is_empty() {
        bail!("simulate needs at least one start state in `initial`");
    }
    let cert = if cfg.r_override.is_none() {
        Some(certificate_for(cfg, &cfg.payoff)?)
    } else {
        None
    };
    let r = resolve_r(cfg, cert.as_ref());

    let results: Vec<Result<(PathBuf, PathBuf)>> = cfg
        .initial
        .par_iter()
        .enumerate()
        .map(|(i, start)| -> Result<(PathBuf, PathBuf)> {
            let traj = integrate(&cfg.payoff, start, &cfg.integrator);
            if traj.points.len() < 3 {
                bail!(
                    "start {i}: integration stopped after {} recorded points ({:?}); \
                     nothing to audit",
                    traj.points.len(),
                    traj.stop
                );
            }
            let csv = output::trajectory_csv(&cfg.payoff, &traj, r)
                .with_context(|| format!("energy columns for start {i}"))?;
            let audit = energy_audit(&cfg.payoff, &traj, r)
                .with_context(|| format!("energy audit for start {i}"))?;
            let csv_path = out_dir.join(format!("trajectory_{i}.csv"));
            let audit_path = out_dir.join(format!("audit_{i}.json"));
            write_atomic(&csv_path, &csv)?;
            write_atomic(
                &audit_path,
                &output::to_json_string(&output::audit_json(&audit)),
            )?;
            Ok((csv_path, audit_path))
        })
        .collect();

    let mut written = Vec::new();
    for r in results {
        let (csv, audit) = r?;
        written.push(csv);
        written.push(audit);
    }
    Ok(written)
}

/// `certify`: certificate JSON with the sampled inequality report.
pub fn cmd_certify(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let cert = certificate_for(cfg, &cfg.payoff)?;
    let lemmas = verify_global_bounds(
        &cfg.payoff,
        &cert.eigs,
        cfg.certify_samples,
        &cfg.certify_box,
        cfg.seed,
    )
    .context("global bounds verification failed")?;
    let path = out_dir.join("certificate.json");
    write_atomic(
        &path,
        &output::to_json_string(&output::certificate_with_lemmas_json(&cert, &lemmas)),
    )?;
    Ok(vec![path])
}

/// `classify`: one classification JSON array entry per start.
pub fn cmd_classify(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if cfg.initial.is_empty() {
        bail!("classify needs at least one start state in `initial`");
    }
    let entries: Vec<Result<serde_json::Value>> = cfg
        .initial
        .par_iter()
        .enumerate()
        .map(|(i, start)| {
            let traj = integrate(&cfg.payoff, start, &cfg.integrator);
            if traj.points.is_empty() {
                bail!(
                    "start {i}: the initial state is not evaluable ({:?})",
                    traj.stop
                );
            }
            let classification = classify_trajectory(&cfg.payoff, &traj, &cfg.classifier);
            Ok(output::classification_json(
                &classification,
                &cfg.classifier,
            ))
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    let path = out_dir.join("classifications.json");
    write_atomic(
        &path,
        &output::to_json_string(&serde_json::Value::Array(entries)),
    )?;
    Ok(vec![path])
}

struct SweepRow {
    values: Vec<f64>,
    theorem1: bool,
    theorem2_case: Theorem2Case,
    corollary1: bool,
    verdict: &'static str,
    r: f64,
}

/// `sweep`: cross product of the configured parameter values, one
/// certificate + simulated verdict per cell, CSV out. Row order is the
/// row-major cell order (first parameter outermost), then start index.
pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let Some(spec) = &cfg.sweep else {
        bail!("sweep needs a `sweep` section in the config");
    };
    if cfg.initial.is_empty() {
        bail!("sweep needs at least one start state in `initial`");
    }
    if spec.starts_per_cell > cfg.initial.len() {
        bail!(
            "sweep.starts_per_cell = {} exceeds the {} configured start states",
            spec.starts_per_cell,
            cfg.initial.len()
        );
    }

    let cells = enumerate_cells(spec);
    let rows: Vec<Result<Vec<SweepRow>>> = cells
        .par_iter()
        .map(|values| -> Result<Vec<SweepRow>> {
            let mut params = cfg.payoff_params.clone();
            for (p, v) in spec.parameters.iter().zip(values) {
                params
                    .set(&p.name, *v)
                    .map_err(anyhow::Error::msg)
                    .context("applying sweep cell")?;
            }
            let payoff = params
                .build()
                .map_err(|e| anyhow::anyhow!(e.to_string()))
                .context("building sweep cell payoff")?;
            let cert = certificate_for(cfg, &payoff)?;
            let r = resolve_r(cfg, Some(&cert));
            let mut out = Vec::with_capacity(spec.starts_per_cell);
            for start in cfg.initial.iter().take(spec.starts_per_cell) {
                let traj = integrate(&payoff, start, &cfg.integrator);
                if traj.points.is_empty() {
                    bail!(
                        "sweep cell {values:?}: the initial state is not evaluable ({:?})",
                        traj.stop
                    );
                }
                let classification = classify_trajectory(&payoff, &traj, &cfg.classifier);
                out.push(SweepRow {
                    values: values.clone(),
                    theorem1: cert.theorem1,
                    theorem2_case: cert.theorem2_case,
                    corollary1: cert.corollary1,
                    verdict: classification.verdict.name(),
                    r,
                });
            }
            Ok(out)
        })
        .collect();

    let mut csv = String::new();
    for p in &spec.parameters {
        csv.push_str(&p.name);
        csv.push(',');
    }
    csv.push_str("theorem1,theorem2_case,corollary1,verdict,r\n");
    for cell in rows {
        for row in cell? {
            for v in &row.values {
                csv.push_str(&output::fmt_f64(*v));
                csv.push(',');
            }
            csv.push_str(if row.theorem1 { "true" } else { "false" });
            csv.push(',');
            csv.push_str(match row.theorem2_case {
                Theorem2Case::Case1 => "case1",
                Theorem2Case::Case2 => "case2",
                Theorem2Case::None => "none",
            });
            csv.push(',');
            csv.push_str(if row.corollary1 { "true" } else { "false" });
            csv.push(',');
            csv.push_str(row.verdict);
            csv.push(',');
            csv.push_str(&output::fmt_f64(row.r));
            csv.push('\n');
        }
    }

    let path = out_dir.join("sweep.csv");
    write_atomic(&path, &csv)?;
    Ok(vec![path])
}

/// Row-major cross product of the sweep values.
fn enumerate_cells(spec: &SweepSpec) -> Vec<Vec<f64>> {
    let mut cells: Vec<Vec<f64>> = vec![Vec::new()];
    for param in &spec.parameters {
        let mut next = Vec::with_capacity(cells.len() * param.values.len());
        for prefix in &cells {
            for v in &param.values {
                let mut cell = prefix.clone();
                cell.push(*v);
                next.push(cell);
            }
        }
        cells = next;
    }
    cells
}

/// Convenience wrapper used by tests: run a command by name against a
/// parsed config.
pub fn run_command(name: &str, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    match name {
        "simulate" => cmd_simulate(cfg, out_dir),
        "certify" => cmd_certify(cfg, out_dir),
        "classify" => cmd_classify(cfg, out_dir),
        "sweep" => cmd_sweep(cfg, out_dir),
        other => bail!("unknown command {other}"),
    }
}
