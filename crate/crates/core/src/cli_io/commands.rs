//! `solve`, `diagnose` and `sweep`.
//!
//! Every command writes into a fresh output directory: a `manifest.json`
//! echoing the effective configuration with its SHA-256, plus the artifacts
//! below. Nothing in the manifest or the reports depends on wall-clock time
//! or on where the directory lives, so reruns are byte-identical.
//!
//! | command    | artifacts                                                        |
//! |------------|------------------------------------------------------------------|
//! | `solve`    | `field.gspf`, `result.json`, `energy_history.csv`                |
//! | `diagnose` | `NN-<probe>.json` and `NN-<probe>.csv` per configured probe       |
//! | `sweep`    | `point-NNNN/` holding both of the above, and `sweep.csv`          |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{ManifoldKind, ProbeConfig, RunConfig, SweepPoint, FORMAT_VERSION};
use super::snapshot::{write_snapshot, Snapshot};
use crate::diagnostics::{
    blowup_normalize, caccioppoli_sweep, decay_probe, default_threshold, gehring_exponents, gehring_probe,
    holder_fit, holefill_check, singular_detect, DecayStatus, HolderOptions,
};
use crate::energy::{ball_mean, energy_report, localized_energy};
use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::grid::{BallSpec, Grid};
use crate::kernel::{build_kernel_with, KernelTable};
use crate::minimize::{minimize, RestartSummary, StopReason};

/// Flags shared by every command.
#[derive(Debug, Clone, Default)]
pub struct CommandOptions {
    /// Overrides the config's `output`.
    pub out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    pub seed: Option<u64>,
    /// Allow writing into a non-empty directory.
    pub force: bool,
}

/// The serializable part of a minimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub format_version: u32,
    pub regime: String,
    pub energy: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub projected_grad_norm: f64,
    pub restarts_used: usize,
    pub winning_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub tangential_residual: f64,
    pub constraint_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    format_version: u32,
    command: &'a str,
    crate_version: &'a str,
    seed: u64,
    regime: &'a str,
    config_sha256: String,
    config: &'a RunConfig,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct InputRecord {
    role: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The configuration as it will run: seed applied, output location removed.
fn effective_config(config: &RunConfig, opts: &CommandOptions) -> RunConfig {
    let mut c = config.clone();
    if let Some(seed) = opts.seed {
        c.seed = seed;
    }
    c.output = None;
    c
}

fn output_dir(config: &RunConfig, opts: &CommandOptions) -> Result<PathBuf> {
    opts.out
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| Error::Validation(vec!["no output directory: pass --out or set \"output\"".into()]))
}

/// Create `dir`, refusing a non-empty one unless `force`.
pub fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = std::fs::read_dir(dir)?.next().is_some();
        if occupied && !force {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_manifest(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
) -> Result<()> {
    let regime = config.fractional_params()?.regime_tag();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        command,
        crate_version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        regime,
        config_sha256: sha256_hex(&serde_json::to_vec(config)?),
        config,
        inputs,
        outputs,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn point(x: &[f64]) -> String {
    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")
}

fn build_kernel_for(config: &RunConfig) -> Result<(Grid, KernelTable)> {
    let grid = config.build_grid()?;
    let kernel = build_kernel_with(&grid, &config.fractional_params()?, config.near_field)?;
    Ok((grid, kernel))
}

struct Solved {
    field: FieldMap,
    summary: SolveSummary,
    history: Vec<f64>,
}

fn run_solve(config: &RunConfig, grid: &Grid, kernel: &KernelTable) -> Result<Solved> {
    let params = config.fractional_params()?;
    let manifold = config.manifold_spec();
    let mut initial = config.boundary.sample(grid, params.target_dim())?;
    if config.manifold.kind == ManifoldKind::Sphere {
        manifold.project_field(&mut initial)?;
    }
    let result = minimize(&initial, kernel, &manifold, &config.minimize_options())?;
    Ok(Solved {
        summary: SolveSummary {
            format_version: FORMAT_VERSION,
            regime: params.regime_tag().to_string(),
            energy: result.energy,
            converged: result.converged,
            stop_reason: result.stop_reason,
            iterations: result.iterations,
            projected_grad_norm: result.projected_grad_norm,
            restarts_used: result.restarts_used,
            winning_restart: result.winning_restart,
            restarts: result.restarts,
            tangential_residual: result.tangential_residual,
            constraint_violation: result.constraint_violation,
        },
        history: result.energy_history,
        field: result.field,
    })
}

fn write_solve_artifacts(dir: &Path, grid: &Grid, solved: &Solved) -> Result<Vec<String>> {
    write_snapshot(&dir.join("field.gspf"), grid, &solved.field)?;
    write_json(&dir.join("result.json"), &solved.summary)?;
    let rows: Vec<Vec<String>> = solved
        .history
        .iter()
        .enumerate()
        .map(|(k, e)| vec![k.to_string(), num(*e)])
        .collect();
    write_csv(&dir.join("energy_history.csv"), &["iteration".into(), "energy".into()], &rows)?;
    Ok(vec!["field.gspf".into(), "result.json".into(), "energy_history.csv".into()])
}

/// Output of one probe: JSON report, flat table and a one-line headline.
pub struct ProbeOutput {
    pub report: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub headline: String,
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Run one configured probe on `field`.
pub fn run_probe(probe: &ProbeConfig, field: &FieldMap, kernel: &KernelTable) -> Result<ProbeOutput> {
    let grid = kernel.grid();
    let params = *kernel.params();
    Ok(match probe {
        ProbeConfig::Energy { balls } => {
            let rep = energy_report(field, kernel, balls)?;
            let rows = rep
                .localized
                .iter()
                .map(|e| {
                    vec![
                        point(&e.ball.center),
                        num(e.ball.radius),
                        num(e.localized),
                        num(e.normalized),
                        e.under_resolved.to_string(),
                        e.touches_collar.to_string(),
                    ]
                })
                .collect();
            ProbeOutput {
                headline: format!("total={}", rep.total),
                report: serde_json::to_value(&rep)?,
                header: header(&["center", "radius", "localized", "normalized", "under_resolved", "touches_collar"]),
                rows,
            }
        }
        ProbeConfig::Caccioppoli { center, rhos } => {
            let rep = caccioppoli_sweep(field, kernel, center, rhos)?;
            let rows = rep
                .entries
                .iter()
                .map(|e| vec![num(e.rho), num(e.lhs), num(e.rhs_core), opt(e.ratio), e.under_resolved.to_string()])
                .collect();
            ProbeOutput {
                headline: format!("sup_ratio={}", opt(rep.sup_ratio)),
                report: serde_json::to_value(&rep)?,
                header: header(&["rho", "lhs", "rhs_core", "ratio", "under_resolved"]),
                rows,
            }
        }
        ProbeConfig::Decay { centers, radius, theta, eps1 } => {
            let eps1 = match eps1 {
                Some(e) => *e,
                None => default_threshold(field, kernel, *radius)?,
            };
            let reps = centers
                .iter()
                .map(|c| decay_probe(field, kernel, c, *radius, *theta, eps1))
                .collect::<Result<Vec<_>>>()?;
            let rows = reps
                .iter()
                .map(|r| {
                    vec![
                        point(&r.center),
                        num(r.radius),
                        num(r.theta),
                        num(r.eps1),
                        num(r.e_r),
                        num(r.e_theta_r),
                        opt(r.ratio),
                        match r.status {
                            DecayStatus::Measured => "measured".into(),
                            DecayStatus::Vacuous => "vacuous".into(),
                        },
                        r.small.to_string(),
                    ]
                })
                .collect();
            let worst = reps.iter().filter(|r| r.small).filter_map(|r| r.ratio).reduce(f64::max);
            ProbeOutput {
                headline: format!("max_small_ratio={}", opt(worst)),
                report: json!({ "eps1": eps1, "entries": reps }),
                header: header(&["center", "radius", "theta", "eps1", "e_r", "e_theta_r", "ratio", "status", "small"]),
                rows,
            }
        }
        ProbeConfig::Blowup { center, radius } => {
            let ball = BallSpec::new(center.clone(), *radius);
            let b = blowup_normalize(field, kernel, &ball)?;
            let energy_after = localized_energy(&b.field, kernel, &ball)?;
            let mean_after = ball_mean(&b.field, &grid.ball_indices(&ball));
            let mean_after_max = mean_after.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            ProbeOutput {
                headline: format!("scale={}", b.scale),
                report: json!({
                    "ball": ball,
                    "scale": b.scale,
                    "mean": b.mean,
                    "energy_after": energy_after,
                    "mean_after_max_abs": mean_after_max,
                }),
                header: header(&["center", "radius", "scale", "energy_after", "mean_after_max_abs"]),
                rows: vec![vec![point(center), num(*radius), num(b.scale), num(energy_after), num(mean_after_max)]],
            }
        }
        ProbeConfig::Singular { scales, eps1 } => {
            let eps1 = match eps1 {
                Some(e) => *e,
                None => {
                    let r_max = scales.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    default_threshold(field, kernel, r_max)?
                }
            };
            let rep = singular_detect(field, kernel, eps1, scales)?;
            let mut cols = vec!["cell".to_string(), "center".to_string()];
            cols.extend(rep.scales.iter().map(|r| format!("e_{r}")));
            let rows = rep
                .flagged
                .iter()
                .map(|c| {
                    let mut row = vec![c.index.to_string(), point(&c.center)];
                    row.extend(c.energies.iter().map(|e| num(*e)));
                    row
                })
                .collect();
            ProbeOutput {
                headline: format!("clusters={} flagged={}", rep.clusters.len(), rep.flagged.len()),
                report: serde_json::to_value(&rep)?,
                header: cols,
                rows,
            }
        }
        ProbeConfig::Holder { region, radii, residual_threshold } => {
            let opts = HolderOptions { residual_threshold: *residual_threshold };
            let rep = holder_fit(field, grid, region, params.p(), radii, &opts)?;
            let rows = (0..rep.radii.len())
                .map(|k| {
                    vec![num(rep.radii[k]), num(rep.effective_radii[k]), num(rep.quotients[k]), point(&rep.argmax[k])]
                })
                .collect();
            ProbeOutput {
                headline: format!("alpha={}", opt(rep.alpha)),
                report: serde_json::to_value(&rep)?,
                header: header(&["radius", "effective_radius", "quotient", "argmax"]),
                rows,
            }
        }
        ProbeConfig::Gehring { balls, q, p_bars, enlargement } => {
            let q = match q {
                Some(q) => *q,
                None => gehring_exponents(&params)?.1,
            };
            let p_bars = p_bars.clone().unwrap_or_else(|| vec![1.25 * params.p(), 1.5 * params.p()]);
            let rep = gehring_probe(field, kernel, balls, q, &p_bars, *enlargement)?;
            let mut cols = header(&["center", "radius", "mean_p", "mean_q", "power_mean_ratio", "reverse_holder_ratio"]);
            cols.extend(p_bars.iter().map(|b| format!("moment_{b}")));
            let rows = rep
                .balls
                .iter()
                .map(|b| {
                    let mut row = vec![
                        point(&b.ball.center),
                        num(b.ball.radius),
                        num(b.mean_p),
                        num(b.mean_q),
                        opt(b.power_mean_ratio),
                        opt(b.reverse_holder_ratio),
                    ];
                    row.extend(b.higher_moments.iter().map(|m| num(*m)));
                    row
                })
                .collect();
            ProbeOutput {
                headline: format!("max_reverse_holder={}", opt(rep.max_reverse_holder)),
                report: serde_json::to_value(&rep)?,
                header: cols,
                rows,
            }
        }
        ProbeConfig::Holefill { center, radii, alpha, beta, tol } => {
            let mut radii = radii.clone();
            radii.sort_by(f64::total_cmp);
            let values = radii
                .iter()
                .map(|&r| localized_energy(field, kernel, &BallSpec::new(center.clone(), r)))
                .collect::<Result<Vec<_>>>()?;
            let rep = holefill_check(
                &radii,
                &values,
                alpha.unwrap_or(params.sp()),
                beta.unwrap_or(params.p()),
                *tol,
            )?;
            let rows = radii.iter().zip(&values).map(|(r, v)| vec![num(*r), num(*v)]).collect();
            ProbeOutput {
                headline: format!("theta={} consistent={}", opt(rep.theta), rep.consistent),
                report: json!({ "center": center, "radii": radii, "localized": values, "fit": rep }),
                header: header(&["radius", "localized"]),
                rows,
            }
        }
    })
}

fn probe_stem(k: usize, probe: &ProbeConfig) -> String {
    format!("{k:02}-{}", probe.kind())
}

fn run_probes(config: &RunConfig, field: &FieldMap, kernel: &KernelTable, dir: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let mut outputs = Vec::new();
    let mut headlines = Vec::new();
    for (k, probe) in config.diagnostics.iter().enumerate() {
        let out = run_probe(probe, field, kernel)?;
        let stem = probe_stem(k, probe);
        write_json(&dir.join(format!("{stem}.json")), &out.report)?;
        write_csv(&dir.join(format!("{stem}.csv")), &out.header, &out.rows)?;
        outputs.push(format!("{stem}.json"));
        outputs.push(format!("{stem}.csv"));
        headlines.push(format!("{stem}: {}", out.headline));
    }
    Ok((outputs, headlines))
}

/// Minimize from the configured boundary data and save the result.
pub fn cmd_solve(config_path: &Path, opts: &CommandOptions) -> Result<SolveSummary> {
    let loaded = RunConfig::load(config_path)?;
    let dir = output_dir(&loaded, opts)?;
    let config = effective_config(&loaded, opts);
    let (grid, kernel) = build_kernel_for(&config)?;
    prepare_output(&dir, opts.force)?;
    let solved = run_solve(&config, &grid, &kernel)?;
    let outputs = write_solve_artifacts(&dir, &grid, &solved)?;
    write_manifest(&dir, "solve", &config, Vec::new(), outputs)?;
    Ok(solved.summary)
}

/// Run the configured probes on a saved field; returns one headline per probe.
pub fn cmd_diagnose(config_path: &Path, snapshot_path: &Path, opts: &CommandOptions) -> Result<Vec<String>> {
    let loaded = RunConfig::load(config_path)?;
    let dir = output_dir(&loaded, opts)?;
    let config = effective_config(&loaded, opts);
    let (grid, kernel) = build_kernel_for(&config)?;
    let bytes = std::fs::read(snapshot_path)?;
    let snap = Snapshot::from_bytes(&bytes)?;
    snap.check_grid(&grid)?;
    if snap.field.dim() != config.params.target_dim {
        return Err(Error::Mismatch(format!(
            "snapshot has N = {}, config has N = {}",
            snap.field.dim(),
            config.params.target_dim
        )));
    }
    prepare_output(&dir, opts.force)?;
    let (outputs, headlines) = run_probes(&config, &snap.field, &kernel, &dir)?;
    let inputs = vec![InputRecord {
        role: "snapshot".into(),
        sha256: sha256_hex(&bytes),
    }];
    write_manifest(&dir, "diagnose", &config, inputs, outputs)?;
    Ok(headlines)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub s: f64,
    pub p: f64,
    pub h: f64,
    pub theta: Option<f64>,
    pub eps1: Option<f64>,
    pub status: String,
    pub error: String,
    pub regime: String,
    pub energy: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub projected_grad_norm: Option<f64>,
    /// Probe headlines joined by `; `.
    pub probes: String,
}

fn sweep_point(config: &RunConfig, dir: &Path) -> Result<(SolveSummary, Vec<String>)> {
    config.check()?;
    let (grid, kernel) = build_kernel_for(config)?;
    prepare_output(dir, true)?;
    let solved = run_solve(config, &grid, &kernel)?;
    let mut outputs = write_solve_artifacts(dir, &grid, &solved)?;
    let (probe_outputs, headlines) = run_probes(config, &solved.field, &kernel, dir)?;
    outputs.extend(probe_outputs);
    write_manifest(dir, "sweep-point", config, Vec::new(), outputs)?;
    Ok((solved.summary, headlines))
}

/// Solve and diagnose at every point of the configured sweep. A failing
/// point is recorded in its row and the sweep carries on.
pub fn cmd_sweep(config_path: &Path, opts: &CommandOptions) -> Result<Vec<SweepRow>> {
    let loaded = RunConfig::load(config_path)?;
    let dir = output_dir(&loaded, opts)?;
    let config = effective_config(&loaded, opts);
    prepare_output(&dir, opts.force)?;
    let points = config.sweep.clone().unwrap_or_default().points();
    let mut rows = Vec::with_capacity(points.len());
    let mut outputs = Vec::new();
    for (index, pt) in points.iter().enumerate() {
        let at = config.at_point(pt);
        let name = format!("point-{index:04}");
        let result = sweep_point(&at, &dir.join(&name));
        outputs.push(name);
        rows.push(sweep_row(index, &at, pt, result));
    }
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    outputs.push("sweep.csv".into());
    write_manifest(&dir, "sweep", &config, Vec::new(), outputs)?;
    Ok(rows)
}

fn sweep_row(index: usize, at: &RunConfig, pt: &SweepPoint, result: Result<(SolveSummary, Vec<String>)>) -> SweepRow {
    let regime = at
        .fractional_params()
        .map(|p| p.regime_tag().to_string())
        .unwrap_or_default();
    let mut row = SweepRow {
        index,
        s: at.params.s,
        p: at.params.p,
        h: at.grid.h,
        theta: pt.theta,
        eps1: pt.eps1,
        status: "ok".into(),
        error: String::new(),
        regime,
        energy: None,
        converged: None,
        iterations: None,
        projected_grad_norm: None,
        probes: String::new(),
    };
    match result {
        Ok((summary, headlines)) => {
            row.energy = Some(summary.energy);
            row.converged = Some(summary.converged);
            row.iterations = Some(summary.iterations);
            row.projected_grad_norm = Some(summary.projected_grad_norm);
            row.probes = headlines.join("; ");
        }
        Err(e) => {
            row.status = "failed".into();
            row.error = e.to_string().replace('\n', " ");
        }
    }
    row
}
