//! Named experiment sweeps producing CSV tables and SVG panels.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{policy_name, ExperimentConfig};
use crate::environment::{Family, ScenarioKind};
use crate::error::{Error, Result};
use crate::policies::PolicyKind;
use crate::report::{emit_svg, write_curve_csv, write_summary_csv, Curve, SummaryRow};
use crate::simulator::{compare, run_replicated, AggregateStats};

pub const PRESETS: &[&str] = &[
    "fig_linear_on",
    "fig_rkhs_on",
    "fig_linear_off",
    "fig_rkhs_off",
    "table_compare",
];

pub const DIMS: [usize; 3] = [10, 15, 20];
pub const SOURCE_COUNTS: [usize; 4] = [1, 3, 5, 10];
pub const LOG_SIZES: [usize; 4] = [50, 100, 200, 500];

/// Files written by a preset and the summary rows behind them.
#[derive(Debug, Clone, Default)]
pub struct PresetOutput {
    pub files: Vec<PathBuf>,
    pub rows: Vec<SummaryRow>,
    pub panels: usize,
}

/// One panel: a baseline plus candidate curves indexed by `K` or `n_K`.
#[derive(Debug, Clone)]
pub struct PanelSpec {
    pub name: String,
    pub baseline: ExperimentConfig,
    pub candidates: Vec<(String, ExperimentConfig)>,
}

fn cell(base: &ExperimentConfig, family: Family, kind: ScenarioKind, d: usize) -> ExperimentConfig {
    ExperimentConfig {
        family,
        kind,
        dim: d,
        ..base.clone()
    }
}

fn panel(base: &ExperimentConfig, family: Family, kind: ScenarioKind, d: usize, online: bool) -> PanelSpec {
    let c = cell(base, family, kind, d);
    let candidates = if online {
        SOURCE_COUNTS
            .iter()
            .map(|&k| {
                (
                    format!("K={k}"),
                    ExperimentConfig {
                        policy: PolicyKind::CmTdpOn,
                        num_sources: k,
                        ..c.clone()
                    },
                )
            })
            .collect()
    } else {
        LOG_SIZES
            .iter()
            .map(|&n| {
                (
                    format!("n_K={n}"),
                    ExperimentConfig {
                        policy: PolicyKind::CmTdpOff,
                        offline_n: n.max(c.num_sources),
                        ..c.clone()
                    },
                )
            })
            .collect()
    };
    PanelSpec {
        name: format!("{}_d{d}", c.scenario_label()),
        baseline: ExperimentConfig {
            policy: base.baseline,
            ..c
        },
        candidates,
    }
}

/// Panels of a figure preset, or `None` for names that are not figures.
pub fn figure_panels(name: &str, base: &ExperimentConfig) -> Option<Vec<PanelSpec>> {
    let (family, online) = match name {
        "fig_linear_on" => (Family::Linear, true),
        "fig_rkhs_on" => (Family::Rkhs, true),
        "fig_linear_off" => (Family::Linear, false),
        "fig_rkhs_off" => (Family::Rkhs, false),
        _ => return None,
    };
    let mut out = Vec::new();
    for kind in [ScenarioKind::Identical, ScenarioKind::SparseDiff] {
        for d in DIMS {
            out.push(panel(base, family, kind, d, online));
        }
    }
    Some(out)
}

fn curve(label: &str, stats: &AggregateStats) -> Curve {
    Curve {
        label: label.to_string(),
        mean: stats.mean_cum.clone(),
        se: stats.se_cum.clone(),
    }
}

fn file_tag(label: &str) -> String {
    label.replace('=', "").replace(' ', "_")
}

fn write(path: PathBuf, bytes: &[u8], out: &mut PresetOutput) -> Result<()> {
    fs::write(&path, bytes)?;
    out.files.push(path);
    Ok(())
}

fn row(cfg: &ExperimentConfig, index: String, cand: &AggregateStats, base: &AggregateStats) -> SummaryRow {
    let cmp = compare(cand, base);
    SummaryRow {
        policy: policy_name(cfg.policy).into(),
        scenario: cfg.scenario_label(),
        d: cfg.dim.to_string(),
        k_or_nk: index,
        final_regret_mean: cand.final_mean,
        final_regret_se: cand.final_se,
        regret_reduction_pct: cmp.regret_reduction_pct,
        std_reduction_pct: cmp.std_reduction_pct,
        speed_ratio: cmp.speed_ratio,
    }
}

fn index_of(cfg: &ExperimentConfig) -> String {
    match cfg.policy {
        PolicyKind::CmTdpOff => cfg.offline_n.to_string(),
        _ => cfg.num_sources.to_string(),
    }
}

/// Runs one panel, writing a curve CSV per policy, the panel SVG, and returning summary rows.
pub fn run_panel(spec: &PanelSpec, out_dir: &Path, parallel: bool, out: &mut PresetOutput) -> Result<Vec<SummaryRow>> {
    let base = run_replicated(&spec.baseline, parallel)?;
    let base_label = policy_name(spec.baseline.policy);
    let mut curves = Vec::new();
    let mut rows = vec![SummaryRow {
        policy: base_label.into(),
        scenario: spec.baseline.scenario_label(),
        d: spec.baseline.dim.to_string(),
        k_or_nk: "-".into(),
        final_regret_mean: base.final_mean,
        final_regret_se: base.final_se,
        regret_reduction_pct: 0.0,
        std_reduction_pct: 0.0,
        speed_ratio: 1.0,
    }];
    for (label, cfg) in &spec.candidates {
        let stats = run_replicated(cfg, parallel)?;
        let c = curve(label, &stats);
        let mut buf = Vec::new();
        write_curve_csv(&c, &mut buf)?;
        write(out_dir.join(format!("{}_{}.csv", spec.name, file_tag(label))), &buf, out)?;
        rows.push(row(cfg, index_of(cfg), &stats, &base));
        curves.push(c);
    }
    let bc = curve(base_label, &base);
    let mut buf = Vec::new();
    write_curve_csv(&bc, &mut buf)?;
    write(out_dir.join(format!("{}_{base_label}.csv", spec.name)), &buf, out)?;
    curves.push(bc);
    let svg = emit_svg(&spec.name, &curves)?;
    write(out_dir.join(format!("{}.svg", spec.name)), svg.as_bytes(), out)?;
    out.panels += 1;
    Ok(rows)
}

/// Runs a named preset with `base` supplying every setting the sweep does
/// not vary (horizon, replications, seed, noise, solver settings).
pub fn run_preset(name: &str, base: &ExperimentConfig, out_dir: &Path, parallel: bool) -> Result<PresetOutput> {
    if !PRESETS.contains(&name) {
        return Err(Error::InvalidInput(format!(
            "unknown preset `{name}` (expected one of {})",
            PRESETS.join(", ")
        )));
    }
    fs::create_dir_all(out_dir)?;
    let mut out = PresetOutput::default();
    if let Some(panels) = figure_panels(name, base) {
        for p in &panels {
            let rows = run_panel(p, out_dir, parallel, &mut out)?;
            out.rows.extend(rows);
        }
        let mut buf = Vec::new();
        write_summary_csv(&out.rows, &mut buf)?;
        write(out_dir.join(format!("{name}_summary.csv")), &buf, &mut out)?;
        return Ok(out);
    }

    out.rows = compare_table(base, parallel)?;
    let mut buf = Vec::new();
    write_summary_csv(&out.rows, &mut buf)?;
    write(out_dir.join("table_compare.csv"), &buf, &mut out)?;
    Ok(out)
}

/// Sparse-difference comparison against the baseline for every `K` and
/// `n_K`, per dimension plus a dimension-averaged row.
pub fn compare_table(base: &ExperimentConfig, parallel: bool) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for family in [Family::Linear, Family::Rkhs] {
        let mut per_d: Vec<Vec<SummaryRow>> = Vec::new();
        for d in DIMS {
            let c = cell(base, family, ScenarioKind::SparseDiff, d);
            let baseline = run_replicated(
                &ExperimentConfig {
                    policy: base.baseline,
                    ..c.clone()
                },
                parallel,
            )?;
            let mut group = Vec::new();
            for k in SOURCE_COUNTS {
                let cfg = ExperimentConfig {
                    policy: PolicyKind::CmTdpOn,
                    num_sources: k,
                    ..c.clone()
                };
                group.push(row(&cfg, k.to_string(), &run_replicated(&cfg, parallel)?, &baseline));
            }
            for n in LOG_SIZES {
                let cfg = ExperimentConfig {
                    policy: PolicyKind::CmTdpOff,
                    offline_n: n.max(c.num_sources),
                    ..c.clone()
                };
                group.push(row(&cfg, n.to_string(), &run_replicated(&cfg, parallel)?, &baseline));
            }
            per_d.push(group);
        }
        rows.extend(per_d.iter().flatten().cloned());
        for i in 0..per_d[0].len() {
            let cells: Vec<&SummaryRow> = per_d.iter().map(|g| &g[i]).collect();
            let avg = |f: fn(&SummaryRow) -> f64| {
                let v: Vec<f64> = cells.iter().map(|r| f(r)).filter(|x| x.is_finite()).collect();
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            rows.push(SummaryRow {
                policy: cells[0].policy.clone(),
                scenario: cells[0].scenario.clone(),
                d: "avg".into(),
                k_or_nk: cells[0].k_or_nk.clone(),
                final_regret_mean: avg(|r| r.final_regret_mean),
                final_regret_se: avg(|r| r.final_regret_se),
                regret_reduction_pct: avg(|r| r.regret_reduction_pct),
                std_reduction_pct: avg(|r| r.std_reduction_pct),
                speed_ratio: avg(|r| r.speed_ratio),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_layouts() {
        let base = ExperimentConfig::default();
        let panels = figure_panels("fig_linear_on", &base).unwrap();
        assert_eq!(panels.len(), 6);
        assert!(panels.iter().all(|p| p.candidates.len() == 4));
        let names: Vec<_> = panels[0].candidates.iter().map(|c| c.0.as_str()).collect();
        assert_eq!(names, ["K=1", "K=3", "K=5", "K=10"]);
        let off = figure_panels("fig_rkhs_off", &base).unwrap();
        assert!(off.iter().all(|p| p.candidates.iter().all(|c| c.1.policy == PolicyKind::CmTdpOff)));
        assert!(figure_panels("table_compare", &base).is_none());
    }

    #[test]
    fn unknown_preset_rejected() {
        let dir = std::env::temp_dir();
        assert!(run_preset("fig_cubic", &ExperimentConfig::default(), &dir, false).is_err());
    }
}
