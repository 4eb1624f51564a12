//! One configured run: build the preset, evolve, gate, and emit
//! `records.csv` + `summary.json`.
//!
//! Output formatting is pinned for reproducibility: CSV values carry 17
//! significant digits, JSON comes from stable struct field order, and
//! nothing time- or host-dependent goes into either file (wall-clock timing
//! is the caller's business, printed to stderr by the binary).

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use outwave_core::diagnostics::{self, DiagnosticsRecord, NormSelector};
use outwave_core::evolve::{self, Monitors, RunOutcome};

use crate::config::{ExperimentConfig, FormulationConfig};
use crate::{preset, CliError, EXIT_GATES_FAILED, EXIT_NUMERICAL_ABORT, EXIT_OK};

/// Relative slack for the monotonicity verdicts.
pub const MONOTONE_SLACK: f64 = 1e-6;

const CSV_HEADER: &str =
    "t,l2,lNp2,sup,h1,E0,flux_Np2,flux_sq,support_inner,support_outer,res_conserv,res_energy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunVerdict {
    GatesPassed,
    GatesFailed,
    NumericalAbort,
}

impl RunVerdict {
    pub fn exit_code(self) -> i32 {
        match self {
            RunVerdict::GatesPassed => EXIT_OK,
            RunVerdict::GatesFailed => EXIT_GATES_FAILED,
            RunVerdict::NumericalAbort => EXIT_NUMERICAL_ABORT,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub n_points: usize,
    pub r_max: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalNorms {
    pub t: f64,
    pub l2: f64,
    pub lnp2: f64,
    pub sup: f64,
    pub h1: f64,
    pub e0: f64,
    pub support_inner: f64,
    pub support_outer: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    /// Largest running `L^{N+2}` balance residual over the run (absolute).
    pub max_abs_conserv: f64,
    pub max_abs_energy: f64,
    /// Same, relative to `‖u₀‖_{L^{N+2}}^{N+2}` and `E₀(0)`.
    pub rel_conserv: f64,
    pub rel_energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecaySummary {
    pub window: [f64; 2],
    pub sup_slope: Option<f64>,
    pub lnp2_line_slope: Option<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityVerdicts {
    pub lnp2_monotone: bool,
    pub energy_monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub exponent_n: f64,
    pub formulation: FormulationConfig,
    pub grid: GridSummary,
    pub t_final: f64,
    pub seed: u64,
    pub outcome: &'static str,
    pub final_norms: FinalNorms,
    pub residuals: ResidualSummary,
    pub decay: Option<DecaySummary>,
    pub monotonicity: MonotonicityVerdicts,
    pub gates_passed: bool,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub records: Vec<DiagnosticsRecord>,
    pub summary: Summary,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

impl ExperimentReport {
    pub fn verdict(&self) -> RunVerdict {
        if self.summary.outcome != "completed" {
            RunVerdict::NumericalAbort
        } else if self.summary.gates_passed {
            RunVerdict::GatesPassed
        } else {
            RunVerdict::GatesFailed
        }
    }
}

/// Is the sequence nonincreasing up to [`MONOTONE_SLACK`] relative wiggle?
fn nonincreasing(values: impl Iterator<Item = f64>) -> bool {
    let mut prev = f64::INFINITY;
    for v in values {
        if v > prev * (1.0 + MONOTONE_SLACK) {
            return false;
        }
        prev = prev.min(v);
    }
    true
}

fn format_csv(records: &[DiagnosticsRecord], n_exp: f64) -> String {
    let mut out = String::with_capacity(records.len() * 260 + 128);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        let row = [
            rec.t,
            rec.lp(2.0).unwrap_or(f64::NAN),
            rec.lp(n_exp + 2.0).unwrap_or(f64::NAN),
            rec.sup_norm,
            rec.h1_norm,
            rec.energy_e0,
            rec.flux_np2,
            rec.flux_sq,
            rec.support_inner,
            rec.support_outer,
            rec.res_conserv,
            rec.res_energy,
        ];
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
            first = false;
        }
        out.push('\n');
    }
    out
}

fn summarize(cfg: &ExperimentConfig, out: &evolve::RunOutput) -> Summary {
    let n_exp = cfg.exponent_n;
    let records = &out.records;
    let first = records.first().expect("runs always record t = 0");
    let last = records.last().expect("runs always record t = 0");

    let outcome = match out.outcome {
        RunOutcome::Completed => "completed",
        RunOutcome::BlowUp { .. } => "blow_up",
        RunOutcome::OriginGuard { .. } => "origin_guard",
    };

    let mass_0 = first.lp(n_exp + 2.0).unwrap_or(0.0).powf(n_exp + 2.0);
    let energy_0 = first.energy_e0;
    let max_abs_conserv = records
        .iter()
        .fold(0.0f64, |m, r| m.max(r.res_conserv.abs()));
    let max_abs_energy = records
        .iter()
        .fold(0.0f64, |m, r| m.max(r.res_energy.abs()));

    let lnp2_monotone = nonincreasing(
        records
            .iter()
            .map(|r| r.lp(n_exp + 2.0).unwrap_or(f64::NAN)),
    );
    let energy_monotone = nonincreasing(records.iter().map(|r| r.energy_e0));

    let window = [(cfg.t_final / 10.0).max(1.0), cfg.t_final];
    let decay = if window[1] > window[0] {
        let sup = diagnostics::decay_slope(records, NormSelector::Sup, (window[0], window[1]));
        let line = diagnostics::decay_slope(
            records,
            NormSelector::LineLp(n_exp + 2.0),
            (window[0], window[1]),
        );
        match (&sup, &line) {
            (Err(_), Err(_)) => None,
            _ => Some(DecaySummary {
                window,
                sup_slope: sup.as_ref().ok().map(|f| f.slope),
                lnp2_line_slope: line.as_ref().ok().map(|f| f.slope),
                low_confidence: sup.map(|f| f.low_confidence).unwrap_or(true),
            }),
        }
    } else {
        None
    };

    let gates = &cfg.gates;
    let mut gates_passed = out.outcome.is_completed();
    if gates.lnp2_monotone {
        gates_passed &= lnp2_monotone;
    }
    if gates.energy_monotone {
        gates_passed &= energy_monotone;
    }
    let rel_conserv = if mass_0 > 0.0 {
        max_abs_conserv / mass_0
    } else {
        0.0
    };
    let rel_energy = if energy_0 > 0.0 {
        max_abs_energy / energy_0
    } else {
        0.0
    };
    if let Some(ceiling) = gates.max_res_conserv_rel {
        gates_passed &= rel_conserv <= ceiling;
    }
    if let Some(ceiling) = gates.max_res_energy_rel {
        gates_passed &= rel_energy <= ceiling;
    }

    Summary {
        exponent_n: n_exp,
        formulation: cfg.formulation,
        grid: GridSummary {
            n_points: cfg.n_points,
            r_max: cfg.r_max,
            h: cfg.r_max / (cfg.n_points - 1) as f64,
        },
        t_final: cfg.t_final,
        seed: cfg.seed,
        outcome,
        final_norms: FinalNorms {
            t: last.t,
            l2: last.lp(2.0).unwrap_or(f64::NAN),
            lnp2: last.lp(n_exp + 2.0).unwrap_or(f64::NAN),
            sup: last.sup_norm,
            h1: last.h1_norm,
            e0: last.energy_e0,
            support_inner: last.support_inner,
            support_outer: last.support_outer,
        },
        residuals: ResidualSummary {
            max_abs_conserv,
            max_abs_energy,
            rel_conserv,
            rel_energy,
        },
        decay,
        monotonicity: MonotonicityVerdicts {
            lnp2_monotone,
            energy_monotone,
        },
        gates_passed,
    }
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    f.write_all(contents.as_bytes())
        .map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })
}

/// Run one experiment and write `records.csv` and `summary.json` into the
/// configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let u0 = preset::build(grid, &cfg.preset)?;
    let solver_cfg = cfg.solver_config();
    let mut monitors = Monitors::default();
    for &p in &cfg.lp_exponents {
        if !monitors.lp_exponents.contains(&p) {
            monitors.lp_exponents.push(p);
        }
    }

    let out = evolve::run(&u0, &solver_cfg, &monitors)?;
    let summary = summarize(cfg, &out);

    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| CliError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;
    let csv_path = cfg.out_dir.join("records.csv");
    let summary_path = cfg.out_dir.join("summary.json");
    write_file(&csv_path, &format_csv(&out.records, cfg.exponent_n))?;
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_file(&summary_path, &json)?;

    Ok(ExperimentReport {
        records: out.records,
        summary,
        csv_path,
        summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PresetConfig;

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("outwave-test-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    fn small_cfg(tag: &str) -> ExperimentConfig {
        ExperimentConfig {
            n_points: 513,
            r_max: 8.0,
            t_final: 2.0,
            checkpoint_every: 16,
            out_dir: tmp_dir(tag),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn zero_amplitude_run_passes_gates_with_zero_records() {
        let mut cfg = small_cfg("zero");
        cfg.preset = PresetConfig {
            amplitude: 0.0,
            ..PresetConfig::default()
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.verdict(), RunVerdict::GatesPassed);
        for rec in &report.records {
            assert_eq!(rec.sup_norm, 0.0);
            assert_eq!(rec.res_conserv, 0.0);
        }
        let csv = std::fs::read_to_string(&report.csv_path).unwrap();
        assert!(csv.starts_with(CSV_HEADER));
    }

    #[test]
    fn default_style_run_reports_monotone_lnp2() {
        let cfg = small_cfg("default");
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.summary.outcome, "completed");
        assert!(report.summary.monotonicity.lnp2_monotone);
        assert_eq!(report.verdict(), RunVerdict::GatesPassed);
        let json = std::fs::read_to_string(&report.summary_path).unwrap();
        assert!(json.contains("\"lnp2_monotone\": true"));
    }

    #[test]
    fn csv_row_count_matches_checkpoint_contract() {
        let cfg = small_cfg("rows");
        let report = run_experiment(&cfg).unwrap();
        let h: f64 = 8.0 / 512.0;
        let steps = (2.0 / h).round() as usize;
        let expected = steps / cfg.checkpoint_every + 1;
        assert_eq!(report.records.len(), expected);
        let csv = std::fs::read_to_string(&report.csv_path).unwrap();
        assert_eq!(csv.lines().count(), expected + 1);
    }

    #[test]
    fn grid_too_small_for_t_final_is_rejected_before_stepping() {
        let mut cfg = small_cfg("reject");
        cfg.t_final = 7.0; // support [1,2] + 7 > 8 - margin
        assert!(matches!(run_experiment(&cfg), Err(CliError::Config(_))));
    }
}
