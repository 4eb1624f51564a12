//! Experiment configuration: a JSON document plus flag overrides, validated
//! before anything runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use outwave_core::evolve::{Formulation, SolverConfig};
use outwave_core::grid::RadialGrid;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Unparsable {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid value for --{flag}: {value}")]
    BadFlag { flag: &'static str, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetShape {
    /// `A·(1−s²)⁴` on the support interval: compactly supported, C³.
    PolyBump,
    /// `A·e^{−κ(r−c)²}` hard-truncated below `1e-14`.
    TruncatedGaussian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetConfig {
    pub shape: PresetShape,
    /// Support interval `[R, R₂]`.
    pub support: [f64; 2],
    pub amplitude: f64,
}

impl Default for PresetConfig {
    fn default() -> Self {
        PresetConfig {
            shape: PresetShape::PolyBump,
            support: [1.0, 2.0],
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    /// Require `‖u(t)‖_{L^{N+2}}` nonincreasing (1e-6 relative slack).
    pub lnp2_monotone: bool,
    /// Require `E₀` nonincreasing (1e-6 relative slack).
    pub energy_monotone: bool,
    /// Optional ceiling on `|res_conserv| / ‖u₀‖^{N+2}`.
    pub max_res_conserv_rel: Option<f64>,
    /// Optional ceiling on `|res_energy| / E₀(0)`.
    pub max_res_energy_rel: Option<f64>,
}

impl Default for Gates {
    fn default() -> Self {
        Gates {
            lnp2_monotone: true,
            energy_monotone: true,
            max_res_conserv_rel: None,
            max_res_energy_rel: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationConfig {
    Characteristics,
    System,
}

impl From<FormulationConfig> for Formulation {
    fn from(f: FormulationConfig) -> Formulation {
        match f {
            FormulationConfig::Characteristics => Formulation::Characteristics,
            FormulationConfig::System => Formulation::System,
        }
    }
}

/// Everything one experiment needs; serializable so identical configs produce
/// byte-identical outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub exponent_n: f64,
    pub t_final: f64,
    pub cfl: f64,
    pub formulation: FormulationConfig,
    pub checkpoint_every: usize,
    pub origin_guard: Option<f64>,
    pub nonlinear_coupling: f64,
    pub n_points: usize,
    pub r_max: f64,
    pub preset: PresetConfig,
    /// Extra `L^p` exponents to record (2 and N+2 are always included).
    pub lp_exponents: Vec<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub gates: Gates,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            exponent_n: 6.0,
            t_final: 10.0,
            cfl: 0.5,
            formulation: FormulationConfig::Characteristics,
            checkpoint_every: 8,
            origin_guard: None,
            nonlinear_coupling: 1.0,
            n_points: 4097,
            r_max: 16.0,
            preset: PresetConfig::default(),
            lp_exponents: vec![2.0],
            seed: 0,
            out_dir: PathBuf::from("out"),
            gates: Gates::default(),
        }
    }
}

/// Flag-level overrides; every field wins over the config file when set.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub exponent: Option<f64>,
    pub grid_points: Option<usize>,
    pub r_max: Option<f64>,
    pub t_final: Option<f64>,
    pub cfl: Option<f64>,
    pub preset: Option<String>,
    pub amplitude: Option<f64>,
    pub support: Option<String>,
    pub formulation: Option<String>,
    pub checkpoint_every: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Load from an optional JSON file, then apply flag overrides, then
    /// validate.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|source| ConfigError::Unreadable {
                        path: p.to_path_buf(),
                        source,
                    })?;
                serde_json::from_str(&text).map_err(|source| ConfigError::Unparsable {
                    path: p.to_path_buf(),
                    source,
                })?
            }
        };
        cfg.apply(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(v) = o.exponent {
            self.exponent_n = v;
        }
        if let Some(v) = o.grid_points {
            self.n_points = v;
        }
        if let Some(v) = o.r_max {
            self.r_max = v;
        }
        if let Some(v) = o.t_final {
            self.t_final = v;
        }
        if let Some(v) = o.cfl {
            self.cfl = v;
        }
        if let Some(v) = &o.preset {
            self.preset.shape = match v.as_str() {
                "poly-bump" => PresetShape::PolyBump,
                "truncated-gaussian" => PresetShape::TruncatedGaussian,
                other => {
                    return Err(ConfigError::BadFlag {
                        flag: "preset",
                        value: other.to_string(),
                    })
                }
            };
        }
        if let Some(v) = o.amplitude {
            self.preset.amplitude = v;
        }
        if let Some(v) = &o.support {
            let parts: Vec<&str> = v.split(',').collect();
            let parsed: Option<[f64; 2]> = match parts.as_slice() {
                [a, b] => match (a.trim().parse(), b.trim().parse()) {
                    (Ok(x), Ok(y)) => Some([x, y]),
                    _ => None,
                },
                _ => None,
            };
            self.preset.support = parsed.ok_or(ConfigError::BadFlag {
                flag: "support",
                value: v.clone(),
            })?;
        }
        if let Some(v) = &o.formulation {
            self.formulation = match v.as_str() {
                "characteristics" => FormulationConfig::Characteristics,
                "system" => FormulationConfig::System,
                other => {
                    return Err(ConfigError::BadFlag {
                        flag: "formulation",
                        value: other.to_string(),
                    })
                }
            };
        }
        if let Some(v) = o.checkpoint_every {
            self.checkpoint_every = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<RadialGrid, ConfigError> {
        RadialGrid::new(self.n_points, self.r_max).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        let grid = self.grid()?;
        let h = grid.spacing();
        let [r_lo, r_hi] = self.preset.support;
        if !r_lo.is_finite() || !r_hi.is_finite() || r_hi <= r_lo {
            return fail(format!("support interval [{r_lo}, {r_hi}] is empty"));
        }
        if r_lo < 4.0 * h {
            return fail(format!(
                "support must start at R >= 4h = {} (got R = {r_lo})",
                4.0 * h
            ));
        }
        if r_hi > self.r_max - self.t_final - 4.0 * h {
            return fail(format!(
                "support ends at {r_hi}; it must stay below r_max - t_final - 4h = {} \
                 so the bulk never exits the grid",
                self.r_max - self.t_final - 4.0 * h
            ));
        }
        if !self.preset.amplitude.is_finite() || self.preset.amplitude < 0.0 {
            return fail(format!("amplitude {} is invalid", self.preset.amplitude));
        }
        if !self.exponent_n.is_finite() || self.exponent_n < 2.0 {
            return fail(format!("exponent N = {} must be >= 2", self.exponent_n));
        }
        if !self.t_final.is_finite() || self.t_final < 0.0 {
            return fail(format!("t_final = {} is invalid", self.t_final));
        }
        if !self.cfl.is_finite() || self.cfl <= 0.0 || self.cfl > 1.0 {
            return fail(format!("cfl = {} must lie in (0, 1]", self.cfl));
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint_every must be positive".into());
        }
        if self.formulation == FormulationConfig::Characteristics {
            let ratio = self.t_final / h;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return fail(format!(
                    "t_final = {} is not a multiple of h = {h} (characteristics runs \
                     step at Δt = h)",
                    self.t_final
                ));
            }
        }
        for &p in &self.lp_exponents {
            if !p.is_finite() || p < 1.0 {
                return fail(format!("L^p exponent {p} must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            exponent_n: self.exponent_n,
            t_final: self.t_final,
            cfl: self.cfl,
            formulation: self.formulation.into(),
            checkpoint_every: self.checkpoint_every,
            origin_guard: self.origin_guard,
            nonlinear_coupling: self.nonlinear_coupling,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_support_that_would_exit_the_grid() {
        let cfg = ExperimentConfig {
            t_final: 15.0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_support_too_close_to_origin() {
        let cfg = ExperimentConfig {
            preset: PresetConfig {
                support: [0.005, 1.0],
                ..PresetConfig::default()
            },
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_win_over_defaults() {
        let o = Overrides {
            exponent: Some(4.0),
            support: Some("2,3".into()),
            t_final: Some(8.0),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::load(None, &o).unwrap();
        assert_eq!(cfg.exponent_n, 4.0);
        assert_eq!(cfg.preset.support, [2.0, 3.0]);
    }

    #[test]
    fn bad_flag_values_are_rejected() {
        let o = Overrides {
            support: Some("nonsense".into()),
            ..Overrides::default()
        };
        assert!(matches!(
            ExperimentConfig::load(None, &o),
            Err(ConfigError::BadFlag {
                flag: "support",
                ..
            })
        ));
        let o = Overrides {
            formulation: Some("implicit".into()),
            ..Overrides::default()
        };
        assert!(ExperimentConfig::load(None, &o).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n_points, cfg.n_points);
        assert_eq!(back.preset.support, cfg.preset.support);
    }
}
