//! Initial-data presets: compactly supported radial profiles away from the
//! origin.

use outwave_core::grid::{RadialField, RadialGrid};

use crate::config::{ConfigError, PresetConfig, PresetShape};

/// Sample the configured preset on `grid`.
///
/// * `poly-bump`: `A·(1−s²)⁴` with `s = (2r − R − R₂)/(R₂ − R)`, zero outside
///   `[R, R₂]`; vanishes with three continuous derivatives at both edges.
/// * `truncated-gaussian`: `A·e^{−κ(r−c)²}` centered at `c = (R+R₂)/2` with
///   `κ` chosen so the profile reaches `1e-14` at the interval edges, then
///   hard-truncated below `1e-14`.
pub fn build(grid: RadialGrid, preset: &PresetConfig) -> Result<RadialField, ConfigError> {
    let [r_lo, r_hi] = preset.support;
    let amp = preset.amplitude;
    let field = match preset.shape {
        PresetShape::PolyBump => RadialField::from_fn(grid, |r| {
            let s = (2.0 * r - r_lo - r_hi) / (r_hi - r_lo);
            if s.abs() >= 1.0 {
                0.0
            } else {
                amp * (1.0 - s * s).powi(4)
            }
        }),
        PresetShape::TruncatedGaussian => {
            let center = 0.5 * (r_lo + r_hi);
            let half_width = 0.5 * (r_hi - r_lo);
            let kappa = (1e14f64).ln() / (half_width * half_width);
            RadialField::from_fn(grid, |r| {
                let v = amp * (-kappa * (r - center) * (r - center)).exp();
                if v.abs() < 1e-14 {
                    0.0
                } else {
                    v
                }
            })
        }
    };
    field.map_err(|e| ConfigError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PresetConfig;

    fn grid() -> RadialGrid {
        RadialGrid::new(1025, 8.0).unwrap()
    }

    #[test]
    fn poly_bump_peaks_at_the_center() {
        let preset = PresetConfig {
            shape: PresetShape::PolyBump,
            support: [1.0, 2.0],
            amplitude: 2.5,
        };
        let f = build(grid(), &preset).unwrap();
        let g = grid();
        let center = (1.5 / g.spacing()).round() as usize;
        assert!((f.values()[center] - 2.5).abs() < 1e-12);
        assert_eq!(f.max_abs(), f.values()[center]);
    }

    #[test]
    fn poly_bump_vanishes_smoothly_at_the_edges() {
        // C³ contact: the first three one-sided differences shrink like
        // h, h², h³ against the bump scale.
        let g = RadialGrid::new(4097, 8.0).unwrap();
        let preset = PresetConfig {
            shape: PresetShape::PolyBump,
            support: [1.0, 2.0],
            amplitude: 1.0,
        };
        let f = build(g, &preset).unwrap();
        let h = g.spacing();
        let j_edge = (1.0 / h).round() as usize;
        let d1 = (f.values()[j_edge + 1] - f.values()[j_edge]) / h;
        let d2 =
            (f.values()[j_edge + 2] - 2.0 * f.values()[j_edge + 1] + f.values()[j_edge]) / (h * h);
        let d3 = (f.values()[j_edge + 3] - 3.0 * f.values()[j_edge + 2]
            + 3.0 * f.values()[j_edge + 1]
            - f.values()[j_edge])
            / (h * h * h);
        assert_eq!(f.values()[j_edge], 0.0);
        assert!(d1.abs() < 1e-2, "first derivative {d1:e}");
        assert!(d2.abs() < 1.0, "second derivative {d2:e}");
        assert!(d3.abs() < 600.0, "third derivative {d3:e}");
    }

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let preset = PresetConfig {
            amplitude: 0.0,
            ..PresetConfig::default()
        };
        assert_eq!(build(grid(), &preset).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn truncated_gaussian_is_compactly_supported() {
        let preset = PresetConfig {
            shape: PresetShape::TruncatedGaussian,
            support: [2.0, 4.0],
            amplitude: 1.0,
        };
        let g = grid();
        let f = build(g, &preset).unwrap();
        for j in 0..g.n_points() {
            let r = g.node(j);
            if !(1.9..=4.1).contains(&r) {
                assert_eq!(f.values()[j], 0.0, "r = {r}");
            }
        }
        assert!(f.max_abs() > 0.99);
    }
}
