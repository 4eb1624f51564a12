//! Norms, energies, fluxes, balance-law residuals, support radius, and
//! decay-rate fits.
//!
//! Two space-time identities back the solver test suites. With outgoing data
//! and `P(t) = ∫|u|^{N+2} dx`, `F(t) = ∫ |u|^{N+2}/|x| dx`, and
//! `G(t) = (∫ |u|^N u/|x| dx)²`:
//!
//! ```text
//! P(T) − P(0) + N·∫₀ᵀF + (N+2)/(16π)·∫₀ᵀG = 0
//! E₀(T) − E₀(0) + 2N/(N+2)·∫₀ᵀF         = 0,   E₀ = ∫|∇u|² + v² dx
//! ```
//!
//! The discrete residuals of these identities measure scheme error; they are
//! computed here from checkpoint histories with trapezoid integration in
//! time. Checkpoints should be no further than `10·h` apart or the quoted
//! residual tolerances double.
//!
//! Flux integrands divide by `|x|`; at `r = 0` they are defined as `0` (they
//! are `O(r)` in the `r² dr` measure regardless, and outgoing supports never
//! touch the origin).

use thiserror::Error;

use crate::grid::{radial_measure_integral, trapz, RadialField};

/// Default threshold for support detection in records.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("history needs at least two records")]
    HistoryTooShort,
    #[error("history checkpoints are not uniformly spaced")]
    RaggedHistory,
    #[error("records carry no L^{p} norm")]
    MissingExponent { p: f64 },
    #[error("no usable samples in the fit window [{0}, {1}]")]
    EmptyWindow(f64, f64),
}

/// `‖u‖_{L^p} = (4π ∫ |u|^p r² dr)^{1/p}`.
pub fn lp_norm(u: &RadialField, p: f64) -> f64 {
    assert!(p >= 1.0, "exponent must be >= 1, got {p}");
    let powed: Vec<f64> = u.values().iter().map(|v| v.abs().powf(p)).collect();
    radial_measure_integral(u.grid(), &powed, |_| 1.0).powf(1.0 / p)
}

/// Line-measure norm `(∫₀^{r_max} |u|^p dr)^{1/p}` (no `r²` weight), the
/// quantity behind the rephrased dispersion bound
/// `‖u(t)‖ ≲ (R+t)^{-2/(N+2)} ‖u₀‖` for the `r^{2/(N+2)}`-weighted identity.
pub fn line_lp_norm(u: &RadialField, p: f64) -> f64 {
    assert!(p >= 1.0, "exponent must be >= 1, got {p}");
    let powed: Vec<f64> = u.values().iter().map(|v| v.abs().powf(p)).collect();
    trapz(u.grid().spacing(), &powed).powf(1.0 / p)
}

pub fn sup_norm(u: &RadialField) -> f64 {
    u.max_abs()
}

/// Discrete `‖u‖_{Ḣ¹} = (4π ∫ (∂_r u)² r² dr)^{1/2}`.
pub fn h1_norm(u: &RadialField) -> f64 {
    let du = u.deriv_r();
    let sq: Vec<f64> = du.values().iter().map(|v| v * v).collect();
    radial_measure_integral(u.grid(), &sq, |_| 1.0).sqrt()
}

/// `E₀ = ∫ |∇u|² + v² dx = 4π ∫ ((∂_r u)² + v²) r² dr`.
pub fn energy_e0(u: &RadialField, v: &RadialField) -> f64 {
    let du = u.deriv_r();
    let sq = du.zip_with(v, |a, b| a * a + b * b);
    radial_measure_integral(u.grid(), sq.values(), |_| 1.0)
}

/// `∫ |u|^{n+2}/|x| dx`.
pub fn flux_np2(u: &RadialField, n: f64) -> f64 {
    let powed: Vec<f64> = u.values().iter().map(|v| v.abs().powf(n + 2.0)).collect();
    radial_measure_integral(u.grid(), &powed, |r| if r > 0.0 { 1.0 / r } else { 0.0 })
}

/// `(∫ |u|^n u/|x| dx)²`.
pub fn flux_charge_sq(u: &RadialField, n: f64) -> f64 {
    let powed: Vec<f64> = u.values().iter().map(|v| v.abs().powf(n) * v).collect();
    let charge = radial_measure_integral(u.grid(), &powed, |r| if r > 0.0 { 1.0 / r } else { 0.0 });
    charge * charge
}

/// Inner and outer edges of the region where `|u| > tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRadius {
    /// Largest radius below which all samples are `≤ tol`.
    pub inner: f64,
    /// Smallest radius above which all samples are `≤ tol`.
    pub outer: f64,
}

/// Locate the support of `u` at threshold `tol`.
///
/// The zero field reports `inner = r_max`, `outer = 0` so that support
/// monotonicity statements stay vacuously true.
pub fn support_radius(u: &RadialField, tol: f64) -> SupportRadius {
    assert!(tol > 0.0, "tolerance must be positive");
    let grid = u.grid();
    let mut first = None;
    let mut last = None;
    for (j, v) in u.values().iter().enumerate() {
        if v.abs() > tol {
            if first.is_none() {
                first = Some(j);
            }
            last = Some(j);
        }
    }
    match (first, last) {
        (Some(f), Some(l)) => SupportRadius {
            inner: grid.node(f),
            outer: grid.node(l),
        },
        _ => SupportRadius {
            inner: grid.r_max(),
            outer: 0.0,
        },
    }
}

/// Scalar observables captured at one checkpoint of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `(p, ‖u‖_{L^p})` for each requested exponent.
    pub lp_norms: Vec<(f64, f64)>,
    /// `(p, line-measure L^p norm)` for each requested exponent.
    pub line_lp_norms: Vec<(f64, f64)>,
    pub sup_norm: f64,
    pub h1_norm: f64,
    pub energy_e0: f64,
    pub flux_np2: f64,
    pub flux_sq: f64,
    pub support_inner: f64,
    pub support_outer: f64,
    /// Running residual of the `L^{N+2}` balance up to this checkpoint.
    pub res_conserv: f64,
    /// Running residual of the energy balance up to this checkpoint.
    pub res_energy: f64,
    /// Running `∫₀ᵗ ‖u‖_∞² dt` (Strichartz-type monitor; recorded, not gated).
    pub sup_sq_integral: f64,
}

impl DiagnosticsRecord {
    /// A zeroed record at time `t`; useful for tests and synthetic histories.
    pub fn at_time(t: f64) -> Self {
        DiagnosticsRecord {
            t,
            lp_norms: Vec::new(),
            line_lp_norms: Vec::new(),
            sup_norm: 0.0,
            h1_norm: 0.0,
            energy_e0: 0.0,
            flux_np2: 0.0,
            flux_sq: 0.0,
            support_inner: 0.0,
            support_outer: 0.0,
            res_conserv: 0.0,
            res_energy: 0.0,
            sup_sq_integral: 0.0,
        }
    }

    /// Look up a recorded `L^p` norm.
    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp_norms
            .iter()
            .find(|(q, _)| (q - p).abs() <= 1e-12 * p.abs().max(1.0))
            .map(|&(_, v)| v)
    }

    /// Look up a recorded line-measure `L^p` norm.
    pub fn line_lp(&self, p: f64) -> Option<f64> {
        self.line_lp_norms
            .iter()
            .find(|(q, _)| (q - p).abs() <= 1e-12 * p.abs().max(1.0))
            .map(|&(_, v)| v)
    }
}

fn checkpoint_spacing(history: &[DiagnosticsRecord]) -> Result<f64, DiagnosticsError> {
    if history.len() < 2 {
        return Err(DiagnosticsError::HistoryTooShort);
    }
    let dt = history[1].t - history[0].t;
    for w in history.windows(2) {
        let step = w[1].t - w[0].t;
        if (step - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(DiagnosticsError::RaggedHistory);
        }
    }
    Ok(dt)
}

/// Residual of the `L^{N+2}` balance over a checkpoint history:
/// `[P(T) − P(0)] + N·∫F + (N+2)/(16π)·∫G`, trapezoid in time.
///
/// Zero for the exact solution with outgoing data; decreases under joint
/// refinement for a convergent scheme.
pub fn balance_residual_np2(
    history: &[DiagnosticsRecord],
    n: f64,
) -> Result<f64, DiagnosticsError> {
    let dt = checkpoint_spacing(history)?;
    let p = n + 2.0;
    let mass = |rec: &DiagnosticsRecord| -> Result<f64, DiagnosticsError> {
        rec.lp(p)
            .map(|v| v.powf(p))
            .ok_or(DiagnosticsError::MissingExponent { p })
    };
    let first = mass(&history[0])?;
    let last = mass(history.last().unwrap())?;
    let flux: Vec<f64> = history.iter().map(|r| r.flux_np2).collect();
    let flux_sq: Vec<f64> = history.iter().map(|r| r.flux_sq).collect();
    let i1 = trapz(dt, &flux);
    let i2 = trapz(dt, &flux_sq);
    Ok((last - first) + n * i1 + (n + 2.0) / (16.0 * std::f64::consts::PI) * i2)
}

/// Residual of the energy balance:
/// `E₀(T) − E₀(0) + 2N/(N+2)·∫F`, trapezoid in time.
pub fn balance_residual_energy(
    history: &[DiagnosticsRecord],
    n: f64,
) -> Result<f64, DiagnosticsError> {
    let dt = checkpoint_spacing(history)?;
    let first = history[0].energy_e0;
    let last = history.last().unwrap().energy_e0;
    let flux: Vec<f64> = history.iter().map(|r| r.flux_np2).collect();
    let i1 = trapz(dt, &flux);
    Ok((last - first) + 2.0 * n / (n + 2.0) * i1)
}

/// Which recorded norm a decay fit runs over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSelector {
    Sup,
    H1,
    Lp(f64),
    LineLp(f64),
}

/// Result of a log-log decay fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySlope {
    pub slope: f64,
    /// Set when the window spans less than one decade in `t`.
    pub low_confidence: bool,
}

/// Least-squares slope of `log(norm)` against `log(t)` over `t ∈ window`.
/// The window must start at `t ≥ 1` (early transients are not power laws).
pub fn decay_slope(
    history: &[DiagnosticsRecord],
    selector: NormSelector,
    window: (f64, f64),
) -> Result<DecaySlope, DiagnosticsError> {
    let (lo, hi) = window;
    assert!(lo >= 1.0, "fit window must start at t >= 1, got {lo}");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in history {
        if rec.t < lo || rec.t > hi || rec.t <= 0.0 {
            continue;
        }
        let value = match selector {
            NormSelector::Sup => Some(rec.sup_norm),
            NormSelector::H1 => Some(rec.h1_norm),
            NormSelector::Lp(p) => rec.lp(p),
            NormSelector::LineLp(p) => rec.line_lp(p),
        };
        match value {
            Some(v) if v > 0.0 => {
                xs.push(rec.t.ln());
                ys.push(v.ln());
            }
            _ => {}
        }
    }
    if xs.len() < 2 {
        return Err(DiagnosticsError::EmptyWindow(lo, hi));
    }
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    Ok(DecaySlope {
        slope: num / den,
        low_confidence: hi / lo < 10.0 - 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use proptest::prelude::*;

    fn grid(n: usize, r_max: f64) -> RadialGrid {
        RadialGrid::new(n, r_max).unwrap()
    }

    #[test]
    fn lp_norm_zero_field() {
        let g = grid(64, 4.0);
        assert_eq!(lp_norm(&RadialField::zeros(g), 2.0), 0.0);
    }

    #[test]
    fn l2_of_gaussian_matches_analytic() {
        // ‖e^{-r²}‖_{L²}² = 4π ∫ e^{-2r²} r² dr = π^{3/2}/(2√2)
        let g = grid(1001, 10.0);
        let f = RadialField::from_fn(g, |r| (-r * r).exp()).unwrap();
        let want = (std::f64::consts::PI.powf(1.5) / (2.0 * 2.0f64.sqrt())).sqrt();
        assert!((lp_norm(&f, 2.0) - want).abs() < 1e-6);
    }

    #[test]
    fn h1_norm_is_scale_invariant_at_critical_exponent_four() {
        // For N = 4 the critical exponent is s_c = 1, so the λ^{2/N} = λ^{1/2}
        // rescaling leaves the Ḣ¹ norm unchanged.
        let g = grid(2049, 8.0);
        let f = RadialField::from_fn(g, |r| {
            let s = r - 2.0;
            (-2.0 * s * s).exp() * r
        })
        .unwrap();
        let g2 = grid(2049, 4.0);
        let f2 = RadialField::from_fn(g2, |r| {
            let rr = 2.0 * r;
            let s = rr - 2.0;
            2.0f64.sqrt() * (-2.0 * s * s).exp() * rr
        })
        .unwrap();
        let a = h1_norm(&f);
        let b = h1_norm(&f2);
        assert!((a - b).abs() / a < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn energy_splits_additively() {
        let g = grid(257, 6.0);
        let u = RadialField::from_fn(g, |r| (-(r - 2.0) * (r - 2.0) * 3.0).exp()).unwrap();
        let v = RadialField::from_fn(g, |r| r * (-(r - 3.0) * (r - 3.0)).exp()).unwrap();
        let z = RadialField::zeros(g);
        let whole = energy_e0(&u, &v);
        let parts = energy_e0(&u, &z) + energy_e0(&z, &v);
        assert!((whole - parts).abs() <= 1e-12 * whole.abs());
        assert_eq!(energy_e0(&z, &z), 0.0);
    }

    #[test]
    fn support_radius_conventions() {
        let g = grid(257, 4.0);
        let s = support_radius(&RadialField::zeros(g), 1e-12);
        assert_eq!(s.inner, g.r_max());
        assert_eq!(s.outer, 0.0);

        let bump = RadialField::from_fn(g, |r| {
            let s = 2.0 * r - 3.0;
            if s.abs() >= 1.0 {
                0.0
            } else {
                (1.0 - s * s).powi(4)
            }
        })
        .unwrap();
        let s = support_radius(&bump, 1e-12);
        assert!((s.inner - 1.0).abs() <= g.spacing() + 1e-12);
        assert!((s.outer - 2.0).abs() <= g.spacing() + 1e-12);
    }

    #[test]
    fn synthetic_half_power_decay_fits_exactly() {
        let history: Vec<DiagnosticsRecord> = (1..=100)
            .map(|i| {
                let t = i as f64 * 0.5;
                let mut rec = DiagnosticsRecord::at_time(t);
                rec.sup_norm = 3.0 * t.powf(-0.5);
                rec
            })
            .collect();
        let fit = decay_slope(&history, NormSelector::Sup, (1.0, 50.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(!fit.low_confidence);
    }

    #[test]
    fn short_window_is_flagged() {
        let history: Vec<DiagnosticsRecord> = (1..=40)
            .map(|i| {
                let t = i as f64 * 0.1;
                let mut rec = DiagnosticsRecord::at_time(t);
                rec.sup_norm = t.powf(-1.0);
                rec
            })
            .collect();
        let fit = decay_slope(&history, NormSelector::Sup, (1.0, 4.0)).unwrap();
        assert!(fit.low_confidence);
    }

    #[test]
    fn balance_residual_zero_history() {
        let mut history = Vec::new();
        for i in 0..5 {
            let mut rec = DiagnosticsRecord::at_time(i as f64);
            rec.lp_norms.push((8.0, 0.0));
            history.push(rec);
        }
        assert_eq!(balance_residual_np2(&history, 6.0).unwrap(), 0.0);
        assert_eq!(balance_residual_energy(&history, 6.0).unwrap(), 0.0);
    }

    #[test]
    fn balance_residual_rejects_ragged_history() {
        let mut history: Vec<DiagnosticsRecord> = [0.0, 1.0, 2.5]
            .iter()
            .map(|&t| DiagnosticsRecord::at_time(t))
            .collect();
        for rec in &mut history {
            rec.lp_norms.push((8.0, 0.0));
        }
        assert!(matches!(
            balance_residual_np2(&history, 6.0),
            Err(DiagnosticsError::RaggedHistory)
        ));
    }

    proptest! {
        #[test]
        fn lp_norm_is_absolutely_homogeneous(c in -4.0f64..4.0, p in 1.0f64..8.0) {
            let g = grid(128, 6.0);
            let f = RadialField::from_fn(g, |r| (-(r - 2.0) * (r - 2.0) * 2.0).exp()).unwrap();
            let lhs = lp_norm(&f.scaled(c), p);
            let rhs = c.abs() * lp_norm(&f, p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-30));
        }
    }
}
