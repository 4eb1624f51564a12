//! Incoming/outgoing decomposition of radial Cauchy data.
//!
//! The projections are
//!
//! ```text
//! P₊(u₀, u₁) = ( ½(u₀ − K[u₁]),  ½(−∂_r u₀ − u₀/r + u₁) )
//! P₋(u₀, u₁) = ( ½(u₀ + K[u₁]),  ½( ∂_r u₀ + u₀/r + u₁) )
//! ```
//!
//! with `K` the operator from [`crate::nonlocal`]. They satisfy `P₊ + P₋ = I`
//! nodewise to machine precision (both share one `K[u₁]` and one `∂_r u₀`,
//! so the sum cancels exactly up to rounding) and are idempotent up to the
//! `O(h²)` of the discrete stencils.
//!
//! `u₀/r` at the origin is evaluated by the limit `∂_r u₀(0)` when
//! `u₀(0) = 0`; otherwise the quotient is unbounded there, the result is
//! flagged, and its origin node carries the same stencil value as a
//! placeholder (meaningful on `r > 0` only).

use thiserror::Error;

use crate::grid::{deriv_at_origin, DataPair, RadialField};
use crate::nonlocal;

/// How close `u₀(0)` must be to zero for `u₀/r` to have a trusted limit.
pub const ORIGIN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("u0(0) = {0:e}; u0/r is unbounded at the origin")]
    OriginSingularity(f64),
}

/// Result of splitting data into outgoing and incoming parts.
///
/// `outgoing + incoming` reproduces the input nodewise to machine precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub outgoing: DataPair,
    pub incoming: DataPair,
    /// Set when `|u₀(0)| > ORIGIN_TOL`: the velocity components are only
    /// meaningful on `r > 0`.
    pub origin_flagged: bool,
}

/// `u₀/r` with the origin value taken as the limit `∂_r u₀(0)`.
///
/// The quotient is formed against the origin sample, `(u₀(r) − u₀(0))/r`.
/// For admissible data (`u₀(0) = 0`) this is the plain quotient; for flagged
/// data it keeps the regular part and drops the `u₀(0)/r` singular tail that
/// the continuum operator would send to infinity, so composed residuals stay
/// `O(h²)` instead of `O(h²)/h` next to the origin.
fn over_r(f: &RadialField) -> (RadialField, bool) {
    let grid = f.grid();
    let origin = f.values()[0];
    let flagged = origin.abs() > ORIGIN_TOL;
    let mut out = f.values().to_vec();
    out[0] = deriv_at_origin(grid.spacing(), f.values());
    for (j, v) in out.iter_mut().enumerate().skip(1) {
        *v = (*v - origin) / grid.node(j);
    }
    (
        RadialField::new(grid, out).expect("quotient stays finite"),
        flagged,
    )
}

/// Split `data` into its outgoing (`P₊`) and incoming (`P₋`) parts.
pub fn decompose(data: &DataPair) -> Decomposition {
    let u0 = &data.position;
    let u1 = &data.velocity;
    let k = nonlocal::apply(u1);
    let du0 = u0.deriv_r();
    let (q, origin_flagged) = over_r(u0);

    let out_pos = u0.zip_with(&k, |a, b| 0.5 * (a - b));
    let in_pos = u0.zip_with(&k, |a, b| 0.5 * (a + b));
    let drift = du0.plus(&q); // ∂_r u₀ + u₀/r
    let out_vel = drift.zip_with(u1, |d, v| 0.5 * (v - d));
    let in_vel = drift.zip_with(u1, |d, v| 0.5 * (v + d));

    Decomposition {
        outgoing: DataPair {
            position: out_pos,
            velocity: out_vel,
        },
        incoming: DataPair {
            position: in_pos,
            velocity: in_vel,
        },
        origin_flagged,
    }
}

/// A projected pair together with the origin flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub pair: DataPair,
    pub origin_flagged: bool,
}

/// `P₊ data`.
pub fn project_outgoing(data: &DataPair) -> Projected {
    let d = decompose(data);
    Projected {
        pair: d.outgoing,
        origin_flagged: d.origin_flagged,
    }
}

/// `P₋ data`.
pub fn project_incoming(data: &DataPair) -> Projected {
    let d = decompose(data);
    Projected {
        pair: d.incoming,
        origin_flagged: d.origin_flagged,
    }
}

/// Build exactly-outgoing data from a position profile:
/// `u₁ = −∂_r u₀ − u₀/r`, so that `P₋(u₀, u₁) = O(h²)`.
///
/// Requires `u₀(0) = 0` (within [`ORIGIN_TOL`]) or support away from the
/// origin; otherwise the quotient has no limit and this errors.
pub fn make_outgoing(u0: &RadialField) -> Result<DataPair, ProjectionError> {
    if u0.values()[0].abs() > ORIGIN_TOL {
        return Err(ProjectionError::OriginSingularity(u0.values()[0]));
    }
    let (q, _) = over_r(u0);
    let u1 = u0.deriv_r().zip_with(&q, |d, qq| -d - qq);
    Ok(DataPair {
        position: u0.clone(),
        velocity: u1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::nonlocal::trial_field;

    fn grid(n: usize, r_max: f64) -> RadialGrid {
        RadialGrid::new(n, r_max).unwrap()
    }

    fn bump(grid: RadialGrid, lo: f64, hi: f64, amp: f64) -> RadialField {
        RadialField::from_fn(grid, |r| {
            let s = (2.0 * r - lo - hi) / (hi - lo);
            if s.abs() >= 1.0 {
                0.0
            } else {
                amp * (1.0 - s * s).powi(4)
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_data_projects_to_zero() {
        let g = grid(64, 4.0);
        let d = decompose(&DataPair::zeros(g));
        assert_eq!(d.outgoing.position.max_abs(), 0.0);
        assert_eq!(d.outgoing.velocity.max_abs(), 0.0);
        assert_eq!(d.incoming.position.max_abs(), 0.0);
        assert_eq!(d.incoming.velocity.max_abs(), 0.0);
        assert!(!d.origin_flagged);
    }

    #[test]
    fn zero_velocity_matches_formula() {
        let g = grid(257, 6.0);
        let u0 = bump(g, 1.0, 2.0, 1.3);
        let data = DataPair::new(u0.clone(), RadialField::zeros(g)).unwrap();
        let p = project_outgoing(&data);
        assert!(!p.origin_flagged);
        // first component: u₀/2 exactly (K[0] = 0)
        assert_eq!(p.pair.position.minus(&u0.scaled(0.5)).max_abs(), 0.0);
        // second component: ½(−∂_r u₀ − u₀/r)
        let du = u0.deriv_r();
        for j in 1..g.n_points() {
            let want = 0.5 * (-du.values()[j] - u0.values()[j] / g.node(j));
            assert!((p.pair.velocity.values()[j] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn partition_of_identity_is_machine_exact() {
        let g = grid(513, 10.0);
        for trial in 0..20 {
            let data = DataPair::new(
                trial_field(g, 11, 2 * trial),
                trial_field(g, 11, 2 * trial + 1),
            )
            .unwrap();
            let d = decompose(&data);
            let sum_pos = d.outgoing.position.plus(&d.incoming.position);
            let sum_vel = d.outgoing.velocity.plus(&d.incoming.velocity);
            assert!(sum_pos.minus(&data.position).max_abs() <= 1e-13);
            assert!(sum_vel.minus(&data.velocity).max_abs() <= 1e-13);
        }
    }

    fn idempotence_residual(n: usize) -> f64 {
        let g = grid(n, 4.0);
        let data = DataPair::new(bump(g, 1.0, 3.0, 1.0), bump(g, 1.5, 2.5, -0.8)).unwrap();
        let p1 = project_outgoing(&data).pair;
        let p2 = project_outgoing(&p1).pair;
        p2.max_distance(&p1)
    }

    #[test]
    fn outgoing_projection_is_idempotent_to_second_order() {
        let e1 = idempotence_residual(513);
        let e2 = idempotence_residual(1025);
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "measured order {order} ({e1:e} -> {e2:e})");
    }

    fn annihilation_residual(n: usize) -> f64 {
        let g = grid(n, 4.0);
        let out = make_outgoing(&bump(g, 1.0, 2.0, 1.0)).unwrap();
        let p = project_incoming(&out).pair;
        p.position.max_abs().max(p.velocity.max_abs())
    }

    #[test]
    fn incoming_part_of_outgoing_data_vanishes_to_second_order() {
        let e1 = annihilation_residual(513);
        let e2 = annihilation_residual(1025);
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "measured order {order} ({e1:e} -> {e2:e})");
    }

    #[test]
    fn make_outgoing_zero_is_zero() {
        let g = grid(64, 4.0);
        let d = make_outgoing(&RadialField::zeros(g)).unwrap();
        assert_eq!(d.position.max_abs(), 0.0);
        assert_eq!(d.velocity.max_abs(), 0.0);
    }

    #[test]
    fn make_outgoing_satisfies_k_identity() {
        // ∫₀ʳ ρ u₁ = −(ρ u₀)' integrated, so K[u₁] = −u₀ up to O(h²).
        let residual = |n: usize| {
            let g = grid(n, 4.0);
            let d = make_outgoing(&bump(g, 1.0, 2.0, 1.0)).unwrap();
            nonlocal::apply(&d.velocity).plus(&d.position).max_abs()
        };
        let e1 = residual(513);
        let e2 = residual(1025);
        assert!(e1 / e2 >= 3.7, "ratio {}", e1 / e2);
    }

    #[test]
    fn make_outgoing_handles_data_reaching_origin_limit() {
        // u₀ = r·e^{−r²} has u₀(0) = 0 but support touching the origin.
        let residual = |n: usize| {
            let g = grid(n, 8.0);
            let u0 = RadialField::from_fn(g, |r| r * (-r * r).exp()).unwrap();
            let d = make_outgoing(&u0).unwrap();
            let p = project_incoming(&d).pair;
            p.position.max_abs().max(p.velocity.max_abs())
        };
        let e1 = residual(1025);
        let e2 = residual(2049);
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "measured order {order}");
    }

    #[test]
    fn make_outgoing_rejects_nonzero_origin() {
        let g = grid(64, 4.0);
        let u0 = RadialField::from_fn(g, |r| (-r).exp()).unwrap();
        assert!(matches!(
            make_outgoing(&u0),
            Err(ProjectionError::OriginSingularity(_))
        ));
    }

    #[test]
    fn origin_flag_raised_for_singular_position() {
        let g = grid(64, 4.0);
        let u0 = RadialField::from_fn(g, |r| 1.0 - r / 8.0).unwrap();
        let data = DataPair::new(u0, RadialField::zeros(g)).unwrap();
        assert!(project_outgoing(&data).origin_flagged);
    }

    #[test]
    fn projections_preserve_left_support() {
        let g = grid(513, 8.0);
        let h = g.spacing();
        let lo = 2.0;
        let data = DataPair::new(bump(g, lo, 4.0, 1.0), bump(g, lo, 5.0, -0.5)).unwrap();
        let d = decompose(&data);
        for pair in [&d.outgoing, &d.incoming] {
            for field in [&pair.position, &pair.velocity] {
                for j in 0..g.n_points() {
                    // one stencil width of slack for the derivative
                    if g.node(j) <= lo - 2.0 * h {
                        assert_eq!(field.values()[j], 0.0, "node {j}");
                    }
                }
            }
        }
    }
}
