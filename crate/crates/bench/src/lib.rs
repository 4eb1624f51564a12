//! Shared fixtures for the solver benchmarks.

use outwave_core::evolve::{Formulation, SolverConfig, State};
use outwave_core::grid::{RadialField, RadialGrid};
use outwave_core::{evolve, projection};

pub fn bench_grid(n: usize) -> RadialGrid {
    RadialGrid::new(n, 16.0).expect("benchmark grid")
}

pub fn bench_bump(grid: RadialGrid) -> RadialField {
    RadialField::from_fn(grid, |r| {
        let s = 2.0 * r - 3.0;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - s * s).powi(4)
        }
    })
    .expect("benchmark field")
}

pub fn char_state(n: usize) -> State {
    let grid = bench_grid(n);
    let cfg = SolverConfig::new(6.0, 1.0);
    evolve::init_outgoing(&bench_bump(grid), &cfg).expect("state")
}

pub fn system_state(n: usize) -> State {
    let grid = bench_grid(n);
    let cfg = SolverConfig {
        formulation: Formulation::System,
        ..SolverConfig::new(6.0, 1.0)
    };
    evolve::init_outgoing(&bench_bump(grid), &cfg).expect("state")
}

pub fn outgoing_data(n: usize) -> outwave_core::grid::DataPair {
    projection::make_outgoing(&bench_bump(bench_grid(n))).expect("outgoing data")
}
