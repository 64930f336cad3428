//! Fixtures shared by the benches.

use std::sync::Arc;

use varreg::field::{trace_boundary, BoundaryValues};
use varreg::{minimize, parse, Grid, Lagrangian, Mask, ScalarField, SolveOptions};

/// Grid and traced Dirichlet data for a 2D solve.
pub fn problem(res: usize, mask: Mask, bc: &str) -> (Arc<Grid>, BoundaryValues) {
    let grid = Arc::new(Grid::new(2, res, mask).expect("grid"));
    let b = trace_boundary(&grid, &parse(bc).expect("bc")).expect("trace");
    (grid, b)
}

pub fn solved(f: &Lagrangian, res: usize, bc: &str) -> ScalarField {
    let (grid, b) = problem(res, Mask::Square, bc);
    minimize(f, &grid, &b, &SolveOptions::default()).expect("solve").0
}
