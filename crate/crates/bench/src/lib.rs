//! Fixtures shared by the benchmarks.

use transfer_core::{
    assemble_operator, auto_resolution, solve_rotation, DiscretizedOperator, Potential, Result, TransferKernel, C64,
};

/// Rotated-log operator `V(x) = a·log(1 + b x²)` at coupling `w`, on the
/// automatically chosen grid.
pub fn rotated_log_operator(w: f64, a: f64, b: C64, tol: f64) -> Result<DiscretizedOperator> {
    let zeta = solve_rotation(2.0 * a * b)?;
    let potential = Potential::rotated_log(a, b, zeta)?;
    let grid = auto_resolution(w, zeta, &potential, tol)?.grid()?;
    assemble_operator(&TransferKernel::new(w, zeta, potential)?, &grid)
}
