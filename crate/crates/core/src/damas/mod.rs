//! DAMAS: the propagator `A` linking true source powers `X` to the beamform
//! map `Y`, and the non-negative Gauss-Seidel solver for `A X = Y`.

mod nnls;
mod propagator;
mod solver;

pub use nnls::{nnls_oracle, NNLS_MAX_UNKNOWNS, NNLS_TOLERANCE};
pub use propagator::{
    build_propagator, EntryKernel, MatrixFreePropagator, Propagator, PropagatorFlags,
    PropagatorMatrix,
};
pub use solver::{
    damas_solve, damas_solve_checkpoints, relative_residual, GaussSeidel, HistoryEntry, Init,
    SolveResult, SolverConfig, DIAGONAL_TOLERANCE,
};

use alloc::vec::Vec;

use crate::beamform::{MapKind, SourceMap};
use crate::error::DamasError;
use crate::spectra::SteeringSet;

/// `Y = A X`: the beamform map produced by the source powers `X`.
pub fn forward_map<P: Propagator + ?Sized>(a: &P, x: &SourceMap) -> Result<SourceMap, DamasError> {
    if x.len() != a.size() {
        return Err(DamasError::Dimension {
            expected: a.size(),
            got: x.len(),
        });
    }
    let values: Vec<f64> = (0..a.size()).map(|i| a.row_dot(i, x.values())).collect();
    let mut info = *x.info();
    info.iterations = None;
    Ok(SourceMap::new(*x.grid(), values, MapKind::Beamform, info)?)
}

/// [`damas_solve`] on a propagator whose entries are recomputed from the
/// steering set on every access.
pub fn solve_matrix_free(
    steer: &SteeringSet,
    flags: &PropagatorFlags,
    y: &SourceMap,
    config: &SolverConfig,
) -> Result<SolveResult, DamasError> {
    let a = MatrixFreePropagator::new(steer, flags)?;
    damas_solve(&a, y, config)
}

#[cfg(test)]
mod tests;
