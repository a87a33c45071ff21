use alloc::vec::Vec;

use crate::beamform::{MapInfo, MapKind, SourceMap};
use crate::error::DamasError;

use super::propagator::Propagator;

/// How far `A[n][n]` may stray from one before the propagator is rejected.
pub const DIAGONAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// `X = 0`.
    #[default]
    Zero,
    /// `X = max(Y, 0)`.
    Beamform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// One iteration is a forward sweep (first to last grid point) followed
    /// by a backward sweep.
    pub max_iterations: usize,
    /// Stop once `max |dX| / max X` over an iteration is at or below this.
    pub tolerance: f64,
    pub init: Init,
    pub record_history: bool,
}

impl SolverConfig {
    pub fn iterations(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DamasError> {
        if self.max_iterations == 0 {
            return Err(DamasError::MaxIterations);
        }
        if !(self.tolerance >= 0.0) || !self.tolerance.is_finite() {
            return Err(DamasError::Tolerance);
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 0.0,
            init: Init::Zero,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// `||A X - Y||_2 / ||Y||_2`.
    pub residual: f64,
    /// `sum X`, Pa^2.
    pub total_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub map: SourceMap,
    pub iterations_run: usize,
    pub history: Vec<HistoryEntry>,
    pub converged: bool,
}

/// Forward/backward non-negative Gauss-Seidel iteration on `A X = Y`.
///
/// Every update is `X_n = max(0, Y_n - sum_{n' != n} A[n][n'] X_n')` using the
/// freshest values, so the iteration is inherently sequential.
pub struct GaussSeidel<'a, P: Propagator + ?Sized> {
    a: &'a P,
    y: &'a SourceMap,
    x: Vec<f64>,
    config: SolverConfig,
    iterations: usize,
    history: Vec<HistoryEntry>,
    last_change: f64,
}

impl<'a, P: Propagator + ?Sized> GaussSeidel<'a, P> {
    pub fn new(a: &'a P, y: &'a SourceMap, config: SolverConfig) -> Result<Self, DamasError> {
        config.validate()?;
        let n = a.size();
        if y.len() != n {
            return Err(DamasError::Dimension {
                expected: n,
                got: y.len(),
            });
        }
        for i in 0..n {
            let d = a.entry(i, i);
            if !((d - 1.0).abs() <= DIAGONAL_TOLERANCE) {
                return Err(DamasError::Diagonal { index: i, value: d });
            }
        }
        if let Some(i) = y.values().iter().position(|v| !v.is_finite()) {
            return Err(DamasError::NotFinite {
                iteration: 0,
                index: i,
            });
        }
        let x = match config.init {
            Init::Zero => alloc::vec![0.0; n],
            Init::Beamform => y.values().iter().map(|v| v.max(0.0)).collect(),
        };
        Ok(Self {
            a,
            y,
            x,
            config,
            iterations: 0,
            history: Vec::new(),
            last_change: f64::INFINITY,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn solution(&self) -> &[f64] {
        &self.x
    }

    /// Relative change of the last completed iteration.
    pub fn last_change(&self) -> f64 {
        self.last_change
    }

    pub fn converged(&self) -> bool {
        self.iterations > 0 && self.last_change <= self.config.tolerance
    }

    /// Runs one forward and one backward sweep.
    pub fn step(&mut self) -> Result<f64, DamasError> {
        let n = self.a.size();
        let iteration = self.iterations + 1;
        let mut max_delta: f64 = 0.0;
        for i in (0..n).chain((0..n).rev()) {
            let updated = self.y.values()[i] - self.a.off_diagonal_dot(i, &self.x);
            if updated.is_nan() {
                return Err(DamasError::NotFinite { iteration, index: i });
            }
            let updated = updated.max(0.0);
            if !updated.is_finite() {
                return Err(DamasError::NotFinite { iteration, index: i });
            }
            max_delta = max_delta.max((updated - self.x[i]).abs());
            self.x[i] = updated;
        }
        let max_x = self.x.iter().copied().fold(0.0, f64::max);
        self.last_change = if max_delta == 0.0 {
            0.0
        } else if max_x > 0.0 {
            max_delta / max_x
        } else {
            f64::INFINITY
        };
        self.iterations = iteration;
        if self.config.record_history {
            let residual = relative_residual(self.a, &self.x, self.y.values());
            self.history.push(HistoryEntry {
                iteration,
                residual,
                total_power: self.x.iter().sum(),
            });
        }
        Ok(self.last_change)
    }

    /// Iterates until `target` iterations have run or the tolerance is met.
    pub fn run_to(&mut self, target: usize) -> Result<(), DamasError> {
        let target = target.min(self.config.max_iterations);
        while self.iterations < target && !self.converged() {
            self.step()?;
        }
        Ok(())
    }

    /// Snapshot of the current state.
    pub fn result(&self) -> SolveResult {
        let info = MapInfo {
            iterations: Some(self.iterations),
            ..*self.y.info()
        };
        let map = SourceMap::new(*self.y.grid(), self.x.clone(), MapKind::Damas, info)
            .expect("solution length matches grid");
        SolveResult {
            map,
            iterations_run: self.iterations,
            history: self.history.clone(),
            converged: self.converged(),
        }
    }
}

/// `||A X - Y||_2 / ||Y||_2`, or `||A X||_2` when `Y = 0`.
pub fn relative_residual<P: Propagator + ?Sized>(a: &P, x: &[f64], y: &[f64]) -> f64 {
    let mut num = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let r = a.row_dot(i, x) - yi;
        num += r * r;
    }
    let den: f64 = y.iter().map(|v| v * v).sum();
    if den > 0.0 {
        num_traits::Float::sqrt(num / den)
    } else {
        num_traits::Float::sqrt(num)
    }
}

/// Solves `A X = Y` with the configured number of iterations.
pub fn damas_solve<P: Propagator + ?Sized>(
    a: &P,
    y: &SourceMap,
    config: &SolverConfig,
) -> Result<SolveResult, DamasError> {
    let mut solver = GaussSeidel::new(a, y, *config)?;
    solver.run_to(config.max_iterations)?;
    Ok(solver.result())
}

/// Runs one continuous solve and snapshots it at each checkpoint (iteration
/// counts, strictly increasing). `config.max_iterations` is raised to the
/// last checkpoint if needed.
pub fn damas_solve_checkpoints<P: Propagator + ?Sized>(
    a: &P,
    y: &SourceMap,
    config: &SolverConfig,
    checkpoints: &[usize],
) -> Result<Vec<SolveResult>, DamasError> {
    let last = checkpoints.iter().copied().max().unwrap_or(config.max_iterations);
    let config = SolverConfig {
        max_iterations: config.max_iterations.max(last),
        ..*config
    };
    let mut solver = GaussSeidel::new(a, y, config)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &k in checkpoints {
        solver.run_to(k)?;
        out.push(solver.result());
    }
    Ok(out)
}
