use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::DamasError;
use crate::spectra::{weighted_denominator, CrossSpectralMatrix, SteeringSet};

/// Processing applied to the CSM that the propagator must mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorFlags {
    /// Effective microphone weights; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    pub diagonal_removed: bool,
}

impl PropagatorFlags {
    pub fn plain() -> Self {
        Self {
            weights: None,
            diagonal_removed: false,
        }
    }

    pub fn from_csm(csm: &CrossSpectralMatrix) -> Self {
        Self {
            weights: csm.is_weighted().then(|| csm.weights().to_vec()),
            diagonal_removed: csm.is_diagonal_removed(),
        }
    }
}

impl Default for PropagatorFlags {
    fn default() -> Self {
        Self::plain()
    }
}

/// Row access shared by the dense and matrix-free propagators. The solver
/// only ever touches `A` through this trait so both paths run the same
/// arithmetic in the same order.
pub trait Propagator {
    fn size(&self) -> usize;

    fn entry(&self, row: usize, col: usize) -> f64;

    /// `sum_{col != row, x[col] != 0} A[row][col] * x[col]`, summed in
    /// increasing column order.
    fn off_diagonal_dot(&self, row: usize, x: &[f64]) -> f64;

    /// `sum_col A[row][col] * x[col]`.
    fn row_dot(&self, row: usize, x: &[f64]) -> f64 {
        let off = self.off_diagonal_dot(row, x);
        if x[row] != 0.0 {
            off + self.entry(row, row) * x[row]
        } else {
            off
        }
    }
}

/// Computes individual propagator entries from a steering set:
///
/// `A[n][n'] = |sum_m w_m e_{m,n} / e_{m,n'}|^2 / D`
///
/// which is the beamform output at `n` of a unit source at `n'`. With the
/// diagonal removed the `m = m'` terms of the underlying double sum
/// (`sum_m w_m^2 |e_{m,n} / e_{m,n'}|^2`) are subtracted and `D` shrinks
/// accordingly, so `A[n][n] = 1` in every mode.
#[derive(Debug, Clone)]
pub struct EntryKernel {
    n_mics: usize,
    n_points: usize,
    // w_m * e_{m,n}, point-major
    weighted_steering: Vec<Complex64>,
    // 1 / e_{m,n'}, point-major
    inverse_steering: Vec<Complex64>,
    diagonal_removed: bool,
    denominator: f64,
}

impl EntryKernel {
    pub fn new(steer: &SteeringSet, flags: &PropagatorFlags) -> Result<Self, DamasError> {
        let n_mics = steer.n_mics();
        let n_points = steer.n_points();
        let ones;
        let weights = match &flags.weights {
            Some(w) => {
                if w.len() != n_mics {
                    return Err(DamasError::Dimension {
                        expected: n_mics,
                        got: w.len(),
                    });
                }
                w.as_slice()
            }
            None => {
                ones = alloc::vec![1.0; n_mics];
                ones.as_slice()
            }
        };
        let denominator = weighted_denominator(weights, flags.diagonal_removed);
        if !(denominator > 0.0) {
            return Err(DamasError::ZeroDenominator);
        }
        let mut weighted_steering = Vec::with_capacity(n_mics * n_points);
        let mut inverse_steering = Vec::with_capacity(n_mics * n_points);
        for n in 0..n_points {
            for (m, (e, w)) in steer.vector(n).iter().zip(weights).enumerate() {
                if e.norm_sqr() == 0.0 || !e.re.is_finite() || !e.im.is_finite() {
                    return Err(DamasError::ZeroSteering { mic: m, point: n });
                }
                weighted_steering.push(e * *w);
                inverse_steering.push(e.inv());
            }
        }
        Ok(Self {
            n_mics,
            n_points,
            weighted_steering,
            inverse_steering,
            diagonal_removed: flags.diagonal_removed,
            denominator,
        })
    }

    pub fn size(&self) -> usize {
        self.n_points
    }

    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    pub fn diagonal_removed(&self) -> bool {
        self.diagonal_removed
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let m0 = self.n_mics;
        let we = &self.weighted_steering[row * m0..(row + 1) * m0];
        let g = &self.inverse_steering[col * m0..(col + 1) * m0];
        let mut sum = Complex64::new(0.0, 0.0);
        if self.diagonal_removed {
            let mut auto = 0.0;
            for (a, b) in we.iter().zip(g) {
                let c = a * b;
                sum += c;
                auto += c.norm_sqr();
            }
            (sum.norm_sqr() - auto) / self.denominator
        } else {
            for (a, b) in we.iter().zip(g) {
                sum += a * b;
            }
            sum.norm_sqr() / self.denominator
        }
    }
}

/// Dense `N x N` propagator, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorMatrix {
    n: usize,
    data: Vec<f64>,
    weighted: bool,
    diagonal_removed: bool,
    denominator: f64,
}

impl PropagatorMatrix {
    /// Wraps an arbitrary row-major matrix (tests, file round trips).
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self, DamasError> {
        if data.len() != n * n {
            return Err(DamasError::Dimension {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self {
            n,
            data,
            weighted: false,
            diagonal_removed: false,
            denominator: 1.0,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = alloc::vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            n,
            data,
            weighted: false,
            diagonal_removed: false,
            denominator: 1.0,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn is_diagonal_removed(&self) -> bool {
        self.diagonal_removed
    }

    pub fn denominator(&self) -> f64 {
        self.denominator
    }
}

impl Propagator for PropagatorMatrix {
    fn size(&self) -> usize {
        self.n
    }

    fn entry(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    fn off_diagonal_dot(&self, row: usize, x: &[f64]) -> f64 {
        let a = self.row(row);
        let mut acc = 0.0;
        for (&aij, &xj) in a[..row].iter().zip(&x[..row]) {
            if xj != 0.0 {
                acc += aij * xj;
            }
        }
        for (&aij, &xj) in a[row + 1..].iter().zip(&x[row + 1..]) {
            if xj != 0.0 {
                acc += aij * xj;
            }
        }
        acc
    }
}

/// Builds the dense propagator `A`.
pub fn build_propagator(
    steer: &SteeringSet,
    flags: &PropagatorFlags,
) -> Result<PropagatorMatrix, DamasError> {
    let kernel = EntryKernel::new(steer, flags)?;
    let n = kernel.size();
    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        data.extend((0..n).map(|col| kernel.entry(row, col)));
    }
    Ok(PropagatorMatrix {
        n,
        data,
        weighted: flags.weights.is_some(),
        diagonal_removed: flags.diagonal_removed,
        denominator: kernel.denominator(),
    })
}

/// Propagator that recomputes entries on every access and never stores the
/// `N x N` matrix.
#[derive(Debug, Clone)]
pub struct MatrixFreePropagator {
    kernel: EntryKernel,
}

impl MatrixFreePropagator {
    pub fn new(steer: &SteeringSet, flags: &PropagatorFlags) -> Result<Self, DamasError> {
        Ok(Self {
            kernel: EntryKernel::new(steer, flags)?,
        })
    }

    pub fn kernel(&self) -> &EntryKernel {
        &self.kernel
    }
}

impl Propagator for MatrixFreePropagator {
    fn size(&self) -> usize {
        self.kernel.size()
    }

    fn entry(&self, row: usize, col: usize) -> f64 {
        self.kernel.entry(row, col)
    }

    fn off_diagonal_dot(&self, row: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (col, &xj) in x[..row].iter().enumerate() {
            if xj != 0.0 {
                acc += self.kernel.entry(row, col) * xj;
            }
        }
        for (col, &xj) in x.iter().enumerate().skip(row + 1) {
            if xj != 0.0 {
                acc += self.kernel.entry(row, col) * xj;
            }
        }
        acc
    }
}
