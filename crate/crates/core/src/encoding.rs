//! Classical-to-quantum feature encodings.
//!
//! Variational encoding loads one feature per qubit as a pair of rotation
//! angles, `R_y(arctan x_i)` then `R_z(arctan x_i^2)`; arctan keeps arbitrary
//! feature magnitudes inside (-pi/2, pi/2). Amplitude encoding packs a whole
//! feature vector into the 2^n amplitudes of an n-qubit state after zero
//! padding and L2 normalization, which on a simulator is equivalent to the
//! usual gate-cascade preparation.

use crate::simulator::{QuantumState, SimError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("expected {expected} features for {n_qubits} qubits, got {got}")]
    LengthMismatch {
        expected: usize,
        n_qubits: usize,
        got: usize,
    },
    #[error("{got} features do not fit in 2^{n_qubits} amplitudes")]
    TooLong { got: usize, n_qubits: usize },
    #[error("amplitude input is all zeros and cannot be normalized")]
    AllZero,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Feature vector tagged with how it enters the circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncodedInput {
    /// One feature per qubit, loaded as rotation angles.
    Variational(Vec<f64>),
    /// 2^n unit-norm values, loaded directly as amplitudes.
    Amplitude(Vec<f64>),
}

/// Per-qubit encoding angles `(arctan x_i, arctan x_i^2)` for the R_y and R_z
/// gates. Exposed separately so gradients can shift individual angles.
pub fn encoding_angles(x: &[f64]) -> Vec<(f64, f64)> {
    x.iter().map(|&v| (v.atan(), (v * v).atan())).collect()
}

/// Rotate a fresh `|0...0>` register by the encoding angles of `x`.
pub fn variational_encode(state: &mut QuantumState, x: &[f64]) -> Result<(), EncodeError> {
    if x.len() != state.n_qubits() {
        return Err(EncodeError::LengthMismatch {
            expected: state.n_qubits(),
            n_qubits: state.n_qubits(),
            got: x.len(),
        });
    }
    for (wire, (ry, rz)) in encoding_angles(x).into_iter().enumerate() {
        state.apply_ry(wire, ry)?;
        state.apply_rz(wire, rz)?;
    }
    Ok(())
}

/// Zero-pad `x_raw` to 2^n entries and divide by its L2 norm. The result
/// feeds `QuantumState::from_real_amplitudes` directly.
pub fn amplitude_prepare(x_raw: &[f64], n_qubits: usize) -> Result<Vec<f64>, EncodeError> {
    let dim = 1usize << n_qubits;
    if x_raw.len() > dim {
        return Err(EncodeError::TooLong {
            got: x_raw.len(),
            n_qubits,
        });
    }
    let norm = x_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(EncodeError::AllZero);
    }
    let mut out = vec![0.0; dim];
    for (o, v) in out.iter_mut().zip(x_raw) {
        *o = v / norm;
    }
    Ok(out)
}
