//! Dense state-vector simulation of small qubit registers.
//!
//! States hold all 2^n complex amplitudes explicitly. Single-qubit gates are
//! applied with stride-pair updates (no 2^n x 2^n matrix is ever built), so a
//! gate costs O(2^n) and a 10-qubit circuit layer stays comfortably inside L1
//! cache. Amplitude ordering follows circuit-diagram wire order: qubit 0 is
//! the most significant bit of the basis index, so `|10>` on two qubits lives
//! at index `0b10`.

use num_complex::Complex64;
use thiserror::Error;

/// Memory guard: 2^24 amplitudes = 256 MiB of complex doubles.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("qubit count {0} outside supported range 1..={max}", max = MAX_QUBITS)]
    QubitCountOutOfRange(usize),
    #[error("wire {wire} out of range for a {n_qubits}-qubit register")]
    WireOutOfRange { wire: usize, n_qubits: usize },
    #[error("control and target must be distinct wires (both {0})")]
    EqualWires(usize),
    #[error("amplitude vector has length {got}, expected {expected}")]
    AmplitudeLength { got: usize, expected: usize },
    #[error("amplitude vector has L2 norm {0}, expected 1 within 1e-9")]
    NotNormalized(f64),
}

/// Euler angles (phi, theta, omega) of a general single-qubit rotation
/// `R(phi, theta, omega) = R_z(omega) R_y(theta) R_z(phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerRotation {
    pub phi: f64,
    pub theta: f64,
    pub omega: f64,
}

impl EulerRotation {
    pub fn new(phi: f64, theta: f64, omega: f64) -> Self {
        Self { phi, theta, omega }
    }

    /// Closed-form 2x2 unitary, row-major `[u00, u01, u10, u11]`.
    pub fn matrix(&self) -> [Complex64; 4] {
        let (half_theta_sin, half_theta_cos) = (self.theta / 2.0).sin_cos();
        let plus = Complex64::from_polar(1.0, -(self.phi + self.omega) / 2.0);
        let minus = Complex64::from_polar(1.0, (self.phi - self.omega) / 2.0);
        [
            plus * half_theta_cos,
            -minus * half_theta_sin,
            minus.conj() * half_theta_sin,
            plus.conj() * half_theta_cos,
        ]
    }
}

/// Pure state of an n-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// `|0...0>` on `n_qubits` wires.
    pub fn zero(n_qubits: usize) -> Result<Self, SimError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(SimError::QubitCountOutOfRange(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// State carrying exactly the given amplitudes. The input must already be
    /// normalized; nothing is rescaled.
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self, SimError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(SimError::QubitCountOutOfRange(n_qubits));
        }
        let expected = 1usize << n_qubits;
        if amplitudes.len() != expected {
            return Err(SimError::AmplitudeLength {
                got: amplitudes.len(),
                expected,
            });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Convenience for amplitude encoding of real feature vectors.
    pub fn from_real_amplitudes(n_qubits: usize, values: &[f64]) -> Result<Self, SimError> {
        let amplitudes = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_amplitudes(n_qubits, amplitudes)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn check_wire(&self, wire: usize) -> Result<(), SimError> {
        if wire >= self.n_qubits {
            return Err(SimError::WireOutOfRange {
                wire,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    // Qubit 0 is the most significant bit of the basis index.
    fn stride(&self, wire: usize) -> usize {
        1 << (self.n_qubits - 1 - wire)
    }

    fn apply_single_qubit(&mut self, wire: usize, m: [Complex64; 4]) {
        let stride = self.stride(wire);
        let len = self.amplitudes.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let j = i + stride;
                let a = self.amplitudes[i];
                let b = self.amplitudes[j];
                self.amplitudes[i] = m[0] * a + m[1] * b;
                self.amplitudes[j] = m[2] * a + m[3] * b;
            }
            base += 2 * stride;
        }
    }

    /// Rotation about Y: `[[cos t/2, -sin t/2], [sin t/2, cos t/2]]`.
    pub fn apply_ry(&mut self, wire: usize, angle: f64) -> Result<(), SimError> {
        self.check_wire(wire)?;
        let (s, c) = (angle / 2.0).sin_cos();
        let m = [
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ];
        self.apply_single_qubit(wire, m);
        Ok(())
    }

    /// Rotation about Z: `diag(e^{-it/2}, e^{it/2})`.
    pub fn apply_rz(&mut self, wire: usize, angle: f64) -> Result<(), SimError> {
        self.check_wire(wire)?;
        let phase = Complex64::from_polar(1.0, angle / 2.0);
        let stride = self.stride(wire);
        let len = self.amplitudes.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let j = i + stride;
                self.amplitudes[i] *= phase.conj();
                self.amplitudes[j] *= phase;
            }
            base += 2 * stride;
        }
        Ok(())
    }

    /// General rotation, applied as one composed 2x2 matrix. Equivalent to
    /// `apply_rz(phi)`, `apply_ry(theta)`, `apply_rz(omega)` in that order.
    pub fn apply_rot(&mut self, wire: usize, rot: EulerRotation) -> Result<(), SimError> {
        self.check_wire(wire)?;
        self.apply_single_qubit(wire, rot.matrix());
        Ok(())
    }

    /// Flip `target` wherever `control` is set.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<(), SimError> {
        self.check_wire(control)?;
        self.check_wire(target)?;
        if control == target {
            return Err(SimError::EqualWires(control));
        }
        let cbit = self.stride(control);
        let tbit = self.stride(target);
        for i in 0..self.amplitudes.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amplitudes.swap(i, i | tbit);
            }
        }
        Ok(())
    }

    /// `<Z>` of one wire: +1 weight where its bit is 0, -1 where it is 1.
    pub fn expectation_z(&self, wire: usize) -> Result<f64, SimError> {
        self.check_wire(wire)?;
        let bit = self.stride(wire);
        let mut value = 0.0;
        for (i, amp) in self.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            if i & bit == 0 {
                value += p;
            } else {
                value -= p;
            }
        }
        Ok(value)
    }
}
