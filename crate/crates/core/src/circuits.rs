//! Parameterized circuit blocks, the two classifier architectures, and
//! analytic gradients.
//!
//! A model is a chain of blocks. Each block encodes its input (rotation
//! angles or amplitudes), runs `n_layers` identical layers -- the entangling
//! CNOTs in listed order, then one general rotation per wire -- and reads out
//! `<Z>` on its measured wires. Those expectations become the variational
//! inputs of the next block; the final block's pair of expectations are the
//! logits.
//!
//! Gradients come from the parameter-shift rule: every trainable angle and
//! every encoding angle sits in a single-axis rotation, so its exact
//! derivative is half the difference of the circuit output at +-pi/2 shifts.
//! Cross-block dependencies compose through the chain rule with the arctan
//! channel derivatives. A central finite-difference fallback is provided as
//! an independent check on the whole pipeline.

use crate::encoding::{self, EncodeError, EncodedInput};
use crate::simulator::{EulerRotation, QuantumState, SimError};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Final pair of Z expectations, each in [-1, 1].
pub type Logits = [f64; 2];

/// Probabilities are clamped to this floor before taking logs.
const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamCount { got: usize, expected: usize },
    #[error("input has {got} features, block expects {expected}")]
    InputSize { got: usize, expected: usize },
    #[error("input kind does not match the block's input mode")]
    InputModeMismatch,
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("finite-difference step {0} outside [1e-8, 1e-3]")]
    StepOutOfRange(f64),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Variational,
    Amplitude,
}

/// One circuit block: qubit count, layer count, entangling pattern, readout
/// wires, and how inputs enter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub entangler: Vec<(usize, usize)>,
    pub measured_wires: Vec<usize>,
    pub input_mode: InputMode,
}

impl BlockSpec {
    /// Three Euler angles per wire per layer.
    pub fn param_count(&self) -> usize {
        self.n_layers * self.n_qubits * 3
    }

    fn validate(&self) -> Result<(), CircuitError> {
        let bad = |msg: String| Err(CircuitError::InvalidSpec(msg));
        if self.n_qubits == 0 {
            return bad("block has zero qubits".into());
        }
        if self.n_layers == 0 {
            return bad("block has zero layers".into());
        }
        for &(c, t) in &self.entangler {
            if c == t || c >= self.n_qubits || t >= self.n_qubits {
                return bad(format!("bad entangler pair ({c}, {t})"));
            }
        }
        if self.measured_wires.is_empty() {
            return bad("block measures no wires".into());
        }
        for (i, &w) in self.measured_wires.iter().enumerate() {
            if w >= self.n_qubits {
                return bad(format!("measured wire {w} out of range"));
            }
            if self.measured_wires[..i].contains(&w) {
                return bad(format!("measured wire {w} repeated"));
            }
        }
        Ok(())
    }
}

/// A chain of blocks plus the flat trainable parameter vector, laid out
/// block-major, then layer-major, then wire-major, then (phi, theta, omega).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcModel {
    pub blocks: Vec<BlockSpec>,
    pub params: Vec<f64>,
}

impl VqcModel {
    /// Model with zeroed parameters. Fails if the blocks do not chain.
    pub fn new(blocks: Vec<BlockSpec>) -> Result<Self, CircuitError> {
        let params = vec![0.0; blocks.iter().map(BlockSpec::param_count).sum()];
        let model = Self { blocks, params };
        model.validate()?;
        Ok(model)
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(BlockSpec::param_count).sum()
    }

    /// Draw fresh parameters: standard normal samples scaled by 0.01.
    pub fn init_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for p in &mut self.params {
            let z: f64 = rng.sample(StandardNormal);
            *p = 0.01 * z;
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.blocks.is_empty() {
            return Err(CircuitError::InvalidSpec("model has no blocks".into()));
        }
        for block in &self.blocks {
            block.validate()?;
        }
        for (k, pair) in self.blocks.windows(2).enumerate() {
            if pair[1].input_mode != InputMode::Variational {
                return Err(CircuitError::InvalidSpec(format!(
                    "block {} must take variational input to chain",
                    k + 1
                )));
            }
            if pair[0].measured_wires.len() != pair[1].n_qubits {
                return Err(CircuitError::InvalidSpec(format!(
                    "block {k} emits {} values but block {} has {} qubits",
                    pair[0].measured_wires.len(),
                    k + 1,
                    pair[1].n_qubits
                )));
            }
        }
        let last = self.blocks.last().unwrap();
        if last.measured_wires.len() != 2 {
            return Err(CircuitError::InvalidSpec(
                "final block must measure exactly 2 wires".into(),
            ));
        }
        if self.params.len() != self.param_count() {
            return Err(CircuitError::ParamCount {
                got: self.params.len(),
                expected: self.param_count(),
            });
        }
        Ok(())
    }

    /// Parameter sub-slice belonging to block `b`.
    fn block_params<'a>(&self, params: &'a [f64], b: usize) -> &'a [f64] {
        let start: usize = self.blocks[..b].iter().map(BlockSpec::param_count).sum();
        &params[start..start + self.blocks[b].param_count()]
    }
}

/// Two-qubit planar classifier: two chained blocks of two layers each,
/// 24 parameters in total, both taking variational input.
pub fn build_2d_model() -> VqcModel {
    let block = || BlockSpec {
        n_qubits: 2,
        n_layers: 2,
        entangler: vec![(0, 1), (1, 0)],
        measured_wires: vec![0, 1],
        input_mode: InputMode::Variational,
    };
    VqcModel::new(vec![block(), block()]).expect("builder produces a valid model")
}

fn ring(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

/// Binary image classifier: a 10-qubit amplitude-encoded block (8 layers,
/// ring entangler, 4 readouts) feeding a 4-qubit variational block (4 layers,
/// 2 readouts); 240 + 48 = 288 parameters.
pub fn build_mnist_model() -> VqcModel {
    let first = BlockSpec {
        n_qubits: 10,
        n_layers: 8,
        entangler: ring(10),
        measured_wires: vec![0, 1, 2, 3],
        input_mode: InputMode::Amplitude,
    };
    let second = BlockSpec {
        n_qubits: 4,
        n_layers: 4,
        entangler: ring(4),
        measured_wires: vec![0, 1],
        input_mode: InputMode::Variational,
    };
    VqcModel::new(vec![first, second]).expect("builder produces a valid model")
}

/// Encoded block input in the form the inner loops consume.
enum Prepared {
    /// (R_y, R_z) encoding angle pair per qubit.
    Angles(Vec<(f64, f64)>),
    /// Unit-norm amplitude vector of length 2^n.
    Amplitudes(Vec<f64>),
}

fn prepare(spec: &BlockSpec, input: &EncodedInput) -> Result<Prepared, CircuitError> {
    match (spec.input_mode, input) {
        (InputMode::Variational, EncodedInput::Variational(x)) => {
            if x.len() != spec.n_qubits {
                return Err(CircuitError::InputSize {
                    got: x.len(),
                    expected: spec.n_qubits,
                });
            }
            Ok(Prepared::Angles(encoding::encoding_angles(x)))
        }
        (InputMode::Amplitude, EncodedInput::Amplitude(v)) => {
            let expected = 1usize << spec.n_qubits;
            if v.len() != expected {
                return Err(CircuitError::InputSize {
                    got: v.len(),
                    expected,
                });
            }
            Ok(Prepared::Amplitudes(v.clone()))
        }
        _ => Err(CircuitError::InputModeMismatch),
    }
}

fn initial_state(spec: &BlockSpec, input: &Prepared) -> Result<QuantumState, CircuitError> {
    match input {
        Prepared::Angles(angles) => {
            let mut state = QuantumState::zero(spec.n_qubits)?;
            for (wire, &(ry, rz)) in angles.iter().enumerate() {
                state.apply_ry(wire, ry)?;
                state.apply_rz(wire, rz)?;
            }
            Ok(state)
        }
        Prepared::Amplitudes(v) => Ok(QuantumState::from_real_amplitudes(spec.n_qubits, v)?),
    }
}

/// One layer: entangling CNOTs in listed order, then a rotation per wire.
fn apply_layer(
    state: &mut QuantumState,
    spec: &BlockSpec,
    layer_params: &[f64],
) -> Result<(), CircuitError> {
    for &(c, t) in &spec.entangler {
        state.apply_cnot(c, t)?;
    }
    for wire in 0..spec.n_qubits {
        let rot = EulerRotation::new(
            layer_params[wire * 3],
            layer_params[wire * 3 + 1],
            layer_params[wire * 3 + 2],
        );
        state.apply_rot(wire, rot)?;
    }
    Ok(())
}

fn measure(state: &QuantumState, spec: &BlockSpec) -> Result<Vec<f64>, CircuitError> {
    spec.measured_wires
        .iter()
        .map(|&w| state.expectation_z(w).map_err(CircuitError::from))
        .collect()
}

fn run_block(spec: &BlockSpec, params: &[f64], input: &Prepared) -> Result<Vec<f64>, CircuitError> {
    let per_layer = spec.n_qubits * 3;
    let mut state = initial_state(spec, input)?;
    for layer in 0..spec.n_layers {
        apply_layer(
            &mut state,
            spec,
            &params[layer * per_layer..(layer + 1) * per_layer],
        )?;
    }
    measure(&state, spec)
}

/// Run a single block on an encoded input and return its Z expectations.
pub fn block_forward(
    spec: &BlockSpec,
    params: &[f64],
    input: &EncodedInput,
) -> Result<Vec<f64>, CircuitError> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(CircuitError::ParamCount {
            got: params.len(),
            expected: spec.param_count(),
        });
    }
    run_block(spec, params, &prepare(spec, input)?)
}

fn first_input(spec: &BlockSpec, x: &[f64]) -> Result<Prepared, CircuitError> {
    match spec.input_mode {
        InputMode::Variational => {
            if x.len() != spec.n_qubits {
                return Err(CircuitError::InputSize {
                    got: x.len(),
                    expected: spec.n_qubits,
                });
            }
            Ok(Prepared::Angles(encoding::encoding_angles(x)))
        }
        InputMode::Amplitude => Ok(Prepared::Amplitudes(encoding::amplitude_prepare(
            x,
            spec.n_qubits,
        )?)),
    }
}

/// Full forward pass with an explicit parameter vector.
pub fn model_forward_with(
    model: &VqcModel,
    params: &[f64],
    x: &[f64],
) -> Result<Logits, CircuitError> {
    model.validate_against(params)?;
    let mut outputs = Vec::new();
    for (b, spec) in model.blocks.iter().enumerate() {
        let input = if b == 0 {
            first_input(spec, x)?
        } else {
            Prepared::Angles(encoding::encoding_angles(&outputs))
        };
        outputs = run_block(spec, model.block_params(params, b), &input)?;
    }
    Ok([outputs[0], outputs[1]])
}

/// Full forward pass using the model's own parameters.
pub fn model_forward(model: &VqcModel, x: &[f64]) -> Result<Logits, CircuitError> {
    model_forward_with(model, &model.params, x)
}

impl VqcModel {
    fn validate_against(&self, params: &[f64]) -> Result<(), CircuitError> {
        for block in &self.blocks {
            block.validate()?;
        }
        if self.blocks.is_empty() {
            return Err(CircuitError::InvalidSpec("model has no blocks".into()));
        }
        if params.len() != self.param_count() {
            return Err(CircuitError::ParamCount {
                got: params.len(),
                expected: self.param_count(),
            });
        }
        Ok(())
    }
}

/// Softmax over the logits.
pub fn predict_proba(logits: Logits) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// Negative log likelihood of the true class, with the probability clamped
/// away from zero before the log.
pub fn cross_entropy(probs: [f64; 2], label: usize) -> f64 {
    -probs[label].clamp(LOG_FLOOR, 1.0).ln()
}

/// Cross-entropy loss of the model on one example.
pub fn loss_with(
    model: &VqcModel,
    params: &[f64],
    x: &[f64],
    label: usize,
) -> Result<f64, CircuitError> {
    Ok(cross_entropy(
        predict_proba(model_forward_with(model, params, x)?),
        label,
    ))
}

/// Per trainable angle of one block: d(block outputs)/d(angle), via +-pi/2
/// shifts. States after each layer prefix are cached so a shifted angle in
/// layer `l` only replays layers `l..`.
fn block_param_jacobian(
    spec: &BlockSpec,
    params: &[f64],
    input: &Prepared,
) -> Result<Vec<Vec<f64>>, CircuitError> {
    let per_layer = spec.n_qubits * 3;
    let mut prefixes = Vec::with_capacity(spec.n_layers);
    let mut state = initial_state(spec, input)?;
    for layer in 0..spec.n_layers {
        prefixes.push(state.clone());
        apply_layer(
            &mut state,
            spec,
            &params[layer * per_layer..(layer + 1) * per_layer],
        )?;
    }

    let mut jac = Vec::with_capacity(spec.param_count());
    let mut shifted = vec![0.0; per_layer];
    for layer in 0..spec.n_layers {
        let layer_params = &params[layer * per_layer..(layer + 1) * per_layer];
        for idx in 0..per_layer {
            let mut outputs = [Vec::new(), Vec::new()];
            for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
                shifted.copy_from_slice(layer_params);
                shifted[idx] += sign * FRAC_PI_2;
                let mut s = prefixes[layer].clone();
                apply_layer(&mut s, spec, &shifted)?;
                for later in layer + 1..spec.n_layers {
                    apply_layer(
                        &mut s,
                        spec,
                        &params[later * per_layer..(later + 1) * per_layer],
                    )?;
                }
                outputs[side] = measure(&s, spec)?;
            }
            jac.push(
                outputs[0]
                    .iter()
                    .zip(&outputs[1])
                    .map(|(p, m)| (p - m) / 2.0)
                    .collect(),
            );
        }
    }
    Ok(jac)
}

/// Per encoding angle of a variational block: d(block outputs)/d(angle).
/// Returns one matrix for the R_y channel and one for the R_z channel,
/// each `n_qubits x n_measured`.
#[allow(clippy::type_complexity)]
fn encoding_jacobian(
    spec: &BlockSpec,
    params: &[f64],
    angles: &[(f64, f64)],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), CircuitError> {
    let mut jac_ry = Vec::with_capacity(spec.n_qubits);
    let mut jac_rz = Vec::with_capacity(spec.n_qubits);
    for wire in 0..spec.n_qubits {
        for channel in 0..2 {
            let mut sides = [Vec::new(), Vec::new()];
            for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
                let mut shifted = angles.to_vec();
                if channel == 0 {
                    shifted[wire].0 += sign * FRAC_PI_2;
                } else {
                    shifted[wire].1 += sign * FRAC_PI_2;
                }
                sides[side] = run_block(spec, params, &Prepared::Angles(shifted))?;
            }
            let row: Vec<f64> = sides[0]
                .iter()
                .zip(&sides[1])
                .map(|(p, m)| (p - m) / 2.0)
                .collect();
            if channel == 0 {
                jac_ry.push(row);
            } else {
                jac_rz.push(row);
            }
        }
    }
    Ok((jac_ry, jac_rz))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Analytic gradient of the cross-entropy loss with respect to every
/// trainable angle, with an explicit parameter vector.
///
/// Downstream sensitivities flow backward block by block: the softmax/
/// cross-entropy identity seeds d(loss)/d(logits), each block contributes
/// parameter-shift jacobians for its own angles, and the coupling into the
/// previous block runs through the encoding angles `arctan(u)` and
/// `arctan(u^2)` with their analytic derivatives `1/(1+u^2)` and
/// `2u/(1+u^4)`.
pub fn param_shift_grad_with(
    model: &VqcModel,
    params: &[f64],
    x: &[f64],
    label: usize,
) -> Result<Vec<f64>, CircuitError> {
    model.validate_against(params)?;

    // Forward pass, keeping each block's prepared input and outputs.
    let n_blocks = model.blocks.len();
    let mut inputs: Vec<Prepared> = Vec::with_capacity(n_blocks);
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(n_blocks);
    for (b, spec) in model.blocks.iter().enumerate() {
        let input = if b == 0 {
            first_input(spec, x)?
        } else {
            Prepared::Angles(encoding::encoding_angles(&outputs[b - 1]))
        };
        let out = run_block(spec, model.block_params(params, b), &input)?;
        inputs.push(input);
        outputs.push(out);
    }

    let logits = [outputs[n_blocks - 1][0], outputs[n_blocks - 1][1]];
    let probs = predict_proba(logits);
    let mut upstream = vec![
        probs[0] - if label == 0 { 1.0 } else { 0.0 },
        probs[1] - if label == 1 { 1.0 } else { 0.0 },
    ];

    let mut per_block: Vec<Vec<f64>> = vec![Vec::new(); n_blocks];
    for b in (0..n_blocks).rev() {
        let spec = &model.blocks[b];
        let block_params = model.block_params(params, b);
        let jac = block_param_jacobian(spec, block_params, &inputs[b])?;
        per_block[b] = jac.iter().map(|row| dot(row, &upstream)).collect();

        if b > 0 {
            let angles = match &inputs[b] {
                Prepared::Angles(a) => a,
                Prepared::Amplitudes(_) => unreachable!("chained blocks are variational"),
            };
            let (jac_ry, jac_rz) = encoding_jacobian(spec, block_params, angles)?;
            let u = &outputs[b - 1];
            upstream = (0..u.len())
                .map(|i| {
                    let d_ry = 1.0 / (1.0 + u[i] * u[i]);
                    let d_rz = 2.0 * u[i] / (1.0 + u[i].powi(4));
                    dot(&jac_ry[i], &upstream) * d_ry + dot(&jac_rz[i], &upstream) * d_rz
                })
                .collect();
        }
    }

    Ok(per_block.concat())
}

/// Analytic loss gradient at the model's own parameters.
pub fn param_shift_grad(
    model: &VqcModel,
    x: &[f64],
    label: usize,
) -> Result<Vec<f64>, CircuitError> {
    param_shift_grad_with(model, &model.params, x, label)
}

/// Central finite differences of the loss, the independent oracle for the
/// parameter-shift path.
pub fn finite_diff_grad(
    model: &VqcModel,
    x: &[f64],
    label: usize,
    h: f64,
) -> Result<Vec<f64>, CircuitError> {
    if !(1e-8..=1e-3).contains(&h) {
        return Err(CircuitError::StepOutOfRange(h));
    }
    model.validate_against(&model.params)?;
    let mut params = model.params.clone();
    let mut grad = Vec::with_capacity(params.len());
    for j in 0..params.len() {
        let original = params[j];
        params[j] = original + h;
        let plus = loss_with(model, &params, x, label)?;
        params[j] = original - h;
        let minus = loss_with(model, &params, x, label)?;
        params[j] = original;
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
