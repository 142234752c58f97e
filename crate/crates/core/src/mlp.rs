//! Classical baseline: a small fully connected network with tanh hidden
//! activations and a softmax head, trained with the same loss and optimizer
//! as the quantum models.
//!
//! Parameters are stored flat, layer-major, each layer's row-major weight
//! matrix followed by its bias vector. That ordering is the gradient
//! contract relied on by the optimizer and the finite-difference checks.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("need at least two layer sizes, got {0}")]
    TooFewLayers(usize),
    #[error("output layer must have 2 units, got {0}")]
    BadOutputSize(usize),
    #[error("layer sizes must be positive")]
    ZeroWidth,
    #[error("input has {got} features, model expects {expected}")]
    InputSize { got: usize, expected: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamCount { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub params: Vec<f64>,
}

fn param_count_for(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpModel {
    /// Xavier-uniform weights (`+-sqrt(6/(fan_in+fan_out))`), zero biases.
    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self, MlpError> {
        if layer_sizes.len() < 2 {
            return Err(MlpError::TooFewLayers(layer_sizes.len()));
        }
        if layer_sizes.contains(&0) {
            return Err(MlpError::ZeroWidth);
        }
        if *layer_sizes.last().unwrap() != 2 {
            return Err(MlpError::BadOutputSize(*layer_sizes.last().unwrap()));
        }
        let mut params = Vec::with_capacity(param_count_for(layer_sizes));
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-bound..bound));
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        param_count_for(&self.layer_sizes)
    }

    fn check(&self, params: &[f64], x: &[f64]) -> Result<(), MlpError> {
        if params.len() != self.param_count() {
            return Err(MlpError::ParamCount {
                got: params.len(),
                expected: self.param_count(),
            });
        }
        if x.len() != self.layer_sizes[0] {
            return Err(MlpError::InputSize {
                got: x.len(),
                expected: self.layer_sizes[0],
            });
        }
        Ok(())
    }

    /// Forward pass with an explicit parameter vector; affine + tanh per
    /// hidden layer, affine + softmax at the output.
    pub fn forward_with(&self, params: &[f64], x: &[f64]) -> Result<[f64; 2], MlpError> {
        self.check(params, x)?;
        let (activations, _) = self.run_forward(params, x);
        let logits = activations.last().unwrap();
        Ok(softmax2(logits[0], logits[1]))
    }

    pub fn forward(&self, x: &[f64]) -> Result<[f64; 2], MlpError> {
        self.forward_with(&self.params, x)
    }

    // Returns per-layer outputs (post-activation for hidden layers, raw
    // logits for the last) and the layer offsets into the parameter vector.
    fn run_forward(&self, params: &[f64], x: &[f64]) -> (Vec<Vec<f64>>, Vec<usize>) {
        let n_layers = self.layer_sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            offsets.push(offset);
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let weights = &params[offset..offset + n_in * n_out];
            let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = activations.last().unwrap();
            let mut z = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                z[o] = biases[o] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
            }
            if l + 1 < n_layers {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            activations.push(z);
            offset += n_in * n_out + n_out;
        }
        (activations, offsets)
    }

    /// Backpropagated gradient of the cross-entropy loss, flattened in the
    /// parameter layout.
    pub fn grad_with(&self, params: &[f64], x: &[f64], label: usize) -> Result<Vec<f64>, MlpError> {
        self.check(params, x)?;
        let n_layers = self.layer_sizes.len() - 1;
        let (activations, offsets) = self.run_forward(params, x);
        let logits = activations.last().unwrap();
        let probs = softmax2(logits[0], logits[1]);

        let mut grad = vec![0.0; params.len()];
        // softmax + cross-entropy: d(loss)/d(logit) = p - onehot
        let mut delta = vec![probs[0], probs[1]];
        delta[label] -= 1.0;

        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let offset = offsets[l];
            let input = &activations[l];
            for o in 0..n_out {
                for i in 0..n_in {
                    grad[offset + o * n_in + i] = delta[o] * input[i];
                }
                grad[offset + n_in * n_out + o] = delta[o];
            }
            if l > 0 {
                let weights = &params[offset..offset + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (i, p) in prev.iter_mut().enumerate() {
                    for (o, d) in delta.iter().enumerate() {
                        *p += weights[o * n_in + i] * d;
                    }
                    // tanh'(z) expressed through the stored activation
                    *p *= 1.0 - input[i] * input[i];
                }
                delta = prev;
            }
        }
        Ok(grad)
    }

    pub fn grad(&self, x: &[f64], label: usize) -> Result<Vec<f64>, MlpError> {
        self.grad_with(&self.params, x, label)
    }

    /// Loss of one example, used by the finite-difference check.
    pub fn loss_with(&self, params: &[f64], x: &[f64], label: usize) -> Result<f64, MlpError> {
        let probs = self.forward_with(params, x)?;
        Ok(-probs[label].clamp(1e-12, 1.0).ln())
    }
}

fn softmax2(a: f64, b: f64) -> [f64; 2] {
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    [ea / (ea + eb), eb / (ea + eb)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn parameter_counts() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mnist = MlpModel::init(&[1024, 1, 2], &mut rng).unwrap();
        assert_eq!(mnist.param_count(), 1029);
        assert_eq!(mnist.params.len(), 1029);

        let planar = MlpModel::init(&[2, 7, 2], &mut rng).unwrap();
        assert_eq!(planar.param_count(), 37);
    }

    #[test]
    fn xavier_bounds_and_zero_biases() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m = MlpModel::init(&[2, 7, 2], &mut rng).unwrap();
        let bound1 = (6.0f64 / 9.0).sqrt();
        assert!(m.params[..14].iter().all(|w| w.abs() < bound1));
        assert!(m.params[14..21].iter().all(|&b| b == 0.0));
        let bound2 = (6.0f64 / 9.0).sqrt();
        assert!(m.params[21..35].iter().all(|w| w.abs() < bound2));
        assert!(m.params[35..].iter().all(|&b| b == 0.0));

        let again = MlpModel::init(&[2, 7, 2], &mut ChaCha12Rng::seed_from_u64(1)).unwrap();
        let fresh = MlpModel::init(&[2, 7, 2], &mut ChaCha12Rng::seed_from_u64(1)).unwrap();
        assert_eq!(again.params, fresh.params);
    }

    #[test]
    fn init_validation() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        assert_eq!(
            MlpModel::init(&[4], &mut rng).unwrap_err(),
            MlpError::TooFewLayers(1)
        );
        assert_eq!(
            MlpModel::init(&[4, 3], &mut rng).unwrap_err(),
            MlpError::BadOutputSize(3)
        );
        assert_eq!(
            MlpModel::init(&[4, 0, 2], &mut rng).unwrap_err(),
            MlpError::ZeroWidth
        );
    }

    #[test]
    fn zero_parameters_predict_even_odds() {
        let model = MlpModel {
            layer_sizes: vec![3, 2, 2],
            params: vec![0.0; 3 * 2 + 2 + 2 * 2 + 2],
        };
        let p = model.forward(&[0.4, -1.0, 2.0]).unwrap();
        assert_eq!(p, [0.5, 0.5]);
    }

    #[test]
    fn outputs_are_a_distribution() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let model = MlpModel::init(&[2, 7, 2], &mut rng).unwrap();
        for _ in 0..20 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let p = model.forward(&x).unwrap();
            assert!(p[0] > 0.0 && p[1] > 0.0);
            assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hand_computed_two_one_two_network() {
        // weights: W1 = [[1, -1]], b1 = [0.5]; W2 = [[2], [-1]], b2 = [0.1, -0.2]
        let model = MlpModel {
            layer_sizes: vec![2, 1, 2],
            params: vec![1.0, -1.0, 0.5, 2.0, -1.0, 0.1, -0.2],
        };
        let x = [0.3, -0.4];
        let h = (0.3f64 - (-0.4) + 0.5).tanh();
        let z = [2.0 * h + 0.1, -h - 0.2];
        let e = [(z[0] - z[0].max(z[1])).exp(), (z[1] - z[0].max(z[1])).exp()];
        let expected = [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])];
        let p = model.forward(&x).unwrap();
        assert_abs_diff_eq!(p[0], expected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], expected[1], epsilon = 1e-12);
    }

    #[test]
    fn output_layer_gradient_is_probs_minus_onehot() {
        let model = MlpModel {
            layer_sizes: vec![2, 2, 2],
            params: vec![0.0; 2 * 2 + 2 + 2 * 2 + 2],
        };
        let grad = model.grad(&[1.0, -1.0], 1).unwrap();
        // with zero params the probabilities are (0.5, 0.5); the output bias
        // gradient components are exactly p - onehot
        let bias_grad = &grad[grad.len() - 2..];
        assert_abs_diff_eq!(bias_grad[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(bias_grad[1], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for sizes in [vec![2, 7, 2], vec![5, 3, 2], vec![4, 2]] {
            let mut model = MlpModel::init(&sizes, &mut rng).unwrap();
            for b in 0..model.params.len() {
                model.params[b] += rng.gen_range(-0.3..0.3);
            }
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for label in 0..2 {
                let grad = model.grad(&x, label).unwrap();
                assert_eq!(grad.len(), model.param_count());
                let h = 1e-6;
                let mut params = model.params.clone();
                for j in 0..params.len() {
                    let orig = params[j];
                    params[j] = orig + h;
                    let plus = model.loss_with(&params, &x, label).unwrap();
                    params[j] = orig - h;
                    let minus = model.loss_with(&params, &x, label).unwrap();
                    params[j] = orig;
                    let numeric = (plus - minus) / (2.0 * h);
                    let tol = 1e-7f64.max(1e-5 * numeric.abs());
                    assert!(
                        (grad[j] - numeric).abs() < tol,
                        "component {j}: {} vs {numeric}",
                        grad[j]
                    );
                }
            }
        }
    }

    #[test]
    fn forward_rejects_bad_input_sizes() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let model = MlpModel::init(&[2, 7, 2], &mut rng).unwrap();
        assert!(matches!(
            model.forward(&[1.0]).unwrap_err(),
            MlpError::InputSize {
                got: 1,
                expected: 2
            }
        ));
    }
}
