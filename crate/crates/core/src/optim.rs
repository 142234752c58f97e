//! Differentially private RMSprop.
//!
//! A mini-batch is split into micro-batches. Each micro-batch's mean loss
//! gradient is L2-clipped to `clip_s`, the clipped gradients are summed, one
//! Gaussian noise vector with per-coordinate standard deviation
//! `noise_multiplier * clip_s` is added to the sum, and the total is scaled
//! by micro/mini batch size ratio before the RMSprop update. Setting
//! `noise_multiplier = 0`, `clip_s = inf`, and one micro-batch per mini-batch
//! turns the whole mechanism into plain mini-batch RMSprop, bit for bit.
//!
//! Micro-batch gradients fan out to the worker pool; clipping, accumulation,
//! noise, and the optimizer step run serially in a fixed order so a run is
//! reproducible for a given noise stream.

use crate::par;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("invalid privacy config: {0}")]
    InvalidConfig(String),
    #[error("mini-batch of {batch} examples is not divisible into micro-batches of {micro}")]
    MicrobatchMismatch { batch: usize, micro: usize },
    #[error("no gradients to accumulate")]
    EmptyAccumulation,
    #[error("gradient length {got} does not match parameter count {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Clipping bound, noise level, micro-batch size, and the delta the run is
/// accounted at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    /// L2 bound applied to each micro-batch gradient.
    pub clip_s: f64,
    /// Noise standard deviation in units of `clip_s`.
    pub noise_multiplier: f64,
    pub microbatch_size: usize,
    pub delta: f64,
}

impl PrivacyConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.clip_s.is_nan() || self.clip_s <= 0.0 {
            return Err(OptimError::InvalidConfig(format!(
                "clip_s must be positive, got {}",
                self.clip_s
            )));
        }
        if self.noise_multiplier.is_nan() || self.noise_multiplier < 0.0 {
            return Err(OptimError::InvalidConfig(format!(
                "noise_multiplier must be nonnegative, got {}",
                self.noise_multiplier
            )));
        }
        if self.noise_multiplier > 0.0 && !self.clip_s.is_finite() {
            return Err(OptimError::InvalidConfig(
                "clip_s must be finite when noise is added".into(),
            ));
        }
        if self.microbatch_size == 0 {
            return Err(OptimError::InvalidConfig("microbatch_size is zero".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(OptimError::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Degenerate config that disables every DP mechanism for a mini-batch of
    /// the given size.
    pub fn non_private(batch_size: usize) -> Self {
        Self {
            clip_s: f64::INFINITY,
            noise_multiplier: 0.0,
            microbatch_size: batch_size.max(1),
            delta: 1e-5,
        }
    }
}

/// RMSprop with a momentum buffer on the adapted gradient.
///
/// The squared-gradient average starts at the first observed `g^2` rather
/// than zero; the momentum buffer starts at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmspropState {
    sq_avg: Option<Vec<f64>>,
    momentum_buf: Vec<f64>,
    pub lr: f64,
    pub alpha: f64,
    pub momentum: f64,
    pub eps: f64,
}

impl RmspropState {
    pub fn new(n_params: usize, lr: f64, alpha: f64, momentum: f64, eps: f64) -> Self {
        Self {
            sq_avg: None,
            momentum_buf: vec![0.0; n_params],
            lr,
            alpha,
            momentum,
            eps,
        }
    }

    pub fn sq_avg(&self) -> Option<&[f64]> {
        self.sq_avg.as_deref()
    }

    /// One update: `sq <- alpha*sq + (1-alpha)*g^2`,
    /// `buf <- mu*buf + g/(sqrt(sq)+eps)`, `theta <- theta - lr*buf`.
    pub fn step(&mut self, theta: &mut [f64], g: &[f64]) -> Result<(), OptimError> {
        if theta.len() != self.momentum_buf.len() || g.len() != self.momentum_buf.len() {
            return Err(OptimError::LengthMismatch {
                got: g.len(),
                expected: self.momentum_buf.len(),
            });
        }
        match &mut self.sq_avg {
            None => {
                self.sq_avg = Some(g.iter().map(|gi| gi * gi).collect());
            }
            Some(sq) => {
                for (s, gi) in sq.iter_mut().zip(g) {
                    *s = self.alpha * *s + (1.0 - self.alpha) * gi * gi;
                }
            }
        }
        let sq = self.sq_avg.as_ref().unwrap();
        for i in 0..theta.len() {
            self.momentum_buf[i] =
                self.momentum * self.momentum_buf[i] + g[i] / (sq[i].sqrt() + self.eps);
            theta[i] -= self.lr * self.momentum_buf[i];
        }
        Ok(())
    }
}

/// Scale `g` by `min(clip_s / (||g|| + 1e-6), 1)` so its norm never exceeds
/// the bound.
pub fn clip_gradient(g: &[f64], clip_s: f64) -> Vec<f64> {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = (clip_s / (norm + 1e-6)).min(1.0);
    g.iter().map(|v| v * scale).collect()
}

/// Sum clipped micro-batch gradients, add one Gaussian noise vector with
/// per-coordinate std `noise_multiplier * clip_s`, and scale the result by
/// `microbatch_size / minibatch_n`.
pub fn accumulate_and_noise<R: Rng + ?Sized>(
    clipped: &[Vec<f64>],
    cfg: &PrivacyConfig,
    minibatch_n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, OptimError> {
    let first = clipped.first().ok_or(OptimError::EmptyAccumulation)?;
    let dim = first.len();
    let mut acc = vec![0.0; dim];
    for g in clipped {
        if g.len() != dim {
            return Err(OptimError::LengthMismatch {
                got: g.len(),
                expected: dim,
            });
        }
        for (a, v) in acc.iter_mut().zip(g) {
            *a += v;
        }
    }
    if cfg.noise_multiplier > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_multiplier * cfg.clip_s)
            .map_err(|e| OptimError::InvalidConfig(e.to_string()))?;
        for a in &mut acc {
            *a += rng.sample(noise);
        }
    }
    let scale = cfg.microbatch_size as f64 / minibatch_n as f64;
    for a in &mut acc {
        *a *= scale;
    }
    Ok(acc)
}

/// One private mini-batch step: per-micro-batch mean gradients (computed in
/// parallel), clip, accumulate with noise, RMSprop update on `theta`.
///
/// `grad_fn(theta, example)` must return the loss gradient of a single
/// example; micro-batch gradients are its mean over the micro-batch in index
/// order.
pub fn dp_minibatch_update<E, F, R>(
    theta: &mut [f64],
    batch: &[E],
    grad_fn: &F,
    cfg: &PrivacyConfig,
    opt: &mut RmspropState,
    rng: &mut R,
) -> Result<(), OptimError>
where
    E: Sync,
    F: Fn(&[f64], &E) -> Vec<f64> + Sync,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if batch.is_empty() {
        return Err(OptimError::EmptyAccumulation);
    }
    if !batch.len().is_multiple_of(cfg.microbatch_size) {
        return Err(OptimError::MicrobatchMismatch {
            batch: batch.len(),
            micro: cfg.microbatch_size,
        });
    }

    let params: &[f64] = theta;
    let per_example = par::map_slice(batch, |ex| grad_fn(params, ex));
    let dim = theta.len();
    for g in &per_example {
        if g.len() != dim {
            return Err(OptimError::LengthMismatch {
                got: g.len(),
                expected: dim,
            });
        }
    }

    let m = cfg.microbatch_size;
    let clipped: Vec<Vec<f64>> = per_example
        .chunks(m)
        .map(|chunk| {
            let mut mean = vec![0.0; dim];
            for g in chunk {
                for (a, v) in mean.iter_mut().zip(g) {
                    *a += v;
                }
            }
            for a in &mut mean {
                *a /= m as f64;
            }
            clip_gradient(&mean, cfg.clip_s)
        })
        .collect();

    let effective = accumulate_and_noise(&clipped, cfg, batch.len(), rng)?;
    opt.step(theta, &effective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn clip_rescales_only_long_gradients() {
        let g = vec![2.0, 0.0];
        let clipped = clip_gradient(&g, 1.0);
        let norm: f64 = clipped.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1.0 && norm > 1.0 - 1e-5);

        let short = vec![0.3, 0.4];
        assert_eq!(clip_gradient(&short, 1.0), short);

        let g = vec![3.0, 4.0];
        let clipped = clip_gradient(&g, 1.0);
        assert_abs_diff_eq!(clipped[0], 3.0 / 5.000001, epsilon = 1e-12);
        assert_abs_diff_eq!(clipped[1], 4.0 / 5.000001, epsilon = 1e-12);
    }

    #[test]
    fn post_clip_norm_is_bounded_for_arbitrary_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..200 {
            let g: Vec<f64> = (0..8).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let s = rng.gen_range(0.01..5.0);
            let norm: f64 = clip_gradient(&g, s)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            assert!(norm <= s + 1e-9);
        }
    }

    #[test]
    fn accumulation_without_noise_averages() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let g = vec![0.5, -0.25, 0.125];
        let cfg = PrivacyConfig {
            clip_s: 1.0,
            noise_multiplier: 0.0,
            microbatch_size: 2,
            delta: 1e-5,
        };
        // two identical micro-batch gradients, m/n = 1/2 -> the average is g
        let out = accumulate_and_noise(&[g.clone(), g.clone()], &cfg, 4, &mut rng).unwrap();
        for (o, e) in out.iter().zip(&g) {
            assert_abs_diff_eq!(o, e, epsilon = 1e-15);
        }

        assert_eq!(
            accumulate_and_noise(&[], &cfg, 4, &mut rng).unwrap_err(),
            OptimError::EmptyAccumulation
        );
    }

    #[test]
    fn noise_statistics_match_the_mechanism() {
        // zero clipped gradients: the output is pure noise with
        // std = sigma * S * m/n per coordinate
        let dim = 100_000;
        let cfg = PrivacyConfig {
            clip_s: 1.0,
            noise_multiplier: 1.0,
            microbatch_size: 1,
            delta: 1e-5,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let zeros = vec![vec![0.0; dim]];
        let out = accumulate_and_noise(&zeros, &cfg, 10, &mut rng).unwrap();
        let mean: f64 = out.iter().sum::<f64>() / dim as f64;
        let var: f64 = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
        let expected_std = 1.0 * 1.0 * (1.0 / 10.0);
        assert!(mean.abs() < 4.0 * expected_std / (dim as f64).sqrt() * 10.0);
        assert!((var.sqrt() - expected_std).abs() / expected_std < 0.05);
    }

    #[test]
    fn rmsprop_first_step_uses_observed_square() {
        let mut opt = RmspropState::new(1, 0.05, 0.9, 0.0, 1e-8);
        let mut theta = vec![1.0];
        opt.step(&mut theta, &[1.0]).unwrap();
        assert_abs_diff_eq!(opt.sq_avg().unwrap()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(theta[0], 1.0 - 0.05 / (1.0 + 1e-8), epsilon = 1e-15);
    }

    #[test]
    fn rmsprop_zero_gradient_keeps_theta() {
        let mut opt = RmspropState::new(2, 0.05, 0.9, 0.0, 1e-8);
        let mut theta = vec![0.25, -0.5];
        opt.step(&mut theta, &[0.0, 0.0]).unwrap();
        assert_eq!(theta, vec![0.25, -0.5]);
    }

    #[test]
    fn momentum_compounds_identical_gradients() {
        let mut opt = RmspropState::new(1, 1.0, 0.9, 0.5, 1e-8);
        let mut theta = vec![0.0];
        opt.step(&mut theta, &[1.0]).unwrap();
        let first_step = -theta[0];
        let before = theta[0];
        opt.step(&mut theta, &[1.0]).unwrap();
        let second_step = before - theta[0];
        // sq_avg stays at 1 for identical unit gradients, so the buffer grows
        // by exactly the momentum factor: 1.5x the first step.
        assert_abs_diff_eq!(second_step, 1.5 * first_step, epsilon = 1e-12);
    }

    #[test]
    fn rmsprop_matches_plain_transcription_without_momentum() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let n = 6;
        let mut opt = RmspropState::new(n, 0.05, 0.9, 0.0, 1e-8);
        let mut theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut reference = theta.clone();
        let mut sq: Vec<f64> = vec![0.0; n];
        for step in 0..25 {
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            opt.step(&mut theta, &g).unwrap();
            for i in 0..n {
                sq[i] = if step == 0 {
                    g[i] * g[i]
                } else {
                    0.9 * sq[i] + 0.1 * g[i] * g[i]
                };
                reference[i] -= 0.05 / (sq[i].sqrt() + 1e-8) * g[i];
            }
            for i in 0..n {
                assert_abs_diff_eq!(theta[i], reference[i], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rmsprop_rejects_mismatched_lengths() {
        let mut opt = RmspropState::new(2, 0.05, 0.9, 0.0, 1e-8);
        let mut theta = vec![0.0, 0.0];
        assert!(matches!(
            opt.step(&mut theta, &[1.0]),
            Err(OptimError::LengthMismatch {
                got: 1,
                expected: 2
            })
        ));
    }

    #[test]
    fn degenerate_config_reproduces_plain_rmsprop() {
        // sigma = 0, S = inf, one micro-batch per mini-batch: identical to an
        // independently written mini-batch RMSprop loop, bit for bit.
        let batch: Vec<(f64, f64)> = vec![(1.0, 0.5), (-0.5, 2.0), (2.0, -1.0), (0.0, 0.25)];
        let grad_fn =
            |theta: &[f64], ex: &(f64, f64)| vec![theta[0] * ex.0 + ex.1, theta[1] * ex.1 - ex.0];

        let cfg = PrivacyConfig::non_private(batch.len());
        let mut theta = vec![0.3, -0.8];
        let mut opt = RmspropState::new(2, 0.05, 0.9, 0.5, 1e-8);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            dp_minibatch_update(&mut theta, &batch, &grad_fn, &cfg, &mut opt, &mut rng).unwrap();
        }

        let mut reference = vec![0.3, -0.8];
        let mut plain = RmspropState::new(2, 0.05, 0.9, 0.5, 1e-8);
        for _ in 0..10 {
            let mut mean = vec![0.0, 0.0];
            for ex in &batch {
                let g = grad_fn(&reference, ex);
                mean[0] += g[0];
                mean[1] += g[1];
            }
            mean[0] /= batch.len() as f64;
            mean[1] /= batch.len() as f64;
            plain.step(&mut reference, &mean).unwrap();
        }
        assert_eq!(theta, reference);
    }

    #[test]
    fn per_example_clipping_invokes_grad_fn_once_per_example() {
        let calls = AtomicUsize::new(0);
        let batch: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let grad_fn = |_: &[f64], ex: &f64| {
            calls.fetch_add(1, Ordering::SeqCst);
            vec![*ex, -*ex]
        };
        let cfg = PrivacyConfig {
            clip_s: 1.0,
            noise_multiplier: 0.0,
            microbatch_size: 1,
            delta: 1e-5,
        };
        let mut theta = vec![0.0, 0.0];
        let mut opt = RmspropState::new(2, 0.05, 0.9, 0.5, 1e-8);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        dp_minibatch_update(&mut theta, &batch, &grad_fn, &cfg, &mut opt, &mut rng).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 32);
    }

    #[test]
    fn swapping_one_example_moves_the_accumulation_by_at_most_2s_over_n() {
        // pre-noise sensitivity bound, checked on an adversarial pair
        let cfg = PrivacyConfig {
            clip_s: 1.0,
            noise_multiplier: 0.0,
            microbatch_size: 1,
            delta: 1e-5,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let batch_a: Vec<f64> = vec![100.0, -3.0, 0.5, 7.0];
        let mut batch_b = batch_a.clone();
        batch_b[0] = -100.0;
        let grad_fn = |_: &[f64], ex: &f64| vec![*ex, ex * 2.0, -ex];

        let accumulate = |batch: &[f64], rng: &mut ChaCha12Rng| {
            let clipped: Vec<Vec<f64>> = batch
                .iter()
                .map(|ex| clip_gradient(&grad_fn(&[], ex), cfg.clip_s))
                .collect();
            accumulate_and_noise(&clipped, &cfg, batch.len(), rng).unwrap()
        };
        let a = accumulate(&batch_a, &mut rng);
        let b = accumulate(&batch_b, &mut rng);
        let dist: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let bound = 2.0 * cfg.clip_s * (cfg.microbatch_size as f64 / batch_a.len() as f64);
        assert!(dist <= bound + 1e-12, "sensitivity {dist} exceeds {bound}");
    }

    #[test]
    fn microbatch_size_must_divide_batch() {
        let cfg = PrivacyConfig {
            clip_s: 1.0,
            noise_multiplier: 0.0,
            microbatch_size: 3,
            delta: 1e-5,
        };
        let mut theta = vec![0.0];
        let mut opt = RmspropState::new(1, 0.05, 0.9, 0.0, 1e-8);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let batch = vec![1.0, 2.0, 3.0, 4.0];
        let err = dp_minibatch_update(
            &mut theta,
            &batch,
            &|_: &[f64], ex: &f64| vec![*ex],
            &cfg,
            &mut opt,
            &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, OptimError::MicrobatchMismatch { batch: 4, micro: 3 });
    }
}
