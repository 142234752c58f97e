//! Renyi-DP accounting for subsampled-Gaussian training.
//!
//! Per-order, per-step Renyi divergences of the sampled Gaussian mechanism
//! compose additively over steps and convert to an (epsilon, delta) guarantee
//! by minimizing `rdp(alpha) + ln(1/delta)/(alpha - 1)` over the order grid.
//!
//! The per-step value at sampling rate q and noise sigma is the order-alpha
//! divergence between `N(0, sigma^2)` and the mixture
//! `(1-q) N(0, sigma^2) + q N(1, sigma^2)`. At q = 1 this is exactly
//! `alpha / (2 sigma^2)`. For integer orders it has a closed binomial form,
//! evaluated here in log space; non-integer orders fall back to direct
//! numerical integration of the divergence.

use log::warn;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AccountantError {
    #[error("sampling rate {0} outside (0, 1]")]
    BadSamplingRate(f64),
    #[error("sigma must be nonnegative and finite, got {0}")]
    BadSigma(f64),
    #[error("steps must be positive")]
    ZeroSteps,
    #[error("delta {0} outside (0, 1)")]
    BadDelta(f64),
    #[error("orders must be nonempty and all greater than 1")]
    BadOrders,
    #[error("rdp curve has {curve} entries but there are {orders} orders")]
    CurveMismatch { curve: usize, orders: usize },
    #[error("batch size {batch} exceeds training set size {n}")]
    BatchTooLarge { batch: usize, n: usize },
}

/// Inputs of one accounting request.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountantQuery {
    pub sampling_rate: f64,
    pub sigma: f64,
    pub steps: u64,
    pub delta: f64,
    pub orders: Vec<f64>,
}

impl AccountantQuery {
    pub fn evaluate(&self) -> Result<AccountantResult, AccountantError> {
        let rdp = rdp_sampled_gaussian(self.sampling_rate, self.sigma, self.steps, &self.orders)?;
        rdp_to_dp(&rdp, &self.orders, self.delta)
    }
}

/// Epsilon, the order achieving it, and the full total-RDP curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountantResult {
    pub epsilon: f64,
    pub best_order: f64,
    pub rdp_curve: Vec<f64>,
}

/// Quarter-integer orders up to 64, then integers up to 256.
pub fn default_orders() -> Vec<f64> {
    let mut orders: Vec<f64> = (5..=256).map(|i| i as f64 * 0.25).collect();
    orders.extend((65..=256).map(|i| i as f64));
    orders
}

fn check_orders(orders: &[f64]) -> Result<(), AccountantError> {
    if orders.is_empty() || orders.iter().any(|&a| !a.is_finite() || a <= 1.0) {
        return Err(AccountantError::BadOrders);
    }
    Ok(())
}

/// Total RDP after `steps` compositions of the sampled Gaussian mechanism,
/// one value per order. `sigma = 0` yields infinite values (no privacy).
pub fn rdp_sampled_gaussian(
    q: f64,
    sigma: f64,
    steps: u64,
    orders: &[f64],
) -> Result<Vec<f64>, AccountantError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(AccountantError::BadSamplingRate(q));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(AccountantError::BadSigma(sigma));
    }
    if steps == 0 {
        return Err(AccountantError::ZeroSteps);
    }
    check_orders(orders)?;

    if sigma == 0.0 {
        return Ok(vec![f64::INFINITY; orders.len()]);
    }

    let per_step: Vec<f64> = orders
        .iter()
        .map(|&alpha| {
            if q == 1.0 {
                alpha / (2.0 * sigma * sigma)
            } else if alpha.fract() == 0.0 {
                rdp_step_binomial(q, sigma, alpha as u64)
            } else {
                rdp_step_integral(q, sigma, alpha)
            }
        })
        .collect();

    Ok(per_step.iter().map(|r| r * steps as f64).collect())
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Closed form for integer order:
/// `(1/(a-1)) ln sum_k C(a,k) (1-q)^(a-k) q^k e^(k(k-1)/(2 sigma^2))`,
/// summed in log space because the exponential factors overflow long before
/// the sum does.
fn rdp_step_binomial(q: f64, sigma: f64, alpha: u64) -> f64 {
    let a = alpha as usize;
    let mut ln_fact = vec![0.0f64; a + 1];
    for i in 1..=a {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let ln_q = q.ln();
    let ln_1mq = (1.0 - q).ln();
    let terms: Vec<f64> = (0..=a)
        .map(|k| {
            let ln_choose = ln_fact[a] - ln_fact[k] - ln_fact[a - k];
            let kf = k as f64;
            ln_choose
                + (a - k) as f64 * ln_1mq
                + kf * ln_q
                + kf * (kf - 1.0) / (2.0 * sigma * sigma)
        })
        .collect();
    log_sum_exp(&terms) / (alpha as f64 - 1.0)
}

/// `ln((1-q) + q e^u)` without overflow.
fn ln_mixture_ratio(q: f64, u: f64) -> f64 {
    let a = (1.0 - q).ln();
    let b = q.ln() + u;
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Direct quadrature of `E_{x~N(0,s^2)}[((1-q) + q e^{(2x-1)/(2s^2)})^a]` in
/// log space, refined by interval halving until the log-integral settles.
fn rdp_step_integral(q: f64, sigma: f64, alpha: f64) -> f64 {
    let log_integrand = |x: f64| -> f64 {
        let u = (2.0 * x - 1.0) / (2.0 * sigma * sigma);
        -x * x / (2.0 * sigma * sigma) + alpha * ln_mixture_ratio(q, u)
    };
    // The integrand peaks inside [0, alpha] and decays at least as fast as
    // the Gaussian factor outside it.
    let lo = -1.0 - 14.0 * sigma;
    let hi = alpha + 1.0 + 14.0 * sigma;

    let simpson_log = |n: usize| -> f64 {
        // n intervals (even); Simpson weights 1,4,2,...,4,1 applied in log space
        let h = (hi - lo) / n as f64;
        let mut terms = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let w: f64 = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            terms.push(log_integrand(lo + i as f64 * h) + w.ln());
        }
        log_sum_exp(&terms) + (h / 3.0).ln()
    };

    let norm = (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let mut n = 4096;
    let mut prev = simpson_log(n);
    loop {
        n *= 2;
        let next = simpson_log(n);
        let settled = (next - prev).abs() <= 1e-11 * prev.abs().max(1.0);
        prev = next;
        if settled || n >= (1 << 21) {
            break;
        }
    }
    ((prev - norm) / (alpha - 1.0)).max(0.0)
}

/// Convert a total-RDP curve into the tightest (epsilon, delta) guarantee on
/// the grid. A negative grid minimum is clamped to zero.
pub fn rdp_to_dp(
    rdp_curve: &[f64],
    orders: &[f64],
    delta: f64,
) -> Result<AccountantResult, AccountantError> {
    check_orders(orders)?;
    if rdp_curve.len() != orders.len() {
        return Err(AccountantError::CurveMismatch {
            curve: rdp_curve.len(),
            orders: orders.len(),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AccountantError::BadDelta(delta));
    }
    let ln_inv_delta = (1.0 / delta).ln();
    let mut epsilon = f64::INFINITY;
    let mut best_order = orders[0];
    for (&alpha, &rdp) in orders.iter().zip(rdp_curve) {
        let eps = rdp + ln_inv_delta / (alpha - 1.0);
        if eps < epsilon {
            epsilon = eps;
            best_order = alpha;
        }
    }
    if epsilon < 0.0 {
        warn!("rdp conversion produced negative epsilon {epsilon}; clamping to 0");
        epsilon = 0.0;
    }
    Ok(AccountantResult {
        epsilon,
        best_order,
        rdp_curve: rdp_curve.to_vec(),
    })
}

/// Closed-form delta bound of the plain Gaussian mechanism:
/// `0.8 exp(-(sigma epsilon)^2 / 2)`.
pub fn gaussian_delta_bound(sigma: f64, epsilon: f64) -> f64 {
    0.8 * (-(sigma * epsilon) * (sigma * epsilon) / 2.0).exp()
}

/// Account a full training run: `q = batch/n`, one mechanism invocation per
/// mini-batch step, partial trailing batches dropped.
pub fn training_epsilon(
    n_training: usize,
    batch_size: usize,
    epochs: usize,
    sigma: f64,
    delta: f64,
) -> Result<AccountantResult, AccountantError> {
    if batch_size == 0 || batch_size > n_training {
        return Err(AccountantError::BatchTooLarge {
            batch: batch_size,
            n: n_training,
        });
    }
    let q = batch_size as f64 / n_training as f64;
    let steps = (epochs * (n_training / batch_size)) as u64;
    if steps == 0 {
        return Err(AccountantError::ZeroSteps);
    }
    let orders = default_orders();
    let rdp = rdp_sampled_gaussian(q, sigma, steps, &orders)?;
    rdp_to_dp(&rdp, &orders, delta)
}
