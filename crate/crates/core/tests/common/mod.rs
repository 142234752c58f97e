//! Shared test oracles, all deliberately independent of the library's
//! implementation paths: dense-matrix circuit simulation built from
//! Kronecker products, an IDX fixture writer with a synthetic digit
//! generator, and a standalone quadrature for Renyi divergences.

#![allow(dead_code)]

use num_complex::Complex64;

pub type Matrix = Vec<Vec<Complex64>>;

fn zeros(n: usize) -> Matrix {
    vec![vec![Complex64::new(0.0, 0.0); n]; n]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = zeros(ra * rb);
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn ry_matrix(angle: f64) -> Matrix {
    let (s, c) = (angle / 2.0).sin_cos();
    vec![
        vec![Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        vec![Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz_matrix(angle: f64) -> Matrix {
    vec![
        vec![
            Complex64::from_polar(1.0, -angle / 2.0),
            Complex64::new(0.0, 0.0),
        ],
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::from_polar(1.0, angle / 2.0),
        ],
    ]
}

/// Euler rotation as an explicit three-matrix product, not the closed form.
pub fn rot_matrix(phi: f64, theta: f64, omega: f64) -> Matrix {
    matmul(
        &rz_matrix(omega),
        &matmul(&ry_matrix(theta), &rz_matrix(phi)),
    )
}

/// Embed a single-qubit gate on `wire` of an n-qubit register as the full
/// 2^n x 2^n operator via Kronecker products (qubit 0 is the leftmost factor).
pub fn embed_single(n_qubits: usize, wire: usize, gate: &Matrix) -> Matrix {
    let mut full = if wire == 0 { gate.clone() } else { identity(2) };
    for w in 1..n_qubits {
        let factor = if w == wire { gate.clone() } else { identity(2) };
        full = kron(&full, &factor);
    }
    full
}

/// Dense CNOT permutation matrix, qubit 0 as the most significant bit.
pub fn cnot_matrix(n_qubits: usize, control: usize, target: usize) -> Matrix {
    let dim = 1 << n_qubits;
    let cbit = 1 << (n_qubits - 1 - control);
    let tbit = 1 << (n_qubits - 1 - target);
    let mut m = zeros(dim);
    // the permutation is an involution, so row j carries a 1 in column perm(j)
    for (j, row) in m.iter_mut().enumerate() {
        let i = if j & cbit != 0 { j ^ tbit } else { j };
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

/// `<Z>` on one wire computed directly from probabilities.
pub fn expectation_z_dense(n_qubits: usize, wire: usize, state: &[Complex64]) -> f64 {
    let bit = 1 << (n_qubits - 1 - wire);
    state
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let sign = if i & bit == 0 { 1.0 } else { -1.0 };
            sign * a.norm_sqr()
        })
        .sum()
}

pub fn zero_state_dense(n_qubits: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    v[0] = Complex64::new(1.0, 0.0);
    v
}

pub mod idx {
    //! Raw IDX fixture writing and a procedural stand-in for the 0/1 digit
    //! images: class 0 is an elliptical ring, class 1 a near-vertical stroke,
    //! both with jittered geometry, intensity, and background noise.

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::fs;
    use std::io::Write;
    use std::path::Path;

    pub fn write_idx_pair(
        images_path: &Path,
        labels_path: &Path,
        images: &[[u8; 784]],
        labels: &[u8],
    ) {
        let mut f = fs::File::create(images_path).unwrap();
        f.write_all(&2051u32.to_be_bytes()).unwrap();
        f.write_all(&(images.len() as u32).to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        f.write_all(&28u32.to_be_bytes()).unwrap();
        for img in images {
            f.write_all(img).unwrap();
        }
        let mut f = fs::File::create(labels_path).unwrap();
        f.write_all(&2049u32.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
    }

    fn draw_ring(rng: &mut ChaCha12Rng) -> [u8; 784] {
        let mut img = [0u8; 784];
        let cx = rng.gen_range(12.0..16.0);
        let cy = rng.gen_range(12.0..16.0);
        let rx = rng.gen_range(5.5..8.5);
        let ry = rng.gen_range(6.5..9.5);
        let thickness = rng.gen_range(0.16..0.30);
        let intensity = rng.gen_range(170.0..255.0);
        for row in 0..28 {
            for col in 0..28 {
                let dx = (col as f64 - cx) / rx;
                let dy = (row as f64 - cy) / ry;
                let r = (dx * dx + dy * dy).sqrt();
                let d = (r - 1.0).abs();
                if d < thickness {
                    let v = intensity * (1.0 - d / thickness) + rng.gen_range(-15.0..15.0);
                    img[row * 28 + col] = v.clamp(0.0, 255.0) as u8;
                }
            }
        }
        img
    }

    fn draw_stroke(rng: &mut ChaCha12Rng) -> [u8; 784] {
        let mut img = [0u8; 784];
        let center = rng.gen_range(11.0..17.0);
        let slant = rng.gen_range(-0.18..0.18);
        let half_width = rng.gen_range(0.8..1.8);
        let top = rng.gen_range(3..7);
        let bottom = rng.gen_range(21..26);
        let intensity = rng.gen_range(170.0..255.0);
        for row in top..bottom {
            let mid = center + slant * (row as f64 - 14.0);
            for col in 0..28 {
                let d = (col as f64 - mid).abs();
                if d < half_width + 1.0 {
                    let v = intensity * (1.0 - (d / (half_width + 1.0)).powi(2))
                        + rng.gen_range(-15.0..15.0);
                    if v > 0.0 {
                        img[row * 28 + col] = v.clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
        img
    }

    fn sprinkle_noise(img: &mut [u8; 784], rng: &mut ChaCha12Rng) {
        for _ in 0..rng.gen_range(5..20) {
            let p = rng.gen_range(0..784);
            img[p] = img[p].saturating_add(rng.gen_range(1..40));
        }
    }

    /// `n` images alternating ring (label 0) and stroke (label 1).
    pub fn synthetic_digits(n: usize, seed: u64) -> (Vec<[u8; 784]>, Vec<u8>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut images = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as u8;
            let mut img = if label == 0 {
                draw_ring(&mut rng)
            } else {
                draw_stroke(&mut rng)
            };
            sprinkle_noise(&mut img, &mut rng);
            images.push(img);
            labels.push(label);
        }
        (images, labels)
    }

    /// 4x4 average pooling of a zero-padded 32x32 version of the image,
    /// giving 64 features for the reduced amplitude-encoded model.
    pub fn downsample_8x8(features: &[f64]) -> Vec<f64> {
        let mut padded = [0.0f64; 32 * 32];
        for row in 0..28 {
            for col in 0..28 {
                padded[(row + 2) * 32 + (col + 2)] = features[row * 28 + col];
            }
        }
        let mut out = vec![0.0; 64];
        for by in 0..8 {
            for bx in 0..8 {
                let mut sum = 0.0;
                for dy in 0..4 {
                    for dx in 0..4 {
                        sum += padded[(by * 4 + dy) * 32 + bx * 4 + dx];
                    }
                }
                out[by * 8 + bx] = sum / 16.0;
            }
        }
        out
    }
}

pub mod renyi {
    //! Standalone quadrature of the order-alpha Renyi divergence between the
    //! subsampling mixture `(1-q) N(0, s^2) + q N(1, s^2)` and `N(0, s^2)`,
    //! written as a plain trapezoid sum in log space on a fixed wide grid.

    fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
        let terms: Vec<f64> = terms.collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    /// One-step RDP by direct integration of
    /// `E_{x~N(0,s^2)}[((1-q) + q e^{(2x-1)/(2 s^2)})^alpha]`.
    pub fn rdp_by_quadrature(q: f64, sigma: f64, alpha: f64) -> f64 {
        assert!(q > 0.0 && q <= 1.0 && sigma > 0.0 && alpha > 1.0);
        let lo = -1.0 - 30.0 * sigma;
        let hi = alpha + 1.0 + 30.0 * sigma;
        let n = 2_000_000usize;
        let h = (hi - lo) / n as f64;
        let two_s2 = 2.0 * sigma * sigma;
        let log_ratio = |x: f64| -> f64 {
            // ln((1-q) + q e^u), branch on which term dominates
            let u = (2.0 * x - 1.0) / two_s2;
            if q == 1.0 {
                return u;
            }
            let a = (1.0 - q).ln();
            let b = q.ln() + u;
            if a >= b {
                a + (b - a).exp().ln_1p()
            } else {
                b + (a - b).exp().ln_1p()
            }
        };
        let log_f = |x: f64| -x * x / two_s2 + alpha * log_ratio(x);
        // trapezoid weights: endpoints count half
        let log_sum = log_sum_exp((0..=n).map(|i| {
            let x = lo + i as f64 * h;
            let w: f64 = if i == 0 || i == n { 0.5 } else { 1.0 };
            log_f(x) + w.ln()
        }));
        let log_norm = (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
        (log_sum + h.ln() - log_norm) / (alpha - 1.0)
    }
}
