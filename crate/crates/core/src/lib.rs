//! Differentially private training of variational quantum classifiers.
//!
//! The crate bundles a dense state-vector simulator, the two quantum
//! classifier architectures it drives (a 2-qubit chain for planar data and a
//! 10-qubit amplitude-encoded chain for binary image data), a classical MLP
//! baseline, a DP-RMSprop optimizer (per-microbatch clipping plus Gaussian
//! noise), and a Renyi-DP accountant that converts the training schedule into
//! an (epsilon, delta) guarantee. The [`train`] module ties these together
//! into reproducible training runs; the `dpqml` binary exposes them on the
//! command line.
//!
//! Per-example gradient evaluation is data parallel. With the default
//! `parallel` feature the crate fans work out over a rayon pool (sized via
//! `RAYON_NUM_THREADS`); without it every loop runs sequentially. Results are
//! bit-identical across thread counts because reductions always happen in
//! example-index order.

pub mod accountant;
pub mod circuits;
pub mod data;
pub mod encoding;
pub mod mlp;
pub mod optim;
pub mod par;
pub mod rng;
pub mod simulator;
pub mod train;
