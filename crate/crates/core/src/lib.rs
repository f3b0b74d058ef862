//! Lensless polarization imaging toolkit.
//!
//! Simulates spatio-polarimetrically multiplexed sensor measurements (a
//! diffuser PSF convolved per channel, a striped binary polarization mask)
//! and reconstructs multi-angle polarization stacks with FISTA or scaled
//! ADMM under a Haar-based anisotropic 3D total-variation prior, plus
//! polarimetric derivation (Stokes, DoLP, AoLP), PSNR/SSIM evaluation, and
//! homography-based alignment of reference images.

pub mod config;
pub mod error;
pub mod fft;
pub mod forward;
pub mod geom;
pub mod metrics;
pub mod png_io;
pub mod polarimetry;
pub mod prox;
pub mod ptf;
pub mod sim;
pub mod solver;
pub mod tensor;

pub use error::{PolarError, Result};
pub use forward::{adjoint_apply, build_dense_operator, estimate_lipschitz, forward_apply, ForwardOperator};
pub use prox::{fista_prox, haar_tv_prox, TvWeights};
pub use sim::{compute_rgb_guide, generate_stripe_mask, preprocess_raw, simulate_measurement, MaskSpec, SimConfig};
pub use solver::{admm_reconstruct, conjugate_gradient, fista_reconstruct, SolveReport, SolverConfig, SolverKind};
pub use tensor::{normalize_psf, Measurement, PolarizationMask, PolarizationStack, Psf};
