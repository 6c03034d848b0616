//! Distributed downlink beamforming for a two-layer airborne massive-MIMO
//! network: one HAPS above `B` hot-air-balloon base stations, each HAB
//! serving the mobile ground users of its own cluster.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: cluster layout, base-station poses, user mobility.
//! - [`channel`]: time-correlated Rician UPA channels and imperfect CSI.
//! - [`radio`]: SINR, rates, shared reward, power projection, ZF/MRT.
//! - [`neural`]: a small reverse-mode engine (conv2d, dense, ReLU,
//!   Gaussian heads) with Adam.
//! - [`agents`]: the HAB and HAPS stochastic actors, replay buffer,
//!   entropy-regularised loss, training and evaluation loops.
//! - [`harness`]: run configuration, sweeps, result emission and the CLI.

pub mod agents;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod neural;
pub mod radio;
pub mod scenario;
pub mod seed;
pub mod special;

pub use error::{Error, Result};

/// Complex sample type used for channels and beams.
pub type C64 = num_complex::Complex64;
