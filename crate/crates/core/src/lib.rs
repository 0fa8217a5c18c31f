//! Achievable-rate optimization for a two-stage MIMO link in which a source
//! reaches a destination through an intelligent reflecting surface (IRS) and a
//! half-duplex decode-and-forward relay.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: complex SVD, orthogonal complements and waterfilling.
//! * [`channel`]: geometric mmWave channel sampling for all six links.
//! * [`irs`]: reflection amplitude model, phase codebook, reflection matrices.
//! * [`precoding`]: effective channels, block diagonalization, stage-2 SVD.
//! * [`power`]: closed-form power allocation for both stages.
//! * [`optimizer`]: discrete genetic algorithm and an exhaustive oracle.
//! * [`schemes`]: the five compared transmission schemes.
//! * [`experiments`]: scenarios, Monte Carlo sweeps and CSV output.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod irs;
pub mod numerics;
pub mod optimizer;
pub mod power;
pub mod precoding;
pub mod schemes;
pub mod seeding;

pub use error::{Error, Result};
pub use numerics::ComplexMatrix;
