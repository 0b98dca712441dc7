//! MMSE-based hybrid holographic beamforming for downlink sum-rate
//! maximization on a reconfigurable holographic surface.
//!
//! The base station mixes `D` user streams with a `K x D` digital precoder
//! `V`, and the surface radiates them through `W = diag(w) Phi`, where `Phi`
//! holds the fixed reference-wave phases from each of the `K` feeds to each of
//! the `M` elements and `w` are real amplitudes in `[0, 1]`. The optimizer
//! alternates closed-form updates of the MMSE combiners, the MSE weights, the
//! precoder and every holographic weight.

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod mse;
pub mod optimizer;
pub mod oracles;
pub mod seeds;
pub mod updates;

pub use channel::{generate_channels, ChannelSet};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use geometry::{build_geometry, build_phase_matrix, PhaseMatrix, RhsGeometry};
pub use mse::{BeamformingState, EffectiveGains};
pub use optimizer::{DigitalUpdate, HoloUpdate, InitMode, OptimizerSettings, RunTrace};
