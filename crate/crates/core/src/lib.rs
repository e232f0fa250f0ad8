//! Discrete-time coined quantum walks on a ring with an absorbing sink.
//!
//! The walker enters at vertex `0`, the sink sits on the antipodal vertex `N`.
//! The crate covers the two-state and lazy (three-state) walks, the spectral
//! estimates of their decay rates, the localized eigenspace that traps part of
//! the lazy walker, and dynamical percolation of the ring edges both as Monte
//! Carlo realizations and as an exact random-unitary channel.

pub mod coin;
pub mod error;
pub mod linalg;
pub mod percolation;
pub mod ring;
pub mod spectral;
pub mod trapping;
pub mod walk;

pub use coin::{
    build_coin2, build_coin3, coin_eigenbasis, decompose_coin_state, CoinDecomposition,
    CoinEigenbasis, CoinOperator, CoinParams,
};
pub use error::{Error, Result};
pub use linalg::C64;
pub use ring::{EdgeConfig, RingConfig};
pub use walk::{build_evolution, evolve_survival, initial_state, EvolutionOperator, SurvivalSeries, WalkState};
pub use percolation::{
    averaged_survival, channel_step, channel_survival, config_probability, ensemble_survival,
    percolated_evolution, percolated_step, realization_survival, sample_config, DensityMatrix,
    PercolationChannel, PercolationMode, PercolationParams,
};
pub use spectral::{
    channel_decay_rate, dense_spectrum, fit_loglinear, norm_growth_radius, predict_decay_rate,
    DecayRate, FitAxis, FitWindow, LogLinearFit, NormGrowthOptions, SpectralEstimate, WalkMode,
};
pub use trapping::{
    common_eigenstate_check, efficiency_closed_form, efficiency_line_estimate,
    orthonormal_trapped_basis, stationary_states, transport_efficiency, trapped_basis,
    trapping_probability, EfficiencyReport, TrappedBasis,
};
