//! Nonseparable multivariate space-time CAR (MSTCAR) models for areal
//! count panels.
//!
//! The crate is generic over the floating-point type through [`Real`];
//! the `*64` aliases below fix it to `f64`, which is what the command-line
//! tool uses.

pub mod baseline;
pub mod covariance;
pub mod dist;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod panel;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod simulate;
pub mod summary;

pub use covariance::{
    ar1_cholesky, ar1_correlation, assemble_sigma_eta, icar_pairwise_quadratic, Ar1Spec, EdgeScatter,
    SigmaEtaFactor, SpectralLatents,
};
pub use baseline::{eb_hyperparams, eb_posterior, eb_predictive_replicates, EbLayerParams, GammaPosterior};
pub use error::{Error, Result};
pub use graph::{graph_spectrum, load_adjacency, GraphSpectrum, SpatialGraph};
pub use linalg::Mat;
pub use metrics::{
    coverage_assess, national_rates, percent_decline, predictive_replicates, rates_from_store, sigma_eta_trajectories,
    spy, spy_posterior, CoverageReport, RatePanelDraws, SpyResult,
};
pub use panel::{load_count_panel, CountPanel, PanelIndex};
pub use rng::RngStream;
pub use sampler::{run_chain, Chain, ChainConfig, Dims};
pub use scalar::Real;
pub use simulate::{simulate_panel, PopulationSpec, SimTruth};

pub type Mat64 = Mat<f64>;
pub type SigmaEtaFactor64 = SigmaEtaFactor<f64>;
pub type GraphSpectrum64 = GraphSpectrum<f64>;
pub type ModelState64 = sampler::ModelState<f64>;
pub type HyperParams64 = sampler::HyperParams<f64>;
pub type SampleStore64 = sampler::SampleStore<f64>;
