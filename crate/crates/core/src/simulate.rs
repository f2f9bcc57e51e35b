//! Synthetic panels drawn from the MSTCAR generative model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::{sample_mstcar_prior, Ar1Spec, SigmaEtaFactor};
use crate::dist::{sample_normal, sample_poisson};
use crate::error::{Error, Result};
use crate::graph::{graph_spectrum, SpatialGraph};
use crate::linalg::Mat;
use crate::panel::{CountPanel, PanelIndex};
use crate::rng::{tag, RngStream};

/// True parameter values. `log_rates` holds `β` per canonical layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SimTruth {
    pub rho: Vec<f64>,
    pub year_covs: Vec<Mat<f64>>,
    pub tau2: Vec<f64>,
    pub log_rates: Vec<f64>,
}

impl SimTruth {
    /// Same `ρ`, `G`, `τ²` for every group and year; baseline log-rate
    /// `log_rate0 + slope·t` in every group.
    pub fn homogeneous(n_groups: usize, n_times: usize, rho: f64, g: Mat<f64>, tau2: f64, log_rate0: f64, slope: f64) -> Self {
        SimTruth {
            rho: vec![rho; n_groups],
            year_covs: vec![g; n_times],
            tau2: vec![tau2; n_groups],
            log_rates: (0..n_groups * n_times).map(|l| log_rate0 + slope * (l / n_groups) as f64).collect(),
        }
    }

    fn validate(&self, ng: usize, nt: usize) -> Result<()> {
        let check = |what: &'static str, expected: usize, found: usize| {
            if expected == found { Ok(()) } else { Err(Error::DimensionMismatch { what, expected, found }) }
        };
        check("true rho", ng, self.rho.len())?;
        check("true tau2", ng, self.tau2.len())?;
        check("true year covariances", nt, self.year_covs.len())?;
        check("true log-rates", ng * nt, self.log_rates.len())?;
        if self.tau2.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter("true tau2 must be nonnegative".into()));
        }
        if self.log_rates.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("true log-rates must be finite".into()));
        }
        Ok(())
    }
}

/// Populations drawn uniformly from `min..=max` per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub min: u64,
    pub max: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulated {
    pub panel: CountPanel,
    pub z: Mat<f64>,
    pub theta: Vec<f64>,
}

impl Simulated {
    /// True rates `exp(θ)` per cell.
    pub fn rates(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.exp()).collect()
    }
}

/// Draws `Z` from the MSTCAR prior, `θ = β + Z + ε` with `ε ~ N(0, τ_k²)`,
/// populations, and `Y ~ Pois(n e^θ)` capped at `n`.
pub fn simulate_panel(
    index: PanelIndex,
    graph: &SpatialGraph,
    truth: &SimTruth,
    pops: PopulationSpec,
    stream: RngStream,
) -> Result<Simulated> {
    let (ns, ng, nt) = (index.n_regions(), index.n_groups(), index.n_times());
    if graph.node_count() != ns {
        return Err(Error::DimensionMismatch { what: "graph nodes vs regions", expected: ns, found: graph.node_count() });
    }
    if pops.min > pops.max {
        return Err(Error::InvalidParameter(format!("population range {}..={} is empty", pops.min, pops.max)));
    }
    truth.validate(ng, nt)?;
    let f = SigmaEtaFactor::new(&Ar1Spec::new(truth.rho.clone(), nt)?, truth.year_covs.clone())?;
    let s = stream.child(tag::SIMULATE);
    let z = if ns > 1 {
        sample_mstcar_prior(&f, &graph_spectrum(graph)?, &mut s.child(0).rng())
    } else {
        Mat::zeros(1, ng * nt)
    };
    let b = ng * nt;
    let mut rng = s.child(1).rng();
    let mut theta = Vec::with_capacity(ns * b);
    let mut populations = Vec::with_capacity(ns * b);
    let mut deaths = Vec::with_capacity(ns * b);
    for c in 0..ns * b {
        let (i, l) = (c / b, c % b);
        let th = sample_normal(truth.log_rates[l] + z[(i, l)], truth.tau2[l % ng], &mut rng);
        let n = rng.random_range(pops.min..=pops.max);
        let y = sample_poisson(n as f64 * th.exp(), &mut rng)?.min(n);
        theta.push(th);
        populations.push(n);
        deaths.push(y);
    }
    Ok(Simulated { panel: CountPanel::new(index, deaths, populations)?, z, theta })
}
