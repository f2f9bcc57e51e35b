//! Empirical-Bayes Poisson-gamma comparator.
//!
//! Each layer `(k, t)` gets a `Gamma(a_kt, b_kt)` prior (shape, rate) with
//! `b_kt` a pseudo-population and `a_kt / b_kt` the layer's crude rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::dist::sample_gamma;
use crate::error::{Error, Result};
use crate::metrics::{coverage_of_cells, replicate_cells, CoverageReport, Replicates};
use crate::panel::CountPanel;
use crate::rng::{tag, RngStream};
use crate::summary::Interval;

pub const DEFAULT_PSEUDO_POPULATION: f64 = 1000.0;

/// Per-layer prior, indexed by canonical layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EbLayerParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Layers with no deaths, whose prior is improper (`a = 0`).
    pub improper: Vec<bool>,
}

pub fn eb_hyperparams(panel: &CountPanel, pseudo_population: f64) -> Result<EbLayerParams> {
    if !(pseudo_population > 0.0 && pseudo_population.is_finite()) {
        return Err(Error::InvalidParameter(format!("pseudo-population must be positive, got {pseudo_population}")));
    }
    let ix = panel.index();
    let b_len = ix.block_len();
    let mut a = Vec::with_capacity(b_len);
    for l in 0..b_len {
        let (k, t) = (l % ix.n_groups(), l / ix.n_groups());
        let (y, n) = panel.layer_totals(k, t);
        if n == 0 {
            return Err(Error::ZeroPopulationLayer { group: ix.group_labels()[k].clone(), time: ix.time_labels()[t].clone() });
        }
        a.push(y as f64 / n as f64 * pseudo_population);
    }
    let improper = a.iter().map(|&x| x == 0.0).collect();
    Ok(EbLayerParams { a, b: vec![pseudo_population; b_len], improper })
}

/// `Gamma(shape, rate)` posterior of one cell's rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPosterior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPosterior {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// Median and central 95% interval of the rate.
    pub fn interval(&self) -> Interval {
        let g = Gamma::new(self.shape, self.rate).expect("validated gamma posterior");
        Interval { median: g.inverse_cdf(0.5), lo: g.inverse_cdf(0.025), hi: g.inverse_cdf(0.975) }
    }
}

pub fn eb_posterior(panel: &CountPanel, params: &EbLayerParams) -> Result<Vec<GammaPosterior>> {
    let ix = panel.index();
    let b_len = ix.block_len();
    if params.a.len() != b_len || params.b.len() != b_len {
        return Err(Error::DimensionMismatch { what: "baseline layer parameters", expected: b_len, found: params.a.len() });
    }
    (0..ix.n_cells())
        .map(|c| {
            let l = c % b_len;
            let shape = params.a[l] + panel.deaths()[c] as f64;
            if shape <= 0.0 {
                let (i, k, t) = ix.coords(c);
                return Err(Error::ImproperPosterior {
                    region: ix.region_labels()[i].clone(),
                    group: ix.group_labels()[k].clone(),
                    time: ix.time_labels()[t].clone(),
                });
            }
            Ok(GammaPosterior { shape, rate: params.b[l] + panel.populations()[c] as f64 })
        })
        .collect()
}

/// `γ ~ Gamma(a+Y, b+n)` then `Y† ~ Pois(n γ)`, `n_rep` times per cell.
pub fn eb_predictive_replicates(
    panel: &CountPanel,
    posteriors: &[GammaPosterior],
    n_rep: usize,
    stream: RngStream,
) -> Result<Replicates> {
    let per_cell = draw(panel, posteriors, n_rep, stream)?;
    Ok(Replicates { n_cells: per_cell.len(), n_rep, counts: per_cell.concat() })
}

/// Replicates and their coverage in one pass.
pub fn eb_predictive_coverage(
    panel: &CountPanel,
    posteriors: &[GammaPosterior],
    n_rep: usize,
    stream: RngStream,
) -> Result<CoverageReport> {
    Ok(coverage_of_cells(panel, &draw(panel, posteriors, n_rep, stream)?))
}

fn draw(panel: &CountPanel, posteriors: &[GammaPosterior], n_rep: usize, stream: RngStream) -> Result<Vec<Vec<u64>>> {
    let n = panel.index().n_cells();
    if posteriors.len() != n {
        return Err(Error::DimensionMismatch { what: "baseline posteriors", expected: n, found: posteriors.len() });
    }
    replicate_cells(panel, n_rep, stream.child(tag::BASELINE), |c, rng| {
        sample_gamma(posteriors[c].shape, posteriors[c].rate, rng)
    })
}

/// Posterior rate intervals for every cell.
pub fn eb_rate_intervals(posteriors: &[GammaPosterior]) -> Vec<Interval> {
    posteriors.par_iter().map(GammaPosterior::interval).collect()
}
