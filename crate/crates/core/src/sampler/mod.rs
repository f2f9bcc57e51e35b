//! Metropolis-within-Gibbs inference for the full hierarchical model
//!
//! ```text
//! Y_ikt | θ_ikt        ~ Pois(n_ikt exp θ_ikt)
//! θ_ikt | β, Z, τ_k²   ~ N(β_kt + Z_ikt, τ_k²)
//! Z | G_t, ρ           ~ MSTCAR(G_1, …, G_{N_t}, ρ)
//! G_t | G              ~ InvWish(G, ν)
//! G                    ~ Wish(G_0, ν_0)
//! ρ_k ~ Beta(a_ρ, b_ρ),  τ_k² ~ IG(a_τ, b_τ),  β_kt ~ N(0, V)
//! ```
//!
//! Each sweep runs θ → β → Z → τ² → G_t → G → ρ. Every random draw comes
//! from a stream keyed by `(iteration, update, index)`, so a chain is a pure
//! function of its seed whatever the number of worker threads.

mod chain;
mod checkpoint;
mod prior;
mod store;
mod updates;

pub use chain::{gibbs_sweep, run_chain, Chain, SweepOutcome};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use prior::sample_prior_state;
pub use store::{AcceptanceSummary, SampleStore, StoreMeta};
pub use updates::{
    adapt_proposals, adapt_scale, component_layer_means, rho_log_target, theta_log_target, update_beta,
    update_hyper_cov, update_rho, update_tau2, update_theta, update_year_covs, update_z, z_site_conditional,
    ZSiteConditional,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::panel::CountPanel;
use crate::scalar::Real;

/// Panel dimensions `(N_s, N_g, N_t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_regions: usize,
    pub n_groups: usize,
    pub n_times: usize,
}

impl Dims {
    pub fn new(n_regions: usize, n_groups: usize, n_times: usize) -> Self {
        Dims { n_regions, n_groups, n_times }
    }

    /// `N_g · N_t`.
    #[inline]
    pub fn block_len(&self) -> usize {
        self.n_groups * self.n_times
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_regions * self.block_len()
    }
}

/// Borrowed deaths and populations in canonical cell order.
#[derive(Clone, Copy, Debug)]
pub struct Counts<'a> {
    pub dims: Dims,
    pub deaths: &'a [u64],
    pub populations: &'a [u64],
}

impl<'a> Counts<'a> {
    pub fn new(dims: Dims, deaths: &'a [u64], populations: &'a [u64]) -> Result<Self> {
        for (what, v) in [("deaths", deaths), ("populations", populations)] {
            if v.len() != dims.n_cells() {
                return Err(Error::DimensionMismatch { what, expected: dims.n_cells(), found: v.len() });
            }
        }
        Ok(Counts { dims, deaths, populations })
    }

    pub fn from_panel(panel: &'a CountPanel) -> Self {
        let ix = panel.index();
        Counts {
            dims: Dims::new(ix.n_regions(), ix.n_groups(), ix.n_times()),
            deaths: panel.deaths(),
            populations: panel.populations(),
        }
    }
}

/// Prior hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams<T> {
    pub a_tau: T,
    pub b_tau: T,
    pub a_rho: T,
    pub b_rho: T,
    pub g0: Mat<T>,
    pub nu0: T,
    pub nu: T,
    pub beta_prior_variance: T,
}

impl<T: Real> HyperParams<T> {
    /// Weakly informative defaults for `n_groups` groups.
    pub fn default_for(n_groups: usize) -> Self {
        HyperParams {
            a_tau: T::lit(3.0),
            b_tau: T::lit(0.01),
            a_rho: T::lit(9.0),
            b_rho: T::one(),
            g0: Mat::scaled_identity(n_groups, T::lit(0.01)),
            nu0: T::from_count(n_groups),
            nu: T::from_count(n_groups + 2),
            beta_prior_variance: T::lit(1e4),
        }
    }

    pub fn validate(&self, n_groups: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("a_tau", self.a_tau),
            ("b_tau", self.b_tau),
            ("a_rho", self.a_rho),
            ("b_rho", self.b_rho),
            ("beta_prior_variance", self.beta_prior_variance),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let p = T::from_count(n_groups);
        if !(self.nu > p + T::one()) {
            return bad(format!("nu must exceed N_g + 1 = {}, got {}", n_groups + 1, self.nu));
        }
        if !(self.nu0 > p - T::one()) {
            return bad(format!("nu0 must exceed N_g − 1 = {}, got {}", n_groups as f64 - 1.0, self.nu0));
        }
        if self.g0.rows() != n_groups || self.g0.cols() != n_groups {
            return bad(format!("G0 must be {n_groups}×{n_groups}"));
        }
        self.g0.cholesky().map_err(|_| Error::Config("G0 must be positive definite".into()))?;
        Ok(())
    }

    /// `E[τ_k²]` under the prior (the mode when the mean does not exist).
    pub fn tau2_prior_center(&self) -> T {
        if self.a_tau > T::one() {
            self.b_tau / (self.a_tau - T::one())
        } else {
            self.b_tau / (self.a_tau + T::one())
        }
    }
}

/// Run-length, thinning, and proposal settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_iterations: u64,
    pub burn_in: u64,
    pub thin_theta: u64,
    pub seed: u64,
    /// Initial random-walk scale for every θ cell; `None` derives one per
    /// cell from its count and the initial τ².
    pub theta_scale: Option<f64>,
    /// Initial random-walk scale for `logit ρ_k`.
    pub rho_scale: f64,
    pub adaptation_window: u64,
    /// Scale multiplier applied at acceptance 1 (divisor at acceptance 0).
    pub adapt_factor: f64,
    pub epsilon_init: f64,
    /// Forces `ρ_k ≡ ρ` and `G_t ≡ G_c`.
    pub separable: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iterations: 2_000,
            burn_in: 1_000,
            thin_theta: 10,
            seed: 1,
            theta_scale: None,
            rho_scale: 0.5,
            adaptation_window: 50,
            adapt_factor: 1.5,
            epsilon_init: 0.0,
            separable: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.burn_in > self.n_iterations {
            return bad("burn_in must not exceed n_iterations");
        }
        if self.thin_theta == 0 {
            return bad("thin_theta must be at least 1");
        }
        if self.adaptation_window == 0 {
            return bad("adaptation_window must be at least 1");
        }
        if !(self.adapt_factor >= 1.0) {
            return bad("adapt_factor must be at least 1");
        }
        if !(self.rho_scale > 0.0) || self.theta_scale.is_some_and(|s| !(s > 0.0)) {
            return bad("proposal scales must be positive");
        }
        if !(self.epsilon_init >= 0.0) {
            return bad("epsilon_init must be nonnegative");
        }
        Ok(())
    }

    /// Whether the draw at 0-based iteration `it` is stored.
    pub fn keeps_theta(&self, it: u64) -> bool {
        it >= self.burn_in && (it + 1 - self.burn_in) % self.thin_theta == 0
    }
}

/// All unknowns of the model.
///
/// Per-layer quantities are indexed `t·N_g + k`; cells `i·N_gN_t + t·N_g + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState<T> {
    pub dims: Dims,
    pub beta: Vec<T>,
    pub z: Mat<T>,
    pub theta: Vec<T>,
    pub tau2: Vec<T>,
    pub rho: Vec<T>,
    pub year_covs: Vec<Mat<T>>,
    pub g: Mat<T>,
}

impl<T: Real> ModelState<T> {
    /// Linear predictor `β_kt + Z_ikt` of a cell.
    #[inline]
    pub fn mean(&self, cell: usize) -> T {
        let b = self.dims.block_len();
        let (i, l) = (cell / b, cell % b);
        self.beta[l] + self.z[(i, l)]
    }

    #[inline]
    pub fn tau2_of_cell(&self, cell: usize) -> T {
        self.tau2[cell % self.dims.n_groups]
    }
}

/// Random-walk proposal scales.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposals<T> {
    pub theta: Vec<T>,
    pub rho: Vec<T>,
}

/// Acceptance counts in the current adaptation window and overall.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tallies {
    pub window_theta: Vec<u32>,
    pub window_rho: Vec<u32>,
    pub window_len: u32,
    pub burn_theta: (u64, u64),
    pub post_theta: (u64, u64),
    pub post_rho: Vec<(u64, u64)>,
}

impl Tallies {
    pub fn new(n_cells: usize, n_rho: usize) -> Self {
        Tallies {
            window_theta: vec![0; n_cells],
            window_rho: vec![0; n_rho],
            window_len: 0,
            burn_theta: (0, 0),
            post_theta: (0, 0),
            post_rho: vec![(0, 0); n_rho],
        }
    }
}

/// Per-layer national crude rates `Σ_i Y_ikt / Σ_i n_ikt`.
pub fn national_crude_rates<T: Real>(counts: &Counts) -> Vec<Option<T>> {
    let b = counts.dims.block_len();
    let mut y = vec![0u64; b];
    let mut n = vec![0u64; b];
    for (c, (&yc, &nc)) in counts.deaths.iter().zip(counts.populations).enumerate() {
        y[c % b] += yc;
        n[c % b] += nc;
    }
    y.iter().zip(&n).map(|(&y, &n)| (n > 0).then(|| T::from_count(y as usize) / T::from_count(n as usize))).collect()
}

/// Initial state: crude log-rates for θ (national layer rate when
/// `Y ≤ ε`), `ρ_k = 0.9`, `Z = 0`, national log-rates for β, prior-centre
/// τ², and `G_t = G = 0.01·I`.
pub fn init_state<T: Real>(counts: &Counts, labels: Option<&crate::panel::PanelIndex>, cfg: &ChainConfig, hp: &HyperParams<T>) -> Result<ModelState<T>> {
    let d = counts.dims;
    let b = d.block_len();
    let rates = national_crude_rates::<T>(counts);
    let mut log_national = Vec::with_capacity(b);
    for (l, r) in rates.iter().enumerate() {
        let (k, t) = (l % d.n_groups, l / d.n_groups);
        let name = |axis: usize, ix: usize| -> String {
            match labels {
                Some(p) if axis == 0 => p.group_labels()[ix].clone(),
                Some(p) => p.time_labels()[ix].clone(),
                None => ix.to_string(),
            }
        };
        match r {
            Some(r) if *r > T::zero() => log_national.push(r.ln()),
            Some(_) => return Err(Error::ZeroNationalRate { group: name(0, k), time: name(1, t) }),
            None => return Err(Error::ZeroPopulationLayer { group: name(0, k), time: name(1, t) }),
        }
    }
    let eps = cfg.epsilon_init;
    let theta = (0..d.n_cells())
        .map(|c| {
            let (y, n) = (counts.deaths[c], counts.populations[c]);
            if (y as f64) > eps && n > 0 {
                T::lit((y as f64 / n as f64).ln())
            } else {
                log_national[c % b]
            }
        })
        .collect();
    let ng = d.n_groups;
    Ok(ModelState {
        dims: d,
        beta: log_national,
        z: Mat::zeros(d.n_regions, b),
        theta,
        tau2: vec![hp.tau2_prior_center(); ng],
        rho: vec![T::lit(0.9); ng],
        year_covs: vec![Mat::scaled_identity(ng, T::lit(0.01)); d.n_times],
        g: Mat::scaled_identity(ng, T::lit(0.01)),
    })
}

/// Initial proposal scales.
pub fn init_proposals<T: Real>(counts: &Counts, state: &ModelState<T>, cfg: &ChainConfig) -> Proposals<T> {
    let theta = (0..counts.dims.n_cells())
        .map(|c| match cfg.theta_scale {
            Some(s) => T::lit(s),
            None => {
                // 2.4 × Laplace standard deviation at the crude rate
                let prec = counts.deaths[c] as f64 + 1.0 / state.tau2_of_cell(c).as_f64();
                T::lit((2.4 / prec.sqrt()).min(1.0))
            }
        })
        .collect();
    let n_rho = if cfg.separable { 1 } else { counts.dims.n_groups };
    Proposals { theta, rho: vec![T::lit(cfg.rho_scale); n_rho] }
}
