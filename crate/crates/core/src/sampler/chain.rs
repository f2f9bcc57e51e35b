use std::path::Path;

use super::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use super::store::STORE_FORMAT;
use super::updates::{
    adapt_proposals, update_beta, update_hyper_cov, update_rho, update_tau2, update_theta, update_year_covs,
    update_z,
};
use super::{
    init_proposals, init_state, AcceptanceSummary, ChainConfig, Counts, HyperParams, ModelState, Proposals,
    SampleStore, StoreMeta, Tallies,
};
use crate::covariance::{Ar1Spec, EdgeScatter, SigmaEtaFactor};
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::panel::{CountPanel, PanelIndex};
use crate::rng::RngStream;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub theta_accepted: Vec<bool>,
    pub rho_accepted: Vec<bool>,
}

/// One full sweep θ → β → Z → τ² → G_t → G → ρ with the given proposal
/// scales. `stream` should already be keyed by the iteration.
pub fn gibbs_sweep<T: Real>(
    state: &mut ModelState<T>,
    counts: &Counts,
    graph: &SpatialGraph,
    hp: &HyperParams<T>,
    proposals: &Proposals<T>,
    separable: bool,
    stream: RngStream,
) -> Result<SweepOutcome> {
    let d = state.dims;
    let theta_accepted = update_theta(state, counts, &proposals.theta, stream);
    update_beta(state, hp, stream)?;
    let f = SigmaEtaFactor::new(&Ar1Spec::new(state.rho.clone(), d.n_times)?, state.year_covs.clone())?;
    update_z(state, graph, &f, stream)?;
    update_tau2(state, hp, stream)?;
    let scatter = EdgeScatter::from_field(&state.z, graph, d.n_groups)?;
    let s = scatter.year_scatter(&state.rho);
    update_year_covs(state, &s, scatter.n_terms, hp, separable, stream)?;
    update_hyper_cov(state, hp, separable, stream)?;
    let rho_accepted = update_rho(state, &scatter, hp, &proposals.rho, separable, stream)?;
    Ok(SweepOutcome { theta_accepted, rho_accepted })
}

/// A running chain with its store, tallies, and adaptive scales.
pub struct Chain<'a, T> {
    counts: Counts<'a>,
    graph: &'a SpatialGraph,
    hp: HyperParams<T>,
    cfg: ChainConfig,
    stream: RngStream,
    next: u64,
    state: ModelState<T>,
    proposals: Proposals<T>,
    tallies: Tallies,
    store: SampleStore<T>,
}

fn store_meta(counts: &Counts, cfg: &ChainConfig) -> StoreMeta {
    StoreMeta {
        format: STORE_FORMAT.into(),
        dims: counts.dims,
        layout: "time-outer/group-inner".into(),
        n_iterations: cfg.n_iterations,
        burn_in: cfg.burn_in,
        thin_theta: cfg.thin_theta,
        seed: cfg.seed,
        separable: cfg.separable,
    }
}

fn validate<T: Real>(counts: &Counts, graph: &SpatialGraph, hp: &HyperParams<T>, cfg: &ChainConfig) -> Result<()> {
    cfg.validate()?;
    hp.validate(counts.dims.n_groups)?;
    if graph.node_count() != counts.dims.n_regions {
        return Err(Error::DimensionMismatch {
            what: "graph nodes vs panel regions",
            expected: counts.dims.n_regions,
            found: graph.node_count(),
        });
    }
    Ok(())
}

impl<'a, T: Real> Chain<'a, T> {
    pub fn new(panel: &'a CountPanel, graph: &'a SpatialGraph, hp: HyperParams<T>, cfg: ChainConfig) -> Result<Self> {
        Self::from_counts(Counts::from_panel(panel), Some(panel.index()), graph, hp, cfg)
    }

    pub fn from_counts(
        counts: Counts<'a>,
        labels: Option<&PanelIndex>,
        graph: &'a SpatialGraph,
        hp: HyperParams<T>,
        cfg: ChainConfig,
    ) -> Result<Self> {
        validate(&counts, graph, &hp, &cfg)?;
        let state = init_state(&counts, labels, &cfg, &hp)?;
        Self::with_state(counts, graph, hp, cfg, state)
    }

    /// Starts from an explicit state instead of the default initialization.
    pub fn with_state(
        counts: Counts<'a>,
        graph: &'a SpatialGraph,
        hp: HyperParams<T>,
        cfg: ChainConfig,
        state: ModelState<T>,
    ) -> Result<Self> {
        validate(&counts, graph, &hp, &cfg)?;
        if state.dims != counts.dims {
            return Err(Error::Config("state dimensions do not match the panel".into()));
        }
        let proposals = init_proposals(&counts, &state, &cfg);
        let tallies = Tallies::new(counts.dims.n_cells(), proposals.rho.len());
        let store = SampleStore::new(store_meta(&counts, &cfg));
        Ok(Chain { counts, graph, stream: RngStream::new(cfg.seed), hp, cfg, next: 0, state, proposals, tallies, store })
    }

    /// Continues from a checkpoint written by a chain with the same inputs.
    pub fn resume(
        counts: Counts<'a>,
        graph: &'a SpatialGraph,
        hp: HyperParams<T>,
        cfg: ChainConfig,
        path: &Path,
    ) -> Result<Self> {
        validate(&counts, graph, &hp, &cfg)?;
        let ck = read_checkpoint(path, SampleStore::new(store_meta(&counts, &cfg)))?;
        if ck.seed != cfg.seed || ck.separable != cfg.separable {
            return Err(Error::Config("checkpoint seed or mode differs from the configuration".into()));
        }
        if ck.next_iteration > cfg.n_iterations {
            return Err(Error::Config("checkpoint is beyond the configured number of iterations".into()));
        }
        Ok(Chain {
            counts,
            graph,
            stream: RngStream::new(cfg.seed),
            hp,
            cfg,
            next: ck.next_iteration,
            state: ck.state,
            proposals: ck.proposals,
            tallies: ck.tallies,
            store: ck.store,
        })
    }

    pub fn state(&self) -> &ModelState<T> {
        &self.state
    }

    pub fn proposals(&self) -> &Proposals<T> {
        &self.proposals
    }

    pub fn store(&self) -> &SampleStore<T> {
        &self.store
    }

    pub fn next_iteration(&self) -> u64 {
        self.next
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.cfg.n_iterations
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            seed: self.cfg.seed,
            separable: self.cfg.separable,
            next_iteration: self.next,
            state: self.state.clone(),
            proposals: self.proposals.clone(),
            tallies: self.tallies.clone(),
            store: self.store.clone(),
        }
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        write_checkpoint(path, &self.checkpoint())
    }

    /// Runs one sweep, records tallies, adapts during burn-in, and stores
    /// post-burn-in draws.
    pub fn step(&mut self) -> Result<()> {
        let it = self.next;
        let out = gibbs_sweep(
            &mut self.state,
            &self.counts,
            self.graph,
            &self.hp,
            &self.proposals,
            self.cfg.separable,
            self.stream.child(it),
        )?;
        let acc = out.theta_accepted.iter().filter(|&&a| a).count() as u64;
        let n = out.theta_accepted.len() as u64;
        let t = &mut self.tallies;
        if it < self.cfg.burn_in {
            t.burn_theta.0 += acc;
            t.burn_theta.1 += n;
            for (w, &a) in t.window_theta.iter_mut().zip(&out.theta_accepted) {
                *w += a as u32;
            }
            for (w, &a) in t.window_rho.iter_mut().zip(&out.rho_accepted) {
                *w += a as u32;
            }
            t.window_len += 1;
            if t.window_len as u64 == self.cfg.adaptation_window {
                let f = self.cfg.adapt_factor;
                adapt_proposals(&mut self.proposals.theta, &t.window_theta, t.window_len, f);
                adapt_proposals(&mut self.proposals.rho, &t.window_rho, t.window_len, f);
                t.window_theta.iter_mut().for_each(|w| *w = 0);
                t.window_rho.iter_mut().for_each(|w| *w = 0);
                t.window_len = 0;
            }
        } else {
            t.post_theta.0 += acc;
            t.post_theta.1 += n;
            for (p, &a) in t.post_rho.iter_mut().zip(&out.rho_accepted) {
                p.0 += a as u64;
                p.1 += 1;
            }
            self.store.push_hyper(it, &self.state);
            if self.cfg.keeps_theta(it) {
                self.store.push_theta(it, &self.state);
            }
        }
        self.next += 1;
        Ok(())
    }

    /// Runs to the configured length. With `checkpoint = Some((path, every))`
    /// a checkpoint is written every `every` iterations (if nonzero) and
    /// also for the last completed iteration when a sweep fails.
    pub fn run(&mut self, checkpoint: Option<(&Path, u64)>) -> Result<()> {
        while !self.is_done() {
            let backup = checkpoint.map(|_| self.state.clone());
            if let Err(e) = self.step() {
                if let (Some((path, _)), Some(b)) = (checkpoint, backup) {
                    self.state = b;
                    self.write_checkpoint(path)?;
                }
                return Err(e);
            }
            if let Some((path, every)) = checkpoint {
                if every > 0 && self.next % every == 0 {
                    self.write_checkpoint(path)?;
                }
            }
        }
        Ok(())
    }

    pub fn acceptance(&self) -> AcceptanceSummary {
        let rate = |(a, n): (u64, u64)| (n > 0).then(|| a as f64 / n as f64);
        AcceptanceSummary {
            theta_burn_in: rate(self.tallies.burn_theta),
            theta: rate(self.tallies.post_theta),
            rho: self.tallies.post_rho.iter().map(|&p| rate(p)).collect(),
        }
    }

    pub fn into_store(self) -> SampleStore<T> {
        let acceptance = self.acceptance();
        let mut store = self.store;
        store.acceptance = acceptance;
        store
    }
}

/// Initializes and runs a chain, returning its store.
pub fn run_chain<T: Real>(
    panel: &CountPanel,
    graph: &SpatialGraph,
    hp: HyperParams<T>,
    cfg: ChainConfig,
) -> Result<SampleStore<T>> {
    let mut chain = Chain::new(panel, graph, hp, cfg)?;
    chain.run(None)?;
    Ok(chain.into_store())
}
