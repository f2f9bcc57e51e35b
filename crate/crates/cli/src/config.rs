//! Run configuration: one TOML file, every key optional.
//!
//! ```toml
//! threads = 4              # worker threads; omitted = all cores
//! checkpoint_every = 500   # 0 disables periodic checkpoints
//!
//! [paths]                  # relative paths resolve against this file
//! counts = "panel.csv"     # default <output>/panel.csv
//! adjacency = "adj.txt"    # default <output>/adjacency.txt
//! output = "out"
//!
//! [hyper]                  # prior overrides
//! a_tau = 3.0
//! b_tau = 0.01
//! a_rho = 9.0
//! b_rho = 1.0
//! nu0 = 2.0
//! nu = 4.0
//! g0 = [[0.01, 0.0], [0.0, 0.01]]
//! beta_prior_variance = 1e4
//!
//! [chain]                  # sampler settings
//! n_iterations = 2000
//! burn_in = 1000
//! thin_theta = 10
//! seed = 1
//! separable = false
//!
//! [metrics]
//! replicates = 1000
//! suppression_threshold = 100
//! reference_time = "1973"  # default: first time label
//! decline_from = "1973"    # default: first time label
//! decline_to = "2013"      # default: last time label
//! standard_weights = [0.6, 0.4]
//!
//! [baseline]
//! pseudo_population = 1000.0
//!
//! [simulate]
//! rows = 5
//! cols = 6                 # or adjacency = "edges.txt"
//! n_groups = 2
//! n_times = 8
//! rho = 0.8
//! g = [[0.05, 0.02], [0.02, 0.04]]
//! tau2 = 0.005
//! log_rate = -5.8
//! slope = -0.03
//! log_rates = [[...], [...]] # per group, per time; overrides log_rate/slope
//! pop_min = 1000
//! pop_max = 50000
//!
//! [summarize]
//! quantiles = [0.025, 0.5, 0.975]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use mstcar::sampler::HyperParams;
use mstcar::{ChainConfig, Mat};
use serde::Deserialize;

use crate::failure::{invalid, CliResult, Failure};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub threads: Option<usize>,
    pub checkpoint_every: u64,
    pub paths: Paths,
    pub hyper: HyperOverrides,
    pub chain: ChainConfig,
    pub metrics: MetricOptions,
    pub baseline: BaselineOptions,
    pub simulate: SimOptions,
    pub summarize: SummarizeOptions,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub counts: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { counts: None, adjacency: None, output: PathBuf::from("mstcar-out") }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperOverrides {
    pub a_tau: Option<f64>,
    pub b_tau: Option<f64>,
    pub a_rho: Option<f64>,
    pub b_rho: Option<f64>,
    pub nu0: Option<f64>,
    pub nu: Option<f64>,
    pub g0: Option<Vec<Vec<f64>>>,
    pub beta_prior_variance: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub replicates: usize,
    pub suppression_threshold: u64,
    pub reference_time: Option<String>,
    pub decline_from: Option<String>,
    pub decline_to: Option<String>,
    pub standard_weights: Option<Vec<f64>>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            replicates: 1000,
            suppression_threshold: 100,
            reference_time: None,
            decline_from: None,
            decline_to: None,
            standard_weights: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineOptions {
    pub pseudo_population: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions { pseudo_population: mstcar::baseline::DEFAULT_PSEUDO_POPULATION }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub rows: usize,
    pub cols: usize,
    pub adjacency: Option<PathBuf>,
    pub n_groups: usize,
    pub n_times: usize,
    pub rho: f64,
    pub g: Option<Vec<Vec<f64>>>,
    pub tau2: f64,
    pub log_rate: f64,
    pub slope: f64,
    pub log_rates: Option<Vec<Vec<f64>>>,
    pub pop_min: u64,
    pub pop_max: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rows: 5,
            cols: 6,
            adjacency: None,
            n_groups: 2,
            n_times: 8,
            rho: 0.8,
            g: None,
            tau2: 0.005,
            log_rate: -5.8,
            slope: -0.03,
            log_rates: None,
            pop_min: 1000,
            pop_max: 50_000,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummarizeOptions {
    pub quantiles: Vec<f64>,
}

impl Default for SummarizeOptions {
    fn default() -> Self {
        SummarizeOptions { quantiles: vec![0.025, 0.5, 0.975] }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub separable: bool,
    pub checkpoint_every: Option<u64>,
    pub resume: bool,
}

impl RunConfig {
    /// Reads `path` (defaults when `None`), applies `ov`, and resolves
    /// relative paths against the file's directory.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> CliResult<Self> {
        let (mut cfg, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", p.display())))?;
                let cfg: RunConfig = toml::from_str(&text)
                    .map_err(|e| Failure::Validation(format!("config {}: {e}", p.display())))?;
                (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (RunConfig::default(), PathBuf::new()),
        };
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.paths.output);
        for p in [&mut cfg.paths.counts, &mut cfg.paths.adjacency, &mut cfg.simulate.adjacency].into_iter().flatten() {
            resolve(p);
        }
        if let Some(s) = ov.seed {
            cfg.chain.seed = s;
        }
        if ov.threads.is_some() {
            cfg.threads = ov.threads;
        }
        cfg.chain.separable |= ov.separable;
        if let Some(e) = ov.checkpoint_every {
            cfg.checkpoint_every = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        self.chain.validate()?;
        if self.threads == Some(0) {
            return invalid("threads must be at least 1");
        }
        if self.metrics.replicates < 40 {
            return invalid(format!("metrics.replicates must be at least 40, got {}", self.metrics.replicates));
        }
        if self.summarize.quantiles.is_empty() || self.summarize.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return invalid("summarize.quantiles must be a nonempty list of values in [0, 1]");
        }
        Ok(())
    }

    pub fn counts_path(&self) -> PathBuf {
        self.paths.counts.clone().unwrap_or_else(|| self.paths.output.join("panel.csv"))
    }

    pub fn adjacency_path(&self) -> PathBuf {
        self.paths.adjacency.clone().unwrap_or_else(|| self.paths.output.join("adjacency.txt"))
    }

    pub fn store_dir(&self) -> PathBuf {
        self.paths.output.join("store")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.paths.output.join("checkpoint.bin")
    }

    /// Default priors for `n_groups` with the configured overrides applied.
    pub fn hyper_params(&self, n_groups: usize) -> CliResult<HyperParams<f64>> {
        let h = &self.hyper;
        let mut hp = HyperParams::<f64>::default_for(n_groups);
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut hp.a_tau, h.a_tau);
        set(&mut hp.b_tau, h.b_tau);
        set(&mut hp.a_rho, h.a_rho);
        set(&mut hp.b_rho, h.b_rho);
        set(&mut hp.nu0, h.nu0);
        set(&mut hp.nu, h.nu);
        set(&mut hp.beta_prior_variance, h.beta_prior_variance);
        if let Some(rows) = &h.g0 {
            hp.g0 = square_matrix("hyper.g0", rows, n_groups)?;
        }
        hp.validate(n_groups)?;
        Ok(hp)
    }
}

pub fn square_matrix(what: &str, rows: &[Vec<f64>], n: usize) -> CliResult<Mat<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return invalid(format!("{what} must be a {n}×{n} matrix"));
    }
    Ok(Mat::from_f64_rows(rows))
}
