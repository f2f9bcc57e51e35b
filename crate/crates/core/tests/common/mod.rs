#![allow(dead_code)]

pub mod oracles;

use mstcar::dist::sample_poisson;
use mstcar::graph::{graph_spectrum, SpatialGraph};
use mstcar::linalg::Mat;
use mstcar::rng::{tag, RngStream};
use mstcar::sampler::{gibbs_sweep, sample_prior_state, Counts, Dims, HyperParams, ModelState, Proposals};

/// Batch-means Monte Carlo standard error of the mean.
pub fn batch_se(x: &[f64], n_batches: usize) -> f64 {
    let m = x.len() / n_batches;
    let means: Vec<f64> = (0..n_batches).map(|b| x[b * m..(b + 1) * m].iter().sum::<f64>() / m as f64).collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|v| (v - grand).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (var / n_batches as f64).sqrt()
}

pub struct Moment {
    pub name: String,
    pub mean: f64,
    pub se: f64,
    pub expected: f64,
}

impl Moment {
    pub fn z(&self) -> f64 {
        (self.mean - self.expected) / self.se
    }
}

pub fn geweke_hyper() -> HyperParams<f64> {
    HyperParams {
        a_tau: 6.0,
        b_tau: 1.0,
        a_rho: 4.0,
        b_rho: 2.0,
        g0: Mat::scaled_identity(2, 0.1),
        nu0: 6.0,
        nu: 10.0,
        beta_prior_variance: 0.5,
    }
}

fn simulate_counts(state: &ModelState<f64>, pops: &[u64], stream: RngStream) -> Vec<u64> {
    let mut rng = stream.rng();
    state.theta.iter().zip(pops).map(|(&th, &n)| sample_poisson(n as f64 * th.exp(), &mut rng).unwrap()).collect()
}

/// Successive-conditional simulator on a 2×3 lattice with N_g = 2, N_t = 3.
/// Returns the moment comparisons for ρ_k, τ_k², diag(G_t), diag(G).
pub fn geweke_run(transitions: usize, seed: u64, separable: bool) -> Vec<Moment> {
    let g = SpatialGraph::lattice(2, 3).unwrap();
    let sp = graph_spectrum::<f64>(&g).unwrap();
    let dims = Dims::new(6, 2, 3);
    let hp = geweke_hyper();
    let base = RngStream::new(seed);
    let pops = vec![20u64; dims.n_cells()];
    let mut state = sample_prior_state(dims, &sp, &hp, separable, base.child(tag::GEWEKE)).unwrap();
    let mut y = simulate_counts(&state, &pops, base.keyed(&[tag::GEWEKE, 0]));
    let n_rho = if separable { 1 } else { 2 };
    let props = Proposals { theta: vec![0.4; dims.n_cells()], rho: vec![0.9; n_rho] };
    let mut trace: Vec<Vec<f64>> = vec![Vec::with_capacity(transitions); 12];
    for it in 0..transitions {
        let counts = Counts::new(dims, &y, &pops).unwrap();
        gibbs_sweep(&mut state, &counts, &g, &hp, &props, separable, base.child(it as u64 + 1)).unwrap();
        y = simulate_counts(&state, &pops, base.keyed(&[tag::GEWEKE, it as u64 + 1]));
        let mut v = vec![state.rho[0], state.rho[1], state.tau2[0], state.tau2[1]];
        for t in 0..3 {
            v.push(state.year_covs[t][(0, 0)]);
            v.push(state.year_covs[t][(1, 1)]);
        }
        v.push(state.g[(0, 0)]);
        v.push(state.g[(1, 1)]);
        for (tr, x) in trace.iter_mut().zip(v) {
            tr.push(x);
        }
    }
    let e_rho = hp.a_rho / (hp.a_rho + hp.b_rho);
    let e_tau = hp.b_tau / (hp.a_tau - 1.0);
    let e_g = hp.nu0 * hp.g0[(0, 0)];
    let e_gt = e_g / (hp.nu - 2.0 - 1.0);
    let mut names = vec!["rho_1", "rho_2", "tau2_1", "tau2_2"].into_iter().map(String::from).collect::<Vec<_>>();
    let mut expected = vec![e_rho, e_rho, e_tau, e_tau];
    for t in 1..=3 {
        for k in 1..=2 {
            names.push(format!("G_{t}[{k},{k}]"));
            expected.push(e_gt);
        }
    }
    names.push("G[1,1]".into());
    names.push("G[2,2]".into());
    expected.extend([e_g, e_g]);
    trace
        .iter()
        .zip(names)
        .zip(expected)
        .map(|((tr, name), expected)| Moment {
            name,
            mean: tr.iter().sum::<f64>() / tr.len() as f64,
            se: batch_se(tr, 50),
            expected,
        })
        .collect()
}

/// Asymptotic Kolmogorov p-value of the one-sample KS statistic.
pub fn ks_pvalue(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..=100).map(|k| 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lam).powi(2)).exp()).sum();
    p.clamp(0.0, 1.0)
}

/// CDF of an unnormalized log-density on `(0, ∞)`, tabulated on a
/// log-spaced grid over `[lo, hi]`.
pub fn grid_cdf(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> impl Fn(f64) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|j| (a + h * j as f64).exp()).collect();
    // density with respect to log x
    let lw: Vec<f64> = xs.iter().map(|&x| log_density(x) + x.ln()).collect();
    let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - m).exp()).collect();
    let mut cum = vec![0.0; n];
    for j in 1..n {
        cum[j] = cum[j - 1] + 0.5 * (w[j] + w[j - 1]) * h;
    }
    let total = cum[n - 1];
    move |x: f64| {
        if x <= xs[0] {
            return 0.0;
        }
        if x >= xs[n - 1] {
            return 1.0;
        }
        let u = (x.ln() - a) / h;
        let j = u.floor() as usize;
        let f = u - j as f64;
        (cum[j] + f * (cum[j + 1] - cum[j])) / total
    }
}
