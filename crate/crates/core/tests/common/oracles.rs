//! Independent oracles for the conditional updates.

use mstcar::covariance::{Ar1Spec, EdgeScatter, SigmaEtaFactor};
use mstcar::dist::sample_normal;
use mstcar::graph::SpatialGraph;
use mstcar::linalg::Mat;
use mstcar::rng::RngStream;
use mstcar::sampler::{
    rho_log_target, update_hyper_cov, update_tau2, update_year_covs, z_site_conditional, Dims, HyperParams, ModelState,
};
use nalgebra::DMatrix;
use statrs::function::beta::ln_beta;

use super::{grid_cdf, ks_pvalue};

pub fn random_state(dims: Dims, rho: Vec<f64>, year_covs: Vec<Mat<f64>>, g: Mat<f64>, seed: u64) -> ModelState<f64> {
    let mut rng = RngStream::new(seed).rng();
    let b = dims.block_len();
    let mut draw = |v: f64| sample_normal(0.0, v, &mut rng);
    let beta = (0..b).map(|_| draw(1.0)).collect();
    let z = Mat::from_vec(dims.n_regions, b, (0..dims.n_regions * b).map(|_| draw(0.3)).collect());
    let theta = (0..dims.n_cells()).map(|_| draw(2.0)).collect();
    let tau2 = (0..dims.n_groups).map(|k| 0.2 + 0.1 * k as f64).collect();
    ModelState { dims, beta, z, theta, tau2, rho, year_covs, g }
}

pub fn to_na(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// KS p-value of `n` τ² updates against the grid-normalized posterior.
pub fn tau2_ks(n: u64, seed: u64) -> f64 {
    let dims = Dims::new(5, 1, 2);
    let s0 = random_state(dims, vec![0.5], vec![Mat::identity(1); 2], Mat::identity(1), 1);
    let hp = HyperParams { a_tau: 3.0, b_tau: 0.5, ..HyperParams::default_for(1) };
    let resid: Vec<f64> = (0..dims.n_cells()).map(|c| s0.theta[c] - s0.mean(c)).collect();
    let ss: f64 = resid.iter().map(|r| r * r).sum();
    let m = resid.len() as f64;
    let logp = |x: f64| -(hp.a_tau + 1.0) * x.ln() - hp.b_tau / x - 0.5 * m * x.ln() - ss / (2.0 * x);
    let cdf = grid_cdf(logp, 1e-3, 1e3, 200_000);
    let draws: Vec<f64> = (0..n)
        .map(|j| {
            let mut s = s0.clone();
            update_tau2(&mut s, &hp, RngStream::new(seed).child(j)).unwrap();
            s.tau2[0]
        })
        .collect();
    ks_pvalue(&draws, cdf)
}

/// Dense ICAR log-density of a 1-group, 2-year field with `G_1 = x`.
fn icar_log_density_two_years(z: &Mat<f64>, lap: &Mat<f64>, n_terms: usize, rho: f64, x: f64, g2: f64) -> f64 {
    let c = [[x, rho * x], [rho * x, rho * rho * x + (1.0 - rho * rho) * g2]];
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
    let mut q = 0.0;
    for i in 0..z.rows() {
        for j in 0..z.rows() {
            if lap[(i, j)] == 0.0 {
                continue;
            }
            for a in 0..2 {
                for b in 0..2 {
                    q += lap[(i, j)] * z[(i, a)] * inv[a][b] * z[(j, b)];
                }
            }
        }
    }
    -0.5 * n_terms as f64 * det.ln() - 0.5 * q
}

/// KS p-value of `G_1` updates (one group, two years, 4-node path) against
/// the grid-normalized product of the inverse-Wishart prior and the dense
/// ICAR likelihood.
pub fn year_cov_ks(n: u64, seed: u64) -> f64 {
    let g = SpatialGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
    let lap = g.laplacian::<f64>();
    let dims = Dims::new(4, 1, 2);
    let (rho, g2, gh) = (0.6, 0.7, 0.4);
    let s0 = random_state(dims, vec![rho], vec![Mat::identity(1), Mat::scaled_identity(1, g2)], Mat::scaled_identity(1, gh), 2);
    let hp = HyperParams { nu: 4.0, ..HyperParams::default_for(1) };
    let logp = |x: f64| -(hp.nu / 2.0 + 1.0) * x.ln() - gh / (2.0 * x) + icar_log_density_two_years(&s0.z, &lap, 3, rho, x, g2);
    let cdf = grid_cdf(logp, 1e-4, 1e4, 200_000);
    let scatter = EdgeScatter::from_field(&s0.z, &g, 1).unwrap();
    let ys = scatter.year_scatter(&s0.rho);
    let draws: Vec<f64> = (0..n)
        .map(|j| {
            let mut s = s0.clone();
            update_year_covs(&mut s, &ys, scatter.n_terms, &hp, false, RngStream::new(seed).child(j)).unwrap();
            s.year_covs[0][(0, 0)]
        })
        .collect();
    ks_pvalue(&draws, cdf)
}

/// KS p-value of one-dimensional `G` updates against the grid-normalized
/// Wishart prior times three inverse-Wishart likelihood terms.
pub fn hyper_cov_ks(n: u64, seed: u64) -> f64 {
    let dims = Dims::new(3, 1, 3);
    let covs = [0.3, 0.8, 0.5];
    let g0 = 0.2;
    let s0 = random_state(dims, vec![0.5], covs.iter().map(|&v| Mat::scaled_identity(1, v)).collect(), Mat::identity(1), 3);
    let hp = HyperParams { g0: Mat::scaled_identity(1, g0), nu0: 3.0, nu: 4.0, ..HyperParams::default_for(1) };
    let logp = |x: f64| {
        let prior = (hp.nu0 - 2.0) / 2.0 * x.ln() - x / (2.0 * g0);
        prior + covs.iter().map(|&gt| hp.nu / 2.0 * x.ln() - x / (2.0 * gt)).sum::<f64>()
    };
    let cdf = grid_cdf(logp, 1e-4, 1e4, 200_000);
    let draws: Vec<f64> = (0..n)
        .map(|j| {
            let mut s = s0.clone();
            update_hyper_cov(&mut s, &hp, false, RngStream::new(seed).child(j)).unwrap();
            s.g[(0, 0)]
        })
        .collect();
    ks_pvalue(&draws, cdf)
}

pub fn two_group_covs() -> Vec<Mat<f64>> {
    vec![
        Mat::from_f64_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]),
        Mat::from_f64_rows(&[vec![0.8, -0.2], vec![-0.2, 1.1]]),
        Mat::from_f64_rows(&[vec![0.6, 0.1], vec![0.1, 0.9]]),
    ]
}

/// `Σ_η` entry by entry: `cov(η_kt, η_k't') = Σ_{s ≤ min(t,t')} L_k[t,s] L_k'[t',s] G_s[k,k']`.
pub fn sigma_eta_by_hand(rho: &[f64], covs: &[Mat<f64>]) -> DMatrix<f64> {
    let (ng, nt) = (rho.len(), covs.len());
    let l = |k: usize, t: usize, s: usize| -> f64 {
        let r: f64 = rho[k];
        if s > t {
            0.0
        } else if s == 0 {
            r.powi(t as i32)
        } else {
            r.powi((t - s) as i32) * (1.0 - r * r).sqrt()
        }
    };
    DMatrix::from_fn(ng * nt, ng * nt, |a, b| {
        let (t, k, tp, kp) = (a / ng, a % ng, b / ng, b % ng);
        (0..=t.min(tp)).map(|s| l(k, t, s) * l(kp, tp, s) * covs[s][(k, kp)]).sum()
    })
}

/// Largest mean and covariance discrepancies between the single-block Z
/// conditional and dense conditioning of the joint Gaussian of Z given θ,
/// on a 4-node path with `N_g = 2`, `N_t = 3`.
pub fn z_conditional_errors() -> (f64, f64) {
    let g = SpatialGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
    let dims = Dims::new(4, 2, 3);
    let rho = vec![0.7, 0.2];
    let s = random_state(dims, rho.clone(), two_group_covs(), Mat::identity(2), 4);
    let f = SigmaEtaFactor::new(&Ar1Spec::new(rho.clone(), 3).unwrap(), two_group_covs()).unwrap();
    let b = dims.block_len();
    let sigma_inv = sigma_eta_by_hand(&rho, &two_group_covs()).try_inverse().unwrap();
    let lap = to_na(&g.laplacian::<f64>());
    let t_inv = DMatrix::from_fn(b, b, |a, c| if a == c { 1.0 / s.tau2[a % 2] } else { 0.0 });
    let q = lap.kronecker(&sigma_inv) + DMatrix::identity(4, 4).kronecker(&t_inv);
    let h = DMatrix::from_fn(4 * b, 1, |r, _| {
        let (i, l) = (r / b, r % b);
        (s.theta[i * b + l] - s.beta[l]) / s.tau2[l % 2]
    });
    let cov = q.try_inverse().unwrap();
    let mean = &cov * &h;
    let zvec = DMatrix::from_fn(4 * b, 1, |r, _| s.z[(r / b, r % b)]);
    let (mut em, mut ev) = (0.0f64, 0.0f64);
    for i in 0..4 {
        let own: Vec<usize> = (i * b..(i + 1) * b).collect();
        let rest: Vec<usize> = (0..4 * b).filter(|r| !own.contains(r)).collect();
        let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |a, c| cov[(rows[a], cols[c])]);
        let c_or = pick(&own, &rest);
        let c_rr_inv = pick(&rest, &rest).try_inverse().unwrap();
        let dev = DMatrix::from_fn(rest.len(), 1, |a, _| zvec[(rest[a], 0)] - mean[(rest[a], 0)]);
        let m_oracle = DMatrix::from_fn(b, 1, |a, _| mean[(own[a], 0)]) + &c_or * &c_rr_inv * dev;
        let v_oracle = pick(&own, &own) - &c_or * &c_rr_inv * c_or.transpose();
        let cond = z_site_conditional(&s, &g, &f, i);
        let m = cond.mean().unwrap();
        let v = cond.covariance().unwrap();
        for a in 0..b {
            em = em.max((m[a] - m_oracle[(a, 0)]).abs());
            for c in 0..b {
                ev = ev.max((v[(a, c)] - v_oracle[(a, c)]).abs());
            }
        }
    }
    (em, ev)
}

/// Dense `log N_ICAR(Z | Σ_η(ρ)) + Σ_k log Beta(ρ_k)`.
pub fn dense_rho_target(z: &Mat<f64>, g: &SpatialGraph, rho: &[f64], covs: &[Mat<f64>], hp: &HyperParams<f64>) -> f64 {
    let sigma = sigma_eta_by_hand(rho, covs);
    let sigma_inv = sigma.clone().try_inverse().unwrap();
    let lap = to_na(&g.laplacian::<f64>());
    let b = z.cols();
    let zvec = DMatrix::from_fn(z.rows() * b, 1, |r, _| z[(r / b, r % b)]);
    let quad = (zvec.transpose() * lap.kronecker(&sigma_inv) * &zvec)[(0, 0)];
    let n_terms = (g.node_count() - g.component_count()) as f64;
    let prior: f64 = rho
        .iter()
        .map(|&r| (hp.a_rho - 1.0) * r.ln() + (hp.b_rho - 1.0) * (1.0 - r).ln() - ln_beta(hp.a_rho, hp.b_rho))
        .sum();
    -0.5 * n_terms * sigma.determinant().ln() - 0.5 * quad + prior
}

/// Largest discrepancy of `ρ` log-target differences against the dense
/// density on a two-component graph.
pub fn rho_ratio_error() -> f64 {
    let g = SpatialGraph::from_edges(5, [(0, 1), (1, 2), (2, 0), (3, 4)]).unwrap();
    let dims = Dims::new(5, 2, 3);
    let s = random_state(dims, vec![0.5, 0.5], two_group_covs(), Mat::identity(2), 5);
    let hp = HyperParams::default_for(2);
    let scatter = EdgeScatter::from_field(&s.z, &g, 2).unwrap();
    let pairs = [([0.3, 0.8], [0.9, 0.1]), ([0.05, 0.5], [0.5, 0.95]), ([0.6, 0.6], [0.61, 0.59])];
    pairs
        .iter()
        .map(|(r1, r2)| {
            let lp = |r: &[f64]| rho_log_target(&scatter, &two_group_covs(), r, &hp, false).unwrap();
            let ours = lp(r1) - lp(r2);
            let dense = dense_rho_target(&s.z, &g, r1, &two_group_covs(), &hp) - dense_rho_target(&s.z, &g, r2, &two_group_covs(), &hp);
            (ours - dense).abs()
        })
        .fold(0.0, f64::max)
}
