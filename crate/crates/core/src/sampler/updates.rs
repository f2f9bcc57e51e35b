use rand::Rng;
use rayon::prelude::*;

use super::{Counts, HyperParams, ModelState};
use crate::covariance::{Ar1Spec, EdgeScatter, SigmaEtaFactor};
use crate::dist::{beta_ln_pdf, sample_inv_gamma, sample_inv_wishart, sample_wishart, std_normal, WishartParams};
use crate::error::{Error, Result};
use crate::graph::SpatialGraph;
use crate::linalg::{BlockTridiag, Mat};
use crate::rng::{tag, RngStream};
use crate::scalar::Real;

const TARGET_ACCEPT: f64 = 0.44;

/// `Y θ − n e^θ − (θ − μ)² / (2τ²)`.
#[inline]
pub fn theta_log_target<T: Real>(y: u64, n: u64, mu: T, tau2: T, theta: T) -> T {
    let d = theta - mu;
    T::from_count(y as usize) * theta - T::from_count(n as usize) * theta.exp() - d * d / (T::lit(2.0) * tau2)
}

/// Random-walk Metropolis on every cell; cells with `n = 0` get an exact
/// draw from `N(μ, τ_k²)`. Returns per-cell acceptance flags.
pub fn update_theta<T: Real>(state: &mut ModelState<T>, counts: &Counts, scales: &[T], stream: RngStream) -> Vec<bool> {
    let ModelState { dims, beta, z, theta, tau2, .. } = state;
    let (b, ng) = (dims.block_len(), dims.n_groups);
    let (beta, z, tau2) = (&*beta, &*z, &*tau2);
    let stream = stream.child(tag::THETA);
    theta
        .par_iter_mut()
        .enumerate()
        .map(|(c, th)| {
            let (i, l) = (c / b, c % b);
            let mu = beta[l] + z[(i, l)];
            let t2 = tau2[l % ng];
            let mut rng = stream.child(c as u64).rng();
            let (y, n) = (counts.deaths[c], counts.populations[c]);
            if n == 0 {
                *th = mu + t2.sqrt() * T::lit(std_normal(&mut rng));
                return true;
            }
            let prop = *th + scales[c] * T::lit(std_normal(&mut rng));
            let log_ratio = theta_log_target(y, n, mu, t2, prop) - theta_log_target(y, n, mu, t2, *th);
            let u: f64 = rng.random();
            if u.ln() < log_ratio.as_f64() {
                *th = prop;
                true
            } else {
                false
            }
        })
        .collect()
}

/// `β_kt ~ N(m, 1/p)` with `p = N_s/τ_k² + 1/V`, `m = Σ_i(θ_ikt − Z_ikt)/(τ_k² p)`.
pub fn update_beta<T: Real>(state: &mut ModelState<T>, hp: &HyperParams<T>, stream: RngStream) -> Result<()> {
    if !(hp.beta_prior_variance > T::zero()) {
        return Err(Error::InvalidParameter("beta prior variance must be positive".into()));
    }
    let d = state.dims;
    let mut rng = stream.child(tag::BETA).rng();
    let ns = T::from_count(d.n_regions);
    for l in 0..d.block_len() {
        let t2 = state.tau2[l % d.n_groups];
        let sum: T = (0..d.n_regions).map(|i| state.theta[i * d.block_len() + l] - state.z[(i, l)]).sum();
        let prec = ns / t2 + hp.beta_prior_variance.recip();
        let mean = sum / t2 / prec;
        state.beta[l] = mean + T::lit(std_normal(&mut rng)) / prec.sqrt();
    }
    Ok(())
}

/// Per-component, per-layer means of `θ − β`.
pub fn component_layer_means<T: Real>(state: &ModelState<T>, graph: &SpatialGraph) -> Vec<Vec<T>> {
    let b = state.dims.block_len();
    graph
        .components()
        .iter()
        .map(|members| {
            let n = T::from_count(members.len());
            (0..b)
                .map(|l| members.iter().map(|&i| state.theta[i * b + l] - state.beta[l]).sum::<T>() / n)
                .collect()
        })
        .collect()
}

/// Gaussian full conditional of a single county block with all other
/// blocks held fixed: precision `m_i Σ_η⁻¹ + T⁻¹` and shift
/// `Σ_η⁻¹ Σ_{j∼i} Z_j + T⁻¹ (θ_i − β)`.
#[derive(Clone, Debug)]
pub struct ZSiteConditional<T> {
    pub precision: BlockTridiag<T>,
    pub shift: Vec<T>,
}

impl<T: Real> ZSiteConditional<T> {
    pub fn mean(&self) -> Result<Vec<T>> {
        Ok(self.precision.cholesky()?.solve(&self.shift))
    }

    pub fn covariance(&self) -> Result<Mat<T>> {
        Ok(self.precision.to_dense().cholesky()?.inverse())
    }
}

pub fn z_site_conditional<T: Real>(
    state: &ModelState<T>,
    graph: &SpatialGraph,
    f: &SigmaEtaFactor<T>,
    i: usize,
) -> ZSiteConditional<T> {
    let d = state.dims;
    let b = d.block_len();
    let sig_inv = f.precision();
    let mut nbr = vec![T::zero(); b];
    for &j in graph.neighbors(i) {
        for (a, &zj) in nbr.iter_mut().zip(state.z.row(j)) {
            *a += zj;
        }
    }
    let mut shift = sig_inv.matvec(&nbr);
    let mut precision = sig_inv.scale(T::from_count(graph.degree(i)));
    let mut diag = vec![T::zero(); b];
    for l in 0..b {
        let t2 = state.tau2[l % d.n_groups];
        diag[l] = t2.recip();
        shift[l] += (state.theta[i * b + l] - state.beta[l]) / t2;
    }
    precision.add_diagonal(&diag);
    ZSiteConditional { precision, shift }
}

/// One sweep over county blocks that keeps every `(k,t)` layer of `Z`
/// summing to zero within each graph component.
///
/// County `i` in a component `C` of size `n` moves along
/// `Z_i += δ(1 − 1/n)`, `Z_j −= δ/n` for the other `j ∈ C`. The ICAR term
/// sees this as a shift of `Z_i` alone (constants are in its null space),
/// and the Gaussian θ term contributes precision `(n − 1)/n · T⁻¹`, so `δ`
/// is drawn exactly from its full conditional. The common `−δ/n` shift is
/// kept as a per-component offset and applied at the end of the sweep.
/// Isolated regions stay at zero.
pub fn update_z<T: Real>(
    state: &mut ModelState<T>,
    graph: &SpatialGraph,
    f: &SigmaEtaFactor<T>,
    stream: RngStream,
) -> Result<()> {
    let d = state.dims;
    let b = d.block_len();
    let ng = d.n_groups;
    let sig_inv = f.precision();
    let rbar = component_layer_means(state, graph);
    let comps = graph.components();
    let mut offsets: Vec<Vec<T>> = vec![vec![T::zero(); b]; comps.len()];
    let stream = stream.child(tag::Z);
    let mut u = vec![T::zero(); b];
    let mut diag = vec![T::zero(); b];
    for i in 0..d.n_regions {
        let c = graph.component_of(i);
        let nc = comps[c].len();
        if nc < 2 {
            continue;
        }
        let m = T::from_count(graph.degree(i));
        let zi = state.z.row(i);
        for (a, &x) in u.iter_mut().zip(zi) {
            *a = -m * x;
        }
        for &j in graph.neighbors(i) {
            for (a, &zj) in u.iter_mut().zip(state.z.row(j)) {
                *a += zj;
            }
        }
        let mut s = sig_inv.matvec(&u);
        let w = T::from_count(nc - 1) / T::from_count(nc);
        let off = &offsets[c];
        for l in 0..b {
            let t2 = state.tau2[l % ng];
            diag[l] = w / t2;
            let r = state.theta[i * b + l] - state.beta[l] - (state.z[(i, l)] + off[l]);
            s[l] += (r - rbar[c][l]) / t2;
        }
        let mut p = sig_inv.scale(m);
        p.add_diagonal(&diag);
        let ch = p.cholesky()?;
        let mut rng = stream.child(i as u64).rng();
        ch.solve_lower_in_place(&mut s);
        for x in s.iter_mut() {
            *x += T::lit(std_normal(&mut rng));
        }
        ch.solve_upper_in_place(&mut s);
        let inv_n = T::from_count(nc).recip();
        for (l, &delta) in s.iter().enumerate() {
            state.z[(i, l)] += delta;
            offsets[c][l] -= delta * inv_n;
        }
    }
    for i in 0..d.n_regions {
        let off = &offsets[graph.component_of(i)];
        for (x, &o) in state.z.row_mut(i).iter_mut().zip(off) {
            *x += o;
        }
    }
    recenter(state, graph);
    Ok(())
}

/// Removes rounding drift from the per-component layer means of `Z`.
fn recenter<T: Real>(state: &mut ModelState<T>, graph: &SpatialGraph) {
    let b = state.dims.block_len();
    for members in graph.components() {
        let n = T::from_count(members.len());
        for l in 0..b {
            let mean = members.iter().map(|&i| state.z[(i, l)]).sum::<T>() / n;
            for &i in members {
                state.z[(i, l)] -= mean;
            }
        }
    }
}

/// `τ_k² ~ IG(a_τ + N_sN_t/2, b_τ + ½ Σ_{i,t} r_ikt²)`.
pub fn update_tau2<T: Real>(state: &mut ModelState<T>, hp: &HyperParams<T>, stream: RngStream) -> Result<()> {
    let d = state.dims;
    let b = d.block_len();
    let mut ss = vec![T::zero(); d.n_groups];
    for c in 0..d.n_cells() {
        let r = state.theta[c] - state.mean(c);
        ss[(c % b) % d.n_groups] += r * r;
    }
    let mut rng = stream.child(tag::TAU2).rng();
    let shape = hp.a_tau + T::from_count(d.n_regions * d.n_times) / T::lit(2.0);
    for (k, s) in ss.into_iter().enumerate() {
        state.tau2[k] = sample_inv_gamma(shape, hp.b_tau + s / T::lit(2.0), &mut rng)?;
    }
    Ok(())
}

/// `G_t ~ InvWish(G + S_t, ν + N_s − c)`; in separable mode one common
/// `G_c ~ InvWish(G + Σ_t S_t, ν + N_t(N_s − c))`.
pub fn update_year_covs<T: Real>(
    state: &mut ModelState<T>,
    year_scatter: &[Mat<T>],
    n_terms: usize,
    hp: &HyperParams<T>,
    separable: bool,
    stream: RngStream,
) -> Result<()> {
    let mut rng = stream.child(tag::YEAR_COVS).rng();
    let nt = state.dims.n_times;
    if separable {
        let mut scale = state.g.clone();
        for s in year_scatter {
            scale.add_assign(s);
        }
        let df = hp.nu + T::from_count(nt * n_terms);
        let gc = sample_inv_wishart(&scale, df, &mut rng)?;
        state.year_covs = vec![gc; nt];
    } else {
        let df = hp.nu + T::from_count(n_terms);
        for t in 0..nt {
            state.year_covs[t] = sample_inv_wishart(&state.g.add(&year_scatter[t]), df, &mut rng)?;
        }
    }
    Ok(())
}

/// `G ~ Wish((G_0⁻¹ + Σ_t G_t⁻¹)⁻¹, ν_0 + N_t ν)`, counting the common
/// `G_c` once in separable mode.
pub fn update_hyper_cov<T: Real>(
    state: &mut ModelState<T>,
    hp: &HyperParams<T>,
    separable: bool,
    stream: RngStream,
) -> Result<()> {
    let mut prec = hp.g0.cholesky()?.inverse();
    let covs: &[Mat<T>] = if separable { &state.year_covs[..state.year_covs.len().min(1)] } else { &state.year_covs };
    for g in covs {
        prec.add_assign(&g.cholesky()?.inverse());
    }
    let mut scale = prec.cholesky()?.inverse();
    scale.symmetrize();
    let params = WishartParams::new(scale, hp.nu0 + T::from_count(covs.len()) * hp.nu)?;
    let mut rng = stream.child(tag::HYPER_COV).rng();
    state.g = sample_wishart(&params, &mut rng)?;
    Ok(())
}

/// `Σ_k log Beta(ρ_k) + log π(Z | Σ_η(ρ))`, dropping terms free of ρ. In
/// separable mode the shared `ρ` carries a single Beta prior. Returns `−∞`
/// outside `(0, 1)`.
pub fn rho_log_target<T: Real>(
    scatter: &EdgeScatter<T>,
    year_covs: &[Mat<T>],
    rho: &[T],
    hp: &HyperParams<T>,
    separable: bool,
) -> Result<T> {
    if rho.iter().any(|&r| !(r > T::zero() && r < T::one())) {
        return Ok(T::neg_infinity());
    }
    let f = SigmaEtaFactor::new(&Ar1Spec::new(rho.to_vec(), year_covs.len())?, year_covs.to_vec())?;
    let mut lp = scatter.log_density(&f);
    let free = if separable { &rho[..1] } else { rho };
    for &r in free {
        lp += beta_ln_pdf(r, hp.a_rho, hp.b_rho)?;
    }
    Ok(lp)
}

#[inline]
fn logistic<T: Real>(x: T) -> T {
    (T::one() + (-x).exp()).recip()
}

/// Random-walk Metropolis on `logit ρ_k`, one group at a time (a single
/// shared `ρ` in separable mode). Returns acceptance flags.
pub fn update_rho<T: Real>(
    state: &mut ModelState<T>,
    scatter: &EdgeScatter<T>,
    hp: &HyperParams<T>,
    scales: &[T],
    separable: bool,
    stream: RngStream,
) -> Result<Vec<bool>> {
    let mut rng = stream.child(tag::RHO).rng();
    let jac = |r: T| r.ln() + (T::one() - r).ln();
    let n_moves = if separable { 1 } else { state.rho.len() };
    let mut flags = Vec::with_capacity(n_moves);
    let mut current = rho_log_target(scatter, &state.year_covs, &state.rho, hp, separable)?;
    for k in 0..n_moves {
        let r = state.rho[k];
        let x = (r / (T::one() - r)).ln();
        let rp = logistic(x + scales[k] * T::lit(std_normal(&mut rng)));
        let mut prop = state.rho.clone();
        if separable {
            prop.iter_mut().for_each(|p| *p = rp);
        } else {
            prop[k] = rp;
        }
        let cand = rho_log_target(scatter, &state.year_covs, &prop, hp, separable)?;
        let log_ratio = cand + jac(rp) - current - jac(r);
        let u: f64 = rng.random();
        let ok = cand.is_finite() && u.ln() < log_ratio.as_f64();
        if ok {
            state.rho = prop;
            current = cand;
        }
        flags.push(ok);
    }
    Ok(flags)
}

/// New proposal scale after a window with acceptance `rate`: unchanged at
/// 0.44, multiplied by `factor` at rate 1 and divided by it at rate 0,
/// geometric in between.
pub fn adapt_scale<T: Real>(scale: T, rate: f64, factor: f64) -> T {
    let e = if rate >= TARGET_ACCEPT {
        (rate - TARGET_ACCEPT) / (1.0 - TARGET_ACCEPT)
    } else {
        (rate - TARGET_ACCEPT) / TARGET_ACCEPT
    };
    scale * T::lit(factor.powf(e))
}

pub fn adapt_proposals<T: Real>(scales: &mut [T], accepts: &[u32], window: u32, factor: f64) {
    for (s, &a) in scales.iter_mut().zip(accepts) {
        *s = adapt_scale(*s, a as f64 / window as f64, factor);
    }
}
