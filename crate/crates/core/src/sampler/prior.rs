use super::{Dims, HyperParams, ModelState};
use crate::covariance::{sample_mstcar_prior, Ar1Spec, SigmaEtaFactor};
use crate::dist::{sample_beta, sample_inv_gamma, sample_inv_wishart, sample_normal, sample_wishart, WishartParams};
use crate::error::Result;
use crate::graph::GraphSpectrum;
use crate::rng::RngStream;
use crate::scalar::Real;

/// Draws every unknown from the prior, top down:
/// `G → G_t → ρ → τ² → β → Z → θ`.
pub fn sample_prior_state<T: Real>(
    dims: Dims,
    spectrum: &GraphSpectrum<T>,
    hp: &HyperParams<T>,
    separable: bool,
    stream: RngStream,
) -> Result<ModelState<T>> {
    let mut rng = stream.rng();
    let (ng, nt, b) = (dims.n_groups, dims.n_times, dims.block_len());
    let g = sample_wishart(&WishartParams::new(hp.g0.clone(), hp.nu0)?, &mut rng)?;
    let year_covs = if separable {
        vec![sample_inv_wishart(&g, hp.nu, &mut rng)?; nt]
    } else {
        (0..nt).map(|_| sample_inv_wishart(&g, hp.nu, &mut rng)).collect::<Result<Vec<_>>>()?
    };
    let rho = if separable {
        vec![sample_beta(hp.a_rho, hp.b_rho, &mut rng)?; ng]
    } else {
        (0..ng).map(|_| sample_beta(hp.a_rho, hp.b_rho, &mut rng)).collect::<Result<Vec<_>>>()?
    };
    let tau2 = (0..ng).map(|_| sample_inv_gamma(hp.a_tau, hp.b_tau, &mut rng)).collect::<Result<Vec<_>>>()?;
    let beta: Vec<T> = (0..b).map(|_| sample_normal(T::zero(), hp.beta_prior_variance, &mut rng)).collect();
    let f = SigmaEtaFactor::new(&Ar1Spec::new(rho.clone(), nt)?, year_covs.clone())?;
    let z = sample_mstcar_prior(&f, spectrum, &mut rng);
    let theta = (0..dims.n_cells())
        .map(|c| {
            let (i, l) = (c / b, c % b);
            sample_normal(beta[l] + z[(i, l)], tau2[l % ng], &mut rng)
        })
        .collect();
    Ok(ModelState { dims, beta, z, theta, tau2, rho, year_covs, g })
}
