//! Distribution primitives used by the Gibbs scheme.
//!
//! Conventions:
//! - `Gamma(shape a, rate b)`, mean `a / b`.
//! - `InvGamma(shape a, scale b)`, mean `b / (a − 1)`.
//! - `Wishart(scale S, df ν)`, mean `ν S`.
//! - `InvWishart(scale S, df ν)`, mean `S / (ν − p − 1)`.
//!
//! Variates are drawn in `f64` and converted, so results are identical for
//! every scalar type up to the final rounding.

use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, Poisson, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::scalar::Real;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn param_err(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sample_normal<T: Real, R: Rng + ?Sized>(mean: T, var: T, rng: &mut R) -> T {
    mean + var.sqrt() * T::lit(std_normal(rng))
}

pub fn sample_gamma<T: Real, R: Rng + ?Sized>(shape: T, rate: T, rng: &mut R) -> Result<T> {
    let (a, b) = (shape.as_f64(), rate.as_f64());
    let g = Gamma::new(a, 1.0 / b).map_err(|e| param_err(format!("gamma(shape={a}, rate={b}): {e}")))?;
    if !(b > 0.0) {
        return Err(param_err(format!("gamma rate must be positive, got {b}")));
    }
    Ok(T::lit(g.sample(rng)))
}

pub fn sample_inv_gamma<T: Real, R: Rng + ?Sized>(shape: T, scale: T, rng: &mut R) -> Result<T> {
    Ok(sample_gamma(shape, scale, rng)?.recip())
}

pub fn sample_beta<T: Real, R: Rng + ?Sized>(a: T, b: T, rng: &mut R) -> Result<T> {
    let d = Beta::new(a.as_f64(), b.as_f64()).map_err(|e| param_err(format!("beta({a}, {b}): {e}")))?;
    Ok(T::lit(d.sample(rng)))
}

/// Poisson draw; a zero mean yields zero.
pub fn sample_poisson<T: Real, R: Rng + ?Sized>(mean: T, rng: &mut R) -> Result<u64> {
    let m = mean.as_f64();
    if m == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(m).map_err(|e| param_err(format!("poisson({m}): {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Draws from `N(P⁻¹ s, P⁻¹)` given the precision `P` and shift `s`.
pub fn sample_mvn_prec<T: Real, R: Rng + ?Sized>(precision: &Mat<T>, shift: &[T], rng: &mut R) -> Result<Vec<T>> {
    if shift.len() != precision.rows() {
        return Err(Error::DimensionMismatch { what: "mvn shift", expected: precision.rows(), found: shift.len() });
    }
    let ch = precision.cholesky()?;
    let mut x = shift.to_vec();
    ch.solve_lower_in_place(&mut x);
    for xi in x.iter_mut() {
        *xi += T::lit(std_normal(rng));
    }
    ch.solve_upper_in_place(&mut x);
    Ok(x)
}

/// Zero-mean draw with covariance `cov`.
pub fn sample_mvn_cov<T: Real, R: Rng + ?Sized>(cov: &Cholesky<T>, rng: &mut R) -> Vec<T> {
    let z: Vec<T> = (0..cov.dim()).map(|_| T::lit(std_normal(rng))).collect();
    cov.lower_mul(&z)
}

/// Scale matrix and degrees of freedom of a Wishart (or inverse-Wishart).
#[derive(Clone, Debug)]
pub struct WishartParams<T> {
    scale: Mat<T>,
    chol: Cholesky<T>,
    df: T,
}

impl<T: Real> WishartParams<T> {
    pub fn new(scale: Mat<T>, df: T) -> Result<Self> {
        let p = scale.rows();
        if !(df > T::from_count(p) - T::one()) {
            return Err(param_err(format!("wishart df {df} must exceed dimension − 1 = {}", p as f64 - 1.0)));
        }
        let chol = scale.cholesky()?;
        Ok(WishartParams { scale, chol, df })
    }

    pub fn scale(&self) -> &Mat<T> {
        &self.scale
    }

    pub fn df(&self) -> T {
        self.df
    }

    pub fn dim(&self) -> usize {
        self.scale.rows()
    }

    /// Lower Bartlett factor `A`: `√χ²(ν − i)` on the diagonal, standard
    /// normals below it.
    fn bartlett<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Mat<T>> {
        let p = self.dim();
        let mut a = Mat::zeros(p, p);
        for i in 0..p {
            let dof = self.df.as_f64() - i as f64;
            let chi = ChiSquared::new(dof).map_err(|e| param_err(format!("chi-square({dof}): {e}")))?;
            a[(i, i)] = T::lit(chi.sample(rng).sqrt());
            for j in 0..i {
                a[(i, j)] = T::lit(std_normal(rng));
            }
        }
        Ok(a)
    }

    /// Lower factor `C` with `C Cᵀ` Wishart distributed.
    pub fn sample_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Mat<T>> {
        let a = self.bartlett(rng)?;
        Ok(self.chol.factor().matmul(&a))
    }
}

/// Bartlett-decomposition Wishart draw.
pub fn sample_wishart<T: Real, R: Rng + ?Sized>(p: &WishartParams<T>, rng: &mut R) -> Result<Mat<T>> {
    let c = p.sample_factor(rng)?;
    let mut w = c.matmul(&c.transpose());
    w.symmetrize();
    Ok(w)
}

/// Inverse-Wishart draw: the inverse of a Wishart draw with inverted scale.
pub fn sample_inv_wishart<T: Real, R: Rng + ?Sized>(scale: &Mat<T>, df: T, rng: &mut R) -> Result<Mat<T>> {
    let inv_scale = scale.cholesky()?.inverse();
    let params = WishartParams::new(inv_scale, df)?;
    let c = params.sample_factor(rng)?;
    // (C Cᵀ)⁻¹ = C⁻ᵀ C⁻¹
    let p = c.rows();
    let mut cinv = Mat::identity(p);
    for j in 0..p {
        let mut col: Vec<T> = (0..p).map(|i| cinv[(i, j)]).collect();
        crate::linalg::solve_lower_in_place(&c, &mut col);
        for i in 0..p {
            cinv[(i, j)] = col[i];
        }
    }
    let mut x = cinv.transpose().matmul(&cinv);
    x.symmetrize();
    Ok(x)
}

/// `ln Γ_p(a)`, the multivariate log-gamma function.
pub fn ln_multigamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (0..p).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

pub fn normal_ln_pdf<T: Real>(x: T, mean: T, var: T) -> Result<T> {
    if !(var > T::zero()) {
        return Err(param_err(format!("normal variance must be positive, got {var}")));
    }
    let d = x - mean;
    Ok(T::lit(-0.5 * LN_2PI) - T::lit(0.5) * var.ln() - d * d / (T::lit(2.0) * var))
}

pub fn gamma_ln_pdf<T: Real>(x: T, shape: T, rate: T) -> Result<T> {
    if !(shape > T::zero() && rate > T::zero()) {
        return Err(param_err(format!("gamma(shape={shape}, rate={rate})")));
    }
    if !(x > T::zero()) {
        return Ok(T::neg_infinity());
    }
    let (a, b, xf) = (shape.as_f64(), rate.as_f64(), x.as_f64());
    Ok(T::lit(a * b.ln() - ln_gamma(a) + (a - 1.0) * xf.ln() - b * xf))
}

pub fn inv_gamma_ln_pdf<T: Real>(x: T, shape: T, scale: T) -> Result<T> {
    if !(shape > T::zero() && scale > T::zero()) {
        return Err(param_err(format!("inverse-gamma(shape={shape}, scale={scale})")));
    }
    if !(x > T::zero()) {
        return Ok(T::neg_infinity());
    }
    let (a, b, xf) = (shape.as_f64(), scale.as_f64(), x.as_f64());
    Ok(T::lit(a * b.ln() - ln_gamma(a) - (a + 1.0) * xf.ln() - b / xf))
}

pub fn beta_ln_pdf<T: Real>(x: T, a: T, b: T) -> Result<T> {
    if !(a > T::zero() && b > T::zero()) {
        return Err(param_err(format!("beta({a}, {b})")));
    }
    if !(x > T::zero() && x < T::one()) {
        return Ok(T::neg_infinity());
    }
    let (af, bf, xf) = (a.as_f64(), b.as_f64(), x.as_f64());
    let ln_b = ln_gamma(af) + ln_gamma(bf) - ln_gamma(af + bf);
    Ok(T::lit((af - 1.0) * xf.ln() + (bf - 1.0) * (1.0 - xf).ln() - ln_b))
}

/// Poisson log-mass of `y` at mean `mu` (e.g. `n·λ`).
pub fn poisson_ln_pmf<T: Real>(y: u64, mu: T) -> Result<T> {
    if mu < T::zero() || !mu.is_finite() {
        return Err(param_err(format!("poisson mean {mu}")));
    }
    if mu == T::zero() {
        return Ok(if y == 0 { T::zero() } else { T::neg_infinity() });
    }
    let yf = y as f64;
    let m = mu.as_f64();
    Ok(T::lit(yf * m.ln() - m - ln_gamma(yf + 1.0)))
}

fn spd_parts<T: Real>(x: &Mat<T>) -> Option<Cholesky<T>> {
    if !x.is_square() || !x.is_symmetric(T::lit(1e-9) * (T::one() + x.trace().abs())) {
        return None;
    }
    x.cholesky().ok()
}

/// `tr(A⁻¹ B)` through a Cholesky factor of `A`.
fn trace_solve<T: Real>(a: &Cholesky<T>, b: &Mat<T>) -> T {
    a.solve_mat(b).trace()
}

pub fn wishart_ln_pdf<T: Real>(x: &Mat<T>, params: &WishartParams<T>) -> Result<T> {
    let p = params.dim();
    if x.rows() != p {
        return Err(Error::DimensionMismatch { what: "wishart point", expected: p, found: x.rows() });
    }
    let Some(xc) = spd_parts(x) else { return Ok(T::neg_infinity()) };
    let nu = params.df.as_f64();
    let pf = p as f64;
    let v = (nu - pf - 1.0) / 2.0 * xc.log_det().as_f64()
        - 0.5 * trace_solve(&params.chol, x).as_f64()
        - nu * pf / 2.0 * std::f64::consts::LN_2
        - nu / 2.0 * params.chol.log_det().as_f64()
        - ln_multigamma(p, nu / 2.0);
    Ok(T::lit(v))
}

pub fn inv_wishart_ln_pdf<T: Real>(x: &Mat<T>, params: &WishartParams<T>) -> Result<T> {
    let p = params.dim();
    if x.rows() != p {
        return Err(Error::DimensionMismatch { what: "inverse-wishart point", expected: p, found: x.rows() });
    }
    let Some(xc) = spd_parts(x) else { return Ok(T::neg_infinity()) };
    let nu = params.df.as_f64();
    let pf = p as f64;
    let v = nu / 2.0 * params.chol.log_det().as_f64()
        - nu * pf / 2.0 * std::f64::consts::LN_2
        - ln_multigamma(p, nu / 2.0)
        - (nu + pf + 1.0) / 2.0 * xc.log_det().as_f64()
        - 0.5 * trace_solve(&xc, &params.scale).as_f64();
    Ok(T::lit(v))
}

/// Multivariate normal log-density with covariance given by its Cholesky factor.
pub fn mvn_ln_pdf<T: Real>(x: &[T], cov: &Cholesky<T>) -> T {
    let n = T::from_count(x.len());
    T::lit(-0.5 * LN_2PI) * n - T::lit(0.5) * cov.log_det() - T::lit(0.5) * cov.inv_quad(x)
}
