//! The nonseparable MSTCAR covariance `Σ_η` and the latent maps around it.
//!
//! `Σ_η = R̃* · blockdiag(G_1, …, G_{N_t}) · R̃*ᵀ` where `R̃*` is block
//! lower-triangular in time with diagonal `N_g × N_g` blocks holding the
//! per-group AR(1) Cholesky entries `{R̃_k}_{t,t'}`. Vectors of length
//! `N_g · N_t` are laid out time-outer, group-inner (index `t·N_g + k`);
//! [`to_group_outer`] and [`from_group_outer`] convert to the group-outer
//! ordering `(Z_{i1·}, …, Z_{iN_g·})`.
//!
//! Because the AR(1) factor has a closed form, `R̃*⁻¹` is block
//! lower-bidiagonal:
//!
//! ```text
//! v_1 = η_1,    v_t = (η_t − ρ_k η_{t−1}) / √(1 − ρ_k²)   (per group k)
//! ```
//!
//! so `Σ_η⁻¹` is block-tridiagonal and every solve reduces to `N_g × N_g`
//! work per year.

use rand::Rng;

use crate::dist::sample_mvn_cov;
use crate::error::{Error, Result};
use crate::graph::{GraphSpectrum, SpatialGraph};
use crate::linalg::{dot, BlockTridiag, Cholesky, Mat};
use crate::scalar::Real;

/// Rows above which [`SigmaEtaFactor::dense`] refuses to materialize.
pub const DENSE_LIMIT: usize = 10_000;

fn check_rho<T: Real>(rho: T) -> Result<()> {
    if !(rho.abs() < T::one()) {
        return Err(Error::InvalidParameter(format!("AR(1) correlation must satisfy |rho| < 1, got {rho}")));
    }
    Ok(())
}

/// AR(1) correlation matrix with entries `rho^|t − t'|`.
pub fn ar1_correlation<T: Real>(rho: T, n_times: usize) -> Result<Mat<T>> {
    check_rho(rho)?;
    Ok(Mat::from_fn(n_times, n_times, |t, s| rho.powi(t.abs_diff(s) as i32)))
}

/// Closed-form lower Cholesky factor of [`ar1_correlation`].
pub fn ar1_cholesky<T: Real>(rho: T, n_times: usize) -> Result<Mat<T>> {
    check_rho(rho)?;
    let s = (T::one() - rho * rho).sqrt();
    Ok(Mat::from_fn(n_times, n_times, |t, c| {
        if c > t {
            T::zero()
        } else if c == 0 {
            rho.powi(t as i32)
        } else {
            rho.powi((t - c) as i32) * s
        }
    }))
}

/// Per-group AR(1) correlations.
#[derive(Clone, Debug, PartialEq)]
pub struct Ar1Spec<T> {
    rho: Vec<T>,
    n_times: usize,
}

impl<T: Real> Ar1Spec<T> {
    pub fn new(rho: Vec<T>, n_times: usize) -> Result<Self> {
        if rho.is_empty() || n_times == 0 {
            return Err(Error::InvalidParameter("AR(1) spec needs at least one group and one time".into()));
        }
        for &r in &rho {
            check_rho(r)?;
        }
        Ok(Ar1Spec { rho, n_times })
    }

    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    pub fn n_groups(&self) -> usize {
        self.rho.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }
}

/// Canonical (time-outer) → group-outer.
pub fn to_group_outer<T: Copy>(x: &[T], n_groups: usize, n_times: usize) -> Vec<T> {
    assert_eq!(x.len(), n_groups * n_times);
    let mut out = Vec::with_capacity(x.len());
    for k in 0..n_groups {
        for t in 0..n_times {
            out.push(x[t * n_groups + k]);
        }
    }
    out
}

/// Group-outer → canonical (time-outer).
pub fn from_group_outer<T: Copy>(x: &[T], n_groups: usize, n_times: usize) -> Vec<T> {
    assert_eq!(x.len(), n_groups * n_times);
    let mut out = Vec::with_capacity(x.len());
    for t in 0..n_times {
        for k in 0..n_groups {
            out.push(x[k * n_times + t]);
        }
    }
    out
}

/// Factored `Σ_η` built from `ρ_1..ρ_{N_g}` and `G_1..G_{N_t}`.
#[derive(Clone, Debug)]
pub struct SigmaEtaFactor<T> {
    rho: Vec<T>,
    /// `√(1 − ρ_k²)`.
    innov: Vec<T>,
    year_covs: Vec<Mat<T>>,
    year_chol: Vec<Cholesky<T>>,
    year_prec: Vec<Mat<T>>,
}

/// Builds the factored `Σ_η`; every `G_t` must be positive definite.
pub fn assemble_sigma_eta<T: Real>(ar1: &Ar1Spec<T>, year_covs: Vec<Mat<T>>) -> Result<SigmaEtaFactor<T>> {
    SigmaEtaFactor::new(ar1, year_covs)
}

impl<T: Real> SigmaEtaFactor<T> {
    pub fn new(ar1: &Ar1Spec<T>, year_covs: Vec<Mat<T>>) -> Result<Self> {
        let ng = ar1.n_groups();
        if year_covs.len() != ar1.n_times() {
            return Err(Error::DimensionMismatch { what: "year covariances", expected: ar1.n_times(), found: year_covs.len() });
        }
        let mut year_chol = Vec::with_capacity(year_covs.len());
        let mut year_prec = Vec::with_capacity(year_covs.len());
        for (t, g) in year_covs.iter().enumerate() {
            if g.rows() != ng || g.cols() != ng {
                return Err(Error::DimensionMismatch { what: "year covariance size", expected: ng, found: g.rows() });
            }
            let ch = g.cholesky().map_err(|e| match e {
                Error::NotPositiveDefinite(m) => Error::NotPositiveDefinite(format!("G_{}: {m}", t + 1)),
                other => other,
            })?;
            year_prec.push(ch.inverse());
            year_chol.push(ch);
        }
        let innov = ar1.rho.iter().map(|&r| (T::one() - r * r).sqrt()).collect();
        Ok(SigmaEtaFactor { rho: ar1.rho.clone(), innov, year_covs, year_chol, year_prec })
    }

    #[inline]
    pub fn n_groups(&self) -> usize {
        self.rho.len()
    }

    #[inline]
    pub fn n_times(&self) -> usize {
        self.year_covs.len()
    }

    /// `N_g · N_t`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.n_groups() * self.n_times()
    }

    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    pub fn year_covs(&self) -> &[Mat<T>] {
        &self.year_covs
    }

    /// `G_t⁻¹`.
    pub fn year_precision(&self, t: usize) -> &Mat<T> {
        &self.year_prec[t]
    }

    pub fn year_cholesky(&self, t: usize) -> &Cholesky<T> {
        &self.year_chol[t]
    }

    /// Entry `(t, t')` of the AR(1) factor of group `k`.
    #[inline]
    pub fn ar1_entry(&self, k: usize, t: usize, tp: usize) -> T {
        let r = self.rho[k];
        if tp > t {
            T::zero()
        } else if tp == 0 {
            r.powi(t as i32)
        } else {
            r.powi((t - tp) as i32) * self.innov[k]
        }
    }

    /// Diagonal of the block `R̃*_{t,t'}`: `{R̃_k}_{t,t'}` for each group.
    pub fn tri_block(&self, t: usize, tp: usize) -> Vec<T> {
        (0..self.n_groups()).map(|k| self.ar1_entry(k, t, tp)).collect()
    }

    /// Full AR(1) factor `R̃_k`.
    pub fn ar1_factor(&self, k: usize) -> Mat<T> {
        let n = self.n_times();
        Mat::from_fn(n, n, |t, s| self.ar1_entry(k, t, s))
    }

    /// Coefficients `(a_t, b_t)` of `v_t = a_t ∘ η_t + b_t ∘ η_{t−1}`.
    #[inline]
    pub fn inverse_coefs(&self, k: usize, t: usize) -> (T, T) {
        if t == 0 {
            (T::one(), T::zero())
        } else {
            let s = self.innov[k];
            (s.recip(), -self.rho[k] / s)
        }
    }

    /// `η = R̃* v`.
    pub fn apply_factor(&self, v: &[T]) -> Vec<T> {
        let (ng, nt) = (self.n_groups(), self.n_times());
        assert_eq!(v.len(), ng * nt);
        let mut eta = vec![T::zero(); v.len()];
        for k in 0..ng {
            // η_t = ρ η_{t−1} + s v_t, η_0 = v_0
            let mut prev = T::zero();
            for t in 0..nt {
                let x = v[t * ng + k];
                let e = if t == 0 { x } else { self.rho[k] * prev + self.innov[k] * x };
                eta[t * ng + k] = e;
                prev = e;
            }
        }
        eta
    }

    /// `v = R̃*⁻¹ η`.
    pub fn solve_factor(&self, eta: &[T]) -> Vec<T> {
        let (ng, nt) = (self.n_groups(), self.n_times());
        assert_eq!(eta.len(), ng * nt);
        let mut v = vec![T::zero(); eta.len()];
        for t in 0..nt {
            for k in 0..ng {
                let (a, b) = self.inverse_coefs(k, t);
                let prev = if t == 0 { T::zero() } else { eta[(t - 1) * ng + k] };
                v[t * ng + k] = a * eta[t * ng + k] + b * prev;
            }
        }
        v
    }

    /// `R̃*⁻ᵀ w`.
    fn solve_factor_transpose(&self, w: &[T]) -> Vec<T> {
        let (ng, nt) = (self.n_groups(), self.n_times());
        let mut y = vec![T::zero(); w.len()];
        for t in 0..nt {
            for k in 0..ng {
                let (a, _) = self.inverse_coefs(k, t);
                let mut acc = a * w[t * ng + k];
                if t + 1 < nt {
                    let (_, b) = self.inverse_coefs(k, t + 1);
                    acc += b * w[(t + 1) * ng + k];
                }
                y[t * ng + k] = acc;
            }
        }
        y
    }

    /// `Σ_η x`.
    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let (ng, nt) = (self.n_groups(), self.n_times());
        // R̃*ᵀ x: (R̃*ᵀ x)_s = Σ_{t ≥ s} R̃_{t,s} x_t
        let mut u = vec![T::zero(); x.len()];
        for k in 0..ng {
            for s in 0..nt {
                let mut acc = T::zero();
                for t in s..nt {
                    acc += self.ar1_entry(k, t, s) * x[t * ng + k];
                }
                u[s * ng + k] = acc;
            }
        }
        let mut w = vec![T::zero(); x.len()];
        for t in 0..nt {
            let gt = self.year_covs[t].matvec(&u[t * ng..(t + 1) * ng]);
            w[t * ng..(t + 1) * ng].copy_from_slice(&gt);
        }
        self.apply_factor(&w)
    }

    /// `Σ_η⁻¹ x` by two triangular passes and per-year Cholesky solves.
    pub fn solve(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { what: "sigma_eta rhs", expected: self.dim(), found: x.len() });
        }
        let ng = self.n_groups();
        let mut v = self.solve_factor(x);
        for (t, ch) in self.year_chol.iter().enumerate() {
            let blk = ch.solve(&v[t * ng..(t + 1) * ng]);
            v[t * ng..(t + 1) * ng].copy_from_slice(&blk);
        }
        Ok(self.solve_factor_transpose(&v))
    }

    /// Column-wise [`SigmaEtaFactor::solve`].
    pub fn solve_mat(&self, rhs: &Mat<T>) -> Result<Mat<T>> {
        if rhs.rows() != self.dim() {
            return Err(Error::DimensionMismatch { what: "sigma_eta rhs", expected: self.dim(), found: rhs.rows() });
        }
        let mut out = Mat::zeros(rhs.rows(), rhs.cols());
        for j in 0..rhs.cols() {
            let col: Vec<T> = (0..rhs.rows()).map(|i| rhs[(i, j)]).collect();
            let x = self.solve(&col)?;
            for i in 0..rhs.rows() {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }

    /// `xᵀ Σ_η⁻¹ x`.
    pub fn inv_quad(&self, x: &[T]) -> T {
        let ng = self.n_groups();
        let v = self.solve_factor(x);
        self.year_chol.iter().enumerate().map(|(t, ch)| ch.inv_quad(&v[t * ng..(t + 1) * ng])).sum()
    }

    /// `log |Σ_η| = 2 Σ_k Σ_t log {R̃_k}_{t,t} + Σ_t log |G_t|`.
    pub fn log_det(&self) -> T {
        let nt = T::from_count(self.n_times() - 1);
        let ar: T = self.innov.iter().map(|&s| T::lit(2.0) * nt * s.ln()).sum();
        ar + self.year_chol.iter().map(Cholesky::log_det).sum::<T>()
    }

    /// `Σ_η⁻¹` as a block-tridiagonal matrix with `N_g × N_g` blocks.
    pub fn precision(&self) -> BlockTridiag<T> {
        let (ng, nt) = (self.n_groups(), self.n_times());
        let mut out = BlockTridiag::zeros(nt, ng);
        for t in 0..nt {
            let h = &self.year_prec[t];
            let coefs: Vec<(T, T)> = (0..ng).map(|k| self.inverse_coefs(k, t)).collect();
            for k in 0..ng {
                for l in 0..ng {
                    let hkl = h[(k, l)];
                    out.diag[t][(k, l)] += coefs[k].0 * hkl * coefs[l].0;
                    if t > 0 {
                        out.diag[t - 1][(k, l)] += coefs[k].1 * hkl * coefs[l].1;
                        // block (t, t−1): a_t H_t b_t
                        out.sub[t - 1][(k, l)] += coefs[k].0 * hkl * coefs[l].1;
                    }
                }
            }
        }
        out
    }

    /// Dense `Σ_η`, refused above [`DENSE_LIMIT`] rows.
    pub fn dense(&self) -> Result<Mat<T>> {
        let n = self.dim();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge { rows: n, limit: DENSE_LIMIT });
        }
        let (ng, nt) = (self.n_groups(), self.n_times());
        let mut m = Mat::zeros(n, n);
        for t in 0..nt {
            for tp in 0..=t {
                for k in 0..ng {
                    for l in 0..ng {
                        let mut acc = T::zero();
                        for s in 0..=tp {
                            acc += self.ar1_entry(k, t, s) * self.year_covs[s][(k, l)] * self.ar1_entry(l, tp, s);
                        }
                        m[(t * ng + k, tp * ng + l)] = acc;
                        m[(tp * ng + l, t * ng + k)] = acc;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Diagonal of `Σ_η` in canonical layout, without materializing it.
    pub fn diagonal(&self) -> Vec<T> {
        let (ng, nt) = (self.n_groups(), self.n_times());
        let mut d = vec![T::zero(); ng * nt];
        for t in 0..nt {
            for k in 0..ng {
                d[t * ng + k] = (0..=t)
                    .map(|s| {
                        let r = self.ar1_entry(k, t, s);
                        r * r * self.year_covs[s][(k, k)]
                    })
                    .sum();
            }
        }
        d
    }
}

/// Latent field: one row per region, each row a canonical `N_g·N_t` block.
pub type LatentField<T> = Mat<T>;

/// `Σ_{(i,j) ∈ E} (z_i − z_j)ᵀ Σ_η⁻¹ (z_i − z_j) = Zᵀ{(D − W) ⊗ Σ_η⁻¹}Z`.
pub fn icar_pairwise_quadratic<T: Real>(z: &LatentField<T>, f: &SigmaEtaFactor<T>, g: &SpatialGraph) -> Result<T> {
    check_field(z, f, g)?;
    let mut d = vec![T::zero(); f.dim()];
    let mut total = T::zero();
    for &(i, j) in g.edges() {
        for ((di, &a), &b) in d.iter_mut().zip(z.row(i)).zip(z.row(j)) {
            *di = a - b;
        }
        total += f.inv_quad(&d);
    }
    Ok(total)
}

fn check_field<T: Real>(z: &LatentField<T>, f: &SigmaEtaFactor<T>, g: &SpatialGraph) -> Result<()> {
    if z.rows() != g.node_count() {
        return Err(Error::DimensionMismatch { what: "latent field regions", expected: g.node_count(), found: z.rows() });
    }
    if z.cols() != f.dim() {
        return Err(Error::DimensionMismatch { what: "latent field block length", expected: f.dim(), found: z.cols() });
    }
    Ok(())
}

/// Spectral latents `η_ι` and `v_ι` for the nonzero eigenpairs of `D − W`.
///
/// Row `r` corresponds to eigenpair `null_count + r`.
#[derive(Clone, Debug)]
pub struct SpectralLatents<T> {
    pub eta: Mat<T>,
    pub v: Mat<T>,
}

/// `η_ι = √λ_ι Σ_i q_{ιi} z_i` for every nonzero eigenpair.
pub fn z_to_eta<T: Real>(z: &LatentField<T>, spectrum: &GraphSpectrum<T>) -> Result<Mat<T>> {
    let q = spectrum.eigenvectors();
    if z.rows() != q.rows() {
        return Err(Error::DimensionMismatch { what: "latent field regions", expected: q.rows(), found: z.rows() });
    }
    let range = spectrum.nonnull();
    let mut eta = Mat::zeros(range.len(), z.cols());
    for (r, iota) in range.enumerate() {
        let scale = spectrum.eigenvalues()[iota].sqrt();
        let row = eta.row_mut(r);
        for i in 0..z.rows() {
            let w = q[(i, iota)] * scale;
            for (e, &zi) in row.iter_mut().zip(z.row(i)) {
                *e += w * zi;
            }
        }
    }
    Ok(eta)
}

/// `v_{ιk·} = R̃_k⁻¹ η_{ιk·}` for every row of `eta`.
pub fn eta_to_v<T: Real>(eta: &Mat<T>, f: &SigmaEtaFactor<T>) -> Result<Mat<T>> {
    if eta.cols() != f.dim() {
        return Err(Error::DimensionMismatch { what: "eta block length", expected: f.dim(), found: eta.cols() });
    }
    let mut v = Mat::zeros(eta.rows(), eta.cols());
    for r in 0..eta.rows() {
        let row = f.solve_factor(eta.row(r));
        v.row_mut(r).copy_from_slice(&row);
    }
    Ok(v)
}

pub fn spectral_latents<T: Real>(
    z: &LatentField<T>,
    spectrum: &GraphSpectrum<T>,
    f: &SigmaEtaFactor<T>,
) -> Result<SpectralLatents<T>> {
    let eta = z_to_eta(z, spectrum)?;
    let v = eta_to_v(&eta, f)?;
    Ok(SpectralLatents { eta, v })
}

impl<T: Real> SpectralLatents<T> {
    /// `S_t = Σ_ι v_{ι·t} v_{ι·t}ᵀ`.
    pub fn year_scatter(&self, n_groups: usize) -> Vec<Mat<T>> {
        let nt = self.v.cols() / n_groups;
        let mut s: Vec<Mat<T>> = (0..nt).map(|_| Mat::zeros(n_groups, n_groups)).collect();
        for r in 0..self.v.rows() {
            let row = self.v.row(r);
            for (t, st) in s.iter_mut().enumerate() {
                let blk = &row[t * n_groups..(t + 1) * n_groups];
                st.add_outer(blk, blk, T::one());
            }
        }
        s
    }
}

/// Draws `Z ~ MSTCAR(G_1, …, G_{N_t}, ρ)` and returns it with the `η` used.
pub fn sample_mstcar_prior_with_latents<T: Real, R: Rng + ?Sized>(
    f: &SigmaEtaFactor<T>,
    spectrum: &GraphSpectrum<T>,
    rng: &mut R,
) -> (LatentField<T>, Mat<T>) {
    let ng = f.n_groups();
    let q = spectrum.eigenvectors();
    let range = spectrum.nonnull();
    let mut eta = Mat::zeros(range.len(), f.dim());
    let mut z = Mat::zeros(q.rows(), f.dim());
    for (r, iota) in range.enumerate() {
        let mut v = Vec::with_capacity(f.dim());
        for t in 0..f.n_times() {
            let draw = sample_mvn_cov(f.year_cholesky(t), rng);
            debug_assert_eq!(draw.len(), ng);
            v.extend(draw);
        }
        let e = f.apply_factor(&v);
        let scale = spectrum.eigenvalues()[iota].sqrt().recip();
        for i in 0..q.rows() {
            let w = q[(i, iota)] * scale;
            for (zi, &ej) in z.row_mut(i).iter_mut().zip(&e) {
                *zi += w * ej;
            }
        }
        eta.row_mut(r).copy_from_slice(&e);
    }
    (z, eta)
}

/// Draws `Z ~ MSTCAR(G_1, …, G_{N_t}, ρ)`, orthogonal to every component's
/// constant vector.
pub fn sample_mstcar_prior<T: Real, R: Rng + ?Sized>(
    f: &SigmaEtaFactor<T>,
    spectrum: &GraphSpectrum<T>,
    rng: &mut R,
) -> LatentField<T> {
    sample_mstcar_prior_with_latents(f, spectrum, rng).0
}

/// Block-tridiagonal part (in time) of `Σ_{(i,j) ∈ E} (z_i − z_j)(z_i − z_j)ᵀ`.
///
/// This equals `Σ_ι η_ι η_ιᵀ` restricted to the blocks that `R̃*⁻¹` can
/// couple, which is all the `G_t` and `ρ_k` conditionals need; it is
/// computed from edges alone, so inference never needs the graph spectrum.
#[derive(Clone, Debug)]
pub struct EdgeScatter<T> {
    /// `M_{t,t}`.
    pub diag: Vec<Mat<T>>,
    /// `M_{t+1,t}`.
    pub sub: Vec<Mat<T>>,
    /// Number of spectral terms, `N_s − c`.
    pub n_terms: usize,
}

impl<T: Real> EdgeScatter<T> {
    pub fn from_field(z: &LatentField<T>, g: &SpatialGraph, n_groups: usize) -> Result<Self> {
        if z.rows() != g.node_count() || z.cols() % n_groups != 0 {
            return Err(Error::DimensionMismatch { what: "edge scatter field", expected: g.node_count(), found: z.rows() });
        }
        let nt = z.cols() / n_groups;
        let mut diag: Vec<Mat<T>> = (0..nt).map(|_| Mat::zeros(n_groups, n_groups)).collect();
        let mut sub: Vec<Mat<T>> = (0..nt.saturating_sub(1)).map(|_| Mat::zeros(n_groups, n_groups)).collect();
        let mut d = vec![T::zero(); z.cols()];
        for &(i, j) in g.edges() {
            for ((di, &a), &b) in d.iter_mut().zip(z.row(i)).zip(z.row(j)) {
                *di = a - b;
            }
            for t in 0..nt {
                let dt = &d[t * n_groups..(t + 1) * n_groups];
                diag[t].add_outer(dt, dt, T::one());
                if t + 1 < nt {
                    let dn = &d[(t + 1) * n_groups..(t + 2) * n_groups];
                    sub[t].add_outer(dn, dt, T::one());
                }
            }
        }
        Ok(EdgeScatter { diag, sub, n_terms: g.node_count() - g.component_count() })
    }

    pub fn n_groups(&self) -> usize {
        self.diag.first().map_or(0, Mat::rows)
    }

    pub fn n_times(&self) -> usize {
        self.diag.len()
    }

    /// `S_t(ρ) = Σ_ι v_{ι·t} v_{ι·t}ᵀ` for the AR(1) correlations `rho`.
    pub fn year_scatter(&self, rho: &[T]) -> Vec<Mat<T>> {
        (0..self.n_times()).map(|t| self.year_scatter_at(rho, t)).collect()
    }

    pub fn year_scatter_at(&self, rho: &[T], t: usize) -> Mat<T> {
        let ng = self.n_groups();
        let coef = |k: usize| -> (T, T) {
            if t == 0 {
                (T::one(), T::zero())
            } else {
                let s = (T::one() - rho[k] * rho[k]).sqrt();
                (s.recip(), -rho[k] / s)
            }
        };
        let c: Vec<(T, T)> = (0..ng).map(coef).collect();
        Mat::from_fn(ng, ng, |k, l| {
            let (ak, bk) = c[k];
            let (al, bl) = c[l];
            let mut s = ak * al * self.diag[t][(k, l)];
            if t > 0 {
                let m_cur_prev = self.sub[t - 1][(k, l)]; // M_{t,t−1}[k,l]
                let m_prev_cur = self.sub[t - 1][(l, k)]; // M_{t−1,t}[k,l]
                s += ak * bl * m_cur_prev + bk * al * m_prev_cur + bk * bl * self.diag[t - 1][(k, l)];
            }
            s
        })
    }

    /// `Σ_t tr(G_t⁻¹ S_t(ρ))`, the MSTCAR quadratic form.
    pub fn quadratic(&self, f: &SigmaEtaFactor<T>) -> T {
        (0..self.n_times())
            .map(|t| trace_product(f.year_precision(t), &self.year_scatter_at(f.rho(), t)))
            .sum()
    }

    /// `log π(Z | Σ_η)` up to an additive constant:
    /// `−(N_s − c)/2 · log|Σ_η| − ½ Zᵀ{(D − W) ⊗ Σ_η⁻¹}Z`.
    pub fn log_density(&self, f: &SigmaEtaFactor<T>) -> T {
        let half = T::lit(0.5);
        -half * T::from_count(self.n_terms) * f.log_det() - half * self.quadratic(f)
    }
}

/// `tr(A B)` for square matrices of equal size.
pub fn trace_product<T: Real>(a: &Mat<T>, b: &Mat<T>) -> T {
    let n = a.rows();
    (0..n).map(|i| dot(a.row(i), &(0..n).map(|j| b[(j, i)]).collect::<Vec<_>>())).sum()
}
