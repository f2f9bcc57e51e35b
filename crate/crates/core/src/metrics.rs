//! Posterior functionals of the fitted rates.
//!
//! Rates are per person-year; exports multiply by [`PER_100K`]. Every
//! functional is evaluated draw by draw and summarized afterwards.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{Ar1Spec, SigmaEtaFactor};
use crate::dist::sample_poisson;
use crate::error::{Error, Result};
use crate::panel::CountPanel;
use crate::rng::{tag, RngStream};
use crate::sampler::{Dims, SampleStore};
use crate::scalar::Real;
use crate::summary::{percentile_sorted, sorted, Interval};

pub const PER_100K: f64 = 1e5;

/// Stored draws of `λ_ikt = exp(θ_ikt)`, draw-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePanelDraws {
    dims: Dims,
    rates: Vec<f64>,
}

impl RatePanelDraws {
    pub fn new(dims: Dims, rates: Vec<f64>) -> Result<Self> {
        let n = dims.n_cells();
        if rates.is_empty() {
            return Err(Error::EmptyStore);
        }
        if rates.len() % n != 0 {
            return Err(Error::DimensionMismatch { what: "rate draws", expected: n, found: rates.len() % n });
        }
        if let Some(r) = rates.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!("rates must be positive and finite, found {r}")));
        }
        Ok(RatePanelDraws { dims, rates })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_draws(&self) -> usize {
        self.rates.len() / self.dims.n_cells()
    }

    pub fn draw(&self, l: usize) -> &[f64] {
        let n = self.dims.n_cells();
        &self.rates[l * n..(l + 1) * n]
    }

    /// All draws of one cell.
    pub fn cell(&self, c: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|l| self.draw(l)[c]).collect()
    }
}

pub fn rates_from_store<T: Real>(store: &SampleStore<T>) -> Result<RatePanelDraws> {
    if store.n_theta_draws() == 0 {
        return Err(Error::EmptyStore);
    }
    RatePanelDraws::new(store.dims(), store.theta.iter().map(|t| t.as_f64().exp()).collect())
}

fn check_draw(rates: &[f64], panel: &CountPanel) -> Result<()> {
    let n = panel.index().n_cells();
    if rates.len() != n {
        return Err(Error::DimensionMismatch { what: "rate draw", expected: n, found: rates.len() });
    }
    Ok(())
}

/// Population-weighted layer means `λ_·kt`, indexed by canonical layer.
pub fn national_rates(rates: &[f64], panel: &CountPanel) -> Result<Vec<f64>> {
    check_draw(rates, panel)?;
    let ix = panel.index();
    let b = ix.block_len();
    let mut num = vec![0.0; b];
    let mut den = vec![0.0; b];
    for (c, (&r, &n)) in rates.iter().zip(panel.populations()).enumerate() {
        num[c % b] += n as f64 * r;
        den[c % b] += n as f64;
    }
    (0..b)
        .map(|l| {
            if den[l] == 0.0 {
                let (k, t) = (l % ix.n_groups(), l / ix.n_groups());
                Err(Error::ZeroPopulationLayer { group: ix.group_labels()[k].clone(), time: ix.time_labels()[t].clone() })
            } else {
                Ok(num[l] / den[l])
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeclineMode {
    PerGroup,
    AgeAggregated,
}

/// Relative decline from `t` to `t2`; positive means the rate fell.
/// `PerGroup` returns `i·N_g + k` entries, `AgeAggregated` one per region.
pub fn percent_decline(rates: &[f64], panel: &CountPanel, t: usize, t2: usize, mode: DeclineMode) -> Result<Vec<f64>> {
    check_draw(rates, panel)?;
    let ix = panel.index();
    if t >= t2 || t2 >= ix.n_times() {
        return Err(Error::InvalidParameter(format!("decline needs t < t' < {}, got ({t}, {t2})", ix.n_times())));
    }
    let (ns, ng) = (ix.n_regions(), ix.n_groups());
    Ok(match mode {
        DeclineMode::PerGroup => (0..ns * ng)
            .map(|j| {
                let (i, k) = (j / ng, j % ng);
                let a = rates[ix.cell(i, k, t)];
                (a - rates[ix.cell(i, k, t2)]) / a
            })
            .collect(),
        DeclineMode::AgeAggregated => (0..ns)
            .map(|i| {
                let w = |s: usize| (0..ng).map(|k| panel.n(i, k, s) as f64 * rates[ix.cell(i, k, s)]).sum::<f64>();
                let a = w(t);
                (a - w(t2)) / a
            })
            .collect(),
    })
}

/// Rates each county would have had declining at the national pace,
/// `λ_ik1 (1 − Δ_·k(1,t)) = λ_ik1 λ_·kt / λ_·k1`, per cell.
pub fn national_pace_rates(rates: &[f64], panel: &CountPanel) -> Result<Vec<f64>> {
    let nat = national_rates(rates, panel)?;
    let ix = panel.index();
    let ng = ix.n_groups();
    for k in 0..ng {
        if nat[k] == 0.0 {
            return Err(Error::ZeroNationalRate { group: ix.group_labels()[k].clone(), time: ix.time_labels()[0].clone() });
        }
    }
    Ok((0..ix.n_cells())
        .map(|c| {
            let (i, k, t) = ix.coords(c);
            let decline = (nat[k] - nat[ix.layer(k, t)]) / nat[k];
            rates[ix.cell(i, k, 0)] * (1.0 - decline)
        })
        .collect())
}

/// Saved person-years per 100,000 for every region from one draw.
/// Years in which a region has no population contribute zero.
pub fn spy(rates: &[f64], panel: &CountPanel) -> Result<Vec<f64>> {
    let ix = panel.index();
    let (ns, ng, nt) = (ix.n_regions(), ix.n_groups(), ix.n_times());
    if nt < 2 {
        return Err(Error::InvalidParameter("saved person-years need at least two time points".into()));
    }
    let expected = national_pace_rates(rates, panel)?;
    Ok((0..ns)
        .map(|i| {
            let total: f64 = (1..nt)
                .map(|t| {
                    let (mut num, mut den) = (0.0, 0.0);
                    for k in 0..ng {
                        let c = ix.cell(i, k, t);
                        let n = panel.populations()[c] as f64;
                        num += n * (expected[c] - rates[c]);
                        den += n;
                    }
                    if den > 0.0 { num / den } else { 0.0 }
                })
                .sum();
            total / (nt - 1) as f64 * PER_100K
        })
        .collect())
}

/// Per-region posterior summary of saved person-years.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpyResult {
    pub regions: Vec<Interval>,
}

pub fn spy_posterior(draws: &RatePanelDraws, panel: &CountPanel) -> Result<SpyResult> {
    let per_draw: Vec<Vec<f64>> =
        (0..draws.n_draws()).into_par_iter().map(|l| spy(draws.draw(l), panel)).collect::<Result<_>>()?;
    let ns = panel.index().n_regions();
    let regions = (0..ns).map(|i| Interval::central95(&per_draw.iter().map(|d| d[i]).collect::<Vec<_>>())).collect();
    Ok(SpyResult { regions })
}

/// Direct age standardization `Σ_k w_k λ_ikt`, indexed `i·N_t + t`.
pub fn age_standardized_rates(rates: &[f64], dims: Dims, weights: &[f64]) -> Result<Vec<f64>> {
    let (ns, ng, nt) = (dims.n_regions, dims.n_groups, dims.n_times);
    if rates.len() != dims.n_cells() {
        return Err(Error::DimensionMismatch { what: "rate draw", expected: dims.n_cells(), found: rates.len() });
    }
    if weights.len() != ng {
        return Err(Error::DimensionMismatch { what: "standard weights", expected: ng, found: weights.len() });
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidParameter("standard weights must be nonnegative".into()));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("standard weights sum to {s}, not 1")));
    }
    let b = dims.block_len();
    Ok((0..ns * nt)
        .map(|j| {
            let (i, t) = (j / nt, j % nt);
            (0..ng).map(|k| weights[k] * rates[i * b + t * ng + k]).sum()
        })
        .collect())
}

/// Per-group summaries over time of the diagonal of `Σ_η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectories {
    /// `groups[k][t]`.
    pub groups: Vec<Vec<Interval>>,
}

pub fn sigma_eta_trajectories<T: Real>(store: &SampleStore<T>) -> Result<Trajectories> {
    let nh = store.n_hyper_draws();
    if nh == 0 {
        return Err(Error::EmptyStore);
    }
    let d = store.dims();
    let (ng, nt) = (d.n_groups, d.n_times);
    let diags: Vec<Vec<f64>> = (0..nh)
        .into_par_iter()
        .map(|l| {
            let f = SigmaEtaFactor::new(&Ar1Spec::new(store.rho_draw(l).to_vec(), nt)?, store.year_covs_draw(l))?;
            Ok(f.diagonal().into_iter().map(Real::as_f64).collect())
        })
        .collect::<Result<_>>()?;
    let groups = (0..ng)
        .map(|k| {
            (0..nt).map(|t| Interval::central95(&diags.iter().map(|x| x[t * ng + k]).collect::<Vec<_>>())).collect()
        })
        .collect();
    Ok(Trajectories { groups })
}

/// Replicated counts, cell-major: `counts[c·n_rep + ℓ]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replicates {
    pub n_cells: usize,
    pub n_rep: usize,
    pub counts: Vec<u64>,
}

impl Replicates {
    pub fn cell(&self, c: usize) -> &[u64] {
        &self.counts[c * self.n_rep..(c + 1) * self.n_rep]
    }
}

/// `n_rep` Poisson replicates of one cell; replicate `ℓ` uses `rate(ℓ)`.
fn replicate_cell(n: u64, n_rep: usize, rate: impl Fn(usize) -> f64, stream: RngStream) -> Result<Vec<u64>> {
    if n == 0 {
        return Ok(vec![0; n_rep]);
    }
    let mut rng = stream.rng();
    (0..n_rep).map(|l| sample_poisson(n as f64 * rate(l), &mut rng)).collect()
}

fn check_reps(n_rep: usize) -> Result<()> {
    if n_rep == 0 {
        return Err(Error::InvalidParameter("replicate count must be positive".into()));
    }
    Ok(())
}

/// `Y*_ikt ~ Pois(n_ikt λ_ikt)`; replicate `ℓ` uses stored draw `ℓ mod L`.
pub fn predictive_replicates(draws: &RatePanelDraws, panel: &CountPanel, n_rep: usize, stream: RngStream) -> Result<Replicates> {
    check_reps(n_rep)?;
    check_draw(draws.draw(0), panel)?;
    let nd = draws.n_draws();
    let s = stream.child(tag::REPLICATES);
    let per_cell: Vec<Vec<u64>> = (0..panel.index().n_cells())
        .into_par_iter()
        .map(|c| replicate_cell(panel.populations()[c], n_rep, |l| draws.draw(l % nd)[c], s.child(c as u64)))
        .collect::<Result<_>>()?;
    Ok(Replicates { n_cells: per_cell.len(), n_rep, counts: per_cell.concat() })
}

/// Per-region share of predictive intervals containing the observed count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub band: (f64, f64),
    pub regions: Vec<f64>,
    pub mean_coverage: f64,
    pub mean_width: f64,
    /// `(lo, hi)` per cell.
    pub intervals: Vec<(f64, f64)>,
}

fn coverage_from_intervals(panel: &CountPanel, band: (f64, f64), intervals: Vec<(f64, f64)>) -> CoverageReport {
    let ix = panel.index();
    let b = ix.block_len();
    let regions: Vec<f64> = (0..ix.n_regions())
        .map(|i| {
            let hit = (i * b..(i + 1) * b)
                .filter(|&c| {
                    let y = panel.deaths()[c] as f64;
                    intervals[c].0 <= y && y <= intervals[c].1
                })
                .count();
            hit as f64 / b as f64
        })
        .collect();
    let mean_coverage = regions.iter().sum::<f64>() / regions.len() as f64;
    let mean_width = intervals.iter().map(|(lo, hi)| hi - lo).sum::<f64>() / intervals.len() as f64;
    CoverageReport { band, regions, mean_coverage, mean_width, intervals }
}

fn count_interval(reps: &[u64], band: (f64, f64)) -> (f64, f64) {
    let s = sorted(reps.iter().map(|&x| x as f64));
    (percentile_sorted(&s, band.0), percentile_sorted(&s, band.1))
}

pub fn coverage_assess(reps: &Replicates, panel: &CountPanel) -> Result<CoverageReport> {
    coverage_assess_band(reps, panel, (0.025, 0.975))
}

pub fn coverage_assess_band(reps: &Replicates, panel: &CountPanel, band: (f64, f64)) -> Result<CoverageReport> {
    let n = panel.index().n_cells();
    if reps.n_cells != n {
        return Err(Error::DimensionMismatch { what: "replicate cells", expected: n, found: reps.n_cells });
    }
    let intervals = (0..n).into_par_iter().map(|c| count_interval(reps.cell(c), band)).collect();
    Ok(coverage_from_intervals(panel, band, intervals))
}

/// Same as [`predictive_replicates`] followed by [`coverage_assess`], but
/// without holding every replicate in memory. Streams are identical, so the
/// report equals the two-step result.
pub fn predictive_coverage(draws: &RatePanelDraws, panel: &CountPanel, n_rep: usize, stream: RngStream) -> Result<CoverageReport> {
    check_reps(n_rep)?;
    check_draw(draws.draw(0), panel)?;
    let nd = draws.n_draws();
    let s = stream.child(tag::REPLICATES);
    let band = (0.025, 0.975);
    let intervals = (0..panel.index().n_cells())
        .into_par_iter()
        .map(|c| {
            let r = replicate_cell(panel.populations()[c], n_rep, |l| draws.draw(l % nd)[c], s.child(c as u64))?;
            Ok(count_interval(&r, band))
        })
        .collect::<Result<_>>()?;
    Ok(coverage_from_intervals(panel, band, intervals))
}

pub(crate) fn replicate_cells(
    panel: &CountPanel,
    n_rep: usize,
    stream: RngStream,
    rate: impl Fn(usize, &mut rand_chacha::ChaCha8Rng) -> Result<f64> + Sync,
) -> Result<Vec<Vec<u64>>> {
    check_reps(n_rep)?;
    (0..panel.index().n_cells())
        .into_par_iter()
        .map(|c| {
            let n = panel.populations()[c];
            if n == 0 {
                return Ok(vec![0; n_rep]);
            }
            let mut rng = stream.child(c as u64).rng();
            (0..n_rep).map(|_| sample_poisson(n as f64 * rate(c, &mut rng)?, &mut rng)).collect()
        })
        .collect()
}

pub(crate) fn coverage_of_cells(panel: &CountPanel, per_cell: &[Vec<u64>]) -> CoverageReport {
    let band = (0.025, 0.975);
    coverage_from_intervals(panel, band, per_cell.par_iter().map(|r| count_interval(r, band)).collect())
}

/// Flags `(region, group)` pairs, indexed `i·N_g + k`, whose population at
/// `ref_time` is below `threshold`.
pub fn suppression_flags(panel: &CountPanel, ref_time: usize, threshold: u64) -> Vec<bool> {
    let ix = panel.index();
    (0..ix.n_regions() * ix.n_groups()).map(|j| panel.n(j / ix.n_groups(), j % ix.n_groups(), ref_time) < threshold).collect()
}

/// A region is flagged when any of its groups is.
pub fn region_suppressed(flags: &[bool], n_groups: usize) -> Vec<bool> {
    flags.chunks(n_groups).map(|c| c.iter().any(|&f| f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelIndex;
    use proptest::prelude::*;

    fn panel(ns: usize, ng: usize, nt: usize, pops: Vec<u64>) -> CountPanel {
        let ix = PanelIndex::synthetic(ns, ng, nt).unwrap();
        let n = ix.n_cells();
        CountPanel::new(ix, vec![0; n], pops).unwrap()
    }

    /// Cell value in canonical order from an `(i, k, t)` closure.
    fn cells(ns: usize, ng: usize, nt: usize, f: impl Fn(usize, usize, usize) -> f64) -> Vec<f64> {
        let ix = PanelIndex::synthetic(ns, ng, nt).unwrap();
        (0..ix.n_cells()).map(|c| {
            let (i, k, t) = ix.coords(c);
            f(i, k, t)
        }).collect()
    }

    #[test]
    fn rates_exponentiate_theta() {
        let d = Dims::new(1, 1, 2);
        let r = RatePanelDraws::new(d, vec![0f64.exp(), 0.005f64.ln().exp()]).unwrap();
        assert_eq!(r.draw(0)[0], 1.0);
        assert!((r.draw(0)[1] - 0.005).abs() < 1e-15);
        assert!(RatePanelDraws::new(d, vec![]).is_err());
        assert!(RatePanelDraws::new(d, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn national_rate_weighted_mean() {
        let p = panel(2, 1, 1, vec![100, 300]);
        assert!((national_rates(&[0.01, 0.02], &p).unwrap()[0] - 0.0175).abs() < 1e-15);
        let p1 = panel(1, 1, 1, vec![50]);
        assert_eq!(national_rates(&[0.3], &p1).unwrap(), vec![0.3]);
        let p0 = panel(2, 1, 1, vec![0, 0]);
        assert!(matches!(national_rates(&[0.1, 0.2], &p0), Err(Error::ZeroPopulationLayer { .. })));
    }

    #[test]
    fn declines() {
        let p = panel(1, 2, 2, vec![100; 4]);
        let r = cells(1, 2, 2, |_, k, t| [[0.2, 0.1], [0.1, 0.1]][t][k]);
        let agg = percent_decline(&r, &p, 0, 1, DeclineMode::AgeAggregated).unwrap();
        assert!((agg[0] - 1.0 / 3.0).abs() < 1e-15);
        let per = percent_decline(&r, &p, 0, 1, DeclineMode::PerGroup).unwrap();
        assert_eq!(per, vec![0.5, 0.0]);
        assert!(percent_decline(&r, &p, 1, 1, DeclineMode::PerGroup).is_err());
        assert!(percent_decline(&r, &p, 1, 0, DeclineMode::PerGroup).is_err());
    }

    #[test]
    fn spy_two_county_example() {
        let p = panel(2, 1, 2, vec![100; 4]);
        let r = cells(2, 1, 2, |i, _, t| [[0.2, 0.1], [0.2, 0.2]][i][t]);
        let s = spy(&r, &p).unwrap();
        assert!((s[0] - 5000.0).abs() <= 5000.0 * 1e-12, "{s:?}");
        assert!((s[1] + 5000.0).abs() <= 5000.0 * 1e-12, "{s:?}");
    }

    #[test]
    fn spy_zero_national_baseline_rejected() {
        let p = panel(1, 1, 2, vec![0, 10]);
        assert!(spy(&[0.1, 0.1], &p).is_err());
    }

    #[test]
    fn age_standardization() {
        let d = Dims::new(1, 3, 1);
        let v = age_standardized_rates(&[0.01, 0.02, 0.04], d, &[0.5, 0.3, 0.2]).unwrap();
        assert!((v[0] - 0.019).abs() < 1e-15);
        assert_eq!(age_standardized_rates(&[0.01, 0.02, 0.04], d, &[1.0, 0.0, 0.0]).unwrap(), vec![0.01]);
        assert!(age_standardized_rates(&[0.01, 0.02, 0.04], d, &[0.5, 0.3, 0.3]).is_err());
    }

    #[test]
    fn coverage_degenerate_cases() {
        let ix = PanelIndex::synthetic(1, 1, 2).unwrap();
        let p = CountPanel::new(ix, vec![3, 4], vec![10, 10]).unwrap();
        let hit = Replicates { n_cells: 2, n_rep: 3, counts: vec![3, 3, 3, 4, 4, 4] };
        assert_eq!(coverage_assess(&hit, &p).unwrap().mean_coverage, 1.0);
        let miss = Replicates { n_cells: 2, n_rep: 3, counts: vec![5, 5, 5, 0, 0, 0] };
        let r = coverage_assess(&miss, &p).unwrap();
        assert_eq!(r.regions, vec![0.0]);
        assert_eq!(r.mean_width, 0.0);
    }

    #[test]
    fn replicates_zero_population_and_determinism() {
        let ix = PanelIndex::synthetic(2, 1, 1).unwrap();
        let p = CountPanel::new(ix, vec![0, 1], vec![0, 1000]).unwrap();
        let d = RatePanelDraws::new(Dims::new(2, 1, 1), vec![0.01, 0.01, 0.02, 0.02]).unwrap();
        let a = predictive_replicates(&d, &p, 50, RngStream::new(4)).unwrap();
        assert!(a.cell(0).iter().all(|&y| y == 0));
        assert_eq!(a, predictive_replicates(&d, &p, 50, RngStream::new(4)).unwrap());
        assert_ne!(a, predictive_replicates(&d, &p, 50, RngStream::new(5)).unwrap());
        let streamed = predictive_coverage(&d, &p, 50, RngStream::new(4)).unwrap();
        assert_eq!(streamed, coverage_assess(&a, &p).unwrap());
    }

    #[test]
    fn suppression() {
        let pops = cells(2, 2, 2, |i, k, t| match (i, k, t) {
            (0, 1, 0) => 99.0,
            (1, 1, 1) => 20.0,
            _ => 150.0,
        });
        let p = panel(2, 2, 2, pops.iter().map(|&x| x as u64).collect());
        let f = suppression_flags(&p, 0, 100);
        assert_eq!(f, vec![false, true, false, false]);
        assert_eq!(region_suppressed(&f, 2), vec![true, false]);
    }

    proptest! {
        #[test]
        fn national_rate_within_county_range(
            rates in prop::collection::vec(1e-4f64..1.0, 6),
            pops in prop::collection::vec(1u64..10_000, 6),
        ) {
            let p = panel(3, 1, 2, pops);
            let nat = national_rates(&rates, &p).unwrap();
            for t in 0..2 {
                let layer: Vec<f64> = (0..3).map(|i| rates[i * 2 + t]).collect();
                let lo = layer.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = layer.iter().cloned().fold(0.0, f64::max);
                prop_assert!(lo * (1.0 - 1e-12) <= nat[t] && nat[t] <= hi * (1.0 + 1e-12));
            }
        }

        #[test]
        fn spy_vanishes_on_national_trajectory(
            base in prop::collection::vec(1e-4f64..0.1, 4),
            trend in prop::collection::vec(0.2f64..2.0, 3),
            pops in prop::collection::vec(1u64..10_000, 4),
        ) {
            // 2 regions, 2 groups, 3 times; populations fixed over time and
            // county rates following a common per-group trend
            let n = cells(2, 2, 3, |i, k, _| pops[i * 2 + k] as f64);
            let p = panel(2, 2, 3, n.iter().map(|&x| x as u64).collect());
            let r = cells(2, 2, 3, |i, k, t| base[i * 2 + k] * if t == 0 { 1.0 } else { trend[t] * (1.0 + k as f64) });
            let s = spy(&r, &p).unwrap();
            let scale = r.iter().cloned().fold(0.0, f64::max) * PER_100K;
            for v in s {
                prop_assert!(v.abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn coverage_monotone_in_band(seed in 0u64..500, narrow in 0.0f64..0.45) {
            let ix = PanelIndex::synthetic(3, 1, 2).unwrap();
            let p = CountPanel::new(ix, vec![5, 9, 0, 12, 7, 3], vec![100; 6]).unwrap();
            let d = RatePanelDraws::new(Dims::new(3, 1, 2), vec![0.07; 6]).unwrap();
            let reps = predictive_replicates(&d, &p, 60, RngStream::new(seed)).unwrap();
            let wide = coverage_assess_band(&reps, &p, (0.025, 0.975)).unwrap();
            let lo = 0.025 + narrow;
            let tight = coverage_assess_band(&reps, &p, (lo.min(0.5), (1.0 - lo).max(0.5))).unwrap();
            for (a, b) in wide.regions.iter().zip(&tight.regions) {
                prop_assert!(b <= a);
            }
        }
    }
}
