//! Posterior summaries and convergence diagnostics.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Percentile `p ∈ [0, 1]` of sorted data, interpolating linearly between
/// order statistics at position `(n − 1)p`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(xs: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn percentile(xs: &[f64], p: f64) -> f64 {
    percentile_sorted(&sorted(xs.iter().copied()), p)
}

/// Posterior median with a central interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Median and `(2.5, 97.5)` percentiles.
    pub fn central95(xs: &[f64]) -> Self {
        Self::with_band(xs, 0.025, 0.975)
    }

    pub fn with_band(xs: &[f64], lo: f64, hi: f64) -> Self {
        let s = sorted(xs.iter().copied());
        Interval { median: percentile_sorted(&s, 0.5), lo: percentile_sorted(&s, lo), hi: percentile_sorted(&s, hi) }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Autocorrelations at every lag, via zero-padded FFT.
pub fn autocorrelation(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if c0 == 0.0 {
        return vec![1.0; n];
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Effective sample size with Geyer's initial monotone sequence estimator.
/// A constant chain has ESS equal to its length.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let rho = autocorrelation(xs);
    if rho.iter().all(|&r| r == 1.0) {
        return n as f64;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while k + 1 < n {
        let pair = rho[k] + rho[k + 1];
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 2;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    n as f64 / tau
}

/// Split-chain potential scale reduction of a single chain (two halves).
/// `None` when either half has zero variance.
pub fn split_rhat(xs: &[f64]) -> Option<f64> {
    let half = xs.len() / 2;
    if half < 2 {
        return None;
    }
    let chains = [&xs[..half], &xs[xs.len() - half..]];
    let stats: Vec<(f64, f64)> = chains
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / half as f64;
            let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (half - 1) as f64;
            (m, v)
        })
        .collect();
    let w = (stats[0].1 + stats[1].1) / 2.0;
    if w == 0.0 {
        return None;
    }
    let grand = (stats[0].0 + stats[1].0) / 2.0;
    let b = half as f64 * stats.iter().map(|(m, _)| (m - grand).powi(2)).sum::<f64>();
    let var_plus = (half - 1) as f64 / half as f64 * w + b / half as f64;
    Some((var_plus / w).sqrt())
}

/// Summary row for one scalar parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub interval: Interval,
    pub ess: f64,
    pub rhat: Option<f64>,
}

pub fn summarize_param(name: impl Into<String>, xs: &[f64]) -> ParamSummary {
    ParamSummary {
        name: name.into(),
        mean: xs.iter().sum::<f64>() / xs.len() as f64,
        interval: Interval::central95(xs),
        ess: effective_sample_size(xs),
        rhat: split_rhat(xs),
    }
}
