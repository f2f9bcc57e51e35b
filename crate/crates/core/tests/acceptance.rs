//! Acceptance criteria, one verdict line each.
//!
//! Run with `cargo test -p mstcar --test acceptance`. The process fails if
//! any criterion fails, except for the parts of criterion 9 that need more
//! cores than the host has; those are still reported as FAIL.

mod common;

use std::time::{Duration, Instant};

use common::oracles;
use mstcar::baseline::{eb_hyperparams, eb_posterior, eb_predictive_coverage, eb_predictive_replicates, GammaPosterior};
use mstcar::covariance::{ar1_cholesky, ar1_correlation, assemble_sigma_eta, icar_pairwise_quadratic, Ar1Spec};
use mstcar::dist::sample_normal;
use mstcar::graph::SpatialGraph;
use mstcar::linalg::Mat;
use mstcar::metrics::{predictive_coverage, rates_from_store, spy};
use mstcar::panel::{CountPanel, PanelIndex};
use mstcar::rng::RngStream;
use mstcar::sampler::{init_proposals, init_state, run_chain, update_theta, Chain, ChainConfig, Counts, Dims, HyperParams};
use mstcar::simulate::{simulate_panel, PopulationSpec, SimTruth};
use mstcar::summary::Interval;
use nalgebra::DMatrix;
use rand::Rng;

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    /// Failure caused only by missing hardware.
    host_bound: bool,
}

fn verdict(id: u32, name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { id, name, pass, detail, host_bound: false }
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn c1() -> Verdict {
    let (err, dt) = timed(|| {
        let mut worst = 0.0f64;
        for rho in [-0.5, 0.0, 0.3, 0.9, 0.99] {
            for nt in [2, 5, 41] {
                let l = ar1_cholesky(rho, nt).unwrap();
                worst = worst.max(l.matmul(&l.transpose()).max_abs_diff(&ar1_correlation(rho, nt).unwrap()));
            }
        }
        worst
    });
    let pass = err < 1e-12 && dt < Duration::from_secs(1);
    verdict(1, "AR(1) Cholesky identity", pass, format!("max |LL' - R| = {err:.1e}, {dt:.1?}"))
}

fn c2() -> Verdict {
    let g = Mat::<f64>::from_f64_rows(&[vec![1.0, 0.4, -0.2], vec![0.4, 0.8, 0.1], vec![-0.2, 0.1, 0.5]]);
    let rho = 0.65;
    let f = assemble_sigma_eta(&Ar1Spec::new(vec![rho; 3], 5).unwrap(), vec![g.clone(); 5]).unwrap();
    let d = f.dense().unwrap();
    let r = ar1_correlation(rho, 5).unwrap();
    let mut err = 0.0f64;
    for a in 0..15 {
        for b in 0..15 {
            err = err.max((d[(a, b)] - r[(a / 3, b / 3)] * g[(a % 3, b % 3)]).abs());
        }
    }
    verdict(2, "Separability collapse", err < 1e-10, format!("max entry error {err:.1e}"))
}

fn c3() -> Verdict {
    let mut rng = RngStream::new(303).rng();
    let mut edges = Vec::new();
    for i in 0..10 {
        for j in i + 1..10 {
            if rng.random::<f64>() < 0.3 {
                edges.push((i, j));
            }
        }
    }
    let g = SpatialGraph::from_edges(10, edges).unwrap();
    let covs = oracles::two_group_covs();
    let f = assemble_sigma_eta(&Ar1Spec::new(vec![0.8, 0.3], 3).unwrap(), covs).unwrap();
    let q = oracles::to_na(&g.laplacian::<f64>()).kronecker(&oracles::to_na(&f.dense().unwrap()).try_inverse().unwrap());
    let mut err = 0.0f64;
    for _ in 0..100 {
        let z: Vec<f64> = (0..60).map(|_| sample_normal(0.0, 1.0, &mut rng)).collect();
        let v = DMatrix::from_column_slice(60, 1, &z);
        let dense = (v.transpose() * &q * &v)[(0, 0)];
        let ours = icar_pairwise_quadratic(&Mat::from_vec(10, 6, z), &f, &g).unwrap();
        err = err.max((ours - dense).abs());
    }
    verdict(3, "Sparse/dense ICAR equivalence", err < 1e-9, format!("{} edges, max error {err:.1e} over 100 fields", g.edges().len()))
}

fn c4() -> Verdict {
    let p_tau = oracles::tau2_ks(5_000, 41);
    let p_gt = oracles::year_cov_ks(5_000, 42);
    let p_g = oracles::hyper_cov_ks(5_000, 43);
    let (em, ev) = oracles::z_conditional_errors();
    let pass = p_tau > 0.01 && p_gt > 0.01 && p_g > 0.01 && em < 1e-8 && ev < 1e-8;
    let detail = format!("KS p: tau2 {p_tau:.3}, G_t {p_gt:.3}, G {p_g:.3}; Z mean err {em:.1e}, cov err {ev:.1e}");
    verdict(4, "Conjugate-update oracles", pass, detail)
}

fn c5() -> Verdict {
    let (moments, dt) = timed(|| common::geweke_run(50_000, 2024, false));
    let worst = moments.iter().map(|m| m.z().abs()).fold(0.0, f64::max);
    let pass = worst < 3.0 && dt < Duration::from_secs(600);
    verdict(5, "Getting-it-right calibration", pass, format!("{} moments, max |z| = {worst:.2}, {dt:.1?}", moments.len()))
}

struct Synthetic {
    lambda_cover: (usize, usize),
    mstcar_cov: f64,
    mstcar_width: f64,
    eb_cov: f64,
    eb_width: f64,
    elapsed: Duration,
}

fn synthetic_study() -> Synthetic {
    let t0 = Instant::now();
    let g = SpatialGraph::lattice(5, 6).unwrap();
    let g_true = Mat::from_f64_rows(&[vec![0.05, 0.02], vec![0.02, 0.04]]);
    let truth = SimTruth::homogeneous(2, 8, 0.8, g_true, 0.005, (0.003f64).ln(), -0.03);
    let pops = PopulationSpec { min: 1_000, max: 50_000 };
    let (mut hit, mut total) = (0, 0);
    let (mut mc, mut mw, mut bc, mut bw) = (0.0, 0.0, 0.0, 0.0);
    let reps = 20u64;
    for r in 0..reps {
        let sim = simulate_panel(PanelIndex::synthetic(30, 2, 8).unwrap(), &g, &truth, pops, RngStream::new(100 + r)).unwrap();
        let cfg = ChainConfig { n_iterations: 6_000, burn_in: 2_000, thin_theta: 4, seed: 500 + r, ..ChainConfig::default() };
        let store = run_chain::<f64>(&sim.panel, &g, HyperParams::default_for(2), cfg).unwrap();
        let draws = rates_from_store(&store).unwrap();
        for (c, lam) in sim.rates().into_iter().enumerate() {
            total += 1;
            hit += Interval::central95(&draws.cell(c)).contains(lam) as usize;
        }
        let cov = predictive_coverage(&draws, &sim.panel, 1_000, RngStream::new(900 + r)).unwrap();
        let post = eb_posterior(&sim.panel, &eb_hyperparams(&sim.panel, 1_000.0).unwrap()).unwrap();
        let eb = eb_predictive_coverage(&sim.panel, &post, 1_000, RngStream::new(900 + r)).unwrap();
        mc += cov.mean_coverage;
        mw += cov.mean_width;
        bc += eb.mean_coverage;
        bw += eb.mean_width;
    }
    let n = reps as f64;
    Synthetic {
        lambda_cover: (hit, total),
        mstcar_cov: mc / n,
        mstcar_width: mw / n,
        eb_cov: bc / n,
        eb_width: bw / n,
        elapsed: t0.elapsed(),
    }
}

fn c6(s: &Synthetic) -> Verdict {
    let (hit, total) = s.lambda_cover;
    let rate = hit as f64 / total as f64;
    let pass = (0.93..=0.97).contains(&rate) && s.elapsed < Duration::from_secs(900);
    verdict(6, "Posterior recovery", pass, format!("95% intervals cover {hit}/{total} = {rate:.4} of true rates, {:.1?}", s.elapsed))
}

fn c7(s: &Synthetic) -> Verdict {
    let pass = s.mstcar_cov >= 0.93 && s.mstcar_width < s.eb_width && s.eb_cov >= s.mstcar_cov;
    let detail = format!(
        "MSTCAR coverage {:.4} width {:.2}; Poisson-gamma coverage {:.4} width {:.2}",
        s.mstcar_cov, s.mstcar_width, s.eb_cov, s.eb_width
    );
    verdict(7, "Reliability comparison", pass, detail)
}

fn c8() -> Verdict {
    // two-county hand example
    let p = CountPanel::new(PanelIndex::synthetic(2, 1, 2).unwrap(), vec![0; 4], vec![100; 4]).unwrap();
    let s = spy(&[0.2, 0.1, 0.2, 0.2], &p).unwrap();
    let hand = (s[0] - 5000.0).abs().max((s[1] + 5000.0).abs()) / 5000.0;

    // county 0 follows the national trajectory it helps define: iterate to the fixed point
    let (ns, ng, nt) = (6, 2, 5);
    let ix = PanelIndex::synthetic(ns, ng, nt).unwrap();
    let mut rng = RngStream::new(808).rng();
    let pops: Vec<u64> = (0..ix.n_cells()).map(|_| rng.random_range(500..20_000)).collect();
    let mut rates: Vec<f64> = (0..ix.n_cells()).map(|_| rng.random_range(0.001..0.02)).collect();
    let p = CountPanel::new(ix.clone(), vec![0; ix.n_cells()], pops).unwrap();
    for _ in 0..200 {
        let nat = mstcar::metrics::national_rates(&rates, &p).unwrap();
        for k in 0..ng {
            for t in 1..nt {
                rates[ix.cell(0, k, t)] = rates[ix.cell(0, k, 0)] * nat[ix.layer(k, t)] / nat[ix.layer(k, 0)];
            }
        }
    }
    let tracked = spy(&rates, &p).unwrap()[0];
    let scale = rates.iter().cloned().fold(0.0, f64::max) * 1e5;
    let rel = tracked.abs() / scale;
    let pass = rel <= 1e-12 && hand <= 1e-12;
    verdict(8, "SPY exactness", pass, format!("tracking county SPY {tracked:.1e} (relative {rel:.1e}); hand example {:.6}, {:.6}", s[0], s[1]))
}

fn paper_scale_counts(dims: Dims) -> (Vec<u64>, Vec<u64>) {
    let mut rng = RngStream::new(9).rng();
    let pops: Vec<u64> = (0..dims.n_cells()).map(|_| rng.random_range(50..20_000)).collect();
    let deaths = pops.iter().map(|&n| mstcar::dist::sample_poisson(n as f64 * 0.004, &mut rng).unwrap().min(n)).collect();
    (deaths, pops)
}

fn c9() -> Vec<Verdict> {
    // bit-identical stores across pool sizes
    let g = SpatialGraph::lattice(3, 4).unwrap();
    let truth = SimTruth::homogeneous(2, 4, 0.7, Mat::scaled_identity(2, 0.05), 0.01, (0.004f64).ln(), 0.0);
    let sim = simulate_panel(PanelIndex::synthetic(12, 2, 4).unwrap(), &g, &truth, PopulationSpec { min: 1_000, max: 9_000 }, RngStream::new(1)).unwrap();
    let cfg = ChainConfig { n_iterations: 60, burn_in: 30, thin_theta: 2, seed: 3, ..ChainConfig::default() };
    let stores: Vec<_> = [1, 4, 8]
        .iter()
        .map(|&n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            pool.install(|| run_chain::<f64>(&sim.panel, &g, HyperParams::default_for(2), cfg.clone()).unwrap())
        })
        .collect();
    let identical = stores.iter().all(|s| s == &stores[0]);

    // paper-scale sweep
    let dims = Dims::new(3_099, 3, 41);
    let graph = SpatialGraph::grid(3_099, 56).unwrap();
    let (deaths, pops) = paper_scale_counts(dims);
    let counts = Counts::new(dims, &deaths, &pops).unwrap();
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let pcfg = ChainConfig { n_iterations: 3, burn_in: 3, ..ChainConfig::default() };
    let mut chain = Chain::<f64>::from_counts(counts, None, &graph, HyperParams::default_for(3), pcfg.clone()).unwrap();
    pool8.install(|| chain.step().unwrap());
    let (_, sweep) = timed(|| pool8.install(|| chain.step().unwrap()));

    // θ-update throughput, 1 vs 8 threads
    let counts = Counts::new(dims, &deaths, &pops).unwrap();
    let hp = HyperParams::default_for(3);
    let state = init_state::<f64>(&counts, None, &pcfg, &hp).unwrap();
    let props = init_proposals(&counts, &state, &pcfg);
    let theta_time = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let mut s = state.clone();
        let (_, dt) = timed(|| {
            for it in 0..5 {
                pool.install(|| update_theta(&mut s, &counts, &props.theta, RngStream::new(1).child(it)));
            }
        });
        dt
    };
    let (t1, t8) = (theta_time(1), theta_time(8));
    let speedup = t1.as_secs_f64() / t8.as_secs_f64();

    let note = format!("host has {cores} core(s)");
    let short = cores < 8;
    vec![
        verdict(9, "Determinism across 1/4/8 threads", identical, "stores compared bit for bit".into()),
        Verdict {
            id: 9,
            name: "Paper-scale sweep <= 5 s on 8 cores",
            // fewer cores than required can only make the sweep slower
            pass: sweep <= Duration::from_secs(5),
            detail: format!("one sweep at N_s=3099, N_g=3, N_t=41 took {sweep:.2?} with an 8-thread pool; {note}"),
            host_bound: false,
        },
        Verdict {
            id: 9,
            name: "Theta throughput scaling >= 3x (1 -> 8 threads)",
            pass: speedup >= 3.0,
            detail: format!("speedup {speedup:.2}x ({t1:.2?} vs {t8:.2?} for 5 updates); {note}"),
            host_bound: short,
        },
    ]
}

fn c10() -> Verdict {
    let mut rng = RngStream::new(1010).rng();
    let ix = PanelIndex::synthetic(1_000, 1, 1).unwrap();
    let pops: Vec<u64> = (0..1_000).map(|_| rng.random_range(0..100_000)).collect();
    let deaths: Vec<u64> = pops.iter().map(|&n| rng.random_range(0..=n.min(400))).collect();
    let p = CountPanel::new(ix, deaths.clone(), pops.clone()).unwrap();
    let b = 1_000.0;
    let h = eb_hyperparams(&p, b).unwrap();
    let (ytot, ntot): (u64, u64) = (deaths.iter().sum(), pops.iter().sum());
    let a = ytot as f64 / ntot as f64 * b;
    let post = eb_posterior(&p, &h).unwrap();
    let exact = post
        .iter()
        .zip(deaths.iter().zip(&pops))
        .all(|(g, (&y, &n))| *g == GammaPosterior { shape: a + y as f64, rate: b + n as f64 });

    // negative-binomial moments of the replicates
    let small = CountPanel::new(PanelIndex::synthetic(4, 1, 1).unwrap(), vec![3, 12, 40, 0], vec![900, 4_000, 10_000, 2_000]).unwrap();
    let sp = eb_posterior(&small, &eb_hyperparams(&small, b).unwrap()).unwrap();
    let n_rep = 10_000;
    let reps = eb_predictive_replicates(&small, &sp, n_rep, RngStream::new(1011)).unwrap();
    let mut worst = 0.0f64;
    for c in 0..4 {
        let GammaPosterior { shape, rate } = sp[c];
        let n = small.populations()[c] as f64;
        let mean = shape / rate * n;
        let var = mean + shape * (n / rate).powi(2);
        let m = reps.cell(c).iter().map(|&y| y as f64).sum::<f64>() / n_rep as f64;
        worst = worst.max((m - mean).abs() / (var / n_rep as f64).sqrt());
    }
    let pass = exact && worst < 3.0;
    verdict(10, "Poisson-gamma closed form", pass, format!("1000 cells exact: {exact}; replicate mean max |z| = {worst:.2}"))
}

fn main() {
    let t0 = Instant::now();
    let mut all = vec![c1(), c2(), c3(), c4(), c5()];
    let study = synthetic_study();
    all.push(c6(&study));
    all.push(c7(&study));
    all.push(c8());
    all.extend(c9());
    all.push(c10());
    let mut blocking = 0;
    for v in &all {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {}: {}", v.id, v.name, v.detail);
        if !v.pass && !v.host_bound {
            blocking += 1;
        }
    }
    let failed = all.iter().filter(|v| !v.pass).count();
    println!("{} of {} checks passed in {:.1?}", all.len() - failed, all.len(), t0.elapsed());
    if blocking > 0 {
        std::process::exit(1);
    }
}
