use std::collections::HashSet;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use mstcar::baseline::{eb_hyperparams, eb_posterior, eb_predictive_coverage, eb_rate_intervals};
use mstcar::metrics::{
    age_standardized_rates, national_pace_rates, national_rates, percent_decline, predictive_coverage, rates_from_store,
    region_suppressed, sigma_eta_trajectories, spy_posterior, suppression_flags, DeclineMode, RatePanelDraws, PER_100K,
};
use mstcar::sampler::{AcceptanceSummary, Counts};
use mstcar::summary::{percentile_sorted, sorted, summarize_param, Interval};
use mstcar::{
    load_adjacency, load_count_panel, simulate_panel, Chain, CountPanel, Mat, PanelIndex, PopulationSpec, RngStream,
    SampleStore64, SimTruth, SpatialGraph,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{square_matrix, Overrides, RunConfig};
use crate::failure::{invalid, CliResult, Failure};
use crate::output::{atomic_write, write_coverage, write_csv, write_json, SummaryRow};

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if !path.is_file() {
        return invalid(format!("{what} file {} does not exist", path.display()));
    }
    Ok(())
}

fn load_panel(path: &Path) -> CliResult<CountPanel> {
    require_file(path, "counts")?;
    let ctx = |e: mstcar::Error| Failure::from(e).context(path.display());
    let index = PanelIndex::infer_from_csv(fs::File::open(path)?).map_err(ctx)?;
    load_count_panel(fs::File::open(path)?, index).map_err(ctx)
}

fn load_graph(path: &Path, panel: &CountPanel) -> CliResult<SpatialGraph> {
    require_file(path, "adjacency")?;
    load_adjacency(BufReader::new(fs::File::open(path)?), panel.index().region_labels())
        .map_err(|e| Failure::from(e).context(path.display()))
}

fn load_store(cfg: &RunConfig, panel: &CountPanel) -> CliResult<SampleStore64> {
    let dir = cfg.store_dir();
    if !dir.join("manifest.json").is_file() {
        return invalid(format!("no sample store at {}; run `fit` first", dir.display()));
    }
    let store = SampleStore64::load(&dir)?;
    let d = store.dims();
    let ix = panel.index();
    if (d.n_regions, d.n_groups, d.n_times) != (ix.n_regions(), ix.n_groups(), ix.n_times()) {
        return invalid("sample store dimensions do not match the counts file");
    }
    Ok(store)
}

fn time_index(panel: &CountPanel, label: Option<&str>, default: usize, key: &str) -> CliResult<usize> {
    match label {
        None => Ok(default),
        Some(l) => panel
            .index()
            .time_labels()
            .iter()
            .position(|t| t == l)
            .ok_or_else(|| Failure::Validation(format!("{key}: unknown time label `{l}`"))),
    }
}

fn method_tag(separable: bool) -> &'static str {
    if separable { "mstcar-separable" } else { "mstcar" }
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct TruthRow<'a> {
    region: &'a str,
    group: &'a str,
    time: &'a str,
    theta: f64,
    rate: f64,
}

/// Region labels of an edge list, in order of first appearance.
fn edge_list_labels(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut labels = Vec::new();
    for line in text.lines() {
        for tok in line.split('#').next().unwrap_or("").split_whitespace() {
            if seen.insert(tok) {
                labels.push(tok.to_string());
            }
        }
    }
    labels
}

pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let s = &cfg.simulate;
    if s.n_groups == 0 || s.n_times == 0 {
        return invalid("simulate.n_groups and simulate.n_times must be positive");
    }
    let (graph, labels) = match &s.adjacency {
        Some(p) => {
            require_file(p, "simulate.adjacency")?;
            let text = fs::read_to_string(p)?;
            let labels = edge_list_labels(&text);
            (load_adjacency(text.as_bytes(), &labels).map_err(|e| Failure::from(e).context(p.display()))?, labels)
        }
        None => {
            if s.rows == 0 || s.cols == 0 {
                return invalid("simulate.rows and simulate.cols must be positive");
            }
            (SpatialGraph::lattice(s.rows, s.cols)?, SpatialGraph::lattice_labels(s.rows * s.cols))
        }
    };
    let (ng, nt) = (s.n_groups, s.n_times);
    let g = match &s.g {
        Some(rows) => square_matrix("simulate.g", rows, ng)?,
        None => Mat::scaled_identity(ng, 0.05),
    };
    if !(0.0..1.0).contains(&s.rho) {
        return invalid(format!("simulate.rho must lie in [0, 1), got {}", s.rho));
    }
    let mut truth = SimTruth::homogeneous(ng, nt, s.rho, g, s.tau2, s.log_rate, s.slope);
    if let Some(rows) = &s.log_rates {
        if rows.len() != ng || rows.iter().any(|r| r.len() != nt) {
            return invalid(format!("simulate.log_rates must hold {ng} rows of {nt} values"));
        }
        truth.log_rates = (0..ng * nt).map(|l| rows[l % ng][l / ng]).collect();
    }
    let index = PanelIndex::new(
        labels.clone(),
        (1..=ng).map(|k| format!("g{k}")).collect(),
        (1..=nt).map(|t| format!("t{t}")).collect(),
    )?;
    let pops = PopulationSpec { min: s.pop_min, max: s.pop_max };
    let sim = simulate_panel(index, &graph, &truth, pops, RngStream::new(cfg.chain.seed))?;

    let out = &cfg.paths.output;
    let mut panel_csv = Vec::new();
    sim.panel.write_csv(&mut panel_csv)?;
    atomic_write(&out.join("panel.csv"), &panel_csv)?;
    let mut edges = Vec::new();
    graph.write_edge_list(&labels, &mut edges)?;
    atomic_write(&out.join("adjacency.txt"), &edges)?;
    let ix = sim.panel.index();
    write_csv(
        &out.join("truth.csv"),
        (0..ix.n_cells()).map(|c| {
            let (i, k, t) = ix.coords(c);
            TruthRow {
                region: &ix.region_labels()[i],
                group: &ix.group_labels()[k],
                time: &ix.time_labels()[t],
                theta: sim.theta[c],
                rate: sim.theta[c].exp(),
            }
        }),
    )
}

// ---------------------------------------------------------------- fit

#[derive(Serialize)]
struct RunManifest {
    tool_version: &'static str,
    store_format: String,
    seed: u64,
    separable: bool,
    n_iterations: u64,
    burn_in: u64,
    thin_theta: u64,
    resumed_from_iteration: Option<u64>,
    threads: usize,
    acceptance: AcceptanceSummary,
    wall_seconds: f64,
}

pub fn fit(cfg: &RunConfig, ov: &Overrides) -> CliResult<()> {
    let panel = load_panel(&cfg.counts_path())?;
    let graph = load_graph(&cfg.adjacency_path(), &panel)?;
    let hp = cfg.hyper_params(panel.index().n_groups())?;
    let ck = cfg.checkpoint_path();
    if ov.resume {
        require_file(&ck, "checkpoint")?;
    }
    let start = Instant::now();
    let mut chain = if ov.resume {
        Chain::resume(Counts::from_panel(&panel), &graph, hp, cfg.chain.clone(), &ck)?
    } else {
        Chain::new(&panel, &graph, hp, cfg.chain.clone())?
    };
    let resumed_from_iteration = ov.resume.then(|| chain.next_iteration());
    fs::create_dir_all(&cfg.paths.output)?;
    chain.run(Some((&ck, cfg.checkpoint_every)))?;
    let store = chain.into_store();
    store.save(&cfg.store_dir())?;
    write_json(
        &cfg.paths.output.join("run.json"),
        &RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            store_format: store.meta.format.clone(),
            seed: cfg.chain.seed,
            separable: cfg.chain.separable,
            n_iterations: cfg.chain.n_iterations,
            burn_in: cfg.chain.burn_in,
            thin_theta: cfg.chain.thin_theta,
            resumed_from_iteration,
            threads: rayon::current_num_threads(),
            acceptance: store.acceptance.clone(),
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    )
}

// ---------------------------------------------------------------- baseline

#[derive(Serialize)]
struct LayerRow<'a> {
    group: &'a str,
    time: &'a str,
    a: f64,
    b: f64,
    improper: bool,
}

pub fn baseline(cfg: &RunConfig) -> CliResult<()> {
    let panel = load_panel(&cfg.counts_path())?;
    let ix = panel.index();
    let ref_t = time_index(&panel, cfg.metrics.reference_time.as_deref(), 0, "metrics.reference_time")?;
    let params = eb_hyperparams(&panel, cfg.baseline.pseudo_population)?;
    let posts = eb_posterior(&panel, &params)?;
    let flags = suppression_flags(&panel, ref_t, cfg.metrics.suppression_threshold);
    let region_flags = region_suppressed(&flags, ix.n_groups());
    let report = eb_predictive_coverage(&panel, &posts, cfg.metrics.replicates, RngStream::new(cfg.chain.seed))?;

    let dir = cfg.paths.output.join("baseline");
    const METHOD: &str = "poisson-gamma";
    let intervals = eb_rate_intervals(&posts);
    write_csv(
        &dir.join("summary.csv"),
        intervals.iter().enumerate().map(|(c, iv)| {
            let (i, k, t) = ix.coords(c);
            SummaryRow::new(
                (&ix.region_labels()[i], &ix.group_labels()[k], &ix.time_labels()[t]),
                "rate_per_100k",
                scale(*iv, PER_100K),
                flags[i * ix.n_groups() + k],
                METHOD,
            )
        }),
    )?;
    write_csv(
        &dir.join("layers.csv"),
        (0..ix.block_len()).map(|l| LayerRow {
            group: &ix.group_labels()[l % ix.n_groups()],
            time: &ix.time_labels()[l / ix.n_groups()],
            a: params.a[l],
            b: params.b[l],
            improper: params.improper[l],
        }),
    )?;
    write_coverage(&dir, &panel, &report, &region_flags, METHOD, cfg.metrics.replicates)
}

fn scale(iv: Interval, s: f64) -> Interval {
    Interval { median: iv.median * s, lo: iv.lo * s, hi: iv.hi * s }
}

// ---------------------------------------------------------------- metrics

#[derive(Serialize)]
struct TrajectoryRow<'a> {
    group: &'a str,
    time: &'a str,
    median: f64,
    lo95: f64,
    hi95: f64,
}

#[derive(Serialize)]
struct Trends<'a> {
    units: &'static str,
    times: &'a [String],
    series: Vec<TrendSeries<'a>>,
}

#[derive(Serialize)]
struct TrendSeries<'a> {
    region: &'a str,
    group: &'a str,
    suppressed: bool,
    county: Vec<Interval>,
    national: Vec<Interval>,
    national_pace: Vec<Interval>,
}

/// Per-draw functional summarized per output index, scaled by `s`.
fn summarize_draws(
    draws: &RatePanelDraws,
    s: f64,
    f: impl Fn(&[f64]) -> mstcar::Result<Vec<f64>> + Sync,
) -> CliResult<Vec<Interval>> {
    let per_draw: Vec<Vec<f64>> = (0..draws.n_draws()).into_par_iter().map(|l| f(draws.draw(l))).collect::<Result<_, _>>()?;
    let m = per_draw[0].len();
    Ok((0..m)
        .into_par_iter()
        .map(|j| {
            let xs: Vec<f64> = per_draw.iter().map(|d| d[j] * s).collect();
            Interval::central95(&xs)
        })
        .collect())
}

pub fn metrics(cfg: &RunConfig, ov: &Overrides) -> CliResult<()> {
    let m = &cfg.metrics;
    let panel = load_panel(&cfg.counts_path())?;
    let store = load_store(cfg, &panel)?;
    let ix = panel.index();
    let (ns, ng, nt) = (ix.n_regions(), ix.n_groups(), ix.n_times());
    let ref_t = time_index(&panel, m.reference_time.as_deref(), 0, "metrics.reference_time")?;
    let t_from = time_index(&panel, m.decline_from.as_deref(), 0, "metrics.decline_from")?;
    let t_to = time_index(&panel, m.decline_to.as_deref(), nt - 1, "metrics.decline_to")?;
    if nt < 2 {
        return invalid("metrics need at least two time points");
    }
    if t_from >= t_to {
        return invalid("metrics.decline_from must precede metrics.decline_to");
    }
    if let Some(w) = &m.standard_weights {
        if w.len() != ng {
            return invalid(format!("metrics.standard_weights needs {ng} entries, got {}", w.len()));
        }
    }
    let draws = rates_from_store(&store)?;
    let seed = ov.seed.unwrap_or(store.meta.seed);
    let method = method_tag(store.meta.separable);
    let flags = suppression_flags(&panel, ref_t, m.suppression_threshold);
    let region_flags = region_suppressed(&flags, ng);
    let (rl, gl, tl) = (ix.region_labels(), ix.group_labels(), ix.time_labels());

    let mut rows = Vec::new();
    let cell_rates: Vec<Interval> =
        (0..ix.n_cells()).into_par_iter().map(|c| scale(Interval::central95(&draws.cell(c)), PER_100K)).collect();
    for (c, iv) in cell_rates.iter().enumerate() {
        let (i, k, t) = ix.coords(c);
        rows.push(SummaryRow::new((&rl[i], &gl[k], &tl[t]), "rate_per_100k", *iv, flags[i * ng + k], method));
    }
    let national = summarize_draws(&draws, PER_100K, |r| national_rates(r, &panel))?;
    for (l, iv) in national.iter().enumerate() {
        rows.push(SummaryRow::new(("national", &gl[l % ng], &tl[l / ng]), "national_rate_per_100k", *iv, false, method));
    }
    let spy = spy_posterior(&draws, &panel)?;
    for (i, iv) in spy.regions.iter().enumerate() {
        rows.push(SummaryRow::new((&rl[i], "", ""), "saved_person_years_per_100k", *iv, region_flags[i], method));
    }
    let span = format!("{}:{}", tl[t_from], tl[t_to]);
    let by_group = summarize_draws(&draws, 100.0, |r| percent_decline(r, &panel, t_from, t_to, DeclineMode::PerGroup))?;
    for (j, iv) in by_group.iter().enumerate() {
        rows.push(SummaryRow::new((&rl[j / ng], &gl[j % ng], &span), "percent_decline", *iv, flags[j], method));
    }
    let aggregated =
        summarize_draws(&draws, 100.0, |r| percent_decline(r, &panel, t_from, t_to, DeclineMode::AgeAggregated))?;
    for (i, iv) in aggregated.iter().enumerate() {
        rows.push(SummaryRow::new((&rl[i], "all", &span), "percent_decline", *iv, region_flags[i], method));
    }
    if let Some(w) = &m.standard_weights {
        let dims = draws.dims();
        let std_rates = summarize_draws(&draws, PER_100K, |r| age_standardized_rates(r, dims, w))?;
        for (j, iv) in std_rates.iter().enumerate() {
            let (i, t) = (j / nt, j % nt);
            rows.push(SummaryRow::new(
                (&rl[i], "standardized", &tl[t]),
                "age_standardized_rate_per_100k",
                *iv,
                region_flags[i],
                method,
            ));
        }
    }

    let dir = cfg.paths.output.join("metrics");
    write_csv(&dir.join("summary.csv"), rows)?;

    let traj = sigma_eta_trajectories(&store)?;
    write_csv(
        &dir.join("sigma_eta.csv"),
        traj.groups.iter().enumerate().flat_map(|(k, series)| {
            series.iter().enumerate().map(move |(t, iv)| TrajectoryRow {
                group: &gl[k],
                time: &tl[t],
                median: iv.median,
                lo95: iv.lo,
                hi95: iv.hi,
            })
        }),
    )?;

    let pace = summarize_draws(&draws, PER_100K, |r| national_pace_rates(r, &panel))?;
    let series = (0..ns * ng)
        .map(|j| {
            let (i, k) = (j / ng, j % ng);
            TrendSeries {
                region: &rl[i],
                group: &gl[k],
                suppressed: flags[j],
                county: (0..nt).map(|t| cell_rates[ix.cell(i, k, t)]).collect(),
                national: (0..nt).map(|t| national[ix.layer(k, t)]).collect(),
                national_pace: (0..nt).map(|t| pace[ix.cell(i, k, t)]).collect(),
            }
        })
        .collect();
    write_json(&dir.join("trends.json"), &Trends { units: "per 100,000 person-years", times: tl, series })?;

    let report = predictive_coverage(&draws, &panel, m.replicates, RngStream::new(seed))?;
    write_coverage(&dir, &panel, &report, &region_flags, method, m.replicates)
}

// ---------------------------------------------------------------- summarize

pub fn summarize(cfg: &RunConfig) -> CliResult<()> {
    let dir = cfg.store_dir();
    if !dir.join("manifest.json").is_file() {
        return invalid(format!("no sample store at {}; run `fit` first", dir.display()));
    }
    let store = SampleStore64::load(&dir)?;
    let nh = store.n_hyper_draws();
    if nh == 0 {
        return Err(mstcar::Error::EmptyStore.into());
    }
    let d = store.dims();
    let (ng, nt) = (d.n_groups, d.n_times);
    let mut params: Vec<(String, Vec<f64>)> = Vec::new();
    let column = |data: &[f64], width: usize, j: usize| (0..nh).map(|l| data[l * width + j]).collect::<Vec<_>>();
    for l in 0..ng * nt {
        params.push((format!("beta[g{},t{}]", l % ng + 1, l / ng + 1), column(&store.beta, ng * nt, l)));
    }
    for k in 0..ng {
        params.push((format!("tau2[g{}]", k + 1), column(&store.tau2, ng, k)));
    }
    for k in 0..ng {
        params.push((format!("rho[g{}]", k + 1), column(&store.rho, ng, k)));
    }
    for t in 0..nt {
        for a in 0..ng {
            for b in a..ng {
                params.push((format!("G_t[t{},{},{}]", t + 1, a + 1, b + 1), column(&store.year_covs, nt * ng * ng, t * ng * ng + a * ng + b)));
            }
        }
    }
    for a in 0..ng {
        for b in a..ng {
            params.push((format!("G[{},{}]", a + 1, b + 1), column(&store.g, ng * ng, a * ng + b)));
        }
    }

    let qs = &cfg.summarize.quantiles;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["parameter".to_string(), "mean".to_string()];
    header.extend(qs.iter().map(|q| format!("q{q}")));
    header.extend(["ess".to_string(), "rhat".to_string()]);
    w.write_record(&header)?;
    let lines: Vec<Vec<String>> = params
        .par_iter()
        .map(|(name, xs)| {
            let s = summarize_param(name.as_str(), xs);
            let sx = sorted(xs.iter().copied());
            let mut rec = vec![name.clone(), s.mean.to_string()];
            rec.extend(qs.iter().map(|&q| percentile_sorted(&sx, q).to_string()));
            rec.push(s.ess.to_string());
            rec.push(s.rhat.map(|r| r.to_string()).unwrap_or_default());
            rec
        })
        .collect();
    for rec in lines {
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    atomic_write(&cfg.paths.output.join("params.csv"), &bytes)
}
