//! File writers. Every file is written beside its target and renamed
//! into place.

use std::fs;
use std::path::Path;

use mstcar::summary::Interval;
use serde::Serialize;

use crate::failure::CliResult;

pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.partial"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    atomic_write(path, &bytes)
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

/// One line of the shared summary export.
#[derive(Debug, Serialize)]
pub struct SummaryRow {
    pub region: String,
    pub group: String,
    pub time: String,
    pub metric: &'static str,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub suppressed: bool,
    pub method: &'static str,
}

impl SummaryRow {
    pub fn new(
        (region, group, time): (&str, &str, &str),
        metric: &'static str,
        iv: Interval,
        suppressed: bool,
        method: &'static str,
    ) -> Self {
        SummaryRow {
            region: region.into(),
            group: group.into(),
            time: time.into(),
            metric,
            median: iv.median,
            lo95: iv.lo,
            hi95: iv.hi,
            suppressed,
            method,
        }
    }
}

/// Per-cell predictive interval of the observed count.
#[derive(Debug, Serialize)]
pub struct CoverageRow<'a> {
    pub region: &'a str,
    pub group: &'a str,
    pub time: &'a str,
    pub observed: u64,
    pub lo95: f64,
    pub hi95: f64,
    pub covered: bool,
}

#[derive(Debug, Serialize)]
pub struct RegionCoverageRow<'a> {
    pub region: &'a str,
    pub coverage: f64,
    pub suppressed: bool,
}

#[derive(Debug, Serialize)]
pub struct CoverageSummary {
    pub method: &'static str,
    pub replicates: usize,
    pub band: (f64, f64),
    pub mean_coverage: f64,
    pub mean_width: f64,
}

/// Writes `coverage.csv`, `coverage_regions.csv` and `coverage.json` into `dir`.
pub fn write_coverage(
    dir: &Path,
    panel: &mstcar::CountPanel,
    report: &mstcar::CoverageReport,
    region_flags: &[bool],
    method: &'static str,
    replicates: usize,
) -> CliResult<()> {
    let ix = panel.index();
    write_csv(
        &dir.join("coverage.csv"),
        (0..ix.n_cells()).map(|c| {
            let (i, k, t) = ix.coords(c);
            let (lo, hi) = report.intervals[c];
            let y = panel.deaths()[c];
            CoverageRow {
                region: &ix.region_labels()[i],
                group: &ix.group_labels()[k],
                time: &ix.time_labels()[t],
                observed: y,
                lo95: lo,
                hi95: hi,
                covered: lo <= y as f64 && y as f64 <= hi,
            }
        }),
    )?;
    write_csv(
        &dir.join("coverage_regions.csv"),
        report.regions.iter().enumerate().map(|(i, &coverage)| RegionCoverageRow {
            region: &ix.region_labels()[i],
            coverage,
            suppressed: region_flags[i],
        }),
    )?;
    write_json(
        &dir.join("coverage.json"),
        &CoverageSummary {
            method,
            replicates,
            band: report.band,
            mean_coverage: report.mean_coverage,
            mean_width: report.mean_width,
        },
    )
}
