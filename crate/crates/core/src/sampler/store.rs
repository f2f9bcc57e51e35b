//! Post-burn-in draws and their on-disk layout.
//!
//! A store directory holds one little-endian binary file per parameter
//! group, one row per stored iteration, plus `manifest.json`:
//!
//! | file             | row length          | cadence        |
//! |------------------|---------------------|----------------|
//! | `theta.f64`      | `N_s·N_g·N_t`       | every `thin`   |
//! | `beta.f64`       | `N_g·N_t`           | every iteration|
//! | `tau2.f64`       | `N_g`               | every iteration|
//! | `rho.f64`        | `N_g`               | every iteration|
//! | `year_covs.f64`  | `N_t·N_g²`          | every iteration|
//! | `g.f64`          | `N_g²`              | every iteration|
//! | `theta_iter.u64` | 1                   | every `thin`   |
//! | `hyper_iter.u64` | 1                   | every iteration|

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dims, ModelState};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

pub const STORE_FORMAT: &str = "mstcar-store/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub format: String,
    pub dims: Dims,
    pub layout: String,
    pub n_iterations: u64,
    pub burn_in: u64,
    pub thin_theta: u64,
    pub seed: u64,
    pub separable: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    pub theta_burn_in: Option<f64>,
    pub theta: Option<f64>,
    pub rho: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleStore<T> {
    pub meta: StoreMeta,
    pub acceptance: AcceptanceSummary,
    pub theta_iter: Vec<u64>,
    pub theta: Vec<T>,
    pub hyper_iter: Vec<u64>,
    pub beta: Vec<T>,
    pub tau2: Vec<T>,
    pub rho: Vec<T>,
    pub year_covs: Vec<T>,
    pub g: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    #[serde(flatten)]
    meta: StoreMeta,
    acceptance: AcceptanceSummary,
    n_theta_draws: usize,
    n_hyper_draws: usize,
    files: Vec<FileEntry>,
}

#[derive(Serialize, Deserialize)]
struct FileEntry {
    name: String,
    rows: usize,
    row_len: usize,
    dtype: String,
}

impl<T: Real> SampleStore<T> {
    pub fn new(meta: StoreMeta) -> Self {
        SampleStore {
            meta,
            acceptance: AcceptanceSummary::default(),
            theta_iter: Vec::new(),
            theta: Vec::new(),
            hyper_iter: Vec::new(),
            beta: Vec::new(),
            tau2: Vec::new(),
            rho: Vec::new(),
            year_covs: Vec::new(),
            g: Vec::new(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.meta.dims
    }

    pub fn n_theta_draws(&self) -> usize {
        self.theta_iter.len()
    }

    pub fn n_hyper_draws(&self) -> usize {
        self.hyper_iter.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_iter.is_empty() && self.hyper_iter.is_empty()
    }

    pub fn theta_draw(&self, l: usize) -> &[T] {
        let n = self.dims().n_cells();
        &self.theta[l * n..(l + 1) * n]
    }

    pub fn beta_draw(&self, l: usize) -> &[T] {
        let n = self.dims().block_len();
        &self.beta[l * n..(l + 1) * n]
    }

    pub fn tau2_draw(&self, l: usize) -> &[T] {
        let n = self.dims().n_groups;
        &self.tau2[l * n..(l + 1) * n]
    }

    pub fn rho_draw(&self, l: usize) -> &[T] {
        let n = self.dims().n_groups;
        &self.rho[l * n..(l + 1) * n]
    }

    pub fn year_covs_draw(&self, l: usize) -> Vec<Mat<T>> {
        let d = self.dims();
        let p = d.n_groups * d.n_groups;
        let row = &self.year_covs[l * d.n_times * p..(l + 1) * d.n_times * p];
        row.chunks(p).map(|c| Mat::from_vec(d.n_groups, d.n_groups, c.to_vec())).collect()
    }

    pub fn g_draw(&self, l: usize) -> Mat<T> {
        let ng = self.dims().n_groups;
        Mat::from_vec(ng, ng, self.g[l * ng * ng..(l + 1) * ng * ng].to_vec())
    }

    pub fn push_theta(&mut self, iteration: u64, state: &ModelState<T>) {
        self.theta_iter.push(iteration);
        self.theta.extend_from_slice(&state.theta);
    }

    pub fn push_hyper(&mut self, iteration: u64, state: &ModelState<T>) {
        self.hyper_iter.push(iteration);
        self.beta.extend_from_slice(&state.beta);
        self.tau2.extend_from_slice(&state.tau2);
        self.rho.extend_from_slice(&state.rho);
        for g in &state.year_covs {
            self.year_covs.extend_from_slice(g.as_slice());
        }
        self.g.extend_from_slice(state.g.as_slice());
    }

    fn groups(&self) -> [(&'static str, &[T], usize); 6] {
        let d = self.dims();
        let ng2 = d.n_groups * d.n_groups;
        [
            ("theta.f64", &self.theta, d.n_cells()),
            ("beta.f64", &self.beta, d.block_len()),
            ("tau2.f64", &self.tau2, d.n_groups),
            ("rho.f64", &self.rho, d.n_groups),
            ("year_covs.f64", &self.year_covs, d.n_times * ng2),
            ("g.f64", &self.g, ng2),
        ]
    }

    /// Writes the store into `dir` via a sibling temporary directory that
    /// is renamed into place.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let name = dir.file_name().ok_or_else(|| Error::Config(format!("invalid store path {}", dir.display())))?;
        let tmp = parent.join(format!(".{}.partial", name.to_string_lossy()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir_all(&tmp)?;
        let mut files = Vec::new();
        for (fname, data, row_len) in self.groups() {
            write_f64(&tmp.join(fname), data)?;
            let rows = if row_len == 0 { 0 } else { data.len() / row_len };
            files.push(FileEntry { name: fname.into(), rows, row_len, dtype: "f64le".into() });
        }
        for (fname, data) in [("theta_iter.u64", &self.theta_iter), ("hyper_iter.u64", &self.hyper_iter)] {
            let mut w = BufWriter::new(fs::File::create(tmp.join(fname))?);
            for &x in data {
                w.write_all(&x.to_le_bytes())?;
            }
            w.flush()?;
            files.push(FileEntry { name: fname.into(), rows: data.len(), row_len: 1, dtype: "u64le".into() });
        }
        let manifest = Manifest {
            meta: self.meta.clone(),
            acceptance: self.acceptance.clone(),
            n_theta_draws: self.n_theta_draws(),
            n_hyper_draws: self.n_hyper_draws(),
            files,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(tmp.join("manifest.json"), json + "\n")?;
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&tmp, dir)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.json"))
            .map_err(|e| Error::Format(format!("cannot read {}/manifest.json: {e}", dir.display())))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        if m.meta.format != STORE_FORMAT {
            return Err(Error::Format(format!("unsupported store format `{}`", m.meta.format)));
        }
        let mut s = SampleStore::new(m.meta);
        s.acceptance = m.acceptance;
        let d = s.dims();
        let ng2 = d.n_groups * d.n_groups;
        let read = |name: &str, row_len: usize, rows: usize| -> Result<Vec<T>> {
            let v = read_f64(&dir.join(name))?;
            if v.len() != row_len * rows {
                return Err(Error::Format(format!("{name}: expected {} values, found {}", row_len * rows, v.len())));
            }
            Ok(v.into_iter().map(T::lit).collect())
        };
        s.theta_iter = read_u64(&dir.join("theta_iter.u64"))?;
        s.hyper_iter = read_u64(&dir.join("hyper_iter.u64"))?;
        if s.theta_iter.len() != m.n_theta_draws || s.hyper_iter.len() != m.n_hyper_draws {
            return Err(Error::Format("iteration stamps disagree with manifest".into()));
        }
        let (nt, nh) = (m.n_theta_draws, m.n_hyper_draws);
        s.theta = read("theta.f64", d.n_cells(), nt)?;
        s.beta = read("beta.f64", d.block_len(), nh)?;
        s.tau2 = read("tau2.f64", d.n_groups, nh)?;
        s.rho = read("rho.f64", d.n_groups, nh)?;
        s.year_covs = read("year_covs.f64", d.n_times * ng2, nh)?;
        s.g = read("g.f64", ng2, nh)?;
        Ok(s)
    }
}

fn write_f64<T: Real>(path: &Path, data: &[T]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for &x in data {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(fs::File::open(path)?).read_to_end(&mut buf)?;
    if buf.len() % 8 != 0 {
        return Err(Error::Format(format!("{}: length is not a multiple of 8", path.display())));
    }
    Ok(buf)
}

fn read_f64(path: &Path) -> Result<Vec<f64>> {
    Ok(read_bytes(path)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn read_u64(path: &Path) -> Result<Vec<u64>> {
    Ok(read_bytes(path)?.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
}
