//! Versioned binary checkpoints of a running chain.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "MSTCKPT\0" | version u32 | layout u32 | float width u32
//! N_s u64 | N_g u64 | N_t u64 | seed u64 | separable u8 | next iteration u64
//! then length-prefixed (u64) arrays: β, Z, θ, τ², ρ, G_t, G,
//! θ scales, ρ scales, window θ tallies (u32), window ρ tallies (u32),
//! window length u32, burn-in θ (acc, n), post θ (acc, n), post ρ pairs,
//! stored θ iterations, stored θ, hyper iterations, β, τ², ρ, G_t, G draws
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Dims, ModelState, Proposals, SampleStore, Tallies};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"MSTCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Time-outer, group-inner.
const LAYOUT_CANONICAL: u32 = 1;

/// Everything needed to continue a chain bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub seed: u64,
    pub separable: bool,
    pub next_iteration: u64,
    pub state: ModelState<T>,
    pub proposals: Proposals<T>,
    pub tallies: Tallies,
    pub store: SampleStore<T>,
}

struct Enc(Vec<u8>);

impl Enc {
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn floats<T: Real>(&mut self, xs: &[T]) {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.0.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
    fn u64s(&mut self, xs: &[u64]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.u64(x));
    }
    fn u32s(&mut self, xs: &[u32]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.u32(x));
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Dec<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, expected: Option<usize>, what: &'static str) -> Result<usize> {
        let n = self.u64()? as usize;
        match expected {
            Some(e) if e != n => Err(Error::DimensionMismatch { what, expected: e, found: n }),
            _ => Ok(n),
        }
    }
    fn floats<T: Real>(&mut self, expected: Option<usize>, what: &'static str) -> Result<Vec<T>> {
        let n = self.len(expected, what)?;
        let raw = self.take(n * 8)?;
        Ok(raw.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap()))).collect())
    }
    fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.len(None, "")?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn u32s(&mut self, expected: usize, what: &'static str) -> Result<Vec<u32>> {
        let n = self.len(Some(expected), what)?;
        (0..n).map(|_| self.u32()).collect()
    }
}

fn encode<T: Real>(c: &Checkpoint<T>) -> Vec<u8> {
    let mut e = Enc(Vec::new());
    e.0.extend_from_slice(MAGIC);
    e.u32(CHECKPOINT_VERSION);
    e.u32(LAYOUT_CANONICAL);
    e.u32(8);
    let d = c.state.dims;
    e.u64(d.n_regions as u64);
    e.u64(d.n_groups as u64);
    e.u64(d.n_times as u64);
    e.u64(c.seed);
    e.0.push(c.separable as u8);
    e.u64(c.next_iteration);
    let s = &c.state;
    e.floats(&s.beta);
    e.floats(s.z.as_slice());
    e.floats(&s.theta);
    e.floats(&s.tau2);
    e.floats(&s.rho);
    let covs: Vec<T> = s.year_covs.iter().flat_map(|g| g.as_slice().iter().copied()).collect();
    e.floats(&covs);
    e.floats(s.g.as_slice());
    e.floats(&c.proposals.theta);
    e.floats(&c.proposals.rho);
    let t = &c.tallies;
    e.u32s(&t.window_theta);
    e.u32s(&t.window_rho);
    e.u32(t.window_len);
    for (a, n) in [t.burn_theta, t.post_theta] {
        e.u64(a);
        e.u64(n);
    }
    let pr: Vec<u64> = t.post_rho.iter().flat_map(|&(a, n)| [a, n]).collect();
    e.u64s(&pr);
    let st = &c.store;
    e.u64s(&st.theta_iter);
    e.floats(&st.theta);
    e.u64s(&st.hyper_iter);
    e.floats(&st.beta);
    e.floats(&st.tau2);
    e.floats(&st.rho);
    e.floats(&st.year_covs);
    e.floats(&st.g);
    e.0
}

/// Writes atomically (temporary file, then rename).
pub fn write_checkpoint<T: Real>(path: &Path, c: &Checkpoint<T>) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(&encode(c))?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a checkpoint; the store metadata comes from `store_template`.
pub fn read_checkpoint<T: Real>(path: &Path, store_template: SampleStore<T>) -> Result<Checkpoint<T>> {
    let buf = fs::read(path)?;
    let mut r = Dec { buf: &buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format(format!("{} is not a checkpoint", path.display())));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    if r.u32()? != LAYOUT_CANONICAL || r.u32()? != 8 {
        return Err(Error::Format("unsupported checkpoint layout".into()));
    }
    let d = Dims::new(r.u64()? as usize, r.u64()? as usize, r.u64()? as usize);
    if d != store_template.meta.dims {
        return Err(Error::Format(format!("checkpoint dimensions {d:?} do not match the panel")));
    }
    let seed = r.u64()?;
    let separable = r.u8()? != 0;
    let next_iteration = r.u64()?;
    let (b, ng, nt) = (d.block_len(), d.n_groups, d.n_times);
    let beta = r.floats(Some(b), "checkpoint beta")?;
    let z = Mat::from_vec(d.n_regions, b, r.floats(Some(d.n_regions * b), "checkpoint Z")?);
    let theta = r.floats(Some(d.n_cells()), "checkpoint theta")?;
    let tau2 = r.floats(Some(ng), "checkpoint tau2")?;
    let rho = r.floats(Some(ng), "checkpoint rho")?;
    let covs: Vec<T> = r.floats(Some(nt * ng * ng), "checkpoint G_t")?;
    let year_covs = covs.chunks(ng * ng).map(|c| Mat::from_vec(ng, ng, c.to_vec())).collect();
    let g = Mat::from_vec(ng, ng, r.floats(Some(ng * ng), "checkpoint G")?);
    let n_rho = if separable { 1 } else { ng };
    let proposals = Proposals {
        theta: r.floats(Some(d.n_cells()), "checkpoint theta scales")?,
        rho: r.floats(Some(n_rho), "checkpoint rho scales")?,
    };
    let window_theta = r.u32s(d.n_cells(), "checkpoint theta tallies")?;
    let window_rho = r.u32s(n_rho, "checkpoint rho tallies")?;
    let window_len = r.u32()?;
    let burn_theta = (r.u64()?, r.u64()?);
    let post_theta = (r.u64()?, r.u64()?);
    let pr = r.u64s()?;
    let post_rho = pr.chunks(2).map(|c| (c[0], c[1])).collect();
    let mut store = store_template;
    store.theta_iter = r.u64s()?;
    store.theta = r.floats(Some(store.theta_iter.len() * d.n_cells()), "checkpoint stored theta")?;
    store.hyper_iter = r.u64s()?;
    let nh = store.hyper_iter.len();
    store.beta = r.floats(Some(nh * b), "checkpoint stored beta")?;
    store.tau2 = r.floats(Some(nh * ng), "checkpoint stored tau2")?;
    store.rho = r.floats(Some(nh * ng), "checkpoint stored rho")?;
    store.year_covs = r.floats(Some(nh * nt * ng * ng), "checkpoint stored G_t")?;
    store.g = r.floats(Some(nh * ng * ng), "checkpoint stored G")?;
    if r.pos != buf.len() {
        return Err(Error::Format("trailing bytes in checkpoint".into()));
    }
    Ok(Checkpoint {
        seed,
        separable,
        next_iteration,
        state: ModelState { dims: d, beta, z, theta, tau2, rho, year_covs, g },
        proposals,
        tallies: Tallies { window_theta, window_rho, window_len, burn_theta, post_theta, post_rho },
        store,
    })
}
