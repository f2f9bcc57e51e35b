//! Region × group × time count panels.
//!
//! Cells are stored region-major; within a region the block is ordered
//! time-outer, group-inner, matching the layout of one latent block `Z_i`.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const PANEL_HEADER: [&str; 5] = ["region", "group", "time", "deaths", "population"];

/// Labels and sizes of the three panel axes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PanelIndex {
    regions: Vec<String>,
    groups: Vec<String>,
    times: Vec<String>,
}

impl PanelIndex {
    pub fn new(regions: Vec<String>, groups: Vec<String>, times: Vec<String>) -> Result<Self> {
        for (axis, labels) in [("region", &regions), ("group", &groups), ("time", &times)] {
            if labels.is_empty() {
                return Err(Error::Panel(format!("{axis} axis is empty")));
            }
            let mut seen = HashSet::new();
            for l in labels {
                if !seen.insert(l.as_str()) {
                    return Err(Error::Panel(format!("duplicate {axis} label `{l}`")));
                }
            }
        }
        Ok(PanelIndex { regions, groups, times })
    }

    /// Index with generated labels `R0000…`, `g1…`, `t1…`.
    pub fn synthetic(n_regions: usize, n_groups: usize, n_times: usize) -> Result<Self> {
        Self::new(
            (0..n_regions).map(|i| format!("R{i:04}")).collect(),
            (1..=n_groups).map(|k| format!("g{k}")).collect(),
            (1..=n_times).map(|t| format!("t{t}")).collect(),
        )
    }

    /// Derives axis labels from panel text, in order of first appearance.
    pub fn infer_from_csv<R: Read>(source: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(source);
        check_header(&mut rdr)?;
        let mut axes: [(Vec<String>, HashSet<String>); 3] = Default::default();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Panel(e.to_string()))?;
            for (a, (list, seen)) in axes.iter_mut().enumerate() {
                let v = rec.get(a).unwrap_or("").to_string();
                if seen.insert(v.clone()) {
                    list.push(v);
                }
            }
        }
        let [r, g, t] = axes;
        Self::new(r.0, g.0, t.0)
    }

    #[inline]
    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }
    #[inline]
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }
    #[inline]
    pub fn n_times(&self) -> usize {
        self.times.len()
    }
    /// `N_g · N_t`, the length of one region block.
    #[inline]
    pub fn block_len(&self) -> usize {
        self.groups.len() * self.times.len()
    }
    #[inline]
    pub fn n_cells(&self) -> usize {
        self.regions.len() * self.block_len()
    }
    pub fn region_labels(&self) -> &[String] {
        &self.regions
    }
    pub fn group_labels(&self) -> &[String] {
        &self.groups
    }
    pub fn time_labels(&self) -> &[String] {
        &self.times
    }

    /// Position of `(k, t)` within a region block.
    #[inline]
    pub fn layer(&self, k: usize, t: usize) -> usize {
        t * self.groups.len() + k
    }

    #[inline]
    pub fn cell(&self, i: usize, k: usize, t: usize) -> usize {
        i * self.block_len() + self.layer(k, t)
    }

    /// Inverse of [`PanelIndex::cell`].
    pub fn coords(&self, cell: usize) -> (usize, usize, usize) {
        let b = self.block_len();
        let (i, l) = (cell / b, cell % b);
        (i, l % self.groups.len(), l / self.groups.len())
    }
}

/// Deaths and populations on a [`PanelIndex`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountPanel {
    index: PanelIndex,
    deaths: Vec<u64>,
    populations: Vec<u64>,
}

impl CountPanel {
    pub fn new(index: PanelIndex, deaths: Vec<u64>, populations: Vec<u64>) -> Result<Self> {
        let n = index.n_cells();
        if deaths.len() != n {
            return Err(Error::DimensionMismatch { what: "deaths", expected: n, found: deaths.len() });
        }
        if populations.len() != n {
            return Err(Error::DimensionMismatch { what: "populations", expected: n, found: populations.len() });
        }
        for c in 0..n {
            if deaths[c] > populations[c] {
                let (i, k, t) = index.coords(c);
                return Err(Error::DeathsExceedPopulation {
                    region: index.regions[i].clone(),
                    group: index.groups[k].clone(),
                    time: index.times[t].clone(),
                    deaths: deaths[c] as i64,
                    population: populations[c] as i64,
                });
            }
        }
        Ok(CountPanel { index, deaths, populations })
    }

    pub fn index(&self) -> &PanelIndex {
        &self.index
    }
    pub fn deaths(&self) -> &[u64] {
        &self.deaths
    }
    pub fn populations(&self) -> &[u64] {
        &self.populations
    }
    #[inline]
    pub fn y(&self, i: usize, k: usize, t: usize) -> u64 {
        self.deaths[self.index.cell(i, k, t)]
    }
    #[inline]
    pub fn n(&self, i: usize, k: usize, t: usize) -> u64 {
        self.populations[self.index.cell(i, k, t)]
    }

    /// Total deaths and population of layer `(k, t)`.
    pub fn layer_totals(&self, k: usize, t: usize) -> (u64, u64) {
        (0..self.index.n_regions()).fold((0, 0), |(y, n), i| (y + self.y(i, k, t), n + self.n(i, k, t)))
    }

    /// Writes the panel in canonical order (region, group, time).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let map = |e: csv::Error| Error::Panel(e.to_string());
        wtr.write_record(PANEL_HEADER).map_err(map)?;
        let ix = &self.index;
        for i in 0..ix.n_regions() {
            for k in 0..ix.n_groups() {
                for t in 0..ix.n_times() {
                    let c = ix.cell(i, k, t);
                    wtr.write_record([
                        ix.regions[i].as_str(),
                        ix.groups[k].as_str(),
                        ix.times[t].as_str(),
                        &self.deaths[c].to_string(),
                        &self.populations[c].to_string(),
                    ])
                    .map_err(map)?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::Panel(e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != PANEL_HEADER {
        return Err(Error::Panel(format!("expected header `{}`, found `{}`", PANEL_HEADER.join(","), got.join(","))));
    }
    Ok(())
}

/// Reads and validates a panel against `index`.
pub fn load_count_panel<R: Read>(source: R, index: PanelIndex) -> Result<CountPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(source);
    check_header(&mut rdr)?;
    let lookup = |labels: &[String]| -> HashMap<String, usize> {
        labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect()
    };
    let (rmap, gmap, tmap) = (lookup(&index.regions), lookup(&index.groups), lookup(&index.times));

    let n = index.n_cells();
    let mut deaths = vec![0u64; n];
    let mut pops = vec![0u64; n];
    let mut seen = vec![false; n];
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::Panel(e.to_string()))?;
        if rec.len() != 5 {
            return Err(Error::Panel(format!("line {line}: expected 5 fields, found {}", rec.len())));
        }
        let find = |map: &HashMap<String, usize>, axis: &str, v: &str| {
            map.get(v)
                .copied()
                .ok_or_else(|| Error::Panel(format!("line {line}: unknown {axis} label `{v}`")))
        };
        let i = find(&rmap, "region", &rec[0])?;
        let k = find(&gmap, "group", &rec[1])?;
        let t = find(&tmap, "time", &rec[2])?;
        let parse = |field: &'static str, v: &str| -> Result<i64> {
            let x: i64 = v
                .parse()
                .map_err(|_| Error::Panel(format!("line {line}: {field} `{v}` is not an integer")))?;
            if x < 0 {
                return Err(Error::NegativeValue { line, field, value: x });
            }
            Ok(x)
        };
        let y = parse("deaths", &rec[3])?;
        let p = parse("population", &rec[4])?;
        let c = index.cell(i, k, t);
        let coords = || (index.regions[i].clone(), index.groups[k].clone(), index.times[t].clone());
        if seen[c] {
            let (region, group, time) = coords();
            return Err(Error::DuplicateCell { region, group, time });
        }
        if y > p {
            let (region, group, time) = coords();
            return Err(Error::DeathsExceedPopulation { region, group, time, deaths: y, population: p });
        }
        seen[c] = true;
        deaths[c] = y as u64;
        pops[c] = p as u64;
    }
    if let Some(c) = seen.iter().position(|&s| !s) {
        let (i, k, t) = index.coords(c);
        return Err(Error::MissingCell {
            region: index.regions[i].clone(),
            group: index.groups[k].clone(),
            time: index.times[t].clone(),
        });
    }
    CountPanel::new(index, deaths, pops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(r: usize, g: usize, t: usize) -> PanelIndex {
        PanelIndex::synthetic(r, g, t).unwrap()
    }

    #[test]
    fn single_cell() {
        let text = "region,group,time,deaths,population\nR0000,g1,t1,0,100\n";
        let p = load_count_panel(text.as_bytes(), idx(1, 1, 1)).unwrap();
        assert_eq!(p.deaths(), &[0]);
        assert_eq!(p.populations(), &[100]);
    }

    #[test]
    fn deaths_exceed_population_names_cell() {
        let text = "region,group,time,deaths,population\nR0000,g1,t1,5,3\n";
        let err = load_count_panel(text.as_bytes(), idx(1, 1, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::DeathsExceedPopulation { .. }));
        assert!(msg.contains("R0000") && msg.contains("g1") && msg.contains("t1"), "{msg}");
    }

    #[test]
    fn missing_duplicate_negative() {
        let hdr = "region,group,time,deaths,population\n";
        let two = idx(1, 1, 2);
        let missing = format!("{hdr}R0000,g1,t1,0,10\n");
        assert!(matches!(load_count_panel(missing.as_bytes(), two.clone()), Err(Error::MissingCell { .. })));
        let dup = format!("{hdr}R0000,g1,t1,0,10\nR0000,g1,t1,0,10\n");
        assert!(matches!(load_count_panel(dup.as_bytes(), two.clone()), Err(Error::DuplicateCell { .. })));
        let neg = format!("{hdr}R0000,g1,t1,-1,10\nR0000,g1,t2,0,10\n");
        assert!(matches!(
            load_count_panel(neg.as_bytes(), two),
            Err(Error::NegativeValue { field: "deaths", .. })
        ));
    }

    #[test]
    fn round_trip_2x2x2() {
        let mut text = String::from("region,group,time,deaths,population\n");
        for r in ["A", "B"] {
            for g in ["young", "old"] {
                for (t, y) in [("1999", 3), ("2000", 4)] {
                    text.push_str(&format!("{r},{g},{t},{y},{}\n", 100 + y));
                }
            }
        }
        let index = PanelIndex::infer_from_csv(text.as_bytes()).unwrap();
        assert_eq!(index.n_cells(), 8);
        let p = load_count_panel(text.as_bytes(), index).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn layout_round_trip() {
        let ix = idx(3, 2, 4);
        for c in 0..ix.n_cells() {
            let (i, k, t) = ix.coords(c);
            assert_eq!(ix.cell(i, k, t), c);
        }
        assert_eq!(ix.cell(1, 1, 0), 8 + 1);
    }
}
