//! Areal adjacency graphs and the spectrum of their ICAR precision `D − W`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::BufRead;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Default node cap for dense eigendecomposition.
pub const DEFAULT_SPECTRUM_CAP: usize = 2_000;

/// Undirected adjacency between `node_count` regions.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted; the neighbor lists
/// are sorted as well so every traversal happens in a fixed order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpatialGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    components: Vec<Vec<usize>>,
    component_of: Vec<usize>,
}

impl SpatialGraph {
    /// Builds a graph from node pairs. Duplicate edges (in either orientation)
    /// are collapsed.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::Graph(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(Error::Graph(format!("self-edge on node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let (components, component_of) = connected_components(&neighbors);
        Ok(SpatialGraph { n, edges, neighbors, components, component_of })
    }

    /// Rook-adjacency lattice of `rows × cols` cells, numbered row-major.
    pub fn lattice(rows: usize, cols: usize) -> Result<Self> {
        Self::grid(rows * cols, cols)
    }

    /// The first `n` cells of a row-major rook lattice `cols` wide; the last
    /// row may be partial.
    pub fn grid(n: usize, cols: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Graph("lattice needs at least one column".into()));
        }
        let mut pairs = Vec::new();
        for v in 0..n {
            let (r, c) = (v / cols, v % cols);
            if c + 1 < cols && v + 1 < n {
                pairs.push((v, v + 1));
            }
            let below = (r + 1) * cols + c;
            if below < n {
                pairs.push((v, below));
            }
        }
        Self::from_edges(n, pairs)
    }

    /// Region labels used by [`SpatialGraph::lattice`] exports.
    pub fn lattice_labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("R{i:04}")).collect()
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn component_of(&self, i: usize) -> usize {
        self.component_of[i]
    }

    pub fn is_connected(&self) -> bool {
        self.components.len() == 1
    }

    /// Dense `D − W`.
    pub fn laplacian<T: Real>(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = T::from_count(self.degree(i));
        }
        for &(a, b) in &self.edges {
            m[(a, b)] = -T::one();
            m[(b, a)] = -T::one();
        }
        m
    }

    /// Writes the edge list in the text format read by [`load_adjacency`].
    pub fn write_edge_list<W: std::io::Write>(&self, labels: &[String], mut w: W) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { what: "region labels", expected: self.n, found: labels.len() });
        }
        for &(a, b) in &self.edges {
            writeln!(w, "{} {}", labels[a], labels[b])?;
        }
        Ok(())
    }
}

fn connected_components(neighbors: &[Vec<usize>]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = neighbors.len();
    let mut component_of = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if component_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component_of[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &u in &neighbors[v] {
                if component_of[u] == usize::MAX {
                    component_of[u] = id;
                    members.push(u);
                    queue.push_back(u);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    (components, component_of)
}

/// Parses a whitespace-separated edge list against a known region list.
///
/// Blank lines and anything after `#` are ignored.
pub fn load_adjacency<R: BufRead>(source: R, labels: &[String]) -> Result<SpatialGraph> {
    let lookup: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut pairs = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::MalformedEdge { line: lineno + 1, content: content.to_string() });
        }
        let mut ids = [0usize; 2];
        for (slot, tok) in ids.iter_mut().zip(&toks) {
            *slot = *lookup
                .get(tok)
                .ok_or_else(|| Error::UnknownLabel { line: lineno + 1, label: tok.to_string() })?;
        }
        if ids[0] == ids[1] {
            return Err(Error::SelfEdge { line: lineno + 1, label: toks[0].to_string() });
        }
        pairs.push((ids[0], ids[1]));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyAdjacency);
    }
    SpatialGraph::from_edges(labels.len(), pairs)
}

/// Eigendecomposition of `D − W`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct GraphSpectrum<T> {
    eigenvalues: Vec<T>,
    /// Column `ι` is the eigenvector for `eigenvalues[ι]`.
    eigenvectors: Mat<T>,
    null_count: usize,
}

impl<T: Real> GraphSpectrum<T> {
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat<T> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, idx: usize) -> Vec<T> {
        let q = &self.eigenvectors;
        (0..q.rows()).map(|i| q[(i, idx)]).collect()
    }

    pub fn null_count(&self) -> usize {
        self.null_count
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Indices of the nonzero eigenpairs, ascending.
    pub fn nonnull(&self) -> std::ops::Range<usize> {
        self.null_count..self.eigenvalues.len()
    }
}

/// Computes the spectrum of `D − W` with the default size cap.
pub fn graph_spectrum<T: Real>(g: &SpatialGraph) -> Result<GraphSpectrum<T>> {
    graph_spectrum_capped(g, DEFAULT_SPECTRUM_CAP)
}

/// Computes the spectrum of `D − W`, refusing graphs above `cap` nodes.
///
/// The null space is returned as normalized component indicators, which
/// span the same space as whatever basis the eigensolver produced.
pub fn graph_spectrum_capped<T: Real>(g: &SpatialGraph, cap: usize) -> Result<GraphSpectrum<T>> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::Graph("spectrum needs at least two nodes".into()));
    }
    if n > cap {
        return Err(Error::TooLarge { rows: n, limit: cap });
    }
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        lap[(i, i)] = g.degree(i) as f64;
    }
    for &(a, b) in g.edges() {
        lap[(a, b)] = -1.0;
        lap[(b, a)] = -1.0;
    }
    let eig = lap
        .try_symmetric_eigen(1e-14, 10_000)
        .ok_or_else(|| Error::Eigen(format!("symmetric eigensolver did not converge on {n} nodes")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = 1e-9 * max_ev.max(1.0);
    let null_count = order.iter().filter(|&&i| eig.eigenvalues[i].abs() <= tol).count();
    if null_count != g.component_count() {
        return Err(Error::Eigen(format!(
            "found {null_count} null eigenvalues for a graph with {} components",
            g.component_count()
        )));
    }

    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::<T>::zeros(n, n);
    for (c, members) in g.components().iter().enumerate() {
        values.push(T::zero());
        let w = 1.0 / (members.len() as f64).sqrt();
        for &i in members {
            vectors[(i, c)] = T::lit(w);
        }
    }
    for (col, &src) in order.iter().enumerate().skip(null_count) {
        values.push(T::lit(eig.eigenvalues[src]));
        // fix the sign so the largest-magnitude entry is positive
        let v = eig.eigenvectors.column(src);
        let pivot = v.iter().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, col)] = T::lit(sign * v[i]);
        }
    }
    Ok(GraphSpectrum { eigenvalues: values, eigenvectors: vectors, null_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_node_file() {
        let g = load_adjacency(Cursor::new("A B\n"), &labels(&["A", "B"])).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.degrees(), vec![1, 1]);
        assert_eq!(g.component_count(), 1);
    }

    #[test]
    fn path_degrees_and_duplicates() {
        let text = "# path\nA B\nB C # trailing\n\nC D\nB A\n";
        let g = load_adjacency(Cursor::new(text), &labels(&["A", "B", "C", "D"])).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 2, 1]);
        assert_eq!(g.edges().len(), 3);
        assert!(g.is_connected());
    }

    #[test]
    fn disjoint_edges_two_components() {
        let g = load_adjacency(Cursor::new("A B\nC D\n"), &labels(&["A", "B", "C", "D"])).unwrap();
        assert_eq!(g.component_count(), 2);
        let s = graph_spectrum::<f64>(&g).unwrap();
        assert_eq!(s.null_count(), 2);
        assert_eq!(&s.eigenvalues()[..2], &[0.0, 0.0]);
    }

    #[test]
    fn parse_errors_are_distinct() {
        let l = labels(&["A", "B"]);
        assert!(matches!(
            load_adjacency(Cursor::new("A Z\n"), &l),
            Err(Error::UnknownLabel { line: 1, .. })
        ));
        assert!(matches!(
            load_adjacency(Cursor::new("A B\nA A\n"), &l),
            Err(Error::SelfEdge { line: 2, .. })
        ));
        assert!(matches!(load_adjacency(Cursor::new("# nothing\n"), &l), Err(Error::EmptyAdjacency)));
        assert!(matches!(
            load_adjacency(Cursor::new("A B C\n"), &l),
            Err(Error::MalformedEdge { line: 1, .. })
        ));
    }

    #[test]
    fn two_node_spectrum() {
        let g = SpatialGraph::from_edges(2, [(0, 1)]).unwrap();
        let s = graph_spectrum::<f64>(&g).unwrap();
        assert!((s.eigenvalues()[0]).abs() < 1e-12);
        assert!((s.eigenvalues()[1] - 2.0).abs() < 1e-12);
        let r = 1.0 / 2f64.sqrt();
        let q0 = s.eigenvector(0);
        let q1 = s.eigenvector(1);
        assert!((q0[0] - r).abs() < 1e-12 && (q0[1] - r).abs() < 1e-12);
        assert!((q1[0].abs() - r).abs() < 1e-12 && (q1[0] + q1[1]).abs() < 1e-12);
    }

    #[test]
    fn three_node_path_spectrum() {
        // characteristic polynomial of the path Laplacian: λ(λ−1)(λ−3)
        let g = SpatialGraph::lattice(1, 3).unwrap();
        let s = graph_spectrum::<f64>(&g).unwrap();
        for (got, want) in s.eigenvalues().iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn spectrum_cap() {
        let g = SpatialGraph::lattice(3, 3).unwrap();
        assert!(matches!(graph_spectrum_capped::<f64>(&g, 4), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn grid_partial_row() {
        let g = SpatialGraph::grid(7, 3).unwrap();
        // rows: 0 1 2 / 3 4 5 / 6
        assert_eq!(g.neighbors(6), &[3]);
        assert_eq!(g.neighbors(4), &[1, 3, 5]);
        assert!(g.is_connected());
    }
}
