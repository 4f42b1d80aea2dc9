//! Undirected graphs in compressed-row form and the self-looped,
//! symmetrically normalized propagation operator built from them.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Symmetric adjacency in compressed-row form.
///
/// Column indices are strictly increasing within each row and no self-loops
/// are stored; normalization injects them.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// One input edge `(u, v, weight)`.
pub type Edge = (usize, usize, f64);

impl Graph {
    /// Builds a symmetric graph from an undirected edge list.
    ///
    /// Each edge is stored in both directions. Self-loops are dropped and
    /// repeated edges (in either orientation) keep the weight of their first
    /// occurrence.
    pub fn from_edges(edges: &[Edge], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(u, v, w) in edges {
            for index in [u, v] {
                if index >= n {
                    return Err(Error::NodeOutOfRange { index, n });
                }
            }
            if u == v {
                continue;
            }
            unique.entry((u.min(v), u.max(v))).or_insert(w);
        }

        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(a, b), &w) in &unique {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        let mut rows = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(2 * unique.len());
        let mut vals = Vec::with_capacity(2 * unique.len());
        rows.push(0);
        for mut nbrs in adj {
            nbrs.sort_unstable_by_key(|&(c, _)| c);
            for (c, w) in nbrs {
                cols.push(c);
                vals.push(w);
            }
            rows.push(cols.len());
        }
        Ok(Self { n, rows, cols, vals })
    }

    /// Unweighted convenience constructor.
    pub fn from_pairs(pairs: &[(usize, usize)], n: usize) -> Result<Self> {
        let edges: Vec<Edge> = pairs.iter().map(|&(u, v)| (u, v, 1.0)).collect();
        Self::from_edges(&edges, n)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of stored (directed) entries, i.e. twice the undirected edge count.
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn edge_count(&self) -> usize {
        self.cols.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.rows
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.cols[self.rows[u]..self.rows[u + 1]]
    }

    pub fn weights(&self, u: usize) -> &[f64] {
        &self.vals[self.rows[u]..self.rows[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.rows[u + 1] - self.rows[u]
    }

    /// Weighted degree `Σ_v w_uv`.
    pub fn weighted_degree(&self, u: usize) -> f64 {
        self.weights(u).iter().sum()
    }

    /// Undirected edges with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for (&v, &w) in self.neighbors(u).iter().zip(self.weights(u)) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// Relabels nodes: node `u` becomes `perm[u]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!("permutation of length {} for {} nodes", perm.len(), self.n)));
        }
        let edges: Vec<Edge> = self.edges().into_iter().map(|(u, v, w)| (perm[u], perm[v], w)).collect();
        Self::from_edges(&edges, self.n)
    }
}

/// Parses the whitespace-separated edge-list format: `u v` or `u v w` per
/// line, `#` comments, 0-based ids.
pub fn parse_edge_list(text: &str, source: &str) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { path: source.to_string(), line: lineno + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(err(format!("expected 2 or 3 fields, found {}", fields.len())));
        }
        let u: usize = fields[0].parse().map_err(|_| err(format!("bad node id {:?}", fields[0])))?;
        let v: usize = fields[1].parse().map_err(|_| err(format!("bad node id {:?}", fields[1])))?;
        let w = match fields.get(2) {
            Some(s) => s.parse::<f64>().map_err(|_| err(format!("bad weight {s:?}")))?,
            None => 1.0,
        };
        if !w.is_finite() {
            return Err(err(format!("non-finite weight {w}")));
        }
        edges.push((u, v, w));
    }
    Ok(edges)
}

pub fn read_edge_list(path: &Path) -> Result<Vec<Edge>> {
    let text =
        std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_edge_list(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `P̃ = (D+I)^{-1/2} (A+I) (D+I)^{-1/2}`
    NormalizedAdjacency,
    /// `L̃ = I − P̃`
    Laplacian,
}

impl OperatorKind {
    fn name(self) -> &'static str {
        match self {
            Self::NormalizedAdjacency => "normalized-adjacency",
            Self::Laplacian => "laplacian",
        }
    }
}

/// Sparse symmetric `n×n` operator in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperator {
    n: usize,
    kind: OperatorKind,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl PropagationOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.rows[r]..self.rows[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    /// Stored entry `(r, c)`, or 0 if it is outside the sparsity pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.rows[r]..self.rows[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(i) => self.vals[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row_entries(r) {
                m.set(r, c, v);
            }
        }
        m
    }

    /// Largest `|m_rc − m_cr|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for (c, v) in self.row_entries(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Sparse-dense product `self · h`.
    ///
    /// Each output row accumulates its terms in ascending column order, so
    /// results are bitwise reproducible.
    pub fn spmm(&self, h: &Matrix) -> Result<Matrix> {
        if h.rows() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "spmm operator {}x{} with signal {}x{}",
                self.n,
                self.n,
                h.rows(),
                h.cols()
            )));
        }
        Ok(self.spmm_unchecked(h))
    }

    pub(crate) fn spmm_unchecked(&self, h: &Matrix) -> Matrix {
        let f = h.cols();
        let mut out = Matrix::zeros(self.n, f);
        for r in 0..self.n {
            let acc = out.row_mut(r);
            for (c, v) in self.row_entries(r) {
                for (o, &x) in acc.iter_mut().zip(h.row(c)) {
                    *o += v * x;
                }
            }
        }
        out
    }
}

/// Self-looped symmetric normalization of `g`.
///
/// Entry `(u, v)` is `w_uv / √((d_u+1)(d_v+1))` and the injected diagonal is
/// `1/(d_u+1)`, where `d` is the weighted degree.
pub fn normalized_adjacency(g: &Graph) -> PropagationOperator {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = (0..n).map(|u| 1.0 / (g.weighted_degree(u) + 1.0).sqrt()).collect();
    let mut rows = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(g.nnz() + n);
    let mut vals = Vec::with_capacity(g.nnz() + n);
    rows.push(0);
    for u in 0..n {
        let mut diag_done = false;
        for (&v, &w) in g.neighbors(u).iter().zip(g.weights(u)) {
            if !diag_done && v > u {
                cols.push(u);
                vals.push(inv_sqrt[u] * inv_sqrt[u]);
                diag_done = true;
            }
            cols.push(v);
            vals.push(w * inv_sqrt[u] * inv_sqrt[v]);
        }
        if !diag_done {
            cols.push(u);
            vals.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        rows.push(cols.len());
    }
    PropagationOperator { n, kind: OperatorKind::NormalizedAdjacency, rows, cols, vals }
}

/// `L̃ = I − P̃`, sharing `P̃`'s sparsity pattern plus the full diagonal.
pub fn laplacian(p: &PropagationOperator) -> Result<PropagationOperator> {
    if p.kind != OperatorKind::NormalizedAdjacency {
        return Err(Error::WrongOperatorKind {
            expected: OperatorKind::NormalizedAdjacency.name(),
            got: p.kind.name(),
        });
    }
    let n = p.n;
    let mut rows = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(p.nnz() + n);
    let mut vals = Vec::with_capacity(p.nnz() + n);
    rows.push(0);
    for r in 0..n {
        let mut diag_done = false;
        for (c, v) in p.row_entries(r) {
            if !diag_done && c > r {
                cols.push(r);
                vals.push(1.0);
                diag_done = true;
            }
            if c == r {
                cols.push(c);
                vals.push(1.0 - v);
                diag_done = true;
            } else {
                cols.push(c);
                vals.push(-v);
            }
        }
        if !diag_done {
            cols.push(r);
            vals.push(1.0);
        }
        rows.push(cols.len());
    }
    Ok(PropagationOperator { n, kind: OperatorKind::Laplacian, rows, cols, vals })
}

/// Free-function form of [`PropagationOperator::spmm`].
pub fn spmm(p: &PropagationOperator, h: &Matrix) -> Result<Matrix> {
    p.spmm(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_pairs(&[(0, 1), (1, 2), (0, 2)], 3).unwrap()
    }

    #[test]
    fn single_edge_is_symmetrized() {
        let g = Graph::from_pairs(&[(0, 1)], 2).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.weights(0), &[1.0]);
    }

    #[test]
    fn duplicates_and_self_loops() {
        let g = Graph::from_pairs(&[(0, 1), (1, 0), (2, 2)], 3).unwrap();
        assert_eq!(g.nnz(), 2);
        assert_eq!(g.degree(2), 0);
        // first weight wins, regardless of orientation
        let g = Graph::from_edges(&[(1, 0, 2.5), (0, 1, 7.0)], 2).unwrap();
        assert_eq!(g.weights(0), &[2.5]);
        assert_eq!(g.weights(1), &[2.5]);
    }

    #[test]
    fn triangle_degrees() {
        let g = triangle();
        assert_eq!(g.nnz(), 6);
        assert!((0..3).all(|u| g.degree(u) == 2));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(Graph::from_pairs(&[], 0), Err(Error::EmptyGraph)));
        assert!(matches!(Graph::from_pairs(&[(0, 3)], 3), Err(Error::NodeOutOfRange { index: 3, n: 3 })));
    }

    #[test]
    fn normalized_adjacency_closed_forms() {
        let p = normalized_adjacency(&triangle());
        let d = p.to_dense();
        assert!(d.as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));

        let p = normalized_adjacency(&Graph::from_pairs(&[(0, 1)], 2).unwrap());
        assert!(p.to_dense().as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-15));

        let p = normalized_adjacency(&Graph::from_pairs(&[], 3).unwrap());
        assert_eq!(p.to_dense(), Matrix::identity(3));
    }

    #[test]
    fn diagonal_slots_in_sorted_position() {
        let g = Graph::from_pairs(&[(0, 2), (1, 2), (2, 3)], 4).unwrap();
        let p = normalized_adjacency(&g);
        for r in 0..4 {
            let cols: Vec<usize> = p.row_entries(r).map(|(c, _)| c).collect();
            assert!(cols.windows(2).all(|w| w[0] < w[1]), "row {r}: {cols:?}");
            assert!(cols.contains(&r));
        }
        assert!((p.get(2, 2) - 0.25).abs() < 1e-15);
        assert!((p.get(0, 2) - 1.0 / (2.0f64 * 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn laplacian_examples() {
        let id = normalized_adjacency(&Graph::from_pairs(&[], 3).unwrap());
        let l = laplacian(&id).unwrap();
        assert_eq!(l.kind(), OperatorKind::Laplacian);
        assert_eq!(l.to_dense(), Matrix::zeros(3, 3));

        let l = laplacian(&normalized_adjacency(&triangle())).unwrap().to_dense();
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 2.0 / 3.0 } else { -1.0 / 3.0 };
                assert!((l.get(r, c) - want).abs() < 1e-15);
            }
        }
        assert!(matches!(laplacian(&laplacian(&id).unwrap()), Err(Error::WrongOperatorKind { .. })));
    }

    #[test]
    fn spmm_examples() {
        let id = normalized_adjacency(&Graph::from_pairs(&[], 4).unwrap());
        let h = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 4.0], vec![0.5, 0.0], vec![9.0, 1.0]]).unwrap();
        assert_eq!(id.spmm(&h).unwrap(), h);

        let p = normalized_adjacency(&triangle());
        let out = spmm(&p, &Matrix::column(&[1.0, 2.0, 3.0])).unwrap();
        for r in 0..3 {
            assert!((out.get(r, 0) - 2.0).abs() < 1e-15);
        }
        assert!(p.spmm(&Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let text = "# comment\n0 1\n\n1 2 0.5\n";
        let edges = parse_edge_list(text, "mem").unwrap();
        assert_eq!(edges, vec![(0, 1, 1.0), (1, 2, 0.5)]);
        let err = parse_edge_list("0 1\n0 x\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_edge_list("0 1 2 3\n", "mem").is_err());
    }
}
