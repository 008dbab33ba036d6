//! Symmetric binary adjacency structure over the analysis units, with the
//! derived operators the spectral bases are built from: the doubly centered
//! adjacency and the Laplacian-style precision matrix.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Undirected binary adjacency over `n` nodes. Immutable after construction;
/// edges are stored once as `(i, j)` with `i < j`, no self-loops.
#[derive(Debug, Clone)]
pub struct AdjacencyGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degree: Vec<usize>,
}

/// Construction report: the graph plus counts of inputs that were dropped.
#[derive(Debug, Clone)]
pub struct EdgeIngest {
    pub graph: AdjacencyGraph,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Autocorrelation parameter for the precision matrix Q = D - rho * W.
/// The intrinsic case is rho = 1.
#[derive(Debug, Clone, Copy)]
pub struct PrecisionSpec {
    pub rho: f64,
}

impl Default for PrecisionSpec {
    fn default() -> Self {
        PrecisionSpec { rho: 1.0 }
    }
}

impl PrecisionSpec {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Parameter(format!(
                "rho must lie in [0, 1], got {rho}"
            )));
        }
        Ok(PrecisionSpec { rho })
    }
}

impl AdjacencyGraph {
    /// Build from index pairs. Self-loops are dropped and duplicate edges
    /// collapsed; both are counted in the returned report.
    pub fn from_index_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<EdgeIngest> {
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        let mut self_loops = 0usize;
        for &(a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::Data(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                self_loops += 1;
                continue;
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        let duplicates = before - edges.len();
        if self_loops > 0 {
            log::warn!("dropped {self_loops} self-loop(s) from edge list");
        }
        if duplicates > 0 {
            log::warn!("collapsed {duplicates} duplicate edge(s)");
        }
        let mut degree = vec![0usize; n];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        Ok(EdgeIngest {
            graph: AdjacencyGraph { n, edges, degree },
            self_loops_dropped: self_loops,
            duplicates_dropped: duplicates,
        })
    }

    /// Build from id pairs resolved against `node_ids`. Every id appearing in
    /// `pairs` must be present in `node_ids`.
    pub fn from_edge_list(pairs: &[(String, String)], node_ids: &[String]) -> Result<EdgeIngest> {
        let index: HashMap<&str, usize> = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut idx_pairs = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let ia = *index.get(a.as_str()).ok_or_else(|| {
                Error::Data(format!("edge ({a}, {b}) references unknown id '{a}'"))
            })?;
            let ib = *index.get(b.as_str()).ok_or_else(|| {
                Error::Data(format!("edge ({a}, {b}) references unknown id '{b}'"))
            })?;
            idx_pairs.push((ia, ib));
        }
        Self::from_index_pairs(node_ids.len(), &idx_pairs)
    }

    /// Rook-contiguity lattice of `side * side` nodes in row-major order.
    pub fn rook_lattice(side: usize) -> AdjacencyGraph {
        let n = side * side;
        let mut pairs = Vec::with_capacity(2 * side * side.saturating_sub(1));
        for r in 0..side {
            for c in 0..side {
                let i = r * side + c;
                if c + 1 < side {
                    pairs.push((i, i + 1));
                }
                if r + 1 < side {
                    pairs.push((i, i + side));
                }
            }
        }
        Self::from_index_pairs(n, &pairs)
            .expect("lattice pairs are always valid")
            .graph
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self) -> &[usize] {
        &self.degree
    }

    /// Sum of all adjacency weights, counting both directions: S0 = 2|E|.
    pub fn weight_total(&self) -> f64 {
        2.0 * self.edges.len() as f64
    }

    /// Dense W as a symmetric 0/1 matrix.
    pub fn dense_adjacency(&self) -> Array2<f64> {
        let mut w = Array2::zeros((self.n, self.n));
        for &(i, j) in &self.edges {
            w[[i, j]] = 1.0;
            w[[j, i]] = 1.0;
        }
        w
    }

    /// Doubly centered adjacency: H W H with H = I - 11'/n. Computed via
    /// w_ij - r_i/n - r_j/n + s/n^2 (r = row sums, s = total weight), which is
    /// algebraically identical to the projector product.
    pub fn doubly_center(&self) -> Array2<f64> {
        assert!(self.n >= 2, "doubly_center requires at least two nodes");
        let n = self.n as f64;
        let s = self.weight_total();
        let shift = s / (n * n);
        let r: Vec<f64> = self.degree.iter().map(|&d| d as f64 / n).collect();
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for j in 0..self.n {
                out[[i, j]] = shift - r[i] - r[j];
            }
        }
        for &(i, j) in &self.edges {
            out[[i, j]] += 1.0;
            out[[j, i]] += 1.0;
        }
        out
    }

    /// Sparse precision matrix Q = D - rho * W.
    pub fn precision_matrix(&self, spec: PrecisionSpec) -> PrecisionMatrix {
        PrecisionMatrix {
            n: self.n,
            rho: spec.rho,
            diag: self.degree.iter().map(|&d| d as f64).collect(),
            edges: self.edges.clone(),
        }
    }

    /// Component label per node, labels in 0..c in order of first appearance.
    pub fn connected_components(&self) -> Vec<usize> {
        let mut neighbors = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        let mut labels = vec![usize::MAX; self.n];
        let mut next = 0usize;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if labels[start] != usize::MAX {
                continue;
            }
            labels[start] = next;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &neighbors[v] {
                    if labels[w] == usize::MAX {
                        labels[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        labels
    }

    pub fn component_count(&self) -> usize {
        self.connected_components()
            .iter()
            .max()
            .map_or(0, |&m| m + 1)
    }

    /// Induced subgraph on `keep` (new node k = old node keep[k]).
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<AdjacencyGraph> {
        let mut old_to_new = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.n {
                return Err(Error::Parameter(format!(
                    "node index {old} out of range for graph of size {}",
                    self.n
                )));
            }
            if old_to_new[old] != usize::MAX {
                return Err(Error::Parameter(format!("node index {old} listed twice")));
            }
            old_to_new[old] = new;
        }
        let pairs: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter_map(|&(i, j)| {
                let (a, b) = (old_to_new[i], old_to_new[j]);
                (a != usize::MAX && b != usize::MAX).then_some((a, b))
            })
            .collect();
        Ok(Self::from_index_pairs(keep.len(), &pairs)?.graph)
    }

    /// Quadratic form v' W v, using edge iteration.
    pub fn adjacency_quad_form(&self, v: ArrayView1<f64>) -> f64 {
        2.0 * self
            .edges
            .iter()
            .map(|&(i, j)| v[i] * v[j])
            .sum::<f64>()
    }
}

/// Sparse symmetric precision matrix Q = D - rho * W, stored as the diagonal
/// plus the off-diagonal edge pattern.
#[derive(Debug, Clone)]
pub struct PrecisionMatrix {
    n: usize,
    rho: f64,
    diag: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

impl PrecisionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut q = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            q[[i, i]] = self.diag[i];
        }
        for &(i, j) in &self.edges {
            q[[i, j]] = -self.rho;
            q[[j, i]] = -self.rho;
        }
        q
    }

    pub fn matvec(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.n);
        for i in 0..self.n {
            out[i] = self.diag[i] * v[i];
        }
        for &(i, j) in &self.edges {
            out[i] -= self.rho * v[j];
            out[j] -= self.rho * v[i];
        }
        out
    }

    /// v' Q v; for rho = 1 this is the Dirichlet energy sum over edges of
    /// (v_i - v_j)^2.
    pub fn quad_form(&self, v: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += self.diag[i] * v[i] * v[i];
        }
        for &(i, j) in &self.edges {
            acc -= 2.0 * self.rho * v[i] * v[j];
        }
        acc
    }
}

/// Read an undirected edge list CSV with header `src,dst`.
pub fn read_edge_list_csv(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open edge list {}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Data(format!(
            "edge list {} must have two columns, found {}",
            path.display(),
            headers.len()
        )));
    }
    let mut pairs = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let src = record.get(0).unwrap_or("").trim();
        let dst = record.get(1).unwrap_or("").trim();
        if src.is_empty() || dst.is_empty() {
            return Err(Error::Parse {
                row: idx + 2,
                message: "empty id in edge list".to_string(),
            });
        }
        pairs.push((src.to_string(), dst.to_string()));
    }
    Ok(pairs)
}

/// Write an edge list CSV with header `src,dst`, one row per undirected edge.
pub fn write_edge_list_csv(
    path: &Path,
    graph: &AdjacencyGraph,
    node_ids: &[String],
) -> Result<()> {
    let mut out = String::from("src,dst\n");
    for &(i, j) in graph.edges() {
        out.push_str(&node_ids[i]);
        out.push(',');
        out.push_str(&node_ids[j]);
        out.push('\n');
    }
    crate::cli::write_atomic(path, out.as_bytes())
}

/// Read a Matrix Market symmetric coordinate file as an adjacency pattern.
/// Any nonzero off-diagonal entry becomes an edge; values are ignored beyond
/// zero/nonzero since the adjacency is binary.
pub fn read_matrix_market(path: &Path) -> Result<EdgeIngest> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty Matrix Market file".to_string()))?;
    if !header.starts_with("%%MatrixMarket") || !header.contains("coordinate") {
        return Err(Error::Data(
            "expected a Matrix Market coordinate header".to_string(),
        ));
    }
    let mut rows = lines.skip_while(|l| l.starts_with('%'));
    let size_line = rows
        .next()
        .ok_or_else(|| Error::Data("Matrix Market file has no size line".to_string()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .take(2)
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Data(format!("bad Matrix Market size line: {e}")))?;
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(Error::Data("adjacency matrix must be square".to_string()));
    }
    let n = dims[0];
    let mut pairs = Vec::new();
    for line in rows {
        let mut it = line.split_whitespace();
        let (Some(i), Some(j)) = (it.next(), it.next()) else {
            continue;
        };
        let i: usize = i
            .parse()
            .map_err(|e| Error::Data(format!("bad Matrix Market entry: {e}")))?;
        let j: usize = j
            .parse()
            .map_err(|e| Error::Data(format!("bad Matrix Market entry: {e}")))?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::Data(format!(
                "Matrix Market index ({i}, {j}) out of 1..={n}"
            )));
        }
        let value = it.next().map_or(1.0, |v| v.parse::<f64>().unwrap_or(1.0));
        if value != 0.0 {
            pairs.push((i - 1, j - 1));
        }
    }
    AdjacencyGraph::from_index_pairs(n, &pairs)
}
