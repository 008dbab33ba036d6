//! Graph-spectral basis construction: Moran eigenvector maps from the doubly
//! centered adjacency, and ICAR bases from the Laplacian precision matrix,
//! plus the residual-autocorrelation rule for picking the basis dimension.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

use crate::diagnostics::{morans_i, MoranConfig};
use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, PrecisionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BasisFamily {
    Mem,
    Icar,
}

impl std::fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisFamily::Mem => write!(f, "MEM"),
            BasisFamily::Icar => write!(f, "ICAR"),
        }
    }
}

/// An n x K matrix of orthonormal spectral basis columns with their
/// eigenvalues (MEM: descending eigenvalues of the centered adjacency;
/// ICAR: ascending nonzero eigenvalues of the precision matrix).
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    pub family: BasisFamily,
    pub z: Array2<f64>,
    pub eigenvalues: Vec<f64>,
}

impl BasisMatrix {
    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    /// View of the first `k` columns as a new basis (columns are ordered by
    /// the family's eigenvalue rule, so a prefix is itself a valid basis).
    pub fn prefix(&self, k: usize) -> BasisMatrix {
        assert!(k <= self.k());
        BasisMatrix {
            family: self.family,
            z: self.z.slice(ndarray::s![.., ..k]).to_owned(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
        }
    }
}

/// Eigenpairs of a dense symmetric matrix, as (value, vector) columns.
fn symmetric_eigen(mat: &Array2<f64>) -> (Vec<f64>, Vec<Array1<f64>>) {
    let n = mat.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| mat[[i, j]]);
    let eig = SymmetricEigen::new(dm);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let vectors: Vec<Array1<f64>> = (0..n)
        .map(|c| Array1::from_iter(eig.eigenvectors.column(c).iter().copied()))
        .collect();
    (values, vectors)
}

/// Flip so the entry of largest absolute value (first such index on ties)
/// is positive.
fn fix_sign(v: &mut Array1<f64>) {
    let mut best = 0usize;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Order eigenpairs by eigenvalue (per `descending`), breaking ties inside
/// degenerate clusters (gap below `cluster_tol`) by the index of the first
/// nonzero coordinate, then lexicographically. Any orthonormal rotation of a
/// cluster spans the same space; the tie-break only pins a reproducible
/// representative.
fn order_eigenpairs(
    mut pairs: Vec<(f64, Array1<f64>)>,
    descending: bool,
    cluster_tol: f64,
) -> Vec<(f64, Array1<f64>)> {
    pairs.sort_by(|a, b| {
        let ord = a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[end].0 - pairs[end - 1].0).abs() < cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| {
                let fa = a.1.iter().position(|x| x.abs() > 1e-9).unwrap_or(usize::MAX);
                let fb = b.1.iter().position(|x| x.abs() > 1e-9).unwrap_or(usize::MAX);
                fa.cmp(&fb).then_with(|| {
                    for (x, y) in a.1.iter().zip(b.1.iter()) {
                        match x.partial_cmp(y) {
                            Some(std::cmp::Ordering::Equal) | None => continue,
                            Some(ord) => return ord,
                        }
                    }
                    std::cmp::Ordering::Equal
                })
            });
        }
        start = end;
    }
    pairs
}

fn assemble(family: BasisFamily, pairs: &[(f64, Array1<f64>)], n: usize) -> BasisMatrix {
    let k = pairs.len();
    let mut z = Array2::zeros((n, k));
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, (val, vec)) in pairs.iter().enumerate() {
        let mut col = vec.clone();
        fix_sign(&mut col);
        z.column_mut(c).assign(&col);
        eigenvalues.push(*val);
    }
    BasisMatrix {
        family,
        z,
        eigenvalues,
    }
}

/// Moran eigenvector map basis: eigenvectors of the doubly centered adjacency
/// for the K algebraically largest eigenvalues.
///
/// The constant vector is always a null vector of the centered adjacency; it
/// is deflated (shifted far below the spectrum) so every returned column is
/// orthogonal to the constant even when the K requested reach the null space.
pub fn mem_basis(graph: &AdjacencyGraph, k: usize) -> Result<BasisMatrix> {
    let n = graph.n();
    if k == 0 || k > n.saturating_sub(1) {
        return Err(Error::Parameter(format!(
            "MEM basis dimension must satisfy 1 <= K <= n-1 = {}, got {k}",
            n.saturating_sub(1)
        )));
    }
    let mut m = graph.doubly_center();
    let shift = 2.0 * n as f64 + 1.0;
    let nf = n as f64;
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] -= shift / nf;
        }
    }
    let (values, vectors) = symmetric_eigen(&m);
    // undo the deflation shift on the constant direction by simply dropping
    // the single eigenvalue pushed to about -shift
    let pairs: Vec<(f64, Array1<f64>)> = values
        .into_iter()
        .zip(vectors)
        .filter(|(v, _)| *v > -shift / 2.0)
        .collect();
    let ordered = order_eigenpairs(pairs, true, 1e-10);
    let kept = &ordered[..k];
    let nonpositive = kept.iter().filter(|(v, _)| *v <= 0.0).count();
    if nonpositive > 0 {
        log::warn!(
            "MEM basis retains {nonpositive} non-positive eigenvalue(s); those columns encode negative autocorrelation"
        );
    }
    Ok(assemble(BasisFamily::Mem, kept, n))
}

/// ICAR basis: eigenvectors of Q = D - rho W for the K smallest eigenvalues
/// above the zero threshold 1e-8 * lambda_max(Q). Null vectors (one per
/// connected component at rho = 1) are always excluded.
pub fn icar_basis(graph: &AdjacencyGraph, spec: PrecisionSpec, k: usize) -> Result<BasisMatrix> {
    let n = graph.n();
    let q = graph.precision_matrix(spec).to_dense();
    let (values, vectors) = symmetric_eigen(&q);
    let lambda_max = values.iter().cloned().fold(0.0_f64, f64::max);
    let threshold = 1e-8 * lambda_max;
    let pairs: Vec<(f64, Array1<f64>)> = values
        .into_iter()
        .zip(vectors)
        .filter(|(v, _)| *v > threshold)
        .collect();
    let available = pairs.len();
    if k == 0 || k > available {
        return Err(Error::Parameter(format!(
            "ICAR basis dimension must satisfy 1 <= K <= n - c = {available} \
             (n = {n}, {} zero eigenvalue(s)), got {k}",
            n - available
        )));
    }
    let ordered = order_eigenpairs(pairs, false, 1e-10);
    Ok(assemble(BasisFamily::Icar, &ordered[..k], n))
}

pub fn basis_for_family(
    graph: &AdjacencyGraph,
    family: BasisFamily,
    k: usize,
) -> Result<BasisMatrix> {
    match family {
        BasisFamily::Mem => mem_basis(graph, k),
        BasisFamily::Icar => icar_basis(graph, PrecisionSpec::default(), k),
    }
}

/// Per-K payload a residual provider hands back to the selection rule:
/// residuals from the K-dimensional fit plus the bookkeeping the sweep table
/// reports.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub residuals: Array1<f64>,
    /// Total sum of squares of the response, for R^2.
    pub total_ss: f64,
    pub active_bases: usize,
}

/// One row of the K sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub active_bases: usize,
    pub moran_i: f64,
    pub moran_p: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct KSelection {
    pub selected: usize,
    /// True when no candidate passed and `selected` is just the largest one.
    pub no_pass: bool,
    pub rows: Vec<SweepRow>,
}

/// Pick the smallest candidate K whose residual Moran p-value exceeds
/// `alpha`. If none passes, the largest candidate is returned flagged
/// `no_pass`. The full sweep table is produced either way.
pub fn select_k<F>(
    candidates: &[usize],
    mut residual_provider: F,
    graph: &AdjacencyGraph,
    alpha: f64,
) -> Result<KSelection>
where
    F: FnMut(usize) -> Result<ResidualReport>,
{
    if candidates.is_empty() {
        return Err(Error::Parameter("candidate K list is empty".to_string()));
    }
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(
            "candidate K list must be strictly ascending".to_string(),
        ));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let report = residual_provider(k)
            .map_err(|e| Error::Numerical(format!("residual fit failed at K = {k}: {e}")))?;
        let resid = &report.residuals;
        let n = resid.len() as f64;
        let sse = resid.iter().map(|r| r * r).sum::<f64>();
        let rmse = (sse / n).sqrt();
        let mae = resid.iter().map(|r| r.abs()).sum::<f64>() / n;
        let r2 = 1.0 - sse / report.total_ss;
        let moran = morans_i(resid.view(), graph, &MoranConfig::default())?;
        rows.push(SweepRow {
            k,
            rmse,
            mae,
            r2,
            active_bases: report.active_bases,
            moran_i: moran.i,
            moran_p: moran.p_value,
            passed: moran.p_value > alpha,
        });
    }
    let (selected, no_pass) = match rows.iter().find(|r| r.passed) {
        Some(row) => (row.k, false),
        None => (*candidates.last().unwrap(), true),
    };
    Ok(KSelection {
        selected,
        no_pass,
        rows,
    })
}

/// Export basis columns as CSV (unit id plus one column per basis vector).
pub fn write_basis_csv(
    path: &std::path::Path,
    basis: &BasisMatrix,
    unit_ids: &[String],
) -> Result<()> {
    let mut out = String::from("unit_id");
    for c in 0..basis.k() {
        out.push_str(&format!(",z{:03}", c + 1));
    }
    out.push('\n');
    for (i, id) in unit_ids.iter().enumerate() {
        out.push_str(id);
        for c in 0..basis.k() {
            out.push_str(&format!(",{}", basis.z[[i, c]]));
        }
        out.push('\n');
    }
    crate::cli::write_atomic(path, out.as_bytes())
}
