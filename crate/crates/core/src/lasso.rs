//! Least-squares Lasso with a designated unpenalized coefficient subset,
//! solved by cyclic coordinate descent with covariance (Gram) updates, plus
//! cross-validated penalty selection. This is the shared engine behind the
//! treatment-mean model and the outcome model: basis coefficients carry the
//! L1 penalty while intercept, treatment, and confounders stay unpenalized.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::crossfit::CrossFitPlan;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100_000;

/// Partition of design columns into unpenalized and penalized index sets.
/// The sets must be disjoint and jointly cover every column.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub unpenalized: Vec<usize>,
    pub penalized: Vec<usize>,
    pub standardize_penalized: bool,
}

impl DesignSpec {
    pub fn new(unpenalized: Vec<usize>, penalized: Vec<usize>) -> Self {
        DesignSpec {
            unpenalized,
            penalized,
            standardize_penalized: true,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let mut seen = vec![false; p];
        for &j in self.unpenalized.iter().chain(self.penalized.iter()) {
            if j >= p {
                return Err(Error::Parameter(format!(
                    "design column index {j} out of range for {p} columns"
                )));
            }
            if seen[j] {
                return Err(Error::Parameter(format!(
                    "design column {j} appears in both index sets"
                )));
            }
            seen[j] = true;
        }
        if let Some(j) = seen.iter().position(|&s| !s) {
            return Err(Error::Parameter(format!(
                "design column {j} is in neither index set"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CvEntry {
    pub lambda: f64,
    pub cv_error: f64,
}

/// A fitted penalized regression: coefficients are reported on the original
/// column scale regardless of internal standardization.
#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub coefficients: Array1<f64>,
    pub lambda: f64,
    pub active_count: usize,
    pub residual_variance: f64,
    pub cv_table: Vec<CvEntry>,
}

impl PenalizedFit {
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.coefficients)
    }
}

/// Penalty-selection settings shared by every cross-validated fit.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub grid_size: usize,
    pub lambda_min_ratio: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            grid_size: 100,
            lambda_min_ratio: 1e-4,
            seed: 0,
        }
    }
}

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

fn check_finite(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("design matrix contains non-finite values".to_string()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("response contains non-finite values".to_string()));
    }
    Ok(())
}

/// Precomputed Gram-form problem over one training set; solves any lambda on
/// it, so a descending grid can reuse the factorization with warm starts.
struct CdProblem {
    n: usize,
    p: usize,
    gram: Array2<f64>,
    xty: Array1<f64>,
    yty: f64,
    scales: Vec<f64>,
    penalized_mask: Vec<bool>,
    scale: f64,
    tol: f64,
    kkt_tol: f64,
}

impl CdProblem {
    fn new(x: ArrayView2<f64>, y: ArrayView1<f64>, spec: &DesignSpec) -> Result<Self> {
        let (n, p) = (x.nrows(), x.ncols());
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 rows to fit, got {n}"
            )));
        }
        if y.len() != n {
            return Err(Error::Parameter(format!(
                "response length {} does not match {n} rows",
                y.len()
            )));
        }
        spec.validate(p)?;
        check_finite(x, y)?;

        let mut penalized_mask = vec![false; p];
        for &j in &spec.penalized {
            penalized_mask[j] = true;
        }

        let nf = n as f64;
        let mut scales = vec![1.0; p];
        for &j in &spec.penalized {
            let col = x.column(j);
            let mean = col.sum() / nf;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
            let sd = var.sqrt();
            if sd <= 1e-12 * mean.abs().max(1.0) {
                return Err(Error::Data(format!(
                    "penalized design column {j} is constant"
                )));
            }
            if spec.standardize_penalized {
                scales[j] = sd;
            }
        }

        let mut xs = x.to_owned();
        for (j, &s) in scales.iter().enumerate() {
            if s != 1.0 {
                xs.column_mut(j).mapv_inplace(|v| v / s);
            }
        }
        let gram = xs.t().dot(&xs);
        let xty = xs.t().dot(&y);
        let yty = y.dot(&y);
        let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);

        Ok(CdProblem {
            n,
            p,
            gram,
            xty,
            yty,
            scales,
            penalized_mask,
            scale,
            tol: 1e-7 * scale,
            kkt_tol: 1e-6 * scale,
        })
    }

    /// Max KKT stationarity violation at (b, gb = Gram * b).
    fn kkt_violation(&self, b: &[f64], gb: &[f64], lambda: f64) -> f64 {
        let nf = self.n as f64;
        let mut worst = 0.0_f64;
        for j in 0..self.p {
            let grad = (self.xty[j] - gb[j]) / nf;
            let viol = if !self.penalized_mask[j] {
                grad.abs()
            } else if b[j] != 0.0 {
                (grad - lambda * b[j].signum()).abs()
            } else {
                (grad.abs() - lambda).max(0.0)
            };
            if viol > worst {
                worst = viol;
            }
        }
        worst
    }

    fn objective(&self, b: &[f64], gb: &[f64], lambda: f64) -> f64 {
        let nf = self.n as f64;
        let mut quad = self.yty;
        let mut l1 = 0.0;
        for j in 0..self.p {
            quad += b[j] * (gb[j] - 2.0 * self.xty[j]);
            if self.penalized_mask[j] {
                l1 += b[j].abs();
            }
        }
        quad / (2.0 * nf) + lambda * l1
    }

    /// Coordinate descent at one lambda. Converges when the largest
    /// coefficient move in a sweep drops below 1e-7 * scale and the KKT
    /// stationarity conditions hold; the move threshold tightens if KKT is
    /// not yet met.
    fn solve(
        &self,
        lambda: f64,
        warm: Option<&[f64]>,
        mut objective_trace: Option<&mut Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let nf = self.n as f64;
        let mut b = warm.map_or_else(|| vec![0.0; self.p], <[f64]>::to_vec);
        let mut gb = vec![0.0; self.p];
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                let row = self.gram.row(j);
                let row = row.as_slice().expect("gram is standard layout");
                for (g, &v) in gb.iter_mut().zip(row) {
                    *g += bj * v;
                }
            }
        }

        let mut tol = self.tol;
        let mut sweeps = 0usize;
        loop {
            let mut max_delta = 0.0_f64;
            for j in 0..self.p {
                let gjj = self.gram[[j, j]];
                if gjj <= 0.0 {
                    continue;
                }
                let rho = (self.xty[j] - gb[j] + gjj * b[j]) / nf;
                let new = if self.penalized_mask[j] {
                    soft_threshold(rho, lambda) * nf / gjj
                } else {
                    rho * nf / gjj
                };
                let delta = new - b[j];
                if delta != 0.0 {
                    b[j] = new;
                    let row = self.gram.row(j);
                    let row = row.as_slice().expect("gram is standard layout");
                    for (g, &v) in gb.iter_mut().zip(row) {
                        *g += delta * v;
                    }
                    let ad = delta.abs();
                    if ad > max_delta {
                        max_delta = ad;
                    }
                }
            }
            sweeps += 1;
            if let Some(trace) = objective_trace.as_deref_mut() {
                trace.push(self.objective(&b, &gb, lambda));
            }
            if max_delta < tol {
                let viol = self.kkt_violation(&b, &gb, lambda);
                if viol <= 0.5 * self.kkt_tol {
                    return Ok(b);
                }
                tol *= 0.1;
                if tol < 1e-16 * self.scale {
                    return Err(Error::Convergence(format!(
                        "coordinate descent stalled after {sweeps} sweeps; \
                         KKT violation {viol:.3e} > {:.3e}",
                        0.5 * self.kkt_tol
                    )));
                }
            }
            if sweeps >= MAX_SWEEPS {
                let viol = self.kkt_violation(&b, &gb, lambda);
                return Err(Error::Convergence(format!(
                    "no convergence after {MAX_SWEEPS} sweeps; KKT violation {viol:.3e}"
                )));
            }
        }
    }

    /// Back-transform standardized coefficients to the original column scale.
    fn to_original(&self, b_std: &[f64]) -> Array1<f64> {
        Array1::from_iter(
            b_std
                .iter()
                .zip(&self.scales)
                .map(|(&b, &s)| b / s),
        )
    }
}

/// Least-squares solve via SVD, used for the penalty-free case and for the
/// unpenalized-only fit behind the lambda grid.
fn least_squares(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Array1<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    let a = DMatrix::from_fn(n, p, |i, j| x[[i, j]]);
    let b = DVector::from_fn(n, |i, _| y[i]);
    let svd = a.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let sol = svd
        .solve(&b, cutoff.max(f64::MIN_POSITIVE))
        .expect("svd solve with computed u/v");
    Array1::from_iter(sol.iter().copied())
}

fn finish_fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &DesignSpec,
    coefficients: Array1<f64>,
    lambda: f64,
    cv_table: Vec<CvEntry>,
) -> PenalizedFit {
    let fitted = x.dot(&coefficients);
    let n = y.len() as f64;
    let residual_variance = y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| (yi - fi) * (yi - fi))
        .sum::<f64>()
        / n;
    let active_count = spec
        .penalized
        .iter()
        .filter(|&&j| coefficients[j] != 0.0)
        .count();
    PenalizedFit {
        coefficients,
        lambda,
        active_count,
        residual_variance,
        cv_table,
    }
}

/// Minimize (1/2n) ||y - X b||^2 + lambda * sum over penalized |b_k|.
pub fn fit_lasso(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &DesignSpec,
    lambda: f64,
) -> Result<PenalizedFit> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Parameter(format!(
            "lambda must be a finite non-negative number, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        spec.validate(x.ncols())?;
        check_finite(x, y)?;
        if x.nrows() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 rows to fit, got {}",
                x.nrows()
            )));
        }
        let coefficients = least_squares(x, y);
        return Ok(finish_fit(x, y, spec, coefficients, 0.0, Vec::new()));
    }
    let problem = CdProblem::new(x, y, spec)?;
    let b_std = problem.solve(lambda, None, None)?;
    let coefficients = problem.to_original(&b_std);
    Ok(finish_fit(x, y, spec, coefficients, lambda, Vec::new()))
}

/// Smallest lambda that zeroes every penalized coefficient, computed from the
/// residual of the unpenalized-only least-squares fit.
pub fn lambda_max(x: ArrayView2<f64>, y: ArrayView1<f64>, spec: &DesignSpec) -> Result<f64> {
    spec.validate(x.ncols())?;
    check_finite(x, y)?;
    let n = x.nrows();
    let nf = n as f64;
    let residual = if spec.unpenalized.is_empty() {
        y.to_owned()
    } else {
        let mut xu = Array2::zeros((n, spec.unpenalized.len()));
        for (c, &j) in spec.unpenalized.iter().enumerate() {
            xu.column_mut(c).assign(&x.column(j));
        }
        let bu = least_squares(xu.view(), y);
        &y.to_owned() - &xu.dot(&bu)
    };
    let mut best = 0.0_f64;
    for &j in &spec.penalized {
        let col = x.column(j);
        let scale = if spec.standardize_penalized {
            let mean = col.sum() / nf;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
            var.sqrt()
        } else {
            1.0
        };
        if scale <= 0.0 {
            continue;
        }
        let corr = col.dot(&residual).abs() / (nf * scale);
        if corr > best {
            best = corr;
        }
    }
    Ok(best.max(1e-12))
}

/// Log-spaced descending grid from lambda_max down to
/// lambda_max * min_ratio.
pub fn default_lambda_grid(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &DesignSpec,
    size: usize,
    min_ratio: f64,
) -> Result<Vec<f64>> {
    if size == 0 {
        return Err(Error::Parameter("lambda grid size must be positive".to_string()));
    }
    if !(0.0 < min_ratio && min_ratio <= 1.0) {
        return Err(Error::Parameter(format!(
            "lambda_min_ratio must lie in (0, 1], got {min_ratio}"
        )));
    }
    let top = lambda_max(x, y, spec)?;
    if size == 1 {
        return Ok(vec![top]);
    }
    let log_top = top.ln();
    let log_bot = (top * min_ratio).ln();
    Ok((0..size)
        .map(|i| {
            let t = i as f64 / (size - 1) as f64;
            (log_top + t * (log_bot - log_top)).exp()
        })
        .collect())
}

/// Cross-validated lambda selection over a descending positive grid, then a
/// full-data refit at the winner. Ties (within 1e-8 of the response variance)
/// break toward the larger lambda, i.e. the sparser model.
pub fn cv_lambda(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &DesignSpec,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<PenalizedFit> {
    if lambda_grid.is_empty() {
        return Err(Error::Parameter("lambda grid is empty".to_string()));
    }
    if lambda_grid.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::Parameter(
            "lambda grid must contain positive finite values".to_string(),
        ));
    }
    if lambda_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Parameter(
            "lambda grid must be strictly descending".to_string(),
        ));
    }
    let n = x.nrows();
    let plan = CrossFitPlan::new(n, folds, seed)?;
    if plan.min_fold_size() < 2 {
        return Err(Error::Parameter(format!(
            "every CV fold needs at least 2 observations; n = {n}, folds = {folds}"
        )));
    }

    let mut sse = vec![0.0_f64; lambda_grid.len()];
    for k in 0..folds {
        let (train, test) = plan.split(k);
        let xt = select_rows(x, &train);
        let yt = select_vals(y, &train);
        let problem = CdProblem::new(xt.view(), yt.view(), spec)?;
        let xv = select_rows(x, &test);
        let yv = select_vals(y, &test);
        let mut warm: Option<Vec<f64>> = None;
        for (li, &lambda) in lambda_grid.iter().enumerate() {
            let b_std = problem.solve(lambda, warm.as_deref(), None)?;
            let coef = problem.to_original(&b_std);
            let pred = xv.dot(&coef);
            sse[li] += yv
                .iter()
                .zip(pred.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            warm = Some(b_std);
        }
    }
    let nf = n as f64;
    let cv_errors: Vec<f64> = sse.iter().map(|s| s / nf).collect();

    let y_mean = y.sum() / nf;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / nf;
    let min_err = cv_errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let tie_tol = 1e-8 * y_var;
    let best = cv_errors
        .iter()
        .position(|&e| e <= min_err + tie_tol)
        .expect("at least one grid entry");

    let mut fit = fit_lasso(x, y, spec, lambda_grid[best])?;
    fit.cv_table = lambda_grid
        .iter()
        .zip(cv_errors.iter())
        .map(|(&lambda, &cv_error)| CvEntry { lambda, cv_error })
        .collect();
    Ok(fit)
}

/// Grid construction plus CV selection in one call. With no penalized
/// columns this degenerates to the exact least-squares fit.
pub fn cv_lambda_auto(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &DesignSpec,
    cv: &CvConfig,
) -> Result<PenalizedFit> {
    if spec.penalized.is_empty() {
        return fit_lasso(x, y, spec, 0.0);
    }
    let grid = default_lambda_grid(x, y, spec, cv.grid_size, cv.lambda_min_ratio)?;
    cv_lambda(x, y, spec, &grid, cv.folds, cv.seed)
}

pub(crate) fn select_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), x.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}

pub(crate) fn select_vals(y: ArrayView1<f64>, rows: &[usize]) -> Array1<f64> {
    Array1::from_iter(rows.iter().map(|&i| y[i]))
}

#[cfg(test)]
pub(crate) fn fit_lasso_traced(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &DesignSpec,
    lambda: f64,
) -> Result<(PenalizedFit, Vec<f64>)> {
    let problem = CdProblem::new(x, y, spec)?;
    let mut trace = Vec::new();
    let b_std = problem.solve(lambda, None, Some(&mut trace))?;
    let coefficients = problem.to_original(&b_std);
    Ok((finish_fit(x, y, spec, coefficients, lambda, Vec::new()), trace))
}
