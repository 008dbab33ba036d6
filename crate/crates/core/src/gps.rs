//! Generalized propensity score for continuous treatments: a normal
//! conditional model with a selectively penalized mean, the marginal
//! treatment density, and the stabilized inverse-probability weights their
//! ratio defines.

use ndarray::{Array1, Array2, ArrayView1};

use crate::basis::BasisMatrix;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lasso::{cv_lambda_auto, CvConfig, DesignSpec, PenalizedFit};

/// Marginal treatment density f(A), estimated from the empirical
/// distribution of the treatment. A raw empirical mass function has no
/// density for a continuous treatment, so the default is a normal fitted by
/// moments, with a Gaussian KDE (Silverman bandwidth) behind a switch.
#[derive(Debug, Clone)]
pub enum MarginalDensity {
    Normal { mean: f64, var: f64 },
    Kde { sample: Array1<f64>, bandwidth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalMode {
    Normal,
    Kde,
}

impl MarginalDensity {
    pub fn density(&self, a: f64) -> f64 {
        match self {
            MarginalDensity::Normal { mean, var } => normal_density(a, *mean, *var),
            MarginalDensity::Kde { sample, bandwidth } => {
                let h = *bandwidth;
                let n = sample.len() as f64;
                sample
                    .iter()
                    .map(|&ai| normal_density((a - ai) / h, 0.0, 1.0))
                    .sum::<f64>()
                    / (n * h)
            }
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            MarginalDensity::Normal { .. } => "normal",
            MarginalDensity::Kde { .. } => "kde",
        }
    }
}

/// phi(a; mean, var).
pub fn normal_density(a: f64, mean: f64, var: f64) -> f64 {
    let d = a - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn silverman_bandwidth(a: ArrayView1<f64>) -> f64 {
    let n = a.len() as f64;
    let mean = a.sum() / n;
    let sd = (a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let mut sorted: Vec<f64> = a.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let q = |p: f64| -> f64 {
        let idx = p * (sorted.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        let t = idx - lo as f64;
        sorted[lo] * (1.0 - t) + sorted[hi] * t
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Fitted GPS for one treatment: the conditional mean model, its residual
/// variance, and the marginal density of the raw treatment.
#[derive(Debug, Clone)]
pub struct GpsModel {
    pub treatment_name: String,
    pub mean_fit: PenalizedFit,
    pub sigma2: f64,
    pub marginal_mean: f64,
    pub marginal_var: f64,
    pub marginal: MarginalDensity,
}

/// Positive per-unit stabilized weights, with the clamp actually applied when
/// truncation was requested.
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub w: Array1<f64>,
    pub truncation: Option<WeightTruncation>,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WeightTruncation {
    pub lower_pct: f64,
    pub upper_pct: f64,
    pub lower_value: f64,
    pub upper_value: f64,
}

impl WeightVector {
    pub fn summary(&self) -> (f64, f64, f64) {
        let min = self.w.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = self.w.sum() / self.w.len() as f64;
        (min, mean, max)
    }
}

/// Design matrix for the GPS mean model: [intercept | confounders | basis],
/// with intercept and confounders unpenalized and basis columns penalized.
pub(crate) fn gps_design(
    dataset: &Dataset,
    rows: Option<&[usize]>,
    basis: Option<&BasisMatrix>,
) -> (Array2<f64>, DesignSpec) {
    let all_rows: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all_rows = (0..dataset.n()).collect();
            &all_rows
        }
    };
    let q = dataset.confounders.len();
    let k = basis.map_or(0, BasisMatrix::k);
    let mut x = Array2::zeros((rows.len(), 1 + q + k));
    for (r, &i) in rows.iter().enumerate() {
        x[[r, 0]] = 1.0;
        for (c, (_, v)) in dataset.confounders.iter().enumerate() {
            x[[r, 1 + c]] = v[i];
        }
        if let Some(b) = basis {
            for c in 0..k {
                x[[r, 1 + q + c]] = b.z[[i, c]];
            }
        }
    }
    let spec = DesignSpec::new((0..=q).collect(), (1 + q..1 + q + k).collect());
    (x, spec)
}

/// Fit the GPS: treatment regressed on confounders (unpenalized) and basis
/// columns (penalized, CV-selected lambda); residual variance by mean square;
/// marginal moments from the raw treatment vector.
pub fn fit_gps(
    dataset: &Dataset,
    treatment_name: &str,
    basis: Option<&BasisMatrix>,
    cv: &CvConfig,
    marginal_mode: MarginalMode,
) -> Result<GpsModel> {
    let a = dataset.treatment(treatment_name)?;
    let n = dataset.n() as f64;
    if let Some(b) = basis {
        if b.n() != dataset.n() {
            return Err(Error::Parameter(format!(
                "basis has {} rows but dataset has {}",
                b.n(),
                dataset.n()
            )));
        }
    }
    let marginal_mean = a.sum() / n;
    let marginal_var = a
        .iter()
        .map(|v| (v - marginal_mean) * (v - marginal_mean))
        .sum::<f64>()
        / n;
    let var_floor = 1e-12 * marginal_mean.abs().max(1.0);
    if marginal_var <= var_floor * var_floor {
        return Err(Error::Degenerate(format!(
            "treatment '{treatment_name}' has zero variance"
        )));
    }
    let (x, spec) = gps_design(dataset, None, basis);
    let mean_fit = cv_lambda_auto(x.view(), a.view(), &spec, cv)?;
    let sigma2 = mean_fit.residual_variance;
    let marginal = match marginal_mode {
        MarginalMode::Normal => MarginalDensity::Normal {
            mean: marginal_mean,
            var: marginal_var,
        },
        MarginalMode::Kde => MarginalDensity::Kde {
            sample: a.clone(),
            bandwidth: silverman_bandwidth(a.view()),
        },
    };
    Ok(GpsModel {
        treatment_name: treatment_name.to_string(),
        mean_fit,
        sigma2,
        marginal_mean,
        marginal_var,
        marginal,
    })
}

impl GpsModel {
    /// In-sample conditional-mean predictions.
    pub fn predict_mean(&self, dataset: &Dataset, basis: Option<&BasisMatrix>) -> Array1<f64> {
        let (x, _) = gps_design(dataset, None, basis);
        self.mean_fit.predict(x.view())
    }
}

/// Conditional normal GPS density phi(a; mu, sigma2) from the fitted model.
pub fn gps_density(model: &GpsModel, a: f64, mu: f64) -> f64 {
    normal_density(a, mu, model.sigma2)
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let idx = (pct / 100.0) * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let t = idx - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

/// Stabilized weights w_j = f(a_j) / phi(a_j; mu_j, sigma2), with optional
/// symmetric percentile clamping. Weights are never renormalized: the
/// stabilization is the density ratio itself.
pub fn stabilized_weights(
    sigma2: f64,
    marginal: &MarginalDensity,
    a: ArrayView1<f64>,
    mu_hat: ArrayView1<f64>,
    truncation: Option<(f64, f64)>,
) -> Result<WeightVector> {
    if sigma2 <= 0.0 {
        return Err(Error::Degenerate(format!(
            "conditional variance must be positive, got {sigma2}"
        )));
    }
    if a.len() != mu_hat.len() {
        return Err(Error::Parameter(
            "treatment and conditional-mean vectors differ in length".to_string(),
        ));
    }
    let mut w = Array1::zeros(a.len());
    for j in 0..a.len() {
        let denom = normal_density(a[j], mu_hat[j], sigma2);
        if denom < 1e-300 {
            return Err(Error::ExtremeWeights(format!(
                "conditional density underflow at unit {j} \
                 (treatment {:.4} vs fitted mean {:.4}); consider weight truncation",
                a[j], mu_hat[j]
            )));
        }
        w[j] = marginal.density(a[j]) / denom;
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::ExtremeWeights(
            "non-finite stabilized weight; consider weight truncation".to_string(),
        ));
    }
    let truncation = match truncation {
        None => None,
        Some((lo_pct, hi_pct)) => {
            if !(0.0..100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct
            {
                return Err(Error::Parameter(format!(
                    "truncation percentiles must satisfy 0 <= lo < hi <= 100, got ({lo_pct}, {hi_pct})"
                )));
            }
            let mut sorted: Vec<f64> = w.to_vec();
            sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let lower_value = percentile(&sorted, lo_pct);
            let upper_value = percentile(&sorted, hi_pct);
            w.mapv_inplace(|v| v.clamp(lower_value, upper_value));
            Some(WeightTruncation {
                lower_pct: lo_pct,
                upper_pct: hi_pct,
                lower_value,
                upper_value,
            })
        }
    };
    if w.iter().any(|&v| v <= 0.0) {
        return Err(Error::ExtremeWeights(
            "marginal density underflow produced a zero weight; consider weight truncation"
                .to_string(),
        ));
    }
    Ok(WeightVector { w, truncation })
}

/// Pearson correlation.
pub fn correlation(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y.iter()) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

/// Weighted Pearson correlation with weight-sum normalization.
pub fn weighted_correlation(
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
) -> f64 {
    let sw = w.sum();
    let mx = x
        .iter()
        .zip(w.iter())
        .map(|(xi, wi)| xi * wi)
        .sum::<f64>()
        / sw;
    let my = y
        .iter()
        .zip(w.iter())
        .map(|(yi, wi)| yi * wi)
        .sum::<f64>()
        / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for ((xi, yi), wi) in x.iter().zip(y.iter()).zip(w.iter()) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += wi * dx * dy;
        sxx += wi * dx * dx;
        syy += wi * dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BalanceRow {
    pub name: String,
    pub rho_unweighted: f64,
    pub rho_weighted: f64,
}

/// Love-plot data: unweighted and weighted treatment correlations for every
/// confounder, plus any active basis columns handed in.
pub fn balance_table(
    dataset: &Dataset,
    treatment_name: &str,
    weights: &WeightVector,
    basis_columns: Option<(&BasisMatrix, &[usize])>,
) -> Result<Vec<BalanceRow>> {
    let a = dataset.treatment(treatment_name)?;
    if weights.w.len() != a.len() {
        return Err(Error::Parameter("weight vector length mismatch".to_string()));
    }
    let mut rows = Vec::new();
    for (name, v) in &dataset.confounders {
        rows.push(BalanceRow {
            name: name.clone(),
            rho_unweighted: correlation(v.view(), a.view()),
            rho_weighted: weighted_correlation(v.view(), a.view(), weights.w.view()),
        });
    }
    if let Some((basis, active)) = basis_columns {
        for &c in active {
            let col = basis.z.column(c).to_owned();
            rows.push(BalanceRow {
                name: format!("basis_{:03}", c + 1),
                rho_unweighted: correlation(col.view(), a.view()),
                rho_weighted: weighted_correlation(col.view(), a.view(), weights.w.view()),
            });
        }
    }
    Ok(rows)
}

/// Balance table CSV: `confounder,rho_unweighted,rho_weighted`.
pub fn write_balance_csv(path: &std::path::Path, rows: &[BalanceRow]) -> Result<()> {
    let mut out = String::from("confounder,rho_unweighted,rho_weighted\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.name, r.rho_unweighted, r.rho_weighted));
    }
    crate::cli::write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn toy_dataset(n: usize, seed: u64, beta: f64, noise: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x1: Array1<f64> =
            Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let a: Array1<f64> = Array1::from_iter(
            (0..n).map(|i| beta * x1[i] + noise * rng.sample::<f64, _>(StandardNormal)),
        );
        Dataset {
            unit_ids: (0..n).map(|i| format!("u{i:04}")).collect(),
            outcome: Array1::zeros(n),
            treatments: vec![("a".to_string(), a)],
            confounders: vec![("x1".to_string(), x1)],
        }
    }

    #[test]
    fn density_values() {
        assert_abs_diff_eq!(
            normal_density(0.0, 0.0, 1.0),
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            normal_density(1.0, 0.0, 1.0),
            normal_density(0.0, 0.0, 1.0) * (-0.5f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            normal_density(0.0, 0.0, 4.0),
            1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gps_density_uses_model_variance() {
        let ds = toy_dataset(50, 1, 1.0, 0.5);
        let model = fit_gps(&ds, "a", None, &CvConfig::default(), MarginalMode::Normal).unwrap();
        let d = gps_density(&model, 1.0, 1.0);
        assert_abs_diff_eq!(d, normal_density(1.0, 1.0, model.sigma2), epsilon = 1e-15);
    }

    #[test]
    fn perfect_linear_treatment_gives_tiny_sigma2() {
        let ds = toy_dataset(40, 2, 2.0, 0.0);
        let model = fit_gps(&ds, "a", None, &CvConfig::default(), MarginalMode::Normal).unwrap();
        assert!(model.sigma2 < 1e-12, "sigma2 = {}", model.sigma2);
    }

    #[test]
    fn independent_treatment_leaves_basis_inactive() {
        // treatment unrelated to confounders and basis: the penalized mean
        // model keeps almost nothing active and sigma2 tracks the marginal
        // variance
        use crate::graph::{AdjacencyGraph, PrecisionSpec};
        let graph = AdjacencyGraph::rook_lattice(22);
        let n = graph.n();
        let basis = crate::basis::icar_basis(&graph, PrecisionSpec::default(), 10).unwrap();
        let reps = 15;
        let mut actives = Vec::new();
        let mut ratios = Vec::new();
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(8_800 + seed);
            let x1: Array1<f64> =
                Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let a: Array1<f64> =
                Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let ds = Dataset {
                unit_ids: (0..n).map(|i| format!("u{i:04}")).collect(),
                outcome: Array1::zeros(n),
                treatments: vec![("a".to_string(), a)],
                confounders: vec![("x1".to_string(), x1)],
            };
            let cv = CvConfig {
                folds: 5,
                grid_size: 30,
                lambda_min_ratio: 1e-3,
                seed,
            };
            let model = fit_gps(&ds, "a", Some(&basis), &cv, MarginalMode::Normal).unwrap();
            actives.push(model.mean_fit.active_count);
            ratios.push(model.sigma2 / model.marginal_var);
        }
        actives.sort_unstable();
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med_active = actives[actives.len() / 2];
        let med_ratio = ratios[ratios.len() / 2];
        assert!(med_active <= 2, "median active basis count {med_active} ({actives:?})");
        assert!(
            (med_ratio - 1.0).abs() < 0.10,
            "median sigma2/marginal_var = {med_ratio}"
        );
    }

    #[test]
    fn zero_variance_treatment_rejected() {
        let mut ds = toy_dataset(20, 3, 1.0, 0.5);
        ds.treatments[0].1.fill(3.3);
        let err = fit_gps(&ds, "a", None, &CvConfig::default(), MarginalMode::Normal).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn gps_matches_ols_oracle_without_basis() {
        // n = 10 toy with hand-set coefficients; no penalized columns means
        // the mean model is exactly least squares
        let ds = toy_dataset(10, 4, 1.5, 0.1);
        let model = fit_gps(&ds, "a", None, &CvConfig::default(), MarginalMode::Normal).unwrap();
        let a = ds.treatment("a").unwrap();
        let x1 = &ds.confounders[0].1;
        // normal-equations oracle for [1, x1]
        let n = 10.0;
        let sx = x1.sum();
        let sxx = x1.dot(x1);
        let sy = a.sum();
        let sxy = x1.dot(a);
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sy - slope * sx) / n;
        assert_abs_diff_eq!(model.mean_fit.coefficients[0], intercept, epsilon = 1e-8);
        assert_abs_diff_eq!(model.mean_fit.coefficients[1], slope, epsilon = 1e-8);
    }

    #[test]
    fn weights_identity_when_conditional_equals_marginal() {
        let ds = toy_dataset(30, 5, 1.0, 0.5);
        let a = ds.treatment("a").unwrap();
        let n = a.len() as f64;
        let mean = a.sum() / n;
        let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let marginal = MarginalDensity::Normal { mean, var };
        let mu = Array1::from_elem(a.len(), mean);
        let wv = stabilized_weights(var, &marginal, a.view(), mu.view(), None).unwrap();
        for &w in wv.w.iter() {
            assert_eq!(w, 1.0);
        }
    }

    #[test]
    fn tail_unit_gets_large_weight() {
        // single unit far in the conditional tail but near the marginal mode
        let marginal = MarginalDensity::Normal { mean: 0.0, var: 1.0 };
        let a = ndarray::array![0.0];
        let mu = ndarray::array![3.0];
        let wv = stabilized_weights(0.25, &marginal, a.view(), mu.view(), None).unwrap();
        assert!(wv.w[0] > 1.0);
    }

    #[test]
    fn truncation_clamps_to_percentile_values() {
        let marginal = MarginalDensity::Normal { mean: 0.0, var: 4.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 200;
        let a: Array1<f64> =
            Array1::from_iter((0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)));
        let mu: Array1<f64> =
            Array1::from_iter((0..n).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)));
        let wv = stabilized_weights(0.5, &marginal, a.view(), mu.view(), Some((5.0, 95.0))).unwrap();
        let t = wv.truncation.unwrap();
        let (min, _, max) = wv.summary();
        assert_abs_diff_eq!(min, t.lower_value, epsilon = 1e-12);
        assert_abs_diff_eq!(max, t.upper_value, epsilon = 1e-12);
        assert!(t.lower_value < t.upper_value);
    }

    #[test]
    fn underflow_reports_extreme_weights() {
        let marginal = MarginalDensity::Normal { mean: 0.0, var: 1.0 };
        let a = ndarray::array![60.0];
        let mu = ndarray::array![0.0];
        let err = stabilized_weights(1.0, &marginal, a.view(), mu.view(), None).unwrap_err();
        assert!(matches!(err, Error::ExtremeWeights(_)));
    }

    #[test]
    fn kde_density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Array1<f64> =
            Array1::from_iter((0..120).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let kde = MarginalDensity::Kde {
            bandwidth: silverman_bandwidth(a.view()),
            sample: a,
        };
        // trapezoid over a wide range
        let (lo, hi, steps) = (-8.0, 8.0, 3200);
        let dx = (hi - lo) / steps as f64;
        let integral: f64 = (0..=steps)
            .map(|i| {
                let x = lo + i as f64 * dx;
                let f = kde.density(x);
                if i == 0 || i == steps {
                    0.5 * f
                } else {
                    f
                }
            })
            .sum::<f64>()
            * dx;
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn balance_with_unit_weights_matches_unweighted() {
        let ds = toy_dataset(60, 12, 1.0, 0.7);
        let w = WeightVector {
            w: Array1::ones(60),
            truncation: None,
        };
        let rows = balance_table(&ds, "a", &w, None).unwrap();
        for row in rows {
            assert_eq!(row.rho_unweighted, row.rho_weighted);
        }
    }

    #[test]
    fn weighted_correlation_hand_example() {
        // 4-point dataset, computed by hand with weighted means/covariance
        let x = ndarray::array![1.0, 2.0, 3.0, 4.0];
        let y = ndarray::array![2.0, 1.0, 4.0, 3.0];
        let w = ndarray::array![1.0, 2.0, 1.0, 2.0];
        // weighted means: mx = (1+4+3+8)/6 = 8/3, my = (2+2+4+6)/6 = 7/3
        // weighted cov terms computed directly
        let mx = 8.0 / 3.0;
        let my = 7.0 / 3.0;
        let mut sxy = 0.0_f64;
        let mut sxx = 0.0_f64;
        let mut syy = 0.0_f64;
        for i in 0..4 {
            sxy += w[i] * (x[i] - mx) * (y[i] - my);
            sxx += w[i] * (x[i] - mx) * (x[i] - mx);
            syy += w[i] * (y[i] - my) * (y[i] - my);
        }
        let expected = sxy / (sxx * syy).sqrt();
        assert_abs_diff_eq!(
            weighted_correlation(x.view(), y.view(), w.view()),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn correctly_specified_weights_center_near_one_and_improve_balance() {
        // 50 replications of a 500-unit correctly specified GPS: the mean
        // stabilized weight stays within 0.25 of 1, and weighting shrinks the
        // treatment-confounder correlations in the median replication
        let n = 500;
        let reps = 50;
        let mut mean_ok = 0;
        let mut shrink_count = 0;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
            let x1: Array1<f64> =
                Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x2: Array1<f64> =
                Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let a: Array1<f64> = Array1::from_iter((0..n).map(|i| {
                0.8 * x1[i] - 0.5 * x2[i] + rng.sample::<f64, _>(StandardNormal)
            }));
            let ds = Dataset {
                unit_ids: (0..n).map(|i| format!("u{i:04}")).collect(),
                outcome: Array1::zeros(n),
                treatments: vec![("a".to_string(), a.clone())],
                confounders: vec![("x1".to_string(), x1), ("x2".to_string(), x2)],
            };
            let model =
                fit_gps(&ds, "a", None, &CvConfig::default(), MarginalMode::Normal).unwrap();
            let mu = model.predict_mean(&ds, None);
            let wv = stabilized_weights(model.sigma2, &model.marginal, a.view(), mu.view(), None)
                .unwrap();
            let mean_w = wv.w.sum() / n as f64;
            if (mean_w - 1.0).abs() < 0.25 {
                mean_ok += 1;
            }
            let rows = balance_table(&ds, "a", &wv, None).unwrap();
            let shrank = rows
                .iter()
                .filter(|r| r.rho_weighted.abs() < r.rho_unweighted.abs())
                .count();
            if shrank == rows.len() {
                shrink_count += 1;
            }
        }
        assert!(mean_ok >= 45, "mean weight near 1 in only {mean_ok}/{reps} reps");
        assert!(
            shrink_count > reps / 2,
            "weighting improved balance in only {shrink_count}/{reps} reps"
        );
    }

    #[test]
    fn uncorrelated_confounder_stays_small() {
        // simulation: confounder independent of treatment keeps |rho| < 3/sqrt(n)
        let mut ok = 0;
        let reps = 50;
        let n = 400;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let x: Array1<f64> =
                Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let a: Array1<f64> =
                Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            if correlation(x.view(), a.view()).abs() < 3.0 / (n as f64).sqrt() {
                ok += 1;
            }
        }
        assert!(ok >= 47, "only {ok}/{reps} within bound");
    }
}
