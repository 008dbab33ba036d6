//! End-to-end verification suite. One test per criterion; each prints a
//! single [PASS]/[FAIL] line with the measured numbers before asserting the
//! pinned threshold.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spcausal::basis::{icar_basis, mem_basis, BasisFamily, BasisMatrix};
use spcausal::crossfit::derive_seed;
use spcausal::data::Dataset;
use spcausal::diagnostics::{basis_sweep, morans_i, MoranConfig, SweepConfig};
use spcausal::estimator::{dr_estimate, run_treatment_with_bases, EstimateConfig};
use spcausal::graph::{AdjacencyGraph, PrecisionSpec};
use spcausal::lasso::{fit_lasso, lambda_max, CvConfig, DesignSpec};
use spcausal::synthetic::{generate_with_basis, DgpSpec};

fn report(criterion: &str, pass: bool, detail: &str) {
    let tag = if pass { "[PASS]" } else { "[FAIL]" };
    println!("{tag} {criterion}: {detail}");
}

/// Random connected graph: a random spanning tree plus extra random edges.
fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> AdjacencyGraph {
    let mut pairs = Vec::new();
    for i in 1..n {
        pairs.push((rng.gen_range(0..i), i));
    }
    for _ in 0..n / 2 {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        pairs.push((a, b));
    }
    AdjacencyGraph::from_index_pairs(n, &pairs).unwrap().graph
}

/// Arbitrary random graph; may be disconnected and may have isolated nodes.
fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> AdjacencyGraph {
    let m = rng.gen_range(0..=n);
    let mut pairs = Vec::new();
    for _ in 0..m {
        pairs.push((rng.gen_range(0..n), rng.gen_range(0..n)));
    }
    AdjacencyGraph::from_index_pairs(n, &pairs).unwrap().graph
}

fn dense_sym_eigenvalues(mat: &Array2<f64>) -> Vec<f64> {
    let n = mat.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| mat[[i, j]]);
    nalgebra::SymmetricEigen::new(dm)
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

#[test]
fn criterion_01_mem_moran_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(5..=50);
        let graph = random_connected_graph(&mut rng, n);
        let basis = mem_basis(&graph, n - 1).unwrap();
        let s0 = graph.weight_total();
        for c in 0..basis.k() {
            let v = basis.z.column(c).to_owned();
            let moran = morans_i(v.view(), &graph, &MoranConfig::default()).unwrap();
            let predicted = (n as f64 / s0) * basis.eigenvalues[c];
            worst = worst.max((moran.i - predicted).abs());
        }
    }
    // path-3 hand value
    let path3 = AdjacencyGraph::from_index_pairs(3, &[(0, 1), (1, 2)])
        .unwrap()
        .graph;
    let hand = morans_i(
        ndarray::array![1.0, -2.0, 1.0].view(),
        &path3,
        &MoranConfig::default(),
    )
    .unwrap();
    let hand_err = (hand.i + 1.0).abs();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst < 1e-8 && hand_err < 1e-10 && elapsed < 5.0;
    report(
        "criterion 1 (MEM-Moran identity)",
        pass,
        &format!("max |I - (n/S0) lambda| = {worst:.2e}, path-3 error {hand_err:.2e}, {elapsed:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_icar_null_space() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked_graphs = 0;
    let mut ok = true;
    for g in 0..20 {
        let n = rng.gen_range(4..=40);
        let graph = if g % 3 == 0 {
            random_connected_graph(&mut rng, n)
        } else {
            random_graph(&mut rng, n)
        };
        let components = graph.component_count();
        let q = graph.precision_matrix(PrecisionSpec::default()).to_dense();
        let eigenvalues = dense_sym_eigenvalues(&q);
        let lam_max = eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let zero_count = eigenvalues
            .iter()
            .filter(|v| v.abs() <= 1e-8 * lam_max)
            .count();
        if zero_count != components {
            ok = false;
            report(
                "criterion 2 (ICAR null space)",
                false,
                &format!("graph {g}: {zero_count} zero eigenvalues vs {components} components"),
            );
        }
        let available = n - components;
        if available >= 1 {
            let k = available.min(3);
            let basis = icar_basis(&graph, PrecisionSpec::default(), k).unwrap();
            let threshold = 1e-8 * lam_max;
            if basis.eigenvalues.iter().any(|&v| v <= threshold) {
                ok = false;
            }
            // columns orthogonal to every component indicator
            let labels = graph.connected_components();
            for c in 0..basis.k() {
                for comp in 0..components {
                    let dot: f64 = (0..n)
                        .filter(|&i| labels[i] == comp)
                        .map(|i| basis.z[[i, c]])
                        .sum();
                    if dot.abs() > 1e-7 {
                        ok = false;
                    }
                }
            }
        } else {
            // edgeless graph: every dimension is null, so any K must error
            assert!(icar_basis(&graph, PrecisionSpec::default(), 1).is_err());
        }
        checked_graphs += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = ok && checked_graphs == 20 && elapsed < 5.0;
    report(
        "criterion 2 (ICAR null space)",
        pass,
        &format!("20 random graphs, zero-eigenvalue counts match components, {elapsed:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_lasso_kkt_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut kkt_worst_rel: f64 = 0.0;
    let mut ols_worst: f64 = 0.0;
    for instance in 0..50 {
        let n = rng.gen_range(20..=200);
        let p = rng.gen_range(3..=(n - 5).min(100));
        let mut x = Array2::zeros((n, p));
        for i in 0..n {
            x[[i, 0]] = 1.0;
            for j in 1..p {
                x[[i, j]] = rng.sample(StandardNormal);
            }
        }
        // sparse signal
        let mut y = Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        for _ in 0..3.min(p - 1) {
            let j = rng.gen_range(1..p);
            let b = rng.gen_range(-2.0..2.0);
            for i in 0..n {
                y[i] += b * x[[i, j]];
            }
        }
        // mixed partition: intercept always unpenalized
        let mut unpen = vec![0usize];
        let mut pen = Vec::new();
        for j in 1..p {
            if rng.gen_bool(0.7) {
                pen.push(j);
            } else {
                unpen.push(j);
            }
        }
        if pen.is_empty() {
            pen.push(p - 1);
            unpen.retain(|&j| j != p - 1);
        }
        let mut spec = DesignSpec::new(unpen.clone(), pen.clone());
        spec.standardize_penalized = rng.gen_bool(0.5);

        let lmax = lambda_max(x.view(), y.view(), &spec).unwrap();
        let lambda = lmax * rng.gen_range(0.05..0.9);
        let fit = fit_lasso(x.view(), y.view(), &spec, lambda).unwrap();

        // KKT verification on the problem actually solved
        let resid = &y - &x.dot(&fit.coefficients);
        let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let nf = n as f64;
        for j in 0..p {
            let col = x.column(j);
            let penalized = pen.contains(&j);
            let sd = if penalized && spec.standardize_penalized {
                let mean = col.sum() / nf;
                (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf).sqrt()
            } else {
                1.0
            };
            let grad = col.dot(&resid) / (nf * sd);
            let b_int = fit.coefficients[j] * sd;
            let viol = if !penalized {
                grad.abs()
            } else if b_int != 0.0 {
                (grad - lambda * b_int.signum()).abs()
            } else {
                (grad.abs() - lambda).max(0.0)
            };
            kkt_worst_rel = kkt_worst_rel.max(viol / scale);
        }

        // every fifth instance: penalty-free fit against normal equations
        if instance % 5 == 0 {
            let fit0 = fit_lasso(x.view(), y.view(), &spec, 0.0).unwrap();
            let xtx = x.t().dot(&x);
            let xty = x.t().dot(&y);
            let a = DMatrix::from_fn(p, p, |i, j| xtx[[i, j]]);
            let b = DVector::from_fn(p, |i, _| xty[i]);
            let oracle = a.lu().solve(&b).expect("full-rank instance");
            for j in 0..p {
                ols_worst = ols_worst.max((fit0.coefficients[j] - oracle[j]).abs());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = kkt_worst_rel < 1e-6 && ols_worst < 1e-8 && elapsed < 30.0;
    report(
        "criterion 3 (Lasso KKT suite)",
        pass,
        &format!(
            "50 instances: max KKT violation {kkt_worst_rel:.2e} (tol 1e-6), \
             lambda=0 vs normal equations {ols_worst:.2e} (tol 1e-8), {elapsed:.2}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_dr_exact_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let n = 20;
    let a: Array1<f64> = Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let y: Array1<f64> =
        Array1::from_iter((0..n).map(|i| 1.4 * a[i] + rng.sample::<f64, _>(StandardNormal)));
    let ones = Array1::ones(n);
    let abar = a.sum() / n as f64;
    let mu = Array1::from_elem(n, abar);

    // (i) g == y zeroes the correction exactly
    let est = dr_estimate(a.view(), y.view(), mu.view(), y.view(), ones.view(), 0.37).unwrap();
    let identity_ok = est.correction == 0.0 && est.tau_hat == 0.37;

    // (ii) w = 1, mu = mean(a), g = OLS on [1, a] reproduces the OLS slope
    let saa: f64 = a.iter().map(|v| (v - abar) * (v - abar)).sum();
    let slope: f64 = a
        .iter()
        .zip(y.iter())
        .map(|(ai, yi)| (ai - abar) * yi)
        .sum::<f64>()
        / saa;
    let intercept = y.sum() / n as f64 - slope * abar;
    let g = a.mapv(|v| intercept + slope * v);
    let est2 = dr_estimate(a.view(), y.view(), mu.view(), g.view(), ones.view(), slope).unwrap();
    let ols_ok = (est2.tau_hat - slope).abs() < 1e-8 && est2.correction.abs() < 1e-8;

    // (iii) outcome scaled by a power of two scales (tau, SE) exactly
    let w: Array1<f64> = Array1::from_iter((0..n).map(|_| 0.5 + rng.gen::<f64>()));
    let mu2: Array1<f64> =
        Array1::from_iter((0..n).map(|_| 0.4 * rng.sample::<f64, _>(StandardNormal)));
    let g2: Array1<f64> = y.mapv(|v| 0.85 * v);
    let base = dr_estimate(a.view(), y.view(), mu2.view(), g2.view(), w.view(), 1.1).unwrap();
    let c = 4.0;
    let scaled = dr_estimate(
        a.view(),
        y.mapv(|v| c * v).view(),
        mu2.view(),
        g2.mapv(|v| c * v).view(),
        w.view(),
        c * 1.1,
    )
    .unwrap();
    let scale_ok = scaled.tau_hat == c * base.tau_hat && scaled.se == c * base.se;

    let elapsed = start.elapsed().as_secs_f64();
    let pass = identity_ok && ols_ok && scale_ok && elapsed < 5.0;
    report(
        "criterion 4 (DR exact identities)",
        pass,
        &format!(
            "correction-zero {identity_ok}, OLS slope {ols_ok} (err {:.1e}), \
             exact x4 scaling {scale_ok}, {elapsed:.2}s",
            (est2.tau_hat - slope).abs()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// shared Monte Carlo scaffolding for criteria 5 and 6

fn lattice30() -> &'static (AdjacencyGraph, BasisMatrix) {
    static CELL: OnceLock<(AdjacencyGraph, BasisMatrix)> = OnceLock::new();
    CELL.get_or_init(|| {
        let graph = AdjacencyGraph::rook_lattice(30);
        let basis = icar_basis(&graph, PrecisionSpec::default(), 50).unwrap();
        (graph, basis)
    })
}

fn confounded_spec(seed: u64) -> DgpSpec {
    DgpSpec {
        grid_side: 30,
        tau: 1.0,
        confounder_count: 3,
        spatial_rank: 30,
        confounding_strength: 5.0,
        noise_sd_treatment: 1.0,
        noise_sd_outcome: 1.0,
        seed,
    }
}

fn mc_estimate_config(rep: u64) -> EstimateConfig {
    EstimateConfig {
        folds: 10,
        seed: derive_seed(0xD0, rep),
        cv: CvConfig {
            folds: 5,
            grid_size: 25,
            lambda_min_ratio: 1e-3,
            seed: 0,
        },
        ..Default::default()
    }
}

/// Plain least-squares slope and its homoskedastic standard error for the
/// treatment column of [1, A, X], computed directly from normal equations.
fn naive_ols(ds: &Dataset) -> (f64, f64) {
    let n = ds.n();
    let a = ds.treatment("treatment").unwrap();
    let p = 2 + ds.confounders.len();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = a[i];
        for (c, (_, v)) in ds.confounders.iter().enumerate() {
            x[(i, 2 + c)] = v[i];
        }
    }
    let yv = DVector::from_fn(n, |i, _| ds.outcome[i]);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &yv;
    let inv = xtx.try_inverse().expect("full rank");
    let beta = &inv * xty;
    let resid = yv - &x * &beta;
    let dof = (n - p) as f64;
    let sigma2 = resid.dot(&resid) / dof;
    (beta[1], (sigma2 * inv[(1, 1)]).sqrt())
}

fn mc_scenario(
    gps_with_basis: bool,
    outcome_with_basis: bool,
    reps: u64,
) -> (usize, usize, Vec<f64>) {
    let (graph, basis) = lattice30();
    let mut covered = 0;
    let mut naive_biased = 0;
    let mut errors = Vec::new();
    for rep in 0..reps {
        let spec = confounded_spec(9_000 + rep);
        let (ds, _truth) = generate_with_basis(&spec, graph, basis).unwrap();
        let res = run_treatment_with_bases(
            &ds,
            graph,
            "treatment",
            gps_with_basis.then_some(basis),
            outcome_with_basis.then_some(basis),
            &mc_estimate_config(rep),
        )
        .unwrap();
        if (res.tau_hat - 1.0).abs() < 3.0 * res.se {
            covered += 1;
        }
        errors.push(res.tau_hat - 1.0);
        let (slope, se) = naive_ols(&ds);
        if (slope - 1.0).abs() > 3.0 * se {
            naive_biased += 1;
        }
    }
    (covered, naive_biased, errors)
}

#[test]
fn criterion_05_consistency_under_spatial_confounding() {
    let start = Instant::now();
    let reps = 100;
    let (covered, naive_biased, errors) = mc_scenario(true, true, reps);
    let med = {
        let mut e = errors.clone();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e[e.len() / 2]
    };
    let elapsed = start.elapsed().as_secs_f64();
    let pass = covered >= 90 && naive_biased >= 80 && elapsed < 600.0;
    report(
        "criterion 5 (consistency under spatial confounding)",
        pass,
        &format!(
            "DR covered tau in {covered}/{reps} (need >=90), naive OLS biased beyond 3 SE \
             in {naive_biased}/{reps} (need >=80), median error {med:+.4}, {elapsed:.1}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06a_double_robustness_outcome_withheld() {
    let start = Instant::now();
    let reps = 100;
    let (covered, _, _) = mc_scenario(true, false, reps);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = covered >= 85 && elapsed < 1800.0;
    report(
        "criterion 6a (basis withheld from outcome model)",
        pass,
        &format!("covered tau in {covered}/{reps} (need >=85), {elapsed:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_06b_double_robustness_gps_withheld() {
    let start = Instant::now();
    let reps = 100;
    let (covered, _, _) = mc_scenario(false, true, reps);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = covered >= 85 && elapsed < 1800.0;
    report(
        "criterion 6b (basis withheld from GPS model)",
        pass,
        &format!("covered tau in {covered}/{reps} (need >=85), {elapsed:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_06c_both_withheld_fails() {
    let start = Instant::now();
    let reps = 100;
    let (covered, _, _) = mc_scenario(false, false, reps);
    let miscovered = reps as usize - covered;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = miscovered >= 50 && elapsed < 1800.0;
    report(
        "criterion 6c (basis withheld from both models)",
        pass,
        &format!("missed tau beyond 3 SE in {miscovered}/{reps} (need >=50), {elapsed:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_k_selection_transition() {
    let start = Instant::now();
    let reps = 100;
    let graph = AdjacencyGraph::rook_lattice(20);
    let gen_basis = icar_basis(&graph, PrecisionSpec::default(), 20).unwrap();
    let k_grid = [10usize, 20, 40, 80];
    let mut transition_ok = 0;
    let mut icar_wins = 0;
    for rep in 0..reps {
        let spec = DgpSpec {
            grid_side: 20,
            tau: 1.0,
            confounder_count: 2,
            spatial_rank: 20,
            confounding_strength: 0.0,
            noise_sd_treatment: 1.0,
            noise_sd_outcome: 0.5,
            seed: 40_000 + rep,
        };
        let (ds, _) = generate_with_basis(&spec, &graph, &gen_basis).unwrap();
        let sweep_config = SweepConfig {
            outer_folds: 10,
            cv: CvConfig {
                folds: 5,
                grid_size: 25,
                lambda_min_ratio: 1e-3,
                seed: 0,
            },
            alpha: 0.05,
            seed: derive_seed(0x7, rep),
        };
        let sweeps = basis_sweep(
            &ds,
            "treatment",
            &graph,
            &[BasisFamily::Mem, BasisFamily::Icar],
            &k_grid,
            &sweep_config,
        )
        .unwrap();
        let mem = sweeps.iter().find(|s| s.family == BasisFamily::Mem).unwrap();
        let icar = sweeps.iter().find(|s| s.family == BasisFamily::Icar).unwrap();
        let first_pass = icar.selection.rows.iter().find(|r| r.passed).map(|r| r.k);
        if matches!(first_pass, Some(k) if k <= 20) {
            transition_ok += 1;
        }
        let mem40 = mem.selection.rows.iter().find(|r| r.k == 40).unwrap();
        let icar40 = icar.selection.rows.iter().find(|r| r.k == 40).unwrap();
        if icar40.rmse <= mem40.rmse {
            icar_wins += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = transition_ok >= 80 && icar_wins > reps as usize / 2 && elapsed < 600.0;
    report(
        "criterion 7 (K-selection transition)",
        pass,
        &format!(
            "Moran pass at K <= 20 in {transition_ok}/{reps} (need >=80), ICAR RMSE <= MEM \
             in {icar_wins}/{reps} (need majority), {elapsed:.1}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_moran_calibration() {
    let start = Instant::now();
    let graph = AdjacencyGraph::rook_lattice(10);
    let reps = 500;
    let mut rejections = 0;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(80_000 + rep);
        let values: Array1<f64> =
            Array1::from_iter((0..graph.n()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let result = morans_i(values.view(), &graph, &MoranConfig::default()).unwrap();
        if result.p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (0.02..=0.09).contains(&rate) && elapsed < 60.0;
    report(
        "criterion 8 (Moran test calibration)",
        pass,
        &format!("rejection rate {rate:.3} over {reps} iid draws (need within [0.02, 0.09]), {elapsed:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_determinism_across_thread_counts() {
    let start = Instant::now();
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let tmp = tempfile::tempdir().unwrap();
    let mut docs = Vec::new();
    for (threads, sub) in [("1", "t1"), ("8", "t8")] {
        let out_dir = tmp.path().join(sub);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_spcausal"))
            .args([
                "estimate",
                "--config",
                fixtures.join("config.json").to_str().unwrap(),
                "--data",
                fixtures.join("data.csv").to_str().unwrap(),
                "--edges",
                fixtures.join("edges.csv").to_str().unwrap(),
                "--threads",
                threads,
                "--out-dir",
                out_dir.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success(), "estimate run failed");
        let text = std::fs::read_to_string(out_dir.join("results.json")).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["timestamp"] = serde_json::Value::from(0u64);
        docs.push(serde_json::to_string_pretty(&value).unwrap());
    }
    let identical = docs[0] == docs[1];
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "criterion 9 (determinism across thread counts)",
        identical,
        &format!(
            "results.json byte-identical with --threads 1 vs --threads 8 \
             (timestamp excluded): {identical}, {elapsed:.1}s"
        ),
    );
    assert!(identical);
}

/// Best-effort smoke test against an assembled real county dataset. Not part
/// of the required suite: set SPCAUSAL_SMOKE_CONFIG to a run config pointing
/// at the assembled CSV and edge list, then run with --ignored. Expects the
/// four configured treatments to come out (+ significant, + significant,
/// - significant, not significant) with residual Moran p > 0.05.
#[test]
#[ignore]
fn criterion_10_real_data_smoke() {
    let config_path = match std::env::var("SPCAUSAL_SMOKE_CONFIG") {
        Ok(p) => p,
        Err(_) => {
            println!("[SKIP] criterion 10: SPCAUSAL_SMOKE_CONFIG not set");
            return;
        }
    };
    let mut config = spcausal::config::RunConfig::from_file(std::path::Path::new(&config_path))
        .expect("readable config");
    config.k = 350;
    config.family = spcausal::config::FamilyChoice::Icar;
    let outcome = spcausal::cli::cmd_estimate(&config).expect("pipeline completes");
    assert_eq!(outcome.results.len(), 4, "expected four treatments");
    let signs: Vec<&str> = outcome
        .results
        .iter()
        .map(|r| {
            if r.ci_low > 0.0 {
                "+"
            } else if r.ci_high < 0.0 {
                "-"
            } else {
                "ns"
            }
        })
        .collect();
    let moran_ok = outcome.results.iter().all(|r| r.moran_p > 0.05);
    report(
        "criterion 10 (real-data smoke)",
        signs == ["+", "+", "-", "ns"] && moran_ok,
        &format!("signs {signs:?}, all residual Moran p > 0.05: {moran_ok}"),
    );
    assert_eq!(signs, ["+", "+", "-", "ns"]);
    assert!(moran_ok);
}
