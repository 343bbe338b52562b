mod common;

use common::*;
use proptest::prelude::*;
use scocca::sparse::{
    check_kkt, decompose_batch, lasso_ista, lasso_objective, soft_threshold, LassoSolver,
};
use scocca::{ConceptBank, EmbeddingMatrix, Error, LassoConfig, Matrix, Provenance, SparseCode};

fn tight(lambda: f64) -> LassoConfig {
    LassoConfig {
        lambda,
        max_iter: 1_000_000,
        tol: 1e-13,
        step: None,
    }
}

fn random_bank(d: usize, k: usize, seed: u64) -> ConceptBank {
    let mut r = rng(seed);
    ConceptBank::new(
        gaussian(d, k, &mut r),
        gaussian_vec(d, &mut r),
        Provenance::Scocca,
    )
    .unwrap()
}

fn centered(bank: &ConceptBank, x: &[f64]) -> Vec<f64> {
    x.iter().zip(bank.mu_x()).map(|(a, m)| a - m).collect()
}

fn assert_kkt(bank: &ConceptBank, x: &[f64], code: &SparseCode, lambda: f64) {
    if code.converged {
        let rep = check_kkt(bank, x, code, lambda, 1e-4).unwrap();
        assert!(rep.passed(), "KKT violation {}", rep.max_violation);
    }
}

#[test]
fn soft_threshold_examples() {
    assert_eq!(soft_threshold(&[3.0, -0.5, 2.0], 1.0), vec![2.0, 0.0, 1.0]);
    assert_eq!(soft_threshold(&[3.0, -0.5, 2.0], 0.0), vec![3.0, -0.5, 2.0]);
    assert_eq!(soft_threshold(&[0.3, -0.2], 0.5), vec![0.0, 0.0]);
    assert_eq!(soft_threshold(&[-3.0], 1.0), vec![-2.0]);
}

#[test]
fn orthonormal_dictionary_without_penalty_projects() {
    let q = orthogonal(6, &mut rng(1)).leading_columns(3);
    let bank = ConceptBank::new(q.clone(), vec![0.5; 6], Provenance::Scocca).unwrap();
    let w_true = [1.5, -2.0, 0.25];
    let mut x = q.matvec(&w_true).unwrap();
    x.iter_mut().for_each(|v| *v += 0.5);
    let code = lasso_ista(&bank, &x, &LassoConfig::with_lambda(0.0)).unwrap();
    let expect = q.t_matvec(&centered(&bank, &x)).unwrap();
    assert!(max_abs_diff(&code.w, &expect) < 1e-12);
    assert!(max_abs_diff(&code.w, &w_true) < 1e-12);
    assert!(code.converged && code.iterations <= 3);
    let back = scocca::concepts::recompose(&bank, &code).unwrap();
    assert!(max_abs_diff(&back, &x) < 1e-6);
}

#[test]
fn large_penalty_shuts_every_coefficient_off() {
    let bank = random_bank(8, 5, 2);
    let x = gaussian_vec(8, &mut rng(3));
    let b = bank.c().t_matvec(&centered(&bank, &x)).unwrap();
    let lambda_max = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let code = lasso_ista(&bank, &x, &LassoConfig::with_lambda(lambda_max)).unwrap();
    assert!(code.w.iter().all(|&v| v == 0.0));
    assert_eq!(code.active_count, 0);
    let rep = check_kkt(&bank, &x, &code, lambda_max, 1e-8).unwrap();
    assert!(rep.max_violation <= 1e-8);
    // Just below the threshold one coordinate wakes up.
    let code = lasso_ista(&bank, &x, &LassoConfig::with_lambda(0.99 * lambda_max)).unwrap();
    assert!(code.active_count >= 1);
}

#[test]
fn matches_coordinate_descent_on_small_instance() {
    let bank = random_bank(8, 5, 4);
    let x = gaussian_vec(8, &mut rng(5));
    let code = lasso_ista(&bank, &x, &tight(0.1)).unwrap();
    let oracle = lasso_cd(bank.c(), &centered(&bank, &x), 0.1);
    assert!(
        max_abs_diff(&code.w, &oracle) <= 1e-5,
        "{:?} vs {:?}",
        code.w,
        oracle
    );
    assert_kkt(&bank, &x, &code, 0.1);
}

#[test]
fn truncated_run_is_flagged() {
    let bank = random_bank(8, 5, 6);
    let x = gaussian_vec(8, &mut rng(7));
    let cfg = LassoConfig {
        max_iter: 1,
        ..LassoConfig::with_lambda(0.01)
    };
    let code = lasso_ista(&bank, &x, &cfg).unwrap();
    assert!(!code.converged);
    let rep = check_kkt(&bank, &x, &code, 0.01, 1e-4).unwrap();
    assert!(!rep.passed() && rep.max_violation > 1e-4);
}

#[test]
fn zero_penalty_reconstruction_is_least_squares_projection() {
    let bank = random_bank(10, 4, 8);
    let x = gaussian_vec(10, &mut rng(9));
    let code = lasso_ista(&bank, &x, &tight(0.0)).unwrap();
    let xbar = centered(&bank, &x);
    // Projection onto range(C) through the normal equations solved by an eigen split.
    let c = bank.c();
    let g = c.t_matmul(c).unwrap();
    let ginv = scocca::linalg::sym_eig(&g)
        .unwrap()
        .map_spectrum(|l| 1.0 / l);
    let w_ls = ginv.matvec(&c.t_matvec(&xbar).unwrap()).unwrap();
    let proj = c.matvec(&w_ls).unwrap();
    let rec = c.matvec(&code.w).unwrap();
    assert!(max_abs_diff(&rec, &proj) <= 1e-6);
}

#[test]
fn objective_grows_and_support_shrinks_with_penalty() {
    let bank = random_bank(16, 10, 10);
    let x = gaussian_vec(16, &mut rng(11));
    let grid: Vec<f64> = (0..10).map(|i| 0.02 * 2f64.powi(i)).collect();
    let codes: Vec<SparseCode> = grid
        .iter()
        .map(|&l| lasso_ista(&bank, &x, &tight(l)).unwrap())
        .collect();
    for w in codes.windows(2) {
        assert!(w[1].objective >= w[0].objective - 1e-9);
    }
    for pair in codes.windows(2) {
        assert!(pair[1].active_count <= pair[0].active_count + 1);
    }
    assert!(codes.last().unwrap().active_count < codes[0].active_count);
    for (c, &l) in codes.iter().zip(&grid) {
        assert_kkt(&bank, &x, c, l);
    }
}

#[test]
fn code_diagnostics() {
    let bank = random_bank(12, 6, 12);
    let x = gaussian_vec(12, &mut rng(13));
    let code = lasso_ista(&bank, &x, &LassoConfig::default()).unwrap();
    let xbar = centered(&bank, &x);
    assert!(code.converged);
    assert!(code.objective.is_finite());
    assert!(code.objective <= 0.5 * xbar.iter().map(|v| v * v).sum::<f64>());
    assert!((code.objective - lasso_objective(bank.c(), &xbar, &code.w, 0.1)).abs() < 1e-12);
    assert_eq!(
        code.active_count,
        code.w.iter().filter(|v| v.abs() > 0.0).count()
    );
}

#[test]
fn config_validation() {
    let bank = random_bank(4, 2, 14);
    let x = [0.0; 4];
    for bad in [
        LassoConfig::with_lambda(-1.0),
        LassoConfig {
            tol: 0.0,
            ..Default::default()
        },
        LassoConfig {
            max_iter: 0,
            ..Default::default()
        },
        LassoConfig {
            step: Some(-1.0),
            ..Default::default()
        },
        LassoConfig::with_lambda(f64::NAN),
    ] {
        assert!(matches!(
            lasso_ista(&bank, &x, &bad),
            Err(Error::Parameter(_))
        ));
    }
    assert!(matches!(
        lasso_ista(&bank, &[0.0; 3], &LassoConfig::default()),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn explicit_step_is_used() {
    let bank = random_bank(6, 3, 15);
    let solver = LassoSolver::new(
        &bank,
        LassoConfig {
            step: Some(1e-3),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(solver.step(), 1e-3);
    let auto = LassoSolver::new(&bank, LassoConfig::default()).unwrap();
    let s = scocca::linalg::svd(bank.c()).unwrap().s[0];
    assert!((auto.step() * s * s - 1.0).abs() < 1e-6);
}

#[test]
fn batch_contracts() {
    let bank = random_bank(10, 5, 16);
    let mut r = rng(17);
    let x = gaussian(12, 10, &mut r);
    let mut rows: Vec<Vec<f64>> = (0..12).map(|i| x.row(i).to_vec()).collect();
    rows.push(rows[3].clone());
    let xm = EmbeddingMatrix::from_rows(&rows).unwrap();
    let cfg = LassoConfig::default();
    let batch = decompose_batch(&bank, &xm, &cfg).unwrap();
    let seq: Vec<SparseCode> = rows
        .iter()
        .map(|row| lasso_ista(&bank, row, &cfg).unwrap())
        .collect();
    assert_eq!(batch, seq);
    assert_eq!(batch[3], batch[12]);
    let one = EmbeddingMatrix::from_rows(&rows[..1]).unwrap();
    assert_eq!(decompose_batch(&bank, &one, &cfg).unwrap()[0], seq[0]);
    for (code, row) in batch.iter().zip(&rows) {
        assert_kkt(&bank, row, code, cfg.lambda);
    }
}

#[test]
fn batch_errors_name_the_row() {
    let c = gaussian(3, 2, &mut rng(18));
    let bank = ConceptBank::new(c, vec![0.0; 3], Provenance::Scocca).unwrap();
    let x = EmbeddingMatrix::from_rows(&[[0.0, 0.0, 0.0], [1e200, 1e200, 1e200]]).unwrap();
    let cfg = LassoConfig {
        step: Some(1e10),
        ..Default::default()
    };
    match decompose_batch(&bank, &x, &cfg) {
        Err(Error::Row { row, .. }) => assert_eq!(row, 1),
        other => panic!("expected a row error, got {other:?}"),
    }
    let wrong = EmbeddingMatrix::new(Matrix::zeros(1, 4));
    assert!(matches!(
        decompose_batch(&bank, &wrong, &LassoConfig::default()),
        Err(Error::Dimension(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ista_never_increases_the_objective(
        seed in any::<u64>(),
        d in 2usize..12,
        k in 1usize..10,
        lambda in 0.0f64..2.0,
    ) {
        let bank = random_bank(d, k, seed);
        let x = gaussian_vec(d, &mut rng(seed ^ 0xabc));
        let solver = LassoSolver::new(&bank, LassoConfig { max_iter: 2000, ..LassoConfig::with_lambda(lambda) }).unwrap();
        let (code, hist) = solver.solve_traced(&x).unwrap();
        prop_assert_eq!(hist.len(), code.iterations + 1);
        for w in hist.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn converged_codes_satisfy_kkt(seed in any::<u64>(), lambda in 0.01f64..1.0) {
        let bank = random_bank(12, 6, seed);
        let x = gaussian_vec(12, &mut rng(seed.wrapping_add(1)));
        let code = lasso_ista(&bank, &x, &tight(lambda)).unwrap();
        prop_assert!(code.converged);
        let rep = check_kkt(&bank, &x, &code, lambda, 1e-4).unwrap();
        prop_assert!(rep.passed(), "violation {}", rep.max_violation);
    }

    #[test]
    fn soft_threshold_properties(y in prop::collection::vec(-10.0f64..10.0, 1..8), tau in 0.0f64..5.0) {
        let s = soft_threshold(&y, tau);
        for (a, b) in y.iter().zip(&s) {
            prop_assert!(b.abs() <= a.abs());
            prop_assert!((a.abs() - b.abs() - tau.min(a.abs())).abs() < 1e-12);
            prop_assert!(*b == 0.0 || b.signum() == a.signum());
        }
    }
}
