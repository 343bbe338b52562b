mod common;

use common::*;
use proptest::prelude::*;
use scocca::cca::{concept_bank, fit_cca, infonce_terms, whiten, Side};
use scocca::linalg::{cross_covariance, sym_eig};
use scocca::{ConceptBank, EmbeddingMatrix, Error, Matrix, Provenance};

fn shifted(m: &Matrix, by: f64) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        m.get(i, j) + by * (j as f64 + 1.0)
    })
}

#[test]
fn identical_views_correlate_perfectly() {
    let x = shifted(&gaussian(200, 6, &mut rng(1)), 3.0);
    let model = fit_cca(&emb(x.clone()), &emb(x), 6, Some(1e-8)).unwrap();
    assert!(model.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-5));
}

#[test]
fn rotated_views_correlate_perfectly() {
    let mut r = rng(2);
    let x = gaussian(300, 8, &mut r);
    let y = x.matmul(&orthogonal(8, &mut r)).unwrap();
    let (x, y) = (emb(x), emb(y));
    let model = fit_cca(&x, &y, 5, None).unwrap();
    assert!(model
        .singular_values
        .iter()
        .all(|s| (s - 1.0).abs() <= 1e-5));
    let (rx, ry) = model.constraint_residuals();
    assert!(rx <= 1e-6 && ry <= 1e-6);
    let t = model.trace_objective(&x, &y).unwrap();
    assert!((t - model.objective()).abs() <= 1e-6 * model.objective());
}

#[test]
fn independent_views_correlate_weakly() {
    let mut r = rng(3);
    let (n, d) = (4000, 5);
    let x = emb(gaussian(n, d, &mut r));
    let y = emb(gaussian(n, d, &mut r));
    let model = fit_cca(&x, &y, d, None).unwrap();
    let bound = 3.0 * (d as f64 / n as f64).sqrt();
    assert!(
        model.singular_values.iter().all(|&s| s <= bound),
        "{:?}",
        model.singular_values
    );
}

#[test]
fn fit_errors() {
    let mut r = rng(4);
    let x = emb(gaussian(20, 4, &mut r));
    let y = emb(gaussian(20, 3, &mut r));
    assert!(matches!(fit_cca(&x, &y, 0, None), Err(Error::Parameter(_))));
    assert!(matches!(fit_cca(&x, &y, 4, None), Err(Error::Parameter(_))));
    assert!(matches!(
        fit_cca(&x, &y, 2, Some(-1.0)),
        Err(Error::Parameter(_))
    ));
    let short = emb(gaussian(19, 3, &mut r));
    assert!(matches!(
        fit_cca(&x, &short, 2, None),
        Err(Error::Dimension(_))
    ));
    // Rank-1 image view with no ridge cannot be whitened.
    let col = gaussian(20, 1, &mut r);
    let degenerate = emb(Matrix::from_fn(20, 4, |i, _| col.get(i, 0)));
    assert!(matches!(
        fit_cca(&degenerate, &y, 2, Some(0.0)),
        Err(Error::Conditioning(_))
    ));
}

#[test]
fn singular_values_sorted_and_objective_monotone_in_k() {
    let mut r = rng(5);
    let z = gaussian(500, 3, &mut r);
    let x = emb(z
        .matmul(&gaussian(3, 7, &mut r))
        .unwrap()
        .add(&gaussian(500, 7, &mut r).scale(0.5))
        .unwrap());
    let y = emb(z
        .matmul(&gaussian(3, 6, &mut r))
        .unwrap()
        .add(&gaussian(500, 6, &mut r).scale(0.5))
        .unwrap());
    let mut prev = 0.0;
    for k in 1..=6 {
        let m = fit_cca(&x, &y, k, None).unwrap();
        assert!(m.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(m.objective() >= prev);
        prev = m.objective();
    }
}

#[test]
fn correlations_invariant_under_reparameterization() {
    let mut r = rng(6);
    let z = gaussian(800, 4, &mut r);
    let x = z
        .matmul(&gaussian(4, 5, &mut r))
        .unwrap()
        .add(&gaussian(800, 5, &mut r))
        .unwrap();
    let y = z
        .matmul(&gaussian(4, 5, &mut r))
        .unwrap()
        .add(&gaussian(800, 5, &mut r))
        .unwrap();
    let g = orthogonal(5, &mut r)
        .matmul(&Matrix::from_diag(&[1.0, 2.0, 0.5, 1.5, 3.0]))
        .unwrap();
    let a = fit_cca(&emb(x.clone()), &emb(y.clone()), 4, Some(0.0)).unwrap();
    let b = fit_cca(&emb(x.matmul(&g).unwrap()), &emb(y), 4, Some(0.0)).unwrap();
    assert!(max_abs_diff(&a.singular_values, &b.singular_values) <= 1e-4);
}

#[test]
fn concept_bank_identities() {
    let mut r = rng(7);
    let x = gaussian(400, 6, &mut r);
    let y = x
        .matmul(&gaussian(6, 5, &mut r))
        .unwrap()
        .add(&gaussian(400, 5, &mut r))
        .unwrap();
    let model = fit_cca(&emb(x), &emb(y), 4, None).unwrap();
    let bank = concept_bank(&model).unwrap();
    assert_eq!(bank.provenance(), Provenance::Scocca);
    assert!(bank.labels().is_none());
    assert_eq!(bank.mu_x(), model.mu_x.as_slice());
    assert_eq!(bank.ridge(), Some(model.ridge_x));
    assert_eq!(
        bank.singular_values().unwrap(),
        model.singular_values.as_slice()
    );
    // Cᵀ Σ_X⁻¹ C = UᵀΣ_X U = I.
    let e = sym_eig(&model.sigma_x).unwrap();
    let inv = e.map_spectrum(|l| 1.0 / l);
    let g = bank.c().t_matmul(&inv.matmul(bank.c()).unwrap()).unwrap();
    assert!(g.max_abs_diff(&Matrix::identity(4)) <= 1e-5);
    // Column j is Σ_X u_j.
    let direct = naive_matmul(&model.sigma_x, &model.u);
    assert!(direct.max_abs_diff(bank.c()) < 1e-10);
}

#[test]
fn white_images_give_bank_equal_to_u() {
    // Rows ±√d·e_i have covariance exactly I.
    let d = 4;
    let mut rows = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = s * (d as f64).sqrt();
            rows.push(v);
        }
    }
    let x = EmbeddingMatrix::from_rows(&rows).unwrap();
    let mut r = rng(8);
    let y = emb(x.matrix().matmul(&gaussian(d, d, &mut r)).unwrap());
    let model = fit_cca(&x, &y, 3, Some(0.0)).unwrap();
    assert!(model.sigma_x.max_abs_diff(&Matrix::identity(d)) < 1e-14);
    let bank = concept_bank(&model).unwrap();
    assert!(bank.c().max_abs_diff(&model.u) < 1e-14);
}

#[test]
fn whitening_gives_identity_covariance() {
    let mut r = rng(9);
    let x = shifted(
        &gaussian(300, 5, &mut r)
            .matmul(&gaussian(5, 5, &mut r))
            .unwrap(),
        2.0,
    );
    let y = x
        .matmul(&gaussian(5, 5, &mut r))
        .unwrap()
        .add(&gaussian(300, 5, &mut r))
        .unwrap();
    let (x, y) = (emb(x), emb(y));
    let model = fit_cca(&x, &y, 5, Some(0.0)).unwrap();
    for (side, data) in [(Side::X, &x), (Side::Y, &y)] {
        let w = whiten(data, &model, side).unwrap();
        let cov = w.matrix().t_matmul(w.matrix()).unwrap().scale(1.0 / 300.0);
        assert!(cov.max_abs_diff(&Matrix::identity(5)) <= 1e-5);
        assert!(w.mean().iter().all(|m| m.abs() < 1e-10));
    }
    let one = EmbeddingMatrix::from_rows(&[x.row(0)]).unwrap();
    let w1 = whiten(&one, &model, Side::X).unwrap();
    let centered: Vec<f64> = x
        .row(0)
        .iter()
        .zip(&model.mu_x)
        .map(|(a, m)| a - m)
        .collect();
    let expect = model.u.t_matvec(&centered).unwrap();
    assert!(max_abs_diff(w1.row(0), &expect) < 1e-12);
}

#[test]
fn whitening_needs_full_rank_model_and_matching_dims() {
    let mut r = rng(10);
    let x = emb(gaussian(50, 4, &mut r));
    let y = emb(gaussian(50, 4, &mut r));
    let model = fit_cca(&x, &y, 2, None).unwrap();
    assert!(matches!(
        whiten(&x, &model, Side::X),
        Err(Error::Parameter(_))
    ));
    let full = fit_cca(&x, &y, 4, None).unwrap();
    assert!(matches!(
        whiten(&emb(gaussian(3, 5, &mut r)), &full, Side::X),
        Err(Error::Dimension(_))
    ));
}

/// Direct double loop over the definitions.
fn infonce_oracle(x: &Matrix, y: &Matrix, tau: f64) -> (f64, f64) {
    let n = x.rows();
    let dot = |i: usize, j: usize| {
        (0..x.cols())
            .map(|t| x.get(i, t) * y.get(j, t))
            .sum::<f64>()
    };
    let pre = 1.0 / (n as f64 * tau);
    let align = -pre * (0..n).map(|i| dot(i, i)).sum::<f64>();
    let unif = pre
        * (0..n)
            .map(|i| (0..n).map(|j| dot(i, j).exp()).sum::<f64>().ln())
            .sum::<f64>();
    (align, unif)
}

#[test]
fn infonce_identity_rows() {
    let n = 6;
    let x = Matrix::identity(n);
    let t = infonce_terms(&emb(x.clone()), &emb(x.clone()), 1.0).unwrap();
    assert!((t.alignment + 1.0).abs() < 1e-15);
    let (a, u) = infonce_oracle(&x, &x, 1.0);
    assert!((t.alignment - a).abs() < 1e-12 && (t.uniformity - u).abs() < 1e-12);
    assert!((t.total() - (t.alignment + t.uniformity)).abs() <= 1e-10);
}

#[test]
fn infonce_matches_oracle_and_scales_with_temperature() {
    let mut r = rng(11);
    let x = gaussian(9, 4, &mut r);
    let y = gaussian(9, 4, &mut r);
    let t1 = infonce_terms(&emb(x.clone()), &emb(y.clone()), 1.0).unwrap();
    let (a, u) = infonce_oracle(&x, &y, 1.0);
    assert!((t1.alignment - a).abs() < 1e-12 && (t1.uniformity - u).abs() < 1e-12);
    let t3 = infonce_terms(&emb(x), &emb(y), 3.0).unwrap();
    assert!((t3.alignment * 3.0 - t1.alignment).abs() < 1e-12);
    assert!((t3.uniformity * 3.0 - t1.uniformity).abs() < 1e-12);
    assert_eq!(t3.temperature, 3.0);
}

#[test]
fn infonce_stable_for_large_similarities() {
    let x = Matrix::identity(3).scale(40.0);
    let t = infonce_terms(&emb(x.clone()), &emb(x), 1.0).unwrap();
    assert!(t.uniformity.is_finite() && t.alignment.is_finite());
}

#[test]
fn infonce_errors() {
    let a = emb(Matrix::zeros(3, 2));
    let b = emb(Matrix::zeros(3, 3));
    assert!(matches!(
        infonce_terms(&a, &b, 1.0),
        Err(Error::Dimension(_))
    ));
    assert!(matches!(
        infonce_terms(&a, &a, 0.0),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn alignment_is_proportional_to_cca_objective() {
    let mut r = rng(12);
    let z = gaussian(300, 3, &mut r);
    let x = emb(z
        .matmul(&gaussian(3, 5, &mut r))
        .unwrap()
        .add(&gaussian(300, 5, &mut r))
        .unwrap());
    let y = emb(z
        .matmul(&gaussian(3, 5, &mut r))
        .unwrap()
        .add(&gaussian(300, 5, &mut r))
        .unwrap());
    let model = fit_cca(&x, &y, 5, None).unwrap();
    let tau = 0.07;
    let t = infonce_terms(
        &whiten(&x, &model, Side::X).unwrap(),
        &whiten(&y, &model, Side::Y).unwrap(),
        tau,
    )
    .unwrap();
    let lhs = -(300.0 * tau) * t.alignment;
    // The per-row mean of ⟨x̃_i, ỹ_i⟩ is the trace tr(UᵀΣ_XYV) = Σ s_i.
    assert!((lhs / 300.0 - model.objective()).abs() <= 1e-6 * model.objective());
    let sxy = cross_covariance(&x, &y).unwrap();
    let tr = model
        .u
        .t_matmul(&sxy.matmul(&model.v).unwrap())
        .unwrap()
        .trace();
    assert!((tr - model.objective()).abs() <= 1e-6 * model.objective());
}

#[test]
fn bank_rejects_bad_inputs() {
    let c = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
    assert!(ConceptBank::new(c, vec![0.0, 0.0], Provenance::Scocca).is_err());
    let ok = ConceptBank::new(Matrix::identity(2), vec![0.0, 0.0], Provenance::Scocca).unwrap();
    assert!(ok.clone().with_labels(vec!["a".into()]).is_err());
    assert!(ok
        .clone()
        .with_labels(vec!["a".into(), "a".into()])
        .is_err());
    assert!(ConceptBank::new(Matrix::identity(2), vec![0.0], Provenance::Scocca).is_err());
    let labeled = ok.with_labels(vec!["a".into(), "b".into()]).unwrap();
    assert_eq!(labeled.concept_for_label("b"), Some(1));
}

#[test]
fn provenance_round_trips_through_text() {
    for p in Provenance::ALL {
        assert_eq!(p.as_str().parse::<Provenance>().unwrap(), p);
    }
    assert!("pca".parse::<Provenance>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constraints_and_trace_hold_on_random_fits(seed in any::<u64>(), d in 2usize..7, k_frac in 0.0f64..1.0) {
        let mut r = rng(seed);
        let n = 40 + 10 * d;
        let x = emb(gaussian(n, d, &mut r));
        let y = emb(x.matrix().matmul(&gaussian(d, d, &mut r)).unwrap().add(&gaussian(n, d, &mut r)).unwrap());
        let k = 1 + ((d - 1) as f64 * k_frac) as usize;
        let m = fit_cca(&x, &y, k, None).unwrap();
        let (rx, ry) = m.constraint_residuals();
        prop_assert!(rx <= 1e-6 && ry <= 1e-6);
        let t = m.trace_objective(&x, &y).unwrap();
        prop_assert!((t - m.objective()).abs() <= 1e-6 * m.objective().max(1e-12));
        prop_assert!(m.singular_values.iter().all(|&s| (-1e-12..=1.0 + 1e-9).contains(&s)));
    }
}
