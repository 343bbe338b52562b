mod common;

use common::*;
use proptest::prelude::*;
use scocca::concepts::{
    ablate, insert, insert_with, recompose, recompose_w, retrieve_top_k, swap, EditKind, EditOp,
    InsertMode,
};
use scocca::{ConceptBank, EmbeddingMatrix, Error, LassoConfig, Matrix, Provenance, SparseCode};

fn code(w: &[f64]) -> SparseCode {
    SparseCode::from_coefficients(w.to_vec())
}

#[test]
fn ablation_examples() {
    assert_eq!(
        ablate(&code(&[1.0, 2.0, 3.0]), 1).unwrap().w,
        vec![1.0, 0.0, 3.0]
    );
    let z = code(&[1.0, 0.0, 3.0]);
    assert_eq!(ablate(&z, 1).unwrap().w, z.w);
    let once = ablate(&code(&[4.0, 5.0]), 0).unwrap();
    assert_eq!(ablate(&once, 0).unwrap().w, once.w);
    assert_eq!(once.active_count, 1);
}

#[test]
fn insertion_examples() {
    assert_eq!(insert(&code(&[5.0, 0.0]), 0, 1).unwrap().w, vec![0.0, 5.0]);
    assert_eq!(insert(&code(&[5.0, 2.0]), 0, 1).unwrap().w, vec![0.0, 7.0]);
    assert_eq!(
        insert(&code(&[0.0, 2.0, 1.0]), 0, 2).unwrap().w,
        vec![0.0, 2.0, 1.0]
    );
    assert_eq!(
        insert_with(&code(&[5.0, 2.0]), 0, 1, InsertMode::Replace)
            .unwrap()
            .w,
        vec![0.0, 5.0]
    );
    assert!(matches!(
        insert(&code(&[1.0, 2.0]), 1, 1),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        insert(&code(&[1.0, 2.0]), 0, 2),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn swap_examples() {
    assert_eq!(swap(&code(&[1.0, 2.0]), 0, 1).unwrap().w, vec![2.0, 1.0]);
    let c = code(&[1.0, 2.0, 3.0]);
    assert_eq!(swap(&swap(&c, 0, 2).unwrap(), 0, 2).unwrap().w, c.w);
    assert_eq!(swap(&code(&[2.0, 2.0]), 0, 1).unwrap().w, vec![2.0, 2.0]);
    assert!(matches!(swap(&c, 1, 1), Err(Error::Parameter(_))));
}

#[test]
fn edit_strings() {
    assert_eq!("ablate:3".parse::<EditOp>().unwrap(), EditOp::ablate(3));
    assert_eq!(
        "insert:1:4".parse::<EditOp>().unwrap(),
        EditOp::insert(1, 4)
    );
    let s: EditOp = "swap:0:2".parse().unwrap();
    assert_eq!(s.kind, EditKind::Swap);
    assert_eq!(s.to_string(), "swap:0:2");
    for bad in [
        "ablate",
        "ablate:x",
        "insert:1",
        "insert:2:2",
        "swap:1:2:3",
        "drop:1",
        "",
    ] {
        assert!(
            matches!(
                bad.parse::<EditOp>(),
                Err(Error::Usage(_)) | Err(Error::Parameter(_))
            ),
            "{bad}"
        );
    }
}

#[test]
fn edits_apply_left_to_right() {
    let ops: Vec<EditOp> = ["insert:0:1", "swap:1:2", "ablate:0"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let mut c = code(&[1.0, 2.0, 3.0]);
    for op in &ops {
        c = op.apply(&c, InsertMode::Additive).unwrap();
    }
    assert_eq!(c.w, vec![0.0, 3.0, 3.0]);
}

#[test]
fn recomposition_examples() {
    let c = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0], [0.0, 3.0]]).unwrap();
    let bank = ConceptBank::new(c.clone(), vec![0.5, -1.0, 2.0], Provenance::Scocca).unwrap();
    assert_eq!(
        recompose(&bank, &code(&[0.0, 0.0])).unwrap(),
        vec![0.5, -1.0, 2.0]
    );
    assert_eq!(
        recompose(&bank, &code(&[0.0, 1.0])).unwrap(),
        vec![0.5, 0.0, 5.0]
    );
    assert!(recompose_w(&bank, &[1.0]).is_err());
}

#[test]
fn recomposition_inverts_penalty_free_decomposition() {
    let mut r = rng(1);
    let q = orthogonal(7, &mut r).leading_columns(4);
    let mu = gaussian_vec(7, &mut r);
    let bank = ConceptBank::new(q.clone(), mu.clone(), Provenance::Scocca).unwrap();
    let inner = q.matvec(&gaussian_vec(4, &mut r)).unwrap();
    let x: Vec<f64> = inner.iter().zip(&mu).map(|(a, b)| a + b).collect();
    let w = scocca::sparse::lasso_ista(&bank, &x, &LassoConfig::with_lambda(0.0)).unwrap();
    assert!(max_abs_diff(&recompose(&bank, &w).unwrap(), &x) <= 1e-6);
}

#[test]
fn retrieval_finds_planted_row() {
    let mut r = rng(2);
    let q = orthogonal(6, &mut r);
    let c = q.leading_columns(3);
    let mu = gaussian_vec(6, &mut r);
    let bank = ConceptBank::new(c.clone(), mu.clone(), Provenance::Scocca).unwrap();
    let other = q.column(5);
    let plus =
        |v: &[f64], s: f64| -> Vec<f64> { v.iter().zip(&mu).map(|(a, m)| s * a + m).collect() };
    let rows = vec![
        plus(&other, 1.0),
        plus(&other, -2.0),
        plus(&c.column(1), 1.0),
        plus(&q.column(4), 3.0),
    ];
    let x = EmbeddingMatrix::from_rows(&rows).unwrap();
    let cfg = LassoConfig::with_lambda(0.01);
    let top = retrieve_top_k(&bank, 1, &x, &cfg, 2).unwrap();
    assert_eq!(top[0].row, 2);
    assert!(top[0].activation > 0.9);
    let all = retrieve_top_k(&bank, 1, &x, &cfg, 4).unwrap();
    let mut idx: Vec<usize> = all.iter().map(|h| h.row).collect();
    idx.sort_unstable();
    assert_eq!(idx, vec![0, 1, 2, 3]);
    assert_eq!(retrieve_top_k(&bank, 1, &x, &cfg, 4).unwrap(), all);
}

#[test]
fn retrieval_ties_in_row_order() {
    let bank = ConceptBank::new(Matrix::identity(3), vec![0.0; 3], Provenance::Scocca).unwrap();
    let x =
        EmbeddingMatrix::from_rows(&[[0.0, 1.0, 0.0], [2.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
    let top = retrieve_top_k(&bank, 0, &x, &LassoConfig::with_lambda(0.1), 3).unwrap();
    assert_eq!(top.iter().map(|h| h.row).collect::<Vec<_>>(), vec![1, 2, 0]);
    assert!(matches!(
        retrieve_top_k(&bank, 3, &x, &LassoConfig::default(), 1),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        retrieve_top_k(&bank, 0, &x, &LassoConfig::default(), 4),
        Err(Error::Parameter(_))
    ));
}

fn edit_case() -> impl Strategy<Value = (Vec<f64>, usize, usize)> {
    (2usize..9).prop_flat_map(|k| {
        (prop::collection::vec(-5.0f64..5.0, k), 0..k, 0..k)
            .prop_filter("distinct", |(_, i, j)| i != j)
    })
}

proptest! {
    #[test]
    fn edits_touch_only_their_coordinates((w, i, j) in edit_case()) {
        let c = code(&w);
        let a = ablate(&c, i).unwrap();
        let ins = insert(&c, i, j).unwrap();
        let sw = swap(&c, i, j).unwrap();
        for t in 0..w.len() {
            if t != i {
                prop_assert_eq!(a.w[t].to_bits(), w[t].to_bits());
            }
            if t != i && t != j {
                prop_assert_eq!(ins.w[t].to_bits(), w[t].to_bits());
                prop_assert_eq!(sw.w[t].to_bits(), w[t].to_bits());
            }
        }
        prop_assert_eq!(ins.w.len(), w.len());
        let before: f64 = w.iter().sum();
        let after: f64 = ins.w.iter().sum();
        prop_assert!((before - after).abs() <= 1e-12 * (1.0 + before.abs()));
    }

    #[test]
    fn recomposition_is_linear(seed in any::<u64>(), d in 1usize..8, k in 1usize..6) {
        let mut r = rng(seed);
        let c = gaussian(d, k, &mut r);
        let bank = ConceptBank::new(c, gaussian_vec(d, &mut r), Provenance::Scocca).unwrap();
        let (wa, wb) = (gaussian_vec(k, &mut r), gaussian_vec(k, &mut r));
        let sum: Vec<f64> = wa.iter().zip(&wb).map(|(a, b)| a + b).collect();
        let ra = recompose_w(&bank, &wa).unwrap();
        let rb = recompose_w(&bank, &wb).unwrap();
        let lhs: Vec<f64> = ra.iter().zip(&rb).zip(bank.mu_x()).map(|((a, b), m)| a + b - m).collect();
        prop_assert!(max_abs_diff(&lhs, &recompose_w(&bank, &sum).unwrap()) <= 1e-12 * (1.0 + lhs.iter().map(|v| v.abs()).fold(0.0, f64::max)));
    }
}
