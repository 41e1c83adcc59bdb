use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ubp_core::imputers::{fit_mf, impute_baseline, impute_fkm, impute_ibi, Weighting};
use ubp_core::trainer::Schedule;
use ubp_core::*;

fn reals(rows: &[&[Option<f64>]]) -> Dataset {
    let names: Vec<String> = (0..rows[0].len()).map(|c| format!("a{c}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    Dataset::from_reals(&names, &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn real(ds: &Dataset, r: usize, a: usize) -> f64 {
    match ds.cell(r, a) {
        Cell::Real(v) => v,
        other => panic!("expected a real, got {other:?}"),
    }
}

fn iris() -> Dataset {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets/iris.csv");
    Dataset::load(path, None, &LoadOptions::default()).unwrap()
}

#[test]
fn baseline_examples() {
    let ds = reals(&[&[Some(1.0)], &[Some(3.0)], &[None]]);
    assert_eq!(real(&impute_baseline(&ds), 2, 0), 2.0);

    let nominal = Dataset::new(
        vec![AttributeSpec::nominal("n", ["a", "b"])],
        vec![vec![Cell::Category(0)], vec![Cell::Category(0)], vec![Cell::Category(1)], vec![Cell::Missing]],
    )
    .unwrap();
    assert_eq!(impute_baseline(&nominal).cell(3, 0), Cell::Category(0));

    let empty_col = reals(&[&[Some(1.0), None], &[Some(2.0), None]]);
    let out = impute_baseline(&empty_col);
    assert_eq!(real(&out, 0, 1), 0.5);

    let a = impute(&ds, &ImputerSpec::new(Method::Baseline, 1)).unwrap().completed;
    let b = impute(&ds, &ImputerSpec::new(Method::Baseline, 99)).unwrap().completed;
    assert_eq!(a, b);
}

#[test]
fn baseline_is_row_permutation_invariant() {
    let ds = reals(&[&[Some(1.0), None], &[Some(4.0), Some(2.0)], &[None, Some(6.0)], &[Some(2.0), Some(1.0)]]);
    let perm = [2, 0, 3, 1];
    let rows: Vec<Vec<Cell>> = perm.iter().map(|&r| ds.row(r).to_vec()).collect();
    let permuted = Dataset::new(ds.attrs().to_vec(), rows).unwrap();
    let a = impute_baseline(&ds);
    let b = impute_baseline(&permuted);
    for (i, &r) in perm.iter().enumerate() {
        assert_eq!(a.row(r), b.row(i));
    }
}

/// Cosine over normalized columns known in both rows, computed directly.
fn brute_cosine(ds: &Dataset, a: usize, b: usize) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for c in 0..ds.n_attrs() {
        if let (Cell::Real(x), Cell::Real(y)) = (ds.cell(a, c), ds.cell(b, c)) {
            let (x, y) = (ds.attrs()[c].normalize(x), ds.attrs()[c].normalize(y));
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb).sqrt()
    }
}

#[test]
fn ibi_matches_hand_oracle() {
    let ds = reals(&[
        &[Some(1.0), Some(2.0), None],
        &[Some(1.0), Some(2.5), Some(10.0)],
        &[Some(2.0), Some(1.0), Some(0.0)],
        &[Some(3.0), Some(3.0), Some(5.0)],
        &[Some(0.0), Some(4.0), Some(8.0)],
    ]);
    let sims: Vec<(usize, f64)> = (1..5).map(|s| (s, brute_cosine(&ds, 0, s))).collect();
    let mut ranked = sims.clone();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for k in 1..=4 {
        let top = &ranked[..k];
        let spec = &ds.attrs()[2];
        let num: f64 = top.iter().map(|&(s, w)| w * spec.normalize(real(&ds, s, 2))).sum();
        let den: f64 = top.iter().map(|&(_, w)| w).sum();
        let expected = spec.denormalize(num / den);
        let got = real(&impute_ibi(&ds, k, Weighting::Similarity).unwrap(), 0, 2);
        assert!((got - expected).abs() < 1e-12, "k={k}: {got} vs {expected}");
    }
}

#[test]
fn ibi_copies_a_duplicate_row() {
    let ds = reals(&[
        &[Some(0.2), Some(0.7), Some(0.4)],
        &[Some(0.2), Some(0.7), None],
        &[Some(0.9), Some(0.1), Some(0.8)],
    ]);
    let out = impute_ibi(&ds, 1, Weighting::Similarity).unwrap();
    assert!((real(&out, 1, 2) - 0.4).abs() < 1e-12);
}

#[test]
fn ibi_falls_back_to_baseline_without_similar_rows() {
    // Row 0 only shares column 0 with the others, where it is 0 after
    // normalization, so every similarity is 0.
    let ds = reals(&[&[Some(0.0), None], &[Some(1.0), Some(3.0)], &[Some(2.0), Some(5.0)]]);
    let out = impute_ibi(&ds, 2, Weighting::Similarity).unwrap();
    assert_eq!(real(&out, 0, 1), 4.0);
}

#[test]
fn ibi_uniform_with_all_neighbours_is_the_column_mean() {
    let ds = reals(&[
        &[Some(0.5), Some(0.5), None],
        &[Some(0.4), Some(0.9), Some(1.0)],
        &[Some(0.8), Some(0.3), Some(3.0)],
        &[Some(0.9), Some(0.6), Some(8.0)],
    ]);
    let out = impute_ibi(&ds, 3, Weighting::Uniform).unwrap();
    assert!((real(&out, 0, 2) - 4.0).abs() < 1e-12);
}

#[test]
fn fkm_with_one_cluster_is_the_baseline() {
    let ds = reals(&[&[Some(1.0), None], &[Some(4.0), Some(2.0)], &[None, Some(6.0)], &[Some(2.0), Some(1.0)]]);
    let (out, _) = impute_fkm(&ds, 1, 1.0, 1.3, 0).unwrap();
    let base = impute_baseline(&ds);
    for r in 0..4 {
        for a in 0..2 {
            assert!((real(&out, r, a) - real(&base, r, a)).abs() < 1e-9);
        }
    }
    assert!(impute_fkm(&ds, 5, 1.0, 1.3, 0).is_err());
}

#[test]
fn fkm_recovers_blob_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise = Normal::new(0.0, 0.03).unwrap();
    let centers = [[0.2, 0.2, 0.2], [0.8, 0.8, 0.8]];
    let mut rows = Vec::new();
    for i in 0..40 {
        let c = centers[i % 2];
        let row: Vec<Option<f64>> = (0..3)
            .map(|j| (rng.random::<f64>() > 0.15 || j == 0).then(|| c[j] + noise.sample(&mut rng)))
            .collect();
        rows.push(row);
    }
    // Pin the ranges to [0, 1] so the blob means are also the normalized values.
    rows.push(vec![Some(0.0), Some(0.0), Some(0.0)]);
    rows.push(vec![Some(1.0), Some(1.0), Some(1.0)]);
    let ds = Dataset::from_reals(&["x", "y", "z"], &rows).unwrap();
    let (out, _) = impute_fkm(&ds, 2, 2.0, 1.3, 3).unwrap();
    let mut checked = 0;
    for (i, row) in rows.iter().take(40).enumerate() {
        for j in 0..3 {
            if row[j].is_none() {
                assert!((real(&out, i, j) - centers[i % 2][j]).abs() < 0.1, "row {i} col {j}");
                checked += 1;
            }
        }
    }
    assert!(checked > 5);
}

fn dense(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> EncodedMatrix {
    EncodedMatrix::from_dense(rows, cols, (0..rows * cols).map(|i| Some(f(i / cols, i % cols))).collect()).unwrap()
}

#[test]
fn mf_recovers_low_rank_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<f64> = (0..20).map(|_| rng.random_range(0.1..1.0)).collect();
    let b: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..1.0)).collect();
    let x = dense(20, 5, |r, c| a[r] * b[c]);
    let f = fit_mf(&x, 1, 0.001, &Schedule::default(), 5).unwrap();
    assert!(f.rmse(&x.known_entries()) < 0.02, "rank-1 rmse {}", f.rmse(&x.known_entries()));

    let u: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
    let w: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
    let raw = dense(30, 6, |r, c| u[2 * r] * w[2 * c] + u[2 * r + 1] * w[2 * c + 1]);
    let max = raw.known_entries().iter().map(|e| e.2).fold(0.0, f64::max);
    let x = dense(30, 6, |r, c| raw.get(r, c).unwrap() / max);
    let two = fit_mf(&x, 2, 0.001, &Schedule::default(), 5).unwrap().rmse(&x.known_entries());
    let one = fit_mf(&x, 1, 0.001, &Schedule::default(), 5).unwrap().rmse(&x.known_entries());
    assert!(two < 0.05, "rank-2 rmse {two}");
    assert!(one > two, "t=1 {one} should be worse than t=2 {two}");
}

#[test]
fn every_method_keeps_known_cells_and_fills_the_rest() {
    let original = iris();
    let (corrupt, _) = corrupt_mcar(&original, 30.0, 4).unwrap();
    let mut opts = ImputeOptions::default();
    opts.train.max_epochs_per_phase = 50;
    for m in ["baseline", "ibi:k=5", "fkm:k=3", "mf:t=2", "nlpca:t=2", "ubp:t=2,hidden=4"] {
        let spec = ImputerSpec::new(m.parse().unwrap(), 4);
        let out = imputers::impute_with(&corrupt, &spec, &opts, &mut |_| {}).unwrap().completed;
        assert_eq!(out.missing_count(), 0, "{m}");
        for r in 0..corrupt.n_rows() {
            for a in 0..corrupt.n_attrs() {
                match corrupt.cell(r, a) {
                    Cell::Missing => {
                        let v = real(&out, r, a);
                        let AttributeKind::Continuous { min, max } = corrupt.attrs()[a].kind else { unreachable!() };
                        assert!(v >= min && v <= max, "{m}: {v} outside [{min}, {max}]");
                    }
                    known => assert_eq!(out.cell(r, a), known, "{m}"),
                }
            }
        }
        let again = imputers::impute_with(&corrupt, &spec, &opts, &mut |_| {}).unwrap().completed;
        assert_eq!(again, out, "{m} is not seed-deterministic");
    }
}

#[test]
fn nominal_attributes_impute_through_one_hot_columns() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets/crabs.csv");
    let crabs = Dataset::load(path, None, &LoadOptions::default()).unwrap();
    assert!(crabs.attrs()[0].is_nominal());
    let (corrupt, plan) = corrupt_mcar(&crabs, 30.0, 2).unwrap();
    let mut opts = ImputeOptions::default();
    opts.train.max_epochs_per_phase = 50;
    for m in ["baseline", "ibi:k=5", "fkm:k=4", "mf:t=2", "ubp:t=2"] {
        let out = imputers::impute_with(&corrupt, &ImputerSpec::new(m.parse().unwrap(), 2), &opts, &mut |_| {})
            .unwrap()
            .completed;
        assert_eq!(out.missing_count(), 0);
        assert!(score(&crabs, &out, &plan).unwrap().average_error.is_finite());
    }
}

#[test]
fn off_grid_parameters_are_accepted() {
    let ds = reals(&[&[Some(1.0), None], &[Some(4.0), Some(2.0)], &[None, Some(6.0)], &[Some(2.0), Some(1.0)]]);
    assert!(impute(&ds, &ImputerSpec::new("fkm:k=3".parse().unwrap(), 0)).is_ok());
    assert!(impute(&ds, &ImputerSpec::new("ibi:k=2,weighting=uniform".parse().unwrap(), 0)).is_ok());
}

#[test]
fn ubp_on_iris_is_below_baseline() {
    let original = iris();
    let (corrupt, plan) = corrupt_mcar(&original, 30.0, 0).unwrap();
    let ubp = impute(&corrupt, &ImputerSpec::new("ubp:t=2,hidden=8".parse().unwrap(), 0)).unwrap();
    let bl = impute(&corrupt, &ImputerSpec::new(Method::Baseline, 0)).unwrap();
    let e_ubp = score(&original, &ubp.completed, &plan).unwrap().average_error;
    let e_bl = score(&original, &bl.completed, &plan).unwrap().average_error;
    assert!(e_ubp < e_bl, "ubp {e_ubp} vs baseline {e_bl}");
}
