mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rosetta_core::ml::cascade::evaluate_model;
use rosetta_core::ml::{
    auc, cross_validate, fit_cascade, select_features, CascadeParams, CvParams, Dataset, ImputationModel,
    ImputeStrategy, SelectParams,
};
use rosetta_core::Label;

use common::brute_auc;

/// `width` features with codes 1..=4; feature `signal` tracks the label, the
/// rest are noise. About 10% of cells are missing.
fn planted(n: usize, width: usize, signal: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Label> = (0..n).map(|i| Label::ALL[i % 3]).collect();
    let rows = labels
        .iter()
        .map(|l| {
            (0..width)
                .map(|j| {
                    if rng.gen_bool(0.1) {
                        return None;
                    }
                    let v = if j == signal {
                        let base = match l {
                            Label::Autism => 4,
                            Label::Adhd => 3,
                            Label::Neither => 1,
                        };
                        if rng.gen_bool(0.85) {
                            base
                        } else {
                            rng.gen_range(1..=4)
                        }
                    } else {
                        rng.gen_range(1..=4)
                    };
                    Some(v)
                })
                .collect()
        })
        .collect();
    Dataset {
        subject_ids: (0..n).map(|i| format!("S{i:05}")).collect(),
        feature_ids: (0..width).map(|j| format!("R-f-{j}")).collect(),
        code_counts: vec![4; width],
        rows,
        labels,
    }
}

fn scored_set() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60, 1u32..8).prop_flat_map(|(n, levels)| {
        (
            prop::collection::vec((0..levels).prop_map(f64::from), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, y)| y.iter().any(|&v| v) && y.iter().any(|&v| !v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn auc_matches_pair_counting((s, y) in scored_set()) {
        prop_assert!((auc(&s, &y).unwrap() - brute_auc(&s, &y)).abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_under_increasing_maps((s, y) in scored_set(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let t: Vec<f64> = s.iter().map(|v| (a * v + b).exp()).collect();
        prop_assert_eq!(auc(&s, &y).unwrap(), auc(&t, &y).unwrap());
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&neg, &y).unwrap() - (1.0 - auc(&s, &y).unwrap())).abs() < 1e-12);
    }
}

#[test]
fn auc_extremes() {
    assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
    assert_eq!(auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
    assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
}

#[test]
fn planted_feature_is_selected_first_and_cap_holds() {
    let data = planted(240, 12, 7, 1);
    let rows: Vec<usize> = (0..data.len()).collect();
    let imputer = ImputationModel::fit(&data, &rows, ImputeStrategy::Mode);
    let picked = select_features(&data, &rows, &imputer, &SelectParams::default()).unwrap();
    assert_eq!(picked[0], "R-f-7");
    for k in [1, 3] {
        let params = SelectParams {
            max_features: k,
            min_improvement: f64::NEG_INFINITY,
            ..SelectParams::default()
        };
        assert_eq!(select_features(&data, &rows, &imputer, &params).unwrap().len(), k);
    }
}

#[test]
fn stage_two_runs_exactly_for_gated_rows() {
    let data = planted(180, 5, 2, 4);
    let rows: Vec<usize> = (0..data.len()).collect();
    let features: Vec<String> = data.feature_ids.clone();
    for threshold in [0.2, 0.5, 0.8] {
        let params = CascadeParams {
            threshold,
            ..CascadeParams::default()
        };
        let model = fit_cascade(&data, &rows, &features, &params).unwrap();
        let mut gated = 0;
        for row in &data.rows {
            let p = model.predict_row(row);
            if p.p_condition >= threshold {
                gated += 1;
                assert!(p.p_autism.is_some());
            } else {
                assert_eq!(p.label, Label::Neither);
                assert!(p.p_autism.is_none());
            }
        }
        assert_eq!(model.stage2_calls(), gated);
    }
}

#[test]
fn cv_reports_do_not_depend_on_thread_count() {
    let data = planted(150, 8, 1, 9);
    let params = CvParams {
        folds: 3,
        seed: 21,
        ..CvParams::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cross_validate(&data, &params).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.to_json().unwrap(), four.to_json().unwrap());
    assert_eq!(one.to_csv(), four.to_csv());
    assert!(one.auc_stage1 > 0.8, "{}", one.auc_stage1);
}

#[test]
fn model_json_round_trip_predicts_identically() {
    let data = planted(120, 4, 0, 2);
    let rows: Vec<usize> = (0..data.len()).collect();
    let model = fit_cascade(&data, &rows, &data.feature_ids, &CascadeParams::default()).unwrap();
    let again = rosetta_core::ml::CascadeModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(again.to_json().unwrap(), model.to_json().unwrap());
    let a = evaluate_model(&model, &data);
    let b = evaluate_model(&again, &data);
    assert_eq!(a.predictions_csv(), b.predictions_csv());
}
