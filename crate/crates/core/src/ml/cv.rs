//! Stratified k-fold evaluation of the whole training pipeline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cascade::{fit_cascade, CascadeParams};
use super::impute::ImputationModel;
use super::select::{select_features, SelectParams};
use super::{auc, derive_seed, stage1_target, stage2_target, Dataset};
use crate::error::{Error, Result};
use crate::fusion::Label;

pub const REPORT_FORMAT: &str = "rosetta-cv/1";

/// Fold id in `0..k` per row. Each class is shuffled with its own seeded
/// stream and dealt round-robin, so fold sizes per class differ by at most 1.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {k}")));
    }
    let mut fold = vec![0; labels.len()];
    for class in Label::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class.index() as u64);
        idx.shuffle(&mut rng);
        for (n, i) in idx.into_iter().enumerate() {
            fold[i] = n % k;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvParams {
    pub folds: usize,
    pub seed: u64,
    pub cascade: CascadeParams,
    pub select: SelectParams,
}

impl Default for CvParams {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 0,
            cascade: CascadeParams::default(),
            select: SelectParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub auc_stage1: f64,
    pub auc_stage2: f64,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub folds: usize,
    pub seed: u64,
    pub auc_stage1: f64,
    pub auc_stage2: f64,
    /// Which test subjects stage-2 AUC is computed over.
    pub stage2_population: String,
    pub per_fold: Vec<FoldResult>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,n_train,n_test,auc_stage1,auc_stage2,n_features\n");
        for f in &self.per_fold {
            out.push_str(&format!(
                "{},{},{},{:.12},{:.12},{}\n",
                f.fold,
                f.n_train,
                f.n_test,
                f.auc_stage1,
                f.auc_stage2,
                f.features.len()
            ));
        }
        out.push_str(&format!("mean,,,{:.12},{:.12},\n", self.auc_stage1, self.auc_stage2));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// For each fold: imputer, feature selection and both stages are fitted on
/// the training part, then the held-out part is scored. Stage-1 AUC covers all
/// held-out rows; stage-2 AUC covers held-out rows whose true label has a
/// condition, scored ungated.
pub fn cross_validate(data: &Dataset, params: &CvParams) -> Result<EvalReport> {
    let fold_of = stratified_folds(&data.labels, params.folds, params.seed)?;
    for k in 0..params.folds {
        for class in Label::ALL {
            let test = (0..data.len())
                .filter(|&i| fold_of[i] == k && data.labels[i] == class)
                .count();
            let train = (0..data.len())
                .filter(|&i| fold_of[i] != k && data.labels[i] == class)
                .count();
            if test == 0 || train == 0 {
                return Err(Error::Invalid(format!(
                    "fold {k} has no {class} subjects in its {} part; use fewer folds",
                    if test == 0 { "test" } else { "training" }
                )));
            }
        }
    }

    let per_fold = (0..params.folds)
        .into_par_iter()
        .map(|k| {
            let train: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] != k).collect();
            let test: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] == k).collect();
            let imputer = ImputationModel::fit(data, &train, params.cascade.impute);
            let select = SelectParams {
                seed: derive_seed(params.seed, k as u64 + 1),
                ..params.select.clone()
            };
            let features = select_features(data, &train, &imputer, &select)?;
            let model = fit_cascade(data, &train, &features, &params.cascade)?;

            let x = model.inputs(data, &test);
            let mut s1 = Vec::with_capacity(test.len());
            let mut y1 = Vec::with_capacity(test.len());
            let mut s2 = Vec::new();
            let mut y2 = Vec::new();
            for (&r, xr) in test.iter().zip(&x) {
                let (p1, p2) = model.stage_probabilities(xr);
                s1.push(p1);
                y1.push(stage1_target(data.labels[r]));
                if data.labels[r].has_condition() {
                    s2.push(p2);
                    y2.push(stage2_target(data.labels[r]));
                }
            }
            Ok(FoldResult {
                fold: k,
                n_train: train.len(),
                n_test: test.len(),
                auc_stage1: auc(&s1, &y1)?,
                auc_stage2: auc(&s2, &y2)?,
                features,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mean = |f: fn(&FoldResult) -> f64| per_fold.iter().map(f).sum::<f64>() / per_fold.len() as f64;
    Ok(EvalReport {
        format: REPORT_FORMAT.into(),
        folds: params.folds,
        seed: params.seed,
        auc_stage1: mean(|f| f.auc_stage1),
        auc_stage2: mean(|f| f.auc_stage2),
        stage2_population: "true_positives".into(),
        per_fold,
    })
}
