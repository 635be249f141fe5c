//! Two-stage classifier: condition vs neither, then autism vs ADHD.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::gbdt::{self, BinnedMatrix, GbdtModel, GbdtParams};
use super::impute::{ImputationModel, ImputeStrategy};
use super::select::{select_features, SelectParams};
use super::{auc, stage1_target, stage2_target, Dataset};
use crate::error::{Error, Result};
use crate::fusion::{Label, RosettaVector};

pub const MODEL_FORMAT: &str = "rosetta-cascade/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub gbdt: GbdtParams,
    /// Stage-1 probability at or above which stage 2 runs.
    pub threshold: f64,
    pub impute: ImputeStrategy,
}

impl Default for CascadeParams {
    fn default() -> Self {
        Self {
            gbdt: GbdtParams::default(),
            threshold: 0.5,
            impute: ImputeStrategy::Mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub p_condition: f64,
    /// Autism probability; `None` when stage 2 was skipped.
    pub p_autism: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CascadeModel {
    pub format: String,
    /// Selected Rosetta ids; model input columns in this order.
    pub features: Vec<String>,
    pub imputer: ImputationModel,
    pub stage1: GbdtModel,
    pub stage2: GbdtModel,
    pub threshold: f64,
    pub params: CascadeParams,
    #[serde(skip)]
    stage2_calls: AtomicU64,
}

impl Clone for CascadeModel {
    fn clone(&self) -> Self {
        Self {
            format: self.format.clone(),
            features: self.features.clone(),
            imputer: self.imputer.clone(),
            stage1: self.stage1.clone(),
            stage2: self.stage2.clone(),
            threshold: self.threshold,
            params: self.params.clone(),
            stage2_calls: AtomicU64::new(0),
        }
    }
}

impl PartialEq for CascadeModel {
    fn eq(&self, other: &Self) -> bool {
        self.format == other.format
            && self.features == other.features
            && self.imputer == other.imputer
            && self.stage1 == other.stage1
            && self.stage2 == other.stage2
            && self.threshold == other.threshold
            && self.params == other.params
    }
}

/// True when stage 2 should run.
pub fn gate(p_condition: f64, threshold: f64) -> bool {
    p_condition >= threshold
}

impl CascadeModel {
    pub fn from_parts(
        features: Vec<String>,
        imputer: ImputationModel,
        stage1: GbdtModel,
        stage2: GbdtModel,
        threshold: f64,
        params: CascadeParams,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::NoFeatures);
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Invalid(format!("threshold {threshold} outside (0, 1)")));
        }
        if imputer.fills.len() != features.len() {
            return Err(Error::Invalid("imputer does not match the selected features".into()));
        }
        Ok(Self {
            format: MODEL_FORMAT.into(),
            features,
            imputer,
            stage1,
            stage2,
            threshold,
            params,
            stage2_calls: AtomicU64::new(0),
        })
    }

    /// Number of stage-2 evaluations made through the gated predictors.
    pub fn stage2_calls(&self) -> u64 {
        self.stage2_calls.load(Ordering::Relaxed)
    }

    /// Gated prediction for a complete row in feature order.
    pub fn predict_complete(&self, x: &[f64]) -> Prediction {
        let p1 = self.stage1.predict_proba(x);
        if !gate(p1, self.threshold) {
            return Prediction {
                label: Label::Neither,
                p_condition: p1,
                p_autism: None,
            };
        }
        self.stage2_calls.fetch_add(1, Ordering::Relaxed);
        let p2 = self.stage2.predict_proba(x);
        Prediction {
            label: if p2 >= 0.5 { Label::Autism } else { Label::Adhd },
            p_condition: p1,
            p_autism: Some(p2),
        }
    }

    /// Row in feature order, possibly with missing values.
    pub fn predict_row(&self, row: &[Option<u32>]) -> Prediction {
        let x: Vec<f64> = self.imputer.impute_row(row).into_iter().map(f64::from).collect();
        self.predict_complete(&x)
    }

    pub fn predict_vector(&self, vector: &RosettaVector) -> Prediction {
        let row: Vec<Option<u32>> = self.features.iter().map(|f| vector.get(f)).collect();
        self.predict_row(&row)
    }

    /// Ungated probabilities of both stages; does not touch the counter.
    pub fn stage_probabilities(&self, x: &[f64]) -> (f64, f64) {
        (self.stage1.predict_proba(x), self.stage2.predict_proba(x))
    }

    /// Imputed input rows for `rows` of `data`. Features absent from `data`
    /// take their fill value.
    pub fn inputs(&self, data: &Dataset, rows: &[usize]) -> Vec<Vec<f64>> {
        self.imputer.complete_rows(data, rows)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Invalid(format!(
                "model format {:?}, expected {MODEL_FORMAT:?}",
                model.format
            )));
        }
        Ok(model)
    }
}

/// Fits imputer and both stages on `rows` using the given features.
pub fn fit_cascade(
    data: &Dataset,
    rows: &[usize],
    features: &[String],
    params: &CascadeParams,
) -> Result<CascadeModel> {
    if features.is_empty() {
        return Err(Error::NoFeatures);
    }
    let imputer = ImputationModel::fit(data, rows, params.impute).restrict(features);
    if imputer.fills.len() != features.len() {
        let missing = features
            .iter()
            .find(|f| data.feature_index(f).is_none())
            .cloned()
            .unwrap_or_default();
        return Err(Error::UnknownRosetta(missing));
    }
    let x = imputer.complete_rows(data, rows);
    let y1: Vec<bool> = rows.iter().map(|&r| stage1_target(data.labels[r])).collect();
    let stage1 = gbdt::train(&BinnedMatrix::from_rows(&x), &y1, &params.gbdt)?;

    let (x2, y2): (Vec<Vec<f64>>, Vec<bool>) = rows
        .iter()
        .zip(x)
        .filter(|(&r, _)| data.labels[r].has_condition())
        .map(|(&r, row)| (row, stage2_target(data.labels[r])))
        .unzip();
    let stage2 = gbdt::train(&BinnedMatrix::from_rows(&x2), &y2, &params.gbdt)?;

    CascadeModel::from_parts(
        features.to_vec(),
        imputer,
        stage1,
        stage2,
        params.threshold,
        params.clone(),
    )
}

/// Full training on every row: imputer, feature selection, both stages.
pub fn train_pipeline(data: &Dataset, cascade: &CascadeParams, select: &SelectParams) -> Result<CascadeModel> {
    let rows: Vec<usize> = (0..data.len()).collect();
    let imputer = ImputationModel::fit(data, &rows, cascade.impute);
    let features = select_features(data, &rows, &imputer, select)?;
    fit_cascade(data, &rows, &features, cascade)
}

/// Held-out scores of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub n: usize,
    pub auc_stage1: Option<f64>,
    /// Computed over subjects whose true label has a condition.
    pub auc_stage2: Option<f64>,
    pub accuracy: f64,
    /// confusion[true][predicted] in autism, adhd, neither order.
    pub confusion: [[usize; 3]; 3],
    #[serde(skip)]
    pub predictions: Vec<(String, Label, Prediction)>,
}

impl ModelEval {
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("subject_id,label,predicted,p_condition,p_autism\n");
        for (s, truth, p) in &self.predictions {
            out.push_str(&format!(
                "{s},{truth},{},{:.9},{}\n",
                p.label,
                p.p_condition,
                p.p_autism.map(|v| format!("{v:.9}")).unwrap_or_default()
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Scores `model` on every row of `data`. AUCs are `None` when the
/// population lacks a class.
pub fn evaluate_model(model: &CascadeModel, data: &Dataset) -> ModelEval {
    let rows: Vec<usize> = (0..data.len()).collect();
    let x = model.inputs(data, &rows);
    let mut s1 = Vec::new();
    let mut y1 = Vec::new();
    let mut s2 = Vec::new();
    let mut y2 = Vec::new();
    let mut confusion = [[0usize; 3]; 3];
    let mut predictions = Vec::new();
    for (r, xr) in rows.iter().zip(&x) {
        let truth = data.labels[*r];
        let (p1, p2) = model.stage_probabilities(xr);
        s1.push(p1);
        y1.push(stage1_target(truth));
        if truth.has_condition() {
            s2.push(p2);
            y2.push(stage2_target(truth));
        }
        let pred = model.predict_complete(xr);
        confusion[truth.index()][pred.label.index()] += 1;
        predictions.push((data.subject_ids[*r].clone(), truth, pred));
    }
    let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
    let mut by_subject = BTreeMap::new();
    for p in predictions {
        by_subject.insert(p.0.clone(), p);
    }
    ModelEval {
        n: rows.len(),
        auc_stage1: auc(&s1, &y1).ok(),
        auc_stage2: auc(&s2, &y2).ok(),
        accuracy: if rows.is_empty() {
            0.0
        } else {
            correct as f64 / rows.len() as f64
        },
        confusion,
        predictions: by_subject.into_values().collect(),
    }
}
