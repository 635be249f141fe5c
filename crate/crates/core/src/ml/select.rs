//! Feature selection for the cascade.
//!
//! The greedy wrapper scores a feature set by inner stratified CV: both
//! stages are trained on each inner training split and the objective is the
//! mean of the stage-1 and stage-2 held-out AUCs. One list serves both stages.
//! Candidates are limited to a pool of the features with the strongest
//! single-feature AUC when `pool > 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gbdt::{self, BinnedMatrix, GbdtParams};
use super::impute::ImputationModel;
use super::{auc, cv::stratified_folds, derive_seed, stage1_target, stage2_target, Dataset};
use crate::error::{Error, Result};
use crate::fusion::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectMethod {
    #[default]
    Greedy,
    /// Top features by split gain of one model per stage trained on all
    /// features.
    GainRanked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectParams {
    pub max_features: usize,
    pub folds: usize,
    pub seed: u64,
    pub min_improvement: f64,
    /// Candidate pool size; 0 considers every feature.
    pub pool: usize,
    pub gbdt: GbdtParams,
    pub method: SelectMethod,
}

impl Default for SelectParams {
    fn default() -> Self {
        Self {
            max_features: 30,
            folds: 3,
            seed: 0,
            min_improvement: 1e-3,
            pool: 50,
            gbdt: GbdtParams {
                rounds: 10,
                max_depth: 2,
                learning_rate: 0.3,
                ..GbdtParams::default()
            },
            method: SelectMethod::Greedy,
        }
    }
}

/// One inner split, prepared once and reused for every candidate set.
struct Split {
    train1: BinnedMatrix,
    y1: Vec<bool>,
    test1: Vec<Vec<f64>>,
    t1: Vec<bool>,
    train2: BinnedMatrix,
    y2: Vec<bool>,
    test2: Vec<Vec<f64>>,
    t2: Vec<bool>,
}

impl Split {
    fn new(x: &[Vec<f64>], labels: &[Label], train: &[usize], test: &[usize]) -> Self {
        let pick = |idx: &[usize], cond_only: bool| -> Vec<usize> {
            idx.iter()
                .copied()
                .filter(|&i| !cond_only || labels[i].has_condition())
                .collect()
        };
        let rows = |idx: &[usize]| idx.iter().map(|&i| x[i].clone()).collect::<Vec<_>>();
        let (tr2, te2) = (pick(train, true), pick(test, true));
        Self {
            train1: BinnedMatrix::from_rows(&rows(train)),
            y1: train.iter().map(|&i| stage1_target(labels[i])).collect(),
            test1: rows(test),
            t1: test.iter().map(|&i| stage1_target(labels[i])).collect(),
            train2: BinnedMatrix::from_rows(&rows(&tr2)),
            y2: tr2.iter().map(|&i| stage2_target(labels[i])).collect(),
            test2: rows(&te2),
            t2: te2.iter().map(|&i| stage2_target(labels[i])).collect(),
        }
    }

    fn score(&self, features: &[usize], params: &GbdtParams) -> Result<(f64, f64)> {
        let (m1, _) = gbdt::train_on(&self.train1, features, &self.y1, params)?;
        let (m2, _) = gbdt::train_on(&self.train2, features, &self.y2, params)?;
        let s1: Vec<f64> = self.test1.iter().map(|r| m1.predict_raw(r)).collect();
        let s2: Vec<f64> = self.test2.iter().map(|r| m2.predict_raw(r)).collect();
        Ok((auc(&s1, &self.t1)?, auc(&s2, &self.t2)?))
    }
}

/// Selects at most `max_features` feature ids, in selection order, using
/// only `rows` imputed with `imputer`.
pub fn select_features(
    data: &Dataset,
    rows: &[usize],
    imputer: &ImputationModel,
    params: &SelectParams,
) -> Result<Vec<String>> {
    if params.max_features < 1 {
        return Err(Error::Invalid("max features must be at least 1".into()));
    }
    if data.feature_ids.is_empty() {
        return Err(Error::NoFeatures);
    }
    let x = imputer.complete_rows(data, rows);
    let labels: Vec<Label> = rows.iter().map(|&r| data.labels[r]).collect();
    let picked = match params.method {
        SelectMethod::Greedy => greedy(&x, &labels, params)?,
        SelectMethod::GainRanked => gain_ranked(&x, &labels, params)?,
    };
    Ok(picked.into_iter().map(|j| imputer.fills[j].feature.clone()).collect())
}

/// Mean of the two stages' AUC for each column used alone as a score,
/// oriented so that values are at least 0.5.
pub fn univariate_scores(x: &[Vec<f64>], labels: &[Label]) -> Result<Vec<f64>> {
    let width = x.first().map_or(0, Vec::len);
    let y1: Vec<bool> = labels.iter().map(|&l| stage1_target(l)).collect();
    let cond: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].has_condition()).collect();
    let y2: Vec<bool> = cond.iter().map(|&i| stage2_target(labels[i])).collect();
    (0..width)
        .map(|j| {
            let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            let c2: Vec<f64> = cond.iter().map(|&i| col[i]).collect();
            let a1 = auc(&col, &y1)?;
            let a2 = auc(&c2, &y2)?;
            Ok((a1.max(1.0 - a1) + a2.max(1.0 - a2)) / 2.0)
        })
        .collect()
}

fn greedy(x: &[Vec<f64>], labels: &[Label], params: &SelectParams) -> Result<Vec<usize>> {
    let width = x.first().map_or(0, Vec::len);
    let fold_of = stratified_folds(labels, params.folds, derive_seed(params.seed, 0))?;
    let splits: Vec<Split> = (0..params.folds)
        .map(|k| {
            let train: Vec<usize> = (0..x.len()).filter(|&i| fold_of[i] != k).collect();
            let test: Vec<usize> = (0..x.len()).filter(|&i| fold_of[i] == k).collect();
            Split::new(x, labels, &train, &test)
        })
        .collect();

    let mut pool: Vec<usize> = (0..width).collect();
    if params.pool > 0 && params.pool < width {
        let uni = univariate_scores(x, labels)?;
        // stable sort keeps lower indices first among equal scores
        pool.sort_by(|&a, &b| uni[b].total_cmp(&uni[a]));
        pool.truncate(params.pool);
        pool.sort_unstable();
    }

    let mut selected: Vec<usize> = Vec::new();
    let mut best_score = f64::NEG_INFINITY;
    while selected.len() < params.max_features.min(width) {
        let candidates: Vec<usize> = pool.iter().copied().filter(|c| !selected.contains(c)).collect();
        if candidates.is_empty() {
            break;
        }
        let scores = candidates
            .par_iter()
            .map(|&c| {
                let mut set = selected.clone();
                set.push(c);
                let mut sum = 0.0;
                for s in &splits {
                    let (a1, a2) = s.score(&set, &params.gbdt)?;
                    sum += (a1 + a2) / 2.0;
                }
                Ok(sum / splits.len() as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut pick = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[pick] {
                pick = i;
            }
        }
        if !selected.is_empty() && scores[pick] - best_score < params.min_improvement {
            break;
        }
        best_score = scores[pick];
        selected.push(candidates[pick]);
    }
    Ok(selected)
}

fn gain_ranked(x: &[Vec<f64>], labels: &[Label], params: &SelectParams) -> Result<Vec<usize>> {
    let all = BinnedMatrix::from_rows(x);
    let y1: Vec<bool> = labels.iter().map(|&l| stage1_target(l)).collect();
    let cond: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].has_condition()).collect();
    let m1 = gbdt::train(&all, &y1, &params.gbdt)?;
    let x2: Vec<Vec<f64>> = cond.iter().map(|&i| x[i].clone()).collect();
    let y2: Vec<bool> = cond.iter().map(|&i| stage2_target(labels[i])).collect();
    let m2 = gbdt::train(&BinnedMatrix::from_rows(&x2), &y2, &params.gbdt)?;

    let normalize = |g: Vec<f64>| {
        let total: f64 = g.iter().sum();
        g.into_iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect::<Vec<_>>()
    };
    let (g1, g2) = (normalize(m1.feature_gains()), normalize(m2.feature_gains()));
    let combined: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
    let mut order: Vec<usize> = (0..combined.len()).collect();
    order.sort_by(|&a, &b| combined[b].total_cmp(&combined[a]));
    let mut picked: Vec<usize> = order
        .into_iter()
        .filter(|&j| combined[j] > 0.0)
        .take(params.max_features)
        .collect();
    if picked.is_empty() {
        picked.push(0);
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::impute::ImputeStrategy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Feature 2 is the label code; the rest are noise.
    fn informative(n: usize, width: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels = [Label::Autism, Label::Adhd, Label::Neither];
        let mut d = Dataset {
            subject_ids: Vec::new(),
            feature_ids: (0..width).map(|j| format!("R-f-{j}")).collect(),
            code_counts: vec![3; width],
            rows: Vec::new(),
            labels: Vec::new(),
        };
        for i in 0..n {
            let l = labels[i % 3];
            let row = (0..width)
                .map(|j| {
                    Some(if j == 2 {
                        3 - l.index() as u32
                    } else {
                        rng.gen_range(1..=3)
                    })
                })
                .collect();
            d.subject_ids.push(format!("s{i:04}"));
            d.rows.push(row);
            d.labels.push(l);
        }
        d
    }

    fn run(d: &Dataset, params: &SelectParams) -> Vec<String> {
        let rows: Vec<usize> = (0..d.len()).collect();
        let imp = ImputationModel::fit(d, &rows, ImputeStrategy::Mode);
        select_features(d, &rows, &imp, params).unwrap()
    }

    #[test]
    fn informative_feature_first() {
        let d = informative(90, 6);
        let picked = run(&d, &SelectParams::default());
        assert_eq!(picked[0], "R-f-2");
        // perfect after one feature, so the improvement rule stops early
        assert_eq!(picked.len(), 1);
        let ranked = run(
            &d,
            &SelectParams {
                method: SelectMethod::GainRanked,
                ..Default::default()
            },
        );
        assert_eq!(ranked[0], "R-f-2");
    }

    #[test]
    fn budget_is_respected() {
        let d = informative(60, 5);
        let params = SelectParams {
            max_features: 1,
            ..Default::default()
        };
        assert_eq!(run(&d, &params).len(), 1);
        let zero = SelectParams {
            max_features: 0,
            ..Default::default()
        };
        let rows: Vec<usize> = (0..d.len()).collect();
        let imp = ImputationModel::fit(&d, &rows, ImputeStrategy::Mode);
        assert!(select_features(&d, &rows, &imp, &zero).is_err());
    }

    #[test]
    fn pool_limits_candidates() {
        let d = informative(60, 8);
        let params = SelectParams {
            pool: 2,
            min_improvement: -1.0,
            ..Default::default()
        };
        let picked = run(&d, &params);
        assert_eq!(picked.len(), 2);
        assert!(picked.contains(&"R-f-2".to_string()));
    }
}
