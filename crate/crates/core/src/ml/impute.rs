//! Per-feature fill values for missing Rosetta codes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::fusion::RosettaVector;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeStrategy {
    /// Most frequent observed code, lower code on ties.
    #[default]
    Mode,
    /// Lower median of observed codes.
    Median,
}

impl ImputeStrategy {
    /// Fill value from observed code counts, `None` when nothing was observed.
    pub fn fill(self, counts: &BTreeMap<u32, usize>) -> Option<u32> {
        match self {
            ImputeStrategy::Mode => counts
                .iter()
                // iterate high to low so max_by_key lands on the lowest tied code
                .rev()
                .max_by_key(|(_, &n)| n)
                .map(|(&c, _)| c),
            ImputeStrategy::Median => {
                let total: usize = counts.values().sum();
                if total == 0 {
                    return None;
                }
                let target = total.div_ceil(2);
                let mut seen = 0;
                counts.iter().find_map(|(&c, &n)| {
                    seen += n;
                    (seen >= target).then_some(c)
                })
            }
        }
    }
}

impl std::str::FromStr for ImputeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mode" => Ok(ImputeStrategy::Mode),
            "median" => Ok(ImputeStrategy::Median),
            _ => Err(format!("unknown imputation strategy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFill {
    pub feature: String,
    pub value: u32,
    pub strategy: ImputeStrategy,
    /// True when the feature was never observed and the mid code was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputationModel {
    pub fills: Vec<FeatureFill>,
}

impl ImputationModel {
    /// Fits one fill per dataset feature using only `rows`.
    pub fn fit(data: &Dataset, rows: &[usize], strategy: ImputeStrategy) -> Self {
        let fills = data
            .feature_ids
            .iter()
            .enumerate()
            .map(|(j, id)| {
                let mut counts = BTreeMap::new();
                for &r in rows {
                    if let Some(c) = data.rows[r][j] {
                        *counts.entry(c).or_insert(0) += 1;
                    }
                }
                let (value, fallback) = match strategy.fill(&counts) {
                    Some(v) => (v, false),
                    None => (data.code_counts[j].max(1).div_ceil(2), true),
                };
                FeatureFill {
                    feature: id.clone(),
                    value,
                    strategy,
                    fallback,
                }
            })
            .collect();
        Self { fills }
    }

    /// Fills for `features` only, in that order.
    pub fn restrict(&self, features: &[String]) -> Self {
        Self {
            fills: features
                .iter()
                .filter_map(|f| self.fills.iter().find(|x| &x.feature == f).cloned())
                .collect(),
        }
    }

    pub fn fallback_features(&self) -> impl Iterator<Item = &str> {
        self.fills.iter().filter(|f| f.fallback).map(|f| f.feature.as_str())
    }

    /// `row` is aligned with `fills`; observed values pass through.
    pub fn impute_row(&self, row: &[Option<u32>]) -> Vec<u32> {
        row.iter()
            .zip(&self.fills)
            .map(|(v, fill)| v.unwrap_or(fill.value))
            .collect()
    }

    /// Complete codes for every fitted feature of `vector`.
    pub fn impute_vector(&self, vector: &RosettaVector) -> BTreeMap<String, u32> {
        self.fills
            .iter()
            .map(|f| (f.feature.clone(), vector.get(&f.feature).unwrap_or(f.value)))
            .collect()
    }

    /// Imputed rows of `data` as model input, aligned with `fills`.
    pub fn complete_rows(&self, data: &Dataset, rows: &[usize]) -> Vec<Vec<f64>> {
        let cols: Vec<Option<usize>> = self.fills.iter().map(|f| data.feature_index(&f.feature)).collect();
        rows.iter()
            .map(|&r| {
                cols.iter()
                    .zip(&self.fills)
                    .map(|(col, fill)| f64::from(col.and_then(|j| data.rows[r][j]).unwrap_or(fill.value)))
                    .collect()
            })
            .collect()
    }
}
