use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::featurize::{featurize_bundle, FeaturizedBundle, Vocab};
use crate::model::{score_pair, ModelConfig, ModelError};
use crate::numcore::{NumError, ParameterSet};

use super::{ClonePair, Dataset, PipelineError};

/// Recall over the clone pairs of one type. Non-clones carry no type, so
/// precision is only reported overall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeRecall {
    pub count: usize,
    pub detected: usize,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub sigma: f64,
    pub n_pairs: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub per_type: BTreeMap<String, TypeRecall>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Predicts a clone when `score > sigma`.
pub fn metrics_from_scores(scores: &[f64], pairs: &[ClonePair], sigma: f64) -> Metrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut per_type: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (&s, pair) in scores.iter().zip(pairs) {
        let predicted = s > sigma;
        match (predicted, pair.label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        if let (true, Some(ct)) = (pair.label, pair.clone_type) {
            let e = per_type.entry(ct.to_string()).or_default();
            e.0 += 1;
            e.1 += predicted as usize;
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        precision,
        recall,
        f1,
        sigma,
        n_pairs: scores.len().min(pairs.len()),
        tp,
        fp,
        tn,
        fn_,
        per_type: per_type
            .into_iter()
            .map(|(k, (count, detected))| {
                (k, TypeRecall { count, detected, recall: ratio(detected, count) })
            })
            .collect(),
    }
}

/// Threshold maximising F1. Candidates are the midpoints between
/// consecutive distinct scores; ties go to the larger threshold.
pub fn tune_threshold(scores: &[f64], labels: &[bool]) -> Result<f64, PipelineError> {
    if scores.is_empty() {
        return Err(PipelineError::NoPairs);
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(PipelineError::DegenerateLabels);
    }
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let candidates: Vec<f64> = if distinct.len() == 1 {
        vec![distinct[0]]
    } else {
        distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    };

    let positives = labels.iter().filter(|&&l| l).count();
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for &c in &candidates {
        let tp = scores.iter().zip(labels).filter(|&(&s, &l)| l && s > c).count();
        let predicted = scores.iter().filter(|&&s| s > c).count();
        // 2tp / (2tp + fp + fn): one rounding, so equal F1 values tie exactly
        let f1 = ratio(2 * tp, predicted + positives);
        if f1 >= best.0 {
            best = (f1, c);
        }
    }
    Ok(best.1)
}

/// Featurizes each fragment once so pairs sharing a fragment reuse it.
pub(crate) struct FeatureCache {
    map: BTreeMap<String, FeaturizedBundle>,
}

impl FeatureCache {
    pub(crate) fn new(dataset: &Dataset, vocab: &Vocab, cfg: &ModelConfig) -> Self {
        let map = dataset
            .fragments
            .iter()
            .map(|(id, b)| (id.clone(), featurize_bundle(b, vocab, cfg.adjacency)))
            .collect();
        FeatureCache { map }
    }

    pub(crate) fn pair(&self, pair: &ClonePair) -> (&FeaturizedBundle, &FeaturizedBundle) {
        (&self.map[&pair.id1], &self.map[&pair.id2])
    }
}

pub(crate) fn score_with_cache(
    params: &ParameterSet,
    cfg: &ModelConfig,
    cache: &FeatureCache,
    pairs: &[&ClonePair],
) -> Result<Vec<f64>, PipelineError> {
    let mut zero = 0;
    let mut scores = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let (a, b) = cache.pair(pair);
        match score_pair(params, cfg, a, b) {
            Ok(s) => scores.push(s),
            Err(ModelError::Num(NumError::ZeroVector)) => {
                zero += 1;
                scores.push(0.0);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if zero > 0 {
        log::warn!("{zero} pair(s) pooled to a zero vector; scored as 0");
    }
    Ok(scores)
}

/// Eval-mode scores for `dataset.pairs[i]` for every `i` in `indices`.
pub fn score_pairs(
    params: &ParameterSet,
    cfg: &ModelConfig,
    vocab: &Vocab,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Vec<f64>, PipelineError> {
    let cache = FeatureCache::new(dataset, vocab, cfg);
    let pairs: Vec<&ClonePair> = indices.iter().map(|&i| &dataset.pairs[i]).collect();
    score_with_cache(params, cfg, &cache, &pairs)
}

/// Scores the selected pairs and reports metrics at `sigma`.
pub fn evaluate(
    params: &ParameterSet,
    cfg: &ModelConfig,
    vocab: &Vocab,
    dataset: &Dataset,
    indices: &[usize],
    sigma: f64,
) -> Result<Metrics, PipelineError> {
    if indices.is_empty() {
        return Err(PipelineError::NoPairs);
    }
    let scores = score_pairs(params, cfg, vocab, dataset, indices)?;
    let pairs: Vec<ClonePair> = indices.iter().map(|&i| dataset.pairs[i].clone()).collect();
    Ok(metrics_from_scores(&scores, &pairs, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::CloneType;

    fn pair(label: bool, ct: Option<CloneType>) -> ClonePair {
        ClonePair { id1: "a".into(), id2: "b".into(), label, clone_type: ct }
    }

    #[test]
    fn threshold_example() {
        let s = tune_threshold(&[0.2, 0.4, 0.8], &[false, true, true]).unwrap();
        assert!((s - 0.3).abs() < 1e-12);
    }

    #[test]
    fn threshold_ties_prefer_larger() {
        // predicting the top 4 and the top 1 both give F1 = 2/3
        let scores = [0.1, 0.2, 0.3, 0.4, 0.5];
        let labels = [false, true, false, false, true];
        let s = tune_threshold(&scores, &labels).unwrap();
        assert!((s - 0.45).abs() < 1e-12);
    }

    #[test]
    fn degenerate_labels_rejected() {
        assert!(matches!(
            tune_threshold(&[0.1, 0.2], &[true, true]),
            Err(PipelineError::DegenerateLabels)
        ));
        assert!(matches!(tune_threshold(&[], &[]), Err(PipelineError::NoPairs)));
    }

    #[test]
    fn confusion_and_per_type() {
        let pairs = [
            pair(true, Some(CloneType::T1)),
            pair(true, Some(CloneType::T2)),
            pair(false, None),
            pair(false, None),
        ];
        let m = metrics_from_scores(&[0.9, 0.1, 0.8, 0.0], &pairs, 0.5);
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (1, 1, 1, 1));
        assert!((m.f1 - 0.5).abs() < 1e-12);
        assert_eq!(m.per_type["T1"].recall, 1.0);
        assert_eq!(m.per_type["T2"].recall, 0.0);
    }
}
