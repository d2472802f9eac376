use serde::{Deserialize, Serialize};

use crate::featurize::{build_vocab, DEFAULT_TOKEN_BUCKETS};
use crate::model::{forward_pair, init_params, mse_loss, ModelConfig, ModelError};
use crate::numcore::{adam_step, AdamConfig, Mode, NumError, PlateauScheduler, Rng, Tape};

use super::metrics::{metrics_from_scores, score_with_cache, FeatureCache};
use super::{tune_threshold, Checkpoint, ClonePair, Dataset, PipelineError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub token_buckets: usize,
    /// Downsample non-clones in the training split to the clone count.
    pub balance: bool,
    /// Cap on training pairs per epoch, taken after balancing.
    pub max_train_pairs: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 10,
            lr: 5e-4,
            seed: 0,
            val_fraction: 0.2,
            test_fraction: 0.2,
            plateau_factor: 0.5,
            plateau_patience: 1,
            token_buckets: DEFAULT_TOKEN_BUCKETS,
            balance: true,
            max_train_pairs: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and cuts it into train, validation and test
/// index lists. Each list is returned in ascending order.
pub fn split_pairs(n: usize, seed: u64, val_fraction: f64, test_fraction: f64) -> Splits {
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::derived(seed, &[0x5917]).shuffle(&mut idx);
    let n_test = (n as f64 * test_fraction).round() as usize;
    let n_val = ((n as f64 * val_fraction).round() as usize).min(n - n_test.min(n));
    let n_test = n_test.min(n);
    let mut test = idx[..n_test].to_vec();
    let mut val = idx[n_test..n_test + n_val].to_vec();
    let mut train = idx[n_test + n_val..].to_vec();
    test.sort_unstable();
    val.sort_unstable();
    train.sort_unstable();
    Splits { train, val, test }
}

fn balance(pairs: &[ClonePair], idx: &[usize], seed: u64) -> Vec<usize> {
    let (pos, mut neg): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pairs[i].label);
    if neg.len() > pos.len() {
        Rng::derived(seed, &[0xBA1A]).shuffle(&mut neg);
        neg.truncate(pos.len());
    }
    let mut out: Vec<usize> = pos.into_iter().chain(neg).collect();
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Validation F1 at the best threshold for this epoch's scores.
    pub val_f1: Option<f64>,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,lr,val_f1";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.epoch,
            self.train_loss,
            opt(self.val_loss),
            self.lr,
            opt(self.val_f1)
        )
    }
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from(EpochRecord::CSV_HEADER);
    s.push('\n');
    for r in history {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub splits: Splits,
    /// Training steps dropped because a pooled vector had zero norm.
    pub skipped_steps: usize,
}

fn mean_sq_error(scores: &[f64], pairs: &[&ClonePair]) -> f64 {
    let total: f64 = scores.iter().zip(pairs).map(|(s, p)| (s - p.target()).powi(2)).sum();
    total / scores.len() as f64
}

/// Trains a Siamese model on the training split, keeps the parameters with
/// the lowest validation loss and tunes the decision threshold on the
/// validation split with them.
pub fn train(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, PipelineError> {
    model_cfg.validate()?;
    if dataset.pairs.is_empty() {
        return Err(PipelineError::NoPairs);
    }
    if cfg.batch_size == 0 {
        return Err(ModelError::InvalidConfig("batch_size must be positive".into()).into());
    }
    let seed = cfg.seed;
    let vocab = build_vocab(dataset.fragments.values(), cfg.token_buckets);
    let mut params = init_params(model_cfg, vocab.kind_rows(), vocab.token_bucket_count, seed)?;
    let cache = FeatureCache::new(dataset, &vocab, model_cfg);

    let splits = split_pairs(dataset.pairs.len(), seed, cfg.val_fraction, cfg.test_fraction);
    let mut train_idx = if cfg.balance {
        balance(&dataset.pairs, &splits.train, seed)
    } else {
        splits.train.clone()
    };
    if let Some(cap) = cfg.max_train_pairs {
        Rng::derived(seed, &[0xCA9]).shuffle(&mut train_idx);
        train_idx.truncate(cap);
        train_idx.sort_unstable();
    }
    if train_idx.is_empty() {
        return Err(PipelineError::NoPairs);
    }
    let val_pairs: Vec<&ClonePair> = splits.val.iter().map(|&i| &dataset.pairs[i]).collect();
    log::info!(
        "training on {} pairs, validating on {}, {} epochs",
        train_idx.len(),
        val_pairs.len(),
        cfg.epochs
    );

    let mut sched = PlateauScheduler::new(cfg.lr, cfg.plateau_factor, cfg.plateau_patience);
    let mut best: Option<(f64, crate::numcore::ParameterSet)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut skipped_steps = 0;

    for epoch in 0..cfg.epochs {
        let lr = sched.lr;
        let mut order = train_idx.clone();
        Rng::derived(seed, &[0xE90C, epoch as u64]).shuffle(&mut order);
        let (mut loss_sum, mut counted) = (0.0, 0usize);

        for batch in order.chunks(cfg.batch_size) {
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let pair = &dataset.pairs[i];
                let (a, b) = cache.pair(pair);
                let mut rng = Rng::derived(seed, &[epoch as u64, i as u64]);
                let grads = {
                    let mut t = Tape::new();
                    let s = match forward_pair(&mut t, &params, model_cfg, a, b, Mode::Train, &mut rng) {
                        Ok(s) => s,
                        Err(ModelError::Num(NumError::ZeroVector)) => {
                            skipped_steps += 1;
                            continue;
                        }
                        Err(e) => return Err(e.into()),
                    };
                    let loss = mse_loss(&mut t, &[s], &[pair.target()])?;
                    loss_sum += t.scalar(loss);
                    counted += 1;
                    let scaled = t.scale(loss, inv);
                    t.backward(scaled)?;
                    t.param_grads()
                };
                for (name, g) in grads {
                    params.get_mut(&name)?.accumulate_grad(&g)?;
                }
            }
            adam_step(&mut params, lr, AdamConfig::default());
        }
        let train_loss = if counted > 0 { loss_sum / counted as f64 } else { f64::NAN };

        let (val_loss, val_f1) = if val_pairs.is_empty() {
            (None, None)
        } else {
            let scores = score_with_cache(&params, model_cfg, &cache, &val_pairs)?;
            let labels: Vec<bool> = val_pairs.iter().map(|p| p.label).collect();
            let f1 = tune_threshold(&scores, &labels).ok().map(|sigma| {
                let owned: Vec<ClonePair> = val_pairs.iter().map(|&p| p.clone()).collect();
                metrics_from_scores(&scores, &owned, sigma).f1
            });
            (Some(mean_sq_error(&scores, &val_pairs)), f1)
        };

        let monitored = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _)| monitored < *b) {
            best = Some((monitored, params.clone()));
        }
        sched.step(monitored);
        log::info!(
            "epoch {epoch}: lr {lr:.2e} train {train_loss:.4} val {}",
            val_loss.map_or("-".to_string(), |v| format!("{v:.4}"))
        );
        history.push(EpochRecord { epoch, lr, train_loss, val_loss, val_f1 });
    }
    if skipped_steps > 0 {
        log::warn!("{skipped_steps} training step(s) skipped on zero-norm pooled vectors");
    }

    let (best_loss, best_params) = best.unwrap_or((f64::NAN, params));
    // Threshold on validation; fall back to the training pairs without one.
    let tune_on: Vec<&ClonePair> = if val_pairs.is_empty() {
        train_idx.iter().map(|&i| &dataset.pairs[i]).collect()
    } else {
        val_pairs.clone()
    };
    let scores = score_with_cache(&best_params, model_cfg, &cache, &tune_on)?;
    let labels: Vec<bool> = tune_on.iter().map(|p| p.label).collect();
    let sigma = match tune_threshold(&scores, &labels) {
        Ok(s) => s,
        Err(PipelineError::DegenerateLabels) => {
            log::warn!("threshold tuning split has a single class; using 0");
            0.0
        }
        Err(e) => return Err(e),
    };

    let mut params = best_params;
    params.zero_grads();
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model: model_cfg.clone(),
            vocab,
            params,
            seed,
            best_val_loss: if val_pairs.is_empty() || cfg.epochs == 0 { None } else { Some(best_loss) },
            sigma,
        },
        history,
        splits,
        skipped_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::toygen;

    #[test]
    fn splits_partition_indices() {
        let s = split_pairs(103, 7, 0.2, 0.2);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        assert_eq!((s.test.len(), s.val.len()), (21, 21));
        assert_eq!(s, split_pairs(103, 7, 0.2, 0.2));
        assert_ne!(s, split_pairs(103, 8, 0.2, 0.2));
    }

    #[test]
    fn balancing_downsamples_non_clones() {
        let pairs: Vec<ClonePair> = (0..10)
            .map(|i| ClonePair { id1: "a".into(), id2: "b".into(), label: i < 3, clone_type: None })
            .collect();
        let idx: Vec<usize> = (0..10).collect();
        let b = balance(&pairs, &idx, 1);
        assert_eq!(b.len(), 6);
        assert_eq!(b.iter().filter(|&&i| pairs[i].label).count(), 3);
    }

    fn tiny() -> (Dataset, ModelConfig, TrainConfig) {
        let ds = toygen::generate(5).to_dataset().unwrap();
        let model = ModelConfig { d: 8, heads: 2, head_dim: 4, layers: 1, set2set_steps: 1, ..Default::default() };
        let cfg = TrainConfig { epochs: 2, seed: 5, max_train_pairs: Some(20), ..Default::default() };
        (ds, model, cfg)
    }

    #[test]
    fn training_is_deterministic_and_records_history() {
        let (ds, model, cfg) = tiny();
        let mut small = ds.clone();
        small.pairs.truncate(120);
        let a = train(&small, &model, &cfg).unwrap();
        let b = train(&small, &model, &cfg).unwrap();
        assert_eq!(a.history.len(), 2);
        assert_eq!(a.checkpoint.to_bytes().unwrap(), b.checkpoint.to_bytes().unwrap());
        assert!(history_csv(&a.history).starts_with(EpochRecord::CSV_HEADER));
    }
}
