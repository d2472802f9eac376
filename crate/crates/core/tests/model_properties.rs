mod common;

use std::collections::BTreeSet;

use common::*;
use magnet::featurize::{FeaturizedBundle, FeaturizedGraph, Vocab};
use magnet::frontend::View;
use magnet::model::{forward_pair, init_params, mse_loss, score_pair, ModelConfig, ModelError, Pooling};
use magnet::numcore::{Mode, NumError, ParameterSet, Rng, Tape};
use proptest::prelude::*;

const BUCKETS: usize = 16;

fn vocab() -> Vocab {
    Vocab::from_kinds(KINDS, BUCKETS)
}

fn random_config(rng: &mut Rng) -> ModelConfig {
    let views: Vec<View> = loop {
        let v: Vec<View> = View::ALL.into_iter().filter(|_| rng.uniform() < 0.6).collect();
        if !v.is_empty() {
            break v;
        }
    };
    ModelConfig {
        d: 8,
        heads: 2,
        head_dim: 4,
        layers: 1 + rng.below(3),
        use_residual: rng.uniform() < 0.5,
        use_intra_attn: rng.uniform() < 0.7,
        use_cross_attn: rng.uniform() < 0.7,
        use_tokens: rng.uniform() < 0.7,
        pooling: [Pooling::Set2Set, Pooling::Mean, Pooling::GlobalAttn][rng.below(3)],
        views,
        ..ModelConfig::default()
    }
}

struct Case {
    cfg: ModelConfig,
    params: ParameterSet,
    a: FeaturizedBundle,
    b: FeaturizedBundle,
    rng: Rng,
}

fn case(seed: u64) -> Case {
    let vocab = vocab();
    let mut rng = Rng::new(seed);
    let cfg = random_config(&mut rng);
    let params = init_params(&cfg, vocab.kind_rows(), BUCKETS, seed).unwrap();
    let a = random_bundle(&mut rng, &vocab);
    let b = random_bundle(&mut rng, &vocab);
    Case { cfg, params, a, b, rng }
}

/// `None` when a pooled vector is zero and the score is undefined.
fn score(c: &Case, a: &FeaturizedBundle, b: &FeaturizedBundle) -> Option<f64> {
    match score_pair(&c.params, &c.cfg, a, b) {
        Ok(s) => Some(s),
        Err(ModelError::Num(NumError::ZeroVector)) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_is_symmetric_and_bounded(seed in any::<u64>()) {
        let c = case(seed);
        let (Some(ab), Some(ba)) = (score(&c, &c.a, &c.b), score(&c, &c.b, &c.a)) else {
            return Ok(());
        };
        prop_assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn score_ignores_node_order(seed in any::<u64>()) {
        let mut c = case(seed);
        let pa = permute_bundle(&c.a, &mut c.rng);
        let pb = permute_bundle(&c.b, &mut c.rng);
        let (Some(s), Some(p)) = (score(&c, &c.a, &c.b), score(&c, &pa, &pb)) else {
            return Ok(());
        };
        prop_assert!((s - p).abs() < 1e-9, "{s} vs {p}");
    }

    #[test]
    fn fragment_is_similar_to_itself(seed in any::<u64>()) {
        let c = case(seed);
        if let Some(s) = score(&c, &c.a, &c.a) {
            prop_assert!((s - 1.0).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn reduced_model_is_a_plain_gcn(seed in any::<u64>()) {
        let vocab = vocab();
        let mut rng = Rng::new(seed);
        let cfg = ModelConfig {
            d: 6,
            layers: 1 + rng.below(3),
            use_residual: rng.uniform() < 0.5,
            use_intra_attn: false,
            use_cross_attn: false,
            pooling: Pooling::Mean,
            views: vec![View::Ast],
            ..ModelConfig::default()
        };
        let params = init_params(&cfg, vocab.kind_rows(), BUCKETS, seed).unwrap();
        let a = random_bundle(&mut rng, &vocab);
        let b = random_bundle(&mut rng, &vocab);
        let (ea, eb) = (gcn_embedding(&params, &cfg, &a.ast), gcn_embedding(&params, &cfg, &b.ast));
        let na = ea.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = eb.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(na > 1e-12 && nb > 1e-12);
        let expected = ea.iter().zip(&eb).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
        let got = score_pair(&params, &cfg, &a, &b).unwrap();
        prop_assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }
}

fn row(p: &ParameterSet, name: &str, i: usize) -> Vec<f64> {
    p.get(name).unwrap().data.row(i).to_vec()
}

/// Mean over nodes of the GCN stack applied to kind plus token embeddings.
fn gcn_embedding(p: &ParameterSet, cfg: &ModelConfig, g: &FeaturizedGraph) -> Vec<f64> {
    let n = g.len();
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = row(p, "embed.kind", g.kind_indices[i]);
            if let (true, Some(t)) = (cfg.use_tokens, g.token_indices[i]) {
                for (x, y) in e.iter_mut().zip(row(p, "embed.token", t)) {
                    *x += y;
                }
            }
            e
        })
        .collect();
    let mut sum = vec![vec![0.0; cfg.d]; n];
    for l in 0..cfg.layers {
        let w = &p.get(&format!("gcn.{l}.weight")).unwrap().data;
        let next: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let agg: Vec<f64> = (0..cfg.d)
                    .map(|k| (0..n).map(|j| g.adj_norm[[i, j]] * h[j][k]).sum())
                    .collect();
                (0..cfg.d)
                    .map(|c| (0..cfg.d).map(|k| agg[k] * w[[k, c]]).sum::<f64>().max(0.0))
                    .collect()
            })
            .collect();
        for (s, r) in sum.iter_mut().zip(&next) {
            for (x, y) in s.iter_mut().zip(r) {
                *x += y;
            }
        }
        h = next;
    }
    let out = if cfg.use_residual { sum } else { h };
    (0..cfg.d).map(|k| out.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect()
}

#[test]
fn every_parameter_receives_gradient() {
    let vocab = vocab();
    for pooling in [Pooling::Set2Set, Pooling::Mean, Pooling::GlobalAttn] {
        let cfg = ModelConfig { d: 8, heads: 2, head_dim: 4, layers: 2, pooling, ..ModelConfig::default() };
        let mut live = BTreeSet::new();
        let mut names = BTreeSet::new();
        for seed in 0..20 {
            let params = init_params(&cfg, vocab.kind_rows(), BUCKETS, seed).unwrap();
            names.extend(params.names().map(str::to_owned));
            let mut rng = Rng::new(seed);
            let a = random_bundle(&mut rng, &vocab);
            let b = random_bundle(&mut rng, &vocab);
            let mut t = Tape::new();
            let s = forward_pair(&mut t, &params, &cfg, &a, &b, Mode::Train, &mut rng).unwrap();
            let loss = mse_loss(&mut t, &[s], &[if seed % 2 == 0 { 1.0 } else { -1.0 }]).unwrap();
            t.backward(loss).unwrap();
            for (name, g) in t.param_grads() {
                if g.iter().any(|&x| x != 0.0) {
                    live.insert(name);
                }
            }
        }
        let dead: Vec<_> = names.difference(&live).collect();
        assert!(dead.is_empty(), "{pooling:?}: no gradient reaches {dead:?}");
    }
}
