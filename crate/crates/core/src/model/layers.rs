use ndarray::Array2;

use crate::featurize::FeaturizedGraph;
use crate::frontend::View;
use crate::numcore::{Mode, ParameterSet, Rng, RowRecipe, Tape, Var};

use super::{ModelConfig, ModelError, Pooling};

type R<T> = Result<T, ModelError>;

pub(crate) fn linear<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    x: Var,
    w: &str,
    b: Option<&str>,
) -> R<Var> {
    let w = t.param(p, w)?;
    let y = t.matmul(x, w)?;
    Ok(match b {
        Some(b) => {
            let b = t.param(p, b)?;
            t.add_row(y, b)?
        }
        None => y,
    })
}

pub(crate) fn layer_norm<'a>(t: &mut Tape<'a>, p: &'a ParameterSet, x: Var, prefix: &str) -> R<Var> {
    let g = t.param(p, &format!("{prefix}.gain"))?;
    let b = t.param(p, &format!("{prefix}.bias"))?;
    Ok(t.layer_norm(x, g, b)?)
}

/// `Linear(d -> inner) -> ReLU -> Linear(inner -> d)`
pub(crate) fn ffn<'a>(t: &mut Tape<'a>, p: &'a ParameterSet, x: Var, prefix: &str) -> R<Var> {
    let h = linear(t, p, x, &format!("{prefix}.w1"), Some(&format!("{prefix}.b1")))?;
    let h = t.relu(h);
    linear(t, p, h, &format!("{prefix}.w2"), Some(&format!("{prefix}.b2")))
}

/// `concat_h(softmax(Q_h K_h^T * scale + mask) V_h) W_O` with queries from
/// `xq` and keys/values from `xkv`. Head `h` uses columns
/// `h*head_dim..(h+1)*head_dim` of the projection matrices.
pub(crate) fn multi_head<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    prefix: &str,
    xq: Var,
    xkv: Var,
    mask: Option<&Array2<f64>>,
) -> R<Var> {
    let q = linear(t, p, xq, &format!("{prefix}.wq"), None)?;
    let k = linear(t, p, xkv, &format!("{prefix}.wk"), None)?;
    let v = linear(t, p, xkv, &format!("{prefix}.wv"), None)?;
    let mut heads = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let (a, b) = (h * cfg.head_dim, (h + 1) * cfg.head_dim);
        let qh = t.slice_cols(q, a, b)?;
        let kh = t.slice_cols(k, a, b)?;
        let vh = t.slice_cols(v, a, b)?;
        let kt = t.transpose(kh);
        let s = t.matmul(qh, kt)?;
        let mut s = t.scale(s, cfg.logit_scale());
        if let Some(m) = mask {
            s = t.add_const(s, m)?;
        }
        let att = t.row_softmax(s);
        heads.push(t.matmul(att, vh)?);
    }
    let cat = t.concat_cols(&heads)?;
    linear(t, p, cat, &format!("{prefix}.wo"), None)
}

fn check_recipes(recipes: &[RowRecipe], rows: usize) -> R<()> {
    for r in recipes {
        for &(index, _) in r {
            if index >= rows {
                return Err(ModelError::IndexOutOfVocab { index, rows });
            }
        }
    }
    Ok(())
}

pub(crate) fn embed_rows<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    kinds: Vec<RowRecipe>,
    tokens: Vec<RowRecipe>,
) -> R<Var> {
    check_recipes(&kinds, p.get("embed.kind")?.shape()[0])?;
    let table = t.param(p, "embed.kind")?;
    let h = t.gather(table, kinds)?;
    if !cfg.use_tokens {
        return Ok(h);
    }
    check_recipes(&tokens, p.get("embed.token")?.shape()[0])?;
    let table = t.param(p, "embed.token")?;
    let e = t.gather(table, tokens)?;
    Ok(t.add(h, e)?)
}

/// Initial node states: kind embedding (plus the mean of member kinds for
/// basic blocks) plus the token embedding when tokens are enabled.
pub fn embed_nodes<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    g: &FeaturizedGraph,
) -> R<Var> {
    embed_rows(t, p, cfg, g.kind_recipes(), g.token_recipes())
}

/// `H_l = ReLU(A H_{l-1} W_l)`; returns `sum_l H_l`, or only the last layer
/// when residual aggregation is disabled.
pub fn residual_gcn<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    h0: Var,
    adj: &Array2<f64>,
) -> R<Var> {
    let a = t.constant(adj.clone());
    let mut h = h0;
    let mut sum: Option<Var> = None;
    for l in 0..cfg.layers {
        let ah = t.matmul(a, h)?;
        let w = t.param(p, &format!("gcn.{l}.weight"))?;
        let z = t.matmul(ah, w)?;
        h = t.relu(z);
        sum = Some(match sum {
            Some(s) => t.add(s, h)?,
            None => h,
        });
    }
    Ok(if cfg.use_residual { sum.unwrap_or(h) } else { h })
}

pub(crate) fn intra_masked<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    h: Var,
    mask: Option<&Array2<f64>>,
    mode: Mode,
    rng: &mut Rng,
) -> R<Var> {
    let x = layer_norm(t, p, h, "intra.ln1")?;
    let o = multi_head(t, p, cfg, "intra", x, x, mask)?;
    let o = t.dropout(o, cfg.dropout, mode, rng);
    let h1 = t.add(o, h)?;
    let x1 = layer_norm(t, p, h1, "intra.ln2")?;
    let f = ffn(t, p, x1, "intra.ffn")?;
    let f = t.dropout(f, cfg.dropout, mode, rng);
    Ok(t.add(f, h1)?)
}

/// Pre-norm multi-head self-attention block with a residual FFN.
pub fn intra_attention<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    h_gcn: Var,
    mode: Mode,
    rng: &mut Rng,
) -> R<Var> {
    intra_masked(t, p, cfg, h_gcn, None, mode, rng)
}

fn cross_tail<'a>(t: &mut Tape<'a>, p: &'a ParameterSet, o: Var) -> R<Var> {
    let x = layer_norm(t, p, o, "cross.ln_out")?;
    ffn(t, p, x, "cross.ffn")
}

/// Cross-attention over stacked fragments; `mask` admits only partner rows.
pub(crate) fn cross_masked<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    h: Var,
    mask: &Array2<f64>,
) -> R<Var> {
    let x = layer_norm(t, p, h, "cross.ln_in")?;
    let o = multi_head(t, p, cfg, "cross", x, x, Some(mask))?;
    cross_tail(t, p, o)
}

/// Messages between the same view of two fragments: queries of one side
/// attend over keys and values of the other. Returns `(M1, M2)`.
pub fn cross_attention<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    (v1, h1): (View, Var),
    (v2, h2): (View, Var),
) -> R<(Var, Var)> {
    if v1 != v2 {
        return Err(ModelError::ViewMismatch(v1.to_string(), v2.to_string()));
    }
    let x1 = layer_norm(t, p, h1, "cross.ln_in")?;
    let x2 = layer_norm(t, p, h2, "cross.ln_in")?;
    let o1 = multi_head(t, p, cfg, "cross", x1, x2, None)?;
    let o2 = multi_head(t, p, cfg, "cross", x2, x1, None)?;
    Ok((cross_tail(t, p, o1)?, cross_tail(t, p, o2)?))
}

fn gate<'a>(t: &mut Tape<'a>, p: &'a ParameterSet, x: Var, h: Var, g: &str) -> R<Var> {
    let wx = linear(t, p, x, &format!("gru.w_{g}"), Some(&format!("gru.b_{g}")))?;
    let uh = linear(t, p, h, &format!("gru.u_{g}"), None)?;
    Ok(t.add(wx, uh)?)
}

/// Row-wise GRU cell with the message `m` as input and `h` as hidden state.
pub fn gru_update<'a>(t: &mut Tape<'a>, p: &'a ParameterSet, m: Var, h: Var) -> R<Var> {
    if t.shape(m) != t.shape(h) {
        return Err(crate::numcore::NumError::ShapeMismatch {
            op: "gru_update",
            left: t.shape(m).to_vec(),
            right: t.shape(h).to_vec(),
        }
        .into());
    }
    let z = gate(t, p, m, h, "z")?;
    let z = t.sigmoid(z);
    let r = gate(t, p, m, h, "r")?;
    let r = t.sigmoid(r);
    let rh = t.mul(r, h)?;
    let cand = gate(t, p, m, rh, "h")?;
    let cand = t.tanh(cand);
    let delta = t.sub(cand, h)?;
    let step = t.mul(z, delta)?;
    Ok(t.add(h, step)?)
}

fn masked_rows(mask: Option<&Array2<f64>>, batch: usize, n: usize) -> Vec<Vec<usize>> {
    (0..batch)
        .map(|b| match mask {
            Some(m) => (0..n).filter(|&j| m[[b, j]].is_finite()).collect(),
            None => (0..n).collect(),
        })
        .collect()
}

/// Pools `h` (`N x d`) into `batch` rows of width `2d`. Row `b` of `mask`
/// (`batch x N`, zero or -inf) selects the nodes it may read.
pub(crate) fn pool<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    h: Var,
    mask: Option<&Array2<f64>>,
    batch: usize,
) -> R<Var> {
    let [n, d] = t.shape(h);
    let rows = masked_rows(mask, batch, n);
    if rows.iter().any(Vec::is_empty) {
        return Err(ModelError::EmptyGraph);
    }
    let masked = |t: &mut Tape<'a>, e: Var| -> R<Var> {
        Ok(match mask {
            Some(m) => t.add_const(e, m)?,
            None => e,
        })
    };
    match cfg.pooling {
        Pooling::Mean => {
            let recipes = rows
                .iter()
                .map(|r| r.iter().map(|&j| (j, 1.0 / r.len() as f64)).collect())
                .collect();
            let m = t.gather(h, recipes)?;
            Ok(t.concat_cols(&[m, m])?)
        }
        Pooling::GlobalAttn => {
            let q = t.param(p, "readout.query")?;
            let e = t.matmul(h, q)?;
            let e = t.transpose(e);
            let e = t.concat_rows(&vec![e; batch])?;
            let e = masked(t, e)?;
            let a = t.row_softmax(e);
            let r = t.matmul(a, h)?;
            Ok(t.concat_cols(&[r, r])?)
        }
        Pooling::Set2Set => {
            let w_ih = t.param(p, "set2set.w_ih")?;
            let w_hh = t.param(p, "set2set.w_hh")?;
            let bias = t.param(p, "set2set.bias")?;
            let ht = t.transpose(h);
            let mut qstar = t.constant(Array2::zeros((batch, 2 * d)));
            let mut hs = t.constant(Array2::zeros((batch, d)));
            let mut c = t.constant(Array2::zeros((batch, d)));
            for _ in 0..cfg.set2set_steps {
                let gi = t.matmul(qstar, w_ih)?;
                let gh = t.matmul(hs, w_hh)?;
                let g = t.add(gi, gh)?;
                let g = t.add_row(g, bias)?;
                let i = t.slice_cols(g, 0, d)?;
                let i = t.sigmoid(i);
                let f = t.slice_cols(g, d, 2 * d)?;
                let f = t.sigmoid(f);
                let cand = t.slice_cols(g, 2 * d, 3 * d)?;
                let cand = t.tanh(cand);
                let o = t.slice_cols(g, 3 * d, 4 * d)?;
                let o = t.sigmoid(o);
                let fc = t.mul(f, c)?;
                let ig = t.mul(i, cand)?;
                c = t.add(fc, ig)?;
                let tc = t.tanh(c);
                hs = t.mul(o, tc)?;
                let e = t.matmul(hs, ht)?;
                let e = masked(t, e)?;
                let a = t.row_softmax(e);
                let r = t.matmul(a, h)?;
                qstar = t.concat_cols(&[hs, r])?;
            }
            Ok(qstar)
        }
    }
}

/// Concatenates the node sets of all views of one fragment and pools them
/// into a single `1 x 2d` vector.
pub fn fuse_and_pool<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    states: &[Var],
) -> R<Var> {
    let nonempty: Vec<Var> = states.iter().copied().filter(|&s| t.shape(s)[0] > 0).collect();
    if nonempty.is_empty() {
        return Err(ModelError::EmptyGraph);
    }
    let h = t.concat_rows(&nonempty)?;
    pool(t, p, cfg, h, None, 1)
}

/// Cosine similarity of two `1 x n` vectors.
pub fn similarity(t: &mut Tape<'_>, h1: Var, h2: Var) -> R<Var> {
    Ok(t.cosine(h1, h2)?)
}

/// Mean of `(s_i - y_i)^2`.
pub fn mse_loss(t: &mut Tape<'_>, scores: &[Var], labels: &[f64]) -> R<Var> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(ModelError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let mut total: Option<Var> = None;
    for (&s, &y) in scores.iter().zip(labels) {
        let diff = t.add_scalar(s, -y);
        let sq = t.mul(diff, diff)?;
        total = Some(match total {
            Some(acc) => t.add(acc, sq)?,
            None => sq,
        });
    }
    let total = total.expect("non-empty");
    Ok(t.scale(total, 1.0 / scores.len() as f64))
}
