//! Whole-pair forward pass. Both fragments and all enabled views are stacked
//! into one node matrix so every layer runs as a few large products; masks
//! and a block-diagonal adjacency keep the computation identical to running
//! each view of each fragment on its own.

use ndarray::{s, Array2};

use crate::featurize::FeaturizedBundle;
use crate::numcore::{Mode, ParameterSet, Rng, RowRecipe, Tape, Var};

use super::layers::{cross_masked, embed_rows, gru_update, intra_masked, pool, residual_gcn, similarity};
use super::{ModelConfig, ModelError};

#[derive(Clone, Copy, Debug)]
struct Segment {
    frag: usize,
    view: usize,
    start: usize,
    len: usize,
}

struct PairLayout {
    kinds: Vec<RowRecipe>,
    tokens: Vec<RowRecipe>,
    adj: Array2<f64>,
    intra_mask: Array2<f64>,
    cross_mask: Array2<f64>,
    pool_mask: Array2<f64>,
}

impl PairLayout {
    fn new(cfg: &ModelConfig, a: &FeaturizedBundle, b: &FeaturizedBundle) -> Result<Self, ModelError> {
        let views = cfg.active_views();
        let mut segments = Vec::new();
        let mut kinds = Vec::new();
        let mut tokens = Vec::new();
        let mut n = 0;
        for (frag, bundle) in [a, b].into_iter().enumerate() {
            let mut frag_rows = 0;
            for (vi, &v) in views.iter().enumerate() {
                let g = bundle.view(v);
                segments.push(Segment { frag, view: vi, start: n, len: g.len() });
                kinds.extend(g.kind_recipes());
                tokens.extend(g.token_recipes());
                n += g.len();
                frag_rows += g.len();
            }
            if frag_rows == 0 {
                return Err(ModelError::EmptyGraph);
            }
        }

        let mut adj = Array2::zeros((n, n));
        let mut intra_mask = Array2::from_elem((n, n), f64::NEG_INFINITY);
        let mut cross_mask = Array2::from_elem((n, n), f64::NEG_INFINITY);
        let mut pool_mask = Array2::from_elem((2, n), f64::NEG_INFINITY);
        for sa in &segments {
            let rows = sa.start..sa.start + sa.len;
            let bundle = if sa.frag == 0 { a } else { b };
            adj.slice_mut(s![rows.clone(), rows.clone()])
                .assign(&bundle.view(views[sa.view]).adj_norm);
            intra_mask.slice_mut(s![rows.clone(), rows.clone()]).fill(0.0);
            pool_mask.slice_mut(s![sa.frag, rows.clone()]).fill(0.0);
            for sb in &segments {
                if sb.frag != sa.frag && sb.view == sa.view {
                    cross_mask
                        .slice_mut(s![rows.clone(), sb.start..sb.start + sb.len])
                        .fill(0.0);
                }
            }
        }
        // A view that is empty on the partner side leaves its rows with
        // nothing to attend to; let them see the whole partner instead.
        for sa in &segments {
            for i in sa.start..sa.start + sa.len {
                if cross_mask.row(i).iter().all(|x| x.is_infinite()) {
                    for sb in segments.iter().filter(|sb| sb.frag != sa.frag) {
                        cross_mask.slice_mut(s![i, sb.start..sb.start + sb.len]).fill(0.0);
                    }
                }
            }
        }
        Ok(PairLayout { kinds, tokens, adj, intra_mask, cross_mask, pool_mask })
    }
}

/// Records the full pair computation on `t` and returns the `1 x 1` cosine
/// score. Dropout draws from `rng` in train mode.
pub fn forward_pair<'a>(
    t: &mut Tape<'a>,
    p: &'a ParameterSet,
    cfg: &ModelConfig,
    a: &FeaturizedBundle,
    b: &FeaturizedBundle,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Var, ModelError> {
    cfg.validate()?;
    let layout = PairLayout::new(cfg, a, b)?;
    let h0 = embed_rows(t, p, cfg, layout.kinds, layout.tokens)?;
    let h_gcn = residual_gcn(t, p, cfg, h0, &layout.adj)?;
    let h_att = if cfg.use_intra_attn {
        intra_masked(t, p, cfg, h_gcn, Some(&layout.intra_mask), mode, rng)?
    } else {
        h_gcn
    };
    let h = if cfg.use_cross_attn {
        let m = cross_masked(t, p, cfg, h_att, &layout.cross_mask)?;
        gru_update(t, p, m, h_att)?
    } else {
        h_att
    };
    let pooled = pool(t, p, cfg, h, Some(&layout.pool_mask), 2)?;
    let h1 = t.slice_rows(pooled, 0, 1)?;
    let h2 = t.slice_rows(pooled, 1, 2)?;
    similarity(t, h1, h2)
}

/// Eval-mode score of one pair.
pub fn score_pair(
    p: &ParameterSet,
    cfg: &ModelConfig,
    a: &FeaturizedBundle,
    b: &FeaturizedBundle,
) -> Result<f64, ModelError> {
    let mut t = Tape::new();
    let s = forward_pair(&mut t, p, cfg, a, b, Mode::Eval, &mut Rng::new(0))?;
    Ok(t.scalar(s))
}
