use crate::numcore::{ParameterSet, Rng};

use super::{ModelConfig, ModelError, Pooling};

const EMBED_STD: f64 = 0.02;

fn layer_norm(p: &mut ParameterSet, prefix: &str, d: usize) -> Result<(), ModelError> {
    p.insert_const(&format!("{prefix}.gain"), 1, d, 1.0)?;
    p.insert_const(&format!("{prefix}.bias"), 1, d, 0.0)?;
    Ok(())
}

fn attention(
    p: &mut ParameterSet,
    prefix: &str,
    cfg: &ModelConfig,
    rng: &mut Rng,
) -> Result<(), ModelError> {
    let (d, w) = (cfg.d, cfg.attn_width());
    for m in ["wq", "wk", "wv"] {
        p.insert_uniform(&format!("{prefix}.{m}"), d, w, rng)?;
    }
    p.insert_uniform(&format!("{prefix}.wo"), w, d, rng)?;
    Ok(())
}

fn ffn(p: &mut ParameterSet, prefix: &str, cfg: &ModelConfig, rng: &mut Rng) -> Result<(), ModelError> {
    let (d, inner) = (cfg.d, cfg.d * cfg.ffn_mult);
    p.insert_uniform(&format!("{prefix}.w1"), d, inner, rng)?;
    p.insert_const(&format!("{prefix}.b1"), 1, inner, 0.0)?;
    p.insert_uniform(&format!("{prefix}.w2"), inner, d, rng)?;
    p.insert_const(&format!("{prefix}.b2"), 1, d, 0.0)?;
    Ok(())
}

/// Fresh parameters for `cfg`. Only parameters reachable under the enabled
/// flags are created. Weight matrices are uniform in `+-1/sqrt(fan_in)`,
/// embeddings normal with std 0.02, biases zero, layer-norm gains one.
pub fn init_params(
    cfg: &ModelConfig,
    kind_rows: usize,
    token_buckets: usize,
    seed: u64,
) -> Result<ParameterSet, ModelError> {
    cfg.validate()?;
    let d = cfg.d;
    let mut rng = Rng::derived(seed, &[0x1417]);
    let mut p = ParameterSet::new();
    p.insert_normal("embed.kind", kind_rows, d, EMBED_STD, &mut rng)?;
    if cfg.use_tokens {
        p.insert_normal("embed.token", token_buckets, d, EMBED_STD, &mut rng)?;
    }
    for l in 0..cfg.layers {
        p.insert_uniform(&format!("gcn.{l}.weight"), d, d, &mut rng)?;
    }
    if cfg.use_intra_attn {
        layer_norm(&mut p, "intra.ln1", d)?;
        attention(&mut p, "intra", cfg, &mut rng)?;
        layer_norm(&mut p, "intra.ln2", d)?;
        ffn(&mut p, "intra.ffn", cfg, &mut rng)?;
    }
    if cfg.use_cross_attn {
        layer_norm(&mut p, "cross.ln_in", d)?;
        attention(&mut p, "cross", cfg, &mut rng)?;
        layer_norm(&mut p, "cross.ln_out", d)?;
        ffn(&mut p, "cross.ffn", cfg, &mut rng)?;
        for g in ["z", "r", "h"] {
            p.insert_uniform(&format!("gru.w_{g}"), d, d, &mut rng)?;
            p.insert_uniform(&format!("gru.u_{g}"), d, d, &mut rng)?;
            p.insert_const(&format!("gru.b_{g}"), 1, d, 0.0)?;
        }
    }
    match cfg.pooling {
        Pooling::Set2Set => {
            p.insert_uniform("set2set.w_ih", 2 * d, 4 * d, &mut rng)?;
            p.insert_uniform("set2set.w_hh", d, 4 * d, &mut rng)?;
            p.insert_const("set2set.bias", 1, 4 * d, 0.0)?;
        }
        Pooling::GlobalAttn => p.insert_uniform("readout.query", d, 1, &mut rng)?,
        Pooling::Mean => {}
    }
    Ok(p)
}
