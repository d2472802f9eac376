//! Ablation runs: each variant is trained with the same seed and split and
//! evaluated on the test split at its own tuned threshold.

use serde::{Deserialize, Serialize};

use crate::frontend::View;
use crate::model::{ModelConfig, Pooling};

use super::{evaluate, train, Dataset, Metrics, PipelineError, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct AblationVariant {
    pub name: String,
    pub config: ModelConfig,
}

/// Levels to vary. View subsets are run with the base components; the
/// component factorial over residual, intra and cross attention is run with
/// the base views and base pooling, and every other pooling level once with
/// the base components.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationGrid {
    pub view_subsets: Vec<Vec<View>>,
    pub residual: Vec<bool>,
    pub intra_attn: Vec<bool>,
    pub cross_attn: Vec<bool>,
    pub pooling: Vec<Pooling>,
}

fn view_label(views: &[View]) -> String {
    views.iter().map(|v| v.as_str()).collect::<Vec<_>>().join("+")
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl AblationGrid {
    /// Every non-empty view subset, both levels of each component flag and
    /// all pooling strategies.
    pub fn full() -> Self {
        let mut view_subsets = Vec::new();
        for mask in 1u8..8 {
            let vs: Vec<View> = View::ALL
                .into_iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| v)
                .collect();
            view_subsets.push(vs);
        }
        view_subsets.sort_by_key(|v| std::cmp::Reverse(v.len()));
        AblationGrid {
            view_subsets,
            residual: vec![true, false],
            intra_attn: vec![true, false],
            cross_attn: vec![true, false],
            pooling: vec![Pooling::Set2Set, Pooling::Mean, Pooling::GlobalAttn],
        }
    }

    /// Just the base configuration.
    pub fn single(base: &ModelConfig) -> Self {
        AblationGrid {
            view_subsets: vec![base.active_views()],
            residual: vec![base.use_residual],
            intra_attn: vec![base.use_intra_attn],
            cross_attn: vec![base.use_cross_attn],
            pooling: vec![base.pooling],
        }
    }

    /// Distinct configurations in run order: view rows, component rows,
    /// then pooling rows.
    pub fn variants(&self, base: &ModelConfig) -> Vec<AblationVariant> {
        let mut out: Vec<AblationVariant> = Vec::new();
        let mut push = |config: ModelConfig| {
            if out.iter().any(|v| v.config == config) {
                return;
            }
            let name = format!(
                "views={} residual={} intra={} cross={} pooling={}",
                view_label(&config.active_views()),
                on_off(config.use_residual),
                on_off(config.use_intra_attn),
                on_off(config.use_cross_attn),
                config.pooling.as_str()
            );
            out.push(AblationVariant { name, config });
        };
        for vs in &self.view_subsets {
            push(ModelConfig { views: vs.clone(), ..base.clone() });
        }
        for &r in &self.residual {
            for &i in &self.intra_attn {
                for &c in &self.cross_attn {
                    push(ModelConfig {
                        use_residual: r,
                        use_intra_attn: i,
                        use_cross_attn: c,
                        ..base.clone()
                    });
                }
            }
        }
        for &p in &self.pooling {
            push(ModelConfig { pooling: p, ..base.clone() });
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub views: String,
    pub use_residual: bool,
    pub use_intra_attn: bool,
    pub use_cross_attn: bool,
    pub pooling: Pooling,
    pub metrics: Metrics,
}

impl AblationRow {
    pub const CSV_HEADER: &'static str =
        "views,residual,intra,cross,pooling,precision,recall,f1,sigma";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
            self.views,
            on_off(self.use_residual),
            on_off(self.use_intra_attn),
            on_off(self.use_cross_attn),
            self.pooling.as_str(),
            self.metrics.precision,
            self.metrics.recall,
            self.metrics.f1,
            self.metrics.sigma
        )
    }
}

pub fn run_ablation(
    dataset: &Dataset,
    variants: &[AblationVariant],
    cfg: &TrainConfig,
) -> Result<Vec<AblationRow>, PipelineError> {
    let mut rows = Vec::with_capacity(variants.len());
    for v in variants {
        log::info!("ablation variant: {}", v.name);
        let out = train(dataset, &v.config, cfg)?;
        let ck = &out.checkpoint;
        let metrics = evaluate(&ck.params, &ck.model, &ck.vocab, dataset, &out.splits.test, ck.sigma)?;
        rows.push(AblationRow {
            name: v.name.clone(),
            views: view_label(&v.config.active_views()),
            use_residual: v.config.use_residual,
            use_intra_attn: v.config.use_intra_attn,
            use_cross_attn: v.config.use_cross_attn,
            pooling: v.config.pooling,
            metrics,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_rows() {
        let base = ModelConfig::default();
        let vs = AblationGrid::full().variants(&base);
        // 7 view subsets, 7 new component combinations, 2 other poolings
        assert_eq!(vs.len(), 16);
        assert_eq!(vs[0].config, base);
        assert_eq!(vs.iter().filter(|v| v.config.pooling != base.pooling).count(), 2);
    }

    #[test]
    fn single_grid_is_one_row() {
        let base = ModelConfig::default();
        let vs = AblationGrid::single(&base).variants(&base);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].config, base);
    }
}
