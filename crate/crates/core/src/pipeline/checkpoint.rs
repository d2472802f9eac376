//! On-disk model: the tensor container with a JSON header carrying the
//! model configuration, vocabulary, seed, best validation loss and the
//! tuned decision threshold.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::featurize::Vocab;
use crate::model::{init_params, ModelConfig};
use crate::numcore::serial::{read_container, write_container};
use crate::numcore::ParameterSet;

use super::PipelineError;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub vocab: Vocab,
    pub params: ParameterSet,
    pub seed: u64,
    /// `None` when training ran without a validation split.
    pub best_val_loss: Option<f64>,
    pub sigma: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model: ModelConfig,
    vocab: Vocab,
    seed: u64,
    best_val_loss: Option<f64>,
    sigma: f64,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), PipelineError> {
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            model: self.model.clone(),
            vocab: self.vocab.clone(),
            seed: self.seed,
            best_val_loss: self.best_val_loss,
            sigma: self.sigma,
        };
        let json = serde_json::to_vec(&header).map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
        write_container(w, CHECKPOINT_VERSION, &json, &self.params)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, PipelineError> {
        let (json, params) = read_container(r, CHECKPOINT_VERSION)?;
        let h: Header =
            serde_json::from_slice(&json).map_err(|e| PipelineError::Checkpoint(e.to_string()))?;
        if h.format_version != CHECKPOINT_VERSION {
            return Err(PipelineError::Checkpoint(format!(
                "header version {} does not match container version {CHECKPOINT_VERSION}",
                h.format_version
            )));
        }
        h.model.validate()?;
        let expected = init_params(&h.model, h.vocab.kind_rows(), h.vocab.token_bucket_count, 0)?;
        let names: Vec<&str> = params.names().collect();
        if names != expected.names().collect::<Vec<_>>() {
            return Err(PipelineError::Checkpoint(format!(
                "tensor set does not match the model configuration: found {names:?}"
            )));
        }
        for (name, t) in expected.iter() {
            let found = params.get(name)?.shape();
            if found != t.shape() {
                return Err(PipelineError::Checkpoint(format!(
                    "{name} has shape {found:?}, configuration implies {:?}",
                    t.shape()
                )));
            }
        }
        Ok(Checkpoint {
            model: h.model,
            vocab: h.vocab,
            params,
            seed: h.seed,
            best_val_loss: h.best_val_loss,
            sigma: h.sigma,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, PipelineError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let f = File::create(path).map_err(|e| PipelineError::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| PipelineError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let f = File::open(path).map_err(|e| PipelineError::io(path, e))?;
        Self::read_from(&mut BufReader::new(f))
    }
}
