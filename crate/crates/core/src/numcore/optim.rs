use serde::{Deserialize, Serialize};

use super::tensor::ParameterSet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every parameter holding a gradient,
/// then clears all gradients. Parameters without a gradient keep their
/// moments and step count untouched.
pub fn adam_step(params: &mut ParameterSet, lr: f64, cfg: AdamConfig) {
    let names: Vec<String> = params
        .iter()
        .filter(|(_, t)| t.grad.is_some())
        .map(|(n, _)| n.to_string())
        .collect();
    for name in &names {
        params.adam_state_mut(name);
    }
    let (tensors, states) = params.split_for_update();
    for name in &names {
        let t = tensors.get_mut(name).expect("name collected above");
        let st = states.get_mut(name).expect("state created above");
        let g = t.grad.take().expect("filtered on grad presence");
        st.step += 1;
        let b1t = 1.0 - cfg.beta1.powi(st.step as i32);
        let b2t = 1.0 - cfg.beta2.powi(st.step as i32);
        ndarray::Zip::from(&mut t.data)
            .and(&mut st.m)
            .and(&mut st.v)
            .and(&g)
            .for_each(|p, m, v, &g| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let mhat = *m / b1t;
                let vhat = *v / b2t;
                *p -= lr * mhat / (vhat.sqrt() + cfg.eps);
            });
    }
    params.zero_grads();
}

/// Reduce-on-plateau learning-rate schedule: after more than `patience`
/// consecutive epochs without a strict improvement of the monitored loss,
/// the rate is multiplied by `factor` and the bad-epoch counter resets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub best: f64,
    pub bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Self {
        PlateauScheduler {
            lr,
            factor,
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs > self.patience {
                self.lr *= self.factor;
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}
