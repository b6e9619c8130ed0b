use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    adam_step, bce_loss, dataset_tensor, focal_loss, init_model, AdamState, ForwardMode, ModelSpec, ModelState,
    NetError,
};
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Focal,
    Bce,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Focal => "focal",
            Self::Bce => "bce",
        })
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "focal" => Ok(Self::Focal),
            "bce" => Ok(Self::Bce),
            other => Err(format!("unknown loss {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub loss: LossKind,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 2000,
            loss: LossKind::Focal,
            focal_alpha: 0.25,
            focal_gamma: 2.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.focal_gamma >= 0.0 && self.focal_gamma.is_finite()) {
            return bad("focal gamma must be >= 0");
        }
        if !(self.focal_alpha > 0.0 && self.focal_alpha <= 1.0) {
            return bad("focal alpha must be in (0, 1]");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("adam betas must be in [0, 1)");
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad("adam epsilon must be positive");
        }
        Ok(())
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Full-batch training. `seed` drives initialization and the dropout masks.
pub fn train(
    spec: &ModelSpec,
    train_set: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelState, Vec<f64>), NetError> {
    cfg.validate()?;
    if train_set.n_features() != spec.input_width() {
        return Err(NetError::ShapeMismatch(format!(
            "model expects {} features, dataset has {}",
            spec.input_width(),
            train_set.n_features()
        )));
    }
    let mut state = init_model(spec, seed);
    let mut opt = AdamState::new(&state);
    let batch = dataset_tensor(train_set);
    let labels = train_set.labels();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mask_seed = splitmix(seed ^ epoch as u64);
        let (logits, cache) = match state.forward(&batch, ForwardMode::Train { mask_seed }) {
            Ok(v) => v,
            Err(NetError::NonFinite(_)) => return Err(NetError::NonFiniteLoss { epoch }),
            Err(e) => return Err(e),
        };
        let (loss, dlogits) = match cfg.loss {
            LossKind::Focal => focal_loss(&logits, labels, cfg.focal_alpha, cfg.focal_gamma)?,
            LossKind::Bce => bce_loss(&logits, labels)?,
        };
        if !loss.is_finite() {
            return Err(NetError::NonFiniteLoss { epoch });
        }
        history.push(loss);
        let grads = state.backward(&cache, &dlogits)?;
        if grads.iter().any(|g| !g.all_finite()) {
            return Err(NetError::NonFiniteLoss { epoch });
        }
        state.update_running_stats(&cache);
        adam_step(&mut state, &grads, &mut opt, epoch as u64 + 1, cfg)?;
    }
    log::debug!("trained {} for {} epochs, final loss {:?}", spec.kind(), cfg.epochs, history.last());
    Ok((state, history))
}
