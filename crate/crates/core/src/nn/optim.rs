use super::{Gradients, ModelState, NetError, TrainConfig};

/// First and second moment estimates, flattened in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(state: &ModelState) -> Self {
        let n = state.trainable().map(|t| t.len()).sum();
        Self { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// One bias-corrected Adam update at step `t >= 1`. Bumps the state version.
pub fn adam_step(
    state: &mut ModelState,
    grads: &Gradients,
    opt: &mut AdamState,
    t: u64,
    cfg: &TrainConfig,
) -> Result<(), NetError> {
    if t == 0 {
        return Err(NetError::InvalidConfig("adam step count starts at 1".into()));
    }
    let total: usize = grads.iter().map(|g| g.len()).sum();
    if total != opt.m.len() || grads.layers.len() != state.layers.len() {
        return Err(NetError::ShapeMismatch(format!(
            "{total} gradient values for {} parameters",
            opt.m.len()
        )));
    }
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    let mut k = 0;
    for (layer, layer_grads) in state.layers.iter_mut().zip(&grads.layers) {
        for (param, grad) in layer.trainable_mut().into_iter().zip(layer_grads) {
            if param.shape() != grad.shape() {
                return Err(NetError::ShapeMismatch(format!(
                    "gradient {:?} for parameter {:?}",
                    grad.shape(),
                    param.shape()
                )));
            }
            for (p, &g) in param.values_mut().iter_mut().zip(grad.values()) {
                opt.m[k] = b1 * opt.m[k] + (1.0 - b1) * g;
                opt.v[k] = b2 * opt.v[k] + (1.0 - b2) * g * g;
                let m_hat = opt.m[k] / c1;
                let v_hat = opt.v[k] / c2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
                k += 1;
            }
        }
    }
    state.version += 1;
    Ok(())
}
