use super::{NetError, Tensor};

/// Logistic function without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(sigmoid(z))`.
pub fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

/// Logit signed towards the true class, so that `p_t = sigmoid(s)`.
fn signed(z: f64, y: u8) -> f64 {
    if y == 1 {
        z
    } else {
        -z
    }
}

pub fn bce_per_sample(logit: f64, label: u8) -> f64 {
    softplus(-signed(logit, label))
}

/// `-alpha_t (1 - p_t)^gamma ln(p_t)` with `alpha_t = alpha` for positives and `1 - alpha` otherwise.
pub fn focal_per_sample(logit: f64, label: u8, alpha: f64, gamma: f64) -> f64 {
    let s = signed(logit, label);
    let alpha_t = if label == 1 { alpha } else { 1.0 - alpha };
    alpha_t * sigmoid(-s).powf(gamma) * softplus(-s)
}

fn check(logits: &Tensor, labels: &[u8]) -> Result<(), NetError> {
    if logits.shape() != [labels.len(), 1] {
        return Err(NetError::ShapeMismatch(format!(
            "logits {:?} for {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(NetError::ShapeMismatch("empty batch".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy and its gradient with respect to the logits.
pub fn bce_loss(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor), NetError> {
    check(logits, labels)?;
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(labels.len());
    for (&z, &y) in logits.values().iter().zip(labels) {
        total += bce_per_sample(z, y);
        grad.push((sigmoid(z) - f64::from(y)) / n);
    }
    Ok((total / n, Tensor::new(vec![labels.len(), 1], grad)))
}

/// Mean focal loss and its gradient with respect to the logits.
pub fn focal_loss(logits: &Tensor, labels: &[u8], alpha: f64, gamma: f64) -> Result<(f64, Tensor), NetError> {
    check(logits, labels)?;
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(labels.len());
    for (&z, &y) in logits.values().iter().zip(labels) {
        let s = signed(z, y);
        let alpha_t = if y == 1 { alpha } else { 1.0 - alpha };
        let (p_t, q) = (sigmoid(s), sigmoid(-s));
        let nll = softplus(-s);
        let qg = q.powf(gamma);
        total += alpha_t * qg * nll;
        let d_ds = alpha_t * qg * (-gamma * p_t * nll - q);
        grad.push(if y == 1 { d_ds } else { -d_ds } / n);
    }
    Ok((total / n, Tensor::new(vec![labels.len(), 1], grad)))
}
