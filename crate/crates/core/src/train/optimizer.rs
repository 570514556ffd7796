//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncoderParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWSettings {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamWSettings {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamWSettings {
    /// Settings for the small desk-scale model: same as the default with a
    /// larger step, since it trains for only a few hundred updates.
    pub fn tiny() -> Self {
        Self {
            learning_rate: 1e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be nonnegative".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config("epsilon must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Moment estimates for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState {
    pub step: u64,
    m: EncoderParams,
    v: EncoderParams,
}

impl AdamWState {
    pub fn new(params: &EncoderParams) -> Self {
        Self {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One update. Decay shrinks each weight by `lr * weight_decay` independently
/// of the adaptive step.
pub fn optimizer_step(
    params: &mut EncoderParams,
    grads: &EncoderParams,
    state: &mut AdamWState,
    s: &AdamWSettings,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::shape("gradients", params.len(), grads.len()));
    }
    for ((name, p), g) in params.iter().zip(grads.tensors()) {
        if p.shape() != g.shape() {
            return Err(Error::shape(
                format!("gradient of {name}"),
                format!("{}x{}", p.rows(), p.cols()),
                format!("{}x{}", g.rows(), g.cols()),
            ));
        }
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NanGradient { param: name.to_string() });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - s.beta1.powi(t);
    let c2 = 1.0 - s.beta2.powi(t);
    let tensors = params.tensors_mut().iter_mut();
    let m = state.m.tensors_mut().iter_mut();
    let v = state.v.tensors_mut().iter_mut();
    for (((p, g), m), v) in tensors.zip(grads.tensors()).zip(m).zip(v) {
        let p = p.as_mut_slice();
        let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
        for i in 0..p.len() {
            let gi = g.as_slice()[i];
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * gi;
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= s.learning_rate * s.weight_decay * p[i];
            p[i] -= s.learning_rate * m_hat / (v_hat.sqrt() + s.epsilon);
        }
    }
    Ok(())
}
