use crate::error::{Error, Result};
use crate::numerics::{Grads, ParamStore, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Added to the gradient as `l2 · θ` before the update.
    pub l2: f64,
}

impl AdamParams {
    pub fn new(lr: f64, l2: f64) -> Self {
        AdamParams { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, l2 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros = || params.iter().map(|(_, p)| vec![T::zero(); p.len()]).collect();
        AdamState { m: zeros(), v: zeros(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update in place. Parameters without a gradient
/// slot are treated as having a zero data gradient.
pub fn adam_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &Grads<T>,
    state: &mut AdamState<T>,
    hp: &AdamParams,
) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::Shape(format!("optimizer state has {} tensors, model has {}", state.m.len(), params.len())));
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - hp.beta1.powf(t);
    let bc2 = 1.0 - hp.beta2.powf(t);
    let (b1, b2) = (T::from_f64(hp.beta1), T::from_f64(hp.beta2));
    let (one, l2, eps) = (T::one(), T::from_f64(hp.l2), T::from_f64(hp.eps));
    let (lr_c, bc2_sqrt) = (T::from_f64(hp.lr / bc1), T::from_f64(bc2.sqrt()));
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let g = grads.get(id);
        let p = params.get_mut(id);
        let (m, v) = (&mut state.m[id.0], &mut state.v[id.0]);
        if m.len() != p.len() || g.is_some_and(|g| g.len() != p.len()) {
            return Err(Error::Shape(format!("gradient/state size mismatch for tensor {}", id.0)));
        }
        for (j, th) in p.data_mut().iter_mut().enumerate() {
            let gj = g.map_or(T::zero(), |g| g[j]) + l2 * *th;
            m[j] = b1 * m[j] + (one - b1) * gj;
            v[j] = b2 * v[j] + (one - b2) * gj * gj;
            // lr·m̂ / (sqrt(v̂) + eps) with the bias corrections folded in.
            *th -= lr_c * m[j] / (v[j].sqrt() / bc2_sqrt + eps);
        }
    }
    Ok(())
}
