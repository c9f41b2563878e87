//! Central finite-difference verification of tape gradients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub eps: f64,
    /// Maximum tolerated relative error per entry.
    pub tol: f64,
    /// Denominator floor for the relative error, so entries whose true
    /// gradient is ~0 are judged on absolute error. Central differences of
    /// a 64-bit loss L carry round-off near `ulp(L) / eps`, about 1e-10 at
    /// the default step, which this floor keeps below `tol`.
    pub abs_floor: f64,
    /// Check at most this many (evenly spaced) entries per tensor.
    pub max_entries_per_tensor: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { eps: 1e-5, tol: 1e-4, abs_floor: 1e-5, max_entries_per_tensor: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tol: f64,
    pub loss: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failed_tensors(&self) -> Vec<&str> {
        self.tensors.iter().filter(|t| !t.passed).map(|t| t.name.as_str()).collect()
    }
}

pub fn relative_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs().max(numeric.abs()).max(abs_floor))
}

/// Compares tape gradients of `model_fn` against central differences for
/// every parameter tensor in `params`.
///
/// `model_fn` records a scalar loss on the tape it is given. It must be a
/// pure function of the parameters: the loss is evaluated twice up front
/// and any difference (dropout left enabled, say) is rejected.
pub fn grad_check<F>(params: &ParamStore<f64>, model_fn: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>) -> Result<Var>,
{
    if !(opts.eps > 0.0 && opts.tol > 0.0) {
        return Err(Error::InvalidArgument("grad_check eps and tol must be positive".into()));
    }
    let eval = |p: &ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new(p);
        let loss = model_fn(&mut tape)?;
        Ok(tape.scalar(loss))
    };

    let (loss, grads) = {
        let mut tape = Tape::new(params);
        let loss = model_fn(&mut tape)?;
        (tape.scalar(loss), tape.backward(loss)?)
    };
    let again = eval(params)?;
    if loss.to_bits() != again.to_bits() {
        return Err(Error::GradCheck(format!(
            "model function is not deterministic ({loss} vs {again}); disable dropout"
        )));
    }

    let mut work = params.clone();
    let mut tensors = Vec::with_capacity(params.len());
    for id in params.ids() {
        let n = params.get(id).len();
        let analytic = grads.get(id);
        let stride = match opts.max_entries_per_tensor {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        let mut max_rel: f64 = 0.0;
        let mut checked = 0;
        for j in (0..n).step_by(stride) {
            let orig = work.get(id).data()[j];
            work.get_mut(id).data_mut()[j] = orig + opts.eps;
            let up = eval(&work)?;
            work.get_mut(id).data_mut()[j] = orig - opts.eps;
            let down = eval(&work)?;
            work.get_mut(id).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * opts.eps);
            let a = analytic.map_or(0.0, |g| g[j]);
            max_rel = max_rel.max(relative_error(a, numeric, opts.abs_floor));
            checked += 1;
        }
        tensors.push(TensorCheck {
            name: params.name(id).to_string(),
            checked,
            max_rel_error: max_rel,
            passed: max_rel < opts.tol,
        });
    }
    Ok(GradCheckReport { tol: opts.tol, loss, tensors })
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;
    use crate::numerics::{rng_stream, xavier_init, Tensor};

    #[test]
    fn linear_model_is_exact() {
        let mut s = ParamStore::new(0);
        let w = s.insert("w", Tensor::new(vec![1, 3], vec![0.2, -0.4, 1.3]).unwrap()).unwrap();
        let report = grad_check(
            &s,
            |t| {
                let wv = t.param(w);
                let x = t.row(vec![0.5, 2.0, -1.0]);
                let p = t.mul(wv, x);
                Ok(t.sum(p))
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.max_rel_error() < 1e-10, "{}", report.max_rel_error());
    }

    fn two_branch_store() -> ParamStore<f64> {
        let mut rng = rng_stream(5, 0);
        let mut s = ParamStore::new(5);
        s.insert("tanh_branch", xavier_init(4, 3, &mut rng).unwrap()).unwrap();
        s.insert("sigmoid_branch", xavier_init(4, 3, &mut rng).unwrap()).unwrap();
        s.insert("ln_gain", Tensor::filled(vec![4], 1.0)).unwrap();
        s.insert("ln_bias", Tensor::zeros(vec![4])).unwrap();
        s
    }

    fn two_branch_loss(t: &mut Tape<f64>) -> Result<Var> {
        let p = t.params();
        let (a, b) = (p.id("tanh_branch").unwrap(), p.id("sigmoid_branch").unwrap());
        let (lg, lb) = (p.id("ln_gain").unwrap(), p.id("ln_bias").unwrap());
        let x = t.constant(2, 3, vec![0.3, -0.8, 1.1, 0.5, 0.2, -0.4]);
        let wa = t.param(a);
        let wb = t.param(b);
        let ha = t.linear(x, wa);
        let ha = t.tanh(ha);
        let hb = t.linear(x, wb);
        let hb = t.sigmoid(hb);
        let (g, bias) = (t.param(lg), t.param(lb));
        let hb = t.layer_norm(hb, g, bias, 1e-5);
        let h = t.add(ha, hb);
        let m = t.mean_rows(h);
        t.softmax_xent(m, 2)
    }

    #[test]
    fn mixed_primitives_pass() {
        let report = grad_check(&two_branch_store(), two_branch_loss, GradCheckOptions::default()).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn corrupted_tanh_backward_flags_exactly_the_affected_tensor() {
        let s = two_branch_store();
        let report = grad_check(
            &s,
            |t| {
                t.tanh_backward_fault = Some(1.5);
                two_branch_loss(t)
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.failed_tensors(), vec!["tanh_branch"]);
    }

    #[test]
    fn nondeterministic_function_rejected() {
        let s = two_branch_store();
        let calls = Cell::new(0u32);
        let err = grad_check(
            &s,
            |t| {
                calls.set(calls.get() + 1);
                let l = two_branch_loss(t)?;
                Ok(t.scale(l, 1.0 + calls.get() as f64 * 1e-3))
            },
            GradCheckOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::GradCheck(_)));
    }
}
