use super::{NumError, ParamStore, Result};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max relative error over all coordinates.
    pub max_rel_error: f64,
    /// Per-parameter max relative error, in flat-view order.
    pub per_param: Vec<(String, f64)>,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Check analytic gradients against central finite differences.
///
/// `params` must already carry the analytic gradient of `f` in its
/// gradient buffers (run the model's forward + backward first). `f` is
/// then re-evaluated at `theta +/- eps` per coordinate; the relative
/// error at a coordinate is
///
/// ```text
/// |analytic - numeric| / max(1, |analytic|, |numeric|)
/// ```
///
/// `f` must be deterministic, and `eps` must lie in `[1e-6, 1e-3]`.
pub fn grad_check<F>(mut f: F, params: &mut ParamStore, eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(NumError::Invalid(format!(
            "grad_check eps must lie in [1e-6, 1e-3], got {eps}"
        )));
    }
    let analytic = params.flat_grads();
    let n = params.flat_len();
    let mut per_param: Vec<(String, f64)> = Vec::with_capacity(params.len());
    let mut max_rel = 0.0f64;
    let mut flat = 0usize;
    let sizes: Vec<(String, usize)> = params
        .iter()
        .map(|(name, v, _)| (name.to_string(), v.len()))
        .collect();
    for (name, size) in sizes {
        let mut param_max = 0.0f64;
        for _ in 0..size {
            let old = params.nudge(flat, eps)?;
            let plus = f(params)?;
            params.set_coord(flat, old - eps)?;
            let minus = f(params)?;
            params.set_coord(flat, old)?;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NumError::NonFinite("grad_check loss evaluation"));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[flat];
            let rel = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
            param_max = param_max.max(rel);
            flat += 1;
        }
        max_rel = max_rel.max(param_max);
        per_param.push((name, param_max));
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        per_param,
        coords_checked: n,
    })
}
