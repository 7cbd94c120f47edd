use super::Tensor;
use crate::error::{param_err, Result};

/// Denominator floor of the relative error, so that entries whose true
/// gradient is ~0 are judged on absolute error.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the entry with the largest relative error.
    pub worst_index: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` against central finite differences of the scalar
/// function `f` at `point`, with step `h`:
/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h`.
///
/// Relative error per entry is `|a − n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn grad_check<F>(
    mut f: F,
    point: &Tensor<f64>,
    analytic: &Tensor<f64>,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&Tensor<f64>) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(param_err!("finite-difference step must be > 0"));
    }
    point.expect_shape(analytic.shape())?;
    let mut probe = point.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        tolerance,
        passed: true,
    };
    for i in 0..point.len() {
        let x0 = point.data()[i];
        probe.data_mut()[i] = x0 + h;
        let up = f(&probe)?;
        probe.data_mut()[i] = x0 - h;
        let down = f(&probe)?;
        probe.data_mut()[i] = x0;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.data()[i];
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
        report.checked += 1;
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    Ok(report)
}
