//! Capacity expressions for ReLU networks.
//!
//! Both functions evaluate the asymptotic expressions with every hidden
//! constant set to 1. The results are "capacity expression" values useful
//! for comparing architectures, not certified bounds.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

/// `w·l·ln(w) + w·l²` for `w` weights in `l` layers. Zero weights give 0.
pub fn vc_bound(w: u64, l: u64) -> f64 {
    if w == 0 {
        return 0.0;
    }
    let (w, l) = (w as f64, l as f64);
    w * l * w.ln() + w * l * l
}

/// Inputs of the fat-shattering expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatParams {
    /// Sup-norm bound on inputs.
    pub b: f64,
    /// Per-layer L1 weight bound.
    pub a: f64,
    pub c: f64,
    /// Layer count.
    pub l: u32,
    /// Margin.
    pub lambda: f64,
}

/// `B²·(cA)^{l(l+1)} / λ^{2(l−1)}`.
pub fn fat_shattering_bound(p: &FatParams) -> Result<f64> {
    if !(p.lambda > 0.0) {
        return Err(param_err!("margin lambda must be > 0, got {}", p.lambda));
    }
    if !(p.b > 0.0 && p.a > 0.0 && p.c > 0.0) || p.l == 0 {
        return Err(param_err!(
            "B, A, c and l must be positive (B={}, A={}, c={}, l={})",
            p.b,
            p.a,
            p.c,
            p.l
        ));
    }
    let l = p.l as f64;
    let num = p.b * p.b * (p.c * p.a).powf(l * (l + 1.0));
    Ok(num / p.lambda.powf(2.0 * (l - 1.0)))
}
