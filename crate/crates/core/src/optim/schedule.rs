use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Fixed,
    Exponential,
    Step,
    Inverse,
    Poly,
    Sigmoid,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Fixed,
        PolicyKind::Exponential,
        PolicyKind::Step,
        PolicyKind::Inverse,
        PolicyKind::Poly,
        PolicyKind::Sigmoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Fixed => "fixed",
            PolicyKind::Exponential => "exponential",
            PolicyKind::Step => "step",
            PolicyKind::Inverse => "inverse",
            PolicyKind::Poly => "poly",
            PolicyKind::Sigmoid => "sigmoid",
        }
    }
}

/// Learning-rate schedule over iterations.
///
/// | kind        | rate                                   |
/// |-------------|----------------------------------------|
/// | fixed       | `c`                                    |
/// | exponential | `λ₀·γ^iter`                            |
/// | step        | `λ₀·γ^floor(iter/step)`                |
/// | inverse     | `λ₀·(1 + γ·iter)^(−c)`                 |
/// | poly        | `λ₀·(1 − iter/max_iter)^c`             |
/// | sigmoid     | `λ₀ / (1 + exp(−γ + (iter − step)))`   |
///
/// The sigmoid exponent is grouped exactly as written above; a centred
/// logistic decay would use `−γ·(iter − step)` instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPolicy {
    pub kind: PolicyKind,
    pub lambda0: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub c: f64,
    /// 0 means "derive from the run length", see [`DecayPolicy::resolve`].
    #[serde(default)]
    pub step: u64,
    /// 0 means "derive from the run length".
    #[serde(default)]
    pub max_iter: u64,
}

impl DecayPolicy {
    fn base(kind: PolicyKind, lambda0: f64) -> Self {
        Self {
            kind,
            lambda0,
            gamma: 0.0,
            c: 0.0,
            step: 0,
            max_iter: 0,
        }
    }

    pub fn fixed(c: f64) -> Self {
        Self {
            c,
            ..Self::base(PolicyKind::Fixed, c)
        }
    }

    pub fn exponential(lambda0: f64, gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::base(PolicyKind::Exponential, lambda0)
        }
    }

    pub fn step(lambda0: f64, gamma: f64, step: u64) -> Self {
        Self {
            gamma,
            step,
            ..Self::base(PolicyKind::Step, lambda0)
        }
    }

    pub fn inverse(lambda0: f64, gamma: f64, c: f64) -> Self {
        Self {
            gamma,
            c,
            ..Self::base(PolicyKind::Inverse, lambda0)
        }
    }

    pub fn poly(lambda0: f64, c: f64, max_iter: u64) -> Self {
        Self {
            c,
            max_iter,
            ..Self::base(PolicyKind::Poly, lambda0)
        }
    }

    pub fn sigmoid(lambda0: f64, gamma: f64, step: u64) -> Self {
        Self {
            gamma,
            step,
            ..Self::base(PolicyKind::Sigmoid, lambda0)
        }
    }

    /// Fills unset (zero) `max_iter` with `total_iters`, and an unset
    /// `step` with a third of the run (step policy) or half of it (sigmoid).
    pub fn resolve(mut self, total_iters: u64) -> Self {
        let total = total_iters.max(1);
        if self.max_iter == 0 {
            self.max_iter = total;
        }
        if self.step == 0 {
            self.step = match self.kind {
                PolicyKind::Sigmoid => (total / 2).max(1),
                _ => (total / 3).max(1),
            };
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == PolicyKind::Fixed {
            if !(self.c > 0.0) {
                return Err(param_err!("fixed policy needs c > 0, got {}", self.c));
            }
        } else if !(self.lambda0 > 0.0) || !self.lambda0.is_finite() {
            return Err(param_err!("lambda0 must be > 0, got {}", self.lambda0));
        }
        if !self.gamma.is_finite() || !self.c.is_finite() {
            return Err(param_err!("gamma and c must be finite"));
        }
        match self.kind {
            PolicyKind::Step if self.step == 0 => Err(param_err!("step policy needs step >= 1")),
            PolicyKind::Poly if self.max_iter == 0 => {
                Err(param_err!("poly policy needs max_iter >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// Rate at iteration `iter`. Poly past `max_iter` is clamped to 0.
    pub fn lr_at(&self, iter: u64) -> f64 {
        let (l0, g, c) = (self.lambda0, self.gamma, self.c);
        let it = iter as f64;
        match self.kind {
            PolicyKind::Fixed => c,
            PolicyKind::Exponential => l0 * g.powf(it),
            PolicyKind::Step => l0 * g.powf((iter / self.step.max(1)) as f64),
            PolicyKind::Inverse => l0 * (1.0 + g * it).powf(-c),
            PolicyKind::Poly => {
                if iter > self.max_iter {
                    log::warn!(
                        "poly schedule queried at iteration {iter} past max_iter {}; using 0",
                        self.max_iter
                    );
                    return 0.0;
                }
                l0 * (1.0 - it / self.max_iter as f64).powf(c)
            }
            PolicyKind::Sigmoid => l0 / (1.0 + (-g + (it - self.step as f64)).exp()),
        }
    }
}
