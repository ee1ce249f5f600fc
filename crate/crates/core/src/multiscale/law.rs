//! Scalar material laws `chi(t)` of the macroscopic body, with derivative
//! bounds `g'(t) in [gamma, lip]` for `g(t) = t + chi(t) t`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("material parameter `{0}` must be positive and finite")]
    NonPositive(&'static str),
    #[error("linear susceptibility must satisfy chi > -1, got {0}")]
    LinearOutOfRange(f64),
    #[error("g(t) = t + chi(t) t is not strictly increasing: sampled g' reaches {0:e}")]
    NotMonotone(f64),
    #[error("material law evaluated at negative argument {0}")]
    NegativeArgument(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LawKind {
    /// chi = 0 (non-magnetic).
    Zero,
    /// chi constant.
    Linear { chi: f64 },
    /// chi(t) = c1 tanh(c2 t) / t, chi(0) = c1 c2.
    Tanh { c1: f64, c2: f64 },
    /// chi(t) = (c1 + c2 t) / (1 + c3 t + c4 t^2).
    Rational { c1: f64, c2: f64, c3: f64, c4: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialLaw {
    pub kind: LawKind,
    /// Lower bound of g'.
    pub gamma: f64,
    /// Upper bound of g'.
    pub lip: f64,
}

/// Relative safety margin applied to sampled derivative bounds.
const SAMPLING_MARGIN: f64 = 1e-2;

fn positive(v: f64, name: &'static str) -> Result<f64, LawError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(LawError::NonPositive(name))
    }
}

impl MaterialLaw {
    pub fn zero() -> Self {
        Self { kind: LawKind::Zero, gamma: 1.0, lip: 1.0 }
    }

    pub fn linear(chi: f64) -> Result<Self, LawError> {
        if !(chi.is_finite() && chi > -1.0) {
            return Err(LawError::LinearOutOfRange(chi));
        }
        Ok(Self { kind: LawKind::Linear { chi }, gamma: 1.0 + chi, lip: 1.0 + chi })
    }

    pub fn tanh(c1: f64, c2: f64) -> Result<Self, LawError> {
        let c1 = positive(c1, "c1")?;
        let c2 = positive(c2, "c2")?;
        Ok(Self { kind: LawKind::Tanh { c1, c2 }, gamma: 1.0, lip: 1.0 + c1 * c2 })
    }

    /// Rational law; the bounds of `g'` are estimated on a logarithmic grid
    /// of `[0, 1e6]` and widened by a relative margin.
    pub fn rational(c1: f64, c2: f64, c3: f64, c4: f64) -> Result<Self, LawError> {
        let kind = LawKind::Rational {
            c1: positive(c1, "c1")?,
            c2: positive(c2, "c2")?,
            c3: positive(c3, "c3")?,
            c4: positive(c4, "c4")?,
        };
        let mut law = Self { kind, gamma: 0.0, lip: 0.0 };
        let (lo, hi) = law.sample_derivative_range(1e6, 4000);
        if !(lo > 0.0) {
            return Err(LawError::NotMonotone(lo));
        }
        law.gamma = lo * (1.0 - SAMPLING_MARGIN);
        law.lip = hi * (1.0 + SAMPLING_MARGIN);
        Ok(law)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, LawKind::Zero | LawKind::Linear { .. })
    }

    pub fn is_zero(&self) -> bool {
        match self.kind {
            LawKind::Zero => true,
            LawKind::Linear { chi } => chi == 0.0,
            _ => false,
        }
    }

    /// Susceptibility `chi(t)`, `t >= 0`.
    pub fn chi(&self, t: f64) -> f64 {
        match self.kind {
            LawKind::Zero => 0.0,
            LawKind::Linear { chi } => chi,
            LawKind::Tanh { c1, c2 } => {
                let x = c2 * t;
                if x < 1e-4 {
                    c1 * c2 * (1.0 - x * x / 3.0)
                } else {
                    c1 * x.tanh() / t
                }
            }
            LawKind::Rational { c1, c2, c3, c4 } => (c1 + c2 * t) / (1.0 + c3 * t + c4 * t * t),
        }
    }

    /// `g(t) = t + chi(t) t`.
    pub fn g(&self, t: f64) -> Result<f64, LawError> {
        if !(t >= 0.0) {
            return Err(LawError::NegativeArgument(t));
        }
        Ok(t + self.chi(t) * t)
    }

    /// `g'(t)`, evaluated in closed form.
    pub fn g_prime(&self, t: f64) -> f64 {
        match self.kind {
            LawKind::Zero => 1.0,
            LawKind::Linear { chi } => 1.0 + chi,
            LawKind::Tanh { c1, c2 } => {
                let s = 1.0 / (c2 * t).cosh();
                1.0 + c1 * c2 * s * s
            }
            LawKind::Rational { c1, c2, c3, c4 } => {
                let num = c1 * t + c2 * t * t;
                let den = 1.0 + c3 * t + c4 * t * t;
                let dnum = c1 + 2.0 * c2 * t;
                let dden = c3 + 2.0 * c4 * t;
                1.0 + (dnum * den - num * dden) / (den * den)
            }
        }
    }

    /// Minimum and maximum of `g'` over `0` and a logarithmic grid up to `t_max`.
    pub fn sample_derivative_range(&self, t_max: f64, samples: usize) -> (f64, f64) {
        let (a, b) = (-8.0f64, t_max.log10());
        let mut lo = self.g_prime(0.0);
        let mut hi = lo;
        for i in 0..samples {
            let t = 10f64.powf(a + (b - a) * i as f64 / (samples - 1) as f64);
            let d = self.g_prime(t);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Zarantonello damping `gamma / lip^2`.
    pub fn damping(&self) -> f64 {
        self.gamma / (self.lip * self.lip)
    }
}
