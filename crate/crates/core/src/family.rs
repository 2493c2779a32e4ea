use serde::{Deserialize, Serialize};

/// Exponential-family outcome models supported by the null fit. Both use the
/// canonical link, so the score equations reduce to `X'(y - mu) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Normal outcome, identity link. Dispersion is estimated.
    GaussianIdentity,
    /// Bernoulli outcome, logit link. Dispersion fixed at 1.
    BinomialLogit,
}

impl Family {
    /// Mean from the linear predictor, `g^{-1}(xb)`.
    pub fn inverse_link(&self, lin: f64) -> f64 {
        match self {
            Family::GaussianIdentity => lin,
            Family::BinomialLogit => {
                if lin >= 0.0 {
                    1.0 / (1.0 + (-lin).exp())
                } else {
                    let e = lin.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Variance function `v(mu) = b''(theta)`.
    pub fn variance(&self, mu: f64) -> f64 {
        match self {
            Family::GaussianIdentity => 1.0,
            Family::BinomialLogit => mu * (1.0 - mu),
        }
    }

    /// `a_i(phi)`; no prior weights.
    pub fn dispersion_scale(&self, phi: f64) -> f64 {
        match self {
            Family::GaussianIdentity => phi,
            Family::BinomialLogit => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::GaussianIdentity => "gaussian",
            Family::BinomialLogit => "binomial",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        match name {
            "gaussian" | "gaussian_identity" | "continuous" => Some(Family::GaussianIdentity),
            "binomial" | "binomial_logit" | "logistic" | "dichotomous" => {
                Some(Family::BinomialLogit)
            }
            _ => None,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
