use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameterisation of a continuous piecewise-linear activation.
///
/// `PiecewiseLinear` is `s_0 x + sum_i (s_{i+1} - s_i) relu(x - b_i)`: slope
/// `slopes[0]` left of the first breakpoint, `slopes[i]` between `b_{i-1}`
/// and `b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    LeakyRelu { slope: f64 },
    PiecewiseLinear { breakpoints: Vec<f64>, slopes: Vec<f64> },
}

/// A validated strictly increasing, surjective, non-affine piecewise-linear
/// activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActivationKind", into = "ActivationKind")]
pub struct Activation {
    kind: ActivationKind,
    breaks: Vec<f64>,
    slopes: Vec<f64>,
    /// sigma(breaks[i])
    knots: Vec<f64>,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::leaky_relu(0.5).expect("0.5 is a valid slope")
    }
}

impl TryFrom<ActivationKind> for Activation {
    type Error = Error;

    fn try_from(kind: ActivationKind) -> Result<Self> {
        Activation::new(kind)
    }
}

impl From<Activation> for ActivationKind {
    fn from(act: Activation) -> Self {
        act.kind
    }
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Result<Self> {
        let (breaks, slopes) = match &kind {
            ActivationKind::LeakyRelu { slope } => {
                if !(slope.is_finite() && *slope > 0.0 && *slope < 1.0) {
                    return Err(Error::InvalidActivation(format!("leaky relu slope must lie in (0, 1), got {slope}")));
                }
                (vec![0.0], vec![*slope, 1.0])
            }
            ActivationKind::PiecewiseLinear { breakpoints, slopes } => (breakpoints.clone(), slopes.clone()),
        };
        if breaks.is_empty() || slopes.len() != breaks.len() + 1 {
            return Err(Error::InvalidActivation(format!(
                "need at least one breakpoint and exactly one more slope than breakpoints (got {} and {})",
                breaks.len(),
                slopes.len()
            )));
        }
        if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidActivation("breakpoints must be finite and strictly increasing".into()));
        }
        if slopes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidActivation(
                "all slopes must be finite and positive (strict monotonicity, surjectivity)".into(),
            ));
        }
        if slopes.iter().all(|s| *s == slopes[0]) {
            return Err(Error::InvalidActivation(
                "activation is affine; at least two distinct slopes are required".into(),
            ));
        }
        let mut knots = Vec::with_capacity(breaks.len());
        knots.push(slopes[0] * breaks[0]);
        for i in 1..breaks.len() {
            let prev = knots[i - 1];
            knots.push(prev + slopes[i] * (breaks[i] - breaks[i - 1]));
        }
        Ok(Activation { kind, breaks, slopes, knots })
    }

    pub fn leaky_relu(slope: f64) -> Result<Self> {
        Activation::new(ActivationKind::LeakyRelu { slope })
    }

    pub fn piecewise_linear(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        Activation::new(ActivationKind::PiecewiseLinear { breakpoints, slopes })
    }

    pub fn kind(&self) -> &ActivationKind {
        &self.kind
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if let ActivationKind::LeakyRelu { slope } = self.kind {
            return if x >= 0.0 { x } else { slope * x };
        }
        let idx = self.breaks.partition_point(|b| *b <= x);
        if idx == 0 {
            self.knots[0] + self.slopes[0] * (x - self.breaks[0])
        } else {
            self.knots[idx - 1] + self.slopes[idx] * (x - self.breaks[idx - 1])
        }
    }

    /// Derivative, taking the right branch at breakpoints.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.slopes[self.breaks.partition_point(|b| *b <= x)]
    }

    /// Closed-form preimage; exists for every real `y` since the activation
    /// is a strictly increasing bijection of the real line.
    #[inline]
    pub fn inverse(&self, y: f64) -> f64 {
        if let ActivationKind::LeakyRelu { slope } = self.kind {
            return if y >= 0.0 { y } else { y / slope };
        }
        let idx = self.knots.partition_point(|v| *v <= y);
        if idx == 0 {
            self.breaks[0] + (y - self.knots[0]) / self.slopes[0]
        } else {
            self.breaks[idx - 1] + (y - self.knots[idx - 1]) / self.slopes[idx]
        }
    }
}
