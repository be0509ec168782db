//! Full-batch gradient descent, used to produce endpoint pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{gradient, loss, DataSet, NetworkSpec, Theta};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub theta: Theta,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps: usize,
}

/// `steps` plain gradient steps of size `lr` from `init`. Fails with
/// [`Error::Diverged`] as soon as the loss or the parameters stop being finite.
pub fn train(spec: &NetworkSpec, data: &DataSet, init: &Theta, steps: usize, lr: f64) -> Result<TrainOutcome> {
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    let initial_loss = loss(spec, init, data)?;
    let mut theta = init.clone();
    for step in 0..steps {
        let (value, grad) = gradient(spec, &theta, data)?;
        if !value.is_finite() {
            return Err(Error::Diverged { step });
        }
        for (w, g) in theta.weights.iter_mut().zip(&grad.weights) {
            *w -= g * lr;
        }
        for (b, g) in theta.biases.iter_mut().zip(&grad.biases) {
            *b -= g * lr;
        }
        if !theta.is_finite() {
            return Err(Error::Diverged { step });
        }
    }
    let final_loss = loss(spec, &theta, data)?;
    if !final_loss.is_finite() {
        return Err(Error::Diverged { step: steps });
    }
    Ok(TrainOutcome { theta, initial_loss, final_loss, steps })
}
