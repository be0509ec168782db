use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::homotopy::{optimize_polyline, polyline_path, straight_knots};
use super::steer::SteerCurve;
use super::verify::{verify_path, Verdict};
use super::{ParamPath, PathConfig, Segment};
use crate::error::{Error, Result};
use crate::linalg::numeric_rank;
use crate::net::{hidden_layer, loss, output_unchecked, DataSet, NetworkSpec, Theta};

/// How the tail of the network was connected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Endpoints already equal.
    Trivial,
    /// Two-layer network: a straight segment in the last weight.
    LastLayerLine,
    /// Deeper pyramidal tail: output steering segments.
    OutputSteering,
    /// Numerical polyline homotopy, accepted only after verification.
    Homotopy,
}

const CONDITIONING_FLOOR: f64 = 1e-6;
const WAYPOINT_ATTEMPTS: usize = 8;

/// Connect two parameter points that share their first layer, staying in
/// the sublevel set `loss <= alpha` (up to `verify_tol`).
///
/// The shared first-layer features must have rank `N`, so they act as a
/// training set of full row rank for the subnetwork formed by layers
/// `2..L`.
pub fn subnet_connect<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    data: &DataSet,
    start: &Theta,
    end: &Theta,
    alpha: f64,
    cfg: &PathConfig,
    rng: &mut R,
) -> Result<(ParamPath, Regime)> {
    spec.check_theta(start)?;
    spec.check_theta(end)?;
    spec.check_data(data)?;
    if !start.same_first_layer(end) {
        return Err(Error::Precondition("both endpoints must share the first layer".into()));
    }
    let features = hidden_layer(&spec.activation, data.x(), &start.weights[0], &start.biases[0]);
    let rank = numeric_rank(&features, cfg.tol.rank_tol_rel).rank;
    if rank != data.len() {
        return Err(Error::Precondition(format!("first-layer features have rank {rank}, need {}", data.len())));
    }
    let bound = alpha + cfg.tol.verify_tol;
    for (name, theta) in [("start", start), ("end", end)] {
        let value = loss(spec, theta, data)?;
        if value > bound {
            return Err(Error::Precondition(format!("{name} loss {value:.6e} exceeds alpha {alpha:.6e}")));
        }
    }
    if start == end {
        return Ok((ParamPath::constant(spec.clone(), start.clone()), Regime::Trivial));
    }
    if spec.depth() == 2 {
        let path = ParamPath::new(spec.clone(), vec![Segment::linear(start.clone(), end.clone(), false)])?;
        return Ok((path, Regime::LastLayerLine));
    }

    if spec.has_pyramidal_tail() {
        if let Some(path) = steer_path(spec, features, start, end, rng)? {
            let report = verify_path(spec, data, &path, (start, end), alpha, cfg.n_samples, &cfg.tol);
            if report.verdict == Verdict::Pass {
                return Ok((path, Regime::OutputSteering));
            }
        }
    }

    let h = &cfg.homotopy;
    let knots = straight_knots(start, end, h.knots);
    let (knots, max_loss) = optimize_polyline(spec, data, start, end, knots, h, true, Some(alpha))?;
    let mut points = vec![start.clone()];
    points.extend(knots);
    points.push(end.clone());
    let path = polyline_path(spec, &points)?;
    let report = verify_path(spec, data, &path, (start, end), alpha, cfg.n_samples, &cfg.tol);
    if report.verdict != Verdict::Pass {
        return Err(Error::HomotopyFailed { max_loss: max_loss.max(report.max_loss), alpha });
    }
    Ok((path, Regime::Homotopy))
}

/// Steering segments `start -> end`, through a random waypoint when the
/// straight line between the upper weights gets close to rank deficiency.
fn steer_path<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    features: DMatrix<f64>,
    start: &Theta,
    end: &Theta,
    rng: &mut R,
) -> Result<Option<ParamPath>> {
    let curve = || SteerCurve::new(spec.activation.clone(), features.clone());
    for endpoint in [start, end] {
        if SteerCurve::min_upper_conditioning(endpoint, endpoint, 1) < CONDITIONING_FLOOR {
            return Ok(None);
        }
    }
    if SteerCurve::min_upper_conditioning(start, end, 64) >= CONDITIONING_FLOOR {
        let seg = Segment::steer(start.clone(), end.clone(), curve());
        return Ok(Some(ParamPath::new(spec.clone(), vec![seg])?));
    }
    for _ in 0..WAYPOINT_ATTEMPTS {
        let mut guide = Theta::lerp(start, end, 0.5);
        let depth = spec.depth();
        for l in 2..depth {
            let w = &mut guide.weights[l];
            let scale = (w.norm() / (w.len() as f64).sqrt()).max(1e-3);
            w.iter_mut().for_each(|v| *v += 0.5 * scale * rng.sample::<f64, _>(StandardNormal));
        }
        if SteerCurve::min_upper_conditioning(start, &guide, 64) < CONDITIONING_FLOOR
            || SteerCurve::min_upper_conditioning(&guide, end, 64) < CONDITIONING_FLOOR
        {
            continue;
        }
        // The waypoint carries the guide's upper blocks and the average of
        // the endpoint outputs, whose loss is at most the endpoint maximum.
        let mid_curve = curve();
        let tail_out = |t: &Theta| {
            let tail = Theta { weights: t.weights[1..].to_vec(), biases: t.biases[1..].to_vec() };
            output_unchecked(&spec.activation, &tail, &features)
        };
        let out = (tail_out(start) + tail_out(end)) * 0.5;
        let mid = mid_curve.realize(&guide, out);
        let first = Segment::steer(start.clone(), mid.clone(), curve());
        let second = Segment::steer(mid, end.clone(), curve());
        return Ok(Some(ParamPath::new(spec.clone(), vec![first, second])?));
    }
    Ok(None)
}
