use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::align::{align_first_layer, independent_first_columns};
use super::restore::restore_full_rank;
use super::subnet::{subnet_connect, Regime};
use super::{ParamPath, PathConfig};
use crate::error::{Error, Result};
use crate::net::{check_distinct_rows, loss, DataSet, NetworkSpec, Theta};

/// Path from `theta` to `theta_prime` inside the sublevel set
/// `{loss <= alpha}`, for networks whose first hidden layer has more
/// neurons than there are samples and whose later layers shrink.
///
/// The path is: restore first-layer rank at `theta`; align the first layer
/// with the rank-restored copy of `theta_prime` (loss constant); connect
/// the tails with the first layer frozen; undo the restoration of
/// `theta_prime`. Randomness is drawn from `cfg.seed` only.
pub fn connect_sublevel(
    spec: &NetworkSpec,
    data: &DataSet,
    theta: &Theta,
    theta_prime: &Theta,
    alpha: f64,
    cfg: &PathConfig,
) -> Result<(ParamPath, Regime)> {
    spec.check_theta(theta)?;
    spec.check_theta(theta_prime)?;
    spec.check_data(data)?;
    cfg.tol.validate()?;
    let n = data.len();
    if spec.depth() < 2 {
        return Err(Error::Precondition("the network needs at least one hidden layer".into()));
    }
    if spec.widths[1] < n + 1 {
        return Err(Error::Precondition(format!("n_1 must be >= N+1 (n_1 = {}, N = {n})", spec.widths[1])));
    }
    if !spec.has_pyramidal_tail() {
        return Err(Error::Precondition("widths after the first hidden layer must strictly decrease".into()));
    }
    if !check_distinct_rows(data.x(), 0.0) {
        return Err(Error::Precondition("input rows must be distinct".into()));
    }
    for (name, t) in [("theta", theta), ("theta_prime", theta_prime)] {
        let value = loss(spec, t, data)?;
        if !(value <= alpha) {
            return Err(Error::Precondition(format!("alpha {alpha:.6e} is below the loss {value:.6e} of {name}")));
        }
    }
    if theta == theta_prime {
        return Ok((ParamPath::constant(spec.clone(), theta.clone()), Regime::Trivial));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (restore_a, _) = restore_full_rank(spec, data, theta, cfg, &mut rng)?;
    let (restore_b, _) = restore_full_rank(spec, data, theta_prime, cfg, &mut rng)?;
    let a = restore_a.end().clone();
    let b = restore_b.end().clone();

    let order = independent_first_columns(spec, data, &b, cfg.tol.rank_tol_rel);
    let aligned = align_first_layer(spec, data, &a, &b, &order, cfg)?;
    let (tail, regime) = subnet_connect(spec, data, aligned.end(), &b, alpha, cfg, &mut rng)?;

    let path = restore_a.concat(aligned)?.concat(tail)?.concat(restore_b.reversed())?;
    Ok((path, regime))
}
