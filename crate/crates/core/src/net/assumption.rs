//! Numerical probe for the "no shifted self-combination" property.
//!
//! An activation passes when no finite combination `sum_i c_i sigma(x - a_i)`
//! with distinct non-zero shifts reproduces `sigma` itself. The probe fits such
//! combinations by least squares on a dense grid and reports how close the
//! best one gets. It can only ever flag a violation, never prove the property.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::linalg::pinv;

/// Normalized residual above which the property is considered to hold.
pub const HOLDS_RESIDUAL: f64 = 1e-3;
/// Normalized residual below which a violation is flagged.
pub const VIOLATION_RESIDUAL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSearch {
    /// Grid is `[-half_width, half_width]`.
    pub half_width: f64,
    pub grid_points: usize,
    /// Shifts satisfy `min_shift <= |a| <= max_shift`.
    pub min_shift: f64,
    pub max_shift: f64,
    pub min_separation: f64,
}

impl Default for ShiftSearch {
    fn default() -> Self {
        ShiftSearch { half_width: 3.0, grid_points: 601, min_shift: 0.5, max_shift: 6.0, min_separation: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftFit {
    pub terms: usize,
    /// `|fit - target| / |target|` over the grid.
    pub residual: f64,
    pub shifts: Vec<f64>,
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftVerdict {
    Holds,
    Violated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifyReport {
    pub fits: Vec<ShiftFit>,
    pub min_residual: f64,
    pub verdict: ShiftVerdict,
}

struct Problem<'a> {
    basis: &'a Activation,
    grid: Vec<f64>,
    target: DVector<f64>,
    target_norm: f64,
    search: ShiftSearch,
}

impl Problem<'_> {
    fn feasible(&self, shifts: &[f64]) -> bool {
        let s = &self.search;
        shifts.iter().all(|a| a.abs() >= s.min_shift && a.abs() <= s.max_shift)
            && shifts.iter().enumerate().all(|(i, a)| shifts[i + 1..].iter().all(|b| (a - b).abs() >= s.min_separation))
    }

    fn solve(&self, shifts: &[f64]) -> (f64, DVector<f64>) {
        if !self.feasible(shifts) {
            return (f64::INFINITY, DVector::zeros(shifts.len()));
        }
        let design = DMatrix::from_fn(self.grid.len(), shifts.len(), |g, i| self.basis.apply(self.grid[g] - shifts[i]));
        let coeffs = pinv(&design, 1e-13) * &self.target;
        let residual = (design * &coeffs - &self.target).norm() / self.target_norm;
        (residual, coeffs)
    }

    fn random_start<R: Rng>(&self, terms: usize, rng: &mut R) -> Vec<f64> {
        loop {
            let shifts: Vec<f64> = (0..terms)
                .map(|_| {
                    let mag = rng.random_range(self.search.min_shift..=self.search.max_shift);
                    if rng.random_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            if self.feasible(&shifts) {
                return shifts;
            }
        }
    }

    /// Compass search on the shifts with the coefficients projected out.
    fn refine(&self, mut shifts: Vec<f64>) -> (f64, Vec<f64>) {
        let mut best = self.solve(&shifts).0;
        let mut step = 0.5;
        let mut evaluations = 0;
        while step > 1e-13 && evaluations < 20_000 {
            let mut improved = false;
            for i in 0..shifts.len() {
                for dir in [1.0, -1.0] {
                    let mut cand = shifts.clone();
                    cand[i] += dir * step;
                    let r = self.solve(&cand).0;
                    evaluations += 1;
                    if r < best {
                        best = r;
                        shifts = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (best, shifts)
    }
}

/// Best fit of `target` by `terms` shifted copies of `basis`, over `trials`
/// random starts each refined by local search.
pub fn fit_shifted_combination<R: Rng>(
    basis: &Activation,
    target: impl Fn(f64) -> f64,
    terms: usize,
    trials: usize,
    search: ShiftSearch,
    rng: &mut R,
) -> ShiftFit {
    let n = search.grid_points.max(2);
    let grid: Vec<f64> =
        (0..n).map(|i| -search.half_width + 2.0 * search.half_width * i as f64 / (n - 1) as f64).collect();
    let target = DVector::from_iterator(n, grid.iter().map(|x| target(*x)));
    let target_norm = target.norm().max(f64::MIN_POSITIVE);
    let problem = Problem { basis, grid, target, target_norm, search };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..trials.max(1) {
        let start = problem.random_start(terms, rng);
        let (r, shifts) = problem.refine(start);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, shifts));
        }
    }
    let (residual, shifts) = best.expect("at least one trial");
    let coefficients = problem.solve(&shifts).1.iter().copied().collect();
    ShiftFit { terms, residual, shifts, coefficients }
}

/// Try to write `sigma` as a combination of `p <= p_max` of its own shifts.
pub fn a2_falsify(act: &Activation, p_max: usize, trials: usize, seed: u64) -> FalsifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let search = ShiftSearch::default();
    let fits: Vec<ShiftFit> = (1..=p_max.max(1))
        .map(|p| fit_shifted_combination(act, |x| act.apply(x), p, trials, search, &mut rng))
        .collect();
    let min_residual = fits.iter().map(|f| f.residual).fold(f64::INFINITY, f64::min);
    let verdict = if min_residual > HOLDS_RESIDUAL {
        ShiftVerdict::Holds
    } else if min_residual < VIOLATION_RESIDUAL {
        ShiftVerdict::Violated
    } else {
        ShiftVerdict::Inconclusive
    };
    FalsifyReport { fits, min_residual, verdict }
}
