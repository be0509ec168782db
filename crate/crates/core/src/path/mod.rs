//! Continuous parameter paths and the constructions that build them.
//!
//! A [`ParamPath`] is a chain of [`Segment`]s, each a closed-form curve
//! `[0, 1] -> Theta`. Segment endpoints are stored and reproduced bit for bit
//! by the evaluator, so chaining is checked with exact equality.

mod align;
mod connect;
mod export;
mod homotopy;
mod restore;
mod row_curves;
mod steer;
mod subnet;
mod verify;

pub use align::{align_first_layer, independent_first_columns};
pub use connect::connect_sublevel;
pub use export::{trace_csv, write_path_json, write_trace_csv, PathDescription, SegmentDescription, TRACE_HEADER};
pub use homotopy::{optimize_polyline, polyline_path, HomotopyConfig};
pub(crate) use restore::draw_neuron;
pub use restore::restore_full_rank;
pub use row_curves::{transfer_neuron, zero_dependent_rows, RowCurve};
pub use steer::SteerCurve;
pub use subnet::{subnet_connect, Regime};
pub use verify::{verify_path, verify_path_with_trace, PathReport, SegmentReport, TraceRow, Verdict, ENDPOINT_TOL};

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Tolerances;
use crate::matrix_serde::rows;
use crate::net::{lerp_mat, NetworkSpec, Theta};

/// Knobs for path construction and verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub tol: Tolerances,
    /// Uniform samples per segment, endpoints included.
    pub n_samples: usize,
    /// Fresh redraws allowed when restoring first-layer rank.
    pub max_retries: usize,
    pub seed: u64,
    pub homotopy: HomotopyConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            tol: Tolerances::default(),
            n_samples: 200,
            max_retries: 16,
            seed: 0,
            homotopy: HomotopyConfig::default(),
        }
    }
}

/// A parameter block, 1-based like the layer indices of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Weight(usize),
    Bias(usize),
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Weight(l) => write!(f, "W{l}"),
            Block::Bias(l) => write!(f, "b{l}"),
        }
    }
}

impl Serialize for Block {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Blocks whose values differ between two parameter points.
pub fn differing_blocks(a: &Theta, b: &Theta) -> Vec<Block> {
    let mut out = Vec::new();
    for l in 0..a.weights.len() {
        if l < a.biases.len() && a.biases[l] != b.biases[l] {
            out.push(Block::Bias(l + 1));
        }
        if a.weights[l] != b.weights[l] {
            out.push(Block::Weight(l + 1));
        }
    }
    out.sort();
    out
}

/// The closed-form curve carried by a segment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    Constant,
    /// Straight line `(1 - t) start + t end` on the blocks that differ.
    Linear,
    /// Output-preserving row curve on `W_layer` that zeroes the rows in
    /// `dependent`, moving their contribution onto the rows in `basis`.
    ZeroDependentRows {
        layer: usize,
        basis: Vec<usize>,
        dependent: Vec<usize>,
        #[serde(with = "rows")]
        coeffs: DMatrix<f64>,
    },
    /// Output-preserving transfer of row `from` of `W_layer` onto the
    /// duplicate neuron `to`.
    TransferNeuron {
        layer: usize,
        from: usize,
        to: usize,
    },
    /// Tail curve that moves the network output on a straight line.
    Steer(Box<SteerCurve>),
}

impl SegmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Constant => "constant",
            SegmentKind::Linear => "linear",
            SegmentKind::ZeroDependentRows { .. } => "zero_dependent_rows",
            SegmentKind::TransferNeuron { .. } => "transfer_neuron",
            SegmentKind::Steer(_) => "steer",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Segment {
    kind: SegmentKind,
    start: Theta,
    end: Theta,
    /// The curve keeps the network output fixed (up to round-off).
    output_preserving: bool,
    /// Traversed from `end` to `start`.
    #[serde(default)]
    reversed: bool,
}

impl Segment {
    pub fn constant(theta: Theta) -> Self {
        Segment {
            kind: SegmentKind::Constant,
            start: theta.clone(),
            end: theta,
            output_preserving: true,
            reversed: false,
        }
    }

    pub fn linear(start: Theta, end: Theta, output_preserving: bool) -> Self {
        Segment { kind: SegmentKind::Linear, start, end, output_preserving, reversed: false }
    }

    /// Lift a row curve on `W_layer` to a segment in parameter space.
    pub fn from_row_curve(start: Theta, layer: usize, curve: &RowCurve) -> Self {
        let mut end = start.clone();
        end.weights[layer - 1] = curve.eval(1.0);
        let kind = match curve {
            RowCurve::ZeroDependentRows { basis, dependent, coeffs, .. } => SegmentKind::ZeroDependentRows {
                layer,
                basis: basis.clone(),
                dependent: dependent.clone(),
                coeffs: coeffs.clone(),
            },
            RowCurve::TransferNeuron { from, to, .. } => SegmentKind::TransferNeuron { layer, from: *from, to: *to },
        };
        Segment { kind, start, end, output_preserving: true, reversed: false }
    }

    pub(crate) fn steer(start: Theta, end: Theta, curve: SteerCurve) -> Self {
        Segment { kind: SegmentKind::Steer(Box::new(curve)), start, end, output_preserving: false, reversed: false }
    }

    /// Index and shape checks on the curve data, so that a path read from
    /// disk cannot make the evaluator panic.
    fn check_kind(&self, spec: &NetworkSpec) -> std::result::Result<(), String> {
        let depth = spec.depth();
        let rows_of = |layer: usize| -> std::result::Result<usize, String> {
            if layer == 0 || layer > depth {
                return Err(format!("layer {layer} out of range"));
            }
            Ok(spec.widths[layer - 1])
        };
        match &self.kind {
            SegmentKind::Constant | SegmentKind::Linear => Ok(()),
            SegmentKind::ZeroDependentRows { layer, basis, dependent, coeffs } => {
                let rows = rows_of(*layer)?;
                if basis.iter().chain(dependent).any(|&i| i >= rows) {
                    return Err("row index out of range".into());
                }
                if coeffs.shape() != (basis.len(), dependent.len()) {
                    return Err("coefficient matrix has the wrong shape".into());
                }
                Ok(())
            }
            SegmentKind::TransferNeuron { layer, from, to } => {
                let rows = rows_of(*layer)?;
                if *from >= rows || *to >= rows || from == to {
                    return Err("invalid transfer rows".into());
                }
                Ok(())
            }
            SegmentKind::Steer(curve) => {
                if depth < 3 || curve.features().ncols() != spec.widths[1] || curve.features().nrows() == 0 {
                    return Err("steering data does not match the network".into());
                }
                if !self.start.same_first_layer(&self.end) {
                    return Err("steering segments keep the first layer fixed".into());
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> &SegmentKind {
        &self.kind
    }

    pub fn is_output_preserving(&self) -> bool {
        self.output_preserving
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// Point at `t = 0` of the traversal.
    pub fn start(&self) -> &Theta {
        if self.reversed {
            &self.end
        } else {
            &self.start
        }
    }

    /// Point at `t = 1` of the traversal.
    pub fn end(&self) -> &Theta {
        if self.reversed {
            &self.start
        } else {
            &self.end
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.start == self.end
    }

    pub fn touched_blocks(&self) -> Vec<Block> {
        differing_blocks(&self.start, &self.end)
    }

    pub fn reversed(&self) -> Self {
        let mut seg = self.clone();
        seg.reversed = !seg.reversed;
        seg
    }

    /// Evaluate the curve at `t` in `[0, 1]`.
    pub fn eval(&self, t: f64) -> Theta {
        let s = if self.reversed { 1.0 - t } else { t };
        if s == 0.0 {
            return self.start.clone();
        }
        if s == 1.0 {
            return self.end.clone();
        }
        self.eval_forward(s)
    }

    fn eval_forward(&self, s: f64) -> Theta {
        match &self.kind {
            SegmentKind::Constant => self.start.clone(),
            SegmentKind::Linear => {
                let mut theta = self.start.clone();
                for (l, (a, b)) in self.start.weights.iter().zip(&self.end.weights).enumerate() {
                    if a != b {
                        theta.weights[l] = lerp_mat(a, b, s);
                    }
                }
                for (l, (a, b)) in self.start.biases.iter().zip(&self.end.biases).enumerate() {
                    if a != b {
                        theta.biases[l] = a.zip_map(b, |x, y| (1.0 - s) * x + s * y);
                    }
                }
                theta
            }
            SegmentKind::ZeroDependentRows { layer, basis, dependent, coeffs } => {
                let mut theta = self.start.clone();
                let base = &self.start.weights[layer - 1];
                theta.weights[layer - 1] = row_curves::zero_rows_at(base, basis, dependent, coeffs, s);
                theta
            }
            SegmentKind::TransferNeuron { layer, from, to } => {
                let mut theta = self.start.clone();
                let base = &self.start.weights[layer - 1];
                theta.weights[layer - 1] = row_curves::transfer_at(base, *from, *to, s);
                theta
            }
            SegmentKind::Steer(curve) => curve.eval(&self.start, &self.end, s),
        }
    }
}

/// An ordered, exactly chained list of segments.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "PathRepr")]
pub struct ParamPath {
    spec: NetworkSpec,
    segments: Vec<Segment>,
}

#[derive(Deserialize)]
struct PathRepr {
    spec: NetworkSpec,
    segments: Vec<Segment>,
}

impl TryFrom<PathRepr> for ParamPath {
    type Error = Error;

    fn try_from(r: PathRepr) -> Result<Self> {
        ParamPath::new(r.spec, r.segments)
    }
}

impl ParamPath {
    pub fn new(spec: NetworkSpec, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Precondition("a path needs at least one segment".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            spec.check_theta(&s.start)?;
            spec.check_theta(&s.end)?;
            s.check_kind(&spec).map_err(|e| Error::Precondition(format!("segment {i}: {e}")))?;
            if i + 1 < segments.len() && s.end() != segments[i + 1].start() {
                return Err(Error::BrokenChain { index: i });
            }
        }
        Ok(ParamPath { spec, segments })
    }

    pub fn constant(spec: NetworkSpec, theta: Theta) -> Self {
        ParamPath { spec, segments: vec![Segment::constant(theta)] }
    }

    /// Build from possibly trivial segments, dropping the trivial ones; a
    /// constant segment at `fallback` is used if nothing remains.
    pub(crate) fn from_nontrivial(spec: &NetworkSpec, segments: Vec<Segment>, fallback: &Theta) -> Result<Self> {
        let kept: Vec<Segment> = segments.into_iter().filter(|s| !s.is_trivial()).collect();
        if kept.is_empty() {
            return Ok(ParamPath::constant(spec.clone(), fallback.clone()));
        }
        ParamPath::new(spec.clone(), kept)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn start(&self) -> &Theta {
        self.segments[0].start()
    }

    pub fn end(&self) -> &Theta {
        self.segments[self.segments.len() - 1].end()
    }

    /// Append `other`, which must start exactly where `self` ends. Constant
    /// segments are dropped when the other side has real motion.
    pub fn concat(mut self, other: ParamPath) -> Result<Self> {
        if self.end() != other.start() {
            return Err(Error::BrokenChain { index: self.segments.len() - 1 });
        }
        let mut segs = std::mem::take(&mut self.segments);
        segs.extend(other.segments);
        let fallback = segs[0].start().clone();
        ParamPath::from_nontrivial(&self.spec, segs, &fallback)
    }

    pub fn reversed(&self) -> Self {
        ParamPath { spec: self.spec.clone(), segments: self.segments.iter().rev().map(Segment::reversed).collect() }
    }

    /// Point at global parameter `u` in `[0, 1]`, each segment taking an
    /// equal share.
    pub fn eval(&self, u: f64) -> Theta {
        let n = self.segments.len();
        let scaled = (u.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let idx = (scaled.floor() as usize).min(n - 1);
        self.segments[idx].eval(scaled - idx as f64)
    }
}
