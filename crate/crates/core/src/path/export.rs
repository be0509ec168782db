use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::verify::TraceRow;
use super::{Block, ParamPath};
use crate::error::Result;
use crate::net::{NetworkSpec, Theta};

pub const TRACE_HEADER: &str = "segment_index,lambda,loss,param_l2_norm,output_drift";

/// Trace rows as CSV, floats at 17 significant digits.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(96 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.segment_index, r.lambda, r.loss, r.param_l2_norm, r.output_drift
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    std::fs::write(path, trace_csv(rows))?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SegmentDescription {
    pub index: usize,
    pub kind: &'static str,
    pub output_preserving: bool,
    pub touched_blocks: Vec<Block>,
    pub start: Theta,
    pub end: Theta,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathDescription {
    pub spec: NetworkSpec,
    pub segments: Vec<SegmentDescription>,
}

impl PathDescription {
    pub fn of(path: &ParamPath) -> Self {
        let segments = path
            .segments()
            .iter()
            .enumerate()
            .map(|(index, s)| SegmentDescription {
                index,
                kind: s.kind().name(),
                output_preserving: s.is_output_preserving(),
                touched_blocks: s.touched_blocks(),
                start: s.start().clone(),
                end: s.end().clone(),
            })
            .collect();
        PathDescription { spec: path.spec().clone(), segments }
    }
}

/// Segment listing (kind, touched blocks, endpoints) as JSON.
pub fn write_path_json(path: &Path, p: &ParamPath) -> Result<()> {
    crate::json::write_file(path, &PathDescription::of(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_full_precision() {
        let rows =
            vec![TraceRow { segment_index: 3, lambda: 0.1, loss: 1.0 / 3.0, param_l2_norm: 2.0, output_drift: 0.0 }];
        let text = trace_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0], "3");
        assert_eq!(fields[2].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(fields[1], "1.0000000000000001e-1");
    }
}
