//! The command implementations behind the `sublevel` binary. Every command
//! writes its artifacts into `out_dir` and reports whether its verifier or
//! certificate passed.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cert::{
    barrier_scan, build_width_n_instance, certify_disconnection, pad_first_layer, permute_neurons, BarrierScan,
    DisconnectionCertificate, Strategy,
};
use crate::config::{ExperimentConfig, Purpose};
use crate::error::{Error, Result};
use crate::json;
use crate::net::{loss, DataSet, NetworkSpec, Theta};
use crate::path::{
    connect_sublevel, verify_path_with_trace, write_path_json, write_trace_csv, ParamPath, PathReport, Regime, Verdict,
};
use crate::train::train;

/// Instance redraws allowed when a determinant comes out degenerate.
pub const CERTIFY_ATTEMPTS: u64 = 16;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn prepare(cfg: &ExperimentConfig, purpose: Purpose) -> Result<PathBuf> {
    cfg.validate(purpose)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(cfg.out_dir.clone())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub loss_a: f64,
    pub loss_b: f64,
    pub alpha: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed_a: u64,
    pub seed_b: u64,
}

fn resolve_alpha(cfg: &ExperimentConfig, loss_a: f64, loss_b: f64) -> f64 {
    cfg.alpha.unwrap_or(loss_a.max(loss_b))
}

/// Train two endpoints from `seed_a` and `seed_b`; writes `data.json`,
/// `theta_a.json`, `theta_b.json` and `train.json`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Outcome> {
    let out = prepare(cfg, Purpose::Train)?;
    let spec = cfg.spec()?;
    let data = cfg.data()?;
    let run = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = Theta::random(&spec, &mut rng);
        train(&spec, &data, &init, cfg.steps, cfg.learning_rate)
    };
    let a = run(cfg.seed_a)?;
    let b = run(cfg.seed_b)?;
    let summary = TrainSummary {
        loss_a: a.final_loss,
        loss_b: b.final_loss,
        alpha: resolve_alpha(cfg, a.final_loss, b.final_loss),
        steps: cfg.steps,
        learning_rate: cfg.learning_rate,
        seed_a: cfg.seed_a,
        seed_b: cfg.seed_b,
    };
    let files = vec![out.join("data.json"), out.join("theta_a.json"), out.join("theta_b.json"), out.join("train.json")];
    json::write_file(&files[0], &data)?;
    json::write_file(&files[1], &a.theta)?;
    json::write_file(&files[2], &b.theta)?;
    json::write_file(&files[3], &summary)?;
    Ok(Outcome {
        passed: true,
        summary: format!("trained endpoints: loss_a {:.6e}, loss_b {:.6e}", a.final_loss, b.final_loss),
        files,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectRecord {
    pub regime: Regime,
    pub alpha: f64,
    pub segments: usize,
    pub report: PathReport,
}

fn endpoints(cfg: &ExperimentConfig, a: Option<&Path>, b: Option<&Path>) -> Result<(Theta, Theta)> {
    let a = a.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.join("theta_a.json"));
    let b = b.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.join("theta_b.json"));
    Ok((read_json(&a)?, read_json(&b)?))
}

#[allow(clippy::too_many_arguments)]
fn write_verification(
    out: &Path,
    prefix: &str,
    spec: &NetworkSpec,
    data: &DataSet,
    path: &ParamPath,
    ends: (&Theta, &Theta),
    alpha: f64,
    cfg: &ExperimentConfig,
) -> Result<(PathReport, Vec<PathBuf>)> {
    let (report, trace) = verify_path_with_trace(spec, data, path, ends, alpha, cfg.n_samples, &cfg.tolerances());
    let csv = out.join(format!("{prefix}trace.csv"));
    write_trace_csv(&csv, &trace)?;
    Ok((report, vec![csv]))
}

/// Connect the two endpoints inside the sublevel set and verify the path;
/// writes `path.json`, `path_description.json`, `trace.csv` and
/// `report.json`. Passes iff the verifier does.
pub fn cmd_connect(cfg: &ExperimentConfig, theta_a: Option<&Path>, theta_b: Option<&Path>) -> Result<Outcome> {
    let out = prepare(cfg, Purpose::Connect)?;
    let spec = cfg.spec()?;
    let data = cfg.data()?;
    let (a, b) = endpoints(cfg, theta_a, theta_b)?;
    let alpha = resolve_alpha(cfg, loss(&spec, &a, &data)?, loss(&spec, &b, &data)?);
    let pcfg = cfg.path_config();
    let (path, regime) = connect_sublevel(&spec, &data, &a, &b, alpha, &pcfg)?;

    let mut files = vec![out.join("path.json"), out.join("path_description.json")];
    json::write_file(&files[0], &path)?;
    write_path_json(&files[1], &path)?;
    let (report, more) = write_verification(&out, "", &spec, &data, &path, (&a, &b), alpha, cfg)?;
    files.extend(more);
    let record = ConnectRecord { regime, alpha, segments: path.len(), report };
    let report_file = out.join("report.json");
    json::write_file(&report_file, &record)?;
    files.push(report_file);
    let passed = record.report.verdict == Verdict::Pass;
    Ok(Outcome {
        passed,
        summary: format!(
            "{} segments ({regime:?}), max loss {:.6e} vs alpha {alpha:.6e}: {}",
            record.segments,
            record.report.max_loss,
            if passed { "pass" } else { "fail" }
        ),
        files,
    })
}

/// Re-verify a stored path (default `out_dir/path.json`); writes
/// `verify_report.json` and `verify_trace.csv`.
pub fn cmd_verify(
    cfg: &ExperimentConfig,
    path_file: Option<&Path>,
    theta_a: Option<&Path>,
    theta_b: Option<&Path>,
) -> Result<Outcome> {
    let out = prepare(cfg, Purpose::Train)?;
    let spec = cfg.spec()?;
    let data = cfg.data()?;
    let file = path_file.map(Path::to_path_buf).unwrap_or_else(|| out.join("path.json"));
    let path: ParamPath = read_json(&file)?;
    if path.spec() != &spec {
        return Err(Error::Config("the stored path belongs to a different network".into()));
    }
    let (a, b) = match (theta_a, theta_b) {
        (None, None) => (path.start().clone(), path.end().clone()),
        _ => endpoints(cfg, theta_a, theta_b)?,
    };
    let alpha = resolve_alpha(cfg, loss(&spec, &a, &data)?, loss(&spec, &b, &data)?);
    let (report, mut files) = write_verification(&out, "verify_", &spec, &data, &path, (&a, &b), alpha, cfg)?;
    let report_file = out.join("verify_report.json");
    json::write_file(&report_file, &report)?;
    files.push(report_file);
    let passed = report.verdict == Verdict::Pass;
    Ok(Outcome {
        passed,
        summary: format!("max loss {:.6e} vs alpha {alpha:.6e}: {:?}", report.max_loss, report.verdict),
        files,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub seed: u64,
    pub instance_seed: u64,
    pub instance_hash: String,
    pub n: usize,
    pub n0: usize,
    pub swapped: [usize; 2],
    #[serde(flatten)]
    pub certificate: DisconnectionCertificate,
    pub barrier: BarrierScan,
}

struct Certified {
    record: CertificateRecord,
    instance: crate::cert::Instance,
    swapped: Theta,
}

fn certify_instance(cfg: &ExperimentConfig) -> Result<Certified> {
    let n = cfg.samples;
    let n0 = cfg.widths[0];
    let tol = cfg.tolerances();
    let mut last = Error::DegenerateDeterminant;
    for attempt in 0..CERTIFY_ATTEMPTS {
        let instance_seed = cfg.seed.wrapping_add(attempt);
        let instance = build_width_n_instance(n, n0, instance_seed)?;
        let swapped = permute_neurons(&instance.theta, 1, 2)?;
        let index: Vec<usize> = (0..n).collect();
        let certificate =
            match certify_disconnection(&instance.spec, &instance.data, &instance.theta, &swapped, &index, &tol) {
                Ok(c) => c,
                Err(e @ Error::DegenerateDeterminant) => {
                    last = e;
                    continue;
                }
                Err(e) => return Err(e),
            };
        let barrier = barrier_scan(
            &instance.spec,
            &instance.data,
            &instance.theta,
            &swapped,
            &[Strategy::Straight, Strategy::MidpointRefit, Strategy::OptimizedKnots],
            cfg.n_samples,
            &cfg.path_config(),
        )?;
        let record = CertificateRecord {
            seed: cfg.seed,
            instance_seed,
            instance_hash: instance.hash(),
            n,
            n0,
            swapped: [1, 2],
            certificate,
            barrier,
        };
        return Ok(Certified { record, instance, swapped });
    }
    Err(last)
}

/// Build a width-`N` instance, swap neurons 1 and 2 and certify that the
/// two global minima are disconnected; writes `certificate.json` with the
/// barrier scan. Passes iff the certificate is valid.
pub fn cmd_certify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let out = prepare(cfg, Purpose::Certify)?;
    let certified = certify_instance(cfg)?;
    let file = out.join("certificate.json");
    json::write_file(&file, &certified.record)?;
    let c = &certified.record.certificate;
    Ok(Outcome {
        passed: c.valid,
        summary: format!(
            "det signs {:+} / {:+}, y rank {}, straight barrier {:.6e}: {}",
            c.det_sign_theta,
            c.det_sign_theta_prime,
            c.y_rank,
            certified.record.barrier.strategies[0].barrier.unwrap_or(f64::NAN),
            if c.valid { "valid" } else { "invalid" }
        ),
        files: vec![file],
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContrastRecord {
    pub narrow: CertificateRecord,
    pub wide_widths: Vec<usize>,
    pub alpha: f64,
    pub regime: Option<Regime>,
    pub wide_report: Option<PathReport>,
    pub wide_error: Option<String>,
    pub connected: bool,
}

/// Bound used when connecting the padded global minima.
pub const CONTRAST_ALPHA: f64 = 1e-10;

/// Certify a width-`N` pair, then add one neuron with zero outgoing weights
/// and connect the same pair in width `N + 1`; writes `contrast.json`.
/// Passes iff the narrow certificate is valid and the wide path verifies.
pub fn cmd_contrast(cfg: &ExperimentConfig) -> Result<Outcome> {
    let out = prepare(cfg, Purpose::Certify)?;
    let certified = certify_instance(cfg)?;
    let inst = &certified.instance;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (wide, pts) = pad_first_layer(&inst.spec, &[&inst.theta, &certified.swapped], 1, &mut rng)?;
    let alpha = CONTRAST_ALPHA.max(loss(&wide, &pts[0], &inst.data)?).max(loss(&wide, &pts[1], &inst.data)?);
    let pcfg = cfg.path_config();
    let (regime, wide_report, wide_error) = match connect_sublevel(&wide, &inst.data, &pts[0], &pts[1], alpha, &pcfg) {
        Ok((path, regime)) => {
            let (report, trace) =
                verify_path_with_trace(&wide, &inst.data, &path, (&pts[0], &pts[1]), alpha, cfg.n_samples, &pcfg.tol);
            write_trace_csv(&out.join("contrast_trace.csv"), &trace)?;
            (Some(regime), Some(report), None)
        }
        Err(e) => (None, None, Some(e.to_string())),
    };
    let connected = wide_report.as_ref().is_some_and(|r| r.verdict == Verdict::Pass);
    let record = ContrastRecord {
        narrow: certified.record,
        wide_widths: wide.widths.clone(),
        alpha,
        regime,
        wide_report,
        wide_error,
        connected,
    };
    let file = out.join("contrast.json");
    json::write_file(&file, &record)?;
    let passed = record.narrow.certificate.valid && connected;
    Ok(Outcome {
        passed,
        summary: format!(
            "width {}: certificate {}; width {}: {}",
            inst.spec.widths[1],
            if record.narrow.certificate.valid { "valid" } else { "invalid" },
            wide.widths[1],
            if connected { "connected" } else { "not connected" }
        ),
        files: vec![file],
    })
}
