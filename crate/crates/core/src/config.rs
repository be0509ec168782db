//! Flat experiment configuration, read from TOML.
//!
//! ```toml
//! widths = [2, 4, 1]
//! activation_slope = 0.5
//! loss = "square"
//! samples = 3
//! data_seed = 0
//! steps = 2000
//! learning_rate = 0.05
//! seed_a = 1
//! seed_b = 2
//! ```

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Tolerances;
use crate::net::{check_distinct_rows, Activation, DataSet, LossKind, NetworkSpec};
use crate::path::{HomotopyConfig, PathConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Layer widths `n_0, ..., n_L`.
    pub widths: Vec<usize>,
    /// Negative-side slope of the leaky ReLU.
    pub activation_slope: f64,
    pub loss: LossKind,

    /// Number of generated training samples `N`.
    pub samples: usize,
    pub data_seed: u64,
    /// Read the data set from this JSON file instead of generating it.
    pub data_file: Option<PathBuf>,

    /// Sublevel bound; the larger endpoint loss when absent.
    pub alpha: Option<f64>,

    pub steps: usize,
    pub learning_rate: f64,
    pub seed_a: u64,
    pub seed_b: u64,

    /// Seed for path construction and certificate instances.
    pub seed: u64,
    /// Verifier samples per segment.
    pub n_samples: usize,
    pub max_retries: usize,
    pub homotopy_knots: usize,
    pub homotopy_iterations: usize,

    pub rank_tol_rel: f64,
    pub feas_tol: f64,
    pub inv_tol: f64,
    pub verify_tol: f64,
    pub det_tol: f64,

    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tol = Tolerances::default();
        let path = PathConfig::default();
        ExperimentConfig {
            widths: vec![2, 4, 1],
            activation_slope: 0.5,
            loss: LossKind::Square,
            samples: 3,
            data_seed: 0,
            data_file: None,
            alpha: None,
            steps: 2000,
            learning_rate: 0.05,
            seed_a: 1,
            seed_b: 2,
            seed: 0,
            n_samples: path.n_samples,
            max_retries: path.max_retries,
            homotopy_knots: path.homotopy.knots,
            homotopy_iterations: path.homotopy.iterations,
            rank_tol_rel: tol.rank_tol_rel,
            feas_tol: tol.feas_tol,
            inv_tol: tol.inv_tol,
            verify_tol: tol.verify_tol,
            det_tol: tol.det_tol,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Which width rule a command needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Train,
    Connect,
    Certify,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rank_tol_rel: self.rank_tol_rel,
            feas_tol: self.feas_tol,
            inv_tol: self.inv_tol,
            verify_tol: self.verify_tol,
            det_tol: self.det_tol,
        }
    }

    pub fn path_config(&self) -> PathConfig {
        PathConfig {
            tol: self.tolerances(),
            n_samples: self.n_samples,
            max_retries: self.max_retries,
            seed: self.seed,
            homotopy: HomotopyConfig {
                knots: self.homotopy_knots,
                iterations: self.homotopy_iterations,
                ..HomotopyConfig::default()
            },
        }
    }

    pub fn spec(&self) -> Result<NetworkSpec> {
        let activation = Activation::leaky_relu(self.activation_slope)?;
        NetworkSpec::new(self.widths.clone(), activation, self.loss)
    }

    /// Check everything that can be checked before running `purpose`.
    pub fn validate(&self, purpose: Purpose) -> Result<()> {
        self.tolerances().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.spec().map_err(|e| Error::Config(e.to_string()))?;
        if self.n_samples < 2 {
            return Err(Error::Config("n_samples must be at least 2".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return Err(Error::Config("alpha must be finite".into()));
            }
        }
        let n = self.samples;
        if n == 0 && self.data_file.is_none() {
            return Err(Error::Config("samples must be positive".into()));
        }
        match purpose {
            Purpose::Train => Ok(()),
            Purpose::Connect => {
                if self.data_file.is_none() && self.widths[1] < n + 1 {
                    return Err(Error::Config(format!("n_1 must be >= N+1 (n_1 = {}, N = {n})", self.widths[1])));
                }
                if !self.spec()?.has_pyramidal_tail() {
                    return Err(Error::Config("widths after the first hidden layer must strictly decrease".into()));
                }
                Ok(())
            }
            Purpose::Certify => {
                if self.widths.len() != 3 || self.widths[1] != n || self.widths[2] != n {
                    return Err(Error::Config(format!(
                        "certify needs widths [n_0, N, N] with N = samples = {n}, got {:?}",
                        self.widths
                    )));
                }
                if n < 2 {
                    return Err(Error::Config("certify needs N >= 2".into()));
                }
                if self.loss != LossKind::Square {
                    return Err(Error::Config("certify uses the square loss".into()));
                }
                Ok(())
            }
        }
    }

    /// The training set: read from `data_file`, or generated from
    /// `data_seed` (Gaussian inputs; Gaussian targets for the square loss,
    /// balanced one-hot classes for cross-entropy).
    pub fn data(&self) -> Result<DataSet> {
        let spec = self.spec()?;
        let data = match &self.data_file {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => generate_data(&spec, self.samples, self.data_seed)?,
        };
        spec.check_data(&data)?;
        Ok(data)
    }
}

pub fn generate_data(spec: &NetworkSpec, n: usize, seed: u64) -> Result<DataSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = loop {
        let x = DMatrix::from_fn(n, spec.input_dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        if check_distinct_rows(&x, 0.0) {
            break x;
        }
    };
    let k = spec.output_dim();
    let y = match spec.loss {
        LossKind::Square => DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal)),
        LossKind::CrossEntropy => {
            let mut classes: Vec<usize> = (0..n).map(|i| i % k).collect();
            classes.shuffle(&mut rng);
            DMatrix::from_fn(n, k, |i, j| if classes[i] == j { 1.0 } else { 0.0 })
        }
    };
    DataSet::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("widths = [3, 6, 2]\nsamples = 5\nloss = \"cross_entropy\"").unwrap();
        assert_eq!(cfg.widths, vec![3, 6, 2]);
        assert_eq!(cfg.verify_tol, 1e-6);
        cfg.validate(Purpose::Connect).unwrap();
        let data = cfg.data().unwrap();
        assert!(data.y().row_iter().all(|r| r.sum() == 1.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("widthz = [1, 2]").is_err());
    }

    #[test]
    fn width_rules() {
        let narrow = ExperimentConfig { widths: vec![2, 3, 1], samples: 3, ..Default::default() };
        let err = narrow.validate(Purpose::Connect).unwrap_err().to_string();
        assert!(err.contains("n_1 must be >= N+1"), "{err}");
        narrow.validate(Purpose::Train).unwrap();

        let cert = ExperimentConfig { widths: vec![2, 3, 3], samples: 3, ..Default::default() };
        cert.validate(Purpose::Certify).unwrap();
        let rigged = ExperimentConfig { widths: vec![2, 4, 3], samples: 3, ..Default::default() };
        assert!(rigged.validate(Purpose::Certify).is_err());

        let bad_tol = ExperimentConfig { verify_tol: 0.0, ..Default::default() };
        assert!(bad_tol.validate(Purpose::Train).is_err());
    }
}
