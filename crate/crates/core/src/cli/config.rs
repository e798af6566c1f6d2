//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::WithinVariance;
use crate::error::{Error, Result};
use crate::forward::{Phantom, Shapes2d};
use crate::lattice::Lattice;
use crate::optimize::OptimizerConfig;
use crate::priors::{Prior, PriorSpec};
use crate::realizations::NoiseFamily;
use crate::samplers::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Deconv1d,
    Deconv2d,
}

impl Problem {
    fn dims(self) -> usize {
        match self {
            Problem::Deconv1d => 1,
            Problem::Deconv2d => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    /// Fine grid for simulating 2D data; 1D data are integrated adaptively.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Lattice>,
    pub data: Lattice,
    pub reconstruction: Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomConfig {
    TestFunction,
    Shapes(Shapes2d),
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub max_lag: usize,
    /// Reconstruction nodes that get a marginal density estimate.
    pub kde_nodes: Vec<usize>,
    pub kde_points: usize,
    pub within_variance: WithinVariance,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig { max_lag: 100, kde_nodes: Vec::new(), kde_points: 200, within_variance: WithinVariance::Mean }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RealizationKind {
    Walk,
    Spde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationRequest {
    pub name: String,
    pub kind: RealizationKind,
    /// Walk order (1 or 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u8>,
    /// SPDE length parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    pub family: NoiseFamily,
    pub scale: f64,
    /// Defaults to the master seed, so requests without a seed share one noise stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizeConfig {
    pub lattice: Lattice,
    #[serde(default)]
    pub normalize: bool,
    pub items: Vec<RealizationRequest>,
}

fn default_chains() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("cmrf-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub grids: Grids,
    /// Kernel width `s` of `exp(-r^2/s)`.
    pub kernel_s: f64,
    pub noise_sigma: f64,
    /// Defaults to the 1D test function or the 2D shapes phantom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomConfig>,
    pub prior: PriorSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// `seed` is ignored; chain `i` uses `master_seed + i`.
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_chains")]
    pub n_chains: usize,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub diagnose: DiagnoseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realize: Option<RealizeConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { output_dir: default_out(), ..self.clone() };
        hex::encode(Sha256::digest(serde_json::to_vec(&canonical).expect("config serializes")))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.problem.dims();
        for (name, l) in [("data", &self.grids.data), ("reconstruction", &self.grids.reconstruction)]
            .into_iter()
            .chain(self.grids.simulation.as_ref().map(|l| ("simulation", l)))
        {
            l.validate()?;
            if l.dims() != d {
                return Err(Error::config(format!("{name} grid is not {d}-dimensional")));
            }
        }
        if !(self.kernel_s > 0.0 && self.kernel_s.is_finite()) {
            return Err(Error::config(format!("kernel_s must be positive, got {}", self.kernel_s)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config(format!("noise_sigma must be non-negative, got {}", self.noise_sigma)));
        }
        if self.phantom().dims() != d {
            return Err(Error::config("phantom does not match the problem dimension"));
        }
        Prior::<f64>::build(&self.prior, self.grids.reconstruction)?;
        self.optimizer.validate()?;
        self.sampler.validate(self.grids.reconstruction.len())?;
        if self.n_chains == 0 {
            return Err(Error::config("n_chains must be at least 1"));
        }
        let n = self.grids.reconstruction.len();
        if let Some(&k) = self.diagnose.kde_nodes.iter().find(|&&k| k >= n) {
            return Err(Error::OutOfRange { index: k, len: n });
        }
        if self.diagnose.kde_points < 2 {
            return Err(Error::config("kde_points must be at least 2"));
        }
        if let Some(r) = &self.realize {
            r.lattice.validate()?;
            for item in &r.items {
                if !(item.scale > 0.0 && item.scale.is_finite()) {
                    return Err(Error::config(format!("realization `{}` needs a positive scale", item.name)));
                }
                let ok = match item.kind {
                    RealizationKind::Walk => r.lattice.dims() == 1 && matches!(item.order, Some(1 | 2)),
                    RealizationKind::Spde => item.ell.is_some_and(|l| l > 0.0 && l.is_finite()),
                };
                if !ok {
                    return Err(Error::config(format!(
                        "realization `{}`: walks need a 1D lattice and order 1 or 2, SPDE fields need ell > 0",
                        item.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn phantom(&self) -> Phantom {
        match (&self.phantom, self.problem) {
            (Some(PhantomConfig::TestFunction), _) | (None, Problem::Deconv1d) => Phantom::TestFunction1d,
            (Some(PhantomConfig::Shapes(s)), _) => Phantom::Shapes2d(s.clone()),
            (None, Problem::Deconv2d) => Phantom::Shapes2d(Shapes2d::default()),
            (Some(PhantomConfig::Constant { value }), p) => Phantom::Constant { dims: p.dims(), value: *value },
        }
    }
}
