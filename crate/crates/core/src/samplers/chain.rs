use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Algorithm;
use crate::error::{Error, Result};
use crate::num::Real;

/// Stored samples of one chain plus run statistics. `samples` is row-major, one row per
/// stored state.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T> {
    pub samples: Vec<T>,
    pub meta: ChainMeta,
}

/// Everything about a chain except its samples; this is the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub algorithm: Algorithm,
    pub dim: usize,
    pub rows: usize,
    pub seed: u64,
    pub thin: usize,
    /// Iteration at which adaptation stopped (equals the number of adaptation iterations).
    pub adaptation_stopped_at: usize,
    /// Post-adaptation acceptance rate per block (MwG, RAM) or mean acceptance statistic (NUTS).
    pub acceptance_rate: Vec<f64>,
    /// Divergent NUTS transitions after adaptation.
    pub divergences: usize,
    /// RAM stages that hit `repelling_max_tries` and accepted their last proposal.
    pub fallbacks: usize,
    pub step_size: Option<f64>,
    pub inv_metric: Option<Vec<f64>>,
    /// Final lower Cholesky factors of the block proposals (row-major).
    pub proposal_factors: Vec<Vec<f64>>,
    pub mean_tree_depth: Option<f64>,
    /// Most states in a single NUTS trajectory.
    pub max_trajectory_states: usize,
}

impl ChainMeta {
    pub(crate) fn new(algorithm: Algorithm, dim: usize, seed: u64, thin: usize, n_adapt: usize) -> Self {
        ChainMeta {
            algorithm,
            dim,
            rows: 0,
            seed,
            thin,
            adaptation_stopped_at: n_adapt,
            acceptance_rate: Vec::new(),
            divergences: 0,
            fallbacks: 0,
            step_size: None,
            inv_metric: None,
            proposal_factors: Vec::new(),
            mean_tree_depth: None,
            max_trajectory_states: 0,
        }
    }
}

impl<T: Real> Chain<T> {
    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn rows(&self) -> usize {
        self.meta.rows
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.samples[t * self.meta.dim..(t + 1) * self.meta.dim]
    }

    /// Trace of one component.
    pub fn component(&self, k: usize) -> Vec<T> {
        self.samples.iter().skip(k).step_by(self.meta.dim).copied().collect()
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim()];
        for t in 0..self.rows() {
            for (mi, &v) in m.iter_mut().zip(self.row(t)) {
                *mi += v;
            }
        }
        let n = T::from_usize_lossy(self.rows().max(1));
        m.into_iter().map(|v| v / n).collect()
    }

    /// Writes `<stem>.bin` (little-endian f64, row-major) and `<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.samples.len() * 8);
        for v in &self.samples {
            bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&self.meta)? + "\n")?;
        Ok(())
    }
}

impl Chain<f64> {
    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let meta: ChainMeta = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
        if bytes.len() != meta.rows * meta.dim * 8 {
            return Err(Error::Dimension { expected: meta.rows * meta.dim * 8, got: bytes.len() });
        }
        let samples = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(Chain { samples, meta })
    }
}
