use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RealizationKind};
use crate::diagnostics::{diagnose, kde, silverman_bandwidth};
use crate::error::{Error, Result};
use crate::forward::{build_operator, simulate_data, Measurement, SimulationOptions};
use crate::lattice::{Field, Lattice};
use crate::optimize::lbfgs_map;
use crate::posterior::Posterior;
use crate::priors::Prior;
use crate::realizations::{normalize_max_abs, random_walk_1d, spde_realization, NoiseSpec};
use crate::samplers::{run_chains, Chain, SamplerConfig};

const MEASUREMENT: &str = "measurement.json";
const MAP: &str = "map.json";
const TRUNCATION: f64 = 1e-12;

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    config_sha256: String,
    master_seed: u64,
    commands: BTreeMap<String, CommandRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CommandRecord {
    seeds: Vec<u64>,
    outputs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapFile {
    lattice: Lattice,
    u_map: Vec<f64>,
    log_post: f64,
    iterations: usize,
    converged: bool,
}

/// Output directory of one run; every written file is recorded in `manifest.json`.
pub(crate) struct Run<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    outputs: Vec<String>,
}

impl<'a> Run<'a> {
    pub(crate) fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let dir = cfg.output_dir.clone();
        fs::create_dir_all(&dir)?;
        Ok(Run { cfg, dir, outputs: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        fs::write(self.path(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }

    fn read_json<D: for<'de> Deserialize<'de>>(&self, name: &str, needed_by: &str) -> Result<D> {
        let path = self.path(name);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::config(format!("{needed_by} needs {} ({e})", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn finish(self, command: &str, seeds: Vec<u64>) -> Result<()> {
        let path = self.path("manifest.json");
        let hash = self.cfg.hash();
        let mut m: Manifest = fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .filter(|m: &Manifest| m.config_sha256 == hash)
            .unwrap_or_default();
        m.tool = env!("CARGO_PKG_NAME").into();
        m.version = env!("CARGO_PKG_VERSION").into();
        m.config_sha256 = hash;
        m.master_seed = self.cfg.master_seed;
        fs::write(self.path("config.json"), self.cfg.to_json() + "\n")?;
        m.commands.insert(command.into(), CommandRecord { seeds, outputs: self.outputs });
        fs::write(path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(())
    }
}

/// One row per node: coordinates followed by the given columns.
fn field_csv(lattice: &Lattice, columns: &[(&str, &[f64])]) -> String {
    let mut s = String::from(if lattice.dims() == 1 { "index,x" } else { "index,x,y" });
    for (name, _) in columns {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for k in 0..lattice.len() {
        let (x, y) = lattice.position::<f64>(k);
        write!(s, "{k},{x}").unwrap();
        if lattice.dims() == 2 {
            write!(s, ",{y}").unwrap();
        }
        for (_, v) in columns {
            write!(s, ",{}", v[k]).unwrap();
        }
        s.push('\n');
    }
    s
}

fn posterior(cfg: &ExperimentConfig, m: &Measurement) -> Result<Posterior<f64>> {
    if m.grid != cfg.grids.data || m.y.len() != cfg.grids.data.len() {
        return Err(Error::config("measurement grid does not match the configured data grid"));
    }
    let op = build_operator(cfg.grids.data, cfg.grids.reconstruction, cfg.kernel_s, TRUNCATION)?;
    let prior = Prior::build(&cfg.prior, cfg.grids.reconstruction)?;
    Posterior::new(op, m.y.clone(), m.sigma, prior)
}

pub(crate) fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    if cfg.grids.simulation == Some(cfg.grids.reconstruction) {
        log::warn!("simulation grid equals the reconstruction grid (inverse crime)");
    }
    let opts = SimulationOptions { fine_grid: cfg.grids.simulation, ..Default::default() };
    let phantom = cfg.phantom();
    let m = simulate_data(&phantom, cfg.grids.data, cfg.kernel_s, cfg.noise_sigma, cfg.master_seed, &opts)?;
    log::info!("simulated {} data points", m.y.len());
    run.write_json(MEASUREMENT, &m)?;
    let truth = phantom.on_lattice(cfg.grids.reconstruction)?;
    run.write("phantom.csv", field_csv(truth.lattice(), &[("value", truth.values())]))?;
    run.finish("simulate", vec![cfg.master_seed])
}

pub(crate) fn map(cfg: &ExperimentConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let m: Measurement = run.read_json(MEASUREMENT, "map")?;
    let p = posterior(cfg, &m)?;
    let r = lbfgs_map(&p, &Field::zeros(cfg.grids.reconstruction), &cfg.optimizer)?;
    if !r.log_post.is_finite() || r.u_map.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("MAP estimate is not finite"));
    }
    if !r.converged {
        log::warn!("L-BFGS stopped after {} iterations without meeting the tolerance", r.iterations);
    }
    log::info!("MAP log posterior {} after {} iterations", r.log_post, r.iterations);
    run.write("map.csv", field_csv(r.u_map.lattice(), &[("u_map", r.u_map.values())]))?;
    let mut trace = String::from("iteration,grad_norm,log10_grad_norm\n");
    for (i, g) in r.grad_norm_trace.iter().enumerate() {
        writeln!(trace, "{i},{g},{}", g.log10()).unwrap();
    }
    run.write("grad_trace.csv", trace)?;
    let file = MapFile {
        lattice: *r.u_map.lattice(),
        u_map: r.u_map.values().to_vec(),
        log_post: r.log_post,
        iterations: r.iterations,
        converged: r.converged,
    };
    run.write_json(MAP, &file)?;
    run.finish("map", Vec::new())
}

fn chain_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.n_chains as u64).map(|i| cfg.master_seed.wrapping_add(i)).collect()
}

pub(crate) fn sample(cfg: &ExperimentConfig) -> Result<()> {
    let mut run = Run::new(cfg)?;
    let m: Measurement = run.read_json(MEASUREMENT, "sample")?;
    let start: MapFile = run.read_json(MAP, "sample")?;
    if start.lattice != cfg.grids.reconstruction {
        return Err(Error::config("map.json was computed on a different reconstruction grid"));
    }
    let p = posterior(cfg, &m)?;
    let sc = SamplerConfig { seed: cfg.master_seed, ..cfg.sampler.clone() };
    let chains = run_chains(&p, &start.u_map, &sc, cfg.n_chains)?;
    for (i, c) in chains.iter().enumerate() {
        if c.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("chain {i} contains non-finite samples")));
        }
        let stem = format!("chain_{i}");
        c.save(&run.dir, &stem)?;
        run.outputs.push(format!("{stem}.bin"));
        run.outputs.push(format!("{stem}.json"));
        log::info!("chain {i}: {} rows, acceptance {:?}", c.rows(), c.meta.acceptance_rate);
    }
    run.finish("sample", chain_seeds(cfg))
}

#[derive(Serialize)]
struct DiagnosticsJson<'a> {
    n_chains: usize,
    rows_per_chain: usize,
    max_psrf: f64,
    min_ess: f64,
    report: &'a crate::diagnostics::DiagnosticsReport,
}

pub(crate) fn diagnose_cmd(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.n_chains < 2 {
        return Err(Error::config("PSRF needs at least two chains"));
    }
    let mut run = Run::new(cfg)?;
    let chains = (0..cfg.n_chains)
        .map(|i| {
            Chain::load(&run.dir, &format!("chain_{i}"))
                .map_err(|e| Error::config(format!("diagnose needs chain_{i} ({e})")))
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = chains[0].dim();
    if dim != cfg.grids.reconstruction.len() {
        return Err(Error::Dimension { expected: cfg.grids.reconstruction.len(), got: dim });
    }
    let report = diagnose(&chains, cfg.diagnose.max_lag, cfg.diagnose.within_variance)?;
    let mut csv = String::from("component,psrf,ess\n");
    for k in 0..dim {
        writeln!(csv, "{k},{},{}", report.psrf[k], report.ess[k]).unwrap();
    }
    run.write("diagnostics.csv", csv)?;
    let summary = DiagnosticsJson {
        n_chains: chains.len(),
        rows_per_chain: chains[0].rows(),
        max_psrf: report.psrf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_ess: report.ess.iter().copied().fold(f64::INFINITY, f64::min),
        report: &report,
    };
    run.write_json("diagnostics.json", &summary)?;

    let total = chains.iter().map(|c| c.rows()).sum::<usize>() as f64;
    let mut mean = vec![0.0; dim];
    for c in &chains {
        for t in 0..c.rows() {
            for (m, v) in mean.iter_mut().zip(c.row(t)) {
                *m += v / total;
            }
        }
    }
    let mut var = vec![0.0; dim];
    for c in &chains {
        for t in 0..c.rows() {
            for ((s, v), m) in var.iter_mut().zip(c.row(t)).zip(&mean) {
                *s += (v - m) * (v - m) / (total - 1.0);
            }
        }
    }
    let lattice = cfg.grids.reconstruction;
    run.write("cm.csv", field_csv(&lattice, &[("cm", &mean)]))?;
    run.write("variance.csv", field_csv(&lattice, &[("variance", &var)]))?;

    for &k in &cfg.diagnose.kde_nodes {
        let pooled: Vec<f64> = chains.iter().flat_map(|c| c.component(k)).collect();
        let b = silverman_bandwidth(&pooled)?;
        let lo = pooled.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * b;
        let hi = pooled.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * b;
        let n = cfg.diagnose.kde_points;
        let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let d = kde(&pooled, &xs, Some(b))?;
        let mut csv = String::from("x,density\n");
        for (x, v) in xs.iter().zip(&d) {
            writeln!(csv, "{x},{v}").unwrap();
        }
        run.write(&format!("kde_node_{k}.csv"), csv)?;
    }
    log::info!("max PSRF {}", summary.max_psrf);
    run.finish("diagnose", Vec::new())
}

pub(crate) fn realize(cfg: &ExperimentConfig) -> Result<()> {
    let rc = cfg.realize.as_ref().ok_or_else(|| Error::config("realize needs a `realize` section"))?;
    let mut run = Run::new(cfg)?;
    let h = 1.0 / (rc.lattice.shape().0 - 1) as f64;
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut seeds = Vec::new();
    for item in &rc.items {
        let noise = NoiseSpec { family: item.family, scale: item.scale, seed: item.seed.unwrap_or(cfg.master_seed) };
        let field: Field<f64> = match item.kind {
            RealizationKind::Walk => random_walk_1d(item.order.unwrap_or(1), &noise, rc.lattice.len(), h)?,
            RealizationKind::Spde => spde_realization(&rc.lattice, item.ell.unwrap_or_default(), &noise)?,
        };
        let mut v = field.into_values();
        if rc.normalize {
            normalize_max_abs(&mut v);
        }
        seeds.push(noise.seed);
        columns.push((item.name.clone(), v));
    }
    let cols: Vec<(&str, &[f64])> = columns.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    run.write("realizations.csv", field_csv(&rc.lattice, &cols))?;
    run.finish("realize", seeds)
}
