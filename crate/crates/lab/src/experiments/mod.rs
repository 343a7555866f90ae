//! The experiment suite. Each command samples the configured ensemble over
//! the configured sizes, reduces per-sample records deterministically and
//! emits a table, a summary with named checks and a manifest.

mod boundary;
mod green;
mod periodic;
mod sensitivity;

use std::sync::Mutex;
use std::fs;
use std::path::{Path, PathBuf};

use homog_core::ensemble::{CoefficientField, EnsembleSpec};
use homog_core::lattice::DomainGrid;
use homog_core::solver::SolveOptions;
use homog_core::stats::{fit_rate, RateFit};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::hgf::write_field;
use crate::output::{config_hash, write_json, write_outputs, Check, Manifest, Summary, Table};
use crate::runner::{run_ensemble, EnsembleRun, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Gen,
    Corrector,
    Rve,
    Sigma,
    Minrad,
    Fluct,
    Boundary,
    Layer,
    Clt,
    Lipschitz,
    Green,
    Decay,
    Expand,
    Sensitivity,
    Sgap,
}

impl Command {
    pub const ALL: [Command; 15] = [
        Command::Gen,
        Command::Corrector,
        Command::Rve,
        Command::Sigma,
        Command::Minrad,
        Command::Fluct,
        Command::Boundary,
        Command::Layer,
        Command::Clt,
        Command::Lipschitz,
        Command::Green,
        Command::Decay,
        Command::Expand,
        Command::Sensitivity,
        Command::Sgap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Corrector => "corrector",
            Command::Rve => "rve",
            Command::Sigma => "sigma",
            Command::Minrad => "minrad",
            Command::Fluct => "fluct",
            Command::Boundary => "boundary",
            Command::Layer => "layer",
            Command::Clt => "clt",
            Command::Lipschitz => "lipschitz",
            Command::Green => "green",
            Command::Decay => "decay",
            Command::Expand => "expand",
            Command::Sensitivity => "sensitivity",
            Command::Sgap => "sgap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub summary: Summary,
    pub manifest: Manifest,
}

/// Per-command state shared by the experiment bodies.
pub(crate) struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub spec: EnsembleSpec,
    pub opts: SolveOptions,
    command: Command,
    checkpoints: PathBuf,
    used: Mutex<Vec<PathBuf>>,
    counts: Mutex<(usize, usize, Vec<(u64, String)>)>,
}

impl<'a> Ctx<'a> {
    fn new(command: Command, cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate_values()?;
        let checkpoints = cfg.out.join(".checkpoint").join(&config_hash(cfg)[..16]);
        Ok(Ctx {
            cfg,
            spec: cfg.spec()?,
            opts: cfg.solve_options(),
            command,
            checkpoints,
            used: Mutex::new(Vec::new()),
            counts: Mutex::new((0, 0, Vec::new())),
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn samples(&self) -> usize {
        self.cfg.samples
    }

    pub fn deterministic(&self) -> bool {
        self.spec.is_deterministic()
    }

    /// Run `f` over samples `0..N` with checkpoints under `label`.
    pub fn run<T, F>(&self, label: &str, f: F) -> Result<EnsembleRun<T>>
    where
        T: Serialize + DeserializeOwned + Send,
        F: Fn(u64) -> homog_core::Result<T> + Sync,
    {
        self.run_n(label, self.samples(), f)
    }

    pub fn run_n<T, F>(&self, label: &str, n: usize, f: F) -> Result<EnsembleRun<T>>
    where
        T: Serialize + DeserializeOwned + Send,
        F: Fn(u64) -> homog_core::Result<T> + Sync,
    {
        let dir = self.checkpoints.join(format!("{}-{label}", self.command.name()));
        self.used.lock().expect("run bookkeeping").push(dir.clone());
        let run = run_ensemble(n, &RunOptions { workers: self.cfg.workers, checkpoint: Some(dir) }, f)?;
        let mut c = self.counts.lock().expect("run bookkeeping");
        c.0 += run.resumed;
        c.1 += run.computed;
        c.2.extend(run.failures.iter().map(|(i, r)| (*i, format!("{label}: {r}"))));
        Ok(run)
    }

    pub fn torus(&self, l: usize) -> Result<DomainGrid> {
        Ok(DomainGrid::torus(l, self.dim())?)
    }

    pub fn boxed(&self, l: usize) -> Result<DomainGrid> {
        Ok(DomainGrid::dirichlet_box(l, self.dim())?)
    }

    pub fn sample(&self, domain: &DomainGrid, idx: u64) -> homog_core::Result<CoefficientField> {
        self.spec.sample(domain, idx)
    }

    fn finish(self, table: Table, checks: Vec<Check>, values: Map<String, Value>, sign: Option<f64>) -> Result<Outcome> {
        let (resumed, computed, failures) = self.counts.into_inner().expect("run bookkeeping");
        let summary = Summary { command: self.command.name().to_string(), checks, values, resumed, computed, failures };
        let manifest = Manifest::new(self.command.name(), self.cfg, sign);
        write_outputs(&self.cfg.out, &table, &summary, &manifest)?;
        for dir in self.used.into_inner().expect("run bookkeeping") {
            let _ = fs::remove_dir_all(dir);
        }
        // only removes directories left empty
        let _ = fs::remove_dir(&self.checkpoints);
        let _ = fs::remove_dir(self.cfg.out.join(".checkpoint"));
        Ok(Outcome { table, summary, manifest })
    }
}

/// Run one command and write its outputs under `cfg.out`. Domain sizes are
/// not restricted to the command-line rule here; callers that accept user
/// input validate first.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    if command == Command::Gen {
        return gen(cfg);
    }
    let ctx = Ctx::new(command, cfg)?;
    let mut checks = Vec::new();
    let mut values = Map::new();
    let mut sign = None;
    let table = match command {
        Command::Gen => unreachable!(),
        Command::Corrector => periodic::corrector(&ctx, &mut checks, &mut values)?,
        Command::Rve => periodic::rve(&ctx, &mut checks, &mut values)?,
        Command::Sigma => periodic::sigma(&ctx, &mut checks, &mut values)?,
        Command::Minrad => periodic::minrad(&ctx, &mut checks, &mut values)?,
        Command::Fluct => periodic::fluct(&ctx, &mut checks, &mut values)?,
        Command::Boundary => boundary::boundary(&ctx, &mut checks, &mut values)?,
        Command::Layer => boundary::layer(&ctx, &mut checks, &mut values)?,
        Command::Clt => boundary::clt(&ctx, &mut checks, &mut values)?,
        Command::Lipschitz => boundary::lipschitz(&ctx, &mut checks, &mut values)?,
        Command::Green => green::green(&ctx, &mut checks, &mut values)?,
        Command::Decay => green::decay(&ctx, &mut checks, &mut values)?,
        Command::Expand => {
            let (t, s) = green::expand(&ctx, &mut checks, &mut values)?;
            sign = Some(s);
            t
        }
        Command::Sensitivity => sensitivity::sensitivity(&ctx, &mut checks, &mut values)?,
        Command::Sgap => sensitivity::sgap(&ctx, &mut checks, &mut values)?,
    };
    ctx.finish(table, checks, values, sign)
}

/// `gen`: sample 0 on a torus of the first configured size, written to the
/// `out` path as a field file plus a `.json` manifest beside it.
fn gen(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate_values()?;
    let spec = cfg.spec()?;
    let l = cfg.sizes[0];
    let domain = DomainGrid::torus(l, spec.dim)?;
    let field = spec.sample(&domain, 0)?;
    let path: &Path = &cfg.out;
    write_field(path, &field)?;
    let manifest = Manifest::new("gen", cfg, None);
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    write_json(Path::new(&sidecar), &manifest)?;
    let mut values = Map::new();
    values.insert("L".into(), json!(l));
    values.insert("edges".into(), json!(field.len()));
    values.insert("mean".into(), json!(field.values().iter().sum::<f64>() / field.len() as f64));
    let summary = Summary { command: "gen".into(), checks: Vec::new(), values, resumed: 0, computed: 1, failures: Vec::new() };
    Ok(Outcome { table: Table::new(&[]), summary, manifest })
}

/// Serde helper storing `Vec<f64>` as base64 of little-endian bytes, which
/// keeps large checkpoint records compact and bit-exact.
pub(crate) mod packed {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text).map_err(serde::de::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(serde::de::Error::custom("packed length is not a multiple of 8"));
        }
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub(crate) fn num(v: f64) -> String {
    crate::output::num(v)
}

/// `1, 2, 4, ...` up to `hi`.
pub(crate) fn dyadic(hi: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |r| Some(r * 2)).take_while(|&r| r <= hi).collect()
}

/// `(mean of x)^{1/p}` for per-sample means of `|v|^p`.
pub(crate) fn pool(per_sample: impl Iterator<Item = f64>, p: f64) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in per_sample {
        s += v;
        n += 1;
    }
    (s / n as f64).powf(1.0 / p)
}

pub(crate) fn fit_json(fit: &RateFit) -> Value {
    json!({
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "residual_std_error": fit.residual_std_error,
        "scale_min": fit.scale_min,
        "scale_max": fit.scale_max,
        "points": fit.points,
    })
}

/// Fit with the observable named in the error.
pub(crate) fn fit(points: &[(f64, f64)], what: &str) -> Result<RateFit> {
    fit_rate(points).map_err(|e| LabError::Analysis(format!("{what}: {e}")))
}

/// Fraction of entries satisfying `pred`.
pub(crate) fn fraction<T>(items: &[T], pred: impl Fn(&T) -> bool) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    items.iter().filter(|t| pred(t)).count() as f64 / items.len() as f64
}

/// The row prefix `L, sample`.
pub(crate) fn key(l: usize, sample: Option<u64>) -> Vec<String> {
    vec![l.to_string(), sample.map_or_else(|| "all".to_string(), |s| s.to_string())]
}

/// Slot in the output map for one domain size.
pub(crate) fn per_size(values: &mut Map<String, Value>, l: usize) -> &mut Map<String, Value> {
    values
        .entry(format!("L{l}"))
        .or_insert_with(|| Value::Object(Map::new()))
        .as_object_mut()
        .expect("object slot")
}

pub(crate) fn jensen_ok(moments: &[(f64, f64)]) -> bool {
    let mut sorted = moments.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted.windows(2).all(|w| w[0].1 <= w[1].1 * (1.0 + 1e-12) + 1e-300)
}
