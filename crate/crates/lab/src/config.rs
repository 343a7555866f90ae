//! Run configuration: a plain `key = value` file with optional `[section]`
//! headers and `#` comments, overridden by command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use homog_core::corrector::MinimalRadiusParams;
use homog_core::ensemble::{EnsembleSpec, Law};
use homog_core::solver::{Preconditioner, SolveOptions};

use crate::error::{LabError, Result};

pub const WORKERS_ENV: &str = "HOMOG_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    TwoPhase,
    LogUniform,
}

impl LawKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "two-phase" => Some(LawKind::TwoPhase),
            "log-uniform" => Some(LawKind::LogUniform),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LawKind::TwoPhase => "two-phase",
            LawKind::LogUniform => "log-uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub law: LawKind,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub lambda: f64,
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub moments: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub minrad: MinimalRadiusParams,
}

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&w| w >= 1).unwrap_or(1)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            law: LawKind::TwoPhase,
            alpha: 0.25,
            beta: 4.0,
            p: 0.5,
            lambda: 0.25,
            dim: 2,
            sizes: vec![32],
            samples: 8,
            moments: vec![2.0],
            seed: 1,
            workers: default_workers(),
            out: PathBuf::from("out"),
            tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Diagonal,
            minrad: MinimalRadiusParams::default(),
        }
    }
}

impl RunConfig {
    pub fn spec(&self) -> Result<EnsembleSpec> {
        let law = match self.law {
            LawKind::TwoPhase => Law::TwoPhase { alpha: self.alpha, beta: self.beta, p: self.p },
            LawKind::LogUniform => Law::LogUniform,
        };
        Ok(EnsembleSpec::new(self.dim, self.lambda, law)?.with_seed(self.seed))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tolerance: self.tol, max_iterations: self.max_iter, preconditioner: self.preconditioner }
    }

    /// Cross-key checks plus the domain-size rule of the command line.
    pub fn validate(&self) -> Result<()> {
        self.validate_values()?;
        for &l in &self.sizes {
            check_size(l).map_err(LabError::Config)?;
        }
        Ok(())
    }

    /// Everything but the power-of-two size rule.
    pub fn validate_values(&self) -> Result<()> {
        self.spec()?;
        self.solve_options().validate()?;
        self.minrad.validate()?;
        if self.sizes.is_empty() {
            return Err(LabError::Config("L: at least one domain size is required".into()));
        }
        if self.sizes.iter().any(|&l| l < 8) {
            return Err(LabError::Config("L: domain sizes below 8 are too small for every experiment".into()));
        }
        if self.samples == 0 {
            return Err(LabError::Config("N must be at least 1".into()));
        }
        if self.moments.is_empty() || self.moments.iter().any(|&p| !(p >= 1.0)) {
            return Err(LabError::Config("moments: every order must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(LabError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "[ensemble]");
        let _ = writeln!(s, "law = {}", self.law.name());
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "d = {}", self.dim);
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "L = {}", self.sizes.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","));
        let _ = writeln!(s, "N = {}", self.samples);
        let _ = writeln!(s, "moments = {}", list(&self.moments));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "tol = {}", self.tol);
        let _ = writeln!(s, "max_iter = {}", self.max_iter.map_or("auto".to_string(), |m| m.to_string()));
        let pc = match self.preconditioner {
            Preconditioner::None => "none",
            Preconditioner::Diagonal => "diagonal",
        };
        let _ = writeln!(s, "preconditioner = {pc}");
        let _ = writeln!(s, "\n[minrad]");
        let _ = writeln!(s, "theta = {}", self.minrad.theta);
        let _ = writeln!(s, "p = {}", self.minrad.p);
        let _ = writeln!(s, "gamma = {}", self.minrad.gamma);
        let _ = writeln!(s, "c_theta = {}", self.minrad.c_theta);
        s
    }

    /// Serialization without the worker count, which never changes results.
    pub fn canonical(&self) -> String {
        self.serialize().lines().filter(|l| !l.starts_with("workers")).collect::<Vec<_>>().join("\n")
    }
}

pub fn check_size(l: usize) -> std::result::Result<(), String> {
    if l.is_power_of_two() && (8..=512).contains(&l) {
        Ok(())
    } else {
        Err(format!("L = {l}: domain sizes must be powers of two in [8, 512]"))
    }
}

const SECTIONS: [&str; 4] = ["ensemble", "run", "solver", "minrad"];

fn section_of(bare: &str) -> Option<&'static str> {
    match bare {
        "law" | "alpha" | "beta" | "p" | "lambda" | "d" => Some("ensemble"),
        "L" | "N" | "moments" | "seed" | "workers" | "out" => Some("run"),
        "tol" | "max_iter" | "preconditioner" => Some("solver"),
        "theta" | "gamma" | "c_theta" => Some("minrad"),
        _ => None,
    }
}

fn known(section: &str, key: &str) -> bool {
    match section {
        "minrad" => matches!(key, "theta" | "p" | "gamma" | "c_theta"),
        s => section_of(key) == Some(s),
    }
}

fn num<T: std::str::FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("{what}: cannot parse '{v}'"))
}

fn positive_list<T: std::str::FromStr>(v: &str, what: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|x| num(x.trim(), what)).collect()
}

fn apply(cfg: &mut RunConfig, section: &str, key: &str, v: &str) -> std::result::Result<(), String> {
    match (section, key) {
        ("ensemble", "law") => {
            cfg.law = LawKind::parse(v).ok_or_else(|| format!("law: expected two-phase or log-uniform, got '{v}'"))?
        }
        ("ensemble", "alpha") => cfg.alpha = num(v, "alpha")?,
        ("ensemble", "beta") => cfg.beta = num(v, "beta")?,
        ("ensemble", "p") => {
            cfg.p = num(v, "p")?;
            if !(0.0..=1.0).contains(&cfg.p) {
                return Err(format!("p = {v} outside [0, 1]"));
            }
        }
        ("ensemble", "lambda") => {
            cfg.lambda = num(v, "lambda")?;
            if !(cfg.lambda > 0.0 && cfg.lambda < 1.0) {
                return Err(format!("lambda = {v} outside (0, 1)"));
            }
        }
        ("ensemble", "d") => {
            cfg.dim = num(v, "d")?;
            if !(1..=3).contains(&cfg.dim) {
                return Err(format!("d = {v}: dimension must be 1, 2 or 3"));
            }
        }
        ("run", "L") => {
            cfg.sizes = positive_list(v, "L")?;
            for &l in &cfg.sizes {
                check_size(l)?;
            }
        }
        ("run", "N") => {
            cfg.samples = num(v, "N")?;
            if cfg.samples == 0 {
                return Err("N must be at least 1".into());
            }
        }
        ("run", "moments") => {
            cfg.moments = positive_list(v, "moments")?;
            if cfg.moments.iter().any(|&p| !(p >= 1.0)) {
                return Err(format!("moments = {v}: every order must be at least 1"));
            }
        }
        ("run", "seed") => cfg.seed = num(v, "seed")?,
        ("run", "workers") => {
            cfg.workers = num(v, "workers")?;
            if cfg.workers == 0 {
                return Err("workers must be at least 1".into());
            }
        }
        ("run", "out") => cfg.out = PathBuf::from(v),
        ("solver", "tol") => {
            cfg.tol = num(v, "tol")?;
            if !(cfg.tol > 0.0 && cfg.tol < 1.0) {
                return Err(format!("tol = {v} outside (0, 1)"));
            }
        }
        ("solver", "max_iter") => {
            cfg.max_iter = if v == "auto" { None } else { Some(num(v, "max_iter")?) };
            if cfg.max_iter == Some(0) {
                return Err("max_iter must be at least 1".into());
            }
        }
        ("solver", "preconditioner") => {
            cfg.preconditioner = match v {
                "none" => Preconditioner::None,
                "diagonal" => Preconditioner::Diagonal,
                _ => return Err(format!("preconditioner: expected none or diagonal, got '{v}'")),
            }
        }
        ("minrad", "theta") => {
            cfg.minrad.theta = num(v, "theta")?;
            if !(cfg.minrad.theta > 0.0 && cfg.minrad.theta < 1.0) {
                return Err(format!("theta = {v} outside (0, 1)"));
            }
        }
        ("minrad", "p") => {
            cfg.minrad.p = num(v, "minrad p")?;
            if !(cfg.minrad.p > 1.0) {
                return Err(format!("minrad p = {v} must exceed 1"));
            }
        }
        ("minrad", "gamma") => {
            cfg.minrad.gamma = num(v, "gamma")?;
            if !(cfg.minrad.gamma >= 1.0) {
                return Err(format!("gamma = {v} must be at least 1"));
            }
        }
        ("minrad", "c_theta") => {
            cfg.minrad.c_theta = num(v, "c_theta")?;
            if !(cfg.minrad.c_theta > 0.0) {
                return Err(format!("c_theta = {v} must be positive"));
            }
        }
        _ => return Err(format!("unknown key '{key}' in [{section}]")),
    }
    Ok(())
}

/// Parse a configuration file on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_onto(RunConfig::default(), text)
}

pub fn parse_onto(mut cfg: RunConfig, text: &str) -> Result<RunConfig> {
    let mut section: Option<String> = None;
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| LabError::ConfigLine { line, message };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| err(format!("malformed section header '{body}'")))?.trim();
            if !SECTIONS.contains(&name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| err(format!("expected 'key = value', got '{body}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = match &section {
            Some(s) => s.clone(),
            None => section_of(key).ok_or_else(|| err(format!("unknown key '{key}'")))?.to_string(),
        };
        if !known(&sec, key) {
            return Err(err(format!("unknown key '{key}' in [{sec}]")));
        }
        if let Some(first) = seen.insert((sec.clone(), key.to_string()), line) {
            return Err(err(format!("duplicate key '{key}' (first set on line {first})")));
        }
        apply(&mut cfg, &sec, key, value).map_err(err)?;
    }
    Ok(cfg)
}

/// Flag values layered over a file configuration; `None` keeps the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub law: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub dim: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub moments: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub theta: Option<f64>,
    pub gamma: Option<f64>,
    pub minrad_p: Option<f64>,
    pub c_theta: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let flag = |name: &str, r: std::result::Result<(), String>| r.map_err(|m| LabError::Config(format!("--{name}: {m}")));
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        if let Some(v) = &self.law {
            flag("law", apply(cfg, "ensemble", "law", v))?;
        }
        for (name, key, v) in [("alpha", "alpha", self.alpha), ("beta", "beta", self.beta), ("p", "p", self.p), ("lambda", "lambda", self.lambda)] {
            if let Some(v) = v {
                flag(name, apply(cfg, "ensemble", key, &v.to_string()))?;
            }
        }
        if let Some(v) = self.dim {
            flag("d", apply(cfg, "ensemble", "d", &v.to_string()))?;
        }
        if let Some(v) = &self.sizes {
            let s = v.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",");
            flag("L", apply(cfg, "run", "L", &s))?;
        }
        if let Some(v) = self.samples {
            flag("N", apply(cfg, "run", "N", &v.to_string()))?;
        }
        if let Some(v) = &self.moments {
            flag("moments", apply(cfg, "run", "moments", &join(v)))?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            flag("workers", apply(cfg, "run", "workers", &v.to_string()))?;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.tol {
            flag("tol", apply(cfg, "solver", "tol", &v.to_string()))?;
        }
        if let Some(v) = self.max_iter {
            flag("max-iter", apply(cfg, "solver", "max_iter", &v.to_string()))?;
        }
        for (name, key, v) in [("theta", "theta", self.theta), ("gamma", "gamma", self.gamma), ("mr-p", "p", self.minrad_p), ("c-theta", "c_theta", self.c_theta)] {
            if let Some(v) = v {
                flag(name, apply(cfg, "minrad", key, &v.to_string()))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn lambda_key() {
        assert_eq!(parse_config("lambda = 0.25").unwrap().lambda, 0.25);
        assert_eq!(parse_config("[ensemble]\nlambda = 0.5 # inline").unwrap().lambda, 0.5);
    }

    #[test]
    fn size_seven_is_rejected_with_line() {
        let err = parse_config("\nL = 7").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("line 2:") && msg.contains("powers of two"), "{msg}");
        assert!(err.is_config());
    }

    #[test]
    fn duplicate_and_unknown_keys() {
        let dup = parse_config("N = 4\nN = 5").unwrap_err().to_string();
        assert!(dup.contains("line 2") && dup.contains("duplicate"), "{dup}");
        let unknown = parse_config("[run]\nbogus = 1").unwrap_err().to_string();
        assert!(unknown.contains("line 2") && unknown.contains("unknown key"), "{unknown}");
        assert!(parse_config("[nowhere]").is_err());
        assert!(parse_config("[run]\nlambda = 0.3").is_err());
    }

    #[test]
    fn sections_disambiguate_p() {
        let cfg = parse_config("p = 0.3\n[minrad]\np = 3").unwrap();
        assert_eq!((cfg.p, cfg.minrad.p), (0.3, 3.0));
    }

    #[test]
    fn round_trip_of_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(parse_config(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn overrides_win() {
        let mut cfg = parse_config("N = 4\nL = 16").unwrap();
        Overrides { samples: Some(9), sizes: Some(vec![8, 64]), ..Default::default() }.apply(&mut cfg).unwrap();
        assert_eq!((cfg.samples, cfg.sizes.clone()), (9, vec![8, 64]));
        let bad = Overrides { sizes: Some(vec![7]), ..Default::default() }.apply(&mut cfg).unwrap_err();
        assert!(bad.is_config() && bad.to_string().contains("powers of two"));
    }

    #[test]
    fn cross_key_validation() {
        let cfg = parse_config("lambda = 0.5\nalpha = 0.25").unwrap();
        assert!(cfg.validate().unwrap_err().is_config());
    }
}
