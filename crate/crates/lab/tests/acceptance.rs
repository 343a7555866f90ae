//! Acceptance suite: one PASS/FAIL line per criterion, at the pinned sizes.
//!
//! Runs for tens of minutes on a single core. `HOMOG_WORKERS` sets the pool
//! size (default: available parallelism).

use std::fs;
use std::path::Path;
use std::time::Instant;

use homog_core::ensemble::{EnsembleSpec, Law};
use homog_core::lattice::{assemble, divergence, gradient, DomainGrid, DomainKind};
use homog_core::solver::{solve_cg, solve_dense, solve_periodic_dense, solve_periodic_mean_zero, SolveOptions};
use homog_lab::config::{parse_onto, LawKind, RunConfig};
use homog_lab::experiments::{execute, Command, Outcome};
use homog_lab::output::{output_paths, Manifest};

type Criterion<'a> = (&'static str, &'static str, Box<dyn Fn() -> Verdict + 'a>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn workers() -> usize {
    std::env::var("HOMOG_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn config(out: &Path, dim: usize, sizes: &[usize], samples: usize) -> RunConfig {
    RunConfig { dim, sizes: sizes.to_vec(), samples, workers: workers(), out: out.to_path_buf(), seed: 20_240_601, ..RunConfig::default() }
}

fn run(command: Command, cfg: &RunConfig) -> Outcome {
    execute(command, cfg).unwrap_or_else(|e| panic!("{} failed: {e}", command.name()))
}

/// Every check whose name starts with one of `prefixes` must exist and pass.
fn require(outcome: &Outcome, prefixes: &[&str]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in prefixes {
        let hits: Vec<_> = outcome.summary.checks.iter().filter(|c| c.name.starts_with(p)).collect();
        if hits.is_empty() {
            pass = false;
            parts.push(format!("{p}: missing"));
        }
        for c in hits {
            pass &= c.pass;
            let v = c.value.map_or(String::new(), |v| format!("={v:.4}"));
            parts.push(format!("{}{v}{}", c.name, if c.pass { "" } else { " FAILED" }));
        }
    }
    Verdict { pass, detail: parts.join(", ") }
}

fn merge(vs: Vec<Verdict>) -> Verdict {
    Verdict { pass: vs.iter().all(|v| v.pass), detail: vs.into_iter().map(|v| v.detail).collect::<Vec<_>>().join("; ") }
}

fn oracle_equivalence() -> Verdict {
    let opts = SolveOptions { max_iterations: Some(100_000), ..SolveOptions::with_tolerance(1e-12) };
    let (mut worst_solve, mut worst_parts, mut domains) = (0.0f64, 0.0f64, 0);
    let shapes = [(1, 4096), (2, 64), (3, 16)];
    for (dim, max) in shapes {
        let mut side = 8;
        while side <= max {
            for kind in [DomainKind::Torus, DomainKind::Box] {
                let d = DomainGrid::new(kind, &vec![side; dim]).unwrap();
                let law = if side % 16 == 0 { Law::LogUniform } else { Law::TwoPhase { alpha: 0.25, beta: 4.0, p: 0.5 } };
                let field = EnsembleSpec::new(dim, 0.25, law).unwrap().with_seed(side as u64).sample(&d, 0).unwrap();
                let sys = assemble(&field, &d).unwrap();
                let rhs = d.node_field_from(|n| if d.unknown_index(n).is_some() { ((n * 7919) % 23) as f64 / 11.0 - 1.0 } else { 0.0 });
                let (cg, dense) = match kind {
                    DomainKind::Torus => (solve_periodic_mean_zero(&sys, &rhs, &opts).unwrap(), solve_periodic_dense(&sys, &rhs).unwrap()),
                    DomainKind::Box => (solve_cg(&sys, &rhs, &opts).unwrap(), solve_dense(&sys, &rhs).unwrap()),
                };
                let gap = cg.field.iter().zip(dense.field.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst_solve = worst_solve.max(gap);

                let u = &dense.field;
                let f = gradient(&d, u).unwrap();
                let lhs: f64 = f.iter().map(|g| g * g).sum();
                let rhs_sbp: f64 = -u.iter().zip(divergence(&d, &f).unwrap().iter()).map(|(a, b)| a * b).sum::<f64>();
                worst_parts = worst_parts.max((lhs - rhs_sbp).abs() / lhs.max(1.0));
                domains += 1;
            }
            side *= 2;
        }
    }
    Verdict {
        pass: worst_solve <= 1e-8 && worst_parts <= 1e-12,
        detail: format!("{domains} domains, max |CG - dense| = {worst_solve:.2e} (<= 1e-8), summation by parts {worst_parts:.2e} (<= 1e-12)"),
    }
}

fn homogenized_tensor(root: &Path) -> Verdict {
    let mut one = config(&root.join("a2-1d"), 1, &[64, 256], 16);
    one.law = LawKind::LogUniform;
    let d1 = require(&run(Command::Rve, &one), &["harmonic_mean"]);
    let two = config(&root.join("a2"), 2, &[128], 64);
    let d2 = require(&run(Command::Rve, &two), &["duality_a00", "duality_a11", "offdiag", "voigt_reuss_per_sample"]);
    merge(vec![d1, d2])
}

fn fluctuation(root: &Path) -> Verdict {
    let two = require(&run(Command::Fluct, &config(&root.join("a3"), 2, &[256], 64)), &["log_growth_fit_L256"]);
    let three = require(&run(Command::Fluct, &config(&root.join("a3-3d"), 3, &[48], 32)), &["flat_profile_L48"]);
    merge(vec![two, three])
}

fn determinism(root: &Path) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (dir, command) in [("a2", Command::Rve), ("a4", Command::Boundary), ("a10", Command::Sensitivity)] {
        let src = root.join(dir);
        let (csv, _, manifest) = output_paths(&src, command.name());
        if !manifest.exists() {
            // criterion run on its own: produce a small source run first
            run(command, &config(&src, 2, &[16, 32], 8));
        }
        let recorded = Manifest::read(&manifest).unwrap();
        let mut cfg = parse_onto(RunConfig::default(), &recorded.config).unwrap();
        cfg.workers = if cfg.workers == 1 { 3 } else { 1 };
        cfg.out = root.join(format!("{dir}-rerun"));
        if command == Command::Boundary {
            // the two smallest sizes keep the rerun short
            cfg.sizes.truncate(2);
            let mut first = cfg.clone();
            first.workers = 1;
            first.out = root.join(format!("{dir}-w1"));
            run(command, &first);
            let a = fs::read(output_paths(&first.out, command.name()).0).unwrap();
            run(command, &cfg);
            let b = fs::read(output_paths(&cfg.out, command.name()).0).unwrap();
            pass &= a == b;
            parts.push(format!("{}: workers 1 vs {} {}", command.name(), cfg.workers, if a == b { "identical" } else { "DIFFER" }));
            continue;
        }
        run(command, &cfg);
        let a = fs::read(&csv).unwrap();
        let b = fs::read(output_paths(&cfg.out, command.name()).0).unwrap();
        pass &= a == b;
        parts.push(format!("{}: manifest rerun with {} workers {}", command.name(), cfg.workers, if a == b { "identical" } else { "DIFFER" }));
    }
    Verdict { pass, detail: parts.join(", ") }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let criteria: Vec<Criterion> = vec![
        ("A1", "oracle equivalence", Box::new(oracle_equivalence)),
        ("A2", "homogenized tensor", Box::new(|| homogenized_tensor(root))),
        ("A3", "corrector fluctuation", Box::new(|| fluctuation(root))),
        (
            "A4",
            "boundary corrector sup bound",
            Box::new(|| require(&run(Command::Boundary, &config(&root.join("a4"), 2, &[32, 64, 128, 256], 64)), &["sup_ratio_spread"])),
        ),
        ("A5", "layer decay", Box::new(|| require(&run(Command::Layer, &config(&root.join("a5"), 2, &[128], 64)), &["layer_slope_L128"]))),
        (
            "A6",
            "Green function decay",
            Box::new(|| {
                let mut cfg = config(&root.join("a6"), 2, &[128], 64);
                cfg.moments = vec![1.0];
                require(&run(Command::Decay, &cfg), &["decay_", "boundary_factor", "control_"])
            }),
        ),
        ("A7", "CLT scaling", Box::new(|| require(&run(Command::Clt, &config(&root.join("a7"), 2, &[16, 32, 64, 128], 128)), &["clt_exponent"]))),
        (
            "A8",
            "large-scale Lipschitz",
            Box::new(|| require(&run(Command::Lipschitz, &config(&root.join("a8"), 2, &[256], 64)), &["lipschitz_ratio", "holder_ratio"])),
        ),
        (
            "A9",
            "two-scale expansion error",
            Box::new(|| {
                let out = run(Command::Expand, &config(&root.join("a9"), 2, &[32, 64, 128, 256], 64));
                require(&out, &["expansion_rate", "naive_decays_slower", "constant_coefficient_error"])
            }),
        ),
        (
            "A10",
            "sensitivity and spectral gap",
            Box::new(|| {
                let fd = require(&run(Command::Sensitivity, &config(&root.join("a10"), 2, &[32], 1)), &["adjoint_matches_fd"]);
                let mut gap = config(&root.join("a10-gap"), 2, &[32], 256);
                gap.law = LawKind::LogUniform;
                merge(vec![fd, require(&run(Command::Sgap, &gap), &["spectral_gap_L32"])])
            }),
        ),
        ("A11", "determinism", Box::new(|| determinism(root))),
    ];

    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let mut failed = Vec::new();
    for (id, name, check) in &criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("{status} {id} {name} [{:.0}s]: {}", t.elapsed().as_secs_f64(), v.detail);
        if !v.pass {
            failed.push(*id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
