//! Adjoint sensitivity against finite differences, and the spectral-gap
//! variance inequality.

use homog_core::lattice::EdgeField;
use homog_core::solver::SolveOptions;
use homog_core::stats::{adjoint_sensitivity, bump_functional_weight, finite_difference, poincare_constant, SpectralGapReport};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{key, num, Ctx};
use crate::error::Result;
use crate::output::{Check, Table};

pub const FD_STEP: f64 = 1e-5;
pub const FD_EDGES: usize = 20;
pub const FD_TOLERANCE: f64 = 1e-13;

fn row(l: usize, sample: Option<u64>, q: &str, index: usize, v: f64) -> Vec<String> {
    let mut r = key(l, sample);
    r.extend([q.to_string(), index.to_string(), num(v)]);
    r
}

pub(super) fn sensitivity(ctx: &Ctx, checks: &mut Vec<Check>, values: &mut Map<String, Value>) -> Result<Table> {
    let mut table = Table::new(&["L", "sample", "quantity", "index", "value"]);
    let fine = SolveOptions { tolerance: FD_TOLERANCE, ..ctx.opts };
    let l = ctx.cfg.sizes[0];
    let boxed = ctx.boxed(l)?;
    let g = bump_functional_weight(&boxed, 0);
    let field = ctx.sample(&boxed, 0)?;
    let sens = adjoint_sensitivity(&field, &boxed, &g, 0, &fine)?;
    let mut rng = ctx.spec.auxiliary_rng(0);
    let mut worst = 0.0f64;
    for _ in 0..FD_EDGES {
        let e = rng.random_range(0..boxed.edge_count());
        let fd = finite_difference(&field, &boxed, &g, 0, e, FD_STEP, &fine)?;
        let adj = sens.gradient[e];
        let err = (fd - adj).abs() / (1.0 + adj.abs());
        worst = worst.max(err);
        table.push(row(l, Some(0), "adjoint", e, adj));
        table.push(row(l, Some(0), "finite_difference", e, fd));
    }
    table.push(row(l, Some(0), "functional", 0, sens.value));
    values.insert("functional".into(), json!(sens.value));
    values.insert("max_relative_error".into(), json!(worst));
    checks.push(Check::at_most("adjoint_matches_fd", worst, 1e-4));

    let zero = EdgeField::zeros(boxed.edge_count());
    let z = adjoint_sensitivity(&field, &boxed, &zero, 0, &fine)?;
    let zmax = z.gradient.iter().fold(z.value.abs(), |m, v| m.max(v.abs()));
    checks.push(Check::at_most("zero_weight_zero_sensitivity", zmax, 0.0));
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct GapRecord {
    value: f64,
    energy: f64,
}

pub(super) fn sgap(ctx: &Ctx, checks: &mut Vec<Check>, values: &mut Map<String, Value>) -> Result<Table> {
    let constant = poincare_constant(&ctx.spec)?;
    if ctx.samples() < 32 {
        return Err(crate::error::LabError::Config(format!("sgap needs N >= 32, got {}", ctx.samples())));
    }
    let mut table = Table::new(&["L", "sample", "quantity", "index", "value"]);
    for &l in &ctx.cfg.sizes {
        let boxed = ctx.boxed(l)?;
        let g = bump_functional_weight(&boxed, 0);
        let run = ctx.run(&format!("L{l}"), |idx| {
            let field = ctx.sample(&boxed, idx)?;
            let s = adjoint_sensitivity(&field, &boxed, &g, 0, &ctx.opts)?;
            Ok(GapRecord { value: s.value, energy: s.gradient.iter().map(|v| v * v).sum() })
        })?;
        for (idx, r) in &run.records {
            table.push(row(l, Some(*idx), "functional", 0, r.value));
            table.push(row(l, Some(*idx), "sensitivity_energy", 0, r.energy));
        }
        let (vals, energies): (Vec<f64>, Vec<f64>) = run.values().map(|r| (r.value, r.energy)).unzip();
        let rep = SpectralGapReport::from_samples(&vals, &energies, constant)?;
        table.push(row(l, None, "variance", 0, rep.variance));
        table.push(row(l, None, "bound", 0, rep.bound));
        super::per_size(values, l).insert(
            "report".into(),
            json!({
                "samples": rep.samples,
                "variance": rep.variance,
                "variance_se": rep.variance_se,
                "sensitivity_energy": rep.sensitivity_energy,
                "sensitivity_energy_se": rep.sensitivity_energy_se,
                "poincare_constant": rep.poincare_constant,
                "bound": rep.bound,
                "ratio": rep.ratio,
            }),
        );
        checks.push(Check::new(format!("spectral_gap_L{l}"), rep.holds(), rep.ratio, format!("Var F = {} <= bound {} within 3 SE", rep.variance, rep.bound)));
        if ctx.deterministic() {
            checks.push(Check::new(format!("collapse_variance_zero_L{l}"), rep.variance <= 1e-20 && rep.bound == 0.0, rep.variance, "both sides vanish"));
        }
    }
    Ok(table)
}
