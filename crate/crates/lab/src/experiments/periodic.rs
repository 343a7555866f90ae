//! Commands on periodic cells: correctors, RVE tensors, flux correctors,
//! minimal radii and corrector fluctuations.

use homog_core::corrector::{fluctuation_profile, homogenized_tensor, minimal_radius, solve_corrector, voigt_reuss_bounds, CorrectorSet};
use homog_core::tensor::Tensor;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{dyadic, fit, fit_json, jensen_ok, key, num, per_size, pool, Ctx};
use crate::error::Result;
use crate::output::{Check, Table};

#[derive(Serialize, Deserialize)]
struct CorrectorRecord {
    abar: Vec<f64>,
    residual: Vec<f64>,
    iterations: Vec<usize>,
    phi_max: Vec<f64>,
    phi_mean: Vec<f64>,
}

pub(super) fn corrector(ctx: &Ctx, checks: &mut Vec<Check>, values: &mut Map<String, Value>) -> Result<Table> {
    let mut table = Table::new(&["L", "sample", "quantity", "index", "value"]);
    let (mut worst_res, mut worst_mean, mut worst_phi) = (0.0f64, 0.0f64, 0.0f64);
    for &l in &ctx.cfg.sizes {
        let torus = ctx.torus(l)?;
        let run = ctx.run(&format!("L{l}"), |idx| {
            let field = ctx.sample(&torus, idx)?;
            let set = CorrectorSet::compute(&field, &torus, &ctx.opts, false)?;
            let c = &set.correctors;
            Ok(CorrectorRecord {
                abar: set.abar_raw.entries().to_vec(),
                residual: c.iter().map(|c| c.relative_residual).collect(),
                iterations: c.iter().map(|c| c.iterations).collect(),
                phi_max: c.iter().map(|c| c.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect(),
                phi_mean: c.iter().map(|c| c.phi.mean()).collect(),
            })
        })?;
        for (idx, r) in &run.records {
            let mut emit = |q: &str, vals: &[f64]| {
                for (i, v) in vals.iter().enumerate() {
                    let mut row = key(l, Some(*idx));
                    row.extend([q.to_string(), i.to_string(), num(*v)]);
                    table.push(row);
                }
            };
            emit("abar", &r.abar);
            emit("residual", &r.residual);
            emit("iterations", &r.iterations.iter().map(|&i| i as f64).collect::<Vec<_>>());
            emit("phi_max", &r.phi_max);
            emit("phi_mean", &r.phi_mean);
            worst_res = r.residual.iter().fold(worst_res, |m, &v| m.max(v));
            worst_mean = r.phi_mean.iter().fold(worst_mean, |m, &v| m.max(v.abs()));
            worst_phi = r.phi_max.iter().fold(worst_phi, |m, &v| m.max(v));
        }
        let tensors: Vec<Tensor> = run.values().map(|r| Tensor::from_row_major(ctx.dim(), r.abar.clone())).collect();
        let est = homogenized_tensor(&tensors)?;
        let slot = per_size(values, l);
        slot.insert("abar".into(), json!(est.mean.entries()));
        slot.insert("abar_std_error".into(), json!(est.std_error.entries()));
        let iters: Vec<f64> = run.values().flat_map(|r| r.iterations.iter().map(|&i| i as f64)).collect();
        slot.insert("mean_iterations".into(), json!(iters.iter().sum::<f64>() / iters.len().max(1) as f64));
    }
    checks.push(Check::at_most("solver_residual", worst_res, ctx.opts.tolerance));
    checks.push(Check::at_most("phi_mean_zero", worst_mean, 1e-8));
    if ctx.deterministic() {
        checks.push(Check::at_most("collapse_phi_zero", worst_phi, 1e-8));
    }
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct RveRecord {
    abar: Vec<f64>,
    reuss: f64,
    voigt: f64,
    eigenvalues: Vec<f64>,
}

pub(super) fn rve(ctx: &Ctx, checks: &mut Vec<Check>, values: &mut Map<String, Value>) -> Result<Table> {
    let d = ctx.dim();
    let mut header: Vec<String> = vec!["L".into(), "sample".into()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("a{i}{j}"));
        }
    }
    header.extend(["reuss".into(), "voigt".into()]);
    let mut table = Table { header, rows: Vec::new() };
    let (mut outside, mut total) = (0usize, 0usize);
    let mut harmonic_gap = 0.0f64;
    let mut collapse_gap = 0.0f64;
    let mut last = None;
    for &l in &ctx.cfg.sizes {
        let torus = ctx.torus(l)?;
        let run = ctx.run(&format!("L{l}"), |idx| {
            let field = ctx.sample(&torus, idx)?;
            let set = CorrectorSet::compute(&field, &torus, &ctx.opts, false)?;
            let (reuss, voigt) = voigt_reuss_bounds(&field, &torus);
            Ok(RveRecord { abar: set.abar_raw.entries().to_vec(), reuss, voigt, eigenvalues: set.abar.symmetric_eigenvalues() })
        })?;
        for (idx, r) in &run.records {
            let mut row = key(l, Some(*idx));
            row.extend(r.abar.iter().map(|&v| num(v)));
            row.extend([num(r.reuss), num(r.voigt)]);
            table.push(row);
            total += 1;
            let slack = 1e-10 * r.voigt;
            if r.eigenvalues.iter().any(|&e| e < r.reuss - slack || e > r.voigt + slack) {
                outside += 1;
            }
            if d == 1 {
                harmonic_gap = harmonic_gap.max((r.abar[0] - r.reuss).abs());
            }
            if ctx.deterministic() {
                let c = ctx.spec.mean();
                let t = Tensor::from_row_major(d, r.abar.clone()).sub(&Tensor::scaled_identity(d, c));
                collapse_gap = collapse_gap.max(t.max_abs());
            }
        }
        let tensors: Vec<Tensor> = run.values().map(|r| Tensor::from_row_major(d, r.abar.clone())).collect();
        let est = homogenized_tensor(&tensors)?;
        let slot = per_size(values, l);
        slot.insert("abar".into(), json!(est.mean.entries()));
        slot.insert("abar_std_error".into(), json!(est.std_error.entries()));
        slot.insert("samples".into(), json!(est.samples));
        last = Some((l, est));
    }
    checks.push(Check::new("voigt_reuss_per_sample", outside == 0, outside as f64, format!("{outside} of {total} samples outside the window")));
    if d == 1 {
        checks.push(Check::at_most("harmonic_mean", harmonic_gap, 1e-10));
    }
    if ctx.deterministic() {
        checks.push(Check::at_most("collapse_abar_constant", collapse_gap, 1e-10));
    } else if let (Some((l, est)), true) = (last, d >= 2) {
        for i in 0..d {
            for j in (i + 1)..d {
                let v = est.mean.get(i, j).abs();
                let se = est.std_error.get(i, j);
                checks.push(Check::new(format!("offdiag_{i}{j}_L{l}"), v <= 3.0 * se, v, format!("<= 3 SE = {}", 3.0 * se)));
            }
        }
        if let (Some(exact), 2) = (ctx.spec.duality_value(), d) {
            for i in 0..d {
                let gap = (est.mean.get(i, i) - exact).abs();
                let se = est.std_error.get(i, i);
                checks.push(Check::new(format!("duality_a{i}{i}_L{l}"), gap <= 3.0 * se, gap, format!("|a - {exact}| <= 3 SE = {}", 3.0 * se)));
            }
        }
    }
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct SigmaRecord {
    residual: Vec<f64>,
    relative_residual: Vec<f64>,
    sigma_max: Vec<f64>,
}

pub(super) fn sigma(ctx: &Ctx, checks: &mut Vec<Check>, values: &mut Map<String, Value>) -> Result<Table> {
    let d = ctx.dim();
    if d < 2 {
        return Err(crate::error::LabError::Config("sigma: flux correctors need d >= 2".into()));
    }
    let mut table = Table::new(&["L", "sample", "quantity", "index", "value"]);
    let (mut worst_rel, mut worst_sigma) = (0.0f64, 0.0f64);
    for &l in &ctx.cfg.sizes {
        let torus = ctx.torus(l)?;
        let run = ctx.run(&format!("L{l}"), |idx| {
            let field = ctx.sample(&torus, idx)?;
            let set = CorrectorSet::compute(&field, &torus, &ctx.opts, true)?;
            let mut rec = SigmaRecord { residual: Vec::new(), relative_residual: Vec::new(), sigma_max: Vec::new() };
            for (i, s) in set.sigma.iter().enumerate() {
                // rms of q_i - abar e_i on edges, the scale the residual is measured against
                let flux = &set.correctors[i].flux;
                let n = flux.len() as f64;
                let dev: f64 = (0..flux.len())
                    .map(|e| {
                        let unit = if torus.edge_axis(e) == i { set.abar_raw.get(i, i) } else { 0.0 };
                        (flux[e] - unit).powi(2)
                    })
                    .sum::<f64>();
                let scale = (dev * d as f64 / n).sqrt();
                rec.residual.push(s.divergence_residual);
                rec.relative_residual.push(if scale > 0.0 { s.divergence_residual / scale } else { s.divergence_residual });
                rec.sigma_max.push(s.components().iter().flat_map(|c| c.iter()).fold(0.0f64, |m, v| m.max(v.abs())));
            }
            Ok(rec)
        })?;
        for (idx, r) in &run.records {
            for (q, vals) in [("divergence_residual", &r.residual), ("relative_residual", &r.relative_residual), ("sigma_max", &r.sigma_max)] {
                for (i, v) in vals.iter().enumerate() {
                    let mut row = key(l, Some(*idx));
                    row.extend([q.to_string(), i.to_string(), num(*v)]);
                    table.push(row);
                }
            }
            worst_rel = r.relative_residual.iter().fold(worst_rel, |m, &v| m.max(v));
            worst_sigma = r.sigma_max.iter().fold(worst_sigma, |m, &v| m.max(v));
        }
        let rel: Vec<f64> = run.values().flat_map(|r| r.relative_residual.iter().copied()).collect();
        per_size(values, l).insert("mean_relative_residual".into(), json!(rel.iter().sum::<f64>() / rel.len().max(1) as f64));
    }
    if ctx.deterministic() {
        checks.push(Check::at_most("collapse_sigma_zero", worst_sigma, 1e-8));
    } else {
        checks.push(Check::new("divergence_identity", worst_rel < 1.0, worst_rel, "relative residual < 1"));
    }
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct MinradRecord {
    chi_star: f64,
    chi_star_scale: f64,
    chi_star_censored: bool,
    c_star: f64,
    c_star_censored: bool,
    chi_star_star: f64,
}

pub(super) fn minrad(ctx: &Ctx, checks: &mut Vec<Check>, values: &mut Map<String, Value>) -> Result<Table> {
    if ctx.dim() < 2 {
        return Err(crate::error::LabError::Config("minrad: flux correctors need d >= 2".into()));
    }
    let params = ctx.cfg.minrad;
    let floor = params.theta.powf(-params.p);
    let mut table = Table::new(&["L", "sample", "quantity", "index", "value"]);
    let mut ordered = true;
    let mut floor_ok = true;
    let mut collapse = true;
    for &l in &ctx.cfg.sizes {
        let torus = ctx.torus(l)?;
        let run = ctx.run(&format!("L{l}"), |idx| {
            let field = ctx.sample(&torus, idx)?;
            let set = CorrectorSet::compute(&field, &torus, &ctx.opts, true)?;
            let mr = minimal_radius(&set, &torus, &params, 0)?;
            Ok(MinradRecord {
                chi_star: mr.chi_star,
                chi_star_scale: mr.chi_star_scale,
                chi_star_censored: mr.chi_star_censored,
                c_star: mr.c_star,
                c_star_censored: mr.c_star_censored,
                chi_star_star: mr.chi_star_star,
            })
        })?;
        for (idx, r) in &run.records {
            let b = |v: bool| if v { 1.0 } else { 0.0 };
            for (q, v) in [
                ("chi_star", r.chi_star),
                ("chi_star_scale", r.chi_star_scale),
                ("chi_star_censored", b(r.chi_star_censored)),
                ("c_star", r.c_star),
                ("c_star_censored", b(r.c_star_censored)),
                ("chi_star_star", r.chi_star_star),
            ] {
                let mut row = key(l, Some(*idx));
                row.extend([q.to_string(), "0".to_string(), num(v)]);
                table.push(row);
            }
            ordered &= r.chi_star <= r.chi_star_star;
            floor_ok &= r.chi_star >= floor;
            collapse &= r.chi_star == floor && r.c_star == 1.0;
        }
        let recs: Vec<&MinradRecord> = run.values().collect();
        let mut chi: Vec<f64> = recs.iter().map(|r| r.chi_star_scale).collect();
        chi.sort_by(f64::total_cmp);
        let slot = per_size(values, l);
        slot.insert("median_chi_star_scale".into(), json!(chi.get(chi.len() / 2)));
        slot.insert("chi_star_censored_fraction".into(), json!(super::fraction(&recs, |r| r.chi_star_censored)));
        slot.insert("chi_star_star_censored_fraction".into(), json!(super::fraction(&recs, |r| r.chi_star_star > (l / 4) as f64)));
    }
    values.insert("chi_star_floor".into(), json!(floor));
    values.insert("chi_star_star_lower_bound".into(), json!((4.0 * params.c_theta).powf(1.0 / params.sigma0())));
    checks.push(Check::new("chi_star_floor", floor_ok, floor, "chi_* >= theta^-p"));
    checks.push(Check::new("chi_ordering", ordered, 0.0, "chi_* <= chi_**"));
    if ctx.deterministic() {
        checks.push(Check::new("collapse_minrad_floor", collapse, floor, "chi_* at the floor and c_* = 1"));
    }
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct FluctRecord {
    /// `[moment][radius]` of `mean |phi(x + r e_k) - phi(x)|^p`.
    powers: Vec<Vec<f64>>,
}

/// Dyadic radii up to `L/4` plus `L/4` itself.
pub(crate) fn fluct_radii(l: usize) -> Vec<usize> {
    let mut r = dyadic(l / 4);
    if r.last() != Some(&(l / 4)) && l / 4 > 0 {
        r.push(l / 4);
    }
    r
}

pub(super) fn fluct(ctx: &Ctx, checks: &mut Vec<Check>, values: &mut Map<String, Value>) -> Result<Table> {
    let moments = ctx.cfg.moments.clone();
    let mut table = Table::new(&["L", "sample", "quantity", "index", "value"]);
    let mut jensen = true;
    let mut worst_zero = 0.0f64;
    for &l in &ctx.cfg.sizes {
        let torus = ctx.torus(l)?;
        let radii = fluct_radii(l);
        let run = ctx.run(&format!("L{l}"), |idx| {
            let field = ctx.sample(&torus, idx)?;
            let phi = solve_corrector(&field, &torus, 0, &ctx.opts)?.phi;
            let powers = moments
                .iter()
                .map(|&p| Ok(fluctuation_profile(std::slice::from_ref(&phi), &torus, p, &radii)?.iter().map(|&(_, v)| v.powf(p)).collect()))
                .collect::<homog_core::Result<Vec<Vec<f64>>>>()?;
            Ok(FluctRecord { powers })
        })?;
        let mut profiles = Vec::new();
        for (m, &p) in moments.iter().enumerate() {
            for (idx, rec) in &run.records {
                for (k, &r) in radii.iter().enumerate() {
                    let mut row = key(l, Some(*idx));
                    row.extend([format!("increment_p{p}"), r.to_string(), num(rec.powers[m][k].powf(1.0 / p))]);
                    table.push(row);
                }
            }
            let profile: Vec<(usize, f64)> = radii.iter().enumerate().map(|(k, &r)| (r, pool(run.values().map(|rec| rec.powers[m][k]), p))).collect();
            for &(r, v) in &profile {
                let mut row = key(l, None);
                row.extend([format!("increment_p{p}"), r.to_string(), num(v)]);
                table.push(row);
                worst_zero = worst_zero.max(v);
            }
            profiles.push((p, profile));
        }
        for k in 0..radii.len() {
            jensen &= jensen_ok(&profiles.iter().map(|(p, prof)| (*p, prof[k].1)).collect::<Vec<_>>());
        }
        if ctx.deterministic() {
            continue;
        }
        let (_, primary) = profiles.iter().find(|(p, _)| *p == 2.0).unwrap_or(&profiles[0]);
        let slot = per_size(values, l);
        slot.insert("profile".into(), json!(primary));
        match ctx.dim() {
            2 => {
                // linear in ln^{1/2}(2 + r)
                let xs: Vec<f64> = primary.iter().map(|&(r, _)| (2.0 + r as f64).ln().sqrt()).collect();
                let ys: Vec<f64> = primary.iter().map(|&(_, v)| v).collect();
                let (slope, intercept, r2, _) = homog_core::stats::ols(&xs, &ys);
                slot.insert("log_fit".into(), json!({"slope": slope, "intercept": intercept, "r_squared": r2}));
                checks.push(Check::new(format!("log_growth_fit_L{l}"), r2 >= 0.9 && slope > 0.0, r2, "R^2 >= 0.9 with positive slope"));
            }
            3 => {
                let window: Vec<f64> = primary.iter().filter(|&&(r, _)| (4..=12).contains(&r)).map(|&(_, v)| v).collect();
                if window.len() >= 2 {
                    let ratio = window.iter().copied().fold(f64::MIN, f64::max) / window.iter().copied().fold(f64::MAX, f64::min);
                    slot.insert("flatness_ratio".into(), json!(ratio));
                    checks.push(Check::at_most(format!("flat_profile_L{l}"), ratio, 2.0));
                }
            }
            _ => {
                let pts: Vec<(f64, f64)> = primary.iter().map(|&(r, v)| (r as f64, v)).collect();
                if let Ok(f) = fit(&pts, "fluct") {
                    slot.insert("rate_fit".into(), fit_json(&f));
                }
            }
        }
    }
    checks.push(Check::new("moment_monotonicity", jensen, 0.0, "moments nondecreasing in p"));
    if ctx.deterministic() {
        checks.push(Check::at_most("collapse_fluctuation_zero", worst_zero, 1e-8));
    }
    Ok(table)
}
