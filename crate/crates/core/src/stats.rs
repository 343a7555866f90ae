//! Empirical moments, log-log rate fits, rank and paired tests, and the
//! adjoint sensitivity / spectral-gap check of coefficient functionals.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary::solve_boundary_corrector;
use crate::corrector::solve_corrector;
use crate::ensemble::{CoefficientField, EnsembleSpec, Law};
use crate::error::{arg_err, Error, Result};
use crate::lattice::{assemble, divergence, gradient, DomainGrid, DomainKind, EdgeField, NodeField};
use crate::solver::{solve_cg, solve_periodic_mean_zero, SolveOptions};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x6d6f_6d65_6e74;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub p: f64,
    pub value: f64,
    pub samples: usize,
    pub std_error: f64,
}

/// `(mean |v|^p)^{1/p}`.
pub fn moment_value(values: &[f64], p: f64) -> f64 {
    let s: f64 = values.iter().map(|v| libm::pow(v.abs(), p)).sum();
    libm::pow(s / values.len() as f64, 1.0 / p)
}

/// Moment with a bootstrap standard error over a fixed resampling stream.
pub fn moment(values: &[f64], p: f64) -> Result<MomentEstimate> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    if !(p >= 1.0) {
        return Err(arg_err!("moment order must be at least 1, got {p}"));
    }
    let value = moment_value(values, p);
    let reps = bootstrap(values.len(), BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED, |idx| {
        let s: f64 = idx.iter().map(|&i| libm::pow(values[i].abs(), p)).sum();
        libm::pow(s / idx.len() as f64, 1.0 / p)
    });
    let (_, sd) = mean_sd(&reps);
    Ok(MomentEstimate { p, value, samples: values.len(), std_error: sd })
}

/// Statistic `f` evaluated on `resamples` index sets drawn with replacement.
pub fn bootstrap(n: usize, resamples: usize, seed: u64, mut f: impl FnMut(&[usize]) -> f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; n];
    (0..resamples)
        .map(|_| {
            idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
            f(&idx)
        })
        .collect()
}

/// Mean and sample standard deviation (`0` for fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_std_error: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub points: usize,
}

/// Least-squares line through `(ln s, ln v)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(arg_err!("rate fit needs at least 3 points, got {}", points.len()));
    }
    if let Some(p) = points.iter().find(|(s, v)| !(*s > 0.0 && *v > 0.0)) {
        return Err(arg_err!("rate fit needs positive scales and values, got {p:?}"));
    }
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let (slope, intercept, r_squared, rse) = ols(&xs, &ys);
    let scale_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let scale_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(RateFit { slope, intercept, r_squared, residual_std_error: rse, scale_min, scale_max, points: points.len() })
}

fn sq(v: f64) -> f64 {
    v * v
}

/// Plain linear regression: `(slope, intercept, R^2, residual standard error)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| sq(y - intercept - slope * x)).sum();
    let r2 = if syy <= 1e-300 { 1.0 } else { (1.0f64 - sse / syy).clamp(0.0, 1.0) };
    let rse = if xs.len() > 2 { libm::sqrt(sse / (n - 2.0)) } else { 0.0 };
    (slope, intercept, r2, rse)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(arg_err!("spearman needs two equal-length series of at least 2 points"));
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let m = (n + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
    let vx: f64 = rx.iter().map(|a| (a - m) * (a - m)).sum();
    let vy: f64 = ry.iter().map(|b| (b - m) * (b - m)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / libm::sqrt(vx * vy))
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / core::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub mean_difference: f64,
    pub std_error: f64,
    pub z: f64,
    /// One-sided p-value for a positive mean difference.
    pub p_value: f64,
}

impl PairedTest {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// One-sided paired test of `<a - b> > 0` with a normal approximation.
pub fn paired_one_sided(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(arg_err!("paired test needs two equal-length samples of at least 2"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_sd(&diffs);
    let se = sd / libm::sqrt(diffs.len() as f64);
    let z = if se > 0.0 { mean / se } else if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    Ok(PairedTest { mean_difference: mean, std_error: se, z, p_value: 1.0 - normal_cdf(z) })
}

/// Linear functional `F = sum_e g_e grad Psi_i(e)`, with `Psi_i` the boundary
/// corrector on a box or the periodic corrector on a torus.
pub fn functional_value(field: &CoefficientField, domain: &DomainGrid, g: &EdgeField, axis: usize, opts: &SolveOptions) -> Result<f64> {
    let grad = corrector_gradient(field, domain, axis, opts)?;
    Ok(grad.iter().zip(g.iter()).map(|(a, b)| a * b).sum())
}

fn corrector_gradient(field: &CoefficientField, domain: &DomainGrid, axis: usize, opts: &SolveOptions) -> Result<EdgeField> {
    match domain.kind() {
        DomainKind::Box => Ok(solve_boundary_corrector(field, domain, axis, opts)?.grad),
        DomainKind::Torus => gradient(domain, &solve_corrector(field, domain, axis, opts)?.phi),
    }
}

#[derive(Debug, Clone)]
pub struct Sensitivity {
    pub value: f64,
    /// `dF / da(e)` per edge.
    pub gradient: EdgeField,
}

/// Adjoint sensitivity of `F = sum g . grad Psi_i`: the adjoint state solves
/// `-div(a grad v) = div g` and `dF/da(e) = grad v(e) (grad Psi_i + e_i)(e)`.
pub fn adjoint_sensitivity(field: &CoefficientField, domain: &DomainGrid, g: &EdgeField, axis: usize, opts: &SolveOptions) -> Result<Sensitivity> {
    if g.len() != domain.edge_count() {
        return Err(arg_err!("weight has {} entries, domain has {} edges", g.len(), domain.edge_count()));
    }
    let grad_psi = corrector_gradient(field, domain, axis, opts)?;
    let value = grad_psi.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
    let system = assemble(field, domain)?;
    let rhs = divergence(domain, g)?;
    let v: NodeField = match domain.kind() {
        DomainKind::Box => solve_cg(&system, &rhs, opts)?.field,
        DomainKind::Torus => solve_periodic_mean_zero(&system, &rhs, opts)?.field,
    };
    let grad_v = gradient(domain, &v)?;
    let sens = domain.edge_field_from(|e| {
        let unit = if domain.edge_axis(e) == axis { 1.0 } else { 0.0 };
        grad_v[e] * (grad_psi[e] + unit)
    });
    Ok(Sensitivity { value, gradient: sens })
}

/// Forward difference quotient of `F` for a perturbation `h` of one edge.
pub fn finite_difference(field: &CoefficientField, domain: &DomainGrid, g: &EdgeField, axis: usize, edge: usize, h: f64, opts: &SolveOptions) -> Result<f64> {
    if edge >= domain.edge_count() {
        return Err(arg_err!("edge {edge} out of range"));
    }
    let mut delta = EdgeField::zeros(domain.edge_count());
    delta[edge] = h;
    let base = functional_value(field, domain, g, axis, opts)?;
    let moved = functional_value(&field.perturb(&delta, false)?, domain, g, axis, opts)?;
    Ok((moved - base) / h)
}

/// Poincare constant of a single edge law in the variable `a`: `0` for
/// deterministic laws; for the log-uniform law the interval constant
/// `(2 ln(1/lambda) / pi)^2` in `ln a`, times `1/lambda^2` from the chain rule.
pub fn poincare_constant(spec: &EnsembleSpec) -> Result<f64> {
    if spec.is_deterministic() {
        return Ok(0.0);
    }
    match spec.law {
        Law::LogUniform => {
            let width = 2.0 * libm::log(1.0 / spec.lambda);
            Ok(sq(width / core::f64::consts::PI) / (spec.lambda * spec.lambda))
        }
        Law::TwoPhase { .. } => Err(Error::Unsupported(
            "atomic two-phase laws satisfy no derivative Poincare inequality; use the log-uniform law".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGapReport {
    pub samples: usize,
    pub variance: f64,
    pub variance_se: f64,
    /// `sum_e <(dF/da(e))^2>`.
    pub sensitivity_energy: f64,
    pub sensitivity_energy_se: f64,
    pub poincare_constant: f64,
    /// `poincare_constant * sensitivity_energy`.
    pub bound: f64,
    /// `variance / sensitivity_energy` (0 when both sides vanish).
    pub ratio: f64,
}

impl SpectralGapReport {
    pub fn from_samples(values: &[f64], energies: &[f64], poincare_constant: f64) -> Result<Self> {
        if values.len() != energies.len() || values.len() < 32 {
            return Err(arg_err!("spectral gap probe needs at least 32 paired samples, got {}", values.len()));
        }
        let n = values.len() as f64;
        let (mean, sd) = mean_sd(values);
        let variance = sd * sd;
        let m4 = values.iter().map(|v| sq(sq(v - mean))).sum::<f64>() / n;
        let variance_se = libm::sqrt(((m4 - variance * variance) / n).max(0.0));
        let (energy, esd) = mean_sd(energies);
        let energy_se = esd / libm::sqrt(n);
        let ratio = if energy > 0.0 { variance / energy } else { 0.0 };
        Ok(SpectralGapReport {
            samples: values.len(),
            variance,
            variance_se,
            sensitivity_energy: energy,
            sensitivity_energy_se: energy_se,
            poincare_constant,
            bound: poincare_constant * energy,
            ratio,
        })
    }

    /// `Var F <= bound` within three combined standard errors.
    pub fn holds(&self) -> bool {
        let se = libm::sqrt(sq(self.variance_se) + sq(self.poincare_constant * self.sensitivity_energy_se));
        self.variance <= self.bound + 3.0 * se
    }
}

/// Serial driver: samples `0..n` of `spec` on `domain`.
pub fn spectral_gap_probe(spec: &EnsembleSpec, domain: &DomainGrid, g: &EdgeField, axis: usize, n: usize, opts: &SolveOptions) -> Result<SpectralGapReport> {
    let c = poincare_constant(spec)?;
    let mut values = Vec::with_capacity(n);
    let mut energies = Vec::with_capacity(n);
    for s in 0..n as u64 {
        let field = spec.sample(domain, s)?;
        let sens = adjoint_sensitivity(&field, domain, g, axis, opts)?;
        values.push(sens.value);
        energies.push(sens.gradient.iter().map(|v| v * v).sum());
    }
    SpectralGapReport::from_samples(&values, &energies, c)
}

/// Weight `eta(e) / sum eta` on axis-`i` edges of a box, zero elsewhere.
pub fn bump_functional_weight(boxed: &DomainGrid, axis: usize) -> EdgeField {
    let w = boxed.edge_field_from(|e| if boxed.edge_axis(e) == axis { crate::boundary::bump_weight(boxed, e) } else { 0.0 });
    let total: f64 = w.iter().sum();
    EdgeField(w.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_examples() {
        assert!((moment(&[3.0, 4.0], 2.0).unwrap().value - libm::sqrt(12.5)).abs() < 1e-12);
        let c = moment(&[-2.5; 7], 3.0).unwrap();
        assert!((c.value - 2.5).abs() < 1e-12 && c.std_error < 1e-12);
        assert!(moment(&[1.0, 2.0, 4.0], 4.0).unwrap().value >= moment(&[1.0, 2.0, 4.0], 1.0).unwrap().value);
        assert!(matches!(moment(&[], 2.0), Err(Error::Empty)));
    }

    #[test]
    fn fit_examples() {
        let f = fit_rate(&[(2.0, 4.0), (4.0, 16.0), (8.0, 64.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit_rate(&[(2.0, 3.0), (4.0, 3.0), (8.0, 3.0)]).unwrap().slope, 0.0);
        assert!(fit_rate(&[(2.0, 1.0), (4.0, 0.0), (8.0, 1.0)]).is_err());
        assert!(fit_rate(&[(2.0, 1.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn spearman_and_paired() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        let t = paired_one_sided(&[2.0, 3.0, 4.0, 5.0], &[1.0, 1.5, 1.0, 2.0]).unwrap();
        assert!(t.passes(0.05));
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn poincare_constants() {
        let det = EnsembleSpec::new(2, 0.5, Law::constant(1.0)).unwrap();
        assert_eq!(poincare_constant(&det).unwrap(), 0.0);
        let two = EnsembleSpec::new(2, 0.25, Law::TwoPhase { alpha: 0.25, beta: 4.0, p: 0.5 }).unwrap();
        assert!(matches!(poincare_constant(&two), Err(Error::Unsupported(_))));
    }
}
