//! Periodized correctors, fluxes, the homogenized tensor, flux correctors
//! and the minimal-radius fields built from their oscillations.

use alloc::vec;
use alloc::vec::Vec;

use crate::ensemble::CoefficientField;
use crate::error::{arg_err, Error, Result};
use crate::lattice::{assemble, assemble_conductances, divergence, gradient, norm2, DomainGrid, DomainKind, EdgeField, NodeField};
use crate::solver::{solve_periodic_mean_zero, Solution, SolveOptions};
use crate::tensor::Tensor;

/// Corrector `phi_i` (mean zero) and flux `q_i = a (grad phi_i + e_i)`.
#[derive(Debug, Clone)]
pub struct Corrector {
    pub phi: NodeField,
    pub flux: EdgeField,
    /// `||div q_i|| / ||div(a e_i)||` after the solve.
    pub relative_residual: f64,
    pub iterations: usize,
}

fn require_torus(domain: &DomainGrid) -> Result<()> {
    if domain.kind() != DomainKind::Torus {
        return Err(arg_err!("correctors are computed on a torus"));
    }
    Ok(())
}

/// Solve `-div(a grad phi_i) = div(a e_i)` on the torus.
pub fn solve_corrector(field: &CoefficientField, torus: &DomainGrid, axis: usize, opts: &SolveOptions) -> Result<Corrector> {
    require_torus(torus)?;
    if axis >= torus.dim() {
        return Err(arg_err!("axis {axis} out of range for dimension {}", torus.dim()));
    }
    let system = assemble(field, torus)?;
    let a_ei = torus.directional(field.values(), axis);
    let rhs = divergence(torus, &a_ei)?;
    let Solution { field: phi, iterations, .. } = solve_periodic_mean_zero(&system, &rhs, opts)?;
    let flux = flux_of(field, torus, &phi, axis)?;
    let div_q = divergence(torus, &flux)?;
    let scale = norm2(&rhs);
    let relative_residual = if scale == 0.0 { norm2(&div_q) } else { norm2(&div_q) / scale };
    Ok(Corrector { phi, flux, relative_residual, iterations })
}

pub fn flux_of(field: &CoefficientField, domain: &DomainGrid, phi: &NodeField, axis: usize) -> Result<EdgeField> {
    let mut q = gradient(domain, phi)?;
    for (e, (qe, a)) in q.iter_mut().zip(field.values()).enumerate() {
        let unit = if domain.edge_axis(e) == axis { 1.0 } else { 0.0 };
        *qe = a * (*qe + unit);
    }
    Ok(q)
}

/// Spatial flux average: column `i` is the mean of `q_i`, i.e. `abar e_i`.
pub fn flux_average(domain: &DomainGrid, fluxes: &[EdgeField]) -> Tensor {
    let d = domain.dim();
    let mut t = Tensor::zeros(d);
    let n = domain.node_count() as f64;
    for (i, q) in fluxes.iter().enumerate() {
        for (e, v) in q.iter().enumerate() {
            let k = domain.edge_axis(e);
            t.set(k, i, t.get(k, i) + v / n);
        }
    }
    t
}

/// Node-indexed flux corrector components `sigma_{i j k}` for `j < k`.
#[derive(Debug, Clone)]
pub struct FluxCorrector {
    dim: usize,
    /// Independent components in `(j, k)` order with `j < k`.
    components: Vec<NodeField>,
    /// RMS of `div sigma_i - (q_i - abar e_i)` on node-averaged fluxes.
    pub divergence_residual: f64,
}

impl FluxCorrector {
    pub fn pairs(dim: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..dim).flat_map(move |j| (j + 1..dim).map(move |k| (j, k)))
    }

    pub fn components(&self) -> &[NodeField] {
        &self.components
    }

    /// `sigma_{i j k}` at `node`; antisymmetric in `(j, k)` by construction.
    pub fn value(&self, j: usize, k: usize, node: usize) -> f64 {
        use core::cmp::Ordering::*;
        match j.cmp(&k) {
            Equal => 0.0,
            Less => self.components[self.slot(j, k)][node],
            Greater => -self.components[self.slot(k, j)][node],
        }
    }

    fn slot(&self, j: usize, k: usize) -> usize {
        Self::pairs(self.dim).position(|p| p == (j, k)).expect("valid pair")
    }
}

fn node_average_component(domain: &DomainGrid, q: &EdgeField, axis: usize) -> NodeField {
    domain.node_field_from(|x| {
        let fwd = domain.edge_from(x, axis).map_or(0.0, |e| q[e]);
        let back = domain.step(x, axis, -1).and_then(|y| domain.edge_from(y, axis)).map_or(0.0, |e| q[e]);
        0.5 * (fwd + back)
    })
}

fn central_difference(domain: &DomainGrid, f: &NodeField, axis: usize, node: usize) -> f64 {
    let up = domain.step(node, axis, 1).map_or(0.0, |y| f[y]);
    let down = domain.step(node, axis, -1).map_or(0.0, |y| f[y]);
    0.5 * (up - down)
}

/// Solve `-Lap sigma_{ijk} = d_j q_{ik} - d_k q_{ij}` on the torus with
/// node-averaged fluxes and central differences; `sigma` has mean zero.
pub fn solve_sigma(flux: &EdgeField, abar_column: &[f64], torus: &DomainGrid, opts: &SolveOptions) -> Result<FluxCorrector> {
    require_torus(torus)?;
    let d = torus.dim();
    if abar_column.len() != d {
        return Err(arg_err!("homogenized column has {} entries, expected {d}", abar_column.len()));
    }
    let laplacian = assemble_conductances(&vec![1.0; torus.edge_count()], torus);
    let averaged: Vec<NodeField> = (0..d).map(|k| node_average_component(torus, flux, k)).collect();
    let mut components = Vec::new();
    for (j, k) in FluxCorrector::pairs(d) {
        let rhs = torus.node_field_from(|x| {
            central_difference(torus, &averaged[k], j, x) - central_difference(torus, &averaged[j], k, x)
        });
        components.push(solve_periodic_mean_zero(&laplacian, &rhs, opts)?.field);
    }
    let mut sigma = FluxCorrector { dim: d, components, divergence_residual: 0.0 };
    sigma.divergence_residual = divergence_identity_residual(&sigma, &averaged, abar_column, torus);
    Ok(sigma)
}

fn divergence_identity_residual(sigma: &FluxCorrector, averaged: &[NodeField], abar_column: &[f64], torus: &DomainGrid) -> f64 {
    let d = torus.dim();
    let mut full: Vec<Vec<NodeField>> = Vec::new();
    for j in 0..d {
        full.push((0..d).map(|k| torus.node_field_from(|x| sigma.value(j, k, x))).collect());
    }
    let mut sum = 0.0;
    for j in 0..d {
        for x in 0..torus.node_count() {
            let div: f64 = (0..d).map(|k| central_difference(torus, &full[j][k], k, x)).sum();
            let r = div - (averaged[j][x] - abar_column[j]);
            sum += r * r;
        }
    }
    libm::sqrt(sum / (d * torus.node_count()) as f64)
}

/// Correctors, fluxes, flux correctors and the per-sample homogenized tensor.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    pub correctors: Vec<Corrector>,
    pub sigma: Vec<FluxCorrector>,
    /// Symmetrized flux average of this sample.
    pub abar: Tensor,
    /// Flux average before symmetrization.
    pub abar_raw: Tensor,
}

impl CorrectorSet {
    pub fn compute(field: &CoefficientField, torus: &DomainGrid, opts: &SolveOptions, with_sigma: bool) -> Result<Self> {
        let d = torus.dim();
        let correctors = (0..d).map(|i| solve_corrector(field, torus, i, opts)).collect::<Result<Vec<_>>>()?;
        let fluxes: Vec<EdgeField> = correctors.iter().map(|c| c.flux.clone()).collect();
        let abar_raw = flux_average(torus, &fluxes);
        let abar = abar_raw.symmetrized();
        let mut sigma = Vec::new();
        if with_sigma {
            for (i, c) in correctors.iter().enumerate() {
                let column: Vec<f64> = (0..d).map(|k| abar_raw.get(k, i)).collect();
                sigma.push(solve_sigma(&c.flux, &column, torus, opts)?);
            }
        }
        Ok(CorrectorSet { correctors, sigma, abar, abar_raw })
    }
}

/// Ensemble estimate of the homogenized tensor.
#[derive(Debug, Clone)]
pub struct HomogenizedEstimate {
    pub mean: Tensor,
    pub std_error: Tensor,
    pub samples: usize,
}

/// Componentwise mean and standard error over per-sample flux averages;
/// the mean is symmetrized.
pub fn homogenized_tensor(samples: &[Tensor]) -> Result<HomogenizedEstimate> {
    let first = samples.first().ok_or(Error::Empty)?;
    let d = first.dim();
    let n = samples.len() as f64;
    let mut mean = Tensor::zeros(d);
    let mut se = Tensor::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let vals: Vec<f64> = samples.iter().map(|t| 0.5 * (t.get(i, j) + t.get(j, i))).collect();
            let m = vals.iter().sum::<f64>() / n;
            mean.set(i, j, m);
            if samples.len() > 1 {
                let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
                se.set(i, j, libm::sqrt(var / n));
            }
        }
    }
    Ok(HomogenizedEstimate { mean, std_error: se, samples: samples.len() })
}

/// Per-sample Voigt-Reuss window `[min_k harmonic_k, max_k arithmetic_k]`
/// over the axis-`k` edge conductances of a torus sample.
pub fn voigt_reuss_bounds(field: &CoefficientField, torus: &DomainGrid) -> (f64, f64) {
    let d = torus.dim();
    let mut lower = f64::INFINITY;
    let mut upper: f64 = 0.0;
    for k in 0..d {
        let (mut s, mut inv, mut n) = (0.0, 0.0, 0.0);
        for (e, a) in field.values().iter().enumerate() {
            if torus.edge_axis(e) == k {
                s += a;
                inv += 1.0 / a;
                n += 1.0;
            }
        }
        lower = lower.min(n / inv);
        upper = upper.max(s / n);
    }
    (lower, upper)
}

/// `<|phi(b + r e_k) - phi(b)|^p>^{1/p}` pooled over samples, base points
/// and axes, for each radius.
pub fn fluctuation_profile(samples: &[NodeField], torus: &DomainGrid, p: f64, radii: &[usize]) -> Result<Vec<(usize, f64)>> {
    require_torus(torus)?;
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    if p < 1.0 {
        return Err(arg_err!("moment order must be at least 1, got {p}"));
    }
    let guard = torus.sides().iter().min().copied().unwrap_or(0) / 4;
    if let Some(r) = radii.iter().find(|&&r| r > guard || r == 0) {
        return Err(arg_err!("radius {r} outside [1, {guard}] (periodization guard L/4)"));
    }
    let d = torus.dim();
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut offset = vec![0i64; d];
        for phi in samples {
            for k in 0..d {
                offset.iter_mut().for_each(|o| *o = 0);
                offset[k] = r as i64;
                for x in 0..torus.node_count() {
                    let y = torus.offset(x, &offset).expect("torus wraps");
                    acc += libm::pow((phi[y] - phi[x]).abs(), p);
                    count += 1;
                }
            }
        }
        out.push((r, libm::pow(acc / count as f64, 1.0 / p)));
    }
    Ok(out)
}

/// Constants entering the minimal radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalRadiusParams {
    pub theta: f64,
    pub p: f64,
    pub gamma: f64,
    pub c_theta: f64,
}

impl Default for MinimalRadiusParams {
    fn default() -> Self {
        MinimalRadiusParams { theta: 0.1, p: 2.0, gamma: 2.0, c_theta: 1.0 }
    }
}

impl MinimalRadiusParams {
    pub fn p_conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn sigma0(&self) -> f64 {
        1.0 / (4.0 * self.gamma * self.p_conjugate())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(alloc::format!("theta must lie in (0,1), got {}", self.theta)));
        }
        if !(self.p > 1.0) || !(self.gamma >= 1.0) || !(self.c_theta > 0.0) {
            return Err(Error::Config("need p > 1, gamma >= 1 and C_theta > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalRadius {
    /// `chi_*`: the infimum scale joined with the floor `theta^{-p}`.
    pub chi_star: f64,
    /// Infimum scale alone (capped at `L/4` when censored).
    pub chi_star_scale: f64,
    pub chi_star_censored: bool,
    pub c_star: f64,
    /// The supremum was attained at the largest admissible radius.
    pub c_star_censored: bool,
    /// `(4 C_theta c_*)^{1/sigma_0}`.
    pub chi_star_star: f64,
}

/// Oscillation `(avg_{B_2R} |psi - (psi)_{2R}|^{2p})^{1/p}` of the vector
/// field `psi` over the `l-infinity` ball of radius `2R` about `base`.
pub fn oscillation(components: &[&NodeField], torus: &DomainGrid, base: usize, radius: usize, p: f64) -> f64 {
    let d = torus.dim();
    let half = 2 * radius as i64;
    let span = (2 * half) as usize;
    let count = span.pow(d as u32);
    let mut nodes = Vec::with_capacity(count);
    let mut offset = vec![0i64; d];
    for flat in 0..count {
        let mut rest = flat;
        for o in offset.iter_mut() {
            *o = (rest % span) as i64 - half;
            rest /= span;
        }
        nodes.push(torus.offset(base, &offset).expect("torus wraps"));
    }
    let means: Vec<f64> = components.iter().map(|c| nodes.iter().map(|&x| c[x]).sum::<f64>() / count as f64).collect();
    let mut acc = 0.0;
    for &x in &nodes {
        let sq: f64 = components.iter().zip(&means).map(|(c, m)| (c[x] - m) * (c[x] - m)).sum();
        acc += libm::pow(sq, p);
    }
    libm::pow(acc / count as f64, 1.0 / p)
}

/// Minimal radii at `base` from one sample's `(phi, sigma)`; radii are
/// dyadic in `[1, L/4]`. `sigma` components are weighted to reproduce the
/// full antisymmetric tensor norm.
pub fn minimal_radius(set: &CorrectorSet, torus: &DomainGrid, params: &MinimalRadiusParams, base: usize) -> Result<MinimalRadius> {
    params.validate()?;
    require_torus(torus)?;
    let cap = torus.sides().iter().min().copied().unwrap_or(0) / 4;
    if cap < 1 {
        return Err(arg_err!("torus too small for minimal radii: need side >= 4"));
    }
    let mut scaled_sigma = Vec::new();
    for s in &set.sigma {
        for c in s.components() {
            scaled_sigma.push(NodeField(c.iter().map(|v| v * core::f64::consts::SQRT_2).collect()));
        }
    }
    let mut comps: Vec<&NodeField> = set.correctors.iter().map(|c| &c.phi).collect();
    comps.extend(scaled_sigma.iter());

    let radii: Vec<usize> = core::iter::successors(Some(1usize), |r| Some(r * 2)).take_while(|&r| r <= cap).collect();
    let osc: Vec<f64> = radii.iter().map(|&r| oscillation(&comps, torus, base, r, params.p)).collect();

    let chi_exp = 1.0 / (params.gamma * params.p_conjugate());
    let holds: Vec<bool> = radii.iter().zip(&osc).map(|(&r, &o)| libm::pow(r as f64, -chi_exp) * o <= params.theta).collect();
    // Smallest dyadic radius from which the condition holds all the way up.
    let mut scale = None;
    for idx in (0..radii.len()).rev() {
        if !holds[idx] {
            break;
        }
        scale = Some(radii[idx] as f64);
    }
    let floor = libm::pow(params.theta, -params.p);
    let (chi_star_scale, chi_star_censored) = match scale {
        Some(s) => (s, false),
        None => (cap as f64, true),
    };
    let chi_star = chi_star_scale.max(floor);

    let sigma0 = params.sigma0();
    let weighted: Vec<f64> = radii.iter().zip(&osc).map(|(&r, &o)| libm::pow(r as f64, -2.0 * sigma0) * o).collect();
    let (arg, sup) = weighted.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc });
    let c_star = sup.max(1.0);
    let c_star_censored = sup > 1.0 && arg + 1 == radii.len();
    let chi_star_star = libm::pow(4.0 * params.c_theta * c_star, 1.0 / sigma0);
    Ok(MinimalRadius { chi_star, chi_star_scale, chi_star_censored, c_star, c_star_censored, chi_star_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{EnsembleSpec, Law};
    use crate::solver::solve_periodic_dense;

    fn opts() -> SolveOptions {
        SolveOptions::with_tolerance(1e-12)
    }

    #[test]
    fn constant_coefficients_have_trivial_correctors() {
        let t = DomainGrid::torus(8, 2).unwrap();
        let f = CoefficientField::constant(&t, 0.25, 2.5).unwrap();
        let set = CorrectorSet::compute(&f, &t, &opts(), true).unwrap();
        for (i, c) in set.correctors.iter().enumerate() {
            assert!(c.phi.iter().all(|&v| v == 0.0));
            for (e, q) in c.flux.iter().enumerate() {
                assert_eq!(*q, if t.edge_axis(e) == i { 2.5 } else { 0.0 });
            }
        }
        assert_eq!(set.abar, Tensor::scaled_identity(2, 2.5));
        assert!(set.sigma.iter().all(|s| s.components().iter().all(|c| c.iter().all(|&v| v == 0.0))));
    }

    #[test]
    fn alternating_ring_harmonic_mean() {
        let t = DomainGrid::torus(10, 1).unwrap();
        let a: Vec<f64> = (0..10).map(|e| if e % 2 == 0 { 1.0 } else { 4.0 }).collect();
        let f = CoefficientField::from_values(&t, 0.25, a.clone()).unwrap();
        let c = solve_corrector(&f, &t, 0, &opts()).unwrap();
        let g = gradient(&t, &c.phi).unwrap();
        for e in 0..10 {
            assert!((a[e] * (g[e] + 1.0) - 1.6).abs() < 1e-10);
        }
    }

    #[test]
    fn flux_is_divergence_free_on_random_torus() {
        let t = DomainGrid::torus(8, 2).unwrap();
        let spec = EnsembleSpec::new(2, 0.25, Law::TwoPhase { alpha: 0.25, beta: 4.0, p: 0.5 }).unwrap().with_seed(2);
        let f = spec.sample(&t, 0).unwrap();
        for i in 0..2 {
            let c = solve_corrector(&f, &t, i, &SolveOptions::default()).unwrap();
            assert!(c.relative_residual <= 1e-10);
            assert!(c.phi.mean().abs() < 1e-12);
        }
    }

    #[test]
    fn abar_in_voigt_reuss_window() {
        let t = DomainGrid::torus(16, 2).unwrap();
        let spec = EnsembleSpec::new(2, 0.25, Law::LogUniform).unwrap().with_seed(8);
        for s in 0..3 {
            let f = spec.sample(&t, s).unwrap();
            let set = CorrectorSet::compute(&f, &t, &opts(), false).unwrap();
            let (lo, hi) = voigt_reuss_bounds(&f, &t);
            let ev = set.abar.symmetric_eigenvalues();
            assert!(ev[0] >= lo - 1e-9 && ev[1] <= hi + 1e-9, "{ev:?} vs [{lo}, {hi}]");
            assert!((set.abar_raw.get(0, 1) - set.abar_raw.get(1, 0)).abs() < 1e-8);
        }
    }

    #[test]
    fn one_dimensional_abar_is_harmonic_mean() {
        let t = DomainGrid::torus(64, 1).unwrap();
        let spec = EnsembleSpec::new(1, 0.25, Law::TwoPhase { alpha: 0.25, beta: 4.0, p: 0.3 }).unwrap().with_seed(1);
        let f = spec.sample(&t, 0).unwrap();
        let set = CorrectorSet::compute(&f, &t, &opts(), false).unwrap();
        let h = 64.0 / f.values().iter().map(|v| 1.0 / v).sum::<f64>();
        assert!((set.abar.get(0, 0) - h).abs() < 1e-10);
    }

    #[test]
    fn homogenized_tensor_of_constants() {
        let est = homogenized_tensor(&vec![Tensor::scaled_identity(2, 3.0); 4]).unwrap();
        assert_eq!(est.mean, Tensor::scaled_identity(2, 3.0));
        assert_eq!(est.std_error, Tensor::zeros(2));
        assert!(matches!(homogenized_tensor(&[]), Err(Error::Empty)));
    }

    #[test]
    fn sigma_matches_dense_oracle() {
        let t = DomainGrid::torus(8, 2).unwrap();
        let spec = EnsembleSpec::new(2, 0.25, Law::LogUniform).unwrap().with_seed(21);
        let f = spec.sample(&t, 0).unwrap();
        let set = CorrectorSet::compute(&f, &t, &opts(), true).unwrap();
        let column: Vec<f64> = (0..2).map(|k| set.abar_raw.get(k, 0)).collect();
        let sigma = &set.sigma[0];
        assert_eq!(sigma.components().len(), 1);
        assert_eq!(sigma.value(1, 0, 3), -sigma.value(0, 1, 3));
        assert_eq!(sigma.value(1, 1, 3), 0.0);

        let averaged: Vec<NodeField> = (0..2).map(|k| node_average_component(&t, &set.correctors[0].flux, k)).collect();
        let rhs = t.node_field_from(|x| central_difference(&t, &averaged[1], 0, x) - central_difference(&t, &averaged[0], 1, x));
        let lap = assemble_conductances(&vec![1.0; t.edge_count()], &t);
        let dense = solve_periodic_dense(&lap, &rhs).unwrap().field;
        for x in 0..t.node_count() {
            assert!((dense[x] - sigma.components()[0][x]).abs() < 1e-8);
        }
        let oracle = FluxCorrector { dim: 2, components: vec![dense], divergence_residual: 0.0 };
        let r = divergence_identity_residual(&oracle, &averaged, &column, &t);
        assert!((r - sigma.divergence_residual).abs() < 1e-8);
    }

    #[test]
    fn fluctuation_guard_and_constant_case() {
        let t = DomainGrid::torus(16, 2).unwrap();
        let zero = NodeField::zeros(t.node_count());
        let prof = fluctuation_profile(core::slice::from_ref(&zero), &t, 2.0, &[1, 2, 4]).unwrap();
        assert!(prof.iter().all(|&(_, v)| v == 0.0));
        assert!(fluctuation_profile(&[zero], &t, 2.0, &[5]).is_err());
    }

    #[test]
    fn minimal_radius_floors_for_constant_field() {
        let t = DomainGrid::torus(32, 2).unwrap();
        let f = CoefficientField::constant(&t, 0.5, 1.0).unwrap();
        let set = CorrectorSet::compute(&f, &t, &opts(), true).unwrap();
        let params = MinimalRadiusParams::default();
        let mr = minimal_radius(&set, &t, &params, 0).unwrap();
        assert_eq!(mr.chi_star, libm::pow(0.1, -2.0));
        assert_eq!(mr.c_star, 1.0);
        assert!((mr.chi_star_star - libm::pow(4.0, 1.0 / params.sigma0())).abs() < 1e-6 * mr.chi_star_star);
        assert!(!mr.chi_star_censored);
    }

    #[test]
    fn minimal_radius_censors_for_tiny_theta_and_is_monotone() {
        let t = DomainGrid::torus(32, 2).unwrap();
        let spec = EnsembleSpec::new(2, 0.25, Law::TwoPhase { alpha: 0.25, beta: 4.0, p: 0.5 }).unwrap().with_seed(3);
        let f = spec.sample(&t, 0).unwrap();
        let set = CorrectorSet::compute(&f, &t, &SolveOptions::default(), true).unwrap();
        let tiny = MinimalRadiusParams { theta: 1e-9, ..Default::default() };
        let mr = minimal_radius(&set, &t, &tiny, 0).unwrap();
        assert!(mr.chi_star_censored);
        assert_eq!(mr.chi_star_scale, 8.0);
        let mut last = f64::INFINITY;
        for theta in [0.01, 0.05, 0.1, 0.3, 0.6, 0.9] {
            let mr = minimal_radius(&set, &t, &MinimalRadiusParams { theta, ..Default::default() }, 0).unwrap();
            assert!(mr.chi_star <= last && mr.chi_star >= 1.0 && mr.chi_star_star >= 1.0);
            last = mr.chi_star;
        }
    }
}
