//! Stationary iid conductance ensembles.
//!
//! Each sample owns a ChaCha8 stream selected by its index, so a sample is a
//! pure function of `(spec, domain, sample_index)` and samples can be drawn
//! concurrently in any order. Edge values are drawn in the domain's edge order.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Error, Result};
use crate::lattice::{DomainGrid, DomainKind, EdgeField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    /// `alpha` with probability `p`, `beta` otherwise.
    TwoPhase { alpha: f64, beta: f64, p: f64 },
    /// `ln a` uniform on `[ln lambda, -ln lambda]`.
    LogUniform,
}

impl Law {
    /// Deterministic law `a = c`.
    pub fn constant(c: f64) -> Self {
        Law::TwoPhase { alpha: c, beta: c, p: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Law::TwoPhase { .. } => "two-phase",
            Law::LogUniform => "log-uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub dim: usize,
    pub lambda: f64,
    pub law: Law,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(dim: usize, lambda: f64, law: Law) -> Result<Self> {
        let spec = EnsembleSpec { dim, lambda, law, seed: 0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: alloc::string::String| Err(Error::Config(m));
        if !(1..=3).contains(&self.dim) {
            return cfg(format!("dimension must be 1, 2 or 3, got {}", self.dim));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return cfg(format!("ellipticity lambda must lie in (0,1), got {}", self.lambda));
        }
        if let Law::TwoPhase { alpha, beta, p } = self.law {
            let (lo, hi) = (self.lambda, 1.0 / self.lambda);
            for (name, v) in [("alpha", alpha), ("beta", beta)] {
                if !(v >= lo && v <= hi) {
                    return cfg(format!("{name} = {v} outside [{lo}, {hi}]"));
                }
            }
            if !(0.0..=1.0).contains(&p) {
                return cfg(format!("phase probability p = {p} outside [0,1]"));
            }
        }
        Ok(())
    }

    /// True when every sample is the same constant field.
    pub fn is_deterministic(&self) -> bool {
        match self.law {
            Law::TwoPhase { alpha, beta, p } => alpha == beta || p == 0.0 || p == 1.0,
            Law::LogUniform => false,
        }
    }

    pub fn mean(&self) -> f64 {
        match self.law {
            Law::TwoPhase { alpha, beta, p } => p * alpha + (1.0 - p) * beta,
            Law::LogUniform => {
                let w = -2.0 * libm::log(self.lambda);
                (1.0 / self.lambda - self.lambda) / w
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self.law {
            Law::TwoPhase { alpha, beta, p } => p * (1.0 - p) * (alpha - beta) * (alpha - beta),
            Law::LogUniform => {
                let w = -2.0 * libm::log(self.lambda);
                let second = (1.0 / (self.lambda * self.lambda) - self.lambda * self.lambda) / (2.0 * w);
                second - self.mean() * self.mean()
            }
        }
    }

    /// Arithmetic and harmonic means of the single-edge law.
    pub fn law_means(&self) -> (f64, f64) {
        let harmonic = match self.law {
            Law::TwoPhase { alpha, beta, p } => 1.0 / (p / alpha + (1.0 - p) / beta),
            // E[1/a] equals E[a] by the symmetry ln a -> -ln a.
            Law::LogUniform => 1.0 / self.mean(),
        };
        (self.mean(), harmonic)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.law {
            Law::TwoPhase { alpha, beta, p } => {
                let u: f64 = rng.random();
                if u < p { alpha } else { beta }
            }
            Law::LogUniform => {
                let u: f64 = rng.random();
                let lo = libm::log(self.lambda);
                libm::exp(lo + u * (-2.0 * lo)).clamp(self.lambda, 1.0 / self.lambda)
            }
        }
    }

    pub fn sample_rng(&self, sample_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample_index);
        rng
    }

    /// Stream for per-sample side data (boundary data, probe edges) that is
    /// disjoint from every coefficient stream.
    pub fn auxiliary_rng(&self, sample_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample_index | 1 << 63);
        rng
    }

    /// Exact homogenized coefficient in `d = 2` for laws invariant under
    /// `a -> c / a` (then `abar = sqrt(c) I`); `None` otherwise. Constant
    /// laws return their value in every dimension.
    pub fn duality_value(&self) -> Option<f64> {
        if self.is_deterministic() {
            return Some(self.mean());
        }
        if self.dim != 2 {
            return None;
        }
        match self.law {
            Law::TwoPhase { alpha, beta, p } if p == 0.5 => Some(libm::sqrt(alpha * beta)),
            Law::LogUniform => Some(1.0),
            Law::TwoPhase { .. } => None,
        }
    }

    /// One realization of the ensemble on `domain`.
    pub fn sample(&self, domain: &DomainGrid, sample_index: u64) -> Result<CoefficientField> {
        self.validate()?;
        if domain.dim() != self.dim {
            return Err(arg_err!("domain dimension {} differs from ensemble dimension {}", domain.dim(), self.dim));
        }
        let mut rng = self.sample_rng(sample_index);
        let values = (0..domain.edge_count()).map(|_| self.draw(&mut rng)).collect();
        Ok(CoefficientField { kind: domain.kind(), sides: domain.sides().to_vec(), lambda: self.lambda, values })
    }
}

/// Per-edge conductances of one sample, in `[lambda, 1/lambda]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    kind: DomainKind,
    sides: Vec<usize>,
    lambda: f64,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn from_values(domain: &DomainGrid, lambda: f64, values: Vec<f64>) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Config(format!("ellipticity lambda must lie in (0,1), got {lambda}")));
        }
        if values.len() != domain.edge_count() {
            return Err(arg_err!("{} values for {} edges", values.len(), domain.edge_count()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= lambda && **v <= 1.0 / lambda)) {
            return Err(arg_err!("conductance {v} outside [{lambda}, {}]", 1.0 / lambda));
        }
        Ok(CoefficientField { kind: domain.kind(), sides: domain.sides().to_vec(), lambda, values })
    }

    pub fn constant(domain: &DomainGrid, lambda: f64, c: f64) -> Result<Self> {
        Self::from_values(domain, lambda, alloc::vec![c; domain.edge_count()])
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_domain(&self, domain: &DomainGrid) -> Result<()> {
        if self.kind != domain.kind() || self.sides != domain.sides() || self.values.len() != domain.edge_count() {
            return Err(arg_err!(
                "coefficient field ({:?} {:?}) does not match domain ({:?} {:?})",
                self.kind,
                self.sides,
                domain.kind(),
                domain.sides()
            ));
        }
        Ok(())
    }

    /// `field + delta`, optionally projected back into `[lambda, 1/lambda]`.
    pub fn perturb(&self, delta: &EdgeField, clamp: bool) -> Result<Self> {
        if delta.len() != self.values.len() {
            return Err(arg_err!("perturbation has {} entries, field has {}", delta.len(), self.values.len()));
        }
        let (lo, hi) = (self.lambda, 1.0 / self.lambda);
        let values = self
            .values
            .iter()
            .zip(delta.iter())
            .map(|(a, d)| if clamp { (a + d).clamp(lo, hi) } else { a + d })
            .collect();
        Ok(CoefficientField { values, ..self.clone() })
    }

    /// Restriction of a torus field to a box whose node `0` sits at torus
    /// node `origin`. Box edges map to the torus edges they coincide with.
    pub fn restrict_to_box(&self, torus: &DomainGrid, boxed: &DomainGrid, origin: &[usize]) -> Result<Self> {
        self.check_domain(torus)?;
        if torus.kind() != DomainKind::Torus || boxed.kind() != DomainKind::Box || origin.len() != torus.dim() {
            return Err(arg_err!("restriction needs a torus field, a box and a matching origin"));
        }
        if boxed.sides().iter().zip(torus.sides()).any(|(b, t)| b >= t) {
            return Err(arg_err!("box {:?} does not fit strictly inside torus {:?}", boxed.sides(), torus.sides()));
        }
        let shift: Vec<i64> = origin.iter().map(|&o| o as i64).collect();
        let mut values = Vec::with_capacity(boxed.edge_count());
        for e in 0..boxed.edge_count() {
            let (tail, _, axis) = boxed.edge(e);
            let coords: Vec<i64> = boxed.coords(tail).iter().zip(&shift).map(|(&c, &s)| c as i64 + s).collect();
            let node = torus.offset(0, &coords).expect("torus offsets wrap");
            let te = torus.edge_from(node, axis).expect("torus has every edge");
            values.push(self.values[te]);
        }
        Ok(CoefficientField { kind: DomainKind::Box, sides: boxed.sides().to_vec(), lambda: self.lambda, values })
    }
}

/// Mean Pearson correlation between edge values a lattice distance `lag`
/// apart along the edge's own axis, averaged over `n_samples` tori of side
/// `side`. Zero-variance laws return `0`.
pub fn correlation_probe(spec: &EnsembleSpec, side: usize, n_samples: usize, lag: usize) -> Result<f64> {
    if n_samples < 2 {
        return Err(arg_err!("correlation probe needs at least 2 samples, got {n_samples}"));
    }
    let torus = DomainGrid::torus(side, spec.dim)?;
    if lag >= side {
        return Err(arg_err!("lag {lag} must be below the torus side {side}"));
    }
    let mut total = 0.0;
    for s in 0..n_samples as u64 {
        let field = spec.sample(&torus, s)?;
        let a = field.values();
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var <= f64::EPSILON * mean * mean {
            continue;
        }
        let mut cov = 0.0;
        for e in 0..a.len() {
            let (tail, _, axis) = torus.edge(e);
            let mut node = tail;
            for _ in 0..lag {
                node = torus.step(node, axis, 1).expect("torus wraps");
            }
            let partner = torus.edge_from(node, axis).expect("torus has every edge");
            cov += (a[e] - mean) * (a[partner] - mean);
        }
        total += cov / n / var;
    }
    Ok(total / n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_phase(alpha: f64, beta: f64, p: f64) -> EnsembleSpec {
        EnsembleSpec::new(2, 0.25, Law::TwoPhase { alpha, beta, p }).unwrap()
    }

    #[test]
    fn degenerate_two_phase_is_constant() {
        let t = DomainGrid::torus(8, 2).unwrap();
        let f = two_phase(1.0, 1.0, 0.5).with_seed(99).sample(&t, 3).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn two_phase_mean_within_three_sigma() {
        let t = DomainGrid::torus(64, 2).unwrap();
        let spec = two_phase(0.25, 4.0, 0.5).with_seed(11);
        let f = spec.sample(&t, 0).unwrap();
        let n = f.len() as f64;
        let mean = f.values().iter().sum::<f64>() / n;
        let sigma = libm::sqrt(spec.variance() / n);
        assert!((mean - 2.125).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic_and_index_sensitive() {
        let t = DomainGrid::torus(16, 2).unwrap();
        let spec = EnsembleSpec::new(2, 0.25, Law::LogUniform).unwrap().with_seed(5);
        let a = spec.sample(&t, 7).unwrap();
        let b = spec.sample(&t, 7).unwrap();
        let c = spec.sample(&t, 8).unwrap();
        let bits = |f: &CoefficientField| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
        assert!(a.values().iter().all(|&v| (0.25..=4.0).contains(&v)));
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        assert!(matches!(EnsembleSpec::new(2, 1.5, Law::LogUniform), Err(Error::Config(_))));
        assert!(matches!(EnsembleSpec::new(2, 0.5, Law::TwoPhase { alpha: 0.25, beta: 1.0, p: 0.5 }), Err(Error::Config(_))));
        assert!(matches!(EnsembleSpec::new(2, 0.5, Law::TwoPhase { alpha: 1.0, beta: 1.0, p: 1.5 }), Err(Error::Config(_))));
    }

    #[test]
    fn perturbation_contracts() {
        let t = DomainGrid::torus(4, 2).unwrap();
        let f = two_phase(0.25, 4.0, 0.5).sample(&t, 0).unwrap();
        assert_eq!(f.perturb(&EdgeField::zeros(f.len()), false).unwrap(), f);

        let mut delta = EdgeField::zeros(f.len());
        delta[5] = 1e-3;
        let g = f.perturb(&delta, false).unwrap();
        let changed: Vec<_> = (0..f.len()).filter(|&e| g.values()[e] != f.values()[e]).collect();
        assert_eq!(changed, vec![5]);
        assert!((g.values()[5] - f.values()[5] - 1e-3).abs() < 1e-15);

        delta[5] = -10.0;
        assert_eq!(f.perturb(&delta, true).unwrap().values()[5], 0.25);
        assert!(f.perturb(&EdgeField::zeros(3), false).is_err());
    }

    #[test]
    fn correlation_lag_zero_and_iid() {
        let spec = two_phase(0.25, 4.0, 0.5).with_seed(3);
        let c0 = correlation_probe(&spec, 16, 8, 0).unwrap();
        assert!((c0 - 1.0).abs() < 1e-12);
        let n_samples = 256;
        let c1 = correlation_probe(&spec, 16, n_samples, 1).unwrap();
        let edges = 2.0 * 256.0;
        assert!(c1.abs() < 4.0 / libm::sqrt(n_samples as f64 * edges), "lag-1 correlation {c1}");
        let flat = two_phase(0.25, 4.0, 0.0);
        assert_eq!(correlation_probe(&flat, 16, 4, 1).unwrap(), 0.0);
    }

    #[test]
    fn restriction_follows_torus_edges() {
        let t = DomainGrid::torus(8, 2).unwrap();
        let b = DomainGrid::dirichlet_box(4, 2).unwrap();
        let f = EnsembleSpec::new(2, 0.25, Law::LogUniform).unwrap().sample(&t, 1).unwrap();
        let r = f.restrict_to_box(&t, &b, &[2, 3]).unwrap();
        for e in 0..b.edge_count() {
            let (tail, _, axis) = b.edge(e);
            let c = b.coords(tail);
            let node = t.node_index(&[(c[0] + 2) % 8, (c[1] + 3) % 8]).unwrap();
            assert_eq!(r.values()[e], f.values()[t.edge_from(node, axis).unwrap()]);
        }
    }
}
