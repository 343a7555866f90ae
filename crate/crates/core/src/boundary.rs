//! Dirichlet boundary correctors `Psi_i` (zero trace, `A Psi_i = div(a e_i)`),
//! the error fields `Q_i = Psi_i - phi_i` and the boundary experiments.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::corrector::solve_corrector;
use crate::ensemble::CoefficientField;
use crate::error::{arg_err, Error, Result};
use crate::lattice::{assemble, dirichlet_lift, divergence, gradient, norm2, DomainGrid, DomainKind, EdgeField, NodeField};
use crate::solver::{solve_cg, SolveOptions};

#[derive(Debug, Clone)]
pub struct BoundaryCorrector {
    pub axis: usize,
    pub psi: NodeField,
    pub grad: EdgeField,
    pub relative_residual: f64,
    pub iterations: usize,
}

fn require_box(domain: &DomainGrid) -> Result<()> {
    if domain.kind() != DomainKind::Box {
        return Err(arg_err!("boundary correctors live on a Dirichlet box"));
    }
    Ok(())
}

/// `Psi_i` from the divergence form: zero data, right-hand side `div(a e_i)`.
pub fn solve_boundary_corrector(field: &CoefficientField, boxed: &DomainGrid, axis: usize, opts: &SolveOptions) -> Result<BoundaryCorrector> {
    require_box(boxed)?;
    if axis >= boxed.dim() {
        return Err(arg_err!("axis {axis} out of range for dimension {}", boxed.dim()));
    }
    let system = assemble(field, boxed)?;
    let rhs = divergence(boxed, &boxed.directional(field.values(), axis))?;
    let sol = solve_cg(&system, &rhs, opts)?;
    let grad = gradient(boxed, &sol.field)?;
    Ok(BoundaryCorrector { axis, psi: sol.field, grad, relative_residual: sol.relative_residual, iterations: sol.iterations })
}

/// `Psi_i` through the harmonic extension `Phi_i` of the linear data `x_i`,
/// assembled independently through the Dirichlet lift: returns `Phi_i - x_i`.
pub fn solve_boundary_corrector_lifted(field: &CoefficientField, boxed: &DomainGrid, axis: usize, opts: &SolveOptions) -> Result<NodeField> {
    require_box(boxed)?;
    if axis >= boxed.dim() {
        return Err(arg_err!("axis {axis} out of range for dimension {}", boxed.dim()));
    }
    let system = assemble(field, boxed)?;
    let data = boxed.node_field_from(|x| boxed.position(x, axis));
    let rhs = dirichlet_lift(field.values(), boxed, &data)?;
    let phi = solve_cg(&system, &rhs, opts)?.field;
    Ok(boxed.node_field_from(|x| {
        let full = if boxed.is_interior(x) { phi[x] } else { data[x] };
        full - data[x]
    }))
}

/// Node values of a torus field on the box placed with its node `0` at `origin`.
pub fn restrict_node_field(torus: &DomainGrid, u: &NodeField, boxed: &DomainGrid, origin: &[usize]) -> Result<NodeField> {
    if torus.kind() != DomainKind::Torus || origin.len() != torus.dim() || boxed.dim() != torus.dim() {
        return Err(arg_err!("restriction needs a torus source and a matching origin"));
    }
    if u.len() != torus.node_count() {
        return Err(arg_err!("node field has {} entries, torus has {}", u.len(), torus.node_count()));
    }
    let shift: Vec<i64> = origin.iter().map(|&o| o as i64).collect();
    Ok(boxed.node_field_from(|x| {
        let c: Vec<i64> = boxed.coords(x).iter().zip(&shift).map(|(&c, &s)| c as i64 + s).collect();
        u[torus.offset(0, &c).expect("torus wraps")]
    }))
}

/// `Q = Psi - phi` and its lattice gradient.
pub fn error_field(psi: &NodeField, phi_restricted: &NodeField, boxed: &DomainGrid) -> Result<(NodeField, EdgeField)> {
    if psi.len() != boxed.node_count() || phi_restricted.len() != boxed.node_count() {
        return Err(arg_err!("error field inputs do not match the box node count {}", boxed.node_count()));
    }
    let q = NodeField(psi.iter().zip(phi_restricted.iter()).map(|(a, b)| a - b).collect());
    let grad = gradient(boxed, &q)?;
    Ok((q, grad))
}

/// Boundary correctors of one sample with optional error fields.
#[derive(Debug, Clone)]
pub struct BoundaryCorrectorSet {
    pub correctors: Vec<BoundaryCorrector>,
    /// `(Q_i, grad Q_i)` per direction, when a torus corrector was supplied.
    pub errors: Vec<(NodeField, EdgeField)>,
}

impl BoundaryCorrectorSet {
    pub fn compute(field: &CoefficientField, boxed: &DomainGrid, opts: &SolveOptions) -> Result<Self> {
        let correctors = (0..boxed.dim()).map(|i| solve_boundary_corrector(field, boxed, i, opts)).collect::<Result<Vec<_>>>()?;
        Ok(BoundaryCorrectorSet { correctors, errors: Vec::new() })
    }

    /// Box of side `L` centered in a torus of side `2L`: correctors on the
    /// box from the restricted field, `phi` on the torus, then `Q`.
    pub fn with_errors(torus_field: &CoefficientField, torus: &DomainGrid, boxed: &DomainGrid, opts: &SolveOptions) -> Result<Self> {
        let origin = centered_origin(torus, boxed)?;
        let field = torus_field.restrict_to_box(torus, boxed, &origin)?;
        let mut set = Self::compute(&field, boxed, opts)?;
        for c in &set.correctors {
            let phi = solve_corrector(torus_field, torus, c.axis, opts)?.phi;
            let phi_box = restrict_node_field(torus, &phi, boxed, &origin)?;
            set.errors.push(error_field(&c.psi, &phi_box, boxed)?);
        }
        Ok(set)
    }
}

/// Offset placing `boxed` in the middle of `torus`.
pub fn centered_origin(torus: &DomainGrid, boxed: &DomainGrid) -> Result<Vec<usize>> {
    if torus.dim() != boxed.dim() || torus.sides().iter().zip(boxed.sides()).any(|(t, b)| b >= t) {
        return Err(arg_err!("box {:?} does not fit inside torus {:?}", boxed.sides(), torus.sides()));
    }
    Ok(torus.sides().iter().zip(boxed.sides()).map(|(t, b)| (t - b) / 2).collect())
}

/// Squared gradient at a node from its forward edges.
pub fn node_gradient_sq(domain: &DomainGrid, grad: &EdgeField, node: usize) -> f64 {
    (0..domain.dim()).filter_map(|k| domain.edge_from(node, k)).map(|e| grad[e] * grad[e]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerBin {
    pub delta: usize,
    pub value: f64,
    pub count: usize,
}

/// Dyadic distance bins `{1, 2, 4, ..., L/2}` of a box.
pub fn layer_bins(boxed: &DomainGrid) -> Vec<usize> {
    let half = boxed.sides().iter().min().copied().unwrap_or(0) / 2;
    core::iter::successors(Some(1usize), |d| Some(d * 2)).take_while(|&d| d <= half).collect()
}

/// `<|grad Q|^p>^{1/p}` per exact-distance bin, pooled over the given
/// gradient fields; corner ties are excluded below the deepest bin.
pub fn layer_profile(grads: &[EdgeField], boxed: &DomainGrid, p: f64) -> Result<Vec<LayerBin>> {
    require_box(boxed)?;
    if grads.is_empty() {
        return Err(Error::Empty);
    }
    if p < 1.0 {
        return Err(arg_err!("moment order must be at least 1, got {p}"));
    }
    let bins = layer_bins(boxed);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins.len()];
    let deepest = bins.last().copied().unwrap_or(0);
    for x in 0..boxed.node_count() {
        let d = boxed.delta(x).unwrap_or(0);
        // The center ties every face but is the only node of the deepest bin.
        if !boxed.is_interior(x) || (boxed.is_corner_tie(x) && d < deepest) {
            continue;
        }
        if let Some(b) = bins.iter().position(|&v| v == d) {
            members[b].push(x);
        }
    }
    let mut out = Vec::with_capacity(bins.len());
    for (delta, nodes) in bins.into_iter().zip(members) {
        if nodes.is_empty() {
            return Err(arg_err!("distance bin {delta} is empty"));
        }
        let mut acc = 0.0;
        for g in grads {
            for &x in &nodes {
                acc += libm::pow(node_gradient_sq(boxed, g, x), 0.5 * p);
            }
        }
        let count = nodes.len() * grads.len();
        out.push(LayerBin { delta, value: libm::pow(acc / count as f64, 1.0 / p), count });
    }
    Ok(out)
}

/// `sup_x <|Psi(x)|^p>^{1/p}` over nodes, the moment taken across samples.
pub fn sup_moment(samples: &[NodeField], p: f64) -> Result<f64> {
    let first = samples.first().ok_or(Error::Empty)?;
    if p < 1.0 {
        return Err(arg_err!("moment order must be at least 1, got {p}"));
    }
    let n = samples.len() as f64;
    let mut best: f64 = 0.0;
    for x in 0..first.len() {
        let m = samples.iter().map(|s| libm::pow(s[x].abs(), p)).sum::<f64>() / n;
        best = best.max(libm::pow(m, 1.0 / p));
    }
    Ok(best)
}

/// Bump `prod_k sin(pi t_k / L)` at the edge midpoint, vanishing on the layer.
pub fn bump_weight(boxed: &DomainGrid, e: usize) -> f64 {
    let (tail, _, axis) = boxed.edge(e);
    (0..boxed.dim())
        .map(|k| {
            let t = boxed.position(tail, k) + if k == axis { 0.5 } else { 0.0 };
            libm::sin(core::f64::consts::PI * t / boxed.sides()[k] as f64)
        })
        .product()
}

/// Bump-weighted spatial averages `F_{ij} = sum eta grad_j Psi_i / sum eta`
/// over axis-`j` edges (row `i` per corrector). The unweighted average of
/// a zero-trace gradient telescopes to zero, so the weight is what carries
/// the fluctuation.
pub fn clt_average(set: &BoundaryCorrectorSet, boxed: &DomainGrid) -> Result<Vec<f64>> {
    require_box(boxed)?;
    let d = boxed.dim();
    let mut weight = vec![0.0; d];
    let mut out = vec![0.0; d * set.correctors.len()];
    for e in 0..boxed.edge_count() {
        let j = boxed.edge_axis(e);
        let w = bump_weight(boxed, e);
        weight[j] += w;
        for (i, c) in set.correctors.iter().enumerate() {
            out[i * d + j] += w * c.grad[e];
        }
    }
    for (idx, v) in out.iter_mut().enumerate() {
        *v /= weight[idx % d];
    }
    Ok(out)
}

/// Centered ensemble moment `<|F - <F>|^p>^{1/p}` of the averaged vectors.
pub fn clt_moment(averages: &[Vec<f64>], p: f64) -> Result<f64> {
    if averages.len() < 16 {
        return Err(arg_err!("CLT moment needs at least 16 samples, got {}", averages.len()));
    }
    let m = averages[0].len();
    let n = averages.len() as f64;
    let mean: Vec<f64> = (0..m).map(|k| averages.iter().map(|a| a[k]).sum::<f64>() / n).collect();
    let acc: f64 = averages
        .iter()
        .map(|a| libm::pow(libm::sqrt(a.iter().zip(&mean).map(|(v, c)| (v - c) * (v - c)).sum()), p))
        .sum();
    Ok(libm::pow(acc / n, 1.0 / p))
}

/// Dirichlet data: iid uniform `[-1, 1]` on the face `x_0 = L`, zero elsewhere.
pub fn far_face_data<R: Rng>(boxed: &DomainGrid, rng: &mut R) -> NodeField {
    let l = boxed.sides()[0];
    let mut g = NodeField::zeros(boxed.node_count());
    for x in 0..boxed.node_count() {
        if boxed.coord(x, 0) == l {
            g[x] = rng.random_range(-1.0..=1.0);
        }
    }
    g
}

/// Center of the face `x_0 = 0`.
pub fn zero_face_center(boxed: &DomainGrid) -> usize {
    let mut c: Vec<usize> = boxed.sides().iter().map(|l| l / 2).collect();
    c[0] = 0;
    boxed.node_index(&c).expect("face center is a node")
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzCurve {
    /// `(r, (avg_{D_r} |grad u|^2)^{1/2})` for dyadic `r`.
    pub points: Vec<(usize, f64)>,
}

impl LipschitzCurve {
    /// `max / min` over radii in `[lo, hi]`.
    pub fn ratio(&self, lo: f64, hi: f64) -> Option<f64> {
        let vals: Vec<f64> = self.points.iter().filter(|(r, _)| (*r as f64) >= lo && (*r as f64) <= hi).map(|p| p.1).collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        match (vals.is_empty(), min > 0.0) {
            (true, _) => None,
            (false, true) => Some(max / min),
            (false, false) => Some(if max > 0.0 { f64::INFINITY } else { 1.0 }),
        }
    }

    /// `max_r (r / R)^{1 - alpha} E(r) / E(R)` over radii in `[lo, R]`, `R` the
    /// largest radius of the curve.
    pub fn holder_ratio(&self, lo: f64, alpha: f64) -> Option<f64> {
        let &(big, e_big) = self.points.last()?;
        if e_big <= 0.0 {
            return Some(0.0);
        }
        self.points
            .iter()
            .filter(|(r, _)| (*r as f64) >= lo)
            .map(|&(r, e)| libm::pow(r as f64 / big as f64, 1.0 - alpha) * e / e_big)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }
}

/// Solve `A u = 0` with Dirichlet data `g` and return the full node field.
pub fn solve_dirichlet(field: &CoefficientField, boxed: &DomainGrid, g: &NodeField, opts: &SolveOptions) -> Result<NodeField> {
    require_box(boxed)?;
    let system = assemble(field, boxed)?;
    let rhs = dirichlet_lift(field.values(), boxed, g)?;
    let inner = solve_cg(&system, &rhs, opts)?.field;
    Ok(boxed.node_field_from(|x| if boxed.is_interior(x) { inner[x] } else { g[x] }))
}

/// Half-ball energy curve about the zero-face center for the solution with
/// data `g`; radii are dyadic up to `L/4` and balls are Euclidean.
pub fn lipschitz_probe(field: &CoefficientField, boxed: &DomainGrid, g: &NodeField, opts: &SolveOptions) -> Result<LipschitzCurve> {
    let u = solve_dirichlet(field, boxed, g, opts)?;
    let grad = gradient(boxed, &u)?;
    let base = zero_face_center(boxed);
    let base_c = boxed.coords(base);
    let cap = boxed.sides().iter().min().copied().unwrap_or(0) / 4;
    let mut points = Vec::new();
    let mut r = 1;
    while r <= cap {
        let (mut acc, mut n) = (0.0, 0usize);
        for x in 0..boxed.node_count() {
            let d2: f64 = boxed.coords(x).iter().zip(&base_c).map(|(&a, &b)| (a as f64 - b as f64) * (a as f64 - b as f64)).sum();
            if d2 < (r * r) as f64 {
                acc += node_gradient_sq(boxed, &grad, x);
                n += 1;
            }
        }
        points.push((r, libm::sqrt(acc / n as f64)));
        r *= 2;
    }
    if points.is_empty() {
        return Err(arg_err!("box side {} too small for the Lipschitz probe", boxed.sides()[0]));
    }
    Ok(LipschitzCurve { points })
}

/// `||A Psi - div(a e_i)|| / ||div(a e_i)||` recomputed from the stored field.
pub fn residual(field: &CoefficientField, boxed: &DomainGrid, c: &BoundaryCorrector) -> Result<f64> {
    let system = assemble(field, boxed)?;
    let rhs = system.gather(&divergence(boxed, &boxed.directional(field.values(), c.axis))?);
    let x = system.gather(&c.psi);
    let mut ax = vec![0.0; x.len()];
    system.apply(&x, &mut ax);
    let r: Vec<f64> = ax.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let scale = norm2(&rhs);
    Ok(if scale == 0.0 { norm2(&r) } else { norm2(&r) / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{EnsembleSpec, Law};

    fn opts() -> SolveOptions {
        SolveOptions::with_tolerance(1e-12)
    }

    #[test]
    fn constant_field_collapses() {
        let b = DomainGrid::dirichlet_box(8, 2).unwrap();
        let f = CoefficientField::constant(&b, 0.5, 1.5).unwrap();
        let set = BoundaryCorrectorSet::compute(&f, &b, &opts()).unwrap();
        for c in &set.correctors {
            assert!(c.psi.iter().all(|&v| v == 0.0));
        }
        assert!(clt_average(&set, &b).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_unknown_closed_form() {
        let b = DomainGrid::dirichlet_box(3, 1).unwrap();
        let f = CoefficientField::from_values(&b, 0.25, vec![1.0, 2.0, 1.0]).unwrap();
        let c = solve_boundary_corrector(&f, &b, 0, &opts()).unwrap();
        let expect = [0.0, 0.2, -0.2, 0.0];
        for (a, e) in c.psi.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn two_formulations_agree() {
        let b = DomainGrid::dirichlet_box(16, 2).unwrap();
        let spec = EnsembleSpec::new(2, 0.25, Law::LogUniform).unwrap().with_seed(4);
        let f = spec.sample(&b, 0).unwrap();
        for i in 0..2 {
            let c = solve_boundary_corrector(&f, &b, i, &opts()).unwrap();
            let alt = solve_boundary_corrector_lifted(&f, &b, i, &opts()).unwrap();
            let diff = c.psi.iter().zip(alt.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < 1e-8, "{diff}");
            assert!(residual(&f, &b, &c).unwrap() < 1e-10);
            for x in 0..b.node_count() {
                if !b.is_interior(x) {
                    assert_eq!(c.psi[x], 0.0);
                }
            }
        }
    }

    #[test]
    fn error_field_vanishes_for_constants() {
        let t = DomainGrid::torus(16, 2).unwrap();
        let b = DomainGrid::dirichlet_box(8, 2).unwrap();
        let f = CoefficientField::constant(&t, 0.5, 2.0).unwrap();
        let set = BoundaryCorrectorSet::with_errors(&f, &t, &b, &opts()).unwrap();
        assert_eq!(set.errors.len(), 2);
        for (q, g) in &set.errors {
            assert!(q.iter().all(|&v| v == 0.0) && g.iter().all(|&v| v == 0.0));
        }
        let prof = layer_profile(&[set.errors[0].1.clone()], &b, 2.0).unwrap();
        assert_eq!(prof.iter().map(|b| b.delta).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert!(prof.iter().all(|b| b.value == 0.0));
    }

    #[test]
    fn restriction_matches_coordinates() {
        let t = DomainGrid::torus(8, 2).unwrap();
        let b = DomainGrid::dirichlet_box(4, 2).unwrap();
        let u = t.node_field_from(|x| (t.coord(x, 0) * 10 + t.coord(x, 1)) as f64);
        let o = centered_origin(&t, &b).unwrap();
        assert_eq!(o, vec![2, 2]);
        let r = restrict_node_field(&t, &u, &b, &o).unwrap();
        let corner = b.node_index(&[4, 4]).unwrap();
        assert_eq!(r[0], 22.0);
        assert_eq!(r[corner], 66.0);
    }

    #[test]
    fn sup_moment_and_clt_guards() {
        let s = vec![NodeField(vec![0.0, 3.0]), NodeField(vec![0.0, -4.0])];
        assert!((sup_moment(&s, 2.0).unwrap() - libm::sqrt(12.5)).abs() < 1e-12);
        assert!(clt_moment(&vec![vec![0.0; 4]; 8], 2.0).is_err());
        assert_eq!(clt_moment(&vec![vec![1.0; 4]; 16], 2.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_lipschitz_curve_is_bounded() {
        let b = DomainGrid::dirichlet_box(32, 2).unwrap();
        let f = CoefficientField::constant(&b, 0.5, 1.0).unwrap();
        let spec = EnsembleSpec::new(2, 0.5, Law::constant(1.0)).unwrap();
        let g = far_face_data(&b, &mut spec.sample_rng(0));
        let curve = lipschitz_probe(&f, &b, &g, &opts()).unwrap();
        assert_eq!(curve.points.len(), 4);
        assert!(curve.ratio(1.0, 8.0).unwrap() < 10.0);
        assert!(curve.holder_ratio(1.0, 0.5).unwrap() < 10.0);
    }
}
