//! Quenched and homogenized Green functions on a Dirichlet box, their lattice
//! derivatives in both arguments, decay datasets and the two-scale expansion
//! error at the level of mixed derivatives.

use alloc::vec;
use alloc::vec::Vec;

use crate::boundary::BoundaryCorrectorSet;
use crate::ensemble::CoefficientField;
use crate::error::{arg_err, Error, Result};
use crate::lattice::{assemble, assemble_constant_tensor, DomainGrid, DomainKind, LinearSystem, NodeField};
use crate::solver::{solve_cg, SolveOptions};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GreenColumn {
    pub source: usize,
    pub values: NodeField,
    pub relative_residual: f64,
    pub iterations: usize,
}

fn check_source(boxed: &DomainGrid, x: usize) -> Result<()> {
    if boxed.kind() != DomainKind::Box {
        return Err(arg_err!("Green functions are computed on a Dirichlet box"));
    }
    if x >= boxed.node_count() || !boxed.is_interior(x) {
        return Err(arg_err!("source node {x} is not an interior node"));
    }
    Ok(())
}

/// Column `G(x0, .)` of `system`: `A G = e_{x0}`, zero on the layer.
pub fn column_of(system: &LinearSystem, boxed: &DomainGrid, x0: usize, opts: &SolveOptions) -> Result<GreenColumn> {
    check_source(boxed, x0)?;
    let mut rhs = NodeField::zeros(boxed.node_count());
    rhs[x0] = 1.0;
    let sol = solve_cg(system, &rhs, opts)?;
    Ok(GreenColumn { source: x0, values: sol.field, relative_residual: sol.relative_residual, iterations: sol.iterations })
}

pub fn green_column(field: &CoefficientField, boxed: &DomainGrid, x0: usize, opts: &SolveOptions) -> Result<GreenColumn> {
    column_of(&assemble(field, boxed)?, boxed, x0, opts)
}

/// Column of the constant-tensor operator `-div(abar grad)`.
pub fn homogenized_green(abar: &Tensor, boxed: &DomainGrid, x0: usize, opts: &SolveOptions) -> Result<GreenColumn> {
    column_of(&assemble_constant_tensor(abar, boxed)?, boxed, x0, opts)
}

/// Green columns at `x` and `x + e_k` for every axis: enough for forward
/// differences of `G` in both arguments.
#[derive(Debug, Clone)]
pub struct GreenStencil {
    pub x: usize,
    pub columns: Vec<GreenColumn>,
}

impl GreenStencil {
    pub fn compute(system: &LinearSystem, boxed: &DomainGrid, x: usize, opts: &SolveOptions) -> Result<Self> {
        check_source(boxed, x)?;
        let mut columns = vec![column_of(system, boxed, x, opts)?];
        for k in 0..boxed.dim() {
            let xk = boxed.step(x, k, 1).filter(|&n| boxed.is_interior(n));
            let xk = xk.ok_or_else(|| arg_err!("source {x} has no interior neighbor along axis {k}"))?;
            columns.push(column_of(system, boxed, xk, opts)?);
        }
        Ok(GreenStencil { x, columns })
    }

    pub fn quenched(field: &CoefficientField, boxed: &DomainGrid, x: usize, opts: &SolveOptions) -> Result<Self> {
        Self::compute(&assemble(field, boxed)?, boxed, x, opts)
    }

    pub fn homogenized(abar: &Tensor, boxed: &DomainGrid, x: usize, opts: &SolveOptions) -> Result<Self> {
        Self::compute(&assemble_constant_tensor(abar, boxed)?, boxed, x, opts)
    }

    fn col(&self, c: usize) -> &NodeField {
        &self.columns[c].values
    }

    fn forward(boxed: &DomainGrid, y: usize, m: usize) -> Result<usize> {
        boxed.step(y, m, 1).ok_or_else(|| arg_err!("node {y} has no forward neighbor along axis {m}"))
    }

    /// `G(x, y)`.
    pub fn value(&self, y: usize) -> f64 {
        self.col(0)[y]
    }

    /// `grad_y G(x, y)`, one forward difference per axis.
    pub fn grad_y(&self, boxed: &DomainGrid, y: usize) -> Result<Vec<f64>> {
        (0..boxed.dim()).map(|m| Ok(self.col(0)[Self::forward(boxed, y, m)?] - self.col(0)[y])).collect()
    }

    /// `grad_x G(x, y)` from the neighboring source columns.
    pub fn grad_x(&self, boxed: &DomainGrid, y: usize) -> Vec<f64> {
        (0..boxed.dim()).map(|k| self.col(k + 1)[y] - self.col(0)[y]).collect()
    }

    /// `grad_x grad_y G(x, y)`: entry `(k, m)` differentiates `x` along `k`
    /// and `y` along `m`.
    pub fn mixed(&self, boxed: &DomainGrid, y: usize) -> Result<Tensor> {
        let d = boxed.dim();
        let mut t = Tensor::zeros(d);
        for m in 0..d {
            let ym = Self::forward(boxed, y, m)?;
            for k in 0..d {
                let v = self.col(k + 1)[ym] - self.col(k + 1)[y] - self.col(0)[ym] + self.col(0)[y];
                t.set(k, m, v);
            }
        }
        Ok(t)
    }
}

/// `grad_x grad_y G(x, y)` for one quenched sample.
pub fn mixed_second_derivative(field: &CoefficientField, boxed: &DomainGrid, x: usize, y: usize, opts: &SolveOptions) -> Result<Tensor> {
    let dist = euclidean(boxed, x, y);
    if dist < 2.0 {
        return Err(arg_err!("points closer than 2 lattice units ({dist})"));
    }
    GreenStencil::quenched(field, boxed, x, opts)?.mixed(boxed, y)
}

fn sq(v: f64) -> f64 {
    v * v
}

pub fn euclidean(domain: &DomainGrid, x: usize, y: usize) -> f64 {
    let s: f64 = (0..domain.dim()).map(|k| sq(domain.position(x, k) - domain.position(y, k))).sum();
    libm::sqrt(s)
}

pub fn linf(domain: &DomainGrid, x: usize, y: usize) -> usize {
    (0..domain.dim()).map(|k| domain.coord(x, k).abs_diff(domain.coord(y, k))).max().unwrap_or(0)
}

/// Placement of the source for decay datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourcePlacement {
    /// Box center.
    Center,
    /// `(L/2, L/4, L/2, ...)`: a quarter side from the face `x_1 = 0`.
    Offset,
}

impl SourcePlacement {
    pub fn node(self, boxed: &DomainGrid) -> usize {
        let mut c: Vec<usize> = boxed.sides().iter().map(|l| l / 2).collect();
        if self == SourcePlacement::Offset && c.len() > 1 {
            c[1] = boxed.sides()[1] / 4;
        }
        boxed.node_index(&c).expect("placement inside the box")
    }
}

/// Interior nodes on the `l-infinity` sphere of radius `r` about `x` whose
/// forward neighbors stay on the node grid.
pub fn shell_nodes(boxed: &DomainGrid, x: usize, r: usize) -> Vec<usize> {
    (0..boxed.node_count()).filter(|&y| boxed.is_interior(y) && linf(boxed, x, y) == r).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GreenQuantity {
    GradY,
    GradX,
    Mixed,
}

impl GreenQuantity {
    pub const ALL: [GreenQuantity; 3] = [GreenQuantity::GradY, GreenQuantity::GradX, GreenQuantity::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            GreenQuantity::GradY => "grad_y",
            GreenQuantity::GradX => "grad_x",
            GreenQuantity::Mixed => "mixed",
        }
    }

    /// Euclidean (Frobenius for `Mixed`) magnitude at `y`.
    pub fn magnitude(self, s: &GreenStencil, boxed: &DomainGrid, y: usize) -> Result<f64> {
        let v = match self {
            GreenQuantity::GradY => s.grad_y(boxed, y)?,
            GreenQuantity::GradX => s.grad_x(boxed, y),
            GreenQuantity::Mixed => return Ok(s.mixed(boxed, y)?.frobenius_norm()),
        };
        Ok(libm::sqrt(v.iter().map(|a| a * a).sum()))
    }
}

/// Magnitudes on each shell for one sample: `(r, values on the shell)`.
pub fn decay_record(s: &GreenStencil, boxed: &DomainGrid, radii: &[usize], q: GreenQuantity) -> Result<Vec<(usize, Vec<f64>)>> {
    radii
        .iter()
        .map(|&r| {
            let nodes = shell_nodes(boxed, s.x, r);
            if nodes.is_empty() {
                return Err(arg_err!("shell of radius {r} is empty"));
            }
            Ok((r, nodes.iter().map(|&y| q.magnitude(s, boxed, y)).collect::<Result<Vec<_>>>()?))
        })
        .collect()
}

/// Annealed moment per radius, pooled over samples and shell nodes.
pub fn annealed_decay(records: &[Vec<(usize, Vec<f64>)>], p: f64) -> Result<Vec<(usize, f64)>> {
    let first = records.first().ok_or(Error::Empty)?;
    let mut out = Vec::with_capacity(first.len());
    for (slot, &(r, _)) in first.iter().enumerate() {
        let mut acc = 0.0;
        let mut n = 0usize;
        for rec in records {
            let (rr, vals) = &rec[slot];
            if *rr != r {
                return Err(arg_err!("records disagree on radii"));
            }
            acc += vals.iter().map(|v| libm::pow(v.abs(), p)).sum::<f64>();
            n += vals.len();
        }
        out.push((r, libm::pow(acc / n as f64, 1.0 / p)));
    }
    Ok(out)
}

/// Boundary band (`delta(y) = 1`) and interior band (`delta(y) >= rho / 2`)
/// at Euclidean distance within one lattice unit of `rho`: mean `|grad_x G|`
/// over each band, in that order.
pub fn boundary_factor_bands(s: &GreenStencil, boxed: &DomainGrid, rho: f64) -> Result<(f64, f64)> {
    let (mut b, mut nb, mut i, mut ni) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..boxed.node_count() {
        if !boxed.is_interior(y) || (euclidean(boxed, s.x, y) - rho).abs() > 1.0 {
            continue;
        }
        let delta = boxed.delta(y).unwrap_or(0) as f64;
        let m = GreenQuantity::GradX.magnitude(s, boxed, y)?;
        if delta == 1.0 {
            b += m;
            nb += 1;
        } else if delta >= 0.5 * rho {
            i += m;
            ni += 1;
        }
    }
    if nb == 0 || ni == 0 {
        return Err(arg_err!("no matched boundary/interior nodes at distance {rho}"));
    }
    Ok((b / nb as f64, i / ni as f64))
}

/// `sum_{y : delta(y) <= R} <|grad_y G(x, y)|^p>^{1/p}` for each `R`; inputs
/// are per-sample node fields of `|grad_y G(x, .)|`.
pub fn layer_integral(samples: &[NodeField], boxed: &DomainGrid, radii: &[usize], p: f64) -> Result<Vec<(usize, f64)>> {
    let first = samples.first().ok_or(Error::Empty)?;
    if first.len() != boxed.node_count() {
        return Err(arg_err!("layer samples do not match the box"));
    }
    let n = samples.len() as f64;
    let per_node: Vec<f64> = (0..boxed.node_count())
        .map(|y| libm::pow(samples.iter().map(|s| libm::pow(s[y].abs(), p)).sum::<f64>() / n, 1.0 / p))
        .collect();
    Ok(radii
        .iter()
        .map(|&r| {
            let total = (0..boxed.node_count())
                .filter(|&y| boxed.is_interior(y) && boxed.delta(y).is_some_and(|d| d <= r))
                .map(|y| per_node[y])
                .sum();
            (r, total)
        })
        .collect())
}

/// Unit-conductance Green function of the box from its sine series.
pub fn unit_box_green(boxed: &DomainGrid, x: usize, y: usize) -> f64 {
    let d = boxed.dim();
    let sides = boxed.sides();
    let modes: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|k| {
            let l = sides[k];
            let (xk, yk) = (boxed.position(x, k), boxed.position(y, k));
            (1..l)
                .map(|n| {
                    let w = core::f64::consts::PI * n as f64 / l as f64;
                    let phase = 2.0 / l as f64 * libm::sin(w * xk) * libm::sin(w * yk);
                    (phase, 2.0 - 2.0 * libm::cos(w))
                })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let (mut phase, mut eig) = (1.0, 0.0);
        for k in 0..d {
            let (p, e) = modes[k][idx[k]];
            phase *= p;
            eig += e;
        }
        total += phase / eig;
        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            idx[k] += 1;
            if idx[k] < modes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// One expansion comparison at the pair `(x, y)`.
#[derive(Debug, Clone)]
pub struct ExpansionRecord {
    pub x: usize,
    pub y: usize,
    pub dist: f64,
    /// Quenched `grad_x grad_y G`.
    pub mixed: Tensor,
    /// `sum_ij grad Phi_i(x) grad Phi_j(y) (grad_x grad_y Gbar)_ij`.
    pub prediction: Tensor,
    /// Homogenized `grad_x grad_y Gbar`.
    pub mixed_homogenized: Tensor,
    pub sign: f64,
}

impl ExpansionRecord {
    /// `mixed + sign * prediction`.
    pub fn error(&self) -> Tensor {
        self.mixed.add_scaled(&self.prediction, self.sign)
    }

    /// Same with the corrector factors dropped.
    pub fn naive_error(&self) -> Tensor {
        self.mixed.add_scaled(&self.mixed_homogenized, self.sign)
    }

    pub fn with_sign(&self, sign: f64) -> Self {
        ExpansionRecord { sign, ..self.clone() }
    }
}

/// `grad_k Phi_i(z) = delta_ik + grad_k Psi_i(z)` as a `d x d` tensor `(i, k)`.
fn corrected_jacobian(set: &BoundaryCorrectorSet, boxed: &DomainGrid, z: usize) -> Result<Tensor> {
    let d = boxed.dim();
    let mut t = Tensor::identity(d);
    for (i, c) in set.correctors.iter().enumerate() {
        for k in 0..d {
            let e = boxed.edge_from(z, k).ok_or_else(|| arg_err!("node {z} has no edge along axis {k}"))?;
            t.set(i, k, t.get(i, k) + c.grad[e]);
        }
    }
    Ok(t)
}

/// Expansion records for pairs `(x, y)` sharing the source `x`. `quenched`
/// and `homogenized` are stencils at `x`; `set` holds the boundary correctors
/// of the same sample.
pub fn expansion_error(
    quenched: &GreenStencil,
    homogenized: &GreenStencil,
    set: &BoundaryCorrectorSet,
    boxed: &DomainGrid,
    ys: &[usize],
    sign: f64,
) -> Result<Vec<ExpansionRecord>> {
    if quenched.x != homogenized.x {
        return Err(arg_err!("quenched and homogenized stencils use different sources"));
    }
    if set.correctors.len() != boxed.dim() {
        return Err(arg_err!("expansion needs one boundary corrector per axis"));
    }
    let x = quenched.x;
    let jx = corrected_jacobian(set, boxed, x)?;
    let d = boxed.dim();
    ys.iter()
        .map(|&y| {
            let dist = euclidean(boxed, x, y);
            if dist < 2.0 {
                return Err(arg_err!("expansion pair closer than 2 lattice units"));
            }
            let jy = corrected_jacobian(set, boxed, y)?;
            let mixed = quenched.mixed(boxed, y)?;
            let hom = homogenized.mixed(boxed, y)?;
            let mut prediction = Tensor::zeros(d);
            for k in 0..d {
                for m in 0..d {
                    let mut v = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            v += jx.get(i, k) * jy.get(j, m) * hom.get(i, j);
                        }
                    }
                    prediction.set(k, m, v);
                }
            }
            Ok(ExpansionRecord { x, y, dist, mixed, prediction, mixed_homogenized: hom, sign })
        })
        .collect()
}

/// Source and target symmetric about the box center along axis 0, a
/// distance `L/4` apart.
pub fn expansion_pair(boxed: &DomainGrid) -> (usize, usize) {
    let l = boxed.sides()[0];
    let mut c: Vec<usize> = boxed.sides().iter().map(|s| s / 2).collect();
    c[0] = l / 2 - l / 8;
    let x = boxed.node_index(&c).expect("inside");
    c[0] = l / 2 + l / 8;
    (x, boxed.node_index(&c).expect("inside"))
}

/// The sign in `mixed + s * prediction` minimizing the error norm summed over
/// `records`; returns `(sign, error for +1, error for -1)`.
pub fn resolve_sign(records: &[ExpansionRecord]) -> (f64, f64, f64) {
    let norm = |s: f64| records.iter().map(|r| r.with_sign(s).error().frobenius_norm()).sum::<f64>();
    let (plus, minus) = (norm(1.0), norm(-1.0));
    (if minus <= plus { -1.0 } else { 1.0 }, plus, minus)
}
