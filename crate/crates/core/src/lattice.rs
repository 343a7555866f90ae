//! Lattice domains, discrete gradient/divergence and assembly of `-div(a grad)`.
//!
//! Nodes of a domain are indexed lexicographically (last axis fastest). A torus
//! of side `L` has `L` nodes per axis and one edge `(x, k)` from every node `x`
//! to `x + e_k` (mod `L`). A box of side `L` has `L + 1` nodes per axis; the
//! outermost layer carries the Dirichlet condition, and only edges touching
//! at least one interior node are kept. Edges are ordered axis-major, then
//! by the lexicographic index of their tail node.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::ensemble::CoefficientField;
use crate::error::{arg_err, Error, Result};
use crate::tensor::Tensor;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Torus,
    Box,
}

impl DomainKind {
    pub fn code(self) -> u8 {
        match self {
            DomainKind::Torus => 0,
            DomainKind::Box => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DomainKind::Torus),
            1 => Some(DomainKind::Box),
            _ => None,
        }
    }
}

/// One scalar per node of a domain (Dirichlet layer included on boxes).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeField(pub Vec<f64>);

/// One scalar per edge of a domain, in the domain's edge order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeField(pub Vec<f64>);

macro_rules! slice_newtype {
    ($t:ty) => {
        impl Deref for $t {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }
        impl DerefMut for $t {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }
        impl From<Vec<f64>> for $t {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}
slice_newtype!(NodeField);
slice_newtype!(EdgeField);

impl NodeField {
    pub fn zeros(n: usize) -> Self {
        NodeField(vec![0.0; n])
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl EdgeField {
    pub fn zeros(n: usize) -> Self {
        EdgeField(vec![0.0; n])
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    kind: DomainKind,
    sides: Vec<usize>,
    extents: Vec<usize>,
    strides: Vec<usize>,
    node_count: usize,
    unknowns: Vec<u32>,
    unknown_of: Vec<u32>,
    edge_tail: Vec<u32>,
    edge_head: Vec<u32>,
    edge_axis: Vec<u8>,
    edge_at: Vec<u32>,
    delta: Vec<u32>,
}

impl DomainGrid {
    /// Periodic torus with `side` nodes per axis.
    pub fn torus(side: usize, dim: usize) -> Result<Self> {
        Self::torus_with_sides(&vec![side; dim])
    }

    pub fn torus_with_sides(sides: &[usize]) -> Result<Self> {
        if sides.iter().any(|&l| l < 2) {
            return Err(arg_err!("torus side must be at least 2, got {:?}", sides));
        }
        Self::build(DomainKind::Torus, sides)
    }

    /// Dirichlet box `[0, L]^d` with interior nodes `1..L-1` per axis.
    pub fn dirichlet_box(side: usize, dim: usize) -> Result<Self> {
        Self::box_with_sides(&vec![side; dim])
    }

    pub fn box_with_sides(sides: &[usize]) -> Result<Self> {
        if sides.iter().any(|&l| l < 3) {
            return Err(arg_err!("box side must be at least 3, got {:?}", sides));
        }
        Self::build(DomainKind::Box, sides)
    }

    pub fn new(kind: DomainKind, sides: &[usize]) -> Result<Self> {
        match kind {
            DomainKind::Torus => Self::torus_with_sides(sides),
            DomainKind::Box => Self::box_with_sides(sides),
        }
    }

    fn build(kind: DomainKind, sides: &[usize]) -> Result<Self> {
        let dim = sides.len();
        if !(1..=3).contains(&dim) {
            return Err(arg_err!("dimension must be 1, 2 or 3, got {dim}"));
        }
        let extents: Vec<usize> = match kind {
            DomainKind::Torus => sides.to_vec(),
            DomainKind::Box => sides.iter().map(|l| l + 1).collect(),
        };
        let mut node_count: usize = 1;
        for &e in &extents {
            node_count = node_count
                .checked_mul(e)
                .filter(|&n| n.checked_mul(dim).is_some_and(|m| m < NONE as usize))
                .ok_or_else(|| Error::Size(format!("{sides:?} overflows the 32-bit index space")))?;
        }
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * extents[k + 1];
        }

        let mut grid = DomainGrid {
            kind,
            sides: sides.to_vec(),
            extents,
            strides,
            node_count,
            unknowns: Vec::new(),
            unknown_of: vec![NONE; node_count],
            edge_tail: Vec::new(),
            edge_head: Vec::new(),
            edge_axis: Vec::new(),
            edge_at: vec![NONE; dim * node_count],
            delta: Vec::new(),
        };

        for x in 0..node_count {
            if grid.is_interior(x) {
                grid.unknown_of[x] = grid.unknowns.len() as u32;
                grid.unknowns.push(x as u32);
            }
        }
        if kind == DomainKind::Box {
            grid.delta = (0..node_count)
                .map(|x| {
                    (0..dim)
                        .map(|k| {
                            let c = grid.coord(x, k);
                            c.min(grid.sides[k] - c)
                        })
                        .min()
                        .unwrap_or(0) as u32
                })
                .collect();
        }
        for k in 0..dim {
            for x in 0..node_count {
                if let Some(y) = grid.edge_target(x, k) {
                    grid.edge_at[k * node_count + x] = grid.edge_tail.len() as u32;
                    grid.edge_tail.push(x as u32);
                    grid.edge_head.push(y as u32);
                    grid.edge_axis.push(k as u8);
                }
            }
        }
        Ok(grid)
    }

    fn edge_target(&self, x: usize, k: usize) -> Option<usize> {
        match self.kind {
            DomainKind::Torus => self.step(x, k, 1),
            DomainKind::Box => {
                let c = self.coord(x, k);
                if c + 1 > self.sides[k] {
                    return None;
                }
                let lateral_inside = (0..self.dim())
                    .filter(|&j| j != k)
                    .all(|j| (1..self.sides[j]).contains(&self.coord(x, j)));
                lateral_inside.then(|| x + self.strides[k])
            }
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    /// Nodes per axis (sides on a torus, sides + 1 on a box).
    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_tail.len()
    }

    pub fn unknown_count(&self) -> usize {
        self.unknowns.len()
    }

    /// Node indices carrying unknowns, ascending.
    pub fn unknown_nodes(&self) -> &[u32] {
        &self.unknowns
    }

    pub fn unknown_index(&self, node: usize) -> Option<usize> {
        let u = self.unknown_of[node];
        (u != NONE).then_some(u as usize)
    }

    #[inline]
    pub fn coord(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.extents[axis]
    }

    pub fn coords(&self, node: usize) -> Vec<usize> {
        (0..self.dim()).map(|k| self.coord(node, k)).collect()
    }

    pub fn node_index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dim() {
            return None;
        }
        let mut idx = 0;
        for (k, &c) in coords.iter().enumerate() {
            if c >= self.extents[k] {
                return None;
            }
            idx += c * self.strides[k];
        }
        Some(idx)
    }

    /// Neighbor of `node` along `axis` in direction `sign` (`+1` or `-1`);
    /// wraps on a torus, `None` when leaving a box's node grid.
    #[inline]
    pub fn step(&self, node: usize, axis: usize, sign: i32) -> Option<usize> {
        let c = self.coord(node, axis);
        let n = self.extents[axis];
        let s = self.strides[axis];
        match (self.kind, sign >= 0) {
            (DomainKind::Torus, true) => Some(if c + 1 == n { node + s - n * s } else { node + s }),
            (DomainKind::Torus, false) => Some(if c == 0 { node + (n - 1) * s } else { node - s }),
            (DomainKind::Box, true) => (c + 1 < n).then(|| node + s),
            (DomainKind::Box, false) => (c > 0).then(|| node - s),
        }
    }

    /// Node reached from `node` by an integer offset (wrapping on a torus).
    pub fn offset(&self, node: usize, offset: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (k, &o) in offset.iter().enumerate() {
            let n = self.extents[k] as i64;
            let mut c = self.coord(node, k) as i64 + o;
            match self.kind {
                DomainKind::Torus => c = c.rem_euclid(n),
                DomainKind::Box if !(0..n).contains(&c) => return None,
                DomainKind::Box => {}
            }
            idx += c as usize * self.strides[k];
        }
        Some(idx)
    }

    pub fn is_interior(&self, node: usize) -> bool {
        match self.kind {
            DomainKind::Torus => true,
            DomainKind::Box => (0..self.dim()).all(|k| {
                let c = self.coord(node, k);
                c >= 1 && c < self.sides[k]
            }),
        }
    }

    /// Distance to the Dirichlet layer (`l-infinity` graph distance); `None` on a torus.
    pub fn delta(&self, node: usize) -> Option<usize> {
        self.delta.get(node).map(|&d| d as usize)
    }

    /// True when at least two boundary faces are nearest to `node`.
    pub fn is_corner_tie(&self, node: usize) -> bool {
        let Some(d) = self.delta(node) else { return false };
        let mut hits = 0;
        for k in 0..self.dim() {
            let c = self.coord(node, k);
            hits += usize::from(c == d) + usize::from(self.sides[k] - c == d);
        }
        hits >= 2
    }

    /// `(tail, head, axis)` of edge `e`.
    #[inline]
    pub fn edge(&self, e: usize) -> (usize, usize, usize) {
        (self.edge_tail[e] as usize, self.edge_head[e] as usize, self.edge_axis[e] as usize)
    }

    /// Edge from `node` to `node + e_axis`, when it exists.
    #[inline]
    pub fn edge_from(&self, node: usize, axis: usize) -> Option<usize> {
        let e = self.edge_at[axis * self.node_count + node];
        (e != NONE).then_some(e as usize)
    }

    pub fn edge_axis(&self, e: usize) -> usize {
        self.edge_axis[e] as usize
    }

    /// Node coordinates as floating point values (lattice units).
    pub fn position(&self, node: usize, axis: usize) -> f64 {
        self.coord(node, axis) as f64
    }

    pub fn node_field_from(&self, f: impl Fn(usize) -> f64) -> NodeField {
        NodeField((0..self.node_count).map(f).collect())
    }

    pub fn edge_field_from(&self, f: impl Fn(usize) -> f64) -> EdgeField {
        EdgeField((0..self.edge_count()).map(f).collect())
    }

    /// Indicator of axis-`i` edges scaled by `a`: the edge field `a e_i`.
    pub fn directional(&self, a: &[f64], axis: usize) -> EdgeField {
        self.edge_field_from(|e| if self.edge_axis(e) == axis { a[e] } else { 0.0 })
    }

    fn check_node(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.node_count {
            return Err(arg_err!("node field has {} entries, domain has {} nodes", u.len(), self.node_count));
        }
        Ok(())
    }

    fn check_edge(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.edge_count() {
            return Err(arg_err!("edge field has {} entries, domain has {} edges", f.len(), self.edge_count()));
        }
        Ok(())
    }
}

/// Forward differences `u(x + e_k) - u(x)` on every edge.
pub fn gradient(domain: &DomainGrid, u: &NodeField) -> Result<EdgeField> {
    domain.check_node(u)?;
    Ok(domain.edge_field_from(|e| {
        let (t, h, _) = domain.edge(e);
        u[h] - u[t]
    }))
}

/// Backward-difference divergence, the negative adjoint of [`gradient`].
pub fn divergence(domain: &DomainGrid, f: &EdgeField) -> Result<NodeField> {
    domain.check_edge(f)?;
    let mut out = NodeField::zeros(domain.node_count());
    for (e, &v) in f.iter().enumerate() {
        let (t, h, _) = domain.edge(e);
        out[t] += v;
        out[h] -= v;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
}

/// Sparse symmetric operator on the unknowns of a domain (CSR).
#[derive(Debug, Clone)]
pub struct LinearSystem {
    condition: BoundaryCondition,
    node_count: usize,
    unknown_nodes: Vec<u32>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl LinearSystem {
    pub fn condition(&self) -> BoundaryCondition {
        self.condition
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().zip(&self.vals[span]).map(|(&c, &v)| (c as usize, v))
    }

    /// `y = A x` on unknown vectors.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *out = acc;
        }
    }

    /// Unknown-vector restriction of a node field.
    pub fn gather(&self, u: &NodeField) -> Vec<f64> {
        self.unknown_nodes.iter().map(|&x| u[x as usize]).collect()
    }

    /// Node field holding `v` on the unknowns and zero elsewhere.
    pub fn scatter(&self, v: &[f64]) -> NodeField {
        let mut out = NodeField::zeros(self.node_count);
        for (&x, &val) in self.unknown_nodes.iter().zip(v) {
            out[x as usize] = val;
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.size();
        let mut m = vec![0.0; n * n];
        for r in 0..n {
            for (c, v) in self.row(r) {
                m[r * n + c] += v;
            }
        }
        m
    }

    fn from_rows(domain: &DomainGrid, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(rows.len());
        row_ptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let mut d = 0.0;
            let mut last = NONE;
            for (c, v) in row {
                if c == last {
                    *vals.last_mut().expect("row entry") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = c;
                }
            }
            for k in row_ptr[r]..cols.len() {
                if cols[k] as usize == r {
                    d = vals[k];
                }
            }
            diag.push(d);
            row_ptr.push(cols.len());
        }
        LinearSystem {
            condition: match domain.kind() {
                DomainKind::Torus => BoundaryCondition::Periodic,
                DomainKind::Box => BoundaryCondition::Dirichlet,
            },
            node_count: domain.node_count(),
            unknown_nodes: domain.unknown_nodes().to_vec(),
            row_ptr,
            cols,
            vals,
            diag,
        }
    }
}

/// Assemble `A u = -div(a grad u)` on the unknowns of `domain`; Dirichlet
/// nodes are eliminated.
pub fn assemble(field: &CoefficientField, domain: &DomainGrid) -> Result<LinearSystem> {
    field.check_domain(domain)?;
    Ok(assemble_conductances(field.values(), domain))
}

pub(crate) fn assemble_conductances(a: &[f64], domain: &DomainGrid) -> LinearSystem {
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::with_capacity(2 * domain.dim() + 1); domain.unknown_count()];
    for (e, &w) in a.iter().enumerate() {
        let (t, h, _) = domain.edge(e);
        let (ut, uh) = (domain.unknown_index(t), domain.unknown_index(h));
        if let Some(i) = ut {
            rows[i].push((i as u32, w));
            if let Some(j) = uh {
                rows[i].push((j as u32, -w));
            }
        }
        if let Some(j) = uh {
            rows[j].push((j as u32, w));
            if let Some(i) = ut {
                rows[j].push((i as u32, -w));
            }
        }
    }
    LinearSystem::from_rows(domain, rows)
}

/// Constant-tensor operator `-div(abar grad u)`: diagonal entries use the
/// nearest-neighbor stencil with conductance `abar_kk`, each off-diagonal pair
/// the symmetric four-point cross stencil.
pub fn assemble_constant_tensor(abar: &Tensor, domain: &DomainGrid) -> Result<LinearSystem> {
    let d = domain.dim();
    if abar.dim() != d {
        return Err(arg_err!("tensor dimension {} does not match domain dimension {d}", abar.dim()));
    }
    let a: Vec<f64> = (0..domain.edge_count()).map(|e| {
        let k = domain.edge_axis(e);
        abar.get(k, k)
    }).collect();
    let mut base = assemble_conductances(&a, domain);
    let has_cross = (0..d).any(|k| (k + 1..d).any(|m| abar.get(k, m) != 0.0 || abar.get(m, k) != 0.0));
    if !has_cross {
        return Ok(base);
    }
    let mut rows: Vec<Vec<(u32, f64)>> = (0..base.size()).map(|r| base.row(r).map(|(c, v)| (c as u32, v)).collect()).collect();
    let mut offset = vec![0i64; d];
    for (r, row) in rows.iter_mut().enumerate() {
        let x = domain.unknown_nodes()[r] as usize;
        for k in 0..d {
            for m in k + 1..d {
                let c = 0.25 * (abar.get(k, m) + abar.get(m, k));
                for (sk, sm, sign) in [(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)] {
                    offset.iter_mut().for_each(|o| *o = 0);
                    offset[k] = sk;
                    offset[m] = sm;
                    if let Some(y) = domain.offset(x, &offset).and_then(|y| domain.unknown_index(y)) {
                        row.push((y as u32, -sign * c));
                    }
                }
            }
        }
    }
    base = LinearSystem::from_rows(domain, rows);
    Ok(base)
}

/// Right-hand side contribution of Dirichlet data `g` (given on the layer,
/// ignored inside): `div(a grad g)` on interior nodes.
pub fn dirichlet_lift(a: &[f64], domain: &DomainGrid, g: &NodeField) -> Result<NodeField> {
    domain.check_node(g)?;
    domain.check_edge(a)?;
    let mut boundary_only = g.clone();
    for &x in domain.unknown_nodes() {
        boundary_only[x as usize] = 0.0;
    }
    let mut flux = gradient(domain, &boundary_only)?;
    flux.iter_mut().zip(a).for_each(|(f, w)| *f *= w);
    let mut lift = divergence(domain, &flux)?;
    for x in 0..domain.node_count() {
        if !domain.is_interior(x) {
            lift[x] = 0.0;
        }
    }
    Ok(lift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{EnsembleSpec, Law};

    #[test]
    fn torus_counts() {
        for (l, d, n, e) in [(2, 1, 2, 2), (4, 2, 16, 32), (3, 3, 27, 81)] {
            let t = DomainGrid::torus(l, d).unwrap();
            assert_eq!((t.node_count(), t.edge_count()), (n, e));
        }
    }

    #[test]
    fn torus_degree_is_2d() {
        let t = DomainGrid::torus(5, 2).unwrap();
        let mut degree = vec![0; t.node_count()];
        for e in 0..t.edge_count() {
            let (a, b, _) = t.edge(e);
            degree[a] += 1;
            degree[b] += 1;
        }
        assert!(degree.iter().all(|&g| g == 4));
    }

    #[test]
    fn box_geometry() {
        let b = DomainGrid::dirichlet_box(4, 1).unwrap();
        assert_eq!(b.unknown_count(), 3);
        let deltas: Vec<_> = b.unknown_nodes().iter().map(|&x| b.delta(x as usize).unwrap()).collect();
        assert_eq!(deltas, vec![1, 2, 1]);
        assert_eq!(b.edge_count(), 4);

        let b = DomainGrid::dirichlet_box(4, 2).unwrap();
        assert_eq!(b.unknown_count(), 9);
        assert_eq!(b.delta(b.node_index(&[2, 2]).unwrap()), Some(2));

        let b = DomainGrid::dirichlet_box(3, 2).unwrap();
        assert_eq!(b.unknown_count(), 4);
        assert!(b.unknown_nodes().iter().all(|&x| b.delta(x as usize) == Some(1)));
        for x in 0..b.node_count() {
            assert_eq!(b.delta(x) == Some(0), !b.is_interior(x));
        }
    }

    #[test]
    fn too_small_domains_rejected() {
        assert!(DomainGrid::torus(1, 2).is_err());
        assert!(DomainGrid::dirichlet_box(2, 2).is_err());
        assert!(matches!(DomainGrid::torus(1 << 16, 3), Err(Error::Size(_))));
    }

    #[test]
    fn gradient_of_constants_and_linear() {
        let b = DomainGrid::dirichlet_box(5, 2).unwrap();
        let c = b.node_field_from(|_| 3.5);
        assert!(gradient(&b, &c).unwrap().iter().all(|&g| g == 0.0));
        let lin = b.node_field_from(|x| b.position(x, 0));
        let g = gradient(&b, &lin).unwrap();
        for e in 0..b.edge_count() {
            let expect = if b.edge_axis(e) == 0 { 1.0 } else { 0.0 };
            assert_eq!(g[e], expect);
        }
    }

    #[test]
    fn divergence_of_zero_and_stencil() {
        let t = DomainGrid::torus(6, 2).unwrap();
        assert!(divergence(&t, &EdgeField::zeros(t.edge_count())).unwrap().iter().all(|&v| v == 0.0));
        // u = x0 * x1 is discrete harmonic away from the wrap seam.
        let u = t.node_field_from(|x| t.position(x, 0) * t.position(x, 1));
        let lap = divergence(&t, &gradient(&t, &u).unwrap()).unwrap();
        for x in 0..t.node_count() {
            let mut stencil = -4.0 * u[x];
            for k in 0..2 {
                stencil += u[t.step(x, k, 1).unwrap()] + u[t.step(x, k, -1).unwrap()];
            }
            assert!((lap[x] - stencil).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_torus_is_graph_laplacian() {
        let t = DomainGrid::torus(4, 2).unwrap();
        let field = EnsembleSpec::new(2, 0.5, Law::constant(1.0)).unwrap().sample(&t, 0).unwrap();
        let a = assemble(&field, &t).unwrap();
        for r in 0..a.size() {
            assert_eq!(a.diagonal()[r], 4.0);
            let off: f64 = a.row(r).filter(|&(c, _)| c != r).map(|(_, v)| v).sum();
            assert_eq!(off, -4.0);
        }
    }

    #[test]
    fn two_node_ring_folds() {
        let t = DomainGrid::torus(2, 1).unwrap();
        let field = CoefficientField::from_values(&t, 0.1, vec![2.0, 3.0]).unwrap();
        let a = assemble(&field, &t).unwrap();
        let dense = a.to_dense();
        assert_eq!(dense, vec![5.0, -5.0, -5.0, 5.0]);
    }

    #[test]
    fn constant_tensor_matches_conductances_when_diagonal() {
        let b = DomainGrid::dirichlet_box(6, 2).unwrap();
        let abar = Tensor::diagonal(&[1.0, 4.0]);
        let sys = assemble_constant_tensor(&abar, &b).unwrap();
        let a: Vec<f64> = (0..b.edge_count()).map(|e| if b.edge_axis(e) == 0 { 1.0 } else { 4.0 }).collect();
        let field = CoefficientField::from_values(&b, 0.25, a).unwrap();
        let direct = assemble(&field, &b).unwrap();
        assert_eq!(sys.to_dense(), direct.to_dense());
    }

    #[test]
    fn cross_stencil_is_symmetric() {
        let b = DomainGrid::dirichlet_box(6, 2).unwrap();
        let abar = Tensor::from_row_major(2, vec![1.0, 0.2, 0.2, 1.5]);
        let m = assemble_constant_tensor(&abar, &b).unwrap().to_dense();
        let n = b.unknown_count();
        for i in 0..n {
            for j in 0..n {
                assert!((m[i * n + j] - m[j * n + i]).abs() < 1e-15);
            }
        }
    }
}
