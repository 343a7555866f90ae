//! Preconditioned conjugate gradients, a dense Cholesky oracle, and the
//! mean-zero projected solve for singular periodic systems.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{arg_err, Error, Result};
use crate::lattice::{dot, norm2, BoundaryCondition, LinearSystem, NodeField};

/// Largest system accepted by [`solve_dense`].
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tolerance: f64,
    /// `None` means `20 sqrt(n) + 1000`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tolerance: 1e-10, max_iterations: None, preconditioner: Preconditioner::Diagonal }
    }
}

impl SolveOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        SolveOptions { tolerance, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config(format!("solver tolerance must lie in (0,1), got {}", self.tolerance)));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Config("max iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(20 * libm::sqrt(n as f64) as usize + 1000)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub field: NodeField,
    pub iterations: usize,
    /// `||A u - b|| / ||b||` of the returned solution (0 for `b = 0`).
    pub relative_residual: f64,
}

fn true_residual(system: &LinearSystem, x: &[f64], b: &[f64], r: &mut [f64]) -> f64 {
    system.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(r)
}

fn project_mean_zero(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Core PCG loop on unknown vectors. Restarts from the true residual when the
/// recursive one has drifted below tolerance without the true one following.
fn pcg(system: &LinearSystem, b: &[f64], opts: &SolveOptions, project: bool) -> Result<(Vec<f64>, usize, f64)> {
    opts.validate()?;
    let n = system.size();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let cap = opts.iteration_cap(n);
    let target = opts.tolerance * bnorm;
    let inv_diag: Vec<f64> = match opts.preconditioner {
        Preconditioner::Diagonal => system.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect(),
        Preconditioner::None => vec![1.0; n],
    };
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut rnorm = bnorm;

    for _restart in 0..4 {
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while rnorm > target && iterations < cap {
            system.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rnorm = norm2(&r);
            iterations += 1;
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if project {
            project_mean_zero(&mut x);
        }
        rnorm = true_residual(system, &x, b, &mut r);
        if rnorm <= target || iterations >= cap {
            break;
        }
    }
    let rel = rnorm / bnorm;
    if rnorm > target {
        return Err(Error::NotConverged { iterations, residual: rel });
    }
    Ok((x, iterations, rel))
}

fn check_rhs(system: &LinearSystem, rhs: &NodeField) -> Result<()> {
    if rhs.len() != system.node_count() {
        return Err(arg_err!("right-hand side has {} entries, system has {} nodes", rhs.len(), system.node_count()));
    }
    Ok(())
}

/// Preconditioned CG for a positive definite (box) system; a periodic system
/// is accepted when its right-hand side already has mean zero.
pub fn solve_cg(system: &LinearSystem, rhs: &NodeField, opts: &SolveOptions) -> Result<Solution> {
    check_rhs(system, rhs)?;
    let b = system.gather(rhs);
    let (x, iterations, relative_residual) = pcg(system, &b, opts, false)?;
    Ok(Solution { field: system.scatter(&x), iterations, relative_residual })
}

/// Dense Cholesky solve, the small-instance oracle.
pub fn solve_dense(system: &LinearSystem, rhs: &NodeField) -> Result<Solution> {
    check_rhs(system, rhs)?;
    let n = system.size();
    if n > DENSE_LIMIT {
        return Err(Error::Size(format!("{n} unknowns exceed the dense limit {DENSE_LIMIT}")));
    }
    let m = DMatrix::from_row_slice(n, n, &system.to_dense());
    let max_diag = system.diagonal().iter().fold(0.0f64, |a, &d| a.max(d.abs()));
    let chol = m.clone().cholesky().ok_or(Error::Singular)?;
    let l = chol.l_dirty();
    if (0..n).any(|i| l[(i, i)] * l[(i, i)] <= 1e-10 * max_diag) {
        return Err(Error::Singular);
    }
    let b = DVector::from_vec(system.gather(rhs));
    let x = chol.solve(&b);
    let mut r = vec![0.0; n];
    let bnorm = b.norm();
    let rel = if bnorm == 0.0 { 0.0 } else { true_residual(system, x.as_slice(), b.as_slice(), &mut r) / bnorm };
    Ok(Solution { field: system.scatter(x.as_slice()), iterations: 0, relative_residual: rel })
}

/// Periodic solve: the right-hand side is projected to mean zero and the
/// returned field has node mean zero.
pub fn solve_periodic_mean_zero(system: &LinearSystem, rhs: &NodeField, opts: &SolveOptions) -> Result<Solution> {
    check_rhs(system, rhs)?;
    if system.condition() != BoundaryCondition::Periodic {
        return Err(arg_err!("mean-zero projected solve needs a periodic system"));
    }
    let mut b = system.gather(rhs);
    project_mean_zero(&mut b);
    // Exactly constant right-hand sides project to round-off noise.
    let scale = system.gather(rhs).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if b.iter().all(|v| v.abs() <= 1e-14 * scale) {
        return Ok(Solution { field: NodeField::zeros(system.node_count()), iterations: 0, relative_residual: 0.0 });
    }
    let (x, iterations, relative_residual) = pcg(system, &b, opts, true)?;
    Ok(Solution { field: system.scatter(&x), iterations, relative_residual })
}

/// Dense oracle for periodic systems: pins the last unknown, solves the
/// reduced positive definite system, then projects to mean zero.
pub fn solve_periodic_dense(system: &LinearSystem, rhs: &NodeField) -> Result<Solution> {
    check_rhs(system, rhs)?;
    let n = system.size();
    if n > DENSE_LIMIT {
        return Err(Error::Size(format!("{n} unknowns exceed the dense limit {DENSE_LIMIT}")));
    }
    let full = system.to_dense();
    let mut b = system.gather(rhs);
    project_mean_zero(&mut b);
    let k = n - 1;
    let reduced = DMatrix::from_fn(k, k, |i, j| full[i * n + j]);
    let chol = reduced.cholesky().ok_or(Error::Singular)?;
    let sol = chol.solve(&DVector::from_column_slice(&b[..k]));
    let mut x: Vec<f64> = sol.iter().copied().chain(core::iter::once(0.0)).collect();
    project_mean_zero(&mut x);
    let mut r = vec![0.0; n];
    let bnorm = norm2(&b);
    let rel = if bnorm == 0.0 { 0.0 } else { true_residual(system, &x, &b, &mut r) / bnorm };
    Ok(Solution { field: system.scatter(&x), iterations: 0, relative_residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{CoefficientField, EnsembleSpec, Law};
    use crate::lattice::{assemble, DomainGrid};

    #[test]
    fn zero_rhs_gives_zero() {
        let b = DomainGrid::dirichlet_box(5, 2).unwrap();
        let sys = assemble(&CoefficientField::constant(&b, 0.5, 1.0).unwrap(), &b).unwrap();
        let s = solve_cg(&sys, &NodeField::zeros(b.node_count()), &SolveOptions::default()).unwrap();
        assert!(s.field.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_unknown_box_solve() {
        // Conductance 2 on a path with two interior nodes: A = [[4, -2], [-2, 4]].
        let b = DomainGrid::dirichlet_box(3, 1).unwrap();
        let field = CoefficientField::from_values(&b, 0.25, vec![2.0, 2.0, 2.0]).unwrap();
        let sys = assemble(&field, &b).unwrap();
        assert_eq!(sys.to_dense(), vec![4.0, -2.0, -2.0, 4.0]);
        let rhs = NodeField(vec![0.0, 2.0, 2.0, 0.0]);
        for s in [solve_cg(&sys, &rhs, &SolveOptions::default()).unwrap(), solve_dense(&sys, &rhs).unwrap()] {
            assert!((s.field[1] - 1.0).abs() < 1e-12 && (s.field[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn path_green_column() {
        let b = DomainGrid::dirichlet_box(4, 1).unwrap();
        let sys = assemble(&CoefficientField::constant(&b, 0.5, 1.0).unwrap(), &b).unwrap();
        let mut rhs = NodeField::zeros(b.node_count());
        rhs[1] = 1.0;
        // G(i,j) = min(i,j) (n+1-max(i,j)) / (n+1), n = 3.
        let expect = [0.75, 0.5, 0.25];
        for u in [solve_dense(&sys, &rhs).unwrap(), solve_cg(&sys, &rhs, &SolveOptions::default()).unwrap()] {
            for (j, e) in expect.iter().enumerate() {
                assert!((u.field[j + 1] - e).abs() < 1e-12);
            }
            assert_eq!((u.field[0], u.field[4]), (0.0, 0.0));
        }
    }

    #[test]
    fn torus_dense_is_singular() {
        let t = DomainGrid::torus(4, 2).unwrap();
        let sys = assemble(&CoefficientField::constant(&t, 0.5, 1.0).unwrap(), &t).unwrap();
        let mut rhs = NodeField::zeros(t.node_count());
        rhs[0] = 1.0;
        rhs[5] = -1.0;
        assert_eq!(solve_dense(&sys, &rhs), Err(Error::Singular));
        assert!(solve_cg(&sys, &rhs, &SolveOptions::default()).is_ok());
    }

    #[test]
    fn dense_size_cap() {
        let b = DomainGrid::dirichlet_box(66, 2).unwrap();
        let sys = assemble(&CoefficientField::constant(&b, 0.5, 1.0).unwrap(), &b).unwrap();
        assert!(matches!(solve_dense(&sys, &NodeField::zeros(b.node_count())), Err(Error::Size(_))));
    }

    #[test]
    fn periodic_constant_rhs_vanishes() {
        let t = DomainGrid::torus(6, 2).unwrap();
        let sys = assemble(&CoefficientField::constant(&t, 0.5, 1.0).unwrap(), &t).unwrap();
        let rhs = t.node_field_from(|_| 2.5);
        let s = solve_periodic_mean_zero(&sys, &rhs, &SolveOptions::default()).unwrap();
        assert!(s.field.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ring_matches_cumulative_sum_formula() {
        // -(J_x - J_{x-1}) = f_x with J_x = a_x (u_{x+1} - u_x), closed by sum J/a = 0.
        let n = 9;
        let t = DomainGrid::torus(n, 1).unwrap();
        let spec = EnsembleSpec::new(1, 0.25, Law::LogUniform).unwrap().with_seed(4);
        let field = spec.sample(&t, 0).unwrap();
        let a = field.values();
        let f: Vec<f64> = (0..n).map(|x| libm::sin(x as f64 * 1.3) + 0.1 * x as f64).collect();
        let fm = f.iter().sum::<f64>() / n as f64;
        let f: Vec<f64> = f.iter().map(|v| v - fm).collect();
        // J_x = J_0 - sum_{y=1..x} f_y; choose J_0 so that sum_x J_x / a_x = 0.
        let mut partial = vec![0.0; n];
        for x in 1..n {
            partial[x] = partial[x - 1] + f[x];
        }
        let inv: f64 = a.iter().map(|v| 1.0 / v).sum();
        let j0 = partial.iter().zip(a).map(|(s, w)| s / w).sum::<f64>() / inv;
        let mut u = vec![0.0; n];
        for x in 0..n - 1 {
            u[x + 1] = u[x] + (j0 - partial[x]) / a[x];
        }
        let um = u.iter().sum::<f64>() / n as f64;
        let sys = assemble(&field, &t).unwrap();
        let s = solve_periodic_mean_zero(&sys, &NodeField(f.clone()), &SolveOptions::with_tolerance(1e-13)).unwrap();
        for x in 0..n {
            assert!((s.field[x] - (u[x] - um)).abs() < 1e-10, "node {x}");
        }
        assert!(s.field.mean().abs() < 1e-13);
    }

    #[test]
    fn nonconvergence_reports_residual() {
        let b = DomainGrid::dirichlet_box(32, 2).unwrap();
        let sys = assemble(&CoefficientField::constant(&b, 0.5, 1.0).unwrap(), &b).unwrap();
        let mut rhs = NodeField::zeros(b.node_count());
        rhs[b.node_index(&[16, 16]).unwrap()] = 1.0;
        let opts = SolveOptions { max_iterations: Some(3), ..Default::default() };
        match solve_cg(&sys, &rhs, &opts) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-10);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
