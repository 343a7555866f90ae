use homog_core::ensemble::{EnsembleSpec, Law};
use homog_core::lattice::{assemble, divergence, gradient, DomainGrid, DomainKind, EdgeField, NodeField};
use homog_core::solver::{solve_cg, solve_dense, solve_periodic_dense, solve_periodic_mean_zero, SolveOptions};
use proptest::prelude::*;

fn domain(kind: DomainKind, side: usize, dim: usize) -> DomainGrid {
    DomainGrid::new(kind, &vec![side; dim]).unwrap()
}

fn spec(dim: usize, law: Law, seed: u64) -> EnsembleSpec {
    EnsembleSpec::new(dim, 0.2, law).unwrap().with_seed(seed)
}

fn arb_domain() -> impl Strategy<Value = DomainGrid> {
    (prop::bool::ANY, 1usize..=3).prop_flat_map(|(periodic, dim)| {
        let max = [0, 24, 10, 5][dim];
        (3usize..=max).prop_map(move |side| domain(if periodic { DomainKind::Torus } else { DomainKind::Box }, side, dim))
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn divergence_is_negative_adjoint_of_gradient(d in arb_domain(), seed in any::<u64>()) {
        let u = d.node_field_from(|n| ((n as u64).wrapping_mul(seed | 1) % 1000) as f64 / 250.0 - 2.0);
        let f = d.edge_field_from(|e| ((e as u64 ^ seed) % 777) as f64 / 300.0 - 1.0);
        let lhs: f64 = gradient(&d, &u).unwrap().iter().zip(f.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = -u.iter().zip(divergence(&d, &f).unwrap().iter()).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn operator_is_symmetric_and_matches_divergence_form(d in arb_domain(), seed in any::<u64>(), log_uniform in prop::bool::ANY) {
        let law = if log_uniform { Law::LogUniform } else { Law::TwoPhase { alpha: 0.3, beta: 3.0, p: 0.4 } };
        let field = spec(d.dim(), law, seed).sample(&d, 0).unwrap();
        let sys = assemble(&field, &d).unwrap();
        let n = sys.size();
        let dense = sys.to_dense();
        for i in 0..n {
            for j in 0..i {
                prop_assert_eq!(dense[i * n + j], dense[j * n + i]);
            }
        }
        // A u = -div(a grad u) for u vanishing off the unknowns
        let x: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 19) as f64 - 9.0).collect();
        let u = sys.scatter(&x);
        let grad = gradient(&d, &u).unwrap();
        let flux = EdgeField(grad.iter().zip(field.values()).map(|(g, a)| g * a).collect());
        let div = divergence(&d, &flux).unwrap();
        let mut ax = vec![0.0; n];
        sys.apply(&x, &mut ax);
        let expect: Vec<f64> = sys.gather(&div).iter().map(|v| -v).collect();
        prop_assert!(max_abs_diff(&ax, &expect) <= 1e-12 * (1.0 + ax.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }

    #[test]
    fn sampling_is_a_pure_function_of_seed_and_index(seed in any::<u64>(), idx in 0u64..1_000_000) {
        let d = domain(DomainKind::Torus, 8, 2);
        let s = spec(2, Law::LogUniform, seed);
        let a = s.sample(&d, idx).unwrap();
        let again = s.sample(&d, idx).unwrap();
        let next = s.sample(&d, idx + 1).unwrap();
        prop_assert_eq!(a.values(), again.values());
        prop_assert_ne!(a.values(), next.values());
    }
}

#[test]
fn conjugate_gradient_agrees_with_dense_oracle() {
    let opts = SolveOptions { max_iterations: Some(50_000), ..SolveOptions::with_tolerance(1e-12) };
    let mut cases = 0;
    for (dim, sides) in [(1, vec![8, 64, 1024]), (2, vec![8, 16, 32]), (3, vec![4, 8])] {
        for side in sides {
            for kind in [DomainKind::Torus, DomainKind::Box] {
                let d = domain(kind, side, dim);
                if d.unknown_count() > 4096 {
                    continue;
                }
                for law in [Law::LogUniform, Law::TwoPhase { alpha: 0.2, beta: 5.0, p: 0.5 }] {
                    let field = spec(dim, law, 7).sample(&d, side as u64).unwrap();
                    let sys = assemble(&field, &d).unwrap();
                    let rhs = d.node_field_from(|n| if d.unknown_index(n).is_some() { ((n * 13) % 7) as f64 - 3.0 } else { 0.0 });
                    let (cg, dense) = match kind {
                        DomainKind::Torus => (solve_periodic_mean_zero(&sys, &rhs, &opts).unwrap(), solve_periodic_dense(&sys, &rhs).unwrap()),
                        DomainKind::Box => (solve_cg(&sys, &rhs, &opts).unwrap(), solve_dense(&sys, &rhs).unwrap()),
                    };
                    let gap = max_abs_diff(&cg.field, &dense.field);
                    assert!(gap <= 1e-8, "{kind:?} d={dim} side={side}: {gap:e}");
                    cases += 1;
                }
            }
        }
    }
    assert!(cases >= 24);
}

#[test]
fn dense_oracle_rejects_oversized_systems() {
    let d = domain(DomainKind::Box, 66, 2);
    let field = spec(2, Law::LogUniform, 0).sample(&d, 0).unwrap();
    let sys = assemble(&field, &d).unwrap();
    assert!(solve_dense(&sys, &NodeField::zeros(d.node_count())).is_err());
}
