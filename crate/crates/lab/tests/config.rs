use std::path::PathBuf;

use homog_core::solver::Preconditioner;
use homog_lab::config::{parse_config, LawKind, RunConfig};
use proptest::prelude::*;

#[test]
fn sections_and_comments() {
    let text = "# run file\n[ensemble]\nlaw = log-uniform\nlambda = 0.5\n\n[run]\nL = 16,32 # two sizes\nN = 12\nmoments = 1,2,4\n[solver]\ntol = 1e-8\nmax_iter = 500\npreconditioner = none\n";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.law, LawKind::LogUniform);
    assert_eq!(cfg.lambda, 0.5);
    assert_eq!(cfg.sizes, vec![16, 32]);
    assert_eq!(cfg.samples, 12);
    assert_eq!(cfg.moments, vec![1.0, 2.0, 4.0]);
    assert_eq!((cfg.tol, cfg.max_iter, cfg.preconditioner), (1e-8, Some(500), Preconditioner::None));
    cfg.validate().unwrap();
}

#[test]
fn out_of_range_values_name_their_line() {
    for (text, line, needle) in [
        ("lambda = 1.5", 1, "lambda"),
        ("N = 3\nN = 0", 2, "duplicate"),
        ("\n\nd = 4", 3, "dimension"),
        ("L = 16,600", 1, "powers of two"),
        ("[minrad]\ntheta = 2", 2, "theta"),
        ("law = gaussian", 1, "law"),
        ("seed = -1", 1, "seed"),
    ] {
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with(&format!("line {line}:")), "{text:?}: {msg}");
        assert!(msg.contains(needle), "{text:?}: {msg}");
        assert!(err.is_config());
    }
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    let ensemble = (prop::bool::ANY, 0.05f64..0.95, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..=1.0, 1usize..=3);
    let run = (
        prop::collection::vec(3u32..=9, 1..4),
        1usize..500,
        prop::collection::vec(1.0f64..8.0, 1..4),
        any::<u64>(),
        1usize..16,
        "[a-z][a-z0-9_/]{0,12}",
    );
    let solver = (1e-14f64..0.5, prop::option::of(1usize..100_000), prop::bool::ANY);
    let minrad = (0.01f64..0.99, 1.01f64..6.0, 1.0f64..4.0, 0.1f64..10.0);
    (ensemble, run, solver, minrad).prop_map(|(e, r, s, m)| {
        let (log_uniform, lambda, ta, tb, p, dim) = e;
        let span = |t: f64| lambda + t * (1.0 / lambda - lambda);
        RunConfig {
            law: if log_uniform { LawKind::LogUniform } else { LawKind::TwoPhase },
            alpha: span(ta),
            beta: span(tb),
            p,
            lambda,
            dim,
            sizes: r.0.iter().map(|k| 1usize << k).collect(),
            samples: r.1,
            moments: r.2,
            seed: r.3,
            workers: r.4,
            out: PathBuf::from(r.5),
            tol: s.0,
            max_iter: s.1,
            preconditioner: if s.2 { Preconditioner::Diagonal } else { Preconditioner::None },
            minrad: homog_core::corrector::MinimalRadiusParams { theta: m.0, p: m.1, gamma: m.2, c_theta: m.3 },
        }
    })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(cfg in arb_config()) {
        let text = cfg.serialize();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
