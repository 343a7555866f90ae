use std::fs;

use homog_core::corrector::CorrectorSet;
use homog_core::ensemble::{EnsembleSpec, Law};
use homog_core::lattice::DomainGrid;
use homog_core::solver::SolveOptions;
use homog_core::Error;
use homog_lab::runner::{run_ensemble, RunOptions};
use homog_lab::LabError;

fn spec() -> EnsembleSpec {
    EnsembleSpec::new(2, 0.25, Law::TwoPhase { alpha: 0.25, beta: 4.0, p: 0.5 }).unwrap().with_seed(5)
}

fn abar(idx: u64) -> homog_core::Result<Vec<f64>> {
    let t = DomainGrid::torus(8, 2)?;
    let field = spec().sample(&t, idx)?;
    Ok(CorrectorSet::compute(&field, &t, &SolveOptions::default(), false)?.abar_raw.entries().to_vec())
}

#[test]
fn single_sample_matches_direct_call() {
    let run = run_ensemble(1, &RunOptions { workers: 1, checkpoint: None }, abar).unwrap();
    assert_eq!(run.records, vec![(0, abar(0).unwrap())]);
    assert_eq!((run.computed, run.resumed), (1, 0));
}

#[test]
fn worker_count_does_not_change_results() {
    let one = run_ensemble(12, &RunOptions { workers: 1, checkpoint: None }, abar).unwrap();
    let three = run_ensemble(12, &RunOptions { workers: 3, checkpoint: None }, abar).unwrap();
    assert_eq!(one.records, three.records);
    assert!(one.records.iter().enumerate().all(|(i, (k, _))| *k == i as u64));
}

#[test]
fn interrupted_run_resumes_without_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck");
    let opts = RunOptions { workers: 2, checkpoint: Some(ck.clone()) };
    let fresh = run_ensemble(10, &opts, abar).unwrap();
    assert_eq!(fresh.computed, 10);
    // simulate an interruption after six samples
    for idx in 6..10 {
        fs::remove_file(ck.join(format!("{idx}.json"))).unwrap();
    }
    let resumed = run_ensemble(10, &opts, |idx| {
        assert!(idx >= 6, "sample {idx} was recomputed");
        abar(idx)
    })
    .unwrap();
    assert_eq!((resumed.resumed, resumed.computed), (6, 4));
    let digest = |r: &[(u64, Vec<f64>)]| serde_json::to_string(r).unwrap();
    assert_eq!(digest(&resumed.records), digest(&fresh.records));
}

#[test]
fn failures_are_excluded_and_counted() {
    let flaky = |idx: u64| if idx == 150 { Err(Error::Singular) } else { Ok(idx as f64) };
    let run = run_ensemble(200, &RunOptions { workers: 1, checkpoint: None }, flaky).unwrap();
    assert_eq!(run.records.len(), 199);
    assert_eq!(run.failures.len(), 1);
    assert!(run.records.iter().all(|(i, v)| *i != 150 && *v == *i as f64));

    let err = run_ensemble(50, &RunOptions { workers: 1, checkpoint: None }, flaky_small).unwrap_err();
    assert!(matches!(err, LabError::FailureRate { failed: 1, total: 50, first: 7, .. }), "{err}");
}

fn flaky_small(idx: u64) -> homog_core::Result<f64> {
    if idx == 7 {
        Err(Error::Singular)
    } else {
        Ok(0.0)
    }
}
