use std::collections::BTreeMap;

use fdi_core::eval::{
    best_fdr_at_far, detection_metrics, isolation_metrics, lag_vectors, merge_map,
    resolved_classes, signal_space_baseline, window_truths, BaselineConfig, WindowTruth,
};
use fdi_core::librarian::{Assignment, DiagnosisEvent, LibraryParams};
use fdi_core::modelspace::{Euclidean, PointDistance};
use fdi_core::ocsvm::{default_nu_grid, default_sigma_grid};
use fdi_core::signals::{compose_scenario, MimoSeries, ScenarioSpec, Segment, SystemKind};
use nalgebra::DMatrix;

fn event(
    index: usize,
    assigned: Assignment,
    pool_size: usize,
    new_class: Option<usize>,
) -> DiagnosisEvent {
    DiagnosisEvent {
        index,
        window_start: index,
        assigned_class: assigned,
        scores: BTreeMap::from([(
            0,
            if assigned == Assignment::Class(0) {
                0.1
            } else {
                -0.1
            },
        )]),
        library_size: 1,
        pool_size,
        new_class,
    }
}

fn pure(labels: &[u32]) -> Vec<WindowTruth> {
    labels
        .iter()
        .map(|&label| WindowTruth { label, pure: true })
        .collect()
}

#[test]
fn ten_window_log_by_hand() {
    use Assignment::{Candidate, Class};
    let events = vec![
        event(0, Class(0), 0, None),
        event(1, Candidate, 1, None),
        event(2, Class(0), 0, None),
        event(3, Class(0), 0, None),
        event(4, Class(0), 0, None),
        event(5, Candidate, 1, None),
        event(6, Candidate, 2, Some(1)),
        event(7, Class(1), 0, None),
        event(8, Class(1), 0, None),
        event(9, Class(0), 0, None),
    ];
    let truth = pure(&[0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
    let r = detection_metrics(&events, &truth).unwrap();
    // flagged faulty windows: 5, 6, 7, 8 of the six faulty ones
    assert_eq!(r.fdr, 4.0 / 6.0);
    // window 1 of the four normal ones
    assert_eq!(r.far, 1.0 / 4.0);
    assert_eq!(r.candidates, 3);
    assert_eq!(r.detection_delays[0].delay, Some(1));
    assert_eq!(
        resolved_classes(&events),
        vec![
            Some(0),
            None,
            Some(0),
            Some(0),
            Some(0),
            Some(1),
            Some(1),
            Some(1),
            Some(1),
            Some(0)
        ]
    );
}

#[test]
fn ninety_of_one_hundred_fault_windows() {
    let mut events = Vec::new();
    for i in 0..100 {
        let a = if i < 90 {
            Assignment::Class(1)
        } else {
            Assignment::Class(0)
        };
        events.push(event(i, a, 0, None));
    }
    let truth = pure(&[1; 100]);
    let r = detection_metrics(&events, &truth).unwrap();
    assert_eq!(r.fdr, 0.9);
    assert_eq!(r.far, 0.0);
}

#[test]
fn split_class_recall_and_idempotent_merge() {
    let truth: Vec<u32> = (0..100).map(|i| if i < 50 { 0 } else { 1 }).collect();
    let discovered: Vec<Option<usize>> = (0..100)
        .map(|i| {
            Some(if i < 50 {
                0
            } else if i < 80 {
                1
            } else {
                2
            })
        })
        .collect();
    let map = merge_map(&discovered, &truth).unwrap();
    assert_eq!(map, BTreeMap::from([(0, 0), (1, 1), (2, 1)]));
    let report = isolation_metrics(&discovered, &truth).unwrap();
    assert_eq!(report.recall, 1.0);
    assert_eq!(report.precision, 1.0);
    // merging the pseudo-clusters again maps every one to itself
    let pseudo: Vec<Option<usize>> = discovered
        .iter()
        .map(|d| d.map(|c| map[&c] as usize))
        .collect();
    let again = merge_map(&pseudo, &truth).unwrap();
    assert!(again.iter().all(|(c, t)| *c as u32 == *t));
    assert_eq!(
        isolation_metrics(&pseudo, &truth).unwrap().per_class,
        report.per_class
    );
}

#[test]
fn specificity_is_one_without_cross_overlap() {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2];
    // recall is imperfect but no class spills into another truth class
    let discovered = [
        Some(0),
        Some(0),
        None,
        Some(1),
        Some(1),
        None,
        Some(2),
        Some(3),
        None,
        Some(2),
    ];
    let report = isolation_metrics(&discovered, &truth).unwrap();
    assert!(report.per_class.iter().all(|c| c.specificity == 1.0));
    assert_eq!(report.specificity, 1.0);
    assert!(report.recall < 1.0);
    assert_eq!(report.unassigned, 3);
}

#[test]
fn majority_truth_of_straddling_windows() {
    let labels: Vec<u32> = (0..20).map(|t| if t < 10 { 0 } else { 3 }).collect();
    let truth = window_truths(&labels, &[0, 3, 5, 6, 10], 10).unwrap();
    let got: Vec<(u32, bool)> = truth.iter().map(|t| (t.label, t.pure)).collect();
    // a 5/5 split goes to the smaller id
    assert_eq!(
        got,
        vec![(0, true), (0, false), (0, false), (3, false), (3, true)]
    );
}

fn constant_series(len: usize) -> MimoSeries {
    MimoSeries::new(
        DMatrix::from_element(len, 1, 0.3),
        DMatrix::from_element(len, 2, -1.5),
        vec![0; len],
        1.0,
    )
    .unwrap()
}

#[test]
fn order_one_lag_vectors_are_raw_samples() {
    let s = compose_scenario(&ScenarioSpec {
        system: SystemKind::Threetank,
        segments: vec![Segment::new(0, 40)],
        seed: 2,
        params: Default::default(),
    })
    .unwrap();
    let v = lag_vectors(&s, 1, 1).unwrap();
    assert_eq!(v.len(), 40);
    for (t, lv) in v.iter().enumerate() {
        assert_eq!(lv.values, s.observation(t));
    }
    assert!(lag_vectors(&s, 0, 1).is_err());
    assert!(lag_vectors(&s, 31, 1).is_err());
}

#[test]
fn constant_signal_has_zero_distances() {
    let v = lag_vectors(&constant_series(50), 7, 3).unwrap();
    for a in &v {
        for b in &v {
            assert_eq!(Euclidean.distance(a, b).unwrap(), 0.0);
        }
    }
}

#[test]
fn fdr_at_far_budget_counts_by_hand() {
    let truth = pure(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1]);
    let scores = [
        0.5, 0.4, 0.3, 0.2, 0.1, 0.0, -0.1, -0.2, -0.3, -0.4, -1.0, -0.35, 0.2, -0.05,
    ];
    // one normal window may fall below the threshold, so the threshold is -0.3
    let (fdr, far) = best_fdr_at_far(&scores, &truth, 0.1).unwrap();
    assert_eq!(far, 0.1);
    assert_eq!(fdr, 0.5);
}

#[test]
fn baseline_runs_the_incremental_protocol() {
    let s = compose_scenario(&ScenarioSpec {
        system: SystemKind::Threetank,
        segments: vec![Segment::new(0, 600), Segment::new(2, 600)],
        seed: 4,
        params: Default::default(),
    })
    .unwrap();
    let cfg = BaselineConfig {
        order: 10,
        stride: 5,
        t_normal: 100,
        cv_points: 100,
        folds: 5,
        sigma_grid: default_sigma_grid(),
        nu_grid: default_nu_grid(),
        library: LibraryParams {
            window: 100,
            stride: 5,
            ..LibraryParams::default()
        },
    };
    let run = signal_space_baseline(&s, &cfg).unwrap();
    assert_eq!(run.events.len(), (1200 - 10) / 5 + 1 - 100);
    assert_eq!(run.events.len(), run.truth.len());
    assert!((0.0..=1.0).contains(&run.detection.fdr) && (0.0..=1.0).contains(&run.detection.far));
    assert!(run.isolation.discovered_classes >= 1);
    let again = signal_space_baseline(&s, &cfg).unwrap();
    assert_eq!(run.events, again.events);
    let bad = BaselineConfig { order: 31, ..cfg };
    assert!(signal_space_baseline(&s, &bad).is_err());
}
