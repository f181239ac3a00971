//! Scoring of diagnosis runs against ground truth, and the signal-space baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::librarian::{
    run_incremental, Assignment, DiagnosisEvent, FaultLibrary, LibraryParams, WindowPosition,
};
use crate::modelspace::{Euclidean, PointDistance};
use crate::ocsvm::{select_params, ParamSelection};
use crate::signals::MimoSeries;

/// Ground truth of one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowTruth {
    /// Majority regime, ties going to the smaller id.
    pub label: u32,
    /// Whether every step of the window carries `label`.
    pub pure: bool,
}

pub fn window_truth(step_labels: &[u32], start: usize, len: usize) -> Result<WindowTruth> {
    if len == 0 || start + len > step_labels.len() {
        return Err(Error::dims(format!(
            "window [{start}, {}) lies outside {} labels",
            start + len,
            step_labels.len()
        )));
    }
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in &step_labels[start..start + len] {
        *counts.entry(l).or_default() += 1;
    }
    let (&label, _) = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .expect("window is non-empty");
    Ok(WindowTruth {
        label,
        pure: counts.len() == 1,
    })
}

pub fn window_truths(
    step_labels: &[u32],
    starts: &[usize],
    len: usize,
) -> Result<Vec<WindowTruth>> {
    starts
        .iter()
        .map(|&s| window_truth(step_labels, s, len))
        .collect()
}

pub fn is_flagged(a: Assignment) -> bool {
    a != Assignment::Class(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetDelay {
    pub regime: u32,
    /// Index of the first pure window of the fault segment.
    pub onset: usize,
    /// First flagged window of the segment minus `onset`; negative when a straddling window was
    /// flagged first, absent when nothing in the segment was flagged.
    pub delay: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub fdr: f64,
    pub far: f64,
    pub n_windows: usize,
    pub n_faulty: usize,
    pub n_normal: usize,
    pub detected_faulty: usize,
    pub false_alarms: usize,
    pub candidates: usize,
    pub detection_delays: Vec<OnsetDelay>,
    /// Pool membership is a rejection of the normal class and is counted as a detection.
    pub candidate_counts_as_flagged: bool,
}

pub fn detection_metrics(
    events: &[DiagnosisEvent],
    truth: &[WindowTruth],
) -> Result<DetectionReport> {
    let flags: Vec<bool> = events
        .iter()
        .map(|e| is_flagged(e.assigned_class))
        .collect();
    let mut report = detection_from_flags(&flags, truth)?;
    report.candidates = events
        .iter()
        .filter(|e| e.assigned_class == Assignment::Candidate)
        .count();
    Ok(report)
}

pub fn detection_from_flags(flags: &[bool], truth: &[WindowTruth]) -> Result<DetectionReport> {
    if flags.len() != truth.len() {
        return Err(Error::dims(format!(
            "{} events but {} truth labels",
            flags.len(),
            truth.len()
        )));
    }
    let n_faulty = truth.iter().filter(|t| t.label != 0).count();
    let n_normal = truth.len() - n_faulty;
    let detected = flags
        .iter()
        .zip(truth)
        .filter(|(&f, t)| f && t.label != 0)
        .count();
    let alarms = flags
        .iter()
        .zip(truth)
        .filter(|(&f, t)| f && t.label == 0)
        .count();

    let mut delays = Vec::new();
    let mut seg_start = 0;
    while seg_start < truth.len() {
        let label = truth[seg_start].label;
        let mut seg_end = seg_start;
        while seg_end < truth.len() && truth[seg_end].label == label {
            seg_end += 1;
        }
        if label != 0 {
            let onset = (seg_start..seg_end)
                .find(|&i| truth[i].pure)
                .unwrap_or(seg_start);
            let first = (seg_start..seg_end).find(|&i| flags[i]);
            delays.push(OnsetDelay {
                regime: label,
                onset,
                delay: first.map(|f| f as i64 - onset as i64),
            });
        }
        seg_start = seg_end;
    }
    Ok(DetectionReport {
        fdr: ratio(detected, n_faulty),
        far: ratio(alarms, n_normal),
        n_windows: truth.len(),
        n_faulty,
        n_normal,
        detected_faulty: detected,
        false_alarms: alarms,
        candidates: 0,
        detection_delays: delays,
        candidate_counts_as_flagged: true,
    })
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Best FDR over score thresholds whose FAR stays within `max_far`; a window is flagged when its
/// normal-class score falls below the threshold.
pub fn best_fdr_at_far(
    normal_scores: &[f64],
    truth: &[WindowTruth],
    max_far: f64,
) -> Result<(f64, f64)> {
    if normal_scores.len() != truth.len() {
        return Err(Error::dims("one score per window is required"));
    }
    let mut normal: Vec<f64> = normal_scores
        .iter()
        .zip(truth)
        .filter(|(_, t)| t.label == 0)
        .map(|(&s, _)| s)
        .collect();
    normal.sort_by(f64::total_cmp);
    let faulty: Vec<f64> = normal_scores
        .iter()
        .zip(truth)
        .filter(|(_, t)| t.label != 0)
        .map(|(&s, _)| s)
        .collect();
    // number of normal windows allowed below the threshold
    let allowed = (max_far * normal.len() as f64 + 1e-9).floor() as usize;
    let threshold = if allowed >= normal.len() {
        f64::INFINITY
    } else {
        normal[allowed]
    };
    let far = ratio(
        normal.iter().filter(|&&s| s < threshold).count(),
        normal.len(),
    );
    let fdr = ratio(
        faulty.iter().filter(|&&s| s < threshold).count(),
        faulty.len(),
    );
    Ok((fdr, far))
}

/// Class of every event after pool promotion: candidates that became a class count as members
/// of it, discarded candidates stay `None`.
pub fn resolved_classes(events: &[DiagnosisEvent]) -> Vec<Option<usize>> {
    let mut out = vec![None; events.len()];
    let mut pending: Vec<usize> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        match e.assigned_class {
            Assignment::Class(c) => {
                out[i] = Some(c);
                pending.clear();
            }
            Assignment::Candidate => {
                if e.pool_size == 1 {
                    pending.clear();
                }
                pending.push(i);
                if let Some(c) = e.new_class {
                    for &k in &pending {
                        out[k] = Some(c);
                    }
                    pending.clear();
                } else if e.pool_size > 0 && pending.len() > e.pool_size {
                    pending.drain(..pending.len() - e.pool_size);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub truth: u32,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationReport {
    pub discovered_classes: usize,
    pub merge_map: BTreeMap<usize, u32>,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub precision_micro: f64,
    pub recall_micro: f64,
    pub specificity_micro: f64,
    pub per_class: Vec<ClassScores>,
    /// Windows left without a class (discarded candidates).
    pub unassigned: usize,
    pub averaging: String,
}

/// Each discovered class goes to the true class it overlaps most (ties to the lower id).
pub fn merge_map(discovered: &[Option<usize>], truth: &[u32]) -> Result<BTreeMap<usize, u32>> {
    if discovered.len() != truth.len() {
        return Err(Error::dims(format!(
            "{} assignments but {} truth labels",
            discovered.len(),
            truth.len()
        )));
    }
    let mut overlap: BTreeMap<usize, BTreeMap<u32, usize>> = BTreeMap::new();
    for (d, &t) in discovered.iter().zip(truth) {
        if let Some(c) = d {
            *overlap.entry(*c).or_default().entry(t).or_default() += 1;
        }
    }
    Ok(overlap
        .into_iter()
        .map(|(c, counts)| {
            let (&t, _) = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .expect("class has members");
            (c, t)
        })
        .collect())
}

/// Precision, recall and specificity of the merged pseudo-clusters, per true class and averaged.
///
/// A true class that no discovered class merged into scores precision 0.
pub fn isolation_metrics(discovered: &[Option<usize>], truth: &[u32]) -> Result<IsolationReport> {
    let map = merge_map(discovered, truth)?;
    if map.is_empty() {
        return Err(Error::invalid(
            "isolation scoring needs at least one discovered class",
        ));
    }
    let pseudo: Vec<Option<u32>> = discovered.iter().map(|d| d.map(|c| map[&c])).collect();
    let mut labels: Vec<u32> = truth.to_vec();
    labels.sort_unstable();
    labels.dedup();

    let (mut tp_all, mut fp_all, mut fn_all, mut tn_all) = (0usize, 0usize, 0usize, 0usize);
    let mut per_class = Vec::new();
    for &l in &labels {
        let (mut tp, mut fp, mut fne, mut tn) = (0, 0, 0, 0);
        for (p, &t) in pseudo.iter().zip(truth) {
            match (*p == Some(l), t == l) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fne += 1,
                (false, false) => tn += 1,
            }
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fne;
        tn_all += tn;
        per_class.push(ClassScores {
            truth: l,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fne),
            specificity: if fp + tn == 0 {
                1.0
            } else {
                ratio(tn, tn + fp)
            },
            support: tp + fne,
        });
    }
    let mean =
        |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / per_class.len() as f64;
    Ok(IsolationReport {
        discovered_classes: map.len(),
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        specificity: mean(|c| c.specificity),
        precision_micro: ratio(tp_all, tp_all + fp_all),
        recall_micro: ratio(tp_all, tp_all + fn_all),
        specificity_micro: if fp_all + tn_all == 0 {
            1.0
        } else {
            ratio(tn_all, tn_all + fp_all)
        },
        merge_map: map,
        per_class,
        unassigned: discovered.iter().filter(|d| d.is_none()).count(),
        averaging: "macro over true classes; *_micro pooled".into(),
    })
}

/// A lag vector tagged with the time index of its first sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagVector {
    pub start: usize,
    pub values: Vec<f64>,
}

impl WindowPosition for LagVector {
    fn window_start(&self) -> usize {
        self.start
    }
}

impl PointDistance<LagVector> for Euclidean {
    fn distance(&self, a: &LagVector, b: &LagVector) -> Result<f64> {
        self.distance(&a.values, &b.values)
    }
}

/// Flattened lag vectors `(s_t, …, s_{t+p-1})` of the observations, one every `stride` steps.
pub fn lag_vectors(series: &MimoSeries, p: usize, stride: usize) -> Result<Vec<LagVector>> {
    if !(1..=30).contains(&p) {
        return Err(Error::invalid(format!(
            "lag order must lie in [1, 30], got {p}"
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if series.len() < p {
        return Err(Error::invalid("series is shorter than the lag order"));
    }
    Ok((0..=series.len() - p)
        .step_by(stride)
        .map(|start| LagVector {
            start,
            values: (start..start + p)
                .flat_map(|t| series.observation(t))
                .collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub order: usize,
    pub stride: usize,
    /// Number of leading lag vectors treated as normal training data.
    pub t_normal: usize,
    pub cv_points: usize,
    pub folds: usize,
    pub sigma_grid: Vec<f64>,
    pub nu_grid: Vec<f64>,
    pub library: LibraryParams,
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub selection: ParamSelection,
    pub library: FaultLibrary<LagVector>,
    pub events: Vec<DiagnosisEvent>,
    pub truth: Vec<WindowTruth>,
    pub detection: DetectionReport,
    pub isolation: IsolationReport,
}

/// One-class learning on raw lag vectors with Euclidean distances, under the same incremental
/// protocol as the model-space pipeline.
pub fn signal_space_baseline(series: &MimoSeries, cfg: &BaselineConfig) -> Result<BaselineRun> {
    let vectors = lag_vectors(series, cfg.order, cfg.stride)?;
    if cfg.t_normal < 2 || cfg.t_normal >= vectors.len() {
        return Err(Error::invalid(format!(
            "t_normal {} must lie in [2, {})",
            cfg.t_normal,
            vectors.len()
        )));
    }
    let cv = &vectors[..cfg.cv_points.min(cfg.t_normal)];
    let selection = select_params(cv, &cfg.sigma_grid, &cfg.nu_grid, cfg.folds, &Euclidean)?;
    let params = LibraryParams {
        sigma: selection.sigma,
        nu: selection.nu,
        ..cfg.library.clone()
    };
    let (library, events) = run_incremental(&vectors, cfg.t_normal, params, &Euclidean)?;
    let starts: Vec<usize> = events.iter().map(|e| e.window_start).collect();
    let truth = window_truths(&series.labels, &starts, cfg.order)?;
    let detection = detection_metrics(&events, &truth)?;
    let labels: Vec<u32> = truth.iter().map(|t| t.label).collect();
    let isolation = isolation_metrics(&resolved_classes(&events), &labels)?;
    Ok(BaselineRun {
        selection,
        library,
        events,
        truth,
        detection,
        isolation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wt(labels: &[u32]) -> Vec<WindowTruth> {
        labels
            .iter()
            .map(|&label| WindowTruth { label, pure: true })
            .collect()
    }

    #[test]
    fn toy_detection() {
        let truth = wt(&[0, 0, 0, 0, 1, 1, 1, 1, 1, 1]);
        let flags = [
            false, true, false, false, false, true, true, true, true, true,
        ];
        let r = detection_from_flags(&flags, &truth).unwrap();
        assert_eq!(r.fdr, 5.0 / 6.0);
        assert_eq!(r.far, 0.25);
        assert_eq!(r.detection_delays[0].delay, Some(1));
        assert!(detection_from_flags(&flags[..3], &truth).is_err());
    }

    #[test]
    fn majority_window_label() {
        let labels = [0, 0, 1, 1, 1, 2];
        assert_eq!(
            window_truth(&labels, 0, 4).unwrap(),
            WindowTruth {
                label: 0,
                pure: false
            }
        );
        assert_eq!(
            window_truth(&labels, 1, 4).unwrap(),
            WindowTruth {
                label: 1,
                pure: false
            }
        );
        assert_eq!(
            window_truth(&labels, 2, 3).unwrap(),
            WindowTruth {
                label: 1,
                pure: true
            }
        );
        assert!(window_truth(&labels, 4, 3).is_err());
    }

    #[test]
    fn split_truth_class_merges_back() {
        let truth: Vec<u32> = (0..100).map(|_| 1).collect();
        let disc: Vec<Option<usize>> = (0..100).map(|i| Some(if i < 60 { 1 } else { 2 })).collect();
        let r = isolation_metrics(&disc, &truth).unwrap();
        assert_eq!(
            r.merge_map.values().copied().collect::<Vec<_>>(),
            vec![1, 1]
        );
        assert_eq!(r.recall, 1.0);
    }

    #[test]
    fn identity_is_perfect() {
        let truth = [0, 0, 1, 1, 2, 2, 3];
        let disc: Vec<Option<usize>> = truth.iter().map(|&t| Some(t as usize + 5)).collect();
        let r = isolation_metrics(&disc, &truth).unwrap();
        assert_eq!((r.precision, r.recall, r.specificity), (1.0, 1.0, 1.0));
        assert_eq!(r.discovered_classes, 4);
    }

    #[test]
    fn resolution_of_promoted_pool() {
        let ev = |a: Assignment, pool: usize, new: Option<usize>| DiagnosisEvent {
            index: 0,
            window_start: 0,
            assigned_class: a,
            scores: BTreeMap::new(),
            library_size: 1,
            pool_size: pool,
            new_class: new,
        };
        let c = Assignment::Candidate;
        let events = vec![
            ev(Assignment::Class(0), 0, None),
            ev(c, 1, None),
            ev(Assignment::Class(0), 0, None),
            ev(c, 1, None),
            ev(c, 2, None),
            ev(c, 3, Some(1)),
            ev(c, 1, None),
        ];
        assert_eq!(
            resolved_classes(&events),
            vec![Some(0), None, Some(0), Some(1), Some(1), Some(1), None]
        );
    }

    #[test]
    fn lag_vectors_order_one_are_samples() {
        let s = MimoSeries::new(
            nalgebra::DMatrix::from_fn(5, 1, |r, _| r as f64),
            nalgebra::DMatrix::from_fn(5, 1, |r, _| -(r as f64)),
            vec![0; 5],
            1.0,
        )
        .unwrap();
        let v = lag_vectors(&s, 1, 1).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v[3].values, s.observation(3));
        assert!(lag_vectors(&s, 0, 1).is_err());
        assert!(lag_vectors(&s, 31, 1).is_err());
        assert_eq!(
            lag_vectors(&s, 2, 1).unwrap()[1].values,
            vec![1.0, -1.0, 2.0, -2.0]
        );
    }

    #[test]
    fn fdr_at_far_budget() {
        let truth = wt(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1]);
        let scores = [
            1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, -0.5, -1.0, -0.2, 0.25, 0.9,
        ];
        let (fdr, far) = best_fdr_at_far(&scores, &truth, 0.1).unwrap();
        assert_eq!(far, 0.1);
        assert_eq!(fdr, 0.5);
    }
}
