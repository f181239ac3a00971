//! Browser demo: simulate a scenario, map its windows into model space and
//! replay the incremental fault library. Every export takes and returns JSON.

use fdi_core::eval::{detection_metrics, isolation_metrics, resolved_classes, window_truths};
use fdi_core::modelspace::{classical_mds, pairwise};
use fdi_core::pipeline::RunConfig;
use fdi_core::reservoir::{window_fit, ModelPoint};
use fdi_core::signals::{compose_scenario, MimoSeries, Segment, SystemKind};
use fdi_core::Result;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Scenario and window settings chosen in the page.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    pub system: SystemKind,
    pub seed: u64,
    pub normal_steps: usize,
    pub fault_steps: usize,
    pub window: usize,
    pub stride: usize,
    /// Upper bound on points shown in the scatter.
    pub max_points: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Narma,
            seed: 0,
            normal_steps: 800,
            fault_steps: 1200,
            window: 200,
            stride: 5,
            max_points: 300,
        }
    }
}

impl DemoConfig {
    fn run_config(&self) -> RunConfig {
        let mut c = RunConfig::for_system(self.system, self.seed);
        let regimes = c.scenario.segments.len() as u32;
        c.scenario.segments = std::iter::once(Segment::new(0, self.normal_steps))
            .chain((1..regimes).map(|r| Segment::new(r, self.fault_steps)))
            .collect();
        c.window = self.window;
        c.stride = self.stride;
        c.t_normal = self.normal_steps;
        c
    }
}

#[derive(Debug, Serialize)]
pub struct SignalView {
    pub dt: f64,
    /// One row per output channel.
    pub outputs: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
}

#[derive(Debug, Serialize)]
pub struct ScatterPoint {
    pub window_start: usize,
    pub label: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Serialize)]
pub struct TimelinePoint {
    pub window_start: usize,
    pub truth: u32,
    /// Class id, or -1 while the window sits in the candidate pool.
    pub assigned: i64,
    /// Class id after pooled windows are credited to the class they founded.
    pub resolved: Option<usize>,
    pub normal_score: f64,
}

#[derive(Debug, Serialize)]
pub struct Timeline {
    pub sigma: f64,
    pub nu: f64,
    pub fdr: f64,
    pub far: f64,
    pub classes: usize,
    pub precision: f64,
    pub recall: f64,
    pub events: Vec<TimelinePoint>,
}

fn parse(config: &str) -> Result<DemoConfig> {
    if config.trim().is_empty() {
        return Ok(DemoConfig::default());
    }
    Ok(serde_json::from_str(config)?)
}

fn series(c: &DemoConfig) -> Result<(RunConfig, MimoSeries)> {
    let rc = c.run_config();
    rc.validate()?;
    let s = compose_scenario(&rc.scenario)?;
    Ok((rc, s))
}

fn model_points(rc: &RunConfig, s: &MimoSeries) -> Result<Vec<ModelPoint>> {
    let prepared = rc.prepare(s)?;
    Ok(window_fit(&prepared, rc.window, rc.stride, &rc.reservoir)?.points)
}

fn label_at(s: &MimoSeries, window_start: usize, window: usize) -> u32 {
    s.labels[(window_start + window - 1).min(s.labels.len() - 1)]
}

pub fn simulate_json(config: &str) -> Result<String> {
    let (_, s) = series(&parse(config)?)?;
    let view = SignalView {
        dt: s.dt,
        outputs: (0..s.n_outputs())
            .map(|j| s.outputs.column(j).iter().copied().collect())
            .collect(),
        labels: s.labels.clone(),
    };
    Ok(serde_json::to_string(&view)?)
}

pub fn model_space_json(config: &str) -> Result<String> {
    let c = parse(config)?;
    let (rc, s) = series(&c)?;
    let points = model_points(&rc, &s)?;
    let step = points.len().div_ceil(c.max_points.max(2));
    let picked: Vec<ModelPoint> = points.iter().step_by(step.max(1)).cloned().collect();
    let metric = rc.metric_for(&points)?;
    let dm = pairwise(&picked, &metric)?;
    let coords = classical_mds(&dm.entries, 2)?;
    let scatter: Vec<ScatterPoint> = picked
        .iter()
        .enumerate()
        .map(|(i, p)| ScatterPoint {
            window_start: p.window_start,
            label: label_at(&s, p.window_start, rc.window),
            x: coords[(i, 0)],
            y: coords[(i, 1)],
        })
        .collect();
    Ok(serde_json::to_string(&scatter)?)
}

pub fn timeline_json(config: &str) -> Result<String> {
    let (rc, s) = series(&parse(config)?)?;
    let points = model_points(&rc, &s)?;
    let (snapshot, events) = rc.detect(&points)?;
    let starts: Vec<usize> = events.iter().map(|e| e.window_start).collect();
    let truth = window_truths(&s.labels, &starts, rc.window)?;
    let detection = detection_metrics(&events, &truth)?;
    let resolved = resolved_classes(&events);
    let labels: Vec<u32> = truth.iter().map(|t| t.label).collect();
    let isolation = isolation_metrics(&resolved, &labels)?;
    let timeline = Timeline {
        sigma: snapshot.library.params.sigma,
        nu: snapshot.library.params.nu,
        fdr: detection.fdr,
        far: detection.far,
        classes: snapshot.library.len(),
        precision: isolation.precision,
        recall: isolation.recall,
        events: events
            .iter()
            .zip(&truth)
            .zip(&resolved)
            .map(|((e, t), r)| TimelinePoint {
                window_start: e.window_start,
                truth: t.label,
                assigned: match e.assigned_class {
                    fdi_core::librarian::Assignment::Class(k) => k as i64,
                    fdi_core::librarian::Assignment::Candidate => -1,
                },
                resolved: *r,
                normal_score: e.scores.get(&0).copied().unwrap_or(f64::NAN),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&timeline)?)
}

fn js(r: Result<String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Output channels and regime labels of the simulated scenario.
#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, JsValue> {
    js(simulate_json(config))
}

/// Two-dimensional MDS embedding of the window readouts.
#[wasm_bindgen]
pub fn model_space(config: &str) -> Result<String, JsValue> {
    js(model_space_json(config))
}

/// Per-window class assignments of the incremental fault library.
#[wasm_bindgen]
pub fn timeline(config: &str) -> Result<String, JsValue> {
    js(timeline_json(config))
}
