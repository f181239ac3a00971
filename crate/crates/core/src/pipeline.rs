//! Run configuration, staged artifacts and the run manifest.
//!
//! Every stage reads its inputs from and writes its outputs to one directory:
//!
//! | stage       | reads                      | writes                              |
//! |-------------|----------------------------|-------------------------------------|
//! | `generate`  | config                     | `series.csv`                        |
//! | `fit`       | `series.csv`               | `models.json`                       |
//! | `distances` | `models.json`              | `dist.csv`, `dist.json`             |
//! | `detect`    | `models.json`              | `events.jsonl`, `library.json`      |
//! | `evaluate`  | `series.csv`, `events.jsonl` | `report_detect.json`, `report_isolate.json` |
//! | `mds`       | `dist.csv`, `dist.json`    | `mds.csv`                           |

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{
    best_fdr_at_far, detection_metrics, isolation_metrics, resolved_classes, signal_space_baseline,
    window_truths, BaselineConfig, DetectionReport, IsolationReport, WindowTruth,
};
use crate::librarian::{
    run_incremental, DiagnosisEvent, FaultLibrary, LibraryParams, WindowPosition,
};
use crate::modelspace::{
    classical_mds, pairwise, DistanceMatrix, DistanceMethod, DistanceSidecar, Metric,
    MetricOptions, PointDistance,
};
use crate::ocsvm::{default_nu_grid, default_sigma_grid, select_params, ParamSelection};
use crate::reservoir::{window_fit, ModelArchive, ModelPoint, ReservoirConfig};
use crate::signals::{
    compose_scenario, ChannelScaler, MimoSeries, ScenarioSpec, Segment, SystemKind,
};

pub const SERIES_FILE: &str = "series.csv";
pub const MODELS_FILE: &str = "models.json";
pub const DIST_FILE: &str = "dist.csv";
pub const DIST_META_FILE: &str = "dist.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const LIBRARY_FILE: &str = "library.json";
pub const DETECT_REPORT_FILE: &str = "report_detect.json";
pub const ISOLATE_REPORT_FILE: &str = "report_isolate.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const MDS_FILE: &str = "mds.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

const ARTIFACT_FILES: [&str; 10] = [
    SERIES_FILE,
    MODELS_FILE,
    DIST_FILE,
    DIST_META_FILE,
    EVENTS_FILE,
    LIBRARY_FILE,
    DETECT_REPORT_FILE,
    ISOLATE_REPORT_FILE,
    COMPARISON_FILE,
    MDS_FILE,
];

/// How the class-update rule and the pool threshold are configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibraryOptions {
    pub buffer_capacity: usize,
    pub retrain_growth: f64,
    pub update_normal: bool,
}

impl Default for LibraryOptions {
    fn default() -> Self {
        let p = LibraryParams::default();
        Self {
            buffer_capacity: p.buffer_capacity,
            retrain_growth: p.retrain_growth,
            update_normal: p.update_normal,
        }
    }
}

/// Settings of the signal-space comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineOptions {
    pub enabled: bool,
    /// Lag order `p` in `[1, 30]`.
    pub order: usize,
    /// FAR budget at which the baseline's best threshold is reported.
    pub far_budget: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            enabled: false,
            order: 10,
            far_budget: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub reservoir: ReservoirConfig,
    /// Window length `m` in time steps.
    pub window: usize,
    pub stride: usize,
    pub distance: DistanceMethod,
    pub metric: MetricOptions,
    /// Fixed kernel width; selected by cross-validation when absent.
    pub sigma: Option<f64>,
    /// Fixed ν; selected by cross-validation when absent.
    pub nu: Option<f64>,
    pub sigma_grid: Vec<f64>,
    pub nu_grid: Vec<f64>,
    pub cv_points: usize,
    pub folds: usize,
    /// Length of the normal training prefix in time steps.
    pub t_normal: usize,
    /// z-score every channel on the normal prefix before driving the reservoir.
    pub standardize: bool,
    pub library: LibraryOptions,
    /// Largest number of points kept for the exported distance matrix and MDS.
    pub export_points: usize,
    pub mds_dims: usize,
    pub baseline: BaselineOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_system(SystemKind::Narma, 0)
    }
}

impl RunConfig {
    /// Desk-scale defaults: 1000 normal steps, then 3000 steps of every fault regime.
    pub fn for_system(system: SystemKind, seed: u64) -> Self {
        let regimes: u32 = match system {
            SystemKind::Narma => 3,
            SystemKind::Vanderpol | SystemKind::Threetank => 4,
        };
        let mut segments = vec![Segment::new(0, 1000)];
        segments.extend((1..regimes).map(|r| Segment::new(r, 3000)));
        Self {
            scenario: ScenarioSpec {
                system,
                segments,
                seed,
                params: Default::default(),
            },
            reservoir: ReservoirConfig::default(),
            window: 500,
            stride: 1,
            distance: DistanceMethod::SymmetricSampled,
            metric: MetricOptions::default(),
            sigma: None,
            nu: None,
            sigma_grid: default_sigma_grid(),
            nu_grid: default_nu_grid(),
            cv_points: 500,
            folds: 5,
            t_normal: 1000,
            standardize: true,
            library: LibraryOptions::default(),
            export_points: 500,
            mds_dims: 2,
            baseline: BaselineOptions::default(),
        }
    }

    /// Short windows and a coarse stride for quick runs.
    pub fn fast(mut self) -> Self {
        self.window = 100;
        self.stride = 5;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let total: usize = self.scenario.segments.iter().map(|s| s.length).sum();
        if self.stride == 0 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        let needed = self.reservoir.washout + self.reservoir.size + 1;
        if self.window < needed {
            return Err(Error::invalid(format!(
                "window ({}) must cover the washout plus reservoir size + 1 ({needed})",
                self.window
            )));
        }
        if self.t_normal < self.window {
            return Err(Error::invalid(format!(
                "t_normal ({}) must be at least the window length ({})",
                self.t_normal, self.window
            )));
        }
        if self.t_normal >= total {
            return Err(Error::invalid(format!(
                "t_normal ({}) leaves nothing to monitor in a {total}-step scenario",
                self.t_normal
            )));
        }
        if let Some(first) = self.scenario.segments.first() {
            if self.t_normal > first.length {
                return Err(Error::invalid(format!(
                    "t_normal ({}) runs past the first (normal) segment of {} steps",
                    self.t_normal, first.length
                )));
            }
        }
        if self.normal_points() < 2 {
            return Err(Error::invalid(
                "the normal prefix holds fewer than 2 windows",
            ));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("sigma must be positive, got {s}")));
            }
        }
        if let Some(v) = self.nu {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("nu must lie in (0, 1], got {v}")));
            }
        }
        if self.sigma.is_none() || self.nu.is_none() {
            if self.sigma_grid.is_empty() || self.nu_grid.is_empty() {
                return Err(Error::invalid("parameter grids must not be empty"));
            }
            if self.cv_points.min(self.normal_points()) < 2 * self.folds {
                return Err(Error::invalid(
                    "too few normal windows for cross-validation",
                ));
            }
        }
        if self.export_points < 2 {
            return Err(Error::invalid("export_points must be at least 2"));
        }
        if self.mds_dims == 0 {
            return Err(Error::invalid("mds_dims must be at least 1"));
        }
        if self.baseline.enabled && !(1..=30).contains(&self.baseline.order) {
            return Err(Error::invalid("baseline order must lie in [1, 30]"));
        }
        Ok(())
    }

    /// Windows lying entirely inside the normal prefix.
    pub fn normal_points(&self) -> usize {
        if self.t_normal < self.window {
            0
        } else {
            (self.t_normal - self.window) / self.stride + 1
        }
    }

    pub fn library_params(&self, sigma: f64, nu: f64) -> LibraryParams {
        LibraryParams {
            sigma,
            nu,
            window: self.window,
            stride: self.stride,
            buffer_capacity: self.library.buffer_capacity,
            retrain_growth: self.library.retrain_growth,
            update_normal: self.library.update_normal,
        }
    }

    /// SHA-256 of the compact JSON form, defaults included.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        let digest = Sha256::digest(&bytes);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Conditions under which results are not directly comparable with the reference protocol.
    pub fn deviations(&self, n_points: Option<usize>) -> Vec<String> {
        let mut out = Vec::new();
        if self.stride > 1 {
            out.push(format!(
                "stride {} > 1: only every {}th window is evaluated",
                self.stride, self.stride
            ));
        }
        if self.standardize {
            out.push("channels z-scored on the normal training prefix".into());
        }
        if let Some(n) = n_points {
            if n > self.export_points {
                out.push(format!(
                    "distance matrix and MDS use {} of {n} windows, evenly thinned",
                    self.export_points
                ));
            }
        }
        out
    }
}

impl RunConfig {
    /// Channel scaling applied before the reservoir.
    pub fn prepare(&self, series: &MimoSeries) -> Result<MimoSeries> {
        if self.standardize {
            ChannelScaler::fit(series, self.t_normal)?.apply(series)
        } else {
            Ok(series.clone())
        }
    }

    /// Signal-space comparison run under the same protocol and grids.
    pub fn baseline_config(&self) -> BaselineConfig {
        let order = self.baseline.order;
        BaselineConfig {
            order,
            stride: self.stride,
            t_normal: (self.t_normal.saturating_sub(order)) / self.stride + 1,
            cv_points: self.cv_points,
            folds: self.folds,
            sigma_grid: self.sigma_grid.clone(),
            nu_grid: self.nu_grid.clone(),
            library: self.library_params(1.0, 0.1),
        }
    }

    /// Distance metric fitted on the normal prefix of `points`.
    pub fn metric_for(&self, points: &[ModelPoint]) -> Result<Metric> {
        let normal = &points[..self.normal_points().min(points.len())];
        Metric::prepare(self.distance, normal, &self.metric)
    }

    /// Parameter selection and the incremental library run, without touching disk.
    pub fn detect(&self, points: &[ModelPoint]) -> Result<(LibrarySnapshot, Vec<DiagnosisEvent>)> {
        let metric = self.metric_for(points)?;
        let refs: Vec<WindowRef> = points
            .iter()
            .enumerate()
            .map(|(index, p)| WindowRef {
                index,
                window_start: p.window_start,
            })
            .collect();
        let indexed = Indexed {
            points,
            metric: &metric,
        };
        let t_normal = self.normal_points();
        if t_normal >= refs.len() {
            return Err(Error::invalid(
                "no windows left to monitor after the normal prefix",
            ));
        }
        let (sigma, nu, selection) = match (self.sigma, self.nu) {
            (Some(s), Some(v)) => (s, v, None),
            (fs, fv) => {
                let cv = &refs[..self.cv_points.min(t_normal)];
                let sg = fs.map_or(self.sigma_grid.clone(), |s| vec![s]);
                let ng = fv.map_or(self.nu_grid.clone(), |v| vec![v]);
                let sel = select_params(cv, &sg, &ng, self.folds, &indexed)?;
                log::info!("selected sigma {} nu {}", sel.sigma, sel.nu);
                (sel.sigma, sel.nu, Some(sel))
            }
        };
        let (library, events) =
            run_incremental(&refs, t_normal, self.library_params(sigma, nu), &indexed)?;
        let snapshot = LibrarySnapshot {
            metric,
            selection,
            library,
        };
        Ok((snapshot, events))
    }
}

/// A window referenced by position in the model archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRef {
    pub index: usize,
    pub window_start: usize,
}

impl WindowPosition for WindowRef {
    fn window_start(&self) -> usize {
        self.window_start
    }
}

/// Resolves [`WindowRef`]s against an archive of model points.
pub struct Indexed<'a> {
    pub points: &'a [ModelPoint],
    pub metric: &'a Metric,
}

impl PointDistance<WindowRef> for Indexed<'_> {
    fn distance(&self, a: &WindowRef, b: &WindowRef) -> Result<f64> {
        let get = |r: &WindowRef| {
            self.points
                .get(r.index)
                .ok_or_else(|| Error::dims(format!("window reference {} out of range", r.index)))
        };
        self.metric.distance(get(a)?, get(b)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibrarySnapshot {
    pub metric: Metric,
    pub selection: Option<ParamSelection>,
    pub library: FaultLibrary<WindowRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutput {
    pub sigma: f64,
    pub nu: f64,
    pub distance: DistanceMethod,
    pub cv_objective: String,
    pub selection: Option<ParamSelection>,
    pub report: DetectionReport,
    /// Signal-space comparison when enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub order: usize,
    pub sigma: f64,
    pub nu: f64,
    pub report: DetectionReport,
    pub isolation: IsolationReport,
    pub far_budget: f64,
    /// Best FDR over thresholds on the normal-class score with FAR within the budget.
    pub best_fdr_at_budget: f64,
    pub far_at_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub deviations: Vec<String>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// CV objective recorded with every detection report.
pub const CV_OBJECTIVE: &str =
    "blocked k-fold on the first normal windows; minimise |held-out FAR - nu|, then FAR, then sigma, then nu";

/// Tracks files written by a run so a failed run can remove them.
#[derive(Debug, Default)]
pub struct Written {
    paths: Vec<PathBuf>,
}

impl Written {
    fn add(&mut self, p: PathBuf) {
        if !self.paths.contains(&p) {
            self.paths.push(p);
        }
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    pub fn remove_all(&self) {
        for p in &self.paths {
            if let Err(e) = fs::remove_file(p) {
                log::warn!("could not remove partial output {}: {e}", p.display());
            }
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open_artifact(path: &Path, producer: &str) -> Result<File> {
    File::open(path).map_err(|e| Error::MissingArtifact {
        path: path.to_path_buf(),
        reason: format!("{e}; run `{producer}` first"),
    })
}

fn producer_of(name: &str) -> &'static str {
    match name {
        SERIES_FILE => "generate",
        MODELS_FILE => "fit",
        DIST_FILE | DIST_META_FILE => "distances",
        EVENTS_FILE | LIBRARY_FILE => "detect",
        MDS_FILE => "mds",
        _ => "run",
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let f = open_artifact(path, producer_of(name))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn create(path: &Path, written: &mut Written) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(io_err(path))?;
    written.add(path.to_path_buf());
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T, written: &mut Written) -> Result<()> {
    let mut w = create(path, written)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Staged runner bound to an output directory.
pub struct Pipeline {
    pub config: RunConfig,
    pub out: PathBuf,
    pub written: Written,
}

impl Pipeline {
    pub fn new(config: RunConfig, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let out = out.into();
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        Ok(Self {
            config,
            out,
            written: Written::default(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn generate(&mut self) -> Result<MimoSeries> {
        let series = compose_scenario(&self.config.scenario)?;
        let path = self.path(SERIES_FILE);
        let mut w = create(&path, &mut self.written)?;
        series.write_csv(&mut w)?;
        w.flush().map_err(io_err(&path))?;
        Ok(series)
    }

    pub fn load_series(&self) -> Result<MimoSeries> {
        let path = self.path(SERIES_FILE);
        let f = open_artifact(&path, "generate")?;
        MimoSeries::read_csv(BufReader::new(f)).map_err(|e| match e {
            Error::Csv(c) => Error::Malformed {
                path: path.clone(),
                reason: c.to_string(),
            },
            other => other,
        })
    }

    /// The series the reservoir sees.
    pub fn prepared(&self, series: &MimoSeries) -> Result<MimoSeries> {
        self.config.prepare(series)
    }

    pub fn fit(&mut self, series: &MimoSeries) -> Result<ModelArchive> {
        let prepared = self.prepared(series)?;
        let c = &self.config;
        let fit = window_fit(&prepared, c.window, c.stride, &c.reservoir)?;
        let archive = ModelArchive::new(&fit, c.window, c.stride, c.reservoir.sample_size);
        write_json(&self.path(MODELS_FILE), &archive, &mut self.written)?;
        Ok(archive)
    }

    pub fn load_models(&self) -> Result<Vec<ModelPoint>> {
        let archive: ModelArchive = read_json(&self.path(MODELS_FILE))?;
        if archive.window != self.config.window || archive.stride != self.config.stride {
            return Err(Error::invalid(format!(
                "{MODELS_FILE} was fitted with window {} / stride {}, config asks for {} / {}",
                archive.window, archive.stride, self.config.window, self.config.stride
            )));
        }
        archive.model_points()
    }

    fn metric(&self, points: &[ModelPoint]) -> Result<Metric> {
        self.config.metric_for(points)
    }

    /// Evenly thinned subset used for the exported distance matrix.
    pub fn export_indices(&self, n: usize) -> Vec<usize> {
        let k = self.config.export_points;
        if n <= k {
            return (0..n).collect();
        }
        (0..k)
            .map(|i| ((i as f64) * (n - 1) as f64 / (k - 1) as f64).round() as usize)
            .collect()
    }

    pub fn distances(&mut self, points: &[ModelPoint]) -> Result<DistanceMatrix> {
        let metric = self.metric(points)?;
        let picked: Vec<ModelPoint> = self
            .export_indices(points.len())
            .into_iter()
            .map(|i| points[i].clone())
            .collect();
        let dm = pairwise(&picked, &metric)?;
        let path = self.path(DIST_FILE);
        let mut w = create(&path, &mut self.written)?;
        dm.write_csv(&mut w)?;
        w.flush().map_err(io_err(&path))?;
        write_json(&self.path(DIST_META_FILE), &dm.sidecar(), &mut self.written)?;
        Ok(dm)
    }

    pub fn load_distances(&self) -> Result<DistanceMatrix> {
        let sidecar: DistanceSidecar = read_json(&self.path(DIST_META_FILE))?;
        let path = self.path(DIST_FILE);
        let f = open_artifact(&path, "distances")?;
        DistanceMatrix::read_csv(BufReader::new(f), &sidecar)
    }

    /// Parameter selection followed by the incremental library run.
    pub fn detect(
        &mut self,
        points: &[ModelPoint],
    ) -> Result<(LibrarySnapshot, Vec<DiagnosisEvent>)> {
        let (snapshot, events) = self.config.detect(points)?;
        let path = self.path(EVENTS_FILE);
        let mut w = create(&path, &mut self.written)?;
        for e in &events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        write_json(&self.path(LIBRARY_FILE), &snapshot, &mut self.written)?;
        Ok((snapshot, events))
    }

    pub fn load_events(&self) -> Result<Vec<DiagnosisEvent>> {
        let path = self.path(EVENTS_FILE);
        let f = open_artifact(&path, "detect")?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
                path: path.clone(),
                reason: format!("line {}: {e}", i + 1),
            })?);
        }
        Ok(out)
    }

    pub fn load_library(&self) -> Result<LibrarySnapshot> {
        read_json(&self.path(LIBRARY_FILE))
    }

    pub fn truth(
        &self,
        series: &MimoSeries,
        events: &[DiagnosisEvent],
    ) -> Result<Vec<WindowTruth>> {
        let starts: Vec<usize> = events.iter().map(|e| e.window_start).collect();
        window_truths(&series.labels, &starts, self.config.window)
    }

    /// Detection and isolation reports, plus the signal-space comparison when enabled.
    pub fn evaluate(
        &mut self,
        series: &MimoSeries,
        events: &[DiagnosisEvent],
    ) -> Result<(DetectionOutput, IsolationReport)> {
        let snapshot = self.load_library().ok();
        let truth = self.truth(series, events)?;
        let report = detection_metrics(events, &truth)?;
        let labels: Vec<u32> = truth.iter().map(|t| t.label).collect();
        let isolation = isolation_metrics(&resolved_classes(events), &labels)?;
        let (sigma, nu, selection) = match &snapshot {
            Some(s) => (
                s.library.params.sigma,
                s.library.params.nu,
                s.selection.clone(),
            ),
            None => (
                self.config.sigma.unwrap_or(f64::NAN),
                self.config.nu.unwrap_or(f64::NAN),
                None,
            ),
        };
        let baseline = if self.config.baseline.enabled {
            Some(self.baseline(series)?)
        } else {
            None
        };
        let detection = DetectionOutput {
            sigma,
            nu,
            distance: self.config.distance,
            cv_objective: CV_OBJECTIVE.into(),
            selection,
            report,
            baseline,
        };
        write_json(
            &self.path(DETECT_REPORT_FILE),
            &detection,
            &mut self.written,
        )?;
        write_json(
            &self.path(ISOLATE_REPORT_FILE),
            &isolation,
            &mut self.written,
        )?;
        if let Some(b) = &detection.baseline {
            self.write_comparison(&detection, &isolation, b)?;
        }
        Ok((detection, isolation))
    }

    fn baseline(&self, series: &MimoSeries) -> Result<BaselineSummary> {
        let c = &self.config;
        let prepared = self.prepared(series)?;
        let order = c.baseline.order;
        let run = signal_space_baseline(&prepared, &c.baseline_config())?;
        let normal_scores: Vec<f64> = run.events.iter().map(|e| e.scores[&0]).collect();
        let (best, far) = best_fdr_at_far(&normal_scores, &run.truth, c.baseline.far_budget)?;
        Ok(BaselineSummary {
            order,
            sigma: run.selection.sigma,
            nu: run.selection.nu,
            report: run.detection,
            isolation: run.isolation,
            far_budget: c.baseline.far_budget,
            best_fdr_at_budget: best,
            far_at_budget: far,
        })
    }

    fn write_comparison(
        &mut self,
        d: &DetectionOutput,
        iso: &IsolationReport,
        b: &BaselineSummary,
    ) -> Result<()> {
        let path = self.path(COMPARISON_FILE);
        let w = create(&path, &mut self.written)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record([
            "method",
            "fdr",
            "far",
            "classes",
            "precision",
            "recall",
            "specificity",
        ])?;
        let row = |name: &str, r: &DetectionReport, i: &IsolationReport| {
            vec![
                name.to_string(),
                format!("{:.4}", r.fdr),
                format!("{:.4}", r.far),
                i.discovered_classes.to_string(),
                format!("{:.4}", i.precision),
                format!("{:.4}", i.recall),
                format!("{:.4}", i.specificity),
            ]
        };
        csv.write_record(row("ocs-model", &d.report, iso))?;
        csv.write_record(row("ocs-signal", &b.report, &b.isolation))?;
        csv.flush().map_err(io_err(&path))
    }

    pub fn mds(&mut self, dm: &DistanceMatrix) -> Result<nalgebra::DMatrix<f64>> {
        let coords = classical_mds(&dm.entries, self.config.mds_dims)?;
        let path = self.path(MDS_FILE);
        let w = create(&path, &mut self.written)?;
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["window_start".to_string()];
        header.extend((1..=coords.ncols()).map(|d| format!("x{d}")));
        csv.write_record(&header)?;
        for (r, start) in dm.window_starts.iter().enumerate() {
            let mut rec = vec![start.to_string()];
            rec.extend(coords.row(r).iter().map(|v| format!("{v:.16e}")));
            csv.write_record(&rec)?;
        }
        csv.flush().map_err(io_err(&path))?;
        Ok(coords)
    }

    pub fn write_manifest(&mut self, n_points: Option<usize>) -> Result<Manifest> {
        let mut artifacts: Vec<String> = ARTIFACT_FILES
            .iter()
            .filter(|name| self.path(name).exists())
            .map(|name| name.to_string())
            .collect();
        artifacts.push(MANIFEST_FILE.into());
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: self.config.hash()?,
            config: self.config.clone(),
            deviations: self.config.deviations(n_points),
            artifacts,
        };
        write_json(&self.path(MANIFEST_FILE), &manifest, &mut self.written)?;
        Ok(manifest)
    }

    /// Every stage in order; on failure the files written so far are removed.
    pub fn run_all(&mut self) -> Result<RunSummary> {
        match self.run_stages() {
            Ok(s) => Ok(s),
            Err(e) => {
                self.written.remove_all();
                Err(e)
            }
        }
    }

    fn run_stages(&mut self) -> Result<RunSummary> {
        let series = self.generate()?;
        let archive = self.fit(&series)?;
        let points = archive.model_points()?;
        let dm = self.distances(&points)?;
        let (snapshot, events) = self.detect(&points)?;
        let (detection, isolation) = self.evaluate(&series, &events)?;
        self.mds(&dm)?;
        let manifest = self.write_manifest(Some(points.len()))?;
        Ok(RunSummary {
            manifest,
            detection,
            isolation,
            library_size: snapshot.library.len(),
            n_points: points.len(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub detection: DetectionOutput,
    pub isolation: IsolationReport,
    pub library_size: usize,
    pub n_points: usize,
}

/// Reads either a bare config or a manifest embedding one.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    let config_value = match value.get("config") {
        Some(c) if value.get("config_hash").is_some() => c.clone(),
        _ => value,
    };
    let config: RunConfig = serde_json::from_value(config_value)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}
