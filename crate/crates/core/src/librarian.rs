//! Incremental one-class learning over a stream of points: detect departures from the normal
//! class, collect rejected points in a candidate pool and promote the pool to a new class once
//! it outgrows half a window.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::modelspace::PointDistance;
use crate::ocsvm::{train_ocs_distances, OcsModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryParams {
    pub sigma: f64,
    pub nu: f64,
    /// Window length `m` in time steps.
    pub window: usize,
    /// Spacing of consecutive points in time steps.
    pub stride: usize,
    /// Member buffer capacity per class.
    pub buffer_capacity: usize,
    /// Relative buffer growth that triggers retraining.
    pub retrain_growth: f64,
    /// Whether the normal class is retrained on assignment like every other class.
    pub update_normal: bool,
}

impl Default for LibraryParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            nu: 0.05,
            window: 500,
            stride: 1,
            buffer_capacity: 500,
            retrain_growth: 0.1,
            update_normal: true,
        }
    }
}

impl LibraryParams {
    /// The pool is promoted once it holds more than this many points (`0.5·m` steps).
    pub fn pool_threshold(&self) -> usize {
        (self.window / 2 / self.stride.max(1)).max(1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::invalid(format!(
                "nu must lie in (0, 1], got {}",
                self.nu
            )));
        }
        if self.window == 0 || self.stride == 0 {
            return Err(Error::invalid("window and stride must be positive"));
        }
        if self.buffer_capacity < 2 {
            return Err(Error::invalid(
                "member buffers need room for at least 2 points",
            ));
        }
        if !(self.retrain_growth >= 0.0) {
            return Err(Error::invalid("retrain growth must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Member<P> {
    seq: u64,
    point: P,
}

/// Pairwise distances of the buffer at the last training, keyed by sequence number.
#[derive(Debug, Clone, Default, PartialEq)]
struct DistanceCache {
    seqs: Vec<u64>,
    d: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultClass<P> {
    pub id: usize,
    pub model: OcsModel<P>,
    members: VecDeque<Member<P>>,
    trained_on: usize,
    added_since_training: usize,
    pub retrain_count: usize,
    #[serde(skip)]
    cache: DistanceCache,
}

impl<P: Clone + Sync> FaultClass<P> {
    fn train<M: PointDistance<P> + Sync>(
        id: usize,
        members: VecDeque<Member<P>>,
        params: &LibraryParams,
        metric: &M,
    ) -> Result<Self> {
        let mut class = Self {
            id,
            model: OcsModel {
                support_indices: Vec::new(),
                alpha: Vec::new(),
                rho: 0.0,
                sigma: params.sigma,
                nu: params.nu,
                n_train: 0,
                reference_points: Vec::new(),
            },
            members,
            trained_on: 0,
            added_since_training: 0,
            retrain_count: 0,
            cache: DistanceCache::default(),
        };
        class.retrain(params, metric)?;
        class.retrain_count = 0;
        Ok(class)
    }

    fn retrain<M: PointDistance<P> + Sync>(
        &mut self,
        params: &LibraryParams,
        metric: &M,
    ) -> Result<()> {
        let d = self.member_distances(metric)?;
        let points: Vec<P> = self.members.iter().map(|m| m.point.clone()).collect();
        self.model = train_ocs_distances(&points, &d, params.sigma, params.nu)?;
        self.cache = DistanceCache {
            seqs: self.members.iter().map(|m| m.seq).collect(),
            d,
        };
        self.trained_on = self.members.len();
        self.added_since_training = 0;
        self.retrain_count += 1;
        Ok(())
    }

    fn member_distances<M: PointDistance<P> + Sync>(&self, metric: &M) -> Result<DMatrix<f64>> {
        let n = self.members.len();
        let old: HashMap<u64, usize> = self
            .cache
            .seqs
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i))
            .collect();
        let slot: Vec<Option<usize>> = self
            .members
            .iter()
            .map(|m| old.get(&m.seq).copied())
            .collect();
        let row = |i: usize| -> Result<Vec<f64>> {
            ((i + 1)..n)
                .map(|j| match (slot[i], slot[j]) {
                    (Some(a), Some(b)) => Ok(self.cache.d[(a, b)]),
                    _ => metric.distance(&self.members[i].point, &self.members[j].point),
                })
                .collect()
        };
        #[cfg(feature = "parallel")]
        let rows: Vec<Result<Vec<f64>>> = {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(row).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Result<Vec<f64>>> = (0..n).map(row).collect();
        let mut d = DMatrix::zeros(n, n);
        for (i, r) in rows.into_iter().enumerate() {
            for (k, v) in r?.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::numerical(
                        "non-finite distance between class members",
                    ));
                }
                d[(i, i + 1 + k)] = v;
                d[(i + 1 + k, i)] = v;
            }
        }
        Ok(d)
    }

    fn push(&mut self, member: Member<P>, capacity: usize) {
        self.members.push_back(member);
        while self.members.len() > capacity {
            self.members.pop_front();
        }
        self.added_since_training += 1;
    }

    fn due_for_retraining(&self, growth: f64) -> bool {
        let need = ((growth * self.trained_on as f64).ceil() as usize).max(1);
        self.added_since_training >= need
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> impl Iterator<Item = &P> {
        self.members.iter().map(|m| &m.point)
    }
}

/// Where a processed point ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Assignment {
    Class(usize),
    Candidate,
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assignment::Class(id) => write!(f, "{id}"),
            Assignment::Candidate => f.write_str("candidate"),
        }
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Assignment::Class(id) => s.serialize_u64(*id as u64),
            Assignment::Candidate => s.serialize_str("candidate"),
        }
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Id(usize),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Id(id) => Ok(Assignment::Class(id)),
            Raw::Tag(t) if t == "candidate" => Ok(Assignment::Candidate),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!(
                "unknown assignment {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisEvent {
    /// Index of the point in the monitored stream.
    pub index: usize,
    pub window_start: usize,
    pub assigned_class: Assignment,
    /// Decision score of every class that existed when the point arrived.
    pub scores: BTreeMap<usize, f64>,
    /// Library size after the step.
    pub library_size: usize,
    /// Pool size after the point was added, before any promotion.
    pub pool_size: usize,
    /// Set when this point completed the pool and a new class was trained from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_class: Option<usize>,
}

/// Library of one-class models, class 0 being the normal regime.
///
/// The distance used between points is passed to every call rather than stored, so the same
/// library can be driven with points that are indices into an external archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultLibrary<P> {
    pub params: LibraryParams,
    pub classes: Vec<FaultClass<P>>,
    pool: Vec<Member<P>>,
    seen: u64,
}

/// Things a point needs for its event record.
pub trait WindowPosition {
    fn window_start(&self) -> usize;
}

impl WindowPosition for crate::reservoir::ModelPoint {
    fn window_start(&self) -> usize {
        self.window_start
    }
}

impl WindowPosition for usize {
    fn window_start(&self) -> usize {
        *self
    }
}

impl<P> FaultLibrary<P>
where
    P: Clone + Sync + WindowPosition,
{
    /// Trains the normal class on `normal`.
    pub fn init<M: PointDistance<P> + Sync>(
        normal: &[P],
        params: LibraryParams,
        metric: &M,
    ) -> Result<Self> {
        params.validate()?;
        if normal.len() < 2 {
            return Err(Error::invalid(format!(
                "the normal class needs at least 2 points, got {}",
                normal.len()
            )));
        }
        let mut members: VecDeque<Member<P>> = normal
            .iter()
            .enumerate()
            .map(|(i, p)| Member {
                seq: i as u64,
                point: p.clone(),
            })
            .collect();
        // train on every normal point, then keep only the newest ones as the buffer
        let mut class = FaultClass::train(0, members.clone(), &params, metric)?;
        while members.len() > params.buffer_capacity {
            members.pop_front();
        }
        if class.members.len() != members.len() {
            class.members = members;
            class.trained_on = class.members.len();
        }
        Ok(Self {
            params,
            classes: vec![class],
            pool: Vec::new(),
            seen: normal.len() as u64,
        })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    /// Points processed so far, including the normal training set.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Processes one point: assign it to the newest accepting class or pool it.
    pub fn step<M: PointDistance<P> + Sync>(
        &mut self,
        metric: &M,
        p: P,
        index: usize,
    ) -> Result<DiagnosisEvent> {
        let seq = self.seen;
        self.seen += 1;
        let mut scores = BTreeMap::new();
        let mut accepting = None;
        for class in &self.classes {
            let d = class.model.decide(metric, &p)?;
            if !d.score.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite score for class {}",
                    class.id
                )));
            }
            scores.insert(class.id, d.score);
            if d.is_inlier {
                // later classes win ties
                accepting = Some(class.id);
            }
        }
        let window_start = p.window_start();
        let member = Member { seq, point: p };

        if let Some(id) = accepting {
            let params = self.params.clone();
            let class = &mut self.classes[id];
            class.push(member, params.buffer_capacity);
            let allowed = id != 0 || params.update_normal;
            if allowed && class.due_for_retraining(params.retrain_growth) {
                if let Err(e) = class.retrain(&params, metric) {
                    log::warn!("retraining class {id} failed, keeping the previous model: {e}");
                }
            }
            self.pool.clear();
            return Ok(DiagnosisEvent {
                index,
                window_start,
                assigned_class: Assignment::Class(id),
                scores,
                library_size: self.classes.len(),
                pool_size: 0,
                new_class: None,
            });
        }

        self.pool.push(member);
        let pool_size = self.pool.len();
        let mut new_class = None;
        if pool_size > self.params.pool_threshold() {
            let id = self.classes.len();
            let members: VecDeque<Member<P>> = self.pool.drain(..).collect();
            let mut members = members;
            while members.len() > self.params.buffer_capacity {
                members.pop_front();
            }
            match FaultClass::train(id, members, &self.params, metric) {
                Ok(class) => {
                    log::debug!(
                        "new class {id} from {pool_size} pooled points ending at {window_start}"
                    );
                    self.classes.push(class);
                    new_class = Some(id);
                }
                Err(e) => {
                    log::warn!("training a new class from the pool failed, pool discarded: {e}")
                }
            }
        }
        Ok(DiagnosisEvent {
            index,
            window_start,
            assigned_class: Assignment::Candidate,
            scores,
            library_size: self.classes.len(),
            pool_size,
            new_class,
        })
    }
}

/// Initialises on the first `t_normal` points and steps through the rest in order.
pub fn run_incremental<P, M>(
    points: &[P],
    t_normal: usize,
    params: LibraryParams,
    metric: &M,
) -> Result<(FaultLibrary<P>, Vec<DiagnosisEvent>)>
where
    P: Clone + Sync + WindowPosition,
    M: PointDistance<P> + Sync,
{
    if t_normal >= points.len() {
        return Err(Error::invalid(format!(
            "t_normal ({t_normal}) must be smaller than the number of points ({})",
            points.len()
        )));
    }
    let mut lib = FaultLibrary::init(&points[..t_normal], params, metric)?;
    let mut events = Vec::with_capacity(points.len() - t_normal);
    for (i, p) in points.iter().enumerate().skip(t_normal) {
        events.push(lib.step(metric, p.clone(), i)?);
    }
    Ok((lib, events))
}
