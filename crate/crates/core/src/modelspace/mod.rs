//! Distances between readout models in function space.
//!
//! For readouts `f_k(x) = W_k x + a_k` on the reservoir cube `[-1, 1]^N` the squared L2 distance
//! under the uniform (Lebesgue) measure is `2^N ((1/3) |ΔW|_F^2 + |Δa|^2)`; the cross term
//! integrates to zero. Downstream code uses the `2^-N` scaled form. Non-uniform measures are
//! handled either by averaging over sampled reservoir states or analytically under a Gaussian
//! mixture.

mod gmm;
mod mds;

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{ModelPoint, ReadoutModel};
use crate::serde_matrix;

pub use gmm::{fit_gmm, GaussianMixture, GmmFit, GmmOptions};
pub use mds::classical_mds;

/// Distance between two points of some learning space.
pub trait PointDistance<P> {
    fn distance(&self, a: &P, b: &P) -> Result<f64>;
}

fn deltas(f1: &ReadoutModel, f2: &ReadoutModel) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if f1.w.shape() != f2.w.shape() || f1.a.len() != f2.a.len() {
        return Err(Error::dims(format!(
            "readouts of shape {:?} and {:?} are not comparable",
            f1.w.shape(),
            f2.w.shape()
        )));
    }
    let dw = &f1.w - &f2.w;
    let da = f1.a.iter().zip(&f2.a).map(|(x, y)| x - y).collect();
    Ok((dw, da))
}

/// `sqrt((1/3) |ΔW|_F^2 + |Δa|^2)`, the square root of the `2^-N` scaled squared distance.
pub fn dist_closed(f1: &ReadoutModel, f2: &ReadoutModel) -> Result<f64> {
    let (dw, da) = deltas(f1, f2)?;
    Ok((dw.norm_squared() / 3.0 + da.iter().map(|v| v * v).sum::<f64>()).sqrt())
}

/// The L2 distance under the uniform measure on `[-1, 1]^N`, without the `2^-N` scaling.
pub fn dist_closed_unscaled(f1: &ReadoutModel, f2: &ReadoutModel) -> Result<f64> {
    let scaled = dist_closed(f1, f2)?;
    Ok((2f64.powi(f1.size() as i32) * scaled * scaled).sqrt())
}

/// Root mean squared output difference over the rows of `sample`.
pub fn dist_sampled(f1: &ReadoutModel, f2: &ReadoutModel, sample: &DMatrix<f64>) -> Result<f64> {
    let (dw, da) = deltas(f1, f2)?;
    if sample.nrows() == 0 {
        return Err(Error::invalid("sampled distance needs at least one sample"));
    }
    if sample.ncols() != dw.ncols() {
        return Err(Error::dims(format!(
            "sample has {} columns, readouts expect {}",
            sample.ncols(),
            dw.ncols()
        )));
    }
    // rows of sample * ΔW^T are ΔW x_i
    let diff = sample * dw.transpose();
    let mut total = 0.0;
    for r in 0..diff.nrows() {
        for (o, d) in da.iter().enumerate() {
            let v = diff[(r, o)] + d;
            total += v * v;
        }
    }
    Ok((total / sample.nrows() as f64).sqrt())
}

/// `L_{μ_i}(f_i, f_j) + L_{μ_j}(f_i, f_j)`, each measure represented by the point's own states.
pub fn dist_symmetric(p: &ModelPoint, q: &ModelPoint) -> Result<f64> {
    if !p.has_sample() || !q.has_sample() {
        return Err(Error::invalid(
            "symmetric sampled distance needs state samples on both model points",
        ));
    }
    Ok(dist_sampled(&p.readout, &q.readout, &p.state_sample)?
        + dist_sampled(&p.readout, &q.readout, &q.state_sample)?)
}

/// Squared L2 distance under a Gaussian mixture:
/// `Σ_k α_k { tr(ΔWᵀΔW Σ_k) + η_kᵀ ΔWᵀΔW η_k + 2 Δaᵀ ΔW η_k + Δaᵀ Δa }`.
pub fn dist_gmm_sq(f1: &ReadoutModel, f2: &ReadoutModel, gmm: &GaussianMixture) -> Result<f64> {
    let (dw, da) = deltas(f1, f2)?;
    if gmm.dim() != dw.ncols() {
        return Err(Error::dims(format!(
            "mixture dimension {} differs from readout size {}",
            gmm.dim(),
            dw.ncols()
        )));
    }
    let gram = dw.transpose() * &dw;
    let da_sq: f64 = da.iter().map(|v| v * v).sum();
    let mut total = 0.0;
    for k in 0..gmm.components() {
        let cov = &gmm.covariances[k];
        let mean = &gmm.means[k];
        let trace = gram.component_mul(cov).sum(); // both symmetric
        let proj = &dw * mean; // ΔW η
        let quad = proj.norm_squared();
        let cross: f64 = da.iter().zip(proj.iter()).map(|(a, p)| a * p).sum();
        total += gmm.weights[k] * (trace + quad + 2.0 * cross + da_sq);
    }
    Ok(total)
}

/// Square root of [`dist_gmm_sq`], clipped at zero.
pub fn dist_gmm(f1: &ReadoutModel, f2: &ReadoutModel, gmm: &GaussianMixture) -> Result<f64> {
    Ok(dist_gmm_sq(f1, f2, gmm)?.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    Closed,
    Sampled,
    SymmetricSampled,
    Gmm,
}

impl std::str::FromStr for DistanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Self::Closed),
            "sampled" => Ok(Self::Sampled),
            "symmetric_sampled" => Ok(Self::SymmetricSampled),
            "gmm" => Ok(Self::Gmm),
            other => Err(Error::invalid(format!("unknown distance method {other:?}"))),
        }
    }
}

impl std::fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Closed => "closed",
            Self::Sampled => "sampled",
            Self::SymmetricSampled => "symmetric_sampled",
            Self::Gmm => "gmm",
        })
    }
}

/// A ready-to-use model distance, carrying whatever measure it was prepared with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Metric {
    Closed {
        scaled: bool,
    },
    Sampled {
        #[serde(with = "serde_matrix")]
        sample: DMatrix<f64>,
    },
    SymmetricSampled,
    Gmm {
        mixture: GaussianMixture,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    /// Cap on the pooled state sample used by `sampled` and `gmm`.
    pub pooled_rows: usize,
    pub gmm_components: usize,
    pub seed: u64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            pooled_rows: 2000,
            gmm_components: 2,
            seed: 0,
        }
    }
}

impl Metric {
    pub fn method(&self) -> DistanceMethod {
        match self {
            Metric::Closed { .. } => DistanceMethod::Closed,
            Metric::Sampled { .. } => DistanceMethod::Sampled,
            Metric::SymmetricSampled => DistanceMethod::SymmetricSampled,
            Metric::Gmm { .. } => DistanceMethod::Gmm,
        }
    }

    pub fn scaled(&self) -> bool {
        matches!(self, Metric::Closed { scaled: true })
    }

    /// Builds the metric for `method`. `sampled` pools the state samples of `points` (evenly
    /// thinned to `pooled_rows`); `gmm` fits a mixture to that pool.
    pub fn prepare(
        method: DistanceMethod,
        points: &[ModelPoint],
        opts: &MetricOptions,
    ) -> Result<Self> {
        match method {
            DistanceMethod::Closed => Ok(Metric::Closed { scaled: true }),
            DistanceMethod::SymmetricSampled => {
                if let Some(p) = points.iter().find(|p| !p.has_sample()) {
                    return Err(Error::invalid(format!(
                        "model point at {} carries no state sample",
                        p.window_start
                    )));
                }
                Ok(Metric::SymmetricSampled)
            }
            DistanceMethod::Sampled | DistanceMethod::Gmm => {
                let pool = pooled_sample(points, opts.pooled_rows)?;
                if method == DistanceMethod::Sampled {
                    Ok(Metric::Sampled { sample: pool })
                } else {
                    let fit = fit_gmm(
                        &pool,
                        opts.gmm_components,
                        &GmmOptions {
                            seed: opts.seed,
                            ..GmmOptions::default()
                        },
                    )?;
                    Ok(Metric::Gmm {
                        mixture: fit.mixture,
                    })
                }
            }
        }
    }
}

fn pooled_sample(points: &[ModelPoint], cap: usize) -> Result<DMatrix<f64>> {
    let rows: Vec<_> = points
        .iter()
        .flat_map(|p| p.state_sample.row_iter())
        .collect();
    if rows.is_empty() || cap == 0 {
        return Err(Error::invalid(
            "no reservoir states available to build a sampled measure",
        ));
    }
    let step = rows.len().div_ceil(cap).max(1);
    let picked: Vec<_> = rows.into_iter().step_by(step).collect();
    Ok(DMatrix::from_rows(&picked))
}

impl PointDistance<ModelPoint> for Metric {
    fn distance(&self, p: &ModelPoint, q: &ModelPoint) -> Result<f64> {
        match self {
            Metric::Closed { scaled: true } => dist_closed(&p.readout, &q.readout),
            Metric::Closed { scaled: false } => dist_closed_unscaled(&p.readout, &q.readout),
            Metric::Sampled { sample } => dist_sampled(&p.readout, &q.readout, sample),
            Metric::SymmetricSampled => dist_symmetric(p, q),
            Metric::Gmm { mixture } => dist_gmm(&p.readout, &q.readout, mixture),
        }
    }
}

/// Plain Euclidean distance between flattened vectors (the signal-space representation).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Euclidean;

impl PointDistance<Vec<f64>> for Euclidean {
    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::dims(format!(
                "vectors of length {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt())
    }
}

/// Symmetric, zero-diagonal matrix of pairwise model distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub entries: DMatrix<f64>,
    pub method: DistanceMethod,
    pub scaled: bool,
    /// Window start of each row, for labelling exports.
    pub window_starts: Vec<usize>,
}

/// Metadata written next to an exported distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSidecar {
    pub method: DistanceMethod,
    pub scaled: bool,
    pub n: usize,
    pub window_starts: Vec<usize>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn sidecar(&self) -> DistanceSidecar {
        DistanceSidecar {
            method: self.method,
            scaled: self.scaled,
            n: self.len(),
            window_starts: self.window_starts.clone(),
        }
    }

    /// Square CSV: a header of window starts, then one row per point led by its window start.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["window_start".to_string()];
        header.extend(self.window_starts.iter().map(|s| s.to_string()));
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.window_starts[i].to_string()];
            rec.extend(self.entries.row(i).iter().map(|v| format!("{v:.16e}")));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, sidecar: &DistanceSidecar) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let n = rd.headers()?.len().saturating_sub(1);
        let mut data = Vec::with_capacity(n * n);
        let mut starts = Vec::with_capacity(n);
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != n + 1 {
                return Err(Error::invalid("ragged distance matrix CSV"));
            }
            starts.push(
                rec[0]
                    .parse::<usize>()
                    .map_err(|e| Error::invalid(format!("bad window start: {e}")))?,
            );
            for v in rec.iter().skip(1) {
                data.push(
                    v.parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad distance {v:?}: {e}")))?,
                );
            }
        }
        if starts.len() != n {
            return Err(Error::invalid(format!(
                "distance CSV has {} rows for {n} columns",
                starts.len()
            )));
        }
        Ok(Self {
            entries: DMatrix::from_row_slice(n, n, &data),
            method: sidecar.method,
            scaled: sidecar.scaled,
            window_starts: starts,
        })
    }
}

/// All pairwise distances under `metric`.
pub fn pairwise(points: &[ModelPoint], metric: &Metric) -> Result<DistanceMatrix> {
    if points.len() < 2 {
        return Err(Error::invalid(
            "pairwise distances need at least two model points",
        ));
    }
    let entries = pairwise_with(points, metric)?;
    Ok(DistanceMatrix {
        entries,
        method: metric.method(),
        scaled: metric.scaled(),
        window_starts: points.iter().map(|p| p.window_start).collect(),
    })
}

/// Pairwise distance matrix for any point type; the upper triangle is computed and mirrored.
pub fn pairwise_with<P, M>(points: &[P], metric: &M) -> Result<DMatrix<f64>>
where
    P: Sync,
    M: PointDistance<P> + Sync,
{
    let n = points.len();
    let row = |i: usize| -> Result<Vec<f64>> {
        ((i + 1)..n)
            .map(|j| metric.distance(&points[i], &points[j]))
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
                return Err(Error::numerical(format!(
                    "non-finite distance between {i} and {}",
                    i + 1 + k
                )));
            }
            d[(i, i + 1 + k)] = v;
            d[(i + 1 + k, i)] = v;
        }
    }
    Ok(d)
}

/// `exp(-σ d)` elementwise.
pub fn kernel_gram(distances: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "kernel width must be positive, got {sigma}"
        )));
    }
    Ok(distances.map(|d| (-sigma * d).exp()))
}
