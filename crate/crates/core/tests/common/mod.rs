#![allow(dead_code)]

use fdi_core::reservoir::ReadoutModel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_readout(rng: &mut ChaCha8Rng, outputs: usize, size: usize) -> ReadoutModel {
    let w = DMatrix::from_fn(outputs, size, |_, _| rng.random_range(-1.0..1.0));
    let a = (0..outputs).map(|_| rng.random_range(-1.0..1.0)).collect();
    ReadoutModel::new(w, a).unwrap()
}

pub fn sq_diff(f1: &ReadoutModel, f2: &ReadoutModel, x: &[f64]) -> f64 {
    f1.eval(x)
        .iter()
        .zip(f2.eval(x))
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Tensor-product midpoint rule for `∫_{[-1,1]^N} |f1(x) - f2(x)|² dx` with `k` cells per axis.
pub fn midpoint_sq_integral(f1: &ReadoutModel, f2: &ReadoutModel, k: usize) -> f64 {
    let n = f1.size();
    let h = 2.0 / k as f64;
    let mids: Vec<f64> = (0..k).map(|i| -1.0 + h * (i as f64 + 0.5)).collect();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut total = 0.0;
    loop {
        for (xi, &ii) in x.iter_mut().zip(&idx) {
            *xi = mids[ii];
        }
        total += sq_diff(f1, f2, &x);
        let mut d = 0;
        loop {
            if d == n {
                return total * h.powi(n as i32);
            }
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Midpoint rule at `k` and `2k` cells combined by Richardson extrapolation, which removes the
/// `h²` error term of the midpoint rule.
pub fn midpoint_richardson(f1: &ReadoutModel, f2: &ReadoutModel, k: usize) -> f64 {
    let coarse = midpoint_sq_integral(f1, f2, k);
    let fine = midpoint_sq_integral(f1, f2, 2 * k);
    (4.0 * fine - coarse) / 3.0
}

/// Euclidean projection onto `{0 ≤ α ≤ c, Σα = 1}` by bisection on the shift.
fn project_capped_simplex(v: &[f64], c: f64) -> Vec<f64> {
    let total = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, c)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - c - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).clamp(0.0, c)).collect()
}

/// Dense reference solver for `min ½ αᵀKα` s.t. `0 ≤ α ≤ 1/(νn)`, `Σα = 1`:
/// accelerated projected gradient with adaptive restart. Returns `(α, objective)`.
pub fn dense_ocs_qp(k: &DMatrix<f64>, nu: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = k.nrows();
    let c = 1.0 / (nu * n as f64);
    let lipschitz = k.clone().symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lipschitz;
    let obj = |a: &DVector<f64>| 0.5 * a.dot(&(k * a));
    let mut x = DVector::from_vec(project_capped_simplex(&vec![1.0 / n as f64; n], c));
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = obj(&x);
    for _ in 0..iterations {
        let g = k * &y;
        let z: Vec<f64> = (0..n).map(|i| y[i] - step * g[i]).collect();
        let x_next = DVector::from_vec(project_capped_simplex(&z, c));
        let f_next = obj(&x_next);
        if f_next > f_prev {
            // restart momentum
            t = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
        x = x_next;
        t = t_next;
        f_prev = f_next;
    }
    let f = obj(&x);
    (x.iter().copied().collect(), f)
}

/// Gaussian points in `dim` dimensions with their Euclidean distance matrix.
pub fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, DMatrix<f64>) {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let d = DMatrix::from_fn(n, n, |i, j| euclid(&pts[i], &pts[j]));
    (pts, d)
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn kernel(d: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    d.map(|v| (-sigma * v).exp())
}

pub fn uniform_cube(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, dim, |_, _| rng.random_range(-1.0..1.0))
}

/// Random SPD matrix `A Aᵀ / dim + 0.1 I`.
pub fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.1
}

/// Draws from `Σ_k w_k N(μ_k, Σ_k)`.
pub fn sample_mixture(
    rng: &mut ChaCha8Rng,
    weights: &[f64],
    means: &[Vec<f64>],
    covs: &[DMatrix<f64>],
    draws: usize,
) -> Vec<Vec<f64>> {
    let chols: Vec<DMatrix<f64>> = covs
        .iter()
        .map(|c| c.clone().cholesky().unwrap().l())
        .collect();
    let dim = means[0].len();
    (0..draws)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut comp = weights.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = k;
                    break;
                }
            }
            let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &chols[comp] * z;
            (0..dim).map(|i| x[i] + means[comp][i]).collect()
        })
        .collect()
}

pub struct SystemRun {
    pub series: fdi_core::signals::MimoSeries,
    pub points: Vec<fdi_core::reservoir::ModelPoint>,
    pub snapshot: fdi_core::pipeline::LibrarySnapshot,
    pub events: Vec<fdi_core::librarian::DiagnosisEvent>,
}

/// Generates, fits and runs the library for `config`.
pub fn run_system(config: &fdi_core::pipeline::RunConfig) -> SystemRun {
    let series = fdi_core::signals::compose_scenario(&config.scenario).unwrap();
    let prepared = config.prepare(&series).unwrap();
    let points =
        fdi_core::reservoir::window_fit(&prepared, config.window, config.stride, &config.reservoir)
            .unwrap()
            .points;
    let (snapshot, events) = config.detect(&points).unwrap();
    SystemRun {
        series,
        points,
        snapshot,
        events,
    }
}

/// Majority label of every event's window.
pub fn event_truth(run: &SystemRun, window: usize) -> Vec<fdi_core::eval::WindowTruth> {
    let starts: Vec<usize> = run.events.iter().map(|e| e.window_start).collect();
    fdi_core::eval::window_truths(&run.series.labels, &starts, window).unwrap()
}
