//! ν one-class SVM on a precomputed `exp(-σ d)` kernel.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modelspace::{kernel_gram, pairwise_with, PointDistance};

/// Stopping tolerance on the maximal KKT violation.
pub const KKT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100_000;

/// Scores within the solver tolerance of zero lie on the boundary and count as inliers.
pub const BOUNDARY_TOLERANCE: f64 = KKT_TOLERANCE;

/// Solution of `min ½ αᵀKα` s.t. `0 ≤ α ≤ 1/(νn)`, `Σα = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Gradient `Kα` at the solution.
    pub gradient: Vec<f64>,
    /// The box bound `1/(νn)`.
    pub upper_bound: f64,
}

/// SMO with maximal-violating-pair selection.
pub fn train_ocs_gram(k: &DMatrix<f64>, nu: f64) -> Result<DualSolution> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::dims("Gram matrix must be square"));
    }
    if n < 2 {
        return Err(Error::invalid(format!(
            "one-class training needs at least 2 points, got {n}"
        )));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::invalid(format!("nu must lie in (0, 1], got {nu}")));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("Gram matrix has non-finite entries"));
    }
    let c = 1.0 / (nu * n as f64);

    // Fill the first ⌊νn⌋ coefficients to the bound and put the remainder on the next one.
    let mut alpha = vec![0.0; n];
    let mut left: f64 = 1.0;
    for a in alpha.iter_mut() {
        let v = left.min(c);
        *a = v;
        left -= v;
        if left <= 0.0 {
            break;
        }
    }
    let mut grad: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[(i, j)] * alpha[j]).sum())
        .collect();

    let mut iterations = 0;
    loop {
        let (mut up, mut g_up) = (usize::MAX, f64::INFINITY);
        let (mut down, mut g_down) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..n {
            if alpha[t] < c && grad[t] < g_up {
                up = t;
                g_up = grad[t];
            }
            if alpha[t] > 0.0 && grad[t] > g_down {
                down = t;
                g_down = grad[t];
            }
        }
        let violation = g_down - g_up;
        if up == usize::MAX || down == usize::MAX || violation < KKT_TOLERANCE {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                violation,
            });
        }
        iterations += 1;
        let (i, j) = (up, down);
        let curvature = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
        let room = (c - alpha[i]).min(alpha[j]);
        let step = if curvature > 1e-12 {
            (violation / curvature).min(room)
        } else {
            room
        };
        alpha[i] += step;
        alpha[j] -= step;
        // snap to the box so bound tests stay exact
        if c - alpha[i] < 1e-15 * c {
            alpha[i] = c;
        }
        if alpha[j] < 1e-15 * c {
            alpha[j] = 0.0;
        }
        for (t, g) in grad.iter_mut().enumerate() {
            *g += step * (k[(t, i)] - k[(t, j)]);
        }
    }

    let rho = offset(&alpha, &grad, c);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * g).sum::<f64>();
    Ok(DualSolution {
        alpha,
        rho,
        objective,
        iterations,
        gradient: grad,
        upper_bound: c,
    })
}

fn offset(alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let free: Vec<f64> = alpha
        .iter()
        .zip(grad)
        .filter(|(&a, _)| a > 0.0 && a < c)
        .map(|(_, &g)| g)
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    // no free coefficient: midpoint of the feasible interval for ρ
    let lo = alpha
        .iter()
        .zip(grad)
        .filter(|(&a, _)| a >= c)
        .map(|(_, &g)| g)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = alpha
        .iter()
        .zip(grad)
        .filter(|(&a, _)| a <= 0.0)
        .map(|(_, &g)| g)
        .fold(f64::INFINITY, f64::min);
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Trained one-class model. Only support vectors (α > 0) are retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcsModel<P> {
    /// Positions of the support vectors in the training sequence.
    pub support_indices: Vec<usize>,
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub sigma: f64,
    pub nu: f64,
    pub n_train: usize,
    pub reference_points: Vec<P>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub score: f64,
    pub is_inlier: bool,
}

impl<P: Clone> OcsModel<P> {
    /// Builds a model from a dual solution over `points` (in the same order as the Gram).
    pub fn from_solution(points: &[P], sol: &DualSolution, sigma: f64, nu: f64) -> Result<Self> {
        if points.len() != sol.alpha.len() {
            return Err(Error::dims("points and dual coefficients differ in length"));
        }
        let support_indices: Vec<usize> =
            (0..points.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
        Ok(Self {
            alpha: support_indices.iter().map(|&i| sol.alpha[i]).collect(),
            reference_points: support_indices.iter().map(|&i| points[i].clone()).collect(),
            support_indices,
            rho: sol.rho,
            sigma,
            nu,
            n_train: points.len(),
        })
    }

    /// Upper bound `1/(νn)` on every coefficient.
    pub fn upper_bound(&self) -> f64 {
        1.0 / (self.nu * self.n_train as f64)
    }

    /// `Σ α_i exp(-σ d(p, ref_i)) - ρ`, summed in sorted order so the result does not depend on
    /// the order of the reference points.
    pub fn decide<M: PointDistance<P> + ?Sized>(&self, metric: &M, p: &P) -> Result<Decision> {
        let mut terms = Vec::with_capacity(self.alpha.len());
        for (a, r) in self.alpha.iter().zip(&self.reference_points) {
            let d = metric.distance(p, r)?;
            terms.push(a * (-self.sigma * d).exp());
        }
        Ok(self.decide_terms(terms))
    }

    /// Same as [`decide`](Self::decide) with distances to the reference points already known.
    pub fn decide_distances(&self, distances: &[f64]) -> Result<Decision> {
        if distances.len() != self.alpha.len() {
            return Err(Error::dims("one distance per reference point is required"));
        }
        let terms = self
            .alpha
            .iter()
            .zip(distances)
            .map(|(a, d)| a * (-self.sigma * d).exp())
            .collect();
        Ok(self.decide_terms(terms))
    }

    fn decide_terms(&self, mut terms: Vec<f64>) -> Decision {
        terms.sort_by(f64::total_cmp);
        let score = terms.iter().sum::<f64>() - self.rho;
        Decision {
            score,
            is_inlier: score >= -BOUNDARY_TOLERANCE,
        }
    }
}

/// Trains on `points` using `metric` for the kernel distances.
pub fn train_ocs<P, M>(points: &[P], sigma: f64, nu: f64, metric: &M) -> Result<OcsModel<P>>
where
    P: Clone + Sync,
    M: PointDistance<P> + Sync,
{
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "one-class training needs at least 2 points, got {}",
            points.len()
        )));
    }
    let d = pairwise_with(points, metric)?;
    train_ocs_distances(points, &d, sigma, nu)
}

/// Trains on `points` whose pairwise distances are already known.
pub fn train_ocs_distances<P: Clone>(
    points: &[P],
    distances: &DMatrix<f64>,
    sigma: f64,
    nu: f64,
) -> Result<OcsModel<P>> {
    if distances.shape() != (points.len(), points.len()) {
        return Err(Error::dims(
            "distance matrix does not match the training points",
        ));
    }
    let k = kernel_gram(distances, sigma)?;
    let sol = train_ocs_gram(&k, nu)?;
    OcsModel::from_solution(points, &sol, sigma, nu)
}

/// Decision scores of every training point, from a solution's gradient.
pub fn training_scores(sol: &DualSolution) -> Vec<f64> {
    sol.gradient.iter().map(|g| g - sol.rho).collect()
}

/// Fraction of training points scored as outliers.
pub fn training_outlier_fraction(sol: &DualSolution) -> f64 {
    let scores = training_scores(sol);
    scores.iter().filter(|&&s| s < -BOUNDARY_TOLERANCE).count() as f64 / scores.len() as f64
}

/// `σ ∈ {2⁻¹⁰, 2⁻⁸, …, 2⁴}`.
pub fn default_sigma_grid() -> Vec<f64> {
    (-5..=2).map(|e| 2f64.powi(2 * e)).collect()
}

pub fn default_nu_grid() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub sigma: f64,
    pub nu: f64,
    /// Held-out false-alarm rate averaged over folds.
    pub far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSelection {
    pub sigma: f64,
    pub nu: f64,
    pub folds: usize,
    pub n_points: usize,
    /// Every evaluated grid cell, σ-major.
    pub cells: Vec<CvCell>,
}

/// Contiguous fold boundaries; the last fold absorbs the remainder.
pub fn fold_ranges(n: usize, folds: usize) -> Vec<std::ops::Range<usize>> {
    let size = n / folds.max(1);
    (0..folds)
        .map(|f| {
            let end = if f + 1 == folds { n } else { (f + 1) * size };
            f * size..end
        })
        .collect()
}

/// Blocked cross-validation of `(σ, ν)` on normal points.
///
/// Picks the cell minimising `|FAR - ν|`, then FAR, then σ, then ν.
pub fn select_params<P, M>(
    points: &[P],
    sigma_grid: &[f64],
    nu_grid: &[f64],
    folds: usize,
    metric: &M,
) -> Result<ParamSelection>
where
    P: Sync,
    M: PointDistance<P> + Sync,
{
    if sigma_grid.is_empty() || nu_grid.is_empty() {
        return Err(Error::invalid("parameter grids must not be empty"));
    }
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if points.len() < 2 * folds {
        return Err(Error::invalid(format!(
            "{} points cannot be split into {folds} folds of at least 2",
            points.len()
        )));
    }
    let d = pairwise_with(points, metric)?;
    select_params_distances(&d, sigma_grid, nu_grid, folds)
}

/// [`select_params`] on a precomputed distance matrix.
pub fn select_params_distances(
    d: &DMatrix<f64>,
    sigma_grid: &[f64],
    nu_grid: &[f64],
    folds: usize,
) -> Result<ParamSelection> {
    let n = d.nrows();
    if sigma_grid.is_empty() || nu_grid.is_empty() {
        return Err(Error::invalid("parameter grids must not be empty"));
    }
    if folds < 2 || n < 2 * folds {
        return Err(Error::invalid(format!(
            "{n} points cannot be split into {folds} folds of at least 2"
        )));
    }
    if let Some(nu) = nu_grid.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::invalid(format!("nu must lie in (0, 1], got {nu}")));
    }
    let ranges = fold_ranges(n, folds);
    let grid: Vec<(f64, f64)> = sigma_grid
        .iter()
        .flat_map(|&s| nu_grid.iter().map(move |&v| (s, v)))
        .collect();

    let eval = |&(sigma, nu): &(f64, f64)| -> Result<CvCell> {
        let k = kernel_gram(d, sigma)?;
        let mut far = 0.0;
        for held in &ranges {
            let train: Vec<usize> = (0..n).filter(|i| !held.contains(i)).collect();
            let kt = k.select_rows(train.iter()).select_columns(train.iter());
            let sol = train_ocs_gram(&kt, nu)?;
            let mut rejected = 0;
            for h in held.clone() {
                let score: f64 = train
                    .iter()
                    .zip(&sol.alpha)
                    .filter(|(_, &a)| a > 0.0)
                    .map(|(&t, &a)| a * k[(h, t)])
                    .sum::<f64>()
                    - sol.rho;
                if score < -BOUNDARY_TOLERANCE {
                    rejected += 1;
                }
            }
            far += rejected as f64 / held.len() as f64;
        }
        Ok(CvCell {
            sigma,
            nu,
            far: far / ranges.len() as f64,
        })
    };

    #[cfg(feature = "parallel")]
    let cells: Vec<Result<CvCell>> = {
        use rayon::prelude::*;
        grid.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<Result<CvCell>> = grid.iter().map(eval).collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;

    let best = cells
        .iter()
        .min_by(|a, b| {
            (a.far - a.nu)
                .abs()
                .total_cmp(&(b.far - b.nu).abs())
                .then(a.far.total_cmp(&b.far))
                .then(a.sigma.total_cmp(&b.sigma))
                .then(a.nu.total_cmp(&b.nu))
        })
        .expect("grid is non-empty");
    Ok(ParamSelection {
        sigma: best.sigma,
        nu: best.nu,
        folds,
        n_points: n,
        cells: cells.clone(),
    })
}
