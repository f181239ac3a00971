use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_matrix;

/// `Σ_k α_k N(η_k, Σ_k)` over reservoir activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    #[serde(with = "mean_list")]
    pub means: Vec<DVector<f64>>,
    #[serde(with = "cov_list")]
    pub covariances: Vec<DMatrix<f64>>,
}

mod mean_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|m| m.as_slice()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(DVector::from_vec)
            .collect())
    }
}

mod cov_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "serde_matrix")] DMatrix<f64>);

    pub fn serialize<S: Serializer>(v: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|m| Wrap(m.clone())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?
            .into_iter()
            .map(|w| w.0)
            .collect())
    }
}

impl GaussianMixture {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::dims(
                "mixture needs matching, non-empty weight/mean/covariance lists",
            ));
        }
        let n = means[0].len();
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::invalid(
                "mixture weights must be non-negative and sum to one",
            ));
        }
        for (m, c) in means.iter().zip(&covariances) {
            if m.len() != n || c.shape() != (n, n) {
                return Err(Error::dims(
                    "mixture components have inconsistent dimensions",
                ));
            }
            if (c - c.transpose()).abs().max() > 1e-10 * c.abs().max().max(1.0) {
                return Err(Error::invalid("covariance is not symmetric"));
            }
            if c.clone().cholesky().is_none() {
                return Err(Error::numerical("covariance is not positive definite"));
            }
        }
        Ok(Self {
            weights,
            means: means.into_iter().map(DVector::from_vec).collect(),
            covariances,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    /// Mean log-density of the rows of `x`.
    pub fn mean_log_likelihood(&self, x: &DMatrix<f64>) -> Result<f64> {
        let logp = component_log_densities(x, self)?;
        let total: f64 = (0..x.nrows())
            .map(|i| log_sum_exp(logp.row(i).iter().copied()))
            .sum();
        Ok(total / x.nrows() as f64)
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `n x K` matrix of `ln α_k + ln N(x_i | η_k, Σ_k)`.
fn component_log_densities(x: &DMatrix<f64>, g: &GaussianMixture) -> Result<DMatrix<f64>> {
    let (rows, n) = x.shape();
    if n != g.dim() {
        return Err(Error::dims("sample dimension differs from mixture"));
    }
    let mut out = DMatrix::zeros(rows, g.components());
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    for k in 0..g.components() {
        let chol = g.covariances[k]
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numerical("covariance lost positive definiteness"))?;
        let l = chol.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let centred = DMatrix::from_fn(n, rows, |c, r| x[(r, c)] - g.means[k][c]);
        let z = l
            .solve_lower_triangular(&centred)
            .ok_or_else(|| Error::numerical("triangular solve failed"))?;
        let lw = if g.weights[k] > 0.0 {
            g.weights[k].ln()
        } else {
            f64::NEG_INFINITY
        };
        for r in 0..rows {
            let maha = z.column(r).norm_squared();
            out[(r, k)] = lw - 0.5 * (n as f64 * ln2pi + log_det + maha);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmOptions {
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the mean log-likelihood improves by less than this.
    pub tolerance: f64,
    /// Added to every covariance diagonal.
    pub covariance_floor: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iterations: 300,
            tolerance: 1e-10,
            covariance_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub mixture: GaussianMixture,
    /// Mean log-likelihood after each M-step.
    pub log_likelihood: Vec<f64>,
}

/// EM from a seeded k-means++ start. Rows of `samples` are observations.
pub fn fit_gmm(samples: &DMatrix<f64>, k: usize, opts: &GmmOptions) -> Result<GmmFit> {
    let (rows, n) = samples.shape();
    if k == 0 {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if rows < k * (n + 1) {
        return Err(Error::invalid(format!(
            "{rows} samples cannot support {k} components in {n} dimensions (need {})",
            k * (n + 1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let centres = kmeans_pp(samples, k, &mut rng);
    // hard assignment to the nearest centre as the first responsibilities
    let mut resp = DMatrix::zeros(rows, k);
    for i in 0..rows {
        let best = (0..k)
            .min_by(|&a, &b| {
                let da = (samples.row(i).transpose() - &centres[a]).norm_squared();
                let db = (samples.row(i).transpose() - &centres[b]).norm_squared();
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        resp[(i, best)] = 1.0;
    }
    let mut mixture = m_step(samples, &resp, None, opts.covariance_floor)?;
    let mut trace = Vec::new();
    for _ in 0..opts.max_iterations {
        let logp = component_log_densities(samples, &mixture)?;
        let mut ll = 0.0;
        for i in 0..rows {
            let lse = log_sum_exp(logp.row(i).iter().copied());
            ll += lse;
            for c in 0..k {
                resp[(i, c)] = (logp[(i, c)] - lse).exp();
            }
        }
        let ll = ll / rows as f64;
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() < opts.tolerance);
        trace.push(ll);
        if converged {
            break;
        }
        mixture = m_step(samples, &resp, Some(&mixture), opts.covariance_floor)?;
    }
    Ok(GmmFit {
        mixture,
        log_likelihood: trace,
    })
}

fn m_step(
    x: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    prev: Option<&GaussianMixture>,
    floor: f64,
) -> Result<GaussianMixture> {
    let (rows, n) = x.shape();
    let k = resp.ncols();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for c in 0..k {
        let nk: f64 = resp.column(c).sum();
        if nk < 1e-12 {
            // dead component: keep its previous location, give it no weight
            let (m, s) = match prev {
                Some(p) => (p.means[c].clone(), p.covariances[c].clone()),
                None => (DVector::zeros(n), DMatrix::identity(n, n)),
            };
            weights.push(0.0);
            means.push(m);
            covs.push(s);
            continue;
        }
        let mean = x.transpose() * resp.column(c) / nk;
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..rows {
            let r = resp[(i, c)];
            if r == 0.0 {
                continue;
            }
            let d = x.row(i).transpose() - &mean;
            cov.ger(r / nk, &d, &d, 1.0);
        }
        for i in 0..n {
            cov[(i, i)] += floor;
        }
        cov = (&cov + cov.transpose()) * 0.5;
        weights.push(nk / rows as f64);
        means.push(mean);
        covs.push(cov);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(GaussianMixture {
        weights,
        means,
        covariances: covs,
    })
}

fn kmeans_pp(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let rows = x.nrows();
    let mut centres: Vec<DVector<f64>> = vec![x.row(rng.random_range(0..rows)).transpose()];
    let mut d2: Vec<f64> = (0..rows)
        .map(|i| (x.row(i).transpose() - &centres[0]).norm_squared())
        .collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = rows - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..rows)
        };
        let c = x.row(pick).transpose();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min((x.row(i).transpose() - &c).norm_squared());
        }
        centres.push(c);
    }
    centres
}
