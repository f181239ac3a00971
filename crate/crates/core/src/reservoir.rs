//! Cycle reservoir with jumps, state driving, ridge readouts and rolling-window model points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_matrix;
use crate::signals::MimoSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReservoirConfig {
    /// Number of reservoir units `N`.
    pub size: usize,
    pub cycle_weight: f64,
    pub jump_weight: f64,
    pub jump_length: usize,
    /// Magnitude `v` shared by every input weight.
    pub input_weight: f64,
    /// Leading states excluded from every fit.
    pub washout: usize,
    /// Ridge penalty on `W` (the bias is never penalised).
    pub ridge: f64,
    /// Reservoir states kept per window for sampled distances.
    pub sample_size: usize,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            size: 25,
            cycle_weight: 0.7,
            jump_weight: 0.3,
            jump_length: 3,
            input_weight: 0.5,
            washout: 50,
            ridge: 1e-6,
            sample_size: 50,
        }
    }
}

const PI_DECIMALS: &str = concat!(
    "1415926535897932384626433832795028841971693993751058209749445923078164062862089986280348253421170679",
    "8214808651328230664709384460955058223172535940812848111745028410270193852110555964462294895493038196",
    "4428810975665933446128475648233786783165271201909145648566923460348610454326648213393607260249141273",
    "7245870066063155881748815209209628292540917153643678925903600113305305488204665213841469519415116094",
    "3305727036575959195309218611738193261179310511854807446237996274956735188575272489122793818301194912",
    "9833673362440656643086021394946395224737190702179860943702770539217176293176752384674818467669405132",
    "0005681271452635608277857713427577896091736371787214684409012249534301465495853710507922796892589235",
    "4201995611212902196086403441815981362977477130996051870721134999999837297804995105973173281609631859",
    "5024459455346908302642522308253344685035261931188171010003137838752886587533208381420617177669147303",
    "5982534904287554687311595628638823537875937519577818577805321712268066130019278766111959092164201989",
);

/// Sign of the `k`-th input weight: negative when the `k`-th decimal digit of π is below 5.
/// Indices past the table wrap around.
pub fn input_sign(k: usize) -> f64 {
    let d = PI_DECIMALS.as_bytes()[k % PI_DECIMALS.len()] - b'0';
    if d < 5 {
        -1.0
    } else {
        1.0
    }
}

/// Fixed reservoir: unidirectional cycle, bidirectional jumps, sign-patterned inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CrjReservoir {
    pub config: ReservoirConfig,
    /// `N x N`, row = receiving unit.
    pub recurrent: DMatrix<f64>,
    /// `N x D` for a drive vector of length `D`.
    pub input: DMatrix<f64>,
    pub spectral_radius: f64,
}

impl CrjReservoir {
    pub fn build(config: &ReservoirConfig, input_dim: usize) -> Result<Self> {
        let n = config.size;
        let (rc, rj, l, v) = (
            config.cycle_weight,
            config.jump_weight,
            config.jump_length,
            config.input_weight,
        );
        if n < 3 {
            return Err(Error::invalid(format!(
                "reservoir needs at least 3 units, got {n}"
            )));
        }
        if !(0.0..1.0).contains(&rc) || !(0.0..1.0).contains(&rj) {
            return Err(Error::invalid(format!(
                "cycle and jump weights must lie in [0, 1), got {rc} and {rj}"
            )));
        }
        if l < 2 || l >= n {
            return Err(Error::invalid(format!(
                "jump length must satisfy 2 <= l < N, got {l}"
            )));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!(
                "input weight must be positive, got {v}"
            )));
        }
        if input_dim == 0 {
            return Err(Error::invalid("reservoir needs at least one input"));
        }
        let mut recurrent = DMatrix::zeros(n, n);
        for i in 0..n {
            recurrent[(i, (i + n - 1) % n)] = rc;
        }
        // jumps link units 0, l, 2l, ...; the last one wraps to unit 0 only when l divides N
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in (0..n).step_by(l) {
            let j = if i + l < n {
                i + l
            } else if i + l == n {
                0
            } else {
                break;
            };
            if j != i && !pairs.contains(&(j, i)) {
                pairs.push((i, j));
            }
        }
        for (i, j) in pairs {
            recurrent[(i, j)] = rj;
            recurrent[(j, i)] = rj;
        }
        let input = DMatrix::from_fn(n, input_dim, |r, c| v * input_sign(r * input_dim + c));
        let spectral_radius = recurrent
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if spectral_radius >= 1.0 {
            return Err(Error::invalid(format!(
                "recurrent matrix has spectral radius {spectral_radius:.4} >= 1"
            )));
        }
        Ok(Self {
            config: config.clone(),
            recurrent,
            input,
            spectral_radius,
        })
    }

    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn input_dim(&self) -> usize {
        self.input.ncols()
    }

    /// Runs `x(t) = tanh(R x(t-1) + V d(t))` from a zero state over the whole stream, with drive
    /// `d(t) = (u(t), y(t-1))` and `y(-1) = 0`.
    pub fn drive(&self, stream: &MimoSeries) -> Result<ReservoirStates> {
        let d = stream.n_inputs() + stream.n_outputs();
        if d != self.input_dim() {
            return Err(Error::dims(format!(
                "reservoir expects drive of length {}, stream provides {d}",
                self.input_dim()
            )));
        }
        let n = self.size();
        let t_len = stream.len();
        let mut states = DMatrix::zeros(t_len, n);
        let mut x = DVector::zeros(n);
        let mut drive = DVector::zeros(d);
        let v = stream.n_inputs();
        for t in 0..t_len {
            for j in 0..v {
                drive[j] = stream.inputs[(t, j)];
            }
            for j in 0..stream.n_outputs() {
                drive[v + j] = if t == 0 {
                    0.0
                } else {
                    stream.outputs[(t - 1, j)]
                };
            }
            let pre = &self.recurrent * &x + &self.input * &drive;
            x = pre.map(f64::tanh);
            states.set_row(t, &x.transpose());
        }
        Ok(ReservoirStates {
            states,
            washout: self.config.washout.min(t_len),
        })
    }
}

/// `T x N` activations; rows before `washout` are unusable for fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirStates {
    pub states: DMatrix<f64>,
    pub washout: usize,
}

/// Affine readout `f(x) = W x + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// `O x N`.
    #[serde(with = "serde_matrix")]
    pub w: DMatrix<f64>,
    pub a: Vec<f64>,
}

impl ReadoutModel {
    pub fn new(w: DMatrix<f64>, a: Vec<f64>) -> Result<Self> {
        if w.nrows() != a.len() {
            return Err(Error::dims(format!(
                "W has {} rows, a has {}",
                w.nrows(),
                a.len()
            )));
        }
        if w.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical("readout has non-finite entries"));
        }
        Ok(Self { w, a })
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn size(&self) -> usize {
        self.w.ncols()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs())
            .map(|o| self.a[o] + self.w.row(o).iter().zip(x).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    /// Flattened parameters `(W row-major, a)`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.w.len() + self.a.len());
        for r in 0..self.w.nrows() {
            p.extend(self.w.row(r).iter().copied());
        }
        p.extend(&self.a);
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutFit {
    pub model: ReadoutModel,
    /// Residual mean squared error over target variance, averaged over outputs.
    pub nmse: f64,
}

/// Ridge fit of `W x(t) + a ~ y(t)` with an unpenalised bias.
///
/// Solved by QR on the stacked system `[X 1; sqrt(λ) I 0] β = [Y; 0]`.
pub fn fit_readout(
    states: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    ridge: f64,
) -> Result<ReadoutFit> {
    let (m, n) = states.shape();
    let o = targets.ncols();
    if targets.nrows() != m {
        return Err(Error::dims(format!(
            "{m} state rows but {} target rows",
            targets.nrows()
        )));
    }
    if m < n + 1 {
        return Err(Error::invalid(format!(
            "readout fit needs at least {} rows, got {m}",
            n + 1
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge penalty must be >= 0, got {ridge}"
        )));
    }
    let extra = if ridge > 0.0 { n } else { 0 };
    let mut a = DMatrix::zeros(m + extra, n + 1);
    a.view_mut((0, 0), (m, n)).copy_from(states);
    a.view_mut((0, n), (m, 1)).fill(1.0);
    let sq = ridge.sqrt();
    for i in 0..extra {
        a[(m + i, i)] = sq;
    }
    let mut b = DMatrix::zeros(m + extra, o);
    b.view_mut((0, 0), (m, o)).copy_from(targets);

    let qr = a.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if r.diagonal()
        .iter()
        .any(|v| v.abs() <= 1e-12 * rmax.max(f64::MIN_POSITIVE))
    {
        return Err(Error::numerical(
            "readout normal equations are rank deficient; use a ridge penalty > 0",
        ));
    }
    qr.q_tr_mul(&mut b);
    let top = b.rows(0, n + 1).into_owned();
    let beta = r
        .solve_upper_triangular(&top)
        .ok_or_else(|| Error::numerical("triangular solve failed in readout fit"))?;

    let w = beta.rows(0, n).transpose();
    let bias: Vec<f64> = beta.row(n).iter().copied().collect();
    let model = ReadoutModel::new(w, bias)?;

    let mut nmse = 0.0;
    for c in 0..o {
        let y = targets.column(c);
        let mean = y.mean();
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
        let mse = (0..m)
            .map(|t| {
                let pred = model.a[c] + model.w.row(c).dot(&states.row(t));
                (pred - y[t]).powi(2)
            })
            .sum::<f64>()
            / m as f64;
        nmse += if var > 1e-300 { mse / var } else { mse };
    }
    Ok(ReadoutFit {
        model,
        nmse: nmse / o as f64,
    })
}

/// A readout fitted on one window plus reservoir activations sampled from that window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub window_start: usize,
    pub readout: ReadoutModel,
    /// `m_s x N`; zero rows when no sample was kept.
    #[serde(
        default = "empty_sample",
        with = "serde_matrix",
        skip_serializing_if = "is_empty_sample"
    )]
    pub state_sample: DMatrix<f64>,
}

fn empty_sample() -> DMatrix<f64> {
    DMatrix::zeros(0, 0)
}

fn is_empty_sample(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0
}

impl ModelPoint {
    pub fn has_sample(&self) -> bool {
        self.state_sample.nrows() > 0
    }
}

/// Rows of a window used for fitting: `[max(start, washout), start + window)`.
pub fn usable_rows(start: usize, window: usize, washout: usize) -> std::ops::Range<usize> {
    start.max(washout)..start + window
}

/// Evenly spaced rows (every `len / sample_size`-th, at most `sample_size`) of the usable range.
pub fn sample_rows(start: usize, window: usize, washout: usize, sample_size: usize) -> Vec<usize> {
    let rows = usable_rows(start, window, washout);
    let len = rows.len();
    if len == 0 || sample_size == 0 {
        return Vec::new();
    }
    let step = (len / sample_size).max(1);
    rows.step_by(step).take(sample_size).collect()
}

pub fn window_starts(len: usize, window: usize, stride: usize) -> Vec<usize> {
    if window == 0 || stride == 0 || len < window {
        return Vec::new();
    }
    (0..=len - window).step_by(stride).collect()
}

/// Output of [`window_models`] with the shared state matrix kept for archiving.
#[derive(Debug, Clone)]
pub struct WindowFit {
    pub states: ReservoirStates,
    pub points: Vec<ModelPoint>,
    pub nmse: Vec<f64>,
}

/// One model point per window position; the reservoir is driven once over the whole stream.
pub fn window_models(
    stream: &MimoSeries,
    window: usize,
    stride: usize,
    config: &ReservoirConfig,
) -> Result<Vec<ModelPoint>> {
    Ok(window_fit(stream, window, stride, config)?.points)
}

pub fn window_fit(
    stream: &MimoSeries,
    window: usize,
    stride: usize,
    config: &ReservoirConfig,
) -> Result<WindowFit> {
    let n = config.size;
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if window < n + 1 {
        return Err(Error::invalid(format!(
            "window of {window} steps is shorter than the reservoir size + 1 ({})",
            n + 1
        )));
    }
    if stream.len() < window {
        return Err(Error::invalid(format!(
            "stream of {} steps is shorter than the window ({window})",
            stream.len()
        )));
    }
    if config.washout + n + 1 > window {
        return Err(Error::invalid(format!(
            "window {window} leaves fewer than {} usable rows after washout {}",
            n + 1,
            config.washout
        )));
    }
    if config.sample_size == 0 {
        return Err(Error::invalid("state sample size must be at least 1"));
    }
    let res = CrjReservoir::build(config, stream.n_inputs() + stream.n_outputs())?;
    let states = res.drive(stream)?;
    let starts = window_starts(stream.len(), window, stride);

    let fit_one = |&start: &usize| -> Result<(ModelPoint, f64)> {
        let rows = usable_rows(start, window, states.washout);
        let x = states.states.rows(rows.start, rows.len()).into_owned();
        let y = stream.outputs.rows(rows.start, rows.len()).into_owned();
        let fit = fit_readout(&x, &y, config.ridge)?;
        let picks = sample_rows(start, window, states.washout, config.sample_size);
        let sample = states.states.select_rows(picks.iter());
        Ok((
            ModelPoint {
                window_start: start,
                readout: fit.model,
                state_sample: sample,
            },
            fit.nmse,
        ))
    };

    #[cfg(feature = "parallel")]
    let fitted: Vec<Result<(ModelPoint, f64)>> = {
        use rayon::prelude::*;
        starts.par_iter().map(fit_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fitted: Vec<Result<(ModelPoint, f64)>> = starts.iter().map(fit_one).collect();

    let mut points = Vec::with_capacity(fitted.len());
    let mut nmse = Vec::with_capacity(fitted.len());
    for f in fitted {
        let (p, e) = f?;
        points.push(p);
        nmse.push(e);
    }
    Ok(WindowFit {
        states,
        points,
        nmse,
    })
}

/// Compact on-disk form of a [`WindowFit`]: the state matrix is stored once and each point's
/// sample is rebuilt from its window position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive {
    pub window: usize,
    pub stride: usize,
    pub washout: usize,
    pub sample_size: usize,
    #[serde(with = "serde_matrix")]
    pub states: DMatrix<f64>,
    pub points: Vec<ArchivedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedPoint {
    pub window_start: usize,
    pub readout: ReadoutModel,
    pub nmse: f64,
}

impl ModelArchive {
    pub fn new(fit: &WindowFit, window: usize, stride: usize, sample_size: usize) -> Self {
        Self {
            window,
            stride,
            washout: fit.states.washout,
            sample_size,
            states: fit.states.states.clone(),
            points: fit
                .points
                .iter()
                .zip(&fit.nmse)
                .map(|(p, &nmse)| ArchivedPoint {
                    window_start: p.window_start,
                    readout: p.readout.clone(),
                    nmse,
                })
                .collect(),
        }
    }

    pub fn model_points(&self) -> Result<Vec<ModelPoint>> {
        self.points
            .iter()
            .map(|p| {
                let rows = sample_rows(p.window_start, self.window, self.washout, self.sample_size);
                if rows.last().is_some_and(|&r| r >= self.states.nrows()) {
                    return Err(Error::dims(format!(
                        "window at {} runs past the archived states",
                        p.window_start
                    )));
                }
                Ok(ModelPoint {
                    window_start: p.window_start,
                    readout: p.readout.clone(),
                    state_sample: self.states.select_rows(rows.iter()),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::gen_narma;

    fn cfg(n: usize, rc: f64, rj: f64, l: usize) -> ReservoirConfig {
        ReservoirConfig {
            size: n,
            cycle_weight: rc,
            jump_weight: rj,
            jump_length: l,
            ..Default::default()
        }
    }

    #[test]
    fn crj_adjacency_n4() {
        let r = CrjReservoir::build(&cfg(4, 0.5, 0.2, 2), 1).unwrap();
        // 1-based (row, col) cycle entries (1,4),(2,1),(3,2),(4,3); jump {1,3}
        let mut expect = DMatrix::zeros(4, 4);
        expect[(0, 3)] = 0.5;
        expect[(1, 0)] = 0.5;
        expect[(2, 1)] = 0.5;
        expect[(3, 2)] = 0.5;
        expect[(0, 2)] = 0.2;
        expect[(2, 0)] = 0.2;
        assert_eq!(r.recurrent, expect);
    }

    #[test]
    fn crj_n25_jumps() {
        let r = CrjReservoir::build(&ReservoirConfig::default(), 2).unwrap();
        let jumps: Vec<(usize, usize)> = (0..25)
            .flat_map(|i| (0..25).map(move |j| (i, j)))
            .filter(|&(i, j)| r.recurrent[(i, j)] == 0.3)
            .collect();
        assert_eq!(jumps.len(), 16);
        assert!(jumps.contains(&(0, 3)) && jumps.contains(&(24, 21)));
        assert!(r.spectral_radius < 1.0);
    }

    #[test]
    fn crj_zero_weights_and_determinism() {
        let c = cfg(6, 0.0, 0.0, 2);
        let a = CrjReservoir::build(&c, 3).unwrap();
        let b = CrjReservoir::build(&c, 3).unwrap();
        assert!(a.recurrent.iter().all(|&v| v == 0.0));
        assert_eq!(a, b);
    }

    #[test]
    fn crj_rejects_bad_parameters() {
        assert!(CrjReservoir::build(&cfg(5, 0.5, 0.2, 5), 1).is_err());
        assert!(CrjReservoir::build(&cfg(5, 0.5, 0.2, 1), 1).is_err());
        assert!(CrjReservoir::build(&cfg(5, -0.1, 0.2, 2), 1).is_err());
        assert!(CrjReservoir::build(&cfg(5, 1.0, 0.2, 2), 1).is_err());
        let mut c = cfg(5, 0.5, 0.2, 2);
        c.input_weight = 0.0;
        assert!(CrjReservoir::build(&c, 1).is_err());
        // radius check
        assert!(CrjReservoir::build(&cfg(25, 0.7, 0.4, 3), 1).is_err());
    }

    #[test]
    fn input_signs_follow_pi_digits() {
        // 3.14159265 -> digits 1,4,1,5,9,2,6,5
        let s: Vec<f64> = (0..8).map(input_sign).collect();
        assert_eq!(s, vec![-1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0]);
        let r = CrjReservoir::build(&cfg(4, 0.5, 0.2, 2), 2).unwrap();
        assert_eq!(r.input[(0, 0)], -0.5);
        assert_eq!(r.input[(1, 1)], 0.5);
    }

    fn series(inputs: DMatrix<f64>, outputs: DMatrix<f64>) -> MimoSeries {
        let t = outputs.nrows();
        MimoSeries::new(inputs, outputs, vec![0; t], 1.0).unwrap()
    }

    #[test]
    fn zero_drive_gives_zero_states() {
        let r = CrjReservoir::build(&ReservoirConfig::default(), 2).unwrap();
        let s = series(DMatrix::zeros(40, 1), DMatrix::zeros(40, 1));
        let x = r.drive(&s).unwrap();
        assert!(x.states.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn memoryless_reservoir_tracks_constant_drive() {
        let r = CrjReservoir::build(&cfg(5, 0.0, 0.0, 2), 2).unwrap();
        let s = series(
            DMatrix::from_element(10, 1, 0.8),
            DMatrix::from_element(10, 1, -0.3),
        );
        let x = r.drive(&s).unwrap();
        let d = DVector::from_vec(vec![0.8, -0.3]);
        let expect = (&r.input * d).map(f64::tanh);
        for t in 1..10 {
            for i in 0..5 {
                assert_eq!(x.states[(t, i)], expect[i]);
            }
        }
    }

    #[test]
    fn drive_rejects_mismatched_stream() {
        let r = CrjReservoir::build(&ReservoirConfig::default(), 3).unwrap();
        let s = series(DMatrix::zeros(10, 1), DMatrix::zeros(10, 1));
        assert!(r.drive(&s).is_err());
    }

    #[test]
    fn narma_states_bounded() {
        let s = gen_narma(10, 3000, 11).unwrap();
        let r = CrjReservoir::build(&ReservoirConfig::default(), 2).unwrap();
        let x = r.drive(&s).unwrap();
        assert!(x.states.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn exact_affine_targets_are_recovered() {
        let x = DMatrix::from_fn(60, 4, |r, c| {
            (r as f64 * 0.37 * (c + 1) as f64 + c as f64).sin()
        });
        let w = DMatrix::from_row_slice(2, 4, &[0.5, -1.0, 2.0, 0.25, 1.5, 0.0, -0.75, 3.0]);
        let a = [0.3, -2.0];
        let y = DMatrix::from_fn(60, 2, |r, o| a[o] + w.row(o).dot(&x.row(r)));
        let fit = fit_readout(&x, &y, 0.0).unwrap();
        assert!((fit.model.w.clone() - &w).abs().max() < 1e-9);
        assert!((fit.model.a[0] - a[0]).abs() < 1e-9 && (fit.model.a[1] - a[1]).abs() < 1e-9);
        assert!(fit.nmse < 1e-18);
    }

    #[test]
    fn huge_ridge_collapses_to_mean() {
        let x = DMatrix::from_fn(50, 3, |r, c| ((r + 2 * c) as f64 * 0.9).cos());
        let y = DMatrix::from_fn(50, 1, |r, _| (r as f64 * 0.3).sin() + 2.0);
        let fit = fit_readout(&x, &y, 1e14).unwrap();
        assert!(fit.model.w.abs().max() < 1e-10);
        assert!((fit.model.a[0] - y.column(0).mean()).abs() < 1e-9);
    }

    #[test]
    fn rank_deficiency_without_ridge_is_an_error() {
        let mut x = DMatrix::from_fn(40, 3, |r, c| ((r * 3 + c) as f64).sin());
        let col = x.column(0).into_owned();
        x.set_column(2, &col);
        let y = DMatrix::from_fn(40, 1, |r, _| r as f64);
        let err = fit_readout(&x, &y, 0.0).unwrap_err();
        assert!(err.to_string().contains("ridge"));
        assert!(fit_readout(&x, &y, 1e-3).is_ok());
        assert!(fit_readout(&x.rows(0, 3).into_owned(), &y.rows(0, 3).into_owned(), 1.0).is_err());
    }

    #[test]
    fn window_counts() {
        let s = gen_narma(10, 1000, 1).unwrap();
        let c = ReservoirConfig::default();
        let pts = window_models(&s, 500, 1, &c).unwrap();
        assert_eq!(pts.len(), 501);
        assert_eq!(pts.first().unwrap().window_start, 0);
        assert_eq!(pts.last().unwrap().window_start, 500);
        assert_eq!(pts[100].state_sample.shape(), (50, 25));
        let pts = window_models(&s, 200, 200, &c).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(window_models(&s, 25, 1, &c).is_err());
    }

    #[test]
    fn sample_rows_rule() {
        assert_eq!(
            sample_rows(100, 500, 50, 50),
            (100..600).step_by(10).collect::<Vec<_>>()
        );
        let r = sample_rows(0, 500, 50, 50);
        assert_eq!(r.len(), 50);
        assert_eq!(r[0], 50);
        assert_eq!(r[1], 59);
    }

    #[test]
    fn archive_rebuilds_points() {
        let s = gen_narma(10, 700, 2).unwrap();
        let c = ReservoirConfig::default();
        let fit = window_fit(&s, 300, 50, &c).unwrap();
        let arch = ModelArchive::new(&fit, 300, 50, c.sample_size);
        let json = serde_json::to_string(&arch).unwrap();
        let back: ModelArchive = serde_json::from_str(&json).unwrap();
        assert_eq!(back.model_points().unwrap(), fit.points);
    }
}
