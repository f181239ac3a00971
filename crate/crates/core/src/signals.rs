//! Seeded generators for the benchmark systems and the scenario composer.
//!
//! Every generator is a pure function of its parameters and seed. A scenario is a sequence of
//! `(regime, length)` segments; regime 0 is the normal system and regime `k >= 1` switches the
//! dynamics to fault `k` while the system state carries over unchanged.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamped multivariate stream: `V` inputs, `O` outputs and a regime label per step.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoSeries {
    /// `T x V`; `V` may be zero for autonomous systems.
    pub inputs: DMatrix<f64>,
    /// `T x O`.
    pub outputs: DMatrix<f64>,
    /// Regime per step, 0 = normal.
    pub labels: Vec<u32>,
    /// Sampling period in seconds.
    pub dt: f64,
}

impl MimoSeries {
    pub fn new(
        inputs: DMatrix<f64>,
        outputs: DMatrix<f64>,
        labels: Vec<u32>,
        dt: f64,
    ) -> Result<Self> {
        let t = labels.len();
        if t == 0 {
            return Err(Error::invalid("series must contain at least one step"));
        }
        if inputs.nrows() != t || outputs.nrows() != t {
            return Err(Error::dims(format!(
                "inputs have {} rows, outputs {} rows, labels {}",
                inputs.nrows(),
                outputs.nrows(),
                t
            )));
        }
        if outputs.ncols() == 0 {
            return Err(Error::invalid("series needs at least one output channel"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if inputs.iter().chain(outputs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical("series contains NaN or infinite values"));
        }
        Ok(Self {
            inputs,
            outputs,
            labels,
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.ncols()
    }

    /// The observation `s_t = (u_1..u_V, y_1..y_O)`.
    pub fn observation(&self, t: usize) -> Vec<f64> {
        self.inputs
            .row(t)
            .iter()
            .chain(self.outputs.row(t).iter())
            .copied()
            .collect()
    }

    /// Run-length encoding of the labels.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = Vec::new();
        for &l in &self.labels {
            match out.last_mut() {
                Some(s) if s.regime == l => s.length += 1,
                _ => out.push(Segment {
                    regime: l,
                    length: 1,
                }),
            }
        }
        out
    }

    /// CSV with header `t,u1..uV,y1..yO,label`; `t` is the time in seconds and floats carry
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n_inputs()).map(|i| format!("u{i}")));
        header.extend((1..=self.n_outputs()).map(|i| format!("y{i}")));
        header.push("label".into());
        wr.write_record(&header)?;
        for t in 0..self.len() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(fmt_f64(t as f64 * self.dt));
            rec.extend(self.observation(t).into_iter().map(fmt_f64));
            rec.push(self.labels[t].to_string());
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let n_in = header.iter().filter(|h| h.starts_with('u')).count();
        let n_out = header.iter().filter(|h| h.starts_with('y')).count();
        if header.get(0) != Some("t") || header.get(header.len() - 1) != Some("label") {
            return Err(Error::invalid(
                "series CSV header must be t,u1..uV,y1..yO,label",
            ));
        }
        if header.len() != n_in + n_out + 2 {
            return Err(Error::invalid("unrecognised columns in series CSV header"));
        }
        let mut times = Vec::new();
        let mut ins = Vec::new();
        let mut outs = Vec::new();
        let mut labels = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad number {:?}: {e}", &rec[i])))
            };
            times.push(parse(0)?);
            for i in 0..n_in {
                ins.push(parse(1 + i)?);
            }
            for i in 0..n_out {
                outs.push(parse(1 + n_in + i)?);
            }
            let l = &rec[1 + n_in + n_out];
            labels.push(
                l.parse::<u32>()
                    .map_err(|e| Error::invalid(format!("bad label {l:?}: {e}")))?,
            );
        }
        let t = labels.len();
        let dt = if t > 1 { times[1] - times[0] } else { 1.0 };
        MimoSeries::new(
            DMatrix::from_row_slice(t, n_in, &ins),
            DMatrix::from_row_slice(t, n_out, &outs),
            labels,
            dt,
        )
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Narma,
    Vanderpol,
    Threetank,
}

impl std::str::FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "narma" => Ok(Self::Narma),
            "vanderpol" => Ok(Self::Vanderpol),
            "threetank" => Ok(Self::Threetank),
            other => Err(Error::invalid(format!("unknown system {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub regime: u32,
    pub length: usize,
}

impl Segment {
    pub fn new(regime: u32, length: usize) -> Self {
        Self { regime, length }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub system: SystemKind,
    pub segments: Vec<Segment>,
    pub seed: u64,
    #[serde(default)]
    pub params: SystemParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    pub narma: NarmaParams,
    pub vanderpol: VanDerPolParams,
    pub threetank: ThreeTankParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NarmaParams {
    /// NARMA order used for each regime id.
    pub orders: Vec<u32>,
    /// A run whose output magnitude exceeds this bound is restarted with the next seed.
    pub divergence_bound: f64,
}

impl Default for NarmaParams {
    fn default() -> Self {
        Self {
            orders: vec![10, 20, 30],
            divergence_bound: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VanDerPolParams {
    pub dt: f64,
    pub noise_variance: f64,
    pub initial: [f64; 2],
    pub fault_gain: f64,
}

impl Default for VanDerPolParams {
    fn default() -> Self {
        Self {
            dt: 0.05,
            noise_variance: 0.01,
            initial: [2.0, 0.0],
            fault_gain: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThreeTankParams {
    /// Euler step / sampling period `T_s` in seconds.
    pub ts: f64,
    /// Tank cross-section in m².
    pub area: f64,
    /// Connecting pipe cross-section `A_p` in m².
    pub pipe_area: f64,
    /// Outflow coefficient shared by every pipe and the leak.
    pub outflow_coeff: f64,
    pub gravity: f64,
    /// Remaining fraction of pump-1 flow under fault 1.
    pub pump1_gain: f64,
    /// Leak hole radius in tank 3 under fault 2 (m).
    pub leak_radius: f64,
    /// Remaining fraction of pump-2 flow under fault 3.
    pub pump2_gain: f64,
    pub initial_levels: [f64; 3],
    pub max_level: f64,
}

impl Default for ThreeTankParams {
    fn default() -> Self {
        Self {
            ts: 1.0,
            area: 1.0,
            pipe_area: 0.1,
            outflow_coeff: 1.0,
            gravity: 9.8,
            pump1_gain: 0.2,
            leak_radius: 0.3,
            pump2_gain: 0.2,
            initial_levels: [8.0, 6.5, 5.0],
            max_level: 10.0,
        }
    }
}

// ---------------------------------------------------------------------------------------------
// NARMA

/// One step of the order-10/20/30 NARMA recurrences: the value `y[t]` given everything before `t`.
/// History before index 0 reads as zero.
pub fn narma_value(order: u32, y: &[f64], u: &[f64], t: usize) -> Result<f64> {
    let n = order as usize;
    let at = |s: &[f64], back: usize| -> f64 {
        if t > back {
            s[t - 1 - back]
        } else {
            0.0
        }
    };
    let y_prev = at(y, 0);
    let hist: f64 = (0..n).map(|i| at(y, i)).sum();
    let drive = at(u, n - 1) * at(u, 0);
    Ok(match order {
        10 => 0.3 * y_prev + 0.05 * y_prev * hist + 1.5 * drive + 0.1,
        20 => (0.3 * y_prev + 0.05 * y_prev * hist + 1.5 * drive + 0.01).tanh() + 0.2,
        30 => 0.2 * y_prev + 0.004 * y_prev * hist + 1.5 * drive + 0.201,
        other => return Err(Error::invalid(format!("unsupported NARMA order {other}"))),
    })
}

/// Single-regime NARMA series: `u` i.i.d. uniform on [0, 0.5), first `order` outputs zero.
pub fn gen_narma(order: u32, length: usize, seed: u64) -> Result<MimoSeries> {
    if ![10, 20, 30].contains(&order) {
        return Err(Error::invalid(format!("unsupported NARMA order {order}")));
    }
    if length < order as usize + 1 {
        return Err(Error::invalid(format!(
            "NARMA-{order} needs at least {} steps",
            order + 1
        )));
    }
    let params = NarmaParams {
        orders: vec![order],
        ..NarmaParams::default()
    };
    narma_scenario(&[Segment::new(0, length)], seed, &params)
}

fn narma_scenario(segments: &[Segment], seed: u64, p: &NarmaParams) -> Result<MimoSeries> {
    let labels = expand_labels(segments);
    let orders: Vec<u32> = labels.iter().map(|&l| p.orders[l as usize]).collect();
    let t_len = labels.len();
    const MAX_RESTARTS: u64 = 100;
    for attempt in 0..MAX_RESTARTS {
        let s = seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let u: Vec<f64> = (0..t_len).map(|_| rng.random_range(0.0..0.5)).collect();
        let mut y = vec![0.0; t_len];
        let warmup = orders[0] as usize;
        let mut diverged = false;
        for t in warmup..t_len {
            y[t] = narma_value(orders[t], &y, &u, t)?;
            if !y[t].is_finite() || y[t].abs() > p.divergence_bound {
                diverged = true;
                break;
            }
        }
        if diverged {
            log::warn!(
                "NARMA run with seed {s} left |y| <= {}; restarting with seed {}",
                p.divergence_bound,
                s.wrapping_add(1)
            );
            continue;
        }
        return MimoSeries::new(
            DMatrix::from_column_slice(t_len, 1, &u),
            DMatrix::from_column_slice(t_len, 1, &y),
            labels,
            1.0,
        );
    }
    Err(Error::numerical(format!(
        "NARMA diverged for {MAX_RESTARTS} consecutive seeds starting at {seed}"
    )))
}

// ---------------------------------------------------------------------------------------------
// Van der Pol

/// Deterministic part of one discrete Van der Pol step under `fault`; noise is added by the caller.
pub fn vanderpol_step(p: &VanDerPolParams, y: [f64; 2], fault: u32) -> [f64; 2] {
    let [y1, y2] = y;
    let dt = p.dt;
    let n1 = y1 + y2 * dt;
    let mut n2 = y2 + y2 * (1.0 - y1 * y1) * dt - y1 * dt;
    n2 += match fault {
        1 => p.fault_gain * y1.sin() * dt,
        2 => p.fault_gain * y1.tanh() * dt,
        // printed without the dt factor
        3 => p.fault_gain * (y1 * y1).cos(),
        _ => 0.0,
    };
    [n1, n2]
}

pub fn gen_vanderpol(
    fault: u32,
    length: usize,
    seed: u64,
    params: &VanDerPolParams,
) -> Result<MimoSeries> {
    validate_vanderpol(params)?;
    if fault > 3 {
        return Err(Error::invalid(format!(
            "Van der Pol fault {fault} is not defined"
        )));
    }
    if length < 2 {
        return Err(Error::invalid("Van der Pol series needs at least 2 steps"));
    }
    vanderpol_scenario(&[Segment::new(fault, length)], seed, params)
}

fn validate_vanderpol(p: &VanDerPolParams) -> Result<()> {
    if !(p.dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {}", p.dt)));
    }
    if !(p.noise_variance >= 0.0) {
        return Err(Error::invalid("noise variance must be non-negative"));
    }
    Ok(())
}

fn vanderpol_scenario(segments: &[Segment], seed: u64, p: &VanDerPolParams) -> Result<MimoSeries> {
    let labels = expand_labels(segments);
    let t_len = labels.len();
    // noise has its own ChaCha stream so it never aliases an input stream drawn from the same seed
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let noise = Normal::new(0.0, p.noise_variance.sqrt())
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
    let mut out = DMatrix::zeros(t_len, 2);
    let mut y = p.initial;
    out[(0, 0)] = y[0];
    out[(0, 1)] = y[1];
    for k in 1..t_len {
        let mut next = vanderpol_step(p, y, labels[k]);
        if p.noise_variance > 0.0 {
            next[1] += noise.sample(&mut rng);
        }
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!(
                "Van der Pol state diverged at step {k}"
            )));
        }
        y = next;
        out[(k, 0)] = y[0];
        out[(k, 1)] = y[1];
    }
    MimoSeries::new(DMatrix::zeros(t_len, 0), out, labels, p.dt)
}

// ---------------------------------------------------------------------------------------------
// Three-tank

/// Pump commands `(u1(k), u2(k))`.
pub fn three_tank_inflow(k: usize, ts: f64) -> [f64; 2] {
    let t = k as f64 * ts;
    [0.2 * (0.3 * t).cos() + 0.3, 0.25 * (0.5 * t).cos() + 0.3]
}

/// One Euler step of the tank1 <-> tank3 <-> tank2 -> out interconnection.
///
/// Each tank's outgoing flows are scaled down when they would remove more water than the tank
/// holds over one step, so levels never go negative and no water is created by clamping.
pub fn three_tank_step(p: &ThreeTankParams, x: [f64; 3], u: [f64; 2], fault: u32) -> [f64; 3] {
    let g2 = 2.0 * p.gravity;
    let pipe = |dh: f64| p.outflow_coeff * p.pipe_area * dh.signum() * (g2 * dh.abs()).sqrt();
    let [x1, x2, x3] = x;
    // signed flows: 1 -> 3, 3 -> 2, 2 -> out, 3 -> leak
    let mut q13 = if x1 == x3 { 0.0 } else { pipe(x1 - x3) };
    let mut q32 = if x3 == x2 { 0.0 } else { pipe(x3 - x2) };
    let mut q20 = p.outflow_coeff * p.pipe_area * (g2 * x2.max(0.0)).sqrt();
    let mut leak = if fault == 2 {
        p.outflow_coeff * std::f64::consts::PI * p.leak_radius.powi(2) * (g2 * x3.max(0.0)).sqrt()
    } else {
        0.0
    };
    let pump1 = u[0] * if fault == 1 { p.pump1_gain } else { 1.0 };
    let pump2 = u[1] * if fault == 3 { p.pump2_gain } else { 1.0 };

    let cap = |level: f64| level.max(0.0) * p.area / p.ts;
    // tank 1 outflow
    let out1 = q13.max(0.0);
    if out1 > cap(x1) {
        q13 *= cap(x1) / out1;
    }
    // tank 3 outflow
    let out3 = (-q13).max(0.0) + q32.max(0.0) + leak;
    if out3 > cap(x3) {
        let s = cap(x3) / out3;
        if q13 < 0.0 {
            q13 *= s;
        }
        if q32 > 0.0 {
            q32 *= s;
        }
        leak *= s;
    }
    // tank 2 outflow
    let out2 = (-q32).max(0.0) + q20;
    if out2 > cap(x2) {
        let s = cap(x2) / out2;
        if q32 < 0.0 {
            q32 *= s;
        }
        q20 *= s;
    }

    let dx1 = pump1 - q13;
    let dx2 = pump2 + q32 - q20;
    let dx3 = q13 - q32 - leak;
    let clamp = |v: f64| v.clamp(0.0, p.max_level);
    let k = p.ts / p.area;
    [
        clamp(x1 + k * dx1),
        clamp(x2 + k * dx2),
        clamp(x3 + k * dx3),
    ]
}

pub fn gen_threetank(
    fault: u32,
    length: usize,
    seed: u64,
    params: &ThreeTankParams,
) -> Result<MimoSeries> {
    if fault > 3 {
        return Err(Error::invalid(format!(
            "three-tank fault {fault} is not defined"
        )));
    }
    if length == 0 {
        return Err(Error::invalid("three-tank series needs at least 1 step"));
    }
    let _ = seed; // noiseless plant
    threetank_scenario(&[Segment::new(fault, length)], params)
}

fn validate_threetank(p: &ThreeTankParams) -> Result<()> {
    let positive = [
        ("ts", p.ts),
        ("area", p.area),
        ("pipe_area", p.pipe_area),
        ("outflow_coeff", p.outflow_coeff),
        ("gravity", p.gravity),
        ("max_level", p.max_level),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!(
                "three-tank {name} must be positive, got {v}"
            )));
        }
    }
    if !(0.0..=1.0).contains(&p.pump1_gain) || !(0.0..=1.0).contains(&p.pump2_gain) {
        return Err(Error::invalid("pump gains must lie in [0, 1]"));
    }
    if !(p.leak_radius > 0.0 && p.leak_radius < 1.0) {
        return Err(Error::invalid("leak radius must lie in (0, 1)"));
    }
    Ok(())
}

fn threetank_scenario(segments: &[Segment], p: &ThreeTankParams) -> Result<MimoSeries> {
    validate_threetank(p)?;
    let labels = expand_labels(segments);
    let t_len = labels.len();
    let mut ins = DMatrix::zeros(t_len, 2);
    let mut outs = DMatrix::zeros(t_len, 3);
    let mut x = p.initial_levels.map(|v| v.clamp(0.0, p.max_level));
    for k in 0..t_len {
        if k > 0 {
            x = three_tank_step(p, x, three_tank_inflow(k - 1, p.ts), labels[k]);
        }
        let u = three_tank_inflow(k, p.ts);
        ins[(k, 0)] = u[0];
        ins[(k, 1)] = u[1];
        for i in 0..3 {
            outs[(k, i)] = x[i];
        }
    }
    MimoSeries::new(ins, outs, labels, p.ts)
}

// ---------------------------------------------------------------------------------------------
// Composition

fn expand_labels(segments: &[Segment]) -> Vec<u32> {
    segments
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.regime, s.length))
        .collect()
}

/// Concatenate regimes into one labelled stream; the fault switches dynamics, not state.
pub fn compose_scenario(spec: &ScenarioSpec) -> Result<MimoSeries> {
    let segs = &spec.segments;
    let first = segs
        .first()
        .ok_or_else(|| Error::invalid("scenario has no segments"))?;
    if first.regime != 0 {
        return Err(Error::invalid(
            "the first scenario segment must be the normal regime 0",
        ));
    }
    if let Some(s) = segs.iter().find(|s| s.length == 0) {
        return Err(Error::invalid(format!(
            "segment for regime {} has zero length",
            s.regime
        )));
    }
    let max_regime = match spec.system {
        SystemKind::Narma => {
            let orders = &spec.params.narma.orders;
            if let Some(o) = orders.iter().find(|o| ![10, 20, 30].contains(*o)) {
                return Err(Error::invalid(format!("unsupported NARMA order {o}")));
            }
            orders.len() as u32
        }
        SystemKind::Vanderpol | SystemKind::Threetank => 4,
    };
    if let Some(s) = segs.iter().find(|s| s.regime >= max_regime) {
        return Err(Error::invalid(format!(
            "regime {} is not defined for {:?}",
            s.regime, spec.system
        )));
    }
    match spec.system {
        SystemKind::Narma => {
            let warmup = spec.params.narma.orders[0] as usize + 1;
            let total: usize = segs.iter().map(|s| s.length).sum();
            if total < warmup {
                return Err(Error::invalid(format!(
                    "NARMA scenario needs at least {warmup} steps"
                )));
            }
            narma_scenario(segs, spec.seed, &spec.params.narma)
        }
        SystemKind::Vanderpol => {
            validate_vanderpol(&spec.params.vanderpol)?;
            vanderpol_scenario(segs, spec.seed, &spec.params.vanderpol)
        }
        SystemKind::Threetank => threetank_scenario(segs, &spec.params.threetank),
    }
}

/// Per-channel affine standardisation fitted on a prefix of the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScaler {
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub output_mean: Vec<f64>,
    pub output_scale: Vec<f64>,
}

impl ChannelScaler {
    /// Mean and standard deviation of each channel over the first `rows` steps. Constant
    /// channels keep unit scale.
    pub fn fit(series: &MimoSeries, rows: usize) -> Result<Self> {
        let rows = rows.min(series.len());
        if rows == 0 {
            return Err(Error::invalid("cannot fit a scaler on zero rows"));
        }
        let stats = |m: &DMatrix<f64>| -> (Vec<f64>, Vec<f64>) {
            (0..m.ncols())
                .map(|c| {
                    let col = m.view((0, c), (rows, 1));
                    let mean = col.mean();
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
                    let sd = var.sqrt();
                    (mean, if sd > 1e-12 { sd } else { 1.0 })
                })
                .unzip()
        };
        let (input_mean, input_scale) = stats(&series.inputs);
        let (output_mean, output_scale) = stats(&series.outputs);
        Ok(Self {
            input_mean,
            input_scale,
            output_mean,
            output_scale,
        })
    }

    pub fn apply(&self, series: &MimoSeries) -> Result<MimoSeries> {
        if series.n_inputs() != self.input_mean.len()
            || series.n_outputs() != self.output_mean.len()
        {
            return Err(Error::dims("scaler channel count differs from the series"));
        }
        let mut inputs = series.inputs.clone();
        for (c, mut col) in inputs.column_iter_mut().enumerate() {
            col.apply(|v| *v = (*v - self.input_mean[c]) / self.input_scale[c]);
        }
        let mut outputs = series.outputs.clone();
        for (c, mut col) in outputs.column_iter_mut().enumerate() {
            col.apply(|v| *v = (*v - self.output_mean[c]) / self.output_scale[c]);
        }
        MimoSeries::new(inputs, outputs, series.labels.clone(), series.dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narma10_zero_history_constant_term() {
        let u = vec![0.0; 12];
        let mut y = vec![0.0; 12];
        y[10] = narma_value(10, &y, &u, 10).unwrap();
        assert_eq!(y[10], 0.1);
    }

    #[test]
    fn narma20_zero_history_constant_term() {
        let u = vec![0.0; 22];
        let y = vec![0.0; 22];
        let v = narma_value(20, &y, &u, 20).unwrap();
        assert_eq!(v, 0.01f64.tanh() + 0.2);
        assert!((v - 0.20999967).abs() < 1e-8);
    }

    #[test]
    fn narma_rejects_unsupported_order() {
        assert!(gen_narma(15, 100, 1).is_err());
        assert!(narma_value(5, &[0.0; 3], &[0.0; 3], 1).is_err());
        assert!(gen_narma(10, 10, 1).is_err());
        assert!(gen_narma(10, 11, 1).is_ok());
    }

    #[test]
    fn narma_inputs_in_range_and_warmup_zero() {
        let s = gen_narma(30, 2000, 3).unwrap();
        assert!(s.inputs.iter().all(|&u| (0.0..0.5).contains(&u)));
        assert!(s.outputs.rows(0, 30).iter().all(|&y| y == 0.0));
        assert_eq!((s.n_inputs(), s.n_outputs()), (1, 1));
    }

    #[test]
    fn vanderpol_origin_is_fixed_without_noise() {
        let p = VanDerPolParams {
            noise_variance: 0.0,
            initial: [0.0, 0.0],
            ..Default::default()
        };
        let s = gen_vanderpol(0, 500, 1, &p).unwrap();
        assert!(s.outputs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vanderpol_fault3_first_step_from_origin() {
        let p = VanDerPolParams {
            noise_variance: 0.0,
            initial: [0.0, 0.0],
            ..Default::default()
        };
        let s = gen_vanderpol(3, 2, 1, &p).unwrap();
        assert_eq!(s.outputs[(1, 0)], 0.0);
        assert_eq!(s.outputs[(1, 1)], 0.75);
    }

    #[test]
    fn vanderpol_rejects_bad_parameters() {
        let p = VanDerPolParams {
            dt: 0.0,
            ..Default::default()
        };
        assert!(gen_vanderpol(0, 10, 1, &p).is_err());
        assert!(gen_vanderpol(4, 10, 1, &VanDerPolParams::default()).is_err());
        assert!(gen_vanderpol(0, 1, 1, &VanDerPolParams::default()).is_err());
    }

    #[test]
    fn three_tank_inflow_at_zero() {
        assert_eq!(three_tank_inflow(0, 1.0), [0.5, 0.55]);
    }

    #[test]
    fn three_tank_levels_are_clamped() {
        let p = ThreeTankParams::default();
        let x = three_tank_step(&p, [9.99, 9.99, 9.99], [1.0, 1.0], 0);
        assert!(x.iter().all(|v| (0.0..=10.0).contains(v)));
        assert_eq!(x[0], 10.0);
    }

    #[test]
    fn three_tank_drained_tank_stays_non_negative() {
        let p = ThreeTankParams::default();
        let x = three_tank_step(&p, [0.0, 0.01, 0.001], [0.0, 0.0], 2);
        assert!(x.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn compose_errors() {
        let mut spec = ScenarioSpec {
            system: SystemKind::Vanderpol,
            segments: vec![],
            seed: 1,
            params: SystemParams::default(),
        };
        assert!(compose_scenario(&spec).is_err());
        spec.segments = vec![Segment::new(1, 100)];
        assert!(compose_scenario(&spec).is_err());
        spec.segments = vec![Segment::new(0, 100), Segment::new(4, 100)];
        assert!(compose_scenario(&spec).is_err());
        spec.system = SystemKind::Narma;
        spec.segments = vec![Segment::new(0, 100), Segment::new(3, 100)];
        assert!(compose_scenario(&spec).is_err());
    }

    #[test]
    fn compose_narma_labels() {
        let spec = ScenarioSpec {
            system: SystemKind::Narma,
            segments: vec![Segment::new(0, 1000), Segment::new(1, 3000)],
            seed: 5,
            params: SystemParams::default(),
        };
        let s = compose_scenario(&spec).unwrap();
        assert_eq!(s.len(), 4000);
        assert!(s.labels[..1000].iter().all(|&l| l == 0));
        assert!(s.labels[1000..].iter().all(|&l| l == 1));
        assert_eq!(s.segments(), spec.segments);
    }

    #[test]
    fn scaler_standardises_prefix() {
        let s = gen_threetank(0, 300, 0, &ThreeTankParams::default()).unwrap();
        let sc = ChannelScaler::fit(&s, 300).unwrap();
        let z = sc.apply(&s).unwrap();
        for c in 0..3 {
            let col = z.outputs.column(c);
            assert!(col.mean().abs() < 1e-12);
            let var = col.iter().map(|v| v * v).sum::<f64>() / 300.0;
            assert!((var - 1.0).abs() < 1e-9);
        }
    }
}
