//! Synthetic planar flows with known ground truth.
//!
//! Flow maps `Φ(t, s, x)` are obtained by fixed-step classical RK4 on
//! `du/dt = F(t, u), u(s) = x`. The step is shrunk so that an integer number
//! of steps lands exactly on `t`; backward maps use negative steps.

use crate::geometry::{GeoPoint, KM_PER_DEG};
use crate::trajectory::{Fix, TrajectoryCorpus, TrajectoryError, TrajectorySegment};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

pub type Point2 = [f64; 2];

const BLOW_UP_NORM: f64 = 1e12;
const MAX_STEPS: f64 = 1e8;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("state norm exceeded 1e12 at t={t}")]
    BlowUp { t: f64 },
    #[error("invalid field parameters: {0}")]
    InvalidField(String),
    #[error("invalid simulation setup: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

pub type Result<T, E = FlowError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VectorField {
    /// `F = (u, v)`.
    Uniform { u: f64, v: f64 },
    /// Rigid rotation with angular velocity `omega` (counter-clockwise).
    Rotation { omega: f64, center: Point2 },
    /// `F = (k·y, 0)`.
    Shear { k: f64 },
    /// Time-periodic double gyre on `[0, 2] × [0, 1]`.
    DoubleGyre { a: f64, eps: f64, omega: f64 },
    /// `F = M·x`; divergence equals the trace of `M`.
    Linear { m: [[f64; 2]; 2] },
}

impl VectorField {
    pub fn double_gyre() -> VectorField {
        VectorField::DoubleGyre {
            a: 0.1,
            eps: 0.25,
            omega: 2.0 * PI / 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params: Vec<f64> = match *self {
            VectorField::Uniform { u, v } => vec![u, v],
            VectorField::Rotation { omega, center } => vec![omega, center[0], center[1]],
            VectorField::Shear { k } => vec![k],
            VectorField::DoubleGyre { a, eps, omega } => vec![a, eps, omega],
            VectorField::Linear { m } => m.iter().flatten().copied().collect(),
        };
        if params.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(FlowError::InvalidField(format!("{self:?}")))
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        match *self {
            VectorField::Linear { m } => m[0][0] + m[1][1] == 0.0,
            _ => true,
        }
    }

    pub fn eval(&self, t: f64, p: Point2) -> Point2 {
        let [x, y] = p;
        match *self {
            VectorField::Uniform { u, v } => [u, v],
            VectorField::Rotation { omega, center } => {
                [-omega * (y - center[1]), omega * (x - center[0])]
            }
            VectorField::Shear { k } => [k * y, 0.0],
            VectorField::DoubleGyre { a, eps, omega } => {
                let st = (omega * t).sin();
                let (aa, bb) = (eps * st, 1.0 - 2.0 * eps * st);
                let f = aa * x * x + bb * x;
                let df = 2.0 * aa * x + bb;
                [
                    -PI * a * (PI * f).sin() * (PI * y).cos(),
                    PI * a * (PI * f).cos() * (PI * y).sin() * df,
                ]
            }
            VectorField::Linear { m } => [m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y],
        }
    }
}

fn axpy(a: f64, x: Point2, y: Point2) -> Point2 {
    [y[0] + a * x[0], y[1] + a * x[1]]
}

/// `Φ(t, s, x)` by classical RK4 with step magnitude at most `h`.
pub fn integrate_flow(f: &VectorField, s: f64, t: f64, x: Point2, h: f64) -> Result<Point2> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FlowError::InvalidStep(format!("h must be positive, got {h}")));
    }
    let span = t - s;
    if !span.is_finite() || span.abs() / h > MAX_STEPS {
        return Err(FlowError::InvalidStep(format!(
            "|t-s|/h = {} exceeds 1e8",
            span.abs() / h
        )));
    }
    if span == 0.0 {
        return Ok(x);
    }
    let n = (span.abs() / h).ceil() as u64;
    let dt = span / n as f64;
    let mut u = x;
    for k in 0..n {
        let v = s + k as f64 * dt;
        let k1 = f.eval(v, u);
        let k2 = f.eval(v + dt / 2.0, axpy(dt / 2.0, k1, u));
        let k3 = f.eval(v + dt / 2.0, axpy(dt / 2.0, k2, u));
        let k4 = f.eval(v + dt, axpy(dt, k3, u));
        u = [
            u[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            u[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if !(u[0].hypot(u[1]) <= BLOW_UP_NORM) {
            return Err(FlowError::BlowUp { t: v + dt });
        }
    }
    Ok(u)
}

fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `‖Φ(t,s,x) − Φ(t,t′,Φ(t′,s,x))‖`.
pub fn flow_semigroup_residual(
    f: &VectorField,
    s: f64,
    t_mid: f64,
    t: f64,
    x: Point2,
    h: f64,
) -> Result<f64> {
    let direct = integrate_flow(f, s, t, x, h)?;
    let mid = integrate_flow(f, s, t_mid, x, h)?;
    let composed = integrate_flow(f, t_mid, t, mid, h)?;
    Ok(dist(direct, composed))
}

/// `‖Φ(s,t,Φ(t,s,x)) − x‖`.
pub fn flow_inverse_residual(f: &VectorField, s: f64, t: f64, x: Point2, h: f64) -> Result<f64> {
    let there = integrate_flow(f, s, t, x, h)?;
    let back = integrate_flow(f, t, s, there, h)?;
    Ok(dist(back, x))
}

fn det_from_stencil(plus: [Point2; 2], minus: [Point2; 2], fd_eps: f64) -> f64 {
    let c = 1.0 / (2.0 * fd_eps);
    let j00 = (plus[0][0] - minus[0][0]) * c;
    let j10 = (plus[0][1] - minus[0][1]) * c;
    let j01 = (plus[1][0] - minus[1][0]) * c;
    let j11 = (plus[1][1] - minus[1][1]) * c;
    j00 * j11 - j01 * j10
}

/// Determinant of the Jacobian of `x ↦ Φ(t, s, x)` by central differences.
pub fn jacobian_det(f: &VectorField, s: f64, t: f64, x: Point2, h: f64, fd_eps: f64) -> Result<f64> {
    if !(fd_eps > 0.0) {
        return Err(FlowError::InvalidArgument(format!("fd_eps must be positive, got {fd_eps}")));
    }
    let mut plus = [[0.0; 2]; 2];
    let mut minus = [[0.0; 2]; 2];
    for d in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[d] += fd_eps;
        xm[d] -= fd_eps;
        plus[d] = integrate_flow(f, s, t, xp, h)?;
        minus[d] = integrate_flow(f, s, t, xm, h)?;
    }
    Ok(det_from_stencil(plus, minus, fd_eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMapSample {
    pub s: f64,
    pub t: f64,
    pub x: Point2,
    pub y: Point2,
    pub jac_det: f64,
}

pub fn sample_flow_map(
    f: &VectorField,
    s: f64,
    t: f64,
    x: Point2,
    h: f64,
    fd_eps: f64,
) -> Result<FlowMapSample> {
    Ok(FlowMapSample {
        s,
        t,
        x,
        y: integrate_flow(f, s, t, x, h)?,
        jac_det: jacobian_det(f, s, t, x, h, fd_eps)?,
    })
}

/// Maps planar flow coordinates (in units of `km_per_unit` kilometres) to
/// small lon-lat offsets around an anchor, and Unix time to flow time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarAnchor {
    pub lon: f64,
    pub lat: f64,
    pub km_per_unit: f64,
    /// Unix second corresponding to flow time 0.
    pub epoch: i64,
}

impl Default for PlanarAnchor {
    fn default() -> Self {
        PlanarAnchor {
            lon: 0.0,
            lat: 0.0,
            km_per_unit: 1.0,
            epoch: 0,
        }
    }
}

impl PlanarAnchor {
    fn km_per_deg_lon(&self) -> f64 {
        KM_PER_DEG * self.lat.to_radians().cos()
    }

    pub fn to_planar(&self, p: &GeoPoint) -> Point2 {
        [
            (p.lon - self.lon) * self.km_per_deg_lon() / self.km_per_unit,
            (p.lat - self.lat) * KM_PER_DEG / self.km_per_unit,
        ]
    }

    pub fn to_geo(&self, q: Point2) -> GeoPoint {
        GeoPoint {
            lon: self.lon + q[0] * self.km_per_unit / self.km_per_deg_lon(),
            lat: self.lat + q[1] * self.km_per_unit / KM_PER_DEG,
            alt: None,
        }
    }

    pub fn flow_time(&self, unix: i64) -> f64 {
        (unix - self.epoch) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub point: GeoPoint,
    pub receptor: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub field: VectorField,
    pub anchor: PlanarAnchor,
    /// Signed lag in seconds; negative for backward trajectories.
    pub delta_seconds: i64,
    /// RK4 step in seconds.
    pub h: f64,
    pub fix_interval: i64,
    /// When set, each fix carries `cov:jacdet` from a finite-difference
    /// stencil of this half-width (planar units).
    pub jacobian_eps: Option<f64>,
}

/// Name of the covariate carrying `|det J|` per fix.
pub const JACDET_COVARIATE: &str = "jacdet";

/// Integrates one trajectory per (arrival point, arrival time) pair and
/// returns them ordered by (point index, time index).
pub fn generate_corpus(
    cfg: &SimulationConfig,
    arrivals: &[Arrival],
    arrival_times: &[i64],
) -> Result<TrajectoryCorpus> {
    cfg.field.validate()?;
    if cfg.delta_seconds == 0 {
        return Err(FlowError::InvalidArgument("delta must be non-zero".into()));
    }
    if cfg.fix_interval <= 0 {
        return Err(FlowError::InvalidArgument("fix interval must be positive".into()));
    }
    if arrivals.is_empty() || arrival_times.is_empty() {
        return Err(TrajectoryError::EmptyCorpus.into());
    }
    let names: Arc<[String]> = match cfg.jacobian_eps {
        Some(_) => Arc::from(vec![JACDET_COVARIATE.to_string()]),
        None => Arc::from(Vec::<String>::new()),
    };
    let pairs: Vec<(usize, usize)> = (0..arrivals.len())
        .flat_map(|l| (0..arrival_times.len()).map(move |k| (l, k)))
        .collect();
    let segments = pairs
        .par_iter()
        .map(|&(l, k)| simulate_one(cfg, &arrivals[l], arrival_times[k], l, k, &names))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryCorpus::new(segments, names)?)
}

fn simulate_one(
    cfg: &SimulationConfig,
    arrival: &Arrival,
    sample_time: i64,
    l: usize,
    k: usize,
    names: &Arc<[String]>,
) -> Result<TrajectorySegment> {
    let step = cfg.fix_interval * cfg.delta_seconds.signum();
    let end = sample_time + cfg.delta_seconds;
    let mut times = vec![sample_time];
    while (times[times.len() - 1] - end).abs() > cfg.fix_interval {
        let last = times[times.len() - 1];
        times.push(last + step);
    }
    times.push(end);

    let x = cfg.anchor.to_planar(&arrival.point);
    // centre plus four stencil points, advanced fix to fix
    let mut states = vec![x];
    if let Some(e) = cfg.jacobian_eps {
        states.extend([[x[0] + e, x[1]], [x[0] - e, x[1]], [x[0], x[1] + e], [x[0], x[1] - e]]);
    }
    let mut fixes = Vec::with_capacity(times.len());
    let mut prev_t = cfg.anchor.flow_time(sample_time);
    for (j, &unix) in times.iter().enumerate() {
        let v = cfg.anchor.flow_time(unix);
        if j > 0 {
            for st in states.iter_mut() {
                *st = integrate_flow(&cfg.field, prev_t, v, *st, cfg.h)?;
            }
        }
        prev_t = v;
        let point = cfg.anchor.to_geo(states[0]);
        point.validate().map_err(|e| {
            FlowError::InvalidArgument(format!("trajectory left the globe: {e}"))
        })?;
        let cov = match cfg.jacobian_eps {
            Some(e) => vec![Some(
                det_from_stencil([states[1], states[3]], [states[2], states[4]], e).abs(),
            )],
            None => vec![],
        };
        fixes.push(Fix {
            time: unix,
            point,
            cov,
        });
    }
    fixes.sort_by_key(|f| f.time);
    Ok(TrajectorySegment::new(
        format!("sim_{l:05}_{k:05}"),
        sample_time,
        arrival.receptor.clone(),
        fixes,
        names.clone(),
    )?)
}
