//! Pointwise connectivity measures `Ψ(A | t, s, x)` of a single trajectory
//! segment with respect to a region, and the sample-average estimator of
//! integrated connectivity between two regions.
//!
//! Every quadrature runs over fix intervals, with inside intervals split
//! exactly at the region-crossing times. Fix-level integrands are
//! interpolated linearly, so the trapezoid rule is exact for them.

mod config;
mod estimator;

pub use config::{read_events, MeasureConfig};
pub use estimator::{
    estimate_from_values, estimate_integrated, receptor_segments, scale_sum, EstimatorConfig,
};

use crate::geometry::{
    clip_pieces, point_in_region, ClipPiece, GeoPoint, GeometryError, Region, KM_PER_DEG,
};
use crate::trajectory::TrajectorySegment;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConnectivityError {
    #[error("trajectory {traj_id}: missing covariate {name}")]
    MissingCovariate { traj_id: String, name: String },
    #[error("trajectory {0}: no jacobian source (cov:jacdet)")]
    MissingJacobian(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("no sampled trajectories for receptor {0}")]
    NoSamples(String),
    #[error("source and receptor are the same region {0}")]
    Diagonal(String),
    #[error("trajectory {traj_id}: negative connectivity {value}")]
    NegativeConnectivity { traj_id: String, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = ConnectivityError> = std::result::Result<T, E>;

/// The `Z(s, x)` factor: a constant or a covariate read at the sample fix.
#[derive(Debug, Clone, PartialEq)]
pub enum ZSpec {
    Const(f64),
    Origin(String),
}

/// The along-path factor `Z̃(v, Φ(v, s, x))`.
#[derive(Debug, Clone, PartialEq)]
pub enum ZTilde {
    One,
    Fix(String),
    /// 1 while the interpolated altitude is at or below the threshold (m).
    AltBelow(f64),
}

/// A discrete event of the event-time measure `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Unix seconds.
    pub time: i64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointwiseMeasure {
    Contact,
    ContactMinLength { min_km: f64 },
    Duration,
    Length,
    Volume,
    Field { east: String, north: String },
    Covariate { z: ZSpec, ztilde: ZTilde },
    CovariateMeasure { z: ZSpec, ztilde: ZTilde, events: Vec<Event> },
}

/// Per-fix covariate holding `|det J|` for the volume measure.
pub use crate::flowsim::JACDET_COVARIATE as JACDET;

impl fmt::Display for ZSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZSpec::Const(c) => write!(f, "const:{c}"),
            ZSpec::Origin(n) => write!(f, "origin:{n}"),
        }
    }
}

impl fmt::Display for ZTilde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZTilde::One => f.write_str("one"),
            ZTilde::Fix(n) => write!(f, "cov:{n}"),
            ZTilde::AltBelow(h) => write!(f, "alt_below:{h}"),
        }
    }
}

/// Compact descriptor, free of `;`, used in output headers.
impl fmt::Display for PointwiseMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointwiseMeasure::Contact => f.write_str("contact"),
            PointwiseMeasure::ContactMinLength { min_km } => {
                write!(f, "contact_min_length({min_km})")
            }
            PointwiseMeasure::Duration => f.write_str("duration"),
            PointwiseMeasure::Length => f.write_str("length"),
            PointwiseMeasure::Volume => f.write_str("volume"),
            PointwiseMeasure::Field { east, north } => write!(f, "field({east},{north})"),
            PointwiseMeasure::Covariate { z, ztilde } => write!(f, "covariate({z},{ztilde})"),
            PointwiseMeasure::CovariateMeasure { z, ztilde, events } => {
                write!(f, "covariate_measure({z},{ztilde},events={})", events.len())
            }
        }
    }
}

impl PointwiseMeasure {
    /// Checks parameters and that referenced covariates exist in `names`.
    pub fn validate(&self, names: &[String]) -> Result<()> {
        let has = |n: &str| names.iter().any(|m| m == n);
        let need = |n: &str| {
            if has(n) {
                Ok(())
            } else {
                Err(ConnectivityError::InvalidMeasure(format!(
                    "covariate {n} is not present in the corpus"
                )))
            }
        };
        let check_z = |z: &ZSpec, zt: &ZTilde| -> Result<()> {
            match z {
                ZSpec::Const(c) if !c.is_finite() => {
                    return Err(ConnectivityError::InvalidMeasure(format!("Z constant {c}")))
                }
                ZSpec::Origin(n) => need(n)?,
                _ => {}
            }
            match zt {
                ZTilde::Fix(n) => need(n),
                ZTilde::AltBelow(h) if !h.is_finite() => Err(ConnectivityError::InvalidMeasure(
                    format!("altitude threshold {h}"),
                )),
                _ => Ok(()),
            }
        };
        match self {
            PointwiseMeasure::ContactMinLength { min_km } if !(*min_km >= 0.0) => Err(
                ConnectivityError::InvalidMeasure(format!("min length must be >= 0, got {min_km}")),
            ),
            PointwiseMeasure::Volume => need(JACDET).map_err(|_| {
                ConnectivityError::InvalidMeasure("volume measure needs a cov:jacdet column".into())
            }),
            PointwiseMeasure::Field { east, north } => {
                need(east)?;
                need(north)
            }
            PointwiseMeasure::Covariate { z, ztilde } => check_z(z, ztilde),
            PointwiseMeasure::CovariateMeasure { z, ztilde, events } => {
                if let Some(e) = events.iter().find(|e| !(e.weight >= 0.0) || !e.weight.is_finite()) {
                    return Err(ConnectivityError::InvalidMeasure(format!(
                        "event weight {} must be finite and >= 0",
                        e.weight
                    )));
                }
                check_z(z, ztilde)
            }
            _ => Ok(()),
        }
    }

    /// `Ψ(A | ·)` for one segment.
    pub fn evaluate(&self, seg: &TrajectorySegment, a: &Region) -> Result<f64> {
        let clip = SegmentClip::new(seg, a)?;
        let value = match self {
            PointwiseMeasure::Contact => clip.contact(),
            PointwiseMeasure::ContactMinLength { min_km } => clip.contact_min_length(*min_km),
            PointwiseMeasure::Duration => clip.duration(),
            PointwiseMeasure::Length => clip.length(),
            PointwiseMeasure::Volume => clip.volume()?,
            PointwiseMeasure::Field { east, north } => clip.field(east, north)?,
            PointwiseMeasure::Covariate { z, ztilde } => clip.covariate(z, ztilde)?,
            PointwiseMeasure::CovariateMeasure { z, ztilde, events } => {
                clip.covariate_measure(z, ztilde, events)?
            }
        };
        if value < 0.0 {
            return Err(ConnectivityError::NegativeConnectivity {
                traj_id: seg.traj_id.clone(),
                value,
            });
        }
        Ok(value)
    }
}

/// A segment clipped against one region, shared by all measures.
struct SegmentClip<'a> {
    seg: &'a TrajectorySegment,
    region: &'a Region,
    /// Fix times relative to the first fix.
    times: Vec<f64>,
    runs: Vec<Vec<ClipPiece>>,
    /// Single-fix segments: whether the lone fix is inside.
    lone_inside: bool,
}

impl<'a> SegmentClip<'a> {
    fn new(seg: &'a TrajectorySegment, region: &'a Region) -> Result<Self> {
        let poly = seg.polyline();
        let times = poly.iter().map(|(t, _)| *t).collect();
        if poly.len() == 1 {
            return Ok(SegmentClip {
                seg,
                region,
                times,
                runs: vec![],
                lone_inside: point_in_region(&poly[0].1, region),
            });
        }
        Ok(SegmentClip {
            seg,
            region,
            times,
            runs: clip_pieces(&poly, region)?,
            lone_inside: false,
        })
    }

    fn pieces(&self) -> impl Iterator<Item = &ClipPiece> {
        self.runs.iter().flatten()
    }

    fn leg_dt(&self, leg: usize) -> f64 {
        self.times[leg + 1] - self.times[leg]
    }

    fn point(&self, leg: usize, u: f64) -> GeoPoint {
        let f = &self.seg.fixes;
        f[leg].point.lerp(&f[leg + 1].point, u)
    }

    fn contact(&self) -> f64 {
        if self.lone_inside || !self.runs.is_empty() {
            1.0
        } else {
            0.0
        }
    }

    fn length(&self) -> f64 {
        self.pieces()
            .filter(|p| p.u1 > p.u0)
            .map(|p| crate::geometry::haversine_km(&self.point(p.leg, p.u0), &self.point(p.leg, p.u1)))
            .sum()
    }

    fn contact_min_length(&self, min_km: f64) -> f64 {
        if self.length() > min_km {
            1.0
        } else {
            0.0
        }
    }

    fn duration(&self) -> f64 {
        self.pieces().map(|p| self.leg_dt(p.leg) * (p.u1 - p.u0)).sum()
    }

    /// `∫ g dv` over inside intervals for `g` linear between fix values.
    fn integrate_linear(&self, values: &[f64]) -> f64 {
        self.pieces()
            .map(|p| {
                let (g0, g1) = (values[p.leg], values[p.leg + 1]);
                let at = |u: f64| g0 + (g1 - g0) * u;
                self.leg_dt(p.leg) * (p.u1 - p.u0) * (at(p.u0) + at(p.u1)) / 2.0
            })
            .sum()
    }

    fn fix_values(&self, name: &str) -> Result<Vec<f64>> {
        let missing = || ConnectivityError::MissingCovariate {
            traj_id: self.seg.traj_id.clone(),
            name: name.to_string(),
        };
        let k = self.seg.covariate_index(name).ok_or_else(missing)?;
        self.seg
            .fixes
            .iter()
            .map(|f| f.cov[k].ok_or_else(missing))
            .collect()
    }

    fn altitudes(&self) -> Result<Vec<f64>> {
        self.seg
            .fixes
            .iter()
            .map(|f| {
                f.point.alt.ok_or_else(|| ConnectivityError::MissingCovariate {
                    traj_id: self.seg.traj_id.clone(),
                    name: "alt_m".into(),
                })
            })
            .collect()
    }

    fn volume(&self) -> Result<f64> {
        let jac = self
            .fix_values(JACDET)
            .map_err(|_| ConnectivityError::MissingJacobian(self.seg.traj_id.clone()))?;
        let jac: Vec<f64> = jac.into_iter().map(f64::abs).collect();
        Ok(self.integrate_linear(&jac))
    }

    /// East/north velocity (km/s) per fix; centred differences inside,
    /// one-sided at the ends.
    fn velocities(&self) -> Vec<[f64; 2]> {
        let f = &self.seg.fixes;
        let n = f.len();
        (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                if a == b {
                    return [0.0, 0.0];
                }
                let (pa, pb) = (&f[a].point, &f[b].point);
                let dt = self.times[b] - self.times[a];
                let coslat = f[i].point.lat.to_radians().cos();
                [
                    (pb.lon - pa.lon) * KM_PER_DEG * coslat / dt,
                    (pb.lat - pa.lat) * KM_PER_DEG / dt,
                ]
            })
            .collect()
    }

    fn field(&self, east: &str, north: &str) -> Result<f64> {
        if self.runs.is_empty() {
            return Ok(0.0);
        }
        let ge = self.fix_values(east)?;
        let gn = self.fix_values(north)?;
        let integrand: Vec<f64> = self
            .velocities()
            .iter()
            .zip(ge.iter().zip(&gn))
            .map(|(v, (e, n))| (v[0] * e + v[1] * n).abs())
            .collect();
        Ok(self.integrate_linear(&integrand))
    }

    fn z_factor(&self, z: &ZSpec) -> Result<f64> {
        match z {
            ZSpec::Const(c) => Ok(*c),
            ZSpec::Origin(name) => {
                self.seg
                    .origin_covariate(name)
                    .ok_or_else(|| ConnectivityError::MissingCovariate {
                        traj_id: self.seg.traj_id.clone(),
                        name: name.clone(),
                    })
            }
        }
    }

    fn covariate(&self, z: &ZSpec, ztilde: &ZTilde) -> Result<f64> {
        let zf = self.z_factor(z)?;
        let integral = match ztilde {
            ZTilde::One => self.duration(),
            ZTilde::Fix(name) => {
                if self.runs.is_empty() {
                    0.0
                } else {
                    self.integrate_linear(&self.fix_values(name)?)
                }
            }
            ZTilde::AltBelow(h) => {
                if self.runs.is_empty() {
                    0.0
                } else {
                    let alt = self.altitudes()?;
                    self.pieces()
                        .map(|p| {
                            self.leg_dt(p.leg)
                                * below_fraction(alt[p.leg], alt[p.leg + 1], *h, p.u0, p.u1)
                        })
                        .sum()
                }
            }
        };
        Ok(zf * integral)
    }

    fn covariate_measure(&self, z: &ZSpec, ztilde: &ZTilde, events: &[Event]) -> Result<f64> {
        let zf = self.z_factor(z)?;
        let f = &self.seg.fixes;
        let (t_first, t_last) = (f[0].time, f[f.len() - 1].time);
        let mut total = 0.0;
        for e in events.iter().filter(|e| (t_first..=t_last).contains(&e.time)) {
            let (leg, u) = if f.len() == 1 {
                (0, 0.0)
            } else {
                let leg = f.partition_point(|x| x.time <= e.time).clamp(1, f.len() - 1) - 1;
                (leg, (e.time - f[leg].time) as f64 / (f[leg + 1].time - f[leg].time) as f64)
            };
            let (pos, next) = if f.len() == 1 {
                (f[0].point, 0)
            } else {
                (self.point(leg, u), leg + 1)
            };
            if !point_in_region(&pos, self.region) {
                continue;
            }
            let lerp = |a: f64, b: f64| a + (b - a) * u;
            let zt = match ztilde {
                ZTilde::One => 1.0,
                ZTilde::Fix(name) => {
                    let v = self.fix_values(name)?;
                    lerp(v[leg], v[next])
                }
                ZTilde::AltBelow(h) => {
                    let alt = self.altitudes()?;
                    if lerp(alt[leg], alt[next]) <= *h {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            total += e.weight * zt;
        }
        Ok(zf * total)
    }
}

/// Length of `{u ∈ [u0, u1] : a0 + (a1 − a0)·u ≤ h}`.
fn below_fraction(a0: f64, a1: f64, h: f64, u0: f64, u1: f64) -> f64 {
    let slope = a1 - a0;
    if slope == 0.0 {
        return if a0 <= h { u1 - u0 } else { 0.0 };
    }
    let uc = (h - a0) / slope;
    let (lo, hi) = if slope > 0.0 {
        (u0, uc.min(u1))
    } else {
        (uc.max(u0), u1)
    };
    (hi - lo).max(0.0)
}

pub fn psi_contact(seg: &TrajectorySegment, a: &Region) -> Result<f64> {
    PointwiseMeasure::Contact.evaluate(seg, a)
}

pub fn psi_contact_min_length(seg: &TrajectorySegment, a: &Region, min_km: f64) -> Result<f64> {
    PointwiseMeasure::ContactMinLength { min_km }.evaluate(seg, a)
}

pub fn psi_duration(seg: &TrajectorySegment, a: &Region) -> Result<f64> {
    PointwiseMeasure::Duration.evaluate(seg, a)
}

pub fn psi_length(seg: &TrajectorySegment, a: &Region) -> Result<f64> {
    PointwiseMeasure::Length.evaluate(seg, a)
}

pub fn psi_volume(seg: &TrajectorySegment, a: &Region) -> Result<f64> {
    PointwiseMeasure::Volume.evaluate(seg, a)
}

pub fn psi_field(seg: &TrajectorySegment, a: &Region, east: &str, north: &str) -> Result<f64> {
    PointwiseMeasure::Field {
        east: east.into(),
        north: north.into(),
    }
    .evaluate(seg, a)
}

pub fn psi_covariate(seg: &TrajectorySegment, a: &Region, z: ZSpec, ztilde: ZTilde) -> Result<f64> {
    PointwiseMeasure::Covariate { z, ztilde }.evaluate(seg, a)
}

pub fn psi_covariate_measure(
    seg: &TrajectorySegment,
    a: &Region,
    z: ZSpec,
    ztilde: ZTilde,
    events: Vec<Event>,
) -> Result<f64> {
    PointwiseMeasure::CovariateMeasure { z, ztilde, events }.evaluate(seg, a)
}
