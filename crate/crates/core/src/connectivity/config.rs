use super::{ConnectivityError, Event, PointwiseMeasure, Result, ZSpec, ZTilde};
use crate::trajectory::parse_time;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Measure selection as written in a run config file.
///
/// `z_source` is a number (constant `Z`) or `origin:<name>`; `ztilde_source`
/// is `one`, `alt_below` (threshold from `alt_threshold_m`), or
/// `cov:<name>`. Without `ztilde_source`, a set `alt_threshold_m` selects
/// `alt_below`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub measure: String,
    pub min_length_km: Option<f64>,
    pub alt_threshold_m: Option<f64>,
    pub z_source: Option<String>,
    pub ztilde_source: Option<String>,
    pub g_east: Option<String>,
    pub g_north: Option<String>,
    pub events_file: Option<String>,
}

fn invalid(msg: impl Into<String>) -> ConnectivityError {
    ConnectivityError::InvalidMeasure(msg.into())
}

impl MeasureConfig {
    pub fn contact() -> MeasureConfig {
        MeasureConfig {
            measure: "contact".into(),
            ..Default::default()
        }
    }

    /// Builds the measure; relative `events_file` paths resolve against
    /// `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<PointwiseMeasure> {
        let m = match self.measure.as_str() {
            "contact" => match self.min_length_km {
                Some(min_km) => PointwiseMeasure::ContactMinLength { min_km },
                None => PointwiseMeasure::Contact,
            },
            "contact_min_length" => PointwiseMeasure::ContactMinLength {
                min_km: self
                    .min_length_km
                    .ok_or_else(|| invalid("contact_min_length needs min_length_km"))?,
            },
            "duration" => PointwiseMeasure::Duration,
            "length" => PointwiseMeasure::Length,
            "volume" => PointwiseMeasure::Volume,
            "field" => PointwiseMeasure::Field {
                east: self.g_east.clone().ok_or_else(|| invalid("field needs g_east"))?,
                north: self.g_north.clone().ok_or_else(|| invalid("field needs g_north"))?,
            },
            "covariate" => PointwiseMeasure::Covariate {
                z: self.z()?,
                ztilde: self.ztilde()?,
            },
            "covariate_measure" => {
                let file = self
                    .events_file
                    .as_ref()
                    .ok_or_else(|| invalid("covariate_measure needs events_file"))?;
                PointwiseMeasure::CovariateMeasure {
                    z: self.z()?,
                    ztilde: self.ztilde()?,
                    events: read_events(&base_dir.join(file))?,
                }
            }
            other => return Err(invalid(format!("unknown measure {other:?}"))),
        };
        Ok(m)
    }

    fn z(&self) -> Result<ZSpec> {
        match self.z_source.as_deref().map(str::trim) {
            None => Ok(ZSpec::Const(1.0)),
            Some(s) => {
                if let Some(name) = s.strip_prefix("origin:") {
                    Ok(ZSpec::Origin(name.to_string()))
                } else {
                    s.parse::<f64>()
                        .map(ZSpec::Const)
                        .map_err(|_| invalid(format!("z_source {s:?}: expected a number or origin:<name>")))
                }
            }
        }
    }

    fn ztilde(&self) -> Result<ZTilde> {
        let threshold = || {
            self.alt_threshold_m
                .ok_or_else(|| invalid("alt_below needs alt_threshold_m"))
        };
        match self.ztilde_source.as_deref().map(str::trim) {
            None => Ok(match self.alt_threshold_m {
                Some(h) => ZTilde::AltBelow(h),
                None => ZTilde::One,
            }),
            Some("one") => Ok(ZTilde::One),
            Some("alt_below") => threshold().map(ZTilde::AltBelow),
            Some(s) => s
                .strip_prefix("cov:")
                .map(|n| ZTilde::Fix(n.to_string()))
                .ok_or_else(|| invalid(format!("ztilde_source {s:?}: expected one, alt_below or cov:<name>"))),
        }
    }
}

/// Reads an event list: CSV with header `time,weight`, times in RFC 3339.
pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["time", "weight"] {
        return Err(invalid(format!("{}: expected header time,weight", path.display())));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| invalid(format!("{}:{line}: {e}", path.display())))?;
        let time = parse_time(&rec[0])
            .ok_or_else(|| invalid(format!("{}:{line}: bad time {:?}", path.display(), &rec[0])))?;
        let weight: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{}:{line}: bad weight {:?}", path.display(), &rec[1])))?;
        out.push(Event { time, weight });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(toml_text: &str) -> MeasureConfig {
        toml::from_str(toml_text).unwrap()
    }

    #[test]
    fn builds_each_kind() {
        let here = Path::new(".");
        assert_eq!(cfg("measure = \"contact\"").build(here).unwrap(), PointwiseMeasure::Contact);
        assert_eq!(
            cfg("measure = \"contact\"\nmin_length_km = 5.0").build(here).unwrap(),
            PointwiseMeasure::ContactMinLength { min_km: 5.0 }
        );
        assert_eq!(
            cfg("measure = \"covariate\"\nz_source = \"origin:rain\"\nalt_threshold_m = 500.0")
                .build(here)
                .unwrap(),
            PointwiseMeasure::Covariate {
                z: ZSpec::Origin("rain".into()),
                ztilde: ZTilde::AltBelow(500.0)
            }
        );
        assert_eq!(
            cfg("measure = \"covariate\"\nz_source = \"2\"\nztilde_source = \"cov:rh\"")
                .build(here)
                .unwrap(),
            PointwiseMeasure::Covariate { z: ZSpec::Const(2.0), ztilde: ZTilde::Fix("rh".into()) }
        );
        assert!(cfg("measure = \"field\"\ng_east = \"u\"").build(here).is_err());
        assert!(cfg("measure = \"speed\"").build(here).is_err());
        assert!(toml::from_str::<MeasureConfig>("measure = \"contact\"\nfoo = 1").is_err());
    }

    #[test]
    fn events_file_relative_to_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("ev.csv"),
            "time,weight\n2011-01-01T00:00:00Z,2.5\n2011-01-01T06:00:00Z,1\n",
        )
        .unwrap();
        let m = cfg("measure = \"covariate_measure\"\nevents_file = \"ev.csv\"")
            .build(dir.path())
            .unwrap();
        match m {
            PointwiseMeasure::CovariateMeasure { events, .. } => {
                assert_eq!(events.len(), 2);
                assert_eq!(events[0].weight, 2.5);
                assert_eq!(events[1].time - events[0].time, 6 * 3600);
            }
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(dir.path().join("bad.csv"), "when,weight\n").unwrap();
        assert!(read_events(&dir.path().join("bad.csv")).is_err());
    }
}
