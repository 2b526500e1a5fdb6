use super::{ConnectivityError, PointwiseMeasure, Result};
use crate::geometry::{point_in_region, Region};
use crate::numeric::sorted_sum;
use crate::trajectory::{TrajectoryCorpus, TrajectorySegment};
use rayon::prelude::*;

/// Scale factors of the sample-average estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// `|T|`, the length of the sampling time window.
    pub t_length: f64,
    /// `|B|`, the size of the receptor region (1, or its area in km²).
    pub b_area: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            t_length: 1.0,
            b_area: 1.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T length", self.t_length), ("B area", self.b_area)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConnectivityError::InvalidMeasure(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Segments sampled in `b`: those naming it as receptor, or, without an
/// explicit receptor, whose origin lies in it.
pub fn receptor_segments<'a>(
    corpus: &'a TrajectoryCorpus,
    b: &Region,
) -> Vec<&'a TrajectorySegment> {
    corpus
        .segments
        .iter()
        .filter(|s| match &s.receptor_region {
            Some(id) => id == b.id(),
            None => point_in_region(&s.origin, b),
        })
        .collect()
}

/// `(Σ Ψ / n) · |T| · |B|` over per-segment values. The sum is taken over
/// sorted values with compensation, so the result does not depend on the
/// order of `values`.
pub fn estimate_from_values(values: Vec<f64>, cfg: &EstimatorConfig, receptor: &str) -> Result<f64> {
    if values.is_empty() {
        return Err(ConnectivityError::NoSamples(receptor.to_string()));
    }
    let n = values.len();
    Ok(scale_sum(sorted_sum(values), n, cfg))
}

/// `(sum / n) · |T| · |B|`, in that association so that a contact sum
/// gives exactly the sampled proportion times `|T||B|`.
pub fn scale_sum(sum: f64, n: usize, cfg: &EstimatorConfig) -> f64 {
    sum / n as f64 * cfg.t_length * cfg.b_area
}

/// Integrated connectivity from source `a` to receptor `b`, estimated from
/// the segments of `corpus` sampled in `b`.
pub fn estimate_integrated(
    corpus: &TrajectoryCorpus,
    b: &Region,
    a: &Region,
    measure: &PointwiseMeasure,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    if a.id() == b.id() {
        return Err(ConnectivityError::Diagonal(a.id().to_string()));
    }
    cfg.validate()?;
    measure.validate(&corpus.covariate_names)?;
    let values = receptor_segments(corpus, b)
        .par_iter()
        .map(|s| measure.evaluate(s, a))
        .collect::<Result<Vec<f64>>>()?;
    estimate_from_values(values, cfg, b.id())
}
