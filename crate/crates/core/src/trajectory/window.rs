use super::{to_datetime, TrajectoryCorpus};
use chrono::Datelike;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Window scheme applied to sample times (UTC calendar).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalContext {
    /// One window, keyed `all`.
    Whole,
    /// One window per calendar year, keyed `YYYY`.
    Yearly,
    /// One window per calendar month pooled across years, keyed `01`..`12`.
    MonthlyPooled,
}

impl fmt::Display for TemporalContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemporalContext::Whole => "whole",
            TemporalContext::Yearly => "yearly",
            TemporalContext::MonthlyPooled => "monthly-pooled",
        })
    }
}

impl FromStr for TemporalContext {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whole" => Ok(TemporalContext::Whole),
            "yearly" => Ok(TemporalContext::Yearly),
            "monthly-pooled" | "monthly" => Ok(TemporalContext::MonthlyPooled),
            other => Err(format!(
                "unknown temporal context {other:?} (expected whole, yearly or monthly-pooled)"
            )),
        }
    }
}

impl TemporalContext {
    pub fn window_of(&self, sample_time: i64) -> String {
        let dt = to_datetime(sample_time);
        match self {
            TemporalContext::Whole => "all".to_string(),
            TemporalContext::Yearly => format!("{:04}", dt.year()),
            TemporalContext::MonthlyPooled => format!("{:02}", dt.month()),
        }
    }
}

/// Splits a corpus into windows by sample time. Segment order within each
/// window follows the input order.
pub fn window_corpus(
    corpus: &TrajectoryCorpus,
    context: TemporalContext,
) -> BTreeMap<String, TrajectoryCorpus> {
    let mut groups: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for s in &corpus.segments {
        groups
            .entry(context.window_of(s.sample_time))
            .or_default()
            .push(s.clone());
    }
    groups
        .into_iter()
        .map(|(k, segs)| (k, corpus.subset(segs)))
        .collect()
}
