use super::{EvidenceTable, IntervalMeasureConfig, Relation, Report, Runner};
use crate::error::{Error, Result};
use crate::exec::compensated_sum;
use serde::{Deserialize, Serialize};

/// `[a, b]` stored as `(log a, log(b/a))`, so that intervals far beyond the
/// f64 range (such as `[e^{j²}, …]`) keep full relative accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogInterval {
    pub log_start: f64,
    pub log_ratio: f64,
}

impl LogInterval {
    pub fn log_end(&self) -> f64 {
        self.log_start + self.log_ratio
    }
}

/// Disjoint sorted intervals in `[1, ∞)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<LogInterval>,
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// From plain endpoints `[aᵢ, bᵢ]`.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let mut s = Self::new();
        for &(a, b) in bounds {
            if !(b >= a) {
                return Err(Error::InvalidArgument(format!("interval [{a}, {b}] is empty")));
            }
            s.push(LogInterval { log_start: a.ln(), log_ratio: (b / a).ln() })?;
        }
        Ok(s)
    }

    /// Append an interval to the right of the existing ones.
    pub fn push(&mut self, iv: LogInterval) -> Result<()> {
        if !(iv.log_start >= 0.0) || !(iv.log_ratio >= 0.0) || !iv.log_end().is_finite() {
            return Err(Error::InvalidArgument(format!("interval {iv:?} not inside [1, ∞)")));
        }
        if let Some(last) = self.intervals.last() {
            if !(iv.log_start > last.log_end()) {
                return Err(Error::Spacing(self.intervals.len()));
            }
        }
        self.intervals.push(iv);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[LogInterval] {
        &self.intervals
    }

    /// `∫_E dr/r`.
    pub fn log_measure(&self) -> f64 {
        compensated_sum(self.intervals.iter().map(|iv| iv.log_ratio))
    }

    /// `∪_{j=j₃}^{N} [R_j, (1 + 1/j)R_j]` with `R_j = exp(j²)`.
    pub fn squares_family(j3: u64, n: u64) -> Result<Self> {
        if j3 == 0 {
            return Err(Error::InvalidArgument("j₃ must be at least 1".into()));
        }
        let mut s = Self::new();
        s.intervals.reserve(n.saturating_sub(j3) as usize + 1);
        for j in j3..=n {
            let jf = j as f64;
            s.push(LogInterval { log_start: jf * jf, log_ratio: (1.0 / jf).ln_1p() }).map_err(|e| match e {
                Error::Spacing(_) => Error::Spacing(j as usize),
                other => other,
            })?;
        }
        Ok(s)
    }
}

pub(super) fn interval_measure(runner: &Runner, id: &str, c: &IntervalMeasureConfig) -> Result<Report> {
    let mut rep = Report::new(id, "lemma_interval_measure", runner.environment(None, None));
    let mut table = EvidenceTable::new("partial_measures", &["N", "measure", "closed_form", "abs_error"]);
    for &n in &c.ns {
        let set = IntervalSet::squares_family(c.j3, n)?;
        let got = set.log_measure();
        let want = ((n + 1) as f64 / c.j3 as f64).ln();
        rep.check(format!("measure N={n}"), got, want, c.tol, Relation::Within);
        table.push_values(&[n as f64, got, want, (got - want).abs()]);
    }
    for e in &c.expected {
        let got = IntervalSet::squares_family(c.j3, e.n)?.log_measure();
        rep.expect(format!("measure N={}", e.n), e.value, &e.provenance);
        rep.check(format!("expected N={}", e.n), got, e.value, e.tol, Relation::Within);
    }
    // partial sums keep growing by about log 2 per doubling of N
    let mut trend = EvidenceTable::new("doubling_trend", &["N", "measure", "increment"]);
    let mut prev: Option<f64> = None;
    let mut min_inc = f64::INFINITY;
    let mut n = c.j3.max(1) * 2;
    for _ in 0..12 {
        let m = IntervalSet::squares_family(c.j3, n)?.log_measure();
        let inc = prev.map(|p| m - p).unwrap_or(f64::NAN);
        if inc.is_finite() {
            min_inc = min_inc.min(inc);
        }
        trend.push_values(&[n as f64, m, inc]);
        prev = Some(m);
        n *= 2;
    }
    rep.check("min increment per doubling", min_inc, 0.5, 0.0, Relation::AtLeast);
    rep.evidence.push(table);
    rep.evidence.push(trend);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_sets() {
        assert_eq!(IntervalSet::new().log_measure(), 0.0);
        let e = IntervalSet::from_bounds(&[(1.0, std::f64::consts::E)]).unwrap();
        assert!((e.log_measure() - 1.0).abs() < 1e-15);
        let two = IntervalSet::from_bounds(&[(2.0, 4.0), (8.0, 16.0)]).unwrap();
        assert!((two.log_measure() - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_overlap_and_bad_bounds() {
        assert!(matches!(IntervalSet::from_bounds(&[(2.0, 4.0), (3.0, 5.0)]), Err(Error::Spacing(1))));
        assert!(IntervalSet::from_bounds(&[(0.5, 2.0)]).is_err());
        assert!(IntervalSet::from_bounds(&[(3.0, 2.0)]).is_err());
    }

    #[test]
    fn squares_family_telescopes() {
        let s = IntervalSet::squares_family(2, 10).unwrap();
        assert_eq!(s.len(), 9);
        let want = (11.0f64 / 2.0).ln();
        assert!((s.log_measure() - want).abs() < 1e-14);
        assert!((s.log_measure() - 1.704_748).abs() < 1e-5);
    }
}
