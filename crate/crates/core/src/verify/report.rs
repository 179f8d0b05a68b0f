use crate::growth::{IndicatorEstimate, RadialGrid};
use crate::odes::RaySet;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A hypothesis of the statement did not hold numerically; nothing was asserted.
    Inapplicable,
}

/// How `measured` is compared with `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|measured − expected| ≤ tolerance`.
    Within,
    /// `|measured − expected| ≤ tolerance·|expected|`.
    WithinRel,
    /// `measured ≤ expected + tolerance`.
    AtMost,
    /// `measured ≥ expected − tolerance`.
    AtLeast,
}

impl Relation {
    pub fn holds(self, measured: f64, expected: f64, tolerance: f64) -> bool {
        match self {
            Relation::Within => (measured - expected).abs() <= tolerance,
            Relation::WithinRel => (measured - expected).abs() <= tolerance * expected.abs(),
            Relation::AtMost => measured <= expected + tolerance,
            Relation::AtLeast => measured >= expected - tolerance,
        }
    }
}

/// One asserted comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

/// A named table of numbers, written as CSV next to the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTable {
    pub name: String,
    pub columns: Vec<String>,
    /// Missing values are `null` in JSON and empty in CSV.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl EvidenceTable {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        EvidenceTable { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| v.is_finite().then_some(v)).collect());
    }

    /// Evidence of an indicator estimate: `r,log_M,T,numerator,denominator,ratio,in_tail`.
    pub fn from_estimate(name: impl Into<String>, e: &IndicatorEstimate) -> Self {
        let mut t = Self::new(name, &["r", "log_M", "T", "numerator", "denominator", "ratio", "in_tail"]);
        for s in &e.samples {
            t.push(vec![
                Some(s.r),
                s.log_M,
                s.T,
                s.numerator,
                Some(s.denominator).filter(|d| d.is_finite()),
                s.ratio,
                Some(if s.in_tail { 1.0 } else { 0.0 }),
            ]);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.map(|x| format!("{x:.17e}")).unwrap_or_default()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Numerical setting a report was produced under.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Environment {
    pub grid: Option<RadialGrid>,
    pub fan_rays: Option<usize>,
    pub fan_excluded_half_width: Option<f64>,
    pub ray_tol: Option<f64>,
    pub step_budget: Option<u64>,
    pub ray_set: Option<RaySet>,
    pub seed: u64,
}

/// Run-dependent fields, excluded from reproducibility comparisons.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    /// Seconds since the Unix epoch when the scenario finished.
    pub timestamp: u64,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub kind: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    /// Derived quantities that were not asserted (diagnostics).
    pub measured: BTreeMap<String, f64>,
    /// Expected values and where they come from.
    pub expected: BTreeMap<String, ExpectedNote>,
    pub hypotheses: Vec<Hypothesis>,
    pub notes: Vec<String>,
    pub evidence: Vec<EvidenceTable>,
    pub environment: Environment,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedNote {
    pub value: f64,
    pub provenance: String,
}

/// A precondition checked before asserting a conclusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub holds: bool,
    /// Whether failure makes the whole scenario inapplicable, rather than
    /// only skipping one clause.
    pub gates: bool,
    pub detail: String,
}

impl Report {
    pub fn new(id: impl Into<String>, kind: impl Into<String>, environment: Environment) -> Self {
        Report {
            id: id.into(),
            kind: kind.into(),
            verdict: Verdict::Pass,
            checks: Vec::new(),
            measured: BTreeMap::new(),
            expected: BTreeMap::new(),
            hypotheses: Vec::new(),
            notes: Vec::new(),
            evidence: Vec::new(),
            environment,
            metadata: Metadata::default(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, measured: f64, expected: f64, tolerance: f64, relation: Relation) -> bool {
        let pass = relation.holds(measured, expected, tolerance);
        self.checks.push(Check { name: name.into(), measured, expected, tolerance, relation, pass });
        pass
    }

    pub fn measure(&mut self, name: impl Into<String>, value: f64) {
        self.measured.insert(name.into(), value);
    }

    pub fn expect(&mut self, name: impl Into<String>, value: f64, provenance: impl Into<String>) {
        self.expected.insert(name.into(), ExpectedNote { value, provenance: provenance.into() });
    }

    pub fn hypothesis(&mut self, name: impl Into<String>, holds: bool, detail: impl Into<String>) -> bool {
        self.hypotheses.push(Hypothesis { name: name.into(), holds, gates: true, detail: detail.into() });
        holds
    }

    /// A hypothesis of a single clause; the clause is only asserted when it holds.
    pub fn clause_hypothesis(&mut self, name: impl Into<String>, holds: bool, detail: impl Into<String>) -> bool {
        self.hypotheses.push(Hypothesis { name: name.into(), holds, gates: false, detail: detail.into() });
        holds
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Pass iff every check passed; inapplicable when a hypothesis failed and
    /// nothing was asserted afterwards.
    pub fn finish(mut self) -> Self {
        self.verdict = if self.hypotheses.iter().any(|h| h.gates && !h.holds) {
            Verdict::Inapplicable
        } else if !self.checks.is_empty() && self.checks.iter().all(|c| c.pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self
    }

    pub fn failed(id: impl Into<String>, kind: impl Into<String>, environment: Environment, error: String) -> Self {
        let mut r = Report::new(id, kind, environment);
        r.note(format!("error: {error}"));
        r.verdict = Verdict::Fail;
        r
    }

    /// JSON without the metadata block: identical across reruns of the same config.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("metadata");
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line: `id  verdict  failing checks`.
    pub fn summary_line(&self) -> String {
        let failing: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inapplicable => "INAPPLICABLE",
        };
        let mut line = format!("{:<32} {:<12} {} checks", self.id, verdict, self.checks.len());
        if !failing.is_empty() {
            line.push_str(&format!(", failing: {}", failing.join(", ")));
        }
        if let Some(err) = self.notes.iter().find(|n| n.starts_with("error: ")) {
            line.push_str(&format!(" ({err})"));
        }
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Relation::Within.holds(1.04, 1.0, 0.05));
        assert!(!Relation::Within.holds(1.06, 1.0, 0.05));
        assert!(Relation::WithinRel.holds(2.15, 2.0, 0.1));
        assert!(!Relation::WithinRel.holds(2.25, 2.0, 0.1));
        assert!(Relation::AtMost.holds(1.1, 1.0, 0.15));
        assert!(!Relation::AtLeast.holds(0.8, 1.0, 0.15));
        assert!(!Relation::Within.holds(f64::NAN, 1.0, 0.1));
    }

    #[test]
    fn verdict_rules() {
        let mut r = Report::new("a", "k", Environment::default());
        r.check("x", 1.0, 1.0, 0.0, Relation::Within);
        assert_eq!(r.clone().finish().verdict, Verdict::Pass);
        r.check("y", 2.0, 1.0, 0.5, Relation::Within);
        assert_eq!(r.clone().finish().verdict, Verdict::Fail);
        r.hypothesis("h", false, "");
        assert_eq!(r.finish().verdict, Verdict::Inapplicable);
        assert_eq!(Report::new("e", "k", Environment::default()).finish().verdict, Verdict::Fail);
    }

    #[test]
    fn canonical_json_drops_metadata() {
        let mut a = Report::new("a", "k", Environment::default());
        a.check("x", 1.0, 1.0, 0.0, Relation::Within);
        let mut b = a.clone();
        a.metadata.timestamp = 1;
        b.metadata.timestamp = 2;
        b.metadata.runtime_seconds = 3.0;
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert!(!a.canonical_json().contains("metadata"));
    }

    #[test]
    fn csv_layout() {
        let mut t = EvidenceTable::new("t", &["r", "v"]);
        t.push_values(&[1.0, f64::NAN]);
        assert_eq!(t.to_csv(), "r,v\n1.00000000000000000e0,\n");
    }
}
