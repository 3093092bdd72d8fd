//! One verified inequality instance: left side, named right-side terms and the
//! smallest constant that makes the inequality hold.

use serde::Serialize;

/// Outcome of a configured check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "skipped: hypothesis")]
    SkippedHypothesis,
    #[serde(rename = "skipped: resolution")]
    SkippedResolution,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::SkippedHypothesis => "skipped: hypothesis",
            Status::SkippedResolution => "skipped: resolution",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// A named right-hand-side term and the operation that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
    pub source: String,
}

impl Term {
    pub fn new(name: &str, value: f64, source: &str) -> Self {
        Self {
            name: name.into(),
            value,
            source: source.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub inequality_id: String,
    #[serde(rename = "paper_anchor")]
    pub anchor: String,
    pub lhs: f64,
    pub rhs_terms: Vec<Term>,
    /// Smallest `C` with `lhs ≤ C · Σ terms`.
    pub min_constant: f64,
    pub ceiling: f64,
    pub status: Status,
    pub note: Option<String>,
}

impl EstimateReport {
    /// Status is `pass` exactly when the minimal constant does not exceed `ceiling`.
    pub fn new(id: &str, anchor: &str, lhs: f64, rhs_terms: Vec<Term>, ceiling: f64) -> Self {
        let rhs: f64 = rhs_terms.iter().map(|t| t.value).sum();
        let min_constant = minimal_constant(lhs, rhs);
        Self {
            inequality_id: id.into(),
            anchor: anchor.into(),
            lhs,
            rhs_terms,
            min_constant,
            ceiling,
            status: Status::from_bool(min_constant <= ceiling),
            note: None,
        }
    }

    pub fn rhs(&self) -> f64 {
        self.rhs_terms.iter().map(|t| t.value).sum()
    }

    /// Re-evaluate a pass/fail status against a new ceiling; skips are kept.
    pub fn with_ceiling(mut self, ceiling: f64) -> Self {
        self.ceiling = ceiling;
        if matches!(self.status, Status::Pass | Status::Fail) && self.note.as_deref().map_or(true, |n| !n.contains("automatic pass")) {
            self.status = Status::from_bool(self.min_constant <= ceiling);
        }
        self
    }

    pub fn with_status(mut self, status: Status, note: &str) -> Self {
        self.status = status;
        self.note = Some(note.into());
        self
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// `lhs / rhs`, with `0` for a nonpositive left side and `∞` for a vanishing right side.
pub fn minimal_constant(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// `max / min` of positive values; `∞` if any is nonpositive or nonfinite.
pub fn spread(values: &[f64]) -> f64 {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return f64::INFINITY;
    }
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_below_ceiling() {
        let r = EstimateReport::new("x", "a", 2.0, vec![Term::new("t", 1.0, "op")], 2.0);
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.min_constant, 2.0);
        let r = EstimateReport::new("x", "a", 2.0, vec![Term::new("t", 0.5, "op")], 2.0);
        assert_eq!(r.status, Status::Fail);
        assert_eq!(minimal_constant(-1.0, 0.0), 0.0);
        assert_eq!(minimal_constant(1.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn status_strings() {
        assert_eq!(serde_json::to_string(&Status::SkippedHypothesis).unwrap(), "\"skipped: hypothesis\"");
        assert_eq!(Status::SkippedResolution.as_str(), "skipped: resolution");
        assert_eq!(spread(&[1.0, 2.0, 1.5]), 2.0);
        assert_eq!(spread(&[1.0, 0.0]), f64::INFINITY);
    }
}
