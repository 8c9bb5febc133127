//! Machine-readable certification records.

use crate::scalar::Scalar;
use std::fmt;

/// One certified inequality: claimed bound, measured value, slack, verdict.
/// `pass` holds iff `measured <= claimed` at the check's stated tolerance;
/// truncation caveats record exactly what was excluded from the measurement.
#[derive(Clone, Debug)]
pub struct CertReport {
    pub id: String,
    pub rule: String,
    pub claimed: Scalar,
    pub measured: Scalar,
    pub pass: bool,
    pub caveats: Vec<String>,
}

impl CertReport {
    pub fn from_bound(id: &str, rule: &str, claimed: Scalar, measured: Scalar) -> Self {
        let pass = measured.cmp_val(&claimed) != std::cmp::Ordering::Greater;
        CertReport { id: id.to_string(), rule: rule.to_string(), claimed, measured, pass, caveats: Vec::new() }
    }

    pub fn with_caveat(mut self, caveat: impl Into<String>) -> Self {
        self.caveats.push(caveat.into());
        self
    }

    pub fn slack(&self) -> Scalar {
        self.claimed.sub(&self.measured, 192, crate::scalar::Round::Nearest)
    }

    /// Export line: `check_id claimed measured slack pass|fail`.
    pub fn line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.id,
            fmt_value(&self.claimed),
            fmt_value(&self.measured),
            fmt_value(&self.slack()),
            if self.pass { "pass" } else { "fail" }
        )
    }

    /// Export block: the line plus `#`-prefixed caveat lines.
    pub fn block(&self) -> String {
        let mut s = self.line();
        for c in &self.caveats {
            s.push_str("\n# ");
            s.push_str(c);
        }
        s
    }
}

fn fmt_value(s: &Scalar) -> String {
    let l2 = s.log2_f64();
    if l2.is_finite() && l2.abs() > 900.0 {
        return format!("2^{:.2}", l2);
    }
    let v = s.to_f64();
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v)
    } else {
        format!("{:.10e}", v)
    }
}

impl fmt::Display for CertReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.block())
    }
}

/// Summarize a batch: textual block plus overall verdict.
pub fn summarize(reports: &[CertReport]) -> (String, bool) {
    let mut out = String::new();
    let mut all = true;
    for r in reports {
        out.push_str(&r.block());
        out.push('\n');
        all &= r.pass;
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    out.push_str(&format!("summary: {} checks, {} failed\n", reports.len(), failed));
    (out, all)
}
