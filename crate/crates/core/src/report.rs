//! Verdicts and the reports every check returns.

use serde::{Deserialize, Serialize};

use crate::opspace::AmplifiedElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Process exit code used by the command line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }

    /// Combines verdicts: any failure fails, else any inconclusive part
    /// makes the whole inconclusive.
    pub fn all(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Pass;
        for v in verdicts {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Inconclusive => out = Verdict::Inconclusive,
                Verdict::Pass => {}
            }
        }
        out
    }

    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Which side of the true optimum a reported value certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    /// The value is attained by the witness, so the true infimum is at most
    /// this (minimisation).
    Upper,
    /// The value is attained by the witness, so the true supremum is at
    /// least this (maximisation).
    Lower,
    /// Direct linear algebra, no optimisation involved.
    Exact,
}

/// How far an ambient-oracle verdict can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    /// Decided by exact linear algebra on a closure known to match the
    /// envelope.
    Exact,
    /// Decided by intrinsic optimisation.
    Numerical,
    /// Decided on a generated TRO that may be larger than the envelope:
    /// a pass is sufficient evidence, a fail is not conclusive.
    SufficientOnly,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub starts: usize,
    pub iterations: usize,
    /// Start index that produced the reported value.
    pub best_start: usize,
    pub converged: bool,
    /// Finite differences replaced the analytic gradient at some iterate.
    pub fd_fallback: bool,
}

impl SolverDiagnostics {
    pub fn merge(&mut self, other: &SolverDiagnostics) {
        self.starts += other.starts;
        self.iterations += other.iterations;
        self.converged &= other.converged;
        self.fd_fallback |= other.fd_fallback;
    }
}

/// Outcome of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub check: String,
    pub verdict: Verdict,
    /// The decisive statistic (a defect, a residual, a dimension gap).
    pub value: f64,
    /// Tolerance minus value: positive on the passing side.
    pub margin: f64,
    pub bound: BoundSide,
    pub exactness: Exactness,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<AmplifiedElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<SolverDiagnostics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<CertificateReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CertificateReport {
    pub fn new(check: impl Into<String>, verdict: Verdict, value: f64, tol: f64, bound: BoundSide) -> Self {
        CertificateReport {
            check: check.into(),
            verdict,
            value,
            margin: tol - value,
            bound,
            exactness: if bound == BoundSide::Exact { Exactness::Exact } else { Exactness::Numerical },
            witness: None,
            diagnostics: None,
            parts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_witness(mut self, w: AmplifiedElement) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn with_diagnostics(mut self, d: SolverDiagnostics) -> Self {
        self.diagnostics = Some(d);
        self
    }

    pub fn with_parts(mut self, parts: Vec<CertificateReport>) -> Self {
        self.parts = parts;
        self
    }

    pub fn with_exactness(mut self, e: Exactness) -> Self {
        self.exactness = e;
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    /// Finds a part (depth first) by check name.
    pub fn part(&self, check: &str) -> Option<&CertificateReport> {
        self.parts.iter().find_map(|p| if p.check == check { Some(p) } else { p.part(check) })
    }
}

/// Three-way decision on a statistic that should be small.
///
/// For an upper bound (minimisation) a small value is conclusive and a
/// large one needs convergence; for a lower bound (maximisation) it is the
/// other way round.
pub fn decide(value: f64, tol: f64, fail_threshold: f64, bound: BoundSide, converged: bool) -> Verdict {
    if !value.is_finite() {
        return Verdict::Inconclusive;
    }
    match bound {
        BoundSide::Exact => Verdict::from_bool(value <= tol),
        BoundSide::Upper => {
            if value <= tol {
                Verdict::Pass
            } else if value >= fail_threshold && converged {
                Verdict::Fail
            } else {
                Verdict::Inconclusive
            }
        }
        BoundSide::Lower => {
            if value >= fail_threshold {
                Verdict::Fail
            } else if value <= tol && converged {
                Verdict::Pass
            } else {
                Verdict::Inconclusive
            }
        }
    }
}
