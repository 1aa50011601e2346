//! Bound results shared by every solver.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classical::{ExtReal, Order};
use crate::linops::HermitianOp;
use crate::maxdiv::DualCertificate;
use crate::povm::Povm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Exact,
    Lower,
    Upper,
    Heuristic,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Exact => "exact",
            BoundKind::Lower => "lower",
            BoundKind::Upper => "upper",
            BoundKind::Heuristic => "heuristic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Converged,
    Budget,
    Closedform,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Budget => "budget",
            SolveStatus::Closedform => "closedform",
        })
    }
}

/// A divergence value in nats together with what it certifies.
#[derive(Clone, Debug)]
pub struct BoundResult {
    pub value: ExtReal,
    pub kind: BoundKind,
    pub alpha: Order,
    /// Measurement class or cone label, e.g. "LO", "PPT".
    pub class: String,
    pub status: SolveStatus,
    pub iterations: usize,
    pub povm: Option<Povm>,
    pub omega: Option<HermitianOp>,
    pub certificate: Option<DualCertificate>,
    pub certified_exact: bool,
    pub note: Option<String>,
}

impl BoundResult {
    pub fn new(value: ExtReal, kind: BoundKind, alpha: Order, class: impl Into<String>) -> Self {
        Self {
            value,
            kind,
            alpha,
            class: class.into(),
            status: SolveStatus::Converged,
            iterations: 0,
            povm: None,
            omega: None,
            certificate: None,
            certified_exact: false,
            note: None,
        }
    }

    pub fn with_status(mut self, status: SolveStatus, iterations: usize) -> Self {
        self.status = status;
        self.iterations = iterations;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn nats(&self) -> f64 {
        self.value.to_f64()
    }

    /// `{value_nats, kind, alpha, class, status, iterations}` with +∞ as "inf".
    pub fn to_json(&self) -> Value {
        let v = match self.value {
            ExtReal::Finite(x) => json!(x),
            ExtReal::PosInf => json!("inf"),
        };
        let mut out = json!({
            "value_nats": v,
            "kind": self.kind,
            "alpha": self.alpha,
            "class": self.class,
            "status": self.status,
            "iterations": self.iterations,
        });
        if let Some(n) = &self.note {
            out["note"] = json!(n);
        }
        out
    }
}
