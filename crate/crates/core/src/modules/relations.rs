use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{PerceptionError, VqaQuery};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CountOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CountOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CountOp::Eq => "==",
            CountOp::Ne => "!=",
            CountOp::Lt => "<",
            CountOp::Le => "<=",
            CountOp::Gt => ">",
            CountOp::Ge => ">=",
        }
    }
}

/// A comparison against a detection count, written `(op)? INT`.
///
/// ```
/// use vprog::modules::CountExpr;
/// let e: CountExpr = "<5".parse().unwrap();
/// assert!(e.holds(4));
/// assert_eq!("3".parse::<CountExpr>().unwrap().to_string(), "==3");
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountExpr {
    pub op: CountOp,
    pub operand: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid count expression {0:?}: expected an optional operator (==, !=, <, <=, >, >=) and a non-negative integer")]
pub struct CountExprError(pub String);

impl CountExpr {
    pub fn holds(&self, n: usize) -> bool {
        let n = n as u64;
        let k = u64::from(self.operand);
        match self.op {
            CountOp::Eq => n == k,
            CountOp::Ne => n != k,
            CountOp::Lt => n < k,
            CountOp::Le => n <= k,
            CountOp::Gt => n > k,
            CountOp::Ge => n >= k,
        }
    }
}

impl FromStr for CountExpr {
    type Err = CountExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let ops = [
            ("==", CountOp::Eq),
            ("!=", CountOp::Ne),
            ("<=", CountOp::Le),
            (">=", CountOp::Ge),
            ("<", CountOp::Lt),
            (">", CountOp::Gt),
        ];
        let (op, rest) = ops
            .iter()
            .find_map(|(p, op)| t.strip_prefix(p).map(|r| (*op, r)))
            .unwrap_or((CountOp::Eq, t));
        let rest = rest.trim();
        if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return Err(CountExprError(s.to_string()));
        }
        let operand = rest.parse().map_err(|_| CountExprError(s.to_string()))?;
        Ok(CountExpr { op, operand })
    }
}

impl fmt::Display for CountExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.op.as_str(), self.operand)
    }
}

fn relation_core(s: &str) -> String {
    let mut n = normalize(s);
    for prefix in ["to the ", "on the ", "in ", "on "] {
        if let Some(r) = n.strip_prefix(prefix) {
            n = r.to_string();
            break;
        }
    }
    for suffix in [" of", " than", " as"] {
        if let Some(r) = n.strip_suffix(suffix) {
            n = r.to_string();
            break;
        }
    }
    n
}

/// Spatial relation between a subject and a reference object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpatialRelation {
    Left,
    Right,
    Above,
    Below,
    Front,
    Behind,
    /// Any other text; evaluated through VQA.
    Other(String),
}

impl SpatialRelation {
    pub const GEOMETRIC: [SpatialRelation; 6] = [
        SpatialRelation::Left,
        SpatialRelation::Right,
        SpatialRelation::Above,
        SpatialRelation::Below,
        SpatialRelation::Front,
        SpatialRelation::Behind,
    ];

    /// Accepts bare names and their phrase forms ("to the left of",
    /// "in front of").
    pub fn parse(s: &str) -> Self {
        match relation_core(s).as_str() {
            "left" => SpatialRelation::Left,
            "right" => SpatialRelation::Right,
            "above" => SpatialRelation::Above,
            "below" => SpatialRelation::Below,
            "front" => SpatialRelation::Front,
            "behind" => SpatialRelation::Behind,
            _ => SpatialRelation::Other(s.trim().to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            SpatialRelation::Left => "left",
            SpatialRelation::Right => "right",
            SpatialRelation::Above => "above",
            SpatialRelation::Below => "below",
            SpatialRelation::Front => "front",
            SpatialRelation::Behind => "behind",
            SpatialRelation::Other(s) => s,
        }
    }

    /// English connector used in prompts and explanations.
    pub fn phrase(&self) -> String {
        match self {
            SpatialRelation::Left => "to the left of".into(),
            SpatialRelation::Right => "to the right of".into(),
            SpatialRelation::Above => "above".into(),
            SpatialRelation::Below => "below".into(),
            SpatialRelation::Front => "in front of".into(),
            SpatialRelation::Behind => "behind".into(),
            SpatialRelation::Other(s) => s.clone(),
        }
    }
}

impl fmt::Display for SpatialRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScaleRelation {
    Smaller,
    Bigger,
    Same,
    Other(String),
}

impl ScaleRelation {
    pub const GEOMETRIC: [ScaleRelation; 3] = [
        ScaleRelation::Smaller,
        ScaleRelation::Bigger,
        ScaleRelation::Same,
    ];

    pub fn parse(s: &str) -> Self {
        match relation_core(s).as_str() {
            "smaller" => ScaleRelation::Smaller,
            "bigger" | "larger" => ScaleRelation::Bigger,
            "same" | "same size" | "the same size" => ScaleRelation::Same,
            _ => ScaleRelation::Other(s.trim().to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            ScaleRelation::Smaller => "smaller",
            ScaleRelation::Bigger => "bigger",
            ScaleRelation::Same => "same",
            ScaleRelation::Other(s) => s,
        }
    }

    pub fn phrase(&self) -> String {
        match self {
            ScaleRelation::Smaller => "smaller than".into(),
            ScaleRelation::Bigger => "bigger than".into(),
            ScaleRelation::Same => "the same size as".into(),
            ScaleRelation::Other(s) => s.clone(),
        }
    }

    /// Decide the relation for area ratio `rho = area(S) / area(R)`.
    ///
    /// `bigger` iff `rho > tau`, `smaller` iff `rho < 1/tau`, `same` on the
    /// closed band in between. Returns `None` for non-geometric relations.
    pub fn holds(&self, rho: f64, tau: f64) -> Option<bool> {
        match self {
            ScaleRelation::Bigger => Some(rho > tau),
            ScaleRelation::Smaller => Some(rho < 1.0 / tau),
            ScaleRelation::Same => Some(rho >= 1.0 / tau && rho <= tau),
            ScaleRelation::Other(_) => None,
        }
    }
}

impl fmt::Display for ScaleRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Split a `yes|no` style choice list.
pub fn split_choices(s: &str) -> Result<Vec<String>, PerceptionError> {
    let choices: Vec<String> = s.split('|').map(|c| c.trim().to_string()).collect();
    VqaQuery::new("", choices.clone())?;
    if choices.iter().any(|c| c.is_empty()) {
        return Err(PerceptionError::InvalidQuery("empty choice".into()));
    }
    Ok(choices)
}
