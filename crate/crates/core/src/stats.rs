//! Rank correlation and inter-annotator agreement.
//!
//! ```
//! use vprog::stats::{cohen_kappa, spearman_rho};
//! assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
//! assert_eq!(cohen_kappa(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap(), 0.0);
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("insufficient overlap: no item has ratings from two raters")]
    InsufficientOverlap,
}

/// 1-based ranks with ties given their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Undefined("constant sequence".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman ρ: Pearson correlation of average ranks. A constant sequence
/// gives [`StatsError::Undefined`].
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: x.len(),
        });
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i % x.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Cohen κ with marginal-product chance agreement. When chance agreement is
/// 1 (both raters always use the same single label) κ is 1.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    let n = a.len() as f64;
    let mut ma: BTreeMap<&T, f64> = BTreeMap::new();
    let mut mb: BTreeMap<&T, f64> = BTreeMap::new();
    let mut agree = 0.0;
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1.0;
        *mb.entry(y).or_default() += 1.0;
        if x == y {
            agree += 1.0;
        }
    }
    let po = agree / n;
    let pe: f64 = ma
        .iter()
        .map(|(k, ca)| ca * mb.get(k).copied().unwrap_or(0.0))
        .sum::<f64>()
        / (n * n);
    if pe == 1.0 {
        return Ok(1.0);
    }
    Ok((po - pe) / (1.0 - pe))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Nominal,
    Interval,
}

impl Metric {
    fn delta2(self, c: f64, k: f64) -> f64 {
        match self {
            Metric::Nominal => {
                if c == k {
                    0.0
                } else {
                    1.0
                }
            }
            Metric::Interval => (c - k) * (c - k),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nominal" => Ok(Metric::Nominal),
            "interval" => Ok(Metric::Interval),
            other => Err(format!("unknown metric {other:?} (nominal|interval)")),
        }
    }
}

/// Raters × items ratings; `None` is a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationMatrix {
    rows: Vec<Vec<Option<f64>>>,
}

impl AnnotationMatrix {
    /// Rows are raters. All rows must have the same length.
    pub fn new(rows: Vec<Vec<Option<f64>>>) -> Result<Self, StatsError> {
        if rows.len() < 2 {
            return Err(StatsError::TooFew {
                needed: 2,
                got: rows.len(),
            });
        }
        let items = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != items) {
            return Err(StatsError::LengthMismatch(items, r.len()));
        }
        if let Some(i) = rows
            .iter()
            .flatten()
            .position(|v| v.is_some_and(|v| !v.is_finite()))
        {
            return Err(StatsError::NonFinite(i % items.max(1)));
        }
        Ok(AnnotationMatrix { rows })
    }

    pub fn raters(&self) -> usize {
        self.rows.len()
    }

    pub fn items(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    fn item(&self, j: usize) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r[j]).collect()
    }
}

/// Krippendorff α via the coincidence matrix. Items with fewer than two
/// ratings are not pairable and are ignored. When all pairable values are
/// identical the expected disagreement is zero and α is 1.
///
/// ```
/// use vprog::stats::{krippendorff_alpha, AnnotationMatrix, Metric};
/// let m = AnnotationMatrix::new(vec![
///     vec![Some(1.0), Some(0.0), Some(1.0), Some(0.0)],
///     vec![Some(1.0), Some(0.0), Some(1.0), Some(0.0)],
/// ]).unwrap();
/// assert_eq!(krippendorff_alpha(&m, Metric::Nominal).unwrap(), 1.0);
/// ```
pub fn krippendorff_alpha(m: &AnnotationMatrix, metric: Metric) -> Result<f64, StatsError> {
    let mut values: Vec<f64> = m.rows.iter().flatten().flatten().map(|v| v + 0.0).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let index = |v: f64| {
        values
            .binary_search_by(|x| x.total_cmp(&(v + 0.0)))
            .expect("value present")
    };
    let k = values.len();
    let mut o = vec![vec![0.0; k]; k];
    let mut pairable = false;
    for j in 0..m.items() {
        let unit = m.item(j);
        let mu = unit.len();
        if mu < 2 {
            continue;
        }
        pairable = true;
        for (a, &x) in unit.iter().enumerate() {
            for (b, &y) in unit.iter().enumerate() {
                if a != b {
                    o[index(x)][index(y)] += 1.0 / (mu - 1) as f64;
                }
            }
        }
    }
    if !pairable {
        return Err(StatsError::InsufficientOverlap);
    }
    let nc: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = nc.iter().sum();
    let (mut d_o, mut d_e) = (0.0, 0.0);
    for c in 0..k {
        for kk in 0..k {
            let d = metric.delta2(values[c], values[kk]);
            d_o += o[c][kk] * d;
            d_e += nc[c] * nc[kk] * d;
        }
    }
    d_o /= n;
    d_e /= n * (n - 1.0);
    if d_e == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - d_o / d_e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 5.0]),
            [2.0, 3.5, 3.5, 1.0]
        );
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(
            spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(),
            1.0
        );
        assert!(matches!(
            spearman_rho(&[1.0, 1.0], &[1.0, 2.0]),
            Err(StatsError::Undefined(_))
        ));
        assert!(matches!(
            spearman_rho(&[1.0], &[1.0]),
            Err(StatsError::TooFew { .. })
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 2.0], &[1.0]),
            Err(StatsError::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            spearman_rho(&[1.0, f64::NAN], &[1.0, 2.0]),
            Err(StatsError::NonFinite(1))
        ));
    }

    #[test]
    fn spearman_with_ties() {
        // ranks (1, 2.5, 2.5, 4) and (1, 3, 2, 4)
        let rho = spearman_rho(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        let expected = 4.5 / (4.5f64 * 5.0).sqrt();
        assert!((rho - expected).abs() < 1e-12);
    }

    #[test]
    fn kappa_cases() {
        assert_eq!(cohen_kappa(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&["x", "x"], &["x", "x"]).unwrap(), 1.0);
        assert!(cohen_kappa(&[0, 1, 0, 1], &[1, 0, 1, 0]).unwrap() < 0.0);
        assert!(matches!(
            cohen_kappa::<u8>(&[], &[]),
            Err(StatsError::TooFew { .. })
        ));
    }

    #[test]
    fn alpha_one_disagreement() {
        // Nominal, 2 raters, items (1,1) (0,0) (1,0) (0,0): o00=4, o01=o10=1, o11=2.
        let m = AnnotationMatrix::new(vec![
            vec![Some(1.0), Some(0.0), Some(1.0), Some(0.0)],
            vec![Some(1.0), Some(0.0), Some(0.0), Some(0.0)],
        ])
        .unwrap();
        let a = krippendorff_alpha(&m, Metric::Nominal).unwrap();
        let expected = 1.0 - 7.0 * 2.0 / (2.0 * 5.0 * 3.0);
        assert!((a - expected).abs() < 1e-12, "{a}");
    }

    #[test]
    fn alpha_errors() {
        let m = AnnotationMatrix::new(vec![vec![Some(1.0), Some(0.0)], vec![None, None]]).unwrap();
        assert_eq!(
            krippendorff_alpha(&m, Metric::Nominal),
            Err(StatsError::InsufficientOverlap)
        );
        assert!(AnnotationMatrix::new(vec![vec![Some(1.0)]]).is_err());
    }
}
