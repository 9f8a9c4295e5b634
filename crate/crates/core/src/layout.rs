//! The two-step layout language.
//!
//! Step one lists objects with counts, `dog (2) frisbee (1)`. Step two places
//! each instance with a box quantized into 100 bins per axis,
//! `dog (10,40,45,90) dog (55,42,88,88) frisbee (40,20,55,35)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::BBox;
use crate::text::description_key;

pub const NUM_BINS: u8 = 100;
pub const DEFAULT_MAX_COUNT: u32 = 7;

// Absorbs representation error of decimal inputs such as 0.29 * 100.
const QUANTIZE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("bin {0} outside 0..=99")]
    BinOutOfRange(i64),
    #[error("{message} at offset {offset}")]
    Syntax { offset: usize, message: String },
    #[error("count {count} for {description:?} outside [1, {max}]")]
    CountOutOfRange {
        description: String,
        count: i64,
        max: u32,
    },
    #[error("box for {description:?} has {axis}2 < {axis}1")]
    InvertedBox { description: String, axis: char },
    #[error("{description:?} is listed with count {expected} but placed {actual} times")]
    CountMismatch {
        description: String,
        expected: u32,
        actual: u32,
    },
    #[error("placement for {0:?} has no entry in the object list")]
    UnknownDescription(String),
    #[error("{0:?} appears more than once in the object list")]
    DuplicateDescription(String),
}

/// Map a normalized coordinate to its bin, `min(floor(100 v), 99)`.
pub fn quantize(v: f64) -> Result<u8, LayoutError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(LayoutError::OutOfRange(v));
    }
    let bin = (v * f64::from(NUM_BINS) + QUANTIZE_SLACK).floor() as u8;
    Ok(bin.min(NUM_BINS - 1))
}

/// Bin center, `(bin + 0.5) / 100`.
pub fn dequantize(bin: u8) -> Result<f64, LayoutError> {
    if bin >= NUM_BINS {
        return Err(LayoutError::BinOutOfRange(i64::from(bin)));
    }
    Ok((f64::from(bin) + 0.5) / f64::from(NUM_BINS))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectCount {
    pub description: String,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedBox {
    pub x1: u8,
    pub y1: u8,
    pub x2: u8,
    pub y2: u8,
}

impl QuantizedBox {
    pub fn new(x1: u8, y1: u8, x2: u8, y2: u8) -> Result<Self, LayoutError> {
        for b in [x1, y1, x2, y2] {
            if b >= NUM_BINS {
                return Err(LayoutError::BinOutOfRange(i64::from(b)));
            }
        }
        if x2 < x1 {
            return Err(LayoutError::InvertedBox {
                description: String::new(),
                axis: 'x',
            });
        }
        if y2 < y1 {
            return Err(LayoutError::InvertedBox {
                description: String::new(),
                axis: 'y',
            });
        }
        Ok(QuantizedBox { x1, y1, x2, y2 })
    }

    pub fn from_bbox(b: &BBox) -> Self {
        let q = |v| quantize(v).expect("BBox coordinates lie in [0, 1]");
        // quantize is monotone, so ordering survives.
        QuantizedBox {
            x1: q(b.x1()),
            y1: q(b.y1()),
            x2: q(b.x2()),
            y2: q(b.y2()),
        }
    }

    pub fn to_bbox(&self) -> BBox {
        let d = |b| dequantize(b).expect("bins checked at construction");
        BBox::new(d(self.x1), d(self.y1), d(self.x2), d(self.y2))
            .expect("dequantized bins are ordered and in range")
    }

    pub fn is_degenerate(&self) -> bool {
        self.x1 == self.x2 || self.y1 == self.y2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub description: String,
    #[serde(rename = "box")]
    pub bbox: QuantizedBox,
}

/// Parsing knobs for the layout language.
#[derive(Debug, Clone, Copy)]
pub struct LayoutOptions {
    pub max_count: u32,
    /// When false, counts above `max_count` are kept and reported as warnings.
    pub strict: bool,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            max_count: DEFAULT_MAX_COUNT,
            strict: false,
        }
    }
}

/// A successful parse together with non-fatal findings.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

/// Validated output of both layout steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub objects: Vec<ObjectCount>,
    pub placements: Vec<Placement>,
}

/// Splits `DESC ( ... ) DESC ( ... )` into `(description, inner, offset)`.
fn entries(s: &str) -> Result<Vec<(String, &str, usize)>, LayoutError> {
    let mut out = Vec::new();
    let mut rest = s;
    let mut base = 0;
    loop {
        let trimmed = rest.trim_start();
        base += rest.len() - trimmed.len();
        rest = trimmed;
        if rest.is_empty() {
            return Ok(out);
        }
        let open = match rest.find(['(', ')']) {
            Some(i) if rest.as_bytes()[i] == b'(' => i,
            Some(i) => {
                return Err(LayoutError::Syntax {
                    offset: base + i,
                    message: "unexpected ')'".into(),
                })
            }
            None => {
                return Err(LayoutError::Syntax {
                    offset: base,
                    message: format!("dangling description {:?} without parentheses", rest.trim()),
                })
            }
        };
        let description = rest[..open]
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        if description.is_empty() {
            return Err(LayoutError::Syntax {
                offset: base + open,
                message: "missing description before '('".into(),
            });
        }
        let close = rest[open + 1..]
            .find(')')
            .map(|i| i + open + 1)
            .ok_or_else(|| LayoutError::Syntax {
                offset: base + open,
                message: "unclosed '('".into(),
            })?;
        let inner = &rest[open + 1..close];
        if let Some(i) = inner.find('(') {
            return Err(LayoutError::Syntax {
                offset: base + open + 1 + i,
                message: "nested '('".into(),
            });
        }
        out.push((description, inner, base + open + 1));
        base += close + 1;
        rest = &rest[close + 1..];
    }
}

fn int(field: &str, offset: usize) -> Result<i64, LayoutError> {
    let t = field.trim();
    if t.is_empty() {
        return Err(LayoutError::Syntax {
            offset,
            message: "missing number".into(),
        });
    }
    t.parse::<i64>().map_err(|_| LayoutError::Syntax {
        offset,
        message: format!("{t:?} is not an integer"),
    })
}

/// Parse step-one text such as `dog (2) frisbee (1)`.
pub fn parse_object_counts(
    s: &str,
    opts: &LayoutOptions,
) -> Result<Parsed<Vec<ObjectCount>>, LayoutError> {
    let mut warnings = Vec::new();
    let mut value = Vec::new();
    for (description, inner, offset) in entries(s)? {
        let count = int(inner, offset)?;
        let over = count > i64::from(opts.max_count);
        if count < 1 || (over && opts.strict) {
            return Err(LayoutError::CountOutOfRange {
                description,
                count,
                max: opts.max_count,
            });
        }
        if over {
            warnings.push(format!(
                "count {count} for {description:?} exceeds max_count {}",
                opts.max_count
            ));
        }
        let count = u32::try_from(count).map_err(|_| LayoutError::CountOutOfRange {
            description: description.clone(),
            count,
            max: opts.max_count,
        })?;
        value.push(ObjectCount { description, count });
    }
    Ok(Parsed { value, warnings })
}

/// Parse step-two text such as `dog (10,40,45,90) cat (5,5,5,5)`.
///
/// Degenerate boxes (zero width or height) are accepted with a warning.
pub fn parse_placements(s: &str) -> Result<Parsed<Vec<Placement>>, LayoutError> {
    let mut warnings = Vec::new();
    let mut value = Vec::new();
    for (description, inner, offset) in entries(s)? {
        let fields: Vec<&str> = inner.split(',').collect();
        if fields.len() != 4 {
            return Err(LayoutError::Syntax {
                offset,
                message: format!("expected 4 coordinates, got {}", fields.len()),
            });
        }
        let mut bins = [0u8; 4];
        for (slot, f) in bins.iter_mut().zip(&fields) {
            let v = int(f, offset)?;
            if !(0..i64::from(NUM_BINS)).contains(&v) {
                return Err(LayoutError::BinOutOfRange(v));
            }
            *slot = v as u8;
        }
        let [x1, y1, x2, y2] = bins;
        let bbox = QuantizedBox::new(x1, y1, x2, y2).map_err(|e| match e {
            LayoutError::InvertedBox { axis, .. } => LayoutError::InvertedBox {
                description: description.clone(),
                axis,
            },
            other => other,
        })?;
        if bbox.is_degenerate() {
            warnings.push(format!("degenerate box for {description:?}: {bbox}"));
        }
        value.push(Placement { description, bbox });
    }
    Ok(Parsed { value, warnings })
}

pub fn print_object_counts(objects: &[ObjectCount]) -> String {
    objects
        .iter()
        .map(|o| format!("{} ({})", o.description, o.count))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn print_placements(placements: &[Placement]) -> String {
    placements
        .iter()
        .map(|p| format!("{} {}", p.description, p.bbox))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Check that every listed object is placed exactly `count` times.
///
/// Descriptions match case-insensitively with whitespace collapsed. Placement
/// order is free; instances of different objects may interleave.
pub fn validate_layout(
    objects: Vec<ObjectCount>,
    placements: Vec<Placement>,
) -> Result<LayoutSpec, LayoutError> {
    let mut expected: BTreeMap<String, (&ObjectCount, u32)> = BTreeMap::new();
    for o in &objects {
        if expected
            .insert(description_key(&o.description), (o, 0))
            .is_some()
        {
            return Err(LayoutError::DuplicateDescription(o.description.clone()));
        }
    }
    for p in &placements {
        match expected.get_mut(&description_key(&p.description)) {
            Some((_, seen)) => *seen += 1,
            None => return Err(LayoutError::UnknownDescription(p.description.clone())),
        }
    }
    for o in &objects {
        let (_, actual) = expected[&description_key(&o.description)];
        if actual != o.count {
            return Err(LayoutError::CountMismatch {
                description: o.description.clone(),
                expected: o.count,
                actual,
            });
        }
    }
    Ok(LayoutSpec {
        objects,
        placements,
    })
}

impl LayoutSpec {
    /// Parse both steps and validate them against each other.
    pub fn parse(
        objects: &str,
        placements: &str,
        opts: &LayoutOptions,
    ) -> Result<Parsed<LayoutSpec>, LayoutError> {
        let o = parse_object_counts(objects, opts)?;
        let p = parse_placements(placements)?;
        let mut warnings = o.warnings;
        warnings.extend(p.warnings);
        Ok(Parsed {
            value: validate_layout(o.value, p.value)?,
            warnings,
        })
    }

    /// `(objects line, placements line)`.
    pub fn print(&self) -> (String, String) {
        (
            print_object_counts(&self.objects),
            print_placements(&self.placements),
        )
    }

    /// Boxes mapped back to normalized coordinates through bin centers.
    pub fn to_normalized(&self) -> Vec<(String, BBox)> {
        self.placements
            .iter()
            .map(|p| (p.description.clone(), p.bbox.to_bbox()))
            .collect()
    }
}

impl fmt::Display for QuantizedBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.x1, self.y1, self.x2, self.y2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oc(d: &str, c: u32) -> ObjectCount {
        ObjectCount {
            description: d.into(),
            count: c,
        }
    }

    fn pl(d: &str, b: [u8; 4]) -> Placement {
        Placement {
            description: d.into(),
            bbox: QuantizedBox::new(b[0], b[1], b[2], b[3]).unwrap(),
        }
    }

    #[test]
    fn quantize_edges() {
        assert_eq!(quantize(0.0).unwrap(), 0);
        assert_eq!(quantize(1.0).unwrap(), 99);
        assert_eq!(quantize(0.505).unwrap(), 50);
        assert_eq!(quantize(0.29).unwrap(), 29);
        assert!(quantize(1.0001).is_err());
        assert!(quantize(-0.0001).is_err());
        assert!(quantize(f64::NAN).is_err());
    }

    #[test]
    fn quantize_matches_integer_floor_on_thousandths() {
        for k in 0..=1000u32 {
            let expected = (k / 10).min(99) as u8;
            assert_eq!(
                quantize(f64::from(k) / 1000.0).unwrap(),
                expected,
                "k = {k}"
            );
        }
    }

    #[test]
    fn dequantize_edges() {
        assert_eq!(dequantize(0).unwrap(), 0.005);
        assert_eq!(dequantize(99).unwrap(), 0.995);
        assert!(dequantize(100).is_err());
        for b in 0..NUM_BINS {
            assert_eq!(quantize(dequantize(b).unwrap()).unwrap(), b);
        }
    }

    #[test]
    fn parse_counts() {
        let opts = LayoutOptions::default();
        let p = parse_object_counts("dog (2) frisbee (1)", &opts).unwrap();
        assert_eq!(p.value, vec![oc("dog", 2), oc("frisbee", 1)]);
        let p = parse_object_counts("  potted   plant(1)", &opts).unwrap();
        assert_eq!(p.value, vec![oc("potted plant", 1)]);
        assert!(parse_object_counts("dog 2", &opts).is_err());
        assert!(parse_object_counts("dog ()", &opts).is_err());
        assert!(parse_object_counts("dog (two)", &opts).is_err());
        assert!(parse_object_counts("dog (0)", &opts).is_err());
        assert!(parse_object_counts("dog (1) cat", &opts).is_err());
        assert!(parse_object_counts("(1)", &opts).is_err());
        assert_eq!(parse_object_counts("", &opts).unwrap().value, vec![]);
    }

    #[test]
    fn count_limit_depends_on_strictness() {
        let lenient = parse_object_counts("dog (9)", &LayoutOptions::default()).unwrap();
        assert_eq!(lenient.value, vec![oc("dog", 9)]);
        assert_eq!(lenient.warnings.len(), 1);
        let strict = LayoutOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            parse_object_counts("dog (9)", &strict),
            Err(LayoutError::CountOutOfRange {
                count: 9,
                max: 7,
                ..
            })
        ));
    }

    #[test]
    fn parse_boxes() {
        let p = parse_placements("dog (10,40,45,90) dog (55,42,88,88)").unwrap();
        assert_eq!(
            p.value,
            vec![pl("dog", [10, 40, 45, 90]), pl("dog", [55, 42, 88, 88])]
        );
        assert!(p.warnings.is_empty());
        let p = parse_placements("cat (5,5,5,5)").unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(matches!(
            parse_placements("cat (90,10,10,90)"),
            Err(LayoutError::InvertedBox { axis: 'x', .. })
        ));
        assert!(matches!(
            parse_placements("cat (1,2,3)"),
            Err(LayoutError::Syntax { .. })
        ));
        assert!(matches!(
            parse_placements("cat (1,2,3,100)"),
            Err(LayoutError::BinOutOfRange(100))
        ));
        assert!(parse_placements("cat ( 1 , 2 , 3 , 4 )").is_ok());
    }

    #[test]
    fn validation() {
        assert!(validate_layout(
            vec![oc("dog", 2)],
            vec![pl("dog", [0; 4]), pl("Dog", [1; 4])]
        )
        .is_ok());
        assert_eq!(
            validate_layout(vec![oc("dog", 2)], vec![pl("dog", [0; 4])]),
            Err(LayoutError::CountMismatch {
                description: "dog".into(),
                expected: 2,
                actual: 1
            })
        );
        assert_eq!(
            validate_layout(vec![oc("dog", 1)], vec![pl("cat", [0; 4])]),
            Err(LayoutError::UnknownDescription("cat".into()))
        );
        // interleaving is allowed
        let spec = validate_layout(
            vec![oc("dog", 2), oc("cat", 1)],
            vec![pl("dog", [0; 4]), pl("cat", [1; 4]), pl("dog", [2; 4])],
        );
        assert!(spec.is_ok());
    }

    #[test]
    fn normalized_boxes() {
        let spec = validate_layout(
            vec![oc("a", 1), oc("b", 1)],
            vec![pl("a", [0, 0, 99, 99]), pl("b", [50, 50, 50, 50])],
        )
        .unwrap();
        let n = spec.to_normalized();
        assert_eq!(n[0].1.to_array(), [0.005, 0.005, 0.995, 0.995]);
        assert_eq!(n[1].1.to_array(), [0.505; 4]);
    }

    #[test]
    fn printing() {
        let spec = LayoutSpec::parse(
            "dog (2) frisbee (1)",
            "dog (10,40,45,90) dog (55,42,88,88) frisbee (40,20,55,35)",
            &LayoutOptions::default(),
        )
        .unwrap()
        .value;
        let (a, b) = spec.print();
        assert_eq!(a, "dog (2) frisbee (1)");
        assert_eq!(
            b,
            "dog (10,40,45,90) dog (55,42,88,88) frisbee (40,20,55,35)"
        );
    }
}
