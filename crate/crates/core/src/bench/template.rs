use serde::{Deserialize, Serialize};

use super::vocab::{article, number_word, plural};
use super::{BenchError, Skill};
use crate::dsl::{EvalProgram, ModuleCall, ModuleName};
use crate::text::collapse_whitespace;

pub const OBJECT_TEMPLATES: [&str; 5] = [
    "<objA>",
    "<a> <objA>",
    "a photo of <a> <objA>",
    "an image of <a> <objA>",
    "a picture of <a> <objA>",
];

/// Four digit templates followed by their English-number twins.
pub const COUNT_TEMPLATES: [&str; 8] = [
    "<N> <objA><s>",
    "a photo of <N> <objA><s>",
    "a picture of <N> <objA><s>",
    "an image of <N> <objA><s>",
    "<N EN> <objA><s>",
    "a photo of <N EN> <objA><s>",
    "a picture of <N EN> <objA><s>",
    "an image of <N EN> <objA><s>",
];

pub const SPATIAL_TEMPLATES: [&str; 1] = ["<a2> <objB> is <tothe> <rel><of> <a1> <objA>"];

pub const SCALE_TEMPLATES: [&str; 1] = ["<a2> <objB> that is <scale> than <a1> <objA>"];

pub const TEXT_TEMPLATES: [&str; 13] = [
    "a sign that reads '<text>'",
    "a book cover that reads '<text>'",
    "a poster that reads '<text>'",
    "a sign that says '<text>'",
    "a book cover that says '<text>'",
    "a poster that says '<text>'",
    "a storefront with '<text>' written on it",
    "a storefront with '<text>' written",
    "a storefront with '<text>' displayed",
    "a piece of paper that says '<text>'",
    "a piece of paper that reads '<text>'",
    "a piece of paper that says '<text>' on it",
    "a piece of paper that reads '<text>' on it",
];

pub fn templates(skill: Skill) -> &'static [&'static str] {
    match skill {
        Skill::Object => &OBJECT_TEMPLATES,
        Skill::Count => &COUNT_TEMPLATES,
        Skill::Spatial => &SPATIAL_TEMPLATES,
        Skill::Scale => &SCALE_TEMPLATES,
        Skill::Text => &TEXT_TEMPLATES,
    }
}

/// Filled template variables. `objA` is the reference object of relation
/// prompts and `objB` the subject.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slots {
    #[serde(rename = "objA", default, skip_serializing_if = "Option::is_none")]
    pub obj_a: Option<String>,
    #[serde(rename = "objB", default, skip_serializing_if = "Option::is_none")]
    pub obj_b: Option<String>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

fn need<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, BenchError> {
    v.as_ref()
        .ok_or_else(|| BenchError::MissingSlot(name.to_string()))
}

/// Expand `<...>` variables.
///
/// `<a>`/`<a1>` take the article of `objA`, `<a2>` that of `objB`.
/// `<objA><s>` pluralizes through the irregular table when `N > 1`. For
/// spatial prompts `<tothe> <rel><of>` renders "to the left of", "above",
/// "in front of", "behind". A `same` scale renders "the same size as" in place
/// of "same than".
///
/// ```
/// use vprog::bench::{fill_template, Slots};
/// let slots = Slots { obj_a: Some("apple".into()), ..Default::default() };
/// assert_eq!(fill_template("a photo of <a> <objA>", &slots).unwrap(), "a photo of an apple");
/// ```
pub fn fill_template(template: &str, slots: &Slots) -> Result<String, BenchError> {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        let close = rest[open..]
            .find('>')
            .map(|i| open + i)
            .ok_or_else(|| BenchError::UnknownVariable(rest[open..].to_string()))?;
        let var = &rest[open + 1..close];
        rest = &rest[close + 1..];
        let rel = || need(&slots.rel, "rel").map(String::as_str);
        match var {
            "objA" => {
                let obj = need(&slots.obj_a, "objA")?;
                if let Some(after) = rest.strip_prefix("<s>") {
                    rest = after;
                    let n = *need(&slots.count, "N")?;
                    out.push_str(&if n > 1 { plural(obj) } else { obj.clone() });
                } else {
                    out.push_str(obj);
                }
            }
            "objB" => out.push_str(need(&slots.obj_b, "objB")?),
            "a" | "a1" => out.push_str(article(need(&slots.obj_a, "objA")?)),
            "a2" => out.push_str(article(need(&slots.obj_b, "objB")?)),
            "N" => out.push_str(&need(&slots.count, "N")?.to_string()),
            "N EN" => {
                let n = *need(&slots.count, "N")?;
                out.push_str(
                    number_word(n).ok_or(BenchError::MissingSlot(format!("N EN for {n}")))?,
                );
            }
            "s" => {
                if *need(&slots.count, "N")? > 1 {
                    out.push('s');
                }
            }
            "tothe" => out.push_str(match rel()? {
                "left" | "right" => "to the",
                "front" => "in",
                _ => "",
            }),
            "rel" => out.push_str(rel()?),
            "of" => out.push_str(match rel()? {
                "left" | "right" | "front" => " of",
                _ => "",
            }),
            "scale" => {
                let scale = need(&slots.scale, "scale")?;
                if scale == "same" {
                    if let Some(after) = rest.strip_prefix(" than") {
                        rest = after;
                    }
                    out.push_str("the same size as");
                } else {
                    out.push_str(scale);
                }
            }
            "text" => out.push_str(need(&slots.text, "text")?),
            other => return Err(BenchError::UnknownVariable(format!("<{other}>"))),
        }
    }
    out.push_str(rest);
    Ok(collapse_whitespace(&out))
}

/// The evaluation program paired with a skill prompt. Relation programs put
/// the subject (`objB`) first.
pub fn pair_program(skill: Skill, slots: &Slots) -> Result<EvalProgram, BenchError> {
    let call = match skill {
        Skill::Object => ModuleCall::new(ModuleName::ObjectEval, &[need(&slots.obj_a, "objA")?]),
        Skill::Count => {
            let expr = format!("=={}", need(&slots.count, "N")?);
            ModuleCall::new(ModuleName::CountEval, &[need(&slots.obj_a, "objA")?, &expr])
        }
        Skill::Spatial => ModuleCall::new(
            ModuleName::SpatialEval,
            &[
                need(&slots.obj_b, "objB")?,
                need(&slots.obj_a, "objA")?,
                need(&slots.rel, "rel")?,
            ],
        ),
        Skill::Scale => ModuleCall::new(
            ModuleName::ScaleEval,
            &[
                need(&slots.obj_b, "objB")?,
                need(&slots.obj_a, "objA")?,
                need(&slots.scale, "scale")?,
            ],
        ),
        Skill::Text => ModuleCall::new(ModuleName::TextEval, &[need(&slots.text, "text")?]),
    };
    Ok(EvalProgram::from_calls(vec![call]).expect("one call"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::print_program;

    fn obj(a: &str) -> Slots {
        Slots {
            obj_a: Some(a.into()),
            ..Default::default()
        }
    }

    fn count(a: &str, n: u32) -> Slots {
        Slots {
            obj_a: Some(a.into()),
            count: Some(n),
            ..Default::default()
        }
    }

    fn rel(b: &str, a: &str, r: &str) -> Slots {
        Slots {
            obj_a: Some(a.into()),
            obj_b: Some(b.into()),
            rel: Some(r.into()),
            ..Default::default()
        }
    }

    fn scale(b: &str, a: &str, s: &str) -> Slots {
        Slots {
            obj_a: Some(a.into()),
            obj_b: Some(b.into()),
            scale: Some(s.into()),
            ..Default::default()
        }
    }

    #[test]
    fn object_articles() {
        assert_eq!(
            fill_template(OBJECT_TEMPLATES[1], &obj("apple")).unwrap(),
            "an apple"
        );
        assert_eq!(
            fill_template(OBJECT_TEMPLATES[2], &obj("dog")).unwrap(),
            "a photo of a dog"
        );
        assert_eq!(
            fill_template(OBJECT_TEMPLATES[0], &obj("dog")).unwrap(),
            "dog"
        );
    }

    #[test]
    fn counts() {
        assert_eq!(
            fill_template(COUNT_TEMPLATES[1], &count("dog", 3)).unwrap(),
            "a photo of 3 dogs"
        );
        assert_eq!(
            fill_template(COUNT_TEMPLATES[5], &count("dog", 3)).unwrap(),
            "a photo of three dogs"
        );
        assert_eq!(
            fill_template(COUNT_TEMPLATES[4], &count("person", 2)).unwrap(),
            "two people"
        );
        assert_eq!(
            fill_template(COUNT_TEMPLATES[0], &count("dog", 1)).unwrap(),
            "1 dog"
        );
        assert_eq!(
            fill_template(COUNT_TEMPLATES[3], &count("scissors", 4)).unwrap(),
            "an image of 4 scissors"
        );
    }

    #[test]
    fn spatial_connectors() {
        let t = SPATIAL_TEMPLATES[0];
        assert_eq!(
            fill_template(t, &rel("spoon", "potted plant", "front")).unwrap(),
            "a spoon is in front of a potted plant"
        );
        assert_eq!(
            fill_template(t, &rel("dog", "cat", "left")).unwrap(),
            "a dog is to the left of a cat"
        );
        assert_eq!(
            fill_template(t, &rel("dog", "apple", "above")).unwrap(),
            "a dog is above an apple"
        );
        assert_eq!(
            fill_template(t, &rel("oven", "cat", "behind")).unwrap(),
            "an oven is behind a cat"
        );
    }

    #[test]
    fn scale_phrases() {
        let t = SCALE_TEMPLATES[0];
        assert_eq!(
            fill_template(t, &scale("laptop", "sports ball", "bigger")).unwrap(),
            "a laptop that is bigger than a sports ball"
        );
        assert_eq!(
            fill_template(t, &scale("cat", "dog", "same")).unwrap(),
            "a cat that is the same size as a dog"
        );
    }

    #[test]
    fn errors() {
        assert!(
            matches!(fill_template("<objB>", &obj("dog")), Err(BenchError::MissingSlot(s)) if s == "objB")
        );
        assert!(matches!(
            fill_template("<foo>", &obj("dog")),
            Err(BenchError::UnknownVariable(_))
        ));
        assert!(matches!(
            fill_template("<objA", &obj("dog")),
            Err(BenchError::UnknownVariable(_))
        ));
    }

    #[test]
    fn programs() {
        let p = pair_program(Skill::Count, &count("dog", 3)).unwrap();
        assert_eq!(print_program(&p), "countEval(img, 'dog', '==3')");
        let text = Slots {
            text: Some("shop".into()),
            ..Default::default()
        };
        assert_eq!(
            print_program(&pair_program(Skill::Text, &text).unwrap()),
            "textEval(img, 'shop')"
        );
        let p = pair_program(Skill::Spatial, &rel("spoon", "potted plant", "front")).unwrap();
        assert_eq!(
            print_program(&p),
            "spatialEval(img, 'spoon', 'potted plant', 'front')"
        );
        let p = pair_program(Skill::Scale, &scale("laptop", "sports ball", "bigger")).unwrap();
        assert_eq!(
            print_program(&p),
            "scaleEval(img, 'laptop', 'sports ball', 'bigger')"
        );
    }
}
