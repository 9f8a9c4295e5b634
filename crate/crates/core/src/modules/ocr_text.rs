use super::{Annotation, ModuleResult, Role};
use crate::dsl::{ModuleCall, ModuleName};
use crate::perception::{OcrToken, PerceptionBackend};
use crate::text::normalize;

/// Token indices in reading order.
///
/// Tokens are grouped into line bands by y-center: a token joins the current
/// band while its y-center is within half the median token height of the
/// band's first token. Bands are read top to bottom, tokens left to right.
pub fn reading_order(tokens: &[OcrToken]) -> Vec<usize> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let mut heights: Vec<f64> = tokens.iter().map(|t| t.bbox.height()).collect();
    heights.sort_by(f64::total_cmp);
    let mid = heights.len() / 2;
    let median = if heights.len() % 2 == 1 {
        heights[mid]
    } else {
        (heights[mid - 1] + heights[mid]) / 2.0
    };
    let tolerance = median / 2.0;

    let mut by_y: Vec<usize> = (0..tokens.len()).collect();
    let yc = |i: usize| tokens[i].bbox.center().1;
    by_y.sort_by(|&a, &b| yc(a).total_cmp(&yc(b)).then(a.cmp(&b)));

    let mut bands: Vec<Vec<usize>> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for i in by_y {
        match bands.last_mut() {
            Some(band) if yc(i) - anchor <= tolerance => band.push(i),
            _ => {
                anchor = yc(i);
                bands.push(vec![i]);
            }
        }
    }
    for band in &mut bands {
        band.sort_by(|&a, &b| {
            tokens[a]
                .bbox
                .x1()
                .total_cmp(&tokens[b].bbox.x1())
                .then(a.cmp(&b))
        });
    }
    bands.concat()
}

/// Score 1 iff the normalized target occurs in the normalized OCR text read
/// in reading order.
pub fn text_eval(backend: &dyn PerceptionBackend, image: &str, target: &str) -> ModuleResult {
    let call = ModuleCall::new(ModuleName::TextEval, &[target]);
    let needle = normalize(target);
    if needle.is_empty() {
        return ModuleResult::error(call, "target text is empty after normalization");
    }
    let tokens = match backend.ocr(image) {
        Ok(t) => t,
        Err(e) => return ModuleResult::error(call, e),
    };

    // (token index, byte range in joined text)
    let mut joined = String::new();
    let mut ranges = Vec::new();
    for i in reading_order(&tokens) {
        let norm = normalize(&tokens[i].text);
        if norm.is_empty() {
            continue;
        }
        if !joined.is_empty() {
            joined.push(' ');
        }
        ranges.push((i, joined.len()..joined.len() + norm.len()));
        joined.push_str(&norm);
    }

    match joined.find(&needle) {
        Some(start) => {
            let end = start + needle.len();
            let annotations = ranges
                .iter()
                .filter(|(_, r)| r.start < end && start < r.end)
                .map(|(i, _)| Annotation {
                    bbox: tokens[*i].bbox,
                    label: tokens[*i].text.clone(),
                    role: Role::Ocr,
                })
                .collect();
            ModuleResult::scored(
                call,
                true,
                format!("found \"{needle}\" in OCR text \"{joined}\""),
                annotations,
            )
        }
        None => ModuleResult::scored(
            call,
            false,
            format!("did not find \"{needle}\" in OCR text \"{joined}\""),
            Vec::new(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{BBox, FixtureBackend};

    fn tok(text: &str, b: [f64; 4]) -> OcrToken {
        OcrToken {
            text: text.into(),
            bbox: BBox::try_from(b).unwrap(),
            confidence: 0.9,
        }
    }

    fn backend(tokens: &[OcrToken]) -> FixtureBackend {
        let json = serde_json::json!({"images": {"img": {"ocr": tokens}}});
        FixtureBackend::from_json_str(&json.to_string()).unwrap()
    }

    #[test]
    fn case_folding() {
        let b = backend(&[tok("SHOP", [0.1, 0.1, 0.5, 0.3])]);
        let r = text_eval(&b, "img", "shop");
        assert_eq!(r.score, 1);
        assert_eq!(r.explanation, "found \"shop\" in OCR text \"shop\"");
        assert_eq!(r.annotations.len(), 1);
        assert_eq!(
            text_eval(&backend(&[tok("shp", [0.1, 0.1, 0.5, 0.3])]), "img", "shop").score,
            0
        );
    }

    #[test]
    fn multi_token_phrase_out_of_order() {
        // fixture order is scrambled; reading order restores it
        let b = backend(&[
            tok("hours", [0.6, 0.11, 0.9, 0.2]),
            tok("open", [0.1, 0.1, 0.3, 0.2]),
            tok("24", [0.35, 0.12, 0.5, 0.21]),
            tok("below", [0.1, 0.5, 0.3, 0.6]),
        ]);
        let r = text_eval(&b, "img", "Open 24 hours!");
        assert_eq!(r.score, 1);
        let labels: Vec<_> = r.annotations.iter().map(|a| a.label.as_str()).collect();
        assert_eq!(labels, ["open", "24", "hours"]);
    }

    #[test]
    fn reading_order_bands() {
        let toks = [
            tok("c", [0.1, 0.5, 0.2, 0.6]),
            tok("b", [0.5, 0.12, 0.6, 0.22]),
            tok("a", [0.1, 0.1, 0.2, 0.2]),
        ];
        assert_eq!(reading_order(&toks), [2, 1, 0]);
        assert!(reading_order(&[]).is_empty());
    }

    #[test]
    fn empty_target_is_errored() {
        let r = text_eval(&backend(&[]), "img", "?!");
        assert!(r.errored);
    }
}
