use super::{
    Annotation, CountExpr, ModuleConfig, ModuleResult, Role, ScaleRelation, SpatialRelation,
};
use crate::dsl::{ModuleCall, ModuleName};
use crate::perception::{Detection, PerceptionBackend, PerceptionError, VqaQuery};
use crate::text::{description_key, normalize};

fn annotate(dets: &[Detection], role: Role) -> Vec<Annotation> {
    dets.iter()
        .map(|d| Annotation {
            bbox: d.bbox,
            label: d.label.clone(),
            role,
        })
        .collect()
}

/// Score 1 iff the detector finds `obj`.
pub fn object_eval(
    backend: &dyn PerceptionBackend,
    image: &str,
    obj: &str,
    cfg: &ModuleConfig,
) -> ModuleResult {
    let call = ModuleCall::new(ModuleName::ObjectEval, &[obj]);
    match backend.obj_det(image, obj, cfg.box_threshold) {
        Err(e) => ModuleResult::error(call, e),
        Ok(dets) if dets.is_empty() => {
            ModuleResult::scored(call, false, format!("did not find {obj}"), Vec::new())
        }
        Ok(dets) => {
            let n = dets.len();
            let unit = if n == 1 { "box" } else { "boxes" };
            ModuleResult::scored(
                call,
                true,
                format!("found {obj} ({n} {unit})"),
                annotate(&dets, Role::Detected),
            )
        }
    }
}

/// Score 1 iff the number of detections of `obj` satisfies `expr`.
pub fn count_eval(
    backend: &dyn PerceptionBackend,
    image: &str,
    obj: &str,
    expr: CountExpr,
    cfg: &ModuleConfig,
) -> ModuleResult {
    let expr_text = expr.to_string();
    let call = ModuleCall::new(ModuleName::CountEval, &[obj, &expr_text]);
    match backend.obj_det(image, obj, cfg.box_threshold) {
        Err(e) => ModuleResult::error(call, e),
        Ok(dets) => {
            let n = dets.len();
            ModuleResult::scored(
                call,
                expr.holds(n),
                format!("counted {n} {obj}; expected {expr}"),
                annotate(&dets, Role::Detected),
            )
        }
    }
}

/// Pick the detections the relation is judged on: the top-confidence box per
/// query, or the top two boxes when both queries are the same text.
fn select_pair(
    backend: &dyn PerceptionBackend,
    image: &str,
    subject: &str,
    reference: &str,
    cfg: &ModuleConfig,
) -> Result<(Option<Detection>, Option<Detection>), PerceptionError> {
    if description_key(subject) == description_key(reference) {
        let mut dets = backend
            .obj_det(image, subject, cfg.box_threshold)?
            .into_iter();
        let s = dets.next();
        let r = dets.next().map(|d| Detection {
            label: reference.to_string(),
            ..d
        });
        Ok((s, r))
    } else {
        let s = backend
            .obj_det(image, subject, cfg.box_threshold)?
            .into_iter()
            .next();
        let r = backend
            .obj_det(image, reference, cfg.box_threshold)?
            .into_iter()
            .next();
        Ok((s, r))
    }
}

/// Annotations for a selected pair plus the names of missing objects.
fn pair_annotations(
    subject: &str,
    reference: &str,
    s: &Option<Detection>,
    r: &Option<Detection>,
) -> (Vec<Annotation>, Vec<String>) {
    let mut anns = Vec::new();
    let mut missing = Vec::new();
    for (name, det, role) in [(subject, s, Role::Subject), (reference, r, Role::Reference)] {
        match det {
            Some(d) => anns.push(Annotation {
                bbox: d.bbox,
                label: d.label.clone(),
                role,
            }),
            None => missing.push(name.to_string()),
        }
    }
    (anns, missing)
}

fn vqa_fallback(
    backend: &dyn PerceptionBackend,
    image: &str,
    call: ModuleCall,
    subject: &str,
    reference: &str,
    relation: &str,
) -> ModuleResult {
    let question = format!("Is the {subject} {relation} the {reference}?");
    let query = VqaQuery::yes_no(question.as_str());
    match backend.vqa(image, &query) {
        Err(e) => ModuleResult::error(call, e),
        Ok(a) if !a.projected => ModuleResult::error(
            call,
            format!("vqa answer {:?} matches no choice for {question:?}", a.raw),
        ),
        Ok(a) => ModuleResult::scored(
            call,
            a.answer == "yes",
            format!(
                "vqa fallback: asked \"{question}\"; answered \"{}\"",
                a.answer
            ),
            Vec::new(),
        ),
    }
}

/// Geometric test of `subject rel reference` on box centers (left/right/
/// above/below) or closeness (front/behind). Ties score 0.
pub fn spatial_eval(
    backend: &dyn PerceptionBackend,
    image: &str,
    subject: &str,
    reference: &str,
    rel: &SpatialRelation,
    cfg: &ModuleConfig,
) -> ModuleResult {
    let call = ModuleCall::new(ModuleName::SpatialEval, &[subject, reference, rel.as_str()]);
    if let SpatialRelation::Other(text) = rel {
        return vqa_fallback(backend, image, call, subject, reference, text);
    }
    let (s, r) = match select_pair(backend, image, subject, reference, cfg) {
        Ok(pair) => pair,
        Err(e) => return ModuleResult::error(call, e),
    };
    let (anns, missing) = pair_annotations(subject, reference, &s, &r);
    let (Some(s), Some(r)) = (s, r) else {
        return ModuleResult::scored(
            call,
            false,
            format!("object not found: {}", missing.join(", ")),
            anns,
        );
    };
    let (sx, sy) = s.bbox.center();
    let (rx, ry) = r.bbox.center();
    let (metric, a, b, pass) = match rel {
        SpatialRelation::Left => ("x-center", sx, rx, sx < rx),
        SpatialRelation::Right => ("x-center", sx, rx, sx > rx),
        SpatialRelation::Above => ("y-center", sy, ry, sy < ry),
        SpatialRelation::Below => ("y-center", sy, ry, sy > ry),
        SpatialRelation::Front => (
            "closeness",
            s.closeness,
            r.closeness,
            s.closeness > r.closeness,
        ),
        SpatialRelation::Behind => (
            "closeness",
            s.closeness,
            r.closeness,
            s.closeness < r.closeness,
        ),
        SpatialRelation::Other(_) => unreachable!("handled above"),
    };
    let not = if pass { "" } else { "not " };
    ModuleResult::scored(
        call,
        pass,
        format!(
            "{subject} is {not}{} {reference} ({metric} {a:.3} vs {b:.3})",
            rel.phrase()
        ),
        anns,
    )
}

/// Area-ratio test of `subject rel reference` with tolerance `cfg.scale_tau`.
pub fn scale_eval(
    backend: &dyn PerceptionBackend,
    image: &str,
    subject: &str,
    reference: &str,
    rel: &ScaleRelation,
    cfg: &ModuleConfig,
) -> ModuleResult {
    let call = ModuleCall::new(ModuleName::ScaleEval, &[subject, reference, rel.as_str()]);
    if let ScaleRelation::Other(text) = rel {
        return vqa_fallback(backend, image, call, subject, reference, text);
    }
    let (s, r) = match select_pair(backend, image, subject, reference, cfg) {
        Ok(pair) => pair,
        Err(e) => return ModuleResult::error(call, e),
    };
    let (anns, missing) = pair_annotations(subject, reference, &s, &r);
    let (Some(s), Some(r)) = (s, r) else {
        return ModuleResult::scored(
            call,
            false,
            format!("object not found: {}", missing.join(", ")),
            anns,
        );
    };
    let (sa, ra) = (s.bbox.area(), r.bbox.area());
    if sa <= 0.0 || ra <= 0.0 {
        let which = if ra <= 0.0 { reference } else { subject };
        return ModuleResult::scored(
            call,
            false,
            format!("zero-area box for {which}; cannot compare sizes"),
            anns,
        );
    }
    let rho = sa / ra;
    let pass = rel.holds(rho, cfg.scale_tau).expect("geometric relation");
    let not = if pass { "" } else { "not " };
    ModuleResult::scored(
        call,
        pass,
        format!(
            "{subject} is {not}{} {reference} (area ratio {rho:.3}, tau {})",
            rel.phrase(),
            cfg.scale_tau
        ),
        anns,
    )
}

/// Multiple-choice question; score 1 iff the answer equals `expected`.
pub fn vqa_eval(
    backend: &dyn PerceptionBackend,
    image: &str,
    question: &str,
    choices: &str,
    expected: &str,
) -> ModuleResult {
    let call = ModuleCall::new(ModuleName::Vqa, &[question, choices, expected]);
    let query = match super::split_choices(choices).and_then(|c| VqaQuery::new(question, c)) {
        Ok(q) => q,
        Err(e) => return ModuleResult::error(call, e),
    };
    let expected_norm = normalize(expected);
    if !query
        .choices()
        .iter()
        .any(|c| normalize(c) == expected_norm)
    {
        return ModuleResult::error(
            call,
            format!("expected answer {expected:?} is not one of the choices"),
        );
    }
    match backend.vqa(image, &query) {
        Err(e) => ModuleResult::error(call, e),
        Ok(a) if !a.projected => ModuleResult::error(
            call,
            format!("vqa answer {:?} matches no choice for {question:?}", a.raw),
        ),
        Ok(a) => ModuleResult::scored(
            call,
            normalize(&a.answer) == expected_norm,
            format!(
                "asked \"{question}\"; answered \"{}\"; expected \"{expected}\"",
                a.answer
            ),
            Vec::new(),
        ),
    }
}
