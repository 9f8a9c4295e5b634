use proptest::prelude::*;

use vprog::dsl::{parse_program, print_program, EvalProgram, ModuleCall, ModuleName};
use vprog::layout::{
    dequantize, quantize, LayoutOptions, LayoutSpec, ObjectCount, Placement, QuantizedBox,
};
use vprog::modules::{spatial_eval, ModuleConfig, SpatialRelation};
use vprog::perception::FixtureBackend;
use vprog::stats::{cohen_kappa, krippendorff_alpha, spearman_rho, AnnotationMatrix, Metric};

fn arg() -> impl Strategy<Value = String> {
    "[a-z '\"();,|\n漢]{0,10}"
}

fn call() -> impl Strategy<Value = ModuleCall> {
    (0..ModuleName::ALL.len(), prop::collection::vec(arg(), 3)).prop_map(|(i, strings)| {
        let module = ModuleName::ALL[i];
        let refs: Vec<&str> = strings
            .iter()
            .take(module.arity() - 1)
            .map(String::as_str)
            .collect();
        ModuleCall::new(module, &refs)
    })
}

fn program() -> impl Strategy<Value = EvalProgram> {
    prop::collection::vec(call(), 1..6).prop_map(|c| EvalProgram::from_calls(c).unwrap())
}

fn qbox() -> impl Strategy<Value = QuantizedBox> {
    (0..100u8, 0..100u8, 0..100u8, 0..100u8)
        .prop_map(|(a, b, c, d)| QuantizedBox::new(a.min(b), c.min(d), a.max(b), c.max(d)).unwrap())
}

fn layout() -> impl Strategy<Value = LayoutSpec> {
    let names = ["dog", "cat", "red apple", "traffic light", "man"];
    prop::collection::vec(
        (1..=3u32, prop::collection::vec(qbox(), 3)),
        1..=names.len(),
    )
    .prop_map(move |objs| {
        let mut objects = Vec::new();
        let mut placements = Vec::new();
        for (i, (count, boxes)) in objs.into_iter().enumerate() {
            objects.push(ObjectCount {
                description: names[i].to_string(),
                count,
            });
            for b in boxes.into_iter().take(count as usize) {
                placements.push(Placement {
                    description: names[i].to_string(),
                    bbox: b,
                });
            }
        }
        LayoutSpec {
            objects,
            placements,
        }
    })
}

proptest! {
    #[test]
    fn dsl_round_trip(p in program()) {
        let text = print_program(&p);
        let back = parse_program(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(print_program(&back), text);
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,80}") {
        let _ = parse_program(&s);
    }

    #[test]
    fn layout_round_trip(spec in layout()) {
        let (o, p) = spec.print();
        let back = LayoutSpec::parse(&o, &p, &LayoutOptions::default()).unwrap();
        prop_assert_eq!(back.value, spec);
    }

    #[test]
    fn quantize_is_monotone(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(lo).unwrap() <= quantize(hi).unwrap());
        let v = dequantize(quantize(a).unwrap()).unwrap();
        prop_assert!((v - a).abs() <= 0.005 + 1e-12);
    }

    #[test]
    fn spatial_antisymmetry(
        s in (0.0..0.5f64, 0.0..0.5f64, 0.0..0.5f64, 0.0..0.5f64, 0.0..1.0f64),
        r in (0.0..0.5f64, 0.0..0.5f64, 0.0..0.5f64, 0.0..0.5f64, 0.0..1.0f64),
    ) {
        let det = |d: (f64, f64, f64, f64, f64)| {
            format!(r#"[{{"box": [{}, {}, {}, {}], "confidence": 0.9, "closeness": {}}}]"#, d.0, d.1, d.0 + d.2, d.1 + d.3, d.4)
        };
        let doc = format!(r#"{{"images": {{"i": {{"objdet": {{"a": {}, "b": {}}}}}}}}}"#, det(s), det(r));
        let backend = FixtureBackend::from_json_str(&doc).unwrap();
        let cfg = ModuleConfig::default();
        for (rel, inverse) in [("left", "right"), ("above", "below"), ("front", "behind")] {
            let ab = spatial_eval(&backend, "i", "a", "b", &SpatialRelation::parse(rel), &cfg).score;
            let ba = spatial_eval(&backend, "i", "b", "a", &SpatialRelation::parse(inverse), &cfg).score;
            let back = spatial_eval(&backend, "i", "b", "a", &SpatialRelation::parse(rel), &cfg).score;
            prop_assert_eq!(ab, ba);
            prop_assert!(ab + back <= 1);
        }
    }

    #[test]
    fn spearman_invariant_under_monotone_maps(xy in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..20)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let Ok(rho) = spearman_rho(&x, &y) {
            let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let cubed: Vec<f64> = y.iter().map(|v| v * v * v).collect();
            prop_assert!((spearman_rho(&ex, &cubed).unwrap() - rho).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&rho));
        }
    }

    #[test]
    fn kappa_and_alpha_are_symmetric(ab in prop::collection::vec((0..3u8, 0..3u8), 1..20)) {
        let (a, b): (Vec<u8>, Vec<u8>) = ab.into_iter().unzip();
        let k1 = cohen_kappa(&a, &b).unwrap();
        prop_assert!((k1 - cohen_kappa(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&k1));
        let row = |v: &[u8]| v.iter().map(|x| Some(f64::from(*x))).collect::<Vec<_>>();
        for metric in [Metric::Nominal, Metric::Interval] {
            let m1 = AnnotationMatrix::new(vec![row(&a), row(&b)]).unwrap();
            let m2 = AnnotationMatrix::new(vec![row(&b), row(&a)]).unwrap();
            let a1 = krippendorff_alpha(&m1, metric).unwrap();
            prop_assert!((a1 - krippendorff_alpha(&m2, metric).unwrap()).abs() < 1e-12);
            prop_assert!(a1 <= 1.0);
        }
    }
}
