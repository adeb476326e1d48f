use proptest::prelude::*;
use rtlmark::embed::all_sites;
use rtlmark::eval::{discrepancy, load_corpus, rename_attack, AttackSpec, Class, Corpus};
use rtlmark::key::WatermarkKey;
use rtlmark::payload::{decode_payload, encode_payload, DEFAULT_MAX_PAYLOAD};
use rtlmark::rules::apply;
use rtlmark::sim::{check_equivalence, EquivBudget};
use rtlmark::verilog::{parse, parse_expr, print_expr, SourceText};
use std::path::Path;
use std::sync::OnceLock;

fn eligible() -> &'static Vec<SourceText> {
    static C: OnceLock<Vec<SourceText>> = OnceLock::new();
    C.get_or_init(|| {
        let c: Corpus = load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")).unwrap();
        c.of(Class::Eligible).map(|e| e.source.clone()).collect()
    })
}

fn budget() -> EquivBudget {
    EquivBudget {
        vectors: 200,
        cycles: 200,
        ..EquivBudget::default()
    }
}

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["a", "b", "c", "d[3]", "d[7:4]"]).prop_map(str::to_string),
        (1u32..16, any::<u16>()).prop_map(|(w, v)| format!("{w}'h{:x}", v as u32 & ((1u32 << w) - 1))),
        (0u32..100).prop_map(|v| v.to_string()),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "&", "|", "^", "&&", "||", "==", "<", "<<", "*"]), inner.clone())
                .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
            (prop::sample::select(vec!["~", "!", "&", "^", "-"]), inner.clone()).prop_map(|(op, e)| format!("{op}({e})")),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, t, e)| format!("{c} ? {t} : {e}")),
            prop::collection::vec(inner, 1..4).prop_map(|v| format!("{{{}}}", v.join(", "))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_reparse_equal(text in expr()) {
        let e = parse_expr(&text).unwrap();
        let printed = print_expr(&e);
        prop_assert_eq!(parse_expr(&printed).unwrap(), e);
    }

    #[test]
    fn payload_round_trips(model in "[a-zA-Z0-9._-]{1,16}", dev in "[a-zA-Z0-9._-]{1,16}", seed in any::<u64>()) {
        let key = WatermarkKey::from_seed(seed);
        let p = encode_payload(&model, &dev, &key, DEFAULT_MAX_PAYLOAD).unwrap();
        prop_assert_eq!(decode_payload(&p.encoded, &key).unwrap(), (model, dev));
    }

    #[test]
    fn discrepancy_is_a_bounded_symmetric_distance(i in 0usize..32, j in 0usize..32) {
        let c = eligible();
        let (a, b) = (&c[i % c.len()].content, &c[j % c.len()].content);
        let d = discrepancy(a, b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, discrepancy(b, a));
        prop_assert_eq!(discrepancy(a, a), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rename_attack_preserves_behaviour(i in 0usize..32, fraction in 0.01f64..=1.0, seed in any::<u64>()) {
        let c = eligible();
        let src = &c[i % c.len()];
        let out = rename_attack(src, &AttackSpec::rename(fraction, seed)).unwrap();
        prop_assert_eq!(out.renames.len(), (fraction * out.eligible as f64).ceil() as usize);
        let (a, b) = (parse(src).unwrap(), parse(&out.source).unwrap());
        prop_assert!(check_equivalence(&a, &b, &budget()).unwrap().is_equivalent());
    }

    #[test]
    fn any_single_site_preserves_behaviour_under_any_key(i in 0usize..32, pick in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let c = eligible();
        let ast = parse(&c[i % c.len()]).unwrap();
        let key = WatermarkKey::from_seed(seed);
        let payload = encode_payload("m", "d", &key, DEFAULT_MAX_PAYLOAD).unwrap();
        let sites = all_sites(&ast, &key);
        prop_assume!(!sites.is_empty());
        let site = &sites[pick.index(sites.len())];
        let (after, _) = apply(&ast, site, &key, &payload).unwrap();
        let v = check_equivalence(&ast, &after, &budget()).unwrap();
        prop_assert!(v.is_equivalent(), "{} {}: {:?}", site.rule, site.detail, v);
    }
}
