mod support;

use dmm::json::{from_json, to_json};
use dmm::text::{parse_literal, parse_terms, parse_tree, View};
use dmm_core::VValue;
use proptest::prelude::*;
use support::deep_value;

fn through_json(v: &VValue) -> VValue {
    let text = serde_json::to_string(&to_json(v)).unwrap();
    from_json(&serde_json::from_str(&text).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn every_view_round_trips(v in deep_value()) {
        for view in View::ALL {
            let text = view.print(&v);
            let back = view.parse(&text).map_err(|e| TestCaseError::fail(format!("{}: {e}\n{text}", view.name())))?;
            prop_assert_eq!(&back, &v, "{} view:\n{}", view.name(), text);
        }
    }

    #[test]
    fn views_agree_with_each_other(v in deep_value()) {
        let from_terms = parse_terms(&View::Terms.print(&v)).unwrap();
        let from_tree = parse_tree(&View::Tree.print(&v)).unwrap();
        prop_assert_eq!(View::Literal.print(&from_terms), View::Literal.print(&v));
        prop_assert_eq!(View::Terms.print(&from_tree), View::Terms.print(&v));
    }

    #[test]
    fn json_round_trips(v in deep_value()) {
        prop_assert_eq!(through_json(&v), v);
    }
}

#[test]
fn worked_example_prints_byte_exactly() {
    let literal = "{:number 3.5, :foo {:number 2, :bar 7}, :baz {:foo {:bar -4}}}";
    let v = parse_literal(literal).unwrap();
    assert_eq!(View::Literal.print(&v), literal);
    let terms = View::Terms.print(&v);
    assert!(terms.lines().any(|line| line == "(:baz ⤳ :foo ⤳ :bar ⤳ -4)"), "{terms}");
    assert_eq!(parse_terms(&terms).unwrap(), v);
    assert_eq!(parse_tree(&View::Tree.print(&v)).unwrap(), v);
}

#[test]
fn zero_is_braces_everywhere() {
    for view in View::ALL {
        assert_eq!(view.print(&VValue::zero()), "{}");
        assert!(view.parse("{}").unwrap().is_zero());
    }
}
