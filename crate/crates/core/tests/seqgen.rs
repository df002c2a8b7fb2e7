use num_bigint::BigUint;
use num_traits::One;
use proptest::prelude::*;
use riglab_core::seqgen::*;
use riglab_core::Error;

fn strs(p: &SequencePrefix) -> Vec<String> {
    p.terms.iter().map(|x| x.to_string()).collect()
}

#[test]
fn chain_of_twos() {
    let s = SequenceSpec::Chain { start: "1".into(), multipliers: vec![2] };
    assert_eq!(strs(&generate(&s, 5).unwrap()), ["1", "2", "4", "8", "16"]);
}

#[test]
fn blocks_first_block() {
    let g = blocks_generate(&[1, 3], 1, None).unwrap();
    assert_eq!(strs(&g.prefix), ["2", "3", "4", "6", "8", "12", "16", "24", "32", "48"]);
    assert_eq!(g.prefix.terms[0], BigUint::from(2u32));
}

#[test]
fn blocks_boundary_ratio() {
    let g = blocks_generate(&[1, 2, 3], 2, None).unwrap();
    // First term of block 1 over last term of block 0.
    let i = g.labels.iter().position(|l| l.p == 1).unwrap();
    let (a, b) = (&g.prefix.terms[i - 1], &g.prefix.terms[i]);
    // N_1/(N_1 − 1) = 4/3.
    assert_eq!(b * 3u32, a * 4u32);
    // In-block steps between k-levels also equal N_{p+1}/(N_{p+1} − 1).
    let j = g.labels.iter().position(|l| l.p == 1 && l.k == 3).unwrap();
    let (a, b) = (&g.prefix.terms[j - 1], &g.prefix.terms[j]);
    assert_eq!(b * 15u32, a * 16u32);
}

#[test]
fn blocks_spec_roundtrip_and_legacy_name() {
    let s: SequenceSpec = serde_json::from_str(r#"{"family":"blocks","params":{"schedule":[1,3,9]}}"#).unwrap();
    let p = generate(&s, 40).unwrap();
    assert_eq!(p.len(), 40);
    assert_eq!(serde_json::to_value(&s).unwrap()["family"], "blocks");
    let legacy: SequenceSpec = serde_json::from_str(r#"{"family":"ex77","params":{"schedule":[1,3,9]}}"#).unwrap();
    assert_eq!(legacy, s);
}

#[test]
fn blocks_bad_schedules() {
    assert!(matches!(blocks_generate(&[2, 3], 1, None), Err(Error::ScheduleInconsistent(_))));
    assert!(matches!(blocks_generate(&[1, 3, 3], 2, None), Err(Error::ScheduleInconsistent(_))));
    assert!(matches!(blocks_generate(&[1, 3], 2, None), Err(Error::ScheduleInconsistent(_))));
}

#[test]
fn poly_squares() {
    let s = SequenceSpec::Poly { coeffs: vec![0, 0, 1], start_k: 1 };
    assert_eq!(strs(&generate(&s, 5).unwrap()), ["1", "4", "9", "16", "25"]);
    let bad = SequenceSpec::Poly { coeffs: vec![0, 0, 1], start_k: 0 };
    assert!(matches!(generate(&bad, 5), Err(Error::InvalidSpec(_))));
    let dec = SequenceSpec::Poly { coeffs: vec![10, -1], start_k: 1 };
    assert!(matches!(generate(&dec, 5), Err(Error::InvalidSpec(_))));
}

#[test]
fn powers_of_two_diagnostics() {
    let s = SequenceSpec::Chain { start: "1".into(), multipliers: vec![2] };
    let d = ratio_diagnostics(&generate(&s, 20).unwrap()).unwrap();
    assert_eq!(d.min_ratio.exact.num, "2");
    assert_eq!(d.max_ratio.exact.num, "2");
    assert!(d.divisibility);
}

#[test]
fn primes_diagnostics() {
    let p = generate(&SequenceSpec::Primes {}, 100).unwrap();
    assert_eq!(p.terms.last().unwrap(), &BigUint::from(541u32));
    let d = ratio_diagnostics(&p).unwrap();
    assert!(!d.divisibility);
    let at = d.density.iter().find(|s| s.n == "541").unwrap();
    assert_eq!(at.count, 100);
    assert!((at.density - 100.0 / 541.0).abs() < 1e-12);
}

#[test]
fn blocks_block_ratio_bound() {
    let g = blocks_generate(&[1, 2, 4], 2, None).unwrap();
    let rows = block_ratios(&g);
    assert_eq!(rows.len(), 2);
    for (_, r, bound) in rows {
        assert!(r.approx <= bound.approx);
    }
}

#[test]
fn cf_denominators_sqrt2() {
    let s = SequenceSpec::CfDenominators { alpha: CfAlpha::Surd { p: -1, d: 2, q: 1 } };
    assert_eq!(strs(&generate(&s, 6).unwrap()), ["1", "2", "5", "12", "29", "70"]);
    let l = SequenceSpec::CfDenominators { alpha: CfAlpha::Liouville { m: 3, v: 2 } };
    assert_eq!(strs(&generate(&l, 7).unwrap()), ["1", "2", "9", "74", "83", "323", "729"]);
}

#[test]
fn superlinear_double_exponential() {
    let s = SequenceSpec::Superlinear { start: "2".into(), rule: SuperRule::Power { e: 2 } };
    let p = generate(&s, 6).unwrap();
    assert_eq!(p.terms[5], BigUint::one() << 32usize);
}

#[test]
fn schedule_conditions_reported() {
    let c = blocks_schedule_conditions(&[1, 3, 9]).unwrap();
    assert!(c.iter().any(|x| x.name == "divergence"));
    assert!(c.iter().any(|x| !x.holds));
}

#[test]
fn prefix_json_is_string_array() {
    let p = generate(&SequenceSpec::Primes {}, 3).unwrap();
    assert_eq!(serde_json::to_string(&p).unwrap(), r#"["2","3","5"]"#);
}

proptest! {
    #[test]
    fn chains_are_increasing_with_bounded_tails(ms in proptest::collection::vec(2u64..7, 1..6), count in 2usize..40) {
        let s = SequenceSpec::Chain { start: "1".into(), multipliers: ms };
        let p = generate(&s, count).unwrap();
        prop_assert!(p.terms.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(chain_tail_ok(&p.terms));
    }

    #[test]
    fn blocks_in_block_ratio(k2 in 2u64..5, extra in 1u64..4) {
        let g = blocks_generate(&[1, k2, k2 + extra], 2, None).unwrap();
        prop_assert!(g.prefix.terms.windows(2).all(|w| w[0] < w[1]));
        for (_, r, bound) in block_ratios(&g) {
            let lhs = BigUint::parse_bytes(r.exact.num.as_bytes(), 10).unwrap()
                * BigUint::parse_bytes(bound.exact.den.as_bytes(), 10).unwrap();
            let rhs = BigUint::parse_bytes(bound.exact.num.as_bytes(), 10).unwrap()
                * BigUint::parse_bytes(r.exact.den.as_bytes(), 10).unwrap();
            prop_assert!(lhs <= rhs);
        }
    }
}
