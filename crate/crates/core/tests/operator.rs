use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;
use riglab_core::cantor::SeedSupply;
use riglab_core::circle::Turn;
use riglab_core::hp::{Complex, Real};
use riglab_core::operator::*;
use riglab_core::Error;

fn rel(a: &Complex, b: &Complex, floor: f64) -> f64 {
    let d = (a - b).abs().to_f64();
    d / b.abs().to_f64().max(floor)
}

fn double_exp(count: usize) -> Vec<BigUint> {
    (0..count).map(|k| BigUint::one() << (1usize << k)).collect()
}

fn c(re: f64, im: f64) -> Complex {
    Complex::from_f64(re, im, 128)
}

fn quarter_turns() -> Vec<Turn> {
    // 1, i, −1
    vec![Turn::zero(), Turn::from_u64(1, 4), Turn::from_u64(1, 2)]
}

#[test]
fn jmap_values() {
    assert_eq!(jmap(2).unwrap(), 1);
    assert_eq!(jmap(5).unwrap(), 1);
    assert_eq!(jmap(6).unwrap(), 2);
    assert_eq!(jmap(7).unwrap(), 3);
    assert!(jmap(1).is_err());
    let hits = (2..=1024).filter(|&n| jmap(n).unwrap() == 3).count();
    assert!(hits >= 8, "{hits}");
    assert!((2..5000).all(|n| jmap(n).unwrap() < n));
}

#[test]
fn ctable_base_cases() {
    let th = quarter_turns();
    let t = build_ctable(&th, 1, 2, 128).unwrap();
    assert_eq!(t.coeffs(2), &[Complex::one(128)]);
    let t = build_ctable(&th, 2, 3, 128).unwrap();
    assert_eq!(t.coeffs(3), &[Complex::one(128)]);
}

#[test]
fn ctable_on_quarter_turns() {
    let th = quarter_turns();
    let i_minus_1 = c(-1.0, 1.0);
    let want1 = -(&Complex::one(128) / &i_minus_1);
    let want2 = &Complex::i(128) / &i_minus_1;
    for t in [build_ctable(&th, 1, 3, 128).unwrap(), build_ctable_recursive(&th, 1, 3, 128).unwrap()] {
        let got = t.coeffs(3);
        assert!((&got[0] - &want1).abs().to_f64() < 1e-30);
        assert!((&got[1] - &want2).abs().to_f64() < 1e-30);
    }
    for l in [2, 3] {
        let r = verify_vanishing_sums(&build_ctable(&th, 1, 3, 128).unwrap(), &th, l).unwrap();
        assert!(r.max_residual <= 1e-12, "{r:?}");
    }
}

#[test]
fn closed_form_table_matches_recursion() {
    let m = OperatorModel::random(7, 3, 1e-3, 192).unwrap();
    for k in 1..6 {
        let a = build_ctable(m.thetas(), k, 7, 192).unwrap();
        let b = build_ctable_recursive(m.thetas(), k, 7, 192).unwrap();
        for l in k + 1..=7 {
            for (x, y) in a.coeffs(l).iter().zip(b.coeffs(l)) {
                assert!(rel(x, y, 1e-300) < 1e-30);
            }
        }
    }
}

#[test]
fn recursion_reports_cancellation_on_clustered_nodes() {
    let (_, m) = acceptance_like(10);
    assert!(matches!(
        build_ctable_recursive(m.thetas(), 2, 10, 512),
        Err(Error::InsufficientPrecision(_))
    ));
    let t = build_ctable(m.thetas(), 2, 10, 512).unwrap();
    assert!(t.lost_bits < 8.0);
}

#[test]
fn s_closed_examples() {
    let th = vec![Turn::zero(), Turn::from_u64(1, 2)];
    let t = build_ctable(&th, 1, 2, 128).unwrap();
    let v = s_closed(&t, &th, 2, &BigUint::from(3u32)).unwrap();
    assert!((&v.value - &Complex::one(128)).abs().to_f64() < 1e-30);
    assert!(s_closed(&t, &th, 2, &BigUint::from(0u32)).is_err());

    let m = OperatorModel::random(8, 11, 1e-3, 128).unwrap();
    for (k, l) in [(1, 2), (2, 5), (3, 8)] {
        let t = build_ctable(m.thetas(), k, l, 128).unwrap();
        let v = s_closed(&t, m.thetas(), l, &BigUint::from(l - k)).unwrap();
        assert!((&v.value - &Complex::one(128)).abs().to_f64() < 1e-25, "({k},{l})");
    }
    let t = build_ctable(m.thetas(), 2, 7, 128).unwrap();
    let v = s_closed(&t, m.thetas(), 7, &BigUint::from(40u32)).unwrap();
    let d = s_direct(m.thetas(), 2, 7, 40, 128).unwrap();
    assert!(rel(&v.value, &d, 1e-30) < 1e-10);
    assert!(v.err.to_f64() < 1e-20);
}

#[test]
fn s_direct_examples() {
    let m = OperatorModel::random(4, 5, 1e-3, 128).unwrap();
    let one = s_direct(m.thetas(), 1, 3, 2, 128).unwrap();
    assert!((&one - &Complex::one(128)).abs().to_f64() < 1e-30);
    // Geometric sum.
    let (a, b) = (m.lambda(1, 128), m.lambda(2, 128));
    let n = 17u64;
    let mut pa = Complex::one(128);
    let mut pb = Complex::one(128);
    for _ in 0..n {
        pa = &pa * &a;
        pb = &pb * &b;
    }
    let geo = &(&pb - &pa) / &(&b - &a);
    assert!(rel(&s_direct(m.thetas(), 1, 2, n, 128).unwrap(), &geo, 1e-30) < 1e-25);
    // All nodes at 1: binomial(n, l − k).
    let ones = vec![Turn::zero(); 4];
    let v = s_direct(&ones, 1, 4, 10, 128).unwrap();
    assert!((v.re.to_f64() - 120.0).abs() < 1e-20);
    assert!(matches!(s_direct(&ones, 1, 4, 2_000_000, 128), Err(Error::OracleScaleExceeded(_))));
}

#[test]
fn t_entry_cases() {
    let m = OperatorModel::random(6, 9, 1e-3, 128).unwrap();
    let n5 = BigUint::from(5u32);
    let d = t_entry(&m, 3, 3, &n5).unwrap();
    let mut want = Complex::one(128);
    for _ in 0..5 {
        want = &want * &m.lambda(3, 128);
    }
    assert!(rel(&d.value, &want, 1.0) < 1e-30);
    for k in 1..6 {
        let t = t_entry(&m, k, k + 1, &BigUint::one()).unwrap();
        assert!(rel(&t.value, &Complex::from_real(m.alpha(k)), 1e-300) < 1e-30);
    }
    let t = t_entry(&m, 2, 5, &BigUint::from(3u32)).unwrap();
    let prod = m.alpha(2) * m.alpha(3) * m.alpha(4);
    assert!(rel(&t.value, &Complex::from_real(prod), 1e-300) < 1e-25);
    // Triangularity.
    assert!(t_entry(&m, 4, 2, &n5).unwrap().value.is_zero());
    assert!(t_entry(&m, 1, 6, &BigUint::from(4u32)).unwrap().value.is_zero());
    assert!(!t_entry(&m, 1, 6, &n5).unwrap().value.is_zero());
}

#[test]
fn matpow_small_powers() {
    let m = OperatorModel::random(5, 1, 1e-3, 128).unwrap();
    let id = matpow_oracle(&m, 0).unwrap();
    for (i, row) in id.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            assert_eq!(x.is_zero(), i != j);
        }
    }
    let t = matpow_oracle(&m, 1).unwrap();
    for k in 1..=5 {
        assert_eq!(t[k - 1][k - 1], m.lambda(k, 128));
        if k < 5 {
            assert_eq!(t[k - 1][k].re, m.alpha(k));
        }
    }
    assert!(matches!(matpow_oracle(&m, 2_000_000_000), Err(Error::OracleScaleExceeded(_))));
}

#[test]
fn closed_form_matches_oracle_at_n_1000() {
    for seed in 0..3 {
        let m = OperatorModel::random(8, seed, 1e-3, 128).unwrap();
        let o = matpow_oracle(&m, 1000).unwrap();
        let t = t_matrix(&m, &BigUint::from(1000u32)).unwrap();
        let scale = o.iter().flatten().map(|x| x.abs().to_f64()).fold(0.0, f64::max);
        for k in 0..8 {
            for l in 0..8 {
                let r = rel(&t[k][l].value, &o[k][l], 1e-30 * scale);
                assert!(r < 1e-9, "seed {seed} ({k},{l}) rel {r}");
            }
        }
    }
}

#[test]
fn truncation_is_exact() {
    let big = OperatorModel::random(7, 21, 1e-3, 128).unwrap();
    let small = big.truncate(5).unwrap();
    let a = matpow_oracle(&big, 77).unwrap();
    let b = matpow_oracle(&small, 77).unwrap();
    for k in 0..5 {
        for l in 0..5 {
            assert!((&a[k][l] - &b[k][l]).abs().to_f64() <= 1e-25 * (1.0 + b[k][l].abs().to_f64()));
        }
    }
}

#[test]
fn vanishing_sums_on_random_tuples() {
    for seed in 0..100u64 {
        let l = 2 + (seed % 7) as usize;
        let m = OperatorModel::random(l, 1000 + seed, 1e-3, 128).unwrap();
        let t = build_ctable(m.thetas(), 1, l, 128).unwrap();
        let r = verify_vanishing_sums(&t, m.thetas(), l).unwrap();
        assert!(r.max_residual <= 1e-10 * r.scale.max(r.max_coeff), "{r:?}");
    }
    let th = quarter_turns();
    let r = verify_vanishing_sums(&build_ctable(&th, 1, 2, 128).unwrap(), &th, 2).unwrap();
    assert_eq!(r.max_residual, 0.0);
}

#[test]
fn eigenvectors() {
    let m = OperatorModel::random(6, 4, 1e-3, 192).unwrap();
    let u = eigenvector(&m, 1).unwrap();
    assert_eq!(u.coords[0].re.parse::<f64>().unwrap(), 1.0);
    assert!(u.coords[1..].iter().all(|z| z.re.parse::<f64>().unwrap() == 0.0));
    for n in 1..=6 {
        let e = eigenvector(&m, n).unwrap();
        let bound = 6.0 * 2f64.powi(-(192 - 24)) * e.scale;
        assert!(e.residual <= bound, "n={n} {} > {bound}", e.residual);
        assert_ne!(e.coords[n - 1].re.parse::<f64>().unwrap(), 0.0);
    }
    let d12 = eigvec_distance(&m, 1, 2).unwrap();
    let d21 = eigvec_distance(&m, 2, 1).unwrap();
    assert_eq!(d12, d21);
    assert!(eigenvector(&m, 7).is_err());
}

fn acceptance_like(l: usize) -> (Vec<BigUint>, OperatorModel) {
    let prefix = double_exp(15);
    let supply = SeedSupply::chain_digits(&double_exp(18)).unwrap();
    let m = select_parameters(&prefix, 0.1, &supply, l, &SelectConfig::default()).unwrap();
    (prefix, m)
}

#[test]
fn selection_meets_all_budgets() {
    let (prefix, m) = acceptance_like(8);
    assert_eq!(m.len(), 8);
    let delta = Real::from_f64(0.1, m.bits);
    for l in 2..=8 {
        let j = jmap(l).unwrap();
        let d = eigvec_distance(&m, l, j).unwrap();
        assert!(d <= Real::one(m.bits).mul_pow2(-(l as i64)), "eigenvector step target at {l}");
        assert!(m.alpha(l - 1) <= delta);
    }
    for n in &prefix {
        let t = t_matrix(&m, n).unwrap();
        for l in 2..=8 {
            let col = (0..l - 1).fold(Real::zero(m.bits), |s, k| s + t[k][l - 1].abs_up().square());
            assert!(col <= delta.square().mul_pow2(-(l as i64)), "n={n} l={l}");
        }
    }
    let r = rigidity_report(&m, &prefix).unwrap();
    assert!(r.verdict, "{r:?}");
    assert!(r.rows.iter().all(|row| row.norm_estimate <= 1.1));
    let s = spectral_criterion_check(&m).unwrap();
    assert!(s.distinct && s.leading_nonzero && s.approximation_ok, "{s:?}");
}

#[test]
fn loose_budget_builds_quickly() {
    let prefix = double_exp(4);
    let mut pts = vec![Turn::from_u64(1, 3)];
    pts.extend([32usize, 64].iter().map(|&b| Turn::new(BigUint::one(), BigUint::one() << b)));
    let supply = SeedSupply::from_points("three points", pts);
    let m = select_parameters(&prefix, 2.0, &supply, 3, &SelectConfig::default()).unwrap();
    assert_eq!(m.len(), 3);
    // e(1/3) is rejected once (α_1 = 4√3 > δ), then the tiny seeds pass.
    let total: usize = m.schedule.iter().map(|r| r.halvings).sum();
    assert_eq!(total, 1, "{:?}", m.schedule);
}

#[test]
fn slow_prefix_exhausts_supply() {
    let prefix: Vec<BigUint> = (2..=65u32).map(BigUint::from).collect();
    let supply = grid_supply(128, 127);
    let r = select_parameters(&prefix, 0.1, &supply, 4, &SelectConfig::default());
    assert!(matches!(r, Err(Error::SupplyExhausted(_))), "{r:?}");
}

#[test]
fn diagonal_model_has_no_off_diagonal_mass() {
    let m = OperatorModel::random(5, 2, 1e-3, 128).unwrap();
    let d = OperatorModel::diagonal(m.thetas().to_vec(), 128).unwrap();
    let prefix = vec![BigUint::from(3u32), BigUint::from(1000u32)];
    let r = rigidity_report(&d, &prefix).unwrap();
    for row in &r.rows {
        assert_eq!(row.hs_log2, f64::NEG_INFINITY);
        assert!((row.norm_estimate - 1.0).abs() < 1e-9);
    }
    assert!(r.shift_pass);
}

#[test]
fn spectral_check_needs_four_levels() {
    let m = OperatorModel::random(3, 2, 1e-3, 128).unwrap();
    assert!(spectral_criterion_check(&m).is_err());
    let m = OperatorModel::random(6, 2, 1e-3, 128).unwrap();
    let s = spectral_criterion_check(&m).unwrap();
    assert!(s.distinct && s.leading_nonzero);
}

#[test]
fn duplicate_angles_are_rejected() {
    let th = vec![Turn::zero(), Turn::from_u64(1, 3), Turn::from_u64(1, 3)];
    let w = vec![BigRational::one(); 2];
    assert!(matches!(OperatorModel::new(th.clone(), w, 0.5, 128), Err(Error::SeparationTooSmall(_))));
    assert!(matches!(build_ctable(&th, 1, 3, 128), Err(Error::SeparationTooSmall(_))));
}

#[test]
fn model_round_trips_through_json() {
    let (_, m) = acceptance_like(5);
    let js = serde_json::to_string(&m).unwrap();
    assert!(js.contains(JMAP_NAME));
    let back: OperatorModel = serde_json::from_str(&js).unwrap();
    assert_eq!(back, m);
    let r = OperatorModel::random(4, 8, 1e-3, 128).unwrap();
    let back: OperatorModel = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn decimal_weights_are_exact() {
    for s in ["1", "0.5", "1.375", "4096", "3/7"] {
        assert_eq!(rational_decimal(&parse_decimal(s).unwrap()), s);
    }
    assert!(parse_decimal("x").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oracle_equivalence(seed in 0u64..10_000, l in 2usize..7, n in 0u64..200) {
        let m = OperatorModel::random(l, seed, 1e-3, 128).unwrap();
        let o = matpow_oracle(&m, n).unwrap();
        let t = t_matrix(&m, &BigUint::from(n)).unwrap();
        let scale = o.iter().flatten().map(|x| x.abs().to_f64()).fold(0.0, f64::max);
        for k in 0..l {
            for j in 0..l {
                prop_assert_eq!(t[k][j].value.is_zero(), k > j || (j - k) as u64 > n);
                prop_assert!(rel(&t[k][j].value, &o[k][j], 1e-30 * scale) < 1e-9);
            }
        }
    }

    #[test]
    fn s_closed_matches_direct(seed in 0u64..10_000, w in 1usize..6, extra in 0u64..60) {
        let m = OperatorModel::random(w + 1, seed, 1e-3, 128).unwrap();
        let t = build_ctable(m.thetas(), 1, w + 1, 128).unwrap();
        let n = w as u64 + extra;
        let v = s_closed(&t, m.thetas(), w + 1, &BigUint::from(n)).unwrap();
        let d = s_direct(m.thetas(), 1, w + 1, n, 128).unwrap();
        prop_assert!(rel(&v.value, &d, 1e-20) < 1e-10);
    }
}
