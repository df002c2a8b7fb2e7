use num_bigint::BigUint;
use num_traits::One;
use proptest::prelude::*;
use riglab_core::circle::{Angle, AngleSource, Turn};
use riglab_core::hp::{Complex, Real};
use riglab_core::measures::*;
use riglab_core::seqgen::{self, SequencePrefix};
use riglab_core::Error;

fn pow2(k: usize) -> BigUint {
    BigUint::one() << k
}

fn prefix(terms: Vec<BigUint>) -> SequencePrefix {
    SequencePrefix::new(terms, None).unwrap()
}

#[test]
fn factors_dividing_n_are_exactly_one() {
    // Depth equal to k: every factor has m_j | 2^k, so the product is 1.
    let mu = ChainMeasure::dyadic_harmonic(12);
    let f = bern_fourier(&mu, &pow2(12), None).unwrap();
    assert!(f.value == Complex::one(f.value.prec()));
    // Deeper chain: only factors j > k differ from 1.
    let mu = ChainMeasure::dyadic_harmonic(40);
    let k = 10;
    let f = bern_fourier(&mu, &pow2(k), None).unwrap();
    let direct: (f64, f64) = (k + 1..=40)
        .map(|j| {
            let a = 1.0 / (j as f64 + 1.0);
            let t = 2.0 * std::f64::consts::PI * 2f64.powi(k as i32 - j as i32);
            (1.0 - a + a * t.cos(), a * t.sin())
        })
        .fold((1.0, 0.0), |(x, y), (u, v)| (x * u - y * v, x * v + y * u));
    let (re, im) = f.value.to_f64();
    assert!((re - direct.0).abs() < 1e-12 && (im - direct.1).abs() < 1e-12);
}

#[test]
fn single_factor_half_weight_vanishes_at_one() {
    let mu = ChainMeasure::new(vec![BigUint::from(2u32)], vec![0.5], WeightRule::Explicit).unwrap();
    let f = bern_fourier(&mu, &BigUint::one(), None).unwrap();
    assert!(f.value.abs().to_f64() < 1e-30);
}

#[test]
fn n_zero_is_exactly_one() {
    let mu = ChainMeasure::dyadic_harmonic(8);
    let f = bern_fourier(&mu, &BigUint::from(0u32), None).unwrap();
    assert!(f.value == Complex::one(f.value.prec()));
    assert_eq!(f.err, 0.0);
}

#[test]
fn tolerance_reports_depth_insufficient() {
    let mu = ChainMeasure::dyadic_harmonic(10);
    let e = bern_fourier(&mu, &pow2(9), Some(1e-6)).unwrap_err();
    assert!(matches!(e, Error::DepthInsufficient(_)));
}

#[test]
fn chain_validation() {
    let bad = ChainMeasure::new(vec![BigUint::from(2u32), BigUint::from(6u32), BigUint::from(9u32)], vec![0.5; 3], WeightRule::Explicit);
    assert!(matches!(bad, Err(Error::NotAChain(_))));
    let inc = ChainMeasure::new(vec![BigUint::from(2u32), BigUint::from(4u32)], vec![0.2, 0.3], WeightRule::Explicit);
    assert!(matches!(inc, Err(Error::InvalidSpec(_))));
}

#[test]
fn harmonic_dyadic_certificate_passes() {
    let mu = ChainMeasure::dyadic_harmonic(80);
    let p = prefix((0..=30).map(pow2).collect());
    let r = verify_chain_certificate(&mu, &p).unwrap();
    assert_eq!(r.rows.len(), 31);
    assert!(r.verdict, "{}", r.to_csv());
    assert!(r.rows.iter().all(|row| row.trunc_err >= 0.0 && row.trunc_err < 1e-9));
}

#[test]
fn constant_weight_certificate_passes() {
    let mu = ChainMeasure::dyadic_constant(60, 0.9).unwrap();
    let p = prefix((1..=20).map(pow2).collect());
    let r = verify_chain_certificate(&mu, &p).unwrap();
    assert!(r.verdict);
}

#[test]
fn unrelated_term_is_rejected() {
    let mu = ChainMeasure::dyadic_harmonic(20);
    let p = prefix(vec![BigUint::from(3u32), pow2(2)]);
    assert!(matches!(verify_chain_certificate(&mu, &p), Err(Error::PrefixChainMismatch(_))));
}

#[test]
fn missing_next_weight_is_depth_insufficient() {
    let mu = ChainMeasure::dyadic_harmonic(5);
    let p = prefix(vec![pow2(5)]);
    assert!(matches!(verify_chain_certificate(&mu, &p), Err(Error::DepthInsufficient(_))));
}

#[test]
fn csv_has_one_line_per_row() {
    let mu = ChainMeasure::dyadic_harmonic(30);
    let r = verify_chain_certificate(&mu, &prefix((1..=5).map(pow2).collect())).unwrap();
    assert_eq!(r.to_csv().lines().count(), 6);
    let js = serde_json::to_string(&r).unwrap();
    let back: CertificateReport = serde_json::from_str(&js).unwrap();
    assert_eq!(back, r);
}

#[test]
fn coin_single_digit_two_vanishes() {
    let nu = CoinMeasure::new(vec![BigUint::from(2u32)], None).unwrap();
    let f = coin_fourier(&nu, &BigUint::one(), None).unwrap();
    assert!(f.value.abs().to_f64() < 1e-30);
}

#[test]
fn coin_all_digits_divide_n() {
    let nu = CoinMeasure::new((1..=4).map(|p| pow2(p * p)).collect(), Some(1e-9)).unwrap();
    let f = coin_fourier(&nu, &pow2(16), None).unwrap();
    assert!(f.value == Complex::one(f.value.prec()));
    assert!(f.err <= std::f64::consts::PI * 65536.0 * 1e-9 * 1.000001);
}

#[test]
fn coin_matches_monte_carlo() {
    let nu = CoinMeasure::new((1..=8).map(|p| pow2(p * p)).collect(), None).unwrap();
    for n in [pow2(16), BigUint::from(12345u32), BigUint::from(3u32)] {
        let f = coin_fourier(&nu, &n, None).unwrap();
        let (re, im) = f.value.to_f64();
        let mc = coin_fourier_mc(&nu, &n, 100_000, 7);
        assert!(mc.agrees(re, im, 3.0), "n={n}: {re} {im} vs {mc:?}");
    }
    let f = coin_fourier(&nu, &pow2(16), None).unwrap();
    assert!(f.dist_one_up() < 1e-2);
}

#[test]
fn blocks_generous_schedule_meets_targets() {
    let schedule = [1, 6, 91, 45_000];
    let g = seqgen::blocks_generate(&schedule, 3, Some(2300)).unwrap();
    assert_eq!(g.labels.last().unwrap().p, 2);
    let r = blocks_certificate(&schedule, &g.prefix).unwrap();
    assert_eq!(r.rows.len(), 2300);
    let failing: Vec<_> = r.rows.iter().filter(|row| !row.pass).map(|row| (row.index, row.dist_one, row.bound)).take(5).collect();
    assert!(r.verdict, "{failing:?}");
}

#[test]
fn blocks_empty_prefix_gives_empty_report() {
    let r = blocks_certificate(&[1, 6, 91], &prefix(vec![])).unwrap();
    assert!(r.rows.is_empty() && r.verdict);
}

#[test]
fn blocks_tight_schedule_fails_rows() {
    let schedule = [1, 2, 3, 4];
    let g = seqgen::blocks_generate(&schedule, 3, Some(200)).unwrap();
    let r = blocks_certificate(&schedule, &g.prefix).unwrap();
    assert!(!r.verdict);
    assert!(r.failures > 0);
}

#[test]
fn blocks_foreign_prefix_is_inconsistent() {
    let p = prefix(vec![BigUint::from(2u32), BigUint::from(5u32)]);
    assert!(matches!(blocks_certificate(&[1, 3, 9], &p), Err(Error::ScheduleInconsistent(_))));
}

#[test]
fn weyl_examples() {
    let lin: Vec<BigUint> = (1..=100u32).map(BigUint::from).collect();
    assert!(weyl_average(&lin, &Angle::exact(1, 2), 100).unwrap() < 1e-12);
    assert!((weyl_average(&lin, &Angle::zero(), 37).unwrap() - 1.0).abs() < 1e-15);
    let sq: Vec<BigUint> = (1..=10_000u64).map(|k| BigUint::from(k * k)).collect();
    let theta = AngleSource::FracSqrt { m: 2 }.at_bits(256).unwrap();
    assert!(weyl_average(&sq, &theta, 10_000).unwrap() < 0.1);
}

#[test]
fn primes_show_nonrigidity_evidence() {
    let ps = seqgen::primes(10_000);
    let r = nonrigidity_scan(&ps, &WeylSampling::default(), 10_000).unwrap();
    assert!(r.p95 < 0.5, "{r:?}");
    assert!(r.evidence);
    assert_eq!(r.histogram.iter().sum::<usize>(), 512);
}

#[test]
fn double_exponential_is_inconclusive() {
    let t: Vec<BigUint> = (0..20).map(|k| pow2(1 << k)).collect();
    let r = nonrigidity_scan(&t, &WeylSampling::default(), 20).unwrap();
    assert!(!r.evidence);
    assert_eq!(r.verdict, "no evidence");
}

#[test]
fn single_term_is_inconclusive() {
    let r = nonrigidity_scan(&[BigUint::from(5u32)], &WeylSampling::default(), 1).unwrap();
    assert!((r.p95 - 1.0).abs() < 1e-12 && !r.evidence);
}

#[test]
fn l2_identity_examples() {
    let p = 192;
    let two_atoms = Atomic {
        atoms: vec![Turn::zero(), Turn::new(BigUint::one(), BigUint::from(2u32))],
        weights: vec![Real::from_f64(0.5, p); 2],
    };
    assert!(l2_identity_check(&two_atoms, &BigUint::one(), p).to_f64() <= 2f64.powi(-(p as i32 - 16)));
    let mu = ChainMeasure::dyadic_harmonic(10);
    let at = Atomic::from_chain(&mu, 10, p).unwrap();
    assert!(l2_identity_check(&at, &BigUint::from(0u32), p).to_f64() <= 2f64.powi(-(p as i32 - 16)));
    for n in [1u32, 3, 100, 12345] {
        assert!(l2_identity_check(&at, &BigUint::from(n), p).to_f64() <= 2f64.powi(-(p as i32 - 16)));
    }
    let nu = CoinMeasure::new((1..=8).map(|q| pow2(q * q)).collect(), None).unwrap();
    let at = Atomic::from_coin(&nu, 8, p).unwrap();
    assert!(l2_identity_check(&at, &BigUint::from(777u32), p).to_f64() <= 2f64.powi(-(p as i32 - 16)));
}

#[test]
fn atomic_fourier_agrees_with_product() {
    let mu = ChainMeasure::dyadic_harmonic(12);
    let at = Atomic::from_chain(&mu, 12, 128).unwrap();
    for n in [1u32, 5, 1000] {
        let a = at.fourier(&BigUint::from(n), 128);
        let b = bern_fourier(&mu, &BigUint::from(n), None).unwrap();
        assert!((&a - &b.value).abs().to_f64() < 1e-25);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chain_coefficients_lie_in_closed_disc(n in 1u64..1_000_000, depth in 1usize..40) {
        let mu = ChainMeasure::dyadic_harmonic(depth);
        let f = bern_fourier(&mu, &BigUint::from(n), None).unwrap();
        prop_assert!(f.value.abs().to_f64() <= 1.0 + 1e-30);
    }

    #[test]
    fn conjugate_symmetry_via_atoms(n in 1u64..100_000) {
        // σ̂(−n) is the conjugate of σ̂(n): check |σ̂(n)|² = σ̂(n)·conj(σ̂(n)) on atoms.
        let mu = ChainMeasure::dyadic_harmonic(8);
        let at = Atomic::from_chain(&mu, 8, 128).unwrap();
        let z = at.fourier(&BigUint::from(n), 128);
        let prod = &z * &z.conj();
        prop_assert!(prod.im.abs().to_f64() < 1e-30);
        prop_assert!(prod.re.to_f64() <= 1.0 + 1e-30);
    }

    #[test]
    fn l2_residual_is_small(n in 0u64..1_000_000) {
        let mu = ChainMeasure::dyadic_harmonic(9);
        let at = Atomic::from_chain(&mu, 9, 160).unwrap();
        prop_assert!(l2_identity_check(&at, &BigUint::from(n), 160).to_f64() <= 2f64.powi(-(160 - 16)));
    }

    #[test]
    fn chain_certificate_rows_pass_for_harmonic_chain(k in 0usize..40) {
        let mu = ChainMeasure::dyadic_harmonic(100);
        let r = verify_chain_certificate(&mu, &prefix(vec![pow2(k)])).unwrap();
        prop_assert!(r.verdict);
    }
}
