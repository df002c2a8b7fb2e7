use num_bigint::BigUint;
use num_traits::{One, Zero};
use proptest::prelude::*;
use riglab_core::circle::Turn;
use riglab_core::gaussproc::*;
use riglab_core::measures::{Atomic, ChainMeasure};
use riglab_core::Error;

fn idx(v: &[u64]) -> Vec<BigUint> {
    v.iter().map(|&x| BigUint::from(x)).collect()
}

fn chain12() -> AtomicSpectralMeasure {
    let mu = ChainMeasure::dyadic_harmonic(12);
    let a = Atomic::from_chain(&mu, 12, 128).unwrap();
    AtomicSpectralMeasure::from_atomic(&a).unwrap().symmetrize()
}

fn powers_of_two(k: usize) -> Vec<BigUint> {
    (0..=k).map(|j| BigUint::one() << j).collect()
}

#[test]
fn unsymmetrized_measure_is_rejected() {
    let m = AtomicSpectralMeasure::new(vec![Turn::from_u64(1, 3)], vec![1.0], false).unwrap();
    let cfg = SimulationConfig { trials: 100, seed: 1, indices: idx(&[0, 1]) };
    assert!(matches!(sample_paths(&m, &cfg), Err(Error::NotSymmetrized(_))));
    assert!(matches!(
        AtomicSpectralMeasure::new(vec![Turn::from_u64(1, 3)], vec![1.0], true),
        Err(Error::NotSymmetrized(_))
    ));
    let s = m.symmetrize();
    assert_eq!(s.atoms().len(), 2);
    assert!(sample_paths(&s, &cfg).is_ok());
}

#[test]
fn weights_must_sum_to_one() {
    assert!(AtomicSpectralMeasure::new(vec![Turn::zero()], vec![0.9], true).is_err());
    assert!(AtomicSpectralMeasure::new(vec![Turn::zero()], vec![-1.0], true).is_err());
}

#[test]
fn too_few_trials() {
    let m = AtomicSpectralMeasure::new(vec![Turn::zero()], vec![1.0], true).unwrap();
    let cfg = SimulationConfig { trials: 99, seed: 1, indices: idx(&[0]) };
    assert!(matches!(sample_paths(&m, &cfg), Err(Error::InvalidSpec(_))));
}

#[test]
fn atom_at_zero_gives_constant_paths() {
    let m = AtomicSpectralMeasure::new(vec![Turn::zero()], vec![1.0], true).unwrap();
    let cfg = SimulationConfig { trials: 200, seed: 3, indices: idx(&[0, 1, 5, 1000]) };
    let p = sample_paths(&m, &cfg).unwrap();
    for row in &p.values {
        assert!(row.iter().all(|x| *x == row[0]));
    }
    let r = rigidity_statistic(&p, &idx(&[1, 5, 1000]), &m).unwrap();
    for row in &r.rows {
        assert_eq!(row.empirical, 0.0);
        assert_eq!(row.theory, 0.0);
    }
    assert!(r.verdict);
}

#[test]
fn half_turn_alternates() {
    let m = AtomicSpectralMeasure::new(vec![Turn::from_u64(1, 2)], vec![1.0], true).unwrap();
    let cfg = SimulationConfig { trials: 4000, seed: 5, indices: idx(&[0, 1, 2, 3]) };
    let p = sample_paths(&m, &cfg).unwrap();
    for n in 0..4u64 {
        let (c, se) = p.covariance(&BigUint::from(n), &BigUint::zero()).unwrap();
        let want = if n % 2 == 0 { 1.0 } else { -1.0 };
        assert!((c - want).abs() <= 3.0 * se, "n={n} cov {c} se {se}");
    }
}

#[test]
fn chain_measure_covariance_matches_fourier() {
    let m = chain12();
    let cfg = SimulationConfig { trials: 5000, seed: 11, indices: idx(&[0, 1, 3, 8, 100]) };
    let p = sample_paths(&m, &cfg).unwrap();
    for lag in [1u64, 3, 8, 100] {
        let n = BigUint::from(lag);
        let (c, se) = p.covariance(&n, &BigUint::zero()).unwrap();
        let want = m.fourier(&n).0;
        assert!((c - want).abs() <= 3.0 * se, "lag {lag}: {c} vs {want} (se {se})");
    }
}

#[test]
fn null_fourier_coefficient_gives_two() {
    // Uniform on the 4th roots of unity: μ̂(1) = 0.
    let atoms = (0..4).map(|i| Turn::from_u64(i, 4)).collect();
    let m = AtomicSpectralMeasure::new(atoms, vec![0.25; 4], true).unwrap();
    let cfg = SimulationConfig { trials: 5000, seed: 2, indices: idx(&[0, 1]) };
    let p = sample_paths(&m, &cfg).unwrap();
    let r = rigidity_statistic(&p, &idx(&[1]), &m).unwrap();
    assert!((r.rows[0].theory - 2.0).abs() < 1e-15);
    assert!(r.rows[0].z.abs() <= 3.0, "{r:?}");
}

#[test]
fn statistic_tracks_chain_measure() {
    let m = chain12();
    let prefix = powers_of_two(12);
    let mut indices = vec![BigUint::zero()];
    indices.extend(prefix.iter().cloned());
    let cfg = SimulationConfig { trials: 2000, seed: 9, indices };
    let p = sample_paths(&m, &cfg).unwrap();
    let r = rigidity_statistic(&p, &prefix, &m).unwrap();
    assert!(r.rows.windows(2).all(|w| w[1].theory <= w[0].theory + 1e-12));
    assert!(r.rows.last().unwrap().theory < 1e-12);
    assert!(r.rows.iter().filter(|x| x.within).count() >= r.rows.len() - 1);
    // Theory agrees with the product formula for the same depth-12 measure.
    let mu = ChainMeasure::dyadic_harmonic(12);
    for row in &r.rows {
        let n: BigUint = row.n.parse().unwrap();
        let f = riglab_core::measures::bern_fourier(&mu, &n, None).unwrap();
        let want = 2.0 * (1.0 - f.value.re.to_f64());
        assert!((row.theory - want).abs() < 1e-12, "{} vs {want}", row.theory);
    }
}

#[test]
fn missing_index_is_reported() {
    let m = chain12();
    let cfg = SimulationConfig { trials: 100, seed: 1, indices: idx(&[1, 2]) };
    let p = sample_paths(&m, &cfg).unwrap();
    assert!(matches!(rigidity_statistic(&p, &idx(&[1]), &m), Err(Error::IndexMissing(_))));
    let cfg = SimulationConfig { trials: 100, seed: 1, indices: idx(&[0, 2]) };
    let p = sample_paths(&m, &cfg).unwrap();
    assert!(matches!(rigidity_statistic(&p, &idx(&[1]), &m), Err(Error::IndexMissing(_))));
}

#[test]
fn standard_errors_scale_with_trials() {
    let m = chain12();
    let prefix = idx(&[1, 2, 4]);
    let se = |trials| {
        let cfg = SimulationConfig { trials, seed: 4, indices: idx(&[0, 1, 2, 4]) };
        let p = sample_paths(&m, &cfg).unwrap();
        rigidity_statistic(&p, &prefix, &m).unwrap().rows.iter().map(|r| r.se).collect::<Vec<_>>()
    };
    let (a, b, c) = (se(2000), se(4000), se(8000));
    for i in 0..3 {
        let half = c[i] / a[i];
        assert!((half - 0.5).abs() <= 0.1, "quadrupling ratio {half}");
        let root = b[i] / a[i];
        assert!((root - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.2 * std::f64::consts::FRAC_1_SQRT_2);
    }
}

#[test]
fn deterministic_and_thread_independent() {
    let m = chain12();
    let cfg = SimulationConfig { trials: 300, seed: 77, indices: idx(&[0, 1, 2]) };
    let a = sample_paths(&m, &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| sample_paths(&m, &cfg).unwrap());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn measure_round_trips_through_json() {
    let m = chain12();
    let back: AtomicSpectralMeasure = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(back, m);
}

fn leading_minors_nonnegative(c: &[Vec<f64>]) -> bool {
    // Gaussian elimination; pivots of a PSD matrix are ≥ 0 up to roundoff.
    let mut a = c.to_vec();
    let n = a.len();
    for i in 0..n {
        let piv = a[i][i];
        if piv < -1e-9 {
            return false;
        }
        if piv.abs() < 1e-12 {
            continue;
        }
        for r in i + 1..n {
            let f = a[r][i] / piv;
            for col in i..n {
                a[r][col] -= f * a[i][col];
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn covariance_is_psd(seed in 0u64..1000, a in 1u64..50, b in 51u64..500, c in 501u64..5000) {
        let m = chain12();
        let cfg = SimulationConfig { trials: 200, seed, indices: idx(&[0, a, b, c]) };
        let p = sample_paths(&m, &cfg).unwrap();
        let cov = p.covariance_matrix(&idx(&[0, a, b, c])).unwrap();
        prop_assert!(leading_minors_nonnegative(&cov));
    }
}
