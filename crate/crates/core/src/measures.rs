//! Continuous probability measures on the circle with computable Fourier
//! coefficients, and the certificates built from them:
//!
//! * chain measures `∗_j ((1 − a_j)δ_0 + a_j δ_{1/m_j})` over a divisibility
//!   chain `m_1 | m_2 | …`, with `|σ̂(m_k) − 1| ≤ 4π a_{k+1}`;
//! * fair-coin measures on digit sets `{Σ ε_p/d_p}`;
//! * the block-construction certificate with per-block targets `2^{-p}`;
//! * Weyl-average diagnostics against rigidity.
//!
//! Fourier convention: `σ̂(n) = ∫ e^{2πi n x} dσ(x)` with `x` in turns.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{Angle, Turn};
use crate::error::{Error, Result};
use crate::hp::{self, expm1_turn, Complex, Real};
use crate::json::ComplexJson;
use crate::rng;
use crate::seqgen::{self, blocks_a, BlocksPrefix, SequencePrefix};

/// Working precision for Fourier products.
pub const MEASURE_BITS: usize = 128;

/// Why the measure is continuous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WeightRule {
    /// `a_j = 1/(j + shift)`: harmonic, so `Σ a_j = ∞`.
    Harmonic { shift: u64 },
    /// `a_j = a` for every `j`.
    Constant { a: f64 },
    /// Explicit weights; divergence is assumed, not certified.
    Explicit,
    /// `b_j/(4π)` from the block schedule; divergence follows from the
    /// schedule's divergence condition.
    Schedule,
}

/// `∗_{j=1}^{J} ((1 − a_j)δ_0 + a_j δ_{1/m_j})`. The unstored continuation is
/// assumed to keep `m_{j+1} ≥ 2 m_j` and `a_{j+1} ≤ a_J`, which is what the
/// truncation bound uses.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMeasure {
    pub chain: Vec<BigUint>,
    pub weights: Vec<f64>,
    pub rule: WeightRule,
}

impl ChainMeasure {
    pub fn new(chain: Vec<BigUint>, weights: Vec<f64>, rule: WeightRule) -> Result<Self> {
        if chain.is_empty() || chain.len() != weights.len() {
            return Err(Error::InvalidSpec("chain and weights must be nonempty and equally long".into()));
        }
        if chain[0] < BigUint::from(2u32) {
            return Err(Error::NotAChain("m_1 must be at least 2".into()));
        }
        for (i, w) in chain.windows(2).enumerate() {
            if w[1] <= w[0] || !(&w[1] % &w[0]).is_zero() {
                return Err(Error::NotAChain(format!("m_{} does not divide m_{}", i + 1, i + 2)));
            }
        }
        if weights.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::InvalidSpec("weights must lie in (0, 1)".into()));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpec("weights must be nonincreasing".into()));
        }
        Ok(ChainMeasure { chain, weights, rule })
    }

    /// Chain `m_j = 2^j` with `a_j = 1/(j + 1)`, `j = 1..=depth`.
    pub fn dyadic_harmonic(depth: usize) -> Self {
        let chain = (1..=depth).map(|j| BigUint::one() << j).collect();
        let weights = (1..=depth).map(|j| 1.0 / (j as f64 + 1.0)).collect();
        ChainMeasure::new(chain, weights, WeightRule::Harmonic { shift: 1 }).unwrap()
    }

    /// Chain `m_j = 2^j` with constant weight `a`.
    pub fn dyadic_constant(depth: usize, a: f64) -> Result<Self> {
        let chain = (1..=depth).map(|j| BigUint::one() << j).collect();
        ChainMeasure::new(chain, vec![a; depth], WeightRule::Constant { a })
    }

    pub fn depth(&self) -> usize {
        self.chain.len()
    }

    /// Statement of the continuity hypothesis.
    pub fn continuity(&self) -> String {
        match &self.rule {
            WeightRule::Harmonic { shift } => {
                format!("a_j = 1/(j+{shift}) has divergent sum; continuous by Levy's theorem")
            }
            WeightRule::Constant { a } => {
                format!("a_j = {a} has divergent sum; continuous by Levy's theorem")
            }
            WeightRule::Explicit => "divergence of sum a_j assumed beyond the stored depth".into(),
            WeightRule::Schedule => {
                "sum b_j diverges when every divergence condition of the schedule holds".into()
            }
        }
    }

    /// Index `k` of the largest `m_k` dividing `n` (with `m_0 = 1`).
    pub fn chain_index(&self, n: &BigUint) -> usize {
        let mut k = 0;
        for (i, m) in self.chain.iter().enumerate() {
            if m > n || !(n % m).is_zero() {
                break;
            }
            k = i + 1;
        }
        k
    }

    /// `a_j` for `1 ≤ j ≤ J`.
    pub fn a(&self, j: usize) -> Option<f64> {
        if j == 0 {
            None
        } else {
            self.weights.get(j - 1).copied()
        }
    }
}

/// A Fourier coefficient with a rigorous absolute error bound.
#[derive(Clone, Debug)]
pub struct FourierValue {
    pub value: Complex,
    pub err: f64,
}

impl FourierValue {
    /// `|value − 1|` rounded upward.
    pub fn dist_one_up(&self) -> f64 {
        let p = self.value.prec();
        let d = &self.value - &Complex::one(p);
        d.abs().to_f64_up()
    }
}

fn rounding_err(factors: usize, p: usize) -> f64 {
    (factors as f64 + 4.0) * hp::ldexp(1.0, -(p as i64 - 6))
}

/// Truncated product `Π_{j≤J}(1 − a_j(1 − e^{2πi n/m_j}))`. Factors with
/// `m_j | n` are exactly 1. The error covers the unstored tail
/// `≤ 2π a_J n/m_J` and rounding.
pub fn bern_fourier(mu: &ChainMeasure, n: &BigUint, tol: Option<f64>) -> Result<FourierValue> {
    bern_fourier_prec(mu, n, tol, MEASURE_BITS)
}

pub fn bern_fourier_prec(mu: &ChainMeasure, n: &BigUint, tol: Option<f64>, p: usize) -> Result<FourierValue> {
    let mut z = Complex::one(p);
    let mut used = 0usize;
    for (m, &a) in mu.chain.iter().zip(&mu.weights) {
        let r = n % m;
        if r.is_zero() {
            continue;
        }
        let e = expm1_turn(&r.into(), m, p);
        let f = &Complex::one(p) + &e.scale(&Real::from_f64(a, p));
        z = &z * &f;
        used += 1;
    }
    let j = mu.depth();
    let tail = if n.is_zero() {
        0.0
    } else {
        let ratio = hp::ratio_to_f64(n, &mu.chain[j - 1]);
        (2.0 * PI * mu.weights[j - 1] * ratio).min(2.0) * (1.0 + 1e-12)
    };
    let err = tail + if used > 0 { rounding_err(used, p) } else { 0.0 };
    if let Some(t) = tol {
        if err > t {
            return Err(Error::DepthInsufficient(format!(
                "truncation error {err:e} above tolerance {t:e}"
            )));
        }
    }
    Ok(FourierValue { value: z, err })
}

/// One row of a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    pub index: usize,
    pub n: String,
    pub sigma: ComplexJson,
    /// `|σ̂(n) − 1|`, rounded up.
    pub dist_one: f64,
    pub trunc_err: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<seqgen::BlocksLabel>,
}

/// Per-row certificate with an overall verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub kind: String,
    pub bound_formula: String,
    pub continuity: String,
    pub rows: Vec<CertRow>,
    pub verdict: bool,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CertificateReport {
    fn finish(kind: &str, bound_formula: &str, continuity: String, rows: Vec<CertRow>, notes: Vec<String>) -> Self {
        let failures = rows.iter().filter(|r| !r.pass).count();
        CertificateReport {
            kind: kind.into(),
            bound_formula: bound_formula.into(),
            continuity,
            verdict: failures == 0,
            failures,
            rows,
            notes,
        }
    }

    /// Flat per-row trace.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,n,re,im,dist_one,trunc_err,bound,pass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{:e},{:e},{:e},{}\n",
                r.index, r.n, r.sigma.re, r.sigma.im, r.dist_one, r.trunc_err, r.bound, r.pass
            ));
        }
        s
    }
}

/// Checks `|σ̂(n_k) − 1| + error ≤ 4π a_{k+1}` where `m_k` is the largest
/// chain element dividing `n_k`. Every term must divide `m_J`.
pub fn verify_chain_certificate(mu: &ChainMeasure, prefix: &SequencePrefix) -> Result<CertificateReport> {
    let last = mu.chain.last().unwrap();
    for n in &prefix.terms {
        if n > last || !(last % n).is_zero() {
            return Err(Error::PrefixChainMismatch(format!("{n} does not divide m_J")));
        }
    }
    let rows: Vec<Result<CertRow>> = prefix
        .terms
        .par_iter()
        .enumerate()
        .map(|(i, n)| {
            let k = mu.chain_index(n);
            let a_next = mu.a(k + 1).ok_or_else(|| {
                Error::DepthInsufficient(format!("a_{} not stored for n = {n}", k + 1))
            })?;
            let f = bern_fourier(mu, n, None)?;
            let d = f.dist_one_up();
            let bound = 4.0 * PI * a_next;
            Ok(CertRow {
                index: i,
                n: n.to_string(),
                sigma: ComplexJson::from_complex(&f.value),
                dist_one: d,
                trunc_err: f.err,
                bound,
                pass: d + f.err <= bound,
                label: None,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CertificateReport::finish(
        "chain",
        "|sigma(n_k) - 1| + err <= 4 pi a_{k+1}",
        mu.continuity(),
        rows,
        Vec::new(),
    ))
}

/// Fair-coin product measure on `{Σ_p ε_p/d_p}`; `tail` bounds
/// `Σ_{p>P} 1/d_p` for the unstored digits.
#[derive(Clone, Debug, PartialEq)]
pub struct CoinMeasure {
    pub digits: Vec<BigUint>,
    pub tail: f64,
}

impl CoinMeasure {
    /// With `tail = None` the continuation is assumed to at least double,
    /// giving `Σ_{p>P} 1/d_p ≤ 1/d_P`.
    pub fn new(digits: Vec<BigUint>, tail: Option<f64>) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::InvalidSpec("coin measure needs at least one digit".into()));
        }
        if digits[0].is_zero() || digits.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("digits must be positive and strictly increasing".into()));
        }
        let tail = tail.unwrap_or_else(|| {
            hp::ratio_to_f64(&BigUint::one(), digits.last().unwrap()) * (1.0 + 1e-12)
        });
        Ok(CoinMeasure { digits, tail })
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }
}

/// `Π_{p≤P} (1 + e^{2πi n/d_p})/2` with error `≤ π n Σ_{p>P} 1/d_p`.
pub fn coin_fourier(nu: &CoinMeasure, n: &BigUint, tol: Option<f64>) -> Result<FourierValue> {
    let p = MEASURE_BITS;
    let half = Real::from_f64(0.5, p);
    let mut z = Complex::one(p);
    let mut used = 0;
    for d in &nu.digits {
        let r = n % d;
        if r.is_zero() {
            continue;
        }
        // (1 + e)/2 = 1 + (e − 1)/2
        let e = expm1_turn(&r.into(), d, p);
        let f = &Complex::one(p) + &e.scale(&half);
        z = &z * &f;
        used += 1;
    }
    let tail = (PI * n.to_f64().unwrap_or(f64::INFINITY) * nu.tail).min(2.0);
    let err = tail + if used > 0 { rounding_err(used, p) } else { 0.0 };
    if let Some(t) = tol {
        if err > t {
            return Err(Error::DepthInsufficient(format!(
                "truncation error {err:e} above tolerance {t:e}"
            )));
        }
    }
    Ok(FourierValue { value: z, err })
}

/// Monte-Carlo estimate of a Fourier coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub re: f64,
    pub im: f64,
    pub se_re: f64,
    pub se_im: f64,
    pub samples: usize,
    pub seed: u64,
}

impl MonteCarlo {
    /// `true` when `value` lies within `z` combined standard errors.
    pub fn agrees(&self, re: f64, im: f64, z: f64) -> bool {
        let d = (self.re - re).hypot(self.im - im);
        let se = self.se_re.hypot(self.se_im);
        d <= z * se + 1e-12
    }
}

/// Estimates `ν̂(n)` by sampling `samples` digit strings of the coin measure.
pub fn coin_fourier_mc(nu: &CoinMeasure, n: &BigUint, samples: usize, seed: u64) -> MonteCarlo {
    // Phase contributed by digit p: (n mod d_p)/d_p in turns.
    let phases: Vec<f64> = nu.digits.iter().map(|d| hp::ratio_to_f64(&(n % d), d)).collect();
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<(f64, f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c as u64);
            let m = CHUNK.min(samples - c * CHUNK);
            let (mut sr, mut si, mut sr2, mut si2) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..m {
                let mut t = 0.0f64;
                for ph in &phases {
                    if r.gen::<bool>() {
                        t += ph;
                    }
                }
                let t = t.fract();
                let (s, c) = (2.0 * PI * t).sin_cos();
                sr += c;
                si += s;
                sr2 += c * c;
                si2 += s * s;
            }
            (sr, si, sr2, si2)
        })
        .collect();
    let (mut sr, mut si, mut sr2, mut si2) = (0.0, 0.0, 0.0, 0.0);
    for (a, b, c, d) in parts {
        sr += a;
        si += b;
        sr2 += c;
        si2 += d;
    }
    let nf = samples as f64;
    let (mr, mi) = (sr / nf, si / nf);
    let var_r = ((sr2 / nf - mr * mr) * nf / (nf - 1.0)).max(0.0);
    let var_i = ((si2 / nf - mi * mi) * nf / (nf - 1.0)).max(0.0);
    MonteCarlo {
        re: mr,
        im: mi,
        se_re: (var_r / nf).sqrt(),
        se_im: (var_i / nf).sqrt(),
        samples,
        seed,
    }
}

/// The chain measure attached to a block schedule: chain
/// `(2, 4, …, 2^{2k_2−1}, 4^{k_2}, …, 4^{2k_3−1}, 16^{k_3}, …)` and
/// weights `w_j = b_{j−1}/(4π)`, where `b = a_k` on the first region and
/// `b = C_p a_k` on region `p` with `C_p = Π_{q=1}^{p} a_{2k_{q+1}−1}/a_{k_{q+1}}`.
/// The chain is stored until it passes `upto`, then `extra` more levels.
/// Past the last scheduled region it continues with the last base.
pub fn blocks_measure(schedule: &[u64], upto: &BigUint, extra: usize) -> Result<ChainMeasure> {
    seqgen::validate_schedule(schedule)?;
    if schedule.len() < 2 {
        return Err(Error::ScheduleInconsistent("schedule needs k_1 and k_2".into()));
    }
    // (m_j, b_j) for j ≥ 0, starting at m_0 = 1.
    let mut ms: Vec<BigUint> = Vec::new();
    let mut bs: Vec<f64> = Vec::new();
    let mut left = extra + 1;
    let mut push = |m: BigUint, b: f64, ms: &mut Vec<BigUint>, bs: &mut Vec<f64>| -> bool {
        if &m > upto {
            left -= 1;
        }
        ms.push(m);
        bs.push(b);
        left == 0
    };
    let mut c = 1.0;
    let mut p = 0u32;
    loop {
        let last = p as usize + 1 >= schedule.len() - 1;
        let (k_lo, k_hi) = if p == 0 {
            (0, 2 * schedule[1] - 1)
        } else {
            c *= blocks_a(2 * schedule[p as usize] - 1) / blocks_a(schedule[p as usize]);
            (schedule[p as usize], 2 * schedule[p as usize + 1] - 1)
        };
        let base = seqgen::big_n(p);
        let mut m = base.pow(k_lo as u32);
        let mut k = k_lo;
        while last || k <= k_hi {
            if push(m.clone(), c * blocks_a(k), &mut ms, &mut bs) {
                let chain = ms[1..].to_vec();
                let weights = bs[..bs.len() - 1].iter().map(|b| b / (4.0 * PI)).collect();
                return ChainMeasure::new(chain, weights, WeightRule::Schedule);
            }
            m *= &base;
            k += 1;
        }
        p += 1;
    }
}

/// Certificate for a block-construction prefix: every term
/// `N_p^k + l N_p^{k−1}` is bounded by
/// `|σ̂(N_p^k) − 1| + l |σ̂(N_p^{k−1}) − 1|` (each with its error) and
/// compared with the block target `2^{−p}`. Violated largeness conditions
/// show up as failing rows, not as errors.
pub fn blocks_certificate(schedule: &[u64], prefix: &SequencePrefix) -> Result<CertificateReport> {
    let cond_notes = |notes: &mut Vec<String>| -> Result<()> {
        for c in seqgen::blocks_schedule_conditions(schedule)? {
            notes.push(format!(
                "schedule condition {} p={}: value {:e} vs target {:e}: {}",
                c.name,
                c.p,
                c.value,
                c.target,
                if c.holds { "holds" } else { "violated" }
            ));
        }
        Ok(())
    };
    let mut notes = Vec::new();
    if prefix.is_empty() {
        seqgen::validate_schedule(schedule)?;
        cond_notes(&mut notes)?;
        return Ok(CertificateReport::finish("blocks", BLOCKS_FORMULA, String::new(), Vec::new(), notes));
    }
    let blocks = schedule.len() - 1;
    let g: BlocksPrefix = seqgen::blocks_generate(schedule, blocks, Some(prefix.len()))?;
    if g.prefix.terms != prefix.terms {
        return Err(Error::ScheduleInconsistent(
            "prefix was not generated from this schedule".into(),
        ));
    }
    cond_notes(&mut notes)?;
    let mu = blocks_measure(schedule, g.prefix.terms.last().unwrap(), 64)?;

    // |σ̂(N_p^k) − 1| + err for every chain level used.
    let mut need: Vec<(u32, u64)> = Vec::new();
    for l in &g.labels {
        need.push((l.p, l.k));
        need.push((l.p, l.k - 1));
    }
    need.sort();
    need.dedup();
    let vals: Vec<((u32, u64), f64)> = need
        .par_iter()
        .map(|&(p, k)| {
            let n = seqgen::big_n(p).pow(k as u32);
            let f = bern_fourier(&mu, &n, None)?;
            Ok(((p, k), f.dist_one_up() + f.err))
        })
        .collect::<Result<Vec<_>>>()?;
    let lookup = |p: u32, k: u64| -> f64 {
        vals[vals.binary_search_by(|e| e.0.cmp(&(p, k))).unwrap()].1
    };
    let rows: Vec<CertRow> = g
        .labels
        .par_iter()
        .enumerate()
        .map(|(i, lab)| {
            // Direct value for the record; the verdict uses the decomposition.
            let direct = bern_fourier(&mu, &g.prefix.terms[i], None)?;
            let d = lookup(lab.p, lab.k) + lab.l as f64 * lookup(lab.p, lab.k - 1);
            let d = d * (1.0 + 1e-12);
            let target = hp::ldexp(1.0, -(lab.p as i64));
            Ok(CertRow {
                index: i,
                n: g.prefix.terms[i].to_string(),
                sigma: ComplexJson::from_complex(&direct.value),
                dist_one: d,
                trunc_err: direct.err,
                bound: target,
                pass: d <= target,
                label: Some(lab.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CertificateReport::finish("blocks", BLOCKS_FORMULA, mu.continuity(), rows, notes))
}

const BLOCKS_FORMULA: &str =
    "|sigma(N_p^k + l N_p^(k-1)) - 1| <= |sigma(N_p^k) - 1| + l |sigma(N_p^(k-1)) - 1| <= 2^-p";

/// `|N^{−1} Σ_{k<N} e^{2πi n_k θ}|` over the first `N` terms.
pub fn weyl_average(terms: &[BigUint], theta: &Angle, n: usize) -> Result<f64> {
    if n == 0 || n > terms.len() {
        return Err(Error::InvalidSpec(format!(
            "N = {n} must be in 1..={}",
            terms.len()
        )));
    }
    let (num, den) = theta.fraction();
    let (mut sr, mut si) = (0.0f64, 0.0f64);
    for t in &terms[..n] {
        let r = (&num * (t % &den)) % &den;
        let x = hp::ratio_to_f64(&r, &den);
        let (s, c) = (2.0 * PI * x).sin_cos();
        sr += c;
        si += s;
    }
    Ok(sr.hypot(si) / n as f64)
}

/// Sampling plan for [`nonrigidity_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylSampling {
    pub samples: usize,
    pub seed: u64,
    /// Sampled angles are `j/2^bits` with odd `j`, so their reduced
    /// denominators equal `2^bits`.
    pub bits: usize,
    /// Rationals with denominator at most this are excluded.
    pub min_denominator: u64,
    pub delta: f64,
}

impl Default for WeylSampling {
    fn default() -> Self {
        WeylSampling {
            samples: 512,
            seed: rng::DEFAULT_SEED,
            bits: 64,
            min_denominator: 1 << 20,
            delta: 0.5,
        }
    }
}

/// Histogram and percentile summary of Weyl averages over sampled angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonrigidityReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub p95: f64,
    pub median: f64,
    pub max: f64,
    /// Counts over 20 equal bins of `[0, 1]`.
    pub histogram: Vec<usize>,
    pub threshold: f64,
    /// `true` when the 95th percentile is at most `1 − δ`.
    pub evidence: bool,
    pub verdict: String,
}

/// Samples angles, computes Weyl averages, and flags non-rigidity evidence
/// when the 95th percentile is at most `1 − δ`.
pub fn nonrigidity_scan(terms: &[BigUint], plan: &WeylSampling, n: usize) -> Result<NonrigidityReport> {
    if plan.samples == 0 || plan.bits == 0 || plan.bits > 4096 {
        return Err(Error::InvalidSpec("sampling needs samples > 0 and 0 < bits <= 4096".into()));
    }
    if plan.bits < 64 && (1u64 << plan.bits) <= plan.min_denominator {
        return Err(Error::InvalidSpec("sample denominators below the exclusion bound".into()));
    }
    let den = BigUint::one() << plan.bits;
    let angles: Vec<Angle> = (0..plan.samples)
        .map(|i| {
            let mut r = rng::stream(plan.seed, i as u64);
            let words: Vec<u32> = (0..plan.bits.div_ceil(32)).map(|_| r.gen()).collect();
            let mut j = BigUint::new(words) % &den;
            j |= BigUint::one();
            Angle::Exact(Turn::new(j, den.clone()))
        })
        .collect();
    let mut vals = angles
        .par_iter()
        .map(|a| weyl_average(terms, a, n))
        .collect::<Result<Vec<f64>>>()?;
    vals.sort_by(f64::total_cmp);
    let q = |f: f64| vals[((f * vals.len() as f64).ceil() as usize).clamp(1, vals.len()) - 1];
    let p95 = q(0.95);
    let mut histogram = vec![0usize; 20];
    for v in &vals {
        histogram[((v * 20.0) as usize).min(19)] += 1;
    }
    let threshold = 1.0 - plan.delta;
    let evidence = p95 <= threshold;
    Ok(NonrigidityReport {
        n,
        samples: plan.samples,
        seed: plan.seed,
        p95,
        median: q(0.5),
        max: *vals.last().unwrap(),
        histogram,
        threshold,
        evidence,
        verdict: if evidence {
            "non-rigidity evidence".into()
        } else {
            "no evidence".into()
        },
    })
}

/// Finite atomic measure with exact atom positions.
#[derive(Clone, Debug)]
pub struct Atomic {
    pub atoms: Vec<Turn>,
    pub weights: Vec<Real>,
}

impl Atomic {
    /// All `2^J` atoms of the depth-`J` chain measure.
    pub fn from_chain(mu: &ChainMeasure, depth: usize, p: usize) -> Result<Self> {
        if depth > mu.depth() || depth > 20 {
            return Err(Error::InvalidSpec("atomic depth must be at most min(J, 20)".into()));
        }
        let ws: Vec<Real> = mu.weights[..depth].iter().map(|&a| Real::from_f64(a, p)).collect();
        let mut atoms = vec![Turn::zero()];
        let mut weights = vec![Real::one(p)];
        for j in 0..depth {
            let step = Turn::new(BigUint::one(), mu.chain[j].clone());
            let mut na = Vec::with_capacity(atoms.len() * 2);
            let mut nw = Vec::with_capacity(atoms.len() * 2);
            for (t, w) in atoms.iter().zip(&weights) {
                na.push(t.clone());
                nw.push(w * &(Real::one(p) - &ws[j]));
                na.push(t.add(&step));
                nw.push(w * &ws[j]);
            }
            atoms = na;
            weights = nw;
        }
        Ok(Atomic { atoms, weights })
    }

    /// All `2^P` atoms of the coin measure truncated to depth `P`.
    pub fn from_coin(nu: &CoinMeasure, depth: usize, p: usize) -> Result<Self> {
        if depth > nu.depth() || depth > 20 {
            return Err(Error::InvalidSpec("atomic depth must be at most min(P, 20)".into()));
        }
        let w = hp::ldexp(1.0, -(depth as i64));
        let mut atoms = vec![Turn::zero()];
        for d in &nu.digits[..depth] {
            let step = Turn::new(BigUint::one(), d.clone());
            atoms = atoms.iter().flat_map(|t| [t.clone(), t.add(&step)]).collect();
        }
        let weights = vec![Real::from_f64(w, p); atoms.len()];
        Ok(Atomic { atoms, weights })
    }

    /// `Σ_i w_i e^{2πi n θ_i}`.
    pub fn fourier(&self, n: &BigUint, p: usize) -> Complex {
        let mut z = Complex::zero(p);
        for (t, w) in self.atoms.iter().zip(&self.weights) {
            let a = t.pow(n);
            z = &z + &hp::cis_turn(&a.num().clone().into(), a.den(), p).scale(w);
        }
        z
    }
}

/// Residual `|∫|λ^n − 1|² dσ − 2(1 − Re σ̂(n))|` on an atomic measure.
pub fn l2_identity_check(sigma: &Atomic, n: &BigUint, p: usize) -> Real {
    let mut lhs = Real::zero(p);
    for (t, w) in sigma.atoms.iter().zip(&sigma.weights) {
        let a = t.pow(n);
        let c = hp::chord_turn(&a.num().clone().into(), a.den(), p);
        lhs = lhs + w * &c.square();
    }
    let z = sigma.fourier(n, p);
    let rhs = (Real::one(p) - &z.re) * Real::from_u64(2, p);
    (lhs - rhs).abs()
}
