//! Sequence families `(n_k)`: explicit lists, superlinear recursions,
//! divisibility chains, polynomials, primes, continued-fraction
//! denominators and the block construction with `n_{k+1}/n_k → 1`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::contfrac;
use crate::error::{Error, Result};
use crate::json::RatJson;

/// Closed-form successor rules for the superlinear family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuperRule {
    /// `n_{k+1} = n_k^e`.
    Power { e: u32 },
    /// `n_{k+1} = (k + 2)·n_k`.
    IndexMul,
    /// `n_{k+1} = 2^{k+1}·n_k`.
    Pow2Index,
}

/// How `α` is given for the continued-fraction family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfAlpha {
    /// `(p + √d)/q`.
    Surd { p: i64, d: u64, q: i64 },
    /// `Σ_{k≤v} m^{-(k+1)!}`.
    Liouville { m: u64, v: u32 },
    /// Explicit partial quotients.
    Digits { a: Vec<String> },
}

/// A sequence family with its parameters; JSON `{"family", "params"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum SequenceSpec {
    Explicit { terms: Vec<String> },
    Superlinear { start: String, rule: SuperRule },
    /// `n_0 = start`, `n_{k+1} = m_k n_k` with the multipliers cycled.
    Chain { start: String, multipliers: Vec<u64> },
    /// `n_k = Σ_i c_i k^i` for `k = start_k, start_k + 1, …`.
    Poly {
        coeffs: Vec<i64>,
        #[serde(default = "one_i64")]
        start_k: i64,
    },
    Primes {},
    CfDenominators { alpha: CfAlpha },
    /// Accepts the legacy family name `ex77` on input.
    #[serde(alias = "ex77")]
    Blocks { schedule: Vec<u64> },
}

fn one_i64() -> i64 {
    1
}

/// A strictly increasing run of positive integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequencePrefix {
    pub terms: Vec<BigUint>,
    pub spec: Option<SequenceSpec>,
}

impl SequencePrefix {
    /// Checks strict increase and `n_0 >= 1`.
    pub fn new(terms: Vec<BigUint>, spec: Option<SequenceSpec>) -> Result<Self> {
        if let Some(f) = terms.first() {
            if f.is_zero() {
                return Err(Error::InvalidSpec("first term must be at least 1".into()));
            }
        }
        if let Some(i) = terms.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(format!(
                "terms not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(SequencePrefix { terms, spec })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl Serialize for SequencePrefix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::json::biguint_vec::serialize(&self.terms, s)
    }
}

impl<'de> Deserialize<'de> for SequencePrefix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let terms = crate::json::biguint_vec::deserialize(d)?;
        SequencePrefix::new(terms, None).map_err(serde::de::Error::custom)
    }
}

fn parse_big(s: &str) -> Result<BigUint> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("not a nonnegative integer: {s:?}")))
}

/// First `count` terms of the family.
pub fn generate(spec: &SequenceSpec, count: usize) -> Result<SequencePrefix> {
    if count == 0 {
        return Err(Error::InvalidSpec("count must be positive".into()));
    }
    let terms = match spec {
        SequenceSpec::Explicit { terms } => {
            if terms.len() < count {
                return Err(Error::InvalidSpec(format!(
                    "explicit list has {} terms, {count} requested",
                    terms.len()
                )));
            }
            terms[..count].iter().map(|s| parse_big(s)).collect::<Result<Vec<_>>>()?
        }
        SequenceSpec::Superlinear { start, rule } => superlinear(&parse_big(start)?, rule, count)?,
        SequenceSpec::Chain { start, multipliers } => {
            if multipliers.is_empty() || multipliers.iter().any(|&m| m < 2) {
                return Err(Error::InvalidSpec("chain multipliers must be at least 2".into()));
            }
            let mut n = parse_big(start)?;
            let mut out = Vec::with_capacity(count);
            for k in 0..count {
                out.push(n.clone());
                n *= multipliers[k % multipliers.len()];
            }
            out
        }
        SequenceSpec::Poly { coeffs, start_k } => poly(coeffs, *start_k, count)?,
        SequenceSpec::Primes {} => primes(count),
        SequenceSpec::CfDenominators { alpha } => cf_denominators(alpha, count)?,
        SequenceSpec::Blocks { schedule } => {
            let blocks = schedule.len().saturating_sub(1);
            let g = blocks_generate(schedule, blocks, Some(count))?;
            if g.prefix.len() < count {
                return Err(Error::ScheduleInconsistent(format!(
                    "schedule yields only {} terms",
                    g.prefix.len()
                )));
            }
            g.prefix.terms
        }
    };
    SequencePrefix::new(terms, Some(spec.clone()))
}

fn superlinear(start: &BigUint, rule: &SuperRule, count: usize) -> Result<Vec<BigUint>> {
    if start.is_zero() {
        return Err(Error::InvalidSpec("start must be positive".into()));
    }
    if let SuperRule::Power { e } = rule {
        if *e < 2 || start <= &BigUint::one() {
            return Err(Error::InvalidSpec("power rule needs e >= 2 and start >= 2".into()));
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut n = start.clone();
    for k in 0..count {
        out.push(n.clone());
        if k + 1 == count {
            break;
        }
        if n.bits() > 1 << 24 {
            return Err(Error::InvalidSpec("superlinear terms exceed 2^24 bits".into()));
        }
        n = match rule {
            SuperRule::Power { e } => n.pow(*e),
            SuperRule::IndexMul => n * (k as u64 + 2),
            SuperRule::Pow2Index => n << (k + 1),
        };
    }
    Ok(out)
}

fn poly(coeffs: &[i64], start_k: i64, count: usize) -> Result<Vec<BigUint>> {
    if coeffs.iter().all(|&c| c == 0) {
        return Err(Error::InvalidSpec("zero polynomial".into()));
    }
    let mut out = Vec::with_capacity(count);
    let mut prev: Option<BigInt> = None;
    for i in 0..count as i64 {
        let k = BigInt::from(start_k + i);
        let v = coeffs
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, &c| acc * &k + BigInt::from(c));
        if v < BigInt::one() {
            return Err(Error::InvalidSpec(format!("p({k}) = {v} is below 1")));
        }
        if let Some(p) = &prev {
            if &v <= p {
                return Err(Error::InvalidSpec(format!(
                    "polynomial not strictly increasing at k = {k}"
                )));
            }
        }
        prev = Some(v.clone());
        out.push(v.to_biguint().unwrap());
    }
    Ok(out)
}

/// First `count` primes by a sieve whose bound doubles until enough are found.
pub fn primes(count: usize) -> Vec<BigUint> {
    let mut bound = 64usize.max(count * 2);
    loop {
        let ps = sieve(bound);
        if ps.len() >= count {
            return ps[..count].iter().map(|&p| BigUint::from(p)).collect();
        }
        bound *= 2;
    }
}

/// Primes up to and including `n`.
pub fn sieve(n: usize) -> Vec<u64> {
    let mut comp = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !comp[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                comp[j] = true;
                j += i;
            }
        }
    }
    out
}

fn cf_denominators(alpha: &CfAlpha, count: usize) -> Result<Vec<BigUint>> {
    // q_0 = 1 may repeat as q_1 = 1; ask for a few spare digits.
    let want = count + 2;
    let cf = match alpha {
        CfAlpha::Surd { p, d, q } => contfrac::cf_of_surd(*p, *d, *q, want)?,
        CfAlpha::Liouville { m, v } => {
            let x = contfrac::liouville_partial(*m, *v)?;
            contfrac::cf_of_rational(&x.numer().to_biguint().unwrap(), &x.denom().to_biguint().unwrap())
        }
        CfAlpha::Digits { a } => contfrac::CFExpansion {
            a: a.iter().map(|s| parse_big(s)).collect::<Result<Vec<_>>>()?,
            exact: true,
        },
    };
    if cf.a.iter().skip(1).any(|x| x.is_zero()) {
        return Err(Error::InvalidSpec("partial quotients after a_0 must be positive".into()));
    }
    let mut q = contfrac::convergents(&cf).q();
    q.dedup();
    if q.len() < count {
        return Err(Error::InvalidSpec(format!(
            "expansion yields only {} distinct denominators",
            q.len()
        )));
    }
    q.truncate(count);
    Ok(q)
}

/// Position of a term inside the block construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksLabel {
    /// Block index, with `N_p = 2^{2^p}`.
    pub p: u32,
    /// The term is `N_p^k + l·N_p^{k−1}`.
    pub k: u64,
    pub l: u64,
}

/// A block-construction prefix with the label of each term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlocksPrefix {
    pub prefix: SequencePrefix,
    pub labels: Vec<BlocksLabel>,
    pub schedule: Vec<u64>,
    pub blocks: usize,
}

/// `N_p = 2^{2^p}`.
pub fn big_n(p: u32) -> BigUint {
    BigUint::one() << (1usize << p)
}

/// Checks the schedule shape: strictly increasing with `k_1 = 1`.
pub fn validate_schedule(schedule: &[u64]) -> Result<()> {
    if schedule.first() != Some(&1) {
        return Err(Error::ScheduleInconsistent("k_1 must equal 1".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ScheduleInconsistent("schedule must be strictly increasing".into()));
    }
    Ok(())
}

/// Concatenates the blocks `A_{N_p} = ⋃_{k=k_{p+1}}^{2k_{p+2}−1} {N_p^k + l N_p^{k−1}}`
/// with `0 ≤ l ≤ (N_p − 1)N_p − 1`, for `p < blocks`. The schedule holds
/// `k_1, k_2, …` so block `p` needs `schedule[p + 1]`. Generation stops
/// early once `limit` terms exist.
pub fn blocks_generate(schedule: &[u64], blocks: usize, limit: Option<usize>) -> Result<BlocksPrefix> {
    validate_schedule(schedule)?;
    if blocks + 1 > schedule.len() {
        return Err(Error::ScheduleInconsistent(format!(
            "{blocks} blocks need {} schedule entries",
            blocks + 1
        )));
    }
    let limit = limit.unwrap_or(usize::MAX);
    let mut terms: Vec<BigUint> = Vec::new();
    let mut labels = Vec::new();
    'outer: for p in 0..blocks as u32 {
        let n = big_n(p);
        let n64 = 1u64.checked_shl(1 << p).unwrap_or(0);
        let per_k = if n64 == 0 || n64 > 1 << 31 {
            return Err(Error::ScheduleInconsistent(format!("block {p} is too large to enumerate")));
        } else {
            (n64 - 1) * n64
        };
        let k_lo = schedule[p as usize];
        let k_hi = 2 * schedule[p as usize + 1] - 1;
        for k in k_lo..=k_hi {
            let base = n.pow(k as u32);
            let step = n.pow(k as u32 - 1);
            let mut x = base;
            for l in 0..per_k {
                if terms.len() >= limit {
                    break 'outer;
                }
                terms.push(x.clone());
                labels.push(BlocksLabel { p, k, l });
                x += &step;
            }
        }
        // Disjointness: last of A_{N_p} below first of A_{N_{p+1}}.
        {
            let first_next = big_n(p + 1).pow(schedule[p as usize + 1] as u32);
            let last = n.pow(k_hi as u32) + BigUint::from(per_k - 1) * n.pow(k_hi as u32 - 1);
            if last >= first_next {
                return Err(Error::ScheduleInconsistent(format!(
                    "block {p} overlaps block {}",
                    p + 1
                )));
            }
        }
    }
    let prefix = SequencePrefix::new(terms, Some(SequenceSpec::Blocks { schedule: schedule.to_vec() }))
        .map_err(|e| Error::ScheduleInconsistent(e.to_string()))?;
    Ok(BlocksPrefix {
        prefix,
        labels,
        schedule: schedule.to_vec(),
        blocks,
    })
}

/// `a_0 = a_1 = 1`, `a_k = 1/(k ln k)`.
pub fn blocks_a(k: u64) -> f64 {
    if k < 2 {
        1.0
    } else {
        let k = k as f64;
        1.0 / (k * k.ln())
    }
}

/// One of the largeness conditions on the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCondition {
    pub name: String,
    pub p: u32,
    pub value: f64,
    pub target: f64,
    /// `value >= target` for "divergence", `value <= target` otherwise.
    pub holds: bool,
}

/// Evaluates the explicit schedule inequalities:
/// `(a_{2k_p−1}/a_{k_p}) Σ_{k=k_p}^{2k_{p+1}−1} a_k ≥ 1` for `p ≥ 2`,
/// `(N_p−1)N_p a_{2k_{p+1}−1} ≤ 2^{−p}` and
/// `(1 + ((N_p−1)N_p−1) a_{2k_p−2}/a_{k_p}) a_{2k_{p+1}−2} ≤ 2^{−p}` for `p ≥ 1`.
pub fn blocks_schedule_conditions(schedule: &[u64]) -> Result<Vec<ScheduleCondition>> {
    validate_schedule(schedule)?;
    let kp = |p: u32| schedule[p as usize - 1];
    let mut out = Vec::new();
    for p in 2..=schedule.len() as u32 {
        if p as usize + 1 > schedule.len() {
            break;
        }
        let (a, b) = (kp(p), kp(p + 1));
        let s: f64 = (a..=2 * b - 1).map(blocks_a).sum();
        let v = blocks_a(2 * a - 1) / blocks_a(a) * s;
        out.push(ScheduleCondition {
            name: "divergence".into(),
            p,
            value: v,
            target: 1.0,
            holds: v >= 1.0,
        });
    }
    for p in 1..schedule.len() as u32 {
        let nf = 2f64.powi(1 << p.min(9));
        let width = (nf - 1.0) * nf;
        let target = 2f64.powi(-(p as i32));
        let k_next = kp(p + 1);
        let v = width * blocks_a(2 * k_next - 1);
        out.push(ScheduleCondition {
            name: "interior".into(),
            p,
            value: v,
            target,
            holds: v <= target,
        });
        let a_ratio = if p >= 2 {
            blocks_a(2 * kp(p) - 2) / blocks_a(kp(p))
        } else {
            1.0
        };
        let v = (1.0 + (width - 1.0) * a_ratio) * blocks_a(2 * k_next - 2);
        out.push(ScheduleCondition {
            name: "boundary".into(),
            p,
            value: v,
            target,
            holds: v <= target,
        });
    }
    Ok(out)
}

/// Exact rational in JSON plus a float view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    #[serde(flatten)]
    pub exact: RatJson,
    pub approx: f64,
}

impl RatioEntry {
    fn new(num: &BigUint, den: &BigUint) -> Self {
        let r = BigRational::new(num.clone().into(), den.clone().into());
        RatioEntry {
            exact: RatJson::from_rational(&r),
            approx: crate::hp::ratio_to_f64(num, den),
        }
    }
}

/// Count of terms below a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub n: String,
    pub count: usize,
    /// `count / N`.
    pub density: f64,
}

/// Raw diagnostics of a prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub len: usize,
    pub min_ratio: RatioEntry,
    pub min_ratio_index: usize,
    pub max_ratio: RatioEntry,
    pub max_ratio_index: usize,
    /// `n_k | n_{k+1}` for every consecutive pair.
    pub divisibility: bool,
    pub density: Vec<DensitySample>,
    /// `max_k n_k Σ_{j>k} 1/n_j` over the prefix, when it is a chain.
    pub chain_tail_max: Option<RatioEntry>,
}

fn cmp_ratio(a: (&BigUint, &BigUint), b: (&BigUint, &BigUint)) -> std::cmp::Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

/// Exact consecutive-ratio extremes, divisibility, and densities at
/// `N ∈ {n_K/4, n_K/2, n_K}`.
pub fn ratio_diagnostics(prefix: &SequencePrefix) -> Result<DiagnosticsReport> {
    let t = &prefix.terms;
    if t.len() < 2 {
        return Err(Error::InvalidSpec("diagnostics need at least 2 terms".into()));
    }
    let (mut lo, mut hi) = (0usize, 0usize);
    for i in 1..t.len() - 1 {
        let r = (&t[i + 1], &t[i]);
        if cmp_ratio(r, (&t[lo + 1], &t[lo])).is_lt() {
            lo = i;
        }
        if cmp_ratio(r, (&t[hi + 1], &t[hi])).is_gt() {
            hi = i;
        }
    }
    let divisibility = t.windows(2).all(|w| (&w[1] % &w[0]).is_zero());
    let last = t.last().unwrap();
    let mut density = Vec::new();
    for div in [4u32, 2, 1] {
        let n = last / div;
        if n.is_zero() {
            continue;
        }
        let count = t.partition_point(|x| x <= &n);
        density.push(DensitySample {
            n: n.to_string(),
            count,
            density: crate::hp::ratio_to_f64(&BigUint::from(count), &n),
        });
    }
    let chain_tail_max = if divisibility {
        let tails = chain_tail_sums(t);
        tails
            .into_iter()
            .max()
            .map(|r| RatioEntry::new(&r.numer().to_biguint().unwrap(), &r.denom().to_biguint().unwrap()))
    } else {
        None
    };
    Ok(DiagnosticsReport {
        len: t.len(),
        min_ratio: RatioEntry::new(&t[lo + 1], &t[lo]),
        min_ratio_index: lo,
        max_ratio: RatioEntry::new(&t[hi + 1], &t[hi]),
        max_ratio_index: hi,
        divisibility,
        density,
        chain_tail_max,
    })
}

/// `n_k Σ_{j>k, j≤K} 1/n_j` for every `k`, exactly. Assumes a divisibility
/// chain so every `n_K/n_j` is an integer.
pub fn chain_tail_sums(t: &[BigUint]) -> Vec<BigRational> {
    let last = match t.last() {
        Some(l) => l.clone(),
        None => return Vec::new(),
    };
    // S_k = Σ_{j>k} last/n_j, accumulated from the end.
    let mut out = vec![BigRational::zero(); t.len()];
    let mut acc = BigUint::zero();
    for k in (0..t.len()).rev() {
        let num = BigInt::from(&t[k] * &acc);
        out[k] = BigRational::new(num, BigInt::from(last.clone()));
        acc += &last / &t[k];
    }
    out
}

/// Largest in-block consecutive ratio for each block of a labelled prefix,
/// paired with the bound `1 + 1/N_p`.
pub fn block_ratios(g: &BlocksPrefix) -> Vec<(u32, RatioEntry, RatioEntry)> {
    let t = &g.prefix.terms;
    let mut out: Vec<(u32, usize)> = Vec::new();
    for i in 0..t.len().saturating_sub(1) {
        if g.labels[i].p != g.labels[i + 1].p {
            continue;
        }
        let p = g.labels[i].p;
        match out.iter_mut().find(|e| e.0 == p) {
            Some(e) => {
                if cmp_ratio((&t[i + 1], &t[i]), (&t[e.1 + 1], &t[e.1])).is_gt() {
                    e.1 = i;
                }
            }
            None => out.push((p, i)),
        }
    }
    out.into_iter()
        .map(|(p, i)| {
            let n = big_n(p);
            let bound = RatioEntry::new(&(&n + 1u32), &n);
            (p, RatioEntry::new(&t[i + 1], &t[i]), bound)
        })
        .collect()
}

/// `true` when `r <= 2` for every tail sum (the chain inequality).
pub fn chain_tail_ok(t: &[BigUint]) -> bool {
    let two = BigRational::from_integer(BigInt::from(2));
    chain_tail_sums(t).iter().all(|r| !r.is_negative() && r <= &two)
}

/// Parses a comma-separated list of unsigned integers.
pub fn parse_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidSpec(format!("not an integer: {x:?}")))
        })
        .collect()
}
