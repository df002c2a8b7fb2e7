//! Finite-depth perfect sets on which `λ^{n_k} → 1` uniformly:
//!
//! * [`ArcTree`]: nested arcs around `l/n_k` for sequences with
//!   `n_{k+1}/n_k → ∞`;
//! * [`DigitSet`]: points `Σ ε_p/n_{k_p}` for divisibility chains;
//! * [`TreeSet`]: products of seeds `μ_n^{±1}` under the `4^{−n}` ladder.
//!
//! Angles are fractions of a turn. All suprema are taken over the stored
//! finite sample and the stored prefix only.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{dist_one_pow, Turn, UnimodularPoint};
use crate::error::{Error, Result};
use crate::hp::{self, chord_turn, Real};
use crate::json::{self, RatJson};

fn dyadic_to_rational((m, e): (BigInt, i64)) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(m << (e as usize))
    } else {
        BigRational::new(m, BigInt::one() << ((-e) as usize))
    }
}

fn ratio(num: &BigUint, den: &BigUint) -> BigRational {
    BigRational::new(num.clone().into(), den.clone().into())
}

fn turn_json(t: &Turn) -> RatJson {
    RatJson::from_parts(t.num(), t.den())
}

/// `max_k |a^{n_k} − b^{n_k}|` for exact angles at `p` bits.
fn d_trunc_exact(a: &Turn, b: &Turn, terms: &[BigUint], p: usize) -> Real {
    let d = a.sub(b);
    let mut best = Real::zero(p);
    for n in terms {
        let t = d.pow(n);
        let c = chord_turn(&t.num().clone().into(), t.den(), p);
        if c > best {
            best = c;
        }
    }
    best
}

/// `|a^n − 1|` for an exact angle at `p` bits.
fn dist_one_exact(a: &Turn, n: &BigUint, p: usize) -> Real {
    let t = a.pow(n);
    chord_turn(&t.num().clone().into(), t.den(), p)
}

// ---------------------------------------------------------------------------
// Nested arcs

/// Parameters of one level of an [`ArcTree`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcLevel {
    /// Index `k` in the prefix.
    pub k: usize,
    #[serde(with = "json::biguint_str")]
    pub n: BigUint,
    /// `γ_k = 5π sup_{j≥k} n_{j−1}/n_j` over the stored prefix.
    pub gamma: f64,
    /// `θ_k = asin γ_k`.
    pub theta: f64,
    /// Outward-rounded bounds on the half-width `θ_k/(π n_k)` in turns.
    pub half_lo: RatJson,
    pub half_hi: RatJson,
    /// `⌊(1/π)((n_{k+1}/n_k)θ_k − θ_{k+1})⌋`, absent on the last level.
    pub children_formula: Option<String>,
    /// Fewest candidate children found inside any stored arc of this level.
    pub children_min: Option<String>,
}

/// One arc `[l/n_k − h_k, l/n_k + h_k]` (turns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    /// Offset `l` reduced into `[0, n_k)`.
    #[serde(with = "json::biguint_str")]
    pub l: BigUint,
    pub parent: Option<usize>,
}

/// Width limits for building an [`ArcTree`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcTreeConfig {
    /// Root arcs kept: `l = 0, 1, …, root_arcs − 1`. `None` keeps all `n_{k_1}`.
    pub root_arcs: Option<usize>,
    /// Children kept per arc, chosen closest to the parent centre.
    pub max_children: usize,
    /// Working precision for `γ_k`, `θ_k` and the half-widths.
    pub bits: usize,
}

impl Default for ArcTreeConfig {
    fn default() -> Self {
        ArcTreeConfig {
            root_arcs: Some(4),
            max_children: 2,
            bits: 128,
        }
    }
}

/// Full-root limit: refuse to materialize more root arcs than this.
pub const MAX_ROOT_ARCS: usize = 1 << 20;

/// Nested-arc Cantor construction truncated at a finite depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcTree {
    /// First admissible level.
    pub k1: usize,
    pub depth: usize,
    pub levels: Vec<ArcLevel>,
    /// `arcs[i]` lists the arcs of level `k1 + i`.
    pub arcs: Vec<Vec<Arc>>,
    pub config: ArcTreeConfig,
}

struct LevelHp {
    gamma: Real,
    theta: Real,
    lo: BigRational,
    hi: BigRational,
}

/// Builds nested arcs for a prefix with `n_{k+1}/n_k → ∞`. Level `k1` is the
/// first `k ≥ 1` from which `γ_j ≤ 1/2` holds for every stored `j`.
pub fn build_arc_tree(terms: &[BigUint], depth: usize, cfg: &ArcTreeConfig) -> Result<ArcTree> {
    if terms.len() < 2 {
        return Err(Error::RatiosTooSmall("need at least two terms".into()));
    }
    if terms.windows(2).any(|w| w[1] <= w[0]) || terms[0].is_zero() {
        return Err(Error::InvalidSpec("terms must be positive and increasing".into()));
    }
    if cfg.max_children == 0 {
        return Err(Error::InvalidSpec("max_children must be positive".into()));
    }
    let last = terms.len() - 1;
    let p = cfg.bits.max(64);
    // sup_{j ≥ k} n_{j−1}/n_j, for k = 1..=last, from the top down.
    let mut sup: Vec<BigRational> = vec![BigRational::zero(); last + 1];
    for k in (1..=last).rev() {
        let r = ratio(&terms[k - 1], &terms[k]);
        sup[k] = if k == last || r > sup[k + 1] { r } else { sup[k + 1].clone() };
    }
    let five_pi = Real::pi(p) * Real::from_u64(5, p);
    let gamma_of = |k: usize| -> Real {
        let r = &sup[k];
        &five_pi * &Real::from_ratio(r.numer(), r.denom().magnitude(), p)
    };
    let half = Real::from_f64(0.5, p);
    // γ_k is nonincreasing in k, so the admissible levels form a tail.
    let k0 = (1..=last).find(|&k| gamma_of(k) <= half).ok_or_else(|| {
        Error::RatiosTooSmall("γ_k ≤ 1/2 is never reached in the prefix".into())
    })?;
    // θ_k ≥ 4π sup n_{j−1}/n_j also holds from k0 on since asin x ≥ x.
    let four_pi = Real::pi(p) * Real::from_u64(4, p);
    let k1 = (k0..=last)
        .find(|&k| {
            let r = &sup[k];
            gamma_of(k).asin() >= &four_pi * &Real::from_ratio(r.numer(), r.denom().magnitude(), p)
        })
        .ok_or_else(|| Error::RatiosTooSmall("no level with θ_k ≥ 4π sup ratio".into()))?;
    if k1 + depth > last {
        return Err(Error::RatiosTooSmall(format!(
            "depth {depth} from k1 = {k1} needs {} terms, prefix has {}",
            k1 + depth + 1,
            terms.len()
        )));
    }

    let slack = Real::one(p).mul_pow2(-(p as i64 - 8));
    let hp_levels: Vec<LevelHp> = (k1..=k1 + depth)
        .map(|k| {
            let gamma = gamma_of(k);
            let theta = gamma.asin();
            let q = p + hp::bitlen(&terms[k]);
            let h = theta.with_prec(q) / (Real::pi(q) * Real::from_biguint(&terms[k], q));
            let lo = dyadic_to_rational((&h * &(Real::one(q) - &slack)).to_dyadic());
            let hi = dyadic_to_rational((&h * &(Real::one(q) + &slack)).to_dyadic());
            LevelHp { gamma, theta, lo, hi }
        })
        .collect();
    // Sibling arcs are disjoint when 2 h_k < 1/n_k.
    for (i, lv) in hp_levels.iter().enumerate() {
        let n = BigRational::from_integer(terms[k1 + i].clone().into());
        if &lv.hi * &n * BigRational::from_integer(2.into()) >= BigRational::one() {
            return Err(Error::RatiosTooSmall(format!("arcs overlap at level {}", k1 + i)));
        }
    }

    let n1 = &terms[k1];
    let root: Vec<Arc> = match cfg.root_arcs {
        Some(w) => {
            let w = BigUint::from(w.max(1)).min(n1.clone());
            let w = w.to_usize().unwrap();
            (0..w).map(|l| Arc { l: BigUint::from(l), parent: None }).collect()
        }
        None => {
            let w = n1.to_usize().filter(|&w| w <= MAX_ROOT_ARCS).ok_or_else(|| {
                Error::InvalidSpec(format!("{n1} root arcs exceed the limit {MAX_ROOT_ARCS}"))
            })?;
            (0..w).map(|l| Arc { l: BigUint::from(l), parent: None }).collect()
        }
    };
    let mut arcs = vec![root];
    let mut levels = Vec::new();
    for i in 0..=depth {
        let k = k1 + i;
        let lv = &hp_levels[i];
        let mut level = ArcLevel {
            k,
            n: terms[k].clone(),
            gamma: lv.gamma.to_f64_up(),
            theta: lv.theta.to_f64_up(),
            half_lo: RatJson::from_rational(&lv.lo),
            half_hi: RatJson::from_rational(&lv.hi),
            children_formula: None,
            children_min: None,
        };
        if i < depth {
            let next = &hp_levels[i + 1];
            let (n, n2) = (&terms[k], &terms[k + 1]);
            // ⌊(1/π)((n_{k+1}/n_k)θ_k − θ_{k+1})⌋
            let q = p + hp::bitlen(n2);
            let v = (Real::from_ratio(&n2.clone().into(), n, q) * lv.theta.with_prec(q)
                - next.theta.with_prec(q))
                / Real::pi(q);
            let pk = dyadic_to_rational(v.floor().to_dyadic()).to_integer();
            if pk < BigInt::from(2) {
                return Err(Error::RatiosTooSmall(format!("p_{} = {pk} < 2", k + 1)));
            }
            level.children_formula = Some(pk.to_string());
            // Child centres r/n_{k+1} with |r/n_{k+1} − l/n_k| ≤ h_k − h_{k+1}.
            let radius = (&lv.lo - &next.hi) * BigRational::from_integer(n2.clone().into());
            let mut children = Vec::new();
            let mut min_count: Option<BigInt> = None;
            for (pi, arc) in arcs[i].iter().enumerate() {
                let l = signed_offset(&arc.l, n);
                let x = BigRational::new(&l * BigInt::from(n2.clone()), n.clone().into());
                let lo = (&x - &radius).ceil().to_integer();
                let hi = (&x + &radius).floor().to_integer();
                let count = (&hi - &lo + BigInt::one()).max(BigInt::zero());
                if min_count.as_ref().is_none_or(|m| &count < m) {
                    min_count = Some(count.clone());
                }
                for r in closest(&x, &lo, &hi, cfg.max_children) {
                    // Exact containment with outward-rounded half-widths.
                    let off = (BigRational::new(r.clone(), n2.clone().into())
                        - BigRational::new(l.clone(), n.clone().into()))
                    .abs();
                    debug_assert!(off + &next.hi <= lv.lo);
                    let l2 = r.mod_floor_big(n2);
                    children.push(Arc { l: l2, parent: Some(pi) });
                }
            }
            level.children_min = min_count.map(|c| c.to_string());
            arcs.push(children);
        }
        levels.push(level);
    }
    Ok(ArcTree {
        k1,
        depth,
        levels,
        arcs,
        config: cfg.clone(),
    })
}

trait ModFloorBig {
    fn mod_floor_big(&self, m: &BigUint) -> BigUint;
}

impl ModFloorBig for BigInt {
    fn mod_floor_big(&self, m: &BigUint) -> BigUint {
        let m = BigInt::from(m.clone());
        let r = ((self % &m) + &m) % &m;
        r.to_biguint().unwrap()
    }
}

/// Offset `l ∈ [0, n)` as a signed representative in `(−n/2, n/2]`.
fn signed_offset(l: &BigUint, n: &BigUint) -> BigInt {
    let l2: BigUint = l << 1usize;
    if &l2 > n {
        BigInt::from_biguint(Sign::Minus, n - l)
    } else {
        BigInt::from(l.clone())
    }
}

/// Up to `k` integers of `[lo, hi]` closest to `x`, in increasing order.
fn closest(x: &BigRational, lo: &BigInt, hi: &BigInt, k: usize) -> Vec<BigInt> {
    if lo > hi {
        return Vec::new();
    }
    let r0 = x.round().to_integer().clamp(lo.clone(), hi.clone());
    let mut out = vec![r0.clone()];
    let (mut down, mut up): (BigInt, BigInt) = (&r0 - BigInt::one(), &r0 + BigInt::one());
    while out.len() < k && (&down >= lo || &up <= hi) {
        let dd = if &down >= lo { Some((x - BigRational::from_integer(down.clone())).abs()) } else { None };
        let du = if &up <= hi { Some((BigRational::from_integer(up.clone()) - x).abs()) } else { None };
        match (dd, du) {
            (Some(a), Some(b)) if a <= b => {
                out.push(down.clone());
                down -= 1;
            }
            (Some(_), None) => {
                out.push(down.clone());
                down -= 1;
            }
            _ => {
                out.push(up.clone());
                up += 1;
            }
        }
    }
    out.sort();
    out
}

impl ArcTree {
    /// Centres `l/n_K` of the deepest arcs.
    pub fn leaves(&self) -> Vec<Turn> {
        let n = &self.levels.last().unwrap().n;
        self.arcs
            .last()
            .unwrap()
            .iter()
            .map(|a| Turn::new(a.l.clone(), n.clone()))
            .collect()
    }

    /// `(k, n_k, 2γ_k)` for every stored level.
    pub fn uniform_targets(&self) -> Vec<LevelTarget> {
        self.levels
            .iter()
            .map(|lv| LevelTarget {
                k: lv.k,
                n: lv.n.clone(),
                target: 2.0 * lv.gamma,
            })
            .collect()
    }

    /// Parent containment, checked exactly for every stored arc.
    pub fn check_containment(&self) -> bool {
        for i in 1..self.arcs.len() {
            let (pl, cl) = (&self.levels[i - 1], &self.levels[i]);
            let (h, h2) = (
                pl.half_lo.to_rational().unwrap(),
                cl.half_hi.to_rational().unwrap(),
            );
            for a in &self.arcs[i] {
                let par = &self.arcs[i - 1][a.parent.unwrap()];
                let c = Turn::new(a.l.clone(), cl.n.clone()).to_rational();
                let pc = Turn::new(par.l.clone(), pl.n.clone()).to_rational();
                let mut off = (c - pc).abs();
                if off > BigRational::new(1.into(), 2.into()) {
                    off = BigRational::one() - off;
                }
                if off + &h2 > h {
                    return false;
                }
            }
        }
        true
    }

    /// Sibling arcs are disjoint: distinct offsets and `2h_k < 1/n_k`.
    pub fn check_disjoint(&self) -> bool {
        self.levels.iter().zip(&self.arcs).all(|(lv, arcs)| {
            let h = lv.half_hi.to_rational().unwrap();
            let n = BigRational::from_integer(lv.n.clone().into());
            let mut ls: Vec<&BigUint> = arcs.iter().map(|a| &a.l).collect();
            ls.sort();
            let distinct = ls.windows(2).all(|w| w[0] != w[1]);
            distinct && h * n * BigRational::from_integer(2.into()) < BigRational::one()
        })
    }

    /// The `l = 0` arc is stored at every level.
    pub fn keeps_one(&self) -> bool {
        self.arcs.iter().all(|lv| lv.iter().any(|a| a.l.is_zero()))
    }

    /// Leaf export with exact angles.
    pub fn leaves_json(&self) -> Vec<RatJson> {
        self.leaves().iter().map(turn_json).collect()
    }
}

/// Keeps the points with `|λ − 1| ≤ ε/n_{κ−1}`; on those, `|λ^{n_k} − 1| ≤ ε`
/// for every `k < κ`.
pub fn restrict_k_eps(points: &[Turn], eps: f64, n_kappa_prev: &BigUint) -> Vec<Turn> {
    let r = eps / n_kappa_prev.to_f64().unwrap_or(f64::INFINITY);
    points
        .iter()
        .filter(|t| hp::chord_turn_f64(t.num(), t.den()) <= r)
        .cloned()
        .collect()
}

// ---------------------------------------------------------------------------
// Digit sets

/// Bound on `|λ^{n_k} − 1|` over a set, at level `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTarget {
    pub k: usize,
    #[serde(with = "json::biguint_str")]
    pub n: BigUint,
    pub target: f64,
}

/// `{Σ_{p≤P} ε_p/n_{k_p}}` for a divisibility chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitSet {
    pub positions: Vec<usize>,
    #[serde(with = "json::biguint_vec")]
    pub denominators: Vec<BigUint>,
    /// `4π n_k/n_{k_{p+1}}` for `k_p ≤ k < k_{p+1}`, `p < P`.
    pub bounds: Vec<LevelTarget>,
}

/// Checks the chain and builds the digit set on the first `depth` positions.
/// Positions index into `chain` (with `n_0 = chain[0]`).
pub fn build_digit_set(chain: &[BigUint], positions: &[usize], depth: usize) -> Result<DigitSet> {
    if chain.is_empty() || chain[0].is_zero() {
        return Err(Error::InvalidSpec("empty chain".into()));
    }
    for (i, w) in chain.windows(2).enumerate() {
        if w[1] <= w[0] || !(&w[1] % &w[0]).is_zero() {
            return Err(Error::NotAChain(format!("n_{i} does not divide n_{}", i + 1)));
        }
    }
    if depth == 0 || depth > positions.len() {
        return Err(Error::InvalidSpec(format!("depth must be in 1..={}", positions.len())));
    }
    let pos = &positions[..depth];
    if pos[0] == 0 || pos.windows(2).any(|w| w[1] <= w[0]) || *pos.last().unwrap() >= chain.len() {
        return Err(Error::InvalidSpec("positions must be increasing within 1..len".into()));
    }
    // n_{k_p}/n_{k_p − 1} must grow along the positions.
    let ratios: Vec<BigUint> = pos.iter().map(|&k| &chain[k] / &chain[k - 1]).collect();
    if ratios.windows(2).any(|w| w[1] < w[0]) || (ratios.len() > 1 && ratios[0] == *ratios.last().unwrap()) {
        return Err(Error::RatiosTooSmall(
            "n_{k_p}/n_{k_p-1} does not increase along the positions".into(),
        ));
    }
    let four_pi = 4.0 * std::f64::consts::PI;
    let mut bounds = Vec::new();
    for p in 0..depth.saturating_sub(1) {
        for k in pos[p]..pos[p + 1] {
            let b = four_pi * hp::ratio_to_f64(&chain[k], &chain[pos[p + 1]]) * (1.0 + 1e-12);
            bounds.push(LevelTarget {
                k,
                n: chain[k].clone(),
                target: b,
            });
        }
    }
    Ok(DigitSet {
        positions: pos.to_vec(),
        denominators: pos.iter().map(|&k| chain[k].clone()).collect(),
        bounds,
    })
}

impl DigitSet {
    pub fn depth(&self) -> usize {
        self.positions.len()
    }

    /// `Σ ε_p/n_{k_p}` for a digit string of length at most `P`.
    pub fn point(&self, eps: &[bool]) -> Turn {
        let mut t = Turn::zero();
        for (e, d) in eps.iter().zip(&self.denominators) {
            if *e {
                t = t.add(&Turn::new(BigUint::one(), d.clone()));
            }
        }
        t
    }

    /// All `2^P` points (`P ≤ 20`).
    pub fn leaves(&self) -> Result<Vec<Turn>> {
        if self.depth() > 20 {
            return Err(Error::InvalidSpec("at most 2^20 leaves".into()));
        }
        let mut pts = vec![Turn::zero()];
        for d in &self.denominators {
            let step = Turn::new(BigUint::one(), d.clone());
            pts = pts.iter().flat_map(|t| [t.clone(), t.add(&step)]).collect();
        }
        Ok(pts)
    }

    /// The fair-coin measure on this set.
    pub fn coin_measure(&self) -> Result<crate::measures::CoinMeasure> {
        crate::measures::CoinMeasure::new(self.denominators.clone(), None)
    }
}

// ---------------------------------------------------------------------------
// Uniform-convergence verification

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformRow {
    pub k: usize,
    #[serde(with = "json::biguint_str")]
    pub n: BigUint,
    /// `max |λ^{n_k} − 1|` over the sample, rounded up.
    pub max: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformReport {
    pub sample_size: usize,
    pub rows: Vec<UniformRow>,
    /// Maxima never increase with `k`.
    pub monotone: bool,
    pub verdict: bool,
}

/// Per-level `max_λ |λ^{n_k} − 1|` over a finite sample against targets.
pub fn verify_uniform(sample: &[UnimodularPoint], targets: &[LevelTarget]) -> Result<UniformReport> {
    if sample.is_empty() {
        return Err(Error::InvalidSpec("empty sample".into()));
    }
    let rows = targets
        .par_iter()
        .map(|t| {
            let mut max = 0.0f64;
            for x in sample {
                max = max.max(dist_one_pow(x, &t.n)?.to_f64_up());
            }
            Ok(UniformRow {
                k: t.k,
                n: t.n.clone(),
                max,
                target: t.target,
                pass: max <= t.target,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows.windows(2).all(|w| w[1].max <= w[0].max);
    let verdict = rows.iter().all(|r| r.pass);
    Ok(UniformReport {
        sample_size: sample.len(),
        rows,
        monotone,
        verdict,
    })
}

/// Exact-angle sample as unimodular points.
pub fn as_points(ts: &[Turn]) -> Vec<UnimodularPoint> {
    ts.iter()
        .map(|t| UnimodularPoint::new(crate::circle::Angle::Exact(t.clone())))
        .collect()
}

// ---------------------------------------------------------------------------
// Seed trees

/// Ordered candidate points for greedy seed selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSupply {
    pub source: String,
    #[serde(skip)]
    pub candidates: Vec<Turn>,
}

/// Working precision for truncated distances in seed trees.
pub const TREE_BITS: usize = 128;

impl SeedSupply {
    pub fn from_points(source: &str, candidates: Vec<Turn>) -> Self {
        SeedSupply {
            source: source.into(),
            candidates,
        }
    }

    /// Single-digit points `1/n_{k_p}` of a digit set, ordered by truncated
    /// distance to `1`, largest first.
    pub fn from_digit_set(ds: &DigitSet, terms: &[BigUint]) -> Self {
        let mut c: Vec<(Real, Turn)> = ds
            .denominators
            .iter()
            .map(|d| {
                let t = Turn::new(BigUint::one(), d.clone());
                (d_trunc_exact(&t, &Turn::zero(), terms, TREE_BITS), t)
            })
            .collect();
        c.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        SeedSupply::from_points("digit-set single digits", c.into_iter().map(|x| x.1).collect())
    }

    /// Single-digit points `1/n_k`, `k ≥ 1`, of a divisibility chain, ordered
    /// like [`SeedSupply::from_digit_set`].
    pub fn chain_digits(terms: &[BigUint]) -> Result<Self> {
        let pos: Vec<usize> = (1..terms.len()).collect();
        let ds = build_digit_set(terms, &pos, pos.len()).or_else(|e| match e {
            // Single digits need divisibility only.
            Error::RatiosTooSmall(_) => Ok(DigitSet {
                denominators: terms[1..].to_vec(),
                positions: pos.clone(),
                bounds: Vec::new(),
            }),
            e => Err(e),
        })?;
        let mut s = SeedSupply::from_digit_set(&ds, terms);
        s.source = "chain single digits".into();
        Ok(s)
    }
}

/// A chosen seed with its truncated distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub angle: RatJson,
    /// `d(μ_n, 1)`.
    pub d_one: String,
    /// `d(μ_n, μ̄_n)`.
    pub d_conj: String,
    /// Ladder threshold `4^{−n} d(μ_{n−1}, μ̄_{n−1})` (or `1/4` for `n = 1`).
    pub threshold: String,
}

/// A node `λ_s` with certified per-level bounds
/// `|λ_{s'}^{n_k} − 1| ≤ |λ_s^{n_k} − 1| + (2/3)4^{−p} d(μ_p, μ̄_p)`
/// for every extension `s'` of `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub angle: RatJson,
    pub bounds: Vec<f64>,
}

/// Binary tree of products of seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSet {
    pub supply: String,
    /// Number of prefix terms in the truncated metric.
    pub horizon: usize,
    pub seeds: Vec<SeedRecord>,
    /// `levels[p − 1]` holds the `2^p` nodes of depth `p`.
    pub levels: Vec<Vec<TreeNode>>,
    #[serde(skip)]
    seed_turns: Vec<Turn>,
    #[serde(skip)]
    node_turns: Vec<Vec<Turn>>,
}

/// Greedy seed selection under the `4^{−n}` ladder, then the product tree.
pub fn build_seed_tree(supply: &SeedSupply, terms: &[BigUint], depth: usize) -> Result<TreeSet> {
    if terms.is_empty() {
        return Err(Error::InvalidSpec("empty prefix".into()));
    }
    if depth == 0 || depth > 16 {
        return Err(Error::InvalidSpec("depth must be in 1..=16".into()));
    }
    let p = TREE_BITS;
    let one = Turn::zero();
    let margin = Real::one(p) - Real::one(p).mul_pow2(-(p as i64 - 16));
    let mut seeds: Vec<(Turn, Real, Real, Real)> = Vec::new();
    let mut used = vec![false; supply.candidates.len()];
    for n in 1..=depth {
        let (threshold, prev_conj) = match seeds.last() {
            None => (Real::from_f64(0.25, p), None),
            Some((_, _, c, _)) => (c.mul_pow2(-2 * n as i64), Some(c.clone())),
        };
        let mut pick = None;
        for (i, c) in supply.candidates.iter().enumerate() {
            if used[i] || c.is_zero() {
                continue;
            }
            let d1 = d_trunc_exact(c, &one, terms, p);
            // Strict inequality with a rounding margin.
            if d1 >= &threshold * &margin {
                continue;
            }
            let dc = d_trunc_exact(c, &c.neg(), terms, p);
            if dc.is_zero() {
                continue;
            }
            if let Some(pc) = &prev_conj {
                if &dc > pc {
                    continue;
                }
            }
            pick = Some((i, d1, dc));
            break;
        }
        let (i, d1, dc) = pick.ok_or_else(|| {
            Error::SupplyExhausted(format!("no admissible seed for n = {n} in {}", supply.source))
        })?;
        used[i] = true;
        seeds.push((supply.candidates[i].clone(), d1, dc, threshold));
    }

    let two_thirds = Real::from_u64(2, p) / Real::from_u64(3, p);
    let mut node_turns: Vec<Vec<Turn>> = Vec::new();
    let mut levels = Vec::new();
    let mut cur = vec![Turn::zero()];
    for (pd, (mu, _, dc, _)) in seeds.iter().enumerate() {
        let depth_p = pd + 1;
        let mub = mu.neg();
        cur = cur.iter().flat_map(|s| [s.add(mu), s.add(&mub)]).collect();
        let slack = &two_thirds * &dc.mul_pow2(-2 * depth_p as i64);
        let nodes: Vec<TreeNode> = cur
            .par_iter()
            .map(|s| TreeNode {
                angle: turn_json(s),
                bounds: terms
                    .iter()
                    .map(|n| (dist_one_exact(s, n, p) + &slack).to_f64_up())
                    .collect(),
            })
            .collect();
        levels.push(nodes);
        node_turns.push(cur.clone());
    }
    Ok(TreeSet {
        supply: supply.source.clone(),
        horizon: terms.len(),
        seeds: seeds
            .iter()
            .map(|(t, d1, dc, th)| SeedRecord {
                angle: turn_json(t),
                d_one: json::real_str(d1),
                d_conj: json::real_str(dc),
                threshold: json::real_str(th),
            })
            .collect(),
        levels,
        seed_turns: seeds.into_iter().map(|s| s.0).collect(),
        node_turns,
    })
}

impl TreeSet {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn seeds(&self) -> &[Turn] {
        &self.seed_turns
    }

    /// Nodes of depth `p` (1-based) as exact angles.
    pub fn nodes(&self, p: usize) -> &[Turn] {
        &self.node_turns[p - 1]
    }

    pub fn leaves(&self) -> &[Turn] {
        self.node_turns.last().unwrap()
    }

    /// `s ↦ λ_s` is injective on the deepest level.
    pub fn injective(&self) -> bool {
        let mut v = self.leaves().to_vec();
        v.sort();
        v.windows(2).all(|w| w[0] != w[1])
    }

    /// Every ancestor bound dominates `|λ^{n_k} − 1|` for its leaves.
    pub fn check_bounds(&self, terms: &[BigUint]) -> bool {
        let d = self.depth();
        let leaves = self.leaves();
        (0..leaves.len()).into_par_iter().all(|li| {
            let direct: Vec<f64> = terms
                .iter()
                .map(|n| dist_one_exact(&leaves[li], n, TREE_BITS).to_f64())
                .collect();
            (1..=d).all(|p| {
                let anc = &self.levels[p - 1][li >> (d - p)];
                anc.bounds.iter().zip(&direct).all(|(b, x)| x <= b)
            })
        })
    }
}

/// Truncated distance `max_k |a^{n_k} − b^{n_k}|` for exact angles.
pub fn d_trunc_turns(a: &Turn, b: &Turn, terms: &[BigUint]) -> Real {
    d_trunc_exact(a, b, terms, TREE_BITS)
}
