//! The operator `T = D + B` on a finite truncation: `D` is diagonal with
//! unimodular entries `λ_l = e^{2πiθ_l}` and `B` is the weighted backward
//! shift `B e_{l+1} = α_l e_l`. Angles are exact turns, so every difference
//! `λ_a − λ_b` and `λ_a^N − λ_b^N` is evaluated with full relative accuracy.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::{d_trunc_turns, SeedSupply};
use crate::circle::Turn;
use crate::error::{Error, Result};
use crate::hp::{chord_turn, cis_turn, expm1_turn, Complex, Real};
use crate::json::{f64_str, real_str, ComplexJson, RatJson};
use crate::rng;

/// Default working precision of hand-built models.
pub const OPERATOR_BITS: usize = 256;
/// Starting precision of [`select_parameters`].
pub const SELECT_BITS: usize = 512;
/// Global precision cap for escalation.
pub const MAX_OPERATOR_BITS: usize = 8192;
/// Bits that must survive cancellation.
pub const GUARD_BITS: usize = 64;
/// Largest degree `n − (l − k)` accepted by [`s_direct`].
pub const ORACLE_DEGREE_CAP: u64 = 1_000_000;
/// Largest exponent accepted by [`matpow_oracle`].
pub const MATPOW_CAP: u64 = 1_000_000_000;
/// Halvings of the tolerance allowed per level.
pub const MAX_HALVINGS: usize = 64;
/// Name of the concrete index map.
pub const JMAP_NAME: &str = "n - 2^floor(log2(n-1))";

/// `j(n) = n − 2^⌊log2(n−1)⌋`.
pub fn jmap(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("j({n}) is undefined, need n >= 2")));
    }
    let m = n - 1;
    Ok(n - (1usize << (usize::BITS - 1 - m.leading_zeros())))
}

fn jm(n: usize) -> usize {
    jmap(n).expect("n >= 2")
}

// ---------------------------------------------------------------------------
// Exact angle helpers
// ---------------------------------------------------------------------------

fn turn_scale(t: &Turn, e: &BigInt) -> Turn {
    match e.sign() {
        Sign::Minus => t.pow(e.magnitude()).neg(),
        _ => t.pow(e.magnitude()),
    }
}

fn cis(t: &Turn, p: usize) -> Complex {
    cis_turn(&BigInt::from(t.num().clone()), t.den(), p)
}

fn expm1(t: &Turn, p: usize) -> Complex {
    expm1_turn(&BigInt::from(t.num().clone()), t.den(), p)
}

fn chord(t: &Turn, p: usize) -> Real {
    chord_turn(&BigInt::from(t.num().clone()), t.den(), p)
}

/// `λ_a − λ_b = λ_b (e^{2πi(θ_a − θ_b)} − 1)`.
fn diff_fn(a: &Turn, b: &Turn, p: usize) -> Complex {
    &cis(b, p) * &expm1(&a.sub(b), p)
}

/// `λ_a^e − λ_b^e` for a signed exponent.
fn pow_diff(a: &Turn, b: &Turn, e: &BigInt, p: usize) -> Complex {
    &cis(&turn_scale(b, e), p) * &expm1(&turn_scale(&a.sub(b), e), p)
}

fn ulp_err(x: &Real, bits: f64, p: usize) -> Real {
    x.abs().mul_pow2(bits.ceil() as i64 - p as i64)
}

/// Cached `λ_a` and all pairwise differences at one precision.
struct Ctx<'a> {
    p: usize,
    thetas: &'a [Turn],
    lam: Vec<Complex>,
    diff: Vec<Vec<Complex>>,
}

impl<'a> Ctx<'a> {
    fn new(thetas: &'a [Turn], p: usize) -> Result<Self> {
        let n = thetas.len();
        for a in 0..n {
            for b in 0..a {
                if thetas[a] == thetas[b] {
                    return Err(Error::SeparationTooSmall(format!(
                        "λ_{} = λ_{} (angle {:?})",
                        b + 1,
                        a + 1,
                        thetas[a]
                    )));
                }
            }
        }
        let lam: Vec<Complex> = thetas.iter().map(|t| cis(t, p)).collect();
        let mut diff = vec![vec![Complex::zero(p); n]; n];
        for a in 0..n {
            for b in 0..a {
                let d = diff_fn(&thetas[a], &thetas[b], p);
                diff[b][a] = -&d;
                diff[a][b] = d;
            }
        }
        Ok(Ctx { p, thetas, lam, diff })
    }

    /// `λ_a − λ_b` (1-based).
    fn d(&self, a: usize, b: usize) -> &Complex {
        &self.diff[a - 1][b - 1]
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Per-level record of [`select_parameters`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub l: usize,
    pub j: usize,
    /// Final tolerance `tol_l`.
    pub tol: String,
    /// `d_trunc(λ_l, λ_{j(l)})` of the accepted seed.
    pub d: String,
    pub halvings: usize,
}

/// Truncated operator data. Angles are exact turns; weights are exact
/// rationals with terminating decimal expansions when built here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelJson", try_from = "ModelJson")]
pub struct OperatorModel {
    thetas: Vec<Turn>,
    omegas: Vec<BigRational>,
    pub delta: f64,
    pub schedule: Vec<LevelRecord>,
    pub bits: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelJson {
    #[serde(rename = "L")]
    l: usize,
    angles: Vec<RatJson>,
    omegas: Vec<String>,
    #[serde(default)]
    alphas: Vec<String>,
    jmap: String,
    #[serde(with = "f64_str")]
    delta: f64,
    #[serde(default)]
    schedule: Vec<LevelRecord>,
    #[serde(default)]
    min_separation: String,
    bits: usize,
}

impl From<OperatorModel> for ModelJson {
    fn from(m: OperatorModel) -> Self {
        let p = m.bits;
        ModelJson {
            l: m.len(),
            angles: m.thetas.iter().map(|t| RatJson::from_rational(&t.to_rational())).collect(),
            omegas: m.omegas.iter().map(rational_decimal).collect(),
            alphas: (1..m.len()).map(|l| real_str(&m.alpha_at(l, p))).collect(),
            jmap: JMAP_NAME.into(),
            delta: m.delta,
            schedule: m.schedule.clone(),
            min_separation: real_str(&m.min_separation().0),
            bits: m.bits,
        }
    }
}

impl TryFrom<ModelJson> for OperatorModel {
    type Error = Error;
    fn try_from(j: ModelJson) -> Result<Self> {
        if j.jmap != JMAP_NAME {
            return Err(Error::InvalidSpec(format!("unknown jmap {:?}", j.jmap)));
        }
        let thetas = j
            .angles
            .iter()
            .map(|a| {
                a.to_rational()
                    .map(|r| Turn::from_rational(&r))
                    .ok_or_else(|| Error::InvalidSpec("bad angle".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let omegas = j.omegas.iter().map(|s| parse_decimal(s)).collect::<Result<Vec<_>>>()?;
        if thetas.len() != j.l {
            return Err(Error::InvalidSpec("angle count differs from L".into()));
        }
        let mut m = OperatorModel::new(thetas, omegas, j.delta, j.bits)?;
        m.schedule = j.schedule;
        Ok(m)
    }
}

/// Exact decimal form of a rational with a power-of-two denominator,
/// `num/den` otherwise.
pub fn rational_decimal(r: &BigRational) -> String {
    let den = r.denom().magnitude();
    let e = den.trailing_zeros().unwrap_or(0);
    if !den.is_one() && (den >> e as usize) != BigUint::one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    if e == 0 {
        return r.numer().to_string();
    }
    let scaled = r.numer().abs() * BigInt::from(5u32).pow(e as u32);
    let mut s = scaled.to_string();
    let e = e as usize;
    if s.len() <= e {
        s = "0".repeat(e + 1 - s.len()) + &s;
    }
    let (int, frac) = s.split_at(s.len() - e);
    let frac = frac.trim_end_matches('0');
    let sign = if r.is_negative() { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// Parses `a`, `a.b` or `a/b` exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidSpec(format!("bad decimal {s:?}"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    if !digits.bytes().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let n: BigInt = digits.parse().map_err(|_| bad())?;
    let d = BigInt::from(10u32).pow(frac.len() as u32);
    let r = BigRational::new(n, d);
    Ok(if neg { -r } else { r })
}

impl OperatorModel {
    /// Validates distinct angles and nonnegative weights (`ω = 0` gives
    /// `B = 0` on that column).
    pub fn new(thetas: Vec<Turn>, omegas: Vec<BigRational>, delta: f64, bits: usize) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidSpec("L must be at least 1".into()));
        }
        if omegas.len() + 1 != thetas.len() {
            return Err(Error::InvalidSpec(format!(
                "need L-1 = {} weights, got {}",
                thetas.len() - 1,
                omegas.len()
            )));
        }
        if omegas.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidSpec("weights must be nonnegative".into()));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidSpec("δ must be positive".into()));
        }
        if !(64..=MAX_OPERATOR_BITS).contains(&bits) {
            return Err(Error::InvalidSpec(format!("bits must be in 64..={MAX_OPERATOR_BITS}")));
        }
        Ctx::new(&thetas, 64)?;
        Ok(OperatorModel {
            thetas,
            omegas,
            delta,
            schedule: Vec::new(),
            bits,
        })
    }

    /// Random model: angles `k/2^32` pairwise at chord distance `≥ min_sep`,
    /// weights in `[1/2, 3/2]` on a `1/1024` grid.
    pub fn random(l: usize, seed: u64, min_sep: f64, bits: usize) -> Result<Self> {
        let mut r = rng::stream(seed, 0x6f70);
        let mut thetas: Vec<Turn> = Vec::with_capacity(l);
        let den = 1u64 << 32;
        let mut tries = 0usize;
        while thetas.len() < l {
            tries += 1;
            if tries > 100_000 {
                return Err(Error::InvalidSpec("separation too large for L".into()));
            }
            let t = Turn::from_u64(r.gen_range(0..den), den);
            let ok = thetas.iter().all(|s| {
                let d = t.sub(s);
                crate::hp::chord_turn_f64(d.num(), d.den()) >= min_sep
            });
            if ok {
                thetas.push(t);
            }
        }
        let omegas = (1..l)
            .map(|_| BigRational::new(BigInt::from(r.gen_range(512u32..=1536)), BigInt::from(1024u32)))
            .collect();
        OperatorModel::new(thetas, omegas, 1.0, bits)
    }

    /// Same angles with every weight zero, so `T = D`.
    pub fn diagonal(thetas: Vec<Turn>, bits: usize) -> Result<Self> {
        let n = thetas.len().saturating_sub(1);
        OperatorModel::new(thetas, vec![BigRational::zero(); n], 1.0, bits)
    }

    /// The leading `m × m` block.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::InvalidSpec(format!("cannot truncate to {m}")));
        }
        let mut out = OperatorModel::new(
            self.thetas[..m].to_vec(),
            self.omegas[..m - 1].to_vec(),
            self.delta,
            self.bits,
        )?;
        out.schedule = self.schedule.iter().filter(|r| r.l <= m).cloned().collect();
        Ok(out)
    }

    pub fn with_bits(&self, bits: usize) -> Self {
        OperatorModel {
            bits,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[Turn] {
        &self.thetas
    }

    pub fn omegas(&self) -> &[BigRational] {
        &self.omegas
    }

    /// `λ_l` at `p` bits.
    pub fn lambda(&self, l: usize, p: usize) -> Complex {
        cis(&self.thetas[l - 1], p)
    }

    /// `Δ_l = |λ_l − λ_{j(l)}|` with `Δ_1 = 1`.
    pub fn delta_abs(&self, l: usize, p: usize) -> Real {
        delta_abs(&self.thetas, l, p)
    }

    /// `α_l = ω_l Δ_{l+1}/Δ_l`.
    pub fn alpha(&self, l: usize) -> Real {
        self.alpha_at(l, self.bits)
    }

    fn alpha_at(&self, l: usize, p: usize) -> Real {
        alpha_prod(&self.thetas, &self.omegas, l, l + 1, p)
    }

    /// `α_{l−1}⋯α_k = ω_{l−1}⋯ω_k Δ_l/Δ_k`.
    pub fn alpha_prod(&self, k: usize, l: usize) -> Real {
        alpha_prod(&self.thetas, &self.omegas, k, l, self.bits)
    }

    /// Smallest pairwise chord and the pair attaining it.
    pub fn min_separation(&self) -> (Real, usize, usize) {
        let p = self.bits;
        let mut best = (Real::from_u64(2, p), 1, 1);
        for a in 1..=self.len() {
            for b in 1..a {
                let c = chord(&self.thetas[a - 1].sub(&self.thetas[b - 1]), p);
                if c < best.0 {
                    best = (c, b, a);
                }
            }
        }
        best
    }

    /// `c`-tables `c^{(k,L)}` for `k = 1…L−1`.
    pub fn ctables(&self) -> Result<Vec<CTable>> {
        let ctx = Ctx::new(&self.thetas, self.bits)?;
        (1..self.len()).map(|k| ctable_ctx(&ctx, k, self.len())).collect()
    }
}

fn delta_abs(thetas: &[Turn], l: usize, p: usize) -> Real {
    if l == 1 {
        return Real::one(p);
    }
    chord(&thetas[l - 1].sub(&thetas[jm(l) - 1]), p)
}

fn alpha_prod(thetas: &[Turn], omegas: &[BigRational], k: usize, l: usize, p: usize) -> Real {
    let mut w = BigRational::one();
    for o in &omegas[k - 1..l - 1] {
        w *= o;
    }
    if w.is_zero() {
        return Real::zero(p);
    }
    Real::from_rational(&w, p) * delta_abs(thetas, l, p) / delta_abs(thetas, k, p)
}

// ---------------------------------------------------------------------------
// c-tables and closed-form powers
// ---------------------------------------------------------------------------

/// Coefficients `c_j^{(k,m)}`, `k ≤ j ≤ m−1`, for `m = k+1…l`.
#[derive(Clone, Debug, PartialEq)]
pub struct CTable {
    pub k: usize,
    pub l: usize,
    levels: Vec<Vec<Complex>>,
    /// Bits lost to cancellation, accumulated over the recursion.
    pub lost_bits: f64,
    pub bits: usize,
}

impl CTable {
    /// `c^{(k,m)}` indexed by `j − k`.
    pub fn coeffs(&self, m: usize) -> &[Complex] {
        assert!(m > self.k && m <= self.l, "level {m} outside table");
        &self.levels[m - self.k - 1]
    }

    /// Largest `|c|` in the table.
    pub fn max_abs(&self) -> Real {
        let mut m = Real::zero(self.bits);
        for lv in &self.levels {
            for c in lv {
                m = m.max(&c.abs());
            }
        }
        m
    }
}

/// Builds `c^{(k,m)}` for `m ≤ l` from `λ_k…λ_{l−1}` through the partial
/// fraction form `c_j^{(k,m)} = λ_j^{m−k−1} / Π_{i∈[k,m), i≠j} (λ_j − λ_i)`,
/// which involves no sums and so no cancellation.
pub fn build_ctable(thetas: &[Turn], k: usize, l: usize, p: usize) -> Result<CTable> {
    check_kl(thetas, k, l)?;
    let ctx = Ctx::new(&thetas[..l], p)?;
    ctable_ctx(&ctx, k, l)
}

/// Same table through the level-by-level recursion
/// `c_j' = −λ_j c_j/(λ_m − λ_j)`, `c_m' = Σ_j λ_m c_j/(λ_m − λ_j)`.
/// Fails with `InsufficientPrecision` when the sums cancel more than
/// `p − 64` bits; clustered nodes make this happen quickly.
pub fn build_ctable_recursive(thetas: &[Turn], k: usize, l: usize, p: usize) -> Result<CTable> {
    check_kl(thetas, k, l)?;
    let ctx = Ctx::new(&thetas[..l], p)?;
    let mut levels = vec![vec![Complex::one(p)]];
    let mut lost = 0.0f64;
    for m in k + 1..l {
        let prev = levels.last().unwrap();
        let mut next = Vec::with_capacity(prev.len() + 1);
        let mut sum = Complex::zero(p);
        let mut big = f64::NEG_INFINITY;
        for (i, c) in prev.iter().enumerate() {
            let j = k + i;
            let q = c / ctx.d(m, j);
            big = big.max(q.abs().log2_abs());
            next.push(-(&ctx.lam[j - 1] * &q));
            sum = &sum + &q;
        }
        let s = sum.abs().log2_abs();
        let canc = if s.is_finite() { (big - s).max(0.0) } else { p as f64 };
        lost += canc + 2.0;
        next.push(&ctx.lam[m - 1] * &sum);
        levels.push(next);
        if lost > (p - GUARD_BITS) as f64 {
            return Err(Error::InsufficientPrecision(format!(
                "c-table ({k},{l}) recursion loses {lost:.0} of {p} bits"
            )));
        }
    }
    Ok(CTable {
        k,
        l,
        levels,
        lost_bits: lost,
        bits: p,
    })
}

fn check_kl(thetas: &[Turn], k: usize, l: usize) -> Result<()> {
    if k == 0 || k >= l || l > thetas.len() {
        return Err(Error::InvalidSpec(format!("need 1 <= k < l <= {}", thetas.len())));
    }
    Ok(())
}

fn ctable_ctx(ctx: &Ctx, k: usize, l: usize) -> Result<CTable> {
    let p = ctx.p;
    let levels = (k + 1..=l)
        .map(|m| {
            (k..m)
                .map(|j| {
                    let mut den = Complex::one(p);
                    for i in k..m {
                        if i != j {
                            den = &den * ctx.d(j, i);
                        }
                    }
                    let num = cis(&ctx.thetas[j - 1].pow(&BigUint::from(m - k - 1)), p);
                    &num / &den
                })
                .collect()
        })
        .collect();
    Ok(CTable {
        k,
        l,
        levels,
        // Each coefficient is a product of at most l − k rounded factors.
        lost_bits: ((l - k + 1) as f64).log2() + 2.0,
        bits: p,
    })
}

/// A value with an absolute error bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Approx {
    pub value: Complex,
    pub err: Real,
}

impl Approx {
    pub fn exact(value: Complex) -> Self {
        let p = value.prec();
        Approx {
            value,
            err: Real::zero(p),
        }
    }

    /// `|value| + err`.
    pub fn abs_up(&self) -> Real {
        self.value.abs() + &self.err
    }
}

/// `s_{k,l}^{(n)} = Σ_j c_j^{(k,l)} (λ_l^E − λ_j^E)/(λ_l − λ_j)` with
/// `E = n + 1 − (l − k)`.
pub fn s_closed(ct: &CTable, thetas: &[Turn], l: usize, n: &BigUint) -> Result<Approx> {
    let ctx = Ctx::new(&thetas[..l.min(thetas.len())], ct.bits)?;
    s_closed_ctx(&ctx, ct, l, n)
}

fn s_closed_ctx(ctx: &Ctx, ct: &CTable, l: usize, n: &BigUint) -> Result<Approx> {
    let k = ct.k;
    if l <= k || l > ct.l {
        return Err(Error::InvalidSpec(format!("level {l} not in table ({k},{})", ct.l)));
    }
    let w = BigUint::from(l - k);
    if n < &w {
        return Err(Error::InvalidSpec(format!("need n >= l-k = {w}")));
    }
    let e = BigInt::from(n - &w + 1u32);
    let p = ctx.p;
    let mut sum = Complex::zero(p);
    let mut mag = Real::zero(p);
    for (i, c) in ct.coeffs(l).iter().enumerate() {
        let j = k + i;
        let num = pow_diff(&ctx.thetas[l - 1], &ctx.thetas[j - 1], &e, p);
        let t = &(c * &num) / ctx.d(l, j);
        mag = mag + t.abs();
        sum = &sum + &t;
    }
    let lost = ct.lost_bits + 16.0 + ((l - k + 1) as f64).log2();
    Ok(Approx {
        err: ulp_err(&mag, lost, p),
        value: sum,
    })
}

/// Complete homogeneous sum of degree `n − (l − k)` in `λ_k…λ_l`, by the
/// one-variable-at-a-time recurrence.
pub fn s_direct(thetas: &[Turn], k: usize, l: usize, n: u64, p: usize) -> Result<Complex> {
    if k == 0 || k > l || l > thetas.len() {
        return Err(Error::InvalidSpec(format!("need 1 <= k <= l <= {}", thetas.len())));
    }
    let w = (l - k) as u64;
    if n < w {
        return Err(Error::InvalidSpec(format!("need n >= l-k = {w}")));
    }
    let deg = n - w;
    if deg > ORACLE_DEGREE_CAP {
        return Err(Error::OracleScaleExceeded(format!(
            "degree {deg} exceeds {ORACLE_DEGREE_CAP}"
        )));
    }
    let deg = deg as usize;
    let mut h = vec![Complex::one(p); deg + 1];
    let x = cis(&thetas[k - 1], p);
    for d in 1..=deg {
        h[d] = &h[d - 1] * &x;
    }
    for t in &thetas[k..l] {
        let x = cis(t, p);
        for d in 1..=deg {
            let add = &x * &h[d - 1];
            h[d] = &h[d] + &add;
        }
    }
    Ok(h.pop().unwrap())
}

fn lam_pow(t: &Turn, n: &BigUint, p: usize) -> Complex {
    cis(&t.pow(n), p)
}

fn t_entry_ctx(
    ctx: &Ctx,
    omegas: &[BigRational],
    tables: &[CTable],
    k: usize,
    l: usize,
    n: &BigUint,
) -> Result<Approx> {
    let p = ctx.p;
    if k > l || BigUint::from(l - k) > *n {
        return Ok(Approx::exact(Complex::zero(p)));
    }
    if k == l {
        return Ok(Approx::exact(lam_pow(&ctx.thetas[k - 1], n, p)));
    }
    let a = alpha_prod(ctx.thetas, omegas, k, l, p);
    if a.is_zero() {
        return Ok(Approx::exact(Complex::zero(p)));
    }
    let s = s_closed_ctx(ctx, &tables[k - 1], l, n)?;
    let value = s.value.scale(&a);
    let err = &s.err * &a + ulp_err(&value.abs(), 16.0, p);
    Ok(Approx { value, err })
}

/// Entry `t_{k,l}^{(n)}` of `T^n`.
pub fn t_entry(model: &OperatorModel, k: usize, l: usize, n: &BigUint) -> Result<Approx> {
    let len = model.len();
    if k == 0 || l == 0 || k > len || l > len {
        return Err(Error::InvalidSpec(format!("indices must be in 1..={len}")));
    }
    let ctx = Ctx::new(&model.thetas, model.bits)?;
    let tables = if k < l {
        let mut v: Vec<CTable> = Vec::new();
        for kk in 1..=k {
            // Only table k is read; earlier slots are cheap placeholders.
            v.push(ctable_ctx(&ctx, kk, if kk == k { l } else { kk + 1 })?);
        }
        v
    } else {
        Vec::new()
    };
    t_entry_ctx(&ctx, &model.omegas, &tables, k, l, n)
}

/// All entries of the truncated `T^n`, row-major.
pub fn t_matrix(model: &OperatorModel, n: &BigUint) -> Result<Vec<Vec<Approx>>> {
    let ctx = Ctx::new(&model.thetas, model.bits)?;
    let tables = model_tables(&ctx, model.len())?;
    t_matrix_ctx(&ctx, &model.omegas, &tables, n)
}

fn model_tables(ctx: &Ctx, len: usize) -> Result<Vec<CTable>> {
    (1..len).map(|k| ctable_ctx(ctx, k, len)).collect()
}

fn t_matrix_ctx(ctx: &Ctx, omegas: &[BigRational], tables: &[CTable], n: &BigUint) -> Result<Vec<Vec<Approx>>> {
    let len = ctx.thetas.len();
    (1..=len)
        .map(|k| {
            (1..=len)
                .map(|l| t_entry_ctx(ctx, omegas, tables, k, l, n))
                .collect()
        })
        .collect()
}

/// `T^n` by repeated squaring of the dense truncation.
pub fn matpow_oracle(model: &OperatorModel, n: u64) -> Result<Vec<Vec<Complex>>> {
    if n > MATPOW_CAP {
        return Err(Error::OracleScaleExceeded(format!("n = {n} exceeds {MATPOW_CAP}")));
    }
    let len = model.len();
    let p = model.bits;
    let mut base = vec![vec![Complex::zero(p); len]; len];
    for k in 1..=len {
        base[k - 1][k - 1] = model.lambda(k, p);
        if k < len {
            base[k - 1][k] = Complex::from_real(model.alpha(k));
        }
    }
    let mut acc: Vec<Vec<Complex>> = (0..len)
        .map(|i| (0..len).map(|j| if i == j { Complex::one(p) } else { Complex::zero(p) }).collect())
        .collect();
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc = upper_mul(&acc, &base, p);
        }
        e >>= 1;
        if e > 0 {
            base = upper_mul(&base, &base, p);
        }
    }
    Ok(acc)
}

fn upper_mul(a: &[Vec<Complex>], b: &[Vec<Complex>], p: usize) -> Vec<Vec<Complex>> {
    let n = a.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut s = Complex::zero(p);
                    for m in i..=j {
                        s = &s + &(&a[i][m] * &b[m][j]);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// Largest residual of the vanishing sums with exponents `1 − (l−k−q)`,
/// `0 ≤ q ≤ l−k−1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub k: usize,
    pub l: usize,
    pub max_residual: f64,
    /// Largest `Σ_j |term_j|` over `q`, the natural scale of the residual.
    pub scale: f64,
    pub max_coeff: f64,
}

pub fn verify_vanishing_sums(ct: &CTable, thetas: &[Turn], l: usize) -> Result<VanishingReport> {
    let k = ct.k;
    if l <= k || l > ct.l || l > thetas.len() {
        return Err(Error::InvalidSpec(format!("level {l} not in table ({k},{})", ct.l)));
    }
    let ctx = Ctx::new(&thetas[..l], ct.bits)?;
    let p = ct.bits;
    let mut worst = Real::zero(p);
    let mut scale = Real::zero(p);
    for q in 0..(l - k) {
        let e = BigInt::from(1i64 - (l - k - q) as i64);
        let mut sum = Complex::zero(p);
        let mut mag = Real::zero(p);
        for (i, c) in ct.coeffs(l).iter().enumerate() {
            let j = k + i;
            let t = &(c * &pow_diff(&thetas[l - 1], &thetas[j - 1], &e, p)) / ctx.d(l, j);
            mag = mag + t.abs();
            sum = &sum + &t;
        }
        worst = worst.max(&sum.abs());
        scale = scale.max(&mag);
    }
    Ok(VanishingReport {
        k,
        l,
        max_residual: worst.to_f64_up(),
        scale: scale.to_f64(),
        max_coeff: ct.max_abs().to_f64(),
    })
}

// ---------------------------------------------------------------------------
// Eigenvectors
// ---------------------------------------------------------------------------

/// Coordinates of `u^{(n)}` and the residual `‖T u − λ_n u‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigvecRecord {
    pub n: usize,
    pub coords: Vec<ComplexJson>,
    #[serde(with = "f64_str")]
    pub residual: f64,
    /// `max_k |u_k| · max(1, max_l α_l)`, the scale of the residual.
    #[serde(with = "f64_str")]
    pub scale: f64,
}

fn weights_before(omegas: &[BigRational], k: usize, p: usize) -> Result<Real> {
    let mut w = BigRational::one();
    for o in &omegas[..k - 1] {
        w *= o;
    }
    if w.is_zero() {
        return Err(Error::InvalidSpec("eigenvectors need nonzero weights".into()));
    }
    Ok(Real::from_rational(&w, p))
}

fn eig_coords(ctx: &Ctx, omegas: &[BigRational], n: usize) -> Result<Vec<Complex>> {
    let p = ctx.p;
    let len = ctx.thetas.len();
    let mut out = vec![Complex::one(p)];
    let mut prod = Complex::one(p);
    for k in 2..=len {
        if k > n {
            out.push(Complex::zero(p));
            continue;
        }
        prod = &prod * ctx.d(n, k - 1);
        let den = weights_before(omegas, k, p)? * delta_abs(ctx.thetas, k, p);
        out.push(prod.scale(&den.recip()));
    }
    Ok(out)
}

pub fn eigenvector(model: &OperatorModel, n: usize) -> Result<EigvecRecord> {
    let len = model.len();
    if n == 0 || n > len {
        return Err(Error::InvalidSpec(format!("n must be in 1..={len}")));
    }
    let p = model.bits;
    let ctx = Ctx::new(&model.thetas, p)?;
    let u = eig_coords(&ctx, &model.omegas, n)?;
    let ln = &ctx.lam[n - 1];
    let mut res = Real::zero(p);
    let mut amax = Real::one(p);
    for k in 1..=len {
        let mut tu = &ctx.lam[k - 1] * &u[k - 1];
        if k < len {
            let a = model.alpha(k);
            amax = amax.max(&a);
            tu = &tu + &u[k].scale(&a);
        }
        res = res + (&tu - &(ln * &u[k - 1])).norm_sqr();
    }
    let umax = u.iter().map(|c| c.abs()).fold(Real::zero(p), |a, b| a.max(&b));
    Ok(EigvecRecord {
        n,
        coords: u.iter().map(ComplexJson::from_complex).collect(),
        residual: res.sqrt().to_f64_up(),
        scale: (umax * amax).to_f64(),
    })
}

/// `‖u^{(a)} − u^{(b)}‖`, with each coordinate difference telescoped so
/// that it carries the exact factor `λ_a − λ_b`.
pub fn eigvec_distance(model: &OperatorModel, a: usize, b: usize) -> Result<Real> {
    let len = model.len();
    if a == 0 || b == 0 || a > len || b > len {
        return Err(Error::InvalidSpec(format!("indices must be in 1..={len}")));
    }
    let ctx = Ctx::new(&model.thetas, model.bits)?;
    eig_dist_ctx(&ctx, &model.omegas, a, b)
}

fn eig_dist_ctx(ctx: &Ctx, omegas: &[BigRational], a: usize, b: usize) -> Result<Real> {
    let p = ctx.p;
    let mut total = Real::zero(p);
    if a == b {
        return Ok(total);
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let dab = ctx.d(a, b);
    for k in 2..=hi {
        let sum = if k > lo {
            // u^{(lo)}_k = 0 exactly here.
            let mut pr = Complex::one(p);
            for i in 1..k {
                pr = &pr * ctx.d(hi, i);
            }
            pr
        } else {
            // Σ_m Π_{i<m}(λ_a−λ_i) · (λ_a−λ_b) · Π_{m<i<k}(λ_b−λ_i)
            let mut pa = vec![Complex::one(p)];
            for i in 1..k {
                let next = &pa[i - 1] * ctx.d(a, i);
                pa.push(next);
            }
            let mut sum = Complex::zero(p);
            let mut tail = Complex::one(p);
            for m in (1..k).rev() {
                sum = &sum + &(&(&pa[m - 1] * dab) * &tail);
                tail = &tail * ctx.d(b, m);
            }
            sum
        };
        let den = weights_before(omegas, k, p)? * delta_abs(ctx.thetas, k, p);
        total = total + sum.norm_sqr() / den.square();
    }
    Ok(total.sqrt())
}

// ---------------------------------------------------------------------------
// Parameter selection
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct SelectConfig {
    pub bits: usize,
    pub max_bits: usize,
    pub max_halvings: usize,
    /// Initial tolerance.
    pub tol0: f64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            bits: SELECT_BITS,
            max_bits: MAX_OPERATOR_BITS,
            max_halvings: MAX_HALVINGS,
            tol0: 2.0,
        }
    }
}

/// Builds `λ_1 = 1, λ_2, …, λ_L` and `ω_1, …, ω_{L−1}` so that, for every
/// level `l`: `α_{l−1} ≤ δ`, `‖u^{(l)} − u^{(j(l))}‖ ≤ 2^{−l}` and
/// `Σ_k |t_{k,l}^{(n)}|² ≤ δ² 2^{−l}` for every prefix term `n`.
/// Precision doubles whenever a check is decided by rounding error.
pub fn select_parameters(
    prefix: &[BigUint],
    delta: f64,
    supply: &SeedSupply,
    l_max: usize,
    cfg: &SelectConfig,
) -> Result<OperatorModel> {
    if prefix.is_empty() {
        return Err(Error::InvalidSpec("empty prefix".into()));
    }
    if prefix.iter().any(|n| n.is_zero()) {
        return Err(Error::InvalidSpec("prefix terms must be positive".into()));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidSpec("δ must be positive".into()));
    }
    if l_max == 0 {
        return Err(Error::InvalidSpec("L must be at least 1".into()));
    }
    let mut seeds: Vec<(Real, Turn)> = supply
        .candidates
        .iter()
        .filter(|t| !t.is_zero())
        .map(|t| (d_trunc_turns(t, &Turn::zero(), prefix), t.clone()))
        .collect();
    seeds.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    seeds.dedup_by(|a, b| a.1 == b.1);
    let mut bits = cfg.bits;
    loop {
        match select_at(prefix, delta, &seeds, l_max, cfg, bits) {
            Err(Error::InsufficientPrecision(msg)) => {
                if bits * 2 > cfg.max_bits {
                    return Err(Error::PrecisionExceeded(format!(
                        "{msg}; cap {} bits reached",
                        cfg.max_bits
                    )));
                }
                bits *= 2;
            }
            r => return r,
        }
    }
}

/// `ω_{l−1} = 2^e`, the least power of two with `ω ≥ 2^l` and
/// `Π_{i<l} ω_i^{−2} ≤ δ² 2^{−(l+3)}`.
fn omega_exponent(prev: i64, l: usize, delta: f64) -> i64 {
    let need = (-2.0 * prev as f64 + (l + 3) as f64 - 2.0 * delta.log2()) / 2.0;
    let mut e = (l as i64).max(need.ceil() as i64);
    // Exact check of 2^{-2(prev+e)} ≤ δ² 2^{-(l+3)}.
    let d2 = BigRational::from_float(delta * delta).expect("finite");
    loop {
        let lhs_exp = -2 * (prev + e) + (l as i64 + 3);
        let lhs = if lhs_exp >= 0 {
            BigRational::from_integer(BigInt::one() << lhs_exp as usize)
        } else {
            BigRational::new(BigInt::one(), BigInt::one() << (-lhs_exp) as usize)
        };
        if lhs <= d2 {
            return e;
        }
        e += 1;
    }
}

fn pow2_rat(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

enum Verdict {
    Accept,
    Reject,
}

fn select_at(
    prefix: &[BigUint],
    delta: f64,
    seeds: &[(Real, Turn)],
    l_max: usize,
    cfg: &SelectConfig,
    p: usize,
) -> Result<OperatorModel> {
    let mut thetas = vec![Turn::zero()];
    let mut omegas: Vec<BigRational> = Vec::new();
    let mut schedule = Vec::new();
    let mut used = vec![false; seeds.len()];
    let mut tol = Real::from_f64(cfg.tol0, p);
    let mut w_exp = 0i64;
    for l in 2..=l_max {
        let e = omega_exponent(w_exp, l, delta);
        omegas.push(pow2_rat(e));
        let j = jm(l);
        let mut halvings = 0usize;
        loop {
            let pick = seeds.iter().enumerate().find(|(i, (d, s))| {
                !used[*i] && *d <= tol && {
                    let t = thetas[j - 1].add(s);
                    !thetas.contains(&t)
                }
            });
            let Some((i, (d, s))) = pick else {
                return Err(Error::SupplyExhausted(format!(
                    "level {l}: no unused seed with d_trunc <= {}",
                    real_str(&tol)
                )));
            };
            thetas.push(thetas[j - 1].add(s));
            match check_level(prefix, delta, &thetas, &omegas, l, p)? {
                Verdict::Accept => {
                    used[i] = true;
                    schedule.push(LevelRecord {
                        l,
                        j,
                        tol: real_str(&tol),
                        d: real_str(d),
                        halvings,
                    });
                    break;
                }
                Verdict::Reject => {
                    thetas.pop();
                    tol = tol.min(d).mul_pow2(-1);
                    halvings += 1;
                    if halvings > cfg.max_halvings {
                        return Err(Error::SupplyExhausted(format!(
                            "level {l}: {} halvings without meeting the budgets",
                            cfg.max_halvings
                        )));
                    }
                }
            }
        }
        w_exp += e;
    }
    let mut m = OperatorModel::new(thetas, omegas, delta, p)?;
    m.schedule = schedule;
    Ok(m)
}

fn check_level(
    prefix: &[BigUint],
    delta: f64,
    thetas: &[Turn],
    omegas: &[BigRational],
    l: usize,
    p: usize,
) -> Result<Verdict> {
    let margin = Real::one(p) - Real::one(p).mul_pow2(32 - p as i64);
    let dl = Real::from_f64(delta, p);
    // (a) shift weight
    let a = alpha_prod(thetas, omegas, l - 1, l, p);
    if a > &dl * &margin {
        return Ok(Verdict::Reject);
    }
    let ctx = Ctx::new(thetas, p)?;
    // (b) eigenvector approximation
    let dist = eig_dist_ctx(&ctx, omegas, l, jm(l))?;
    // At l = 2 with ω_1 = 4 this holds with equality, so allow rounding.
    let slack = Real::one(p) + Real::one(p).mul_pow2(32 - p as i64);
    if dist > Real::one(p).mul_pow2(-(l as i64)) * &slack {
        return Ok(Verdict::Reject);
    }
    // (c) column budgets
    let budget = dl.square().mul_pow2(-(l as i64));
    let tables = (1..l).map(|k| ctable_ctx(&ctx, k, l)).collect::<Result<Vec<_>>>()?;
    let lb = BigUint::from(l);
    let results: Vec<Result<(Real, Real)>> = prefix
        .par_iter()
        .map(|n| {
            let lo = if *n >= lb { 1 } else { l - n.to_usize().unwrap() };
            let mut up = Real::zero(p);
            let mut mid = Real::zero(p);
            for k in lo.max(1)..l {
                let t = t_entry_ctx(&ctx, omegas, &tables, k, l, n)?;
                up = up + t.abs_up().square();
                mid = mid + t.value.norm_sqr();
            }
            Ok((up, mid))
        })
        .collect();
    for r in results {
        let (up, mid) = r?;
        if up > budget {
            if mid <= budget {
                return Err(Error::InsufficientPrecision(format!(
                    "column {l} budget undecided at {p} bits"
                )));
            }
            return Ok(Verdict::Reject);
        }
    }
    Ok(Verdict::Accept)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityRow {
    pub index: usize,
    pub n: String,
    /// Hilbert–Schmidt upper bound for `‖T^n − D^n‖` on the truncation.
    pub hs_bound: String,
    pub hs_log2: f64,
    /// Largest singular value of the truncated `T^n`.
    #[serde(with = "f64_str")]
    pub norm_estimate: f64,
    /// `sup_l |λ_l^n − 1|`.
    #[serde(with = "f64_str")]
    pub diag_sup: f64,
    /// `1 + hs_bound`, an upper bound for the truncated `‖T^n‖`.
    #[serde(with = "f64_str")]
    pub combined: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(with = "f64_str")]
    pub delta: f64,
    /// `‖T − D‖ = ‖B‖ = max_l α_l`.
    pub shift_norm: String,
    pub shift_pass: bool,
    pub rows: Vec<RigidityRow>,
    pub verdict: bool,
    pub note: String,
}

impl RigidityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,n,hs_bound,norm_estimate,diag_sup,combined,pass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.index,
                r.n,
                r.hs_bound,
                crate::json::fmt_f64(r.norm_estimate),
                crate::json::fmt_f64(r.diag_sup),
                crate::json::fmt_f64(r.combined),
                r.pass
            ));
        }
        s
    }
}

/// Per prefix term: HS bound on `‖T^n − D^n‖`, singular value estimate of
/// `T^n`, and `sup_l |λ_l^n − 1|`. Claims cover the given prefix and the
/// truncation only.
pub fn rigidity_report(model: &OperatorModel, prefix: &[BigUint]) -> Result<RigidityReport> {
    let p = model.bits;
    let ctx = Ctx::new(&model.thetas, p)?;
    let tables = model_tables(&ctx, model.len())?;
    let dl = Real::from_f64(model.delta, p);
    let mut shift = Real::zero(p);
    for l in 1..model.len() {
        shift = shift.max(&model.alpha(l));
    }
    let rows = prefix
        .par_iter()
        .enumerate()
        .map(|(idx, n)| {
            let t = t_matrix_ctx(&ctx, &model.omegas, &tables, n)?;
            let mut hs = Real::zero(p);
            let mut m = vec![vec![(0.0f64, 0.0f64); t.len()]; t.len()];
            for (k, row) in t.iter().enumerate() {
                for (l, x) in row.iter().enumerate() {
                    if l > k {
                        hs = hs + x.abs_up().square();
                    }
                    m[k][l] = x.value.to_f64();
                }
            }
            let hs = hs.sqrt();
            let diag_sup = model
                .thetas
                .iter()
                .map(|th| {
                    let y = th.pow(n);
                    crate::hp::chord_turn_f64(y.num(), y.den())
                })
                .fold(0.0, f64::max);
            let norm = largest_singular(&m, idx as u64);
            let bound = hs.to_f64_up();
            Ok(RigidityRow {
                index: idx,
                n: n.to_string(),
                hs_bound: real_str(&hs),
                hs_log2: hs.log2_abs(),
                norm_estimate: norm,
                diag_sup,
                combined: 1.0 + bound,
                pass: hs <= dl && norm <= 1.0 + model.delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let shift_pass = shift <= dl;
    Ok(RigidityReport {
        l: model.len(),
        delta: model.delta,
        shift_norm: real_str(&shift),
        shift_pass,
        verdict: shift_pass && rows.iter().all(|r| r.pass),
        rows,
        note: format!(
            "bounds hold for the listed prefix terms and the {}x{} truncation only",
            model.len(),
            model.len()
        ),
    })
}

type C64 = (f64, f64);

fn cmul(a: C64, b: C64) -> C64 {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.0 * z.0 + z.1 * z.1).sum::<f64>().sqrt()
}

/// Power iteration on `M^* M`: at most 200 steps or relative change
/// below `1e−12`, from a seeded start vector.
pub fn largest_singular(m: &[Vec<C64>], seed: u64) -> f64 {
    let n = m.len();
    if n == 0 {
        return 0.0;
    }
    let mut r = rng::stream(rng::DEFAULT_SEED ^ 0x7369_6e67, seed);
    let mut x: Vec<C64> = (0..n).map(|_| (r.gen_range(0.5..1.5), r.gen_range(-0.5..0.5))).collect();
    let nx = vnorm(&x);
    x.iter_mut().for_each(|z| *z = (z.0 / nx, z.1 / nx));
    let mut sigma = 0.0f64;
    for _ in 0..200 {
        let y: Vec<C64> = (0..n)
            .map(|i| (0..n).fold((0.0, 0.0), |s, j| {
                let t = cmul(m[i][j], x[j]);
                (s.0 + t.0, s.1 + t.1)
            }))
            .collect();
        let z: Vec<C64> = (0..n)
            .map(|j| (0..n).fold((0.0, 0.0), |s, i| {
                let t = cmul((m[i][j].0, -m[i][j].1), y[i]);
                (s.0 + t.0, s.1 + t.1)
            }))
            .collect();
        let nz = vnorm(&z);
        if nz == 0.0 {
            return 0.0;
        }
        let next = nz.sqrt();
        x = z.iter().map(|w| (w.0 / nz, w.1 / nz)).collect();
        let done = (next - sigma).abs() <= 1e-12 * next;
        sigma = next;
        if done {
            break;
        }
    }
    sigma
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    pub i: usize,
    /// Best witness `n ≠ i`, if any.
    pub n: Option<usize>,
    pub distance_log2: Option<f64>,
    pub eps_log2: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    #[serde(rename = "L")]
    pub l: usize,
    pub distinct: bool,
    pub min_separation: String,
    pub separation_pair: (usize, usize),
    pub leading_nonzero: bool,
    /// `min_n log2 |⟨u^{(n)}, e_n⟩|`.
    pub min_leading_log2: f64,
    pub approximation: Vec<ApproxRow>,
    pub approximation_ok: bool,
    pub verdict: bool,
}

/// Finite checks: distinct eigenvalues, nonzero last coordinate of every
/// `u^{(n)}`, and for each `i ≤ L/2` some `n ≠ i` with
/// `‖u^{(n)} − u^{(i)}‖ ≤ 2·2^{−n}` (largest such `n` reported).
pub fn spectral_criterion_check(model: &OperatorModel) -> Result<SpectralReport> {
    let len = model.len();
    if len < 4 {
        return Err(Error::InvalidSpec("need L >= 4".into()));
    }
    let p = model.bits;
    let ctx = Ctx::new(&model.thetas, p)?;
    let (sep, a, b) = model.min_separation();
    let mut lead = f64::INFINITY;
    for n in 1..=len {
        let u = eig_coords(&ctx, &model.omegas, n)?;
        lead = lead.min(u[n - 1].abs().log2_abs());
    }
    let rows = (1..=len / 2)
        .map(|i| {
            let mut best: Option<(usize, Real)> = None;
            for n in (1..=len).rev() {
                if n == i {
                    continue;
                }
                let d = eig_dist_ctx(&ctx, &model.omegas, n, i)?;
                if d <= Real::one(p).mul_pow2(1 - n as i64) {
                    best = Some((n, d));
                    break;
                }
            }
            Ok(match best {
                Some((n, d)) => ApproxRow {
                    i,
                    n: Some(n),
                    distance_log2: Some(d.log2_abs()),
                    eps_log2: Some(1.0 - n as f64),
                    pass: true,
                },
                None => ApproxRow {
                    i,
                    n: None,
                    distance_log2: None,
                    eps_log2: None,
                    pass: false,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let distinct = !sep.is_zero();
    let leading = lead.is_finite();
    let approx_ok = rows.iter().all(|r| r.pass);
    Ok(SpectralReport {
        l: len,
        distinct,
        min_separation: real_str(&sep),
        separation_pair: (a, b),
        leading_nonzero: leading,
        min_leading_log2: lead,
        approximation: rows,
        approximation_ok: approx_ok,
        verdict: distinct && leading && approx_ok,
    })
}

/// Supply of grid points `i/den`, `1 ≤ i ≤ count`.
pub fn grid_supply(den: u64, count: u64) -> SeedSupply {
    let pts = (1..=count.min(den.saturating_sub(1)))
        .map(|i| Turn::from_u64(i, den))
        .collect();
    SeedSupply::from_points(&format!("grid i/{den}"), pts)
}
