//! Points of the unit circle stored as fractions of a turn, chord distances,
//! powers by huge exponents, the truncated pseudometric
//! `d(λ, μ) = max_k |λ^{n_k} − μ^{n_k}|` and a multi-resolution scan for the
//! smallest truncated distance to `1`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hp::{self, chord_turn, chord_turn_f64, Complex, Real, DEFAULT_BITS, MAX_BITS};

/// Error budget (in turns) beyond which a fixed-point power is refused.
pub const MAX_POW_ERR_BITS: usize = 32;

/// Extra bits demanded beyond `bitlen(n)` before raising to the power `n`.
pub const POW_GUARD_BITS: usize = 64;

/// Exact reduced fraction `num/den` of a turn with `0 <= num < den`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Turn {
    num: BigUint,
    den: BigUint,
}

impl fmt::Debug for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Turn {
    /// `num/den` reduced modulo 1 and to lowest terms. Panics on `den = 0`.
    pub fn new(num: BigUint, den: BigUint) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let num = num % &den;
        let g = num.gcd(&den);
        if num.is_zero() {
            return Turn::zero();
        }
        Turn {
            num: num / &g,
            den: den / g,
        }
    }

    /// Signed numerator, reduced modulo 1.
    pub fn from_signed(num: &BigInt, den: &BigUint) -> Self {
        let d = BigInt::from(den.clone());
        let r = num.mod_floor(&d);
        Turn::new(r.to_biguint().expect("nonnegative"), den.clone())
    }

    pub fn from_u64(num: u64, den: u64) -> Self {
        Turn::new(BigUint::from(num), BigUint::from(den))
    }

    pub fn zero() -> Self {
        Turn {
            num: BigUint::zero(),
            den: BigUint::one(),
        }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        Turn::from_signed(r.numer(), r.denom().magnitude())
    }

    pub fn num(&self) -> &BigUint {
        &self.num
    }

    pub fn den(&self) -> &BigUint {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone().into(), self.den.clone().into())
    }

    pub fn to_f64(&self) -> f64 {
        hp::ratio_to_f64(&self.num, &self.den)
    }

    /// `n·self mod 1`, computed exactly.
    pub fn pow(&self, n: &BigUint) -> Turn {
        let r = (&self.num * (n % &self.den)) % &self.den;
        Turn::new(r, self.den.clone())
    }

    pub fn add(&self, o: &Turn) -> Turn {
        Turn::new(
            &self.num * &o.den + &o.num * &self.den,
            &self.den * &o.den,
        )
    }

    pub fn sub(&self, o: &Turn) -> Turn {
        let a = BigInt::from(&self.num * &o.den);
        let b = BigInt::from(&o.num * &self.den);
        Turn::from_signed(&(a - b), &(&self.den * &o.den))
    }

    /// `1 − self` (the complex conjugate point).
    pub fn neg(&self) -> Turn {
        if self.is_zero() {
            return Turn::zero();
        }
        Turn::new(&self.den - &self.num, self.den.clone())
    }

    /// Nearest point of the lattice `Z/2^bits` at or below `self`.
    pub fn floor_dyadic(&self, bits: usize) -> BigUint {
        (&self.num << bits) / &self.den
    }
}

impl Ord for Turn {
    fn cmp(&self, o: &Self) -> Ordering {
        (&self.num * &o.den).cmp(&(&o.num * &self.den))
    }
}

impl PartialOrd for Turn {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Fixed-point fraction `mant / 2^bits` of a turn, known to within
/// `err_ulps / 2^bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixed {
    mant: BigUint,
    bits: usize,
    err_ulps: BigUint,
}

impl Fixed {
    /// Builds a fixed-point angle; the mantissa is reduced modulo one turn.
    /// Panics if the error exceeds `2^8` units in the last place.
    pub fn new(mant: BigUint, bits: usize, err_ulps: BigUint) -> Self {
        assert!(
            err_ulps <= BigUint::from(256u32),
            "fixed-point error bound above 2^-(P-8)"
        );
        let mask = (BigUint::one() << bits) - 1u32;
        Fixed {
            mant: mant & mask,
            bits,
            err_ulps,
        }
    }

    pub fn mant(&self) -> &BigUint {
        &self.mant
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn err_ulps(&self) -> &BigUint {
        &self.err_ulps
    }

    /// Absolute error bound in turns.
    pub fn err_turns(&self) -> f64 {
        hp::ratio_to_f64(&self.err_ulps, &(BigUint::one() << self.bits))
    }

    fn den(&self) -> BigUint {
        BigUint::one() << self.bits
    }

    /// Rounds an exact turn down to `bits` bits.
    pub fn from_turn(t: &Turn, bits: usize) -> Fixed {
        let exact = (&t.num << bits) % &t.den == BigUint::zero();
        let err = if exact { 0u32 } else { 1u32 };
        Fixed::new(t.floor_dyadic(bits), bits, BigUint::from(err))
    }

    /// Re-expresses at a larger number of bits (exact shift).
    fn widen(&self, bits: usize) -> Fixed {
        assert!(bits >= self.bits);
        let s = bits - self.bits;
        Fixed {
            mant: &self.mant << s,
            bits,
            err_ulps: &self.err_ulps << s,
        }
    }

    /// Drops low bits until the error is at most 255 ulps again, keeping
    /// the stored error a rigorous bound.
    fn renormalize(self) -> Fixed {
        let cap = BigUint::from(255u32);
        if self.err_ulps <= cap {
            return self;
        }
        let mut s = (self.err_ulps.bits() as usize).saturating_sub(8);
        while ceil_shr(&self.err_ulps, s) + 1u32 > cap {
            s += 1;
        }
        let err = ceil_shr(&self.err_ulps, s) + 1u32;
        Fixed {
            mant: &self.mant >> s,
            bits: self.bits - s,
            err_ulps: err,
        }
    }
}

fn ceil_shr(x: &BigUint, s: usize) -> BigUint {
    let q = x >> s;
    if (&q << s) == *x {
        q
    } else {
        q + 1u32
    }
}

/// A point of the circle in turns, exact or fixed-point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Angle {
    Exact(Turn),
    Fixed(Fixed),
}

impl Angle {
    pub fn zero() -> Self {
        Angle::Exact(Turn::zero())
    }

    pub fn exact(num: u64, den: u64) -> Self {
        Angle::Exact(Turn::from_u64(num, den))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Angle::Exact(_))
    }

    /// Error bound in turns (zero for exact angles).
    pub fn err_turns(&self) -> f64 {
        match self {
            Angle::Exact(_) => 0.0,
            Angle::Fixed(f) => f.err_turns(),
        }
    }

    /// Fixed-point bits, if any.
    pub fn bits(&self) -> Option<usize> {
        match self {
            Angle::Exact(_) => None,
            Angle::Fixed(f) => Some(f.bits),
        }
    }

    /// Midpoint as a (numerator, denominator) pair of a turn.
    pub fn fraction(&self) -> (BigUint, BigUint) {
        match self {
            Angle::Exact(t) => (t.num.clone(), t.den.clone()),
            Angle::Fixed(f) => (f.mant.clone(), f.den()),
        }
    }

    pub fn to_f64(&self) -> f64 {
        let (n, d) = self.fraction();
        hp::ratio_to_f64(&n, &d)
    }

    fn as_fixed(&self, bits: usize) -> Fixed {
        match self {
            Angle::Exact(t) => Fixed::from_turn(t, bits),
            Angle::Fixed(f) => f.widen(bits),
        }
    }

    fn common(a: &Angle, b: &Angle) -> (Fixed, Fixed) {
        let bits = a.bits().unwrap_or(0).max(b.bits().unwrap_or(0));
        (a.as_fixed(bits), b.as_fixed(bits))
    }

    /// `self − o` modulo 1 (the angle of `λ μ̄`).
    pub fn sub(&self, o: &Angle) -> Angle {
        match (self, o) {
            (Angle::Exact(a), Angle::Exact(b)) => Angle::Exact(a.sub(b)),
            _ => {
                let (a, b) = Angle::common(self, o);
                let den = a.den();
                let m = (&a.mant + &den - &b.mant) % &den;
                let err = &a.err_ulps + &b.err_ulps;
                Angle::Fixed(
                    Fixed {
                        mant: m,
                        bits: a.bits,
                        err_ulps: err,
                    }
                    .renormalize(),
                )
            }
        }
    }

    /// `self + o` modulo 1 (the angle of `λ μ`).
    pub fn add(&self, o: &Angle) -> Angle {
        self.sub(&o.neg())
    }

    /// `−self` modulo 1 (the angle of `λ̄`).
    pub fn neg(&self) -> Angle {
        match self {
            Angle::Exact(t) => Angle::Exact(t.neg()),
            Angle::Fixed(f) => {
                let den = f.den();
                Angle::Fixed(Fixed {
                    mant: (&den - &f.mant) % &den,
                    bits: f.bits,
                    err_ulps: f.err_ulps.clone(),
                })
            }
        }
    }
}

/// `nθ mod 1`. Exact angles are reduced modulo their denominator; fixed
/// angles need `bits ≥ bitlen(n) + 64` and carry error `n·ε`.
pub fn angle_pow(theta: &Angle, n: &BigUint) -> Result<Angle> {
    match theta {
        Angle::Exact(t) => Ok(Angle::Exact(t.pow(n))),
        Angle::Fixed(f) => {
            let need = hp::bitlen(n) + POW_GUARD_BITS;
            if f.bits < need {
                return Err(Error::PrecisionExceeded(format!(
                    "exponent needs {need} bits, angle carries {}",
                    f.bits
                )));
            }
            let den = f.den();
            let mant = (&f.mant * n) % &den;
            let err = &f.err_ulps * n;
            if f.bits < MAX_POW_ERR_BITS || err > (BigUint::one() << (f.bits - MAX_POW_ERR_BITS)) {
                return Err(Error::PrecisionExceeded(
                    "accumulated error above 2^-32 turns".into(),
                ));
            }
            Ok(Angle::Fixed(
                Fixed {
                    mant,
                    bits: f.bits,
                    err_ulps: err,
                }
                .renormalize(),
            ))
        }
    }
}

/// A recomputable angle. Fixed-point sources re-derive their digits at
/// whatever precision an exponent demands.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngleSource {
    /// Exact `num/den`.
    Exact { num: String, den: String },
    /// Fractional part of `√m` for a non-square `m`.
    FracSqrt { m: u64 },
    /// Fractional part of the golden ratio.
    Golden,
}

impl AngleSource {
    /// The angle with at least `bits` fractional bits.
    pub fn at_bits(&self, bits: usize) -> Result<Angle> {
        match self {
            AngleSource::Exact { num, den } => {
                let n: BigUint = num
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad numerator {num}")))?;
                let d: BigUint = den
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad denominator {den}")))?;
                if d.is_zero() {
                    return Err(Error::InvalidSpec("zero denominator".into()));
                }
                Ok(Angle::Exact(Turn::new(n, d)))
            }
            AngleSource::FracSqrt { m } => {
                let s = (BigUint::from(*m) << (2 * bits)).sqrt();
                if &s * &s == (BigUint::from(*m) << (2 * bits)) {
                    return Ok(Angle::Exact(Turn::zero()));
                }
                Ok(Angle::Fixed(Fixed::new(s, bits, BigUint::one())))
            }
            AngleSource::Golden => {
                // (√5 − 1)/2 from floor(√5·2^(b+1)).
                let s = (BigUint::from(5u32) << (2 * (bits + 1))).sqrt();
                let m = (s - (BigUint::one() << (bits + 1))) >> 1usize;
                Ok(Angle::Fixed(Fixed::new(m, bits, BigUint::one())))
            }
        }
    }

    /// Bits needed so that raising to `n` passes the precision check.
    pub fn bits_for(n: &BigUint) -> usize {
        (hp::bitlen(n) + POW_GUARD_BITS + 8).max(DEFAULT_BITS)
    }

    /// `nθ mod 1` with precision escalated to `bitlen(n) + 64` (plus guard),
    /// up to the global cap.
    pub fn pow(&self, n: &BigUint) -> Result<Angle> {
        let bits = AngleSource::bits_for(n);
        if bits > MAX_BITS {
            return Err(Error::PrecisionExceeded(format!(
                "exponent needs {bits} bits, cap is {MAX_BITS}"
            )));
        }
        angle_pow(&self.at_bits(bits)?, n)
    }
}

/// `λ = e^{2πiθ}`, stored only through its angle so `|λ| = 1` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnimodularPoint {
    pub angle: Angle,
}

impl UnimodularPoint {
    pub fn new(angle: Angle) -> Self {
        UnimodularPoint { angle }
    }

    pub fn one() -> Self {
        UnimodularPoint::new(Angle::zero())
    }

    pub fn from_turn(num: u64, den: u64) -> Self {
        UnimodularPoint::new(Angle::exact(num, den))
    }

    pub fn conj(&self) -> Self {
        UnimodularPoint::new(self.angle.neg())
    }

    pub fn mul(&self, o: &UnimodularPoint) -> Self {
        UnimodularPoint::new(self.angle.add(&o.angle))
    }

    pub fn pow(&self, n: &BigUint) -> Result<Self> {
        Ok(UnimodularPoint::new(angle_pow(&self.angle, n)?))
    }

    /// Cartesian value at `p` bits.
    pub fn to_complex(&self, p: usize) -> Complex {
        let (n, d) = self.angle.fraction();
        hp::cis_turn(&n.into(), &d, p)
    }
}

fn out_prec(a: &Angle) -> usize {
    a.bits().unwrap_or(0).max(DEFAULT_BITS)
}

fn chord_angle(a: &Angle, p: usize) -> Real {
    let (n, d) = a.fraction();
    chord_turn(&n.into(), &d, p)
}

/// `|λ − μ| = 2|sin(π(θ_λ − θ_μ))|`.
pub fn chord(l: &UnimodularPoint, m: &UnimodularPoint) -> Real {
    let d = l.angle.sub(&m.angle);
    chord_angle(&d, out_prec(&d))
}

/// `|λ^n − 1|`.
pub fn dist_one_pow(l: &UnimodularPoint, n: &BigUint) -> Result<Real> {
    let a = angle_pow(&l.angle, n)?;
    Ok(chord_angle(&a, out_prec(&a)))
}

/// Truncated pseudometric `max_k |λ^{n_k} − μ^{n_k}|` over the given terms.
/// This is a lower bound for the supremum over the full sequence.
pub fn d_trunc(l: &UnimodularPoint, m: &UnimodularPoint, terms: &[BigUint]) -> Result<Real> {
    if terms.is_empty() {
        return Err(Error::InvalidSpec("empty prefix".into()));
    }
    let d = l.angle.sub(&m.angle);
    let p = out_prec(&d);
    let mut best = Real::zero(p);
    for n in terms {
        let c = chord_angle(&angle_pow(&d, n)?, p);
        if c > best {
            best = c;
        }
    }
    Ok(best)
}

/// Double-precision `max_k |λ^{n_k} − 1|` for an exact angle.
pub fn d_trunc_one_f64(t: &Turn, terms: &[BigUint]) -> f64 {
    terms
        .iter()
        .map(|n| {
            let r = (&t.num * (n % &t.den)) % &t.den;
            chord_turn_f64(&r, &t.den)
        })
        .fold(0.0, f64::max)
}

/// Grid parameters for [`jamison_scan`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// The coarse lattice has `2^coarse_bits` cells on `(0, 1/2]`.
    pub coarse_bits: usize,
    /// Number of best points kept per round.
    pub keep: usize,
    /// Minimum number of refinement rounds.
    pub rounds: usize,
    /// Each round divides the spacing by `2^factor_bits`.
    pub factor_bits: usize,
    /// Rounds are extended until the lattice resolves `2·n_K`, up to this cap.
    pub max_rounds: usize,
    /// Smallest admissible angle as `(num, den)`; defaults to `1/(2 n_K)`,
    /// below which `λ^{n_k}` cannot leave the arc near `1` for any `k`.
    pub floor: Option<(String, String)>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            coarse_bits: 16,
            keep: 16,
            rounds: 3,
            factor_bits: 6,
            max_rounds: 512,
            floor: None,
        }
    }
}

/// Result of [`jamison_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    /// Estimated `inf_θ max_k |λ^{n_k} − 1|` (an upper bound for it).
    pub estimate: f64,
    /// The same value evaluated at high precision.
    pub estimate_hp: String,
    pub argmin_num: String,
    pub argmin_den: String,
    pub argmin_f64: f64,
    /// `|λ^{n_k} − 1|` at the minimizer, one entry per term.
    pub profile: Vec<f64>,
    /// Best value after each round; nonincreasing.
    pub history: Vec<f64>,
    pub rounds: usize,
    pub lattice_bits: usize,
    pub evaluations: u64,
    pub floor_num: String,
    pub floor_den: String,
}

struct Lattice {
    bits: usize,
    residues: Vec<BigUint>,
    small: Option<Vec<u128>>,
}

impl Lattice {
    fn new(bits: usize, terms: &[BigUint]) -> Self {
        let mask = (BigUint::one() << bits) - 1u32;
        let residues: Vec<BigUint> = terms.iter().map(|n| n & &mask).collect();
        let small = if bits <= 63 {
            Some(residues.iter().map(|r| r.to_u128().unwrap()).collect())
        } else {
            None
        };
        Lattice {
            bits,
            residues,
            small,
        }
    }

    fn eval(&self, j: &BigUint) -> f64 {
        if let Some(rs) = &self.small {
            let g = 1u128 << self.bits;
            let jj = j.to_u128().unwrap();
            let scale = 1.0 / g as f64;
            return rs
                .iter()
                .map(|r| {
                    let x = (r * jj) & (g - 1);
                    let c = if x > g / 2 { g - x } else { x };
                    2.0 * (std::f64::consts::PI * (c as f64 * scale)).sin()
                })
                .fold(0.0, f64::max);
        }
        let g = BigUint::one() << self.bits;
        let mask = &g - 1u32;
        self.residues
            .iter()
            .map(|r| chord_turn_f64(&((r * j) & &mask), &g))
            .fold(0.0, f64::max)
    }
}

fn rank(a: &(f64, BigUint), b: &(f64, BigUint)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

/// Estimates `inf_{θ ∈ [floor, 1/2]} max_k |e^{2πi n_k θ} − 1|` by a coarse
/// lattice scan followed by local refinement around the best points.
/// The result is deterministic and independent of the thread count.
pub fn jamison_scan(terms: &[BigUint], cfg: &ScanConfig) -> Result<ScanReport> {
    if terms.is_empty() {
        return Err(Error::InvalidSpec("empty prefix".into()));
    }
    if cfg.keep == 0 || cfg.factor_bits == 0 || cfg.coarse_bits == 0 {
        return Err(Error::InvalidSpec("scan config fields must be positive".into()));
    }
    let n_max = terms.iter().max().unwrap();
    let floor = match &cfg.floor {
        Some((n, d)) => {
            let n: BigUint = n
                .parse()
                .map_err(|_| Error::InvalidSpec("bad floor numerator".into()))?;
            let d: BigUint = d
                .parse()
                .map_err(|_| Error::InvalidSpec("bad floor denominator".into()))?;
            if d.is_zero() {
                return Err(Error::InvalidSpec("zero floor denominator".into()));
            }
            Turn::new(n, d)
        }
        None => Turn::new(BigUint::one(), n_max << 1usize),
    };
    let half = Turn::from_u64(1, 2);
    if floor > half {
        return Err(Error::InvalidSpec("floor above 1/2".into()));
    }
    // The finest lattice must resolve one oscillation of the largest power.
    let need_bits = hp::bitlen(&(n_max << 1usize));
    let base_bits = cfg.coarse_bits + 1;
    let mut rounds = cfg.rounds;
    while base_bits + rounds * cfg.factor_bits < need_bits {
        rounds += 1;
    }
    if rounds > cfg.max_rounds {
        return Err(Error::GridTooCoarse(format!(
            "{rounds} rounds needed to resolve 2·n_K, cap is {}",
            cfg.max_rounds
        )));
    }

    let lo_index = |bits: usize| -> BigUint {
        let f = floor.floor_dyadic(bits);
        let exact = &f * floor.den() == (floor.num() << bits);
        let lo = if exact { f } else { f + 1u32 };
        if lo.is_zero() {
            BigUint::one()
        } else {
            lo
        }
    };

    let mut evaluations = 0u64;
    let mut history = Vec::with_capacity(rounds + 1);

    let mut bits = base_bits;
    let lat = Lattice::new(bits, terms);
    let lo = lo_index(bits).to_u64().unwrap_or(u64::MAX);
    let hi = 1u64 << (bits - 1);
    let mut best: Vec<(f64, BigUint)> = if lo > hi {
        Vec::new()
    } else {
        (lo..=hi)
            .into_par_iter()
            .map(|j| {
                let j = BigUint::from(j);
                (lat.eval(&j), j)
            })
            .collect()
    };
    if best.is_empty() {
        return Err(Error::GridTooCoarse("no lattice point above the floor".into()));
    }
    evaluations += best.len() as u64;
    best.sort_by(rank);
    best.truncate(cfg.keep);
    history.push(best[0].0);

    let width = 1i64 << cfg.factor_bits;
    for _ in 0..rounds {
        bits += cfg.factor_bits;
        let lat = Lattice::new(bits, terms);
        let lo = lo_index(bits);
        let hi = BigUint::one() << (bits - 1);
        let mut cand: Vec<BigUint> = Vec::new();
        for (_, c) in &best {
            let centre = c << cfg.factor_bits;
            for i in -width..=width {
                let j = if i < 0 {
                    let d = BigUint::from((-i) as u64);
                    if d > centre {
                        continue;
                    }
                    &centre - d
                } else {
                    &centre + BigUint::from(i as u64)
                };
                if j < lo || j > hi {
                    continue;
                }
                cand.push(j);
            }
        }
        cand.sort();
        cand.dedup();
        let mut scored: Vec<(f64, BigUint)> = cand
            .into_par_iter()
            .map(|j| (lat.eval(&j), j))
            .collect();
        evaluations += scored.len() as u64;
        scored.sort_by(rank);
        scored.truncate(cfg.keep);
        best = scored;
        history.push(best[0].0);
    }

    let (est, j) = best[0].clone();
    let den = BigUint::one() << bits;
    let arg = Turn::new(j, den);
    let p = DEFAULT_BITS;
    let mut profile = Vec::with_capacity(terms.len());
    let mut hp_best = Real::zero(p);
    for n in terms {
        let t = arg.pow(n);
        let c = chord_turn(&t.num.clone().into(), &t.den, p);
        profile.push(c.to_f64());
        if c > hp_best {
            hp_best = c;
        }
    }
    Ok(ScanReport {
        estimate: est,
        estimate_hp: hp_best.to_sci(20),
        argmin_num: arg.num.to_string(),
        argmin_den: arg.den.to_string(),
        argmin_f64: arg.to_f64(),
        profile,
        history,
        rounds,
        lattice_bits: bits,
        evaluations,
        floor_num: floor.num.to_string(),
        floor_den: floor.den.to_string(),
    })
}

/// JSON form of an angle: exact rationals as `{"num","den"}`, fixed-point as
/// a hexadecimal mantissa with binary exponent and error in ulps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleJson {
    Exact {
        num: String,
        den: String,
    },
    Fixed {
        mant_hex: String,
        exp: i64,
        err_ulps: String,
    },
}

impl From<&Angle> for AngleJson {
    fn from(a: &Angle) -> Self {
        match a {
            Angle::Exact(t) => AngleJson::Exact {
                num: t.num.to_string(),
                den: t.den.to_string(),
            },
            Angle::Fixed(f) => AngleJson::Fixed {
                mant_hex: f.mant.to_str_radix(16),
                exp: -(f.bits as i64),
                err_ulps: f.err_ulps.to_string(),
            },
        }
    }
}

impl TryFrom<&AngleJson> for Angle {
    type Error = Error;

    fn try_from(j: &AngleJson) -> Result<Angle> {
        let bad = |w: &str| Error::InvalidSpec(format!("bad angle field {w}"));
        match j {
            AngleJson::Exact { num, den } => {
                let n: BigUint = num.parse().map_err(|_| bad("num"))?;
                let d: BigUint = den.parse().map_err(|_| bad("den"))?;
                if d.is_zero() {
                    return Err(bad("den"));
                }
                Ok(Angle::Exact(Turn::new(n, d)))
            }
            AngleJson::Fixed {
                mant_hex,
                exp,
                err_ulps,
            } => {
                let m = BigUint::parse_bytes(mant_hex.as_bytes(), 16).ok_or_else(|| bad("mant_hex"))?;
                let e: BigUint = err_ulps.parse().map_err(|_| bad("err_ulps"))?;
                if *exp > 0 || e > BigUint::from(256u32) {
                    return Err(bad("exp"));
                }
                Ok(Angle::Fixed(Fixed::new(m, (-exp) as usize, e)))
            }
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AngleJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = AngleJson::deserialize(d)?;
        Angle::try_from(&j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renormalize_keeps_bound() {
        let f = Fixed {
            mant: BigUint::from(0xFFFF_FFFFu64),
            bits: 64,
            err_ulps: BigUint::from(100_000u32),
        }
        .renormalize();
        assert!(f.err_ulps <= BigUint::from(255u32));
        assert!(f.bits < 64);
    }

    #[test]
    fn turn_sub_wraps() {
        let a = Turn::from_u64(1, 4);
        let b = Turn::from_u64(1, 2);
        assert_eq!(a.sub(&b), Turn::from_u64(3, 4));
    }
}
