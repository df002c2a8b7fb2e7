//! Exact continued fractions: expansions of rationals, intervals and
//! quadratic surds, convergent tables, the two-sided convergent
//! approximation inequality, and the splice rule for the Liouville-type
//! numbers `Σ_k m^{-(k+1)!}`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{biguint_vec, RatJson};

/// Largest depth accepted by [`liouville_partial`].
pub const LIOUVILLE_MAX_DEPTH: u32 = 12;

/// Largest depth accepted by [`shallit_expand`].
pub const SHALLIT_MAX_DEPTH: u32 = 6;

/// Bit budget for the denominator `m^{(v+1)!}`.
pub const LIOUVILLE_MAX_BITS: u64 = 1 << 26;

/// Partial quotients `[a_0; a_1, …]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CFExpansion {
    #[serde(with = "biguint_vec")]
    pub a: Vec<BigUint>,
    /// True for the full expansion of a rational; false for a certified
    /// prefix of an irrational.
    pub exact: bool,
}

impl CFExpansion {
    /// Value of the (finite) expansion.
    pub fn value(&self) -> BigRational {
        let t = convergents(self);
        let (p, q) = t.rows.last().expect("nonempty expansion");
        BigRational::new(p.clone().into(), q.clone().into())
    }
}

/// Convergent table `(p_n, q_n)` for `n = 0, …`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvergentTable {
    pub rows: Vec<(BigUint, BigUint)>,
}

impl ConvergentTable {
    pub fn q(&self) -> Vec<BigUint> {
        self.rows.iter().map(|r| r.1.clone()).collect()
    }

    pub fn to_json(&self) -> Vec<RatJson> {
        self.rows.iter().map(|(p, q)| RatJson::from_parts(p, q)).collect()
    }
}

/// Euclid's algorithm on `p/q`; the result never ends in `1` unless it is `[1]`.
pub fn cf_of_rational(p: &BigUint, q: &BigUint) -> CFExpansion {
    assert!(!q.is_zero(), "zero denominator");
    let mut a = Vec::new();
    let (mut x, mut y) = (p.clone(), q.clone());
    while !y.is_zero() {
        let (d, r) = x.div_rem(&y);
        a.push(d);
        x = y;
        y = r;
    }
    CFExpansion { a, exact: true }
}

/// Digits of every real in `[lo, hi]`, emitted only while the whole interval
/// agrees. Stops after `max_depth` digits, or earlier if the interval has
/// collapsed to an exact rational whose expansion ends.
pub fn cf_of_interval(lo: &BigRational, hi: &BigRational, max_depth: usize) -> Result<CFExpansion> {
    if lo > hi || lo.is_negative() {
        return Err(Error::InvalidSpec("interval must satisfy 0 <= lo <= hi".into()));
    }
    let (mut lo, mut hi) = (lo.clone(), hi.clone());
    let mut a = Vec::new();
    while a.len() < max_depth {
        let fl = lo.floor();
        if hi.floor() != fl {
            return Err(Error::InsufficientPrecision(format!(
                "interval straddles an integer after {} digits",
                a.len()
            )));
        }
        a.push(fl.to_integer().to_biguint().expect("nonnegative"));
        let (l, h) = (&lo - &fl, &hi - &fl);
        if l.is_zero() {
            if h.is_zero() {
                return Ok(CFExpansion { a, exact: true });
            }
            return Err(Error::InsufficientPrecision(format!(
                "interval touches a rational after {} digits",
                a.len()
            )));
        }
        lo = h.recip();
        hi = l.recip();
    }
    Ok(CFExpansion { a, exact: false })
}

/// Convergents by the recurrence `p_{n+1} = a_{n+1} p_n + p_{n-1}`.
pub fn convergents(cf: &CFExpansion) -> ConvergentTable {
    let mut rows = Vec::with_capacity(cf.a.len());
    // (p_{n-2}, q_{n-2}) and (p_{n-1}, q_{n-1}), seeded with n = 0.
    let (mut p0, mut q0) = (BigUint::zero(), BigUint::one());
    let (mut p1, mut q1) = (BigUint::one(), BigUint::zero());
    for a in &cf.a {
        let (p, q) = (a * &p1 + &p0, a * &q1 + &q0);
        p0 = std::mem::replace(&mut p1, p.clone());
        q0 = std::mem::replace(&mut q1, q.clone());
        rows.push((p, q));
    }
    ConvergentTable { rows }
}

/// A real number known to lie in `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealInterval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl RealInterval {
    pub fn exact(x: BigRational) -> Self {
        RealInterval { lo: x.clone(), hi: x }
    }

    /// `mant / 2^bits` with an error of `err_ulps` units in the last place.
    pub fn dyadic(mant: &BigUint, bits: usize, err_ulps: u64) -> Self {
        let den = BigInt::one() << bits;
        let m = BigInt::from(mant.clone());
        let e = BigInt::from(err_ulps);
        let lo = BigRational::new(&m - &e, den.clone()).max(BigRational::zero());
        RealInterval {
            lo,
            hi: BigRational::new(m + e, den),
        }
    }

    pub fn radius(&self) -> BigRational {
        (&self.hi - &self.lo) / BigInt::from(2)
    }

    /// Range of `|x − c|` for `x` in the interval.
    fn abs_dist(&self, c: &BigRational) -> (BigRational, BigRational) {
        let a = (&self.lo - c).abs();
        let b = (&self.hi - c).abs();
        let max = a.clone().max(b.clone());
        let min = if &self.lo <= c && c <= &self.hi {
            BigRational::zero()
        } else {
            a.min(b)
        };
        (min, max)
    }
}

/// Outcome of the two-sided approximation check for one convergent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergentBoundRow {
    pub n: usize,
    pub p: String,
    pub q: String,
    /// `1/(2 q_n q_{n+1}) <= |α − p_n/q_n|`.
    pub lower_ok: bool,
    /// `|α − p_n/q_n| < 1/(q_n q_{n+1})`.
    pub upper_ok: bool,
    pub pass: bool,
}

/// Checks `1/(2 q_n q_{n+1}) ≤ |α − p_n/q_n| < 1/(q_n q_{n+1})` for every
/// row with a successor. Verdicts hold for every `α` in the interval.
pub fn check_convergent_bounds(alpha: &RealInterval, table: &ConvergentTable) -> Result<Vec<ConvergentBoundRow>> {
    let rows = &table.rows;
    if rows.len() < 2 {
        return Ok(Vec::new());
    }
    let last = rows.len() - 2;
    let qq = BigInt::from(&rows[last].1 * &rows[last + 1].1);
    if alpha.radius() * BigInt::from(4) * &qq >= BigRational::one() {
        return Err(Error::InsufficientPrecision(
            "error bound not below 1/(4 q_N q_{N+1})".into(),
        ));
    }
    let mut out = Vec::with_capacity(rows.len() - 1);
    for n in 0..=last {
        let (p, q) = &rows[n];
        let q_next = &rows[n + 1].1;
        let c = BigRational::new(p.clone().into(), q.clone().into());
        let (dmin, dmax) = alpha.abs_dist(&c);
        let prod = BigInt::from(q * q_next);
        let upper = BigRational::new(BigInt::one(), prod.clone());
        let lower = BigRational::new(BigInt::one(), prod * 2);
        let lower_ok = decide(dmin >= lower, dmax < lower, n)?;
        let upper_ok = decide(dmax < upper, dmin >= upper, n)?;
        out.push(ConvergentBoundRow {
            n,
            p: p.to_string(),
            q: q.to_string(),
            lower_ok,
            upper_ok,
            pass: lower_ok && upper_ok,
        });
    }
    Ok(out)
}

fn decide(surely_true: bool, surely_false: bool, n: usize) -> Result<bool> {
    if surely_true {
        Ok(true)
    } else if surely_false {
        Ok(false)
    } else {
        Err(Error::InsufficientPrecision(format!(
            "interval too wide to decide row {n}"
        )))
    }
}

/// `Σ_{k=0}^{v} m^{-(k+1)!}` as an exact rational.
pub fn liouville_partial(m: u64, v: u32) -> Result<BigRational> {
    if m < 2 {
        return Err(Error::InvalidSpec("m must be at least 2".into()));
    }
    if v > LIOUVILLE_MAX_DEPTH {
        return Err(Error::DepthTooLarge(format!(
            "depth {v} above {LIOUVILLE_MAX_DEPTH}"
        )));
    }
    let f: u64 = (1..=(v as u64 + 1)).product();
    let bits = f.saturating_mul(64 - (m - 1).leading_zeros() as u64);
    if bits > LIOUVILLE_MAX_BITS {
        return Err(Error::DepthTooLarge(format!(
            "denominator m^{f} exceeds the {LIOUVILLE_MAX_BITS}-bit budget"
        )));
    }
    let mb = BigUint::from(m);
    let den = mb.pow(f as u32);
    let mut num = BigUint::zero();
    let mut fact = 1u64;
    for k in 0..=v as u64 {
        fact *= k + 1;
        num += mb.pow((f - fact) as u32);
    }
    Ok(BigRational::new(num.into(), den.into()))
}

/// Replaces every interior `…, a, 0, b, …` by `…, a + b, …`.
pub fn collapse_zeros(a: &mut Vec<BigUint>) {
    let mut i = 1;
    while i + 1 < a.len() {
        if a[i].is_zero() {
            let b = a.remove(i + 1);
            a.remove(i);
            a[i - 1] += b;
            i = i.saturating_sub(1).max(1);
        } else {
            i += 1;
        }
    }
}

/// Rewrites a trailing `…, a, 1` as `…, a + 1`.
pub fn canonicalize(a: &mut Vec<BigUint>) {
    if a.len() >= 2 && a.last().map_or(false, |x| x.is_one()) {
        a.pop();
        *a.last_mut().unwrap() += 1u32;
    }
}

/// Expansion of [`liouville_partial`] built by the splice rule
/// `[a_0, …, a_N, m^{v(v+1)!} − 1, 1, a_N − 1, a_{N−1}, …, a_1]`, then
/// checked against Euclid's algorithm.
pub fn shallit_expand(m: u64, v: u32) -> Result<CFExpansion> {
    if m < 2 {
        return Err(Error::InvalidSpec("m must be at least 2".into()));
    }
    if v > SHALLIT_MAX_DEPTH {
        return Err(Error::DepthTooLarge(format!("depth {v} above {SHALLIT_MAX_DEPTH}")));
    }
    let mb = BigUint::from(m);
    // Non-canonical seed [0; m−1, 1] = 1/m, kept with its trailing 1 so the
    // splice applies uniformly.
    let mut tail: Vec<BigUint> = vec![&mb - 1u32, BigUint::one()];
    let mut fact = 1u64; // (w+1)! for the current depth w
    for w in 0..v as u64 {
        fact *= w + 1;
        let big = mb.pow((w * fact) as u32) - 1u32;
        let n = tail.len();
        let mut next = tail.clone();
        next.push(big);
        next.push(BigUint::one());
        let last = tail[n - 1].clone();
        if last.is_zero() {
            return Err(Error::PatternMismatch("zero partial quotient before splice".into()));
        }
        next.push(last - 1u32);
        for i in (0..n - 1).rev() {
            next.push(tail[i].clone());
        }
        collapse_zeros(&mut next);
        tail = next;
    }
    let mut a = vec![BigUint::zero()];
    a.extend(tail);
    collapse_zeros(&mut a);
    canonicalize(&mut a);
    let x = liouville_partial(m, v)?;
    let euclid = cf_of_rational(
        &x.numer().to_biguint().unwrap(),
        &x.denom().to_biguint().unwrap(),
    );
    if euclid.a != a {
        return Err(Error::PatternMismatch(format!(
            "splice gives {} quotients, Euclid gives {}",
            a.len(),
            euclid.a.len()
        )));
    }
    Ok(CFExpansion { a, exact: true })
}

/// Periodic expansion of the quadratic surd `(p + √d)/q` with `q > 0` and
/// `d` not a perfect square.
pub fn cf_of_surd(p: i64, d: u64, q: i64, depth: usize) -> Result<CFExpansion> {
    if q <= 0 {
        return Err(Error::InvalidSpec("surd denominator must be positive".into()));
    }
    let dd = BigInt::from(d);
    let s = BigUint::from(d).sqrt();
    if &s * &s == BigUint::from(d) {
        return Err(Error::InvalidSpec("d must not be a perfect square".into()));
    }
    let (mut p, mut q, mut dd) = (BigInt::from(p), BigInt::from(q), dd);
    // Ensure q | d − p² by scaling numerator and denominator by |q|.
    if !(&dd - &p * &p).is_multiple_of(&q) {
        dd = dd * &q * &q;
        p = p * &q;
        q = &q * &q;
    }
    let s = BigInt::from(dd.to_biguint().unwrap().sqrt());
    let mut a = Vec::with_capacity(depth);
    for i in 0..depth {
        let x = (&p + &s).div_floor(&q);
        if x.is_negative() {
            return Err(Error::InvalidSpec("surd must be nonnegative".into()));
        }
        if i > 0 && x.is_zero() {
            return Err(Error::InvalidSpec("degenerate surd expansion".into()));
        }
        a.push(x.to_biguint().unwrap());
        p = &x * &q - &p;
        q = (&dd - &p * &p) / &q;
    }
    Ok(CFExpansion { a, exact: false })
}

/// Checks `|p_n q_{n+1} − p_{n+1} q_n| = 1` for every consecutive pair.
pub fn determinant_ok(t: &ConvergentTable) -> bool {
    t.rows.windows(2).all(|w| {
        let a = BigInt::from(&w[0].0 * &w[1].1);
        let b = BigInt::from(&w[1].0 * &w[0].1);
        (a - b).abs().is_one()
    })
}

/// Largest `q_{n+1}/q_n` over the table, as a float.
pub fn max_q_ratio(t: &ConvergentTable) -> f64 {
    t.rows
        .windows(2)
        .map(|w| crate::hp::ratio_to_f64(&w[1].1, &w[0].1))
        .fold(0.0, f64::max)
}
