//! Multi-precision real and complex scalars backed by `astro-float`.
//!
//! Values carry their own working precision; binary operations run at the
//! larger of the two. The exponent range is that of `astro-float` (32-bit),
//! which comfortably holds magnitudes such as `2^-100000` that `f64` cannot.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign, Word};
use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Rounding mode used for every operation.
pub const RM: RoundingMode = RoundingMode::ToEven;

/// Default working precision in bits.
pub const DEFAULT_BITS: usize = 256;

/// Hard cap on working precision in bits.
pub const MAX_BITS: usize = 1 << 22;

const WORD_BITS: usize = Word::BITS as usize;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// A real number with an attached working precision.
#[derive(Clone)]
pub struct Real {
    v: BigFloat,
    p: usize,
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({})", self.to_sci(20))
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sci(20))
    }
}

impl Real {
    fn wrap(v: BigFloat, p: usize) -> Self {
        Real { v, p }
    }

    pub fn zero(p: usize) -> Self {
        Real::wrap(BigFloat::from_word(0, p), p)
    }

    pub fn one(p: usize) -> Self {
        Real::wrap(BigFloat::from_word(1, p), p)
    }

    pub fn from_u64(x: u64, p: usize) -> Self {
        Real::wrap(BigFloat::from_u64(x, p), p)
    }

    pub fn from_i64(x: i64, p: usize) -> Self {
        Real::wrap(BigFloat::from_i64(x, p), p)
    }

    pub fn from_f64(x: f64, p: usize) -> Self {
        Real::wrap(BigFloat::from_f64(x, p), p)
    }

    /// Rounds `m` to `p` bits (plus a word of guard) and returns it as a real.
    pub fn from_biguint(m: &BigUint, p: usize) -> Self {
        if m.is_zero() {
            return Real::zero(p);
        }
        let bits = m.bits() as usize;
        let keep = p + 2 * WORD_BITS;
        let (top, shift) = if bits > keep {
            (m >> (bits - keep), bits - keep)
        } else {
            (m.clone(), 0)
        };
        let words = top.to_u64_digits();
        let e = (words.len() * WORD_BITS + shift) as i64;
        let v = BigFloat::from_words(&words, Sign::Pos, e as i32);
        let mut r = Real::wrap(v, p);
        r.round_to(p);
        r
    }

    pub fn from_bigint(m: &BigInt, p: usize) -> Self {
        let r = Real::from_biguint(m.magnitude(), p);
        if m.sign() == BigSign::Minus {
            -r
        } else {
            r
        }
    }

    /// `num / den` rounded to `p` bits. Only the leading bits of each operand
    /// are used, so huge operands are cheap.
    pub fn from_ratio(num: &BigInt, den: &BigUint, p: usize) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let q = p + WORD_BITS;
        Real::from_bigint(num, q).div(&Real::from_biguint(den, q)).rounded(p)
    }

    pub fn from_rational(x: &BigRational, p: usize) -> Self {
        Real::from_ratio(x.numer(), x.denom().magnitude(), p)
    }

    /// Parses a decimal string such as `"1.25e-3"`.
    pub fn parse(s: &str, p: usize) -> Option<Self> {
        let v = with_consts(|cc| BigFloat::parse(s, Radix::Dec, p, RM, cc));
        if v.is_nan() {
            None
        } else {
            Some(Real::wrap(v, p))
        }
    }

    pub fn pi(p: usize) -> Self {
        Real::wrap(with_consts(|cc| cc.pi(p, RM)), p)
    }

    pub fn prec(&self) -> usize {
        self.p
    }

    fn round_to(&mut self, p: usize) {
        if !self.v.is_zero() {
            let _ = self.v.set_precision(p, RM);
        }
        self.p = p;
    }

    /// Returns a copy rounded to `p` bits.
    pub fn rounded(&self, p: usize) -> Self {
        let mut r = self.clone();
        r.round_to(p);
        r
    }

    /// Same value, with the working precision for later operations set to `p`
    /// (rounding if `p` is smaller).
    pub fn with_prec(&self, p: usize) -> Self {
        if p < self.p {
            self.rounded(p)
        } else {
            Real::wrap(self.v.clone(), p)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.v.is_negative() && !self.v.is_zero()
    }

    pub fn abs(&self) -> Self {
        Real::wrap(self.v.abs(), self.p)
    }

    pub fn sqrt(&self) -> Self {
        Real::wrap(self.v.sqrt(self.p, RM), self.p)
    }

    pub fn sin(&self) -> Self {
        let v = with_consts(|cc| self.v.sin(self.p, RM, cc));
        Real::wrap(v, self.p)
    }

    pub fn cos(&self) -> Self {
        let v = with_consts(|cc| self.v.cos(self.p, RM, cc));
        Real::wrap(v, self.p)
    }

    pub fn asin(&self) -> Self {
        let v = with_consts(|cc| self.v.asin(self.p, RM, cc));
        Real::wrap(v, self.p)
    }

    pub fn ln(&self) -> Self {
        let v = with_consts(|cc| self.v.ln(self.p, RM, cc));
        Real::wrap(v, self.p)
    }

    pub fn powi(&self, n: usize) -> Self {
        Real::wrap(self.v.powi(n, self.p, RM), self.p)
    }

    pub fn recip(&self) -> Self {
        Real::wrap(self.v.reciprocal(self.p, RM), self.p)
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn floor(&self) -> Self {
        Real::wrap(self.v.floor(), self.p)
    }

    /// Exact multiplication by `2^k`.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.v.is_zero() {
            return self.clone();
        }
        let e = self.v.exponent().expect("finite value") as i64 + k;
        let mut v = self.v.clone();
        v.set_exponent(e as i32);
        Real::wrap(v, self.p)
    }

    pub fn max(&self, o: &Real) -> Real {
        if self >= o {
            self.clone()
        } else {
            o.clone()
        }
    }

    pub fn min(&self, o: &Real) -> Real {
        if self <= o {
            self.clone()
        } else {
            o.clone()
        }
    }

    /// Binary exponent `e` with `|x| = m·2^e`, `m ∈ [1/2, 1)`.
    pub fn exponent(&self) -> Option<i64> {
        if self.v.is_zero() {
            None
        } else {
            self.v.exponent().map(|e| e as i64)
        }
    }

    fn top_fraction(&self) -> f64 {
        let (m, _, _, _, _) = self.v.as_raw_parts().expect("finite value");
        let top = *m.last().expect("nonempty mantissa");
        top as f64 / 18446744073709551616.0
    }

    /// Approximate `log2 |x|`; `-inf` for zero. Valid far outside `f64` range.
    pub fn log2_abs(&self) -> f64 {
        match self.exponent() {
            None => f64::NEG_INFINITY,
            Some(e) => e as f64 + self.top_fraction().log2(),
        }
    }

    /// Nearest `f64`, saturating to `±inf` and flushing tiny values to zero.
    pub fn to_f64(&self) -> f64 {
        let Some(e) = self.exponent() else {
            return 0.0;
        };
        let sign = if self.is_negative() { -1.0 } else { 1.0 };
        if e > 1025 {
            return sign * f64::INFINITY;
        }
        if e < -1100 {
            return 0.0;
        }
        sign * ldexp(self.top_fraction(), e)
    }

    /// An `f64` that is `≥ |x|` (upward rounding), never flushing a nonzero
    /// value to zero.
    pub fn to_f64_up(&self) -> f64 {
        let Some(e) = self.exponent() else {
            return 0.0;
        };
        if e > 1024 {
            return f64::INFINITY;
        }
        if e < -1070 {
            return f64::from_bits(1);
        }
        let x = ldexp(self.top_fraction(), e).abs();
        // the top word is truncated and the conversion may round down once
        next_up(next_up(x))
    }

    /// Exact dyadic decomposition `(m, e)` with `x = m·2^e`.
    pub fn to_dyadic(&self) -> (BigInt, i64) {
        if self.v.is_zero() {
            return (BigInt::zero(), 0);
        }
        let (words, _, sign, e, _) = self.v.as_raw_parts().expect("finite value");
        let m = BigUint::from_slice(
            &words
                .iter()
                .flat_map(|w| [*w as u32, (*w >> 32) as u32])
                .collect::<Vec<_>>(),
        );
        let shift = e as i64 - (words.len() * WORD_BITS) as i64;
        let m = if sign == Sign::Neg {
            -BigInt::from(m)
        } else {
            BigInt::from(m)
        };
        (m, shift)
    }

    /// Exact rational value.
    pub fn to_rational(&self) -> BigRational {
        let (m, e) = self.to_dyadic();
        if e >= 0 {
            BigRational::from_integer(m << (e as usize))
        } else {
            BigRational::new(m, BigInt::one() << ((-e) as usize))
        }
    }

    /// Scientific decimal string with about `digits` significant digits.
    pub fn to_sci(&self, digits: usize) -> String {
        if self.v.is_zero() {
            return "0".to_string();
        }
        let bits = ((digits as f64) * std::f64::consts::LOG2_10).ceil() as usize;
        let mut r = self.v.clone();
        let _ = r.set_precision(bits.max(WORD_BITS), RM);
        let s = with_consts(|cc| r.format(Radix::Dec, RM, cc)).expect("formatting");
        trim_sci(&s, digits)
    }
}

fn trim_sci(s: &str, digits: usize) -> String {
    let (mant, exp) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant),
    };
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    let mut count = 0;
    for ch in mant.chars() {
        if ch.is_ascii_digit() {
            if count >= digits {
                break;
            }
            count += 1;
        }
        out.push(ch);
    }
    while out.contains('.') && (out.ends_with('0') || out.ends_with('.')) {
        let dot = out.ends_with('.');
        out.pop();
        if dot {
            break;
        }
    }
    out.push_str(exp);
    out
}

/// `x·2^e` in `f64`, handling exponents beyond the `powi` range.
pub fn ldexp(x: f64, e: i64) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let b = x.to_bits();
    if x > 0.0 {
        f64::from_bits(b + 1)
    } else {
        f64::from_bits(b - 1)
    }
}

/// `num/den` as an `f64` without overflowing on huge operands.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    let shift = 64 - nb + db;
    let q = if shift >= 0 {
        (num << (shift as usize)) / den
    } else {
        (num >> ((-shift) as usize)) / den
    };
    ldexp(q.to_f64().unwrap_or(f64::INFINITY), -shift)
}

impl PartialEq for Real {
    fn eq(&self, o: &Self) -> bool {
        self.v.cmp(&o.v) == Some(0)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        self.v.cmp(&o.v).map(|c| c.cmp(&0))
    }
}

macro_rules! real_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<&Real> for &Real {
            type Output = Real;
            fn $m(self, o: &Real) -> Real {
                let p = self.p.max(o.p);
                Real::wrap(self.v.$m(&o.v, p, RM), p)
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $m(self, o: Real) -> Real {
                (&self).$m(&o)
            }
        }
        impl $tr<&Real> for Real {
            type Output = Real;
            fn $m(self, o: &Real) -> Real {
                (&self).$m(o)
            }
        }
        impl $tr<Real> for &Real {
            type Output = Real;
            fn $m(self, o: Real) -> Real {
                self.$m(&o)
            }
        }
    };
}

real_binop!(Add, add);
real_binop!(Sub, sub);
real_binop!(Mul, mul);
real_binop!(Div, div);

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real::wrap(BigFloat::neg(&self.v), self.p)
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real::wrap(BigFloat::neg(&self.v), self.p)
    }
}

// ---------------------------------------------------------------------------
// Complex
// ---------------------------------------------------------------------------

/// A complex number `re + i·im` over [`Real`].
#[derive(Clone, Debug, PartialEq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Self {
        Complex { re, im }
    }

    pub fn zero(p: usize) -> Self {
        Complex::new(Real::zero(p), Real::zero(p))
    }

    pub fn one(p: usize) -> Self {
        Complex::new(Real::one(p), Real::zero(p))
    }

    pub fn i(p: usize) -> Self {
        Complex::new(Real::zero(p), Real::one(p))
    }

    pub fn from_real(re: Real) -> Self {
        let p = re.prec();
        Complex::new(re, Real::zero(p))
    }

    pub fn from_f64(re: f64, im: f64, p: usize) -> Self {
        Complex::new(Real::from_f64(re, p), Real::from_f64(im, p))
    }

    pub fn prec(&self) -> usize {
        self.re.prec().max(self.im.prec())
    }

    pub fn with_prec(&self, p: usize) -> Self {
        Complex::new(self.re.with_prec(p), self.im.with_prec(p))
    }

    pub fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -&self.im)
    }

    pub fn norm_sqr(&self) -> Real {
        self.re.square() + self.im.square()
    }

    pub fn abs(&self) -> Real {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: &Real) -> Self {
        Complex::new(&self.re * s, &self.im * s)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn recip(&self) -> Self {
        let d = self.norm_sqr();
        Complex::new(&self.re / &d, -(&self.im / &d))
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

impl Add<&Complex> for &Complex {
    type Output = Complex;
    fn add(self, o: &Complex) -> Complex {
        Complex::new(&self.re + &o.re, &self.im + &o.im)
    }
}

impl Sub<&Complex> for &Complex {
    type Output = Complex;
    fn sub(self, o: &Complex) -> Complex {
        Complex::new(&self.re - &o.re, &self.im - &o.im)
    }
}

impl Mul<&Complex> for &Complex {
    type Output = Complex;
    fn mul(self, o: &Complex) -> Complex {
        Complex::new(
            &self.re * &o.re - &self.im * &o.im,
            &self.re * &o.im + &self.im * &o.re,
        )
    }
}

impl Div<&Complex> for &Complex {
    type Output = Complex;
    fn div(self, o: &Complex) -> Complex {
        let d = o.norm_sqr();
        Complex::new(
            (&self.re * &o.re + &self.im * &o.im) / &d,
            (&self.im * &o.re - &self.re * &o.im) / &d,
        )
    }
}

macro_rules! complex_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Complex> for Complex {
            type Output = Complex;
            fn $m(self, o: Complex) -> Complex {
                (&self).$m(&o)
            }
        }
        impl $tr<&Complex> for Complex {
            type Output = Complex;
            fn $m(self, o: &Complex) -> Complex {
                (&self).$m(o)
            }
        }
        impl $tr<Complex> for &Complex {
            type Output = Complex;
            fn $m(self, o: Complex) -> Complex {
                self.$m(&o)
            }
        }
    };
}

complex_owned!(Add, add);
complex_owned!(Sub, sub);
complex_owned!(Mul, mul);
complex_owned!(Div, div);

impl Neg for &Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex::new(-&self.re, -&self.im)
    }
}

impl Neg for Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        -&self
    }
}

// ---------------------------------------------------------------------------
// Angles measured in turns
// ---------------------------------------------------------------------------

/// Reduces `num/den` modulo 1 into `(-1/2, 1/2]` and returns the centred
/// numerator.
pub fn centre_turn(num: &BigInt, den: &BigUint) -> BigInt {
    let d = BigInt::from(den.clone());
    let mut r = num % &d;
    if r.is_negative() {
        r += &d;
    }
    if (&r << 1usize) > d {
        r -= &d;
    }
    r
}

/// `sin(π·num/den)` and `cos(π·num/den)` for a centred turn fraction, evaluated
/// with a guard word so tiny arguments keep full relative accuracy.
fn half_angle_sin_cos(r: &BigInt, den: &BigUint, p: usize) -> (Real, Real) {
    let q = p + WORD_BITS;
    let x = Real::pi(q) * Real::from_ratio(r, den, q);
    (x.sin().rounded(p), x.cos().rounded(p))
}

/// `e^{2πi·num/den}`.
pub fn cis_turn(num: &BigInt, den: &BigUint, p: usize) -> Complex {
    let r = centre_turn(num, den);
    if r.is_zero() {
        return Complex::one(p);
    }
    let (s, c) = half_angle_sin_cos(&r, den, p);
    let two = Real::from_u64(2, p);
    // cos 2x = 1 - 2 sin^2 x, sin 2x = 2 sin x cos x
    Complex::new(Real::one(p) - &two * &s.square(), &two * &(&s * &c))
}

/// `e^{2πi·num/den} - 1`, accurate relative to its own magnitude.
pub fn expm1_turn(num: &BigInt, den: &BigUint, p: usize) -> Complex {
    let r = centre_turn(num, den);
    if r.is_zero() {
        return Complex::zero(p);
    }
    let (s, c) = half_angle_sin_cos(&r, den, p);
    let two = Real::from_u64(2, p);
    Complex::new(-(&two * &s.square()), &two * &(&s * &c))
}

/// `2|sin(π·num/den)|`, the chord length between `1` and `e^{2πi·num/den}`.
pub fn chord_turn(num: &BigInt, den: &BigUint, p: usize) -> Real {
    let r = centre_turn(num, den);
    if r.is_zero() {
        return Real::zero(p);
    }
    let (s, _) = half_angle_sin_cos(&r, den, p);
    (s * Real::from_u64(2, p)).abs()
}

/// `2|sin(π x)|` in double precision for `x` given as an exact fraction.
pub fn chord_turn_f64(num: &BigUint, den: &BigUint) -> f64 {
    let r = num % den;
    let half = den >> 1usize;
    let c = if r > half { den - &r } else { r };
    2.0 * (std::f64::consts::PI * ratio_to_f64(&c, den)).sin().abs()
}

/// Bits needed to hold `n` (zero for `n = 0`).
pub fn bitlen(n: &BigUint) -> usize {
    n.bits() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_f64() {
        for x in [1.0, -2.5, 1e-300, 3.75e200, 0.1] {
            assert_eq!(Real::from_f64(x, 128).to_f64(), x);
        }
    }

    #[test]
    fn huge_integers_and_ratios() {
        let n = BigUint::one() << 5000usize;
        let r = Real::from_biguint(&n, 128);
        assert_eq!(r.exponent(), Some(5001));
        let q = Real::from_ratio(&BigInt::one(), &n, 128);
        assert!((q.log2_abs() + 5000.0).abs() < 1e-9);
        assert_eq!(q.to_f64(), 0.0);
        assert!(q.to_f64_up() > 0.0);
    }

    #[test]
    fn dyadic_is_exact() {
        let x = Real::from_f64(-0.375, 64);
        assert_eq!(
            x.to_rational(),
            BigRational::new(BigInt::from(-3), BigInt::from(8))
        );
    }

    #[test]
    fn cis_quarter_turn() {
        let z = cis_turn(&BigInt::from(1), &BigUint::from(4u32), 128);
        assert!(z.re.to_f64().abs() < 1e-30);
        assert!((z.im.to_f64() - 1.0).abs() < 1e-30);
    }

    #[test]
    fn expm1_tiny_angle_is_relative() {
        let den = BigUint::one() << 4000usize;
        let z = expm1_turn(&BigInt::one(), &den, 128);
        // ≈ 2πi·2^-4000
        let expect = (2.0 * std::f64::consts::PI).log2() - 4000.0;
        assert!((z.im.log2_abs() - expect).abs() < 1e-12);
        assert!(z.re.log2_abs() < -7990.0);
    }

    #[test]
    fn sci_format() {
        assert_eq!(Real::from_f64(-2.5, 128).to_sci(10), "-2.5e+0");
        assert_eq!(Real::zero(64).to_sci(5), "0");
    }
}
