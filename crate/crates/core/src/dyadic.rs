//! Exact dyadic numbers and the scalar abstraction shared by exact and float signals.
//!
//! [`Dyadic`] is `mantissa · 2^exponent` with a canonical odd mantissa. L²-normalized
//! Haar functions take values `±2^{-e/2}`, which is irrational for odd `e`, so exact
//! signals use [`RootDyadic`], the ring of numbers `a + b·√2` with dyadic `a`, `b`.
//! Squares of Haar coefficients and every inner product of dyadic signals land back in
//! the dyadic part.
//!
//! Mantissas are `i128`. Arithmetic panics with a clear message if a mantissa would
//! overflow, which needs exponent spreads far beyond any grid this crate accepts.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use crate::error::Error;

/// Exact `mantissa · 2^exponent`, kept canonical (odd mantissa, or zero with exponent 0).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dyadic {
    mantissa: i128,
    exponent: i32,
}

fn shl_checked(m: i128, s: u32) -> i128 {
    if m == 0 {
        return 0;
    }
    let headroom = if m > 0 { m.leading_zeros() } else { (!m).leading_zeros() };
    assert!(s < headroom, "dyadic mantissa overflow (shift by {s})");
    m << s
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { mantissa: 0, exponent: 0 };
    pub const ONE: Dyadic = Dyadic { mantissa: 1, exponent: 0 };

    pub fn new(mantissa: i128, exponent: i32) -> Self {
        if mantissa == 0 {
            return Self::ZERO;
        }
        let tz = mantissa.trailing_zeros();
        Dyadic { mantissa: mantissa >> tz, exponent: exponent + tz as i32 }
    }

    pub fn from_int(n: i64) -> Self {
        Self::new(n as i128, 0)
    }

    /// `2^e`.
    pub fn pow2(e: i32) -> Self {
        Dyadic { mantissa: 1, exponent: e }
    }

    pub fn mantissa(&self) -> i128 {
        self.mantissa
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0
    }

    pub fn signum(&self) -> i32 {
        self.mantissa.signum() as i32
    }

    pub fn abs(&self) -> Self {
        Dyadic { mantissa: self.mantissa.abs(), exponent: self.exponent }
    }

    pub fn mul_pow2(&self, e: i32) -> Self {
        if self.is_zero() {
            return *self;
        }
        Dyadic { mantissa: self.mantissa, exponent: self.exponent + e }
    }

    /// Exact division by a nonzero integer, if the quotient is dyadic.
    pub fn div_exact(&self, k: i64) -> Option<Self> {
        assert!(k != 0, "division by zero");
        let tz = k.trailing_zeros();
        let odd = (k >> tz) as i128;
        if self.mantissa % odd != 0 {
            return None;
        }
        Some(Dyadic::new(self.mantissa / odd, self.exponent - tz as i32))
    }

    /// Exact midpoint of `self` and `other`.
    pub fn midpoint(&self, other: &Self) -> Self {
        (*self + *other).mul_pow2(-1)
    }

    /// The integer `floor(self)`, when it fits in `i64`.
    pub fn floor(&self) -> i64 {
        if self.exponent >= 0 {
            shl_checked(self.mantissa, self.exponent as u32) as i64
        } else {
            let s = (-self.exponent).min(127) as u32;
            (self.mantissa >> s) as i64
        }
    }

    /// Largest integer `q` with `q·step ≤ self` for a positive `step`.
    pub fn floor_div(&self, step: &Self) -> i64 {
        assert!(step.signum() > 0, "floor_div needs a positive step");
        // self / step = (m1/m2)·2^(e1-e2) with m2 odd.
        let q = *self * Dyadic::pow2(-step.exponent);
        let m2 = step.mantissa;
        if q.exponent >= 0 {
            let num = shl_checked(q.mantissa, q.exponent as u32);
            num.div_euclid(m2) as i64
        } else {
            let den = shl_checked(m2, (-q.exponent) as u32);
            q.mantissa.div_euclid(den) as i64
        }
    }

    pub fn to_f64(&self) -> f64 {
        (self.mantissa as f64) * 2f64.powi(self.exponent)
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other { self } else { other }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other { self } else { other }
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (lo, hi) = if self.exponent <= rhs.exponent { (self, rhs) } else { (rhs, self) };
        let shift = (hi.exponent - lo.exponent) as u32;
        let m = shl_checked(hi.mantissa, shift)
            .checked_add(lo.mantissa)
            .expect("dyadic mantissa overflow in addition");
        Dyadic::new(m, lo.exponent)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        self + (-rhs)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -self.mantissa, exponent: self.exponent }
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        if self.is_zero() || rhs.is_zero() {
            return Dyadic::ZERO;
        }
        let m = self
            .mantissa
            .checked_mul(rhs.mantissa)
            .expect("dyadic mantissa overflow in multiplication");
        // Product of odd mantissas stays odd: already canonical.
        Dyadic { mantissa: m, exponent: self.exponent + rhs.exponent }
    }
}

impl AddAssign for Dyadic {
    fn add_assign(&mut self, rhs: Dyadic) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dyadic {
    fn sub_assign(&mut self, rhs: Dyadic) {
        *self = *self - rhs;
    }
}

impl Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::ZERO, |a, b| a + b)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        (*self - *other).signum().cmp(&0)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for Dyadic {
    fn from(n: i64) -> Self {
        Dyadic::from_int(n)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}·2^{}", self.mantissa, self.exponent)
    }
}

/// Formats as `mantissa e exponent`, the exact token used by the text formats.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} e {}", self.mantissa, self.exponent)
    }
}

impl FromStr for Dyadic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || Error::Parse(format!("bad dyadic token `{s}`"));
        match parts.as_slice() {
            [m] => Ok(Dyadic::new(m.parse().map_err(|_| bad())?, 0)),
            [m, "e", x] => Ok(Dyadic::new(m.parse().map_err(|_| bad())?, x.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

/// Exact `a + b·√2` with dyadic `a`, `b`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RootDyadic {
    pub rational: Dyadic,
    pub surd: Dyadic,
}

impl RootDyadic {
    pub const ZERO: RootDyadic = RootDyadic { rational: Dyadic::ZERO, surd: Dyadic::ZERO };

    pub fn new(rational: Dyadic, surd: Dyadic) -> Self {
        RootDyadic { rational, surd }
    }

    /// The dyadic value, if the `√2` part vanishes.
    pub fn as_dyadic(&self) -> Option<Dyadic> {
        self.surd.is_zero().then_some(self.rational)
    }

    pub fn signum(&self) -> i32 {
        let (sa, sb) = (self.rational.signum(), self.surd.signum());
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        // Opposite signs: compare a² with 2b².
        let a2 = self.rational * self.rational;
        let b2 = (self.surd * self.surd).mul_pow2(1);
        match a2.cmp(&b2) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }
}

impl From<Dyadic> for RootDyadic {
    fn from(d: Dyadic) -> Self {
        RootDyadic { rational: d, surd: Dyadic::ZERO }
    }
}

impl Add for RootDyadic {
    type Output = RootDyadic;
    fn add(self, rhs: RootDyadic) -> RootDyadic {
        RootDyadic { rational: self.rational + rhs.rational, surd: self.surd + rhs.surd }
    }
}

impl Sub for RootDyadic {
    type Output = RootDyadic;
    fn sub(self, rhs: RootDyadic) -> RootDyadic {
        RootDyadic { rational: self.rational - rhs.rational, surd: self.surd - rhs.surd }
    }
}

impl Neg for RootDyadic {
    type Output = RootDyadic;
    fn neg(self) -> RootDyadic {
        RootDyadic { rational: -self.rational, surd: -self.surd }
    }
}

impl Mul for RootDyadic {
    type Output = RootDyadic;
    fn mul(self, rhs: RootDyadic) -> RootDyadic {
        let (a, b, c, d) = (self.rational, self.surd, rhs.rational, rhs.surd);
        if b.is_zero() && d.is_zero() {
            return RootDyadic::from(a * c);
        }
        RootDyadic { rational: a * c + (b * d).mul_pow2(1), surd: a * d + b * c }
    }
}

impl AddAssign for RootDyadic {
    fn add_assign(&mut self, rhs: RootDyadic) {
        *self = *self + rhs;
    }
}

impl SubAssign for RootDyadic {
    fn sub_assign(&mut self, rhs: RootDyadic) {
        *self = *self - rhs;
    }
}

impl fmt::Debug for RootDyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.surd.is_zero() {
            write!(f, "{:?}", self.rational)
        } else {
            write!(f, "{:?} + {:?}·√2", self.rational, self.surd)
        }
    }
}

/// `m e x` for a dyadic value, `m e x + m' e x' r2` when a `√2` part is present.
impl fmt::Display for RootDyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.surd.is_zero() {
            write!(f, "{}", self.rational)
        } else {
            write!(f, "{} + {} r2", self.rational, self.surd)
        }
    }
}

impl FromStr for RootDyadic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.split_once('+') {
            None => Ok(RootDyadic::from(s.trim().parse::<Dyadic>()?)),
            Some((a, b)) => {
                let b = b
                    .trim()
                    .strip_suffix("r2")
                    .ok_or_else(|| Error::Parse(format!("missing `r2` suffix in `{s}`")))?;
                Ok(RootDyadic::new(a.trim().parse()?, b.trim().parse()?))
            }
        }
    }
}

/// Arithmetic needed by signal operators, implemented exactly by [`RootDyadic`] and
/// approximately by `f64`.
pub trait Scalar:
    Copy
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    const EXACT: bool;
    fn zero() -> Self;
    fn from_dyadic(d: Dyadic) -> Self;
    /// `2^{e/2}`.
    fn pow2_half(e: i64) -> Self;
    fn mul_pow2(&self, e: i32) -> Self;
    /// Division by a small integer; `None` if the exact quotient leaves the ring.
    fn div_exact(&self, k: i64) -> Option<Self>;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn parse_value(s: &str) -> Result<Self, Error>;

    fn one() -> Self {
        Self::from_dyadic(Dyadic::ONE)
    }
}

impl Scalar for RootDyadic {
    const EXACT: bool = true;
    fn zero() -> Self {
        RootDyadic::ZERO
    }
    fn from_dyadic(d: Dyadic) -> Self {
        RootDyadic::from(d)
    }
    fn pow2_half(e: i64) -> Self {
        let half = e.div_euclid(2) as i32;
        if e.rem_euclid(2) == 0 {
            RootDyadic::from(Dyadic::pow2(half))
        } else {
            RootDyadic::new(Dyadic::ZERO, Dyadic::pow2(half))
        }
    }
    fn mul_pow2(&self, e: i32) -> Self {
        RootDyadic::new(self.rational.mul_pow2(e), self.surd.mul_pow2(e))
    }
    fn div_exact(&self, k: i64) -> Option<Self> {
        Some(RootDyadic::new(self.rational.div_exact(k)?, self.surd.div_exact(k)?))
    }
    fn to_f64(&self) -> f64 {
        self.rational.to_f64() + self.surd.to_f64() * std::f64::consts::SQRT_2
    }
    fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.surd.is_zero()
    }
    fn parse_value(s: &str) -> Result<Self, Error> {
        s.parse()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn from_dyadic(d: Dyadic) -> Self {
        d.to_f64()
    }
    fn pow2_half(e: i64) -> Self {
        2f64.powf(e as f64 / 2.0)
    }
    fn mul_pow2(&self, e: i32) -> Self {
        self * 2f64.powi(e)
    }
    fn div_exact(&self, k: i64) -> Option<Self> {
        Some(self / k as f64)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn parse_value(s: &str) -> Result<Self, Error> {
        s.trim().parse().map_err(|_| Error::Parse(format!("bad float `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(m: i128, e: i32) -> Dyadic {
        Dyadic::new(m, e)
    }

    #[test]
    fn canonical_form() {
        assert_eq!(d(12, 0), d(3, 2));
        assert_eq!(d(12, 0).mantissa(), 3);
        assert_eq!(d(0, 7), Dyadic::ZERO);
        assert_eq!(Dyadic::ZERO.exponent(), 0);
    }

    #[test]
    fn arithmetic_examples() {
        // 3/4 - 1/4 = 1/2
        assert_eq!(d(3, -2) - d(1, -2), d(1, -1));
        assert_eq!(d(3, -2) * d(5, 1), d(15, -1));
        assert_eq!(d(3, 0).div_exact(3), Some(Dyadic::ONE));
        assert_eq!(d(1, 0).div_exact(3), None);
        assert_eq!(d(6, 0).div_exact(12), Some(d(1, -1)));
    }

    #[test]
    fn floor_and_floor_div() {
        assert_eq!(d(-3, -1).floor(), -2);
        assert_eq!(d(7, -1).floor(), 3);
        assert_eq!(d(7, 0).floor_div(&d(1, 1)), 3);
        assert_eq!(d(-1, 0).floor_div(&d(3, 0)), -1);
        assert_eq!(d(6, 0).floor_div(&d(3, 0)), 2);
        assert_eq!(d(5, -2).floor_div(&d(3, -3)), 3);
    }

    #[test]
    fn text_round_trip() {
        let x = d(-5, -7);
        assert_eq!(x.to_string(), "-5 e -7");
        assert_eq!("-5 e -7".parse::<Dyadic>().unwrap(), x);
        let r = RootDyadic::new(d(3, 1), d(-1, -3));
        assert_eq!(r.to_string().parse::<RootDyadic>().unwrap(), r);
    }

    #[test]
    fn root_half_powers() {
        let s = RootDyadic::pow2_half(1);
        assert_eq!(s * s, RootDyadic::from(d(1, 1)));
        let t = RootDyadic::pow2_half(-3);
        assert_eq!(t * t, RootDyadic::from(d(1, -3)));
        assert!((t.to_f64() - 2f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn root_signum() {
        // 1 - √2 < 0, 3 - 2√2 > 0
        assert_eq!(RootDyadic::new(d(1, 0), d(-1, 0)).signum(), -1);
        assert_eq!(RootDyadic::new(d(3, 0), d(-1, 1)).signum(), 1);
    }

    fn arb_dyadic() -> impl Strategy<Value = Dyadic> {
        (-1000i128..1000, -20i32..20).prop_map(|(m, e)| Dyadic::new(m, e))
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb_dyadic(), b in arb_dyadic(), c in arb_dyadic()) {
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!(a * (b + c), a * b + a * c);
            prop_assert_eq!(a - a, Dyadic::ZERO);
            prop_assert!(((a * b).to_f64() - a.to_f64() * b.to_f64()).abs() <= 1e-9 * (1.0 + (a.to_f64() * b.to_f64()).abs()));
        }

        #[test]
        fn order_matches_floats(a in arb_dyadic(), b in arb_dyadic()) {
            prop_assert_eq!(a.cmp(&b), a.to_f64().partial_cmp(&b.to_f64()).unwrap());
        }

        #[test]
        fn root_ring_laws(a in arb_dyadic(), b in arb_dyadic(), c in arb_dyadic(), e in arb_dyadic()) {
            let x = RootDyadic::new(a, b);
            let y = RootDyadic::new(c, e);
            prop_assert_eq!(x * y, y * x);
            let prod = (x * y).to_f64();
            prop_assert!((prod - x.to_f64() * y.to_f64()).abs() <= 1e-9 * (1.0 + prod.abs()));
            prop_assert_eq!(x.signum(), if x.to_f64() > 0.0 { 1 } else if x.to_f64() < 0.0 { -1 } else { 0 });
        }
    }
}
