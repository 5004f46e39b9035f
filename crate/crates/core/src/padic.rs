//! Exact rational and truncated p-adic arithmetic.
//!
//! Exact quantities (digits, convergents, measures) are [`Rational`]s. Orbit
//! points of generic (Haar-random) inputs are [`PadicApprox`] values: a finite
//! string of base-p digits together with the absolute precision up to which
//! they are known. Precision propagates conservatively through arithmetic:
//!
//! * `add`/`sub`: `P = min(P1, P2)`
//! * `mul`: `P = min(P1 + ord2, P2 + ord1)`
//! * `inv`: `P = P1 - 2 * ord1`
//!
//! Exact rationals mixed into approximate arithmetic behave as if they had
//! infinite precision.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Arbitrary-precision fraction, always kept in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

/// Formats a rational as `num/den`, including a `/1` denominator.
pub fn format_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `num/den` or a bare integer.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
    let den =
        BigInt::from_str(den).map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

pub(crate) fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// p-adic valuation. `Infinity` is the valuation of zero and compares
/// greater than every finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Valuation::Infinity
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
            (Valuation::Finite(_), Valuation::Infinity) => Ordering::Less,
            (Valuation::Infinity, Valuation::Finite(_)) => Ordering::Greater,
            (Valuation::Infinity, Valuation::Infinity) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinity => f.write_str("inf"),
        }
    }
}

const POW_CACHE_LIMIT: usize = 4096;

thread_local! {
    static POW_CACHE: RefCell<HashMap<u64, Vec<BigInt>>> = RefCell::new(HashMap::new());
}

/// A fixed prime p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeCtx {
    p: u64,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeCtx {
    pub fn new(p: u64) -> Result<Self> {
        // Digits are u64 and products of two digits must fit in u128 scratch.
        if !is_prime(p) || p > u32::MAX as u64 {
            return Err(Error::NotPrime(p));
        }
        Ok(PrimeCtx { p })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn p_big(&self) -> BigInt {
        BigInt::from(self.p)
    }

    /// `p^e` as an integer. Powers up to `POW_CACHE_LIMIT` are memoized per
    /// thread; every modulus in the arithmetic is one of them.
    pub fn pow(&self, e: u32) -> BigInt {
        if e as usize >= POW_CACHE_LIMIT {
            return num_traits::pow(self.p_big(), e as usize);
        }
        POW_CACHE.with(|cache| {
            let mut cache = cache.borrow_mut();
            let table = cache.entry(self.p).or_insert_with(|| vec![BigInt::one()]);
            while table.len() <= e as usize {
                let next = table.last().unwrap() * self.p;
                table.push(next);
            }
            table[e as usize].clone()
        })
    }

    /// `p^e` as a rational; `e` may be negative.
    pub fn pow_rational(&self, e: i64) -> Rational {
        let mag = self.pow(e.unsigned_abs() as u32);
        if e >= 0 {
            Rational::from_integer(mag)
        } else {
            Rational::new(BigInt::one(), mag)
        }
    }

    fn int_valuation(&self, n: &BigInt) -> i64 {
        debug_assert!(!n.is_zero());
        let p = self.p_big();
        let mut n = n.clone();
        let mut v = 0;
        loop {
            let (q, r) = n.div_rem(&p);
            if !r.is_zero() {
                return v;
            }
            n = q;
            v += 1;
        }
    }

    /// Splits a nonzero rational as `p^d * a / b` with `a`, `b` prime to p.
    fn split(&self, x: &Rational) -> (i64, BigInt, BigInt) {
        let vn = self.int_valuation(x.numer());
        let vd = self.int_valuation(x.denom());
        let a = x.numer() / self.pow(vn as u32);
        let b = x.denom() / self.pow(vd as u32);
        (vn - vd, a, b)
    }

    /// `ord_p(x)`; `Infinity` for zero.
    pub fn ord(&self, x: &Rational) -> Valuation {
        if x.is_zero() {
            return Valuation::Infinity;
        }
        let vn = self.int_valuation(x.numer());
        let vd = self.int_valuation(x.denom());
        Valuation::Finite(vn - vd)
    }

    /// `|x|_p = p^(-ord x)`, with `|0|_p = 0`.
    pub fn norm(&self, x: &Rational) -> Rational {
        match self.ord(x) {
            Valuation::Infinity => Rational::zero(),
            Valuation::Finite(d) => self.pow_rational(-d),
        }
    }

    /// Max norm of a vector.
    pub fn vector_norm(&self, xs: &[Rational]) -> Rational {
        xs.iter()
            .map(|x| self.norm(x))
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Minimum valuation over a vector, i.e. `-log_p` of the max norm.
    pub fn vector_ord(&self, xs: &[Rational]) -> Valuation {
        xs.iter()
            .map(|x| self.ord(x))
            .min()
            .unwrap_or(Valuation::Infinity)
    }

    /// The digit `c_0`.
    pub fn residue(&self, x: &Rational) -> u64 {
        // sum_{j <= 0} c_j p^j lies in [c_0, c_0 + 1).
        self.truncate_below(x, 1)
            .floor()
            .to_integer()
            .to_u64()
            .unwrap()
    }

    /// `sum_{j < n} c_j p^j`: the canonical representative of `x` modulo
    /// `p^n`. Defined for every rational; digits below `ord x` are zero.
    pub fn truncate_below(&self, x: &Rational, n: i64) -> Rational {
        if x.is_zero() {
            return Rational::zero();
        }
        let (d, a, b) = self.split(x);
        if d >= n {
            return Rational::zero();
        }
        let modulus = self.pow((n - d) as u32);
        let binv = self.inv_mod_pow(&b, (n - d) as u32);
        let r = (a * binv).mod_floor(&modulus);
        Rational::from_integer(r) * self.pow_rational(d)
    }

    /// `floor_p(x) = sum_{n <= 0} c_n p^n`.
    pub fn integral_part(&self, x: &Rational) -> Rational {
        self.truncate_below(x, 1)
    }

    /// `<x>_p = x - floor_p(x)`, which has valuation at least 1.
    pub fn fractional_part(&self, x: &Rational) -> Rational {
        x - self.integral_part(x)
    }

    /// Digits `c_from .. c_{to-1}` of the p-adic expansion of `x`, computed by
    /// peeling one digit at a time off an exact rational.
    pub fn digit_expand(&self, x: &Rational, from: i64, to: i64) -> Vec<u64> {
        assert!(to >= from, "digit_expand: to < from");
        let len = (to - from) as usize;
        let mut out = vec![0u64; len];
        let d = match self.ord(x) {
            Valuation::Infinity => return out,
            Valuation::Finite(d) => d,
        };
        if d >= to {
            return out;
        }
        let p = self.p_big();
        let mut y = x * self.pow_rational(-d);
        let mut pos = d;
        while pos < to {
            let a = y.numer().mod_floor(&p).to_u64().unwrap();
            let b = y.denom().mod_floor(&p).to_u64().unwrap();
            let c = ((a as u128 * small_inverse(b, self.p) as u128) % self.p as u128) as u64;
            if pos >= from {
                out[(pos - from) as usize] = c;
            }
            y = (y - Rational::from_integer(BigInt::from(c))) / Rational::from_integer(p.clone());
            pos += 1;
        }
        out
    }

    /// Whether `v` lies in `J_n`, the rationals `sum_{i=-n}^{0} c_i p^i`
    /// with leading digit `c_{-n} != 0`.
    pub fn in_j(&self, v: &Rational, n: i64) -> bool {
        if n < 0 {
            return v.is_zero();
        }
        if !v.is_positive() || self.ord(v) != Valuation::Finite(-n) {
            return false;
        }
        let scaled = v * self.pow_rational(n);
        scaled.is_integer() && scaled.numer() < &self.pow(n as u32 + 1)
    }

    /// The index `n` with `v in J_n`, if any (`J = union of J_n, n >= 0`).
    pub fn j_class(&self, v: &Rational) -> Option<i64> {
        match self.ord(v) {
            Valuation::Finite(d) if d <= 0 && self.in_j(v, -d) => Some(-d),
            _ => None,
        }
    }

    /// All members of `J_n` in increasing order of `p^n v`.
    pub fn j_members(&self, n: i64) -> Vec<Rational> {
        if n < 0 {
            return vec![Rational::zero()];
        }
        let hi = self.pow(n as u32 + 1);
        let den = self.pow(n as u32);
        let p = self.p_big();
        let mut out = Vec::new();
        let mut k = BigInt::one();
        while k < hi {
            if !k.mod_floor(&p).is_zero() {
                out.push(Rational::new(k.clone(), den.clone()));
            }
            k += 1;
        }
        out
    }

    /// `|J_n| = (p - 1) p^n`.
    pub fn j_count(&self, n: i64) -> BigInt {
        if n < 0 {
            return BigInt::one();
        }
        (self.p_big() - 1) * self.pow(n as u32)
    }
}

fn small_inverse(b: u64, p: u64) -> u64 {
    let e = (b as i128).extended_gcd(&(p as i128));
    e.x.mod_floor(&(p as i128)) as u64
}

impl PrimeCtx {
    /// Inverse of `b` modulo `p^n` by Newton iteration `x <- x(2 - bx)`,
    /// which doubles the correct digits each round; `b` must be prime to p.
    pub(crate) fn inv_mod_pow(&self, b: &BigInt, n: u32) -> BigInt {
        if n == 0 {
            return BigInt::zero();
        }
        let p = self.p_big();
        let b0 = b.mod_floor(&p).to_u64().expect("residue fits");
        assert!(b0 != 0, "inv_mod_pow: not a unit");
        let mut x = BigInt::from(small_inverse(b0, self.p));
        let two = BigInt::from(2);
        let mut k = 1;
        while k < n {
            k = (2 * k).min(n);
            let modulus = self.pow(k);
            let bk = b.mod_floor(&modulus);
            x = (&x * (&two - (&bk * &x))).mod_floor(&modulus);
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ApproxState {
    /// Exactly zero.
    Zero,
    /// Zero modulo `p^prec`; the valuation is not determined.
    Vanishing { prec: i64 },
    /// `p^ord * unit + O(p^prec)` with `0 < unit < p^(prec - ord)`, `p` not
    /// dividing `unit`.
    Unit { ord: i64, unit: BigInt, prec: i64 },
}

/// A p-adic number known modulo `p^abs_prec`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicApprox {
    ctx: PrimeCtx,
    state: ApproxState,
}

impl PadicApprox {
    pub fn zero(ctx: PrimeCtx) -> Self {
        PadicApprox {
            ctx,
            state: ApproxState::Zero,
        }
    }

    /// The value `0 + O(p^prec)`.
    pub fn vanishing(ctx: PrimeCtx, prec: i64) -> Self {
        PadicApprox {
            ctx,
            state: ApproxState::Vanishing { prec },
        }
    }

    /// `x` reduced modulo `p^prec`. An exact zero stays an exact zero.
    pub fn from_rational(ctx: PrimeCtx, x: &Rational, prec: i64) -> Self {
        if x.is_zero() {
            return Self::zero(ctx);
        }
        let (d, a, b) = ctx.split(x);
        if d >= prec {
            return Self::vanishing(ctx, prec);
        }
        let modulus = ctx.pow((prec - d) as u32);
        let unit = (a * ctx.inv_mod_pow(&b, (prec - d) as u32)).mod_floor(&modulus);
        PadicApprox {
            ctx,
            state: ApproxState::Unit { ord: d, unit, prec },
        }
    }

    /// Builds `sum_j digits[j] p^(start + j) + O(p^(start + len))`.
    pub fn from_digits(ctx: PrimeCtx, start: i64, digits: &[u64]) -> Result<Self> {
        if let Some(&c) = digits.iter().find(|&&c| c >= ctx.p) {
            return Err(Error::Parse(format!(
                "digit {c} out of range for p = {}",
                ctx.p
            )));
        }
        // Horner's rule over chunks of digits that fit in a u64.
        let chunk = (64 / (64 - ctx.p.leading_zeros()) as usize).max(1);
        let mut value = BigInt::zero();
        for block in digits.rchunks(chunk) {
            let mut word = 0u64;
            for &c in block.iter().rev() {
                word = word * ctx.p + c;
            }
            value = value * ctx.pow(block.len() as u32) + word;
        }
        Ok(Self::normalize(
            ctx,
            start,
            value,
            start + digits.len() as i64,
        ))
    }

    /// `p^base * value + O(p^prec)`, with `value` an arbitrary integer.
    fn normalize(ctx: PrimeCtx, base: i64, value: BigInt, prec: i64) -> Self {
        if base >= prec {
            return Self::vanishing(ctx, prec);
        }
        let mut value = value.mod_floor(&ctx.pow((prec - base) as u32));
        if value.is_zero() {
            return Self::vanishing(ctx, prec);
        }
        let p = ctx.p_big();
        let mut ord = base;
        loop {
            let (q, r) = value.div_rem(&p);
            if !r.is_zero() {
                break;
            }
            value = q;
            ord += 1;
        }
        PadicApprox {
            ctx,
            state: ApproxState::Unit {
                ord,
                unit: value,
                prec,
            },
        }
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.ctx
    }

    pub fn is_exact_zero(&self) -> bool {
        self.state == ApproxState::Zero
    }

    /// `None` for an exact zero, which has infinite precision.
    pub fn abs_prec(&self) -> Option<i64> {
        match &self.state {
            ApproxState::Zero => None,
            ApproxState::Vanishing { prec } | ApproxState::Unit { prec, .. } => Some(*prec),
        }
    }

    /// Number of known digits above the valuation (`abs_prec - ord`).
    pub fn rel_prec(&self) -> Option<i64> {
        match &self.state {
            ApproxState::Unit { ord, prec, .. } => Some(prec - ord),
            _ => None,
        }
    }

    /// `ord_p` of the value. Fails when the value is zero at its precision.
    pub fn ord(&self) -> Result<Valuation> {
        match &self.state {
            ApproxState::Zero => Ok(Valuation::Infinity),
            ApproxState::Vanishing { .. } => Err(Error::PrecisionExhausted),
            ApproxState::Unit { ord, .. } => Ok(Valuation::Finite(*ord)),
        }
    }

    /// A valuation that is certainly not larger than the true one would be:
    /// the valuation when known, otherwise the precision.
    pub fn ord_lower_bound(&self) -> Valuation {
        match &self.state {
            ApproxState::Zero => Valuation::Infinity,
            ApproxState::Vanishing { prec } => Valuation::Finite(*prec),
            ApproxState::Unit { ord, .. } => Valuation::Finite(*ord),
        }
    }

    /// `|x|_p`.
    pub fn norm(&self) -> Result<Rational> {
        Ok(match self.ord()? {
            Valuation::Infinity => Rational::zero(),
            Valuation::Finite(d) => self.ctx.pow_rational(-d),
        })
    }

    /// The known digits, starting at position `ord`. Empty for zero values.
    pub fn digits(&self) -> Vec<u64> {
        match &self.state {
            ApproxState::Unit { ord, unit, prec } => {
                let p = self.ctx.p_big();
                let mut out = Vec::with_capacity((prec - ord) as usize);
                let mut v = unit.clone();
                for _ in *ord..*prec {
                    let (q, r) = v.div_rem(&p);
                    out.push(r.to_u64().unwrap());
                    v = q;
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// The digit at position `n`.
    pub fn digit(&self, n: i64) -> Result<u64> {
        match &self.state {
            ApproxState::Zero => Ok(0),
            ApproxState::Vanishing { prec } => {
                if n < *prec {
                    Ok(0)
                } else {
                    Err(Error::PrecisionExhausted)
                }
            }
            ApproxState::Unit { ord, unit, prec } => {
                if n >= *prec {
                    Err(Error::PrecisionExhausted)
                } else if n < *ord {
                    Ok(0)
                } else {
                    let shifted = unit / self.ctx.pow((n - ord) as u32);
                    Ok(shifted.mod_floor(&self.ctx.p_big()).to_u64().unwrap())
                }
            }
        }
    }

    /// `c_0`.
    pub fn residue(&self) -> Result<u64> {
        self.digit(0)
    }

    /// The truncated value as an exact rational.
    pub fn truncation(&self) -> Rational {
        match &self.state {
            ApproxState::Unit { ord, unit, .. } => {
                Rational::from_integer(unit.clone()) * self.ctx.pow_rational(*ord)
            }
            _ => Rational::zero(),
        }
    }

    fn check_ctx(&self, other: &PrimeCtx) -> Result<()> {
        if self.ctx != *other {
            return Err(Error::PrimeMismatch(self.ctx.p, other.p));
        }
        Ok(())
    }

    pub fn neg(&self) -> Self {
        match &self.state {
            ApproxState::Unit { ord, unit, prec } => {
                let modulus = self.ctx.pow((prec - ord) as u32);
                PadicApprox {
                    ctx: self.ctx,
                    state: ApproxState::Unit {
                        ord: *ord,
                        unit: modulus - unit,
                        prec: *prec,
                    },
                }
            }
            _ => self.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_ctx(&other.ctx)?;
        use ApproxState::*;
        Ok(match (&self.state, &other.state) {
            (Zero, _) => other.clone(),
            (_, Zero) => self.clone(),
            (Vanishing { prec: a }, Vanishing { prec: b }) => Self::vanishing(self.ctx, *a.min(b)),
            (Vanishing { prec: a }, Unit { ord, unit, prec })
            | (Unit { ord, unit, prec }, Vanishing { prec: a }) => {
                Self::normalize(self.ctx, *ord, unit.clone(), *a.min(prec))
            }
            (
                Unit {
                    ord: d1,
                    unit: u1,
                    prec: p1,
                },
                Unit {
                    ord: d2,
                    unit: u2,
                    prec: p2,
                },
            ) => {
                let base = *d1.min(d2);
                let value =
                    u1 * self.ctx.pow((d1 - base) as u32) + u2 * self.ctx.pow((d2 - base) as u32);
                Self::normalize(self.ctx, base, value, *p1.min(p2))
            }
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_ctx(&other.ctx)?;
        use ApproxState::*;
        Ok(match (&self.state, &other.state) {
            (Zero, _) | (_, Zero) => Self::zero(self.ctx),
            (Vanishing { prec: a }, Vanishing { prec: b }) => Self::vanishing(self.ctx, a + b),
            (Vanishing { prec: a }, Unit { ord, .. })
            | (Unit { ord, .. }, Vanishing { prec: a }) => Self::vanishing(self.ctx, a + ord),
            (
                Unit {
                    ord: d1,
                    unit: u1,
                    prec: p1,
                },
                Unit {
                    ord: d2,
                    unit: u2,
                    prec: p2,
                },
            ) => {
                let ord = d1 + d2;
                let prec = (p1 + d2).min(p2 + d1);
                let modulus = self.ctx.pow((prec - ord) as u32);
                PadicApprox {
                    ctx: self.ctx,
                    state: Unit {
                        ord,
                        unit: (u1 * u2).mod_floor(&modulus),
                        prec,
                    },
                }
            }
        })
    }

    pub fn inv(&self) -> Result<Self> {
        match &self.state {
            ApproxState::Zero => Err(Error::DivisionByZero),
            ApproxState::Vanishing { .. } => Err(Error::PrecisionExhausted),
            ApproxState::Unit { ord, unit, prec } => Ok(PadicApprox {
                ctx: self.ctx,
                state: ApproxState::Unit {
                    ord: -ord,
                    unit: self.ctx.inv_mod_pow(unit, (prec - ord) as u32),
                    prec: prec - 2 * ord,
                },
            }),
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.mul(&other.inv()?)
    }

    /// `self + r` with `r` exact.
    pub fn add_rational(&self, r: &Rational) -> Result<Self> {
        if r.is_zero() {
            return Ok(self.clone());
        }
        let prec = self.abs_prec().ok_or(Error::PrecisionExhausted)?;
        self.add(&Self::from_rational(self.ctx, r, prec))
    }

    /// `self - r` with `r` exact.
    pub fn sub_rational(&self, r: &Rational) -> Result<Self> {
        self.add_rational(&-r)
    }

    /// `self * r` with `r` exact.
    pub fn mul_rational(&self, r: &Rational) -> Result<Self> {
        if r.is_zero() {
            return Ok(Self::zero(self.ctx));
        }
        let (e, a, b) = self.ctx.split(r);
        Ok(match &self.state {
            ApproxState::Zero => self.clone(),
            ApproxState::Vanishing { prec } => Self::vanishing(self.ctx, prec + e),
            ApproxState::Unit { ord, unit, prec } => {
                let modulus = self.ctx.pow((prec - ord) as u32);
                let w = if b.is_one() {
                    a.mod_floor(&modulus)
                } else {
                    (a * self.ctx.inv_mod_pow(&b, (prec - ord) as u32)).mod_floor(&modulus)
                };
                PadicApprox {
                    ctx: self.ctx,
                    state: ApproxState::Unit {
                        ord: ord + e,
                        unit: (unit * w).mod_floor(&modulus),
                        prec: prec + e,
                    },
                }
            }
        })
    }

    /// `floor_p(x)`; needs every digit at positions `<= 0`.
    pub fn integral_part(&self) -> Result<Rational> {
        match &self.state {
            ApproxState::Zero => Ok(Rational::zero()),
            ApproxState::Vanishing { prec } => {
                if *prec >= 1 {
                    Ok(Rational::zero())
                } else {
                    Err(Error::PrecisionExhausted)
                }
            }
            ApproxState::Unit { ord, unit, prec } => {
                if *ord >= 1 {
                    return Ok(Rational::zero());
                }
                if *prec < 1 {
                    return Err(Error::PrecisionExhausted);
                }
                let low = unit.mod_floor(&self.ctx.pow((1 - ord) as u32));
                Ok(Rational::from_integer(low) * self.ctx.pow_rational(*ord))
            }
        }
    }

    /// `<x>_p = x - floor_p(x)`.
    pub fn fractional_part(&self) -> Result<Self> {
        let int = self.integral_part()?;
        self.sub_rational(&int)
    }
}

impl fmt::Display for PadicApprox {
    /// `p=<p>;ord=<d>;digits=<d0,d1,...>;prec=<P>`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits: Vec<String> = self.digits().iter().map(u64::to_string).collect();
        let prec = match self.abs_prec() {
            Some(p) => p.to_string(),
            None => "inf".to_string(),
        };
        write!(
            f,
            "p={};ord={};digits={};prec={}",
            self.ctx.p,
            self.ord_lower_bound_display(),
            digits.join(","),
            prec
        )
    }
}

impl PadicApprox {
    fn ord_lower_bound_display(&self) -> String {
        match &self.state {
            ApproxState::Unit { ord, .. } => ord.to_string(),
            _ => "inf".to_string(),
        }
    }
}

impl FromStr for PadicApprox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = None;
        let mut ord = None;
        let mut digits = None;
        let mut prec = None;
        for field in s.trim().split(';') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("missing '=' in {field:?}")))?;
            match key.trim() {
                "p" => p = Some(value.trim().to_string()),
                "ord" => ord = Some(value.trim().to_string()),
                "digits" => digits = Some(value.trim().to_string()),
                "prec" => prec = Some(value.trim().to_string()),
                other => return Err(Error::Parse(format!("unknown field {other:?}"))),
            }
        }
        let missing = |name: &str| Error::Parse(format!("missing field {name}"));
        let p: u64 = p
            .ok_or_else(|| missing("p"))?
            .parse()
            .map_err(|_| Error::Parse("bad p".into()))?;
        let ctx = PrimeCtx::new(p)?;
        let ord = ord.ok_or_else(|| missing("ord"))?;
        let digits = digits.ok_or_else(|| missing("digits"))?;
        let prec = prec.ok_or_else(|| missing("prec"))?;
        let parse_int = |v: &str| -> Result<i64> {
            v.parse()
                .map_err(|_| Error::Parse(format!("bad integer {v:?}")))
        };
        match (ord.as_str(), prec.as_str()) {
            ("inf", "inf") => Ok(Self::zero(ctx)),
            ("inf", prec) => Ok(Self::vanishing(ctx, parse_int(prec)?)),
            (ord, prec) => {
                let ord = parse_int(ord)?;
                let prec = parse_int(prec)?;
                let digits: Vec<u64> = if digits.is_empty() {
                    Vec::new()
                } else {
                    digits
                        .split(',')
                        .map(|d| {
                            d.trim()
                                .parse()
                                .map_err(|_| Error::Parse(format!("bad digit {d:?}")))
                        })
                        .collect::<Result<_>>()?
                };
                if digits.len() as i64 != prec - ord {
                    return Err(Error::Parse("digit count does not match prec - ord".into()));
                }
                if digits.first() == Some(&0) {
                    return Err(Error::Parse("leading digit must be nonzero".into()));
                }
                Self::from_digits(ctx, ord, &digits)
            }
        }
    }
}

/// Scalars the dynamics can run on: exact rationals and truncated p-adics.
pub trait PadicScalar: Clone + fmt::Debug + Send + Sync + Sized {
    fn valuation(&self, ctx: &PrimeCtx) -> Result<Valuation>;
    fn add_rational(&self, ctx: &PrimeCtx, r: &Rational) -> Result<Self>;
    fn mul_rational(&self, ctx: &PrimeCtx, r: &Rational) -> Result<Self>;
    fn mul(&self, ctx: &PrimeCtx, other: &Self) -> Result<Self>;
    fn inv(&self, ctx: &PrimeCtx) -> Result<Self>;
    fn integral_part(&self, ctx: &PrimeCtx) -> Result<Rational>;

    fn is_exact_zero(&self) -> bool;

    fn sub_rational(&self, ctx: &PrimeCtx, r: &Rational) -> Result<Self> {
        self.add_rational(ctx, &-r)
    }
}

impl PadicScalar for Rational {
    fn valuation(&self, ctx: &PrimeCtx) -> Result<Valuation> {
        Ok(ctx.ord(self))
    }

    fn add_rational(&self, _: &PrimeCtx, r: &Rational) -> Result<Self> {
        Ok(self + r)
    }

    fn mul_rational(&self, _: &PrimeCtx, r: &Rational) -> Result<Self> {
        Ok(self * r)
    }

    fn mul(&self, _: &PrimeCtx, other: &Self) -> Result<Self> {
        Ok(self * other)
    }

    fn inv(&self, _: &PrimeCtx) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.recip())
    }

    fn integral_part(&self, ctx: &PrimeCtx) -> Result<Rational> {
        Ok(ctx.integral_part(self))
    }

    fn is_exact_zero(&self) -> bool {
        self.is_zero()
    }
}

impl PadicScalar for PadicApprox {
    fn valuation(&self, ctx: &PrimeCtx) -> Result<Valuation> {
        self.check_ctx(ctx)?;
        self.ord()
    }

    fn add_rational(&self, ctx: &PrimeCtx, r: &Rational) -> Result<Self> {
        self.check_ctx(ctx)?;
        PadicApprox::add_rational(self, r)
    }

    fn mul_rational(&self, ctx: &PrimeCtx, r: &Rational) -> Result<Self> {
        self.check_ctx(ctx)?;
        PadicApprox::mul_rational(self, r)
    }

    fn mul(&self, _: &PrimeCtx, other: &Self) -> Result<Self> {
        PadicApprox::mul(self, other)
    }

    fn inv(&self, _: &PrimeCtx) -> Result<Self> {
        PadicApprox::inv(self)
    }

    fn integral_part(&self, _: &PrimeCtx) -> Result<Rational> {
        PadicApprox::integral_part(self)
    }

    fn is_exact_zero(&self) -> bool {
        PadicApprox::is_exact_zero(self)
    }
}

/// The ball `center + p^level Z_p`, stored with its canonical center
/// `sum_{j < level} c_j p^j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ball {
    ctx: PrimeCtx,
    center: Rational,
    level: i64,
}

impl Ball {
    pub fn new(ctx: PrimeCtx, center: &Rational, level: i64) -> Result<Self> {
        if level < 1 {
            return Err(Error::InvalidBall(format!("level {level} < 1")));
        }
        Ok(Ball {
            ctx,
            center: ctx.truncate_below(center, level),
            level,
        })
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.ctx
    }

    pub fn center(&self) -> &Rational {
        &self.center
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    /// Haar measure normalized so that `mu(pZ_p) = 1`.
    pub fn measure(&self) -> Rational {
        self.ctx.pow_rational(-(self.level - 1))
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.ctx.ord(&(x - &self.center)) >= Valuation::Finite(self.level)
    }

    /// Whether every completion of `x` lies in the ball.
    pub fn contains_approx(&self, x: &PadicApprox) -> Result<bool> {
        let diff = x.sub_rational(&self.center)?;
        let bound = diff.ord_lower_bound();
        if bound >= Valuation::Finite(self.level) {
            return Ok(true);
        }
        // A vanishing difference below the level is undecided.
        diff.ord().map(|_| false)
    }

    /// Whether the ball is contained in `pZ_p`.
    pub fn in_pzp(&self) -> bool {
        self.ctx.ord(&self.center) >= Valuation::Finite(1)
    }

    /// Balls are nested or disjoint.
    pub fn is_disjoint(&self, other: &Ball) -> bool {
        let level = self.level.min(other.level);
        self.ctx.ord(&(&self.center - &other.center)) < Valuation::Finite(level)
    }

    pub fn is_subset_of(&self, other: &Ball) -> bool {
        self.level >= other.level && other.contains(&self.center)
    }

    /// A random exact element: `center + p^level * w` with `w` a p-adic unit
    /// rational or a small integer.
    /// The `p^(level - self.level)` balls of radius `p^-level` making up
    /// this one.
    pub fn refine(&self, level: i64) -> Result<Vec<Ball>> {
        if level < self.level {
            return Err(Error::InvalidBall(format!(
                "cannot refine {self} to level {level}"
            )));
        }
        let step = self.ctx.pow_rational(self.level);
        let count = self
            .ctx
            .pow((level - self.level) as u32)
            .to_u64()
            .ok_or_else(|| {
                Error::InvalidBall(format!(
                    "refining {self} to level {level} gives too many balls"
                ))
            })?;
        (0..count)
            .map(|j| {
                Ball::new(
                    self.ctx,
                    &(&self.center + &step * Rational::from_integer(j.into())),
                    level,
                )
            })
            .collect()
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Rational {
        &self.center + self.ctx.pow_rational(self.level) * random_integral(self.ctx, rng)
    }
}

impl fmt::Display for Ball {
    /// `center~level`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}~{}", format_rational(&self.center), self.level)
    }
}

impl Ball {
    pub fn parse(ctx: PrimeCtx, s: &str) -> Result<Self> {
        let (center, level) = s
            .trim()
            .split_once('~')
            .ok_or_else(|| Error::Parse(format!("ball {s:?} is not center~level")))?;
        let level = level
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad ball level in {s:?}")))?;
        Ball::new(ctx, &parse_rational(center)?, level)
    }
}

/// A random element of `Z_p` as an exact rational: an integer below `p^6`,
/// divided by a small integer prime to p about half the time.
pub fn random_integral<R: Rng + ?Sized>(ctx: PrimeCtx, rng: &mut R) -> Rational {
    let p = ctx.p();
    let hi = p.saturating_pow(6).min(1 << 40);
    let num = rng.gen_range(0..hi) as i64 * if rng.gen_bool(0.5) { 1 } else { -1 };
    let den = if rng.gen_bool(0.5) {
        loop {
            let d = rng.gen_range(1..64u64);
            if d % p != 0 {
                break d as i64;
            }
        }
    } else {
        1
    };
    rat(num, den)
}

/// A random nonzero element of `pZ_p` as an exact rational.
pub fn random_pzp<R: Rng + ?Sized>(ctx: PrimeCtx, rng: &mut R) -> Rational {
    loop {
        let x = random_integral(ctx, rng) * Rational::from_integer(ctx.p_big());
        if !x.is_zero() {
            return x;
        }
    }
}

/// `a_1 + p^n Z_p x ... x a_m + p^n Z_p` and more generally any product of
/// balls.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductCylinder {
    balls: Vec<Ball>,
}

impl ProductCylinder {
    pub fn new(balls: Vec<Ball>) -> Result<Self> {
        let first = balls
            .first()
            .ok_or_else(|| Error::InvalidBall("a cylinder needs at least one ball".into()))?;
        if let Some(b) = balls.iter().find(|b| b.ctx != first.ctx) {
            return Err(Error::PrimeMismatch(first.ctx.p, b.ctx.p));
        }
        Ok(ProductCylinder { balls })
    }

    /// `a + (p^n Z_p)^m`.
    pub fn uniform(ctx: PrimeCtx, center: &[Rational], level: i64) -> Result<Self> {
        let balls = center
            .iter()
            .map(|a| Ball::new(ctx, a, level))
            .collect::<Result<Vec<_>>>()?;
        Self::new(balls)
    }

    /// `(pZ_p)^m`.
    pub fn full(ctx: PrimeCtx, m: usize) -> Self {
        Self::uniform(ctx, &vec![Rational::zero(); m], 1).expect("m >= 1")
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn dim(&self) -> usize {
        self.balls.len()
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.balls[0].ctx
    }

    /// The common level, when all balls share one.
    pub fn uniform_level(&self) -> Option<i64> {
        let n = self.balls[0].level;
        self.balls.iter().all(|b| b.level == n).then_some(n)
    }

    pub fn center(&self) -> Vec<Rational> {
        self.balls.iter().map(|b| b.center.clone()).collect()
    }

    pub fn measure(&self) -> Rational {
        self.balls.iter().map(Ball::measure).product()
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.balls.len() && self.balls.iter().zip(x).all(|(b, x)| b.contains(x))
    }

    pub fn contains_approx(&self, x: &[PadicApprox]) -> Result<bool> {
        if x.len() != self.balls.len() {
            return Err(Error::DimensionMismatch {
                expected: self.balls.len(),
                got: x.len(),
            });
        }
        for (b, x) in self.balls.iter().zip(x) {
            if !b.contains_approx(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_disjoint(&self, other: &ProductCylinder) -> bool {
        self.balls
            .iter()
            .zip(&other.balls)
            .any(|(a, b)| a.is_disjoint(b))
    }

    /// Splits the cylinder into uniform-level cylinders at the largest
    /// level of its balls.
    pub fn refine_uniform(&self) -> Result<Vec<ProductCylinder>> {
        let level = self.balls.iter().map(Ball::level).max().unwrap_or(1);
        let mut out = vec![Vec::new()];
        for b in &self.balls {
            let parts = b.refine(level)?;
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Ball>| {
                    parts.iter().map(move |q| {
                        let mut next = prefix.clone();
                        next.push(q.clone());
                        next
                    })
                })
                .collect();
        }
        Ok(out
            .into_iter()
            .map(|balls| ProductCylinder { balls })
            .collect())
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Rational> {
        self.balls.iter().map(|b| b.random_element(rng)).collect()
    }
}

impl fmt::Display for ProductCylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.balls.iter().map(Ball::to_string).collect();
        f.write_str(&parts.join(";"))
    }
}

/// `1 / (b + v)` for `b = pa + p^n Z_p` and `ord(v) = -k <= 0`, which is the
/// ball `1/(v + pa) + p^(n + 2k) Z_p`.
pub fn invert_ball(b: &Ball, v: &Rational) -> Result<Ball> {
    let ctx = b.ctx;
    if !b.in_pzp() {
        return Err(Error::InvalidBall(format!("{b} is not inside pZ_p")));
    }
    let k = match ctx.ord(v) {
        Valuation::Finite(d) if d <= 0 => -d,
        other => {
            return Err(Error::InvalidBall(format!(
                "shift {} has valuation {other} > 0",
                format_rational(v)
            )))
        }
    };
    let image_center = (v + &b.center).recip();
    Ball::new(ctx, &image_center, b.level + 2 * k)
}

/// A Haar-random element of `pZ_p` truncated to digit positions `1..=n`.
pub fn haar_sample(ctx: PrimeCtx, n: usize, seed: u64) -> PadicApprox {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_sample_rng(ctx, n, &mut rng)
}

/// As [`haar_sample`], drawing digits from `rng`.
pub fn haar_sample_rng<R: Rng + ?Sized>(ctx: PrimeCtx, n: usize, rng: &mut R) -> PadicApprox {
    assert!(n >= 1, "haar_sample needs at least one digit");
    let digits: Vec<u64> = (0..n).map(|_| rng.gen_range(0..ctx.p())).collect();
    PadicApprox::from_digits(ctx, 1, &digits).expect("digits in range")
}
