//! Continued fraction algorithms built from families of hyperbolic LFTs.
//!
//! * [`Variant::OneDim`]: `T_l(x) = p^k/x - floor_p(p^k/x)` with
//!   `k = max(ord x - l, 0)`; `l = 0` is Schneider's algorithm and `l = inf`
//!   Ruban's.
//! * [`Variant::MultiDim`]: the m-dimensional `T_{l,m}`; `T_{inf,2}` is the
//!   p-adic Jacobi-Perron algorithm.
//! * [`Variant::Brun`]: the p-adic Brun algorithm, pivoting on the first
//!   coordinate of maximal norm.
//!
//! Each step emits a [`Digit`] naming the branch `F` with `F(x) = T(x)`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lft::{HyperbolicLft, LftParams};
use crate::padic::{
    format_rational, haar_sample_rng, parse_rational, PadicApprox, PadicScalar, PrimeCtx, Rational,
    Valuation,
};

/// The parameter `l` of `T_l`: how far below `ord x` the power of p pulled
/// out at each step may reach. `Infinite` is a distinct value, not a large
/// integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Threshold {
    Finite(u32),
    Infinite,
}

impl Threshold {
    /// `max(d - l, 0)`
    fn excess(self, d: i64) -> i64 {
        match self {
            Threshold::Finite(l) => (d - l as i64).max(0),
            Threshold::Infinite => 0,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(l) => write!(f, "{l}"),
            Threshold::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" => Ok(Threshold::Infinite),
            other => other.parse().map(Threshold::Finite).map_err(|_| {
                Error::Parse(format!(
                    "threshold {other:?} is neither an integer nor \"inf\""
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    OneDim(Threshold),
    MultiDim(Threshold, usize),
    Brun(usize),
}

/// An algorithm together with its prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemSpec {
    ctx: PrimeCtx,
    variant: Variant,
}

/// `(k, v)`: the branch `x -> p^k/x - v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Digit1D {
    pub k: u32,
    pub v: Rational,
}

/// Exponents of `p^(l,x)` and the integral parts `q^(l,x)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DigitMD {
    pub pexp: Vec<u32>,
    pub qvec: Vec<Rational>,
}

/// Brun pivot (zero-based) and integral parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DigitBrun {
    pub pivot: usize,
    pub qvec: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Digit {
    OneDim(Digit1D),
    MultiDim(DigitMD),
    Brun(DigitBrun),
}

impl Digit {
    pub fn one_dim(k: u32, v: Rational) -> Self {
        Digit::OneDim(Digit1D { k, v })
    }

    fn sort_key(&self) -> (Vec<u32>, Vec<Rational>) {
        match self {
            Digit::OneDim(d) => (vec![d.k], vec![d.v.clone()]),
            Digit::MultiDim(d) => (d.pexp.clone(), d.qvec.clone()),
            Digit::Brun(d) => (vec![d.pivot as u32], d.qvec.clone()),
        }
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Digit::OneDim(d) => write!(f, "({},{})", d.k, d.v),
            Digit::MultiDim(d) => {
                let q: Vec<String> = d.qvec.iter().map(ToString::to_string).collect();
                write!(f, "({:?},[{}])", d.pexp, q.join(","))
            }
            Digit::Brun(d) => {
                let q: Vec<String> = d.qvec.iter().map(ToString::to_string).collect();
                write!(f, "({},[{}])", d.pivot + 1, q.join(","))
            }
        }
    }
}

/// Wire format of a digit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DigitRecord {
    #[serde(rename_all = "lowercase")]
    OneDim {
        k: u32,
        v: String,
    },
    MultiDim {
        pexp: Vec<u32>,
        q: Vec<String>,
    },
    /// One-based pivot.
    Brun {
        pivot: usize,
        q: Vec<String>,
    },
}

impl From<&Digit> for DigitRecord {
    fn from(d: &Digit) -> Self {
        let strs = |q: &[Rational]| q.iter().map(format_rational).collect();
        match d {
            Digit::OneDim(d) => DigitRecord::OneDim {
                k: d.k,
                v: format_rational(&d.v),
            },
            Digit::MultiDim(d) => DigitRecord::MultiDim {
                pexp: d.pexp.clone(),
                q: strs(&d.qvec),
            },
            Digit::Brun(d) => DigitRecord::Brun {
                pivot: d.pivot + 1,
                q: strs(&d.qvec),
            },
        }
    }
}

impl TryFrom<&DigitRecord> for Digit {
    type Error = Error;

    fn try_from(r: &DigitRecord) -> Result<Self> {
        let parse = |q: &[String]| {
            q.iter()
                .map(|s| parse_rational(s))
                .collect::<Result<Vec<_>>>()
        };
        Ok(match r {
            DigitRecord::OneDim { k, v } => Digit::one_dim(*k, parse_rational(v)?),
            DigitRecord::MultiDim { pexp, q } => Digit::MultiDim(DigitMD {
                pexp: pexp.clone(),
                qvec: parse(q)?,
            }),
            DigitRecord::Brun { pivot, q } => Digit::Brun(DigitBrun {
                pivot: pivot
                    .checked_sub(1)
                    .ok_or_else(|| Error::Parse("Brun pivots are one-based".into()))?,
                qvec: parse(q)?,
            }),
        })
    }
}

impl Serialize for Digit {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        DigitRecord::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Digit {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rec = DigitRecord::deserialize(deserializer)?;
        Digit::try_from(&rec).map_err(serde::de::Error::custom)
    }
}

/// Parses a word of one-dimensional digits written as `(k,v),(k,v),...`.
pub fn parse_word_1d(s: &str) -> Result<Vec<Digit>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut rest = s;
    loop {
        rest = rest.trim_start();
        let body = rest
            .strip_prefix('(')
            .ok_or_else(|| Error::Parse(format!("expected '(' in word {s:?}")))?;
        let close = body
            .find(')')
            .ok_or_else(|| Error::Parse(format!("unclosed '(' in word {s:?}")))?;
        let (k, v) = body[..close]
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("digit must be (k,v) in {s:?}")))?;
        let k = k
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad exponent {k:?}")))?;
        out.push(Digit::one_dim(k, parse_rational(v)?));
        rest = body[close + 1..].trim_start();
        if rest.is_empty() {
            return Ok(out);
        }
        rest = rest
            .strip_prefix(',')
            .ok_or_else(|| Error::Parse(format!("expected ',' between digits in {s:?}")))?;
    }
}

/// One step of an algorithm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step<S> {
    pub digit: Digit,
    pub next: Vec<S>,
    /// Valuation of the pivot coordinate the step divided by.
    pub pivot_ord: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    /// An iterate was exactly zero in the pivot before step `j`.
    Terminated(usize),
    /// Step `j` could not be carried out at the available precision.
    PrecisionExhausted(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub j: usize,
    pub digit: Digit,
    pub ord_consumed: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub steps: Vec<StepRecord>,
    pub status: Status,
}

impl Expansion {
    pub fn digits(&self) -> Vec<Digit> {
        self.steps.iter().map(|s| s.digit.clone()).collect()
    }
}

/// A family of branches sharing one `iota`, used for exact branch sums
/// without listing every branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchClass {
    pub iota_exp: i64,
    pub count: BigInt,
    shape: ClassShape,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ClassShape {
    /// `k` with `v` ranging over `J_j`.
    OneDim { k: u32, j: i64 },
    /// Last coordinate `(r, J_u)`; the others by [`CoordChoice`].
    MultiDim {
        last_exp: u32,
        last_class: i64,
        others: Vec<CoordChoice>,
    },
}

/// Options for a non-final coordinate of a `T_{l,m}` digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoordChoice {
    /// `p^0`, `q = 0`.
    Zero,
    /// `p^r`, `q` in `J_e`.
    Class { r: u32, e: i64 },
}

impl SystemSpec {
    pub fn new(ctx: PrimeCtx, variant: Variant) -> Result<Self> {
        match variant {
            Variant::MultiDim(_, 0) | Variant::Brun(0) => {
                Err(Error::InvalidParams("dimension must be at least 1".into()))
            }
            _ => Ok(SystemSpec { ctx, variant }),
        }
    }

    pub fn schneider(ctx: PrimeCtx) -> Self {
        SystemSpec {
            ctx,
            variant: Variant::OneDim(Threshold::Finite(0)),
        }
    }

    pub fn ruban(ctx: PrimeCtx) -> Self {
        SystemSpec {
            ctx,
            variant: Variant::OneDim(Threshold::Infinite),
        }
    }

    pub fn jacobi_perron(ctx: PrimeCtx, m: usize) -> Result<Self> {
        Self::new(ctx, Variant::MultiDim(Threshold::Infinite, m))
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.ctx
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        match self.variant {
            Variant::OneDim(_) => 1,
            Variant::MultiDim(_, m) | Variant::Brun(m) => m,
        }
    }

    /// The threshold `l` for `T_l` and `T_{l,m}`.
    pub fn threshold(&self) -> Option<Threshold> {
        match self.variant {
            Variant::OneDim(l) | Variant::MultiDim(l, _) => Some(l),
            Variant::Brun(_) => None,
        }
    }

    /// Applies `T` once. `Ok(None)` when the pivot is exactly zero, where
    /// `T(0) = 0` by convention.
    pub fn step<S: PadicScalar>(&self, x: &[S]) -> Result<Option<Step<S>>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for coord in x {
            match coord.valuation(&self.ctx) {
                Ok(d) if d < Valuation::Finite(1) => {
                    return Err(Error::OutsideDomain("points must lie in (pZ_p)^m".into()))
                }
                _ => {}
            }
        }
        match self.variant {
            Variant::OneDim(l) => self.step_one_dim(l, x),
            Variant::MultiDim(l, _) => self.step_multi_dim(l, x),
            Variant::Brun(_) => self.step_brun(x),
        }
    }

    fn step_one_dim<S: PadicScalar>(&self, l: Threshold, x: &[S]) -> Result<Option<Step<S>>> {
        let ctx = &self.ctx;
        let x = &x[0];
        if x.is_exact_zero() {
            return Ok(None);
        }
        let d = pivot_ord(ctx, x)?;
        let k = l.excess(d);
        let w = x.inv(ctx)?.mul_rational(ctx, &ctx.pow_rational(k))?;
        let v = w.integral_part(ctx)?;
        let next = w.sub_rational(ctx, &v)?;
        Ok(Some(Step {
            digit: Digit::one_dim(k as u32, v),
            next: vec![next],
            pivot_ord: d,
        }))
    }

    fn step_multi_dim<S: PadicScalar>(&self, l: Threshold, x: &[S]) -> Result<Option<Step<S>>> {
        let ctx = &self.ctx;
        let m = x.len();
        if x[0].is_exact_zero() {
            return Ok(None);
        }
        let d = pivot_ord(ctx, &x[0])?;
        let inv = x[0].inv(ctx)?;
        let mut pexp = Vec::with_capacity(m);
        let mut qvec = Vec::with_capacity(m);
        let mut next = Vec::with_capacity(m);
        for k in 0..m {
            let (r, quotient) = if k + 1 < m {
                let other = &x[k + 1];
                let r = match l {
                    Threshold::Infinite => 0,
                    Threshold::Finite(_) if other.is_exact_zero() => 0,
                    Threshold::Finite(_) => match other.valuation(ctx)? {
                        Valuation::Finite(e) => l.excess(d - e),
                        Valuation::Infinity => 0,
                    },
                };
                (
                    r,
                    other
                        .mul(ctx, &inv)?
                        .mul_rational(ctx, &ctx.pow_rational(r))?,
                )
            } else {
                let r = l.excess(d);
                (r, inv.mul_rational(ctx, &ctx.pow_rational(r))?)
            };
            let q = quotient.integral_part(ctx)?;
            next.push(quotient.sub_rational(ctx, &q)?);
            pexp.push(r as u32);
            qvec.push(q);
        }
        Ok(Some(Step {
            digit: Digit::MultiDim(DigitMD { pexp, qvec }),
            next,
            pivot_ord: d,
        }))
    }

    fn step_brun<S: PadicScalar>(&self, x: &[S]) -> Result<Option<Step<S>>> {
        let ctx = &self.ctx;
        let ords = x
            .iter()
            .map(|c| c.valuation(ctx))
            .collect::<Result<Vec<_>>>()?;
        let best = *ords.iter().min().unwrap();
        let d = match best {
            Valuation::Infinity => return Ok(None),
            Valuation::Finite(d) => d,
        };
        let pivot = ords.iter().position(|&o| o == best).unwrap();
        let inv = x[pivot].inv(ctx)?;
        let mut qvec = Vec::with_capacity(x.len());
        let mut next = Vec::with_capacity(x.len());
        for (k, coord) in x.iter().enumerate() {
            let quotient = if k == pivot {
                inv.clone()
            } else {
                coord.mul(ctx, &inv)?
            };
            let q = quotient.integral_part(ctx)?;
            next.push(quotient.sub_rational(ctx, &q)?);
            qvec.push(q);
        }
        Ok(Some(Step {
            digit: Digit::Brun(DigitBrun { pivot, qvec }),
            next,
            pivot_ord: d,
        }))
    }

    /// Iterates [`step`](Self::step) up to `max_steps` times.
    pub fn expand<S: PadicScalar>(&self, x: &[S], max_steps: usize) -> Result<Expansion> {
        let mut steps = Vec::new();
        let mut point = x.to_vec();
        for j in 0..max_steps {
            match self.step(&point) {
                Ok(Some(step)) => {
                    steps.push(StepRecord {
                        j,
                        digit: step.digit,
                        ord_consumed: step.pivot_ord,
                    });
                    point = step.next;
                }
                Ok(None) => {
                    return Ok(Expansion {
                        steps,
                        status: Status::Terminated(j),
                    })
                }
                Err(Error::PrecisionExhausted) => {
                    return Ok(Expansion {
                        steps,
                        status: Status::PrecisionExhausted(j),
                    })
                }
                Err(e) if j == 0 => return Err(e),
                Err(e) => unreachable!("step {j} failed after a valid start: {e}"),
            }
        }
        Ok(Expansion {
            steps,
            status: Status::Running,
        })
    }

    /// Checks that `d` is a digit of this algorithm and returns its branch
    /// parameters.
    pub fn branch_lft(&self, d: &Digit) -> Result<LftParams> {
        self.validate_digit(d)?;
        let ctx = &self.ctx;
        match d {
            Digit::OneDim(d) => LftParams::one_dim(ctx.pow_rational(d.k as i64), d.v.clone()),
            Digit::MultiDim(d) => {
                let m = d.pexp.len();
                LftParams::new(
                    0,
                    (0..m).map(|k| (k + 1) % m).collect(),
                    d.pexp.iter().map(|&r| ctx.pow_rational(r as i64)).collect(),
                    d.qvec.clone(),
                )
            }
            Digit::Brun(d) => {
                let m = d.qvec.len();
                LftParams::new(
                    d.pivot,
                    (0..m).collect(),
                    vec![Rational::one(); m],
                    d.qvec.clone(),
                )
            }
        }
    }

    /// The branch of `d` with its hyperbolicity certificate.
    pub fn branch(&self, d: &Digit) -> Result<HyperbolicLft> {
        self.branch_lft(d)?.hyperbolic(self.ctx)
    }

    fn invalid(&self, d: &Digit, why: &str) -> Error {
        Error::InvalidDigit(format!("{d} is not a digit of {:?}: {why}", self.variant))
    }

    pub fn validate_digit(&self, d: &Digit) -> Result<()> {
        let ctx = &self.ctx;
        match (self.variant, d) {
            (Variant::OneDim(l), Digit::OneDim(one)) => {
                let class = ctx
                    .j_class(&one.v)
                    .ok_or_else(|| self.invalid(d, "v is not in J"))?;
                let ok = match l {
                    Threshold::Finite(l) if one.k > 0 => class == l as i64,
                    Threshold::Finite(l) => 1 <= class && class <= l as i64,
                    Threshold::Infinite => one.k == 0 && class >= 1,
                };
                if ok {
                    Ok(())
                } else {
                    Err(self.invalid(d, "(k, v) outside the branch family"))
                }
            }
            (Variant::MultiDim(l, m), Digit::MultiDim(md)) => {
                if md.pexp.len() != m || md.qvec.len() != m {
                    return Err(self.invalid(d, "wrong length"));
                }
                let last = ctx
                    .j_class(&md.qvec[m - 1])
                    .ok_or_else(|| self.invalid(d, "last q is not in J"))?;
                let r_last = md.pexp[m - 1] as i64;
                // depth = ord of the pivot coordinate
                let depth = match l {
                    Threshold::Infinite if r_last == 0 && last >= 1 => last,
                    Threshold::Finite(l) if r_last > 0 && last == l as i64 => l as i64 + r_last,
                    Threshold::Finite(l) if r_last == 0 && 1 <= last && last <= l as i64 => last,
                    _ => return Err(self.invalid(d, "last coordinate outside the branch family")),
                };
                for k in 0..m - 1 {
                    let r = md.pexp[k] as i64;
                    let q = &md.qvec[k];
                    let ok = if q.is_zero() {
                        r == 0
                    } else {
                        match (ctx.j_class(q), l) {
                            (None, _) => false,
                            (Some(e), Threshold::Infinite) => r == 0 && e < depth,
                            (Some(e), Threshold::Finite(l)) => {
                                let l = l as i64;
                                if r == 0 {
                                    e <= l.min(depth - 1)
                                } else {
                                    e == l && r <= depth - 1 - l
                                }
                            }
                        }
                    };
                    if !ok {
                        return Err(self.invalid(d, "coordinate outside the branch family"));
                    }
                }
                Ok(())
            }
            (Variant::Brun(m), Digit::Brun(b)) => {
                if b.qvec.len() != m || b.pivot >= m {
                    return Err(self.invalid(d, "wrong length or pivot"));
                }
                match ctx.j_class(&b.qvec[b.pivot]) {
                    Some(depth) if depth >= 1 => {}
                    _ => return Err(self.invalid(d, "pivot q is not in J_n, n >= 1")),
                }
                for (k, q) in b.qvec.iter().enumerate() {
                    let ok = match k.cmp(&b.pivot) {
                        Ordering::Less => q.is_zero(),
                        Ordering::Equal => true,
                        Ordering::Greater => q.is_zero() || ctx.in_j(q, 0),
                    };
                    if !ok {
                        return Err(self.invalid(d, "coordinate outside the branch family"));
                    }
                }
                Ok(())
            }
            _ => Err(self.invalid(d, "digit kind does not match the algorithm")),
        }
    }

    /// `pi(x; j)`: the inverse branches of `digits` composed and applied to
    /// the origin, innermost last.
    pub fn convergent(&self, digits: &[Digit]) -> Result<Vec<Rational>> {
        let mut y = vec![Rational::zero(); self.dim()];
        for d in digits.iter().rev() {
            y = self.branch(d)?.apply_inverse(&y)?;
        }
        Ok(y)
    }

    /// Convergents of every prefix `digits[..=j]`, read off running
    /// products of the inverse branch matrices.
    pub fn convergents(&self, digits: &[Digit]) -> Result<Vec<Vec<Rational>>> {
        let n = self.dim() + 1;
        let mut prod: Vec<Vec<Rational>> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        if r == c {
                            Rational::one()
                        } else {
                            Rational::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(digits.len());
        for d in digits {
            let mat = self.branch(d)?.inverse_matrix();
            prod = (0..n)
                .map(|r| {
                    (0..n)
                        .map(|c| {
                            (0..n)
                                .filter(|&k| !prod[r][k].is_zero() && !mat[k][c].is_zero())
                                .map(|k| &prod[r][k] * &mat[k][c])
                                .sum()
                        })
                        .collect()
                })
                .collect();
            let den = &prod[0][0];
            if den.is_zero() {
                return Err(Error::DivisionByZero);
            }
            out.push((1..n).map(|k| &prod[k][0] / den).collect());
        }
        Ok(out)
    }

    /// Branch families with `iota <= p^max_exp`, in increasing `iota`.
    pub fn branch_classes(&self, max_exp: i64) -> Result<Vec<BranchClass>> {
        let ctx = &self.ctx;
        let mut out = Vec::new();
        match self.variant {
            Variant::OneDim(Threshold::Infinite) => {
                for j in 1..=max_exp / 2 {
                    out.push(self.one_dim_class(0, j, 2 * j));
                }
            }
            Variant::OneDim(Threshold::Finite(l)) => {
                let l = l as i64;
                for j in 1..=l {
                    if 2 * j <= max_exp {
                        out.push(self.one_dim_class(0, j, 2 * j));
                    }
                }
                for k in 1..=(max_exp - 2 * l) {
                    out.push(self.one_dim_class(k as u32, l, k + 2 * l));
                }
            }
            Variant::MultiDim(l, m) => {
                let m_i = m as i64;
                for depth in 1..=max_exp {
                    let (last_exp, last_class) = match l {
                        Threshold::Infinite => (0, depth),
                        Threshold::Finite(l) => {
                            let u = depth.min(l as i64);
                            (depth - u, u)
                        }
                    };
                    let base_exp = m_i * depth + last_class;
                    let options = coord_options(l, depth);
                    let mut stack: Vec<(Vec<CoordChoice>, i64, BigInt)> =
                        vec![(Vec::new(), base_exp, ctx.j_count(last_class))];
                    while let Some((chosen, exp, count)) = stack.pop() {
                        if chosen.len() == m - 1 {
                            if exp <= max_exp {
                                out.push(BranchClass {
                                    iota_exp: exp,
                                    count,
                                    shape: ClassShape::MultiDim {
                                        last_exp: last_exp as u32,
                                        last_class,
                                        others: chosen,
                                    },
                                });
                            }
                            continue;
                        }
                        // iota only shrinks through larger r; prune with the
                        // largest r available to the remaining coordinates.
                        let max_r = options
                            .iter()
                            .map(|c| match c {
                                CoordChoice::Zero => 0,
                                CoordChoice::Class { r, .. } => *r as i64,
                            })
                            .max()
                            .unwrap_or(0);
                        let remaining = (m - 1 - chosen.len()) as i64;
                        if exp - remaining * max_r > max_exp {
                            continue;
                        }
                        for c in &options {
                            let (r, n) = match c {
                                CoordChoice::Zero => (0, BigInt::one()),
                                CoordChoice::Class { r, e } => (*r as i64, ctx.j_count(*e)),
                            };
                            let mut next = chosen.clone();
                            next.push(*c);
                            stack.push((next, exp - r, &count * n));
                        }
                    }
                }
            }
            Variant::Brun(_) => {
                return Err(Error::Unsupported(
                    "no closed-form branch family is used for Brun".into(),
                ))
            }
        }
        out.sort_by_key(|c| c.iota_exp);
        Ok(out)
    }

    fn one_dim_class(&self, k: u32, j: i64, iota_exp: i64) -> BranchClass {
        BranchClass {
            iota_exp,
            count: self.ctx.j_count(j),
            shape: ClassShape::OneDim { k, j },
        }
    }

    fn expand_class(&self, class: &BranchClass) -> Vec<Digit> {
        let ctx = &self.ctx;
        match &class.shape {
            ClassShape::OneDim { k, j } => ctx
                .j_members(*j)
                .into_iter()
                .map(|v| Digit::one_dim(*k, v))
                .collect(),
            ClassShape::MultiDim {
                last_exp,
                last_class,
                others,
            } => {
                let mut partial: Vec<(Vec<u32>, Vec<Rational>)> = vec![(Vec::new(), Vec::new())];
                for c in others {
                    let (r, members) = match c {
                        CoordChoice::Zero => (0, vec![Rational::zero()]),
                        CoordChoice::Class { r, e } => (*r, ctx.j_members(*e)),
                    };
                    partial = partial
                        .into_iter()
                        .flat_map(|(pe, qs)| {
                            members.iter().map(move |q| {
                                let mut pe = pe.clone();
                                let mut qs = qs.clone();
                                pe.push(r);
                                qs.push(q.clone());
                                (pe, qs)
                            })
                        })
                        .collect();
                }
                let last_members = ctx.j_members(*last_class);
                partial
                    .into_iter()
                    .flat_map(|(pe, qs)| {
                        last_members.iter().map(move |q| {
                            let mut pexp = pe.clone();
                            let mut qvec = qs.clone();
                            pexp.push(*last_exp);
                            qvec.push(q.clone());
                            Digit::MultiDim(DigitMD { pexp, qvec })
                        })
                    })
                    .collect()
            }
        }
    }

    /// Every branch with `iota <= p^max_exp`, exactly once, ordered by
    /// `iota` and then lexicographically by digit.
    pub fn enumerate_branches(&self, max_exp: i64) -> Result<Vec<(Digit, HyperbolicLft)>> {
        let mut digits: Vec<(i64, Digit)> = Vec::new();
        for class in self.branch_classes(max_exp)? {
            for d in self.expand_class(&class) {
                digits.push((class.iota_exp, d));
            }
        }
        digits.sort_by(|(ea, a), (eb, b)| ea.cmp(eb).then_with(|| a.sort_key().cmp(&b.sort_key())));
        digits
            .into_iter()
            .map(|(_, d)| {
                let f = self.branch(&d)?;
                Ok((d, f))
            })
            .collect()
    }

    /// `sum 1/iota(F)` over branches with `iota <= p^max_exp`.
    pub fn iota_sum(&self, max_exp: i64) -> Result<Rational> {
        Ok(self
            .branch_classes(max_exp)?
            .iter()
            .map(|c| Rational::from_integer(c.count.clone()) * self.ctx.pow_rational(-c.iota_exp))
            .sum())
    }

    /// A Haar-random point of `(pZ_p)^m` with `n` digits per coordinate.
    pub fn haar_point<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<PadicApprox> {
        (0..self.dim())
            .map(|_| haar_sample_rng(self.ctx, n, rng))
            .collect()
    }
}

/// Options for a non-final coordinate of a `T_{l,m}` digit whose pivot has
/// valuation `depth`.
fn coord_options(l: Threshold, depth: i64) -> Vec<CoordChoice> {
    let mut out = vec![CoordChoice::Zero];
    match l {
        Threshold::Infinite => {
            out.extend((0..depth).map(|e| CoordChoice::Class { r: 0, e }));
        }
        Threshold::Finite(l) => {
            let l = l as i64;
            out.extend((0..=l.min(depth - 1)).map(|e| CoordChoice::Class { r: 0, e }));
            out.extend((1..=depth - 1 - l).map(|r| CoordChoice::Class { r: r as u32, e: l }));
        }
    }
    out
}

fn pivot_ord<S: PadicScalar>(ctx: &PrimeCtx, x: &S) -> Result<i64> {
    match x.valuation(ctx)? {
        Valuation::Finite(d) => Ok(d),
        Valuation::Infinity => Err(Error::DivisionByZero),
    }
}

/// `(a, b) = (v, k)` for a one-dimensional digit.
pub fn digit_functionals(d: &Digit1D) -> (Rational, u32) {
    (d.v.clone(), d.k)
}
