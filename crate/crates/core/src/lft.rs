//! m-dimensional linear fractional transformations over Q_p.
//!
//! An LFT with parameter `(i, sigma, p, q)` maps `x` to `y` with
//!
//! ```text
//! y_k = p_k / x_i - q_k                 if k = s := sigma^-1(i)
//! y_k = p_k * x_sigma(k) / x_i - q_k    otherwise
//! ```
//!
//! Indices are zero-based in the Rust API and one-based in the JSON record
//! format.

use std::fmt;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{
    format_rational, parse_rational, Ball, PadicScalar, PrimeCtx, ProductCylinder, Rational,
    Valuation,
};

/// One of the four hyperbolicity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// (i) every `p_k` is nonzero with `ord(p_k) >= 0`.
    IntegralNumerators,
    /// (ii) `ord(q_s) <= 0` and `ord(p_s / q_s) > 0`.
    PivotContracts,
    /// (iii) `k != s`, `ord(q_k) <= 0` implies `ord(p_s/q_s) > ord(p_k/q_k)`.
    PivotDominatesShift,
    /// (iv) `k != s`, `ord(q_k) > 0` implies `ord(p_s/q_s) > ord(p_k)`.
    PivotDominatesNumerator,
}

impl Condition {
    pub fn number(self) -> u8 {
        match self {
            Condition::IntegralNumerators => 1,
            Condition::PivotContracts => 2,
            Condition::PivotDominatesShift => 3,
            Condition::PivotDominatesNumerator => 4,
        }
    }
}

/// Why a transformation is not hyperbolic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Violation {
    pub condition: Condition,
    /// Zero-based coordinate at which the condition fails.
    pub index: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let roman = ["i", "ii", "iii", "iv"][self.condition.number() as usize - 1];
        write!(
            f,
            "condition ({roman}) fails at coordinate {}",
            self.index + 1
        )
    }
}

impl std::error::Error for Violation {}

/// The valuation data of a hyperbolic transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HyperbolicCert {
    /// `-ord(q_s)`
    pub u: i64,
    /// `ord(p_s)`
    pub v: i64,
    /// `max_k ord(p_s) - ord(p_k)`
    pub h: i64,
}

/// Parameter `(i, sigma, p, q)` of an LFT.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LftParams {
    pivot: usize,
    sigma: Vec<usize>,
    pvec: Vec<Rational>,
    qvec: Vec<Rational>,
    s: usize,
}

impl LftParams {
    /// `pivot` and `sigma` are zero-based; `sigma[k]` is the image of `k`.
    pub fn new(
        pivot: usize,
        sigma: Vec<usize>,
        pvec: Vec<Rational>,
        qvec: Vec<Rational>,
    ) -> Result<Self> {
        let m = sigma.len();
        if m == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if pvec.len() != m || qvec.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: if pvec.len() != m {
                    pvec.len()
                } else {
                    qvec.len()
                },
            });
        }
        if pivot >= m {
            return Err(Error::InvalidParams(format!("pivot {pivot} out of range")));
        }
        let mut seen = vec![false; m];
        for &j in &sigma {
            if j >= m || seen[j] {
                return Err(Error::InvalidParams(format!(
                    "sigma {sigma:?} is not a permutation"
                )));
            }
            seen[j] = true;
        }
        if pvec.iter().any(Zero::is_zero) {
            return Err(Error::InvalidParams("p entries must be nonzero".into()));
        }
        let s = sigma.iter().position(|&j| j == pivot).unwrap();
        Ok(LftParams {
            pivot,
            sigma,
            pvec,
            qvec,
            s,
        })
    }

    /// The one-dimensional map `x -> p1 / x - q1`.
    pub fn one_dim(p1: Rational, q1: Rational) -> Result<Self> {
        Self::new(0, vec![0], vec![p1], vec![q1])
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn pvec(&self) -> &[Rational] {
        &self.pvec
    }

    pub fn qvec(&self) -> &[Rational] {
        &self.qvec
    }

    /// `sigma^-1(i)`.
    pub fn s(&self) -> usize {
        self.s
    }

    fn sigma_inv(&self, k: usize) -> usize {
        self.sigma.iter().position(|&j| j == k).unwrap()
    }

    /// Checks the four hyperbolicity conditions in order.
    pub fn is_hyperbolic(&self, ctx: &PrimeCtx) -> std::result::Result<HyperbolicCert, Violation> {
        let fail = |condition, index| Violation { condition, index };
        let ordp: Vec<Valuation> = self.pvec.iter().map(|x| ctx.ord(x)).collect();
        for (k, o) in ordp.iter().enumerate() {
            if *o < Valuation::Finite(0) || o.is_infinite() {
                return Err(fail(Condition::IntegralNumerators, k));
            }
        }
        let ordp: Vec<i64> = ordp.iter().map(|o| o.finite().unwrap()).collect();
        let s = self.s;
        let ord_qs = match ctx.ord(&self.qvec[s]) {
            Valuation::Finite(d) if d <= 0 => d,
            _ => return Err(fail(Condition::PivotContracts, s)),
        };
        // ord(p_s / q_s)
        let pivot_gap = ordp[s] - ord_qs;
        if pivot_gap <= 0 {
            return Err(fail(Condition::PivotContracts, s));
        }
        for k in (0..self.dim()).filter(|&k| k != s) {
            match ctx.ord(&self.qvec[k]) {
                Valuation::Finite(d) if d <= 0 => {
                    if pivot_gap - (ordp[k] - d) <= 0 {
                        return Err(fail(Condition::PivotDominatesShift, k));
                    }
                }
                // ord(q_k) > 0, including q_k = 0
                _ => {
                    if pivot_gap - ordp[k] <= 0 {
                        return Err(fail(Condition::PivotDominatesNumerator, k));
                    }
                }
            }
        }
        let h = ordp.iter().map(|o| ordp[s] - o).max().unwrap();
        Ok(HyperbolicCert {
            u: -ord_qs,
            v: ordp[s],
            h,
        })
    }

    /// Validates and attaches the certificate.
    pub fn hyperbolic(self, ctx: PrimeCtx) -> Result<HyperbolicLft> {
        let cert = self.is_hyperbolic(&ctx).map_err(Error::NotHyperbolic)?;
        Ok(HyperbolicLft {
            ctx,
            params: self,
            cert,
        })
    }

    /// The sufficient criterion: under the valuation preconditions, `F` is
    /// hyperbolic as soon as one point of `(pZ_p)^m` is mapped back into
    /// `(pZ_p)^m`. Returns whether `witness` is such a point.
    pub fn sufficient_hyperbolic<S: PadicScalar>(
        &self,
        ctx: &PrimeCtx,
        witness: &[S],
    ) -> Result<bool> {
        let s = self.s;
        if ctx.ord(&self.qvec[s]) > Valuation::Finite(0) {
            return Err(Error::InvalidParams("ord(q_s) must be <= 0".into()));
        }
        for (p, q) in self.pvec.iter().zip(&self.qvec) {
            let op = ctx.ord(p);
            if op < Valuation::Finite(0) || op.is_infinite() {
                return Err(Error::InvalidParams("every p_k must have ord >= 0".into()));
            }
            if ctx.ord(q) > Valuation::Finite(0) && op != Valuation::Finite(0) {
                return Err(Error::InvalidParams(
                    "ord(q_k) > 0 requires ord(p_k) = 0".into(),
                ));
            }
        }
        for x in witness {
            if !in_pzp(ctx, x)? {
                return Err(Error::OutsideDomain("witness is not in (pZ_p)^m".into()));
            }
        }
        let image = self.apply_forward(ctx, witness)?;
        for y in &image {
            if !in_pzp(ctx, y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `F(x)`.
    pub fn apply_forward<S: PadicScalar>(&self, ctx: &PrimeCtx, x: &[S]) -> Result<Vec<S>> {
        self.check_dim(x.len())?;
        let inv_pivot = x[self.pivot].inv(ctx)?;
        (0..self.dim())
            .map(|k| {
                let scaled = if k == self.s {
                    inv_pivot.mul_rational(ctx, &self.pvec[k])?
                } else {
                    x[self.sigma[k]]
                        .mul(ctx, &inv_pivot)?
                        .mul_rational(ctx, &self.pvec[k])?
                };
                scaled.sub_rational(ctx, &self.qvec[k])
            })
            .collect()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    pub fn to_record(&self) -> LftRecord {
        LftRecord {
            m: self.dim(),
            i: self.pivot + 1,
            sigma: self.sigma.iter().map(|j| j + 1).collect(),
            p: self.pvec.iter().map(format_rational).collect(),
            q: self.qvec.iter().map(format_rational).collect(),
        }
    }

    pub fn from_record(rec: &LftRecord) -> Result<Self> {
        if rec.i == 0 || rec.sigma.contains(&0) {
            return Err(Error::Parse("indices in LFT records are one-based".into()));
        }
        let params = Self::new(
            rec.i - 1,
            rec.sigma.iter().map(|j| j - 1).collect(),
            rec.p
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<_>>()?,
            rec.q
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<_>>()?,
        )?;
        if params.dim() != rec.m {
            return Err(Error::DimensionMismatch {
                expected: rec.m,
                got: params.dim(),
            });
        }
        Ok(params)
    }
}

fn in_pzp<S: PadicScalar>(ctx: &PrimeCtx, x: &S) -> Result<bool> {
    Ok(x.valuation(ctx)? >= Valuation::Finite(1))
}

/// JSON record `{m, i, sigma, p, q}` with one-based indices and `num/den`
/// strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LftRecord {
    pub m: usize,
    pub i: usize,
    pub sigma: Vec<usize>,
    pub p: Vec<String>,
    pub q: Vec<String>,
}

/// A transformation known to be hyperbolic for a fixed prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperbolicLft {
    ctx: PrimeCtx,
    params: LftParams,
    cert: HyperbolicCert,
}

impl HyperbolicLft {
    pub fn params(&self) -> &LftParams {
        &self.params
    }

    pub fn cert(&self) -> HyperbolicCert {
        self.cert
    }

    pub fn ctx(&self) -> PrimeCtx {
        self.ctx
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn apply_forward<S: PadicScalar>(&self, x: &[S]) -> Result<Vec<S>> {
        self.params.apply_forward(&self.ctx, x)
    }

    /// `F^-1(y)` for `y` in `(pZ_p)^m`:
    ///
    /// ```text
    /// x_i = p_s / (y_s + q_s)
    /// x_k = p_s (y_t + q_t) / (p_t (y_s + q_s)),  t = sigma^-1(k)
    /// ```
    pub fn apply_inverse<S: PadicScalar>(&self, y: &[S]) -> Result<Vec<S>> {
        let ctx = &self.ctx;
        let f = &self.params;
        f.check_dim(y.len())?;
        for coord in y {
            if !in_pzp(ctx, coord).or_else(|e| match e {
                // zero at a precision of at least one digit is still in pZ_p
                Error::PrecisionExhausted => Ok(true),
                e => Err(e),
            })? {
                return Err(Error::OutsideDomain(
                    "F^-1 is applied on (pZ_p)^m only".into(),
                ));
            }
        }
        let s = f.s;
        let inv_den = y[s].add_rational(ctx, &f.qvec[s])?.inv(ctx)?;
        (0..f.dim())
            .map(|k| {
                if k == f.pivot {
                    inv_den.mul_rational(ctx, &f.pvec[s])
                } else {
                    let t = f.sigma_inv(k);
                    let ratio = &f.pvec[s] / &f.pvec[t];
                    y[t].add_rational(ctx, &f.qvec[t])?
                        .mul(ctx, &inv_den)?
                        .mul_rational(ctx, &ratio)
                }
            })
            .collect()
    }

    /// `F^-1` on homogeneous coordinates `(Y_0 : Y_1 : ... : Y_m)` with
    /// `y_k = Y_k / Y_0`, as an `(m+1) x (m+1)` matrix:
    ///
    /// ```text
    /// X_0 = Y_s + q_s Y_0
    /// X_i = p_s Y_0
    /// X_k = (p_s / p_t)(Y_t + q_t Y_0)
    /// ```
    pub fn inverse_matrix(&self) -> Vec<Vec<Rational>> {
        let f = &self.params;
        let m = f.dim();
        let mut rows = vec![vec![Rational::zero(); m + 1]; m + 1];
        rows[0][0] = f.qvec[f.s].clone();
        rows[0][f.s + 1] = Rational::one();
        for k in 0..m {
            if k == f.pivot {
                rows[k + 1][0] = f.pvec[f.s].clone();
            } else {
                let t = f.sigma_inv(k);
                let ratio = &f.pvec[f.s] / &f.pvec[t];
                rows[k + 1][0] = &ratio * &f.qvec[t];
                rows[k + 1][t + 1] = ratio;
            }
        }
        rows
    }

    /// `mv + (m+1)u - sum_{t != s} ord(p_t)`.
    pub fn iota_exponent(&self) -> i64 {
        let m = self.dim() as i64;
        let HyperbolicCert { u, v, .. } = self.cert;
        let rest: i64 = (0..self.dim())
            .filter(|&t| t != self.params.s)
            .map(|t| self.ctx.ord(&self.params.pvec[t]).finite().unwrap())
            .sum();
        m * v + (m + 1) * u - rest
    }

    /// The constant Jacobian factor `iota(F)`: `F^-1` scales Haar measure by
    /// `1 / iota(F)`.
    pub fn iota(&self) -> Rational {
        self.ctx.pow_rational(self.iota_exponent())
    }

    /// `F^-1(a + (p^n Z_p)^m)` as the disjoint union of the `p^h` product
    /// cylinders `V^(y)`, `0 <= y < p^h`.
    pub fn preimage_cylinder(&self, c: &ProductCylinder) -> Result<Vec<ProductCylinder>> {
        let ctx = self.ctx;
        let f = &self.params;
        if c.ctx() != ctx {
            return Err(Error::PrimeMismatch(ctx.p(), c.ctx().p()));
        }
        f.check_dim(c.dim())?;
        let n = c
            .uniform_level()
            .ok_or_else(|| Error::InvalidBall("cylinder levels must agree".into()))?;
        if c.balls().iter().any(|b| !b.in_pzp()) {
            return Err(Error::InvalidBall("cylinder must lie in (pZ_p)^m".into()));
        }
        let a = c.center();
        let HyperbolicCert { u, v, h } = self.cert;
        let s = f.s;
        let base = &f.pvec[s] / (&a[s] + &f.qvec[s]);
        let step = ctx.pow_rational(n + v + 2 * u);
        let count = ctx.pow(h as u32);
        let mut pieces = Vec::new();
        let mut y = num_bigint::BigInt::zero();
        while y < count {
            let offset = &base + &step * Rational::from_integer(y.clone());
            let balls = (0..f.dim())
                .map(|k| {
                    if k == f.pivot {
                        Ball::new(ctx, &offset, n + v + 2 * u + h)
                    } else {
                        let t = f.sigma_inv(k);
                        let ord_pt = ctx.ord(&f.pvec[t]).finite().unwrap();
                        let center = &offset * (&a[t] + &f.qvec[t]) / &f.pvec[t];
                        Ball::new(ctx, &center, n + v + u - ord_pt)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            pieces.push(ProductCylinder::new(balls)?);
            y += 1;
        }
        Ok(pieces)
    }
}

fn random_unit<R: Rng + ?Sized>(ctx: PrimeCtx, rng: &mut R) -> Rational {
    let p = ctx.p();
    let hi = (3 * p * p) as i64;
    let draw = |rng: &mut R| loop {
        let n = rng.gen_range(1..hi);
        if !(n as u64).is_multiple_of(p) {
            break n;
        }
    };
    let num = draw(rng) * if rng.gen_bool(0.5) { 1 } else { -1 };
    let den = if rng.gen_bool(0.5) { draw(rng) } else { 1 };
    crate::padic::rat(num, den)
}

/// A random hyperbolic transformation of dimension `m`.
///
/// Draws `sigma` and `i` uniformly, then valuation targets that satisfy the
/// four conditions with the strict inequalities holding by at least one, and
/// finally random p-adic unit factors. Keeps `v, u <= 2`, so `h <= 2`.
pub fn random_hyperbolic<R: Rng + ?Sized>(ctx: PrimeCtx, m: usize, rng: &mut R) -> HyperbolicLft {
    assert!(m >= 1);
    let mut sigma: Vec<usize> = (0..m).collect();
    sigma.shuffle(rng);
    let pivot = rng.gen_range(0..m);
    let s = sigma.iter().position(|&j| j == pivot).unwrap();
    let (v, u) = loop {
        let v: i64 = rng.gen_range(0..=2);
        let u: i64 = rng.gen_range(0..=2);
        if v + u >= 1 {
            break (v, u);
        }
    };
    let mut pvec = vec![Rational::one(); m];
    let mut qvec = vec![Rational::zero(); m];
    pvec[s] = ctx.pow_rational(v) * random_unit(ctx, rng);
    qvec[s] = ctx.pow_rational(-u) * random_unit(ctx, rng);
    for k in (0..m).filter(|&k| k != s) {
        let ord_p = rng.gen_range(0..v + u);
        pvec[k] = ctx.pow_rational(ord_p) * random_unit(ctx, rng);
        qvec[k] = match rng.gen_range(0..3) {
            0 => Rational::zero(),
            1 => ctx.pow_rational(rng.gen_range(1..=3)) * random_unit(ctx, rng),
            _ => {
                let lo = ord_p - (v + u) + 1;
                ctx.pow_rational(rng.gen_range(lo..=0)) * random_unit(ctx, rng)
            }
        };
    }
    LftParams::new(pivot, sigma, pvec, qvec)
        .and_then(|f| f.hyperbolic(ctx))
        .expect("generator targets satisfy every condition")
}
