//! Exact cylinder measures and Monte Carlo statistics for the invariant
//! measure `mu_m` (Haar measure on `(pZ_p)^m`, normalized to 1).

use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::padic::{format_rational, PadicApprox, ProductCylinder, Rational};
use crate::system::{Digit, Status, SystemSpec, Threshold, Variant};

/// `xi(l_1, ..., l_n)`: the points whose first `n` digits are the word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicCylinder {
    system: SystemSpec,
    word: Vec<Digit>,
}

impl SymbolicCylinder {
    pub fn new(system: SystemSpec, word: Vec<Digit>) -> Result<Self> {
        for d in &word {
            system.validate_digit(d)?;
        }
        Ok(SymbolicCylinder { system, word })
    }

    /// The whole space `(pZ_p)^m`.
    pub fn full(system: SystemSpec) -> Self {
        SymbolicCylinder {
            system,
            word: Vec::new(),
        }
    }

    pub fn system(&self) -> SystemSpec {
        self.system
    }

    pub fn word(&self) -> &[Digit] {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    /// `xi(l, w)`, i.e. `F_l^{-1}(xi(w))`.
    pub fn prepend(&self, letter: &Digit) -> Result<Self> {
        self.system.validate_digit(letter)?;
        let mut word = Vec::with_capacity(self.word.len() + 1);
        word.push(letter.clone());
        word.extend(self.word.iter().cloned());
        Ok(SymbolicCylinder {
            system: self.system,
            word,
        })
    }

    pub fn concat(&self, other: &SymbolicCylinder) -> Result<Self> {
        same_system(self, other)?;
        let mut word = self.word.clone();
        word.extend(other.word.iter().cloned());
        Ok(SymbolicCylinder {
            system: self.system,
            word,
        })
    }

    /// `xi(u) ∩ xi(w)`: the longer cylinder when one word extends the
    /// other, otherwise empty (`None`).
    pub fn intersect(&self, other: &SymbolicCylinder) -> Result<Option<Self>> {
        same_system(self, other)?;
        let (short, long) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        Ok(long.word.starts_with(&short.word).then(|| long.clone()))
    }

    /// Whether the first `n` digits of `x` spell the word. Points whose
    /// orbit reaches 0 first lie in no cylinder of that length.
    pub fn contains_point(&self, x: &[PadicApprox]) -> Result<bool> {
        let e = self.system.expand(x, self.word.len())?;
        if let Status::PrecisionExhausted(_) = e.status {
            return Err(Error::PrecisionExhausted);
        }
        Ok(e.steps.len() == self.word.len()
            && e.steps.iter().zip(&self.word).all(|(s, d)| &s.digit == d))
    }
}

fn same_system(a: &SymbolicCylinder, b: &SymbolicCylinder) -> Result<()> {
    if a.system != b.system {
        return Err(Error::IncompatibleWords(format!(
            "cylinders of {:?} and {:?}",
            a.system.variant(),
            b.system.variant()
        )));
    }
    Ok(())
}

/// `prod_j 1/iota(F_{l_j})`.
pub fn cylinder_measure(c: &SymbolicCylinder) -> Result<Rational> {
    let mut m = Rational::one();
    for d in &c.word {
        m *= c.system.branch(d)?.iota().recip();
    }
    Ok(m)
}

/// `sum 1/iota(F)` over the branches with `iota <= p^max_exp`.
pub fn iota_sum(s: &SystemSpec, max_exp: i64) -> Result<Rational> {
    s.iota_sum(max_exp)
}

/// Almost-everywhere limits of the averages of `a = v` and `b = k` over
/// the digits `(k, v)` of `T_l`: `(p/2, p/(p^l (p-1)))`.
pub fn theoretical_digit_means(p: u64, l: Threshold) -> (Rational, Rational) {
    let pr = Rational::from_integer(p.into());
    let mean_a = &pr / Rational::from_integer(2.into());
    let mean_b = match l {
        Threshold::Infinite => Rational::zero(),
        Threshold::Finite(l) => {
            &pr / (Rational::from_integer(num_bigint::BigInt::from(p).pow(l))
                * (&pr - Rational::one()))
        }
    };
    (mean_a, mean_b)
}

/// A Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub estimate: f64,
    pub stderr: f64,
    #[serde(serialize_with = "serialize_opt_rational")]
    pub theoretical: Option<Rational>,
    pub n_samples: u64,
    pub n_steps: u64,
    pub seed: u64,
}

fn serialize_opt_rational<S: Serializer>(
    r: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&format_rational(r)),
        None => s.serialize_none(),
    }
}

impl StatReport {
    /// `|estimate - theoretical| <= k * stderr`; `None` without a
    /// theoretical value.
    pub fn within(&self, k: f64) -> Option<bool> {
        let t = self.theoretical.as_ref()?.to_f64()?;
        Some((self.estimate - t).abs() <= k * self.stderr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// `a(k, v) = v`
    A,
    /// `b(k, v) = k`
    B,
}

/// Digits of precision per sample for `steps` steps of a one-dimensional
/// system. A step at valuation `d` uses at most `2d` digits and
/// `E[d] = p/(p-1)`; the rest is headroom. Never below `4 * steps`.
pub fn birkhoff_precision(p: u64, steps: u64) -> usize {
    let per_step = 2.0 * p as f64 / (p as f64 - 1.0);
    let heuristic = (per_step * steps as f64 * 1.25).ceil() as usize + 64;
    heuristic.max(4 * steps as usize)
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index))
}

struct SampleSums {
    a: Rational,
    b: i64,
    count: u64,
}

/// Averages of both functionals along the same orbits: `(a, b)`.
///
/// Sample `i` is drawn from seed `seed + i`. The estimate is the ratio of
/// exact sums over all completed digits; the standard error treats each
/// orbit as one independent batch.
pub fn birkhoff_averages(
    s: &SystemSpec,
    n_samples: u64,
    n_steps: u64,
    seed: u64,
) -> Result<(StatReport, StatReport)> {
    let precision = birkhoff_precision(s.ctx().p(), n_steps);
    birkhoff_averages_at(s, n_samples, n_steps, seed, precision)
}

/// As [`birkhoff_averages`] with `precision` digits per sample.
pub fn birkhoff_averages_at(
    s: &SystemSpec,
    n_samples: u64,
    n_steps: u64,
    seed: u64,
    precision: usize,
) -> Result<(StatReport, StatReport)> {
    let l = match s.variant() {
        Variant::OneDim(l) => l,
        other => {
            return Err(Error::Unsupported(format!(
                "digit averages are defined for one-dimensional systems, not {other:?}"
            )))
        }
    };
    if n_samples == 0 || n_steps == 0 {
        return Err(Error::InvalidParams(
            "need at least one sample and one step".into(),
        ));
    }
    if precision == 0 {
        return Err(Error::InvalidParams("precision must be positive".into()));
    }
    let ctx = s.ctx();
    let per_sample: Vec<SampleSums> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<SampleSums> {
            let mut rng = sample_rng(seed, i);
            let x = s.haar_point(precision, &mut rng);
            let e = s.expand(&x, n_steps as usize)?;
            let mut sums = SampleSums {
                a: Rational::zero(),
                b: 0,
                count: 0,
            };
            for step in &e.steps {
                if let Digit::OneDim(d) = &step.digit {
                    sums.a += &d.v;
                    sums.b += d.k as i64;
                    sums.count += 1;
                }
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;

    let requested = n_samples * n_steps;
    let completed: u64 = per_sample.iter().map(|s| s.count).sum();
    if 2 * completed < requested {
        return Err(Error::InsufficientData {
            completed,
            requested,
        });
    }
    let total_a: Rational = per_sample.iter().map(|s| &s.a).sum();
    let total_b: i64 = per_sample.iter().map(|s| s.b).sum();
    let n = Rational::from_integer(completed.into());
    let mean_a = total_a / &n;
    let mean_b = Rational::from_integer(total_b.into()) / &n;

    let a_values: Vec<(f64, f64)> = per_sample
        .iter()
        .map(|s| (s.a.to_f64().unwrap_or(f64::NAN), s.count as f64))
        .collect();
    let b_values: Vec<(f64, f64)> = per_sample
        .iter()
        .map(|s| (s.b as f64, s.count as f64))
        .collect();
    let (theory_a, theory_b) = theoretical_digit_means(ctx.p(), l);
    let report = |mean: &Rational, values: &[(f64, f64)], theory: Rational| StatReport {
        estimate: mean.to_f64().unwrap_or(f64::NAN),
        stderr: ratio_stderr(mean, values),
        theoretical: Some(theory),
        n_samples,
        n_steps,
        seed,
    };
    Ok((
        report(&mean_a, &a_values, theory_a),
        report(&mean_b, &b_values, theory_b),
    ))
}

/// Standard error of the ratio estimator `sum y / sum c` over independent
/// `(y_i, c_i)`. Exactly zero when every residual vanishes.
fn ratio_stderr(mean: &Rational, values: &[(f64, f64)]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let r = mean.to_f64().unwrap_or(f64::NAN);
    let c_bar = values.iter().map(|(_, c)| c).sum::<f64>() / n;
    let ss: f64 = values.iter().map(|(y, c)| (y - r * c).powi(2)).sum();
    (ss / (n * (n - 1.0))).sqrt() / c_bar
}

pub fn birkhoff_average(
    s: &SystemSpec,
    functional: Functional,
    n_samples: u64,
    n_steps: u64,
    seed: u64,
) -> Result<StatReport> {
    let (a, b) = birkhoff_averages(s, n_samples, n_steps, seed)?;
    Ok(match functional {
        Functional::A => a,
        Functional::B => b,
    })
}

/// Digits of precision per coordinate for one step followed by a
/// membership test at `level`.
fn invariance_precision(level: i64) -> usize {
    level.max(1) as usize + 80
}

/// Fraction of Haar samples `x` with `T(x) ∈ c`, an estimate of
/// `mu(T^{-1} c)`. The stderr is the binomial one at `p = mu(c)`.
pub fn invariance_mc(
    s: &SystemSpec,
    c: &ProductCylinder,
    n_samples: u64,
    seed: u64,
) -> Result<StatReport> {
    if c.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: c.dim(),
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    let level = c.balls().iter().map(|b| b.level()).max().unwrap_or(1);
    let precision = invariance_precision(level);
    let outcomes: Vec<Option<bool>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let x = s.haar_point(precision, &mut rng);
            let image = match s.step(&x) {
                Ok(Some(step)) => step.next,
                Ok(None) => vec![PadicApprox::zero(s.ctx()); s.dim()],
                Err(_) => return None,
            };
            c.contains_approx(&image).ok()
        })
        .collect();
    let completed = outcomes.iter().filter(|o| o.is_some()).count() as u64;
    if 2 * completed < n_samples {
        return Err(Error::InsufficientData {
            completed,
            requested: n_samples,
        });
    }
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count() as f64;
    let mu = c.measure();
    let mu_f = mu.to_f64().unwrap_or(f64::NAN);
    Ok(StatReport {
        estimate: hits / completed as f64,
        stderr: (mu_f * (1.0 - mu_f) / completed as f64).sqrt(),
        theoretical: Some(mu),
        n_samples,
        n_steps: 1,
        seed,
    })
}

/// `T^{-1} c` restricted to the branches with `iota <= p^max_exp`: the
/// preimage pieces of `c` under each of them. A cylinder with balls of
/// different levels is first split into uniform ones.
pub fn preimage_decomposition(
    s: &SystemSpec,
    c: &ProductCylinder,
    max_exp: i64,
) -> Result<Vec<(Digit, Vec<ProductCylinder>)>> {
    let parts = c.refine_uniform()?;
    s.enumerate_branches(max_exp)?
        .into_iter()
        .map(|(d, f)| {
            let mut pieces = Vec::new();
            for part in &parts {
                pieces.extend(f.preimage_cylinder(part)?);
            }
            Ok((d, pieces))
        })
        .collect()
}

/// How the free middle block of a mixing word is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiddleBlock {
    /// Every branch; its mass is 1.
    Complete,
    /// Branches with `iota <= p^max_exp`.
    Truncated(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixingReport {
    pub lhs: Rational,
    pub rhs: Rational,
    /// Upper bound on `rhs - lhs` from the omitted branches.
    pub tail_bound: Rational,
}

/// `mu(T^{-n} A ∩ B)` against `mu(A) mu(B)`.
///
/// For `n >= |B|`, `T^{-n} A ∩ B` is the disjoint union of `xi(B w A)` over
/// words `w` of length `r = n - |B|`, so its measure is
/// `mu(A) mu(B) S^r` with `S` the mass of one letter.
pub fn mixing_exact(
    a: &SymbolicCylinder,
    b: &SymbolicCylinder,
    n: usize,
    middle: MiddleBlock,
) -> Result<MixingReport> {
    same_system(a, b)?;
    if n < b.len() {
        return Err(Error::WordTooShort { n, len: b.len() });
    }
    let r = n - b.len();
    let rhs = cylinder_measure(a)? * cylinder_measure(b)?;
    let letter_mass = match middle {
        MiddleBlock::Complete => Rational::one(),
        MiddleBlock::Truncated(max_exp) if r > 0 => a.system.iota_sum(max_exp)?,
        MiddleBlock::Truncated(_) => Rational::one(),
    };
    let lhs = &rhs * pow_rational(&letter_mass, r);
    let rr = Rational::from_integer(r.into());
    let tail_bound = &rhs * rr * (Rational::one() - &letter_mass);
    Ok(MixingReport {
        lhs,
        rhs,
        tail_bound,
    })
}

fn pow_rational(x: &Rational, e: usize) -> Rational {
    (0..e).fold(Rational::one(), |acc, _| acc * x)
}

/// The two conditional densities `mu(F^{-1}A ∩ F^{-1}X) / mu(F^{-1}A)` and
/// `mu(A ∩ X) / mu(A)` for `F` the branch of `letter`.
pub fn conditional_density_check(
    a: &SymbolicCylinder,
    x: &SymbolicCylinder,
    letter: &Digit,
) -> Result<(Rational, Rational)> {
    same_system(a, x)?;
    let ratio = |a: &SymbolicCylinder, x: &SymbolicCylinder| -> Result<Rational> {
        let meet = match a.intersect(x)? {
            Some(c) => cylinder_measure(&c)?,
            None => Rational::zero(),
        };
        Ok(meet / cylinder_measure(a)?)
    };
    let pulled = ratio(&a.prepend(letter)?, &x.prepend(letter)?)?;
    let plain = ratio(a, x)?;
    Ok((pulled, plain))
}
