mod common;

use common::{ppow, tail_1d, tail_jacobi_perron};
use num_traits::{One, Zero};
use padic_cf::padic::random_pzp;
use padic_cf::system::{Digit, DigitRecord};
use padic_cf::{PadicApprox, PrimeCtx, Rational, Status, SystemSpec, Threshold, Variant};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(p: u64, variant: Variant) -> SystemSpec {
    SystemSpec::new(PrimeCtx::new(p).unwrap(), variant).unwrap()
}

/// A spread of systems over several primes, thresholds and dimensions.
fn catalogue() -> Vec<SystemSpec> {
    let mut out = Vec::new();
    for p in [2, 3, 5] {
        out.push(spec(p, Variant::OneDim(Threshold::Infinite)));
        out.push(spec(p, Variant::OneDim(Threshold::Finite(0))));
        out.push(spec(p, Variant::OneDim(Threshold::Finite(2))));
        out.push(spec(p, Variant::MultiDim(Threshold::Infinite, 2)));
        out.push(spec(p, Variant::MultiDim(Threshold::Finite(1), 3)));
        out.push(spec(p, Variant::Brun(2)));
    }
    out
}

fn arb_system() -> impl Strategy<Value = SystemSpec> {
    prop::sample::select(catalogue())
}

fn random_point(s: &SystemSpec, rng: &mut ChaCha8Rng) -> Vec<Rational> {
    (0..s.dim()).map(|_| random_pzp(s.ctx(), rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn truncations_share_the_expansion_prefix(s in arb_system(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha = s.haar_point(120, &mut rng);
        let exact: Vec<Rational> = alpha.iter().map(PadicApprox::truncation).collect();
        let approx = s.expand(&alpha, 15).unwrap();
        let reference = s.expand(&exact, 15).unwrap();
        let got = approx.digits();
        prop_assert_eq!(&reference.digits()[..got.len()], &got[..]);
        if approx.status == Status::Running {
            prop_assert_eq!(got.len(), 15);
        }
    }

    #[test]
    fn each_step_applies_its_branch(s in arb_system(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = random_point(&s, &mut rng);
        for _ in 0..6 {
            let Some(step) = s.step(&x).unwrap() else { break };
            s.validate_digit(&step.digit).unwrap();
            let f = s.branch(&step.digit).unwrap();
            prop_assert_eq!(&f.apply_forward(&x).unwrap(), &step.next);
            prop_assert_eq!(&f.apply_inverse(&step.next).unwrap(), &x);
            for c in &step.next {
                prop_assert!(c.is_zero() || s.ctx().ord(c).finite().unwrap() >= 1);
            }
            x = step.next;
        }
    }

    #[test]
    fn shared_prefix_bounds_the_distance(s in arb_system(), n in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = s.ctx();
        let alpha = random_point(&s, &mut rng);
        let word = s.expand(&alpha, n).unwrap().digits();
        prop_assume!(word.len() == n);
        // a second point in the same cylinder, built by pulling back a random point
        let mut beta = random_point(&s, &mut rng);
        for d in word.iter().rev() {
            beta = s.branch(d).unwrap().apply_inverse(&beta).unwrap();
        }
        prop_assert_eq!(&s.expand(&beta, n).unwrap().digits(), &word);
        let diff: Vec<Rational> = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
        prop_assert!(ctx.vector_norm(&diff) <= ppow(ctx.p(), -(n as i64 + 1)));
    }

    #[test]
    fn convergents_approach_the_point(s in arb_system(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = s.ctx();
        let alpha = random_point(&s, &mut rng);
        let word = s.expand(&alpha, 8).unwrap().digits();
        let convs = s.convergents(&word).unwrap();
        for (j, c) in convs.iter().enumerate() {
            prop_assert_eq!(c, &s.convergent(&word[..=j]).unwrap());
            let diff: Vec<Rational> = alpha.iter().zip(c).map(|(a, b)| a - b).collect();
            prop_assert!(ctx.vector_norm(&diff) <= ppow(ctx.p(), -(j as i64 + 1)));
        }
    }
}

#[test]
fn enumeration_is_sorted_distinct_and_valid() {
    for s in catalogue() {
        let Ok(branches) = s.enumerate_branches(6) else {
            assert!(matches!(s.variant(), Variant::Brun(_)));
            continue;
        };
        let mut seen = std::collections::HashSet::new();
        let mut last = i64::MIN;
        let mut mass = Rational::zero();
        for (d, f) in &branches {
            assert!(seen.insert(d.clone()), "{d} listed twice");
            assert!(f.iota_exponent() >= last);
            assert!(f.iota_exponent() <= 6);
            last = f.iota_exponent();
            s.validate_digit(d).unwrap();
            mass += f.iota().recip();
        }
        assert_eq!(mass, s.iota_sum(6).unwrap());
    }
}

#[test]
fn branch_sums_match_geometric_tails() {
    for p in [2u64, 3, 5, 7] {
        for l in [
            Threshold::Infinite,
            Threshold::Finite(0),
            Threshold::Finite(1),
            Threshold::Finite(3),
        ] {
            let s = spec(p, Variant::OneDim(l));
            for e in 0..40 {
                assert_eq!(
                    s.iota_sum(e).unwrap(),
                    Rational::one() - tail_1d(p, l, e),
                    "p={p} l={l} e={e}"
                );
            }
        }
        for m in 2..5 {
            let s = spec(p, Variant::MultiDim(Threshold::Infinite, m));
            for e in 0..30 {
                assert_eq!(
                    s.iota_sum(e).unwrap(),
                    Rational::one() - tail_jacobi_perron(p, m, e),
                    "p={p} m={m} e={e}"
                );
            }
        }
    }
}

#[test]
fn finite_threshold_sums_increase_to_one() {
    for p in [2u64, 3] {
        for m in 2..4 {
            for l in 0..3 {
                let s = spec(p, Variant::MultiDim(Threshold::Finite(l), m));
                let mut prev = Rational::zero();
                for e in 0..24 {
                    let cur = s.iota_sum(e).unwrap();
                    assert!(cur >= prev && cur < Rational::one());
                    prev = cur;
                }
                assert!(
                    Rational::one() - prev < Rational::new(1.into(), 8.into()),
                    "p={p} m={m} l={l}"
                );
            }
        }
    }
}

#[test]
fn digits_serialize_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in catalogue() {
        let x = random_point(&s, &mut rng);
        for d in s.expand(&x, 5).unwrap().digits() {
            let json = serde_json::to_string(&d).unwrap();
            let back: Digit = serde_json::from_str(&json).unwrap();
            assert_eq!(back, d);
            let _: DigitRecord = serde_json::from_str(&json).unwrap();
        }
    }
}

#[test]
fn zero_pivot_terminates() {
    let s = spec(3, Variant::OneDim(Threshold::Infinite));
    let e = s.expand(&[Rational::zero()], 5).unwrap();
    assert_eq!(e.status, Status::Terminated(0));
    assert!(e.steps.is_empty());
}
