mod common;

use common::rat;
use num_traits::Zero;
use padic_cf::padic::invert_ball;
use padic_cf::{Ball, PadicApprox, PrimeCtx, Rational, Valuation};
use proptest::prelude::*;

const PRIMES: [u64; 4] = [2, 3, 5, 7];

fn arb_prime() -> impl Strategy<Value = PrimeCtx> {
    prop::sample::select(&PRIMES[..]).prop_map(|p| PrimeCtx::new(p).unwrap())
}

/// Nonzero rational scaled by `p^shift`.
fn arb_rational() -> impl Strategy<Value = (i64, i64, i64)> {
    (
        (-1_000_000i64..1_000_000).prop_filter("nonzero", |n| *n != 0),
        1i64..100_000,
        -4i64..5,
    )
}

fn build(ctx: PrimeCtx, (n, d, shift): (i64, i64, i64)) -> Rational {
    rat(n, d) * ctx.pow_rational(shift)
}

/// `a` and `b` agree modulo `p^n`.
fn congruent(ctx: &PrimeCtx, a: &Rational, b: &Rational, n: i64) -> bool {
    match ctx.ord(&(a - b)) {
        Valuation::Infinity => true,
        Valuation::Finite(d) => d >= n,
    }
}

fn check_op(ctx: &PrimeCtx, got: &PadicApprox, exact: &Rational) -> Result<(), TestCaseError> {
    if let Some(prec) = got.abs_prec() {
        prop_assert!(
            congruent(ctx, &got.truncation(), exact, prec),
            "{} vs exact {} mod p^{}",
            got,
            exact,
            prec
        );
    } else {
        prop_assert!(exact.is_zero());
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn arithmetic_agrees_with_exact(ctx in arb_prime(), a in arb_rational(), b in arb_rational(), prec in 10i64..60) {
        let x = build(ctx, a);
        let y = build(ctx, b);
        let xa = PadicApprox::from_rational(ctx, &x, prec);
        let ya = PadicApprox::from_rational(ctx, &y, prec);
        check_op(&ctx, &xa.add(&ya).unwrap(), &(&x + &y))?;
        check_op(&ctx, &xa.sub(&ya).unwrap(), &(&x - &y))?;
        check_op(&ctx, &xa.mul(&ya).unwrap(), &(&x * &y))?;
        check_op(&ctx, &xa.neg(), &-&x)?;
        if let Ok(inv) = xa.inv() {
            check_op(&ctx, &inv, &x.recip())?;
        }
        if let Ok(q) = xa.div(&ya) {
            check_op(&ctx, &q, &(&x / &y))?;
        }
        check_op(&ctx, &xa.mul_rational(&y).unwrap(), &(&x * &y))?;
        check_op(&ctx, &xa.add_rational(&y).unwrap(), &(&x + &y))?;
    }

    #[test]
    fn precision_rules(ctx in arb_prime(), a in arb_rational(), b in arb_rational(), p1 in 10i64..40, p2 in 10i64..40) {
        let x = build(ctx, a);
        let y = build(ctx, b);
        let xa = PadicApprox::from_rational(ctx, &x, p1);
        let ya = PadicApprox::from_rational(ctx, &y, p2);
        prop_assert_eq!(xa.add(&ya).unwrap().abs_prec(), Some(p1.min(p2)));
        if let (Ok(Valuation::Finite(o1)), Ok(Valuation::Finite(o2))) = (xa.ord(), ya.ord()) {
            prop_assert_eq!(xa.mul(&ya).unwrap().abs_prec(), Some((p1 + o2).min(p2 + o1)));
            prop_assert_eq!(xa.inv().unwrap().abs_prec(), Some(p1 - 2 * o1));
        }
    }

    #[test]
    fn digits_match_long_division(ctx in arb_prime(), a in arb_rational(), n in 5i64..40) {
        let x = build(ctx, a);
        let ord = ctx.ord(&x).finite().unwrap();
        let xa = PadicApprox::from_rational(ctx, &x, ord + n);
        prop_assert_eq!(xa.digits(), ctx.digit_expand(&x, ord, ord + n));
        let back = PadicApprox::from_digits(ctx, ord, &xa.digits()).unwrap();
        prop_assert_eq!(back, xa);
    }

    #[test]
    fn integral_fractional_split(ctx in arb_prime(), a in arb_rational()) {
        let x = build(ctx, a);
        let int = ctx.integral_part(&x);
        let frac = ctx.fractional_part(&x);
        prop_assert_eq!(&int + &frac, x.clone());
        // sum of c_n p^n over n <= 0 lies in [0, p)
        prop_assert!(int >= Rational::zero());
        prop_assert!(int < Rational::from_integer(ctx.p_big()));
        prop_assert!((&int * ctx.pow_rational(-ctx.ord(&x).finite().unwrap().min(0))).is_integer());
        prop_assert!(frac.is_zero() || ctx.ord(&frac) >= Valuation::Finite(1));
    }

    #[test]
    fn display_round_trip(ctx in arb_prime(), a in arb_rational(), prec in 1i64..40) {
        let x = build(ctx, a);
        let xa = PadicApprox::from_rational(ctx, &x, prec);
        let text = xa.to_string();
        let parsed: PadicApprox = text.parse().unwrap();
        prop_assert_eq!(parsed, xa);
    }

    #[test]
    fn ball_inversion_image(ctx in arb_prime(), a in arb_rational(), level in 1i64..8, k in 0i64..4, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let center = ctx.fractional_part(&build(ctx, a)) * ctx.pow_rational(1);
        let b = Ball::new(ctx, &center, level).unwrap();
        let v = ctx.j_members(k)[0].clone();
        let image = invert_ball(&b, &v).unwrap();
        prop_assert_eq!(image.level(), level + 2 * k);
        for _ in 0..8 {
            let y = b.random_element(&mut rng);
            prop_assert!(b.contains(&y));
            prop_assert!(image.contains(&(&v + &y).recip()));
        }
    }

    #[test]
    fn refinement_is_a_partition(ctx in arb_prime(), a in arb_rational(), level in 1i64..4, extra in 0i64..3, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let center = ctx.fractional_part(&build(ctx, a));
        let b = Ball::new(ctx, &center, level).unwrap();
        let parts = b.refine(level + extra).unwrap();
        let total: Rational = parts.iter().map(|c| c.measure()).sum();
        prop_assert_eq!(total, b.measure());
        for i in 0..parts.len() {
            prop_assert!(parts[i].is_subset_of(&b));
            for j in i + 1..parts.len() {
                prop_assert!(parts[i].is_disjoint(&parts[j]));
            }
        }
        let y = b.random_element(&mut rng);
        prop_assert_eq!(parts.iter().filter(|c| c.contains(&y)).count(), 1);
    }
}

#[test]
fn known_expansions() {
    let c = PrimeCtx::new(3).unwrap();
    // -1 = 2 + 2*3 + 2*9 + ...
    let x = PadicApprox::from_rational(c, &rat(-1, 1), 5);
    assert_eq!(x.digits(), vec![2, 2, 2, 2, 2]);
    // 1/2 = 2 + 1*3 + 1*9 + ... in Z_3
    let h = PadicApprox::from_rational(c, &rat(1, 2), 4);
    assert_eq!(h.digits(), vec![2, 1, 1, 1]);
    assert_eq!(c.ord(&rat(18, 5)), Valuation::Finite(2));
    assert_eq!(c.norm(&rat(5, 18)), rat(9, 1));
}

#[test]
fn j_sets_have_expected_size() {
    for p in PRIMES {
        let c = PrimeCtx::new(p).unwrap();
        for n in 0..4 {
            let members = c.j_members(n);
            assert_eq!(members.len() as u64, (p - 1) * p.pow(n as u32));
            assert!(members.iter().all(|v| c.j_class(v) == Some(n)));
        }
        assert_eq!(c.j_class(&Rational::zero()), None);
    }
}
