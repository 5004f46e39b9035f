use num_traits::Zero;
use padic_cf::ergodic::{
    birkhoff_average, conditional_density_check, cylinder_measure, invariance_mc, mixing_exact,
    theoretical_digit_means, Functional, MiddleBlock, SymbolicCylinder,
};
use padic_cf::{Digit, PrimeCtx, ProductCylinder, Rational, SystemSpec, Threshold, Variant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(p: u64, variant: Variant) -> SystemSpec {
    SystemSpec::new(PrimeCtx::new(p).unwrap(), variant).unwrap()
}

fn small_systems() -> Vec<SystemSpec> {
    vec![
        spec(2, Variant::OneDim(Threshold::Infinite)),
        spec(3, Variant::OneDim(Threshold::Finite(0))),
        spec(2, Variant::OneDim(Threshold::Finite(1))),
        spec(2, Variant::MultiDim(Threshold::Infinite, 2)),
        spec(2, Variant::MultiDim(Threshold::Finite(0), 2)),
    ]
}

/// `xi(word)` as a union of product cylinders, by pulling the whole space
/// back through the branches from the last letter to the first.
fn geometric_cylinder(s: &SystemSpec, word: &[Digit]) -> Vec<ProductCylinder> {
    let mut pieces = vec![ProductCylinder::full(s.ctx(), s.dim())];
    for d in word.iter().rev() {
        let f = s.branch(d).unwrap();
        pieces = pieces
            .iter()
            .flat_map(|c| c.refine_uniform().unwrap())
            .flat_map(|c| f.preimage_cylinder(&c).unwrap())
            .collect();
    }
    pieces
}

fn pick<R: Rng>(letters: &[Digit], len: usize, rng: &mut R) -> Vec<Digit> {
    (0..len)
        .map(|_| letters[rng.gen_range(0..letters.len())].clone())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn symbolic_measure_matches_geometry(idx in 0usize..5, len in 1usize..4, seed in any::<u64>()) {
        let s = small_systems()[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let letters: Vec<Digit> = s.enumerate_branches(4).unwrap().into_iter().map(|(d, _)| d).collect();
        let word = pick(&letters, len, &mut rng);
        let pieces = geometric_cylinder(&s, &word);
        let mass: Rational = pieces.iter().map(ProductCylinder::measure).sum();
        let c = SymbolicCylinder::new(s, word.clone()).unwrap();
        prop_assert_eq!(mass, cylinder_measure(&c).unwrap());
        // points of the pieces expand with the word as prefix
        let piece = &pieces[rng.gen_range(0..pieces.len())];
        let x = piece.random_element(&mut rng);
        let digits = s.expand(&x, len).unwrap().digits();
        prop_assert_eq!(digits, word);
    }

    #[test]
    fn conditional_density_is_preserved(idx in 0usize..5, seed in any::<u64>()) {
        let s = small_systems()[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let letters: Vec<Digit> = s.enumerate_branches(5).unwrap().into_iter().map(|(d, _)| d).collect();
        let a = SymbolicCylinder::new(s, pick(&letters, rng.gen_range(0..3), &mut rng)).unwrap();
        let x = SymbolicCylinder::new(s, pick(&letters, rng.gen_range(0..3), &mut rng)).unwrap();
        for _ in 0..10 {
            let letter = &letters[rng.gen_range(0..letters.len())];
            let (pulled, plain) = conditional_density_check(&a, &x, letter).unwrap();
            prop_assert_eq!(pulled, plain);
        }
    }
}

#[test]
fn truncated_mixing_matches_word_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in small_systems() {
        let max_exp = 3;
        let letters: Vec<Digit> = s
            .enumerate_branches(max_exp)
            .unwrap()
            .into_iter()
            .map(|(d, _)| d)
            .collect();
        for _ in 0..3 {
            let a = pick(&letters, 1, &mut rng);
            let b = pick(&letters, 1, &mut rng);
            let ca = SymbolicCylinder::new(s, a.clone()).unwrap();
            let cb = SymbolicCylinder::new(s, b.clone()).unwrap();
            for n in 1..=3 {
                let report = mixing_exact(&ca, &cb, n, MiddleBlock::Truncated(max_exp)).unwrap();
                // sum over every middle word of length n - |B| built from the letters
                let mut words: Vec<Vec<Digit>> = vec![vec![]];
                for _ in 0..n - 1 {
                    words = words
                        .iter()
                        .flat_map(|w| {
                            letters.iter().map(move |l| {
                                let mut v = w.clone();
                                v.push(l.clone());
                                v
                            })
                        })
                        .collect();
                }
                let explicit: Rational = words
                    .iter()
                    .map(|w| {
                        let full: Vec<Digit> = b.iter().chain(w).chain(&a).cloned().collect();
                        cylinder_measure(&SymbolicCylinder::new(s, full).unwrap()).unwrap()
                    })
                    .sum();
                assert_eq!(report.lhs, explicit);
                assert!(report.lhs <= report.rhs);
                assert!(&report.rhs - &report.lhs <= report.tail_bound);
                let complete = mixing_exact(&ca, &cb, n, MiddleBlock::Complete).unwrap();
                assert_eq!(complete.lhs, complete.rhs);
                assert!(complete.tail_bound.is_zero());
            }
        }
    }
}

#[test]
fn mixing_needs_room_for_the_prefix() {
    let s = spec(2, Variant::OneDim(Threshold::Infinite));
    let letters: Vec<Digit> = s
        .enumerate_branches(2)
        .unwrap()
        .into_iter()
        .map(|(d, _)| d)
        .collect();
    let b = SymbolicCylinder::new(s, letters[..2].to_vec()).unwrap();
    let a = SymbolicCylinder::full(s);
    assert!(mixing_exact(&a, &b, 1, MiddleBlock::Complete).is_err());
}

#[test]
fn small_birkhoff_run_near_theory() {
    let s = spec(3, Variant::OneDim(Threshold::Infinite));
    let (mean_a, mean_b) = theoretical_digit_means(3, Threshold::Infinite);
    let ra = birkhoff_average(&s, Functional::A, 300, 100, 7).unwrap();
    let rb = birkhoff_average(&s, Functional::B, 300, 100, 7).unwrap();
    assert_eq!(ra.theoretical, Some(mean_a));
    assert_eq!(rb.theoretical, Some(mean_b));
    assert_eq!(ra.within(4.0), Some(true), "{ra:?}");
    assert_eq!(rb.within(4.0), Some(true), "{rb:?}");
    let again = birkhoff_average(&s, Functional::A, 300, 100, 7).unwrap();
    assert_eq!(again.estimate, ra.estimate);
}

#[test]
fn invariance_on_a_small_cylinder() {
    let ctx = PrimeCtx::new(2).unwrap();
    for s in [
        spec(2, Variant::OneDim(Threshold::Finite(1))),
        spec(2, Variant::MultiDim(Threshold::Infinite, 2)),
    ] {
        let center: Vec<Rational> = (0..s.dim())
            .map(|k| Rational::from_integer((2 * (k as i64 + 1)).into()))
            .collect();
        let c = ProductCylinder::uniform(ctx, &center, 2).unwrap();
        let r = invariance_mc(&s, &c, 4000, 3).unwrap();
        assert_eq!(r.theoretical, Some(c.measure()));
        assert_eq!(r.within(4.0), Some(true), "{r:?}");
        assert!(r.estimate > 0.0 && r.estimate < 1.0);
    }
}
