mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use frege_search::field::{is_prime, Fp, Prime};
use frege_search::formula::{poly_to_formula, Assignment, Formula};
use frege_search::poly::{all_assignments, Polynomial};

use common::*;

const NVARS: u32 = 5;

/// Values of `f` at every point of the cube, in a fixed order.
fn table(f: &Polynomial) -> Vec<Fp> {
    let vars: Vec<_> = (0..NVARS).map(x).collect();
    all_assignments(&vars).map(|a| f.eval(&a).unwrap()).collect()
}

fn polys(seed: u64, p: Prime) -> (Polynomial, Polynomial, Polynomial) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        random_poly(&mut rng, p, NVARS, 6, 3),
        random_poly(&mut rng, p, NVARS, 6, 3),
        random_poly(&mut rng, p, NVARS, 3, 2),
    )
}

fn primes() -> impl Strategy<Value = Prime> {
    prop::sample::select(vec![2u32, 3, 5, 7]).prop_map(prime)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Arithmetic agrees with pointwise arithmetic on truth tables, and a
    /// multilinear polynomial is determined by its table.
    #[test]
    fn operations_match_truth_tables(seed in any::<u64>(), p in primes()) {
        let (f, g, _) = polys(seed, p);
        let (tf, tg) = (table(&f), table(&g));
        let sum: Vec<Fp> = tf.iter().zip(&tg).map(|(&a, &b)| p.add(a, b)).collect();
        let prod: Vec<Fp> = tf.iter().zip(&tg).map(|(&a, &b)| p.mul(a, b)).collect();
        prop_assert_eq!(table(&(&f + &g)), sum);
        prop_assert_eq!(table(&f.mul(&g).unwrap()), prod);
        prop_assert_eq!(f == g, tf == tg);
    }

    #[test]
    fn ring_laws(seed in any::<u64>(), p in primes()) {
        let (f, g, h) = polys(seed, p);
        let m = |a: &Polynomial, b: &Polynomial| a.mul(b).unwrap();
        prop_assert_eq!(m(&m(&f, &g), &h), m(&f, &m(&g, &h)));
        prop_assert_eq!(m(&f, &(&g + &h)), &m(&f, &g) + &m(&f, &h));
        prop_assert_eq!(&(&f - &g) + &g, f.clone());
        prop_assert_eq!(f.scale(p.get() - 1), -&f);
    }

    #[test]
    fn fermat(seed in any::<u64>(), p in primes()) {
        let (f, _, _) = polys(seed, p);
        let top = f.pow(p.get() - 1).unwrap();
        let expect: Vec<Fp> = table(&f).iter().map(|&v| (v != 0) as Fp).collect();
        prop_assert_eq!(table(&top), expect);
        prop_assert_eq!(f.pow(p.get()).unwrap(), f);
    }

    #[test]
    fn polynomial_text_round_trips(seed in any::<u64>(), p in primes()) {
        let (f, _, _) = polys(seed, p);
        prop_assert_eq!(Polynomial::parse(&f.to_string(), p).unwrap(), f);
    }

    /// The formula of `f` holds exactly where `f` vanishes.
    #[test]
    fn equation_formula_matches_evaluation(seed in any::<u64>(), p in prop::sample::select(vec![2u32, 3]).prop_map(prime)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_poly(&mut rng, p, 4, 4, 2);
        let phi = poly_to_formula(&f);
        let vars: Vec<_> = (0..4).map(x).collect();
        for a in all_assignments(&vars) {
            prop_assert_eq!(phi.eval(&a).unwrap(), f.eval(&a).unwrap() == 0, "{} at {:?}", f, a);
        }
        prop_assert_eq!(phi.to_string().parse::<Formula>().unwrap(), phi);
    }

    #[test]
    fn field_inverses(p in primes(), a in 1u32..7) {
        let a = a % p.get();
        prop_assume!(a != 0);
        let inv = p.inv(a).unwrap();
        prop_assert_eq!(p.mul(a, inv), 1);
        prop_assert_eq!(p.pow(a, (p.get() - 1) as u64), 1);
    }
}

#[test]
fn primality_matches_trial_division() {
    for n in 0..2000u32 {
        let naive = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
        assert_eq!(is_prime(n), naive, "{n}");
    }
    assert!(Prime::new(4).is_err());
    assert!(Prime::new(1).is_err());
}

#[test]
fn missing_variables_are_reported() {
    let p = prime(3);
    let f = Polynomial::var(p, x(1));
    assert!(f.eval(&Assignment::new()).is_err());
}
