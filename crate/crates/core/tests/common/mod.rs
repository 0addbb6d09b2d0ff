#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;

use frege_search::field::Prime;
use frege_search::formula::{Assignment, Formula, VarId};
use frege_search::harness::ExperimentConfig;
use frege_search::poly::{Monomial, Polynomial};
use frege_search::proof::{parse_proof, Proof};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_proof(name: &str) -> Proof {
    parse_proof(&read_fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_axioms(name: &str) -> Vec<Formula> {
    frege_search::formula::parse_formula_list(&read_fixture(name)).unwrap_or_else(|(l, e)| panic!("{name}:{l}: {e}"))
}

pub fn prime(p: u32) -> Prime {
    Prime::new(p).unwrap()
}

pub fn x(i: u32) -> VarId {
    VarId::Index(i)
}

pub fn random_monomial(rng: &mut impl Rng, nvars: u32, max_deg: usize) -> Monomial {
    let deg = rng.gen_range(0..=max_deg);
    Monomial::new((0..deg).map(|_| x(rng.gen_range(0..nvars))))
}

/// A random polynomial with up to `max_terms` terms of degree at most
/// `max_deg` in the variables `x_0 .. x_{nvars-1}`.
pub fn random_poly(rng: &mut impl Rng, p: Prime, nvars: u32, max_terms: usize, max_deg: usize) -> Polynomial {
    let terms = rng.gen_range(0..=max_terms);
    (0..terms).fold(Polynomial::zero(p), |acc, _| {
        let m = random_monomial(rng, nvars, max_deg);
        &acc + &Polynomial::term(p, m, rng.gen_range(1..p.get()))
    })
}

pub fn random_nonconstant(rng: &mut impl Rng, p: Prime, nvars: u32, max_terms: usize, max_deg: usize) -> Polynomial {
    loop {
        let f = random_poly(rng, p, nvars, max_terms, max_deg);
        if f.degree() >= 1 {
            return f;
        }
    }
}

pub fn random_assignment(rng: &mut impl Rng, vars: impl IntoIterator<Item = VarId>) -> Assignment {
    vars.into_iter().map(|v| (v, rng.gen())).collect()
}

pub fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap_or_else(|e| panic!("{e}"))
}

/// The PHP_1 pipeline over F_2 driven by the fixture refutation.
pub fn php1_config(extra: &str) -> ExperimentConfig {
    config(&format!(
        "family = \"php:1\"\np = 2\nd = 2\nt = 4\nproof = {:?}\n{extra}",
        fixture("php1.proof").display().to_string()
    ))
}
