//! The Alice/Bob game H(e, n, r) over multilinear polynomials.
//!
//! Alice asks Bob for values in `F_p` of polynomials of degree at most `e`.
//! Bob must keep constants fixed and variables Boolean (B1), respect sums of
//! answered triples (B2), products of answered monomial triples (B3), and
//! give 0 to every polynomial of the system (B4). Repeated questions are
//! answered from memory, so a simple Bob cannot break the repetition rule and
//! a repeated question costs no round.

pub mod alice;
pub mod approx;
pub mod normalize;
pub mod protocols;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::Serialize;

use crate::field::{Fp, Prime};
use crate::formula::Assignment;
use crate::poly::{Monomial, PolySystem, Polynomial};
use crate::search_tree::ErrorDescriptor;
use crate::seeds::stable_hash;

#[derive(Debug, Clone)]
pub struct GameParamsH {
    pub p: Prime,
    /// Degree cap on questions.
    pub e: usize,
    /// Round budget.
    pub r: usize,
    pub system: Arc<PolySystem>,
    system_set: Arc<HashSet<Polynomial>>,
}

impl GameParamsH {
    pub fn new(system: PolySystem, e: usize, r: usize) -> Self {
        let system_set = system.polys.iter().cloned().collect();
        GameParamsH {
            p: system.p,
            e,
            r,
            system: Arc::new(system),
            system_set: Arc::new(system_set),
        }
    }

    pub fn in_system(&self, f: &Polynomial) -> bool {
        self.system_set.contains(f)
    }
}

/// A Bob strategy given by a fixed map from polynomials to field elements.
/// Implementations must be deterministic functions of the polynomial.
pub trait SimpleBob: Send + Sync {
    fn value(&self, f: &Polynomial) -> Fp;
}

impl<B: SimpleBob + ?Sized> SimpleBob for Arc<B> {
    fn value(&self, f: &Polynomial) -> Fp {
        (**self).value(f)
    }
}

impl<B: SimpleBob + ?Sized> SimpleBob for &B {
    fn value(&self, f: &Polynomial) -> Fp {
        (**self).value(f)
    }
}

/// `B(f) = f(α)`; variables missing from `α` count as 0.
#[derive(Debug, Clone)]
pub struct AssignmentBob {
    pub alpha: Assignment,
}

impl AssignmentBob {
    pub fn new(alpha: Assignment) -> Self {
        AssignmentBob { alpha }
    }
}

impl SimpleBob for AssignmentBob {
    fn value(&self, f: &Polynomial) -> Fp {
        let p = f.prime();
        f.terms()
            .filter(|(m, _)| m.vars().iter().all(|v| self.alpha.get(v).copied().unwrap_or(false)))
            .fold(0, |acc, (_, &c)| p.add(acc, c))
    }
}

/// An explicit table, falling back to another Bob elsewhere.
#[derive(Clone)]
pub struct TableBob {
    pub table: HashMap<Polynomial, Fp>,
    pub fallback: Arc<dyn SimpleBob>,
}

impl TableBob {
    pub fn new(fallback: Arc<dyn SimpleBob>) -> Self {
        TableBob {
            table: HashMap::new(),
            fallback,
        }
    }

    pub fn with(mut self, f: Polynomial, v: Fp) -> Self {
        self.table.insert(f, v);
        self
    }
}

impl SimpleBob for TableBob {
    fn value(&self, f: &Polynomial) -> Fp {
        match self.table.get(f) {
            Some(&v) => v % f.prime().get(),
            None => self.fallback.value(f),
        }
    }
}

/// A pseudorandom pure function of the canonical polynomial text.
#[derive(Debug, Clone, Copy)]
pub struct RandomBob {
    pub seed: u64,
}

impl SimpleBob for RandomBob {
    fn value(&self, f: &Polynomial) -> Fp {
        (stable_hash(self.seed, f.to_string().as_bytes()) % f.prime().get() as u64) as Fp
    }
}

/// Follows an assignment except on a pseudorandom fraction of polynomials,
/// where it answers at random.
#[derive(Debug, Clone)]
pub struct PerturbedBob {
    pub base: AssignmentBob,
    pub seed: u64,
    /// Probability of a perturbed answer, in parts per million.
    pub rate_ppm: u32,
}

impl SimpleBob for PerturbedBob {
    fn value(&self, f: &Polynomial) -> Fp {
        let h = stable_hash(self.seed, f.to_string().as_bytes());
        if (h % 1_000_000) < self.rate_ppm as u64 {
            ((h >> 20) % f.prime().get() as u64) as Fp
        } else {
            self.base.value(f)
        }
    }
}

/// Why a play stopped before Alice finished.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stop {
    /// Bob broke a rule; Alice wins.
    Violation(ErrorDescriptor),
    /// The round budget is used up; Bob wins.
    Budget,
    /// Alice asked an illegal question; Bob wins.
    Forfeit(String),
    /// Tree construction: the answer prefix ran out at this question.
    Branch(Polynomial),
    /// A protocol precondition failed: a programming error, not a move.
    Contract(String),
}

/// Where answers come from.
#[derive(Clone, Copy)]
pub enum AnswerSource<'a> {
    Bob(&'a dyn SimpleBob),
    /// Answers to the first new questions in order; the next new question
    /// stops the play with [`Stop::Branch`].
    Prefix(&'a [Fp]),
}

/// One play in progress: the referee's view of the answered polynomials.
pub struct Session<'a> {
    params: &'a GameParamsH,
    source: AnswerSource<'a>,
    answered: HashMap<Polynomial, Fp>,
    monomials: HashMap<Monomial, Fp>,
    rounds: Vec<(Polynomial, Fp)>,
    vigilant: bool,
    /// Coin bits consumed by randomized steps.
    pub coins_used: usize,
}

impl<'a> Session<'a> {
    pub fn new(params: &'a GameParamsH, source: AnswerSource<'a>) -> Self {
        Session {
            params,
            source,
            answered: HashMap::new(),
            monomials: HashMap::new(),
            rounds: Vec::new(),
            vigilant: false,
            coins_used: 0,
        }
    }

    pub fn params(&self) -> &GameParamsH {
        self.params
    }

    pub fn p(&self) -> Prime {
        self.params.p
    }

    /// Ask every variable of a monomial before the monomial itself.
    pub fn set_vigilant(&mut self, on: bool) {
        self.vigilant = on;
    }

    pub fn rounds(&self) -> &[(Polynomial, Fp)] {
        &self.rounds
    }

    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn answered(&self, f: &Polynomial) -> Option<Fp> {
        self.answered.get(f).copied()
    }

    pub fn ask(&mut self, f: &Polynomial) -> Result<Fp, Stop> {
        if let Some(v) = self.answered(f) {
            return Ok(v);
        }
        if self.vigilant {
            if let Some(m) = f.as_monomial().filter(|m| m.degree() >= 2) {
                for &x in m.clone().vars() {
                    self.ask(&Polynomial::var(self.p(), x))?;
                }
            }
        }
        self.ask_new(f)
    }

    fn ask_new(&mut self, f: &Polynomial) -> Result<Fp, Stop> {
        if f.degree() > self.params.e {
            return Err(Stop::Forfeit(format!(
                "question of degree {} above {}",
                f.degree(),
                self.params.e
            )));
        }
        if self.rounds.len() >= self.params.r {
            return Err(Stop::Budget);
        }
        let v = match self.source {
            AnswerSource::Bob(b) => b.value(f) % self.p().get(),
            AnswerSource::Prefix(prefix) => match prefix.get(self.rounds.len()) {
                Some(&v) => v,
                None => return Err(Stop::Branch(f.clone())),
            },
        };
        self.rounds.push((f.clone(), v));
        self.answered.insert(f.clone(), v);
        if let Some(m) = f.as_monomial().filter(|m| !m.is_constant()) {
            self.monomials.insert(m.clone(), v);
        }
        match self.find_violation(f, v) {
            Some(d) => Err(Stop::Violation(d)),
            None => Ok(v),
        }
    }

    /// Rule violations completed by the answer `v` to `f`.
    fn find_violation(&self, f: &Polynomial, v: Fp) -> Option<ErrorDescriptor> {
        let p = self.p();
        if let Some(c) = f.constant_value() {
            if v != c {
                return Some(ErrorDescriptor::B1Const { c });
            }
        }
        if let Some(x) = f.as_variable() {
            if v > 1 {
                return Some(ErrorDescriptor::B1Var { x });
            }
        }
        if v != 0 && self.params.in_system(f) {
            return Some(ErrorDescriptor::B4 { f: f.clone() });
        }
        if let Some(m) = f.as_monomial().filter(|m| !m.is_constant()) {
            if let Some(d) = self.monomial_violation(m, v) {
                return Some(d);
            }
        }
        for (g, bg) in &self.rounds {
            let bg = *bg;
            let h = f - g;
            if let Some(&bh) = self.answered.get(&h) {
                if p.add(bg, bh) != v {
                    return Some(ErrorDescriptor::B2 {
                        f: g.clone(),
                        g: h,
                    });
                }
            }
            let s = f + g;
            if let Some(&bs) = self.answered.get(&s) {
                if p.add(v, bg) != bs {
                    return Some(ErrorDescriptor::B2 {
                        f: f.clone(),
                        g: g.clone(),
                    });
                }
            }
        }
        None
    }

    fn monomial_violation(&self, m: &Monomial, v: Fp) -> Option<ErrorDescriptor> {
        let p = self.p();
        // Scan in question order so the reported pair does not depend on
        // hash order.
        let asked: Vec<(&Monomial, Fp)> = self
            .rounds
            .iter()
            .filter_map(|(g, v)| g.as_monomial().filter(|m| !m.is_constant()).map(|m| (m, *v)))
            .collect();
        let divisors: Vec<(&Monomial, Fp)> = asked.iter().copied().filter(|(a, _)| a.divides(m)).collect();
        for &(a, ba) in &divisors {
            for &(b, bb) in &divisors {
                if a.mul(b) == *m && p.mul(ba, bb) != v {
                    return Some(ErrorDescriptor::B3 {
                        a: a.clone(),
                        b: b.clone(),
                    });
                }
            }
        }
        for &(b, bb) in &asked {
            if let Some(&bp) = self.monomials.get(&m.mul(b)) {
                if p.mul(v, bb) != bp {
                    return Some(ErrorDescriptor::B3 {
                        a: m.clone(),
                        b: b.clone(),
                    });
                }
            }
        }
        None
    }
}

/// How Alice's strategy ended when Bob broke no rule.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AliceEnd {
    /// Located linearity failures over sets, reported as a `*Err` descriptor.
    pub star: Option<ErrorDescriptor>,
}

pub trait Alice: Send + Sync {
    fn play(&self, s: &mut Session<'_>) -> Result<AliceEnd, Stop>;
}

impl<A: Alice + ?Sized> Alice for &A {
    fn play(&self, s: &mut Session<'_>) -> Result<AliceEnd, Stop> {
        (**self).play(s)
    }
}

/// Asks a fixed list of polynomials.
#[derive(Debug, Clone)]
pub struct ScriptedAlice(pub Vec<Polynomial>);

impl Alice for ScriptedAlice {
    fn play(&self, s: &mut Session<'_>) -> Result<AliceEnd, Stop> {
        for f in &self.0 {
            s.ask(f)?;
        }
        Ok(AliceEnd::default())
    }
}

/// Wraps an Alice so that every monomial question is preceded by questions
/// on all of its variables.
#[derive(Debug, Clone)]
pub struct Vigilant<A>(pub A);

impl<A: Alice> Alice for Vigilant<A> {
    fn play(&self, s: &mut Session<'_>) -> Result<AliceEnd, Stop> {
        s.set_vigilant(true);
        self.0.play(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HWinner {
    Alice,
    Bob,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HEnd {
    Violation,
    AliceStopped,
    Budget,
    Forfeit { reason: String },
    Contract { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct TranscriptH {
    pub rounds: Vec<(Polynomial, Fp)>,
    pub winner: HWinner,
    pub end: HEnd,
    /// The violation found, the `*Err` descriptor Alice ended with, or
    /// `NoError`.
    pub outcome: ErrorDescriptor,
    pub coins_used: usize,
}

impl TranscriptH {
    pub fn alice_won(&self) -> bool {
        self.winner == HWinner::Alice
    }
}

/// Play Alice against a simple Bob.
pub fn referee_h(alice: &dyn Alice, bob: &dyn SimpleBob, params: &GameParamsH) -> TranscriptH {
    let mut s = Session::new(params, AnswerSource::Bob(bob));
    let result = alice.play(&mut s);
    finish(s, result)
}

pub(crate) fn finish(s: Session<'_>, result: Result<AliceEnd, Stop>) -> TranscriptH {
    let (winner, end, outcome) = match result {
        Ok(AliceEnd { star }) => (
            HWinner::Bob,
            HEnd::AliceStopped,
            star.unwrap_or(ErrorDescriptor::NoError),
        ),
        Err(Stop::Violation(d)) => (HWinner::Alice, HEnd::Violation, d),
        Err(Stop::Budget) => (HWinner::Bob, HEnd::Budget, ErrorDescriptor::NoError),
        Err(Stop::Forfeit(reason)) => (HWinner::Bob, HEnd::Forfeit { reason }, ErrorDescriptor::NoError),
        Err(Stop::Contract(reason)) => (HWinner::Bob, HEnd::Contract { reason }, ErrorDescriptor::NoError),
        Err(Stop::Branch(f)) => (
            HWinner::Bob,
            HEnd::Contract {
                reason: format!("answer prefix exhausted at {f}"),
            },
            ErrorDescriptor::NoError,
        ),
    };
    TranscriptH {
        coins_used: s.coins_used,
        rounds: s.rounds,
        winner,
        end,
        outcome,
    }
}
