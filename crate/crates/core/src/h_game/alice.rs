//! Alice strategies obtained from Prover strategies.
//!
//! Alice replays Prover's questions on the approximating polynomials: a
//! formula `φ` is valued true when Bob gives `φ̂` the value 1 and false on 0.
//! Any other value is turned into a rule violation ("Claim 1" below). When
//! the simulated Liar would break a rule, Alice converts that into a
//! violation of one of Bob's rules, where possible.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::field::{Fp, Prime};
use crate::formula::{Assignment, Formula, Node};
use crate::g_game::{
    referee_g, GState, GViolation, GameParamsG, LRule, Liar, LiarAnswer, Prover, ProverQuestion, TranscriptG,
    Valuation,
};
use crate::poly::{Monomial, Polynomial};
use crate::search_tree::{ErrorDescriptor, StarSet};

use super::approx::{ApproxContext, OrParts};
use super::protocols::{chain, m0, m1, m2, m3, m4, product, split_terms};
use super::{referee_h, Alice, AliceEnd, GameParamsH, Session, SimpleBob, Stop};

/// Multiplier in the round budget `r = R_CONST · e · t⁴`.
pub const R_CONST: usize = 4;

/// `e = ((t² + 2t)·p)^d`, `None` on overflow.
pub fn degree_cap(t: usize, p: u32, d: usize) -> Option<usize> {
    let base = (t * t + 2 * t).checked_mul(p as usize)?;
    base.checked_pow(d as u32)
}

/// `r = R_CONST · e · t⁴`, saturating.
pub fn round_budget(e: usize, t: usize) -> usize {
    R_CONST.saturating_mul(e).saturating_mul(t.saturating_pow(4))
}

fn approx_stop(e: impl std::fmt::Display) -> Stop {
    Stop::Contract(format!("approximation failed: {e}"))
}

fn contract<T>(msg: &str) -> Result<T, Stop> {
    Err(Stop::Contract(msg.to_string()))
}

#[derive(Clone)]
pub struct TranslatedAlice {
    pub prover: Arc<dyn Prover>,
    pub approx: Arc<ApproxContext>,
    pub axioms: Vec<Formula>,
    /// System polynomial standing for each axiom.
    pub links: HashMap<Formula, Polynomial>,
    /// Number of simulated Prover questions; also the coin length.
    pub t: usize,
    pub coins: Vec<bool>,
}

enum P2aOutcome {
    Answer(LiarAnswer),
    /// The halving attack missed on every set.
    Failed(Vec<StarSet>),
}

impl TranslatedAlice {
    pub fn with_coins(&self, coins: Vec<bool>) -> Self {
        TranslatedAlice {
            coins,
            ..self.clone()
        }
    }

    fn p(&self) -> Prime {
        self.approx.p()
    }

    fn hat(&self, f: &Formula) -> Result<Polynomial, Stop> {
        self.approx.hat(f).map_err(approx_stop)
    }

    fn or_parts(&self, f: &Formula) -> Result<Arc<OrParts>, Stop> {
        self.approx.or_parts(f).map_err(approx_stop)
    }

    fn one(&self) -> Polynomial {
        Polynomial::one(self.p())
    }

    /// Truth value of `φ` as asserted through `B(φ̂)`.
    fn value_of(&self, s: &mut Session<'_>, f: &Formula) -> Result<bool, Stop> {
        let v = s.ask(&self.hat(f)?)?;
        if v > 1 {
            self.claim1(s, f)?;
            return contract("Claim 1 found no violation");
        }
        Ok(v == 1)
    }

    /// `B(φ̂) ∉ {0, 1}` has been answered; force a violation.
    fn claim1(&self, s: &mut Session<'_>, f: &Formula) -> Result<(), Stop> {
        let p = self.p();
        match f.node() {
            Node::Var(_) => contract("variable valued outside {0, 1} without a B1 stop"),
            Node::Not(g) => {
                s.ask(&self.one())?;
                s.ask(&self.hat(g)?)?;
                self.claim1(s, g)
            }
            Node::Mod { .. } => {
                let mp = self.approx.mod_parts(f).map_err(approx_stop)?;
                s.ask(&self.one())?;
                s.ask(&mp.power)?;
                m4(s, &mp.g)
            }
            Node::Or(_) => {
                let parts = self.or_parts(f)?;
                s.ask(&self.one())?;
                s.ask(&parts.product)?;
                let mut vals = Vec::new();
                for (v, h) in parts.factors.iter().enumerate() {
                    let bh = s.ask(h)?;
                    if bh > 1 {
                        s.ask(&parts.powers[v])?;
                        return m4(s, &parts.sums[v]);
                    }
                    vals.push(bh);
                }
                let mut prev = parts.factors[0].clone();
                for (k, h) in parts.factors.iter().enumerate().skip(1) {
                    let next = product(s, &[prev.clone(), h.clone()])?;
                    let bn = s.ask(&next)?;
                    if p.mul(s.answered(&prev).unwrap_or(0), vals[k]) != bn {
                        return m1(s, &prev, h);
                    }
                    prev = next;
                }
                contract("prefix products stayed Boolean")
            }
        }
    }

    fn p2a(&self, s: &mut Session<'_>, phi: &Formula, j: usize) -> Result<P2aOutcome, Stop> {
        let p = self.p();
        let parts = self.or_parts(phi)?;
        if !self.value_of(s, &phi.as_or().expect("P2a on a disjunction")[j])? {
            return Ok(P2aOutcome::Answer(LiarAnswer::Value(false)));
        }
        // B(φ̂) = 0 and φ̂ = 1 − G force B(G) = 1
        s.ask(&self.one())?;
        s.ask(&parts.product)?;
        let pm1 = p.get() as usize - 1;
        for v in 0..parts.factors.len() {
            m2(s, &parts.factors, v)?;
            match s.ask(&parts.powers[v])? {
                0 => {}
                1 => return contract("h_v + S_v^(p-1) = 1 unchecked"),
                _ => return m4(s, &parts.sums[v]).and_then(|_| contract("M4 returned")),
            }
            m3(s, &vec![parts.sums[v].clone(); pm1])?;
        }
        let mut star = Vec::new();
        for jset in &parts.jsets {
            let mut k: Vec<usize> = jset.clone();
            let mut level = 0;
            while k.len() > 1 {
                let half = k.len().div_ceil(2);
                let (k0, k1) = (k[..half].to_vec(), k[half..].to_vec());
                let sum = |ks: &[usize]| {
                    ks.iter()
                        .fold(Polynomial::zero(p), |acc, &i| &acc + &parts.children[i])
                };
                s.ask(&sum(&k0))?;
                s.ask(&sum(&k1))?;
                let bit = self.coins.get(level % self.t.max(1)).copied().unwrap_or(false);
                s.coins_used = s.coins_used.max(level + 1);
                level += 1;
                k = if bit { k1 } else { k0 };
            }
            star.push(StarSet {
                indices: jset.clone(),
                summands: jset.iter().map(|&i| parts.children[i].clone()).collect(),
            });
        }
        Ok(P2aOutcome::Failed(star))
    }

    fn p2b(&self, s: &mut Session<'_>, phi: &Formula) -> Result<LiarAnswer, Stop> {
        let p = self.p();
        let parts = self.or_parts(phi)?;
        // B(φ̂) = 1 forces B(G) = 0
        s.ask(&self.one())?;
        s.ask(&parts.product)?;
        let v = m3(s, &parts.factors)?;
        s.ask(&parts.powers[v])?;
        let pm1 = p.get() as usize - 1;
        m2(s, &vec![parts.sums[v].clone(); pm1], 0)?;
        let jset = &parts.jsets[v];
        if jset.is_empty() {
            return contract("empty index set asserted nonzero");
        }
        let summands: Vec<Polynomial> = jset.iter().map(|&i| parts.children[i].clone()).collect();
        let idx = m0(s, &summands)?;
        let i = jset[idx];
        let args = phi.as_or().expect("P2b on a disjunction");
        if !self.value_of(s, &args[i])? {
            return contract("M0 returned a zero summand");
        }
        Ok(LiarAnswer::Witness(i))
    }

    /// Turn a Liar rule break into a Bob rule break.
    fn endgame(&self, s: &mut Session<'_>, v: &GViolation) -> Result<(), Stop> {
        match v.rule {
            LRule::L1 => {
                s.ask(&self.one())?;
                Ok(())
            }
            LRule::L3 => force_evaluate(s, &self.hat(&v.formula)?),
            LRule::L4 => {
                let hat = self.hat(&v.formula)?;
                let Some(q) = self.links.get(&v.formula) else {
                    return force_evaluate(s, &hat);
                };
                let alpha = ask_vars(s, q)?;
                let target = q.eval(&alpha).unwrap_or(0);
                if target != 0 {
                    s.ask(q)?;
                    force_evaluate(s, q)
                } else {
                    force_evaluate(s, &hat)
                }
            }
            LRule::L0 | LRule::L2 => Ok(()),
        }
    }
}

/// Ask every variable of `f`; returns Bob's assignment.
fn ask_vars(s: &mut Session<'_>, f: &Polynomial) -> Result<Assignment, Stop> {
    let p = s.p();
    let mut alpha = Assignment::new();
    for x in f.vars() {
        let v = s.ask(&Polynomial::var(p, x))?;
        alpha.insert(x, v == 1);
    }
    Ok(alpha)
}

/// Compare `B(f)` with `f` evaluated at Bob's values of its variables and,
/// on a mismatch, localize a B1/B2/B3 violation. Returns `Ok` when they
/// agree.
pub fn force_evaluate(s: &mut Session<'_>, f: &Polynomial) -> Result<(), Stop> {
    let p = s.p();
    let alpha = ask_vars(s, f)?;
    let at = |g: &Polynomial| g.eval(&alpha).unwrap_or(0);
    if s.ask(f)? == at(f) {
        return Ok(());
    }
    let mut g = f.clone();
    while g.num_terms() > 1 {
        let (g0, g1) = split_terms(&g);
        let b0 = s.ask(&g0)?;
        s.ask(&g1)?;
        g = if b0 != at(&g0) { g0 } else { g1 };
    }
    let Some((m, c)) = g.terms().next().map(|(m, &c)| (m.clone(), c)) else {
        return contract("zero polynomial with a nonzero value");
    };
    let xm = Polynomial::monomial(p, m.clone());
    chain(s, &xm, c)?;
    let mut prefix = Monomial::one();
    for &x in m.vars() {
        prefix = prefix.mul(&Monomial::new([x]));
        s.ask(&Polynomial::monomial(p, prefix.clone()))?;
    }
    contract("forced evaluation found no violation")
}

impl Alice for TranslatedAlice {
    fn play(&self, s: &mut Session<'_>) -> Result<AliceEnd, Stop> {
        let mut state = GState::new(&self.axioms, self.p());
        let mut history: Vec<(ProverQuestion, LiarAnswer)> = Vec::new();
        for _ in 0..self.t {
            let Some(q) = self.prover.next_question(&history) else {
                break;
            };
            if state.legal(&q).is_err() {
                break;
            }
            let a = match &q {
                ProverQuestion::P1 { formula } => LiarAnswer::Value(self.value_of(s, formula)?),
                ProverQuestion::P2a { disjunction, index } => match self.p2a(s, disjunction, *index)? {
                    P2aOutcome::Answer(a) => a,
                    P2aOutcome::Failed(sets) => {
                        return Ok(AliceEnd {
                            star: Some(ErrorDescriptor::B2Star { sets }),
                        })
                    }
                },
                ProverQuestion::P2b { disjunction } => self.p2b(s, disjunction)?,
            };
            if let Err(v) = state.apply(&q, &a) {
                self.endgame(s, &v)?;
                return Ok(AliceEnd::default());
            }
            history.push((q, a));
        }
        Ok(AliceEnd::default())
    }
}

/// The Liar read off a Bob: `φ` gets the truth value `B(φ̂) ≠ 0`, and a
/// witness comes from a vanishing factor `1 − S_v^{p−1}` of the disjunction.
pub struct BobLiar<'a> {
    pub bob: &'a dyn SimpleBob,
    pub approx: &'a ApproxContext,
}

impl BobLiar<'_> {
    fn truth(&self, f: &Formula) -> Option<bool> {
        let h = self.approx.hat(f).ok()?;
        Some(self.bob.value(&h) % self.approx.p().get() != 0)
    }
}

impl Liar for BobLiar<'_> {
    fn answer(&mut self, q: &ProverQuestion, _: &Valuation) -> Option<LiarAnswer> {
        match q {
            ProverQuestion::P1 { formula } => self.truth(formula).map(LiarAnswer::Value),
            ProverQuestion::P2a { disjunction, index } => {
                self.truth(&disjunction.as_or()?[*index]).map(LiarAnswer::Value)
            }
            ProverQuestion::P2b { disjunction } => {
                let parts = self.approx.or_parts(disjunction).ok()?;
                let p = self.approx.p().get();
                let nonzero = |i: usize| self.bob.value(&parts.children[i]) % p != 0;
                let from_factor = parts
                    .factors
                    .iter()
                    .position(|h| self.bob.value(h) % p == 0)
                    .and_then(|v| parts.jsets[v].iter().copied().find(|&i| nonzero(i)));
                let j = from_factor.or_else(|| (0..parts.children.len()).find(|&i| nonzero(i)))?;
                Some(LiarAnswer::Witness(j))
            }
        }
    }
}

/// Play the back-translated Liar of `bob` against `prover`.
pub fn bob_as_liar(
    prover: &dyn Prover,
    bob: &dyn SimpleBob,
    approx: &ApproxContext,
    params: &GameParamsG,
) -> TranscriptG {
    let mut liar = BobLiar { bob, approx };
    referee_g(prover, &mut liar, params)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoinSearch {
    pub coins: Vec<bool>,
    /// Alice wins over `Ω` with these coins.
    pub wins: usize,
    pub omega: usize,
    pub candidates: usize,
    pub exhaustive: bool,
    /// Largest number of coin bits any play consumed.
    pub coins_used: usize,
}

/// Fix Alice's coins to the string that wins against the most Bobs of `Ω`.
/// Up to `2^max_exhaustive_bits` strings are enumerated; beyond that,
/// `samples` seeded strings are tried.
#[allow(clippy::too_many_arguments)]
pub fn alice_coin_search(
    make: &(dyn Fn(Vec<bool>) -> Arc<dyn Alice> + Sync),
    bits: usize,
    omega: &[Arc<dyn SimpleBob>],
    params: &GameParamsH,
    max_exhaustive_bits: usize,
    samples: usize,
    seed: u64,
) -> CoinSearch {
    let score = |coins: &[bool]| {
        let alice = make(coins.to_vec());
        let mut wins = 0;
        let mut used = 0;
        for b in omega {
            let t = referee_h(alice.as_ref(), b.as_ref(), params);
            wins += t.alice_won() as usize;
            used = used.max(t.coins_used);
        }
        (wins, used)
    };
    let zero = vec![false; bits];
    let (w0, used0) = score(&zero);
    let mut best = CoinSearch {
        coins: zero,
        wins: w0,
        omega: omega.len(),
        candidates: 1,
        exhaustive: true,
        coins_used: used0,
    };
    if used0 == 0 || w0 == omega.len() {
        return best;
    }
    let candidates: Vec<Vec<bool>> = if bits <= max_exhaustive_bits {
        (1u64..1 << bits)
            .map(|c| (0..bits).map(|i| c >> i & 1 == 1).collect())
            .collect()
    } else {
        best.exhaustive = false;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples).map(|_| (0..bits).map(|_| rng.gen_bool(0.5)).collect()).collect()
    };
    for coins in candidates {
        best.candidates += 1;
        let (w, used) = score(&coins);
        best.coins_used = best.coins_used.max(used);
        if w > best.wins {
            best.wins = w;
            best.coins = coins;
            if w == omega.len() {
                break;
            }
        }
    }
    best
}

/// Value of a Bob on the constant `c`, for reports.
pub fn constant_value(bob: &dyn SimpleBob, p: Prime, c: Fp) -> Fp {
    bob.value(&Polynomial::constant(p, c as u64)) % p.get()
}
