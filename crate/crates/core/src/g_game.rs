//! The Prover/Liar game G(d, n, t) over formulas.
//!
//! Prover asks for truth values of formulas (P1), for a disjunct of a
//! disjunction valued false (P2a) or for a witness of a disjunction valued true
//! (P2b). Liar must answer consistently with rules L0 to L4; the referee
//! checks them after every answer.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::field::Prime;
use crate::formula::{Assignment, Formula, Node};
use crate::proof::{is_mod_axiom, Proof, ProofNode, Rule};

#[derive(Debug, Clone)]
pub struct GameParamsG {
    /// Maximal depth of a question.
    pub d: usize,
    /// Number of rounds; questions are also limited to size `2^t`.
    pub t: usize,
    pub p: Prime,
    pub axioms: Vec<Formula>,
}

impl GameParamsG {
    pub fn max_question_size(&self) -> usize {
        1usize.checked_shl(self.t as u32).unwrap_or(usize::MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProverQuestion {
    P1 { formula: Formula },
    P2a { disjunction: Formula, index: usize },
    P2b { disjunction: Formula },
}

impl ProverQuestion {
    /// The formula whose value the answer fixes (for P2b: none until the
    /// witness is known).
    pub fn asked_formula(&self) -> Option<Formula> {
        match self {
            ProverQuestion::P1 { formula } => Some(formula.clone()),
            ProverQuestion::P2a { disjunction, index } => {
                disjunction.as_or().and_then(|a| a.get(*index)).cloned()
            }
            ProverQuestion::P2b { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LiarAnswer {
    Value(bool),
    Witness(usize),
}

pub type Valuation = HashMap<Formula, bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LRule {
    L0,
    L1,
    L2,
    L3,
    L4,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GViolation {
    pub rule: LRule,
    pub formula: Formula,
    pub detail: String,
}

/// Liar's commitments so far, with rule checking.
#[derive(Debug, Clone)]
pub struct GState {
    valuation: Valuation,
    axioms: HashSet<Formula>,
    p: Prime,
}

impl GState {
    pub fn new(axioms: &[Formula], p: Prime) -> Self {
        GState {
            valuation: Valuation::new(),
            axioms: axioms.iter().cloned().collect(),
            p,
        }
    }

    pub fn valuation(&self) -> &Valuation {
        &self.valuation
    }

    pub fn value(&self, f: &Formula) -> Option<bool> {
        self.valuation.get(f).copied()
    }

    /// Whether a P2 question is allowed in the current position.
    pub fn legal(&self, q: &ProverQuestion) -> Result<(), String> {
        match q {
            ProverQuestion::P1 { .. } => Ok(()),
            ProverQuestion::P2a { disjunction, index } => {
                let args = disjunction.as_or().ok_or("P2a on a non-disjunction")?;
                if *index >= args.len() {
                    return Err(format!("disjunct index {index} out of range"));
                }
                match self.value(disjunction) {
                    Some(false) => Ok(()),
                    _ => Err("P2a requires a disjunction valued false".into()),
                }
            }
            ProverQuestion::P2b { disjunction } => {
                disjunction.as_or().ok_or("P2b on a non-disjunction")?;
                match self.value(disjunction) {
                    Some(true) => Ok(()),
                    _ => Err("P2b requires a disjunction valued true".into()),
                }
            }
        }
    }

    /// Record an answer to a legal question.
    pub fn apply(&mut self, q: &ProverQuestion, a: &LiarAnswer) -> Result<(), GViolation> {
        match (q, a) {
            (ProverQuestion::P1 { formula }, LiarAnswer::Value(b)) => self.record(formula, *b),
            (ProverQuestion::P2a { disjunction, index }, LiarAnswer::Value(b)) => {
                let phi = disjunction.as_or().unwrap()[*index].clone();
                if *b {
                    return Err(GViolation {
                        rule: LRule::L2,
                        formula: phi,
                        detail: "P2a answered true".into(),
                    });
                }
                self.record(&phi, false)
            }
            (ProverQuestion::P2b { disjunction }, LiarAnswer::Witness(j)) => {
                let args = disjunction.as_or().unwrap();
                match args.get(*j) {
                    Some(phi) => self.record(&phi.clone(), true),
                    None => Err(GViolation {
                        rule: LRule::L2,
                        formula: disjunction.clone(),
                        detail: format!("witness index {j} out of range"),
                    }),
                }
            }
            (q, a) => Err(GViolation {
                rule: LRule::L2,
                formula: q.asked_formula().unwrap_or_else(|| match q {
                    ProverQuestion::P2b { disjunction } => disjunction.clone(),
                    _ => unreachable!(),
                }),
                detail: format!("answer {a:?} does not fit the question"),
            }),
        }
    }

    fn record(&mut self, f: &Formula, b: bool) -> Result<(), GViolation> {
        let viol = |rule, detail: String| {
            Err(GViolation {
                rule,
                formula: f.clone(),
                detail,
            })
        };
        if let Some(old) = self.value(f) {
            if old != b {
                return viol(LRule::L0, format!("earlier value {old}, now {b}"));
            }
        }
        self.valuation.insert(f.clone(), b);
        if let Some(inner) = f.as_not() {
            if self.value(inner) == Some(b) {
                return viol(LRule::L1, format!("{inner} has the same value {b}"));
            }
        }
        if self.value(&Formula::not(f.clone())) == Some(b) {
            return viol(LRule::L1, format!("its negation has the same value {b}"));
        }
        if !b && is_mod_axiom(f, self.p) {
            return viol(LRule::L3, "MOD axiom valued false".into());
        }
        if !b && self.axioms.contains(f) {
            return viol(LRule::L4, "axiom valued false".into());
        }
        Ok(())
    }
}

pub type History = [(ProverQuestion, LiarAnswer)];

pub trait Prover: Send + Sync {
    /// Next question given the play so far; `None` to stop asking.
    fn next_question(&self, history: &History) -> Option<ProverQuestion>;
}

pub trait Liar {
    /// `None` when Liar cannot answer.
    fn answer(&mut self, q: &ProverQuestion, valuation: &Valuation) -> Option<LiarAnswer>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GWinner {
    Prover,
    Liar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GEnd {
    Violation(GViolation),
    NoAnswer,
    Forfeit { reason: String },
    ProverStopped,
    RoundsExhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct GRound {
    pub question: ProverQuestion,
    pub answer: Option<LiarAnswer>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TranscriptG {
    pub rounds: Vec<GRound>,
    pub winner: GWinner,
    pub end: GEnd,
}

impl TranscriptG {
    pub fn prover_won(&self) -> bool {
        self.winner == GWinner::Prover
    }
}

/// Play one game. Questions above the depth or size caps, or P2 questions
/// without the required earlier answer, forfeit the game for Prover.
pub fn referee_g(prover: &dyn Prover, liar: &mut dyn Liar, params: &GameParamsG) -> TranscriptG {
    let mut state = GState::new(&params.axioms, params.p);
    let mut history: Vec<(ProverQuestion, LiarAnswer)> = Vec::new();
    let mut rounds = Vec::new();
    let finish = |rounds, winner, end| TranscriptG { rounds, winner, end };
    for _ in 0..params.t {
        let Some(q) = prover.next_question(&history) else {
            return finish(rounds, GWinner::Liar, GEnd::ProverStopped);
        };
        if let Some(reason) = question_cap_violation(&q, params).or_else(|| state.legal(&q).err()) {
            rounds.push(GRound {
                question: q,
                answer: None,
            });
            return finish(rounds, GWinner::Liar, GEnd::Forfeit { reason });
        }
        let a = liar.answer(&q, state.valuation());
        rounds.push(GRound {
            question: q.clone(),
            answer: a,
        });
        let Some(a) = a else {
            return finish(rounds, GWinner::Prover, GEnd::NoAnswer);
        };
        if let Err(v) = state.apply(&q, &a) {
            return finish(rounds, GWinner::Prover, GEnd::Violation(v));
        }
        history.push((q, a));
    }
    finish(rounds, GWinner::Liar, GEnd::RoundsExhausted)
}

pub fn question_cap_violation(q: &ProverQuestion, params: &GameParamsG) -> Option<String> {
    let f = match q {
        ProverQuestion::P1 { formula } => formula,
        ProverQuestion::P2a { disjunction, .. } | ProverQuestion::P2b { disjunction } => disjunction,
    };
    if f.depth() > params.d {
        return Some(format!("question depth {} above {}", f.depth(), params.d));
    }
    if f.size() > params.max_question_size() {
        return Some(format!(
            "question size {} above {}",
            f.size(),
            params.max_question_size()
        ));
    }
    None
}

/// Post-hoc check of a finished transcript, independent of [`GState`].
/// Returns the first rule violation found in the rounds that were answered.
pub fn audit_transcript(t: &TranscriptG, params: &GameParamsG) -> Option<String> {
    let axioms: HashSet<&Formula> = params.axioms.iter().collect();
    let mut val: HashMap<Formula, bool> = HashMap::new();
    let mut order = Vec::new();
    for (k, round) in t.rounds.iter().enumerate() {
        let Some(a) = round.answer else { continue };
        let (f, b) = match (&round.question, a) {
            (ProverQuestion::P1 { formula }, LiarAnswer::Value(b)) => (formula.clone(), b),
            (ProverQuestion::P2a { disjunction, index }, LiarAnswer::Value(b)) => {
                if val.get(disjunction) != Some(&false) {
                    return Some(format!("round {k}: P2a without a false disjunction"));
                }
                if b {
                    return Some(format!("round {k}: P2a answered true"));
                }
                (disjunction.as_or()?[*index].clone(), b)
            }
            (ProverQuestion::P2b { disjunction }, LiarAnswer::Witness(j)) => {
                if val.get(disjunction) != Some(&true) {
                    return Some(format!("round {k}: P2b without a true disjunction"));
                }
                match disjunction.as_or()?.get(j) {
                    Some(f) => (f.clone(), true),
                    None => return Some(format!("round {k}: witness out of range")),
                }
            }
            _ => return Some(format!("round {k}: answer does not fit the question")),
        };
        if val.insert(f.clone(), b).is_some_and(|old| old != b) {
            return Some(format!("round {k}: {f} answered inconsistently"));
        }
        order.push(f);
    }
    for f in &order {
        let b = val[f];
        if let Node::Not(g) = f.node() {
            if val.get(g) == Some(&b) {
                return Some(format!("{f} and {g} have the same value"));
            }
        }
        if !b && is_mod_axiom(f, params.p) {
            return Some(format!("MOD axiom {f} valued false"));
        }
        if !b && axioms.contains(f) {
            return Some(format!("axiom {f} valued false"));
        }
    }
    None
}

/// The Prover strategy read off a tree-like refutation: walk from the
/// end-sequent towards an initial sequent, keeping every antecedent formula
/// valued true and every succedent formula valued false.
#[derive(Debug, Clone)]
pub struct ProofProver {
    proof: Proof,
}

impl ProofProver {
    pub fn new(proof: &Proof) -> Result<Self, String> {
        if !proof.is_tree() {
            return Err("proof has shared premises; unfold it to a tree first".into());
        }
        Ok(ProofProver {
            proof: proof.clone(),
        })
    }

    pub fn proof(&self) -> &Proof {
        &self.proof
    }
}

/// Valuation and witnesses implied by a history.
fn replay(history: &History) -> (Valuation, HashMap<Formula, usize>) {
    let mut val = Valuation::new();
    let mut witnesses = HashMap::new();
    for (q, a) in history {
        match (q, a) {
            (ProverQuestion::P1 { formula }, LiarAnswer::Value(b)) => {
                val.insert(formula.clone(), *b);
            }
            (ProverQuestion::P2a { disjunction, index }, LiarAnswer::Value(b)) => {
                if let Some(f) = disjunction.as_or().and_then(|a| a.get(*index)) {
                    val.insert(f.clone(), *b);
                }
            }
            (ProverQuestion::P2b { disjunction }, LiarAnswer::Witness(j)) => {
                if let Some(f) = disjunction.as_or().and_then(|a| a.get(*j)) {
                    val.insert(f.clone(), true);
                }
                witnesses.insert(disjunction.clone(), *j);
            }
            _ => {}
        }
    }
    (val, witnesses)
}

impl Prover for ProofProver {
    fn next_question(&self, history: &History) -> Option<ProverQuestion> {
        let (val, witnesses) = replay(history);
        let mut node: &ProofNode = &self.proof.root;
        loop {
            node = match &node.rule {
                r if r.is_structural() => &node.premises[0],
                Rule::Cut { formula } => match val.get(formula) {
                    Some(true) => &node.premises[1],
                    Some(false) => &node.premises[0],
                    None => {
                        return Some(ProverQuestion::P1 {
                            formula: formula.clone(),
                        })
                    }
                },
                Rule::NegLeft { principal } | Rule::NegRight { principal } => {
                    let phi = principal.as_not()?;
                    if !val.contains_key(phi) {
                        return Some(ProverQuestion::P1 {
                            formula: phi.clone(),
                        });
                    }
                    &node.premises[0]
                }
                Rule::OrRight { principal, minor } => {
                    let phi = &principal.as_or()?[*minor];
                    if !val.contains_key(phi) {
                        return Some(ProverQuestion::P2a {
                            disjunction: principal.clone(),
                            index: *minor,
                        });
                    }
                    &node.premises[0]
                }
                Rule::OrLeft { principal } => {
                    let args = principal.as_or()?;
                    let known = witnesses
                        .get(principal)
                        .copied()
                        .or_else(|| args.iter().position(|a| val.get(a) == Some(&true)));
                    match known {
                        Some(j) => node.premises.get(j)?,
                        None => {
                            return Some(ProverQuestion::P2b {
                                disjunction: principal.clone(),
                            })
                        }
                    }
                }
                _ => return None,
            };
        }
    }
}

/// Answers by evaluation under a total assignment; P2b gets the least true
/// disjunct.
#[derive(Debug, Clone)]
pub struct AssignmentLiar {
    pub alpha: Assignment,
}

impl Liar for AssignmentLiar {
    fn answer(&mut self, q: &ProverQuestion, _: &Valuation) -> Option<LiarAnswer> {
        match q {
            ProverQuestion::P2b { disjunction } => disjunction
                .as_or()?
                .iter()
                .position(|f| f.eval(&self.alpha).unwrap_or(false))
                .map(LiarAnswer::Witness),
            q => q.asked_formula()?.eval(&self.alpha).ok().map(LiarAnswer::Value),
        }
    }
}

/// Says true to everything and always witnesses with the first disjunct.
#[derive(Debug, Clone, Default)]
pub struct AlwaysTrueLiar;

impl Liar for AlwaysTrueLiar {
    fn answer(&mut self, q: &ProverQuestion, _: &Valuation) -> Option<LiarAnswer> {
        match q {
            ProverQuestion::P2b { disjunction } => {
                (!disjunction.as_or()?.is_empty()).then_some(LiarAnswer::Witness(0))
            }
            _ => Some(LiarAnswer::Value(true)),
        }
    }
}

/// Uniformly random answers.
#[derive(Debug, Clone)]
pub struct RandomLiar {
    rng: ChaCha8Rng,
}

impl RandomLiar {
    pub fn new(seed: u64) -> Self {
        RandomLiar {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Liar for RandomLiar {
    fn answer(&mut self, q: &ProverQuestion, _: &Valuation) -> Option<LiarAnswer> {
        match q {
            ProverQuestion::P2b { disjunction } => {
                let u = disjunction.as_or()?.len();
                (u > 0).then(|| LiarAnswer::Witness(self.rng.gen_range(0..u)))
            }
            _ => Some(LiarAnswer::Value(self.rng.gen())),
        }
    }
}

/// Keeps every locally detectable rule (repetition, negation pairs, axioms,
/// disjunct discipline) and answers at random otherwise.
#[derive(Debug, Clone)]
pub struct GreedyConsistentLiar {
    rng: ChaCha8Rng,
    axioms: HashSet<Formula>,
    p: Prime,
}

impl GreedyConsistentLiar {
    pub fn new(seed: u64, axioms: &[Formula], p: Prime) -> Self {
        GreedyConsistentLiar {
            rng: ChaCha8Rng::seed_from_u64(seed),
            axioms: axioms.iter().cloned().collect(),
            p,
        }
    }

    fn forced(&self, f: &Formula, val: &Valuation) -> Option<bool> {
        if let Some(&b) = val.get(f) {
            return Some(b);
        }
        if self.axioms.contains(f) || is_mod_axiom(f, self.p) {
            return Some(true);
        }
        if let Some(&b) = f.as_not().and_then(|g| val.get(g)) {
            return Some(!b);
        }
        if let Some(&b) = val.get(&Formula::not(f.clone())) {
            return Some(!b);
        }
        if let Some(args) = f.as_or() {
            if args.iter().any(|a| val.get(a) == Some(&true)) {
                return Some(true);
            }
            if args.iter().all(|a| val.get(a) == Some(&false)) {
                return Some(false);
            }
        }
        None
    }
}

impl Liar for GreedyConsistentLiar {
    fn answer(&mut self, q: &ProverQuestion, val: &Valuation) -> Option<LiarAnswer> {
        match q {
            ProverQuestion::P1 { formula } => {
                let b = self.forced(formula, val).unwrap_or_else(|| self.rng.gen());
                Some(LiarAnswer::Value(b))
            }
            ProverQuestion::P2a { .. } => {
                let f = q.asked_formula()?;
                Some(LiarAnswer::Value(val.get(&f).copied().unwrap_or(false)))
            }
            ProverQuestion::P2b { disjunction } => {
                let args = disjunction.as_or()?;
                if args.is_empty() {
                    return None;
                }
                if let Some(j) = args.iter().position(|a| val.get(a) == Some(&true)) {
                    return Some(LiarAnswer::Witness(j));
                }
                let open: Vec<usize> = (0..args.len())
                    .filter(|&i| self.forced(&args[i], val) != Some(false))
                    .collect();
                let j = if open.is_empty() {
                    self.rng.gen_range(0..args.len())
                } else {
                    open[self.rng.gen_range(0..open.len())]
                };
                Some(LiarAnswer::Witness(j))
            }
        }
    }
}
