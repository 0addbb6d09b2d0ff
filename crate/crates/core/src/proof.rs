//! Tree-like (or DAG) derivations in the sequent calculus LK(MOD_p).
//!
//! Rules: initial sequents `→ φ` (refuted axioms), `→ A` (MOD_p-axioms) and
//! `φ → φ`; weakening (one or more formulas), contraction, exchange, cut,
//! `¬`-left/right, `∨`-left (one premise per disjunct) and `∨`-right with a
//! recorded minor index. Sequents are compared as multisets, so exchange is
//! accepted but never needed.
//!
//! # File format
//!
//! ```text
//! LKMODP/1
//! p <prime>
//! d <depth bound>
//! <label> <rule> [<formula> [<minor index>]] [from <label>...] : <formula>* => <formula>*
//! ...
//! root <label>
//! ```
//!
//! Rule names: `axiom`, `mod-axiom`, `logical`, `weaken`, `contract`,
//! `exchange`, `cut`, `not-left`, `not-right`, `or-left`, `or-right`.
//! `cut` carries the cut formula, the `not`/`or` rules carry their principal
//! formula, and `or-right` additionally the 0-based minor index. Premises must
//! be defined on earlier lines; a label may be referenced several times, which
//! makes the proof a DAG. `#` starts a comment.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::field::Prime;
use crate::formula::{parse_formula, tokenize, Formula, Node, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sequent {
    pub ante: Vec<Formula>,
    pub succ: Vec<Formula>,
}

impl Sequent {
    pub fn new(ante: Vec<Formula>, succ: Vec<Formula>) -> Self {
        Sequent { ante, succ }
    }

    pub fn empty() -> Self {
        Sequent::default()
    }

    pub fn is_empty(&self) -> bool {
        self.ante.is_empty() && self.succ.is_empty()
    }

    pub fn formulas(&self) -> impl Iterator<Item = &Formula> {
        self.ante.iter().chain(self.succ.iter())
    }

    fn same_as(&self, other: &Sequent) -> bool {
        multiset_eq(&self.ante, &other.ante) && multiset_eq(&self.succ, &other.succ)
    }

    fn with_ante(&self, f: &Formula) -> Sequent {
        let mut s = self.clone();
        s.ante.insert(0, f.clone());
        s
    }

    fn with_succ(&self, f: &Formula) -> Sequent {
        let mut s = self.clone();
        s.succ.push(f.clone());
        s
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.ante {
            write!(f, "{a} ")?;
        }
        write!(f, "=>")?;
        for s in &self.succ {
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

fn sorted(xs: &[Formula]) -> Vec<&Formula> {
    let mut v: Vec<&Formula> = xs.iter().collect();
    v.sort();
    v
}

fn multiset_eq(a: &[Formula], b: &[Formula]) -> bool {
    a.len() == b.len() && sorted(a) == sorted(b)
}

fn multiset_le(small: &[Formula], big: &[Formula]) -> bool {
    let mut counts: HashMap<&Formula, isize> = HashMap::new();
    for f in big {
        *counts.entry(f).or_default() += 1;
    }
    small.iter().all(|f| {
        let c = counts.entry(f).or_default();
        *c -= 1;
        *c >= 0
    })
}

/// Remove one occurrence of `f`; `None` if absent.
fn remove_one(xs: &[Formula], f: &Formula) -> Option<Vec<Formula>> {
    let pos = xs.iter().position(|x| x == f)?;
    let mut out = xs.to_vec();
    out.remove(pos);
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    InitialAxiomFormula,
    InitialModAxiom,
    InitialLogical,
    Weakening,
    Contraction,
    Exchange,
    Cut { formula: Formula },
    NegLeft { principal: Formula },
    NegRight { principal: Formula },
    OrLeft { principal: Formula },
    OrRight { principal: Formula, minor: usize },
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::InitialAxiomFormula => "axiom",
            Rule::InitialModAxiom => "mod-axiom",
            Rule::InitialLogical => "logical",
            Rule::Weakening => "weaken",
            Rule::Contraction => "contract",
            Rule::Exchange => "exchange",
            Rule::Cut { .. } => "cut",
            Rule::NegLeft { .. } => "not-left",
            Rule::NegRight { .. } => "not-right",
            Rule::OrLeft { .. } => "or-left",
            Rule::OrRight { .. } => "or-right",
        }
    }

    pub fn is_structural(&self) -> bool {
        matches!(self, Rule::Weakening | Rule::Contraction | Rule::Exchange)
    }

    fn meta_formula(&self) -> Option<&Formula> {
        match self {
            Rule::Cut { formula } => Some(formula),
            Rule::NegLeft { principal }
            | Rule::NegRight { principal }
            | Rule::OrLeft { principal }
            | Rule::OrRight { principal, .. } => Some(principal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofNode {
    pub conclusion: Sequent,
    pub rule: Rule,
    pub premises: Vec<Arc<ProofNode>>,
    pub label: Option<String>,
}

impl ProofNode {
    pub fn new(rule: Rule, premises: Vec<Arc<ProofNode>>, conclusion: Sequent) -> Arc<Self> {
        Arc::new(ProofNode {
            conclusion,
            rule,
            premises,
            label: None,
        })
    }

    pub fn axiom(f: Formula) -> Arc<Self> {
        Self::new(Rule::InitialAxiomFormula, vec![], Sequent::new(vec![], vec![f]))
    }

    pub fn mod_axiom(a: Formula) -> Arc<Self> {
        Self::new(Rule::InitialModAxiom, vec![], Sequent::new(vec![], vec![a]))
    }

    pub fn logical(f: Formula) -> Arc<Self> {
        Self::new(Rule::InitialLogical, vec![], Sequent::new(vec![f.clone()], vec![f]))
    }

    /// Add formulas on both sides; returns the premise itself when nothing
    /// is added.
    pub fn weaken(prem: Arc<Self>, ante: &[Formula], succ: &[Formula]) -> Arc<Self> {
        if ante.is_empty() && succ.is_empty() {
            return prem;
        }
        let mut s = prem.conclusion.clone();
        s.ante.extend_from_slice(ante);
        s.succ.extend_from_slice(succ);
        Self::new(Rule::Weakening, vec![prem], s)
    }

    /// `left` proves `Γ → Δ, A` and `right` proves `A, Γ → Δ`.
    pub fn cut(formula: Formula, left: Arc<Self>, right: Arc<Self>) -> Arc<Self> {
        let ante = remove_one(&right.conclusion.ante, &formula).expect("cut formula on the left");
        let s = Sequent::new(ante, right.conclusion.succ.clone());
        Self::new(Rule::Cut { formula }, vec![left, right], s)
    }

    /// From `Γ → Δ, φ` infer `¬φ, Γ → Δ`.
    pub fn neg_left(prem: Arc<Self>, phi: &Formula) -> Arc<Self> {
        let principal = Formula::not(phi.clone());
        let succ = remove_one(&prem.conclusion.succ, phi).expect("minor formula present");
        let s = Sequent::new(
            std::iter::once(principal.clone())
                .chain(prem.conclusion.ante.iter().cloned())
                .collect(),
            succ,
        );
        Self::new(Rule::NegLeft { principal }, vec![prem], s)
    }

    /// From `φ, Γ → Δ` infer `Γ → Δ, ¬φ`.
    pub fn neg_right(prem: Arc<Self>, phi: &Formula) -> Arc<Self> {
        let principal = Formula::not(phi.clone());
        let ante = remove_one(&prem.conclusion.ante, phi).expect("minor formula present");
        let mut succ = prem.conclusion.succ.clone();
        succ.push(principal.clone());
        Self::new(Rule::NegRight { principal }, vec![prem], Sequent::new(ante, succ))
    }

    /// From `φ_i, Γ → Δ` for every disjunct infer `∨φ, Γ → Δ`. With no
    /// disjuncts the context must be given explicitly.
    pub fn or_left(principal: Formula, prems: Vec<Arc<Self>>, empty_ctx: Option<Sequent>) -> Arc<Self> {
        let args = principal.as_or().expect("disjunction").to_vec();
        let ctx = match prems.first() {
            Some(first) => Sequent::new(
                remove_one(&first.conclusion.ante, &args[0]).expect("minor formula present"),
                first.conclusion.succ.clone(),
            ),
            None => empty_ctx.expect("context for an empty disjunction"),
        };
        let s = ctx.with_ante(&principal);
        Self::new(Rule::OrLeft { principal }, prems, s)
    }

    /// From `Γ → Δ, φ_j` infer `Γ → Δ, ∨φ`.
    pub fn or_right(prem: Arc<Self>, principal: Formula, minor: usize) -> Arc<Self> {
        let phi = principal.as_or().expect("disjunction")[minor].clone();
        let succ = remove_one(&prem.conclusion.succ, &phi).expect("minor formula present");
        let s = Sequent::new(prem.conclusion.ante.clone(), succ).with_succ(&principal);
        Self::new(Rule::OrRight { principal, minor }, vec![prem], s)
    }
}

/// The canonical `MOD_p`-axiom for a nonempty argument list `(Γ, φ)`:
/// `MOD_{p,i}(Γ,φ) ≡ [(MOD_{p,i}(Γ) ∧ ¬φ) ∨ (MOD_{p,i−1}(Γ) ∧ φ)]`.
pub fn mod_axiom(p: Prime, gamma: &[Formula], phi: &Formula, i: u32) -> Formula {
    let (lhs, rhs) = mod_axiom_sides(p, gamma, phi, i);
    Formula::equiv(lhs, rhs)
}

/// The two sides of [`mod_axiom`].
pub fn mod_axiom_sides(p: Prime, gamma: &[Formula], phi: &Formula, i: u32) -> (Formula, Formula) {
    let m = |r: u32, args: Vec<Formula>| Formula::modp(p, r, args).expect("residue reduced mod p");
    let mut all = gamma.to_vec();
    all.push(phi.clone());
    let lhs = m(i, all);
    let prev = (i + p.get() - 1) % p.get();
    let rhs = Formula::or(vec![
        Formula::and(vec![m(i, gamma.to_vec()), Formula::not(phi.clone())]),
        Formula::and(vec![m(prev, gamma.to_vec()), phi.clone()]),
    ]);
    (lhs, rhs)
}

/// Base axioms: `MOD_{p,0}()` for `i = 0`, `¬MOD_{p,i}()` otherwise.
pub fn mod_axiom_base(p: Prime, i: u32) -> Formula {
    let m = Formula::modp(p, i, vec![]).expect("residue reduced mod p");
    if i == 0 {
        m
    } else {
        Formula::not(m)
    }
}

/// Recognize an instance of the `MOD_p`-axioms in canonical form.
pub fn is_mod_axiom(a: &Formula, p: Prime) -> bool {
    match a.node() {
        Node::Mod { p: q, residue: 0, args } => *q == p.get() && args.is_empty(),
        Node::Not(inner) => {
            if let Node::Mod { p: q, residue, args } = inner.node() {
                if *q == p.get() && args.is_empty() && *residue != 0 {
                    return true;
                }
            }
            equiv_lhs(a)
                .and_then(|lhs| match lhs.node() {
                    Node::Mod { p: q, residue, args } if *q == p.get() && !args.is_empty() => {
                        let (phi, gamma) = args.split_last().unwrap();
                        Some(mod_axiom(p, gamma, phi, *residue) == *a)
                    }
                    _ => None,
                })
                .unwrap_or(false)
        }
        _ => false,
    }
}

/// The left side `A` of a formula of the shape produced by `Formula::equiv(A, B)`.
fn equiv_lhs(f: &Formula) -> Option<&Formula> {
    let outer = f.as_not()?.as_or()?;
    let first = outer.first()?.as_not()?.as_or()?;
    first.first()?.as_not()
}

#[derive(Debug, Clone)]
pub struct Proof {
    pub root: Arc<ProofNode>,
    /// Declared depth bound for every formula in the proof.
    pub d: usize,
    pub p: Prime,
    height: usize,
    node_count: usize,
    tree_size: u128,
}

impl Proof {
    pub fn new(root: Arc<ProofNode>, d: usize, p: Prime) -> Self {
        let mut memo = HashMap::new();
        let (height, tree_size) = measure(&root, &mut memo);
        Proof {
            node_count: memo.len(),
            root,
            d,
            p,
            height,
            tree_size,
        }
    }

    /// Length of the longest root-to-leaf path, counted in inferences.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of distinct nodes (shared premises count once).
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of nodes after unfolding shared premises.
    pub fn tree_size(&self) -> u128 {
        self.tree_size
    }

    pub fn is_tree(&self) -> bool {
        self.tree_size == self.node_count as u128
    }

    /// Total formula symbol count over distinct nodes.
    pub fn symbol_size(&self) -> usize {
        let mut seen = HashSet::new();
        let mut total = 0;
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if !seen.insert(Arc::as_ptr(n)) {
                continue;
            }
            total += n.conclusion.formulas().map(Formula::size).sum::<usize>();
            stack.extend(n.premises.iter());
        }
        total
    }

    /// Largest formula depth occurring anywhere in the proof.
    pub fn max_formula_depth(&self) -> usize {
        let mut seen = HashSet::new();
        let mut best = 0;
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if !seen.insert(Arc::as_ptr(n)) {
                continue;
            }
            for f in n.conclusion.formulas().chain(n.rule.meta_formula()) {
                best = best.max(f.depth());
            }
            stack.extend(n.premises.iter());
        }
        best
    }

    /// Largest formula size occurring anywhere in the proof.
    pub fn max_formula_size(&self) -> usize {
        let mut seen = HashSet::new();
        let mut best = 0;
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if !seen.insert(Arc::as_ptr(n)) {
                continue;
            }
            for f in n.conclusion.formulas().chain(n.rule.meta_formula()) {
                best = best.max(f.size());
            }
            stack.extend(n.premises.iter());
        }
        best
    }

    /// Replace every shared premise by its own copy.
    pub fn unfold_to_tree(&self) -> Proof {
        if self.is_tree() {
            return self.clone();
        }
        Proof::new(unfold(&self.root), self.d, self.p)
    }
}

fn measure(n: &Arc<ProofNode>, memo: &mut HashMap<*const ProofNode, (usize, u128)>) -> (usize, u128) {
    if let Some(&m) = memo.get(&Arc::as_ptr(n)) {
        return m;
    }
    let mut height = 0;
    let mut size: u128 = 1;
    for prem in &n.premises {
        let (h, s) = measure(prem, memo);
        height = height.max(h + 1);
        size = size.saturating_add(s);
    }
    memo.insert(Arc::as_ptr(n), (height, size));
    (height, size)
}

fn unfold(n: &Arc<ProofNode>) -> Arc<ProofNode> {
    Arc::new(ProofNode {
        conclusion: n.conclusion.clone(),
        rule: n.rule.clone(),
        premises: n.premises.iter().map(unfold).collect(),
        label: n.label.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} at node {} ({}): {message}", "invalid inference", fmt_path(.path, .label), .rule)]
pub struct ProofViolation {
    /// Premise indices from the root.
    pub path: Vec<usize>,
    pub label: Option<String>,
    pub rule: &'static str,
    pub message: String,
}

fn fmt_path(path: &[usize], label: &Option<String>) -> String {
    let mut s = String::from("root");
    for i in path {
        s.push('.');
        s.push_str(&i.to_string());
    }
    if let Some(l) = label {
        s.push_str(&format!(" [{l}]"));
    }
    s
}

/// Check a refutation: every inference is valid, every formula has depth at
/// most `d`, and the end-sequent is empty.
pub fn check_proof(proof: &Proof, axioms: &[Formula]) -> Result<(), ProofViolation> {
    if !proof.root.conclusion.is_empty() {
        return Err(ProofViolation {
            path: vec![],
            label: proof.root.label.clone(),
            rule: proof.root.rule.name(),
            message: "end-sequent not empty".into(),
        });
    }
    check_derivation(proof, axioms)
}

/// Check every inference of a derivation with an arbitrary end-sequent.
/// Shared premises are checked once; violations are reported in pre-order.
pub fn check_derivation(proof: &Proof, axioms: &[Formula]) -> Result<(), ProofViolation> {
    let axioms: HashSet<&Formula> = axioms.iter().collect();
    let mut checked = HashSet::new();
    let mut path = Vec::new();
    check_node(&proof.root, proof, &axioms, &mut checked, &mut path)
}

fn check_node(
    n: &Arc<ProofNode>,
    proof: &Proof,
    axioms: &HashSet<&Formula>,
    checked: &mut HashSet<*const ProofNode>,
    path: &mut Vec<usize>,
) -> Result<(), ProofViolation> {
    if !checked.insert(Arc::as_ptr(n)) {
        return Ok(());
    }
    check_inference(n, proof, axioms).map_err(|message| ProofViolation {
        path: path.clone(),
        label: n.label.clone(),
        rule: n.rule.name(),
        message,
    })?;
    for (i, prem) in n.premises.iter().enumerate() {
        path.push(i);
        check_node(prem, proof, axioms, checked, path)?;
        path.pop();
    }
    Ok(())
}

fn check_inference(n: &ProofNode, proof: &Proof, axioms: &HashSet<&Formula>) -> Result<(), String> {
    for f in n.conclusion.formulas().chain(n.rule.meta_formula()) {
        if f.depth() > proof.d {
            return Err(format!("formula {f} has depth {} above {}", f.depth(), proof.d));
        }
    }
    let c = &n.conclusion;
    let arity = |k: usize| {
        if n.premises.len() == k {
            Ok(())
        } else {
            Err(format!("expected {k} premises, found {}", n.premises.len()))
        }
    };
    let prem = |i: usize| &n.premises[i].conclusion;
    match &n.rule {
        Rule::InitialAxiomFormula => {
            arity(0)?;
            match (c.ante.as_slice(), c.succ.as_slice()) {
                ([], [f]) if axioms.contains(f) => Ok(()),
                ([], [f]) => Err(format!("{f} is not an axiom")),
                _ => Err("initial sequent must have the form → φ".into()),
            }
        }
        Rule::InitialModAxiom => {
            arity(0)?;
            match (c.ante.as_slice(), c.succ.as_slice()) {
                ([], [f]) if is_mod_axiom(f, proof.p) => Ok(()),
                ([], [f]) => Err(format!("{f} is not a MOD_{}-axiom", proof.p)),
                _ => Err("initial sequent must have the form → A".into()),
            }
        }
        Rule::InitialLogical => {
            arity(0)?;
            match (c.ante.as_slice(), c.succ.as_slice()) {
                ([a], [b]) if a == b => Ok(()),
                _ => Err("initial sequent must have the form φ → φ".into()),
            }
        }
        Rule::Weakening => {
            arity(1)?;
            let p = prem(0);
            if !multiset_le(&p.ante, &c.ante) || !multiset_le(&p.succ, &c.succ) {
                return Err("premise is not contained in the conclusion".into());
            }
            if p.ante.len() + p.succ.len() == c.ante.len() + c.succ.len() {
                return Err("weakening adds no formula".into());
            }
            Ok(())
        }
        Rule::Contraction => {
            arity(1)?;
            let p = prem(0);
            let ok_side = |pside: &[Formula], cside: &[Formula]| {
                pside.len() == cside.len() + 1
                    && multiset_le(cside, pside)
                    && pside.iter().any(|f| {
                        remove_one(pside, f).is_some_and(|rest| multiset_eq(&rest, cside))
                            && cside.contains(f)
                    })
            };
            let left = ok_side(&p.ante, &c.ante) && multiset_eq(&p.succ, &c.succ);
            let right = ok_side(&p.succ, &c.succ) && multiset_eq(&p.ante, &c.ante);
            if left || right {
                Ok(())
            } else {
                Err("conclusion does not contract one duplicated formula".into())
            }
        }
        Rule::Exchange => {
            arity(1)?;
            if prem(0).same_as(c) {
                Ok(())
            } else {
                Err("exchange changed the multiset of formulas".into())
            }
        }
        Rule::Cut { formula } => {
            arity(2)?;
            if !prem(0).same_as(&c.with_succ(formula)) {
                return Err(format!("left premise is not Γ → Δ, {formula}"));
            }
            if !prem(1).same_as(&c.with_ante(formula)) {
                return Err(format!("right premise is not {formula}, Γ → Δ"));
            }
            Ok(())
        }
        Rule::NegLeft { principal } => {
            arity(1)?;
            let phi = principal.as_not().ok_or("principal formula is not a negation")?;
            let ante = remove_one(&c.ante, principal).ok_or("principal formula missing")?;
            if prem(0).same_as(&Sequent::new(ante, c.succ.clone()).with_succ(phi)) {
                Ok(())
            } else {
                Err(format!("premise is not Γ → Δ, {phi}"))
            }
        }
        Rule::NegRight { principal } => {
            arity(1)?;
            let phi = principal.as_not().ok_or("principal formula is not a negation")?;
            let succ = remove_one(&c.succ, principal).ok_or("principal formula missing")?;
            if prem(0).same_as(&Sequent::new(c.ante.clone(), succ).with_ante(phi)) {
                Ok(())
            } else {
                Err(format!("premise is not {phi}, Γ → Δ"))
            }
        }
        Rule::OrLeft { principal } => {
            let args = principal.as_or().ok_or("principal formula is not a disjunction")?;
            arity(args.len())?;
            let ante = remove_one(&c.ante, principal).ok_or("principal formula missing")?;
            let ctx = Sequent::new(ante, c.succ.clone());
            for (i, phi) in args.iter().enumerate() {
                if !prem(i).same_as(&ctx.with_ante(phi)) {
                    return Err(format!("premise {i} is not {phi}, Γ → Δ"));
                }
            }
            Ok(())
        }
        Rule::OrRight { principal, minor } => {
            arity(1)?;
            let args = principal.as_or().ok_or("principal formula is not a disjunction")?;
            let phi = args
                .get(*minor)
                .ok_or_else(|| format!("minor index {minor} out of range"))?;
            let succ = remove_one(&c.succ, principal).ok_or("principal formula missing")?;
            if prem(0).same_as(&Sequent::new(c.ante.clone(), succ).with_succ(phi)) {
                Ok(())
            } else {
                Err(format!("premise is not Γ → Δ, {phi}"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefuteError {
    #[error("axiom set is satisfied by {0}")]
    Satisfiable(String),
    #[error("too many variables for a case split: {0}")]
    TooManyVariables(usize),
}

/// Refute an unsatisfiable axiom set by cutting on every variable (in
/// variable order) and, at each leaf, cutting in the first axiom the leaf
/// assignment falsifies. Feasible for a handful of variables only.
pub fn refute_by_case_split(axioms: &[Formula], p: Prime) -> Result<Proof, RefuteError> {
    let vars: Vec<VarId> = axioms
        .iter()
        .flat_map(|a| a.vars())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if vars.len() > 16 {
        return Err(RefuteError::TooManyVariables(vars.len()));
    }
    let mut atoms = BTreeMap::new();
    let root = split(axioms, &vars, &mut atoms, p)?;
    let proof = Proof::new(root, 0, p);
    let d = proof.max_formula_depth().max(2);
    Ok(Proof { d, ..proof })
}

fn split(
    axioms: &[Formula],
    vars: &[VarId],
    atoms: &mut BTreeMap<Formula, bool>,
    p: Prime,
) -> Result<Arc<ProofNode>, RefuteError> {
    match vars.split_first() {
        Some((&v, rest)) => {
            let x = Formula::var(v);
            atoms.insert(x.clone(), false);
            let left = split(axioms, rest, atoms, p)?;
            atoms.insert(x.clone(), true);
            let right = split(axioms, rest, atoms, p)?;
            atoms.remove(&x);
            Ok(ProofNode::cut(x, left, right))
        }
        None => {
            let falsified = axioms.iter().find(|a| !eval_atoms(a, atoms));
            let Some(a) = falsified else {
                let witness = atoms
                    .iter()
                    .map(|(f, b)| format!("{f}={}", *b as u8))
                    .collect::<Vec<_>>()
                    .join(",");
                return Err(RefuteError::Satisfiable(witness));
            };
            let (ante, succ) = context(atoms);
            let given = ProofNode::weaken(ProofNode::axiom(a.clone()), &ante, &succ);
            let refuted = truth_lemma(a, atoms, p);
            Ok(ProofNode::cut(a.clone(), given, refuted))
        }
    }
}

fn context(atoms: &BTreeMap<Formula, bool>) -> (Vec<Formula>, Vec<Formula>) {
    let ante = atoms.iter().filter(|(_, &b)| b).map(|(f, _)| f.clone()).collect();
    let succ = atoms.iter().filter(|(_, &b)| !b).map(|(f, _)| f.clone()).collect();
    (ante, succ)
}

/// Evaluate treating the formulas in `atoms` as propositional atoms.
fn eval_atoms(f: &Formula, atoms: &BTreeMap<Formula, bool>) -> bool {
    if let Some(&b) = atoms.get(f) {
        return b;
    }
    match f.node() {
        Node::Var(v) => panic!("variable {v} has no value"),
        Node::Not(g) => !eval_atoms(g, atoms),
        Node::Or(args) => args.iter().any(|g| eval_atoms(g, atoms)),
        Node::Mod { p, residue, args } => {
            args.iter().filter(|g| eval_atoms(g, atoms)).count() as u32 % p == *residue
        }
    }
}

/// With `Γ` the true and `Δ` the false atoms: derives `Γ → Δ, φ` when `φ`
/// evaluates to true and `φ, Γ → Δ` otherwise.
fn truth_lemma(f: &Formula, atoms: &BTreeMap<Formula, bool>, p: Prime) -> Arc<ProofNode> {
    let (ante, succ) = context(atoms);
    if let Some(&b) = atoms.get(f) {
        let (mut a, mut s) = (ante, succ);
        if b {
            a = remove_one(&a, f).unwrap();
        } else {
            s = remove_one(&s, f).unwrap();
        }
        return ProofNode::weaken(ProofNode::logical(f.clone()), &a, &s);
    }
    match f.node() {
        Node::Var(v) => panic!("variable {v} has no value"),
        Node::Not(g) => {
            let sub = truth_lemma(g, atoms, p);
            if eval_atoms(g, atoms) {
                ProofNode::neg_left(sub, g)
            } else {
                ProofNode::neg_right(sub, g)
            }
        }
        Node::Or(args) => {
            if let Some(j) = args.iter().position(|g| eval_atoms(g, atoms)) {
                ProofNode::or_right(truth_lemma(&args[j], atoms, p), f.clone(), j)
            } else {
                let prems = args.iter().map(|g| truth_lemma(g, atoms, p)).collect();
                ProofNode::or_left(f.clone(), prems, Some(Sequent::new(ante, succ)))
            }
        }
        Node::Mod { residue, args, .. } => match args.split_last() {
            None if *residue == 0 => {
                ProofNode::weaken(ProofNode::mod_axiom(f.clone()), &ante, &succ)
            }
            None => {
                // ¬M is an axiom: cut it against ¬M, M →
                let not_m = Formula::not(f.clone());
                let given = ProofNode::weaken(ProofNode::mod_axiom(not_m.clone()), std::slice::from_ref(f), &[]);
                let clash = ProofNode::neg_left(ProofNode::logical(f.clone()), f);
                let m_false = ProofNode::cut(not_m, given, clash);
                ProofNode::weaken(m_false, &ante, &succ)
            }
            Some((phi, gamma)) => {
                let (m, r) = mod_axiom_sides(p, gamma, phi, *residue);
                let e = Formula::equiv(m.clone(), r.clone());
                let value = eval_atoms(f, atoms);
                // Under the swapped values of M and R the axiom is false,
                // which yields R, Γ → Δ, M (or M, Γ → Δ, R).
                let mut swapped = atoms.clone();
                swapped.insert(m.clone(), !value);
                swapped.insert(r.clone(), value);
                let (sa, ss) = context(&swapped);
                let given = ProofNode::weaken(ProofNode::mod_axiom(e.clone()), &sa, &ss);
                let bridge = ProofNode::cut(e.clone(), given, truth_lemma(&e, &swapped, p));
                let r_lemma = truth_lemma(&r, atoms, p);
                if value {
                    let left = ProofNode::weaken(r_lemma, &[], std::slice::from_ref(&m));
                    ProofNode::cut(r, left, bridge)
                } else {
                    let right = ProofNode::weaken(r_lemma, std::slice::from_ref(&m), &[]);
                    ProofNode::cut(r, bridge, right)
                }
            }
        },
    }
}

/// The refutation of the `n = 1` pigeonhole clauses.
pub fn refute_php1() -> Proof {
    let p = Prime::new(2).unwrap();
    refute_by_case_split(&crate::formula::php_axioms(1).unwrap(), p).expect("unsatisfiable")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ProofParseError {
    pub line: usize,
    pub message: String,
}

/// Serialize in the `LKMODP/1` format. Shared premises are written once.
pub fn write_proof(proof: &Proof) -> String {
    let mut out = format!("LKMODP/1\np {}\nd {}\n", proof.p, proof.d);
    let mut labels: HashMap<*const ProofNode, String> = HashMap::new();
    let mut used: HashSet<String> = HashSet::new();
    let root = write_node(&proof.root, &mut labels, &mut used, &mut out);
    out.push_str(&format!("root {root}\n"));
    out
}

fn write_node(
    n: &Arc<ProofNode>,
    labels: &mut HashMap<*const ProofNode, String>,
    used: &mut HashSet<String>,
    out: &mut String,
) -> String {
    if let Some(l) = labels.get(&Arc::as_ptr(n)) {
        return l.clone();
    }
    let prems: Vec<String> = n.premises.iter().map(|q| write_node(q, labels, used, out)).collect();
    let mut label = n.label.clone().unwrap_or_else(|| format!("n{}", labels.len()));
    while used.contains(&label) {
        label = format!("{label}'");
    }
    used.insert(label.clone());
    out.push_str(&label);
    out.push(' ');
    out.push_str(n.rule.name());
    match &n.rule {
        Rule::OrRight { principal, minor } => out.push_str(&format!(" {principal} {minor}")),
        r => {
            if let Some(f) = r.meta_formula() {
                out.push_str(&format!(" {f}"));
            }
        }
    }
    if !prems.is_empty() {
        out.push_str(" from");
        for p in &prems {
            out.push(' ');
            out.push_str(p);
        }
    }
    out.push_str(" : ");
    out.push_str(&n.conclusion.to_string());
    out.push('\n');
    labels.insert(Arc::as_ptr(n), label.clone());
    label
}

/// Parse the `LKMODP/1` format.
pub fn parse_proof(text: &str) -> Result<Proof, ProofParseError> {
    let err = |line: usize, message: String| ProofParseError { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "LKMODP/1")) => {}
        Some((i, other)) => return Err(err(i, format!("bad header `{other}`"))),
        None => return Err(err(0, "empty input".into())),
    }
    let mut p = None;
    let mut d = None;
    let mut nodes: HashMap<String, Arc<ProofNode>> = HashMap::new();
    let mut root = None;
    for (line, l) in lines {
        if root.is_some() {
            return Err(err(line, "content after root".into()));
        }
        let toks = tokenize(l);
        match toks.first().map(String::as_str) {
            Some("p") if toks.len() == 2 => {
                let v: u32 = toks[1].parse().map_err(|_| err(line, "bad prime".into()))?;
                p = Some(Prime::new(v).map_err(|e| err(line, e.to_string()))?);
            }
            Some("d") if toks.len() == 2 => {
                d = Some(toks[1].parse().map_err(|_| err(line, "bad depth".into()))?);
            }
            Some("root") if toks.len() == 2 => {
                let n = nodes
                    .get(&toks[1])
                    .ok_or_else(|| err(line, format!("unknown label `{}`", toks[1])))?;
                root = Some(n.clone());
            }
            _ => {
                let (label, node) = parse_node_line(&toks, &nodes).map_err(|m| err(line, m))?;
                if nodes.contains_key(&label) {
                    return Err(err(line, format!("duplicate label `{label}`")));
                }
                nodes.insert(label, node);
            }
        }
    }
    let root = root.ok_or_else(|| err(0, "missing root line".into()))?;
    let p = p.ok_or_else(|| err(0, "missing `p` line".into()))?;
    let d = d.ok_or_else(|| err(0, "missing `d` line".into()))?;
    Ok(Proof::new(root, d, p))
}

fn parse_node_line(
    toks: &[String],
    nodes: &HashMap<String, Arc<ProofNode>>,
) -> Result<(String, Arc<ProofNode>), String> {
    let label = toks.first().ok_or("empty line")?.clone();
    let rule_name = toks.get(1).ok_or("missing rule")?.as_str();
    let mut pos = 2;
    let mut formula = || -> Result<Formula, String> {
        parse_formula(toks, &mut pos).map_err(|e| e.to_string())
    };
    let rule = match rule_name {
        "axiom" => Rule::InitialAxiomFormula,
        "mod-axiom" => Rule::InitialModAxiom,
        "logical" => Rule::InitialLogical,
        "weaken" => Rule::Weakening,
        "contract" => Rule::Contraction,
        "exchange" => Rule::Exchange,
        "cut" => Rule::Cut { formula: formula()? },
        "not-left" => Rule::NegLeft { principal: formula()? },
        "not-right" => Rule::NegRight { principal: formula()? },
        "or-left" => Rule::OrLeft { principal: formula()? },
        "or-right" => {
            let principal = formula()?;
            let minor = toks
                .get(pos)
                .and_then(|t| t.parse().ok())
                .ok_or("or-right needs a minor index")?;
            pos += 1;
            Rule::OrRight { principal, minor }
        }
        other => return Err(format!("unknown rule `{other}`")),
    };
    let mut premises = Vec::new();
    if toks.get(pos).map(String::as_str) == Some("from") {
        pos += 1;
        while let Some(t) = toks.get(pos) {
            if t == ":" {
                break;
            }
            premises.push(nodes.get(t).ok_or_else(|| format!("unknown label `{t}`"))?.clone());
            pos += 1;
        }
    }
    if toks.get(pos).map(String::as_str) != Some(":") {
        return Err("expected `:` before the sequent".into());
    }
    pos += 1;
    let mut ante = Vec::new();
    while toks.get(pos).map(String::as_str) != Some("=>") {
        if pos >= toks.len() {
            return Err("expected `=>`".into());
        }
        ante.push(parse_formula(toks, &mut pos).map_err(|e| e.to_string())?);
    }
    pos += 1;
    let mut succ = Vec::new();
    while pos < toks.len() {
        succ.push(parse_formula(toks, &mut pos).map_err(|e| e.to_string())?);
    }
    let node = Arc::new(ProofNode {
        conclusion: Sequent::new(ante, succ),
        rule,
        premises,
        label: Some(label.clone()),
    });
    Ok((label, node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{php_axioms, Assignment};

    fn p2() -> Prime {
        Prime::new(2).unwrap()
    }

    fn y(k: u32) -> Formula {
        Formula::var(VarId::Index(k))
    }

    #[test]
    fn base_mod_axioms_recognized() {
        let p = p2();
        assert!(is_mod_axiom(&mod_axiom_base(p, 0), p));
        assert!(is_mod_axiom(&mod_axiom_base(p, 1), p));
        let m1 = Formula::modp(p, 1, vec![]).unwrap();
        assert!(!is_mod_axiom(&m1, p));
        assert!(!is_mod_axiom(&y(0), p));
    }

    #[test]
    fn mod_axiom_truth_table() {
        let p = p2();
        let a = mod_axiom(p, &[y(1)], &y(2), 0);
        assert!(is_mod_axiom(&a, p));
        for bits in 0..4u32 {
            let alpha: Assignment = [(VarId::Index(1), bits & 1 == 1), (VarId::Index(2), bits & 2 == 2)]
                .into_iter()
                .collect();
            assert!(a.eval(&alpha).unwrap());
        }
        let p3 = Prime::new(3).unwrap();
        let b = mod_axiom(p3, &[y(1), y(2)], &y(3), 2);
        assert!(is_mod_axiom(&b, p3));
        assert!(!is_mod_axiom(&b, p));
    }

    #[test]
    fn php1_fixture_checks() {
        let proof = refute_php1();
        let axioms = php_axioms(1).unwrap();
        assert_eq!(check_proof(&proof, &axioms), Ok(()));
        assert!(proof.height() <= 8, "height {}", proof.height());
        assert!(proof.max_formula_depth() <= 2);
        assert!(proof.is_tree());
    }

    #[test]
    fn nonempty_end_sequent_rejected() {
        let axioms = vec![y(0)];
        let proof = Proof::new(ProofNode::axiom(y(0)), 2, p2());
        let v = check_proof(&proof, &axioms).unwrap_err();
        assert_eq!(v.message, "end-sequent not empty");
        assert_eq!(check_derivation(&proof, &axioms), Ok(()));
    }

    #[test]
    fn minor_index_mutation_rejected() {
        let a = Formula::or(vec![y(0), y(1)]);
        let node = ProofNode::or_right(ProofNode::logical(y(0)), a.clone(), 0);
        let proof = Proof::new(node.clone(), 2, p2());
        assert_eq!(check_derivation(&proof, &[]), Ok(()));
        let mut bad = (*node).clone();
        bad.rule = Rule::OrRight { principal: a, minor: 1 };
        let proof = Proof::new(Arc::new(bad), 2, p2());
        let v = check_derivation(&proof, &[]).unwrap_err();
        assert_eq!(v.rule, "or-right");
        assert!(v.path.is_empty());
    }

    #[test]
    fn mod_formulas_refuted() {
        let p = p2();
        // MOD_{2,1}(x, x) is unsatisfiable
        let f = Formula::modp(p, 1, vec![y(0), y(0)]).unwrap();
        let proof = refute_by_case_split(std::slice::from_ref(&f), p).unwrap();
        assert_eq!(check_proof(&proof, &[f]), Ok(()));
        let g = Formula::modp(p, 1, vec![]).unwrap();
        let proof = refute_by_case_split(std::slice::from_ref(&g), p).unwrap();
        assert_eq!(check_proof(&proof, &[g]), Ok(()));
    }

    #[test]
    fn satisfiable_set_not_refuted() {
        assert!(matches!(
            refute_by_case_split(&[y(0)], p2()),
            Err(RefuteError::Satisfiable(_))
        ));
    }

    #[test]
    fn depth_bound_enforced() {
        let proof = refute_php1();
        let tight = Proof::new(proof.root.clone(), 1, proof.p);
        let v = check_proof(&tight, &php_axioms(1).unwrap()).unwrap_err();
        assert!(v.message.contains("depth"));
    }

    #[test]
    fn file_round_trip() {
        let proof = refute_php1();
        let text = write_proof(&proof);
        let back = parse_proof(&text).unwrap();
        assert_eq!(back.height(), proof.height());
        assert_eq!(back.node_count(), proof.node_count());
        assert_eq!(write_proof(&back), text);
        assert_eq!(check_proof(&back, &php_axioms(1).unwrap()), Ok(()));
    }

    #[test]
    fn parse_errors_located() {
        assert_eq!(parse_proof("LKMODP/2\n").unwrap_err().line, 1);
        let text = "LKMODP/1\np 2\nd 2\nn0 logical : x_{1} => x_{1}\nn1 weaken from n9 : x_{1} => x_{1} x_{2}\n";
        let e = parse_proof(text).unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.message.contains("n9"));
    }
}
