//! p-ary search trees over polynomial queries, and error descriptors.
//!
//! A tree node asks Bob for `B(g)` and branches on the answer; a leaf names a
//! rule instance that the Bob on that path breaks. Trees come from a
//! deterministic Alice by replaying her against every answer prefix. Full
//! trees grow like `p^r`, so [`LazyTree`] evaluates `T(B)` by playing the
//! game instead; both give the same leaf for every Bob.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::field::{Fp, Prime};
use crate::formula::VarId;
use crate::h_game::{finish, Alice, AnswerSource, GameParamsH, Session, SimpleBob, Stop};
use crate::poly::{Monomial, Polynomial};

/// One summed set inside a `*Err` descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct StarSet {
    pub indices: Vec<usize>,
    pub summands: Vec<Polynomial>,
}

impl StarSet {
    /// `B(Σ g_i) ≠ Σ B(g_i)`.
    pub fn fails_for(&self, bob: &dyn SimpleBob, p: Prime) -> bool {
        let Some(first) = self.summands.first() else {
            return false;
        };
        let mut total = Polynomial::zero(first.prime());
        let mut sum = 0;
        for g in &self.summands {
            total = &total + g;
            sum = p.add(sum, bob.value(g) % p.get());
        }
        bob.value(&total) % p.get() != sum
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind")]
pub enum ErrorDescriptor {
    B1Const { c: Fp },
    B1Var { x: VarId },
    B2 { f: Polynomial, g: Polynomial },
    B3 { a: Monomial, b: Monomial },
    B4 { f: Polynomial },
    B2Star { sets: Vec<StarSet> },
    NoError,
}

impl ErrorDescriptor {
    pub fn kind(&self) -> &'static str {
        match self {
            ErrorDescriptor::B1Const { .. } => "B1Const",
            ErrorDescriptor::B1Var { .. } => "B1Var",
            ErrorDescriptor::B2 { .. } => "B2",
            ErrorDescriptor::B3 { .. } => "B3",
            ErrorDescriptor::B4 { .. } => "B4",
            ErrorDescriptor::B2Star { .. } => "B2Star",
            ErrorDescriptor::NoError => "NoError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrMode {
    Err,
    StarErr,
}

/// Whether `desc` names a rule that `bob` actually breaks. `B4` trusts that
/// the descriptor's polynomial belongs to the system.
pub fn is_error_for(desc: &ErrorDescriptor, bob: &dyn SimpleBob, p: Prime, mode: ErrMode) -> bool {
    let val = |f: &Polynomial| bob.value(f) % p.get();
    match desc {
        ErrorDescriptor::B1Const { c } => val(&Polynomial::constant(p, *c as u64)) != c % p.get(),
        ErrorDescriptor::B1Var { x } => val(&Polynomial::var(p, *x)) > 1,
        ErrorDescriptor::B2 { f, g } => p.add(val(f), val(g)) != val(&(f + g)),
        ErrorDescriptor::B3 { a, b } => {
            let pa = Polynomial::monomial(p, a.clone());
            let pb = Polynomial::monomial(p, b.clone());
            let pab = Polynomial::monomial(p, a.mul(b));
            p.mul(val(&pa), val(&pb)) != val(&pab)
        }
        ErrorDescriptor::B4 { f } => val(f) != 0,
        ErrorDescriptor::B2Star { sets } => {
            mode == ErrMode::StarErr && sets.iter().any(|s| s.fails_for(bob, p))
        }
        ErrorDescriptor::NoError => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum SearchTree {
    Inner {
        label: Polynomial,
        /// Child `k` follows the edge `label = k`.
        children: Vec<SearchTree>,
    },
    Leaf {
        desc: ErrorDescriptor,
    },
}

/// Anything that maps a Bob to a leaf descriptor.
pub trait TreeEval: Send + Sync {
    fn evaluate(&self, bob: &dyn SimpleBob) -> ErrorDescriptor;
}

impl SearchTree {
    pub fn leaf(desc: ErrorDescriptor) -> Self {
        SearchTree::Leaf { desc }
    }

    pub fn node_count(&self) -> usize {
        match self {
            SearchTree::Inner { children, .. } => 1 + children.iter().map(Self::node_count).sum::<usize>(),
            SearchTree::Leaf { .. } => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            SearchTree::Inner { children, .. } => 1 + children.iter().map(Self::depth).max().unwrap_or(0),
            SearchTree::Leaf { .. } => 0,
        }
    }

    pub fn evaluate(&self, bob: &dyn SimpleBob) -> ErrorDescriptor {
        let mut node = self;
        loop {
            match node {
                SearchTree::Inner { label, children } => {
                    let v = bob.value(label) as usize % children.len();
                    node = &children[v];
                }
                SearchTree::Leaf { desc } => return desc.clone(),
            }
        }
    }

    /// Check the degree and depth caps and that no label repeats on a path.
    pub fn audit(&self, e: usize, r: usize) -> Result<(), TreeAuditError> {
        fn walk<'t>(
            t: &'t SearchTree,
            e: usize,
            r: usize,
            path: &mut Vec<&'t Polynomial>,
            seen: &mut HashSet<&'t Polynomial>,
        ) -> Result<(), TreeAuditError> {
            let SearchTree::Inner { label, children } = t else {
                return Ok(());
            };
            if label.degree() > e {
                return Err(TreeAuditError::Degree {
                    label: label.to_string(),
                    degree: label.degree(),
                });
            }
            if path.len() >= r {
                return Err(TreeAuditError::Depth { depth: path.len() + 1 });
            }
            if !seen.insert(label) {
                return Err(TreeAuditError::Repeated {
                    label: label.to_string(),
                });
            }
            path.push(label);
            for c in children {
                walk(c, e, r, path, seen)?;
            }
            path.pop();
            seen.remove(label);
            Ok(())
        }
        walk(self, e, r, &mut Vec::new(), &mut HashSet::new())
    }

    /// All labels on all paths, for inspection.
    pub fn labels(&self) -> Vec<&Polynomial> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            if let SearchTree::Inner { label, children } = t {
                out.push(label);
                stack.extend(children.iter());
            }
        }
        out
    }
}

impl TreeEval for SearchTree {
    fn evaluate(&self, bob: &dyn SimpleBob) -> ErrorDescriptor {
        SearchTree::evaluate(self, bob)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeAuditError {
    #[error("label {label} has degree {degree} above the cap")]
    Degree { label: String, degree: usize },
    #[error("path of depth {depth} exceeds the round budget")]
    Depth { depth: usize },
    #[error("label {label} repeats on a path")]
    Repeated { label: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("tree exceeds {cap} nodes ({built} built, {leaves} leaves, depth {depth} reached)")]
    NodeCap {
        cap: usize,
        built: usize,
        leaves: usize,
        depth: usize,
    },
}

/// Descriptor at the end of one play.
fn leaf_of(result: Result<crate::h_game::AliceEnd, Stop>) -> Result<ErrorDescriptor, Polynomial> {
    match result {
        Ok(end) => Ok(end.star.unwrap_or(ErrorDescriptor::NoError)),
        Err(Stop::Violation(d)) => Ok(d),
        Err(Stop::Branch(g)) => Err(g),
        Err(Stop::Budget | Stop::Forfeit(_) | Stop::Contract(_)) => Ok(ErrorDescriptor::NoError),
    }
}

/// Unroll a deterministic Alice against every answer sequence.
pub fn alice_to_tree(alice: &dyn Alice, params: &GameParamsH, node_cap: usize) -> Result<SearchTree, TreeError> {
    struct Builder<'a> {
        alice: &'a dyn Alice,
        params: &'a GameParamsH,
        cap: usize,
        built: usize,
        leaves: usize,
        depth: usize,
    }

    impl Builder<'_> {
        fn build(&mut self, prefix: &mut Vec<Fp>) -> Result<SearchTree, TreeError> {
            self.built += 1;
            self.depth = self.depth.max(prefix.len());
            if self.built > self.cap {
                return Err(TreeError::NodeCap {
                    cap: self.cap,
                    built: self.built - 1,
                    leaves: self.leaves,
                    depth: self.depth,
                });
            }
            let mut s = Session::new(self.params, AnswerSource::Prefix(prefix));
            match leaf_of(self.alice.play(&mut s)) {
                Ok(desc) => {
                    self.leaves += 1;
                    Ok(SearchTree::leaf(desc))
                }
                Err(label) => {
                    let mut children = Vec::with_capacity(self.params.p.get() as usize);
                    for v in self.params.p.elements() {
                        prefix.push(v);
                        let child = self.build(prefix);
                        prefix.pop();
                        children.push(child?);
                    }
                    Ok(SearchTree::Inner { label, children })
                }
            }
        }
    }

    Builder {
        alice,
        params,
        cap: node_cap,
        built: 0,
        leaves: 0,
        depth: 0,
    }
    .build(&mut Vec::new())
}

/// The tree of an Alice, expanded only along the path a given Bob takes.
#[derive(Clone)]
pub struct LazyTree {
    pub alice: Arc<dyn Alice>,
    pub params: GameParamsH,
}

impl TreeEval for LazyTree {
    fn evaluate(&self, bob: &dyn SimpleBob) -> ErrorDescriptor {
        let mut s = Session::new(&self.params, AnswerSource::Bob(bob));
        let result = self.alice.play(&mut s);
        finish(s, result).outcome
    }
}

/// Either a materialized tree or its lazy form.
pub enum AnyTree {
    Full(SearchTree),
    Lazy(LazyTree),
}

impl TreeEval for AnyTree {
    fn evaluate(&self, bob: &dyn SimpleBob) -> ErrorDescriptor {
        match self {
            AnyTree::Full(t) => t.evaluate(bob),
            AnyTree::Lazy(t) => t.evaluate(bob),
        }
    }
}

/// Materialize under `node_cap`, otherwise stay lazy.
pub fn build_tree(alice: Arc<dyn Alice>, params: &GameParamsH, node_cap: usize) -> (AnyTree, Option<TreeError>) {
    match alice_to_tree(alice.as_ref(), params, node_cap) {
        Ok(t) => (AnyTree::Full(t), None),
        Err(e) => (
            AnyTree::Lazy(LazyTree {
                alice,
                params: params.clone(),
            }),
            Some(e),
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessEstimate {
    pub n: usize,
    pub successes: usize,
    pub estimate: f64,
    /// Half-width of a 95% normal-approximation interval; 0 when Ω was
    /// enumerated exactly.
    pub radius: f64,
    pub exhaustive: bool,
    pub seed: u64,
    pub mode: ErrMode,
}

/// Fraction of Bobs `B ∈ Ω` for which `T(B)` is an error for `B`.
///
/// With `n == Ω.len()` every Bob is evaluated once; otherwise `n` Bobs are
/// drawn uniformly with replacement.
pub fn success_probability(
    tree: &dyn TreeEval,
    omega: &[Arc<dyn SimpleBob>],
    n: usize,
    seed: u64,
    mode: ErrMode,
    p: Prime,
) -> SuccessEstimate {
    assert!(n >= 1 && !omega.is_empty(), "need a nonempty sample");
    let exhaustive = n == omega.len();
    let picks: Vec<usize> = if exhaustive {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0..omega.len())).collect()
    };
    let hit = |i: usize| {
        let bob = omega[i].as_ref();
        is_error_for(&tree.evaluate(bob), bob, p, mode)
    };
    let successes = parallel_count(&picks, hit);
    let estimate = successes as f64 / n as f64;
    let radius = if exhaustive {
        0.0
    } else {
        1.96 * (estimate * (1.0 - estimate) / n as f64).sqrt()
    };
    SuccessEstimate {
        n,
        successes,
        estimate,
        radius,
        exhaustive,
        seed,
        mode,
    }
}

fn parallel_count(items: &[usize], f: impl Fn(usize) -> bool + Sync) -> usize {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                scope.spawn(move || c.iter().filter(|&&i| f(i)).count())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{php_var, Assignment};
    use crate::h_game::{AssignmentBob, ScriptedAlice, TableBob};
    use crate::poly::PolySystem;

    fn p(n: u32) -> Prime {
        Prime::new(n).unwrap()
    }

    fn x(i: u32) -> VarId {
        VarId::Index(i)
    }

    #[test]
    fn constant_leaf_evaluates_everywhere() {
        let q = Polynomial::var(p(2), x(1));
        let t = SearchTree::leaf(ErrorDescriptor::B4 { f: q.clone() });
        let bob = AssignmentBob::new(Assignment::new());
        assert_eq!(t.evaluate(&bob), ErrorDescriptor::B4 { f: q });
    }

    #[test]
    fn one_variable_tree() {
        let p3 = p(3);
        let params = GameParamsH::new(PolySystem::new(p3, vec![], 1), 1, 4);
        let alice = ScriptedAlice(vec![Polynomial::var(p3, x(1))]);
        let t = alice_to_tree(&alice, &params, 100).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.node_count(), 4);
        let SearchTree::Inner { children, .. } = &t else {
            panic!()
        };
        assert_eq!(children[0], SearchTree::leaf(ErrorDescriptor::NoError));
        assert_eq!(children[1], SearchTree::leaf(ErrorDescriptor::NoError));
        assert_eq!(children[2], SearchTree::leaf(ErrorDescriptor::B1Var { x: x(1) }));
        let bob = TableBob::new(Arc::new(AssignmentBob::new(Assignment::new()))).with(Polynomial::var(p3, x(1)), 2);
        assert_eq!(t.evaluate(&bob), ErrorDescriptor::B1Var { x: x(1) });
        t.audit(1, 4).unwrap();
    }

    #[test]
    fn error_semantics_for_assignments() {
        let p2 = p(2);
        let a = Polynomial::var(p2, php_var(1, 1));
        let b = Polynomial::var(p2, php_var(2, 1));
        let mut alpha = Assignment::new();
        alpha.insert(php_var(1, 1), true);
        alpha.insert(php_var(2, 1), false);
        let bob = AssignmentBob::new(alpha);
        let m = ErrMode::Err;
        assert!(!is_error_for(&ErrorDescriptor::B1Const { c: 1 }, &bob, p2, m));
        assert!(!is_error_for(&ErrorDescriptor::B2 { f: a.clone(), g: b.clone() }, &bob, p2, m));
        assert!(is_error_for(&ErrorDescriptor::B4 { f: a.clone() }, &bob, p2, m));
        assert!(!is_error_for(&ErrorDescriptor::B4 { f: b }, &bob, p2, m));
        assert!(!is_error_for(&ErrorDescriptor::NoError, &bob, p2, m));
    }

    #[test]
    fn star_sets_only_count_in_star_mode() {
        let p2 = p(2);
        let a = Polynomial::var(p2, x(1));
        let b = Polynomial::var(p2, x(2));
        let bob = TableBob::new(Arc::new(AssignmentBob::new(Assignment::new()))).with(&a + &b, 1);
        let d = ErrorDescriptor::B2Star {
            sets: vec![StarSet {
                indices: vec![0, 1],
                summands: vec![a, b],
            }],
        };
        assert!(!is_error_for(&d, &bob, p2, ErrMode::Err));
        assert!(is_error_for(&d, &bob, p2, ErrMode::StarErr));
    }

    #[test]
    fn depth_zero_no_error_scores_zero() {
        let p2 = p(2);
        let t = SearchTree::leaf(ErrorDescriptor::NoError);
        let omega: Vec<Arc<dyn SimpleBob>> = vec![Arc::new(AssignmentBob::new(Assignment::new()))];
        let est = success_probability(&t, &omega, 1, 0, ErrMode::Err, p2);
        assert_eq!(est.estimate, 0.0);
        let est = success_probability(&t, &omega, 50, 3, ErrMode::StarErr, p2);
        assert_eq!(est.successes, 0);
    }
}
