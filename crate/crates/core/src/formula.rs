//! Formulas over `¬`, unbounded `∨` and the counting connectives `MOD_{p,i}`.
//!
//! Formulas are immutable, reference counted trees with structural equality
//! and hashing. The textual form is an s-expression:
//!
//! ```text
//! formula := var | "(not" formula ")" | "(or" formula* ")" | "(mod" p i formula* ")"
//! var     := "x_{" int "," int "}" | "x_{" int "}"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::field::{FieldError, Prime};
use crate::poly::Polynomial;

/// Variable identifier: a pigeon/hole pair for PHP instances, an opaque index
/// otherwise. The derived order is the order used for canonical monomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    Pair(u32, u32),
    Index(u32),
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarId::Pair(i, j) => write!(f, "x_{{{i},{j}}}"),
            VarId::Index(k) => write!(f, "x_{{{k}}}"),
        }
    }
}

impl FromStr for VarId {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        let inner = s
            .strip_prefix("x_{")
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| ParseError::BadVariable(s.to_string()))?;
        let num = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| ParseError::BadVariable(s.to_string()))
        };
        match inner.split_once(',') {
            Some((a, b)) => Ok(VarId::Pair(num(a)?, num(b)?)),
            None => Ok(VarId::Index(num(inner)?)),
        }
    }
}

impl Serialize for VarId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A 0/1 assignment to variables.
pub type Assignment = BTreeMap<VarId, bool>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("residue {residue} out of range for MOD_{p}")]
    Residue { p: u32, residue: u32 },
    #[error("variable {0} missing from assignment")]
    MissingVar(VarId),
    #[error("instance size must be at least 1")]
    EmptyInstance,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("bad variable `{0}`")]
    BadVariable(String),
    #[error("unexpected end of input")]
    Eof,
    #[error("unexpected token `{0}`")]
    Unexpected(String),
    #[error("unknown connective `{0}`")]
    UnknownConnective(String),
    #[error("bad number `{0}`")]
    BadNumber(String),
    #[error("trailing input `{0}`")]
    Trailing(String),
    #[error("{0}")]
    Formula(#[from] FormulaError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Var(VarId),
    Not(Formula),
    Or(Vec<Formula>),
    Mod {
        p: u32,
        residue: u32,
        args: Vec<Formula>,
    },
}

/// Connective kind, used for alternation counting. Different residues are
/// different connectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Var,
    Not,
    Or,
    Mod(u32, u32),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Formula(Arc<Node>);

impl Formula {
    pub fn var(v: VarId) -> Self {
        Formula(Arc::new(Node::Var(v)))
    }

    pub fn not(f: Formula) -> Self {
        Formula(Arc::new(Node::Not(f)))
    }

    pub fn or(args: Vec<Formula>) -> Self {
        Formula(Arc::new(Node::Or(args)))
    }

    pub fn modp(p: Prime, residue: u32, args: Vec<Formula>) -> Result<Self, FormulaError> {
        if residue >= p.get() {
            return Err(FormulaError::Residue {
                p: p.get(),
                residue,
            });
        }
        Ok(Formula(Arc::new(Node::Mod {
            p: p.get(),
            residue,
            args,
        })))
    }

    /// `A ∧ B ∧ …` desugared as `¬(¬A ∨ ¬B ∨ …)`; a single conjunct is
    /// returned as is.
    pub fn and(mut args: Vec<Formula>) -> Self {
        if args.len() == 1 {
            return args.pop().unwrap();
        }
        Formula::not(Formula::or(args.into_iter().map(Formula::not).collect()))
    }

    /// `A ≡ B` desugared as `(¬A ∨ B) ∧ (¬B ∨ A)`.
    pub fn equiv(a: Formula, b: Formula) -> Self {
        let ab = Formula::or(vec![Formula::not(a.clone()), b.clone()]);
        let ba = Formula::or(vec![Formula::not(b), a]);
        Formula::and(vec![ab, ba])
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn as_var(&self) -> Option<VarId> {
        match self.node() {
            Node::Var(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_not(&self) -> Option<&Formula> {
        match self.node() {
            Node::Not(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_or(&self) -> Option<&[Formula]> {
        match self.node() {
            Node::Or(args) => Some(args),
            _ => None,
        }
    }

    pub fn children(&self) -> &[Formula] {
        match self.node() {
            Node::Var(_) => &[],
            Node::Not(f) => std::slice::from_ref(f),
            Node::Or(args) | Node::Mod { args, .. } => args,
        }
    }

    fn kind(&self) -> Kind {
        match self.node() {
            Node::Var(_) => Kind::Var,
            Node::Not(_) => Kind::Not,
            Node::Or(_) => Kind::Or,
            Node::Mod { p, residue, .. } => Kind::Mod(*p, *residue),
        }
    }

    /// Maximal number of connective alternations along a root-to-leaf path.
    /// Adjacent occurrences of the same connective form one block.
    pub fn depth(&self) -> usize {
        let kind = self.kind();
        if kind == Kind::Var {
            return 0;
        }
        self.children()
            .iter()
            .map(|c| {
                let d = c.depth();
                if c.kind() == kind {
                    d - 1
                } else {
                    d
                }
            })
            .max()
            .unwrap_or(0)
            + 1
    }

    /// Symbol count: one per variable occurrence and per connective
    /// occurrence (a `MOD_{p,i}` with its annotations is one symbol).
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Formula::size).sum::<usize>()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        match self.node() {
            Node::Var(v) => {
                out.insert(*v);
            }
            _ => self.children().iter().for_each(|c| c.collect_vars(out)),
        }
    }

    pub fn eval(&self, alpha: &Assignment) -> Result<bool, FormulaError> {
        Ok(match self.node() {
            Node::Var(v) => *alpha.get(v).ok_or(FormulaError::MissingVar(*v))?,
            Node::Not(f) => !f.eval(alpha)?,
            Node::Or(args) => {
                let mut any = false;
                for a in args {
                    // evaluate all children so missing variables are reported
                    any |= a.eval(alpha)?;
                }
                any
            }
            Node::Mod { p, residue, args } => {
                let mut count = 0u64;
                for a in args {
                    count += a.eval(alpha)? as u64;
                }
                count % *p as u64 == *residue as u64
            }
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Var(v) => write!(f, "{v}"),
            Node::Not(a) => write!(f, "(not {a})"),
            Node::Or(args) => {
                write!(f, "(or")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
            Node::Mod { p, residue, args } => {
                write!(f, "(mod {p} {residue}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for Formula {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, ParseError> {
        let toks = tokenize(s);
        let mut pos = 0;
        let f = parse_formula(&toks, &mut pos)?;
        if pos != toks.len() {
            return Err(ParseError::Trailing(toks[pos..].join(" ")));
        }
        Ok(f)
    }
}

/// Split into `(`, `)` and whitespace-separated atoms.
pub(crate) fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub(crate) fn parse_formula(toks: &[String], pos: &mut usize) -> Result<Formula, ParseError> {
    let tok = toks.get(*pos).ok_or(ParseError::Eof)?;
    *pos += 1;
    if tok != "(" {
        if tok == ")" {
            return Err(ParseError::Unexpected(tok.clone()));
        }
        return Ok(Formula::var(tok.parse()?));
    }
    let head = toks.get(*pos).ok_or(ParseError::Eof)?.clone();
    *pos += 1;
    let number = |pos: &mut usize| -> Result<u32, ParseError> {
        let t = toks.get(*pos).ok_or(ParseError::Eof)?;
        *pos += 1;
        t.parse().map_err(|_| ParseError::BadNumber(t.clone()))
    };
    let (p, residue) = match head.as_str() {
        "mod" => (Some(number(pos)?), number(pos)?),
        "not" | "or" => (None, 0),
        other => return Err(ParseError::UnknownConnective(other.to_string())),
    };
    let mut args = Vec::new();
    loop {
        match toks.get(*pos).map(String::as_str) {
            None => return Err(ParseError::Eof),
            Some(")") => {
                *pos += 1;
                break;
            }
            Some(_) => args.push(parse_formula(toks, pos)?),
        }
    }
    match (head.as_str(), p) {
        ("not", _) => {
            if args.len() != 1 {
                return Err(ParseError::Unexpected(format!(
                    "not takes one argument, got {}",
                    args.len()
                )));
            }
            Ok(Formula::not(args.pop().unwrap()))
        }
        ("or", _) => Ok(Formula::or(args)),
        (_, Some(p)) => {
            let prime = Prime::new(p).map_err(FormulaError::from)?;
            Ok(Formula::modp(prime, residue, args)?)
        }
        _ => unreachable!(),
    }
}

/// Parse a list of formulas, one per line; blank lines and `#` comments are
/// skipped.
pub fn parse_formula_list(text: &str) -> Result<Vec<Formula>, (usize, ParseError)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| l.parse().map_err(|e| (i, e)))
        .collect()
}

pub fn php_var(pigeon: u32, hole: u32) -> VarId {
    VarId::Pair(pigeon, hole)
}

/// The clauses of the negated pigeonhole principle for `n+1` pigeons and `n`
/// holes: pigeon disjunctions, then hole clauses, then pigeon clauses.
pub fn php_axioms(n: u32) -> Result<Vec<Formula>, FormulaError> {
    if n == 0 {
        return Err(FormulaError::EmptyInstance);
    }
    let lit = |i, j| Formula::var(php_var(i, j));
    let neg = |i, j| Formula::not(lit(i, j));
    let mut out = Vec::new();
    for i in 1..=n + 1 {
        out.push(Formula::or((1..=n).map(|j| lit(i, j)).collect()));
    }
    for j in 1..=n {
        for i1 in 1..=n + 1 {
            for i2 in i1 + 1..=n + 1 {
                out.push(Formula::or(vec![neg(i1, j), neg(i2, j)]));
            }
        }
    }
    for i in 1..=n + 1 {
        for j1 in 1..=n {
            for j2 in j1 + 1..=n {
                out.push(Formula::or(vec![neg(i, j1), neg(i, j2)]));
            }
        }
    }
    Ok(out)
}

/// Encode the equation `f = 0` as `MOD_{p,0}(ψ_1, …, ψ_k)` where each monomial
/// `c·x_a` contributes `c` copies of the conjunction of its variables. The
/// constant monomial is represented by the true constant `MOD_{p,0}()`.
pub fn poly_to_formula(f: &Polynomial) -> Formula {
    let p = f.prime();
    let mut args = Vec::new();
    for (mono, &c) in f.terms() {
        let psi = if mono.is_constant() {
            Formula::modp(p, 0, vec![]).expect("residue 0 is valid")
        } else {
            Formula::and(mono.vars().iter().map(|&v| Formula::var(v)).collect())
        };
        for _ in 0..c {
            args.push(psi.clone());
        }
    }
    Formula::modp(p, 0, args).expect("residue 0 is valid")
}
