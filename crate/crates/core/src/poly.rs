//! Sparse multilinear polynomials over `F_p`.
//!
//! Everything lives in the quotient ring `F_p[x] / (x² − x)`: a monomial is a
//! sorted, duplicate-free list of variables and `x·x = x` is applied during
//! multiplication. Zero coefficients are never stored.
//!
//! Textual syntax: `c*x_{i,j}*x_{k,l} + … - …`, `0` for the zero polynomial.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::field::{Fp, Prime};
use crate::formula::{php_var, Assignment, VarId};

/// Default limit on the number of monomials a single polynomial may hold.
pub const DEFAULT_MONOMIAL_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("field mismatch: F_{0} vs F_{1}")]
    PrimeMismatch(u32, u32),
    #[error("variable {0} missing from assignment")]
    MissingVar(VarId),
    #[error("polynomial would exceed {cap} monomials")]
    MonomialCap { cap: usize },
    #[error("parse error at `{0}`")]
    Parse(String),
    #[error("explicit zero coefficient on {0}")]
    ZeroCoefficient(Monomial),
}

/// A multilinear monomial `x_a`. The empty monomial is the constant `1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<VarId>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn new(vars: impl IntoIterator<Item = VarId>) -> Self {
        let mut v: Vec<VarId> = vars.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Monomial(v)
    }

    pub fn vars(&self) -> &[VarId] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_constant(&self) -> bool {
        self.0.is_empty()
    }

    /// Product in the multilinear quotient (sorted union).
    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().all(|v| other.0.binary_search(v).is_ok())
    }

    pub fn eval(&self, alpha: &Assignment) -> Result<bool, PolyError> {
        let mut all = true;
        for v in &self.0 {
            all &= *alpha.get(v).ok_or(PolyError::MissingVar(*v))?;
        }
        Ok(all)
    }
}

/// Graded order: by degree, then lexicographically.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    p: Prime,
    terms: BTreeMap<Monomial, Fp>,
}

impl Polynomial {
    pub fn zero(p: Prime) -> Self {
        Polynomial {
            p,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(p: Prime, c: u64) -> Self {
        let c = p.reduce(c);
        let mut out = Self::zero(p);
        if c != 0 {
            out.terms.insert(Monomial::one(), c);
        }
        out
    }

    pub fn one(p: Prime) -> Self {
        Self::constant(p, 1)
    }

    pub fn var(p: Prime, v: VarId) -> Self {
        Self::monomial(p, Monomial(vec![v]))
    }

    pub fn monomial(p: Prime, m: Monomial) -> Self {
        Self::term(p, m, 1)
    }

    pub fn term(p: Prime, m: Monomial, c: Fp) -> Self {
        let mut out = Self::zero(p);
        let c = c % p.get();
        if c != 0 {
            out.terms.insert(m, c);
        }
        out
    }

    /// Build from explicit terms; repeated monomials are summed. Explicit zero
    /// coefficients are rejected.
    pub fn from_terms(
        p: Prime,
        terms: impl IntoIterator<Item = (Monomial, Fp)>,
    ) -> Result<Self, PolyError> {
        let mut out = Self::zero(p);
        for (m, c) in terms {
            if c % p.get() == 0 {
                return Err(PolyError::ZeroCoefficient(m));
            }
            out.add_term(m, c);
        }
        Ok(out)
    }

    fn add_term(&mut self, m: Monomial, c: Fp) {
        let p = self.p;
        let c = c % p.get();
        if c == 0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = p.add(*e.get(), c);
                if s == 0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn prime(&self) -> Prime {
        self.p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Fp)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximal monomial degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// `Some(c)` when the polynomial is a constant (including zero).
    pub fn constant_value(&self) -> Option<Fp> {
        match self.terms.len() {
            0 => Some(0),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.is_constant())
                .map(|(_, &c)| c),
            _ => None,
        }
    }

    /// `Some(x_a)` when the polynomial is a single monomial with coefficient 1.
    pub fn as_monomial(&self) -> Option<&Monomial> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, &c) = self.terms.iter().next()?;
        (c == 1).then_some(m)
    }

    pub fn as_variable(&self) -> Option<VarId> {
        self.as_monomial()
            .filter(|m| m.degree() == 1)
            .map(|m| m.vars()[0])
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.terms
            .keys()
            .flat_map(|m| m.vars().iter().copied())
            .collect()
    }

    fn check_prime(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.p != other.p {
            Err(PolyError::PrimeMismatch(self.p.get(), other.p.get()))
        } else {
            Ok(())
        }
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_prime(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_prime(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), self.p.neg(c));
        }
        Ok(out)
    }

    pub fn scale(&self, c: Fp) -> Polynomial {
        let c = c % self.p.get();
        if c == 0 {
            return Self::zero(self.p);
        }
        Polynomial {
            p: self.p,
            terms: self
                .terms
                .iter()
                .map(|(m, &a)| (m.clone(), self.p.mul(a, c)))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.mul_capped(other, DEFAULT_MONOMIAL_CAP)
    }

    pub fn mul_capped(&self, other: &Polynomial, cap: usize) -> Result<Polynomial, PolyError> {
        self.check_prime(other)?;
        let mut out = Self::zero(self.p);
        for (a, &c) in &self.terms {
            for (b, &d) in &other.terms {
                out.add_term(a.mul(b), self.p.mul(c, d));
            }
            if out.terms.len() > cap {
                return Err(PolyError::MonomialCap { cap });
            }
        }
        Ok(out)
    }

    /// `self^k` with `f^0 = 1`.
    pub fn pow(&self, k: u32) -> Result<Polynomial, PolyError> {
        self.pow_capped(k, DEFAULT_MONOMIAL_CAP)
    }

    pub fn pow_capped(&self, k: u32, cap: usize) -> Result<Polynomial, PolyError> {
        let mut acc = Self::one(self.p);
        for _ in 0..k {
            acc = acc.mul_capped(self, cap)?;
        }
        Ok(acc)
    }

    pub fn eval(&self, alpha: &Assignment) -> Result<Fp, PolyError> {
        let mut acc = 0;
        for (m, &c) in &self.terms {
            if m.eval(alpha)? {
                acc = self.p.add(acc, c);
            }
        }
        Ok(acc)
    }

    /// Parse the textual syntax over the field `F_p`.
    pub fn parse(s: &str, p: Prime) -> Result<Polynomial, PolyError> {
        parse_poly(s, p)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            match (m.is_constant(), c) {
                (true, _) => write!(f, "{c}")?,
                (false, 1) => write!(f, "{m}")?,
                (false, _) => write!(f, "{c}*{m}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[F_{}] {}", self.p, self)
    }
}

impl Serialize for Monomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.checked_add(rhs).expect("polynomials over different fields")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.checked_sub(rhs).expect("polynomials over different fields")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(self.p.get() - 1)
    }
}

fn parse_poly(s: &str, p: Prime) -> Result<Polynomial, PolyError> {
    let err = || PolyError::Parse(s.to_string());
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(err());
    }
    let mut out = Polynomial::zero(p);
    // split into signed terms at top-level +/- (braces never contain signs)
    let mut terms: Vec<(bool, String)> = Vec::new();
    let mut cur = String::new();
    let mut negative = false;
    for ch in compact.chars() {
        if (ch == '+' || ch == '-') && !cur.is_empty() {
            terms.push((negative, std::mem::take(&mut cur)));
            negative = ch == '-';
        } else if (ch == '+' || ch == '-') && cur.is_empty() {
            if !terms.is_empty() || negative {
                return Err(err());
            }
            negative = ch == '-';
        } else {
            cur.push(ch);
        }
    }
    if cur.is_empty() {
        return Err(err());
    }
    terms.push((negative, cur));
    for (neg, t) in terms {
        let mut coef: u64 = 1;
        let mut vars = Vec::new();
        for factor in t.split('*') {
            if factor.is_empty() {
                return Err(err());
            }
            if factor.starts_with('x') {
                vars.push(factor.parse::<VarId>().map_err(|_| err())?);
            } else {
                let c: u64 = factor.parse().map_err(|_| err())?;
                coef = coef * (c % p.get() as u64) % p.get() as u64;
            }
        }
        let mut c = p.reduce(coef);
        if neg {
            c = p.neg(c);
        }
        out.add_term(Monomial::new(vars), c);
    }
    Ok(out)
}

/// A system of polynomial equations `f = 0` over Boolean variables.
#[derive(Debug, Clone)]
pub struct PolySystem {
    pub p: Prime,
    pub polys: Vec<Polynomial>,
    pub degree_bound: usize,
    pub vars: BTreeSet<VarId>,
}

impl PolySystem {
    pub fn new(p: Prime, polys: Vec<Polynomial>, degree_bound: usize) -> Self {
        let vars = polys.iter().flat_map(|f| f.vars()).collect();
        PolySystem {
            p,
            polys,
            degree_bound,
            vars,
        }
    }

    /// Parse one polynomial per line (`#` comments allowed).
    pub fn parse(text: &str, p: Prime, degree_bound: usize) -> Result<Self, PolyError> {
        let polys = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| Polynomial::parse(l, p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(p, polys, degree_bound))
    }

    pub fn contains(&self, f: &Polynomial) -> bool {
        self.polys.iter().any(|g| g == f)
    }
}

/// The negated pigeonhole system: `Q_i = 1 − Σ_j x_{ij}` for every pigeon,
/// then hole products `x_{i1 j}·x_{i2 j}`, then pigeon products
/// `x_{i j1}·x_{i j2}`. The order matches [`crate::formula::php_axioms`]
/// clause for clause.
pub fn php_polynomial_system(n: u32, p: Prime) -> PolySystem {
    assert!(n >= 1, "instance size must be at least 1");
    let x = |i, j| Polynomial::var(p, php_var(i, j));
    let mut polys = Vec::new();
    for i in 1..=n + 1 {
        let mut q = Polynomial::one(p);
        for j in 1..=n {
            q = &q - &x(i, j);
        }
        polys.push(q);
    }
    let prod = |a: VarId, b: VarId| Polynomial::monomial(p, Monomial::new([a, b]));
    for j in 1..=n {
        for i1 in 1..=n + 1 {
            for i2 in i1 + 1..=n + 1 {
                polys.push(prod(php_var(i1, j), php_var(i2, j)));
            }
        }
    }
    for i in 1..=n + 1 {
        for j1 in 1..=n {
            for j2 in j1 + 1..=n {
                polys.push(prod(php_var(i, j1), php_var(i, j2)));
            }
        }
    }
    PolySystem::new(p, polys, 2)
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemCaps {
    pub max_polys: usize,
    pub max_terms: usize,
    /// Largest variable count for the exhaustive unsolvability check.
    pub max_bruteforce_vars: usize,
}

impl Default for SystemCaps {
    fn default() -> Self {
        SystemCaps {
            max_polys: 10_000,
            max_terms: 10_000,
            max_bruteforce_vars: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemViolation {
    #[error("polynomial #{index} has degree {degree} above the bound {bound}")]
    Degree {
        index: usize,
        degree: usize,
        bound: usize,
    },
    #[error("{count} polynomials exceed the cap {cap}")]
    TooManyPolynomials { count: usize, cap: usize },
    #[error("polynomial #{index} has {terms} terms, above the cap {cap}")]
    TooManyTerms {
        index: usize,
        terms: usize,
        cap: usize,
    },
    #[error("{count} variables exceed the brute-force limit {cap}")]
    TooManyVariables { count: usize, cap: usize },
    #[error("system is solvable over {{0,1}}, witness {}", fmt_assignment(.witness))]
    Solvable { witness: Assignment },
}

pub fn fmt_assignment(a: &Assignment) -> String {
    a.iter()
        .map(|(v, b)| format!("{v}={}", *b as u8))
        .collect::<Vec<_>>()
        .join(",")
}

/// Check degree and size caps and exhaustive unsolvability over `{0,1}`.
/// The equations `x² − x = 0` hold identically in the multilinear
/// representation and are therefore not listed.
pub fn validate_system(sys: &PolySystem, caps: &SystemCaps) -> Result<(), SystemViolation> {
    if sys.polys.len() > caps.max_polys {
        return Err(SystemViolation::TooManyPolynomials {
            count: sys.polys.len(),
            cap: caps.max_polys,
        });
    }
    for (index, f) in sys.polys.iter().enumerate() {
        if f.degree() > sys.degree_bound {
            return Err(SystemViolation::Degree {
                index,
                degree: f.degree(),
                bound: sys.degree_bound,
            });
        }
        if f.num_terms() > caps.max_terms {
            return Err(SystemViolation::TooManyTerms {
                index,
                terms: f.num_terms(),
                cap: caps.max_terms,
            });
        }
    }
    let vars: Vec<VarId> = sys.vars.iter().copied().collect();
    if vars.len() > caps.max_bruteforce_vars {
        return Err(SystemViolation::TooManyVariables {
            count: vars.len(),
            cap: caps.max_bruteforce_vars,
        });
    }
    match find_solution(sys, &vars) {
        Some(witness) => Err(SystemViolation::Solvable { witness }),
        None => Ok(()),
    }
}

/// Exhaustive search for a common 0/1 root, with monomials compiled to bit
/// masks over `vars`.
fn find_solution(sys: &PolySystem, vars: &[VarId]) -> Option<Assignment> {
    let index: BTreeMap<VarId, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let compiled: Vec<Vec<(u64, Fp)>> = sys
        .polys
        .iter()
        .map(|f| {
            f.terms()
                .map(|(m, &c)| (m.vars().iter().fold(0u64, |acc, v| acc | 1 << index[v]), c))
                .collect()
        })
        .collect();
    let p = sys.p;
    (0u64..1 << vars.len())
        .find(|&bits| {
            compiled.iter().all(|terms| {
                terms
                    .iter()
                    .filter(|(mask, _)| bits & mask == *mask)
                    .fold(0, |acc, &(_, c)| p.add(acc, c))
                    == 0
            })
        })
        .map(|bits| {
            vars.iter()
                .enumerate()
                .map(|(i, &v)| (v, bits >> i & 1 == 1))
                .collect()
        })
}

/// All `2^m` assignments to `vars`, in binary counting order with the first
/// variable as the least significant bit.
pub fn all_assignments(vars: &[VarId]) -> impl Iterator<Item = Assignment> + '_ {
    assert!(vars.len() < 64);
    (0u64..1 << vars.len()).map(move |bits| {
        vars.iter()
            .enumerate()
            .map(|(i, &v)| (v, bits >> i & 1 == 1))
            .collect()
    })
}
