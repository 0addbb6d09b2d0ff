//! Alice's subroutines M0–M4.
//!
//! Each protocol either forces Bob into an assertion (a summand, a factor)
//! or stops the session with a rule violation. A failed precondition is a
//! caller bug and surfaces as [`Stop::Contract`].
//!
//! Round bounds, with `T(f)` the number of terms of `f`:
//!
//! * M0 on `u` summands: at most `2⌈log₂ u⌉` questions in `⌈log₂ u⌉` splits.
//! * M1 on `(f, g)`: at most `4(⌈log₂ T(f)⌉ + ⌈log₂ T(g)⌉) + 4(p−1)`.
//! * M2: 2 questions plus one M1.
//! * M3 on `k` factors: `2(k−1)` questions plus one M1.
//! * M4: `p−1` questions plus one M1 (or one M2).
//!
//! A polynomial of degree at most `e` in `n` variables has at most
//! `(n+1)^e` terms, which gives the uniform bound
//! [`protocol_round_bound`] `= C·e·⌈log₂(n+2)⌉ + 4p + 2k` with `C = 8`.

use crate::field::Fp;
use crate::poly::{Polynomial, DEFAULT_MONOMIAL_CAP};

use super::{Session, Stop};

/// Multiplier in the uniform protocol round bound.
pub const PROTOCOL_C: usize = 8;

fn ceil_log2(u: usize) -> usize {
    if u <= 1 {
        0
    } else {
        (usize::BITS - (u - 1).leading_zeros()) as usize
    }
}

pub fn m0_bound(u: usize) -> usize {
    2 * ceil_log2(u)
}

pub fn m1_bound(terms_f: usize, terms_g: usize, p: u32) -> usize {
    4 * (ceil_log2(terms_f) + ceil_log2(terms_g)) + 4 * (p as usize - 1)
}

/// Uniform bound for any of M1–M4 with up to `k` factors.
pub fn protocol_round_bound(e: usize, n: usize, p: u32, k: usize) -> usize {
    PROTOCOL_C * e * ceil_log2(n + 2) + 4 * p as usize + 2 * k
}

fn contract<T>(msg: impl Into<String>) -> Result<T, Stop> {
    Err(Stop::Contract(msg.into()))
}

pub(crate) fn product(s: &Session<'_>, fs: &[Polynomial]) -> Result<Polynomial, Stop> {
    let mut acc = Polynomial::one(s.p());
    for f in fs {
        acc = acc
            .mul_capped(f, DEFAULT_MONOMIAL_CAP)
            .map_err(|e| Stop::Contract(e.to_string()))?;
    }
    if acc.degree() > s.params().e {
        return contract(format!("partial product of degree {} above the cap", acc.degree()));
    }
    Ok(acc)
}

fn sum(s: &Session<'_>, fs: &[Polynomial]) -> Polynomial {
    fs.iter().fold(Polynomial::zero(s.p()), |acc, f| &acc + f)
}

fn answered(s: &Session<'_>, f: &Polynomial, what: &str) -> Result<Fp, Stop> {
    match s.answered(f) {
        Some(v) => Ok(v),
        None => contract(format!("{what} has not been answered")),
    }
}

/// M0: Bob gave `Σ f_i` a nonzero value; find `j` with `B(f_j) ≠ 0`.
pub fn m0(s: &mut Session<'_>, summands: &[Polynomial]) -> Result<usize, Stop> {
    if summands.is_empty() {
        return contract("M0 needs at least one summand");
    }
    if answered(s, &sum(s, summands), "the sum")? == 0 {
        return contract("M0 needs a nonzero sum");
    }
    let (mut lo, mut hi) = (0, summands.len());
    while hi - lo > 1 {
        let mid = lo + (hi - lo).div_ceil(2);
        let left = sum(s, &summands[lo..mid]);
        if s.ask(&left)? != 0 {
            hi = mid;
        } else {
            let right = sum(s, &summands[mid..hi]);
            // B(left) = 0 and B(left + right) ≠ 0, so B(right) = 0 is a
            // linearity violation caught by the referee.
            s.ask(&right)?;
            lo = mid;
        }
    }
    Ok(lo)
}

pub(crate) fn split_terms(f: &Polynomial) -> (Polynomial, Polynomial) {
    let terms: Vec<_> = f.terms().map(|(m, &c)| (m.clone(), c)).collect();
    let half = terms.len().div_ceil(2);
    let part = |ts: &[(crate::poly::Monomial, Fp)]| {
        ts.iter().fold(Polynomial::zero(f.prime()), |acc, (m, c)| {
            &acc + &Polynomial::term(f.prime(), m.clone(), *c)
        })
    };
    (part(&terms[..half]), part(&terms[half..]))
}

/// Ask `h, 2h, …, c·h` so that `B(c·h) = c·B(h)` is enforced step by step.
pub(crate) fn chain(s: &mut Session<'_>, h: &Polynomial, c: Fp) -> Result<(), Stop> {
    for k in 1..=c {
        s.ask(&h.scale(k))?;
    }
    Ok(())
}

/// Narrow `f` to one term while keeping `B(f)·B(g) ≠ B(f·g)`.
fn narrow(s: &mut Session<'_>, mut f: Polynomial, g: &Polynomial) -> Result<Polynomial, Stop> {
    let p = s.p();
    while f.num_terms() > 1 {
        let (f0, f1) = split_terms(&f);
        let bg = answered(s, g, "g")?;
        let mut next = None;
        for part in [f0, f1] {
            let pg = product(s, &[part.clone(), g.clone()])?;
            let bp = s.ask(&part)?;
            let bpg = s.ask(&pg)?;
            if p.mul(bp, bg) != bpg {
                next = Some(part);
                break;
            }
        }
        match next {
            Some(part) => f = part,
            None => return contract("M1 split lost the product mismatch"),
        }
    }
    Ok(f)
}

/// M1: `f`, `g`, `f·g` are answered and `B(f)·B(g) ≠ B(f·g)`; ends in a
/// violation.
pub fn m1(s: &mut Session<'_>, f: &Polynomial, g: &Polynomial) -> Result<(), Stop> {
    let p = s.p();
    let fg = product(s, &[f.clone(), g.clone()])?;
    let (bf, bg, bfg) = (answered(s, f, "f")?, answered(s, g, "g")?, answered(s, &fg, "f·g")?);
    if p.mul(bf, bg) == bfg {
        return contract("M1 needs B(f)·B(g) ≠ B(f·g)");
    }
    if f.is_zero() || g.is_zero() {
        // B(0) = 0 is forced, so a zero factor already broke a rule.
        return contract("M1 with a zero factor");
    }
    let f1 = narrow(s, f.clone(), g)?;
    let (m, c) = f1.terms().next().map(|(m, &c)| (m.clone(), c)).expect("nonzero");
    let xa = Polynomial::monomial(p, m);
    chain(s, &xa, c)?;
    chain(s, &product(s, &[xa.clone(), g.clone()])?, c)?;

    let g1 = narrow(s, g.clone(), &xa)?;
    let (m, c) = g1.terms().next().map(|(m, &c)| (m.clone(), c)).expect("nonzero");
    let xb = Polynomial::monomial(p, m);
    chain(s, &xb, c)?;
    chain(s, &product(s, &[xa, xb])?, c)?;
    contract("M1 finished without a violation")
}

/// M2: `B(Π f_i) ≠ 0` is answered; forces `B(f_j) ≠ 0`.
pub fn m2(s: &mut Session<'_>, factors: &[Polynomial], j: usize) -> Result<(), Stop> {
    let all = product(s, factors)?;
    if answered(s, &all, "the product")? == 0 {
        return contract("M2 needs a nonzero product");
    }
    if s.ask(&factors[j])? != 0 {
        return Ok(());
    }
    let rest: Vec<Polynomial> = factors
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, f)| f.clone())
        .collect();
    let rest = product(s, &rest)?;
    s.ask(&rest)?;
    m1(s, &factors[j], &rest)
}

/// M3: `B(Π f_i) = 0` is answered; finds `j` with `B(f_j) = 0`.
pub fn m3(s: &mut Session<'_>, factors: &[Polynomial]) -> Result<usize, Stop> {
    if factors.is_empty() {
        return contract("M3 needs at least one factor");
    }
    if answered(s, &product(s, factors)?, "the product")? != 0 {
        return contract("M3 needs a zero product");
    }
    let mut k = factors.len();
    while k > 1 {
        let last = &factors[k - 1];
        if s.ask(last)? == 0 {
            return Ok(k - 1);
        }
        let head = product(s, &factors[..k - 1])?;
        if s.ask(&head)? != 0 {
            return m1(s, &head, last).map(|_| 0);
        }
        k -= 1;
    }
    Ok(0)
}

/// M4 (p > 2): `B(f^{p−1}) ∉ {0, 1}` is answered; ends in a violation.
pub fn m4(s: &mut Session<'_>, f: &Polynomial) -> Result<(), Stop> {
    let p = s.p();
    let pm1 = p.get() as usize - 1;
    let top = product(s, &vec![f.clone(); pm1])?;
    if answered(s, &top, "f^(p-1)")? <= 1 {
        return contract("M4 needs B(f^(p-1)) outside {0, 1}");
    }
    let c = s.ask(f)?;
    if c == 0 {
        m2(s, &vec![f.clone(); pm1], 0)?;
        return contract("M2 accepted a zero factor");
    }
    let mut prev = f.clone();
    for _ in 2..=pm1 {
        let bprev = answered(s, &prev, "previous power")?;
        let pk = product(s, &[prev.clone(), f.clone()])?;
        if p.mul(bprev, c) != s.ask(&pk)? {
            return m1(s, &prev, f);
        }
        prev = pk;
    }
    contract("M4 powers were consistent, so c^(p-1) = 1 was answered")
}
