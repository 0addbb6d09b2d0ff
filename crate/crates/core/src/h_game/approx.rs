//! Low-degree approximation of formulas by polynomials.
//!
//! `x̂ = x`, `(¬φ)^ = 1 − φ̂`, `MOD_{p,i}(φ₁…φ_k)^ = 1 − (Σφ̂_j − i)^{p−1}`
//! and for `φ = φ₁ ∨ … ∨ φ_u`
//!
//! ```text
//! φ̂ = 1 − Π_{v≤ℓ} (1 − (Σ_{i∈J_v} φ̂_i)^{p−1})
//! ```
//!
//! with index sets `J_v ⊆ [u]` drawn once per disjunction. The draw is seeded
//! by the formula text, so the sets do not depend on the order in which
//! formulas are approximated. Among `retries + 1` draws the one whose
//! identity `∨b = p_φ(b)` fails for the fewest Bobs of `Ω` is kept, where
//! `b_i` says whether `B(φ̂_i) ≠ 0`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::field::{Fp, Prime};
use crate::formula::{Formula, Node};
use crate::poly::{PolyError, Polynomial};
use crate::seeds::stable_hash;

use super::SimpleBob;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApproxError {
    #[error("approximation of {formula} has degree {degree} above {cap}")]
    Degree { formula: String, degree: usize, cap: usize },
    #[error("MOD_{q} connective over F_{p}")]
    ForeignModulus { q: u32, p: u32 },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxConfig {
    pub ell: usize,
    pub retries: usize,
    pub seed: u64,
    /// Degree cap `e`.
    pub e: usize,
    pub monomial_cap: usize,
}

/// The pieces of a disjunction's approximation.
#[derive(Debug, Clone)]
pub struct OrParts {
    pub jsets: Vec<Vec<usize>>,
    pub children: Vec<Polynomial>,
    /// `S_v = Σ_{i∈J_v} φ̂_i`.
    pub sums: Vec<Polynomial>,
    /// `S_v^{p−1}`.
    pub powers: Vec<Polynomial>,
    /// `h_v = 1 − S_v^{p−1}`.
    pub factors: Vec<Polynomial>,
    /// `G = Π h_v`, so that `φ̂ = 1 − G`.
    pub product: Polynomial,
    /// Indices into `Ω` of the Bobs for which the identity fails.
    pub failures: Vec<usize>,
    pub attempt: usize,
}

/// The pieces of `MOD_{p,i}(…)^ = 1 − g^{p−1}` with `g = Σφ̂_j − i`.
#[derive(Debug, Clone)]
pub struct ModParts {
    pub g: Polynomial,
    pub power: Polynomial,
}

pub struct ApproxContext {
    p: Prime,
    cfg: ApproxConfig,
    omega: Vec<Arc<dyn SimpleBob>>,
    memo: RwLock<HashMap<Formula, Polynomial>>,
    ors: RwLock<HashMap<Formula, Arc<OrParts>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxSnapshot {
    pub seed: u64,
    pub ell: usize,
    pub retries: usize,
    pub disjunctions: BTreeMap<String, SnapshotEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotEntry {
    pub jsets: Vec<Vec<usize>>,
    pub attempt: usize,
    pub failures: usize,
}

/// `p_φ(b) = 1 − Π_v (1 − (Σ_{i∈J_v} b_i)^{p−1})` over `F_p`.
pub fn p_phi(jsets: &[Vec<usize>], b: &[bool], p: Prime) -> Fp {
    let mut prod = 1;
    for j in jsets {
        let s = j.iter().filter(|&&i| b[i]).count() as u64;
        let pw = p.pow(p.reduce(s), p.get() as u64 - 1);
        prod = p.mul(prod, p.sub(1, pw));
    }
    p.sub(1, prod)
}

/// Whether `p_φ(b)` equals `∨b`.
pub fn identity_holds(jsets: &[Vec<usize>], b: &[bool], p: Prime) -> bool {
    p_phi(jsets, b, p) == b.iter().any(|&x| x) as Fp
}

/// `ℓ` subsets of `[u]`, each index kept with probability 1/2.
pub fn draw_jsets(rng: &mut impl Rng, u: usize, ell: usize) -> Vec<Vec<usize>> {
    (0..ell)
        .map(|_| (0..u).filter(|_| rng.gen_bool(0.5)).collect())
        .collect()
}

impl ApproxContext {
    pub fn new(p: Prime, cfg: ApproxConfig, omega: Vec<Arc<dyn SimpleBob>>) -> Self {
        ApproxContext {
            p,
            cfg,
            omega,
            memo: RwLock::new(HashMap::new()),
            ors: RwLock::new(HashMap::new()),
        }
    }

    pub fn p(&self) -> Prime {
        self.p
    }

    pub fn config(&self) -> &ApproxConfig {
        &self.cfg
    }

    pub fn omega(&self) -> &[Arc<dyn SimpleBob>] {
        &self.omega
    }

    /// `φ̂`, computed on first use.
    pub fn hat(&self, phi: &Formula) -> Result<Polynomial, ApproxError> {
        if let Some(h) = self.memo.read().unwrap().get(phi) {
            return Ok(h.clone());
        }
        let p = self.p;
        let h = match phi.node() {
            Node::Var(v) => Polynomial::var(p, *v),
            Node::Not(g) => &Polynomial::one(p) - &self.hat(g)?,
            Node::Mod { .. } => &Polynomial::one(p) - &self.mod_parts(phi)?.power,
            Node::Or(_) => &Polynomial::one(p) - &self.or_parts(phi)?.product,
        };
        if h.degree() > self.cfg.e {
            return Err(ApproxError::Degree {
                formula: phi.to_string(),
                degree: h.degree(),
                cap: self.cfg.e,
            });
        }
        self.memo.write().unwrap().insert(phi.clone(), h.clone());
        Ok(h)
    }

    pub fn mod_parts(&self, phi: &Formula) -> Result<ModParts, ApproxError> {
        let Node::Mod { p: q, residue, args } = phi.node() else {
            panic!("mod_parts on a non-MOD formula");
        };
        if *q != self.p.get() {
            return Err(ApproxError::ForeignModulus {
                q: *q,
                p: self.p.get(),
            });
        }
        let mut g = Polynomial::constant(self.p, (self.p.get() - residue) as u64);
        for a in args {
            g = &g + &self.hat(a)?;
        }
        let power = g.pow_capped(self.p.get() - 1, self.cfg.monomial_cap)?;
        Ok(ModParts { g, power })
    }

    /// The realized pieces for a disjunction, drawing its index sets if new.
    pub fn or_parts(&self, phi: &Formula) -> Result<Arc<OrParts>, ApproxError> {
        if let Some(parts) = self.ors.read().unwrap().get(phi) {
            return Ok(parts.clone());
        }
        let args = phi.as_or().expect("or_parts on a non-disjunction");
        let children = args.iter().map(|a| self.hat(a)).collect::<Result<Vec<_>, _>>()?;
        let bits: Vec<Vec<bool>> = self
            .omega
            .iter()
            .map(|b| children.iter().map(|c| b.value(c) % self.p.get() != 0).collect())
            .collect();
        let text = phi.to_string();
        let mut best: Option<(Vec<usize>, Vec<Vec<usize>>, usize)> = None;
        for attempt in 0..=self.cfg.retries {
            let seed = stable_hash(self.cfg.seed, format!("{text}#{attempt}").as_bytes());
            let jsets = draw_jsets(&mut ChaCha8Rng::seed_from_u64(seed), args.len(), self.cfg.ell);
            let failures: Vec<usize> = (0..bits.len())
                .filter(|&k| !identity_holds(&jsets, &bits[k], self.p))
                .collect();
            if best.as_ref().is_none_or(|(f, _, _)| failures.len() < f.len()) {
                let done = failures.is_empty();
                best = Some((failures, jsets, attempt));
                if done {
                    break;
                }
            }
        }
        let (failures, jsets, attempt) = best.expect("at least one attempt");
        let parts = self.assemble(jsets, children, failures, attempt)?;
        let parts = Arc::new(parts);
        self.ors.write().unwrap().insert(phi.clone(), parts.clone());
        Ok(parts)
    }

    fn assemble(
        &self,
        jsets: Vec<Vec<usize>>,
        children: Vec<Polynomial>,
        failures: Vec<usize>,
        attempt: usize,
    ) -> Result<OrParts, ApproxError> {
        let p = self.p;
        let one = Polynomial::one(p);
        let mut sums = Vec::new();
        let mut powers = Vec::new();
        let mut factors = Vec::new();
        let mut product = one.clone();
        for j in &jsets {
            let s = j.iter().fold(Polynomial::zero(p), |acc, &i| &acc + &children[i]);
            let pw = s.pow_capped(p.get() - 1, self.cfg.monomial_cap)?;
            let h = &one - &pw;
            product = product.mul_capped(&h, self.cfg.monomial_cap)?;
            sums.push(s);
            powers.push(pw);
            factors.push(h);
        }
        Ok(OrParts {
            jsets,
            children,
            sums,
            powers,
            factors,
            product,
            failures,
            attempt,
        })
    }

    /// Bobs of `Ω` for which some realized disjunction identity fails.
    pub fn err_set(&self) -> BTreeSet<usize> {
        self.ors
            .read()
            .unwrap()
            .values()
            .flat_map(|o| o.failures.iter().copied())
            .collect()
    }

    pub fn disjunction_count(&self) -> usize {
        self.ors.read().unwrap().len()
    }

    pub fn snapshot(&self) -> ApproxSnapshot {
        let disjunctions = self
            .ors
            .read()
            .unwrap()
            .iter()
            .map(|(f, o)| {
                (
                    f.to_string(),
                    SnapshotEntry {
                        jsets: o.jsets.clone(),
                        attempt: o.attempt,
                        failures: o.failures.len(),
                    },
                )
            })
            .collect();
        ApproxSnapshot {
            seed: self.cfg.seed,
            ell: self.cfg.ell,
            retries: self.cfg.retries,
            disjunctions,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementEstimate {
    pub u: usize,
    pub ell: usize,
    pub p: u32,
    pub trials: usize,
    /// Fraction of (J-tuple, b) pairs with `p_φ(b) = ∨b`.
    pub rate: f64,
    /// `1 − 2^{−ℓ}`.
    pub floor: f64,
    /// Binomial standard deviation at the floor for `trials` samples.
    pub sigma: f64,
}

/// Monte Carlo agreement of `p_φ` with `∨` over random J-tuples and all
/// `b ∈ {0,1}^u`.
pub fn rs_agreement_rate(u: usize, ell: usize, p: Prime, trials: usize, seed: u64) -> AgreementEstimate {
    assert!(u <= 16, "b is enumerated exhaustively");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<bool>> = (0..1u32 << u)
        .map(|m| (0..u).map(|i| m >> i & 1 == 1).collect())
        .collect();
    let mut agree = 0u64;
    for _ in 0..trials {
        let jsets = draw_jsets(&mut rng, u, ell);
        agree += points.iter().filter(|b| identity_holds(&jsets, b, p)).count() as u64;
    }
    let q = 0.5f64.powi(ell as i32);
    AgreementEstimate {
        u,
        ell,
        p: p.get(),
        trials,
        rate: agree as f64 / (trials as f64 * points.len() as f64),
        floor: 1.0 - q,
        sigma: (q * (1.0 - q) / trials as f64).sqrt(),
    }
}

/// Exact agreement at one point `b` over all `2^{uℓ}` J-tuples, as
/// `(agreeing, total)`.
pub fn rs_agreement_exact_at(u: usize, ell: usize, p: Prime, b: &[bool]) -> (u64, u64) {
    let bits = u * ell;
    assert!(bits <= 24, "too many J-tuples to enumerate");
    let mut agree = 0;
    for code in 0u64..1 << bits {
        let jsets: Vec<Vec<usize>> = (0..ell)
            .map(|v| (0..u).filter(|&i| code >> (v * u + i) & 1 == 1).collect())
            .collect();
        agree += identity_holds(&jsets, b, p) as u64;
    }
    (agree, 1 << bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{Assignment, VarId};
    use crate::h_game::AssignmentBob;

    fn ctx(p: u32, ell: usize) -> ApproxContext {
        let cfg = ApproxConfig {
            ell,
            retries: 0,
            seed: 7,
            e: 64,
            monomial_cap: 1 << 16,
        };
        ApproxContext::new(Prime::new(p).unwrap(), cfg, vec![Arc::new(AssignmentBob::new(Assignment::new()))])
    }

    fn x(i: u32) -> Formula {
        Formula::var(VarId::Index(i))
    }

    #[test]
    fn literals() {
        let c = ctx(3, 2);
        let p = c.p();
        let xp = Polynomial::var(p, VarId::Index(1));
        assert_eq!(c.hat(&x(1)).unwrap(), xp);
        assert_eq!(c.hat(&Formula::not(x(1))).unwrap(), &Polynomial::one(p) - &xp);
    }

    #[test]
    fn single_set_disjunction_at_p2() {
        // with J = {1, 2} the approximation is y1 + y2, wrong only at (1, 1)
        let p = Prime::new(2).unwrap();
        let j = vec![vec![0, 1]];
        assert!(identity_holds(&j, &[false, false], p));
        assert!(identity_holds(&j, &[true, false], p));
        assert!(identity_holds(&j, &[false, true], p));
        assert!(!identity_holds(&j, &[true, true], p));
        assert_eq!(rs_agreement_exact_at(2, 1, p, &[true, true]), (2, 4));
    }

    #[test]
    fn mod_gate() {
        let c = ctx(3, 1);
        let p = c.p();
        let phi = Formula::modp(p, 1, vec![x(1), x(2)]).unwrap();
        let h = c.hat(&phi).unwrap();
        for a in [false, true] {
            for b in [false, true] {
                let alpha: Assignment = [(VarId::Index(1), a), (VarId::Index(2), b)].into_iter().collect();
                assert_eq!(h.eval(&alpha).unwrap(), phi.eval(&alpha).unwrap() as Fp);
            }
        }
    }

    #[test]
    fn draws_do_not_depend_on_order() {
        let a = ctx(2, 3);
        let b = ctx(2, 3);
        let f = Formula::or(vec![x(1), x(2), x(3)]);
        let g = Formula::or(vec![x(4), x(5)]);
        a.hat(&f).unwrap();
        a.hat(&g).unwrap();
        b.hat(&g).unwrap();
        b.hat(&f).unwrap();
        assert_eq!(a.or_parts(&f).unwrap().jsets, b.or_parts(&f).unwrap().jsets);
    }
}
