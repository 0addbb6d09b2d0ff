//! Repairing a simple Bob so that rules B1, B3 and B4 hold everywhere.
//!
//! `B′` gives every constant its own value, clamps variables to `{0, 1}`
//! (other values become 0) and gives 0 to every system polynomial. When a
//! system polynomial is a single monomial whose variables all got 1, its
//! largest variable is reset to 0 so the monomial can vanish. `B″` then
//! values every monomial as the product of its variables' values and agrees
//! with `B′` elsewhere.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use crate::field::{Fp, Prime};
use crate::formula::VarId;
use crate::poly::{PolySystem, Polynomial};

use super::SimpleBob;

pub struct NormalizedBob {
    inner: Arc<dyn SimpleBob>,
    p: Prime,
    system: HashSet<Polynomial>,
    /// Variables whose value differs from the clamped raw value.
    overrides: BTreeMap<VarId, Fp>,
}

impl NormalizedBob {
    pub fn new(inner: Arc<dyn SimpleBob>, system: &PolySystem) -> Self {
        let p = system.p;
        let mut bob = NormalizedBob {
            inner,
            p,
            system: system.polys.iter().cloned().collect(),
            overrides: BTreeMap::new(),
        };
        for q in &system.polys {
            let Some(m) = q.as_monomial() else { continue };
            let Some(&last) = m.vars().last() else { continue };
            if m.vars().iter().all(|&x| bob.var_value(x) == 1) {
                bob.overrides.insert(last, 0);
            }
        }
        bob
    }

    pub fn overrides(&self) -> &BTreeMap<VarId, Fp> {
        &self.overrides
    }

    fn var_value(&self, x: VarId) -> Fp {
        if let Some(&v) = self.overrides.get(&x) {
            return v;
        }
        match self.inner.value(&Polynomial::var(self.p, x)) % self.p.get() {
            v @ (0 | 1) => v,
            _ => 0,
        }
    }
}

impl SimpleBob for NormalizedBob {
    fn value(&self, f: &Polynomial) -> Fp {
        if let Some(c) = f.constant_value() {
            return c;
        }
        if self.system.contains(f) {
            return 0;
        }
        if let Some(m) = f.as_monomial() {
            return m.vars().iter().all(|&x| self.var_value(x) == 1) as Fp;
        }
        self.inner.value(f) % self.p.get()
    }
}

/// `B″` for a raw Bob.
pub fn normalize_bob(bob: Arc<dyn SimpleBob>, system: &PolySystem) -> NormalizedBob {
    NormalizedBob::new(bob, system)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Assignment;
    use crate::h_game::{AssignmentBob, RandomBob};
    use crate::poly::{php_polynomial_system, Monomial};

    #[test]
    fn constants_are_repaired() {
        let sys = php_polynomial_system(1, Prime::new(3).unwrap());
        let p = sys.p;
        let one = Polynomial::one(p);
        let raw = (0..100)
            .map(|s| RandomBob { seed: s })
            .find(|b| b.value(&one) == 0)
            .expect("some seed values 1 as 0");
        let n = normalize_bob(Arc::new(raw), &sys);
        assert_eq!(n.value(&one), 1);
    }

    #[test]
    fn monomial_axioms_vanish() {
        let sys = php_polynomial_system(2, Prime::new(2).unwrap());
        let alpha: Assignment = sys.vars.iter().map(|&v| (v, true)).collect();
        let n = normalize_bob(Arc::new(AssignmentBob::new(alpha)), &sys);
        for q in &sys.polys {
            assert_eq!(n.value(q), 0);
            if let Some(m) = q.as_monomial() {
                let prod = m.vars().iter().all(|&x| n.value(&Polynomial::var(sys.p, x)) == 1);
                assert!(!prod, "monomial {m} still all ones");
            }
        }
        let m = Monomial::new(sys.vars.iter().copied());
        assert_eq!(n.value(&Polynomial::monomial(sys.p, m)), 0);
    }
}
