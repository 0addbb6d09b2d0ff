//! Arithmetic in the prime field `F_p` for small primes.
//!
//! Elements are stored as canonical residues `0..p` in a `u32`; the prime is
//! carried by the containing object (a [`Prime`]) rather than by every element.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A field element, always reduced into `0..p`.
pub type Fp = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("p must be prime, got {0}")]
    NotPrime(u32),
    #[error("prime {0} is too large (limit {limit})", limit = Prime::LIMIT)]
    TooLarge(u32),
}

/// A validated prime modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Prime(u32);

impl Prime {
    /// Moduli are kept small so that products of two residues fit in a `u64`
    /// with plenty of headroom and field tables stay cheap.
    pub const LIMIT: u32 = 1 << 16;

    pub fn new(p: u32) -> Result<Self, FieldError> {
        if p > Self::LIMIT {
            return Err(FieldError::TooLarge(p));
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(Prime(p))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn reduce(self, v: u64) -> Fp {
        (v % self.0 as u64) as Fp
    }

    /// Reduce a signed integer into `0..p`.
    #[inline]
    pub fn reduce_signed(self, v: i64) -> Fp {
        v.rem_euclid(self.0 as i64) as Fp
    }

    #[inline]
    pub fn add(self, a: Fp, b: Fp) -> Fp {
        let s = a + b;
        if s >= self.0 {
            s - self.0
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: Fp, b: Fp) -> Fp {
        if a >= b {
            a - b
        } else {
            a + self.0 - b
        }
    }

    #[inline]
    pub fn neg(self, a: Fp) -> Fp {
        if a == 0 {
            0
        } else {
            self.0 - a
        }
    }

    #[inline]
    pub fn mul(self, a: Fp, b: Fp) -> Fp {
        ((a as u64 * b as u64) % self.0 as u64) as Fp
    }

    pub fn pow(self, mut base: Fp, mut exp: u64) -> Fp {
        let mut acc = 1 % self.0;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(self, a: Fp) -> Option<Fp> {
        if a.is_multiple_of(self.0) {
            None
        } else {
            Some(self.pow(a, (self.0 - 2) as u64))
        }
    }

    /// Iterator over all field elements in increasing order.
    pub fn elements(self) -> impl Iterator<Item = Fp> {
        0..self.0
    }
}

impl TryFrom<u32> for Prime {
    type Error = FieldError;
    fn try_from(p: u32) -> Result<Self, Self::Error> {
        Prime::new(p)
    }
}

impl From<Prime> for u32 {
    fn from(p: Prime) -> u32 {
        p.0
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}
