//! Coordinate spaces for symbols and operators.
//!
//! A `VarSpace` fixes the base variables (`x1..xn`, optionally `t`), the
//! fiber variables (`xi1..xin` with optional `tau`, or `u1..un` with `tau`)
//! and which base variables are declared invertible units on the active
//! chart. Two symbols combine only if their spaces are identical.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A coordinate direction. The derived order is the canonical variable
/// order used for exponent vectors and printing.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Var {
    X(u32),
    T,
    Xi(u32),
    Tau,
    U(u32),
}

impl Var {
    pub fn is_fiber(self) -> bool {
        matches!(self, Var::Xi(_) | Var::Tau | Var::U(_))
    }

    pub fn is_base(self) -> bool {
        !self.is_fiber()
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(k) => write!(f, "x{}", k),
            Var::T => write!(f, "t"),
            Var::Xi(k) => write!(f, "xi{}", k),
            Var::Tau => write!(f, "tau"),
            Var::U(k) => write!(f, "u{}", k),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum FiberKind {
    /// Fiber variables `xi1..xin`, with `tau` when `tau: true`.
    Xi { tau: bool },
    /// Fiber variables `u1..un` plus the central parameter `tau`.
    UTau,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct VarSpace {
    n_base: u32,
    has_t: bool,
    fiber: FiberKind,
    /// Indices of x-variables declared invertible on the active chart.
    units: Vec<u32>,
}

impl VarSpace {
    pub fn new(n_base: u32, has_t: bool, fiber: FiberKind, mut units: Vec<u32>) -> Result<Self, SpaceError> {
        if n_base == 0 {
            return Err(SpaceError::Empty);
        }
        if has_t && fiber != (FiberKind::Xi { tau: true }) {
            return Err(SpaceError::TWithoutTau);
        }
        units.sort_unstable();
        units.dedup();
        if let Some(&k) = units.iter().find(|&&k| k == 0 || k > n_base) {
            return Err(SpaceError::BadUnit(k));
        }
        Ok(VarSpace { n_base, has_t, fiber, units })
    }

    /// Cotangent space `(x; xi)`, no `t`.
    pub fn e_space(n_base: u32) -> Self {
        VarSpace::new(n_base, false, FiberKind::Xi { tau: false }, vec![]).unwrap()
    }

    /// Space for operators on `X x C`: `(x, t; xi, tau)`.
    pub fn e_space_with_t(n_base: u32) -> Self {
        VarSpace::new(n_base, true, FiberKind::Xi { tau: true }, vec![]).unwrap()
    }

    /// Symplectic space `(x; u)` with the central parameter `tau`.
    pub fn w_space(n_base: u32) -> Self {
        VarSpace::new(n_base, false, FiberKind::UTau, vec![]).unwrap()
    }

    pub fn with_units(mut self, units: &[u32]) -> Self {
        let mut u = units.to_vec();
        u.sort_unstable();
        u.dedup();
        assert!(u.iter().all(|&k| k >= 1 && k <= self.n_base), "unit index out of range");
        self.units = u;
        self
    }

    pub fn n_base(&self) -> u32 {
        self.n_base
    }

    pub fn has_t(&self) -> bool {
        self.has_t
    }

    pub fn has_tau(&self) -> bool {
        matches!(self.fiber, FiberKind::Xi { tau: true } | FiberKind::UTau)
    }

    pub fn fiber(&self) -> FiberKind {
        self.fiber
    }

    pub fn units(&self) -> &[u32] {
        &self.units
    }

    /// Canonical variable order: `x1..xn, t, xi1..xin, tau, u1..un`
    /// (restricted to the variables present).
    pub fn vars(&self) -> Vec<Var> {
        let mut v = Vec::new();
        for k in 1..=self.n_base {
            v.push(Var::X(k));
        }
        if self.has_t {
            v.push(Var::T);
        }
        match self.fiber {
            FiberKind::Xi { tau } => {
                for k in 1..=self.n_base {
                    v.push(Var::Xi(k));
                }
                if tau {
                    v.push(Var::Tau);
                }
            }
            FiberKind::UTau => {
                v.push(Var::Tau);
                for k in 1..=self.n_base {
                    v.push(Var::U(k));
                }
            }
        }
        v
    }

    pub fn n_vars(&self) -> usize {
        self.vars().len()
    }

    pub fn index_of(&self, var: Var) -> Option<usize> {
        self.vars().iter().position(|&v| v == var)
    }

    pub fn contains(&self, var: Var) -> bool {
        self.index_of(var).is_some()
    }

    /// Whether a variable admits negative exponents: fiber variables
    /// always, x-variables only when declared units.
    pub fn allows_negative(&self, var: Var) -> bool {
        match var {
            Var::Xi(_) | Var::Tau | Var::U(_) => true,
            Var::X(k) => self.units.contains(&k),
            Var::T => false,
        }
    }

    /// Fiber variables in canonical order.
    pub fn fiber_vars(&self) -> Vec<Var> {
        self.vars().into_iter().filter(|v| v.is_fiber()).collect()
    }

    /// Base variables in canonical order.
    pub fn base_vars(&self) -> Vec<Var> {
        self.vars().into_iter().filter(|v| v.is_base()).collect()
    }

    /// Symplectic pairs `(base, fiber)`: `(x_i, xi_i)` or `(x_i, u_i)`,
    /// plus `(t, tau)` when `t` is present. In a `UTau` space `tau` is
    /// central and belongs to no pair.
    pub fn symplectic_pairs(&self) -> Vec<(Var, Var)> {
        let mut pairs = Vec::new();
        match self.fiber {
            FiberKind::Xi { .. } => {
                for k in 1..=self.n_base {
                    pairs.push((Var::X(k), Var::Xi(k)));
                }
                if self.has_t {
                    pairs.push((Var::T, Var::Tau));
                }
            }
            FiberKind::UTau => {
                for k in 1..=self.n_base {
                    pairs.push((Var::X(k), Var::U(k)));
                }
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("a space needs at least one base variable")]
    Empty,
    #[error("t requires a tau fiber variable")]
    TWithoutTau,
    #[error("unit index {0} out of range")]
    BadUnit(u32),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order() {
        let s = VarSpace::e_space_with_t(2);
        assert_eq!(
            s.vars(),
            vec![Var::X(1), Var::X(2), Var::T, Var::Xi(1), Var::Xi(2), Var::Tau]
        );
        let w = VarSpace::w_space(1);
        assert_eq!(w.vars(), vec![Var::X(1), Var::Tau, Var::U(1)]);
    }

    #[test]
    fn negative_exponent_policy() {
        let s = VarSpace::e_space(2).with_units(&[1]);
        assert!(s.allows_negative(Var::Xi(2)));
        assert!(s.allows_negative(Var::X(1)));
        assert!(!s.allows_negative(Var::X(2)));
    }

    #[test]
    fn t_needs_tau() {
        assert!(VarSpace::new(1, true, FiberKind::Xi { tau: false }, vec![]).is_err());
    }
}
