//! The ring W of WKB operators and the module `O^tau`.
//!
//! W operators are represented natively as tau-graded families of
//! polynomial symbols in `(x; u)`; the correspondence with t-free
//! operators over `X x C` is a tested functor (`homogenize` /
//! `dehomogenize`), not the definition.

use crate::linalg::Matrix;
use crate::microdiff::{EOperator, MicrodiffError, OrderWindow};
use crate::scalar::Scalar;
use crate::space::{FiberKind, Var, VarSpace};
use crate::symbol::{LaurentSymbol, SymbolError};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WkbError {
    #[error("spaces differ")]
    SpaceMismatch,
    #[error("a W operator needs a (x; u, tau) space")]
    WrongFiber,
    #[error("component at tau-degree {degree} must be polynomial in (x, u) with no tau")]
    BadComponent { degree: i64 },
    #[error("degree {degree} is below the window floor {floor}: truncated away")]
    BelowFloor { degree: i64, floor: i64 },
    #[error("component at degree {degree} lies outside the window {window}")]
    OutsideWindow { degree: i64, window: String },
    #[error("operator depends on t and is not in the dt-commutant")]
    TDependent,
    #[error("negative xi exponent at degree {degree}: no polynomial W counterpart")]
    NegativeXi { degree: i64 },
    #[error("empty result window")]
    EmptyWindow,
    #[error(transparent)]
    Micro(#[from] MicrodiffError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// A truncated WKB operator `sum_j p_j(x; u) tau^j`.
#[derive(Clone, PartialEq, Eq)]
pub struct WOperator {
    space: VarSpace,
    window: OrderWindow,
    components: BTreeMap<i64, LaurentSymbol>,
}

impl WOperator {
    pub fn new(
        space: &VarSpace,
        window: OrderWindow,
        components: BTreeMap<i64, LaurentSymbol>,
    ) -> Result<Self, WkbError> {
        if space.fiber() != FiberKind::UTau {
            return Err(WkbError::WrongFiber);
        }
        let mut comps = BTreeMap::new();
        for (j, sym) in components {
            if sym.is_zero() {
                continue;
            }
            if sym.space() != space {
                return Err(WkbError::SpaceMismatch);
            }
            if !window.contains(j) {
                return Err(WkbError::OutsideWindow { degree: j, window: window.to_string() });
            }
            if !sym.is_free_of(&[Var::Tau]) || has_negative_u(&sym) {
                return Err(WkbError::BadComponent { degree: j });
            }
            comps.insert(j, sym);
        }
        Ok(WOperator { space: space.clone(), window, components: comps })
    }

    pub fn zero(space: &VarSpace, window: OrderWindow) -> Self {
        WOperator::new(space, window, BTreeMap::new()).unwrap()
    }

    pub fn identity(space: &VarSpace) -> Self {
        Self::scalar(space, Scalar::one())
    }

    pub fn scalar(space: &VarSpace, c: Scalar) -> Self {
        WOperator::new(
            space,
            OrderWindow::exact(0),
            [(0, LaurentSymbol::constant(space, c))].into(),
        )
        .unwrap()
    }

    /// A scalar of the coefficient field k: `sum a_j tau^j`.
    pub fn k_scalar(space: &VarSpace, coeffs: &BTreeMap<i64, Scalar>) -> Result<Self, WkbError> {
        let top = coeffs.keys().max().copied().unwrap_or(0);
        let comps: BTreeMap<i64, LaurentSymbol> = coeffs
            .iter()
            .map(|(j, c)| (*j, LaurentSymbol::constant(space, c.clone())))
            .collect();
        WOperator::new(space, OrderWindow::exact(top), comps)
    }

    /// True when every component is a constant: the operator lies in k.
    pub fn is_k_scalar(&self) -> bool {
        self.components.values().all(|s| s.is_constant().is_some())
    }

    pub fn space(&self) -> &VarSpace {
        &self.space
    }

    pub fn window(&self) -> OrderWindow {
        self.window
    }

    pub fn components(&self) -> impl Iterator<Item = (&i64, &LaurentSymbol)> {
        self.components.iter()
    }

    pub fn component(&self, j: i64) -> Result<LaurentSymbol, WkbError> {
        if let Some(f) = self.window.floor {
            if j < f {
                return Err(WkbError::BelowFloor { degree: j, floor: f });
            }
        }
        Ok(self
            .components
            .get(&j)
            .cloned()
            .unwrap_or_else(|| LaurentSymbol::zero(&self.space)))
    }

    pub fn order(&self) -> Option<i64> {
        self.components.keys().next_back().copied()
    }

    pub fn is_zero_within(&self) -> bool {
        self.components.is_empty()
    }

    pub fn add(&self, other: &Self) -> Result<Self, WkbError> {
        if self.space != other.space {
            return Err(WkbError::SpaceMismatch);
        }
        let window = self.window.sum(&other.window);
        let keys: std::collections::BTreeSet<i64> =
            self.components.keys().chain(other.components.keys()).copied().collect();
        let mut comps = BTreeMap::new();
        for j in keys {
            if !window.contains(j) {
                continue;
            }
            let a = self.components.get(&j).cloned().unwrap_or_else(|| LaurentSymbol::zero(&self.space));
            let b = other.components.get(&j).cloned().unwrap_or_else(|| LaurentSymbol::zero(&self.space));
            let s = a.add(&b)?;
            if !s.is_zero() {
                comps.insert(j, s);
            }
        }
        WOperator::new(&self.space, window, comps)
    }

    pub fn neg(&self) -> Self {
        WOperator {
            space: self.space.clone(),
            window: self.window,
            components: self.components.iter().map(|(j, s)| (*j, s.neg())).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, WkbError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        let mut components = BTreeMap::new();
        if !c.is_zero() {
            for (j, s) in &self.components {
                components.insert(*j, s.scale(c));
            }
        }
        WOperator { space: self.space.clone(), window: self.window, components }
    }

    /// Composition `r_k = sum_{k=i+j-|a|} (1/a!) (d_u^a p_i)(d_x^a q_j)`,
    /// the image of the Leibniz rule under the projection identifying
    /// `xi = u tau`.
    pub fn compose(&self, other: &Self) -> Result<Self, WkbError> {
        if self.space != other.space {
            return Err(WkbError::SpaceMismatch);
        }
        let window = self.window.compose(&other.window);
        let pairs = self.space.symplectic_pairs(); // (x_i, u_i)
        let mut acc: BTreeMap<i64, LaurentSymbol> = BTreeMap::new();
        for (&i, p) in &self.components {
            for (&j, q) in &other.components {
                let bounds: Vec<i64> = pairs.iter().map(|&(b, _)| max_exp(q, b)).collect();
                let mut alpha = vec![0i64; bounds.len()];
                loop {
                    let total: i64 = alpha.iter().sum();
                    let k = i + j - total;
                    if window.contains(k) {
                        let mut dp = p.clone();
                        let mut dq = q.clone();
                        let mut vanished = false;
                        for (d, &(b, f)) in pairs.iter().enumerate() {
                            dp = dp.derive_n(f, alpha[d] as u32)?;
                            dq = dq.derive_n(b, alpha[d] as u32)?;
                            if dp.is_zero() || dq.is_zero() {
                                vanished = true;
                                break;
                            }
                        }
                        if !vanished {
                            let term = dp.mul(&dq)?.scale(&inv_factorial(&alpha));
                            if !term.is_zero() {
                                let entry =
                                    acc.entry(k).or_insert_with(|| LaurentSymbol::zero(&self.space));
                                *entry = entry.add(&term)?;
                            }
                        }
                    }
                    // odometer
                    let mut d = 0;
                    loop {
                        if d == bounds.len() {
                            break;
                        }
                        if alpha[d] < bounds[d] {
                            alpha[d] += 1;
                            break;
                        }
                        alpha[d] = 0;
                        d += 1;
                    }
                    if d == bounds.len() {
                        break;
                    }
                }
            }
        }
        acc.retain(|_, s| !s.is_zero());
        WOperator::new(&self.space, window, acc)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self, WkbError> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// Inverse through the homogenization functor.
    pub fn invert(&self, target_floor: Option<i64>) -> Result<Self, WkbError> {
        let e = homogenize(self)?;
        let inv = e.invert(target_floor)?;
        dehomogenize(&inv)
    }

    /// Act on a section of `O^tau`: compose with the u-free operator the
    /// section defines and set `u = 0`.
    pub fn act(&self, s: &OTauSection) -> Result<OTauSection, WkbError> {
        let s_op = s.as_operator()?;
        let composed = self.compose(&s_op)?;
        let mut comps = BTreeMap::new();
        for (&j, sym) in &composed.components {
            let mut r = sym.clone();
            for k in 1..=self.space.n_base() {
                r = r.substitute_zero(Var::U(k))?;
            }
            if !r.is_zero() {
                comps.insert(j, r);
            }
        }
        Ok(OTauSection { space: self.space.clone(), window: composed.window, comps })
    }
}

fn has_negative_u(s: &LaurentSymbol) -> bool {
    let space = s.space().clone();
    let vars = space.vars();
    s.terms().any(|(e, _)| {
        e.iter()
            .enumerate()
            .any(|(i, &k)| matches!(vars[i], Var::U(_)) && k < 0)
    })
}

fn max_exp(s: &LaurentSymbol, v: Var) -> i64 {
    let Some(idx) = s.space().index_of(v) else { return 0 };
    s.terms().map(|(e, _)| e[idx]).max().unwrap_or(0).max(0)
}

fn inv_factorial(alpha: &[i64]) -> Scalar {
    let mut f = BigInt::one();
    for &a in alpha {
        for k in 2..=a {
            f *= k;
        }
    }
    Scalar::new(BigRational::new(BigInt::one(), f), BigRational::from_integer(BigInt::from(0)))
}

impl fmt::Display for WOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0 on {}", self.window);
        }
        let parts: Vec<String> = self
            .components
            .iter()
            .rev()
            .map(|(j, s)| format!("({})*tau^{}", s, j))
            .collect();
        write!(f, "{} on {}", parts.join(" + "), self.window)
    }
}

impl fmt::Debug for WOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// The E-side space matching a W space: same base, with `t`.
pub fn e_space_for(space: &VarSpace) -> VarSpace {
    let mut s = VarSpace::e_space_with_t(space.n_base());
    s = s.with_units(space.units());
    s
}

/// The W-side space matching an E space over `X x C`.
pub fn w_space_for(space: &VarSpace) -> VarSpace {
    let mut s = VarSpace::w_space(space.n_base());
    s = s.with_units(space.units());
    s
}

/// Push a t-free operator through `(x, t; xi, tau) -> (x; xi/tau)`:
/// each homogeneous `p_j(x; xi, tau)` becomes `p_j(x; u, 1) tau^j`.
pub fn dehomogenize(p: &EOperator) -> Result<WOperator, WkbError> {
    let space = p.space();
    if !space.has_t() {
        return Err(WkbError::Micro(MicrodiffError::NoT));
    }
    if !p.commutes_with_dt()? {
        return Err(WkbError::TDependent);
    }
    let target = w_space_for(space);
    let src_vars = space.vars();
    let mut comps: BTreeMap<i64, LaurentSymbol> = BTreeMap::new();
    for (&j, sym) in p.components() {
        let mut terms = Vec::new();
        for (e, c) in sym.terms() {
            let mut exps: Vec<(Var, i64)> = Vec::new();
            for (idx, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                match src_vars[idx] {
                    Var::X(d) => exps.push((Var::X(d), k)),
                    Var::Xi(d) => {
                        if k < 0 {
                            return Err(WkbError::NegativeXi { degree: j });
                        }
                        exps.push((Var::U(d), k));
                    }
                    Var::Tau => {} // absorbed into the grading
                    Var::T => unreachable!("t-free checked above"),
                    Var::U(_) => unreachable!("xi-type space"),
                }
            }
            terms.push((exps, c.clone()));
        }
        let mut out = LaurentSymbol::zero(&target);
        for (exps, c) in terms {
            out = out.add(&LaurentSymbol::monomial(&target, &exps, c)?)?;
        }
        if !out.is_zero() {
            comps.insert(j, out);
        }
    }
    WOperator::new(&target, p.window(), comps)
}

/// Inverse direction: `u^b` at tau-degree `j` becomes `xi^b tau^{j-|b|}`.
pub fn homogenize(p: &WOperator) -> Result<EOperator, WkbError> {
    let target = e_space_for(&p.space);
    let src_vars = p.space.vars();
    let mut comps: BTreeMap<i64, LaurentSymbol> = BTreeMap::new();
    for (&j, sym) in &p.components {
        let mut out = LaurentSymbol::zero(&target);
        for (e, c) in sym.terms() {
            let mut exps: Vec<(Var, i64)> = Vec::new();
            let mut u_total = 0i64;
            for (idx, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                match src_vars[idx] {
                    Var::X(d) => exps.push((Var::X(d), k)),
                    Var::U(d) => {
                        exps.push((Var::Xi(d), k));
                        u_total += k;
                    }
                    Var::Tau => unreachable!("components are tau-free"),
                    _ => unreachable!(),
                }
            }
            exps.push((Var::Tau, j - u_total));
            out = out.add(&LaurentSymbol::monomial(&target, &exps, c.clone())?)?;
        }
        if !out.is_zero() {
            comps.insert(j, out);
        }
    }
    Ok(EOperator::new(&target, p.window, comps, false)?)
}

/// A section of `O^tau`: `sum_j f_j(x) tau^j` inside a window.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OTauSection {
    space: VarSpace,
    window: OrderWindow,
    comps: BTreeMap<i64, LaurentSymbol>,
}

impl OTauSection {
    pub fn new(
        space: &VarSpace,
        window: OrderWindow,
        comps: BTreeMap<i64, LaurentSymbol>,
    ) -> Result<Self, WkbError> {
        if space.fiber() != FiberKind::UTau {
            return Err(WkbError::WrongFiber);
        }
        let mut clean = BTreeMap::new();
        let non_x: Vec<Var> = space.vars().into_iter().filter(|v| !matches!(v, Var::X(_))).collect();
        for (j, f) in comps {
            if f.is_zero() {
                continue;
            }
            if f.space() != space {
                return Err(WkbError::SpaceMismatch);
            }
            if !window.contains(j) {
                return Err(WkbError::OutsideWindow { degree: j, window: window.to_string() });
            }
            if !f.is_free_of(&non_x) {
                return Err(WkbError::BadComponent { degree: j });
            }
            clean.insert(j, f);
        }
        Ok(OTauSection { space: space.clone(), window, comps: clean })
    }

    pub fn generator(space: &VarSpace) -> Self {
        OTauSection::new(
            space,
            OrderWindow::exact(0),
            [(0, LaurentSymbol::one(space))].into(),
        )
        .unwrap()
    }

    pub fn space(&self) -> &VarSpace {
        &self.space
    }

    pub fn window(&self) -> OrderWindow {
        self.window
    }

    pub fn components(&self) -> impl Iterator<Item = (&i64, &LaurentSymbol)> {
        self.comps.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    /// The u-free operator `sum f_j tau^j` the section defines.
    pub fn as_operator(&self) -> Result<WOperator, WkbError> {
        WOperator::new(&self.space, self.window, self.comps.clone())
    }

    pub fn eq_within(&self, other: &Self) -> Result<bool, WkbError> {
        Ok(self.as_operator()?.sub(&other.as_operator()?)?.is_zero_within())
    }

    /// `Some(c)` with `self = c * other` on the common window.
    pub fn proportionality(&self, other: &Self) -> Option<Scalar> {
        let (j0, first) = other.comps.iter().find(|(_, s)| !s.is_zero())?;
        let mine = self.comps.get(j0)?;
        let ratio = mine.proportionality(first)?;
        let scaled = OTauSection {
            space: other.space.clone(),
            window: other.window,
            comps: other.comps.iter().map(|(j, s)| (*j, s.scale(&ratio))).collect(),
        };
        match self.eq_within(&scaled) {
            Ok(true) => Some(ratio),
            _ => None,
        }
    }
}

/// Direct action of one operator term on a section, bypassing the
/// composition route: `x^a u^b tau^j` sends `f tau^l` to
/// `x^a (d_x^b f) tau^{l+j-|b|}`. The independent oracle for `act`.
pub fn direct_action(p: &WOperator, s: &OTauSection) -> Result<OTauSection, WkbError> {
    let space = p.space.clone();
    let vars = space.vars();
    let window = p.window.compose(&s.window);
    let mut comps: BTreeMap<i64, LaurentSymbol> = BTreeMap::new();
    for (&j, sym) in &p.components {
        for (e, c) in sym.terms() {
            for (&l, f) in &s.comps {
                let mut g = f.clone();
                let mut mono: Vec<(Var, i64)> = Vec::new();
                let mut b_total = 0i64;
                for (idx, &k) in e.iter().enumerate() {
                    if k == 0 {
                        continue;
                    }
                    match vars[idx] {
                        Var::X(d) => mono.push((Var::X(d), k)),
                        Var::U(d) => {
                            g = g.derive_n(Var::X(d), k as u32)?;
                            b_total += k;
                        }
                        _ => unreachable!(),
                    }
                }
                if g.is_zero() {
                    continue;
                }
                let target = l + j - b_total;
                if !window.contains(target) {
                    continue;
                }
                let term = LaurentSymbol::monomial(&space, &mono, c.clone())?.mul(&g)?;
                let entry = comps
                    .entry(target)
                    .or_insert_with(|| LaurentSymbol::zero(&space));
                *entry = entry.add(&term)?;
            }
        }
    }
    comps.retain(|_, v| !v.is_zero());
    Ok(OTauSection { space, window, comps })
}

/// Basis of `{ s : (u_i tau) s = 0 for all i }` inside the truncated
/// space of sections with the given window and total x-degree bound,
/// computed by exact linear algebra over the monomial basis.
pub fn koszul_hom_basis(
    n: u32,
    window: OrderWindow,
    max_x_degree: u32,
    units: &[u32],
) -> Result<Vec<OTauSection>, WkbError> {
    let space = VarSpace::w_space(n).with_units(units);
    let floor = window.floor.unwrap_or(window.top);
    // basis: (x-monomial, tau-degree)
    let mut basis: Vec<(Vec<i64>, i64)> = Vec::new();
    let mut mono = vec![0i64; n as usize];
    loop {
        let total: i64 = mono.iter().sum();
        if total <= max_x_degree as i64 {
            for j in floor..=window.top {
                basis.push((mono.clone(), j));
            }
        }
        let mut d = 0;
        loop {
            if d == n as usize {
                break;
            }
            if mono[d] < max_x_degree as i64 {
                mono[d] += 1;
                break;
            }
            mono[d] = 0;
            d += 1;
        }
        if d == n as usize {
            break;
        }
    }
    basis.sort();
    let index_of = |m: &[i64], j: i64| basis.iter().position(|(bm, bj)| bm == m && *bj == j);
    // one row block per constraint d/dx_i applied to the basis
    let mut mat = Matrix::zeros(basis.len() * n as usize, basis.len());
    for (col, (m, j)) in basis.iter().enumerate() {
        for i in 0..n as usize {
            if m[i] == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm[i] -= 1;
            if let Some(ri) = index_of(&dm, *j) {
                let row = i * basis.len() + ri;
                mat.set(row, col, Scalar::from_int(m[i]));
            }
        }
    }
    let kernel = mat.kernel_basis();
    let mut out = Vec::new();
    for v in kernel {
        let mut comps: BTreeMap<i64, LaurentSymbol> = BTreeMap::new();
        for (col, c) in v.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let (m, j) = &basis[col];
            let exps: Vec<(Var, i64)> = m
                .iter()
                .enumerate()
                .filter(|(_, &k)| k != 0)
                .map(|(d, &k)| (Var::X(d as u32 + 1), k))
                .collect();
            let term = LaurentSymbol::monomial(&space, &exps, c.clone())?;
            let entry = comps
                .entry(*j)
                .or_insert_with(|| LaurentSymbol::zero(&space));
            *entry = entry.add(&term)?;
        }
        out.push(OTauSection::new(&space, window, comps)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wsp() -> VarSpace {
        VarSpace::w_space(1)
    }

    fn sym(text: &str, space: &VarSpace) -> LaurentSymbol {
        crate::expr::parse_symbol(text, space).unwrap()
    }

    fn wop(space: &VarSpace, parts: &[(i64, &str)]) -> WOperator {
        let comps: BTreeMap<i64, LaurentSymbol> =
            parts.iter().map(|&(j, t)| (j, sym(t, space))).collect();
        let top = comps.keys().max().copied().unwrap_or(0);
        WOperator::new(space, OrderWindow::exact(top), comps).unwrap()
    }

    #[test]
    fn wcompose_examples() {
        let s = wsp();
        // (u1 tau) x1 = x1 u1 tau + 1
        let p = wop(&s, &[(1, "u1")]);
        let q = wop(&s, &[(0, "x1")]);
        let r = p.compose(&q).unwrap();
        assert_eq!(r.component(1).unwrap(), sym("x1*u1", &s));
        assert_eq!(r.component(0).unwrap(), sym("1", &s));
        // unit
        let any = wop(&s, &[(2, "x1*u1^2"), (0, "x1")]);
        assert!(any.compose(&WOperator::identity(&s)).unwrap().sub(&any).unwrap().is_zero_within());
        // tau is central
        let tau = wop(&s, &[(1, "1")]);
        assert!(tau.commutator(&any).unwrap().is_zero_within());
    }

    #[test]
    fn dehomogenize_examples() {
        let es = VarSpace::e_space_with_t(1);
        let xi = EOperator::new(
            &es,
            OrderWindow::exact(1),
            [(1, sym("xi1", &es))].into(),
            false,
        )
        .unwrap();
        let w = dehomogenize(&xi).unwrap();
        assert_eq!(w.component(1).unwrap(), sym("u1", &wsp()));

        let tau_inv = EOperator::new(
            &es,
            OrderWindow::exact(-1),
            [(-1, sym("tau^-1", &es))].into(),
            false,
        )
        .unwrap();
        let w = dehomogenize(&tau_inv).unwrap();
        assert_eq!(w.component(-1).unwrap(), sym("1", &wsp()));

        let ttau = EOperator::new(
            &es,
            OrderWindow::exact(1),
            [(1, sym("t*tau", &es))].into(),
            false,
        )
        .unwrap();
        assert!(matches!(dehomogenize(&ttau), Err(WkbError::TDependent)));
    }

    #[test]
    fn homogenize_examples() {
        let s = wsp();
        let es = VarSpace::e_space_with_t(1);
        let w = wop(&s, &[(1, "u1")]);
        assert_eq!(homogenize(&w).unwrap().component(1).unwrap(), sym("xi1", &es));
        let c = wop(&s, &[(0, "3/2")]);
        assert_eq!(homogenize(&c).unwrap().component(0).unwrap(), sym("3/2", &es));
        let w = wop(&s, &[(1, "u1^2")]);
        assert_eq!(
            homogenize(&w).unwrap().component(1).unwrap(),
            sym("xi1^2*tau^-1", &es)
        );
    }

    #[test]
    fn act_examples() {
        let s = wsp();
        let dx = wop(&s, &[(1, "u1")]);
        let gen = OTauSection::generator(&s);
        // (u1 tau) . x1^2 = 2 x1
        let sec = OTauSection::new(
            &s,
            OrderWindow::exact(0),
            [(0, sym("x1^2", &s))].into(),
        )
        .unwrap();
        let r = dx.act(&sec).unwrap();
        assert_eq!(r.comps.get(&0).unwrap(), &sym("2*x1", &s));
        // tau^-1 . 1 = tau^-1
        let tau_inv = WOperator::new(
            &s,
            OrderWindow::exact(-1),
            [(-1, sym("1", &s))].into(),
        )
        .unwrap();
        let r = tau_inv.act(&gen).unwrap();
        assert_eq!(r.comps.get(&-1).unwrap(), &sym("1", &s));
        // (x1 u1 tau) . 1 = 0
        let p = wop(&s, &[(1, "x1*u1")]);
        assert!(p.act(&gen).unwrap().is_zero());
    }

    #[test]
    fn koszul_kernel_is_rank_one_over_k() {
        let w = OrderWindow::new(-2, 0).unwrap();
        let basis = koszul_hom_basis(1, w, 3, &[]).unwrap();
        assert_eq!(basis.len(), 3);
        for b in &basis {
            // every kernel element is constant in x
            for (_, f) in b.components() {
                assert!(f.is_constant().is_some());
            }
        }
        let basis2 = koszul_hom_basis(2, w, 2, &[]).unwrap();
        assert_eq!(basis2.len(), 3);
        // x1 is not in the kernel
        let s = wsp();
        let sec = OTauSection::new(&s, OrderWindow::exact(0), [(0, sym("x1", &s))].into()).unwrap();
        let dx = wop(&s, &[(1, "u1")]);
        assert!(!dx.act(&sec).unwrap().is_zero());
    }

    fn arb_poly(space: VarSpace) -> impl Strategy<Value = LaurentSymbol> {
        proptest::collection::vec(((0i64..3), (0i64..3), (-3i64..4)), 0..3).prop_map(move |ts| {
            let mut s = LaurentSymbol::zero(&space);
            for (a, b, c) in ts {
                if c == 0 {
                    continue;
                }
                let m = LaurentSymbol::monomial(
                    &space,
                    &[(Var::X(1), a), (Var::U(1), b)],
                    Scalar::from_int(c),
                )
                .unwrap();
                s = s.add(&m).unwrap();
            }
            s
        })
    }

    fn arb_wop(space: VarSpace) -> impl Strategy<Value = WOperator> {
        ((-2i64..1), (1i64..3)).prop_flat_map(move |(floor, width)| {
            let top = floor + width;
            let space2 = space.clone();
            proptest::collection::vec(((floor..=top), arb_poly(space.clone())), 0..3).prop_map(
                move |parts| {
                    let mut comps: BTreeMap<i64, LaurentSymbol> = BTreeMap::new();
                    for (j, sym) in parts {
                        if sym.is_zero() {
                            continue;
                        }
                        let e = comps
                            .entry(j)
                            .or_insert_with(|| LaurentSymbol::zero(&space2));
                        *e = e.add(&sym).unwrap();
                    }
                    comps.retain(|_, v| !v.is_zero());
                    WOperator::new(&space2, OrderWindow::new(floor, top).unwrap(), comps).unwrap()
                },
            )
        })
    }

    fn arb_section(space: VarSpace) -> impl Strategy<Value = OTauSection> {
        proptest::collection::vec(((-1i64..2), (0i64..3), (-3i64..4)), 0..3).prop_map(move |ts| {
            let mut comps: BTreeMap<i64, LaurentSymbol> = BTreeMap::new();
            for (j, a, c) in ts {
                if c == 0 {
                    continue;
                }
                let m =
                    LaurentSymbol::monomial(&space, &[(Var::X(1), a)], Scalar::from_int(c)).unwrap();
                let e = comps.entry(j).or_insert_with(|| LaurentSymbol::zero(&space));
                *e = e.add(&m).unwrap();
            }
            comps.retain(|_, v| !v.is_zero());
            OTauSection::new(&space, OrderWindow::new(-1, 1).unwrap(), comps).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn round_trips(p in arb_wop(wsp())) {
            let e = homogenize(&p).unwrap();
            let back = dehomogenize(&e).unwrap();
            prop_assert!(back.sub(&p).unwrap().is_zero_within());
            prop_assert_eq!(back.window(), p.window());
        }

        #[test]
        fn rho_functorial(p in arb_wop(wsp()), q in arb_wop(wsp())) {
            let (ep, eq) = (homogenize(&p).unwrap(), homogenize(&q).unwrap());
            let via_e = dehomogenize(&ep.compose(&eq).unwrap()).unwrap();
            let native = p.compose(&q).unwrap();
            prop_assert_eq!(via_e.window(), native.window());
            prop_assert!(via_e.sub(&native).unwrap().is_zero_within());
        }

        #[test]
        fn module_axiom(p in arb_wop(wsp()), q in arb_wop(wsp()), s in arb_section(wsp())) {
            let lhs = p.compose(&q).unwrap().act(&s).unwrap();
            let rhs = p.act(&q.act(&s).unwrap()).unwrap();
            prop_assert!(lhs.eq_within(&rhs).unwrap());
        }

        #[test]
        fn act_matches_direct_action(p in arb_wop(wsp()), s in arb_section(wsp())) {
            let a = p.act(&s).unwrap();
            let d = direct_action(&p, &s).unwrap();
            prop_assert!(a.eq_within(&d).unwrap());
        }

        #[test]
        fn k_scalars_are_central(p in arb_wop(wsp()), a in -3i64..4, j in -1i64..2) {
            let s = wsp();
            let k = WOperator::new(
                &s,
                OrderWindow::exact(j.max(0)),
                if a == 0 { BTreeMap::new() } else {
                    [(j, LaurentSymbol::constant(&s, Scalar::from_int(a)))].into()
                },
            ).unwrap();
            prop_assert!(k.is_k_scalar());
            prop_assert!(k.commutator(&p).unwrap().is_zero_within());
        }
    }
}
