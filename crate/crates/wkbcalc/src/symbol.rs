//! Laurent-monomial symbols: exact multivariate sums over Q(i).
//!
//! Terms map exponent vectors (aligned with the space's canonical
//! variable order) to scalars. Base-variable exponents stay nonnegative
//! unless the variable is a declared chart unit; fiber variables are
//! Laurent. Zero coefficients are never stored, so equality is exact
//! structural equality.

use crate::scalar::Scalar;
use crate::space::{Var, VarSpace};
use std::collections::BTreeMap;
use std::fmt;

pub type ExpVec = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymbolError {
    #[error("variable {0} does not belong to the space")]
    UnknownVariable(String),
    #[error("negative exponent on non-unit variable {0}")]
    NegativeExponent(String),
    #[error("spaces differ")]
    SpaceMismatch,
    #[error("degree of the zero symbol is undefined")]
    ZeroSymbol,
    #[error("symbol is not invertible in the monomial class: {0}")]
    NotInvertible(String),
    #[error("cannot substitute 0 for {0}: negative exponent present")]
    SubstituteNegative(String),
}

#[derive(Clone, PartialEq, Eq)]
pub struct LaurentSymbol {
    space: VarSpace,
    terms: BTreeMap<ExpVec, Scalar>,
}

/// Result of a homogeneity test in the fiber degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homogeneity {
    Degree(i64),
    Inhomogeneous,
}

impl LaurentSymbol {
    pub fn zero(space: &VarSpace) -> Self {
        LaurentSymbol { space: space.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(space: &VarSpace, c: Scalar) -> Self {
        let mut s = Self::zero(space);
        if !c.is_zero() {
            s.terms.insert(vec![0; space.n_vars()], c);
        }
        s
    }

    pub fn one(space: &VarSpace) -> Self {
        Self::constant(space, Scalar::one())
    }

    pub fn var(space: &VarSpace, v: Var) -> Result<Self, SymbolError> {
        Self::monomial(space, &[(v, 1)], Scalar::one())
    }

    /// A single term from `(variable, exponent)` pairs.
    pub fn monomial(space: &VarSpace, exps: &[(Var, i64)], c: Scalar) -> Result<Self, SymbolError> {
        let mut e = vec![0i64; space.n_vars()];
        for &(v, k) in exps {
            let idx = space
                .index_of(v)
                .ok_or_else(|| SymbolError::UnknownVariable(v.to_string()))?;
            e[idx] += k;
        }
        let mut s = Self::zero(space);
        s.insert_term(e, c)?;
        Ok(s)
    }

    fn insert_term(&mut self, e: ExpVec, c: Scalar) -> Result<(), SymbolError> {
        if c.is_zero() {
            return Ok(());
        }
        for (idx, &k) in e.iter().enumerate() {
            if k < 0 {
                let v = self.space.vars()[idx];
                if !self.space.allows_negative(v) {
                    return Err(SymbolError::NegativeExponent(v.to_string()));
                }
            }
        }
        let entry = self.terms.entry(e).or_insert_with(Scalar::zero);
        *entry += &c;
        if entry.is_zero() {
            // re-borrow to remove
            let key: Vec<ExpVec> = self
                .terms
                .iter()
                .filter(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .collect();
            for k in key {
                self.terms.remove(&k);
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &VarSpace {
        &self.space
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExpVec, &Scalar)> {
        self.terms.iter()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> Option<Scalar> {
        if self.is_zero() {
            return Some(Scalar::zero());
        }
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            if e.iter().all(|&k| k == 0) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn is_one(&self) -> bool {
        self.is_constant().is_some_and(|c| c.is_one())
    }

    /// `Some((exponents, coefficient))` for a single-term symbol.
    pub fn as_monomial(&self) -> Option<(ExpVec, Scalar)> {
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            Some((e.clone(), c.clone()))
        } else {
            None
        }
    }

    fn check_space(&self, other: &Self) -> Result<(), SymbolError> {
        if self.space != other.space {
            return Err(SymbolError::SpaceMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SymbolError> {
        self.check_space(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_term(e.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SymbolError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        LaurentSymbol {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        if c.is_zero() {
            return Self::zero(&self.space);
        }
        LaurentSymbol {
            space: self.space.clone(),
            terms: self.terms.iter().map(|(e, k)| (e.clone(), k * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, SymbolError> {
        self.check_space(other)?;
        let mut out = Self::zero(&self.space);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: ExpVec = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert_term(e, ca * cb)?;
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Result<Self, SymbolError> {
        let mut acc = Self::one(&self.space);
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Inverse of an invertible monomial. Fails on sums, zero, and
    /// monomials whose inverse would need a negative exponent on a
    /// non-unit base variable.
    pub fn monomial_inverse(&self) -> Result<Self, SymbolError> {
        let (e, c) = self
            .as_monomial()
            .ok_or_else(|| SymbolError::NotInvertible(format!("{}", self)))?;
        let inv_c = c.inv().ok_or_else(|| SymbolError::NotInvertible("zero coefficient".into()))?;
        let neg: ExpVec = e.iter().map(|k| -k).collect();
        let mut out = Self::zero(&self.space);
        out.insert_term(neg, inv_c).map_err(|_| {
            SymbolError::NotInvertible(format!("{} has a non-unit base factor", self))
        })?;
        Ok(out)
    }

    /// Exact partial derivative.
    pub fn derive(&self, v: Var) -> Result<Self, SymbolError> {
        let idx = self
            .space
            .index_of(v)
            .ok_or_else(|| SymbolError::UnknownVariable(v.to_string()))?;
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            let k = e[idx];
            if k == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[idx] = k - 1;
            out.insert_term(e2, c * &Scalar::from_int(k))?;
        }
        Ok(out)
    }

    /// Iterated derivative `d^k/dv^k`.
    pub fn derive_n(&self, v: Var, k: u32) -> Result<Self, SymbolError> {
        let mut out = self.clone();
        for _ in 0..k {
            if out.is_zero() {
                break;
            }
            out = out.derive(v)?;
        }
        Ok(out)
    }

    fn fiber_degree_of(&self, e: &ExpVec) -> i64 {
        let vars = self.space.vars();
        e.iter()
            .enumerate()
            .filter(|(i, _)| vars[*i].is_fiber())
            .map(|(_, &k)| k)
            .sum()
    }

    /// Total fiber degree if every term agrees, `Inhomogeneous` otherwise;
    /// the zero symbol has no degree.
    pub fn homogeneous_degree(&self) -> Result<Homogeneity, SymbolError> {
        let mut it = self.terms.keys();
        let first = it.next().ok_or(SymbolError::ZeroSymbol)?;
        let d = self.fiber_degree_of(first);
        for e in it {
            if self.fiber_degree_of(e) != d {
                return Ok(Homogeneity::Inhomogeneous);
            }
        }
        Ok(Homogeneity::Degree(d))
    }

    pub fn is_homogeneous_of(&self, m: i64) -> bool {
        self.is_zero() || self.homogeneous_degree() == Ok(Homogeneity::Degree(m))
    }

    /// The Euler field `sum_v v d/dv` over fiber variables: scales each
    /// term by its fiber degree.
    pub fn euler_apply(&self) -> Self {
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            let d = self.fiber_degree_of(e);
            out.insert_term(e.clone(), c * &Scalar::from_int(d)).unwrap();
        }
        out
    }

    /// Hamiltonian field with the convention
    /// `H_f = sum_i (df/dfiber_i) d/dbase_i - (df/dbase_i) d/dfiber_i`
    /// over the symplectic pairs of the space.
    pub fn hamiltonian(&self) -> Result<VectorField, SymbolError> {
        let mut comps: BTreeMap<Var, LaurentSymbol> = BTreeMap::new();
        for (b, f) in self.space.symplectic_pairs() {
            let df = self.derive(f)?;
            if !df.is_zero() {
                comps.insert(b, df);
            }
            let db = self.derive(b)?.neg();
            if !db.is_zero() {
                comps.insert(f, db);
            }
        }
        Ok(VectorField { space: self.space.clone(), comps })
    }

    /// `{f, g} = H_f(g)`.
    pub fn poisson_bracket(&self, g: &Self) -> Result<Self, SymbolError> {
        self.check_space(g)?;
        self.hamiltonian()?.apply(g)
    }

    /// Substitute 0 for `v`: terms with positive exponent vanish, terms
    /// with exponent 0 survive, a negative exponent is an error.
    pub fn substitute_zero(&self, v: Var) -> Result<Self, SymbolError> {
        let idx = self
            .space
            .index_of(v)
            .ok_or_else(|| SymbolError::UnknownVariable(v.to_string()))?;
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            match e[idx] {
                0 => out.insert_term(e.clone(), c.clone())?,
                k if k > 0 => {}
                _ => return Err(SymbolError::SubstituteNegative(v.to_string())),
            }
        }
        Ok(out)
    }

    /// Substitute an exact scalar for `v` (negative exponents go through
    /// the scalar inverse, so `c` must be nonzero when they occur).
    pub fn substitute_scalar(&self, v: Var, c: &Scalar) -> Result<Self, SymbolError> {
        if c.is_zero() {
            return self.substitute_zero(v);
        }
        let idx = self
            .space
            .index_of(v)
            .ok_or_else(|| SymbolError::UnknownVariable(v.to_string()))?;
        let mut out = Self::zero(&self.space);
        for (e, coeff) in &self.terms {
            let k = e[idx];
            let factor = c.pow(k).expect("nonzero scalar");
            let mut e2 = e.clone();
            e2[idx] = 0;
            out.insert_term(e2, coeff * &factor)?;
        }
        Ok(out)
    }

    /// Drop every term with a nonzero exponent on any of `vars`
    /// (projection onto the sub-ring free of those variables).
    pub fn project_free_of(&self, vars: &[Var]) -> Result<Self, SymbolError> {
        let mut idxs = Vec::new();
        for &v in vars {
            idxs.push(
                self.space
                    .index_of(v)
                    .ok_or_else(|| SymbolError::UnknownVariable(v.to_string()))?,
            );
        }
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            if idxs.iter().all(|&i| e[i] == 0) {
                out.insert_term(e.clone(), c.clone())?;
            }
        }
        Ok(out)
    }

    /// True when no term involves any of `vars`.
    pub fn is_free_of(&self, vars: &[Var]) -> bool {
        let idxs: Vec<usize> = vars.iter().filter_map(|&v| self.space.index_of(v)).collect();
        self.terms.keys().all(|e| idxs.iter().all(|&i| e[i] == 0))
    }

    /// Flip the sign of every fiber variable: multiplies each term by
    /// `(-1)^(fiber degree)`.
    pub fn negate_fiber(&self) -> Self {
        let mut out = Self::zero(&self.space);
        for (e, c) in &self.terms {
            let d = self.fiber_degree_of(e);
            let sign = if d.rem_euclid(2) == 0 { c.clone() } else { -c };
            out.insert_term(e.clone(), sign).unwrap();
        }
        out
    }

    /// `Some(c)` with `self = c * other` exactly, requiring both nonzero.
    pub fn proportionality(&self, other: &Self) -> Option<Scalar> {
        if self.space != other.space || self.is_zero() || other.is_zero() {
            return None;
        }
        let (e0, c0) = other.terms.iter().next().unwrap();
        let mine = self.terms.get(e0)?;
        let ratio = mine * &c0.inv().unwrap();
        if self == &other.scale(&ratio) {
            Some(ratio)
        } else {
            None
        }
    }

    /// The coefficient of the first term in canonical order.
    pub fn leading_coefficient(&self) -> Option<Scalar> {
        self.terms.values().next().cloned()
    }

    /// Rebuild the same terms in another space (variables matched by
    /// name); fails if a variable is missing over there.
    pub fn transplant(&self, target: &VarSpace) -> Result<Self, SymbolError> {
        let src_vars = self.space.vars();
        let mut out = Self::zero(target);
        for (e, c) in &self.terms {
            let mut e2 = vec![0i64; target.n_vars()];
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let idx = target
                    .index_of(src_vars[i])
                    .ok_or_else(|| SymbolError::UnknownVariable(src_vars[i].to_string()))?;
                e2[idx] = k;
            }
            out.insert_term(e2, c.clone())?;
        }
        Ok(out)
    }

    /// Builds a term map directly; used by the operator layers.
    pub fn from_terms(
        space: &VarSpace,
        terms: impl IntoIterator<Item = (ExpVec, Scalar)>,
    ) -> Result<Self, SymbolError> {
        let mut out = Self::zero(space);
        for (e, c) in terms {
            assert_eq!(e.len(), space.n_vars(), "exponent vector length");
            out.insert_term(e, c)?;
        }
        Ok(out)
    }
}

impl fmt::Display for LaurentSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::expr::print_symbol(self))
    }
}

impl fmt::Debug for LaurentSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// A polynomial vector field: one symbol coefficient per coordinate
/// direction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VectorField {
    space: VarSpace,
    comps: BTreeMap<Var, LaurentSymbol>,
}

impl VectorField {
    pub fn new(space: &VarSpace, comps: BTreeMap<Var, LaurentSymbol>) -> Self {
        let comps = comps.into_iter().filter(|(_, s)| !s.is_zero()).collect();
        VectorField { space: space.clone(), comps }
    }

    pub fn zero(space: &VarSpace) -> Self {
        VectorField { space: space.clone(), comps: BTreeMap::new() }
    }

    pub fn space(&self) -> &VarSpace {
        &self.space
    }

    pub fn component(&self, v: Var) -> LaurentSymbol {
        self.comps.get(&v).cloned().unwrap_or_else(|| LaurentSymbol::zero(&self.space))
    }

    pub fn components(&self) -> impl Iterator<Item = (&Var, &LaurentSymbol)> {
        self.comps.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    /// Apply as a derivation: `sum_v comp_v * df/dv`.
    pub fn apply(&self, f: &LaurentSymbol) -> Result<LaurentSymbol, SymbolError> {
        let mut out = LaurentSymbol::zero(&self.space);
        for (&v, coeff) in &self.comps {
            out = out.add(&coeff.mul(&f.derive(v)?)?)?;
        }
        Ok(out)
    }

    /// Divergence with respect to the chart volume form `d(coords)`.
    pub fn divergence(&self) -> Result<LaurentSymbol, SymbolError> {
        let mut out = LaurentSymbol::zero(&self.space);
        for (&v, coeff) in &self.comps {
            out = out.add(&coeff.derive(v)?)?;
        }
        Ok(out)
    }

    /// Lie bracket `[v, w]` of vector fields.
    pub fn bracket(&self, other: &VectorField) -> Result<VectorField, SymbolError> {
        let mut comps = BTreeMap::new();
        let dirs: std::collections::BTreeSet<Var> =
            self.comps.keys().chain(other.comps.keys()).copied().collect();
        for dir in dirs {
            let a = self.apply(&other.component(dir))?;
            let b = other.apply(&self.component(dir))?;
            let c = a.sub(&b)?;
            if !c.is_zero() {
                comps.insert(dir, c);
            }
        }
        Ok(VectorField { space: self.space.clone(), comps })
    }
}

/// A 1-form `sum_v g_v dv` over the chart coordinates.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OneForm {
    space: VarSpace,
    comps: BTreeMap<Var, LaurentSymbol>,
}

impl OneForm {
    pub fn new(space: &VarSpace, comps: BTreeMap<Var, LaurentSymbol>) -> Self {
        let comps = comps.into_iter().filter(|(_, s)| !s.is_zero()).collect();
        OneForm { space: space.clone(), comps }
    }

    pub fn zero(space: &VarSpace) -> Self {
        OneForm { space: space.clone(), comps: BTreeMap::new() }
    }

    pub fn space(&self) -> &VarSpace {
        &self.space
    }

    pub fn component(&self, v: Var) -> LaurentSymbol {
        self.comps.get(&v).cloned().unwrap_or_else(|| LaurentSymbol::zero(&self.space))
    }

    pub fn components(&self) -> impl Iterator<Item = (&Var, &LaurentSymbol)> {
        self.comps.iter()
    }

    pub fn sub(&self, other: &OneForm) -> Result<OneForm, SymbolError> {
        let mut comps = self.comps.clone();
        for (&v, g) in &other.comps {
            let cur = comps.remove(&v).unwrap_or_else(|| LaurentSymbol::zero(&self.space));
            let next = cur.sub(g)?;
            if !next.is_zero() {
                comps.insert(v, next);
            }
        }
        Ok(OneForm { space: self.space.clone(), comps })
    }

    /// `df` of a function.
    pub fn differential_of(f: &LaurentSymbol) -> Result<OneForm, SymbolError> {
        let mut comps = BTreeMap::new();
        for v in f.space().vars() {
            let g = f.derive(v)?;
            if !g.is_zero() {
                comps.insert(v, g);
            }
        }
        Ok(OneForm { space: f.space().clone(), comps })
    }

    /// Exterior derivative `d(sum g_v dv) = sum dg_v ^ dv`.
    pub fn exterior_derivative(&self) -> Result<TwoForm, SymbolError> {
        let mut out = TwoForm::zero(&self.space);
        for (&v, g) in &self.comps {
            for w in self.space.vars() {
                let dgw = g.derive(w)?;
                if dgw.is_zero() || w == v {
                    continue;
                }
                out.add_term(w, v, &dgw)?;
            }
        }
        Ok(out)
    }

    /// Pullback to `{each of vars = 0}`: substitute zero in the
    /// coefficients and drop the `d(var)` components.
    pub fn pullback_to_zero_locus(&self, vars: &[Var]) -> Result<OneForm, SymbolError> {
        let mut comps = BTreeMap::new();
        for (&v, g) in &self.comps {
            if vars.contains(&v) {
                continue;
            }
            let mut r = g.clone();
            for &z in vars {
                r = r.substitute_zero(z)?;
            }
            if !r.is_zero() {
                comps.insert(v, r);
            }
        }
        Ok(OneForm { space: self.space.clone(), comps })
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }
}

/// A 2-form with coefficients on the basis `dv ^ dw`, keys normalized
/// to `v < w` in canonical variable order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TwoForm {
    space: VarSpace,
    comps: BTreeMap<(Var, Var), LaurentSymbol>,
}

impl TwoForm {
    pub fn zero(space: &VarSpace) -> Self {
        TwoForm { space: space.clone(), comps: BTreeMap::new() }
    }

    /// Add `g * dv ^ dw`.
    pub fn add_term(&mut self, v: Var, w: Var, g: &LaurentSymbol) -> Result<(), SymbolError> {
        assert_ne!(v, w);
        let (key, signed) = if v < w { ((v, w), g.clone()) } else { ((w, v), g.neg()) };
        let cur = self.comps.remove(&key).unwrap_or_else(|| LaurentSymbol::zero(&self.space));
        let next = cur.add(&signed)?;
        if !next.is_zero() {
            self.comps.insert(key, next);
        }
        Ok(())
    }

    /// The standard symplectic form `sum du_i ^ dx_i` of a `UTau` space.
    pub fn standard_symplectic(space: &VarSpace) -> Result<TwoForm, SymbolError> {
        let mut out = TwoForm::zero(space);
        for (b, f) in space.symplectic_pairs() {
            out.add_term(f, b, &LaurentSymbol::one(space))?;
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }
}
