//! The truncated Novikov ring `R = Λ[[t_0..t_N]]` over a degree lattice.
//!
//! Monomials are `T^β t^l`. A term survives truncation iff `ω(β) + Σ l ≤ E`.
//! Every operation that drops a term sets the element's `truncated` flag, so
//! callers can tell an exact zero from a cutoff artefact.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::rational::{fmt_q, q, Q};

#[derive(Debug, Error, PartialEq)]
pub enum RingError {
    #[error("elements live in different ring contexts")]
    ContextMismatch,
    #[error("invalid degree lattice: {0}")]
    BadLattice(String),
    #[error("formal variable t{0} does not exist")]
    NoSuchVariable(usize),
    #[error("formal variable degrees must be even, t{0} has degree {1}")]
    OddVariable(usize, i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGenerator {
    pub name: String,
    #[serde(with = "crate::rational::serde_q")]
    pub omega: Q,
    pub mu: i64,
}

/// Free commutative monoid on generators with `ω > 0` and even `μ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeLattice {
    gens: Vec<LatticeGenerator>,
}

/// A lattice element as exponents over the generators.
pub type Beta = Vec<u32>;

impl DegreeLattice {
    pub fn new(gens: Vec<LatticeGenerator>) -> Result<Self, RingError> {
        for g in &gens {
            if g.omega <= Q::zero() {
                return Err(RingError::BadLattice(format!("ω({}) must be positive", g.name)));
            }
            if g.mu.rem_euclid(2) != 0 {
                return Err(RingError::BadLattice(format!("μ({}) must be even", g.name)));
            }
        }
        Ok(DegreeLattice { gens })
    }

    pub fn single(omega: Q, mu: i64) -> Result<Self, RingError> {
        Self::new(vec![LatticeGenerator { name: "b1".into(), omega, mu }])
    }

    pub fn generators(&self) -> &[LatticeGenerator] {
        &self.gens
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    pub fn zero(&self) -> Beta {
        vec![0; self.rank()]
    }

    pub fn omega(&self, b: &[u32]) -> Q {
        let mut s = Q::zero();
        for (g, &e) in self.gens.iter().zip(b) {
            if e > 0 {
                s += &g.omega * q(e as i64);
            }
        }
        s
    }

    pub fn mu(&self, b: &[u32]) -> i64 {
        self.gens.iter().zip(b).map(|(g, &e)| g.mu * e as i64).sum()
    }

    pub fn min_omega(&self) -> Option<Q> {
        self.gens.iter().map(|g| g.omega.clone()).min()
    }

    /// All lattice elements with `ω(β) ≤ e`, in lexicographic order.
    pub fn elements_up_to(&self, e: &Q) -> Vec<Beta> {
        let mut out = Vec::new();
        let mut cur = self.zero();
        self.rec_elements(0, e, &mut cur, &mut out);
        out.sort();
        out
    }

    fn rec_elements(&self, i: usize, e: &Q, cur: &mut Beta, out: &mut Vec<Beta>) {
        if i == self.rank() {
            out.push(cur.clone());
            return;
        }
        loop {
            if &self.omega(cur) > e {
                break;
            }
            self.rec_elements(i + 1, e, cur, out);
            cur[i] += 1;
        }
        cur[i] = 0;
    }

    /// All `(β1, β2)` with `β1 + β2 = β`.
    pub fn splittings(&self, b: &[u32]) -> Vec<(Beta, Beta)> {
        let mut out = vec![(Vec::new(), Vec::new())];
        for &e in b {
            let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
            for (x, y) in &out {
                for a in 0..=e {
                    let mut x2 = x.clone();
                    x2.push(a);
                    let mut y2 = y.clone();
                    y2.push(e - a);
                    next.push((x2, y2));
                }
            }
            out = next;
        }
        out
    }
}

/// Shared ring data: lattice, formal variables and the energy cutoff `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct RingContext {
    pub lattice: DegreeLattice,
    pub var_degrees: Vec<i64>,
    pub cutoff: Q,
}

impl RingContext {
    pub fn new(lattice: DegreeLattice, var_degrees: Vec<i64>, cutoff: Q) -> Result<Arc<Self>, RingError> {
        for (i, &d) in var_degrees.iter().enumerate() {
            if d.rem_euclid(2) != 0 {
                return Err(RingError::OddVariable(i, d));
            }
        }
        Ok(Arc::new(RingContext { lattice, var_degrees, cutoff }))
    }

    pub fn nvars(&self) -> usize {
        self.var_degrees.len()
    }

    pub fn with_cutoff(&self, cutoff: Q) -> Arc<Self> {
        Arc::new(RingContext { cutoff, ..self.clone() })
    }
}

/// `T^β t^l`, stored as the β exponents followed by the t exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(pub SmallVec<[u32; 8]>);

impl Monomial {
    pub fn new(beta: &[u32], t: &[u32]) -> Monomial {
        Monomial(beta.iter().chain(t).copied().collect())
    }
    pub fn beta<'a>(&'a self, ctx: &RingContext) -> &'a [u32] {
        &self.0[..ctx.lattice.rank()]
    }
    pub fn t<'a>(&'a self, ctx: &RingContext) -> &'a [u32] {
        &self.0[ctx.lattice.rank()..]
    }
    fn mul(&self, o: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
    pub fn valuation(&self, ctx: &RingContext) -> Q {
        let tsum: u32 = self.t(ctx).iter().sum();
        ctx.lattice.omega(self.beta(ctx)) + q(tsum as i64)
    }
    pub fn grade(&self, ctx: &RingContext) -> i64 {
        let tg: i64 = self.t(ctx).iter().zip(&ctx.var_degrees).map(|(&l, d)| l as i64 * d).sum();
        ctx.lattice.mu(self.beta(ctx)) + tg
    }
}

#[derive(Clone)]
pub struct RingElement {
    ctx: Arc<RingContext>,
    terms: BTreeMap<Monomial, Q>,
    truncated: bool,
}

impl PartialEq for RingElement {
    fn eq(&self, o: &Self) -> bool {
        self.terms == o.terms && same_ctx(&self.ctx, &o.ctx)
    }
}

fn same_ctx(a: &Arc<RingContext>, b: &Arc<RingContext>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl RingElement {
    pub fn zero(ctx: &Arc<RingContext>) -> Self {
        RingElement { ctx: ctx.clone(), terms: BTreeMap::new(), truncated: false }
    }

    pub fn constant(ctx: &Arc<RingContext>, c: Q) -> Self {
        let n = ctx.lattice.rank() + ctx.nvars();
        Self::monomial(ctx, Monomial(SmallVec::from_elem(0, n)), c)
    }

    pub fn one(ctx: &Arc<RingContext>) -> Self {
        Self::constant(ctx, Q::one())
    }

    pub fn monomial(ctx: &Arc<RingContext>, m: Monomial, c: Q) -> Self {
        let mut r = Self::zero(ctx);
        r.add_term(m, c);
        r
    }

    /// `c T^β`.
    pub fn t_beta(ctx: &Arc<RingContext>, beta: &[u32], c: Q) -> Self {
        Self::monomial(ctx, Monomial::new(beta, &vec![0; ctx.nvars()]), c)
    }

    /// The formal variable `t_a`.
    pub fn var(ctx: &Arc<RingContext>, a: usize) -> Result<Self, RingError> {
        if a >= ctx.nvars() {
            return Err(RingError::NoSuchVariable(a));
        }
        let mut t = vec![0; ctx.nvars()];
        t[a] = 1;
        Ok(Self::monomial(ctx, Monomial::new(&ctx.lattice.zero(), &t), Q::one()))
    }

    pub fn ctx(&self) -> &Arc<RingContext> {
        &self.ctx
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Q> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn clear_truncated(&mut self) {
        self.truncated = false;
    }

    /// Adds `c·m`, respecting the cutoff.
    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        if m.valuation(&self.ctx) > self.ctx.cutoff {
            self.truncated = true;
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check(&self, o: &Self) -> Result<(), RingError> {
        if same_ctx(&self.ctx, &o.ctx) {
            Ok(())
        } else {
            Err(RingError::ContextMismatch)
        }
    }

    pub fn try_add(&self, o: &Self) -> Result<Self, RingError> {
        self.check(o)?;
        let mut r = self.clone();
        r.add_assign_unchecked(o);
        Ok(r)
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self, RingError> {
        self.check(o)?;
        let mut r = Self::zero(&self.ctx);
        r.truncated = self.truncated || o.truncated;
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                r.add_term(m1.mul(m2), c1 * c2);
            }
        }
        Ok(r)
    }

    fn add_assign_unchecked(&mut self, o: &Self) {
        self.truncated |= o.truncated;
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    /// In-place `self += c·o`.
    pub fn add_scaled(&mut self, o: &Self, c: &Q) {
        assert!(self.check(o).is_ok(), "ring context mismatch");
        if c.is_zero() {
            return;
        }
        self.truncated |= o.truncated;
        for (m, x) in &o.terms {
            self.add_term(m.clone(), x * c);
        }
    }

    pub fn scale(&self, c: &Q) -> Self {
        let mut r = Self::zero(&self.ctx);
        r.truncated = self.truncated;
        if !c.is_zero() {
            for (m, x) in &self.terms {
                r.terms.insert(m.clone(), x * c);
            }
        }
        r
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Q::one())
    }

    /// `∂/∂t_a`, exact on the stored terms.
    pub fn tderiv(&self, a: usize) -> Result<Self, RingError> {
        let r0 = self.ctx.lattice.rank();
        if a >= self.ctx.nvars() {
            return Err(RingError::NoSuchVariable(a));
        }
        let mut r = Self::zero(&self.ctx);
        r.truncated = self.truncated;
        for (m, c) in &self.terms {
            let e = m.0[r0 + a];
            if e > 0 {
                let mut m2 = m.clone();
                m2.0[r0 + a] -= 1;
                r.add_term(m2, c * q(e as i64));
            }
        }
        Ok(r)
    }

    /// `ν`; `None` stands for `+∞`.
    pub fn valuation(&self) -> Option<Q> {
        self.terms.keys().map(|m| m.valuation(&self.ctx)).min()
    }

    /// Reduction modulo `𝓘_R = {ν > 0}`.
    pub fn reduce_mod_ideal(&self) -> Self {
        let mut r = Self::zero(&self.ctx);
        for (m, c) in &self.terms {
            if m.valuation(&self.ctx).is_zero() {
                r.terms.insert(m.clone(), c.clone());
            }
        }
        r
    }

    /// Drops every term of valuation `> e`.
    pub fn truncate_to(&self, e: &Q) -> Self {
        let mut r = Self::zero(&self.ctx);
        for (m, c) in &self.terms {
            if &m.valuation(&self.ctx) <= e {
                r.terms.insert(m.clone(), c.clone());
            }
        }
        r
    }

    /// The `T^β`-part (all t-exponents kept).
    pub fn beta_component(&self, beta: &[u32]) -> Self {
        let mut r = Self::zero(&self.ctx);
        for (m, c) in &self.terms {
            if m.beta(&self.ctx) == beta {
                r.terms.insert(m.clone(), c.clone());
            }
        }
        r
    }

    /// Grade if homogeneous; `None` for zero or mixed grades.
    pub fn grade(&self) -> Option<i64> {
        let mut it = self.terms.keys().map(|m| m.grade(&self.ctx));
        let g = it.next()?;
        it.all(|h| h == g).then_some(g)
    }

    pub fn constant_term(&self) -> Q {
        self.terms
            .iter()
            .find(|(m, _)| m.0.iter().all(|&e| e == 0))
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Q::zero)
    }

    /// Substitutes `t_a ↦ v_a` for rational values (used to specialise bulk parameters).
    pub fn evaluate_vars(&self, values: &[Option<Q>]) -> Self {
        let r0 = self.ctx.lattice.rank();
        let mut r = Self::zero(&self.ctx);
        for (m, c) in &self.terms {
            let mut m2 = m.clone();
            let mut c2 = c.clone();
            for (a, v) in values.iter().enumerate() {
                if let Some(v) = v {
                    let e = m2.0[r0 + a];
                    for _ in 0..e {
                        c2 *= v;
                    }
                    m2.0[r0 + a] = 0;
                }
            }
            r.add_term(m2, c2);
        }
        r
    }
}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "{}", fmt_q(c))?;
            let b = m.beta(&self.ctx);
            if b.iter().any(|&e| e > 0) {
                write!(f, "*T^{b:?}")?;
            }
            for (a, &e) in m.t(&self.ctx).iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*t{a}")?,
                    _ => write!(f, "*t{a}^{e}")?,
                }
            }
        }
        if self.truncated {
            f.write_str(" [truncated]")?;
        }
        Ok(())
    }
}

/// One serialized term `c·T^β t^l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub beta: Vec<u32>,
    pub t: Vec<u32>,
    #[serde(with = "crate::rational::serde_q")]
    pub coeff: Q,
}

impl RingElement {
    pub fn to_json_terms(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|(m, c)| TermJson { beta: m.beta(&self.ctx).to_vec(), t: m.t(&self.ctx).to_vec(), coeff: c.clone() })
            .collect()
    }

    pub fn from_json_terms(ctx: &Arc<RingContext>, terms: &[TermJson]) -> Result<Self, RingError> {
        let mut r = Self::zero(ctx);
        for t in terms {
            if t.beta.len() != ctx.lattice.rank() || t.t.len() != ctx.nvars() {
                return Err(RingError::BadLattice("term has the wrong number of exponents".into()));
            }
            r.add_term(Monomial::new(&t.beta, &t.t), t.coeff.clone());
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qr;

    fn ctx(e: i64) -> Arc<RingContext> {
        let lat = DegreeLattice::new(vec![
            LatticeGenerator { name: "b1".into(), omega: q(1), mu: 2 },
            LatticeGenerator { name: "b2".into(), omega: qr(3, 2), mu: 0 },
        ])
        .unwrap();
        RingContext::new(lat, vec![0, 2], q(e)).unwrap()
    }

    #[test]
    fn lattice_validation() {
        assert!(DegreeLattice::single(q(0), 2).is_err());
        assert!(DegreeLattice::single(q(1), 1).is_err());
        assert!(RingContext::new(DegreeLattice::single(q(1), 2).unwrap(), vec![1], q(1)).is_err());
    }

    #[test]
    fn truncation_drops_and_flags() {
        let c = ctx(2);
        let t = RingElement::t_beta(&c, &[1, 0], q(1));
        let t2 = t.try_mul(&t).unwrap();
        assert_eq!(t2.valuation(), Some(q(2)));
        assert!(!t2.truncated());
        let t3 = t2.try_mul(&t).unwrap();
        assert!(t3.is_zero());
        assert!(t3.truncated());
    }

    #[test]
    fn valuation_grade_and_ideal() {
        let c = ctx(4);
        let x = RingElement::var(&c, 1).unwrap();
        let y = RingElement::t_beta(&c, &[0, 1], q(5));
        let s = x.try_add(&RingElement::one(&c)).unwrap();
        assert_eq!(s.valuation(), Some(q(0)));
        assert_eq!(s.reduce_mod_ideal(), RingElement::one(&c));
        assert_eq!(y.valuation(), Some(qr(3, 2)));
        assert_eq!(x.grade(), Some(2));
        assert_eq!(RingElement::zero(&c).valuation(), None);
    }

    #[test]
    fn derivative_is_exact() {
        let c = ctx(5);
        let x = RingElement::var(&c, 0).unwrap();
        let x3 = x.try_mul(&x).unwrap().try_mul(&x).unwrap();
        assert_eq!(x3.tderiv(0).unwrap(), x.try_mul(&x).unwrap().scale(&q(3)));
        assert_eq!(x3.tderiv(1).unwrap(), RingElement::zero(&c));
        assert!(x3.tderiv(7).is_err());
    }

    #[test]
    fn context_mismatch_is_an_error() {
        let a = RingElement::one(&ctx(2));
        let b = RingElement::one(&ctx(3));
        assert_eq!(a.try_add(&b), Err(RingError::ContextMismatch));
    }

    #[test]
    fn splittings_and_elements() {
        let c = ctx(3);
        assert_eq!(c.lattice.splittings(&[2, 1]).len(), 6);
        let els = c.lattice.elements_up_to(&q(2));
        assert_eq!(els, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![2, 0]]);
    }
}
