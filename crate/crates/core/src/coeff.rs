//! Graded-commutative coefficient rings for A∞ operations.
//!
//! Elements of degree parity odd pick up Koszul signs when moved past inputs;
//! `d` is the ring differential (zero for the Novikov ring).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::sync::Arc;

use crate::novikov::{RingContext, RingElement};
use crate::rational::Q;

pub trait CoeffRing: Send + Sync {
    type E: Clone + Send + Sync + Display + PartialEq;

    fn zero(&self) -> Self::E;
    fn one(&self) -> Self::E;
    fn is_zero(&self, a: &Self::E) -> bool;
    fn add_assign(&self, a: &mut Self::E, b: &Self::E);
    fn mul(&self, a: &Self::E, b: &Self::E) -> Self::E;
    fn scale(&self, a: &Self::E, c: &Q) -> Self::E;
    /// Splits into even and odd parts.
    fn parts(&self, a: &Self::E) -> (Self::E, Self::E);
    /// The ring differential, of odd degree.
    fn d(&self, a: &Self::E) -> Self::E;
    fn lift(&self, r: &RingElement) -> Self::E;
    /// Whether a term of `a` was dropped by the energy cutoff.
    fn truncated(&self, a: &Self::E) -> bool;
    /// Total degree when `a` is homogeneous; `None` for zero or mixed elements.
    fn grade(&self, a: &Self::E) -> Option<i64>;
    /// Whether every term has positive valuation.
    fn in_ideal(&self, a: &Self::E) -> bool;

    fn neg(&self, a: &Self::E) -> Self::E {
        self.scale(a, &-crate::rational::one())
    }

    fn add_signed(&self, a: &mut Self::E, b: &Self::E, odd: bool) {
        if odd {
            self.add_assign(a, &self.neg(b));
        } else {
            self.add_assign(a, b);
        }
    }
}

/// The truncated Novikov ring; everything is even and `d = 0`.
#[derive(Clone, Debug)]
pub struct NovikovRing {
    pub ctx: Arc<RingContext>,
}

impl CoeffRing for NovikovRing {
    type E = RingElement;

    fn zero(&self) -> RingElement {
        RingElement::zero(&self.ctx)
    }
    fn one(&self) -> RingElement {
        RingElement::one(&self.ctx)
    }
    fn is_zero(&self, a: &RingElement) -> bool {
        a.is_zero()
    }
    fn add_assign(&self, a: &mut RingElement, b: &RingElement) {
        a.add_scaled(b, &crate::rational::one());
    }
    fn mul(&self, a: &RingElement, b: &RingElement) -> RingElement {
        a.try_mul(b).expect("ring context mismatch")
    }
    fn scale(&self, a: &RingElement, c: &Q) -> RingElement {
        a.scale(c)
    }
    fn parts(&self, a: &RingElement) -> (RingElement, RingElement) {
        (a.clone(), self.zero())
    }
    fn d(&self, _a: &RingElement) -> RingElement {
        self.zero()
    }
    fn lift(&self, r: &RingElement) -> RingElement {
        r.clone()
    }
    fn truncated(&self, a: &RingElement) -> bool {
        a.truncated()
    }
    fn grade(&self, a: &RingElement) -> Option<i64> {
        a.grade()
    }
    fn in_ideal(&self, a: &RingElement) -> bool {
        a.reduce_mod_ideal().is_zero()
    }
}

/// Sparse vector over a model basis with coefficients in a [`CoeffRing`].
pub type CVec<E> = BTreeMap<usize, E>;

pub fn cvec_add_scaled<R: CoeffRing>(ring: &R, acc: &mut CVec<R::E>, v: &CVec<R::E>, c: &R::E, odd_sign: bool) {
    for (i, x) in v {
        let mut t = ring.mul(c, x);
        if odd_sign {
            t = ring.neg(&t);
        }
        if ring.is_zero(&t) {
            continue;
        }
        let e = acc.entry(*i).or_insert_with(|| ring.zero());
        ring.add_assign(e, &t);
    }
    acc.retain(|_, x| !ring.is_zero(x));
}

pub fn cvec_is_zero<R: CoeffRing>(ring: &R, v: &CVec<R::E>) -> bool {
    v.values().all(|x| ring.is_zero(x))
}

pub fn fmt_cvec<R: CoeffRing>(_ring: &R, v: &CVec<R::E>, names: &dyn Fn(usize) -> String) -> String {
    if v.is_empty() {
        return "0".into();
    }
    v.iter().map(|(i, x)| format!("({x})·{}", names(*i))).collect::<Vec<_>>().join(" + ")
}
