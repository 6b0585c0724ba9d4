//! Pseudo-isotopies: structures on `C̃ = Λ ⊗ A(L) ⊗ R`, where `Λ` is the algebra
//! of polynomial forms `a(τ) + dτ·b(τ)` on the unit interval.
//!
//! The interval coordinate is written `τ` to keep it apart from the bulk
//! variables `t_a` of the Novikov ring. Only the product family (constant
//! almost complex structure) is modelled: `q̃` is the Λ-multilinear Koszul
//! extension of `q`, so `m̃` is assembled by [`build_structure`] over
//! [`IntervalRing`].

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::ainfty::AInftyStructure;
use crate::coeff::{cvec_is_zero, fmt_cvec, CVec, CoeffRing, NovikovRing};
use crate::dgmodel::{svec_to_dense, CDGAModel};
use crate::novikov::{RingContext, RingElement};
use crate::qops::{all_tuples, build_m, build_structure, interior_coefficient, CorrelatorData, DataError, Tuple};
use crate::rational::{fmt_q, inv_factorial, q, qr, Q};
use crate::report::Report;
use crate::signs::Parity;

/// Sign in `p_*(dτ ∧ ω) = PUSH_FORWARD_DT_SIGN · dτ · ∫_L ω`.
///
/// This is the projection formula with the base form on the left. The
/// interval Stokes identity cannot see this constant (only the `dτ`-free part
/// of a pairing survives `∫_I d`); it is pinned by the cyclic law with
/// `d`-correction and by the uniform relations, whose tests fail for `-1`.
pub const PUSH_FORWARD_DT_SIGN: i64 = 1;

/// `a(τ) + dτ·b(τ)` with coefficients in the Novikov ring; index `i` holds the
/// coefficient of `τ^i`.
#[derive(Clone, Default)]
pub struct IElem {
    pub a: Vec<RingElement>,
    pub b: Vec<RingElement>,
    /// Set when a product exceeded the τ-degree cap; such elements never compare as zero.
    pub overflow: bool,
}

fn trim(v: &mut Vec<RingElement>) {
    while v.last().is_some_and(|x| x.is_zero()) {
        v.pop();
    }
}

fn padd(acc: &mut Vec<RingElement>, v: &[RingElement], c: &Q) {
    if acc.len() < v.len() {
        for x in &v[acc.len()..] {
            acc.push(RingElement::zero(x.ctx()));
        }
    }
    for (i, x) in v.iter().enumerate() {
        acc[i].add_scaled(x, c);
    }
    trim(acc);
}

fn pmul(x: &[RingElement], y: &[RingElement], cap: usize, overflow: &mut bool) -> Vec<RingElement> {
    let mut out: Vec<RingElement> = Vec::new();
    for (i, u) in x.iter().enumerate() {
        if u.is_zero() {
            continue;
        }
        for (j, v) in y.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let p = u.try_mul(v).expect("ring context mismatch");
            if p.is_zero() && !p.truncated() {
                continue;
            }
            if i + j > cap {
                *overflow = true;
                continue;
            }
            while out.len() <= i + j {
                out.push(RingElement::zero(u.ctx()));
            }
            out[i + j].add_scaled(&p, &Q::one());
        }
    }
    trim(&mut out);
    out
}

fn peval(v: &[RingElement], t: &Q, ctx: &Arc<RingContext>) -> RingElement {
    let mut acc = RingElement::zero(ctx);
    let mut pw = Q::one();
    for x in v {
        acc.add_scaled(x, &pw);
        pw *= t;
    }
    acc
}

impl IElem {
    pub fn constant(r: RingElement) -> IElem {
        let mut a = vec![r];
        trim(&mut a);
        IElem { a, b: Vec::new(), overflow: false }
    }

    pub fn new(mut a: Vec<RingElement>, mut b: Vec<RingElement>) -> IElem {
        trim(&mut a);
        trim(&mut b);
        IElem { a, b, overflow: false }
    }

    /// `j_τ^*`: evaluation at `τ`, which kills the `dτ` part.
    pub fn at(&self, t: &Q, ctx: &Arc<RingContext>) -> RingElement {
        peval(&self.a, t, ctx)
    }

    /// `∫_I`: `∫₀¹ b(τ) dτ`; the `dτ`-free part integrates to zero.
    pub fn integral(&self, ctx: &Arc<RingContext>) -> RingElement {
        let mut acc = RingElement::zero(ctx);
        for (i, x) in self.b.iter().enumerate() {
            acc.add_scaled(x, &qr(1, i as i64 + 1));
        }
        acc
    }

    pub fn is_constant(&self) -> bool {
        self.b.is_empty() && self.a.len() <= 1
    }

    /// Degrees of all terms (the `dτ` part counts one extra).
    pub fn grades(&self) -> BTreeSet<i64> {
        let mut s = BTreeSet::new();
        for (v, shift) in [(&self.a, 0), (&self.b, 1)] {
            for x in v.iter() {
                for m in x.terms().keys() {
                    s.insert(m.grade(x.ctx()) + shift);
                }
            }
        }
        s
    }
}

impl PartialEq for IElem {
    fn eq(&self, o: &Self) -> bool {
        let same = |x: &[RingElement], y: &[RingElement]| {
            let n = x.len().max(y.len());
            (0..n).all(|i| match (x.get(i), y.get(i)) {
                (Some(u), Some(v)) => u == v,
                (Some(u), None) | (None, Some(u)) => u.is_zero(),
                (None, None) => true,
            })
        };
        self.overflow == o.overflow && same(&self.a, &o.a) && same(&self.b, &o.b)
    }
}

impl fmt::Display for IElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (v, dt) in [(&self.a, ""), (&self.b, "dτ·")] {
            for (i, x) in v.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                let pw = match i {
                    0 => String::new(),
                    1 => "·τ".to_string(),
                    _ => format!("·τ^{i}"),
                };
                parts.push(format!("{dt}({x}){pw}"));
            }
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        f.write_str(&parts.join(" + "))?;
        if self.overflow {
            f.write_str(" [τ-degree overflow]")?;
        }
        Ok(())
    }
}

impl fmt::Debug for IElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `Λ ⊗ R` with `dτ` odd and `d(a + dτ·b) = dτ·∂_τ a`.
#[derive(Clone, Debug)]
pub struct IntervalRing {
    pub ctx: Arc<RingContext>,
    /// Largest τ-exponent kept; anything beyond is an overflow, not a truncation.
    pub tcap: usize,
}

impl CoeffRing for IntervalRing {
    type E = IElem;

    fn zero(&self) -> IElem {
        IElem::default()
    }
    fn one(&self) -> IElem {
        IElem::constant(RingElement::one(&self.ctx))
    }
    fn is_zero(&self, x: &IElem) -> bool {
        !x.overflow && x.a.iter().chain(&x.b).all(|c| c.is_zero())
    }
    fn add_assign(&self, x: &mut IElem, y: &IElem) {
        padd(&mut x.a, &y.a, &Q::one());
        padd(&mut x.b, &y.b, &Q::one());
        x.overflow |= y.overflow;
    }
    fn mul(&self, x: &IElem, y: &IElem) -> IElem {
        // (a + dτ b)(a' + dτ b') = aa' + dτ(ba' + ab'), as a and a' are even.
        let mut of = x.overflow || y.overflow;
        let a = pmul(&x.a, &y.a, self.tcap, &mut of);
        let mut b = pmul(&x.b, &y.a, self.tcap, &mut of);
        let b2 = pmul(&x.a, &y.b, self.tcap, &mut of);
        padd(&mut b, &b2, &Q::one());
        IElem { a, b, overflow: of }
    }
    fn scale(&self, x: &IElem, c: &Q) -> IElem {
        let mut a: Vec<RingElement> = x.a.iter().map(|r| r.scale(c)).collect();
        let mut b: Vec<RingElement> = x.b.iter().map(|r| r.scale(c)).collect();
        trim(&mut a);
        trim(&mut b);
        IElem { a, b, overflow: x.overflow }
    }
    fn parts(&self, x: &IElem) -> (IElem, IElem) {
        (
            IElem { a: x.a.clone(), b: Vec::new(), overflow: x.overflow },
            IElem { a: Vec::new(), b: x.b.clone(), overflow: x.overflow },
        )
    }
    fn d(&self, x: &IElem) -> IElem {
        let mut b: Vec<RingElement> = x.a.iter().enumerate().skip(1).map(|(i, r)| r.scale(&q(i as i64))).collect();
        trim(&mut b);
        IElem { a: Vec::new(), b, overflow: x.overflow }
    }
    fn lift(&self, r: &RingElement) -> IElem {
        IElem::constant(r.clone())
    }
    fn truncated(&self, x: &IElem) -> bool {
        x.a.iter().chain(&x.b).any(|c| c.truncated())
    }
    fn grade(&self, x: &IElem) -> Option<i64> {
        let g = x.grades();
        (g.len() == 1).then(|| *g.iter().next().unwrap())
    }
    fn in_ideal(&self, x: &IElem) -> bool {
        x.a.iter().chain(&x.b).all(|c| c.reduce_mod_ideal().is_zero())
    }
}

impl IntervalRing {
    /// `c·τ^i`, or `c·dτ·τ^i` when `dt`.
    pub fn monomial(&self, c: RingElement, i: usize, dt: bool) -> IElem {
        let mut v: Vec<RingElement> = (0..i).map(|_| RingElement::zero(&self.ctx)).collect();
        v.push(c);
        if dt {
            IElem::new(Vec::new(), v)
        } else {
            IElem::new(v, Vec::new())
        }
    }
}

#[derive(Debug, Error)]
pub enum IsotopyError {
    #[error("η does not satisfy dη = γ - γ′: {0}")]
    NotExact(String),
    #[error("bulk input: {0}")]
    Bulk(String),
    #[error("γ̃ is not closed: {0}")]
    NotClosed(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Total degree of a homogeneous vector over `model`; `None` for zero or mixed vectors.
pub fn total_degree(model: &CDGAModel, ring: &IntervalRing, v: &CVec<IElem>) -> Option<i64> {
    let mut s = BTreeSet::new();
    for (i, c) in v {
        for g in c.grades() {
            s.insert(g + model.deg(*i));
        }
    }
    (s.len() == 1).then(|| *s.iter().next().unwrap()).filter(|_| !cvec_is_zero(ring, v))
}

/// `d̃(λe) = d_Λ(λ)e + (-1)^{|λ|} λ de`.
pub fn total_differential(model: &CDGAModel, ring: &IntervalRing, v: &CVec<IElem>) -> CVec<IElem> {
    let mut out: CVec<IElem> = CVec::new();
    let mut add = |i: usize, c: IElem| {
        let e = out.entry(i).or_insert_with(|| ring.zero());
        ring.add_assign(e, &c);
    };
    for (i, c) in v {
        add(*i, ring.d(c));
        let (ev, od) = ring.parts(c);
        for (o, x) in model.d_col(*i) {
            add(*o, ring.scale(&ev, x));
            add(*o, ring.scale(&od, &-x.clone()));
        }
    }
    out.retain(|_, x| !ring.is_zero(x));
    out
}

/// `j_τ^*` on vectors.
pub fn restrict_vec(v: &CVec<IElem>, t: &Q, ctx: &Arc<RingContext>) -> CVec<RingElement> {
    let mut out = CVec::new();
    for (i, c) in v {
        let x = c.at(t, ctx);
        if !x.is_zero() {
            out.insert(*i, x);
        }
    }
    out
}

/// `⟨ξ, η⟩ = Σ λμ ⟨e_a, e_b⟩` for Novikov coefficients (all even).
pub fn base_pairing(model: &CDGAModel, ctx: &Arc<RingContext>, xi: &CVec<RingElement>, eta: &CVec<RingElement>) -> RingElement {
    let mut acc = RingElement::zero(ctx);
    for (a, l) in xi {
        for (b, m) in eta {
            let g = model.pairing(*a, *b);
            if !g.is_zero() {
                acc.add_scaled(&l.try_mul(m).expect("ring context mismatch"), g);
            }
        }
    }
    acc
}

/// `⟨⟨ξ̃, η̃⟩⟩ = (-1)^{|η̃|} p_*(ξ̃ ∧ η̃)`. On `λe_a ⊗ μe_b` this is
/// `(-1)^{|μ| + |e_a||μ|} λμ ⟨e_a, e_b⟩`, with [`PUSH_FORWARD_DT_SIGN`] on the `dτ` part.
pub fn big_pairing(model: &CDGAModel, ring: &IntervalRing, xi: &CVec<IElem>, eta: &CVec<IElem>) -> IElem {
    let mut acc = ring.zero();
    for (a, l) in xi {
        for (b, m) in eta {
            let g = model.pairing(*a, *b);
            if g.is_zero() {
                continue;
            }
            let (me, mo) = ring.parts(m);
            ring.add_assign(&mut acc, &ring.scale(&ring.mul(l, &me), g));
            let s = Parity::of(1 + model.deg(*a));
            ring.add_assign(&mut acc, &ring.scale(&ring.mul(l, &mo), &s.apply(g.clone())));
        }
    }
    if PUSH_FORWARD_DT_SIGN < 0 {
        acc.b = acc.b.iter().map(|x| x.neg()).collect();
    }
    acc
}

/// All basis-polynomial elements `τ^i e` and `dτ τ^i e` with `i ≤ tdeg`.
fn basis_polynomials(model: &CDGAModel, ring: &IntervalRing, tdeg: usize) -> Vec<(String, CVec<IElem>)> {
    let mut out = Vec::new();
    for e in 0..model.len() {
        for i in 0..=tdeg {
            for dt in [false, true] {
                let mut v = CVec::new();
                v.insert(e, ring.monomial(RingElement::one(&ring.ctx), i, dt));
                let name = format!("{}τ^{i}·{}", if dt { "dτ·" } else { "" }, model.name_of(e));
                out.push((name, v));
            }
        }
    }
    out
}

/// `∫_I d⟨⟨ξ̃,η̃⟩⟩ = ⟨j_1^*ξ̃, j_1^*η̃⟩ - ⟨j_0^*ξ̃, j_0^*η̃⟩` on all pairs of basis polynomials.
pub fn check_stokes(model: &CDGAModel, ring: &IntervalRing, tdeg: usize) -> Report {
    let mut r = Report::new("check-stokes");
    let ctx = &ring.ctx;
    let polys = basis_polynomials(model, ring, tdeg);
    for (nx, x) in &polys {
        for (ny, y) in &polys {
            r.checked += 1;
            let lhs = ring.d(&big_pairing(model, ring, x, y)).integral(ctx);
            let mut rhs = base_pairing(model, ctx, &restrict_vec(x, &q(1), ctx), &restrict_vec(y, &q(1), ctx));
            rhs.add_scaled(&base_pairing(model, ctx, &restrict_vec(x, &q(0), ctx), &restrict_vec(y, &q(0), ctx)), &-Q::one());
            let diff = lhs.try_add(&rhs.neg()).expect("ring context mismatch");
            if !diff.is_zero() {
                r.fail("Stokes pairing identity", format!("({nx}, {ny})"), diff.to_string());
            }
        }
    }
    r.finish()
}

/// The interpolating bulk form `γ̃ = γ + τ(γ′ - γ) - dτ∧η`, which is closed
/// exactly when `dη = γ - γ′`, and restricts to `γ` and `γ′` at the ends.
pub fn build_gamma_tilde(
    data: &CorrelatorData,
    ring: &IntervalRing,
    gamma: &[(usize, RingElement)],
    gamma_prime: &[(usize, RingElement)],
    eta: &[(usize, RingElement)],
) -> Result<Vec<(usize, IElem)>, IsotopyError> {
    let xm = &data.pair.x;
    let ctx = &ring.ctx;
    data.validate_bulk(gamma)?;
    data.validate_bulk(gamma_prime)?;
    let dense = |v: &[(usize, RingElement)]| {
        let mut out = vec![RingElement::zero(ctx); xm.len()];
        for (j, c) in v {
            out[*j].add_scaled(c, &Q::one());
        }
        out
    };
    let g = dense(gamma);
    let gp = dense(gamma_prime);
    let mut deta = vec![RingElement::zero(ctx); xm.len()];
    for (j, c) in eta {
        if *j >= xm.len() || !data.pair.is_relative_basis(*j) {
            return Err(IsotopyError::Bulk(format!("η component {j} is not a relative form")));
        }
        for m in c.terms().keys() {
            if m.beta(ctx).iter().any(|&e| e > 0) || m.grade(ctx) + xm.deg(*j) != 1 {
                return Err(IsotopyError::Bulk(format!("term of η along {} has total degree ≠ 1 or involves T", xm.name_of(*j))));
            }
        }
        for (o, x) in xm.d_col(*j) {
            deta[*o].add_scaled(c, x);
        }
    }
    for j in 0..xm.len() {
        let diff = g[j].try_add(&gp[j].neg()).expect("ring context mismatch").try_add(&deta[j].neg()).expect("ring context mismatch");
        if !diff.is_zero() {
            return Err(IsotopyError::NotExact(format!("component {}: {diff}", xm.name_of(j))));
        }
    }
    let eta_d = dense(eta);
    let mut out = Vec::new();
    for j in 0..xm.len() {
        let slope = gp[j].try_add(&g[j].neg()).expect("ring context mismatch");
        let c = IElem::new(vec![g[j].clone(), slope], vec![eta_d[j].neg()]);
        if !ring.is_zero(&c) {
            out.push((j, c));
        }
    }
    let v: CVec<IElem> = out.iter().cloned().collect();
    let dv = total_differential(xm, ring, &v);
    if !dv.is_empty() {
        return Err(IsotopyError::NotClosed(fmt_cvec(ring, &dv, &|i| xm.name_of(i).to_string())));
    }
    Ok(out)
}

/// `m̃^γ̃` with `m̃_{-1}`: the structure of [`build_structure`] over the interval ring.
pub fn build_isotopy(data: &CorrelatorData, ring: &IntervalRing, gamma_tilde: &[(usize, IElem)], kmax: usize) -> AInftyStructure<IntervalRing> {
    let r = ring.clone();
    let tb = move |b: &[u32]| r.lift(&RingElement::t_beta(&r.ctx, b, Q::one()));
    build_structure(data, ring.clone(), gamma_tilde, &tb, kmax)
}

/// `G̃W = Σ_{β,l} T^β/l! p_* i^* q̃^β_{∅,l}(γ̃^{⊗l})`. The sphere push-forward
/// carries no sign of its own, so odd coefficients only pass earlier inputs.
pub fn gw_tilde(data: &CorrelatorData, ring: &IntervalRing, gamma_tilde: &[(usize, IElem)]) -> IElem {
    let mut acc = ring.zero();
    let Some(spheres) = &data.spheres else { return acc };
    let xm = &data.pair.x;
    let mut coef: Vec<Option<(IElem, IElem)>> = vec![None; xm.len()];
    for (j, c) in gamma_tilde {
        coef[*j] = Some(ring.parts(c));
    }
    for ((beta, l), t) in spheres {
        if data.lattice.omega(beta) > ring.ctx.cutoff {
            continue;
        }
        let tb = ring.lift(&RingElement::t_beta(&ring.ctx, beta, inv_factorial(*l)));
        for (tup, v) in &t.entries {
            let Some(c) = interior_coefficient(ring, &coef, tup, false, |g| xm.deg(g as usize)) else { continue };
            let r = data.pair.restrict(&svec_to_dense(v, xm.len()));
            let integral = data.pair.l.integrate(&r);
            if integral.is_zero() {
                continue;
            }
            ring.add_assign(&mut acc, &ring.scale(&ring.mul(&tb, &c), &integral));
        }
    }
    if PUSH_FORWARD_DT_SIGN < 0 {
        acc.b = acc.b.iter().map(|x| x.neg()).collect();
    }
    acc
}

/// `j_τ^* m̃`, a structure over the Novikov ring.
pub fn restrict_structure(m: &AInftyStructure<IntervalRing>, t: &Q) -> AInftyStructure<NovikovRing> {
    let ctx = &m.ring.ctx;
    let ops = m
        .ops
        .iter()
        .map(|table| {
            table
                .iter()
                .filter_map(|(k, v)| {
                    let w = restrict_vec(v, t, ctx);
                    (!w.is_empty()).then(|| (k.clone(), w))
                })
                .collect()
        })
        .collect();
    AInftyStructure { ring: NovikovRing { ctx: ctx.clone() }, model: m.model.clone(), ops, m_minus1: m.m_minus1.at(t, ctx), kmax: m.kmax }
}

fn basis_vec(ring: &IntervalRing, i: u16) -> CVec<IElem> {
    let mut v = CVec::new();
    v.insert(i as usize, ring.one());
    v
}

fn vec_sub(ring: &IntervalRing, a: &CVec<IElem>, b: &CVec<IElem>) -> CVec<IElem> {
    let mut out = a.clone();
    for (i, x) in b {
        let e = out.entry(*i).or_insert_with(|| ring.zero());
        ring.add_assign(e, &ring.neg(x));
    }
    out.retain(|_, x| !ring.is_zero(x));
    out
}

/// A random homogeneous element of total degree `deg`: a few basis vectors with
/// polynomial coefficients, mixing `τ`-only and `dτ` coefficients.
pub fn random_homogeneous(model: &CDGAModel, ring: &IntervalRing, rng: &mut ChaCha8Rng, deg: i64, tdeg: usize) -> CVec<IElem> {
    let mut v: CVec<IElem> = CVec::new();
    let ctx = &ring.ctx;
    let poly = |rng: &mut ChaCha8Rng| -> Vec<RingElement> {
        (0..=tdeg).map(|_| RingElement::constant(ctx, q(rng.gen_range(-3..=3)))).collect()
    };
    for e in 0..model.len() {
        let d = model.deg(e);
        if d == deg && rng.gen_bool(0.5) {
            v.insert(e, IElem::new(poly(rng), Vec::new()));
        } else if d + 1 == deg && rng.gen_bool(0.5) {
            v.insert(e, IElem::new(Vec::new(), poly(rng)));
        }
    }
    v.retain(|_, x| !ring.is_zero(x));
    v
}

/// A∞ residual `Σ (-1)^{Σ_{first}(|x_j|+1)} m(x_first, m(x_mid), x_last)` on homogeneous inputs.
pub fn ainfty_residual_general(m: &AInftyStructure<IntervalRing>, xs: &[CVec<IElem>]) -> CVec<IElem> {
    let ring = &m.ring;
    let degs: Vec<i64> = xs.iter().map(|x| total_degree(&m.model, ring, x).unwrap_or(0)).collect();
    let mut acc = CVec::new();
    for part in crate::signs::enumerate_partitions(xs.len()) {
        let inner = m.apply(&xs[part.middle()]);
        if inner.is_empty() {
            continue;
        }
        let mut ins: Vec<CVec<IElem>> = xs[part.first()].to_vec();
        ins.push(inner);
        ins.extend(xs[part.last()].iter().cloned());
        let v = m.apply(&ins);
        let pre: i64 = degs[part.first()].iter().map(|d| d + 1).sum();
        let odd = Parity::of(pre).is_odd();
        for (o, x) in v {
            let e = acc.entry(o).or_insert_with(|| ring.zero());
            ring.add_signed(e, &x, odd);
        }
    }
    acc.retain(|_, x| !ring.is_zero(x));
    acc
}

/// Cyclic residual `⟨⟨m_k(x_1..x_k), x_{k+1}⟩⟩ - (-1)^{s}⟨⟨m_k(x_{k+1}, x_1..x_{k-1}), x_k⟩⟩ - δ_{1k} d⟨⟨x_1, x_2⟩⟩`.
pub fn cyclic_residual(m: &AInftyStructure<IntervalRing>, xs: &[CVec<IElem>]) -> IElem {
    let ring = &m.ring;
    let model = &m.model;
    let k = xs.len() - 1;
    let degs: Vec<i64> = xs.iter().map(|x| total_degree(model, ring, x).unwrap_or(0)).collect();
    let lhs = big_pairing(model, ring, &m.apply(&xs[..k]), &xs[k]);
    let mut rot: Vec<CVec<IElem>> = vec![xs[k].clone()];
    rot.extend(xs[..k - 1].iter().cloned());
    let s = Parity::of((degs[k] + 1) * degs[..k].iter().map(|d| d + 1).sum::<i64>());
    let rhs = big_pairing(model, ring, &m.apply(&rot), &xs[k - 1]);
    let mut out = lhs;
    ring.add_signed(&mut out, &rhs, s.is_even());
    if k == 1 {
        ring.add_assign(&mut out, &ring.neg(&ring.d(&big_pairing(model, ring, &xs[0], &xs[1]))));
    }
    out
}

/// Options for [`check_pseudo_isotopy`].
#[derive(Clone, Debug)]
pub struct IsotopyCheck {
    /// Interior points `τ` at which the endpoint functor is compared, besides 0 and 1.
    pub interior: Vec<Q>,
    pub random_trials: usize,
    pub seed: u64,
}

impl Default for IsotopyCheck {
    fn default() -> Self {
        IsotopyCheck { interior: vec![qr(1, 3)], random_trials: 20, seed: 7 }
    }
}

/// The pseudo-isotopy axioms for `m̃` between `m^γ` and `m^{γ′}`: A∞ relations over
/// `Λ ⊗ R`, cyclicity with `d`-correction, strong unit, degree, `ν(m̃_0) > 0`,
/// `⟨⟨m̃_0, 1⟩⟩ = 0`, and the endpoint conditions at `τ = 0, 1` (plus interior points).
pub fn check_pseudo_isotopy(
    data: &CorrelatorData,
    m: &AInftyStructure<IntervalRing>,
    gamma: &[(usize, RingElement)],
    gamma_prime: &[(usize, RingElement)],
    gamma_tilde: &[(usize, IElem)],
    opts: &IsotopyCheck,
) -> Result<Report, IsotopyError> {
    let ring = &m.ring;
    let ctx = &ring.ctx;
    let model = &m.model;
    let nb = model.len();
    let names = |i: usize| model.name_of(i).to_string();
    let mut r = Report::new("check-pseudo-isotopy");
    r.merge(m.check_ainfty());
    let unit = model.unit as u16;
    // Basis-tuple laws.
    for k in 0..=m.kmax {
        for t in all_tuples(&vec![nb; k]) {
            let v = m.op_basis(&t).cloned().unwrap_or_default();
            let loc = format!("m̃_{k}{}", m.fmt_tuple(&t));
            r.checked += 1;
            // Degree 2 - k.
            let want = t.iter().map(|&i| model.deg(i as usize)).sum::<i64>() + 2 - k as i64;
            for (o, c) in &v {
                if c.grades().iter().any(|g| g + model.deg(*o) != want) {
                    r.fail("degree of m̃_k", loc.clone(), fmt_cvec(ring, &v, &names));
                    break;
                }
                if c.overflow {
                    r.fail("τ-degree cap", loc.clone(), c.to_string());
                }
            }
            // Strong unit.
            if t.contains(&unit) {
                let expect: CVec<IElem> = match (k, t.as_slice()) {
                    (2, [a, b]) if *a == unit => basis_vec(ring, *b),
                    (2, [a, b]) if *b == unit => {
                        let s = Parity::of(model.deg(*a as usize));
                        let mut e = basis_vec(ring, *a);
                        if s.is_odd() {
                            e = e.into_iter().map(|(i, c)| (i, ring.neg(&c))).collect();
                        }
                        e
                    }
                    _ => CVec::new(),
                };
                let d = vec_sub(ring, &v, &expect);
                if !d.is_empty() {
                    r.fail("strong unit", loc.clone(), fmt_cvec(ring, &d, &names));
                }
            }
        }
        // Cyclicity on basis tuples of length k + 1.
        if k >= 1 {
            let tuples = all_tuples(&vec![nb; k + 1]);
            r.checked += tuples.len();
            let bad: Vec<(Tuple, IElem)> = tuples
                .par_iter()
                .filter_map(|t| {
                    let xs: Vec<CVec<IElem>> = t.iter().map(|&i| basis_vec(ring, i)).collect();
                    let c = cyclic_residual(m, &xs);
                    (!ring.is_zero(&c)).then(|| (t.clone(), c))
                })
                .collect();
            for (t, c) in bad {
                r.fail("cyclic with d-correction", format!("k={k} {}", m.fmt_tuple(&t)), c.to_string());
            }
        }
    }
    // m̃_0: valuation and pairing with the unit.
    let m0 = m.op_basis(&[]).cloned().unwrap_or_default();
    if m0.values().any(|c| !ring.in_ideal(c)) {
        r.fail("ν(m̃_0) > 0", "m̃_0", fmt_cvec(ring, &m0, &names));
    }
    let p = big_pairing(model, ring, &m0, &basis_vec(ring, unit));
    r.checked += 1;
    if !ring.is_zero(&p) {
        r.fail("⟨⟨m̃_0, 1⟩⟩ = 0", "m̃_0", p.to_string());
    }
    // Random polynomial inputs: A∞ relations, cyclicity and the endpoint pairing law.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let degs: Vec<i64> = (0..=model.n + 1).collect();
    for trial in 0..opts.random_trials {
        let k = 1 + trial % m.kmax.clamp(1, 3);
        let xs: Vec<CVec<IElem>> =
            (0..=k)
                .map(|_| {
                    let d = degs[rng.gen_range(0..degs.len())];
                    random_homogeneous(model, ring, &mut rng, d, 2)
                })
                .collect();
        if xs.iter().any(|x| x.is_empty()) {
            continue;
        }
        r.checked += 3;
        let a = ainfty_residual_general(m, &xs[..k]);
        if !a.is_empty() {
            r.fail("A∞ relation (polynomial inputs)", format!("trial {trial} k={k}"), fmt_cvec(ring, &a, &names));
        }
        let c = cyclic_residual(m, &xs);
        if !ring.is_zero(&c) {
            r.fail("cyclic with d-correction (polynomial inputs)", format!("trial {trial} k={k}"), c.to_string());
        }
        for t in [q(0), q(1)].iter().chain(&opts.interior) {
            let lhs = big_pairing(model, ring, &xs[0], &xs[1]).at(t, ctx);
            let rhs = base_pairing(model, ctx, &restrict_vec(&xs[0], t, ctx), &restrict_vec(&xs[1], t, ctx));
            if lhs != rhs {
                r.fail("endpoint pairing", format!("trial {trial} τ={}", fmt_q(t)), format!("{lhs} vs {rhs}"));
            }
        }
    }
    // Endpoint conditions on operations.
    let points: Vec<(Q, Vec<(usize, RingElement)>)> = {
        let mut v = vec![(q(0), gamma.to_vec()), (q(1), gamma_prime.to_vec())];
        for t in &opts.interior {
            let g: Vec<(usize, RingElement)> =
                gamma_tilde.iter().map(|(j, c)| (*j, c.at(t, ctx))).filter(|(_, c)| !c.is_zero()).collect();
            v.push((t.clone(), g));
        }
        v
    };
    for (t, g) in points {
        let base = build_m(data, ctx, &g, m.kmax)?;
        let red = restrict_structure(m, &t);
        for k in 0..red.ops.len() {
            for tup in all_tuples(&vec![nb; k]) {
                r.checked += 1;
                let a = red.op_basis(&tup).cloned().unwrap_or_default();
                let b = base.op_basis(&tup).cloned().unwrap_or_default();
                if a != b {
                    r.fail(
                        "endpoint operations",
                        format!("τ={} m_{k}{}", fmt_q(&t), red.fmt_tuple(&tup)),
                        format!("{} vs {}", fmt_cvec(&red.ring, &a, &names), fmt_cvec(&base.ring, &b, &names)),
                    );
                }
            }
        }
        r.checked += 1;
        if red.m_minus1 != base.m_minus1 {
            r.fail("endpoint m_{-1}", format!("τ={}", fmt_q(&t)), format!("{} vs {}", red.m_minus1, base.m_minus1));
        }
    }
    r.note("unit endpoints: the unit of C̃ is the constant 1 at every τ");
    Ok(r.finish())
}

/// The sign `ν(α;k_1,k_2,i)` of the uniform relations (1-based `i`, degrees of the `k + 1` inputs).
pub fn uniform_sign(degs: &[i64], k2: usize, i: usize) -> Parity {
    let k1n = degs.len();
    let shifted: Vec<i64> = degs.iter().map(|d| d + 1).collect();
    let total: i64 = shifted.iter().sum();
    let mut s: i64 = shifted[..i - 1].iter().sum();
    for j in (i + k2)..=k1n {
        let sj = shifted[j - 1];
        s += sj * (total - sj + 1);
    }
    Parity::of(s + 1)
}

/// Residual of `d⟨⟨m̃_k(x_1..x_k), x_{k+1}⟩⟩ = Σ (-1)^ν ⟨⟨m̃_{k_1}(rotated), m̃_{k_2}(x_i..x_{i+k_2-1})⟩⟩`.
pub fn uniform_residual(m: &AInftyStructure<IntervalRing>, xs: &[CVec<IElem>]) -> IElem {
    let ring = &m.ring;
    let model = &m.model;
    let kp1 = xs.len();
    let k = kp1 - 1;
    let degs: Vec<i64> = xs.iter().map(|x| total_degree(model, ring, x).unwrap_or(0)).collect();
    let mut acc = ring.d(&big_pairing(model, ring, &m.apply(&xs[..k]), &xs[k]));
    for k2 in 0..=k {
        let k1 = kp1 - k2;
        for i in 1..=k1 {
            let inner = m.apply(&xs[i - 1..i - 1 + k2]);
            if inner.is_empty() {
                continue;
            }
            let mut rot: Vec<CVec<IElem>> = xs[i - 1 + k2..].to_vec();
            rot.extend(xs[..i - 1].iter().cloned());
            let outer = m.apply(&rot);
            if outer.is_empty() {
                continue;
            }
            let p = big_pairing(model, ring, &outer, &inner);
            let s = uniform_sign(&degs, k2, i);
            ring.add_signed(&mut acc, &p, s.is_even());
        }
    }
    acc
}

/// `d m̃_{-1} - (-1)^n ½⟨⟨m̃_0, m̃_0⟩⟩ + σ·G̃W` for the sphere sign `σ`.
pub fn uniform_minus1_residual(m: &AInftyStructure<IntervalRing>, gw: &IElem, sigma: i64) -> IElem {
    let ring = &m.ring;
    let model = &m.model;
    let m0 = m.op_basis(&[]).cloned().unwrap_or_default();
    let mut acc = ring.d(&m.m_minus1);
    let half = Parity::of(model.n + 1).apply(qr(1, 2));
    ring.add_assign(&mut acc, &ring.scale(&big_pairing(model, ring, &m0, &m0), &half));
    ring.add_assign(&mut acc, &ring.scale(gw, &q(sigma)));
    acc
}

/// The uniform structure equations of `m̃` for `0 ≤ k ≤ kmax` on basis tuples and
/// random polynomial inputs, and the `k = -1` equation with the recorded sphere sign.
pub fn check_uniform_relations(data: &CorrelatorData, m: &AInftyStructure<IntervalRing>, gw: &IElem, opts: &IsotopyCheck) -> Report {
    let ring = &m.ring;
    let model = &m.model;
    let nb = model.len();
    let mut r = Report::new("check-uniform-relations");
    for k in 0..=m.kmax {
        let tuples = all_tuples(&vec![nb; k + 1]);
        r.checked += tuples.len();
        let bad: Vec<(Tuple, IElem)> = tuples
            .par_iter()
            .filter_map(|t| {
                let xs: Vec<CVec<IElem>> = t.iter().map(|&i| basis_vec(ring, i)).collect();
                let c = uniform_residual(m, &xs);
                (!ring.is_zero(&c)).then(|| (t.clone(), c))
            })
            .collect();
        for (t, c) in bad {
            r.fail("uniform relation", format!("k={k} {}", m.fmt_tuple(&t)), c.to_string());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    for trial in 0..opts.random_trials {
        let k = trial % (m.kmax.min(2) + 1);
        let xs: Vec<CVec<IElem>> =
            (0..=k)
                .map(|_| {
                    let d = rng.gen_range(0..=model.n + 1);
                    random_homogeneous(model, ring, &mut rng, d, 2)
                })
                .collect();
        if xs.iter().any(|x| x.is_empty()) {
            continue;
        }
        r.checked += 1;
        let c = uniform_residual(m, &xs);
        if !ring.is_zero(&c) {
            r.fail("uniform relation (polynomial inputs)", format!("trial {trial} k={k}"), c.to_string());
        }
    }
    r.checked += 1;
    if data.spheres.is_none() {
        let c = uniform_minus1_residual(m, &ring.zero(), 0);
        if !ring.is_zero(&c) {
            r.fail("uniform relation k=-1", "G̃W ≡ 0", c.to_string());
        }
        r.note("no sphere channel: k = -1 checked with G̃W ≡ 0");
    } else {
        let c = uniform_minus1_residual(m, gw, data.gw_sign);
        if !ring.is_zero(&c) {
            r.fail("uniform relation k=-1", format!("sphere sign {:+}", data.gw_sign), c.to_string());
        }
        let works: Vec<String> = [1i64, -1]
            .into_iter()
            .filter(|s| ring.is_zero(&uniform_minus1_residual(m, gw, *s)))
            .map(|s| format!("{s:+}"))
            .collect();
        r.note(format!(
            "recorded sphere sign {:+}; signs satisfying k = -1: {}",
            data.gw_sign,
            if works.is_empty() { "none".to_string() } else { works.join(", ") }
        ));
    }
    r.finish()
}
