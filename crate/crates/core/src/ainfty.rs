//! A∞ structures on `C = A(L) ⊗ ring` stored as tables on basis tuples, the
//! A∞ relations, the cyclic unital axioms and the derivative laws in the bulk
//! parameters.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::coeff::{cvec_is_zero, fmt_cvec, CVec, CoeffRing, NovikovRing};
use crate::dgmodel::CDGAModel;
use crate::novikov::{RingContext, RingElement};
use crate::qops::{all_tuples, build_m, CorrelatorData, DataError, Tuple};
use crate::rational::Q;
use crate::report::Report;
use crate::signs::{enumerate_partitions, Parity};

/// `m_k` for `0 ≤ k ≤ kmax + 1` and the scalar `m_{-1}`; relations are checked up to arity `kmax`.
#[derive(Clone)]
pub struct AInftyStructure<R: CoeffRing> {
    pub ring: R,
    pub model: CDGAModel,
    /// `ops[k]` maps a basis tuple of length `k` to `m_k` of it.
    pub ops: Vec<BTreeMap<Tuple, CVec<R::E>>>,
    pub m_minus1: R::E,
    pub kmax: usize,
}

impl<R: CoeffRing> AInftyStructure<R> {
    pub fn op_basis(&self, t: &[u16]) -> Option<&CVec<R::E>> {
        self.ops.get(t.len()).and_then(|m| m.get(t))
    }

    fn basis_vec(&self, i: u16) -> CVec<R::E> {
        let mut v = CVec::new();
        v.insert(i as usize, self.ring.one());
        v
    }

    /// `m_k(v_1, …, v_k)` extended multilinearly: a coefficient `λ_j` moves to
    /// the front with sign `|λ_j|(1 + Σ_{i<j}(deg e_i + 1))`. `m_1` also carries
    /// the coefficient differential, `m_1(λe) ∋ d(λ)e`.
    pub fn apply(&self, inputs: &[CVec<R::E>]) -> CVec<R::E> {
        let ring = &self.ring;
        let k = inputs.len();
        let mut out = CVec::new();
        if k >= self.ops.len() {
            return out;
        }
        // Split every coefficient into parity parts once.
        let split: Vec<Vec<(usize, R::E, R::E)>> = inputs
            .iter()
            .map(|v| {
                v.iter()
                    .map(|(i, c)| {
                        let (e, o) = ring.parts(c);
                        (*i, e, o)
                    })
                    .collect()
            })
            .collect();
        let table = &self.ops[k];
        let mut idx = vec![0usize; k];
        let mut tup: Tuple = Tuple::from_elem(0, k);
        'outer: loop {
            if (0..k).all(|j| !split[j].is_empty()) {
                for j in 0..k {
                    tup[j] = split[j][idx[j]].0 as u16;
                }
                if let Some(val) = table.get(&tup) {
                    // Sum over parity choices of the coefficients.
                    let mut acc: Vec<(R::E, bool)> = vec![(ring.one(), false)];
                    let mut pre = 0i64;
                    for j in 0..k {
                        let (_, ev, od) = &split[j][idx[j]];
                        let mut next = Vec::with_capacity(acc.len() * 2);
                        for (c, _) in &acc {
                            if !ring.is_zero(ev) {
                                next.push((ring.mul(c, ev), false));
                            }
                            if !ring.is_zero(od) {
                                let t = ring.mul(c, od);
                                next.push((if Parity::of(1 + pre).is_odd() { ring.neg(&t) } else { t }, true));
                            }
                        }
                        acc = next;
                        pre += self.model.deg(tup[j] as usize) + 1;
                    }
                    for (c, _) in acc {
                        for (o, x) in val {
                            let t = ring.mul(&c, x);
                            let e = out.entry(*o).or_insert_with(|| ring.zero());
                            ring.add_assign(e, &t);
                        }
                    }
                }
            }
            if k == 0 {
                break;
            }
            let mut j = k;
            loop {
                if j == 0 {
                    break 'outer;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < split[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
        if k == 1 {
            for (i, c) in &inputs[0] {
                let dc = ring.d(c);
                if !ring.is_zero(&dc) {
                    let e = out.entry(*i).or_insert_with(|| ring.zero());
                    ring.add_assign(e, &dc);
                }
            }
        }
        out.retain(|_, x| !ring.is_zero(x));
        out
    }

    /// `Σ (-1)^{Σ_{j<i1}(deg α_j + 1)} m(α_{<i1}, m(α_mid), α_rest)` on a basis tuple.
    pub fn relation_residual(&self, t: &[u16]) -> CVec<R::E> {
        let ring = &self.ring;
        let k = t.len();
        let mut acc = CVec::new();
        for part in enumerate_partitions(k) {
            let inner = self.apply(&t[part.middle()].iter().map(|&i| self.basis_vec(i)).collect::<Vec<_>>());
            if inner.is_empty() {
                continue;
            }
            let mut ins: Vec<CVec<R::E>> = t[part.first()].iter().map(|&i| self.basis_vec(i)).collect();
            ins.push(inner);
            ins.extend(t[part.last()].iter().map(|&i| self.basis_vec(i)));
            let v = self.apply(&ins);
            let pre: i64 = t[part.first()].iter().map(|&i| self.model.deg(i as usize) + 1).sum();
            let odd = Parity::of(pre).is_odd();
            for (o, x) in v {
                let e = acc.entry(o).or_insert_with(|| ring.zero());
                ring.add_signed(e, &x, odd);
            }
        }
        acc.retain(|_, x| !ring.is_zero(x));
        acc
    }

    pub fn check_ainfty(&self) -> Report {
        let mut r = Report::new("check-ainfty");
        let nb = self.model.len();
        for k in 0..=self.kmax {
            let tuples = all_tuples(&vec![nb; k]);
            r.checked += tuples.len();
            let bad: Vec<(Tuple, String)> = tuples
                .par_iter()
                .filter_map(|t| {
                    let v = self.relation_residual(t);
                    (!cvec_is_zero(&self.ring, &v)).then(|| (t.clone(), fmt_cvec(&self.ring, &v, &|i| self.model.name_of(i).to_string())))
                })
                .collect();
            for (t, v) in bad {
                r.fail("A∞ relation", format!("k={k} {}", self.fmt_tuple(&t)), v);
            }
        }
        r.finish()
    }

    pub fn fmt_tuple(&self, t: &[u16]) -> String {
        let v: Vec<&str> = t.iter().map(|&i| self.model.name_of(i as usize)).collect();
        format!("({})", v.join(","))
    }

    /// `⟨v, e_b⟩` with coefficients kept in front.
    fn pair_with(&self, v: &CVec<R::E>, b: usize) -> R::E {
        let mut s = self.ring.zero();
        for (i, c) in v {
            let g = self.model.pairing(*i, b);
            if !g.is_zero() {
                self.ring.add_assign(&mut s, &self.ring.scale(c, g));
            }
        }
        s
    }

    /// Valuation, pairing antisymmetry, cyclicity, `⟨m_k, 1⟩ = 0` for `k ≠ 1, 2`,
    /// strong unit, and the degree `2 - k` of `m_k`. Coefficient rings with odd
    /// elements need the interval pairing instead; this check pairs coefficients in front.
    pub fn check_cyclic_unital(&self) -> Report {
        let mut r = Report::new("check-cyclic-unital");
        let ring = &self.ring;
        let m = &self.model;
        let nb = m.len();
        let unit = m.unit as u16;
        let names = |i: usize| m.name_of(i).to_string();
        if let Some(m0) = self.op_basis(&[]) {
            r.checked += 1;
            if m0.values().any(|c| !ring.in_ideal(c)) {
                r.fail("ν(m_0) > 0", "m_0", fmt_cvec(ring, m0, &names));
            }
        }
        for a in 0..nb {
            for b in 0..nb {
                r.checked += 1;
                let s = Parity::of((m.deg(a) + 1) * (m.deg(b) + 1));
                let v = m.pairing(a, b) + s.apply(m.pairing(b, a).clone());
                if !v.is_zero() {
                    r.fail("pairing antisymmetry", format!("({},{})", m.name_of(a), m.name_of(b)), crate::rational::fmt_q(&v));
                }
            }
        }
        for k in 0..self.ops.len() {
            for (t, v) in &self.ops[k] {
                r.checked += 1;
                let loc = format!("m_{k}{}", self.fmt_tuple(t));
                // Degree 2 - k in C.
                let ideg: i64 = t.iter().map(|&i| m.deg(i as usize)).sum::<i64>() + 2 - k as i64;
                for (o, c) in v {
                    if let Some(g) = ring.grade(c) {
                        if g + m.deg(*o) != ideg {
                            r.fail("degree", loc.clone(), format!("output {} has total degree {}", m.name_of(*o), g + m.deg(*o)));
                        }
                    } else {
                        r.fail("degree", loc.clone(), format!("inhomogeneous coefficient of {}", m.name_of(*o)));
                    }
                }
                // Strong unit.
                if let Some(p) = t.iter().position(|&i| i == unit) {
                    let expected: Option<(usize, Parity)> = match (k, p) {
                        (2, 0) => Some((t[1] as usize, Parity::EVEN)),
                        (2, _) => Some((t[0] as usize, Parity::of(m.deg(t[0] as usize)))),
                        _ => None,
                    };
                    let ok = match expected {
                        None => false,
                        Some((o, s)) => {
                            v.len() == 1 && v.get(&o).is_some_and(|c| *c == ring.scale(&ring.one(), &s.apply(Q::one())))
                        }
                    };
                    if !ok {
                        r.fail("unit", loc.clone(), fmt_cvec(ring, v, &names));
                    }
                }
                if k != 1 && k != 2 {
                    let p = self.pair_with(v, m.unit);
                    if !ring.is_zero(&p) {
                        r.fail("⟨m_k, 1⟩ = 0", loc.clone(), p.to_string());
                    }
                }
            }
        }
        // Unit laws for m_2 on tuples absent from the table.
        if self.ops.len() > 2 {
            for a in 0..nb as u16 {
                for t in [[unit, a], [a, unit]] {
                    if self.op_basis(&t).is_none() {
                        r.fail("unit", format!("m_2{}", self.fmt_tuple(&t)), "0");
                    }
                }
            }
        }
        // Cyclic symmetry on every pair of a nonzero m_k(α) with a basis element.
        for k in 1..self.ops.len() {
            for (t, v) in &self.ops[k] {
                for last in 0..nb as u16 {
                    let lhs = self.pair_with(v, last as usize);
                    if ring.is_zero(&lhs) {
                        continue;
                    }
                    r.checked += 1;
                    let mut rot: Tuple = Tuple::new();
                    rot.push(last);
                    rot.extend(t[..k - 1].iter().copied());
                    let rhs = self.op_basis(&rot).map(|w| self.pair_with(w, t[k - 1] as usize)).unwrap_or_else(|| ring.zero());
                    let mut degs: Vec<i64> = t.iter().map(|&a| m.deg(a as usize)).collect();
                    degs.push(m.deg(last as usize));
                    let s = crate::signs::cyclic_sign(&degs);
                    let mut diff = lhs.clone();
                    ring.add_signed(&mut diff, &rhs, s.is_even());
                    if !ring.is_zero(&diff) {
                        let mut full = t.clone();
                        full.push(last);
                        r.fail("cyclic", format!("k={k} {}", self.fmt_tuple(&full)), format!("{lhs} vs {}", if s.is_odd() { ring.neg(&rhs) } else { rhs }));
                    }
                }
            }
        }
        r.finish()
    }
}

impl AInftyStructure<NovikovRing> {
    /// Every coefficient with terms of valuation `> e` removed.
    pub fn truncated_to(&self, e: &Q) -> AInftyStructure<NovikovRing> {
        let mut out = self.clone();
        for table in &mut out.ops {
            for v in table.values_mut() {
                for c in v.values_mut() {
                    *c = c.truncate_to(e);
                }
                v.retain(|_, c| !c.is_zero());
            }
            table.retain(|_, v| !v.is_empty());
        }
        out.m_minus1 = out.m_minus1.truncate_to(e);
        out
    }

    /// Applies `f` to every coefficient.
    pub fn map_coefficients(&self, f: &dyn Fn(&RingElement) -> RingElement) -> AInftyStructure<NovikovRing> {
        let mut out = self.clone();
        for table in &mut out.ops {
            for v in table.values_mut() {
                for c in v.values_mut() {
                    *c = f(c);
                }
                v.retain(|_, c| !c.is_zero());
            }
            table.retain(|_, v| !v.is_empty());
        }
        out.m_minus1 = f(&out.m_minus1);
        out
    }
}

/// Bulk parameters for the derivative laws: `γ = t_a·1 + t_b·γ_1 + rest`.
#[derive(Clone, Debug)]
pub struct DerivativeSetup {
    /// Variable multiplying the unit of `X`.
    pub t_unit: usize,
    /// Variable and basis index of `γ_1`, a closed relative degree-2 element.
    pub t_divisor: Option<(usize, usize)>,
}

/// Compares `∂_{t_unit} m_k` with `-δ_{0,k}·1`, `∂_{t_1} m^β_k` with `(∫_β γ_1) m^β_k`,
/// and the reduction modulo `ν > 0` with the dg structure. Derivatives lower
/// valuation by one, so comparisons are made after dropping valuation `> E - 1`.
pub fn check_thm_prop(
    data: &CorrelatorData,
    ctx: &Arc<RingContext>,
    bulk: &[(usize, RingElement)],
    setup: &DerivativeSetup,
    kmax: usize,
) -> Result<Report, DataError> {
    let xm = &data.pair.x;
    // Shape of γ.
    let mut shape = Report::new("shape");
    for (j, c) in bulk {
        let d0 = c.tderiv(setup.t_unit).map_err(|e| DataError::Bulk(e.to_string()))?;
        let want0 = if *j == xm.unit { RingElement::one(ctx) } else { RingElement::zero(ctx) };
        if d0.try_add(&want0.neg()).map_or(true, |x| !x.is_zero()) {
            shape.fail("shape", xm.name_of(*j), "∂γ/∂t_unit is not the unit");
        }
        if let Some((tb, g1)) = setup.t_divisor {
            let d1 = c.tderiv(tb).map_err(|e| DataError::Bulk(e.to_string()))?;
            let want1 = if *j == g1 { RingElement::one(ctx) } else { RingElement::zero(ctx) };
            if d1.try_add(&want1.neg()).map_or(true, |x| !x.is_zero()) {
                shape.fail("shape", xm.name_of(*j), "∂γ/∂t_1 is not γ_1");
            }
        }
    }
    if !shape.is_clean() {
        return Err(DataError::Bulk("γ is not of the form t_0·1 + t_1·γ_1 + (rest independent of t_0, t_1)".into()));
    }
    if let Some((_, g1)) = setup.t_divisor {
        let z2 = data.pair.closed_relative_deg2().map_err(DataError::Bulk)?;
        if !z2.contains(&g1) {
            return Err(DataError::Bulk(format!("{} is not a closed relative degree-2 element", xm.name_of(g1))));
        }
    }
    let m = build_m(data, ctx, bulk, kmax)?;
    let mut r = Report::new("check-properties");
    let lower = ctx.cutoff.clone() - Q::one();
    let lm = &m.model;
    let names = |i: usize| lm.name_of(i).to_string();
    let nb = lm.len();
    let deriv = |c: &RingElement, a: usize| c.tderiv(a).expect("variable index checked").truncate_to(&lower);
    for k in 0..m.ops.len().min(kmax + 1) {
        for t in all_tuples(&vec![nb; k]) {
            let v = m.op_basis(&t).cloned().unwrap_or_default();
            r.checked += 1;
            let loc = format!("m_{k}{}", m.fmt_tuple(&t));
            // ∂_{t_0} m_k = -δ_{0,k}·1.
            let mut d0: CVec<RingElement> = v.iter().map(|(o, c)| (*o, deriv(c, setup.t_unit))).collect();
            if k == 0 {
                let e = d0.entry(lm.unit).or_insert_with(|| RingElement::zero(ctx));
                e.add_scaled(&RingElement::one(ctx), &Q::one());
            }
            d0.retain(|_, c| !c.is_zero());
            if !d0.is_empty() {
                r.fail("∂_{t_0} m_k = -δ_{0,k}", loc.clone(), fmt_cvec(&m.ring, &d0, &names));
            }
            // ∂_{t_1} m^β_k = (∫_β γ_1) m^β_k, for every β.
            if let Some((tb, g1)) = setup.t_divisor {
                for beta in data.lattice.elements_up_to(&ctx.cutoff) {
                    let p = data.pair.period(&beta, g1);
                    let mut diff: CVec<RingElement> = CVec::new();
                    for (o, c) in &v {
                        let cb = c.beta_component(&beta);
                        let mut x = deriv(&cb, tb);
                        x.add_scaled(&cb.truncate_to(&lower), &-p.clone());
                        if !x.is_zero() {
                            diff.insert(*o, x);
                        }
                    }
                    if !diff.is_empty() {
                        r.fail("∂_{t_1} m^β_k = (∫_β γ_1) m^β_k", format!("{loc} β={beta:?}"), fmt_cvec(&m.ring, &diff, &names));
                    }
                }
            }
            // Reduction modulo ν > 0.
            let mut red: CVec<RingElement> = v.iter().map(|(o, c)| (*o, c.reduce_mod_ideal())).collect();
            red.retain(|_, c| !c.is_zero());
            let mut expect: CVec<RingElement> = CVec::new();
            match k {
                1 => {
                    for (o, c) in lm.d_col(t[0] as usize) {
                        expect.insert(*o, RingElement::constant(ctx, c.clone()));
                    }
                }
                2 => {
                    let s = Parity::of(lm.deg(t[0] as usize));
                    for (o, c) in lm.mul_basis(t[0] as usize, t[1] as usize) {
                        expect.insert(*o, RingElement::constant(ctx, s.apply(c.clone())));
                    }
                }
                _ => {}
            }
            let same = red.len() == expect.len()
                && red.iter().all(|(o, c)| expect.get(o).is_some_and(|e| c.try_add(&e.neg()).is_ok_and(|x| x.is_zero())));
            if !same {
                r.fail("reduction mod 𝓘_R", loc, format!("{} vs {}", fmt_cvec(&m.ring, &red, &names), fmt_cvec(&m.ring, &expect, &names)));
            }
        }
    }
    Ok(r.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgmodel::standard;
    use crate::novikov::DegreeLattice;
    use crate::qops::Bounds;
    use crate::rational::q;

    fn energy_zero_build(pair: crate::dgmodel::RelativePairModel, kmax: usize) -> AInftyStructure<NovikovRing> {
        let lat = DegreeLattice::single(q(1), 2).unwrap();
        let data = CorrelatorData::new(Arc::new(pair), lat.clone(), Bounds { energy: q(2), kmax, lmax: 2 });
        let ctx = RingContext::new(lat, vec![], q(2)).unwrap();
        build_m(&data, &ctx, &[], kmax).unwrap()
    }

    #[test]
    fn energy_zero_structures_are_cyclic_unital_ainfty() {
        for pair in [standard::circle_in_sphere(&[q(1)]), standard::torus_pair(&[q(1)])] {
            let m = energy_zero_build(pair, 4);
            assert!(m.ops[0].is_empty());
            assert!(m.ops[3].is_empty() && m.ops[4].is_empty());
            let r = m.check_ainfty();
            assert!(r.is_clean(), "{r}");
            let r = m.check_cyclic_unital();
            assert!(r.is_clean(), "{r}");
        }
    }

    #[test]
    fn mutated_product_breaks_associativity() {
        let mut m = energy_zero_build(standard::torus_pair(&[q(1)]), 3);
        let t: Tuple = [1u16, 0].into_iter().collect();
        let e = m.ops[2].get_mut(&t).unwrap();
        for c in e.values_mut() {
            *c = c.scale(&q(2));
        }
        let r = m.check_ainfty();
        assert!(r.failures.iter().any(|f| f.location.starts_with("k=3")), "{r}");
    }
}
