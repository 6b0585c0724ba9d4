//! Finite cdga models of `A*(L)` and `A*(X, L)`.
//!
//! A model is a graded basis with a differential, structure constants for the
//! product and an integral. The pairing is `⟨ξ,η⟩ = (-1)^{|η|} ∫ ξ∧η`.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::linalg::{Contraction, Mat};
use crate::rational::{fmt_q, q, Q};
use crate::report::Report;
use crate::signs::Parity;

/// Sparse vector over a model basis, sorted by index, without zeros.
pub type SVec = Vec<(usize, Q)>;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("model {0}: {1}")]
    Shape(String, String),
    #[error("unknown basis element {0:?}")]
    UnknownElement(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisElement {
    pub name: String,
    pub degree: i64,
}

#[derive(Clone, Debug)]
pub struct CDGAModel {
    pub name: String,
    pub n: i64,
    pub basis: Vec<BasisElement>,
    pub unit: usize,
    pub d: Mat,
    prod: Vec<SVec>,
    pub integral: Vec<Q>,
    pub homotopy: Option<Mat>,
    d_cols: Vec<SVec>,
    gram: Mat,
}

pub fn svec_from_dense(v: &[Q]) -> SVec {
    v.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, x)| (i, x.clone())).collect()
}

pub fn svec_to_dense(v: &SVec, n: usize) -> Vec<Q> {
    let mut out = vec![Q::zero(); n];
    for (i, x) in v {
        out[*i] += x;
    }
    out
}

impl CDGAModel {
    /// Products not listed are zero, except that products with the unit default to the identity.
    pub fn new(
        name: &str,
        n: i64,
        basis: Vec<BasisElement>,
        unit: usize,
        d: Mat,
        products: BTreeMap<(usize, usize), SVec>,
        integral: Vec<Q>,
        homotopy: Option<Mat>,
    ) -> Result<CDGAModel, ModelError> {
        let len = basis.len();
        let bad = |s: &str| ModelError::Shape(name.to_string(), s.to_string());
        if unit >= len {
            return Err(bad("unit index out of range"));
        }
        if d.rows() != len || d.cols() != len {
            return Err(bad("differential has the wrong shape"));
        }
        if integral.len() != len {
            return Err(bad("integral has the wrong length"));
        }
        if let Some(h) = &homotopy {
            if h.rows() != len || h.cols() != len {
                return Err(bad("homotopy has the wrong shape"));
            }
        }
        let mut prod = vec![SVec::new(); len * len];
        for i in 0..len {
            prod[unit * len + i] = vec![(i, Q::one())];
            prod[i * len + unit] = vec![(i, Q::one())];
        }
        for ((i, j), v) in products {
            if i >= len || j >= len || v.iter().any(|(k, _)| *k >= len) {
                return Err(bad("product index out of range"));
            }
            let mut dense = vec![Q::zero(); len];
            for (k, x) in v {
                dense[k] += x;
            }
            prod[i * len + j] = svec_from_dense(&dense);
        }
        let d_cols = (0..len).map(|j| svec_from_dense(&d.column(j))).collect();
        let mut m = CDGAModel {
            name: name.to_string(),
            n,
            basis,
            unit,
            d,
            prod,
            integral,
            homotopy,
            d_cols,
            gram: Mat::zeros(len, len),
        };
        let mut g = Mat::zeros(len, len);
        for i in 0..len {
            for j in 0..len {
                g[(i, j)] = m.pairing_raw(i, j);
            }
        }
        m.gram = g;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn deg(&self, i: usize) -> i64 {
        self.basis[i].degree
    }

    pub fn index_of(&self, name: &str) -> Result<usize, ModelError> {
        self.basis.iter().position(|b| b.name == name).ok_or_else(|| ModelError::UnknownElement(name.into()))
    }

    pub fn name_of(&self, i: usize) -> &str {
        &self.basis[i].name
    }

    pub fn d_col(&self, i: usize) -> &SVec {
        &self.d_cols[i]
    }

    pub fn mul_basis(&self, i: usize, j: usize) -> &SVec {
        &self.prod[i * self.len() + j]
    }

    pub fn wedge(&self, a: &[Q], b: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.len()];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                for (k, c) in self.mul_basis(i, j) {
                    out[*k] += x * y * c;
                }
            }
        }
        out
    }

    pub fn integrate(&self, v: &[Q]) -> Q {
        let mut s = Q::zero();
        for (x, w) in v.iter().zip(&self.integral) {
            if !x.is_zero() && !w.is_zero() {
                s += x * w;
            }
        }
        s
    }

    fn pairing_raw(&self, i: usize, j: usize) -> Q {
        let mut s = Q::zero();
        for (k, c) in self.mul_basis(i, j) {
            s += c * &self.integral[*k];
        }
        Parity::of(self.deg(j)).apply(s)
    }

    /// `⟨e_i, e_j⟩ = (-1)^{|e_j|} ∫ e_i e_j`.
    pub fn pairing(&self, i: usize, j: usize) -> &Q {
        &self.gram[(i, j)]
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn degrees(&self) -> Vec<i64> {
        self.basis.iter().map(|b| b.degree).collect()
    }

    /// The contraction onto harmonic representatives: the supplied homotopy when
    /// present (with `Π = 1 - dh - hd`), otherwise one computed from `d`.
    /// `c·name + …` for a sparse vector over this basis.
    pub fn fmt_vec(&self, v: &SVec) -> String {
        if v.is_empty() {
            return "0".into();
        }
        v.iter().map(|(i, x)| format!("{}·{}", fmt_q(x), self.name_of(*i))).collect::<Vec<_>>().join(" + ")
    }

    pub fn fmt_dense(&self, v: &[Q]) -> String {
        self.fmt_vec(&svec_from_dense(v))
    }

    pub fn contraction(&self) -> Contraction {
        match &self.homotopy {
            Some(h) => {
                let pi = Mat::identity(self.len()).sub(&self.d.mul(h)).sub(&h.mul(&self.d));
                Contraction { pi, h: h.clone() }
            }
            None => Contraction::compute(&self.d, &self.degrees()),
        }
    }

    /// Index of the top-degree harmonic element with integral one, if the basis has one.
    pub fn volume_index(&self) -> Option<usize> {
        (0..self.len()).find(|&i| self.deg(i) == self.n && self.integral[i] == Q::one() && self.d_col(i).is_empty())
    }

    pub fn check_model(&self) -> Report {
        let mut r = Report::new(format!("check-model {}", self.name));
        let n = self.len();
        let name = |i: usize| self.name_of(i).to_string();
        for j in 0..n {
            for (i, _) in self.d_col(j) {
                if self.deg(*i) != self.deg(j) + 1 {
                    r.fail("d has degree 1", name(j), format!("component along {}", name(*i)));
                }
            }
        }
        let dd = self.d.mul(&self.d);
        r.checked += 1;
        if !dd.is_zero() {
            r.fail("d² = 0", "d", format!("{dd:?}"));
        }
        for i in 0..n {
            for j in 0..n {
                r.checked += 4;
                for (k, _) in self.mul_basis(i, j) {
                    if self.deg(*k) != self.deg(i) + self.deg(j) {
                        r.fail("product is graded", format!("{}·{}", name(i), name(j)), name(*k));
                    }
                }
                // Graded commutativity.
                let ab = svec_to_dense(self.mul_basis(i, j), n);
                let ba = svec_to_dense(self.mul_basis(j, i), n);
                let s = Parity::of(self.deg(i) * self.deg(j));
                let diff: Vec<Q> = ab.iter().zip(&ba).map(|(x, y)| x - s.apply(y.clone())).collect();
                if diff.iter().any(|x| !x.is_zero()) {
                    r.fail("graded commutativity", format!("{}·{}", name(i), name(j)), self.fmt_dense(&diff));
                }
                // Leibniz: d(ab) = da·b + (-1)^{|a|} a·db.
                let ei = unit_vec(n, i);
                let ej = unit_vec(n, j);
                let lhs = self.d.apply(&ab);
                let mut rhs = self.wedge(&self.d.apply(&ei), &ej);
                let t = self.wedge(&ei, &self.d.apply(&ej));
                let s = Parity::of(self.deg(i));
                for (x, y) in rhs.iter_mut().zip(t) {
                    *x += s.apply(y);
                }
                let diff: Vec<Q> = lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect();
                if diff.iter().any(|x| !x.is_zero()) {
                    r.fail("Leibniz", format!("d({}·{})", name(i), name(j)), self.fmt_dense(&diff));
                }
                for k in 0..n {
                    let ek = unit_vec(n, k);
                    let l = self.wedge(&ab, &ek);
                    let rr = self.wedge(&ei, &self.wedge(&ej, &ek));
                    if l != rr {
                        let diff: Vec<Q> = l.iter().zip(&rr).map(|(x, y)| x - y).collect();
                        r.fail("associativity", format!("{}·{}·{}", name(i), name(j), name(k)), self.fmt_dense(&diff));
                    }
                }
            }
            let u = self.mul_basis(self.unit, i);
            if u != &vec![(i, Q::one())] || self.mul_basis(i, self.unit) != &vec![(i, Q::one())] {
                r.fail("unit", name(i), "1·x ≠ x");
            }
        }
        if !self.d_col(self.unit).is_empty() {
            r.fail("unit is closed", name(self.unit), self.fmt_vec(self.d_col(self.unit)));
        }
        for i in 0..n {
            r.checked += 1;
            if !self.integral[i].is_zero() && self.deg(i) != self.n {
                r.fail("integral supported in top degree", name(i), fmt_q(&self.integral[i]));
            }
            let s = self.integrate(&self.d.column(i));
            if !s.is_zero() {
                r.fail("Stokes", format!("∫d{}", name(i)), fmt_q(&s));
            }
        }
        r.checked += 1;
        if self.gram.rank() != n {
            r.fail("pairing nondegenerate", "gram", format!("rank {} < {}", self.gram.rank(), n));
        }
        if let Some(h) = &self.homotopy {
            for j in 0..n {
                for (i, _) in svec_from_dense(&h.column(j)) {
                    if self.deg(i) != self.deg(j) - 1 {
                        r.fail("h has degree -1", name(j), name(i));
                    }
                }
            }
            let c = self.contraction();
            for (law, m) in c.identity_residuals(&self.d) {
                r.checked += 1;
                if !m.is_zero() {
                    r.fail(format!("homotopy: {law}"), "h", format!("{m:?}"));
                }
            }
        }
        r.finish()
    }
}

fn unit_vec(n: usize, i: usize) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    v[i] = Q::one();
    v
}

pub fn fmt_dense(v: &[Q]) -> String {
    fmt_svec(&svec_from_dense(v))
}

pub fn fmt_svec(v: &SVec) -> String {
    if v.is_empty() {
        return "0".into();
    }
    v.iter().map(|(i, x)| format!("{}·e{}", fmt_q(x), i)).collect::<Vec<_>>().join(" + ")
}

/// The pair `(X, L)`: models of both, the restriction `r: A(X) → A(L)` and
/// per-generator period functionals on `A²(X, L)`.
#[derive(Clone, Debug)]
pub struct RelativePairModel {
    pub l: CDGAModel,
    pub x: CDGAModel,
    /// `r[(i, j)]` is the `e_i ∈ L` coefficient of `r(e_j)` for `e_j ∈ X`.
    pub restriction: Mat,
    /// `periods[g][j] = ∫_{β_g} e_j`, only read on closed relative degree-2 elements.
    pub periods: Vec<Vec<Q>>,
}

impl RelativePairModel {
    pub fn restrict(&self, v: &[Q]) -> Vec<Q> {
        self.restriction.apply(v)
    }

    pub fn restrict_basis(&self, j: usize) -> SVec {
        svec_from_dense(&self.restriction.column(j))
    }

    /// Whether basis element `j` of `X` is relative (constant on `L` in degree 0, vanishing on `L` above).
    pub fn is_relative_basis(&self, j: usize) -> bool {
        let rv = self.restrict_basis(j);
        if self.x.deg(j) == 0 {
            rv.iter().all(|(i, _)| *i == self.l.unit)
        } else {
            rv.is_empty()
        }
    }

    /// Basis elements spanning the closed relative degree-2 forms, or an error
    /// when that space is not spanned by basis elements.
    pub fn closed_relative_deg2(&self) -> Result<Vec<usize>, String> {
        let n = self.x.len();
        let deg2: Vec<usize> = (0..n).filter(|&j| self.x.deg(j) == 2).collect();
        let mut m = Mat::zeros(self.l.len() + n, deg2.len());
        for (c, &j) in deg2.iter().enumerate() {
            for i in 0..self.l.len() {
                m[(i, c)] = self.restriction[(i, j)].clone();
            }
            for i in 0..n {
                m[(self.l.len() + i, c)] = self.x.d[(i, j)].clone();
            }
        }
        let dim = m.kernel().len();
        let picked: Vec<usize> =
            deg2.iter().copied().filter(|&j| self.x.d_col(j).is_empty() && self.restrict_basis(j).is_empty()).collect();
        if picked.len() != dim {
            return Err(format!(
                "closed relative degree-2 forms have dimension {dim} but only {} basis elements lie in it",
                picked.len()
            ));
        }
        Ok(picked)
    }

    /// `∫_β e_j`, additive in `β`.
    pub fn period(&self, beta: &[u32], j: usize) -> Q {
        let mut s = Q::zero();
        for (g, &e) in beta.iter().enumerate() {
            if e > 0 {
                s += &self.periods[g][j] * q(e as i64);
            }
        }
        s
    }

    pub fn check(&self) -> Report {
        let mut r = Report::new(format!("check-model pair ({}, {})", self.x.name, self.l.name));
        r.merge(self.l.check_model());
        r.merge(self.x.check_model());
        if self.x.n != 2 * self.l.n {
            r.fail("dim X = 2 dim L", "pair", format!("{} vs {}", self.x.n, self.l.n));
        }
        let (nl, nx) = (self.l.len(), self.x.len());
        if self.restriction.rows() != nl || self.restriction.cols() != nx {
            r.fail("restriction shape", "r", "wrong shape");
            return r.finish();
        }
        for j in 0..nx {
            for (i, _) in self.restrict_basis(j) {
                if self.l.deg(i) != self.x.deg(j) {
                    r.fail("restriction is graded", self.x.name_of(j).to_string(), self.l.name_of(i).to_string());
                }
            }
        }
        let rd = self.restriction.mul(&self.x.d);
        let dr = self.l.d.mul(&self.restriction);
        r.checked += 1;
        if rd != dr {
            r.fail("restriction is a chain map", "r∘d - d∘r", format!("{:?}", rd.sub(&dr)));
        }
        let ru = self.restrict_basis(self.x.unit);
        if ru != vec![(self.l.unit, Q::one())] {
            r.fail("restriction is unital", "r(1)", self.l.fmt_vec(&ru));
        }
        for a in 0..nx {
            for b in 0..nx {
                r.checked += 1;
                let ab = self.restrict(&svec_to_dense(self.x.mul_basis(a, b), nx));
                let ra = self.restriction.column(a);
                let rb = self.restriction.column(b);
                let prod = self.l.wedge(&ra, &rb);
                if ab != prod {
                    r.fail(
                        "restriction is multiplicative",
                        format!("r({}·{})", self.x.name_of(a), self.x.name_of(b)),
                        self.l.fmt_dense(&ab.iter().zip(&prod).map(|(x, y)| x - y).collect::<Vec<_>>()),
                    );
                }
            }
        }
        match self.closed_relative_deg2() {
            Ok(_) => {}
            Err(e) => r.note(format!("divisor normalisation unavailable: {e}")),
        }
        // Periods vanish on exact relative forms d(y), y relative of degree 1.
        for (g, per) in self.periods.iter().enumerate() {
            if per.len() != nx {
                r.fail("period length", format!("generator {g}"), "wrong length");
                continue;
            }
            for y in 0..nx {
                if self.x.deg(y) == 1 && self.is_relative_basis(y) {
                    let dy = self.x.d.column(y);
                    let v: Q = dy.iter().zip(per).map(|(a, b)| a * b).sum();
                    r.checked += 1;
                    if !v.is_zero() {
                        r.fail("period vanishes on exact forms", format!("β{g}, d{}", self.x.name_of(y)), fmt_q(&v));
                    }
                }
            }
        }
        r.finish()
    }
}

/// Builders for the standard models used by the examples and tests.
pub mod standard {
    use super::*;

    fn el(name: &str, degree: i64) -> BasisElement {
        BasisElement { name: name.into(), degree }
    }

    /// `H*(S¹)`: `1, θ`.
    pub fn circle() -> CDGAModel {
        let basis = vec![el("1", 0), el("θ", 1)];
        CDGAModel::new("S1", 1, basis, 0, Mat::zeros(2, 2), BTreeMap::new(), vec![q(0), q(1)], Some(Mat::zeros(2, 2)))
            .expect("circle model")
    }

    /// `H*(S²)`: `1, σ`.
    pub fn sphere() -> CDGAModel {
        let basis = vec![el("1", 0), el("σ", 2)];
        CDGAModel::new("S2", 2, basis, 0, Mat::zeros(2, 2), BTreeMap::new(), vec![q(0), q(1)], Some(Mat::zeros(2, 2)))
            .expect("sphere model")
    }

    /// `H*(T²)`: `1, θ1, θ2, θ12` with `θ1θ2 = θ12`.
    pub fn torus() -> CDGAModel {
        let basis = vec![el("1", 0), el("θ1", 1), el("θ2", 1), el("θ12", 2)];
        let mut p = BTreeMap::new();
        p.insert((1, 2), vec![(3, q(1))]);
        p.insert((2, 1), vec![(3, q(-1))]);
        CDGAModel::new("T2", 2, basis, 0, Mat::zeros(4, 4), p, vec![q(0), q(0), q(0), q(1)], Some(Mat::zeros(4, 4)))
            .expect("torus model")
    }

    /// Graded tensor product of two models with `(a⊗b)(a'⊗b') = (-1)^{|b||a'|} aa'⊗bb'`.
    /// Basis index of `a_i ⊗ b_j` is `i·|B| + j`.
    pub fn tensor_product(a: &CDGAModel, b: &CDGAModel, name: &str) -> CDGAModel {
        let (na, nb) = (a.len(), b.len());
        let idx = |i: usize, j: usize| i * nb + j;
        let mut basis = Vec::new();
        for i in 0..na {
            for j in 0..nb {
                let nm = match (i == a.unit, j == b.unit) {
                    (true, true) => "1".to_string(),
                    (true, false) => b.name_of(j).to_string(),
                    (false, true) => a.name_of(i).to_string(),
                    (false, false) => format!("{}{}", a.name_of(i), b.name_of(j)),
                };
                basis.push(el(&nm, a.deg(i) + b.deg(j)));
            }
        }
        let n = na * nb;
        let mut d = Mat::zeros(n, n);
        for i in 0..na {
            for j in 0..nb {
                for (k, c) in a.d_col(i) {
                    d[(idx(*k, j), idx(i, j))] += c;
                }
                let s = Parity::of(a.deg(i));
                for (k, c) in b.d_col(j) {
                    d[(idx(i, *k), idx(i, j))] += s.apply(c.clone());
                }
            }
        }
        let mut p = BTreeMap::new();
        for i in 0..na {
            for j in 0..nb {
                for i2 in 0..na {
                    for j2 in 0..nb {
                        let s = Parity::of(b.deg(j) * a.deg(i2));
                        let mut out: BTreeMap<usize, Q> = BTreeMap::new();
                        for (k, c) in a.mul_basis(i, i2) {
                            for (l, e) in b.mul_basis(j, j2) {
                                *out.entry(idx(*k, *l)).or_insert_with(Q::zero) += s.apply(c * e);
                            }
                        }
                        let v: SVec = out.into_iter().filter(|(_, x)| !x.is_zero()).collect();
                        p.insert((idx(i, j), idx(i2, j2)), v);
                    }
                }
            }
        }
        let mut integral = vec![Q::zero(); n];
        for i in 0..na {
            for j in 0..nb {
                integral[idx(i, j)] = &a.integral[i] * &b.integral[j];
            }
        }
        let homotopy = match (&a.homotopy, &b.homotopy) {
            (Some(ha), Some(hb)) if ha.is_zero() && hb.is_zero() => Some(Mat::zeros(n, n)),
            _ => None,
        };
        CDGAModel::new(name, a.n + b.n, basis, idx(a.unit, b.unit), d, p, integral, homotopy).expect("tensor product")
    }

    /// Appends an acyclic block `u (deg p) → v = du`, `u' (deg n-p-1) → v' = du'`
    /// paired by `u·v' = vol`. Requires a volume element and a supplied homotopy,
    /// which is extended by `h(v) = u`, `h(v') = u'`.
    pub fn add_acyclic_pair(m: &CDGAModel, p: i64, names: [&str; 4], name: &str) -> CDGAModel {
        let vol = m.volume_index().expect("model needs a volume element");
        let n0 = m.len();
        let (u, v, u2, v2) = (n0, n0 + 1, n0 + 2, n0 + 3);
        let nn = m.n;
        let mut basis = m.basis.clone();
        basis.push(el(names[0], p));
        basis.push(el(names[1], p + 1));
        basis.push(el(names[2], nn - p - 1));
        basis.push(el(names[3], nn - p));
        let n = n0 + 4;
        let mut d = Mat::zeros(n, n);
        for i in 0..n0 {
            for j in 0..n0 {
                d[(i, j)] = m.d[(i, j)].clone();
            }
        }
        d[(v, u)] = q(1);
        d[(v2, u2)] = q(1);
        let mut prods = BTreeMap::new();
        for i in 0..n0 {
            for j in 0..n0 {
                prods.insert((i, j), m.mul_basis(i, j).clone());
            }
        }
        // u·v' = vol and Leibniz on d(u·u') = 0 gives v·u' = (-1)^{p+1} vol.
        let deg = |i: usize| basis[i].degree;
        let s_uv2 = Parity::EVEN;
        let s_vu2 = Parity::of(p + 1);
        prods.insert((u, v2), vec![(vol, s_uv2.apply(q(1)))]);
        prods.insert((v2, u), vec![(vol, (s_uv2 + Parity::of(deg(u) * deg(v2))).apply(q(1)))]);
        prods.insert((v, u2), vec![(vol, s_vu2.apply(q(1)))]);
        prods.insert((u2, v), vec![(vol, (s_vu2 + Parity::of(deg(v) * deg(u2))).apply(q(1)))]);
        let mut integral = m.integral.clone();
        integral.extend([q(0), q(0), q(0), q(0)]);
        let homotopy = m.homotopy.as_ref().map(|h0| {
            let mut h = Mat::zeros(n, n);
            for i in 0..n0 {
                for j in 0..n0 {
                    h[(i, j)] = h0[(i, j)].clone();
                }
            }
            h[(u, v)] = q(1);
            h[(u2, v2)] = q(1);
            h
        });
        CDGAModel::new(name, nn, basis, m.unit, d, prods, integral, homotopy).expect("acyclic extension")
    }

    /// `T²` with an acyclic block `u, v = du` (degrees 0, 1) and `u', v' = du'` (degrees 1, 2).
    pub fn torus_nonminimal() -> CDGAModel {
        add_acyclic_pair(&torus(), 0, ["u", "v", "u'", "v'"], "T2+W")
    }

    /// Builds the pair from `X = L ⊗ S²` (optionally with an acyclic block in
    /// degrees 1, 2, 2, 3) with `r = id ⊗ (1 ↦ 1, σ ↦ 0)` and the given period of `σ`
    /// for each lattice generator.
    pub fn product_with_sphere(l_for_x: &CDGAModel, l: CDGAModel, x_block: bool, sigma_periods: &[Q]) -> RelativePairModel {
        let s2 = sphere();
        let x0 = tensor_product(l_for_x, &s2, &format!("{}xS2", l_for_x.name));
        let x = if x_block {
            add_acyclic_pair(&x0, 1, ["η", "ζ", "η'", "ζ'"], &format!("{}xS2+W", l_for_x.name))
        } else {
            x0
        };
        let (nl, nx) = (l.len(), x.len());
        let mut r = Mat::zeros(nl, nx);
        for i in 0..l_for_x.len() {
            // a_i ⊗ 1 has index i·2; L's basis begins with that of `l_for_x`.
            r[(i, i * 2)] = q(1);
        }
        let sigma = x.index_of("σ").expect("σ in X");
        let periods = sigma_periods
            .iter()
            .map(|p| {
                let mut v = vec![Q::zero(); nx];
                v[sigma] = p.clone();
                v
            })
            .collect();
        RelativePairModel { l, x, restriction: r, periods }
    }

    /// `H*(S^n)`: `1, vol`.
    pub fn sphere_of_dim(n: i64) -> CDGAModel {
        let basis = vec![el("1", 0), el("vol", n)];
        CDGAModel::new(&format!("S{n}"), n, basis, 0, Mat::zeros(2, 2), BTreeMap::new(), vec![q(0), q(1)], Some(Mat::zeros(2, 2)))
            .expect("sphere model")
    }

    /// `L ⊂ L × S^n` with `n = dim L`, restriction `a⊗1 ↦ a`, `a⊗vol ↦ 0`
    /// and zero periods: the ambient used when an instance has no interior data.
    pub fn product_with_own_sphere(l: &CDGAModel, rank: usize) -> RelativePairModel {
        let x = tensor_product(l, &sphere_of_dim(l.n), &format!("{}xS{}", l.name, l.n));
        let mut r = Mat::zeros(l.len(), x.len());
        for i in 0..l.len() {
            r[(i, i * 2)] = q(1);
        }
        let periods = vec![vec![Q::zero(); x.len()]; rank];
        RelativePairModel { l: l.clone(), x, restriction: r, periods }
    }

    /// The equator `S¹ ⊂ S²` as a pair over the minimal circle model.
    pub fn circle_in_sphere(sigma_periods: &[Q]) -> RelativePairModel {
        let x = sphere();
        let l = circle();
        let mut r = Mat::zeros(2, 2);
        r[(0, 0)] = q(1);
        let periods = sigma_periods.iter().map(|p| vec![q(0), p.clone()]).collect();
        RelativePairModel { l, x, restriction: r, periods }
    }

    /// `T² ⊂ T² × S²` over the minimal torus model.
    pub fn torus_pair(sigma_periods: &[Q]) -> RelativePairModel {
        product_with_sphere(&torus(), torus(), false, sigma_periods)
    }

    /// `T² ⊂ T² × S²` with acyclic blocks on both sides, so that the Hom complexes
    /// have nonzero differentials.
    pub fn torus_pair_nonminimal(sigma_periods: &[Q]) -> RelativePairModel {
        product_with_sphere(&torus(), torus_nonminimal(), true, sigma_periods)
    }
}

#[cfg(test)]
mod tests {
    use super::standard::*;
    use super::*;

    #[test]
    fn standard_models_pass_their_checks() {
        for m in [circle(), sphere(), torus(), torus_nonminimal()] {
            let r = m.check_model();
            assert!(r.is_clean(), "{r}");
        }
        for p in [torus_pair(&[q(1)]), torus_pair_nonminimal(&[q(1)]), circle_in_sphere(&[q(1)])] {
            let r = p.check();
            assert!(r.is_clean(), "{r}");
        }
    }

    #[test]
    fn pairing_symmetry_law() {
        // ⟨ξ,η⟩ = (-1)^{(|ξ|+1)(|η|+1)+1} ⟨η,ξ⟩
        for m in [torus_nonminimal(), torus_pair_nonminimal(&[q(1)]).x] {
            for i in 0..m.len() {
                for j in 0..m.len() {
                    let s = Parity::of((m.deg(i) + 1) * (m.deg(j) + 1) + 1);
                    assert_eq!(m.pairing(i, j).clone(), s.apply(m.pairing(j, i).clone()));
                }
            }
        }
    }

    #[test]
    fn broken_models_are_reported() {
        let mut m = torus();
        m.integral[1] = q(1);
        let r = m.check_model();
        assert!(r.failures.iter().any(|f| f.law == "integral supported in top degree"));
        let mut p = BTreeMap::new();
        p.insert((1, 2), vec![(3, q(1))]);
        p.insert((2, 1), vec![(3, q(1))]);
        let bad = CDGAModel::new(
            "bad",
            2,
            torus().basis.clone(),
            0,
            Mat::zeros(4, 4),
            p,
            vec![q(0), q(0), q(0), q(1)],
            None,
        )
        .unwrap();
        assert!(bad.check_model().failures.iter().any(|f| f.law == "graded commutativity"));
    }

    #[test]
    fn relative_structure_of_the_nonminimal_pair() {
        let p = torus_pair_nonminimal(&[q(1)]);
        let z2 = p.closed_relative_deg2().unwrap();
        let names: Vec<&str> = z2.iter().map(|&j| p.x.name_of(j)).collect();
        assert_eq!(names, vec!["σ", "ζ"]);
        assert_eq!(p.period(&[2], p.x.index_of("σ").unwrap()), q(2));
        assert!(p.is_relative_basis(p.x.unit));
        assert!(!p.is_relative_basis(p.x.index_of("θ1").unwrap()));
    }

    #[test]
    fn computed_contraction_matches_supplied_one_on_cohomology() {
        let m = torus_nonminimal();
        let c = Contraction::compute(&m.d, &m.degrees());
        let rank = |x: &Mat| x.rank();
        assert_eq!(rank(&c.pi), 4);
        assert_eq!(rank(&m.contraction().pi), 4);
    }
}
