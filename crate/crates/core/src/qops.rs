//! Correlator data, the operators `q`, `q_{-1}`, `q_∅`, their relations and
//! axioms, and the construction of `m^γ`.
//!
//! Disk tensors store push-forward values `P`; evaluation returns
//! `q = (-1)^ε P`. Energy-zero tensors are never stored: they are pinned.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;
use smallvec::SmallVec;
use thiserror::Error;

use crate::ainfty::AInftyStructure;
use crate::coeff::{CVec, CoeffRing, NovikovRing};
use crate::dgmodel::{svec_to_dense, RelativePairModel, SVec};
use crate::novikov::{Beta, DegreeLattice, RingContext, RingElement};
use crate::rational::{fmt_q, inv_factorial, q, qr, Q};
use crate::report::Report;
use crate::signs::{enumerate_partitions, enumerate_splits, iota, koszul_sign, Parity, Partition3, SplitIJ};

/// Basis-index tuple: boundary inputs followed by interior inputs.
pub type Tuple = SmallVec<[u16; 8]>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotKey {
    pub beta: Beta,
    pub k: i64,
    pub l: usize,
}

impl SlotKey {
    pub fn new(beta: &[u32], k: i64, l: usize) -> SlotKey {
        SlotKey { beta: beta.to_vec(), k, l }
    }
    pub fn nalpha(&self) -> usize {
        self.k.max(0) as usize
    }
}

impl std::fmt::Display for SlotKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "β={:?} k={} l={}", self.beta, self.k, self.l)
    }
}

/// Sparse tensor: tuple → output vector (over `L` for disks, `X` for spheres,
/// a single index 0 for scalar-valued `q_{-1}`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tensor {
    pub entries: BTreeMap<Tuple, SVec>,
}

impl Tensor {
    pub fn get(&self, t: &[u16]) -> Option<&SVec> {
        self.entries.get(t)
    }
    pub fn insert(&mut self, t: Tuple, v: SVec) {
        if v.is_empty() {
            self.entries.remove(&t);
        } else {
            self.entries.insert(t, v);
        }
    }
    pub fn nnz(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }
}

/// Truncation box: relations are imposed on `(β,k,l)` with `ω(β)+l ≤ E`, `k ≤ K_max`, `l ≤ L_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub energy: Q,
    pub kmax: usize,
    pub lmax: usize,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("tensor {0} has a tuple of the wrong length")]
    TupleLength(SlotKey),
    #[error("tensor {0} has an index out of range")]
    IndexRange(SlotKey),
    #[error("bulk deformation: {0}")]
    Bulk(String),
}

#[derive(Clone, Debug)]
pub struct CorrelatorData {
    pub pair: Arc<RelativePairModel>,
    pub lattice: DegreeLattice,
    pub bounds: Bounds,
    pub disks: BTreeMap<SlotKey, Tensor>,
    /// Sphere channel keyed by `(β, l)`; `None` when the bundle has none.
    pub spheres: Option<BTreeMap<(Beta, usize), Tensor>>,
    /// Sign in front of `∫_L i* q_∅` in the `q_{-1}` relation.
    pub gw_sign: i64,
}

/// Whether `(k, l)` is one of the three energy-zero tensors that are not identically zero.
pub fn pinned_nonzero(k: i64, l: usize) -> bool {
    matches!((k, l), (1, 0) | (2, 0) | (0, 1))
}

pub(crate) fn fmt_tuple(names: &dyn Fn(bool, usize) -> String, t: &[u16], k: usize) -> String {
    let a: Vec<String> = t[..k].iter().map(|&i| names(false, i as usize)).collect();
    let g: Vec<String> = t[k..].iter().map(|&i| names(true, i as usize)).collect();
    format!("({};{})", a.join(","), g.join(","))
}

/// All tuples in `sizes[0] × sizes[1] × …`, lexicographic.
pub fn all_tuples(sizes: &[usize]) -> Vec<Tuple> {
    let mut out: Vec<Tuple> = vec![Tuple::new()];
    for &s in sizes {
        let mut next = Vec::with_capacity(out.len() * s);
        for t in &out {
            for i in 0..s {
                let mut t2 = t.clone();
                t2.push(i as u16);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

impl CorrelatorData {
    pub fn new(pair: Arc<RelativePairModel>, lattice: DegreeLattice, bounds: Bounds) -> CorrelatorData {
        CorrelatorData { pair, lattice, bounds, disks: BTreeMap::new(), spheres: None, gw_sign: 1 }
    }

    pub fn n(&self) -> i64 {
        self.pair.l.n
    }

    pub fn is_zero_beta(beta: &[u32]) -> bool {
        beta.iter().all(|&e| e == 0)
    }

    /// Whether `q^β_{k,l}` can be nonzero.
    pub fn slot_live(&self, beta: &[u32], k: i64, l: usize) -> bool {
        if Self::is_zero_beta(beta) {
            k >= 0 && pinned_nonzero(k, l)
        } else {
            self.disks.get(&SlotKey { beta: beta.to_vec(), k, l }).is_some_and(|t| !t.entries.is_empty())
        }
    }

    /// Expected output degree of `q^β_{k,l}` for `k ≥ 0`; for `k = -1` the
    /// value `Σ|γ| - (n + μ + 2l - 3)`, which must be zero for a nonzero value.
    pub fn output_degree(&self, beta: &[u32], k: i64, adeg: i64, gdeg: i64, l: usize) -> i64 {
        let mu = self.lattice.mu(beta);
        if k >= 0 {
            adeg + gdeg - mu - k - 2 * l as i64 + 2
        } else {
            gdeg - (self.n() + mu + 2 * l as i64 - 3)
        }
    }

    fn ldeg(&self, i: u16) -> i64 {
        self.pair.l.deg(i as usize)
    }

    fn xdeg(&self, i: u16) -> i64 {
        self.pair.x.deg(i as usize)
    }

    /// `ε(α;γ)` with the convention `k = -1` for the scalar operators.
    pub fn eps(&self, k: i64, alphas: &[u16], gammas: &[u16]) -> Parity {
        let a: i64 = alphas.iter().enumerate().map(|(j, &x)| (j as i64 + 1) * (self.ldeg(x) + 1)).sum();
        let g: i64 = gammas.iter().map(|&x| self.xdeg(x)).sum();
        Parity::of(a + g + k * self.n() + 1)
    }

    fn pinned(&self, k: i64, alphas: &[u16], gammas: &[u16]) -> SVec {
        let l = &self.pair.l;
        match (k, gammas.len()) {
            (1, 0) => l.d_col(alphas[0] as usize).clone(),
            (2, 0) => {
                let s = Parity::of(l.deg(alphas[0] as usize));
                l.mul_basis(alphas[0] as usize, alphas[1] as usize).iter().map(|(i, c)| (*i, s.apply(c.clone()))).collect()
            }
            (0, 1) => {
                let s = Parity::of(self.xdeg(gammas[0]) + 1);
                self.pair.restrict_basis(gammas[0] as usize).into_iter().map(|(i, c)| (i, s.apply(c))).collect()
            }
            _ => SVec::new(),
        }
    }

    /// `q^β_{k,l}(e_α; e_γ)` for `k ≥ 0` on basis inputs.
    pub fn q_basis(&self, beta: &[u32], alphas: &[u16], gammas: &[u16]) -> SVec {
        let k = alphas.len() as i64;
        if Self::is_zero_beta(beta) {
            return self.pinned(k, alphas, gammas);
        }
        let key = SlotKey { beta: beta.to_vec(), k, l: gammas.len() };
        let Some(t) = self.disks.get(&key) else { return SVec::new() };
        let tup: Tuple = alphas.iter().chain(gammas).copied().collect();
        match t.get(&tup) {
            None => SVec::new(),
            Some(v) => {
                let s = self.eps(k, alphas, gammas);
                v.iter().map(|(i, c)| (*i, s.apply(c.clone()))).collect()
            }
        }
    }

    /// `q^β_{-1,l}(e_γ)`.
    pub fn qm1_basis(&self, beta: &[u32], gammas: &[u16]) -> Q {
        if Self::is_zero_beta(beta) {
            return Q::zero();
        }
        let key = SlotKey { beta: beta.to_vec(), k: -1, l: gammas.len() };
        let Some(t) = self.disks.get(&key) else { return Q::zero() };
        match t.get(gammas) {
            None => Q::zero(),
            Some(v) => self.eps(-1, &[], gammas).apply(v.first().map(|x| x.1.clone()).unwrap_or_default()),
        }
    }

    /// `q^β_{∅,l}(e_γ)` (no sign dressing).
    pub fn sphere_basis(&self, beta: &[u32], gammas: &[u16]) -> SVec {
        let l = gammas.len();
        if Self::is_zero_beta(beta) && l <= 1 {
            return SVec::new();
        }
        self.spheres
            .as_ref()
            .and_then(|s| s.get(&(beta.to_vec(), l)))
            .and_then(|t| t.get(gammas))
            .cloned()
            .unwrap_or_default()
    }

    /// Multilinear `q` with one vector-valued boundary slot at `pos`.
    fn q_with_vector(&self, beta: &[u32], pre: &[u16], v: &SVec, post: &[u16], gammas: &[u16], acc: &mut [Q], c: &Q) {
        let mut buf: Tuple = pre.iter().copied().collect();
        buf.push(0);
        buf.extend(post.iter().copied());
        let pos = pre.len();
        for (i, x) in v {
            buf[pos] = *i as u16;
            let w = self.q_basis(beta, &buf, gammas);
            if w.is_empty() {
                continue;
            }
            let f = x * c;
            for (o, y) in w {
                acc[o] += &f * y;
            }
        }
    }

    fn names(&self) -> impl Fn(bool, usize) -> String + '_ {
        move |interior: bool, i: usize| {
            if interior {
                self.pair.x.name_of(i).to_string()
            } else {
                self.pair.l.name_of(i).to_string()
            }
        }
    }

    /// `(β, k, l)` at which relations are imposed, lexicographic.
    pub fn relation_slots(&self) -> Vec<SlotKey> {
        let mut out = Vec::new();
        for beta in self.lattice.elements_up_to(&self.bounds.energy) {
            let w = self.lattice.omega(&beta);
            for l in 0..=self.bounds.lmax {
                if w.clone() + q(l as i64) > self.bounds.energy {
                    break;
                }
                for k in -1..=self.bounds.kmax as i64 {
                    out.push(SlotKey { beta: beta.clone(), k, l });
                }
            }
        }
        out
    }

    /// Residual of the q-relation at `(β, k, l)`, `k ≥ 0`, on one basis tuple.
    pub fn relation_residual(&self, beta: &[u32], k: usize, alphas: &[u16], gammas: &[u16], cache: &Combinatorics) -> Vec<Q> {
        let l = gammas.len();
        let nl = self.pair.l.len();
        let mut acc = vec![Q::zero(); nl];
        let adegs: Vec<i64> = alphas.iter().map(|&a| self.ldeg(a)).collect();
        let gdegs: Vec<i64> = gammas.iter().map(|&g| self.xdeg(g)).collect();
        // Interior differential terms.
        let mut pre = 0i64;
        let mut g2: Tuple = gammas.iter().copied().collect();
        for j in 0..l {
            let s = Parity::of(pre);
            for (c, x) in self.pair.x.d_col(gammas[j] as usize) {
                g2[j] = *c as u16;
                for (o, y) in self.q_basis(beta, alphas, &g2) {
                    acc[o] += s.apply(x * y);
                }
            }
            g2[j] = gammas[j];
            pre += gdegs[j];
        }
        for (b1, b2) in self.lattice.splittings(beta) {
            for part in cache.partitions(k) {
                let k2 = part.i2 as i64;
                let k1 = (part.i1 + part.i3() + 1) as i64;
                for split in cache.splits(l) {
                    if !self.slot_live(&b2, k2, split.j.len()) || !self.slot_live(&b1, k1, split.i.len()) {
                        continue;
                    }
                    let gj: Tuple = split.j.iter().map(|&j| gammas[j]).collect();
                    let inner = self.q_basis(&b2, &alphas[part.middle()], &gj);
                    if inner.is_empty() {
                        continue;
                    }
                    let gi: Tuple = split.i.iter().map(|&i| gammas[i]).collect();
                    let s = iota(&adegs, &gdegs, part, split);
                    self.q_with_vector(&b1, &alphas[part.first()], &inner, &alphas[part.last()], &gi, &mut acc, &s.apply(Q::one()));
                }
            }
        }
        acc
    }

    /// The pairing-and-sphere part of the `q_{-1}` relation, without the interior differential terms.
    pub fn qm1_obstruction(&self, beta: &[u32], gammas: &[u16], cache: &Combinatorics) -> Q {
        let mut acc = self.qm1_pairing_part(beta, gammas, cache);
        if self.spheres.is_some() {
            acc += q(self.gw_sign) * self.sphere_integral(beta, gammas);
        }
        acc
    }

    /// `∫_L i* q_∅(γ)`.
    pub fn sphere_integral(&self, beta: &[u32], gammas: &[u16]) -> Q {
        let v = self.sphere_basis(beta, gammas);
        let r = self.pair.restrict(&svec_to_dense(&v, self.pair.x.len()));
        self.pair.l.integrate(&r)
    }

    /// `-½ Σ (-1)^{σ + |γ^J|} ⟨q_0(γ^I), q_0(γ^J)⟩` over splittings of `β` and of the interior inputs.
    pub fn qm1_pairing_part(&self, beta: &[u32], gammas: &[u16], cache: &Combinatorics) -> Q {
        let l = gammas.len();
        let gdegs: Vec<i64> = gammas.iter().map(|&g| self.xdeg(g)).collect();
        let lm = &self.pair.l;
        let mut acc = Q::zero();
        for (b1, b2) in self.lattice.splittings(beta) {
            for split in cache.splits(l) {
                if !self.slot_live(&b1, 0, split.i.len()) || !self.slot_live(&b2, 0, split.j.len()) {
                    continue;
                }
                let gi: Tuple = split.i.iter().map(|&i| gammas[i]).collect();
                let gj: Tuple = split.j.iter().map(|&j| gammas[j]).collect();
                let a = self.q_basis(&b1, &[], &gi);
                if a.is_empty() {
                    continue;
                }
                let b = self.q_basis(&b2, &[], &gj);
                let mut p = Q::zero();
                for (i, x) in &a {
                    for (j, y) in &b {
                        let g = lm.pairing(*i, *j);
                        if !g.is_zero() {
                            p += x * y * g;
                        }
                    }
                }
                let jdeg: i64 = split.j.iter().map(|&j| gdegs[j]).sum();
                let s = koszul_sign(split, &gdegs) + Parity::of(jdeg);
                acc -= s.apply(p) * qr(1, 2);
            }
        }
        acc
    }

    pub fn qm1_relation_residual(&self, beta: &[u32], gammas: &[u16], cache: &Combinatorics) -> Q {
        let mut acc = self.qm1_obstruction(beta, gammas, cache);
        let mut pre = 0i64;
        let mut g2: Tuple = gammas.iter().copied().collect();
        for j in 0..gammas.len() {
            let s = Parity::of(pre);
            for (c, x) in self.pair.x.d_col(gammas[j] as usize) {
                g2[j] = *c as u16;
                acc += s.apply(x * self.qm1_basis(beta, &g2));
            }
            g2[j] = gammas[j];
            pre += self.xdeg(gammas[j]);
        }
        acc
    }

    /// Tuples of `L^k × X^l` on which the relation at `(β,k,l)` can be nonzero by degree.
    pub fn relation_tuples(&self, beta: &[u32], k: i64, l: usize) -> Vec<Tuple> {
        let nl = self.pair.l.len();
        let nx = self.pair.x.len();
        let mut sizes = vec![nl; k.max(0) as usize];
        sizes.extend(std::iter::repeat_n(nx, l));
        let ka = k.max(0) as usize;
        all_tuples(&sizes)
            .into_iter()
            .filter(|t| {
                let adeg: i64 = t[..ka].iter().map(|&a| self.ldeg(a)).sum();
                let gdeg: i64 = t[ka..].iter().map(|&g| self.xdeg(g)).sum();
                let od = self.output_degree(beta, k, adeg, gdeg, l);
                if k >= 0 {
                    // The relation has output degree one more than q.
                    (0..=self.n()).contains(&(od + 1))
                } else {
                    od == -1
                }
            })
            .collect()
    }

    pub fn check_q_relations(&self) -> Report {
        let mut r = Report::new("check-q-relations");
        let cache = Combinatorics::new(self.bounds.kmax + 1, self.bounds.lmax + 1);
        let names = self.names();
        for slot in self.relation_slots() {
            if slot.k < 0 {
                continue;
            }
            let k = slot.k as usize;
            let tuples = self.relation_tuples(&slot.beta, slot.k, slot.l);
            r.checked += tuples.len();
            let bad: Vec<(Tuple, Vec<Q>)> = tuples
                .par_iter()
                .filter_map(|t| {
                    let v = self.relation_residual(&slot.beta, k, &t[..k], &t[k..], &cache);
                    v.iter().any(|x| !x.is_zero()).then(|| (t.clone(), v))
                })
                .collect();
            for (t, v) in bad {
                r.fail(
                    "q-relation",
                    format!("{slot} {}", fmt_tuple(&names, &t, k)),
                    self.pair.l.fmt_dense(&v),
                );
            }
        }
        r.finish()
    }

    pub fn check_q_minus1_relations(&self) -> Report {
        let mut r = Report::new("check-q-minus1-relations");
        if self.spheres.is_none() {
            r.note("no sphere channel: relation skipped");
            return r;
        }
        let cache = Combinatorics::new(1, self.bounds.lmax + 1);
        let names = self.names();
        let mut flags = [true, true];
        for slot in self.relation_slots() {
            if slot.k != -1 {
                continue;
            }
            let tuples = self.relation_tuples(&slot.beta, -1, slot.l);
            r.checked += tuples.len();
            for t in tuples {
                let v = self.qm1_relation_residual(&slot.beta, &t, &cache);
                if !v.is_zero() {
                    r.fail("q_{-1}-relation", format!("{slot} {}", fmt_tuple(&names, &t, 0)), fmt_q(&v));
                }
                let flipped = self.flip_residual(&slot.beta, &t, &v);
                for (fi, f) in [1i64, -1].into_iter().enumerate() {
                    let res = if f == self.gw_sign { &v } else { &flipped };
                    if !res.is_zero() {
                        flags[fi] = false;
                    }
                }
            }
        }
        let works: Vec<&str> =
            [("+1", flags[0]), ("-1", flags[1])].iter().filter(|(_, ok)| *ok).map(|(s, _)| *s).collect();
        r.note(format!(
            "recorded sphere sign {}; flags satisfying the relation: {}",
            if self.gw_sign > 0 { "+1" } else { "-1" },
            if works.is_empty() { "none".to_string() } else { works.join(", ") }
        ));
        r.finish()
    }

    /// Residual under the opposite sphere sign: subtract twice the sphere term.
    fn flip_residual(&self, beta: &[u32], gammas: &[u16], v: &Q) -> Q {
        v - q(2 * self.gw_sign) * self.sphere_integral(beta, gammas)
    }

    /// `d q_∅(γ) = q_∅(d γ)` with `d` acting on tensors by the Koszul rule.
    pub fn check_chain_map(&self) -> Report {
        let mut r = Report::new("check-chain-map");
        let Some(sph) = &self.spheres else {
            r.note("no sphere channel");
            return r;
        };
        let xm = &self.pair.x;
        let nx = xm.len();
        let names = self.names();
        let keys: BTreeSet<(Beta, usize)> = sph.keys().cloned().collect();
        for (beta, l) in keys {
            for t in all_tuples(&vec![nx; l]) {
                r.checked += 1;
                let v = svec_to_dense(&self.sphere_basis(&beta, &t), nx);
                let mut acc = xm.d.apply(&v);
                let mut pre = 0;
                let mut g2 = t.clone();
                for j in 0..l {
                    let s = Parity::of(pre);
                    for (c, x) in xm.d_col(t[j] as usize) {
                        g2[j] = *c as u16;
                        for (o, y) in self.sphere_basis(&beta, &g2) {
                            acc[o] -= s.apply(x * y);
                        }
                    }
                    g2[j] = t[j];
                    pre += xm.deg(t[j] as usize);
                }
                if acc.iter().any(|x| !x.is_zero()) {
                    r.fail(
                        "chain map",
                        format!("β={beta:?} l={l} {}", fmt_tuple(&names, &t, 0)),
                        xm.fmt_dense(&acc),
                    );
                }
            }
        }
        r.finish()
    }

    /// Degree law and index ranges of every stored entry, and absence of energy-zero tensors.
    pub fn validate(&self) -> Report {
        let mut r = Report::new("validate-data");
        let names = self.names();
        let (nl, nx) = (self.pair.l.len(), self.pair.x.len());
        for (key, t) in &self.disks {
            let ka = key.nalpha();
            if key.beta.len() != self.lattice.rank() {
                r.fail("lattice rank", key.to_string(), "β has the wrong length");
                continue;
            }
            if Self::is_zero_beta(&key.beta) && !t.entries.is_empty() {
                r.fail("energy zero", key.to_string(), "β₀ tensors are pinned and may not be stored");
            }
            for (tup, v) in &t.entries {
                r.checked += 1;
                if tup.len() != ka + key.l {
                    r.fail("tuple length", key.to_string(), format!("{:?}", tup));
                    continue;
                }
                if tup[..ka].iter().any(|&a| a as usize >= nl) || tup[ka..].iter().any(|&g| g as usize >= nx) {
                    r.fail("index range", key.to_string(), format!("{:?}", tup));
                    continue;
                }
                let adeg: i64 = tup[..ka].iter().map(|&a| self.ldeg(a)).sum();
                let gdeg: i64 = tup[ka..].iter().map(|&g| self.xdeg(g)).sum();
                let od = self.output_degree(&key.beta, key.k, adeg, gdeg, key.l);
                for (o, _) in v {
                    let ok = if key.k >= 0 { *o < nl && self.pair.l.deg(*o) == od } else { *o == 0 && od == 0 };
                    if !ok {
                        r.fail("degree law", format!("{key} {}", fmt_tuple(&names, tup, ka)), format!("output index {o}"));
                    }
                }
            }
        }
        if let Some(s) = &self.spheres {
            for ((beta, l), t) in s {
                for (tup, v) in &t.entries {
                    r.checked += 1;
                    let gdeg: i64 = tup.iter().map(|&g| self.xdeg(g)).sum();
                    let od = gdeg - self.lattice.mu(beta) - 2 * *l as i64 + 4;
                    if Self::is_zero_beta(beta) && *l <= 1 {
                        r.fail("energy zero", format!("sphere β={beta:?} l={l}"), "pinned to zero");
                    }
                    for (o, _) in v {
                        if *o >= nx || self.pair.x.deg(*o) != od {
                            r.fail("degree law", format!("sphere β={beta:?} l={l} {:?}", tup), format!("output index {o}"));
                        }
                    }
                }
            }
        }
        r.finish()
    }

    /// Direct tensor-level axioms: unit, fundamental class, divisor, energy zero,
    /// top degree, cyclic symmetry and Koszul symmetry in the interior slots of disk and sphere tensors.
    pub fn check_axioms_on_data(&self) -> Report {
        let mut r = Report::new("check-axioms");
        r.merge(self.validate());
        let names = self.names();
        let lm = &self.pair.l;
        let xm = &self.pair.x;
        let unit_l = lm.unit as u16;
        let unit_x = xm.unit as u16;
        let z2: Vec<u16> = match self.pair.closed_relative_deg2() {
            Ok(v) => v.into_iter().map(|x| x as u16).collect(),
            Err(e) => {
                r.note(format!("divisor axiom checked on basis elements only: {e}"));
                (0..xm.len())
                    .filter(|&j| xm.deg(j) == 2 && xm.d_col(j).is_empty() && self.pair.restrict_basis(j).is_empty())
                    .map(|j| j as u16)
                    .collect()
            }
        };
        for (key, t) in &self.disks {
            if Self::is_zero_beta(&key.beta) {
                continue;
            }
            let ka = key.nalpha();
            let loc = |tup: &[u16]| format!("{key} {}", fmt_tuple(&names, tup, ka));
            for (tup, v) in &t.entries {
                r.checked += 1;
                if tup[..ka].contains(&unit_l) {
                    r.fail("unit", loc(tup), lm.fmt_vec(v));
                }
                if tup[ka..].contains(&unit_x) {
                    r.fail("fundamental class", loc(tup), lm.fmt_vec(v));
                }
                if key.k >= 0 && v.iter().any(|(o, _)| lm.deg(*o) == lm.n) {
                    r.fail("top degree", loc(tup), lm.fmt_vec(v));
                }
                // Koszul symmetry under adjacent transpositions.
                for j in 0..key.l.saturating_sub(1) {
                    let (a, b) = (tup[ka + j], tup[ka + j + 1]);
                    let mut t2 = tup.clone();
                    t2.swap(ka + j, ka + j + 1);
                    let s = Parity::of(self.xdeg(a) * self.xdeg(b));
                    let w = t.get(&t2).cloned().unwrap_or_default();
                    let expect: SVec = v.iter().map(|(o, c)| (*o, s.apply(c.clone()))).collect();
                    if w != expect {
                        r.fail("symmetry", format!("{} ↔ {}", loc(tup), loc(&t2)), "transposed value differs");
                    }
                }
            }
            // Divisor: q(α; z, γ) = P(β,z)·q(α; γ) for z ∈ Z², both directions.
            let lower = SlotKey { beta: key.beta.clone(), k: key.k, l: key.l.wrapping_sub(1) };
            if key.l >= 1 {
                let low = self.disks.get(&lower);
                let mut seen: BTreeSet<Tuple> = BTreeSet::new();
                for tup in t.entries.keys() {
                    if z2.contains(&tup[ka]) {
                        seen.insert(tup.clone());
                    }
                }
                if let Some(low) = low {
                    for tup in low.entries.keys() {
                        for &z in &z2 {
                            let mut t2: Tuple = tup[..ka].iter().copied().collect();
                            t2.push(z);
                            t2.extend(tup[ka..].iter().copied());
                            seen.insert(t2);
                        }
                    }
                }
                for tup in seen {
                    r.checked += 1;
                    let z = tup[ka];
                    let p = self.pair.period(&key.beta, z as usize);
                    let lhs = t.get(&tup).cloned().unwrap_or_default();
                    let rest: Tuple = tup[..ka].iter().chain(&tup[ka + 1..]).copied().collect();
                    let rhs: SVec = low
                        .and_then(|lw| lw.get(&rest))
                        .map(|v| v.iter().map(|(o, c)| (*o, c * &p)).filter(|(_, c)| !c.is_zero()).collect())
                        .unwrap_or_default();
                    if lhs != rhs {
                        r.fail("divisor", loc(&tup), format!("{} vs {}", lm.fmt_vec(&lhs), lm.fmt_vec(&rhs)));
                    }
                }
            }
        }
        if let Some(sph) = &self.spheres {
            for ((beta, l), t) in sph {
                for (tup, v) in &t.entries {
                    r.checked += 1;
                    for j in 0..l.saturating_sub(1) {
                        let mut t2 = tup.clone();
                        t2.swap(j, j + 1);
                        let s = Parity::of(self.xdeg(tup[j]) * self.xdeg(tup[j + 1]));
                        let w = t.get(&t2).cloned().unwrap_or_default();
                        let expect: SVec = v.iter().map(|(o, c)| (*o, s.apply(c.clone()))).collect();
                        if w != expect {
                            r.fail(
                                "symmetry",
                                format!("sphere β={beta:?} l={l} {} ↔ {}", fmt_tuple(&names, tup, 0), fmt_tuple(&names, &t2, 0)),
                                "transposed value differs",
                            );
                        }
                    }
                }
            }
        }
        r.merge(self.check_cyclic_tensors());
        r.finish()
    }

    /// `⟨q(α_1..α_k;γ), α_{k+1}⟩ = (-1)^{cyc} ⟨q(α_{k+1},α_1..α_{k-1};γ), α_k⟩` for `k ≥ 1`.
    pub fn check_cyclic_tensors(&self) -> Report {
        let mut r = Report::new("check-cyclic-tensors");
        let lm = &self.pair.l;
        let nl = lm.len();
        let names = self.names();
        for (key, t) in &self.disks {
            if key.k < 1 || Self::is_zero_beta(&key.beta) {
                continue;
            }
            let k = key.k as usize;
            for (tup, v) in &t.entries {
                let alphas = &tup[..k];
                let gammas = &tup[k..];
                let qv = self.q_basis(&key.beta, alphas, gammas);
                let _ = v;
                for last in 0..nl as u16 {
                    let lhs = pair_with(lm, &qv, last as usize);
                    if lhs.is_zero() {
                        continue;
                    }
                    r.checked += 1;
                    let mut rot: Tuple = Tuple::new();
                    rot.push(last);
                    rot.extend(alphas[..k - 1].iter().copied());
                    let rv = self.q_basis(&key.beta, &rot, gammas);
                    let rhs = pair_with(lm, &rv, alphas[k - 1] as usize);
                    let mut degs: Vec<i64> = alphas.iter().map(|&a| self.ldeg(a)).collect();
                    degs.push(self.ldeg(last));
                    let s = crate::signs::cyclic_sign(&degs);
                    if lhs != s.apply(rhs.clone()) {
                        let mut full: Tuple = tup.clone();
                        full.insert(k, last);
                        r.fail(
                            "cyclic",
                            format!("{key} {}", fmt_tuple(&names, &full, k + 1)),
                            format!("{} vs {}", fmt_q(&lhs), fmt_q(&s.apply(rhs))),
                        );
                    }
                }
            }
        }
        r.finish()
    }

    /// Bulk deformation `γ = Σ c_j e_j` with `e_j` in `X`; checks closedness, degree and `ν(γ) > 0`.
    pub fn validate_bulk(&self, bulk: &[(usize, RingElement)]) -> Result<(), DataError> {
        let xm = &self.pair.x;
        let mut dg = vec![None::<RingElement>; xm.len()];
        for (j, c) in bulk {
            if *j >= xm.len() {
                return Err(DataError::Bulk(format!("index {j} out of range")));
            }
            if !self.pair.is_relative_basis(*j) {
                return Err(DataError::Bulk(format!("{} is not a relative form", xm.name_of(*j))));
            }
            for m in c.terms().keys() {
                let ctx = c.ctx();
                if m.beta(ctx).iter().any(|&e| e > 0) {
                    return Err(DataError::Bulk("coefficients may not involve T".into()));
                }
                if m.grade(ctx) + xm.deg(*j) != 2 {
                    return Err(DataError::Bulk(format!("term of {} has total degree ≠ 2", xm.name_of(*j))));
                }
            }
            if c.valuation().is_some_and(|v| v.is_zero()) {
                return Err(DataError::Bulk("ν(γ) must be positive".into()));
            }
            for (o, x) in xm.d_col(*j) {
                let e = dg[*o].get_or_insert_with(|| RingElement::zero(c.ctx()));
                e.add_scaled(c, x);
            }
        }
        if dg.iter().flatten().any(|e| !e.is_zero()) {
            return Err(DataError::Bulk("γ is not closed".into()));
        }
        Ok(())
    }
}

fn pair_with(lm: &crate::dgmodel::CDGAModel, v: &SVec, b: usize) -> Q {
    let mut s = Q::zero();
    for (i, x) in v {
        let g = lm.pairing(*i, b);
        if !g.is_zero() {
            s += x * g;
        }
    }
    s
}

/// Memoised partitions and splits.
pub struct Combinatorics {
    parts: Vec<Vec<Partition3>>,
    splits: Vec<Vec<SplitIJ>>,
}

impl Combinatorics {
    pub fn new(kmax: usize, lmax: usize) -> Combinatorics {
        Combinatorics {
            parts: (0..=kmax).map(enumerate_partitions).collect(),
            splits: (0..=lmax).map(enumerate_splits).collect(),
        }
    }
    pub fn partitions(&self, k: usize) -> &[Partition3] {
        &self.parts[k]
    }
    pub fn splits(&self, l: usize) -> &[SplitIJ] {
        &self.splits[l]
    }
}

/// Builds `m^γ` for `γ = Σ c_j e_j`, with operations up to arity `kmax + 1`
/// so that the A∞ relations of arity `≤ kmax` are determined.
///
/// `m_k(α) = Σ_{β,l} T^β (1/l!) q^β_{k,l}(α; γ^{⊗l})`, coefficients pulled out
/// of interior slots with the Koszul sign for their odd parts.
pub fn build_structure<R: CoeffRing>(
    data: &CorrelatorData,
    ring: R,
    bulk: &[(usize, R::E)],
    tbeta: &dyn Fn(&[u32]) -> R::E,
    kmax: usize,
) -> AInftyStructure<R> {
    let lm = &data.pair.l;
    let xm = &data.pair.x;
    let mut coef: Vec<Option<R::E>> = vec![None; xm.len()];
    for (j, c) in bulk {
        match &mut coef[*j] {
            Some(e) => ring.add_assign(e, c),
            slot @ None => *slot = Some(c.clone()),
        }
    }
    let parts: Vec<Option<(R::E, R::E)>> = coef.iter().map(|c| c.as_ref().map(|c| ring.parts(c))).collect();
    let mut ops: Vec<BTreeMap<Tuple, CVec<R::E>>> = vec![BTreeMap::new(); kmax + 2];
    let mut m_minus1 = ring.zero();
    let one = ring.one();
    let add_to = |table: &mut BTreeMap<Tuple, CVec<R::E>>, key: Tuple, out: usize, c: R::E| {
        if ring.is_zero(&c) {
            return;
        }
        let e = table.entry(key).or_default();
        let slot = e.entry(out).or_insert_with(|| ring.zero());
        ring.add_assign(slot, &c);
    };
    // Energy zero: d, the signed wedge and the restriction.
    {
        for a in 0..lm.len() {
            for (o, c) in lm.d_col(a) {
                add_to(&mut ops[1], SmallVec::from_slice(&[a as u16]), *o, ring.scale(&one, c));
            }
        }
    }
    if kmax >= 1 {
        for a in 0..lm.len() {
            for b in 0..lm.len() {
                let s = Parity::of(lm.deg(a));
                for (o, c) in lm.mul_basis(a, b) {
                    add_to(&mut ops[2], SmallVec::from_slice(&[a as u16, b as u16]), *o, ring.scale(&one, &s.apply(c.clone())));
                }
            }
        }
    }
    for (j, p) in parts.iter().enumerate() {
        let Some((ev, od)) = p else { continue };
        let s = Parity::of(xm.deg(j) + 1);
        for (o, c) in data.pair.restrict_basis(j) {
            let c = s.apply(c);
            add_to(&mut ops[0], Tuple::new(), o, ring.scale(ev, &c));
            // Odd coefficient passes the operation: one sign.
            add_to(&mut ops[0], Tuple::new(), o, ring.scale(od, &-c));
        }
    }
    // Stored tensors.
    for (key, t) in &data.disks {
        if CorrelatorData::is_zero_beta(&key.beta) || key.k > kmax as i64 + 1 {
            continue;
        }
        let ka = key.nalpha();
        let tb = tbeta(&key.beta);
        if ring.is_zero(&tb) {
            continue;
        }
        let fac = ring.scale(&tb, &inv_factorial(key.l));
        for (tup, v) in &t.entries {
            let gammas = &tup[ka..];
            let Some(c) = interior_coefficient(&ring, &parts, gammas, true, |g| xm.deg(g as usize)) else { continue };
            let c = ring.mul(&fac, &c);
            let s = data.eps(key.k, &tup[..ka], gammas);
            for (o, x) in v {
                let val = ring.scale(&c, &s.apply(x.clone()));
                if key.k >= 0 {
                    add_to(&mut ops[ka], tup[..ka].iter().copied().collect(), *o, val);
                } else {
                    ring.add_assign(&mut m_minus1, &val);
                }
            }
        }
    }
    for table in &mut ops {
        table.retain(|_, v| {
            v.retain(|_, x| !ring.is_zero(x));
            !v.is_empty()
        });
    }
    AInftyStructure { ring, model: lm.clone(), ops, m_minus1, kmax }
}

/// `Π_j c(γ_j)` with the Koszul sign of pulling odd parts out past earlier
/// interior inputs and, when `op_odd`, past the operation itself.
pub(crate) fn interior_coefficient<R: CoeffRing>(
    ring: &R,
    parts: &[Option<(R::E, R::E)>],
    gammas: &[u16],
    op_odd: bool,
    deg: impl Fn(u16) -> i64,
) -> Option<R::E> {
    // Accumulate (coefficient, parity of coefficient so far) as a sum over parity choices.
    let mut acc: Vec<(R::E, bool)> = vec![(ring.one(), false)];
    let mut pre = 0i64;
    for &g in gammas {
        let (ev, od) = parts[g as usize].as_ref()?;
        let mut next = Vec::new();
        for (c, par) in &acc {
            if !ring.is_zero(ev) {
                next.push((ring.mul(c, ev), *par));
            }
            if !ring.is_zero(od) {
                let s = Parity::of(op_odd as i64 + pre);
                let t = ring.mul(c, od);
                next.push((if s.is_odd() { ring.neg(&t) } else { t }, !*par));
            }
        }
        acc = next;
        pre += deg(g);
    }
    let mut out = ring.zero();
    for (c, _) in acc {
        ring.add_assign(&mut out, &c);
    }
    (!ring.is_zero(&out)).then_some(out)
}

/// `m^γ` over the Novikov ring.
pub fn build_m(data: &CorrelatorData, ctx: &Arc<RingContext>, bulk: &[(usize, RingElement)], kmax: usize) -> Result<AInftyStructure<NovikovRing>, DataError> {
    data.validate_bulk(bulk)?;
    let ring = NovikovRing { ctx: ctx.clone() };
    let c = ctx.clone();
    let tb = move |b: &[u32]| RingElement::t_beta(&c, b, Q::one());
    Ok(build_structure(data, ring, bulk, &tb, kmax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgmodel::standard;

    pub(crate) fn energy_zero(pair: RelativePairModel, kmax: usize) -> CorrelatorData {
        let lat = DegreeLattice::single(q(1), 2).unwrap();
        CorrelatorData::new(Arc::new(pair), lat, Bounds { energy: q(2), kmax, lmax: 2 })
    }

    #[test]
    fn pinned_values() {
        let d = energy_zero(standard::torus_pair_nonminimal(&[q(1)]), 3);
        let lm = &d.pair.l;
        let u = lm.index_of("u").unwrap() as u16;
        let t1 = lm.index_of("θ1").unwrap() as u16;
        assert_eq!(d.q_basis(&[0], &[u], &[]), vec![(lm.index_of("v").unwrap(), q(1))]);
        let t2 = lm.index_of("θ2").unwrap() as u16;
        assert_eq!(d.q_basis(&[0], &[t1, t2], &[]), vec![(3, q(-1))]);
        let one_x = d.pair.x.unit as u16;
        assert_eq!(d.q_basis(&[0], &[], &[one_x]), vec![(lm.unit, q(-1))]);
        assert!(d.qm1_basis(&[0], &[one_x]).is_zero());
    }

    #[test]
    fn energy_zero_data_satisfies_relations() {
        for pair in [standard::circle_in_sphere(&[q(1)]), standard::torus_pair_nonminimal(&[q(1)])] {
            let d = energy_zero(pair, 4);
            let r = d.check_q_relations();
            assert!(r.is_clean(), "{r}");
            assert!(d.check_axioms_on_data().is_clean());
        }
    }

    #[test]
    fn mutating_the_differential_breaks_relations() {
        let mut pair = standard::torus_pair_nonminimal(&[q(1)]);
        let u = pair.l.index_of("u").unwrap();
        let v = pair.l.index_of("v").unwrap();
        let mut d = pair.l.d.clone();
        d[(v, u)] = q(2);
        pair.l = crate::dgmodel::CDGAModel::new(
            "bad",
            2,
            pair.l.basis.clone(),
            0,
            d,
            (0..pair.l.len())
                .flat_map(|i| (0..pair.l.len()).map(move |j| (i, j)))
                .map(|(i, j)| ((i, j), pair.l.mul_basis(i, j).clone()))
                .collect(),
            pair.l.integral.clone(),
            None,
        )
        .unwrap();
        let data = energy_zero(pair, 2);
        assert!(!data.check_q_relations().is_clean());
    }
}
