//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use ainfty_core::ainfty::AInftyStructure;
use ainfty_core::coeff::{CVec, NovikovRing};
use ainfty_core::dgmodel::{standard, CDGAModel, RelativePairModel};
use ainfty_core::generator::{generate, Generated, GeneratorOptions};
use ainfty_core::novikov::{DegreeLattice, Monomial, RingContext, RingElement};
use ainfty_core::qops::{build_m, Bounds, CorrelatorData, Tuple};
use ainfty_core::rational::{q, Q};
use ainfty_core::report::Report;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The T² instance of the acceptance suite: `T² ⊂ T² × S²` with acyclic blocks,
/// one generator with `ω = 1`, `μ = 2`, `E = 2`.
pub fn t2_pair() -> Arc<RelativePairModel> {
    Arc::new(standard::torus_pair_nonminimal(&[q(1)]))
}

pub fn t2_lattice() -> DegreeLattice {
    DegreeLattice::single(q(1), 2).unwrap()
}

pub fn t2_bounds(kmax: usize) -> Bounds {
    Bounds { energy: q(2), kmax, lmax: 2 }
}

pub fn t2_generate(kmax: usize, opts: &GeneratorOptions) -> Generated {
    generate(t2_pair(), t2_lattice(), t2_bounds(kmax), opts).unwrap_or_else(|e| panic!("generator: {e}"))
}

/// Every data-level checker the command line runs on a correlator bundle.
pub fn data_reports(data: &CorrelatorData) -> Vec<Report> {
    vec![
        data.validate(),
        data.check_q_relations(),
        data.check_q_minus1_relations(),
        data.check_chain_map(),
        data.check_axioms_on_data(),
    ]
}

pub fn nonzero(reports: &[Report]) -> usize {
    reports.iter().map(|r| r.failures.len()).sum()
}

// ---------------------------------------------------------------------------
// Brute-force A∞ oracle.

/// Operation lookup as a dense vector, zero when absent.
fn op_dense(m: &AInftyStructure<NovikovRing>, t: &[u16]) -> Vec<RingElement> {
    let ctx = &m.ring.ctx;
    let mut out = vec![RingElement::zero(ctx); m.model.len()];
    if let Some(v) = m.ops.get(t.len()).and_then(|table| table.get(t)) {
        for (o, c) in v {
            out[*o] = c.clone();
        }
    }
    out
}

/// `Σ_{a ≤ b} (-1)^{Σ_{j<a}(|x_j|+1)} m(x_{<a}, m(x_{a..b}), x_{≥b})` by direct
/// summation over cut points, with every coefficient even.
pub fn oracle_residual(m: &AInftyStructure<NovikovRing>, t: &[u16]) -> CVec<RingElement> {
    let ctx = m.ring.ctx.clone();
    let nb = m.model.len();
    let k = t.len();
    let mut acc = vec![RingElement::zero(&ctx); nb];
    for a in 0..=k {
        for b in a..=k {
            let mut sign = 1i64;
            for j in 0..a {
                if (m.model.deg(t[j] as usize) + 1).rem_euclid(2) == 1 {
                    sign = -sign;
                }
            }
            let inner = op_dense(m, &t[a..b]);
            for (o, c) in inner.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let mut outer: Vec<u16> = t[..a].to_vec();
                outer.push(o as u16);
                outer.extend_from_slice(&t[b..]);
                let w = op_dense(m, &outer);
                for (p, x) in w.iter().enumerate() {
                    if x.is_zero() {
                        continue;
                    }
                    let term = c.try_mul(x).unwrap();
                    acc[p].add_scaled(&term, &q(sign));
                }
            }
        }
    }
    acc.into_iter().enumerate().filter(|(_, c)| !c.is_zero()).collect()
}

fn every_tuple(nb: usize, k: usize) -> Vec<Vec<u16>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t: Vec<u16>| {
                (0..nb as u16).map(move |i| {
                    let mut t2 = t.clone();
                    t2.push(i);
                    t2
                })
            })
            .collect();
    }
    out
}

/// Compares `check_ainfty` with the oracle on every tuple: the residual vectors,
/// the set of failing locations and the number of checked tuples must coincide.
/// Returns the number of nonzero residuals.
pub fn compare_with_oracle(m: &AInftyStructure<NovikovRing>) -> Result<usize, String> {
    let report = m.check_ainfty();
    let mut expected_fail: Vec<String> = Vec::new();
    let mut total = 0usize;
    for k in 0..=m.kmax {
        for t in every_tuple(m.model.len(), k) {
            total += 1;
            let want = oracle_residual(m, &t);
            let got = m.relation_residual(&t);
            if want != got {
                return Err(format!("residual mismatch at {}: oracle {want:?}, kernel {got:?}", m.fmt_tuple(&t)));
            }
            if !want.is_empty() {
                expected_fail.push(format!("k={k} {}", m.fmt_tuple(&t)));
            }
        }
    }
    let mut got_fail: Vec<String> = report.failures.iter().map(|f| f.location.clone()).collect();
    got_fail.sort();
    expected_fail.sort();
    if got_fail != expected_fail {
        return Err(format!("failure sets differ: kernel {} vs oracle {}", got_fail.len(), expected_fail.len()));
    }
    if report.checked != total {
        return Err(format!("checked {} tuples, oracle enumerated {total}", report.checked));
    }
    Ok(expected_fail.len())
}

/// Small models, at most six basis elements.
pub fn small_models() -> Vec<CDGAModel> {
    let circle = standard::circle();
    vec![
        circle.clone(),
        standard::sphere(),
        standard::torus(),
        standard::add_acyclic_pair(&circle, 0, ["u", "v", "u'", "v'"], "S1+W"),
    ]
}

fn random_coefficient(rng: &mut ChaCha8Rng, ctx: &Arc<RingContext>) -> RingElement {
    let mut c = RingElement::zero(ctx);
    for _ in 0..rng.gen_range(1..=2) {
        let e = rng.gen_range(0..=2u32);
        let num = rng.gen_range(-3..=3i64);
        let den = rng.gen_range(1..=3i64);
        if num != 0 {
            c.add_term(Monomial::new(&[e], &[]), Q::new(num.into(), den.into()));
        }
    }
    c
}

/// Instance `i` of the randomized oracle comparison. Even `i` draws sparse random
/// tables; odd `i` starts from a genuine energy-zero structure and perturbs at most
/// one coefficient, so both clean and failing instances occur.
pub fn random_instance(i: u64) -> AInftyStructure<NovikovRing> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a1f_0000 + i);
    let models = small_models();
    let model = models[rng.gen_range(0..models.len())].clone();
    let kmax = rng.gen_range(1..=4usize);
    let lat = t2_lattice();
    let ctx = RingContext::new(lat.clone(), vec![], q(2)).unwrap();
    let nb = model.len();
    if i.is_multiple_of(2) {
        let mut ops: Vec<BTreeMap<Tuple, CVec<RingElement>>> = vec![BTreeMap::new(); kmax + 2];
        for (k, table) in ops.iter_mut().enumerate() {
            let entries = rng.gen_range(0..=4usize);
            for _ in 0..entries {
                let t: Tuple = (0..k).map(|_| rng.gen_range(0..nb) as u16).collect();
                let c = random_coefficient(&mut rng, &ctx);
                if !c.is_zero() {
                    table.entry(t).or_default().insert(rng.gen_range(0..nb), c);
                }
            }
        }
        let m_minus1 = RingElement::zero(&ctx);
        AInftyStructure { ring: NovikovRing { ctx }, model, ops, m_minus1, kmax }
    } else {
        let pair = standard::product_with_own_sphere(&model, 1);
        let data = CorrelatorData::new(Arc::new(pair), lat, Bounds { energy: q(2), kmax, lmax: 1 });
        let mut m = build_m(&data, &ctx, &[], kmax).unwrap();
        if rng.gen_bool(0.5) {
            let k = rng.gen_range(0..=kmax.min(3));
            let t: Tuple = (0..k).map(|_| rng.gen_range(0..nb) as u16).collect();
            let c = random_coefficient(&mut rng, &ctx);
            if !c.is_zero() {
                let slot = m.ops[k].entry(t).or_default().entry(rng.gen_range(0..nb)).or_insert_with(|| RingElement::zero(&ctx));
                slot.add_scaled(&c, &q(1));
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Naive sign evaluator: literal ±1 products and explicit reorderings.

fn pow_minus_one(e: i64) -> i64 {
    let mut s = 1;
    for _ in 0..e.rem_euclid(2) {
        s = -s;
    }
    s
}

/// Sign of bringing a sequence of graded symbols (given by their original positions)
/// back to increasing order by adjacent swaps.
pub fn naive_reorder_sign(mut seq: Vec<usize>, degs: &[i64]) -> i64 {
    let mut s = 1i64;
    let n = seq.len();
    for pass in 0..n {
        for j in 0..n.saturating_sub(pass + 1) {
            if seq[j] > seq[j + 1] {
                s *= pow_minus_one(degs[seq[j]] * degs[seq[j + 1]]);
                seq.swap(j, j + 1);
            }
        }
    }
    s
}

pub fn naive_epsilon(k: i64, alpha: &[i64], gamma: &[i64], n: i64) -> i64 {
    let mut s = -1i64;
    for (j, d) in alpha.iter().enumerate() {
        for _ in 0..=j {
            s *= pow_minus_one(d + 1);
        }
    }
    for g in gamma {
        s *= pow_minus_one(*g);
    }
    for _ in 0..k.abs() {
        s *= pow_minus_one(n);
    }
    s
}

pub fn naive_iota(alpha: &[i64], gamma: &[i64], i1: usize, in_i: &[bool]) -> i64 {
    let mut s = naive_reorder_sign(
        (0..gamma.len()).filter(|&j| in_i[j]).chain((0..gamma.len()).filter(|&j| !in_i[j])).collect(),
        gamma,
    );
    for a in &alpha[..i1] {
        s *= pow_minus_one(a + 1);
        for (j, g) in gamma.iter().enumerate() {
            if !in_i[j] {
                s *= pow_minus_one(g * (a + 1));
            }
        }
    }
    for (j, g) in gamma.iter().enumerate() {
        if in_i[j] {
            s *= pow_minus_one(*g);
        }
    }
    s
}

pub fn naive_delta(k1: i64, k2: i64, i: i64, n: i64) -> i64 {
    let mut s = 1i64;
    for _ in 0..(k1 - i).abs() {
        s *= pow_minus_one(k2);
    }
    s * pow_minus_one(i) * pow_minus_one(n)
}

/// Rotating the last input to the front past the others, in shifted degrees.
pub fn naive_cyclic(degs: &[i64]) -> i64 {
    let k1 = degs.len();
    if k1 == 0 {
        return 1;
    }
    let shifted: Vec<i64> = degs.iter().map(|d| d + 1).collect();
    let mut seq: Vec<usize> = vec![k1 - 1];
    seq.extend(0..k1 - 1);
    naive_reorder_sign(seq, &shifted)
}

/// All degree tuples of length `len` with entries in `0..=max`.
pub fn degree_tuples(len: usize, max: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t: Vec<i64>| {
                (0..=max).map(move |d| {
                    let mut t2 = t.clone();
                    t2.push(d);
                    t2
                })
            })
            .collect();
    }
    out
}

// ---------------------------------------------------------------------------
// Mutation harness.

/// One stored coefficient of the data: a disk or sphere tensor, a tuple and an output index.
#[derive(Clone, Debug)]
pub struct Site {
    pub sphere: bool,
    pub beta: Vec<u32>,
    pub k: i64,
    pub l: usize,
    pub tuple: Tuple,
    pub out: usize,
}

impl Site {
    /// The site with basis names, e.g. `disk k=2 β=[1] l=1 (θ1,u';η)→v`.
    pub fn describe(&self, data: &CorrelatorData) -> String {
        let (l, x) = (&data.pair.l, &data.pair.x);
        let nalpha = if self.sphere { 0 } else { self.k.max(0) as usize };
        let names = |r: &[u16], m: &CDGAModel| r.iter().map(|&i| m.name_of(i as usize).to_string()).collect::<Vec<_>>().join(",");
        let (alpha, gamma) = self.tuple.split_at(nalpha);
        let (kind, out) = if self.sphere {
            ("sphere".to_string(), x.name_of(self.out).to_string())
        } else if self.k < 0 {
            (format!("disk k={}", self.k), "scalar".to_string())
        } else {
            (format!("disk k={}", self.k), l.name_of(self.out).to_string())
        };
        format!("{kind} β={:?} l={} ({};{})→{out}", self.beta, self.l, names(alpha, l), names(gamma, x))
    }
}

pub fn mutation_sites(data: &CorrelatorData) -> Vec<Site> {
    let mut out = Vec::new();
    for (key, t) in &data.disks {
        for (tup, v) in &t.entries {
            for (o, _) in v {
                out.push(Site { sphere: false, beta: key.beta.clone(), k: key.k, l: key.l, tuple: tup.clone(), out: *o });
            }
        }
    }
    if let Some(s) = &data.spheres {
        for ((beta, l), t) in s {
            for (tup, v) in &t.entries {
                for (o, _) in v {
                    out.push(Site { sphere: true, beta: beta.clone(), k: -2, l: *l, tuple: tup.clone(), out: *o });
                }
            }
        }
    }
    out
}

/// Adds `delta` to the coefficient at `site`.
pub fn mutate(data: &CorrelatorData, site: &Site, delta: &Q) -> CorrelatorData {
    let mut d = data.clone();
    let t = if site.sphere {
        d.spheres.as_mut().unwrap().get_mut(&(site.beta.clone(), site.l)).unwrap()
    } else {
        d.disks.get_mut(&ainfty_core::qops::SlotKey::new(&site.beta, site.k, site.l)).unwrap()
    };
    let v = t.entries.get_mut(&site.tuple).unwrap();
    for (o, c) in v.iter_mut() {
        if *o == site.out {
            *c += delta;
        }
    }
    v.retain(|(_, c)| !c.is_zero());
    d
}

/// A coefficient that no checked relation can read: a disk tensor above the arity
/// box whose energy leaves no room for a curvature insertion.
pub fn in_invisible_tail(data: &CorrelatorData, site: &Site) -> bool {
    let min = data.lattice.min_omega().unwrap_or_else(Q::zero);
    !site.sphere && site.k > data.bounds.kmax as i64 && data.lattice.omega(&site.beta) + min > data.bounds.energy
}

/// Cheap checkers first; the relation checks only run when the axioms pass.
pub fn mutation_killed(data: &CorrelatorData) -> bool {
    if !data.check_axioms_on_data().is_clean() || !data.check_chain_map().is_clean() {
        return true;
    }
    !data.check_q_minus1_relations().is_clean() || !data.check_q_relations().is_clean()
}
