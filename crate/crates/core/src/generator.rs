//! Synthesis of admissible correlator data by solving the q-relations slot by slot.
//!
//! At a slot `(β,k,l)` the relation reads `L(x) = -O`, where `x` is the unknown
//! tensor and `O` collects every term built from smaller slots. `L` is the
//! differential of a Hom complex from the tensor product of input complexes to
//! the output complex, and `x = -H(O)` with the tensor-trick homotopy `H`
//! solves it whenever the harmonic part of `O` vanishes.
//!
//! Inputs are taken in reduced complexes: the unit of `L` is dropped from
//! boundary slots, and the unit and the closed relative degree-2 basis
//! elements are dropped from interior slots. Values on dropped inputs are fixed
//! by the unit, fundamental class and divisor axioms.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dgmodel::{fmt_dense, svec_from_dense, CDGAModel, RelativePairModel, SVec};
use crate::linalg::{Contraction, Mat};
use crate::novikov::{Beta, DegreeLattice};
use crate::qops::{all_tuples, Bounds, Combinatorics, CorrelatorData, SlotKey, Tensor, Tuple};
use crate::rational::{inv_factorial, q, Q};
use crate::report::Report;
use crate::signs::{permutation_sign, Parity};

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorOptions {
    pub seed: u64,
    /// Add a random exact term `D(y)` to solutions at slots that no positive-energy composition reads.
    pub gauge: bool,
    /// Add `c·1` to `q^β_{0,0}` where the degree allows it.
    pub curvature_seed: bool,
    /// Average every boundary tensor over cyclic rotations when that keeps the relations.
    pub cyclic: bool,
    /// Impose the divisor axiom on exact closed relative degree-2 basis elements too.
    pub divisor_on_exact: bool,
    /// Produce a sphere channel and solve the `q_{-1}` relations.
    pub sphere: bool,
    pub gw_sign: i64,
    /// Verify `D(O) = 0` at every slot.
    pub check_closedness: bool,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            seed: 1,
            gauge: true,
            curvature_seed: true,
            cyclic: true,
            divisor_on_exact: true,
            sphere: true,
            gw_sign: 1,
            check_closedness: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("slot {slot}: harmonic obstruction on {tuple}: {residue}")]
    Obstruction { slot: SlotKey, tuple: String, residue: String },
    #[error("slot {slot}: obstruction is not closed on {tuple}: {residue}")]
    NotClosed { slot: SlotKey, tuple: String, residue: String },
    #[error("slot {slot}: solution fails the relation on {tuple}: {residue}")]
    Unsolved { slot: SlotKey, tuple: String, residue: String },
    #[error("{0}")]
    Model(String),
}

/// Output of [`generate`]: data, the admissibility report and per-slot notes.
pub struct Generated {
    pub data: CorrelatorData,
    pub report: Report,
    pub order: Vec<SlotKey>,
}

/// A quotient of a model by a subcomplex spanned by basis elements, with its own contraction.
struct Factor {
    /// Global index → local index, `None` for dropped elements.
    local: Vec<Option<usize>>,
    keep: Vec<usize>,
    d: Mat,
    c: Contraction,
    deg: Vec<i64>,
}

impl Factor {
    fn new(m: &CDGAModel, drop: &[usize]) -> Result<Factor, GenError> {
        for &j in drop {
            if m.d_col(j).iter().any(|(i, _)| !drop.contains(i)) {
                return Err(GenError::Model(format!("{} spans no subcomplex with the other dropped elements", m.name_of(j))));
            }
        }
        let keep: Vec<usize> = (0..m.len()).filter(|i| !drop.contains(i)).collect();
        let mut local = vec![None; m.len()];
        for (a, &g) in keep.iter().enumerate() {
            local[g] = Some(a);
        }
        let n = keep.len();
        let mut d = Mat::zeros(n, n);
        for (a, &ga) in keep.iter().enumerate() {
            for (b, &gb) in keep.iter().enumerate() {
                d[(a, b)] = m.d[(ga, gb)].clone();
            }
        }
        let deg: Vec<i64> = keep.iter().map(|&g| m.deg(g)).collect();
        let c = Contraction::compute(&d, &deg);
        Ok(Factor { local, keep, d, c, deg })
    }

    /// `op` applied to a kept basis element, as global indices.
    fn apply(&self, op: &Mat, g: u16) -> Vec<(u16, Q)> {
        let Some(a) = self.local[g as usize] else { return Vec::new() };
        (0..self.keep.len())
            .filter(|&i| !op[(i, a)].is_zero())
            .map(|i| (self.keep[i] as u16, op[(i, a)].clone()))
            .collect()
    }

    fn kept(&self, g: u16) -> bool {
        self.local[g as usize].is_some()
    }

    fn degree(&self, g: u16) -> i64 {
        self.deg[self.local[g as usize].expect("kept element")]
    }
}

/// The tensor product of input factors for one slot, in the order `α_1..α_k, γ_1..γ_l`
/// with Koszul order `γ_1..γ_l, α_1..α_k` and Koszul degrees `|γ|`, `|α| + 1`.
struct Inputs<'a> {
    k: usize,
    l: usize,
    fa: &'a Factor,
    fg: &'a Factor,
}

type Comb = Vec<(Tuple, Q)>;

impl<'a> Inputs<'a> {
    fn factor(&self, pos: usize) -> &'a Factor {
        if pos < self.k {
            self.fa
        } else {
            self.fg
        }
    }

    fn koszul_order(&self) -> Vec<usize> {
        (self.k..self.k + self.l).chain(0..self.k).collect()
    }

    fn kdeg(&self, t: &[u16], pos: usize) -> i64 {
        let d = self.factor(pos).degree(t[pos]);
        if pos < self.k {
            d + 1
        } else {
            d
        }
    }

    fn total_degree(&self, t: &[u16]) -> i64 {
        (0..t.len()).map(|p| self.kdeg(t, p)).sum()
    }

    fn reduced(&self, t: &[u16]) -> bool {
        (0..t.len()).all(|p| self.factor(p).kept(t[p]))
    }

    /// `Σ_i (-1)^{Σ_{r<i} e_r} (1 ⊗ … ⊗ op_i ⊗ …)`, with `pre` applied to earlier factors.
    fn expand(&self, t: &[u16], op: &dyn Fn(&Factor) -> &Mat, pre: Option<&dyn Fn(&Factor) -> &Mat>) -> Comb {
        let ord = self.koszul_order();
        let mut out = Comb::new();
        let mut sign = 0i64;
        for (i, &pos) in ord.iter().enumerate() {
            let mut partial: Comb = vec![(Tuple::from_slice(t), Parity::of(sign).apply(Q::one()))];
            if let Some(pre) = pre {
                for &pp in &ord[..i] {
                    partial = apply_at(&partial, pp, |g| self.factor(pp).apply(pre(self.factor(pp)), g));
                }
            }
            let f = self.factor(pos);
            out.extend(apply_at(&partial, pos, |g| f.apply(op(f), g)));
            sign += self.kdeg(t, pos);
        }
        out
    }

    fn delta(&self, t: &[u16]) -> Comb {
        self.expand(t, &|f| &f.d, None)
    }

    fn homotopy(&self, t: &[u16]) -> Comb {
        self.expand(t, &|f| &f.c.h, Some(&|f| &f.c.pi))
    }

    fn project(&self, t: &[u16]) -> Comb {
        let mut partial: Comb = vec![(Tuple::from_slice(t), Q::one())];
        for pos in 0..t.len() {
            let f = self.factor(pos);
            partial = apply_at(&partial, pos, |g| f.apply(&f.c.pi, g));
        }
        partial
    }
}

fn apply_at(c: &Comb, pos: usize, f: impl Fn(u16) -> Vec<(u16, Q)>) -> Comb {
    let mut out = Comb::new();
    for (t, x) in c {
        for (g, y) in f(t[pos]) {
            let mut t2 = t.clone();
            t2[pos] = g;
            out.push((t2, x * &y));
        }
    }
    out
}

/// Output complex: the boundary model, or the scalars for `k = -1`.
enum Output<'a> {
    Forms(&'a CDGAModel, &'a Contraction),
    Scalar,
}

impl Output<'_> {
    fn len(&self) -> usize {
        match self {
            Output::Forms(m, _) => m.len(),
            Output::Scalar => 1,
        }
    }
    fn d(&self, v: &[Q]) -> Vec<Q> {
        match self {
            Output::Forms(m, _) => m.d.apply(v),
            Output::Scalar => vec![Q::zero()],
        }
    }
    fn h(&self, v: &[Q]) -> Vec<Q> {
        match self {
            Output::Forms(_, c) => c.h.apply(v),
            Output::Scalar => vec![Q::zero()],
        }
    }
    fn pi(&self, v: &[Q]) -> Vec<Q> {
        match self {
            Output::Forms(_, c) => c.pi.apply(v),
            Output::Scalar => v.to_vec(),
        }
    }
}

fn add_into(acc: &mut [Q], v: &[Q], c: &Q) {
    for (a, x) in acc.iter_mut().zip(v) {
        if !x.is_zero() {
            *a += x * c;
        }
    }
}

fn is_zero_vec(v: &[Q]) -> bool {
    v.iter().all(Zero::is_zero)
}

/// The solve order: `(ω(β), k + 2l)` then lexicographic in `(β, k, l)`.
pub fn solve_order(lattice: &DegreeLattice, bounds: &Bounds) -> Vec<SlotKey> {
    let mut out = Vec::new();
    for beta in lattice.elements_up_to(&bounds.energy) {
        if CorrelatorData::is_zero_beta(&beta) {
            continue;
        }
        let w = lattice.omega(&beta);
        for l in 0..=bounds.lmax {
            if w.clone() + q(l as i64) > bounds.energy {
                break;
            }
            for k in -1..=bounds.kmax as i64 {
                out.push(SlotKey { beta: beta.clone(), k, l });
            }
            // The relation at (β, K_max, l + 1) inserts the restriction into q^β_{K_max+1, l};
            // solving that slot keeps the obstructions at the box edge closed.
            if w.clone() + q(l as i64 + 1) <= bounds.energy && l < bounds.lmax {
                out.push(SlotKey { beta: beta.clone(), k: bounds.kmax as i64 + 1, l });
            }
        }
    }
    out.sort_by(|a, b| {
        let ka = (lattice.omega(&a.beta), a.k + 2 * a.l as i64);
        let kb = (lattice.omega(&b.beta), b.k + 2 * b.l as i64);
        ka.cmp(&kb).then_with(|| a.cmp(b))
    });
    out
}

struct Ctx<'a> {
    pair: &'a RelativePairModel,
    fa: Factor,
    fg: Factor,
    /// Closed relative degree-2 basis elements of `X` whose values are fixed by the divisor axiom.
    divisor: Vec<usize>,
    out_contraction: Contraction,
    /// Closed element of `X` with `∫_L r = 1`.
    nu_x: Option<Vec<Q>>,
    cache: Combinatorics,
}

/// Gauge draws that conflict with the axioms at a later slot are redrawn from derived seeds;
/// after `GAUGE_ATTEMPTS` failures the gauge is switched off.
const GAUGE_ATTEMPTS: u64 = 8;

pub fn generate(
    pair: Arc<RelativePairModel>,
    lattice: DegreeLattice,
    bounds: Bounds,
    opts: &GeneratorOptions,
) -> Result<Generated, GenError> {
    if !opts.gauge {
        return generate_once(pair, lattice, bounds, opts, opts.seed);
    }
    // Prefer a clean draw whose operations read a non-closed interior input: only those
    // make pseudo-isotopies between cohomologous bulks move.
    let mut first_clean: Option<(u64, Generated)> = None;
    for attempt in 0..GAUGE_ATTEMPTS {
        let seed = opts.seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let g = generate_once(pair.clone(), lattice.clone(), bounds.clone(), opts, seed)?;
        if g.report.notes.iter().any(|n| n.starts_with("axiom")) {
            continue;
        }
        if primitive_dependence(&g.data) > 0 {
            return Ok(redrawn(g, attempt));
        }
        first_clean.get_or_insert((attempt, g));
    }
    if let Some((attempt, g)) = first_clean {
        return Ok(redrawn(g, attempt));
    }
    let plain = GeneratorOptions { gauge: false, ..opts.clone() };
    let mut g = generate_once(pair, lattice, bounds, &plain, opts.seed)?;
    g.report.note("no gauge draw kept the axioms; generated without a gauge".to_string());
    Ok(g)
}

fn redrawn(mut g: Generated, attempt: u64) -> Generated {
    if attempt > 0 {
        g.report.note(format!("gauge redrawn {attempt} time(s) to keep the axioms"));
    }
    g
}

/// A non-closed interior basis element of odd degree. With even formal variables these are
/// the only elements that can carry the degree-1 primitive of an exact bulk difference.
fn is_primitive(data: &CorrelatorData, g: u16) -> bool {
    let xm = &data.pair.x;
    xm.deg(g as usize) % 2 != 0 && !xm.d_col(g as usize).is_empty()
}

/// Number of stored disk entries with `k ≤ K_max` that read a primitive.
pub fn primitive_dependence(data: &CorrelatorData) -> usize {
    data.disks
        .iter()
        .filter(|(key, _)| key.k <= data.bounds.kmax as i64)
        .map(|(key, t)| t.entries.keys().filter(|tup| tup[key.nalpha()..].iter().any(|&g| is_primitive(data, g))).count())
        .sum()
}

fn generate_once(
    pair: Arc<RelativePairModel>,
    lattice: DegreeLattice,
    bounds: Bounds,
    opts: &GeneratorOptions,
    seed: u64,
) -> Result<Generated, GenError> {
    let pr = pair.check();
    if !pr.is_clean() {
        return Err(GenError::Model(format!("model check failed:\n{pr}")));
    }
    let lm = &pair.l;
    let xm = &pair.x;
    let mut notes = Vec::new();
    let z2 = pair.closed_relative_deg2().map_err(GenError::Model)?;
    let exact = |j: usize| {
        // Exact iff it lies in the image of d.
        let mut cols: Vec<Vec<Q>> = (0..xm.len()).filter(|&i| xm.deg(i) == 1).map(|i| xm.d.column(i)).collect();
        let r0 = if cols.is_empty() { 0 } else { Mat::from_columns(xm.len(), &cols).rank() };
        let mut e = vec![Q::zero(); xm.len()];
        e[j] = Q::one();
        cols.push(e);
        Mat::from_columns(xm.len(), &cols).rank() == r0
    };
    let divisor: Vec<usize> = if opts.divisor_on_exact { z2.clone() } else { z2.iter().copied().filter(|&j| !exact(j)).collect() };
    if divisor.len() < z2.len() {
        notes.push("divisor axiom imposed only on non-exact elements".to_string());
    }
    let mut gdrop = vec![xm.unit];
    gdrop.extend(divisor.iter().copied());
    let fg = Factor::new(xm, &gdrop)?;
    let fa = Factor::new(lm, &[lm.unit])?;
    let nu_x = (0..xm.len()).find_map(|j| {
        let v = pair.restrict_basis(j);
        let i: Q = v.iter().map(|(a, c)| &lm.integral[*a] * c).sum();
        (xm.d_col(j).is_empty() && !i.is_zero()).then(|| {
            let mut w = vec![Q::zero(); xm.len()];
            w[j] = Q::one() / i;
            w
        })
    });
    let ctx = Ctx {
        pair: &pair,
        fa,
        fg,
        divisor,
        out_contraction: lm.contraction(),
        nu_x,
        cache: Combinatorics::new(bounds.kmax + 2, bounds.lmax + 1),
    };
    let mut data = CorrelatorData::new(pair.clone(), lattice.clone(), bounds.clone());
    data.gw_sign = opts.gw_sign;
    if opts.sphere {
        data.spheres = Some(BTreeMap::new());
        if bounds.energy >= q(2) && bounds.lmax >= 2 {
            solve_wedge_sphere(&ctx, &mut data)?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = solve_order(&lattice, &bounds);
    for slot in &order {
        if slot.k == -1 && !opts.sphere {
            continue;
        }
        solve_slot(&ctx, &mut data, slot, opts, &mut rng, &mut notes)?;
    }
    let mut report = Report::new("generate");
    report.merge(data.check_q_relations());
    if opts.sphere {
        report.merge(data.check_q_minus1_relations());
        report.merge(data.check_chain_map());
    }
    let mut ax = data.check_axioms_on_data();
    ax.name = "axioms".into();
    for f in &ax.failures {
        report.note(format!("axiom [{}] fails at {}", f.law, f.location));
    }
    report.checked += ax.checked;
    for n in notes {
        report.note(n);
    }
    Ok(Generated { data, report: report.finish(), order })
}

/// `q^{β₀}_{∅,2}(γ_1,γ_2) = c·γ_1∧γ_2` with `c` fixed by the `q_{-1}` relation at `(β₀, 2)`.
fn solve_wedge_sphere(ctx: &Ctx, data: &mut CorrelatorData) -> Result<(), GenError> {
    let xm = &ctx.pair.x;
    let zero = data.lattice.zero();
    let nx = xm.len();
    let mut wedge = Tensor::default();
    for a in 0..nx {
        for b in 0..nx {
            let v = xm.mul_basis(a, b).clone();
            wedge.insert([a as u16, b as u16].into_iter().collect(), v);
        }
    }
    data.spheres.as_mut().unwrap().insert((zero.clone(), 2), wedge.clone());
    let slot = SlotKey { beta: zero.clone(), k: -1, l: 2 };
    let mut c: Option<Q> = None;
    let tuples = data.relation_tuples(&zero, -1, 2);
    for t in &tuples {
        let o = data.qm1_pairing_part(&zero, t, &ctx.cache);
        let s = q(data.gw_sign) * data.sphere_integral(&zero, t);
        if s.is_zero() {
            continue;
        }
        let ci = -o / s;
        match &c {
            None => c = Some(ci),
            Some(c0) if *c0 != ci => {
                return Err(GenError::Obstruction { slot, tuple: format!("{t:?}"), residue: "no multiple of the wedge product works".into() })
            }
            _ => {}
        }
    }
    let c = c.unwrap_or_else(Q::zero);
    for v in wedge.entries.values_mut() {
        for (_, x) in v.iter_mut() {
            *x *= &c;
        }
    }
    wedge.entries.retain(|_, v| {
        v.retain(|(_, x)| !x.is_zero());
        !v.is_empty()
    });
    data.spheres.as_mut().unwrap().insert((zero.clone(), 2), wedge);
    for t in &tuples {
        let r = data.qm1_relation_residual(&zero, t, &ctx.cache);
        if !r.is_zero() {
            return Err(GenError::Unsolved { slot, tuple: format!("{t:?}"), residue: r.to_string() });
        }
    }
    Ok(())
}

fn output_degree(data: &CorrelatorData, slot: &SlotKey, t: &[u16]) -> i64 {
    let ka = slot.nalpha();
    let adeg: i64 = t[..ka].iter().map(|&a| data.pair.l.deg(a as usize)).sum();
    let gdeg: i64 = t[ka..].iter().map(|&g| data.pair.x.deg(g as usize)).sum();
    if slot.k >= 0 {
        data.output_degree(&slot.beta, slot.k, adeg, gdeg, slot.l)
    } else {
        // Scalar output: degree 0 exactly when nonzero is allowed.
        data.output_degree(&slot.beta, -1, adeg, gdeg, slot.l)
    }
}

/// Tuples whose output degree (for the unknown) plus `shift` lies in the output range.
fn tuples_with_degree(data: &CorrelatorData, inp: &Inputs, slot: &SlotKey, shift: i64) -> Vec<Tuple> {
    let n = data.n();
    let mut sizes = vec![data.pair.l.len(); inp.k];
    sizes.extend(std::iter::repeat_n(data.pair.x.len(), inp.l));
    all_tuples(&sizes)
        .into_iter()
        .filter(|t| inp.reduced(t))
        .filter(|t| {
            let od = output_degree(data, slot, t) + shift;
            if slot.k >= 0 {
                (0..=n).contains(&od)
            } else {
                od == 0
            }
        })
        .collect()
}

fn solve_slot(
    ctx: &Ctx,
    data: &mut CorrelatorData,
    slot: &SlotKey,
    opts: &GeneratorOptions,
    rng: &mut ChaCha8Rng,
    notes: &mut Vec<String>,
) -> Result<(), GenError> {
    solve_slot_inner(ctx, data, slot, opts, rng, notes, false)
}

fn solve_slot_inner(
    ctx: &Ctx,
    data: &mut CorrelatorData,
    slot: &SlotKey,
    opts: &GeneratorOptions,
    rng: &mut ChaCha8Rng,
    notes: &mut Vec<String>,
    absorbed: bool,
) -> Result<(), GenError> {
    let lm = &ctx.pair.l;
    let ka = slot.nalpha();
    let l = slot.l;
    let inp = Inputs { k: ka, l, fa: &ctx.fa, fg: &ctx.fg };
    let out = if slot.k >= 0 { Output::Forms(lm, &ctx.out_contraction) } else { Output::Scalar };
    let no = out.len();

    // Values fixed by the axioms, then the obstruction with them in place.
    let fixed = fixed_values(ctx, data, slot);
    store(data, slot, &fixed, no);
    let rel_tuples = tuples_with_degree(data, &inp, slot, 1);
    let xt = tuples_with_degree(data, &inp, slot, 0);
    if rel_tuples.is_empty() && xt.is_empty() {
        return Ok(());
    }
    let obstruction = |d: &CorrelatorData, t: &Tuple| -> Vec<Q> {
        if slot.k >= 0 {
            d.relation_residual(&slot.beta, ka, &t[..ka], &t[ka..], &ctx.cache)
        } else {
            vec![d.qm1_relation_residual(&slot.beta, t, &ctx.cache)]
        }
    };
    let dref: &CorrelatorData = data;
    let ocache: HashMap<Tuple, Vec<Q>> = rel_tuples.par_iter().map(|t| (t.clone(), obstruction(dref, t))).collect();
    let o_at = |t: &Tuple| -> Vec<Q> { ocache.get(t).cloned().unwrap_or_else(|| vec![Q::zero(); no]) };

    // Gauge frame: x' = g·x with g = (-1)^{total Koszul degree} when x has even Hom degree.
    // The Hom degree of x has parity μ(β) for k ≥ 0 and n + μ(β) + 1 for k = -1.
    let mu = data.lattice.mu(&slot.beta);
    let hom_x = if slot.k >= 0 { Parity::of(mu) } else { Parity::of(data.n() + mu + 1) };
    let g = |t: &[u16]| -> Parity {
        if hom_x.is_even() {
            Parity::of(inp.total_degree(t))
        } else {
            Parity::EVEN
        }
    };
    let hom_o = hom_x + Parity::ODD;
    let o_prime = |t: &Tuple| -> Vec<Q> { o_at(t).into_iter().map(|x| g(t).apply(x)).collect() };

    // Harmonic part of the obstruction: Π O' p on every relation tuple.
    let mut harmonic: BTreeMap<Tuple, Vec<Q>> = BTreeMap::new();
    for t in &rel_tuples {
        let mut acc = vec![Q::zero(); no];
        for (s, c) in inp.project(t) {
            add_into(&mut acc, &o_prime(&s), &c);
        }
        let h = out.pi(&acc);
        if !is_zero_vec(&h) {
            harmonic.insert(t.clone(), h);
        }
    }
    if !harmonic.is_empty() {
        if slot.k == -1 && data.spheres.is_some() && ctx.nu_x.is_some() && !absorbed {
            absorb_into_sphere(ctx, data, slot, &inp, &o_at, &rel_tuples)?;
            // Recompute once the sphere channel carries the harmonic part.
            return solve_slot_inner(ctx, data, slot, opts, rng, notes, true);
        }
        let (t, v) = harmonic.iter().next().unwrap();
        return Err(GenError::Obstruction { slot: slot.clone(), tuple: format!("{t:?}"), residue: fmt_dense(v) });
    }
    if opts.check_closedness {
        let next = tuples_with_degree(data, &inp, slot, 2);
        for t in &next {
            let mut acc = out.d(&o_prime(t));
            let s = Parity::ODD + hom_o;
            for (u, c) in inp.delta(t) {
                add_into(&mut acc, &o_prime(&u), &s.apply(c));
            }
            if !is_zero_vec(&acc) {
                return Err(GenError::NotClosed { slot: slot.clone(), tuple: format!("{t:?}"), residue: fmt_dense(&acc) });
            }
        }
    }
    // x' = -(h O' + (-1)^{|O'|} Π O' k).
    let mut sol: BTreeMap<Tuple, Vec<Q>> = BTreeMap::new();
    for t in &xt {
        let mut acc = out.h(&o_prime(t));
        let mut tail = vec![Q::zero(); no];
        for (u, c) in inp.homotopy(t) {
            add_into(&mut tail, &o_prime(&u), &c);
        }
        let tail = out.pi(&tail);
        add_into(&mut acc, &tail, &hom_o.apply(Q::one()));
        let v: Vec<Q> = acc.into_iter().map(|x| g(t).apply(-x)).collect();
        if !is_zero_vec(&v) {
            sol.insert(t.clone(), v);
        }
    }
    // Free choices: a curvature seed and a random exact term.
    if opts.curvature_seed && slot.k == 0 && l == 0 && output_degree(data, slot, &[]) == 0 {
        let c = q(rng.gen_range(1..=3));
        let mut v = vec![Q::zero(); no];
        v[lm.unit] = c;
        sol.insert(Tuple::new(), v);
    }
    let base = sol.clone();
    if opts.gauge && gauge_is_safe(data, slot) {
        add_gauge(data, slot, &inp, &out, &xt, hom_x, &g, rng, &mut sol);
    }
    if sol == base {
        return finish_slot(ctx, data, slot, opts, &fixed, sol, &obstruction, notes);
    }
    // A gauge term is kept only when the slot still satisfies the relations and adds no axiom failure.
    let before = data.check_axioms_on_data().failures.len();
    let mut gnotes = Vec::new();
    let ok = finish_slot(ctx, data, slot, opts, &fixed, sol, &obstruction, &mut gnotes).is_ok()
        && data.check_axioms_on_data().failures.len() <= before;
    if ok {
        notes.extend(gnotes);
        return Ok(());
    }
    finish_slot(ctx, data, slot, opts, &fixed, base, &obstruction, notes)
}

#[allow(clippy::too_many_arguments)]
fn finish_slot(
    ctx: &Ctx,
    data: &mut CorrelatorData,
    slot: &SlotKey,
    opts: &GeneratorOptions,
    fixed: &BTreeMap<Tuple, Vec<Q>>,
    sol: BTreeMap<Tuple, Vec<Q>>,
    obstruction: &(dyn Fn(&CorrelatorData, &Tuple) -> Vec<Q> + Sync),
    notes: &mut Vec<String>,
) -> Result<(), GenError> {
    let no = if slot.k >= 0 { ctx.pair.l.len() } else { 1 };
    let sol = symmetrize(data, slot, sol);
    let mut full = fixed.clone();
    for (t, v) in &sol {
        full.insert(t.clone(), v.clone());
    }
    store(data, slot, &full, no);
    // The relations must hold on all inputs, not only on the reduced ones.
    let all_rel = data.relation_tuples(&slot.beta, slot.k, slot.l);
    verify_slot(ctx, data, slot, &all_rel, obstruction)?;
    if opts.cyclic && slot.k >= 1 {
        let avg = cyclic_average(data, slot, &full);
        if avg != full {
            store(data, slot, &avg, no);
            let ok = verify_slot(ctx, data, slot, &all_rel, obstruction).is_ok() && respects_unit(data, slot, &avg);
            if !ok {
                store(data, slot, &full, no);
                notes.push(format!("cyclic averaging at {slot} would break the relations or the unit law; kept the unaveraged solution"));
            }
        }
    }
    Ok(())
}

/// Whether no composition with another positive-energy slot inside the box reads this slot.
/// An exact shift `D(y)` elsewhere can leave harmonic obstructions at `β + β'`.
fn gauge_is_safe(data: &CorrelatorData, slot: &SlotKey) -> bool {
    match data.lattice.min_omega() {
        None => true,
        Some(m) => data.lattice.omega(&slot.beta) + q(slot.l as i64) + m > data.bounds.energy,
    }
}

fn respects_unit(data: &CorrelatorData, slot: &SlotKey, vals: &BTreeMap<Tuple, Vec<Q>>) -> bool {
    let ka = slot.nalpha();
    let ul = data.pair.l.unit as u16;
    let ux = data.pair.x.unit as u16;
    vals.keys().all(|t| !t[..ka].contains(&ul) && !t[ka..].contains(&ux))
}

fn verify_slot(
    _ctx: &Ctx,
    data: &CorrelatorData,
    slot: &SlotKey,
    rel: &[Tuple],
    obstruction: &(dyn Fn(&CorrelatorData, &Tuple) -> Vec<Q> + Sync),
) -> Result<(), GenError> {
    let bad = rel.par_iter().find_map_first(|t| {
        let v = obstruction(data, t);
        (!is_zero_vec(&v)).then(|| (t.clone(), v))
    });
    match bad {
        None => Ok(()),
        Some((t, v)) => Err(GenError::Unsolved { slot: slot.clone(), tuple: format!("{t:?}"), residue: fmt_dense(&v) }),
    }
}

/// Values forced by the unit, fundamental class and divisor axioms on tuples with dropped interior inputs.
fn fixed_values(ctx: &Ctx, data: &CorrelatorData, slot: &SlotKey) -> BTreeMap<Tuple, Vec<Q>> {
    let mut out = BTreeMap::new();
    let ka = slot.nalpha();
    if slot.l == 0 {
        return out;
    }
    let lower = SlotKey { beta: slot.beta.clone(), k: slot.k, l: slot.l - 1 };
    let Some(low) = data.disks.get(&lower) else { return out };
    let no = if slot.k >= 0 { data.pair.l.len() } else { 1 };
    // Insert one divisor element at every interior position of every lower tuple; values add up
    // to P·q over the positions only after symmetrisation, so write P·q at each position.
    for t in low.entries.keys() {
        let alphas = &t[..ka];
        let gammas = &t[ka..];
        let qv: SVec = if slot.k >= 0 {
            data.q_basis(&slot.beta, alphas, gammas)
        } else {
            vec![(0, data.qm1_basis(&slot.beta, gammas))]
        };
        for &z in &ctx.divisor {
            let p = data.pair.period(&slot.beta, z);
            if p.is_zero() {
                continue;
            }
            for pos in 0..=gammas.len() {
                let mut g2: Tuple = gammas.iter().copied().collect();
                g2.insert(pos, z as u16);
                let mut full: Tuple = alphas.iter().copied().collect();
                full.extend(g2.iter().copied());
                // Count of divisor elements in the tuple, for the symmetric value.
                let mut v = vec![Q::zero(); no];
                for (o, c) in &qv {
                    v[*o] = c * &p;
                }
                out.entry(full).or_insert(v);
            }
        }
    }
    out
}

/// Writes `q`-values into the stored (push-forward) tensor of a slot.
fn store(data: &mut CorrelatorData, slot: &SlotKey, vals: &BTreeMap<Tuple, Vec<Q>>, _no: usize) {
    let ka = slot.nalpha();
    let mut t = Tensor::default();
    for (tup, v) in vals {
        let s = data.eps(slot.k, &tup[..ka], &tup[ka..]);
        let sv: SVec = svec_from_dense(&v.iter().map(|x| s.apply(x.clone())).collect::<Vec<_>>());
        t.insert(tup.clone(), sv);
    }
    if t.entries.is_empty() {
        data.disks.remove(slot);
    } else {
        data.disks.insert(slot.clone(), t);
    }
}

/// Koszul-symmetric average over permutations of the interior inputs.
fn symmetrize(data: &CorrelatorData, slot: &SlotKey, sol: BTreeMap<Tuple, Vec<Q>>) -> BTreeMap<Tuple, Vec<Q>> {
    let l = slot.l;
    if l < 2 {
        return sol;
    }
    let ka = slot.nalpha();
    let perms = permutations(l);
    let w = inv_factorial(l);
    let mut out: BTreeMap<Tuple, Vec<Q>> = BTreeMap::new();
    for (t, v) in &sol {
        let degs: Vec<i64> = t[ka..].iter().map(|&g| data.pair.x.deg(g as usize)).collect();
        // x(γ) contributes to x_sym(γ_π) with the sign relating the two orders.
        for p in &perms {
            let mut t2: Tuple = t[..ka].iter().copied().collect();
            t2.extend(p.iter().map(|&i| t[ka + i]));
            let s = permutation_sign(p, &degs);
            let e = out.entry(t2).or_insert_with(|| vec![Q::zero(); v.len()]);
            add_into(e, v, &s.apply(w.clone()));
        }
    }
    out.retain(|_, v| !is_zero_vec(v));
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Average of `Φ(α_1..α_{k+1}) = ⟨x(α_1..α_k), α_{k+1}⟩` over cyclic rotations.
fn cyclic_average(data: &CorrelatorData, slot: &SlotKey, vals: &BTreeMap<Tuple, Vec<Q>>) -> BTreeMap<Tuple, Vec<Q>> {
    let lm = &data.pair.l;
    let nl = lm.len();
    let k = slot.nalpha();
    // Φ as a map from (α_1..α_{k+1}; γ) to Q.
    let mut phi: BTreeMap<Tuple, Q> = BTreeMap::new();
    for (t, v) in vals {
        for b in 0..nl {
            let mut s = Q::zero();
            for (i, x) in v.iter().enumerate() {
                if !x.is_zero() {
                    s += x * lm.pairing(i, b);
                }
            }
            if !s.is_zero() {
                let mut t2: Tuple = t[..k].iter().copied().collect();
                t2.push(b as u16);
                t2.extend(t[k..].iter().copied());
                phi.insert(t2, s);
            }
        }
    }
    // R Φ (α_1..α_{k+1}) = (-1)^{cyc} Φ(α_{k+1}, α_1..α_k).
    let w = Q::one() / q(k as i64 + 1);
    let mut avg: BTreeMap<Tuple, Q> = BTreeMap::new();
    for (t, c) in &phi {
        // Φ(t) contributes to RⁱΦ at the tuple rotated i steps to the left.
        let mut cur = t.clone();
        let mut sign = Parity::EVEN;
        for _ in 0..=k {
            *avg.entry(cur.clone()).or_insert_with(Q::zero) += sign.apply(c * &w);
            // Φ(β_1..β_{k+1}) feeds RΦ(β_2..β_{k+1}, β_1).
            let mut next: Tuple = cur[1..=k].iter().copied().collect();
            next.push(cur[0]);
            next.extend(cur[k + 1..].iter().copied());
            let degs: Vec<i64> = next[..=k].iter().map(|&a| lm.deg(a as usize)).collect();
            sign += crate::signs::cyclic_sign(&degs);
            cur = next;
        }
    }
    // Back to x via the Gram matrix: ⟨x, e_b⟩ = Φ(.., e_b).
    let gt = lm.gram().transpose();
    let mut rows: BTreeMap<Tuple, Vec<Q>> = BTreeMap::new();
    for (t, c) in avg {
        if c.is_zero() {
            continue;
        }
        let mut key: Tuple = t[..k].iter().copied().collect();
        key.extend(t[k + 1..].iter().copied());
        let e = rows.entry(key).or_insert_with(|| vec![Q::zero(); nl]);
        e[t[k] as usize] += c;
    }
    let mut out = BTreeMap::new();
    for (t, rhs) in rows {
        let x = gt.solve(&rhs).expect("pairing is nondegenerate");
        if !is_zero_vec(&x) {
            out.insert(t, x);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn add_gauge(
    data: &CorrelatorData,
    slot: &SlotKey,
    inp: &Inputs,
    out: &Output,
    xt: &[Tuple],
    hom_x: Parity,
    g: &dyn Fn(&[u16]) -> Parity,
    rng: &mut ChaCha8Rng,
    sol: &mut BTreeMap<Tuple, Vec<Q>>,
) {
    let Output::Forms(lm, _) = out else { return };
    // y' lives on tuples whose output degree is one less.
    let yt = tuples_with_degree(data, inp, slot, -1);
    if yt.is_empty() {
        return;
    }
    let mut y: HashMap<Tuple, Vec<Q>> = HashMap::new();
    // Tuples reading a primitive: gauging these makes q depend on elements such as η,
    // which pseudo-isotopies between cohomologous bulks see.
    let ka = slot.nalpha();
    let primitive: Vec<&Tuple> = yt.iter().filter(|t| t[ka..].iter().any(|&g| is_primitive(data, g))).collect();
    // Outputs of y stay below degree n - 1 so that D(y) has no top-degree component.
    for draw in 0..5 {
        let t = if draw < 3 || primitive.is_empty() { &yt[rng.gen_range(0..yt.len())] } else { primitive[rng.gen_range(0..primitive.len())] };
        let od = output_degree(data, slot, t) - 1;
        let cands: Vec<usize> = (0..lm.len()).filter(|&i| lm.deg(i) == od && od < lm.n - 1).collect();
        if cands.is_empty() {
            continue;
        }
        let o = cands[rng.gen_range(0..cands.len())];
        let e = y.entry(t.clone()).or_insert_with(|| vec![Q::zero(); lm.len()]);
        e[o] += q(rng.gen_range(1..=2));
    }
    let hom_y = hom_x + Parity::ODD;
    let yv = |t: &Tuple| y.get(t).cloned().unwrap_or_else(|| vec![Q::zero(); lm.len()]);
    // D y' = d y' - (-1)^{|y'|} y' δ, then back to the ungauged frame.
    for t in xt {
        let mut acc = lm.d.apply(&yv(t));
        let s = Parity::ODD + hom_y;
        for (u, c) in inp.delta(t) {
            add_into(&mut acc, &yv(&u), &s.apply(c));
        }
        if is_zero_vec(&acc) {
            continue;
        }
        let acc: Vec<Q> = acc.into_iter().map(|x| g(t).apply(x)).collect();
        let e = sol.entry(t.clone()).or_insert_with(|| vec![Q::zero(); lm.len()]);
        add_into(e, &acc, &Q::one());
    }
    sol.retain(|_, v| !is_zero_vec(v));
}

/// Puts `-s·O(p γ)·ν_X` into the sphere channel so the harmonic part of the `q_{-1}` obstruction vanishes.
fn absorb_into_sphere(
    ctx: &Ctx,
    data: &mut CorrelatorData,
    slot: &SlotKey,
    inp: &Inputs,
    o_at: &dyn Fn(&Tuple) -> Vec<Q>,
    rel: &[Tuple],
) -> Result<(), GenError> {
    let nu = ctx.nu_x.as_ref().expect("checked by caller");
    let s = q(data.gw_sign);
    let mut t_out = Tensor::default();
    for t in rel {
        let mut acc = Q::zero();
        for (u, c) in inp.project(t) {
            acc += &o_at(&u)[0] * c;
        }
        if acc.is_zero() {
            continue;
        }
        let v: Vec<Q> = nu.iter().map(|x| -(x * &acc * &s)).collect();
        t_out.insert(t.clone(), svec_from_dense(&v));
    }
    let sph = data.spheres.as_mut().unwrap();
    let key = (slot.beta.clone(), slot.l);
    match sph.get_mut(&key) {
        Some(existing) => {
            for (t, v) in t_out.entries {
                let mut dense = crate::dgmodel::svec_to_dense(existing.get(&t).unwrap_or(&Vec::new()), data.pair.x.len());
                for (i, x) in v {
                    dense[i] += x;
                }
                existing.insert(t, svec_from_dense(&dense));
            }
        }
        None => {
            sph.insert(key, t_out);
        }
    }
    Ok(())
}

/// Beta-indexed summary of a generated dataset: number of stored entries per slot.
pub fn summary(data: &CorrelatorData) -> Vec<(Beta, i64, usize, usize)> {
    data.disks.iter().map(|(k, t)| (k.beta.clone(), k.k, k.l, t.nnz())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgmodel::standard;

    fn t2_setup() -> (Arc<RelativePairModel>, DegreeLattice, Bounds) {
        let pair = Arc::new(standard::torus_pair_nonminimal(&[q(1)]));
        let lat = DegreeLattice::single(q(1), 2).unwrap();
        (pair, lat, Bounds { energy: q(2), kmax: 2, lmax: 2 })
    }

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(3).len(), 6);
    }

    #[test]
    fn order_respects_energy_then_weight() {
        let (_, lat, b) = t2_setup();
        let o = solve_order(&lat, &b);
        assert!(o.windows(2).all(|w| (lat.omega(&w[0].beta), w[0].k + 2 * w[0].l as i64) <= (lat.omega(&w[1].beta), w[1].k + 2 * w[1].l as i64)));
    }

    #[test]
    fn generated_t2_data_is_admissible() {
        let (pair, lat, b) = t2_setup();
        let g = generate(pair, lat, b, &GeneratorOptions::default()).unwrap_or_else(|e| panic!("{e}"));
        assert!(g.report.is_clean(), "{}", g.report);
        assert!(!g.data.disks.is_empty());
    }

    #[test]
    fn structure_from_generated_data_is_ainfty() {
        let (pair, lat, _) = t2_setup();
        let b = Bounds { energy: q(2), kmax: 3, lmax: 2 };
        let g = generate(pair.clone(), lat.clone(), b, &GeneratorOptions::default()).unwrap_or_else(|e| panic!("{e}"));
        let ctx = crate::novikov::RingContext::new(lat, vec![0], q(2)).unwrap();
        let sigma = pair.x.index_of("σ").unwrap();
        let bulk = vec![(sigma, crate::novikov::RingElement::var(&ctx, 0).unwrap())];
        let m = crate::qops::build_m(&g.data, &ctx, &bulk, 3).unwrap();
        let r = m.check_ainfty();
        assert!(r.is_clean(), "{r}");
    }
}
