//! The bundle: one JSON document carrying a whole instance (lattice, models,
//! correlators, bulk deformations and flags).
//!
//! Basis elements are referenced by name everywhere, rationals are `"p/q"`
//! strings and correlator entries hold the values of `q` itself (not the
//! internally stored `(-1)^ε q`). The grammar is `docs/bundle.schema.json`.
//! Emission is canonical, so `parse ∘ emit ∘ parse` is the identity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dgmodel::{standard, BasisElement, CDGAModel, RelativePairModel, SVec};
use crate::linalg::Mat;
use crate::novikov::{DegreeLattice, LatticeGenerator, RingContext, RingElement, TermJson};
use crate::qops::{Bounds, CorrelatorData, SlotKey, Tensor, Tuple};
use crate::rational::{fmt_q, parse_q, Q};

pub const FORMAT: &str = "ainfty-bundle/1";

/// Sparse vector keyed by basis name.
type NamedVec = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleJson {
    pub format: String,
    pub lattice: Vec<LatticeGenerator>,
    #[serde(default)]
    pub variables: Vec<VariableJson>,
    #[serde(rename = "model_L")]
    pub model_l: ModelJson,
    #[serde(rename = "model_X", default, skip_serializing_if = "Option::is_none")]
    pub model_x: Option<ModelJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative: Option<BTreeMap<String, NamedVec>>,
    #[serde(default)]
    pub periods: BTreeMap<String, NamedVec>,
    #[serde(default)]
    pub correlators: CorrelatorsJson,
    #[serde(default)]
    pub gamma: BTreeMap<String, Vec<TermJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<BTreeMap<String, Vec<TermJson>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<BTreeMap<String, Vec<TermJson>>>,
    pub truncation: TruncationJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isotopy: Option<IsotopyJson>,
    #[serde(default)]
    pub sign_flags: SignFlagsJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableJson {
    pub name: String,
    pub degree: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub name: String,
    pub dim: i64,
    pub basis: Vec<BasisJson>,
    pub unit: String,
    /// `d(e) = Σ c·e'`, keyed by `e`; absent elements are closed.
    #[serde(default)]
    pub differential: BTreeMap<String, NamedVec>,
    /// Products not listed vanish, except those with the unit.
    #[serde(default)]
    pub products: Vec<ProductJson>,
    pub integral: NamedVec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homotopy: Option<BTreeMap<String, NamedVec>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisJson {
    pub name: String,
    pub degree: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductJson {
    pub left: String,
    pub right: String,
    pub value: NamedVec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorsJson {
    #[serde(default)]
    pub disks: Vec<DiskSlotJson>,
    /// `null` or absent: no sphere channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spheres: Option<Vec<SphereSlotJson>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSlotJson {
    pub beta: Vec<u32>,
    pub k: i64,
    pub l: usize,
    pub entries: Vec<DiskEntryJson>,
}

/// One basis tuple. `value` for `k ≥ 0` (a form on `L`), `scalar` for `k = -1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskEntryJson {
    #[serde(default)]
    pub alpha: Vec<String>,
    #[serde(default)]
    pub gamma: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<NamedVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalar: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSlotJson {
    pub beta: Vec<u32>,
    pub l: usize,
    pub entries: Vec<SphereEntryJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereEntryJson {
    pub gamma: Vec<String>,
    pub value: NamedVec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationJson {
    #[serde(rename = "E")]
    pub energy: String,
    #[serde(rename = "K_max")]
    pub kmax: usize,
    #[serde(rename = "L_max")]
    pub lmax: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotopyJson {
    pub t_degree_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignFlagsJson {
    pub q_minus1_gw: i64,
}

impl Default for SignFlagsJson {
    fn default() -> Self {
        SignFlagsJson { q_minus1_gw: 1 }
    }
}

/// Schema and load-time errors, each with a location.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleError {
    pub errors: Vec<String>,
}

impl fmt::Display for BundleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.errors.len();
        writeln!(f, "invalid bundle ({n} error{})", if n == 1 { "" } else { "s" })?;
        for e in &self.errors {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for BundleError {}

impl BundleError {
    fn one(s: impl Into<String>) -> BundleError {
        BundleError { errors: vec![s.into()] }
    }
}

/// A validated instance.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub data: CorrelatorData,
    pub ctx: Arc<RingContext>,
    pub variable_names: Vec<String>,
    pub gamma: Vec<(usize, RingElement)>,
    pub gamma_prime: Option<Vec<(usize, RingElement)>>,
    pub eta: Option<Vec<(usize, RingElement)>>,
    pub t_degree_cap: Option<usize>,
    pub provenance: Option<Value>,
}

/// Collects errors instead of stopping at the first one.
struct Errs(Vec<String>);

impl Errs {
    fn push(&mut self, s: impl Into<String>) {
        self.0.push(s.into());
    }
    fn q(&mut self, at: &str, s: &str) -> Q {
        parse_q(s).unwrap_or_else(|e| {
            self.push(format!("{at}: {e}"));
            Q::zero()
        })
    }
    fn index(&mut self, at: &str, names: &BTreeMap<String, usize>, n: &str) -> usize {
        match names.get(n) {
            Some(&i) => i,
            None => {
                self.push(format!("{at}: unknown basis element {n:?}"));
                usize::MAX
            }
        }
    }
    fn svec(&mut self, at: &str, names: &BTreeMap<String, usize>, v: &NamedVec) -> SVec {
        let mut out = SVec::new();
        for (n, c) in v {
            let i = self.index(at, names, n);
            let c = self.q(&format!("{at}.{n}"), c);
            if i != usize::MAX && !c.is_zero() {
                out.push((i, c));
            }
        }
        out.sort_by_key(|x| x.0);
        out
    }
}

fn basis_index(m: &ModelJson, at: &str, errs: &mut Errs) -> BTreeMap<String, usize> {
    let mut names = BTreeMap::new();
    for (i, b) in m.basis.iter().enumerate() {
        if names.insert(b.name.clone(), i).is_some() {
            errs.push(format!("{at}.basis: duplicate basis name {:?}", b.name));
        }
    }
    names
}

fn model_from_json(m: &ModelJson, at: &str, errs: &mut Errs) -> Option<CDGAModel> {
    let before = errs.0.len();
    let names = basis_index(m, at, errs);
    let len = m.basis.len();
    let unit = errs.index(&format!("{at}.unit"), &names, &m.unit);
    let matrix = |errs: &mut Errs, field: &str, cols: &BTreeMap<String, NamedVec>| {
        let mut d = Mat::zeros(len, len);
        for (src, v) in cols {
            let at = format!("{at}.{field}.{src}");
            let j = errs.index(&at, &names, src);
            for (i, c) in errs.svec(&at, &names, v) {
                if j != usize::MAX {
                    d[(i, j)] = c;
                }
            }
        }
        d
    };
    let d = matrix(errs, "differential", &m.differential);
    let homotopy = m.homotopy.as_ref().map(|h| matrix(errs, "homotopy", h));
    let mut products = BTreeMap::new();
    for (p, pj) in m.products.iter().enumerate() {
        let at = format!("{at}.products[{p}]");
        let i = errs.index(&at, &names, &pj.left);
        let j = errs.index(&at, &names, &pj.right);
        let v = errs.svec(&at, &names, &pj.value);
        if products.insert((i, j), v).is_some() {
            errs.push(format!("{at}: duplicate product {}·{}", pj.left, pj.right));
        }
    }
    let mut integral = vec![Q::zero(); len];
    for (i, c) in errs.svec(&format!("{at}.integral"), &names, &m.integral) {
        integral[i] = c;
    }
    if errs.0.len() > before {
        return None;
    }
    let basis = m.basis.iter().map(|b| BasisElement { name: b.name.clone(), degree: b.degree }).collect();
    match CDGAModel::new(&m.name, m.dim, basis, unit, d, products, integral, homotopy) {
        Ok(x) => Some(x),
        Err(e) => {
            errs.push(format!("{at}: {e}"));
            None
        }
    }
}

fn named(v: &SVec, m: &CDGAModel) -> NamedVec {
    v.iter().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (m.name_of(*i).to_string(), fmt_q(c))).collect()
}

fn matrix_to_json(d: &Mat, m: &CDGAModel) -> BTreeMap<String, NamedVec> {
    (0..m.len())
        .filter_map(|j| {
            let col = crate::dgmodel::svec_from_dense(&d.column(j));
            (!col.is_empty()).then(|| (m.name_of(j).to_string(), named(&col, m)))
        })
        .collect()
}

pub fn model_to_json(m: &CDGAModel) -> ModelJson {
    let mut products = Vec::new();
    for i in 0..m.len() {
        for j in 0..m.len() {
            let v = m.mul_basis(i, j);
            let default_unit = (i == m.unit && *v == vec![(j, Q::one())]) || (j == m.unit && *v == vec![(i, Q::one())]);
            if default_unit {
                continue;
            }
            if v.is_empty() && i != m.unit && j != m.unit {
                continue;
            }
            products.push(ProductJson { left: m.name_of(i).into(), right: m.name_of(j).into(), value: named(v, m) });
        }
    }
    ModelJson {
        name: m.name.clone(),
        dim: m.n,
        basis: m.basis.iter().map(|b| BasisJson { name: b.name.clone(), degree: b.degree }).collect(),
        unit: m.name_of(m.unit).into(),
        differential: matrix_to_json(&m.d, m),
        products,
        integral: named(&crate::dgmodel::svec_from_dense(&m.integral), m),
        homotopy: m.homotopy.as_ref().map(|h| matrix_to_json(h, m)),
    }
}

fn bulk_from_json(
    at: &str,
    v: &BTreeMap<String, Vec<TermJson>>,
    names: &BTreeMap<String, usize>,
    ctx: &Arc<RingContext>,
    errs: &mut Errs,
) -> Vec<(usize, RingElement)> {
    let mut out = Vec::new();
    for (n, terms) in v {
        let at = format!("{at}.{n}");
        let j = errs.index(&at, names, n);
        match RingElement::from_json_terms(ctx, terms) {
            Ok(c) if j != usize::MAX => {
                if c.truncated() {
                    errs.push(format!("{at}: terms above the energy cutoff"));
                }
                if !c.is_zero() {
                    out.push((j, c));
                }
            }
            Ok(_) => {}
            Err(e) => errs.push(format!("{at}: {e}")),
        }
    }
    out.sort_by_key(|x| x.0);
    out
}

fn bulk_to_json(v: &[(usize, RingElement)], m: &CDGAModel) -> BTreeMap<String, Vec<TermJson>> {
    v.iter().filter(|(_, c)| !c.is_zero()).map(|(j, c)| (m.name_of(*j).to_string(), c.to_json_terms())).collect()
}

pub fn parse_bundle_str(text: &str) -> Result<Bundle, BundleError> {
    let json: BundleJson = serde_json::from_str(text)
        .map_err(|e| BundleError::one(format!("line {} column {}: {e}", e.line(), e.column())))?;
    Bundle::from_json(&json)
}

pub fn parse_bundle(path: &Path) -> Result<Bundle, BundleError> {
    let text = std::fs::read_to_string(path).map_err(|e| BundleError::one(format!("{}: {e}", path.display())))?;
    parse_bundle_str(&text)
}

impl Bundle {
    pub fn from_json(j: &BundleJson) -> Result<Bundle, BundleError> {
        let mut errs = Errs(Vec::new());
        if j.format != FORMAT {
            errs.push(format!("format: expected {FORMAT:?}, found {:?}", j.format));
        }
        let lattice = DegreeLattice::new(j.lattice.clone()).map_err(|e| BundleError::one(format!("lattice: {e}")))?;
        let gen_names: BTreeSet<&str> = j.lattice.iter().map(|g| g.name.as_str()).collect();
        if gen_names.len() != j.lattice.len() {
            errs.push("lattice: duplicate generator name");
        }
        let mut var_names = BTreeSet::new();
        for v in &j.variables {
            if !var_names.insert(v.name.as_str()) {
                errs.push(format!("variables: duplicate name {:?}", v.name));
            }
        }
        let energy = errs.q("truncation.E", &j.truncation.energy);
        let bounds = Bounds { energy: energy.clone(), kmax: j.truncation.kmax, lmax: j.truncation.lmax };
        let ctx = RingContext::new(lattice.clone(), j.variables.iter().map(|v| v.degree).collect(), energy)
            .map_err(|e| BundleError::one(format!("variables: {e}")))?;
        let l = model_from_json(&j.model_l, "model_L", &mut errs);
        let x = match &j.model_x {
            Some(mx) => model_from_json(mx, "model_X", &mut errs),
            None => None,
        };
        let (Some(l), true) = (l, j.model_x.is_none() || x.is_some()) else {
            return Err(BundleError { errors: errs.0 });
        };
        let pair = match x {
            Some(x) => {
                let lnames = l.basis.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();
                let xnames: BTreeMap<String, usize> = x.basis.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();
                let mut restriction = Mat::zeros(l.len(), x.len());
                for (src, v) in j.relative.iter().flatten() {
                    let at = format!("relative.{src}");
                    let jx = errs.index(&at, &xnames, src);
                    for (i, c) in errs.svec(&at, &lnames, v) {
                        if jx != usize::MAX {
                            restriction[(i, jx)] = c;
                        }
                    }
                }
                let mut periods = vec![vec![Q::zero(); x.len()]; lattice.rank()];
                for (g, v) in &j.periods {
                    match j.lattice.iter().position(|x| &x.name == g) {
                        Some(gi) => {
                            for (i, c) in errs.svec(&format!("periods.{g}"), &xnames, v) {
                                periods[gi][i] = c;
                            }
                        }
                        None => errs.push(format!("periods.{g}: unknown lattice generator")),
                    }
                }
                RelativePairModel { l, x, restriction, periods }
            }
            None => {
                if j.relative.is_some() || !j.periods.is_empty() {
                    errs.push("relative/periods given without model_X");
                }
                standard::product_with_own_sphere(&l, lattice.rank())
            }
        };
        if !(j.sign_flags.q_minus1_gw == 1 || j.sign_flags.q_minus1_gw == -1) {
            errs.push("sign_flags.q_minus1_gw: must be 1 or -1");
        }
        let lnames: BTreeMap<String, usize> = pair.l.basis.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();
        let xnames: BTreeMap<String, usize> = pair.x.basis.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();
        let pair = Arc::new(pair);
        let mut data = CorrelatorData::new(pair.clone(), lattice.clone(), bounds);
        data.gw_sign = j.sign_flags.q_minus1_gw;
        // Correlators: store (-1)^ε q.
        for (s, slot) in j.correlators.disks.iter().enumerate() {
            let at = format!("correlators.disks[{s}]");
            if slot.beta.len() != lattice.rank() {
                errs.push(format!("{at}.beta: expected {} exponents", lattice.rank()));
                continue;
            }
            if slot.k < -1 {
                errs.push(format!("{at}.k: must be ≥ -1"));
                continue;
            }
            let key = SlotKey::new(&slot.beta, slot.k, slot.l);
            if data.disks.contains_key(&key) {
                errs.push(format!("{at}: duplicate slot {key}"));
                continue;
            }
            let mut t = Tensor::default();
            for (e, ent) in slot.entries.iter().enumerate() {
                let at = format!("{at}.entries[{e}]");
                if ent.alpha.len() != key.nalpha() || ent.gamma.len() != slot.l {
                    errs.push(format!("{at}: expected {} boundary and {} interior inputs", key.nalpha(), slot.l));
                    continue;
                }
                let a: Vec<usize> = ent.alpha.iter().map(|n| errs.index(&at, &lnames, n)).collect();
                let g: Vec<usize> = ent.gamma.iter().map(|n| errs.index(&at, &xnames, n)).collect();
                if a.iter().chain(&g).any(|&i| i == usize::MAX) {
                    continue;
                }
                let tup: Tuple = a.iter().chain(&g).map(|&i| i as u16).collect();
                let v: SVec = match (slot.k, &ent.value, &ent.scalar) {
                    (-1, None, Some(c)) => vec![(0, errs.q(&format!("{at}.scalar"), c))],
                    (k, Some(v), None) if k >= 0 => errs.svec(&format!("{at}.value"), &lnames, v),
                    _ => {
                        errs.push(format!("{at}: k = -1 entries carry \"scalar\", others carry \"value\""));
                        continue;
                    }
                };
                let sgn = data.eps(slot.k, &tup[..key.nalpha()], &tup[key.nalpha()..]);
                let v: SVec = v.into_iter().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (i, sgn.apply(c))).collect();
                if t.entries.contains_key(&tup) {
                    errs.push(format!("{at}: duplicate tuple"));
                }
                t.insert(tup, v);
            }
            if !t.entries.is_empty() {
                data.disks.insert(key, t);
            }
        }
        if let Some(sph) = &j.correlators.spheres {
            let mut out = BTreeMap::new();
            for (s, slot) in sph.iter().enumerate() {
                let at = format!("correlators.spheres[{s}]");
                if slot.beta.len() != lattice.rank() {
                    errs.push(format!("{at}.beta: expected {} exponents", lattice.rank()));
                    continue;
                }
                let mut t = Tensor::default();
                for (e, ent) in slot.entries.iter().enumerate() {
                    let at = format!("{at}.entries[{e}]");
                    if ent.gamma.len() != slot.l {
                        errs.push(format!("{at}: expected {} interior inputs", slot.l));
                        continue;
                    }
                    let g: Vec<usize> = ent.gamma.iter().map(|n| errs.index(&at, &xnames, n)).collect();
                    if g.contains(&usize::MAX) {
                        continue;
                    }
                    let tup: Tuple = g.iter().map(|&i| i as u16).collect();
                    if t.entries.contains_key(&tup) {
                        errs.push(format!("{at}: duplicate tuple"));
                    }
                    t.insert(tup, errs.svec(&format!("{at}.value"), &xnames, &ent.value));
                }
                if out.insert((slot.beta.clone(), slot.l), t).is_some() {
                    errs.push(format!("{at}: duplicate slot"));
                }
            }
            data.spheres = Some(out);
        }
        let gamma = bulk_from_json("gamma", &j.gamma, &xnames, &ctx, &mut errs);
        let gamma_prime = j.gamma_prime.as_ref().map(|g| bulk_from_json("gamma_prime", g, &xnames, &ctx, &mut errs));
        let eta = j.eta.as_ref().map(|g| bulk_from_json("eta", g, &xnames, &ctx, &mut errs));
        if !errs.0.is_empty() {
            return Err(BundleError { errors: errs.0 });
        }
        // Referential integrity and the degree law.
        let v = data.validate();
        if !v.is_clean() {
            let errors = v.failures.iter().map(|f| format!("correlators: [{}] {} ({})", f.law, f.location, f.residual)).collect();
            return Err(BundleError { errors });
        }
        Ok(Bundle {
            data,
            ctx,
            variable_names: j.variables.iter().map(|v| v.name.clone()).collect(),
            gamma,
            gamma_prime,
            eta,
            t_degree_cap: j.isotopy.as_ref().map(|i| i.t_degree_cap),
            provenance: j.provenance.clone(),
        })
    }

    /// A bundle around existing data with no bulk deformation.
    pub fn from_data(data: CorrelatorData, variables: Vec<(String, i64)>) -> Bundle {
        let ctx = RingContext::new(data.lattice.clone(), variables.iter().map(|v| v.1).collect(), data.bounds.energy.clone())
            .expect("even variable degrees");
        Bundle {
            data,
            ctx,
            variable_names: variables.into_iter().map(|v| v.0).collect(),
            gamma: Vec::new(),
            gamma_prime: None,
            eta: None,
            t_degree_cap: None,
            provenance: None,
        }
    }

    pub fn to_json(&self) -> BundleJson {
        let d = &self.data;
        let (lm, xm) = (&d.pair.l, &d.pair.x);
        let relative = matrix_to_json_rect(&d.pair.restriction, xm, lm);
        let periods = d
            .lattice
            .generators()
            .iter()
            .zip(&d.pair.periods)
            .map(|(g, p)| (g.name.clone(), named(&crate::dgmodel::svec_from_dense(p), xm)))
            .filter(|(_, v)| !v.is_empty())
            .collect();
        let disks = d
            .disks
            .iter()
            .filter(|(_, t)| !t.entries.is_empty())
            .map(|(key, t)| {
                let ka = key.nalpha();
                let entries = t
                    .entries
                    .iter()
                    .map(|(tup, v)| {
                        let sgn = d.eps(key.k, &tup[..ka], &tup[ka..]);
                        let v: SVec = v.iter().map(|(i, c)| (*i, sgn.apply(c.clone()))).collect();
                        let alpha = tup[..ka].iter().map(|&i| lm.name_of(i as usize).to_string()).collect();
                        let gamma = tup[ka..].iter().map(|&i| xm.name_of(i as usize).to_string()).collect();
                        if key.k >= 0 {
                            DiskEntryJson { alpha, gamma, value: Some(named(&v, lm)), scalar: None }
                        } else {
                            let c = v.first().map(|x| x.1.clone()).unwrap_or_default();
                            DiskEntryJson { alpha, gamma, value: None, scalar: Some(fmt_q(&c)) }
                        }
                    })
                    .collect();
                DiskSlotJson { beta: key.beta.clone(), k: key.k, l: key.l, entries }
            })
            .collect();
        let spheres = d.spheres.as_ref().map(|s| {
            s.iter()
                .filter(|(_, t)| !t.entries.is_empty())
                .map(|((beta, l), t)| SphereSlotJson {
                    beta: beta.clone(),
                    l: *l,
                    entries: t
                        .entries
                        .iter()
                        .map(|(tup, v)| SphereEntryJson {
                            gamma: tup.iter().map(|&i| xm.name_of(i as usize).to_string()).collect(),
                            value: named(v, xm),
                        })
                        .collect(),
                })
                .collect()
        });
        BundleJson {
            format: FORMAT.into(),
            lattice: d.lattice.generators().to_vec(),
            variables: self
                .variable_names
                .iter()
                .zip(&self.ctx.var_degrees)
                .map(|(n, &degree)| VariableJson { name: n.clone(), degree })
                .collect(),
            model_l: model_to_json(lm),
            model_x: Some(model_to_json(xm)),
            relative: Some(relative),
            periods,
            correlators: CorrelatorsJson { disks, spheres },
            gamma: bulk_to_json(&self.gamma, xm),
            gamma_prime: self.gamma_prime.as_ref().map(|g| bulk_to_json(g, xm)),
            eta: self.eta.as_ref().map(|g| bulk_to_json(g, xm)),
            truncation: TruncationJson { energy: fmt_q(&d.bounds.energy), kmax: d.bounds.kmax, lmax: d.bounds.lmax },
            isotopy: self.t_degree_cap.map(|t_degree_cap| IsotopyJson { t_degree_cap }),
            sign_flags: SignFlagsJson { q_minus1_gw: d.gw_sign },
            provenance: self.provenance.clone(),
        }
    }

    /// Canonical pretty-printed JSON.
    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("bundle serializes");
        s.push('\n');
        s
    }
}

/// `r` as a map from `X` names to sparse vectors over `L`.
fn matrix_to_json_rect(r: &Mat, src: &CDGAModel, dst: &CDGAModel) -> BTreeMap<String, NamedVec> {
    (0..src.len())
        .filter_map(|j| {
            let col = crate::dgmodel::svec_from_dense(&r.column(j));
            (!col.is_empty()).then(|| (src.name_of(j).to_string(), named(&col, dst)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn minimal_circle() -> String {
        r#"{
            "format": "ainfty-bundle/1",
            "lattice": [{"name": "b1", "omega": "1", "mu": 2}],
            "model_L": {
                "name": "S1", "dim": 1,
                "basis": [{"name": "1", "degree": 0}, {"name": "θ", "degree": 1}],
                "unit": "1",
                "integral": {"θ": "1"}
            },
            "truncation": {"E": "2", "K_max": 3, "L_max": 1}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_bundle_parses_and_round_trips() {
        let b = parse_bundle_str(&minimal_circle()).unwrap();
        assert_eq!(b.data.pair.l.len(), 2);
        let r = b.data.pair.check();
        assert!(r.is_clean(), "{r}");
        let e1 = b.emit();
        let b2 = parse_bundle_str(&e1).unwrap();
        assert_eq!(b2.emit(), e1);
    }

    #[test]
    fn duplicate_basis_name_is_rejected() {
        let s = minimal_circle().replace(r#"{"name": "θ", "degree": 1}"#, r#"{"name": "1", "degree": 1}"#);
        let e = parse_bundle_str(&s).unwrap_err();
        assert!(e.errors.iter().any(|x| x.contains("duplicate basis name")), "{e}");
    }

    #[test]
    fn floats_and_bad_rationals_are_rejected() {
        let s = minimal_circle().replace(r#""omega": "1""#, r#""omega": 1.0"#);
        assert!(parse_bundle_str(&s).is_err());
        let s = minimal_circle().replace(r#"{"θ": "1"}"#, r#"{"θ": "1/0"}"#);
        let e = parse_bundle_str(&s).unwrap_err();
        assert!(e.errors.iter().any(|x| x.contains("zero denominator")), "{e}");
    }

    #[test]
    fn degree_law_violation_names_the_slot() {
        // q^{β1}_{1,0}(θ) has output degree 1 + 0 - 2 - 1 + 2 = 0, so a θ output is illegal.
        let s = minimal_circle().replace(
            r#""truncation""#,
            r#""correlators": {"disks": [{"beta": [1], "k": 1, "l": 0, "entries": [{"alpha": ["θ"], "value": {"θ": "1"}}]}]},
            "truncation""#,
        );
        let e = parse_bundle_str(&s).unwrap_err();
        assert!(e.errors.iter().any(|x| x.contains("degree law") && x.contains("k=1 l=0")), "{e}");
        let ok = s.replace(r#""value": {"θ": "1"}"#, r#""value": {"1": "-3/2"}"#);
        let b = parse_bundle_str(&ok).unwrap();
        assert_eq!(b.data.q_basis(&[1], &[1], &[]), vec![(0, q(-3) / q(2))]);
    }

    #[test]
    fn unknown_names_and_fields_are_reported() {
        let s = minimal_circle().replace(r#""unit": "1""#, r#""unit": "one""#);
        let e = parse_bundle_str(&s).unwrap_err();
        assert!(e.errors.iter().any(|x| x.contains("model_L.unit") && x.contains("one")), "{e}");
        let s = minimal_circle().replace(r#""dim": 1"#, r#""dim": 1, "colour": "red""#);
        assert!(parse_bundle_str(&s).is_err());
    }
}
