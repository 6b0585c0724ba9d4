//! Command dispatch for the `ainfty` binary.
//!
//! Every command prints a deterministic report whose last line is
//! `residuals: X of N nonzero`; [`Outcome::exit_code`] is nonzero exactly when `X > 0`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::ainfty::{check_thm_prop, AInftyStructure, DerivativeSetup};
use crate::bundle::{parse_bundle, Bundle, BundleError};
use crate::coeff::{fmt_cvec, CoeffRing};
use crate::generator::{generate, GeneratorOptions};
use crate::isotopy::{
    build_gamma_tilde, build_isotopy, check_pseudo_isotopy, check_stokes, check_uniform_relations, gw_tilde, IntervalRing, IsotopyCheck,
};
use crate::novikov::RingElement;
use crate::qops::build_m;
use crate::rational::{fmt_q, parse_q};
use crate::report::Report;
use crate::signs::{
    cyclic_sign, delta_glue, enumerate_partitions, enumerate_splits, epsilon_k, iota, koszul_sign, Parity,
};

/// Default cap on the `τ`-degree of interval coefficients when a bundle has no `isotopy` section.
pub const DEFAULT_T_DEGREE_CAP: usize = 16;

#[derive(Parser, Debug)]
#[command(name = "ainfty", version, about = "Exact checks for curved cyclic unital A∞ structures over Novikov rings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalOpts,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalOpts {
    /// Override the energy cutoff E (a rational "p/q").
    #[arg(long = "truncation-E", global = true, value_name = "E")]
    pub truncation_e: Option<String>,
    /// Override K_max.
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    /// Seed for generation and randomized checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the recorded sign in front of the sphere term (1 or -1).
    #[arg(long = "flag-gw-sign", global = true, allow_hyphen_values = true)]
    pub flag_gw_sign: Option<i64>,
    /// Worker threads for the parallel checkers.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Run theorem-level checkers on data that fails the q-relations.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Model axioms of L, X and the restriction.
    CheckModel { bundle: PathBuf },
    /// The q-relations, the q_{-1}-relations and the sphere chain-map law.
    CheckCorrelators { bundle: PathBuf },
    /// Print m^γ for the bundle's γ.
    BuildM { bundle: PathBuf },
    /// A∞ relations of m^γ up to arity K_max.
    CheckAinfty { bundle: PathBuf },
    /// Tensor-level axioms: unit, fundamental class, divisor, energy zero, top degree, cyclic.
    CheckAxioms { bundle: PathBuf },
    /// Cyclic unital axioms of m^γ and the derivative laws in the bulk variables.
    CheckProperties {
        bundle: PathBuf,
        /// Variable multiplying the unit of X in γ (inferred when omitted).
        #[arg(long)]
        t_unit: Option<String>,
        /// `VAR=ELEMENT`: variable multiplying a closed relative degree-2 element in γ.
        #[arg(long)]
        divisor: Option<String>,
    },
    /// Print the pseudo-isotopy m̃ between m^γ and m^{γ'}.
    IsotopyBuild { bundle: PathBuf },
    /// Every pseudo-isotopy axiom, the uniform relations and the Stokes identity.
    IsotopyCheck { bundle: PathBuf },
    /// Solve for admissible correlators on the bundle's models, lattice and truncation.
    Generate {
        bundle: PathBuf,
        /// Where to write the generated bundle (stdout when omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Skip the random exact terms added at slots nothing else reads
        #[arg(long)]
        no_gauge: bool,
        /// Do not average boundary tensors over cyclic rotations
        #[arg(long)]
        no_cyclic: bool,
        /// Produce no sphere channel
        #[arg(long)]
        no_sphere: bool,
        /// Do not seed q_{0,0} with a multiple of the unit
        #[arg(long)]
        no_curvature: bool,
    },
    /// Sign tables for audit.
    DumpSigns(DumpSigns),
}

#[derive(Args, Debug, Clone)]
pub struct DumpSigns {
    /// `k=K`: ε over all boundary degrees.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// `k=K,l=L`: ι over partitions and interior splits.
    #[arg(long)]
    pub iota: Option<String>,
    /// `k=K`: δ for every gluing with k1 + k2 = K + 1.
    #[arg(long)]
    pub delta: Option<String>,
    /// `k=K`: the cyclic-rotation sign on K inputs.
    #[arg(long)]
    pub cyclic: Option<String>,
    /// `l=L`: Koszul signs of interior splits.
    #[arg(long)]
    pub koszul: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub n: i64,
    /// Largest form degree enumerated.
    #[arg(long, default_value_t = 3)]
    pub max_deg: i64,
    /// Number of interior inputs for ε.
    #[arg(long, default_value_t = 0)]
    pub l: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Bundle(#[from] BundleError),
    #[error("{0}")]
    Input(String),
}

/// Text, counts and an optional bundle to write.
#[derive(Debug, Default)]
pub struct Outcome {
    pub text: String,
    pub checked: usize,
    pub nonzero: usize,
    pub bundle: Option<String>,
}

impl Outcome {
    fn from_reports(reports: &[Report], prefix: String) -> Outcome {
        let mut text = prefix;
        let (mut checked, mut nonzero) = (0, 0);
        for r in reports {
            let _ = write!(text, "{r}");
            checked += r.checked;
            nonzero += r.failures.len();
        }
        let _ = writeln!(text, "residuals: {nonzero} of {checked} nonzero");
        Outcome { text, checked, nonzero, bundle: None }
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.nonzero > 0)
    }
}

/// Applies the global overrides; bulk elements move to the new ring context.
pub fn apply_overrides(b: &mut Bundle, g: &GlobalOpts) -> Result<Vec<String>, CliError> {
    let mut notes = Vec::new();
    if let Some(e) = &g.truncation_e {
        let e = parse_q(e).map_err(CliError::Input)?;
        notes.push(format!("override: E = {}", fmt_q(&e)));
        b.data.bounds.energy = e.clone();
        let ctx = b.ctx.with_cutoff(e);
        let move_to = |v: &[(usize, RingElement)]| -> Vec<(usize, RingElement)> {
            v.iter()
                .map(|(j, c)| (*j, RingElement::from_json_terms(&ctx, &c.to_json_terms()).expect("same shape")))
                .filter(|(_, c)| !c.is_zero())
                .collect()
        };
        b.gamma = move_to(&b.gamma);
        b.gamma_prime = b.gamma_prime.as_deref().map(move_to);
        b.eta = b.eta.as_deref().map(move_to);
        b.ctx = ctx;
    }
    if let Some(k) = g.kmax {
        notes.push(format!("override: K_max = {k}"));
        b.data.bounds.kmax = k;
    }
    if let Some(s) = g.flag_gw_sign {
        if s != 1 && s != -1 {
            return Err(CliError::Input("--flag-gw-sign must be 1 or -1".into()));
        }
        notes.push(format!("override: sphere sign = {s}"));
        b.data.gw_sign = s;
    }
    Ok(notes)
}

fn header(cmd: &str, b: &Bundle, notes: &[String]) -> String {
    let d = &b.data;
    let mut s = format!(
        "{cmd}: L={} X={} E={} K_max={} L_max={}\n",
        d.pair.l.name,
        d.pair.x.name,
        fmt_q(&d.bounds.energy),
        d.bounds.kmax,
        d.bounds.lmax
    );
    for n in notes {
        let _ = writeln!(s, "{n}");
    }
    s
}

/// Runs the admissibility checks. Theorem-level commands report failing q-relations as
/// their residuals and skip the theorem check, unless forced.
fn admissibility(cmd: &str, b: &Bundle, force: bool, notes: &mut Vec<String>) -> Option<Outcome> {
    let data = &b.data;
    let mut r = data.check_q_relations();
    if data.spheres.is_some() {
        r.merge(data.check_q_minus1_relations());
    }
    if r.is_clean() {
        return None;
    }
    if force {
        notes.push(format!("forced: data fail {} q-relation residual(s)", r.failures.len()));
        return None;
    }
    notes.push(format!("data are not admissible; {cmd} skipped (use --force to run it anyway)"));
    Some(Outcome::from_reports(&[r], header(cmd, b, notes)))
}

fn fmt_structure<R: CoeffRing>(m: &AInftyStructure<R>) -> (String, usize) {
    let names = |i: usize| m.model.name_of(i).to_string();
    let mut s = String::new();
    let mut count = 0;
    for (k, table) in m.ops.iter().enumerate() {
        for (t, v) in table {
            count += 1;
            let _ = writeln!(s, "m_{k}{} = {}", m.fmt_tuple(t), fmt_cvec(&m.ring, v, &names));
        }
    }
    if !m.ring.is_zero(&m.m_minus1) {
        count += 1;
        let _ = writeln!(s, "m_-1 = {}", m.m_minus1);
    }
    (s, count)
}

/// Finds `a` with `∂_a γ = e` exactly.
fn variable_for(b: &Bundle, target: usize) -> Option<usize> {
    (0..b.ctx.nvars()).find(|&a| {
        b.gamma.iter().all(|(j, c)| {
            let want = if *j == target { RingElement::one(&b.ctx) } else { RingElement::zero(&b.ctx) };
            c.tderiv(a).ok().and_then(|d| d.try_add(&want.neg()).ok()).is_some_and(|x| x.is_zero())
        }) && b.gamma.iter().any(|(j, _)| *j == target)
    })
}

fn var_index(b: &Bundle, name: &str) -> Result<usize, CliError> {
    b.variable_names.iter().position(|v| v == name).ok_or_else(|| CliError::Input(format!("unknown variable {name:?}")))
}

fn derivative_setup(b: &Bundle, t_unit: Option<&str>, divisor: Option<&str>) -> Result<DerivativeSetup, CliError> {
    let xm = &b.data.pair.x;
    let t_unit = match t_unit {
        Some(n) => var_index(b, n)?,
        None => variable_for(b, xm.unit).ok_or_else(|| CliError::Input("γ has no t·1 term; pass --t-unit".into()))?,
    };
    let t_divisor = match divisor {
        Some(s) => {
            let (v, e) = s.split_once('=').ok_or_else(|| CliError::Input("--divisor takes VAR=ELEMENT".into()))?;
            let j = xm.index_of(e).map_err(|e| CliError::Input(e.to_string()))?;
            Some((var_index(b, v)?, j))
        }
        None => {
            let z2 = b.data.pair.closed_relative_deg2().unwrap_or_default();
            z2.iter().find_map(|&j| variable_for(b, j).filter(|&a| a != t_unit).map(|a| (a, j)))
        }
    };
    Ok(DerivativeSetup { t_unit, t_divisor })
}

fn interval_ring(b: &Bundle) -> IntervalRing {
    IntervalRing { ctx: b.ctx.clone(), tcap: b.t_degree_cap.unwrap_or(DEFAULT_T_DEGREE_CAP) }
}

fn isotopy_inputs(b: &Bundle) -> Result<(&[(usize, RingElement)], &[(usize, RingElement)]), CliError> {
    let gp = b.gamma_prime.as_deref().ok_or_else(|| CliError::Input("bundle has no gamma_prime section".into()))?;
    let eta = b.eta.as_deref().ok_or_else(|| CliError::Input("bundle has no eta section".into()))?;
    Ok((gp, eta))
}

/// Executes one command on a parsed bundle.
pub fn run(cmd: &Command, mut b: Bundle, g: &GlobalOpts) -> Result<Outcome, CliError> {
    let mut notes = apply_overrides(&mut b, g)?;
    let kmax = b.data.bounds.kmax;
    let data = &b.data;
    match cmd {
        Command::CheckModel { .. } => {
            let r = data.pair.check();
            Ok(Outcome::from_reports(&[r], header("check-model", &b, &notes)))
        }
        Command::CheckCorrelators { .. } => {
            let mut rs = vec![data.validate(), data.check_q_relations()];
            if data.spheres.is_some() {
                rs.push(data.check_q_minus1_relations());
                rs.push(data.check_chain_map());
            }
            Ok(Outcome::from_reports(&rs, header("check-correlators", &b, &notes)))
        }
        Command::CheckAxioms { .. } => {
            let rs = vec![data.check_axioms_on_data(), data.check_cyclic_tensors()];
            Ok(Outcome::from_reports(&rs, header("check-axioms", &b, &notes)))
        }
        Command::BuildM { .. } => {
            let m = build_m(data, &b.ctx, &b.gamma, kmax).map_err(|e| CliError::Input(e.to_string()))?;
            let (s, count) = fmt_structure(&m);
            let mut text = header("build-m", &b, &notes);
            text.push_str(&s);
            let _ = writeln!(text, "operations: {count} nonzero basis entries");
            let _ = writeln!(text, "residuals: 0 of 0 nonzero");
            Ok(Outcome { text, ..Default::default() })
        }
        Command::CheckAinfty { .. } => {
            if let Some(o) = admissibility("check-ainfty", &b, g.force, &mut notes) {
                return Ok(o);
            }
            let m = build_m(data, &b.ctx, &b.gamma, kmax).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(Outcome::from_reports(&[m.check_ainfty()], header("check-ainfty", &b, &notes)))
        }
        Command::CheckProperties { t_unit, divisor, .. } => {
            if let Some(o) = admissibility("check-properties", &b, g.force, &mut notes) {
                return Ok(o);
            }
            let setup = derivative_setup(&b, t_unit.as_deref(), divisor.as_deref())?;
            notes.push(format!(
                "t_unit = {}{}",
                b.variable_names[setup.t_unit],
                setup.t_divisor.map_or(String::new(), |(a, j)| format!(", divisor {} along {}", b.variable_names[a], data.pair.x.name_of(j)))
            ));
            let m = build_m(data, &b.ctx, &b.gamma, kmax).map_err(|e| CliError::Input(e.to_string()))?;
            let props = check_thm_prop(data, &b.ctx, &b.gamma, &setup, kmax).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(Outcome::from_reports(&[m.check_cyclic_unital(), props], header("check-properties", &b, &notes)))
        }
        Command::IsotopyBuild { .. } => {
            let (gp, eta) = isotopy_inputs(&b)?;
            let ring = interval_ring(&b);
            let gt = build_gamma_tilde(data, &ring, &b.gamma, gp, eta).map_err(|e| CliError::Input(e.to_string()))?;
            let m = build_isotopy(data, &ring, &gt, kmax);
            let (s, count) = fmt_structure(&m);
            let mut text = header("isotopy-build", &b, &notes);
            for (j, c) in &gt {
                let _ = writeln!(text, "γ̃[{}] = {c}", data.pair.x.name_of(*j));
            }
            text.push_str(&s);
            let _ = writeln!(text, "operations: {count} nonzero basis entries");
            let _ = writeln!(text, "residuals: 0 of 0 nonzero");
            Ok(Outcome { text, ..Default::default() })
        }
        Command::IsotopyCheck { .. } => {
            if let Some(o) = admissibility("isotopy-check", &b, g.force, &mut notes) {
                return Ok(o);
            }
            let (gp, eta) = isotopy_inputs(&b)?;
            let ring = interval_ring(&b);
            let gt = build_gamma_tilde(data, &ring, &b.gamma, gp, eta).map_err(|e| CliError::Input(e.to_string()))?;
            let m = build_isotopy(data, &ring, &gt, kmax);
            let mut opts = IsotopyCheck::default();
            if let Some(s) = g.seed {
                opts.seed = s;
            }
            let gw = if data.spheres.is_some() {
                gw_tilde(data, &ring, &gt)
            } else {
                notes.push("no sphere channel: G̃W ≡ 0".into());
                ring.zero()
            };
            let iso = check_pseudo_isotopy(data, &m, &b.gamma, gp, &gt, &opts).map_err(|e| CliError::Input(e.to_string()))?;
            let uni = check_uniform_relations(data, &m, &gw, &opts);
            let stokes = check_stokes(&data.pair.l, &ring, 3);
            Ok(Outcome::from_reports(&[iso, uni, stokes], header("isotopy-check", &b, &notes)))
        }
        Command::Generate { no_gauge, no_cyclic, no_sphere, no_curvature, .. } => {
            let mut opts = GeneratorOptions { gw_sign: data.gw_sign, ..Default::default() };
            if let Some(s) = g.seed {
                opts.seed = s;
            }
            opts.gauge = !no_gauge;
            opts.cyclic = !no_cyclic;
            opts.sphere = !no_sphere;
            opts.curvature_seed = !no_curvature;
            let out = generate(data.pair.clone(), data.lattice.clone(), data.bounds.clone(), &opts)
                .map_err(|e| CliError::Input(format!("generation failed: {e}")))?;
            let order: Vec<String> = out.order.iter().map(|s| s.to_string()).collect();
            let mut nb = Bundle {
                data: out.data,
                provenance: Some(json!({ "generator": { "options": opts, "order": order } })),
                ..b.clone()
            };
            nb.data.bounds = b.data.bounds.clone();
            let mut o = Outcome::from_reports(&[out.report], header("generate", &b, &notes));
            o.bundle = Some(nb.emit());
            Ok(o)
        }
        Command::DumpSigns(_) => unreachable!("dump-signs takes no bundle"),
    }
}

fn parse_kv(s: &str) -> Result<Vec<(String, i64)>, CliError> {
    s.split(',')
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| CliError::Input(format!("expected key=value, found {p:?}")))?;
            let v: i64 = v.trim().parse().map_err(|_| CliError::Input(format!("bad integer in {p:?}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn get(kv: &[(String, i64)], key: &str) -> Result<i64, CliError> {
    kv.iter().find(|(k, _)| k == key).map(|x| x.1).ok_or_else(|| CliError::Input(format!("missing {key}=")))
}

fn degree_tuples(len: usize, max: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out.into_iter().flat_map(|t| (0..=max).map(move |d| [t.clone(), vec![d]].concat())).collect();
    }
    out
}

fn sgn(p: Parity) -> &'static str {
    if p.is_odd() {
        "-1"
    } else {
        "+1"
    }
}

/// Sign tables, one line per input.
pub fn dump_signs(o: &DumpSigns) -> Result<Outcome, CliError> {
    let mut text = String::new();
    let mut rows = 0;
    if let Some(s) = &o.epsilon {
        let k = get(&parse_kv(s)?, "k")?;
        let _ = writeln!(text, "epsilon k={k} l={} n={}", o.l, o.n);
        for a in degree_tuples(k.max(0) as usize, o.max_deg) {
            for gdeg in degree_tuples(o.l, o.max_deg) {
                let _ = writeln!(text, "  α={a:?} γ={gdeg:?} {}", sgn(epsilon_k(k, &a, &gdeg, o.n)));
                rows += 1;
            }
        }
    }
    if let Some(s) = &o.iota {
        let kv = parse_kv(s)?;
        let (k, l) = (get(&kv, "k")? as usize, get(&kv, "l")? as usize);
        let _ = writeln!(text, "iota k={k} l={l}");
        for a in degree_tuples(k, o.max_deg) {
            for gdeg in degree_tuples(l, o.max_deg) {
                for p in enumerate_partitions(k) {
                    for sp in enumerate_splits(l) {
                        let _ = writeln!(
                            text,
                            "  α={a:?} γ={gdeg:?} i1={} i2={} I={:?} {}",
                            p.i1,
                            p.i2,
                            sp.i,
                            sgn(iota(&a, &gdeg, &p, &sp))
                        );
                        rows += 1;
                    }
                }
            }
        }
    }
    if let Some(s) = &o.delta {
        let k = get(&parse_kv(s)?, "k")?;
        let _ = writeln!(text, "delta k={k} n={}", o.n);
        for k2 in 0..=k {
            let k1 = k + 1 - k2;
            for i in 1..=k1 {
                let _ = writeln!(text, "  k1={k1} k2={k2} i={i} {}", sgn(delta_glue(k1, k2, i, o.n)));
                rows += 1;
            }
        }
    }
    if let Some(s) = &o.cyclic {
        let k = get(&parse_kv(s)?, "k")? as usize;
        let _ = writeln!(text, "cyclic k={k}");
        for d in degree_tuples(k, o.max_deg) {
            let _ = writeln!(text, "  degs={d:?} {}", sgn(cyclic_sign(&d)));
            rows += 1;
        }
    }
    if let Some(s) = &o.koszul {
        let l = get(&parse_kv(s)?, "l")? as usize;
        let _ = writeln!(text, "koszul l={l}");
        for d in degree_tuples(l, o.max_deg) {
            for sp in enumerate_splits(l) {
                let _ = writeln!(text, "  degs={d:?} I={:?} {}", sp.i, sgn(koszul_sign(&sp, &d)));
                rows += 1;
            }
        }
    }
    if rows == 0 && text.is_empty() {
        return Err(CliError::Input("choose a table: --epsilon, --iota, --delta, --cyclic or --koszul".into()));
    }
    let _ = writeln!(text, "rows: {rows}");
    let _ = writeln!(text, "residuals: 0 of 0 nonzero");
    Ok(Outcome { text, ..Default::default() })
}

fn bundle_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::CheckModel { bundle }
        | Command::CheckCorrelators { bundle }
        | Command::BuildM { bundle }
        | Command::CheckAinfty { bundle }
        | Command::CheckAxioms { bundle }
        | Command::CheckProperties { bundle, .. }
        | Command::IsotopyBuild { bundle }
        | Command::IsotopyCheck { bundle }
        | Command::Generate { bundle, .. } => Some(bundle),
        Command::DumpSigns(_) => None,
    }
}

/// Parses the bundle (if any) and runs the command.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(j) = cli.global.jobs {
        // A second initialisation (tests calling this twice) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    match bundle_path(&cli.command) {
        None => match &cli.command {
            Command::DumpSigns(d) => dump_signs(d),
            _ => unreachable!(),
        },
        Some(p) => run(&cli.command, parse_bundle(p)?, &cli.global),
    }
}
