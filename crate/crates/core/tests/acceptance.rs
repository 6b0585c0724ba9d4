//! The acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stdout so it shows in `cargo test` output without `--nocapture`.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use ainfty_core::ainfty::{check_thm_prop, DerivativeSetup};
use ainfty_core::dgmodel::standard;
use ainfty_core::generator::{primitive_dependence, Generated, GeneratorOptions};
use ainfty_core::isotopy::{
    build_gamma_tilde, build_isotopy, check_pseudo_isotopy, check_stokes, check_uniform_relations, gw_tilde, IntervalRing,
    IsotopyCheck,
};
use ainfty_core::novikov::{DegreeLattice, RingContext, RingElement};
use ainfty_core::qops::{all_tuples, build_m, Bounds, CorrelatorData};
use ainfty_core::rational::q;
use ainfty_core::signs::{
    cyclic_sign, delta_glue, enumerate_partitions, enumerate_splits, epsilon_k, iota, koszul_sign, permutation_sign, Parity,
};
use common::*;

type Outcome = Result<String, String>;

fn generated() -> &'static Generated {
    static G: OnceLock<Generated> = OnceLock::new();
    G.get_or_init(|| t2_generate(3, &GeneratorOptions::default()))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn clean(reports: &[ainfty_core::report::Report]) -> Result<usize, String> {
    let bad = nonzero(reports);
    let checked: usize = reports.iter().map(|r| r.checked).sum();
    if bad == 0 {
        Ok(checked)
    } else {
        let first = reports.iter().flat_map(|r| r.failures.first()).next().unwrap();
        Err(format!("{bad} of {checked} nonzero; first: {} at {}: {}", first.law, first.location, first.residual))
    }
}

/// Energy zero on the circle and T² with the trivial lattice.
fn ac1() -> Outcome {
    let lat = DegreeLattice::new(vec![]).unwrap();
    let ctx = RingContext::new(lat.clone(), vec![], q(1)).unwrap();
    let mut parts = Vec::new();
    for pair in [standard::circle_in_sphere(&[]), standard::torus_pair(&[])] {
        let lm = pair.l.clone();
        let data = CorrelatorData::new(Arc::new(pair), lat.clone(), Bounds { energy: q(1), kmax: 4, lmax: 1 });
        let m = build_m(&data, &ctx, &[], 4).map_err(|e| e.to_string())?;
        let nb = lm.len();
        for k in 0..=5usize {
            for t in all_tuples(&vec![nb; k]) {
                let got = m.op_basis(&t).cloned().unwrap_or_default();
                let want: Vec<(usize, ainfty_core::rational::Q)> = match k {
                    1 => lm.d_col(t[0] as usize).clone(),
                    2 => {
                        let s = Parity::of(lm.deg(t[0] as usize));
                        lm.mul_basis(t[0] as usize, t[1] as usize).iter().map(|(o, c)| (*o, s.apply(c.clone()))).collect()
                    }
                    _ => vec![],
                };
                let got: Vec<(usize, ainfty_core::rational::Q)> = got.iter().map(|(o, c)| (*o, c.constant_term())).collect();
                ensure(got == want, || format!("{}: m_{k}{} = {got:?}, expected {want:?}", lm.name, m.fmt_tuple(&t)))?;
            }
        }
        let n = clean(&[m.check_ainfty(), m.check_cyclic_unital()])?;
        parts.push(format!("{}: 0 of {n}", lm.name));
    }
    Ok(parts.join(", "))
}

/// Sign functions against the naive evaluator, exhaustively.
fn ac2() -> Outcome {
    let mut count = 0usize;
    let sgn = |p: Parity| p.sign();
    for n in 0..=3i64 {
        for k in -1..=4i64 {
            for a in degree_tuples(k.max(0) as usize, 3) {
                for l in 0..=3 {
                    for g in degree_tuples(l, 3) {
                        count += 1;
                        ensure(sgn(epsilon_k(k, &a, &g, n)) == naive_epsilon(k, &a, &g, n), || format!("ε k={k} α={a:?} γ={g:?} n={n}"))?;
                    }
                }
            }
        }
    }
    for k in 0..=4usize {
        let parts = enumerate_partitions(k);
        for a in degree_tuples(k, 3) {
            for l in 0..=3usize {
                let splits = enumerate_splits(l);
                for g in degree_tuples(l, 3) {
                    for p in &parts {
                        for s in &splits {
                            count += 1;
                            let in_i: Vec<bool> = (0..l).map(|j| s.i.contains(&j)).collect();
                            ensure(sgn(iota(&a, &g, p, s)) == naive_iota(&a, &g, p.i1, &in_i), || {
                                format!("ι α={a:?} γ={g:?} {p:?} I={:?}", s.i)
                            })?;
                        }
                    }
                }
            }
        }
    }
    for n in 0..=3i64 {
        for k1 in 0..=4i64 {
            for k2 in 0..=4i64 {
                for i in 0..=k1 {
                    count += 1;
                    ensure(sgn(delta_glue(k1, k2, i, n)) == naive_delta(k1, k2, i, n), || format!("δ {k1} {k2} {i} {n}"))?;
                }
            }
        }
    }
    for len in 1..=5usize {
        for d in degree_tuples(len, 3) {
            count += 1;
            ensure(sgn(cyclic_sign(&d)) == naive_cyclic(&d), || format!("cyclic {d:?}"))?;
        }
    }
    for l in 0..=3usize {
        for d in degree_tuples(l, 3) {
            for s in enumerate_splits(l) {
                count += 1;
                let seq: Vec<usize> = s.i.iter().chain(&s.j).copied().collect();
                ensure(sgn(koszul_sign(&s, &d)) == naive_reorder_sign(seq.clone(), &d), || format!("koszul {d:?} I={:?}", s.i))?;
                ensure(sgn(permutation_sign(&seq, &d)) == naive_reorder_sign(seq, &d), || format!("permutation {d:?}"))?;
            }
        }
    }
    Ok(format!("{count} evaluations agree"))
}

/// Generator closure on T² and `m^γ` for `γ = t·σ`.
fn ac3() -> Outcome {
    let g = generated();
    ensure(g.report.is_clean(), || format!("generator report: {}", g.report))?;
    let n = clean(&data_reports(&g.data))?;
    let pair = &g.data.pair;
    let z2 = pair.closed_relative_deg2()?;
    let sigma = pair.x.index_of("σ").map_err(|e| e.to_string())?;
    ensure(z2.contains(&sigma), || "σ is not a closed relative degree-2 element".into())?;
    let ctx = RingContext::new(t2_lattice(), vec![0], q(2)).unwrap();
    let bulk = vec![(sigma, RingElement::var(&ctx, 0).unwrap())];
    let m = build_m(&g.data, &ctx, &bulk, 3).map_err(|e| e.to_string())?;
    let r = m.check_ainfty();
    let na = clean(std::slice::from_ref(&r))?;
    Ok(format!("data 0 of {n}, check_ainfty for γ = t·σ 0 of {na}"))
}

/// Single-coefficient mutations: every stored coefficient of the generated data, one at a time.
fn ac4() -> Outcome {
    let data = &generated().data;
    let (tail, body): (Vec<Site>, Vec<Site>) = mutation_sites(data).into_iter().partition(|s| in_invisible_tail(data, s));
    ensure(body.len() >= 50, || format!("only {} mutation sites outside the tail", body.len()))?;
    let mut survivors = Vec::new();
    for s in &body {
        if !mutation_killed(&mutate(data, s, &q(1))) {
            survivors.push(s.describe(data));
        }
    }
    let tail_killed = tail.iter().filter(|s| mutation_killed(&mutate(data, s, &q(1)))).count();
    let killed = body.len() - survivors.len();
    let detail = format!("{killed} of {} killed; tail: {tail_killed} of {} killed (exempt)", body.len(), tail.len());
    let detail = format!("{detail}; survivors: {}", if survivors.is_empty() { "none".into() } else { survivors.join("; ") });
    ensure(killed * 100 >= 95 * body.len(), || detail.clone())?;
    Ok(detail)
}

/// Derivative laws with `γ = t0·1 + t1·σ + t2·ζ`.
fn ac5() -> Outcome {
    let data = &generated().data;
    let xm = &data.pair.x;
    let ctx = RingContext::new(t2_lattice(), vec![2, 0, 0], q(2)).unwrap();
    let var = |a| RingElement::var(&ctx, a).unwrap();
    let sigma = xm.index_of("σ").map_err(|e| e.to_string())?;
    let zeta = xm.index_of("ζ").map_err(|e| e.to_string())?;
    let bulk = vec![(xm.unit, var(0)), (sigma, var(1)), (zeta, var(2))];
    let setup = DerivativeSetup { t_unit: 0, t_divisor: Some((1, sigma)) };
    let r = check_thm_prop(data, &ctx, &bulk, &setup, 3).map_err(|e| e.to_string())?;
    let n = clean(std::slice::from_ref(&r))?;
    Ok(format!("0 of {n} for k ≤ 3"))
}

fn isotopy_run(g: &Generated, label: &str) -> Outcome {
    let data = &g.data;
    let xm = &data.pair.x;
    let ring = IntervalRing { ctx: RingContext::new(t2_lattice(), vec![0], q(2)).unwrap(), tcap: 16 };
    let t = RingElement::var(&ring.ctx, 0).unwrap();
    let sigma = xm.index_of("σ").map_err(|e| e.to_string())?;
    let eta = xm.index_of("η").map_err(|e| e.to_string())?;
    // γ′ = γ + d(-t·η); the interpolation takes the primitive of γ - γ′.
    let gamma = vec![(sigma, t.clone())];
    let mut gamma_prime = gamma.clone();
    for (j, c) in xm.d_col(eta) {
        gamma_prime.push((*j, t.scale(&-c.clone())));
    }
    let primitive = vec![(eta, t.clone())];
    let gt = build_gamma_tilde(data, &ring, &gamma, &gamma_prime, &primitive).map_err(|e| e.to_string())?;
    let m = build_isotopy(data, &ring, &gt, 3);
    let moves = m.ops.iter().flat_map(|t| t.values()).flat_map(|v| v.values()).any(|c| !c.b.is_empty());
    ensure(moves, || format!("{label}: the isotopy has no dτ component"))?;
    let gw = gw_tilde(data, &ring, &gt);
    if data.spheres.is_none() {
        ensure(ring_is_zero(&ring, &gw), || format!("{label}: G̃W is nonzero without a sphere channel"))?;
    }
    let opts = IsotopyCheck::default();
    let iso = check_pseudo_isotopy(data, &m, &gamma, &gamma_prime, &gt, &opts).map_err(|e| e.to_string())?;
    let uni = check_uniform_relations(data, &m, &gw, &opts);
    let note = uni.notes.iter().find(|n| n.contains("k = -1")).cloned().unwrap_or_default();
    let n = clean(&[iso, uni])?;
    Ok(format!("{label}: 0 of {n} ({note})"))
}

fn ring_is_zero(ring: &IntervalRing, x: &ainfty_core::isotopy::IElem) -> bool {
    use ainfty_core::coeff::CoeffRing;
    ring.is_zero(x)
}

/// Pseudo-isotopy between `γ` and `γ + dη` with the sphere channel under both
/// recorded signs, and without a sphere channel.
fn ac6() -> Outcome {
    let g = generated();
    ensure(primitive_dependence(&g.data) > 0, || "generated data reads no primitive".into())?;
    let mut parts = vec![isotopy_run(g, "sphere sign +1")?];
    let neg = t2_generate(3, &GeneratorOptions { gw_sign: -1, ..GeneratorOptions::default() });
    parts.push(isotopy_run(&neg, "sphere sign -1")?);
    let none = t2_generate(3, &GeneratorOptions { sphere: false, ..GeneratorOptions::default() });
    parts.push(isotopy_run(&none, "no sphere channel")?);
    Ok(parts.join("; "))
}

/// Stokes pairing identity on basis polynomials of t-degree ≤ 3.
fn ac7() -> Outcome {
    let mut parts = Vec::new();
    for model in [standard::circle(), standard::torus(), standard::torus_nonminimal()] {
        let ring = IntervalRing { ctx: RingContext::new(t2_lattice(), vec![0], q(2)).unwrap(), tcap: 8 };
        let r = check_stokes(&model, &ring, 3);
        let n = clean(std::slice::from_ref(&r))?;
        parts.push(format!("{}: 0 of {n}", model.name));
    }
    Ok(parts.join(", "))
}

/// `check_ainfty` against the brute-force oracle on 100 instances.
fn ac8() -> Outcome {
    let mut failing = 0;
    for i in 0..100u64 {
        let m = random_instance(i);
        let bad = compare_with_oracle(&m).map_err(|e| format!("instance {i}: {e}"))?;
        if bad > 0 {
            failing += 1;
        }
    }
    Ok(format!("100 instances agree ({failing} with nonzero residuals)"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("energy-zero soundness", ac1),
        ("sign formulas vs naive evaluator", ac2),
        ("generator/verifier closure", ac3),
        ("mutation kill rate", ac4),
        ("derivative laws", ac5),
        ("pseudo-isotopy end to end", ac6),
        ("Stokes pairing identity", ac7),
        ("oracle equivalence", ac8),
    ];
    let mut failed = Vec::new();
    let out = std::io::stdout();
    // libtest has already printed "test acceptance_criteria ... " without a newline.
    out.lock().write_all(b"\n").unwrap();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        let line = match &res {
            Ok(d) => format!("AC{} PASS {name}: {d} [{secs:.1}s]\n", i + 1),
            Err(e) => format!("AC{} FAIL {name}: {e} [{secs:.1}s]\n", i + 1),
        };
        let mut lock = out.lock();
        lock.write_all(line.as_bytes()).unwrap();
        lock.flush().unwrap();
        if res.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
