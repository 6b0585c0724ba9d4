//! Generates admissible correlator data on `T² ⊂ T² × S²`, runs every
//! data-level checker, and verifies the A∞ relations of the deformation by
//! `γ = t·σ`.
//!
//! ```text
//! cargo run --release -p ainfty-core --example generate_and_verify [-- SEED]
//! ```

use std::sync::Arc;

use ainfty_core::dgmodel::standard;
use ainfty_core::generator::{generate, primitive_dependence, summary, GeneratorOptions};
use ainfty_core::novikov::{DegreeLattice, RingContext, RingElement};
use ainfty_core::qops::{build_m, Bounds};
use ainfty_core::rational::q;

fn main() {
    let seed = std::env::args().nth(1).map(|s| s.parse().expect("seed")).unwrap_or(1);
    let pair = Arc::new(standard::torus_pair_nonminimal(&[q(1)]));
    let lattice = DegreeLattice::single(q(1), 2).unwrap();
    let bounds = Bounds { energy: q(2), kmax: 3, lmax: 2 };
    let opts = GeneratorOptions { seed, ..GeneratorOptions::default() };
    let g = generate(pair.clone(), lattice.clone(), bounds, &opts).expect("generation");

    println!("nonzero coefficients per slot:");
    for (beta, k, l, nnz) in summary(&g.data) {
        println!("  β={beta:?} k={k} l={l}: {nnz}");
    }
    println!("slots reading the primitive: {}", primitive_dependence(&g.data));

    let d = &g.data;
    for r in [d.validate(), d.check_q_relations(), d.check_q_minus1_relations(), d.check_chain_map(), d.check_axioms_on_data()] {
        println!("{}: {} of {} nonzero", r.name, r.failures.len(), r.checked);
    }

    let ctx = RingContext::new(lattice, vec![0], q(2)).unwrap();
    let sigma = pair.x.index_of("σ").unwrap();
    let m = build_m(d, &ctx, &[(sigma, RingElement::var(&ctx, 0).unwrap())], 3).expect("build m");
    let r = m.check_ainfty();
    println!("A∞ relations for γ = t·σ: {} of {} nonzero", r.failures.len(), r.checked);
}
