//! Derivative laws for a bulk deformation `γ = t0·1 + t1·σ`: differentiating
//! in `t0` only sees `m_0`, and differentiating in `t1` multiplies each energy
//! component by the period of `σ`.
//!
//! ```text
//! cargo run --release -p ainfty-core --example derivative_laws
//! ```

use std::sync::Arc;

use ainfty_core::ainfty::{check_thm_prop, DerivativeSetup};
use ainfty_core::dgmodel::standard;
use ainfty_core::generator::{generate, GeneratorOptions};
use ainfty_core::novikov::{DegreeLattice, RingContext, RingElement};
use ainfty_core::qops::Bounds;
use ainfty_core::rational::q;

fn main() {
    let pair = Arc::new(standard::torus_pair_nonminimal(&[q(1)]));
    let lattice = DegreeLattice::single(q(1), 2).unwrap();
    let bounds = Bounds { energy: q(2), kmax: 3, lmax: 2 };
    let g = generate(pair.clone(), lattice.clone(), bounds, &GeneratorOptions::default()).expect("generation");

    // |t0| = 2 so that t0·1 has degree 2; t1 is degree 0.
    let ctx = RingContext::new(lattice, vec![2, 0], q(2)).unwrap();
    let sigma = pair.x.index_of("σ").unwrap();
    let bulk = vec![(pair.x.unit, RingElement::var(&ctx, 0).unwrap()), (sigma, RingElement::var(&ctx, 1).unwrap())];
    let setup = DerivativeSetup { t_unit: 0, t_divisor: Some((1, sigma)) };
    let r = check_thm_prop(&g.data, &ctx, &bulk, &setup, 3).expect("derivative check");
    for (law, n) in r.counts_by_law() {
        println!("  {law}: {n} nonzero");
    }
    for note in &r.notes {
        println!("  note: {note}");
    }
    println!("{}: {} of {} nonzero", r.name, r.failures.len(), r.checked);
}
