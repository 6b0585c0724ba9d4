//! Interpolates between `γ = t·σ` and `γ' = γ - d(t·η)` over the interval,
//! builds the pseudo-isotopy and checks its relations, its restrictions to the
//! endpoints, and the uniform relations.
//!
//! ```text
//! cargo run --release -p ainfty-core --example pseudo_isotopy
//! ```

use std::sync::Arc;

use ainfty_core::dgmodel::standard;
use ainfty_core::generator::{generate, GeneratorOptions};
use ainfty_core::isotopy::{
    build_gamma_tilde, build_isotopy, check_pseudo_isotopy, check_uniform_relations, gw_tilde, IntervalRing, IsotopyCheck,
};
use ainfty_core::novikov::{DegreeLattice, RingContext, RingElement};
use ainfty_core::qops::Bounds;
use ainfty_core::rational::q;

fn main() {
    let pair = Arc::new(standard::torus_pair_nonminimal(&[q(1)]));
    let lattice = DegreeLattice::single(q(1), 2).unwrap();
    let bounds = Bounds { energy: q(2), kmax: 3, lmax: 2 };
    let g = generate(pair.clone(), lattice.clone(), bounds, &GeneratorOptions::default()).expect("generation");
    let data = &g.data;

    let ring = IntervalRing { ctx: RingContext::new(lattice, vec![0], q(2)).unwrap(), tcap: 16 };
    let t = RingElement::var(&ring.ctx, 0).unwrap();
    let xm = &pair.x;
    let (sigma, eta) = (xm.index_of("σ").unwrap(), xm.index_of("η").unwrap());
    let gamma = vec![(sigma, t.clone())];
    let mut gamma_prime = gamma.clone();
    for (j, c) in xm.d_col(eta) {
        gamma_prime.push((*j, t.scale(&-c.clone())));
    }
    let primitive = vec![(eta, t)];

    let gt = build_gamma_tilde(data, &ring, &gamma, &gamma_prime, &primitive).expect("interpolation");
    let m = build_isotopy(data, &ring, &gt, 3);
    let gw = gw_tilde(data, &ring, &gt);
    let opts = IsotopyCheck::default();
    let iso = check_pseudo_isotopy(data, &m, &gamma, &gamma_prime, &gt, &opts).expect("isotopy check");
    let uni = check_uniform_relations(data, &m, &gw, &opts);
    for r in [iso, uni] {
        println!("{}: {} of {} nonzero", r.name, r.failures.len(), r.checked);
        for n in &r.notes {
            println!("  note: {n}");
        }
    }
}
