//! Energy zero: with the trivial lattice the operations collapse to the dg
//! algebra of the circle, `m_1 = d` and `m_2(a, b) = (-1)^{|a|} a∧b`, and
//! every higher operation vanishes.
//!
//! ```text
//! cargo run --release -p ainfty-core --example energy_zero
//! ```

use std::sync::Arc;

use ainfty_core::dgmodel::standard;
use ainfty_core::novikov::{DegreeLattice, RingContext};
use ainfty_core::qops::{all_tuples, build_m, Bounds, CorrelatorData};
use ainfty_core::rational::q;

fn main() {
    let lattice = DegreeLattice::new(vec![]).unwrap();
    let ctx = RingContext::new(lattice.clone(), vec![], q(1)).unwrap();
    let pair = Arc::new(standard::circle_in_sphere(&[]));
    let l = pair.l.clone();
    let data = CorrelatorData::new(pair, lattice, Bounds { energy: q(1), kmax: 3, lmax: 1 });
    let m = build_m(&data, &ctx, &[], 3).expect("build m");

    for k in 1..=3 {
        println!("m_{k}:");
        for t in all_tuples(&vec![l.len(); k]) {
            if let Some(v) = m.op_basis(&t).filter(|v| !v.is_empty()) {
                let out: Vec<String> = v.iter().map(|(i, c)| format!("({c})·{}", l.name_of(*i))).collect();
                println!("  {} = {}", m.fmt_tuple(&t), out.join(" + "));
            }
        }
    }
    for r in [m.check_ainfty(), m.check_cyclic_unital()] {
        println!("{}: {} of {} nonzero", r.name, r.failures.len(), r.checked);
    }
}
