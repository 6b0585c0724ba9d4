//! The Stokes identity for the pairing over `L × [0, 1]` on basis forms with
//! polynomial coefficients in the interval coordinate.
//!
//! ```text
//! cargo run --release -p ainfty-core --example stokes
//! ```

use ainfty_core::dgmodel::standard;
use ainfty_core::isotopy::{check_stokes, IntervalRing};
use ainfty_core::novikov::{DegreeLattice, RingContext};
use ainfty_core::rational::q;

fn main() {
    let ctx = RingContext::new(DegreeLattice::single(q(1), 2).unwrap(), vec![0], q(2)).unwrap();
    let ring = IntervalRing { ctx, tcap: 8 };
    for model in [standard::circle(), standard::torus(), standard::torus_nonminimal()] {
        let r = check_stokes(&model, &ring, 3);
        println!("{}: {} of {} nonzero", model.name, r.failures.len(), r.checked);
    }
}
