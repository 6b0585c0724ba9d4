//! Writes the standard instances as bundles under `bundles/`:
//! energy-zero circle and torus, a generator input on the nonminimal torus
//! pair, generated data with a bulk deformation for the derivative laws, and a
//! pseudo-isotopy instance with `γ' = γ + dη`.
//!
//! ```text
//! cargo run --release -p ainfty-core --example export_bundles [-- OUT_DIR]
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use ainfty_core::bundle::Bundle;
use ainfty_core::dgmodel::standard;
use ainfty_core::generator::{generate, GeneratorOptions};
use ainfty_core::novikov::{DegreeLattice, RingElement};
use ainfty_core::qops::{Bounds, CorrelatorData};
use ainfty_core::rational::q;

fn write(dir: &PathBuf, name: &str, b: &Bundle) {
    let p = dir.join(name);
    std::fs::write(&p, b.emit()).expect("write bundle");
    println!("wrote {}", p.display());
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "bundles".into()));
    std::fs::create_dir_all(&dir).expect("output directory");
    let lat = DegreeLattice::single(q(1), 2).unwrap();

    for (name, pair) in [("circle_energy_zero.json", standard::circle_in_sphere(&[q(1)])), ("torus_energy_zero.json", standard::torus_pair(&[q(1)]))] {
        let data = CorrelatorData::new(Arc::new(pair), lat.clone(), Bounds { energy: q(2), kmax: 4, lmax: 2 });
        write(&dir, name, &Bundle::from_data(data, vec![]));
    }

    // Generator input: models, lattice and truncation only.
    let pair = Arc::new(standard::torus_pair_nonminimal(&[q(1)]));
    let bounds = Bounds { energy: q(2), kmax: 3, lmax: 2 };
    let input = CorrelatorData::new(pair.clone(), lat.clone(), bounds.clone());
    write(&dir, "torus_generator_input.json", &Bundle::from_data(input, vec![("t0".into(), 0)]));

    // Generated data with γ = t0·σ, γ' = γ - d(t0·η) and η = t0·η.
    let g = generate(pair.clone(), lat, bounds, &GeneratorOptions::default()).expect("generation");
    // Derivative laws: γ = t0·1 + t1·σ with |t0| = 2, |t1| = 0.
    let mut p = Bundle::from_data(g.data.clone(), vec![("t0".into(), 2), ("t1".into(), 0)]);
    let unit = pair.x.unit;
    let sigma = pair.x.index_of("σ").unwrap();
    p.gamma = vec![(unit, RingElement::var(&p.ctx, 0).unwrap()), (sigma, RingElement::var(&p.ctx, 1).unwrap())];
    write(&dir, "torus_properties.json", &p);

    let mut b = Bundle::from_data(g.data, vec![("t0".into(), 0)]);
    let xm = &pair.x;
    let t0 = RingElement::var(&b.ctx, 0).unwrap();
    let (sigma, eta) = (xm.index_of("σ").unwrap(), xm.index_of("η").unwrap());
    b.gamma = vec![(sigma, t0.clone())];
    let mut gp = b.gamma.clone();
    for (j, c) in xm.d_col(eta) {
        gp.push((*j, t0.scale(&-c.clone())));
    }
    b.gamma_prime = Some(gp);
    b.eta = Some(vec![(eta, t0)]);
    b.t_degree_cap = Some(16);
    b.provenance = Some(serde_json::json!({ "generator": { "seed": GeneratorOptions::default().seed } }));
    write(&dir, "torus_isotopy.json", &b);
}
