//! Loads a bundle, re-emits it in canonical form and reports whether the file
//! was already canonical.
//!
//! ```text
//! cargo run --release -p ainfty-core --example bundle_roundtrip [-- PATH]
//! ```

use std::path::PathBuf;

use ainfty_core::bundle::{parse_bundle, parse_bundle_str};

fn main() {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "bundles/torus_isotopy.json".into()));
    let text = std::fs::read_to_string(&path).expect("read bundle");
    let b = match parse_bundle(&path) {
        Ok(b) => b,
        Err(e) => {
            eprint!("{e}");
            std::process::exit(2);
        }
    };
    let emitted = b.emit();
    let again = parse_bundle_str(&emitted).expect("emitted bundle parses");
    println!("{}: {} disk slots, sphere channel: {}", path.display(), b.data.disks.len(), b.data.spheres.is_some());
    println!("canonical: {}", emitted == text);
    println!("stable under a second round: {}", again.emit() == emitted);
}
