//! Prints the sign conventions as small tables: `ε` for two boundary inputs,
//! the gluing sign `δ`, and the cyclic rotation sign.
//!
//! ```text
//! cargo run --release -p ainfty-core --example sign_tables
//! ```

use ainfty_core::signs::{cyclic_sign, delta_glue, epsilon_k};

fn main() {
    let n = 1;
    println!("ε(α1, α2; ∅) with n = {n}:");
    for a1 in 0..=1 {
        for a2 in 0..=1 {
            println!("  |α| = ({a1}, {a2})  {:+}", epsilon_k(2, &[a1, a2], &[], n).sign());
        }
    }
    println!("ε(0, 0; γ) with one interior input:");
    for g in 1..=2 {
        println!("  |γ| = {g}  {:+}", epsilon_k(2, &[0, 0], &[g], n).sign());
    }

    println!("δ(k1, k2, i) with n = {n}, rows k1, columns i:");
    for k1 in 0..=3 {
        let row: Vec<String> = (0..=k1).map(|i| format!("{:+}", delta_glue(k1, 2, i, n).sign())).collect();
        println!("  k1 = {k1}, k2 = 2:  {}", row.join(" "));
    }

    println!("cyclic sign for moving the last input to the front:");
    for degs in [[0, 0, 0], [1, 0, 0], [1, 1, 1], [0, 1, 2]] {
        println!("  {degs:?}  {:+}", cyclic_sign(&degs).sign());
    }
}
