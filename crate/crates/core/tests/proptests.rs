//! Algebraic invariants under random inputs.

use std::sync::Arc;

use ainfty_core::coeff::CoeffRing;
use ainfty_core::isotopy::{IElem, IntervalRing};
use ainfty_core::linalg::Mat;
use ainfty_core::novikov::{DegreeLattice, LatticeGenerator, Monomial, RingContext, RingElement};
use ainfty_core::rational::{fmt_q, parse_q, q, qr, Q};
use ainfty_core::signs::{cyclic_sign, delta_glue, epsilon_k, permutation_sign, Parity};
use proptest::prelude::*;

fn ctx() -> Arc<RingContext> {
    let gens = vec![
        LatticeGenerator { name: "A".into(), omega: q(1), mu: 2 },
        LatticeGenerator { name: "B".into(), omega: qr(3, 2), mu: 0 },
    ];
    RingContext::new(DegreeLattice::new(gens).unwrap(), vec![0, 2], q(4)).unwrap()
}

fn small_q() -> impl Strategy<Value = Q> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| qr(n, d))
}

/// Terms `c·T^(a,b)·t^(x,y)` with small exponents; the cutoff drops some of them.
fn ring_element() -> impl Strategy<Value = RingElement> {
    prop::collection::vec(((0u32..3, 0u32..3), (0u32..3, 0u32..2), small_q()), 0..5).prop_map(|terms| {
        let c = ctx();
        let mut r = RingElement::zero(&c);
        for ((a, b), (x, y), coeff) in terms {
            r.add_term(Monomial::new(&[a, b], &[x, y]), coeff);
        }
        r.clear_truncated();
        r
    })
}

fn mul(x: &RingElement, y: &RingElement) -> RingElement {
    x.try_mul(y).unwrap()
}

fn add(x: &RingElement, y: &RingElement) -> RingElement {
    x.try_add(y).unwrap()
}

/// `(degrees, permutation)` of matching length.
fn degrees_and_perm(max_len: usize) -> impl Strategy<Value = (Vec<i64>, Vec<usize>)> {
    (1..=max_len).prop_flat_map(|n| {
        (prop::collection::vec(-1i64..4, n), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

fn interval_element() -> impl Strategy<Value = IElem> {
    let coeffs = || prop::collection::vec(ring_element(), 0..3);
    (coeffs(), coeffs()).prop_map(|(a, b)| IElem::new(a, b))
}

fn interval_ring() -> IntervalRing {
    IntervalRing { ctx: ctx(), tcap: 16 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn novikov_ring_axioms(x in ring_element(), y in ring_element(), z in ring_element()) {
        prop_assert_eq!(mul(&x, &y), mul(&y, &x));
        prop_assert_eq!(mul(&mul(&x, &y), &z), mul(&x, &mul(&y, &z)));
        prop_assert_eq!(mul(&x, &add(&y, &z)), add(&mul(&x, &y), &mul(&x, &z)));
        prop_assert_eq!(mul(&x, &RingElement::one(&ctx())), x.clone());
        prop_assert!(add(&x, &x.neg()).is_zero());
    }

    #[test]
    fn valuation_is_multiplicative_below_the_cutoff(x in ring_element(), y in ring_element()) {
        let p = mul(&x, &y);
        match (x.valuation(), y.valuation()) {
            (Some(a), Some(b)) if a.clone() + b.clone() <= q(4) => prop_assert_eq!(p.valuation(), Some(a + b)),
            (Some(a), Some(b)) => prop_assert!(p.valuation().is_none_or(|v| v >= a + b)),
            _ => prop_assert!(p.is_zero()),
        }
    }

    #[test]
    fn variable_derivative_is_a_derivation(x in ring_element(), y in ring_element(), a in 0usize..2) {
        // ∂/∂t lowers the valuation by one, so the rule holds one level below the cutoff.
        let lhs = mul(&x, &y).tderiv(a).unwrap().truncate_to(&q(3));
        let rhs = add(&mul(&x.tderiv(a).unwrap(), &y), &mul(&x, &y.tderiv(a).unwrap())).truncate_to(&q(3));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn rationals_round_trip(n in any::<i64>(), d in 1i64..1_000_000) {
        let x = qr(n, d);
        let s = fmt_q(&x);
        prop_assert_eq!(parse_q(&s).unwrap(), x.clone());
        prop_assert_eq!(fmt_q(&parse_q(&s).unwrap()), s);
    }

    #[test]
    fn permutation_signs_compose((degs, p) in degrees_and_perm(6), seed in any::<u64>()) {
        // A second permutation derived from the seed, applied after `p`.
        let n = p.len();
        let mut r: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            r.swap(i, (s % (i as u64 + 1)) as usize);
            s /= i as u64 + 1;
        }
        let permuted: Vec<i64> = p.iter().map(|&i| degs[i]).collect();
        let composite: Vec<usize> = r.iter().map(|&i| p[i]).collect();
        prop_assert_eq!(
            permutation_sign(&p, &degs) + permutation_sign(&r, &permuted),
            permutation_sign(&composite, &degs)
        );
        let identity: Vec<usize> = (0..n).collect();
        prop_assert_eq!(permutation_sign(&identity, &degs), Parity::EVEN);
    }

    #[test]
    fn cyclic_sign_is_a_shifted_rotation(degs in prop::collection::vec(-1i64..4, 1..7)) {
        let n = degs.len();
        let shifted: Vec<i64> = degs.iter().map(|d| d + 1).collect();
        let rotation: Vec<usize> = std::iter::once(n - 1).chain(0..n - 1).collect();
        prop_assert_eq!(cyclic_sign(&degs), permutation_sign(&rotation, &shifted));
        // n successive rotations return every input to its place.
        let mut cur = degs.clone();
        let mut total = Parity::EVEN;
        for _ in 0..n {
            total += cyclic_sign(&cur);
            cur.rotate_right(1);
        }
        prop_assert_eq!(cur, degs);
        prop_assert_eq!(total, Parity::EVEN);
    }

    #[test]
    fn delta_and_epsilon_shifts(k1 in 0i64..8, k2 in 0i64..8, i in 0i64..8, n in 0i64..5,
                                alpha in prop::collection::vec(-1i64..4, 0..5),
                                gamma in prop::collection::vec(0i64..4, 0..3), d in -1i64..4) {
        prop_assert_ne!(delta_glue(k1, k2, i, n), delta_glue(k1, k2, i, n + 1));
        prop_assert_eq!(delta_glue(k1, k2, i + 1, n), delta_glue(k1, k2, i, n) + Parity::of(k2 + 1));
        let k = alpha.len() as i64;
        let mut longer = alpha.clone();
        longer.push(d);
        prop_assert_eq!(
            epsilon_k(k + 1, &longer, &gamma, n),
            epsilon_k(k, &alpha, &gamma, n) + Parity::of((k + 1) * (d + 1) + n)
        );
    }

    #[test]
    fn kernel_and_solve(rows in 1usize..5, cols in 1usize..6,
                        entries in prop::collection::vec(-3i64..=3, 30),
                        x in prop::collection::vec(-3i64..=3, 6)) {
        let columns: Vec<Vec<Q>> = (0..cols).map(|j| (0..rows).map(|i| q(entries[j * rows + i])).collect()).collect();
        let m = Mat::from_columns(rows, &columns);
        let kernel = m.kernel();
        prop_assert_eq!(kernel.len() + m.rank(), cols);
        for v in &kernel {
            prop_assert!(m.apply(v).iter().all(|c| *c == q(0)));
        }
        let x: Vec<Q> = x[..cols].iter().map(|&c| q(c)).collect();
        let b = m.apply(&x);
        let y = m.solve(&b);
        prop_assert!(y.is_some());
        prop_assert_eq!(m.apply(&y.unwrap()), b);
    }

    #[test]
    fn interval_ring_differential(x in interval_element(), y in interval_element()) {
        let r = interval_ring();
        let c = ctx();
        prop_assert!(r.is_zero(&r.d(&r.d(&x))));
        let mut leibniz = r.mul(&r.d(&x), &y);
        r.add_assign(&mut leibniz, &r.mul(&x, &r.d(&y)));
        prop_assert!(r.mul(&r.d(&x), &r.d(&y)).b.is_empty());
        prop_assert_eq!(r.d(&r.mul(&x, &y)).b, leibniz.b);
        // Stokes on the interval: ∫ dx = x(1) − x(0).
        prop_assert_eq!(r.d(&x).integral(&c), add(&x.at(&q(1), &c), &x.at(&q(0), &c).neg()));
        prop_assert_eq!(x.at(&q(1), &c), r.parts(&x).0.at(&q(1), &c));
    }
}
