//! Dense exact linear algebra for the finite models.
//!
//! Matrices act on column vectors: `m[(i, j)]` is the `e_i`-coefficient of the
//! image of `e_j`.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_traits::{One, Zero};

use crate::rational::Q;

#[derive(Clone, PartialEq, Eq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl Index<(usize, usize)> for Mat {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| crate::rational::fmt_q(&self[(i, j)])).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    pub fn from_columns(rows: usize, cols: &[Vec<Q>]) -> Mat {
        let mut m = Mat::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, x) in c.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<Q> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut r = Mat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = &o[(k, j)];
                    if !b.is_zero() {
                        r[(i, j)] += a * b;
                    }
                }
            }
        }
        r
    }

    pub fn apply(&self, v: &[Q]) -> Vec<Q> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = Q::zero();
                for (j, x) in v.iter().enumerate() {
                    if !x.is_zero() && !self[(i, j)].is_zero() {
                        s += &self[(i, j)] * x;
                    }
                }
                s
            })
            .collect()
    }

    pub fn add(&self, o: &Mat) -> Mat {
        let mut r = self.clone();
        for (a, b) in r.data.iter_mut().zip(&o.data) {
            *a += b;
        }
        r
    }

    pub fn sub(&self, o: &Mat) -> Mat {
        let mut r = self.clone();
        for (a, b) in r.data.iter_mut().zip(&o.data) {
            *a -= b;
        }
        r
    }

    pub fn transpose(&self) -> Mat {
        let mut r = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                r[(j, i)] = self[(i, j)].clone();
            }
        }
        r
    }

    /// Reduced row echelon form and its pivot columns.
    pub fn rref(&self) -> (Mat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m[(i, c)].is_zero()) else { continue };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = Q::one() / &m[(r, c)];
            for j in 0..m.cols {
                let x = &m[(r, j)] * &inv;
                m[(r, j)] = x;
            }
            for i in 0..m.rows {
                if i != r && !m[(i, c)].is_zero() {
                    let f = m[(i, c)].clone();
                    for j in 0..m.cols {
                        let x = &m[(r, j)] * &f;
                        m[(i, j)] -= x;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// A basis of the null space, one vector per free column.
    pub fn kernel(&self) -> Vec<Vec<Q>> {
        let (r, pivots) = self.rref();
        let mut out = Vec::new();
        for f in 0..self.cols {
            if pivots.contains(&f) {
                continue;
            }
            let mut v = vec![Q::zero(); self.cols];
            v[f] = Q::one();
            for (row, &p) in pivots.iter().enumerate() {
                v[p] = -r[(row, f)].clone();
            }
            out.push(v);
        }
        out
    }

    pub fn inverse(&self) -> Option<Mat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = Mat::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = Q::one();
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut inv = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = r[(i, n + j)].clone();
            }
        }
        Some(inv)
    }

    /// Some `x` with `self·x = b`, if one exists.
    pub fn solve(&self, b: &[Q]) -> Option<Vec<Q>> {
        let mut aug = Mat::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, self.cols)] = b[i].clone();
        }
        let (r, pivots) = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Q::zero(); self.cols];
        for (row, &p) in pivots.iter().enumerate() {
            x[p] = r[(row, self.cols)].clone();
        }
        Some(x)
    }
}

/// A strong deformation retraction of a finite complex onto a harmonic
/// complement: `dh + hd = 1 - Π`, `h² = 0`, `hΠ = Πh = 0`, `Π² = Π`, `dΠ = Πd = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contraction {
    pub pi: Mat,
    pub h: Mat,
}

impl Contraction {
    /// Builds a contraction of `(V, d)`; `degrees` grades the basis and `d` must raise degree by one.
    /// Harmonic representatives are chosen among the kernel basis in basis order.
    pub fn compute(d: &Mat, degrees: &[i64]) -> Contraction {
        let n = d.rows();
        assert_eq!(d.cols(), n);
        assert_eq!(degrees.len(), n);
        let mut bcols: Vec<Vec<Q>> = Vec::new();
        let mut ccols: Vec<Vec<Q>> = Vec::new();
        let mut hcols: Vec<Vec<Q>> = Vec::new();
        let mut ds: Vec<i64> = degrees.to_vec();
        ds.sort();
        ds.dedup();
        for &p in &ds {
            let idx: Vec<usize> = (0..n).filter(|&i| degrees[i] == p).collect();
            let mut block = Mat::zeros(n, idx.len());
            for (jj, &j) in idx.iter().enumerate() {
                for i in 0..n {
                    block[(i, jj)] = d[(i, j)].clone();
                }
            }
            let (_, piv) = block.rref();
            for &jj in &piv {
                let mut c = vec![Q::zero(); n];
                c[idx[jj]] = Q::one();
                ccols.push(c);
            }
            // Kernel of d on this degree, embedded in V.
            let kern: Vec<Vec<Q>> = block
                .kernel()
                .into_iter()
                .map(|v| {
                    let mut w = vec![Q::zero(); n];
                    for (jj, x) in v.into_iter().enumerate() {
                        w[idx[jj]] = x;
                    }
                    w
                })
                .collect();
            // Boundaries landing in this degree.
            let prev: Vec<usize> = (0..n).filter(|&i| degrees[i] == p - 1).collect();
            let mut blk = Vec::new();
            if !prev.is_empty() {
                let mut pb = Mat::zeros(n, prev.len());
                for (jj, &j) in prev.iter().enumerate() {
                    for i in 0..n {
                        pb[(i, jj)] = d[(i, j)].clone();
                    }
                }
                let (_, pp) = pb.rref();
                for &jj in &pp {
                    blk.push(pb.column(jj));
                }
            }
            let mut span = blk.clone();
            for z in kern {
                let mut trial = span.clone();
                trial.push(z.clone());
                if Mat::from_columns(n, &trial).rank() == trial.len() {
                    span = trial;
                    hcols.push(z);
                }
            }
            bcols.extend(blk);
        }
        // The images of the pivot columns, in the same order as `ccols`.
        let bimg: Vec<Vec<Q>> = ccols.iter().map(|c| d.apply(c)).collect();
        let r = bimg.len();
        let hdim = hcols.len();
        assert_eq!(2 * r + hdim, n, "complex is not split: check d² = 0");
        let mut all = bimg.clone();
        all.extend(hcols.iter().cloned());
        all.extend(ccols.iter().cloned());
        let m = Mat::from_columns(n, &all);
        let minv = m.inverse().expect("basis change must be invertible");
        let mut hb = Mat::zeros(n, n);
        let mut pb = Mat::zeros(n, n);
        for i in 0..r {
            hb[(r + hdim + i, i)] = Q::one();
        }
        for i in 0..hdim {
            pb[(r + i, r + i)] = Q::one();
        }
        let _ = bcols;
        Contraction { h: m.mul(&hb).mul(&minv), pi: m.mul(&pb).mul(&minv) }
    }

    /// Residual matrices of the contraction identities, all zero for a valid contraction.
    pub fn identity_residuals(&self, d: &Mat) -> Vec<(&'static str, Mat)> {
        let n = d.rows();
        let id = Mat::identity(n);
        vec![
            ("dh+hd-(1-Π)", d.mul(&self.h).add(&self.h.mul(d)).sub(&id.sub(&self.pi))),
            ("h²", self.h.mul(&self.h)),
            ("hΠ", self.h.mul(&self.pi)),
            ("Πh", self.pi.mul(&self.h)),
            ("Π²-Π", self.pi.mul(&self.pi).sub(&self.pi)),
            ("dΠ", d.mul(&self.pi)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn pair_complex() -> (Mat, Vec<i64>) {
        // e0 (deg 0, closed), e1 (deg 0) -> e2 (deg 1), e3 (deg 1, closed), e4 (deg 2, closed)
        let mut d = Mat::zeros(5, 5);
        d[(2, 1)] = q(1);
        d[(3, 1)] = q(2);
        (d, vec![0, 0, 1, 1, 2])
    }

    #[test]
    fn contraction_identities_hold() {
        let (d, degs) = pair_complex();
        let c = Contraction::compute(&d, &degs);
        for (name, m) in c.identity_residuals(&d) {
            assert!(m.is_zero(), "{name} nonzero:\n{m:?}");
        }
        assert_eq!((0..5).filter(|&i| !c.pi[(i, i)].is_zero()).count(), 3);
    }

    #[test]
    fn kernel_inverse_solve() {
        let mut m = Mat::zeros(2, 3);
        m[(0, 0)] = q(1);
        m[(0, 1)] = q(2);
        m[(1, 2)] = q(3);
        let k = m.kernel();
        assert_eq!(k.len(), 1);
        assert!(m.apply(&k[0]).iter().all(Zero::is_zero));
        let x = m.solve(&[q(1), q(6)]).unwrap();
        assert_eq!(m.apply(&x), vec![q(1), q(6)]);
        let mut a = Mat::identity(3);
        a[(0, 2)] = q(5);
        assert_eq!(a.mul(&a.inverse().unwrap()), Mat::identity(3));
        assert!(Mat::zeros(2, 2).inverse().is_none());
    }
}
