//! Symmetric periodic tridiagonal systems.
//!
//! The matrix is stored as its main diagonal and a single coupling array:
//! `off[j]` sits at positions `(j, j+1)` and `(j+1, j)`, indices modulo `n`,
//! so `off[n-1]` fills the two corners.
//!
//! Factorization is bordered Thomas elimination: the leading `(n-1)×(n-1)`
//! block is tridiagonal, the last unknown is eliminated through its Schur
//! complement. This is the same rank-one correction as Sherman–Morrison but
//! exposes every pivot, so singularity is detected directly.

use crate::{Error, Result};

const PIVOT_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "cyclic system needs n >= 3, got {}",
                diag.len()
            )));
        }
        if off.len() != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len(),
                got: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n], vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// Entry `(i, j)` of the represented matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.len();
        if i == j {
            self.diag[i]
        } else if (i + 1) % n == j {
            self.off[i]
        } else if (j + 1) % n == i {
            self.off[j]
        } else {
            0.0
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| {
                let p = (i + n - 1) % n;
                let k = (i + 1) % n;
                self.diag[i] * v[i] + self.off[p] * v[p] + self.off[i] * v[k]
            })
            .collect()
    }

    /// `vᵀ A v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.apply(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.len()])
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let p = (i + n - 1) % n;
                self.diag[i].abs() + self.off[p].abs() + self.off[i].abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] += self.diag[i];
            let k = (i + 1) % n;
            a[i][k] += self.off[i];
            a[k][i] += self.off[i];
        }
        a
    }

    pub fn factorize(&self) -> Result<CyclicFactorization> {
        let threshold = PIVOT_RTOL * self.norm_inf();
        if self.len() == 3 {
            return Dense3::factorize(self.to_dense(), threshold).map(CyclicFactorization::Dense3);
        }
        Bordered::factorize(self, threshold).map(CyclicFactorization::Bordered)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factorize()?.solve(rhs))
    }
}

/// Reusable factorization; solving for several right-hand sides costs `O(n)` each.
#[derive(Debug, Clone)]
pub enum CyclicFactorization {
    Bordered(Bordered),
    Dense3(Dense3),
}

impl CyclicFactorization {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            CyclicFactorization::Bordered(f) => f.solve(rhs),
            CyclicFactorization::Dense3(f) => f.solve(rhs),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bordered {
    /// Multipliers `l_i` of the leading tridiagonal block (index 0 unused).
    lower: Vec<f64>,
    pivots: Vec<f64>,
    /// Super-diagonal of the leading block.
    upper: Vec<f64>,
    /// Coupling column of the last unknown into the leading block.
    border: Vec<f64>,
    /// `T⁻¹ border`.
    z: Vec<f64>,
    schur: f64,
}

impl Bordered {
    fn factorize(a: &CyclicTridiagonal, threshold: f64) -> Result<Self> {
        let n = a.len();
        let m = n - 1;
        let upper = a.off[..m - 1].to_vec();
        let mut lower = vec![0.0; m];
        let mut pivots = vec![0.0; m];
        pivots[0] = a.diag[0];
        check_pivot(0, pivots[0], threshold)?;
        for i in 1..m {
            lower[i] = upper[i - 1] / pivots[i - 1];
            pivots[i] = a.diag[i] - lower[i] * upper[i - 1];
            check_pivot(i, pivots[i], threshold)?;
        }
        let mut border = vec![0.0; m];
        border[0] = a.off[n - 1];
        border[m - 1] = a.off[n - 2];
        let mut f = Self {
            lower,
            pivots,
            upper,
            border,
            z: Vec::new(),
            schur: 0.0,
        };
        let mut z = f.border.clone();
        f.solve_leading(&mut z);
        let schur = a.diag[m] - dot(&f.border, &z);
        check_pivot(m, schur, threshold)?;
        f.z = z;
        f.schur = schur;
        Ok(f)
    }

    fn solve_leading(&self, y: &mut [f64]) {
        let m = y.len();
        for i in 1..m {
            y[i] -= self.lower[i] * y[i - 1];
        }
        y[m - 1] /= self.pivots[m - 1];
        for i in (0..m - 1).rev() {
            y[i] = (y[i] - self.upper[i] * y[i + 1]) / self.pivots[i];
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.pivots.len();
        assert_eq!(rhs.len(), m + 1);
        let mut x = rhs.to_vec();
        self.solve_leading(&mut x[..m]);
        let last = (rhs[m] - dot(&self.border, &x[..m])) / self.schur;
        for (xi, zi) in x[..m].iter_mut().zip(&self.z) {
            *xi -= zi * last;
        }
        x[m] = last;
        x
    }
}

/// Partial-pivoting LU for the `n = 3` case, where the corner couplings are
/// ordinary neighbours.
#[derive(Debug, Clone)]
pub struct Dense3 {
    lu: [[f64; 3]; 3],
    perm: [usize; 3],
}

impl Dense3 {
    fn factorize(a: Vec<Vec<f64>>, threshold: f64) -> Result<Self> {
        let mut lu = [[0.0; 3]; 3];
        for (dst, src) in lu.iter_mut().zip(&a) {
            dst.copy_from_slice(src);
        }
        let mut perm = [0, 1, 2];
        for k in 0..3 {
            let p = (k..3)
                .max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))
                .unwrap();
            lu.swap(k, p);
            perm.swap(k, p);
            check_pivot(k, lu[k][k], threshold)?;
            for i in k + 1..3 {
                lu[i][k] /= lu[k][k];
                for j in k + 1..3 {
                    lu[i][j] -= lu[i][k] * lu[k][j];
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), 3);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 1..3 {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..3).rev() {
            for j in i + 1..3 {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}

fn check_pivot(row: usize, pivot: f64, threshold: f64) -> Result<()> {
    if pivot.abs() < threshold || !pivot.is_finite() {
        Err(Error::SingularSystem {
            row,
            pivot,
            threshold,
        })
    } else {
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
                .unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let l = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= l * a[k][j];
                }
                b[i] -= l * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn inf_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn identity_solves_to_rhs() {
        for n in [3usize, 4, 9] {
            let a = CyclicTridiagonal::identity(n).unwrap();
            let rhs: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
            assert_eq!(a.solve(&rhs).unwrap(), rhs);
        }
    }

    #[test]
    fn five_by_five_matches_dense() {
        let a = CyclicTridiagonal::new(vec![2.5; 5], vec![-1.0; 5]).unwrap();
        let rhs = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let x = a.solve(&rhs).unwrap();
        let reference = dense_solve(a.to_dense(), rhs);
        for (a, b) in x.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn circulant_laplacian_is_singular() {
        for n in [3usize, 5, 16] {
            let a = CyclicTridiagonal::new(vec![2.0; n], vec![-1.0; n]).unwrap();
            assert!(
                matches!(a.solve(&vec![1.0; n]), Err(Error::SingularSystem { .. })),
                "n = {n}"
            );
        }
    }

    #[test]
    fn quadratic_form_examples() {
        let id = CyclicTridiagonal::identity(6).unwrap();
        let v = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        assert_eq!(id.quadratic_form(&v), v.iter().map(|x| x * x).sum::<f64>());
        let a = CyclicTridiagonal::new(vec![2.5; 7], vec![-1.0; 7]).unwrap();
        assert!((a.quadratic_form(&[1.0; 7]) - 3.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_small_or_mismatched() {
        assert!(CyclicTridiagonal::new(vec![1.0; 2], vec![0.0; 2]).is_err());
        assert!(CyclicTridiagonal::new(vec![1.0; 4], vec![0.0; 3]).is_err());
    }

    fn spd_system() -> impl Strategy<Value = (CyclicTridiagonal, Vec<f64>)> {
        (3usize..=64).prop_flat_map(|n| {
            (
                proptest::collection::vec(-2.0f64..2.0, n),
                proptest::collection::vec(0.01f64..3.0, n),
                proptest::collection::vec(-10.0f64..10.0, n),
            )
                .prop_map(move |(off, slack, rhs)| {
                    let diag = (0..n)
                        .map(|i| off[(i + n - 1) % n].abs() + off[i].abs() + slack[i])
                        .collect();
                    (CyclicTridiagonal::new(diag, off).unwrap(), rhs)
                })
        })
    }

    proptest! {
        #[test]
        fn matches_dense_oracle((a, rhs) in spd_system()) {
            let x = a.solve(&rhs).unwrap();
            let reference = dense_solve(a.to_dense(), rhs.clone());
            let diff: Vec<f64> = x.iter().zip(&reference).map(|(a, b)| a - b).collect();
            prop_assert!(inf_norm(&diff) <= 1e-12 * inf_norm(&reference).max(1e-300));
            let r: Vec<f64> = a.apply(&x).iter().zip(&rhs).map(|(a, b)| a - b).collect();
            prop_assert!(inf_norm(&r) <= 1e-12 * (a.norm_inf() * inf_norm(&x) + inf_norm(&rhs)));
        }

        #[test]
        fn structurally_symmetric((a, _rhs) in spd_system()) {
            let n = a.len();
            let e = |i: usize| { let mut v = vec![0.0; n]; v[i] = 1.0; v };
            for i in 0..n {
                let ai = a.apply(&e(i));
                for j in 0..n {
                    let aj = a.apply(&e(j));
                    prop_assert_eq!(ai[j], aj[i]);
                    prop_assert_eq!(ai[j], a.entry(j, i));
                }
            }
        }
    }
}
