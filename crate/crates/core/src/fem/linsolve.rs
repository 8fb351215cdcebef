use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};

/// Pivots below this fraction of the matching diagonal entry count as
/// zero-energy modes.
const PIVOT_TOLERANCE: f64 = 1e-11;

/// A symmetric system with Dirichlet rows/columns eliminated and the free
/// block factored once.
///
/// Solving `K u = r` with `u_d` prescribed reduces to
/// `K_ff u_f = r_f - K_fd u_d`; the factor of `K_ff` is reused for every
/// right-hand side.
#[derive(Debug)]
pub struct ConstrainedSystem {
    n: usize,
    free: Vec<usize>,
    /// `(free slot, constrained dof, K_fd entry)`.
    coupling: Vec<(usize, usize, f64)>,
    factor: Option<CscCholesky<f64>>,
}

impl ConstrainedSystem {
    /// Factors the free block of `lhs`, treating `constrained` dofs as known.
    pub fn new(lhs: &CscMatrix<f64>, constrained: &[usize]) -> Result<Self> {
        let n = lhs.nrows();
        if lhs.ncols() != n {
            return Err(Error::InvalidArgument("system matrix must be square".into()));
        }
        let mut slot = vec![None; n];
        let mut is_fixed = vec![false; n];
        for &d in constrained {
            if d >= n {
                return Err(Error::IndexOutOfRange { index: d, len: n });
            }
            is_fixed[d] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&d| !is_fixed[d]).collect();
        for (s, &d) in free.iter().enumerate() {
            slot[d] = Some(s);
        }

        let nf = free.len();
        let mut kff = CooMatrix::new(nf, nf);
        let mut coupling = Vec::new();
        let mut diag = vec![0.0; nf];
        for (row, col, &v) in lhs.triplet_iter() {
            match (slot[row], slot[col]) {
                (Some(r), Some(c)) => {
                    kff.push(r, c, v);
                    if r == c {
                        diag[r] += v;
                    }
                }
                (Some(r), None) => coupling.push((r, col, v)),
                _ => {}
            }
        }
        if nf == 0 {
            return Ok(Self {
                n,
                free,
                coupling,
                factor: None,
            });
        }
        let kff = CscMatrix::from(&kff);
        let factor = match CscCholesky::factor(&kff) {
            Ok(f) => f,
            Err(_) => {
                return Err(Error::Singular {
                    zero_energy_modes: count_zero_modes(&kff),
                    free_dofs: nf,
                })
            }
        };
        let l = factor.l();
        let mut weak = 0;
        for (j, d) in diag.iter().enumerate() {
            let col = l.col(j);
            let pivot = col
                .row_indices()
                .iter()
                .zip(col.values())
                .find(|(&r, _)| r == j)
                .map_or(0.0, |(_, &v)| v);
            if !(pivot * pivot > PIVOT_TOLERANCE * d.abs()) {
                weak += 1;
            }
        }
        if weak > 0 {
            return Err(Error::Singular {
                zero_energy_modes: weak,
                free_dofs: nf,
            });
        }
        Ok(Self {
            n,
            free,
            coupling,
            factor: Some(factor),
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.n
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Solves with `rhs` on the free dofs and the given prescribed values;
    /// constrained dofs not listed in `prescribed` are zero.
    pub fn solve(&self, rhs: &DVector<f64>, prescribed: &[(usize, f64)]) -> Result<DVector<f64>> {
        if rhs.len() != self.n {
            return Err(Error::LengthMismatch {
                what: "right-hand side",
                expected: self.n,
                actual: rhs.len(),
            });
        }
        let mut u = DVector::zeros(self.n);
        for &(d, v) in prescribed {
            if d >= self.n {
                return Err(Error::IndexOutOfRange { index: d, len: self.n });
            }
            u[d] = v;
        }
        let Some(factor) = &self.factor else {
            return Ok(u);
        };
        let mut rf = DMatrix::from_iterator(self.free.len(), 1, self.free.iter().map(|&d| rhs[d]));
        for &(s, d, k) in &self.coupling {
            rf[(s, 0)] -= k * u[d];
        }
        factor.solve_mut(&mut rf);
        for (s, &d) in self.free.iter().enumerate() {
            u[d] = rf[(s, 0)];
        }
        Ok(u)
    }
}

fn count_zero_modes(kff: &CscMatrix<f64>) -> usize {
    // error path only; a dense eigen solve is affordable at these sizes
    if kff.nrows() > 4000 {
        return 0;
    }
    let dense = DMatrix::from(kff);
    let eig = dense.symmetric_eigen().eigenvalues;
    let max = eig.amax();
    eig.iter().filter(|&&l| l <= 1e-10 * max).count()
}

/// One-shot constrained solve of `lhs · u = rhs` with `u` prescribed on `dirichlet`.
pub fn linear_solve(
    lhs: &CscMatrix<f64>,
    rhs: &DVector<f64>,
    dirichlet: &[(usize, f64)],
) -> Result<DVector<f64>> {
    let dofs: Vec<usize> = dirichlet.iter().map(|&(d, _)| d).collect();
    ConstrainedSystem::new(lhs, &dofs)?.solve(rhs, dirichlet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn csc(dense: &DMatrix<f64>) -> CscMatrix<f64> {
        CscMatrix::from(dense)
    }

    #[test]
    fn identity_system() {
        let k = csc(&DMatrix::identity(4, 4));
        let r = DVector::from_row_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(linear_solve(&k, &r, &[]).unwrap(), r);
    }

    #[test]
    fn two_by_two_by_hand() {
        // [4 1; 1 3] u = [1; 2]  =>  u = [1/11, 7/11]
        let k = csc(&DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]));
        let u = linear_solve(&k, &DVector::from_row_slice(&[1.0, 2.0]), &[]).unwrap();
        assert!((u[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((u[1] - 7.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn prescribed_values_are_lifted() {
        // fix u1 = 2: 4 u0 + 1·2 = 1  =>  u0 = -1/4
        let k = csc(&DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]));
        let u = linear_solve(&k, &DVector::from_row_slice(&[1.0, 0.0]), &[(1, 2.0)]).unwrap();
        assert_eq!(u[1], 2.0);
        assert!((u[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let r = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let fixed = [(3, 0.5), (17, -1.0)];
        let u = linear_solve(&csc(&k), &r, &fixed).unwrap();
        let res = &k * &u - &r;
        let free_res: f64 = (0..n)
            .filter(|d| *d != 3 && *d != 17)
            .map(|d| res[d] * res[d])
            .sum::<f64>()
            .sqrt();
        assert!(free_res <= 1e-10 * r.norm());
        assert_eq!((u[3], u[17]), (0.5, -1.0));
    }

    #[test]
    fn singular_system_reports_modes() {
        // two free masses joined by one spring: one rigid mode
        let k = csc(&DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        match ConstrainedSystem::new(&k, &[]) {
            Err(Error::Singular { zero_energy_modes, free_dofs }) => {
                assert_eq!(zero_energy_modes, 1);
                assert_eq!(free_dofs, 2);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
        assert!(ConstrainedSystem::new(&k, &[0]).is_ok());
    }
}
