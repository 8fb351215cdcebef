use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::Problem;
use crate::error::{Error, Result};

/// `A{ w Bᵀ ℂ B }` over all material points, full symmetric storage.
pub fn assemble_lhs(problem: &Problem) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(problem.n_dofs, problem.n_dofs);
    for el in &problem.elements {
        let c = problem.metrics[el.metric].c();
        let ke = el.b.transpose() * c * &el.b * el.weight;
        for (a, &ga) in el.dofs.iter().enumerate() {
            for (b, &gb) in el.dofs.iter().enumerate() {
                coo.push(ga, gb, ke[(a, b)]);
            }
        }
    }
    CscMatrix::from(&coo)
}

fn check_len(problem: &Problem, values: &[DVector<f64>]) -> Result<()> {
    if values.len() != problem.elements.len() {
        return Err(Error::LengthMismatch {
            what: "per-element values",
            expected: problem.elements.len(),
            actual: values.len(),
        });
    }
    Ok(())
}

fn scatter(
    problem: &Problem,
    values: &[DVector<f64>],
    apply_metric: bool,
) -> Result<DVector<f64>> {
    check_len(problem, values)?;
    let mut out = DVector::zeros(problem.n_dofs);
    for (el, v) in problem.elements.iter().zip(values) {
        if v.len() != el.strain_dim() {
            return Err(Error::DimensionMismatch {
                expected: el.strain_dim(),
                actual: v.len(),
            });
        }
        let local = if apply_metric {
            el.b.transpose() * (problem.metrics[el.metric].c() * v)
        } else {
            el.b.transpose() * v
        };
        for (a, &g) in el.dofs.iter().enumerate() {
            out[g] += el.weight * local[a];
        }
    }
    Ok(out)
}

/// `A{ w Bᵀ ℂ ε* }`.
pub fn assemble_rhs_strain(problem: &Problem, eps_star: &[DVector<f64>]) -> Result<DVector<f64>> {
    scatter(problem, eps_star, true)
}

/// `A{ w Bᵀ σ* }`; the right-hand side of the multiplier system is `f` minus this.
pub fn assemble_rhs_stress(problem: &Problem, sigma_star: &[DVector<f64>]) -> Result<DVector<f64>> {
    scatter(problem, sigma_star, false)
}

/// Internal nodal forces of a stress field; same as [`assemble_rhs_stress`].
pub fn internal_force(problem: &Problem, stresses: &[DVector<f64>]) -> Result<DVector<f64>> {
    scatter(problem, stresses, false)
}
