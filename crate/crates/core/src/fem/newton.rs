use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::{internal_force, ConstitutiveLaw, ConstrainedSystem, Problem};
use crate::error::{Error, Result};
use crate::phase_space::GlobalState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Converged when the free-dof residual is below `tolerance · ‖f‖`.
    pub tolerance: f64,
    /// Maximum step halvings per iteration.
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-10,
            max_backtracks: 12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonSolution {
    /// Reference states `(ε_ref, σ_ref)` per material point.
    pub state: GlobalState,
    pub u: DVector<f64>,
    /// Newton updates performed.
    pub iterations: usize,
    /// Free-dof residual norm before each update and at convergence.
    pub residual_history: Vec<f64>,
}

struct Evaluation {
    strains: Vec<DVector<f64>>,
    stresses: Vec<DVector<f64>>,
    residual: DVector<f64>,
    norm: f64,
}

fn evaluate(
    problem: &Problem,
    law: &dyn ConstitutiveLaw,
    u: &DVector<f64>,
    fixed: &[bool],
) -> Result<Evaluation> {
    let strains: Vec<DVector<f64>> = problem.elements.iter().map(|el| el.strain(u)).collect();
    let stresses = strains
        .iter()
        .map(|e| law.stress(e))
        .collect::<Result<Vec<_>>>()?;
    let mut residual = &problem.loads - internal_force(problem, &stresses)?;
    for (d, &f) in fixed.iter().enumerate() {
        if f {
            residual[d] = 0.0;
        }
    }
    let norm = residual.norm();
    Ok(Evaluation {
        strains,
        stresses,
        residual,
        norm,
    })
}

fn tangent_matrix(
    problem: &Problem,
    law: &dyn ConstitutiveLaw,
    strains: &[DVector<f64>],
) -> Result<CscMatrix<f64>> {
    let mut coo = CooMatrix::new(problem.n_dofs, problem.n_dofs);
    for (el, eps) in problem.elements.iter().zip(strains) {
        let dt = law.tangent(eps)?;
        let ke = el.b.transpose() * dt * &el.b * el.weight;
        for (a, &ga) in el.dofs.iter().enumerate() {
            for (b, &gb) in el.dofs.iter().enumerate() {
                coo.push(ga, gb, ke[(a, b)]);
            }
        }
    }
    Ok(CscMatrix::from(&coo))
}

/// Classical solution of the boundary value problem for a given law, by
/// Newton–Raphson with residual backtracking.
pub fn newton_reference_solve(
    problem: &Problem,
    law: &dyn ConstitutiveLaw,
    options: NewtonOptions,
) -> Result<NewtonSolution> {
    problem.validate()?;
    if let Some(el) = problem.elements.iter().find(|el| el.strain_dim() != law.dim()) {
        return Err(Error::DimensionMismatch {
            expected: el.strain_dim(),
            actual: law.dim(),
        });
    }
    let fixed = problem.is_constrained();
    let constrained: Vec<usize> = problem.dirichlet.iter().map(|&(d, _)| d).collect();
    let target = options.tolerance * problem.free_load_norm();

    let mut u = problem.prescribed_vector();
    let mut current = evaluate(problem, law, &u, &fixed)?;
    let mut history = vec![current.norm];
    for iteration in 0..=options.max_iterations {
        if current.norm <= target {
            let states = current
                .strains
                .into_iter()
                .zip(current.stresses)
                .map(|(strain, stress)| crate::phase_space::LocalState { strain, stress })
                .collect();
            return Ok(NewtonSolution {
                state: GlobalState::new(states, problem.weights())?,
                u,
                iterations: iteration,
                residual_history: history,
            });
        }
        if iteration == options.max_iterations {
            break;
        }
        let kt = tangent_matrix(problem, law, &current.strains)?;
        let system = ConstrainedSystem::new(&kt, &constrained)?;
        let du = system.solve(&current.residual, &[])?;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_backtracks {
            let trial_u = &u + &du * step;
            if let Ok(trial) = evaluate(problem, law, &trial_u, &fixed) {
                if trial.norm < current.norm || trial.norm <= target {
                    accepted = Some((trial_u, trial));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next_u, next)) = accepted else {
            break;
        };
        u = next_u;
        current = next;
        history.push(current.norm);
    }
    Err(Error::NewtonDivergence {
        iterations: history.len() - 1,
        history,
    })
}
