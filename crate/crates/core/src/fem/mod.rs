//! Discretization backbone: material-point operators, assembly, constrained
//! sparse solves and the Newton–Raphson reference solver.

mod assembly;
mod elements;
mod law;
mod linsolve;
mod model;
mod newton;

use nalgebra::{DMatrix, DVector};

pub use assembly::{assemble_lhs, assemble_rhs_strain, assemble_rhs_stress, internal_force};
pub use elements::{bar_operator, quad4_operator, GAUSS_2X2};
pub use law::{finite_difference_tangent, ConstitutiveLaw, LinearElastic};
pub use linsolve::{linear_solve, ConstrainedSystem};
pub use model::{parse_model, read_model, write_model, MetricSpec, Model, ModelElement};
pub use newton::{newton_reference_solve, NewtonOptions, NewtonSolution};

use crate::error::{Error, Result};
use crate::phase_space::{LocalState, MetricTensor};

/// One material point `e`: its strain-displacement operator `B⁽ᵉ⁾`, volume
/// weight `w⁽ᵉ⁾`, and the global dofs its local displacement vector maps to.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    /// `m_e × dofs.len()`.
    pub b: DMatrix<f64>,
    pub weight: f64,
    pub dofs: Vec<usize>,
    /// Index into [`Problem::metrics`].
    pub metric: usize,
    /// Physical location (bar midpoint or Gauss point), for reports.
    pub position: [f64; 3],
}

impl Element {
    pub fn strain_dim(&self) -> usize {
        self.b.nrows()
    }

    /// `B⁽ᵉ⁾ u⁽ᵉ⁾` gathered from the global vector.
    pub fn strain(&self, u: &DVector<f64>) -> DVector<f64> {
        let local = DVector::from_iterator(self.dofs.len(), self.dofs.iter().map(|&d| u[d]));
        &self.b * local
    }
}

/// A discretized boundary value problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub elements: Vec<Element>,
    pub n_dofs: usize,
    pub loads: DVector<f64>,
    /// Prescribed `(dof, value)` pairs.
    pub dirichlet: Vec<(usize, f64)>,
    pub metrics: Vec<MetricTensor>,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        if self.loads.len() != self.n_dofs {
            return Err(Error::LengthMismatch {
                what: "load vector",
                expected: self.n_dofs,
                actual: self.loads.len(),
            });
        }
        for (i, el) in self.elements.iter().enumerate() {
            if el.b.ncols() != el.dofs.len() {
                return Err(Error::DegenerateElement {
                    element: i,
                    reason: format!("B has {} columns for {} dofs", el.b.ncols(), el.dofs.len()),
                });
            }
            if let Some(&d) = el.dofs.iter().find(|&&d| d >= self.n_dofs) {
                return Err(Error::IndexOutOfRange {
                    index: d,
                    len: self.n_dofs,
                });
            }
            if !(el.weight > 0.0 && el.weight.is_finite()) {
                return Err(Error::DegenerateElement {
                    element: i,
                    reason: format!("non-positive weight {}", el.weight),
                });
            }
            let metric = self.metrics.get(el.metric).ok_or(Error::IndexOutOfRange {
                index: el.metric,
                len: self.metrics.len(),
            })?;
            if metric.dim() != el.strain_dim() {
                return Err(Error::DimensionMismatch {
                    expected: el.strain_dim(),
                    actual: metric.dim(),
                });
            }
        }
        let mut seen = vec![false; self.n_dofs];
        for &(d, v) in &self.dirichlet {
            if d >= self.n_dofs {
                return Err(Error::IndexOutOfRange {
                    index: d,
                    len: self.n_dofs,
                });
            }
            if seen[d] {
                return Err(Error::InvalidArgument(format!("dof {d} constrained twice")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite prescribed value on dof {d}")));
            }
            seen[d] = true;
        }
        Ok(())
    }

    pub fn metric_of(&self, e: usize) -> &MetricTensor {
        &self.metrics[self.elements[e].metric]
    }

    pub fn element_metrics(&self) -> Vec<&MetricTensor> {
        self.elements.iter().map(|el| &self.metrics[el.metric]).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.elements.iter().map(|el| el.weight).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.elements.iter().map(|el| el.weight).sum()
    }

    pub fn is_constrained(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_dofs];
        for &(d, _) in &self.dirichlet {
            out[d] = true;
        }
        out
    }

    /// Vector with the prescribed values on constrained dofs, zero elsewhere.
    pub fn prescribed_vector(&self) -> DVector<f64> {
        let mut u = DVector::zeros(self.n_dofs);
        for &(d, v) in &self.dirichlet {
            u[d] = v;
        }
        u
    }

    /// Euclidean norm of `f - A{w Bᵀσ}` restricted to free dofs.
    pub fn equilibrium_residual(&self, stresses: &[DVector<f64>]) -> Result<f64> {
        let fint = internal_force(self, stresses)?;
        let fixed = self.is_constrained();
        Ok((0..self.n_dofs)
            .filter(|&d| !fixed[d])
            .map(|d| (self.loads[d] - fint[d]).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Norm of the load vector on free dofs.
    pub fn free_load_norm(&self) -> f64 {
        let fixed = self.is_constrained();
        (0..self.n_dofs)
            .filter(|&d| !fixed[d])
            .map(|d| self.loads[d].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Local states `(B u, σ)` for given displacements and stresses.
    pub fn states_from(&self, u: &DVector<f64>, stresses: Vec<DVector<f64>>) -> Vec<LocalState> {
        self.elements
            .iter()
            .zip(stresses)
            .map(|(el, stress)| LocalState {
                strain: el.strain(u),
                stress,
            })
            .collect()
    }
}
