use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, Result};

/// A local stress–strain relation `σ = σ̂(ε)` with its consistent tangent.
///
/// Only the reference solver and the data generators use laws; the
/// data-driven solvers never see one.
pub trait ConstitutiveLaw: Send + Sync + std::fmt::Debug {
    /// Strain/stress dimension `m_e`.
    fn dim(&self) -> usize;

    fn stress(&self, strain: &DVector<f64>) -> Result<DVector<f64>>;

    /// `∂σ̂/∂ε` at `strain`.
    fn tangent(&self, strain: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// `σ = 𝔼 ε` for a constant symmetric stiffness.
#[derive(Clone, Debug)]
pub struct LinearElastic {
    stiffness: DMatrix<f64>,
}

impl LinearElastic {
    pub fn new(stiffness: DMatrix<f64>) -> Self {
        Self { stiffness }
    }

    pub fn scalar(modulus: f64) -> Self {
        Self::new(DMatrix::from_element(1, 1, modulus))
    }
}

impl ConstitutiveLaw for LinearElastic {
    fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    fn stress(&self, strain: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim(self.dim(), strain.len())?;
        Ok(&self.stiffness * strain)
    }

    fn tangent(&self, strain: &DVector<f64>) -> Result<DMatrix<f64>> {
        ensure_dim(self.dim(), strain.len())?;
        Ok(self.stiffness.clone())
    }
}

/// Central finite-difference Jacobian of `law.stress`, for checking tangents.
pub fn finite_difference_tangent(
    law: &dyn ConstitutiveLaw,
    strain: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    let m = law.dim();
    let mut jac = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut plus = strain.clone();
        let mut minus = strain.clone();
        plus[k] += step;
        minus[k] -= step;
        let col = (law.stress(&plus)? - law.stress(&minus)?) / (2.0 * step);
        jac.set_column(k, &col);
    }
    Ok(jac)
}
