use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{ensure_dim, Error, Result};
use crate::fem::ConstitutiveLaw;

/// Softening bar law `σ = σ_y tanh(E ε / σ_y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TanhLaw {
    pub young: f64,
    pub yield_stress: f64,
    /// Strains beyond `±max_strain` are rejected.
    pub max_strain: f64,
}

impl TanhLaw {
    fn check(&self, strain: &DVector<f64>) -> Result<f64> {
        ensure_dim(1, strain.len())?;
        let e = strain[0];
        if !(e.abs() <= self.max_strain) {
            return Err(Error::LawEvaluation(format!(
                "strain {e} outside admissible range ±{}",
                self.max_strain
            )));
        }
        Ok(e)
    }
}

impl ConstitutiveLaw for TanhLaw {
    fn dim(&self) -> usize {
        1
    }

    fn stress(&self, strain: &DVector<f64>) -> Result<DVector<f64>> {
        let e = self.check(strain)?;
        Ok(DVector::from_element(
            1,
            self.yield_stress * (self.young * e / self.yield_stress).tanh(),
        ))
    }

    fn tangent(&self, strain: &DVector<f64>) -> Result<DMatrix<f64>> {
        let e = self.check(strain)?;
        let t = (self.young * e / self.yield_stress).tanh();
        Ok(DMatrix::from_element(1, 1, self.young * (1.0 - t * t)))
    }
}

/// Bar law of the truss benchmark: `E = 100000 MPa`, `σ_y = 1000 MPa`,
/// admissible for `|ε| ≤ 0.03`.
pub fn truss_reference_law() -> TanhLaw {
    TanhLaw {
        young: 100_000.0,
        yield_stress: 1000.0,
        max_strain: 0.03,
    }
}

/// Nonlinear anisotropic plane-strain law
/// `σ = λ g(tr ε) I + μ ε + 𝔻 ε`, `g(x) = ((|x| + a)^p − a^p) sign x`.
///
/// Strain is `(ε₁₁, ε₂₂, 2ε₁₂)` and stress `(σ₁₁, σ₂₂, σ₁₂)`, so the
/// `μ ε` term contributes `μ/2` on the engineering shear while 𝔻 acts on
/// the Voigt strain directly.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateLaw {
    pub lambda: f64,
    pub mu: f64,
    pub a: f64,
    pub p: f64,
    pub d: Matrix3<f64>,
}

impl PlateLaw {
    pub fn g(&self, x: f64) -> f64 {
        ((x.abs() + self.a).powf(self.p) - self.a.powf(self.p)) * sign(x)
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        self.p * (x.abs() + self.a).powf(self.p - 1.0)
    }

    /// Orthotropic matrix built from `E`, `ν`.
    pub fn orthotropic(young: f64, poisson: f64) -> Matrix3<f64> {
        let c1111 = 4.6875 * young;
        let g_perp = 0.3 * young;
        let g_par = 0.2 * young;
        let nu2 = poisson * poisson;
        let lam_bar = (2.0 * nu2 + 1.0) / (15.0 - 20.0 * nu2) * young;
        let off = 2.0 * poisson * (lam_bar + g_perp);
        Matrix3::new(
            c1111, off, 0.0, //
            off, lam_bar + 2.0 * g_perp, 0.0, //
            0.0, 0.0, g_par,
        )
    }

    fn strain3(strain: &DVector<f64>) -> Result<Vector3<f64>> {
        ensure_dim(3, strain.len())?;
        Ok(Vector3::new(strain[0], strain[1], strain[2]))
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ConstitutiveLaw for PlateLaw {
    fn dim(&self) -> usize {
        3
    }

    fn stress(&self, strain: &DVector<f64>) -> Result<DVector<f64>> {
        let e = Self::strain3(strain)?;
        let vol = self.lambda * self.g(e[0] + e[1]);
        let s = Vector3::new(vol + self.mu * e[0], vol + self.mu * e[1], 0.5 * self.mu * e[2]) + self.d * e;
        Ok(DVector::from_column_slice(s.as_slice()))
    }

    fn tangent(&self, strain: &DVector<f64>) -> Result<DMatrix<f64>> {
        let e = Self::strain3(strain)?;
        let k = self.lambda * self.g_prime(e[0] + e[1]);
        let t = Matrix3::new(
            k + self.mu, k, 0.0, //
            k, k + self.mu, 0.0, //
            0.0, 0.0, 0.5 * self.mu,
        ) + self.d;
        Ok(DMatrix::from_column_slice(3, 3, t.as_slice()))
    }
}

/// The plate benchmark law: `λ = 57692.31`, `μ = 38461.54`, `a = 0.001`,
/// `p = 0.005`, 𝔻 from `E = 100000 MPa`, `ν = 0.3`.
pub fn plate_reference_law() -> PlateLaw {
    PlateLaw {
        lambda: 57692.31,
        mu: 38461.54,
        a: 0.001,
        p: 0.005,
        d: PlateLaw::orthotropic(100_000.0, 0.3),
    }
}
