//! Phase-space types and the ℂ-weighted metric.
//!
//! A material point's state is a strain/stress pair `z = (ε, σ)`. Distances
//! use the norm
//!
//! ```text
//! |z|² = ½ ℂε·ε + ½ ℂ⁻¹σ·σ
//! ```
//!
//! and the *learning space* maps `z ↦ [ℂ^½ ε ; ℂ^-½ σ]`, in which the
//! squared Euclidean distance is exactly twice the squared ℂ-distance.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, Error, Result};

/// One material point's strain–stress pair.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalState {
    pub strain: DVector<f64>,
    pub stress: DVector<f64>,
}

impl LocalState {
    pub fn new(strain: DVector<f64>, stress: DVector<f64>) -> Result<Self> {
        ensure_dim(strain.len(), stress.len())?;
        if strain.iter().chain(stress.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite state component".into()));
        }
        Ok(Self { strain, stress })
    }

    pub fn from_slices(strain: &[f64], stress: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_column_slice(strain),
            DVector::from_column_slice(stress),
        )
    }

    pub fn zeros(m_e: usize) -> Self {
        Self {
            strain: DVector::zeros(m_e),
            stress: DVector::zeros(m_e),
        }
    }

    /// Strain/stress dimension `m_e`.
    pub fn dim(&self) -> usize {
        self.strain.len()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            strain: &self.strain * t,
            stress: &self.stress * t,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(Self {
            strain: &self.strain - &other.strain,
            stress: &self.stress - &other.stress,
        })
    }
}

/// Symmetric positive-definite ℂ with cached square-root factors.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor {
    c: DMatrix<f64>,
    c_inv: DMatrix<f64>,
    c_sqrt: DMatrix<f64>,
    c_inv_sqrt: DMatrix<f64>,
}

impl MetricTensor {
    pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

    pub fn new(c: DMatrix<f64>) -> Result<Self> {
        if !c.is_square() || c.nrows() == 0 {
            return Err(Error::InvalidMetric(format!(
                "expected a non-empty square matrix, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMetric("non-finite entry".into()));
        }
        let scale = c.amax();
        let asym = (&c - c.transpose()).amax();
        if asym > Self::SYMMETRY_TOLERANCE * scale {
            return Err(Error::InvalidMetric(format!(
                "asymmetry {asym:e} exceeds tolerance"
            )));
        }
        let sym = (&c + c.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        if let Some(min) = eig.eigenvalues.iter().copied().reduce(f64::min) {
            if min <= 0.0 {
                return Err(Error::InvalidMetric(format!(
                    "non-positive eigenvalue {min:e}"
                )));
            }
        }
        let v = &eig.eigenvectors;
        let rebuild = |f: &dyn Fn(f64) -> f64| {
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
            v * d * v.transpose()
        };
        Ok(Self {
            c_inv: rebuild(&|l| 1.0 / l),
            c_sqrt: rebuild(&f64::sqrt),
            c_inv_sqrt: rebuild(&|l| 1.0 / l.sqrt()),
            c: sym,
        })
    }

    /// `ℂ = c0 · I`.
    pub fn scalar(c0: f64, m_e: usize) -> Result<Self> {
        Self::new(DMatrix::identity(m_e, m_e) * c0)
    }

    /// Isotropic plane-strain stiffness in Voigt form (ε₁₁, ε₂₂, 2ε₁₂).
    pub fn isotropic_plane_strain(young: f64, poisson: f64) -> Result<Self> {
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        let mu = young / (2.0 * (1.0 + poisson));
        #[rustfmt::skip]
        let c = DMatrix::from_row_slice(3, 3, &[
            lambda + 2.0 * mu, lambda, 0.0,
            lambda, lambda + 2.0 * mu, 0.0,
            0.0, 0.0, mu,
        ]);
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn c_inv(&self) -> &DMatrix<f64> {
        &self.c_inv
    }

    pub fn c_sqrt(&self) -> &DMatrix<f64> {
        &self.c_sqrt
    }

    pub fn c_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.c_inv_sqrt
    }

    /// Relative max-entry difference between two metrics.
    pub fn relative_difference(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.c - &other.c).amax() / self.c.amax().max(other.c.amax())
    }

    fn squared_norm_unchecked(&self, strain: &DVector<f64>, stress: &DVector<f64>) -> f64 {
        0.5 * (self.c.dot_product_form(strain) + self.c_inv.dot_product_form(stress))
    }

    /// Writes `[ℂ^½ ε ; ℂ^-½ σ]` into `out` (length `2·m_e`).
    pub(crate) fn write_learning(&self, z: &LocalState, out: &mut [f64]) {
        let m = self.dim();
        for r in 0..m {
            let mut a = 0.0;
            let mut b = 0.0;
            for k in 0..m {
                a += self.c_sqrt[(r, k)] * z.strain[k];
                b += self.c_inv_sqrt[(r, k)] * z.stress[k];
            }
            out[r] = a;
            out[m + r] = b;
        }
    }
}

trait QuadraticForm {
    fn dot_product_form(&self, x: &DVector<f64>) -> f64;
}

impl QuadraticForm for DMatrix<f64> {
    fn dot_product_form(&self, x: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.ncols() {
            let mut col = 0.0;
            for i in 0..self.nrows() {
                col += self[(i, j)] * x[i];
            }
            acc += col * x[j];
        }
        acc
    }
}

/// A point of the global phase space: one local state per material point
/// together with the material-point weights (volumes).
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalState {
    pub states: Vec<LocalState>,
    pub weights: Vec<f64>,
}

impl GlobalState {
    pub fn new(states: Vec<LocalState>, weights: Vec<f64>) -> Result<Self> {
        if states.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: states.len(),
                actual: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "material-point weight must be positive, got {w}"
            )));
        }
        Ok(Self { states, weights })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn check_metric(z: &LocalState, c: &MetricTensor) -> Result<()> {
    ensure_dim(c.dim(), z.strain.len())?;
    ensure_dim(c.dim(), z.stress.len())
}

/// `( ½ ℂε·ε + ½ ℂ⁻¹σ·σ )^½`
pub fn local_norm(z: &LocalState, c: &MetricTensor) -> Result<f64> {
    check_metric(z, c)?;
    Ok(c.squared_norm_unchecked(&z.strain, &z.stress).max(0.0).sqrt())
}

pub fn local_distance(z: &LocalState, y: &LocalState, c: &MetricTensor) -> Result<f64> {
    Ok(local_distance_sq(z, y, c)?.sqrt())
}

pub(crate) fn local_distance_sq(z: &LocalState, y: &LocalState, c: &MetricTensor) -> Result<f64> {
    check_metric(z, c)?;
    check_metric(y, c)?;
    let de = &z.strain - &y.strain;
    let ds = &z.stress - &y.stress;
    Ok(c.squared_norm_unchecked(&de, &ds).max(0.0))
}

/// `( Σ_e w⁽ᵉ⁾ d_e(z⁽ᵉ⁾, y⁽ᵉ⁾)² )^½`, weighted by `z`'s material-point weights.
pub fn global_distance(z: &GlobalState, y: &GlobalState, metrics: &[MetricTensor]) -> Result<f64> {
    let refs: Vec<&MetricTensor> = metrics.iter().collect();
    global_distance_with(z, y, &refs)
}

pub(crate) fn global_distance_with(
    z: &GlobalState,
    y: &GlobalState,
    metrics: &[&MetricTensor],
) -> Result<f64> {
    if y.len() != z.len() {
        return Err(Error::LengthMismatch {
            what: "global state",
            expected: z.len(),
            actual: y.len(),
        });
    }
    if metrics.len() != z.len() {
        return Err(Error::LengthMismatch {
            what: "metrics",
            expected: z.len(),
            actual: metrics.len(),
        });
    }
    let mut acc = 0.0;
    for ((zs, ys), (w, c)) in z
        .states
        .iter()
        .zip(&y.states)
        .zip(z.weights.iter().zip(metrics))
    {
        acc += w * local_distance_sq(zs, ys, c)?;
    }
    Ok(acc.sqrt())
}

/// Maps `z` to `[ℂ^½ ε ; ℂ^-½ σ]`.
pub fn to_learning_space(z: &LocalState, c: &MetricTensor) -> Result<DVector<f64>> {
    check_metric(z, c)?;
    let mut out = DVector::zeros(2 * c.dim());
    c.write_learning(z, out.as_mut_slice());
    Ok(out)
}

/// Inverse of [`to_learning_space`].
pub fn from_learning_space(p: &[f64], c: &MetricTensor) -> Result<LocalState> {
    if p.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "learning-space vector has odd length {}",
            p.len()
        )));
    }
    let m = p.len() / 2;
    ensure_dim(c.dim(), m)?;
    let a = DVector::from_column_slice(&p[..m]);
    let b = DVector::from_column_slice(&p[m..]);
    Ok(LocalState {
        strain: c.c_inv_sqrt() * a,
        stress: c.c_sqrt() * b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state1(e: f64, s: f64) -> LocalState {
        LocalState::from_slices(&[e], &[s]).unwrap()
    }

    fn spd3() -> MetricTensor {
        MetricTensor::isotropic_plane_strain(100_000.0, 0.3).unwrap()
    }

    #[test]
    fn zero_state_has_zero_norm() {
        let c = spd3();
        assert_eq!(local_norm(&LocalState::zeros(3), &c).unwrap(), 0.0);
    }

    #[test]
    fn scalar_norm_by_hand() {
        let c = MetricTensor::scalar(4.0, 1).unwrap();
        let n = local_norm(&state1(1.0, 2.0), &c).unwrap();
        assert_relative_eq!(n, 2.5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn unit_metric_distance_by_hand() {
        let c = MetricTensor::scalar(1.0, 1).unwrap();
        let d = local_distance(&state1(1.0, 0.0), &state1(0.0, 0.0), &c).unwrap();
        assert_relative_eq!(d, 0.5f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn global_distance_by_hand() {
        // Local distances (1, 1) with weights (2, 3): for c = 1, z = (√2, 0) has norm 1.
        let c = MetricTensor::scalar(1.0, 1).unwrap();
        let one = state1(2f64.sqrt(), 0.0);
        let z = GlobalState::new(vec![one.clone(), one], vec![2.0, 3.0]).unwrap();
        let y = GlobalState::new(vec![state1(0.0, 0.0); 2], vec![2.0, 3.0]).unwrap();
        let d = global_distance(&z, &y, &[c.clone(), c]).unwrap();
        assert_relative_eq!(d, 5f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn single_element_global_distance_reduces_to_local() {
        let c = spd3();
        let a = LocalState::from_slices(&[1e-3, -2e-3, 5e-4], &[12.0, -3.0, 40.0]).unwrap();
        let b = LocalState::from_slices(&[-1e-3, 0.0, 2e-4], &[1.0, 8.0, -4.0]).unwrap();
        let z = GlobalState::new(vec![a.clone()], vec![1.0]).unwrap();
        let y = GlobalState::new(vec![b.clone()], vec![1.0]).unwrap();
        assert_eq!(
            global_distance(&z, &y, std::slice::from_ref(&c)).unwrap(),
            local_distance(&a, &b, &c).unwrap()
        );
    }

    #[test]
    fn learning_space_by_hand() {
        let c = MetricTensor::scalar(4.0, 1).unwrap();
        let p = to_learning_space(&state1(1.0, 2.0), &c).unwrap();
        assert_relative_eq!(p[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(p[1], 1.0, max_relative = 1e-15);
        let back = from_learning_space(&[2.0, 1.0], &c).unwrap();
        assert_relative_eq!(back.strain[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(back.stress[0], 2.0, max_relative = 1e-15);
        assert_eq!(from_learning_space(&[0.0, 0.0], &c).unwrap(), state1(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = MetricTensor::scalar(4.0, 1).unwrap();
        assert!(matches!(
            from_learning_space(&[1.0, 2.0, 3.0], &c),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            local_norm(&LocalState::zeros(3), &c),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(MetricTensor::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(MetricTensor::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(GlobalState::new(vec![LocalState::zeros(1)], vec![0.0]).is_err());
        let z = GlobalState::new(vec![LocalState::zeros(1)], vec![1.0]).unwrap();
        let y = GlobalState::new(vec![LocalState::zeros(1); 2], vec![1.0; 2]).unwrap();
        assert!(global_distance(&z, &y, &[c.clone()]).is_err());
    }

    #[test]
    fn square_root_reproduces_metric() {
        let c = spd3();
        let rebuilt = c.c_sqrt() * c.c_sqrt();
        assert!((&rebuilt - c.c()).amax() <= 1e-10 * c.c().amax());
        let ident = c.c_sqrt() * c.c_inv_sqrt();
        assert!((ident - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }

    fn arb_state3() -> impl Strategy<Value = LocalState> {
        (
            prop::array::uniform3(-0.02f64..0.02),
            prop::array::uniform3(-2000.0f64..2000.0),
        )
            .prop_map(|(e, s)| LocalState::from_slices(&e, &s).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn distance_is_a_metric(a in arb_state3(), b in arb_state3(), x in arb_state3()) {
            let c = spd3();
            let ab = local_distance(&a, &b, &c).unwrap();
            let ba = local_distance(&b, &a, &c).unwrap();
            let ax = local_distance(&a, &x, &c).unwrap();
            let xb = local_distance(&x, &b, &c).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert!(ab <= ax + xb + 1e-12 * (ax + xb).max(1.0));
            prop_assert_eq!(local_distance(&a, &a, &c).unwrap(), 0.0);
        }

        #[test]
        fn norm_is_homogeneous(a in arb_state3(), t in -10.0f64..10.0) {
            let c = spd3();
            let n = local_norm(&a, &c).unwrap();
            let nt = local_norm(&a.scaled(t), &c).unwrap();
            prop_assert!((nt - t.abs() * n).abs() <= 1e-12 * n.max(1e-300) * t.abs().max(1.0));
        }

        #[test]
        fn learning_space_isometry(a in arb_state3(), b in arb_state3()) {
            let c = spd3();
            let pa = to_learning_space(&a, &c).unwrap();
            let pb = to_learning_space(&b, &c).unwrap();
            let s2 = (pa - pb).norm_squared();
            let d = local_distance(&a, &b, &c).unwrap();
            prop_assert!((s2 - 2.0 * d * d).abs() <= 1e-10 * s2.max(1e-300));
        }

        #[test]
        fn learning_space_round_trip(a in arb_state3()) {
            let c = spd3();
            let p = to_learning_space(&a, &c).unwrap();
            let back = from_learning_space(p.as_slice(), &c).unwrap();
            let scale_e = a.strain.amax().max(1e-300);
            let scale_s = a.stress.amax().max(1e-300);
            prop_assert!((&back.strain - &a.strain).amax() <= 1e-10 * scale_e);
            prop_assert!((&back.stress - &a.stress).amax() <= 1e-10 * scale_s);
        }
    }
}
