use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::MaterialDataSet;
use crate::error::{Error, Result};
use crate::fem::ConstitutiveLaw;
use crate::phase_space::{LocalState, MetricTensor};

/// How strains are drawn, per strain component.
#[derive(Clone, Debug, PartialEq)]
pub enum StrainSampling {
    /// Uniform on `[lo_k, hi_k]`.
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    /// Zero-mean normal with standard deviation `stddev_k`.
    Normal { stddev: Vec<f64> },
}

impl StrainSampling {
    /// The same symmetric interval `[-half_width, half_width]` for every component.
    pub fn symmetric_uniform(half_width: f64, m_e: usize) -> Self {
        Self::Uniform {
            lo: vec![-half_width; m_e],
            hi: vec![half_width; m_e],
        }
    }

    pub fn isotropic_normal(stddev: f64, m_e: usize) -> Self {
        Self::Normal {
            stddev: vec![stddev; m_e],
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Uniform { lo, .. } => lo.len(),
            Self::Normal { stddev } => stddev.len(),
        }
    }
}

/// Recipe for a synthetic material data set.
#[derive(Clone, Debug)]
pub struct DataGenSpec {
    pub law: Arc<dyn ConstitutiveLaw>,
    pub metric: MetricTensor,
    pub count: usize,
    pub sampling: StrainSampling,
    /// Noise standard deviation as a fraction of the largest |ε_k| and |σ_k|
    /// of the noise-free sample, per component.
    pub noise_stddev_fraction: f64,
    pub rng_seed: u64,
}

impl DataGenSpec {
    fn validate(&self) -> Result<()> {
        let m = self.law.dim();
        if self.count == 0 {
            return Err(Error::InvalidArgument("data set size must be >= 1".into()));
        }
        if !(self.noise_stddev_fraction >= 0.0 && self.noise_stddev_fraction.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise fraction must be finite and >= 0, got {}",
                self.noise_stddev_fraction
            )));
        }
        if self.sampling.dim() != m || self.metric.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: if self.sampling.dim() != m {
                    self.sampling.dim()
                } else {
                    self.metric.dim()
                },
            });
        }
        match &self.sampling {
            StrainSampling::Uniform { lo, hi } => {
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::InvalidArgument("uniform range has lo > hi".into()));
                }
            }
            StrainSampling::Normal { stddev } => {
                if stddev.iter().any(|s| !(*s >= 0.0)) {
                    return Err(Error::InvalidArgument("negative strain stddev".into()));
                }
            }
        }
        Ok(())
    }
}

/// Samples strains, evaluates the law, then perturbs strain and stress with
/// independent zero-mean Gaussian noise. Deterministic in `rng_seed`.
pub fn sample_dataset(spec: &DataGenSpec) -> Result<MaterialDataSet> {
    spec.validate()?;
    let m = spec.law.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let mut points = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let strain = match &spec.sampling {
            StrainSampling::Uniform { lo, hi } => DVector::from_iterator(
                m,
                lo.iter().zip(hi).map(|(&l, &h)| {
                    if l == h {
                        l
                    } else {
                        rng.random_range(l..=h)
                    }
                }),
            ),
            StrainSampling::Normal { stddev } => DVector::from_iterator(
                m,
                stddev.iter().map(|&s| {
                    let d = Normal::new(0.0, s).expect("validated stddev");
                    d.sample(&mut rng)
                }),
            ),
        };
        let stress = spec.law.stress(&strain)?;
        points.push(LocalState { strain, stress });
    }

    if spec.noise_stddev_fraction > 0.0 {
        let max_abs = |f: &dyn Fn(&LocalState) -> &DVector<f64>| -> Vec<f64> {
            (0..m)
                .map(|k| points.iter().map(|p| f(p)[k].abs()).fold(0.0, f64::max))
                .collect()
        };
        let eps_scale = max_abs(&|p| &p.strain);
        let sig_scale = max_abs(&|p| &p.stress);
        let normals = |scale: &[f64]| -> Vec<Option<Normal<f64>>> {
            scale
                .iter()
                .map(|s| {
                    let sd = spec.noise_stddev_fraction * s;
                    (sd > 0.0).then(|| Normal::new(0.0, sd).expect("positive stddev"))
                })
                .collect()
        };
        let eps_noise = normals(&eps_scale);
        let sig_noise = normals(&sig_scale);
        for p in &mut points {
            for k in 0..m {
                if let Some(d) = &eps_noise[k] {
                    p.strain[k] += d.sample(&mut rng);
                }
                if let Some(d) = &sig_noise[k] {
                    p.stress[k] += d.sample(&mut rng);
                }
            }
        }
    }

    MaterialDataSet::new(points, spec.metric.clone())
}
