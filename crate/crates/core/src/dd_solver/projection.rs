use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_lhs, assemble_rhs_strain, assemble_rhs_stress, ConstrainedSystem, Problem};
use crate::material_data::MaterialDataSet;
use crate::phase_space::{from_learning_space, GlobalState, LocalState, MetricTensor};
use crate::tensor_voting::TangentFrame;

/// The material data seen by each material point: either one set shared by
/// all of them or one set per point.
#[derive(Clone, Debug)]
pub struct ElementDataSets {
    sets: Vec<Arc<MaterialDataSet>>,
    of: Vec<usize>,
}

impl ElementDataSets {
    pub fn shared(ds: MaterialDataSet, n_points: usize) -> Self {
        Self::shared_arc(Arc::new(ds), n_points)
    }

    pub fn shared_arc(ds: Arc<MaterialDataSet>, n_points: usize) -> Self {
        Self {
            sets: vec![ds],
            of: vec![0; n_points],
        }
    }

    pub fn per_point(sets: Vec<MaterialDataSet>) -> Self {
        let n = sets.len();
        Self {
            sets: sets.into_iter().map(Arc::new).collect(),
            of: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.of.is_empty()
    }

    pub fn get(&self, e: usize) -> &MaterialDataSet {
        &self.sets[self.of[e]]
    }

    /// Distinct data sets.
    pub fn sets(&self) -> &[Arc<MaterialDataSet>] {
        &self.sets
    }

    pub fn set_index(&self, e: usize) -> usize {
        self.of[e]
    }

    /// Every point's data set must use that point's metric; otherwise the
    /// data projection and the constraint projection minimize different
    /// distances.
    pub fn check_against(&self, problem: &Problem) -> Result<()> {
        if self.len() != problem.elements.len() {
            return Err(Error::LengthMismatch {
                what: "per-point data sets",
                expected: problem.elements.len(),
                actual: self.len(),
            });
        }
        for e in 0..self.len() {
            let rel = self.get(e).metric().relative_difference(problem.metric_of(e));
            if !(rel <= 1e-12) {
                return Err(Error::InvalidMetric(format!(
                    "data set of material point {e} uses a different metric (relative difference {rel:e})"
                )));
            }
        }
        Ok(())
    }
}

/// Output of the constraint projection.
#[derive(Clone, Debug)]
pub struct Projection {
    pub states: Vec<LocalState>,
    pub u: DVector<f64>,
    pub eta: DVector<f64>,
}

/// `P_C` with the system matrix factored once.
#[derive(Debug)]
pub struct ConstraintProjector<'a> {
    problem: &'a Problem,
    system: ConstrainedSystem,
}

impl<'a> ConstraintProjector<'a> {
    pub fn new(problem: &'a Problem) -> Result<Self> {
        problem.validate()?;
        let lhs = assemble_lhs(problem);
        let dofs: Vec<usize> = problem.dirichlet.iter().map(|&(d, _)| d).collect();
        Ok(Self {
            problem,
            system: ConstrainedSystem::new(&lhs, &dofs)?,
        })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    /// Closest compatible, equilibrated state to `y = {(ε*, σ*)}`.
    ///
    /// `u` carries the prescribed displacements; the multiplier `η`
    /// vanishes on constrained dofs.
    pub fn project(&self, y: &[LocalState]) -> Result<Projection> {
        let p = self.problem;
        if y.len() != p.elements.len() {
            return Err(Error::LengthMismatch {
                what: "local states",
                expected: p.elements.len(),
                actual: y.len(),
            });
        }
        let eps: Vec<DVector<f64>> = y.iter().map(|s| s.strain.clone()).collect();
        let sig: Vec<DVector<f64>> = y.iter().map(|s| s.stress.clone()).collect();
        let u = self
            .system
            .solve(&assemble_rhs_strain(p, &eps)?, &p.dirichlet)?;
        let eta = self
            .system
            .solve(&(&p.loads - assemble_rhs_stress(p, &sig)?), &[])?;
        let states = p
            .elements
            .iter()
            .zip(y)
            .map(|(el, ys)| {
                let c = p.metrics[el.metric].c();
                LocalState {
                    strain: el.strain(&u),
                    stress: &ys.stress + c * el.strain(&eta),
                }
            })
            .collect();
        Ok(Projection { states, u, eta })
    }
}

/// One-shot `P_C`; returns `(z, u, η)`.
pub fn project_constraint(
    y: &GlobalState,
    problem: &Problem,
) -> Result<(GlobalState, DVector<f64>, DVector<f64>)> {
    let proj = ConstraintProjector::new(problem)?.project(&y.states)?;
    Ok((
        GlobalState::new(proj.states, problem.weights())?,
        proj.u,
        proj.eta,
    ))
}

/// Nearest data point per material point.
pub fn nearest_assignment(states: &[LocalState], data: &ElementDataSets) -> Result<Vec<usize>> {
    if states.len() != data.len() {
        return Err(Error::LengthMismatch {
            what: "local states",
            expected: data.len(),
            actual: states.len(),
        });
    }
    states
        .par_iter()
        .enumerate()
        .map(|(e, z)| Ok(data.get(e).nearest_neighbor(z)?.0))
        .collect()
}

/// `P_D`: the nearest data point of every material point.
pub fn project_data(z: &GlobalState, data: &ElementDataSets) -> Result<GlobalState> {
    let idx = nearest_assignment(&z.states, data)?;
    let states = idx
        .iter()
        .enumerate()
        .map(|(e, &i)| data.get(e).point(i).clone())
        .collect();
    GlobalState::new(states, z.weights.clone())
}

/// `y + T^t λ^t` in learning coordinates, with `λ = Tᵀ(z − y)`.
///
/// With `cap`, the tangential excursion `‖T^t λ^t‖` is scaled down to at
/// most that length.
pub(crate) fn tangent_point(zl: &[f64], yl: &[f64], frame: &TangentFrame, cap: Option<f64>) -> Vec<f64> {
    let t = frame.tangents();
    let n = zl.len();
    let mut lambda = vec![0.0; t.ncols()];
    for (c, l) in lambda.iter_mut().enumerate() {
        *l = (0..n).map(|r| t[(r, c)] * (zl[r] - yl[r])).sum();
    }
    let mut step: Vec<f64> = (0..n)
        .map(|r| (0..t.ncols()).map(|c| t[(r, c)] * lambda[c]).sum())
        .collect();
    if let Some(cap) = cap {
        let len = step.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > cap {
            let s = cap / len;
            step.iter_mut().for_each(|v| *v *= s);
        }
    }
    yl.iter().zip(step).map(|(y, s)| y + s).collect()
}

/// `acc += p · tangent_point(zl, yl, frame, cap)` without allocating. Relies
/// on the tangent columns being orthonormal.
pub(crate) fn accumulate_tangent_point(
    acc: &mut [f64],
    p: f64,
    zl: &[f64],
    yl: &[f64],
    frame: &TangentFrame,
    cap: Option<f64>,
) {
    let t = frame.tangents();
    let n = zl.len();
    for (a, y) in acc.iter_mut().zip(yl) {
        *a += p * y;
    }
    let mut scale = p;
    if let Some(cap) = cap {
        let len2: f64 = (0..t.ncols())
            .map(|c| (0..n).map(|r| t[(r, c)] * (zl[r] - yl[r])).sum::<f64>().powi(2))
            .sum();
        if len2 > cap * cap {
            scale *= cap / len2.sqrt();
        }
    }
    for c in 0..t.ncols() {
        let lam: f64 = (0..n).map(|r| t[(r, c)] * (zl[r] - yl[r])).sum();
        for (r, a) in acc.iter_mut().enumerate() {
            *a += scale * lam * t[(r, c)];
        }
    }
}

/// Orthogonal projection of `z` onto the tangent space of `frame` anchored at `y`.
pub fn project_tangent(
    z: &LocalState,
    y: &LocalState,
    frame: &TangentFrame,
    c: &MetricTensor,
) -> Result<LocalState> {
    project_tangent_capped(z, y, frame, c, None)
}

/// [`project_tangent`] with the tangential excursion limited to `cap`
/// (learning-space length).
pub fn project_tangent_capped(
    z: &LocalState,
    y: &LocalState,
    frame: &TangentFrame,
    c: &MetricTensor,
    cap: Option<f64>,
) -> Result<LocalState> {
    if frame.dim() != 2 * c.dim() {
        return Err(Error::DimensionMismatch {
            expected: 2 * c.dim(),
            actual: frame.dim(),
        });
    }
    let zl = crate::phase_space::to_learning_space(z, c)?;
    let yl = crate::phase_space::to_learning_space(y, c)?;
    from_learning_space(&tangent_point(zl.as_slice(), yl.as_slice(), frame, cap), c)
}
