//! Material data sets: point clouds of strain–stress pairs, their optional
//! tangent frames, and exact nearest-neighbor queries in the ℂ-metric.

mod generate;
mod io;
pub mod kdtree;

use std::sync::Arc;

use nalgebra::DVector;

pub use generate::{sample_dataset, DataGenSpec, StrainSampling};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
use kdtree::{KdTree, Neighbor};

use crate::error::{ensure_dim, Error, Result};
use crate::phase_space::{LocalState, MetricTensor};
use crate::tensor_voting::TangentFrame;

/// A finite set `D` of local states plus the metric it is searched with.
///
/// Learning-space coordinates are computed once at construction and back a
/// k-d tree; nearest neighbors in the ℂ-metric are nearest neighbors there,
/// since `s² = 2 d²`.
#[derive(Clone, Debug)]
pub struct MaterialDataSet {
    points: Vec<LocalState>,
    metric: MetricTensor,
    frames: Option<Vec<TangentFrame>>,
    index: Arc<KdTree>,
}

impl PartialEq for MaterialDataSet {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.metric == other.metric && self.frames == other.frames
    }
}

impl MaterialDataSet {
    pub fn new(points: Vec<LocalState>, metric: MetricTensor) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataSet);
        }
        let m = metric.dim();
        let mut coords = vec![0.0; points.len() * 2 * m];
        for (p, row) in points.iter().zip(coords.chunks_exact_mut(2 * m)) {
            ensure_dim(m, p.strain.len())?;
            ensure_dim(m, p.stress.len())?;
            metric.write_learning(p, row);
        }
        Ok(Self {
            points,
            metric,
            frames: None,
            index: Arc::new(KdTree::build(coords, 2 * m)),
        })
    }

    /// Attaches one tangent frame per point.
    pub fn with_frames(mut self, frames: Vec<TangentFrame>) -> Result<Self> {
        if frames.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                what: "frames",
                expected: self.points.len(),
                actual: frames.len(),
            });
        }
        let n = self.learning_dim();
        if let Some(f) = frames.iter().find(|f| f.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: f.dim(),
            });
        }
        self.frames = Some(frames);
        Ok(self)
    }

    pub fn without_frames(mut self) -> Self {
        self.frames = None;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Strain/stress dimension `m_e`.
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Learning-space dimension `N = 2 m_e`.
    pub fn learning_dim(&self) -> usize {
        2 * self.metric.dim()
    }

    pub fn points(&self) -> &[LocalState] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &LocalState {
        &self.points[i]
    }

    pub fn metric(&self) -> &MetricTensor {
        &self.metric
    }

    pub fn frames(&self) -> Option<&[TangentFrame]> {
        self.frames.as_deref()
    }

    pub fn frame(&self, i: usize) -> Result<&TangentFrame> {
        self.frames
            .as_ref()
            .map(|f| &f[i])
            .ok_or(Error::MissingFrames)
    }

    /// Learning-space coordinates of point `i`.
    pub fn learning_point(&self, i: usize) -> &[f64] {
        self.index.point(i)
    }

    pub(crate) fn tree(&self) -> &KdTree {
        &self.index
    }

    /// Learning-space coordinates of an arbitrary state.
    pub fn learning_of(&self, z: &LocalState) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), z.strain.len())?;
        ensure_dim(self.dim(), z.stress.len())?;
        let mut out = vec![0.0; self.learning_dim()];
        self.metric.write_learning(z, &mut out);
        Ok(out)
    }

    /// Index of the closest point to `z` under the ℂ-metric, and that distance.
    pub fn nearest_neighbor(&self, z: &LocalState) -> Result<(usize, f64)> {
        let q = self.learning_of(z)?;
        let n = self.nearest_learning(&q)?;
        Ok((n.index, (0.5 * n.dist_sq).sqrt()))
    }

    pub(crate) fn nearest_learning(&self, q: &[f64]) -> Result<Neighbor> {
        self.index.nearest(q).ok_or(Error::EmptyDataSet)
    }

    /// The `k` points other than `i` closest to point `i` in learning space,
    /// ascending by distance, ties by lower index.
    pub fn k_nearest_neighbors(&self, i: usize, k: usize) -> Result<Vec<usize>> {
        Ok(self
            .k_nearest_with_distances(i, k)?
            .into_iter()
            .map(|n| n.index)
            .collect())
    }

    pub(crate) fn k_nearest_with_distances(&self, i: usize, k: usize) -> Result<Vec<Neighbor>> {
        let n = self.len();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if k == 0 || k > n - 1 {
            return Err(Error::InvalidArgument(format!(
                "k = {k} neighbors requested from a set of {n} points (need 1 <= k <= n-1)"
            )));
        }
        Ok(self.index.k_nearest(self.learning_point(i), k, Some(i)))
    }

    /// Mean ℂ-distance from each point to its nearest other point.
    pub fn mean_spacing(&self) -> f64 {
        self.spacing_stats().0
    }

    /// (mean NN distance, mean squared NN distance) in the ℂ-metric.
    pub fn spacing_stats(&self) -> (f64, f64) {
        if self.len() < 2 {
            return (0.0, 0.0);
        }
        let (sum, sum_sq) = (0..self.len())
            .map(|i| {
                let nn = self.index.k_nearest(self.learning_point(i), 1, Some(i))[0];
                0.5 * nn.dist_sq
            })
            .fold((0.0, 0.0), |(a, b), d2| (a + d2.sqrt(), b + d2));
        (sum / self.len() as f64, sum_sq / self.len() as f64)
    }

    /// Strain of every point as one vector per point; convenience for reports.
    pub fn strains(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.points.iter().map(|p| &p.strain)
    }
}
