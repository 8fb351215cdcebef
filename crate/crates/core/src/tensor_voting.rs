//! Ball-tensor voting over material data sets.
//!
//! Every point `P_i` (in learning-space coordinates) receives a vote
//!
//! ```text
//! B(P_i, P_j) = exp(-s²/σ²) · (I - v vᵀ / ‖v‖²),   v = P_i - P_j,  s = ‖v‖
//! ```
//!
//! from each of its `K` nearest neighbors. The eigenvectors of the summed
//! tensor, ordered by descending eigenvalue, give the normals (large
//! eigenvalues) and tangents (small eigenvalues) of the data manifold at
//! that point.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::ConstitutiveLaw;
use crate::material_data::MaterialDataSet;
use crate::phase_space::MetricTensor;

/// Eigenvector frame of an accumulated vote tensor.
///
/// Columns of `basis` are ordered by descending eigenvalue; the first
/// `N - k` are normals and the last `k` are tangents.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    k: usize,
    degenerate: bool,
}

impl TangentFrame {
    /// Reassembles a frame, checking orthogonality and ordering.
    pub fn from_parts(
        basis: DMatrix<f64>,
        eigenvalues: DVector<f64>,
        k: usize,
        degenerate: bool,
    ) -> Result<Self> {
        let n = basis.nrows();
        if !basis.is_square() || eigenvalues.len() != n {
            return Err(Error::InvalidArgument(
                "frame basis must be N×N with N eigenvalues".into(),
            ));
        }
        if k == 0 || k >= n {
            return Err(Error::InvalidArgument(format!(
                "tangent count k = {k} outside 1..={}",
                n.saturating_sub(1)
            )));
        }
        let ortho = (basis.transpose() * &basis - DMatrix::<f64>::identity(n, n)).amax();
        if ortho > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "frame basis not orthogonal (deviation {ortho:e})"
            )));
        }
        if eigenvalues.as_slice().windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "frame eigenvalues not in descending order".into(),
            ));
        }
        Ok(Self {
            basis,
            eigenvalues,
            k,
            degenerate,
        })
    }

    /// Learning-space dimension `N`.
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Number of tangent directions.
    pub fn k(&self) -> usize {
        self.k
    }

    /// True when all eigenvalues coincided and the basis was set to the axes.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn normals(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.basis.columns(0, self.dim() - self.k)
    }

    pub fn tangents(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.basis.columns(self.dim() - self.k, self.k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VotingConfig {
    /// Vote scale, in learning-space distance units.
    pub sigma: f64,
    /// Number of nearest neighbors `K` casting votes.
    pub k_neighbors: usize,
    /// Fixed tangent count; `None` estimates it from the eigenvalue gap.
    pub manifold_dim: Option<usize>,
}

impl VotingConfig {
    pub fn new(sigma: f64, k_neighbors: usize, manifold_dim: Option<usize>) -> Result<Self> {
        let cfg = Self {
            sigma,
            k_neighbors,
            manifold_dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.k_neighbors == 0 {
            return Err(Error::InvalidArgument("k_neighbors must be >= 1".into()));
        }
        Ok(())
    }
}

/// Equivalent strain radius of a vote scale for `ℂ = c0·I`.
pub fn sigma_to_strain_radius(sigma: f64, c0: f64) -> f64 {
    sigma / (2.0 * c0).sqrt()
}

/// Summary of a voting pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VotingReport {
    /// Neighbors skipped because they coincide with the receiver.
    pub skipped_duplicates: usize,
    /// Frames whose tensor had a single repeated eigenvalue.
    pub degenerate_frames: usize,
}

/// A single ball vote cast by `voter` on `receiver`.
pub fn ball_vote(receiver: &[f64], voter: &[f64], sigma: f64) -> Result<DMatrix<f64>> {
    if receiver.len() != voter.len() {
        return Err(Error::DimensionMismatch {
            expected: receiver.len(),
            actual: voter.len(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let n = receiver.len();
    let v = DVector::from_iterator(n, receiver.iter().zip(voter).map(|(a, b)| a - b));
    let s2 = v.norm_squared();
    if s2 == 0.0 {
        return Err(Error::DegenerateVote);
    }
    let mut out = DMatrix::identity(n, n);
    out.ger(-1.0 / s2, &v, &v, 1.0);
    Ok(out * (-s2 / (sigma * sigma)).exp())
}

/// Adds `scale · (I - v vᵀ/‖v‖²)` into `acc`.
fn add_projector(acc: &mut DMatrix<f64>, v: &[f64], s2: f64, scale: f64) {
    let n = v.len();
    for c in 0..n {
        acc[(c, c)] += scale;
        for r in 0..n {
            acc[(r, c)] -= scale * v[r] * v[c] / s2;
        }
    }
}

/// Vote tensor with weights relative to the nearest voter, so that it never
/// underflows; the true tensor is `tensor · exp(log_scale)`.
struct ScaledTensor {
    tensor: DMatrix<f64>,
    log_scale: f64,
    skipped: usize,
}

fn accumulate_scaled(ds: &MaterialDataSet, i: usize, cfg: &VotingConfig) -> Result<ScaledTensor> {
    cfg.validate()?;
    let n = ds.learning_dim();
    let neighbors = ds.k_nearest_with_distances(i, cfg.k_neighbors)?;
    let receiver = ds.learning_point(i);
    let sig2 = cfg.sigma * cfg.sigma;
    let mut tensor = DMatrix::zeros(n, n);
    let mut v = vec![0.0; n];
    let mut log_scale = None;
    let mut skipped = 0;
    for nb in &neighbors {
        let voter = ds.learning_point(nb.index);
        for ((vk, a), b) in v.iter_mut().zip(receiver).zip(voter) {
            *vk = a - b;
        }
        let s2: f64 = v.iter().map(|x| x * x).sum();
        if s2 == 0.0 {
            skipped += 1;
            continue;
        }
        // neighbors arrive in ascending distance, so the first vote is the largest
        let base = *log_scale.get_or_insert(-s2 / sig2);
        add_projector(&mut tensor, &v, s2, (-s2 / sig2 - base).exp());
    }
    Ok(ScaledTensor {
        tensor,
        log_scale: log_scale.unwrap_or(0.0),
        skipped,
    })
}

/// `R_i = Σ_{j ∈ KNN(i)} B(P_i, P_j)`, skipping neighbors coincident with `P_i`.
pub fn accumulate_votes(ds: &MaterialDataSet, i: usize, cfg: &VotingConfig) -> Result<DMatrix<f64>> {
    let acc = accumulate_scaled(ds, i, cfg)?;
    Ok(acc.tensor * acc.log_scale.exp())
}

/// Spectral analysis of an accumulated vote tensor.
pub fn analyze_tensor(r: &DMatrix<f64>, cfg: &VotingConfig) -> Result<TangentFrame> {
    analyze_scaled(r, 1.0, cfg)
}

fn analyze_scaled(r: &DMatrix<f64>, scale: f64, cfg: &VotingConfig) -> Result<TangentFrame> {
    let n = r.nrows();
    if !r.is_square() || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "vote tensor must be square with N >= 2, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let mag = r.amax();
    let asym = (r - r.transpose()).amax();
    if asym > 1e-10 * mag.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    if let Some(k) = cfg.manifold_dim {
        if k == 0 || k >= n {
            return Err(Error::InvalidArgument(format!(
                "manifold dimension {k} outside 1..={}",
                n - 1
            )));
        }
    }

    let eig = ((r + r.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j].max(0.0)).collect();

    let spread = values[0] - values[n - 1];
    let degenerate = spread <= 1e-12 * values[0].abs().max(f64::MIN_POSITIVE);
    let basis = if degenerate {
        DMatrix::identity(n, n)
    } else {
        let mut b = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            // fix the sign: largest-magnitude component positive
            let lead = col.iamax();
            if col[lead] < 0.0 {
                col.neg_mut();
            }
            b.set_column(dst, &col);
        }
        b
    };

    let k = match cfg.manifold_dim {
        Some(k) => k,
        None => {
            // normals are the eigenvalues above the largest consecutive gap
            let split = (1..n)
                .max_by(|&a, &b| {
                    (values[a - 1] - values[a])
                        .total_cmp(&(values[b - 1] - values[b]))
                        .then(b.cmp(&a))
                })
                .unwrap_or(1);
            n - split
        }
    };

    TangentFrame::from_parts(
        basis,
        DVector::from_iterator(n, values.into_iter().map(|v| v * scale)),
        k,
        degenerate,
    )
}

/// Votes every point of `ds` and returns a copy carrying the frames.
pub fn vote_dataset(ds: &MaterialDataSet, cfg: &VotingConfig) -> Result<MaterialDataSet> {
    vote_dataset_with_report(ds, cfg).map(|(out, _)| out)
}

pub fn vote_dataset_with_report(
    ds: &MaterialDataSet,
    cfg: &VotingConfig,
) -> Result<(MaterialDataSet, VotingReport)> {
    cfg.validate()?;
    if ds.len() < cfg.k_neighbors + 1 {
        return Err(Error::InvalidArgument(format!(
            "voting with K = {} needs at least {} points, data set has {}",
            cfg.k_neighbors,
            cfg.k_neighbors + 1,
            ds.len()
        )));
    }
    let results: Vec<Result<(TangentFrame, usize)>> = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let acc = accumulate_scaled(ds, i, cfg)?;
            let frame = analyze_scaled(&acc.tensor, acc.log_scale.exp(), cfg)?;
            Ok((frame, acc.skipped))
        })
        .collect();
    let mut report = VotingReport::default();
    let mut frames = Vec::with_capacity(ds.len());
    for r in results {
        let (frame, skipped) = r?;
        report.skipped_duplicates += skipped;
        report.degenerate_frames += usize::from(frame.is_degenerate());
        frames.push(frame);
    }
    if report.skipped_duplicates > 0 {
        log::warn!(
            "tensor voting skipped {} coincident neighbor(s)",
            report.skipped_duplicates
        );
    }
    Ok((ds.clone().with_frames(frames)?, report))
}

/// Mean angle in degrees between each point's tangent space and a reference
/// tangent vector (orientation-free: uses `|cos|`).
pub fn angular_error(ds: &MaterialDataSet, reference_tangents: &[DVector<f64>]) -> Result<f64> {
    let frames = ds.frames().ok_or(Error::MissingFrames)?;
    if reference_tangents.len() != frames.len() {
        return Err(Error::LengthMismatch {
            what: "reference tangents",
            expected: frames.len(),
            actual: reference_tangents.len(),
        });
    }
    let mut sum = 0.0;
    for (frame, r) in frames.iter().zip(reference_tangents) {
        if r.len() != frame.dim() {
            return Err(Error::DimensionMismatch {
                expected: frame.dim(),
                actual: r.len(),
            });
        }
        let rn = r.norm();
        if rn == 0.0 {
            return Err(Error::InvalidArgument("zero-length reference tangent".into()));
        }
        // angle between r and its projection onto the tangent space
        let cos = ((frame.tangents().transpose() * r).norm() / rn).min(1.0);
        sum += cos.acos();
    }
    Ok((sum / frames.len() as f64).to_degrees())
}

/// Where the reference tangent of a noisy sample is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TangentReference {
    /// At the sample's own strain (exact for noise-free data).
    AtSampleStrain,
    /// At the closest point of the reference curve, found by dense sampling
    /// of `samples` strains over `[lo, hi]`.
    ClosestPoint { lo: f64, hi: f64, samples: usize },
}

/// Learning-space tangents of a 1D law's graph for every point of `ds`.
pub fn reference_tangents_1d(
    ds: &MaterialDataSet,
    law: &dyn ConstitutiveLaw,
    at: TangentReference,
) -> Result<Vec<DVector<f64>>> {
    if law.dim() != 1 || ds.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: ds.dim().max(law.dim()),
        });
    }
    let metric = ds.metric();
    let direction = |strain: f64| -> Result<DVector<f64>> {
        let e = DVector::from_element(1, strain);
        let slope = law.tangent(&e)?[(0, 0)];
        Ok(learning_direction(metric, 1.0, slope))
    };
    match at {
        TangentReference::AtSampleStrain => ds.points().iter().map(|p| direction(p.strain[0])).collect(),
        TangentReference::ClosestPoint { lo, hi, samples } => {
            if samples < 2 || !(hi > lo) {
                return Err(Error::InvalidArgument("bad reference-curve sampling".into()));
            }
            let curve: Vec<(f64, [f64; 2])> = (0..samples)
                .map(|s| {
                    let e = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
                    let sig = law.stress(&DVector::from_element(1, e))?[0];
                    Ok((e, [metric.c_sqrt()[(0, 0)] * e, metric.c_inv_sqrt()[(0, 0)] * sig]))
                })
                .collect::<Result<_>>()?;
            let mut coords = Vec::with_capacity(2 * samples);
            for (_, p) in &curve {
                coords.extend_from_slice(p);
            }
            let tree = crate::material_data::kdtree::KdTree::build(coords, 2);
            (0..ds.len())
                .map(|i| {
                    let nn = tree.nearest(ds.learning_point(i)).expect("non-empty curve");
                    direction(curve[nn.index].0)
                })
                .collect()
        }
    }
}

/// Learning-space image of the phase-space direction `(dε, dσ)` for `m_e = 1`.
fn learning_direction(metric: &MetricTensor, d_strain: f64, d_stress: f64) -> DVector<f64> {
    DVector::from_vec(vec![
        metric.c_sqrt()[(0, 0)] * d_strain,
        metric.c_inv_sqrt()[(0, 0)] * d_stress,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::LocalState;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const E: f64 = 100_000.0;

    fn cfg(sigma: f64, k: usize, dim: Option<usize>) -> VotingConfig {
        VotingConfig::new(sigma, k, dim).unwrap()
    }

    /// Data set whose learning-space coordinates are exactly `pts` (ℂ = 1).
    fn learning_set(pts: &[[f64; 2]]) -> MaterialDataSet {
        let metric = MetricTensor::scalar(1.0, 1).unwrap();
        let states = pts
            .iter()
            .map(|p| LocalState::from_slices(&[p[0]], &[p[1]]).unwrap())
            .collect();
        MaterialDataSet::new(states, metric).unwrap()
    }

    #[test]
    fn ball_vote_by_hand() {
        let b = ball_vote(&[1.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        let w = (-1.0f64).exp();
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, w]);
        assert!((b - expect).amax() < 1e-15);
    }

    #[test]
    fn ball_vote_rejects_coincident_points() {
        assert!(matches!(
            ball_vote(&[1.0, 2.0], &[1.0, 2.0], 1.0),
            Err(Error::DegenerateVote)
        ));
    }

    #[test]
    fn ball_vote_annihilates_connecting_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = DVector::from_iterator(6, a.iter().zip(&b).map(|(x, y)| x - y));
            let vote = ball_vote(&a, &b, 1.5).unwrap();
            assert!((vote * &v).amax() <= 1e-12 * v.norm());
        }
    }

    #[test]
    fn single_neighbor_accumulation_is_one_vote() {
        let ds = learning_set(&[[0.0, 0.0], [0.3, 0.1], [2.0, 2.0]]);
        let r = accumulate_votes(&ds, 0, &cfg(0.5, 1, Some(1))).unwrap();
        let b = ball_vote(ds.learning_point(0), ds.learning_point(1), 0.5).unwrap();
        assert!((r - b).amax() < 1e-15);
    }

    #[test]
    fn collinear_neighbors_share_a_null_direction() {
        let u = [0.6, 0.8];
        let pts: Vec<[f64; 2]> = (0..7).map(|t| [u[0] * t as f64 * 0.1, u[1] * t as f64 * 0.1]).collect();
        let ds = learning_set(&pts);
        let r = accumulate_votes(&ds, 3, &cfg(0.3, 4, Some(1))).unwrap();
        let ud = DVector::from_row_slice(&u);
        assert!((r * ud).amax() < 1e-10);
    }

    #[test]
    fn duplicates_are_skipped() {
        let ds = learning_set(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let (_, report) = vote_dataset_with_report(&ds, &cfg(1.0, 2, Some(1))).unwrap();
        assert_eq!(report.skipped_duplicates, 2);
    }

    #[test]
    fn diagonal_tensor_analysis() {
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let f = analyze_tensor(&r, &cfg(1.0, 1, Some(1))).unwrap();
        assert_eq!(f.basis().column(0).into_owned(), DVector::from_row_slice(&[1.0, 0.0]));
        assert_eq!(f.basis().column(1).into_owned(), DVector::from_row_slice(&[0.0, 1.0]));
        assert_eq!(f.eigenvalues().as_slice(), &[2.0, 1.0]);
        assert!(!f.is_degenerate());
    }

    #[test]
    fn analysis_rejects_asymmetric_input() {
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        assert!(matches!(analyze_tensor(&r, &cfg(1.0, 1, None)), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn degenerate_tensor_uses_axes() {
        let r = DMatrix::identity(3, 3) * 0.7;
        let f = analyze_tensor(&r, &cfg(1.0, 1, Some(1))).unwrap();
        assert!(f.is_degenerate());
        assert_eq!(f.basis(), &DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn gap_estimate_of_manifold_dimension() {
        // eigenvalues 5, 4.8, 0.1, 0.05: normals are the two above the gap
        let r = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.1, 5.0, 0.05, 4.8]));
        let f = analyze_tensor(&r, &cfg(1.0, 1, None)).unwrap();
        assert_eq!(f.k(), 2);
    }

    #[test]
    fn two_points_on_a_line() {
        // σ = E ε maps to the learning-space line through (√E, √E)·ε/…
        let metric = MetricTensor::scalar(E, 1).unwrap();
        let pts = vec![
            LocalState::from_slices(&[0.001], &[E * 0.001]).unwrap(),
            LocalState::from_slices(&[0.002], &[E * 0.002]).unwrap(),
        ];
        let ds = MaterialDataSet::new(pts, metric).unwrap();
        let r = accumulate_votes(&ds, 0, &cfg(1.0, 1, Some(1))).unwrap();
        let f = analyze_tensor(&r, &cfg(1.0, 1, Some(1))).unwrap();
        let t = f.tangents().column(0).into_owned();
        let line = DVector::from_row_slice(&[1.0, 1.0]).normalize();
        let angle = t.dot(&line).abs().min(1.0).acos();
        assert!(angle < 1e-6, "angle {angle}");
    }

    #[test]
    fn angular_error_conventions() {
        let ds = learning_set(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let voted = vote_dataset(&ds, &cfg(1.0, 2, Some(1))).unwrap();
        let along = vec![DVector::from_row_slice(&[1.0, 0.0]); 3];
        let flipped = vec![DVector::from_row_slice(&[-1.0, 0.0]); 3];
        let across = vec![DVector::from_row_slice(&[0.0, 1.0]); 3];
        assert_relative_eq!(angular_error(&voted, &along).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(angular_error(&voted, &flipped).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(angular_error(&voted, &across).unwrap(), 90.0, epsilon = 1e-9);
        assert!(matches!(angular_error(&ds, &along), Err(Error::MissingFrames)));
        let zero = vec![DVector::zeros(2); 3];
        assert!(angular_error(&voted, &zero).is_err());
    }

    #[test]
    fn voting_is_deterministic_and_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|_| {
                let t: f64 = rng.random_range(-1.0..1.0);
                [t, t.sin()]
            })
            .collect();
        let shifted: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + 3.0, p[1] - 2.0]).collect();
        let c = cfg(0.1, 6, Some(1));
        let a = vote_dataset(&learning_set(&pts), &c).unwrap();
        let b = vote_dataset(&learning_set(&pts), &c).unwrap();
        let s = vote_dataset(&learning_set(&shifted), &c).unwrap();
        assert_eq!(a.frames(), b.frames());
        for (fa, fs) in a.frames().unwrap().iter().zip(s.frames().unwrap()) {
            // basis columns agree up to sign; compare projectors
            let pa = fa.tangents() * fa.tangents().transpose();
            let ps = fs.tangents() * fs.tangents().transpose();
            assert!((pa - ps).amax() < 1e-10);
        }
    }
}
