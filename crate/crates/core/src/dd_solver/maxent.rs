use crate::error::{Error, Result};
use crate::material_data::kdtree::squared_distance;
use crate::material_data::MaterialDataSet;
use crate::phase_space::{GlobalState, LocalState};

/// Truncation margin: dropped points have relative weight below
/// `e^-32 / n`, so their total is below `e^-32 ≈ 1.3e-14`.
const TRUNCATION_LOG: f64 = 32.0;

/// `p_i = exp(-β/2 d²(z, y_i)) / S` over the whole data set, evaluated
/// relative to the nearest point so nothing overflows.
pub fn maxent_weights(z: &LocalState, ds: &MaterialDataSet, beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let q = ds.learning_of(z)?;
    let d2: Vec<f64> = (0..ds.len())
        .map(|i| 0.5 * squared_distance(&q, ds.learning_point(i)))
        .collect();
    let d2_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = d2.iter().map(|d| (-0.5 * beta * (d - d2_min)).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    Ok(p)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// Max-ent weights restricted to the points that can carry weight: a radius
/// query around the learning-space point `q`. Returns `(index, p)` sorted by
/// index, and the index of the nearest point.
pub(crate) fn truncated_weights(
    q: &[f64],
    ds: &MaterialDataSet,
    beta: f64,
) -> Result<(Vec<(usize, f64)>, usize)> {
    let nn = ds.nearest_learning(q)?;
    let d2_min = 0.5 * nn.dist_sq;
    let margin = (2.0 / beta) * (TRUNCATION_LOG + (ds.len() as f64).ln());
    let cands = ds.tree().within(q, 2.0 * (d2_min + margin));
    let mut out: Vec<(usize, f64)> = cands
        .iter()
        .map(|c| (c.index, (-0.5 * beta * (0.5 * c.dist_sq - d2_min)).exp()))
        .collect();
    let s: f64 = out.iter().map(|(_, p)| p).sum();
    out.iter_mut().for_each(|(_, p)| *p /= s);
    Ok((out, nn.index))
}

/// One annealing step of the Pareto weight.
///
/// `weights[e]` are the `(index, p)` pairs used for material point `e` at
/// the previous state; distances are taken to the new state `z_next`.
/// Points whose weighted distance vanishes carry no information about the
/// temperature and are left out of the mean; if all vanish, `beta_end` is
/// returned (or the minimal increase, if larger).
pub fn anneal_beta(
    weights: &[Vec<(usize, f64)>],
    z_next: &GlobalState,
    data: &super::ElementDataSets,
    beta_prev: f64,
    lambda: f64,
    beta_end: f64,
) -> Result<f64> {
    check_beta(beta_prev)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if weights.len() != z_next.len() || data.len() != z_next.len() {
        return Err(Error::LengthMismatch {
            what: "annealing weights",
            expected: z_next.len(),
            actual: weights.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, (we, z)) in weights.iter().zip(&z_next.states).enumerate() {
        let ds = data.get(e);
        let zl = ds.learning_of(z)?;
        let mut inv = 0.0;
        for &(i, p) in we {
            if i >= ds.len() {
                return Err(Error::IndexOutOfRange { index: i, len: ds.len() });
            }
            inv += p * 0.5 * squared_distance(&zl, ds.learning_point(i));
        }
        if inv > 0.0 {
            num += z_next.weights[e] / inv;
            den += z_next.weights[e];
        }
    }
    let floor = beta_prev * (1.0 + 1e-12);
    if den == 0.0 {
        return Ok(beta_end.max(floor));
    }
    let beta_tilde = num / den;
    Ok((lambda * beta_tilde + (1.0 - lambda) * beta_prev).max(floor))
}

#[cfg(test)]
mod tests {
    use super::super::ElementDataSets;
    use super::*;
    use crate::phase_space::MetricTensor;

    fn line_set(xs: &[f64]) -> MaterialDataSet {
        // c = 2 and zero stress: d² = ε²
        let pts = xs
            .iter()
            .map(|&x| LocalState::from_slices(&[x], &[0.0]).unwrap())
            .collect();
        MaterialDataSet::new(pts, MetricTensor::scalar(2.0, 1).unwrap()).unwrap()
    }

    fn at(x: f64) -> LocalState {
        LocalState::from_slices(&[x], &[0.0]).unwrap()
    }

    #[test]
    fn equidistant_points_share_weight() {
        let ds = line_set(&[-1.0, 1.0]);
        let p = maxent_weights(&at(0.0), &ds, 3.0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn limits_in_beta() {
        let ds = line_set(&[0.0, 0.1, 0.3, 0.35, 2.0]);
        let z = at(0.12);
        let hot = maxent_weights(&z, &ds, 1e-12).unwrap();
        assert!(hot.iter().all(|p| (p - 0.2).abs() < 1e-6));
        let cold = maxent_weights(&z, &ds, 1e12 / 0.02).unwrap();
        assert!(cold[1] >= 1.0 - 1e-9);
        let sum: f64 = maxent_weights(&z, &ds, 7.0).unwrap().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // far beyond exp range without the shift
        let far = maxent_weights(&at(1e3), &ds, 1e3).unwrap();
        assert!((far[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_matches_full_sum() {
        let xs: Vec<f64> = (0..400).map(|i| (i as f64 * 0.37).sin()).collect();
        let ds = line_set(&xs);
        for beta in [0.5, 40.0, 4e4] {
            let z = at(0.123);
            let full = maxent_weights(&z, &ds, beta).unwrap();
            let (trunc, nn) = truncated_weights(&ds.learning_of(&z).unwrap(), &ds, beta).unwrap();
            let mut dense = vec![0.0; xs.len()];
            for (i, p) in trunc {
                dense[i] = p;
            }
            let err = full.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "beta {beta}: {err}");
            assert_eq!(nn, ds.nearest_neighbor(&z).unwrap().0);
        }
    }

    #[test]
    fn annealing_by_hand() {
        // d² to z of 1 and 3; weights 0.5 each: β̃ = 1/2
        let ds = line_set(&[1.0, 3f64.sqrt()]);
        let data = ElementDataSets::shared(ds, 1);
        let z = GlobalState::new(vec![at(0.0)], vec![1.0]).unwrap();
        let w = vec![vec![(0, 0.5), (1, 0.5)]];
        let b = anneal_beta(&w, &z, &data, 0.1, 0.5, 1e3).unwrap();
        assert!((b - 0.3).abs() < 1e-12);
        let frozen = anneal_beta(&w, &z, &data, 0.1, 0.0, 1e3).unwrap();
        assert_eq!(frozen, 0.1 * (1.0 + 1e-12));
        assert!((anneal_beta(&w, &z, &data, 0.1, 1.0, 1e3).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn annealing_exact_data_caps() {
        let ds = line_set(&[0.0, 1.0]);
        let data = ElementDataSets::shared(ds, 1);
        let z = GlobalState::new(vec![at(0.0)], vec![1.0]).unwrap();
        let b = anneal_beta(&[vec![(0, 1.0)]], &z, &data, 2.0, 0.5, 1e3).unwrap();
        assert_eq!(b, 1e3);
    }
}
