//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line to
//! stderr (uncaptured) together with the measured numbers and runtime.

use std::io::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tenvote_core::benchmarks::*;
use tenvote_core::dd_solver::ConstraintProjector;
use tenvote_core::fem::{finite_difference_tangent, newton_reference_solve};
use tenvote_core::material_data::kdtree::KdTree;
use tenvote_core::material_data::{sample_dataset, DataGenSpec, StrainSampling};
use tenvote_core::phase_space::{from_learning_space, global_distance, local_distance, to_learning_space};
use tenvote_core::study::*;
use tenvote_core::tensor_voting::{angular_error, ball_vote, vote_dataset};
use tenvote_core::*;

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn report(o: &Outcome) {
    let within = o.elapsed <= o.budget;
    let verdict = if o.pass && within { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "criterion {:>2} {verdict}: {} | {} | {:.1} s (budget {} s)",
        o.id,
        o.title,
        o.detail,
        o.elapsed.as_secs_f64(),
        o.budget.as_secs()
    );
}

fn run(id: u32, title: &'static str, budget_s: u64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    let o = Outcome {
        id,
        title,
        pass,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_s),
    };
    report(&o);
    o
}

fn tower() -> TrussSpec {
    TrussSpec::tower(8, 2).unwrap()
}

const MD: Variant = Variant { scheme: Scheme::MinDist, ten_vote: false };
const MD_TV: Variant = Variant { scheme: Scheme::MinDist, ten_vote: true };
const ME: Variant = Variant { scheme: Scheme::MaxEnt, ten_vote: false };
const ME_TV: Variant = Variant { scheme: Scheme::MaxEnt, ten_vote: true };

fn convergence_order() -> (bool, String) {
    let mut spec = StudySpec::truss_convergence(tower(), 4);
    spec.variants = vec![MD, MD_TV];
    let rep = run_convergence_study(&spec).unwrap();
    let md = rep.slope(MD, 0.0).unwrap();
    let tv = rep.slope(MD_TV, 0.0).unwrap();
    let below = spec
        .set_sizes
        .iter()
        .all(|&n| rep.median(MD_TV, 0.0, n).unwrap() < rep.median(MD, 0.0, n).unwrap());
    let pass = (-1.4..=-0.6).contains(&md) && (-2.6..=-1.5).contains(&tv) && below;
    (pass, format!("slopes min-dist {md:.2}, ten-vote {tv:.2}; ten-vote below at every n: {below}"))
}

fn max_ent_quality() -> (bool, String) {
    let mut spec = StudySpec::truss_convergence(tower(), 2);
    spec.set_sizes = vec![400];
    spec.sigmas = vec![0.0625];
    spec.variants = vec![MD, ME];
    let rep = run_convergence_study(&spec).unwrap();
    let md = rep.median_final(MD, 0.0, 400).unwrap();
    let me = rep.median_final(ME, 0.0, 400).unwrap();
    (me <= 1.05 * md, format!("median final distance max-ent {me:.4e} vs min-dist {md:.4e} (ratio {:.3})", me / md))
}

fn monotone_fixed_point() -> (bool, String) {
    let problems: Vec<Problem> = [(2, 1), (8, 2)]
        .iter()
        .map(|&(l, b)| build_truss(&TrussSpec::tower(l, b).unwrap()).unwrap())
        .collect();
    let law: Arc<dyn ConstitutiveLaw> = Arc::new(truss_reference_law());
    let mut runner = TestRunner::new(PropConfig { cases: 64, failure_persistence: None, ..Default::default() });
    let strategy = (0usize..2, 10usize..600, any::<u64>(), 0.0f64..0.05);
    let runs = std::cell::Cell::new(0);
    let result = runner.run(&strategy, |(pi, n, seed, noise)| {
        let p = &problems[pi];
        let ds = sample_dataset(&DataGenSpec {
            law: law.clone(),
            metric: p.metrics[0].clone(),
            count: n,
            sampling: StrainSampling::symmetric_uniform(0.025, 1),
            noise_stddev_fraction: noise,
            rng_seed: seed,
        })
        .unwrap();
        let data = ElementDataSets::shared(ds, p.elements.len());
        let cfg = SolverConfig { rng_seed: seed, ..SolverConfig::new(Scheme::MinDist, false) };
        let r = solve(p, &data, &cfg).unwrap();
        runs.set(runs.get() + 1);
        for w in r.distance_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "distance rose from {} to {}", w[0], w[1]);
        }
        Ok(())
    });
    match result {
        Ok(()) => (true, format!("{} random min-dist runs, all non-increasing", runs.get())),
        Err(e) => (false, e.to_string()),
    }
}

fn ball_vote_spectrum() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_zero = 0.0f64;
    let mut worst_rest = 0.0f64;
    let mut bad = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=6);
        let sigma = 10f64.powf(rng.random_range(-2.0..2.0));
        let receiver: Vec<f64> = (0..n).map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let s = sigma * rng.random_range(0.01..3.0);
        let voter: Vec<f64> = receiver.iter().zip(&dir).map(|(r, d)| r + s * d / len).collect();
        let s2: f64 = receiver.iter().zip(&voter).map(|(a, b)| (a - b) * (a - b)).sum();
        let w = (-s2 / (sigma * sigma)).exp();
        let b = ball_vote(&receiver, &voter, sigma).unwrap();
        let ev = SymmetricEigen::new(b).eigenvalues;
        let zeros = ev.iter().filter(|l| l.abs() < 1e-10 * w).count();
        let rest = ev.iter().filter(|l| l.abs() >= 1e-10 * w).map(|l| ((l - w) / w).abs()).fold(0.0, f64::max);
        worst_zero = worst_zero.max(ev.iter().map(|l| l.abs() / w).fold(f64::INFINITY, f64::min));
        worst_rest = worst_rest.max(rest);
        if zeros != 1 || rest > 1e-10 {
            bad += 1;
        }
    }
    (bad == 0, format!("{bad} bad triples; worst |λ_min|/w {worst_zero:.1e}, worst rel. deviation {worst_rest:.1e}"))
}

fn unit_metric_set(points: &[[f64; 2]]) -> MaterialDataSet {
    let states = points.iter().map(|p| LocalState::from_slices(&[p[0]], &[p[1]]).unwrap()).collect();
    MaterialDataSet::new(states, MetricTensor::scalar(1.0, 1).unwrap()).unwrap()
}

fn analytic_manifolds() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = DVector::from_vec(vec![0.6, 0.8]);
    let line: Vec<[f64; 2]> = (0..200)
        .map(|_| {
            let t: f64 = rng.random_range(-1.0..1.0);
            [0.2 + t * dir[0], -0.1 + t * dir[1]]
        })
        .collect();
    let line = vote_dataset(&unit_metric_set(&line), &VotingConfig::new(0.05, 10, None).unwrap()).unwrap();
    let line_err = angular_error(&line, &vec![dir.clone(); 200]).unwrap();

    let angles: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let circle: Vec<[f64; 2]> = angles.iter().map(|a| [a.cos(), a.sin()]).collect();
    let circle = vote_dataset(&unit_metric_set(&circle), &VotingConfig::new(0.05, 10, Some(1)).unwrap()).unwrap();
    let tangents: Vec<DVector<f64>> = angles.iter().map(|a| DVector::from_vec(vec![-a.sin(), a.cos()])).collect();
    let circle_err = angular_error(&circle, &tangents).unwrap();
    (
        line_err < 0.01 && circle_err < 0.5,
        format!("mean Δθ line {line_err:.2e}°, circle {circle_err:.3}°"),
    )
}

fn voting_error_decreases() -> (bool, String) {
    let mut spec = StudySpec::truss_voting(tower());
    let smallest = spec.sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
    spec.sigmas = vec![smallest];
    spec.set_sizes = vec![100, 400, 1600];
    let rep = run_voting_study(&spec).unwrap();
    let med: Vec<f64> = spec.set_sizes.iter().map(|&n| rep.median(n, smallest, 0.0).unwrap()).collect();
    let pass = med.windows(2).all(|w| w[1] < w[0]);
    (pass, format!("σ = {smallest}: median Δθ {med:.4?}°"))
}

fn noisy_ordering() -> (bool, String) {
    let mut spec = StudySpec::truss_noisy(tower(), 2, 0.01);
    spec.set_sizes = vec![400];
    spec.sigmas.truncate(1);
    spec.variants = vec![MD, ME, ME_TV];
    let rep = run_convergence_study(&spec).unwrap();
    let m = |v| rep.median(v, 0.01, 400).unwrap();
    let (md, me, tv) = (m(MD), m(ME), m(ME_TV));
    (
        tv <= me && tv <= md,
        format!("median error max-ent/ten-vote {tv:.1}, max-ent/classic {me:.1}, min-dist/classic {md:.1}"),
    )
}

fn plate_error_reduction() -> (bool, String) {
    let p = build_plate(&PlateSpec::default()).unwrap();
    let law = plate_reference_law();
    let reference = newton_reference_solve(&p, &law, Default::default()).unwrap().state;
    let law: Arc<dyn ConstitutiveLaw> = Arc::new(law);
    let max_err = |z: &GlobalState| {
        z.states
            .iter()
            .zip(&reference.states)
            .map(|(a, b)| (a.stress[1] - b.stress[1]).abs())
            .fold(0.0, f64::max)
    };
    let mut ratios = Vec::new();
    let mut detail = Vec::new();
    for seed in 0..5u64 {
        let ds = sample_dataset(&DataGenSpec {
            law: law.clone(),
            metric: p.metrics[0].clone(),
            count: 16 * 16 * 16,
            sampling: StrainSampling::isotropic_normal(0.005, 3),
            noise_stddev_fraction: 0.0,
            rng_seed: seed,
        })
        .unwrap();
        let voted = vote_dataset(&ds, &VotingConfig::new(1.0, 24, Some(3)).unwrap()).unwrap();
        let data = ElementDataSets::shared(voted, p.elements.len());
        let cfg = |tv| SolverConfig { rng_seed: seed, ..SolverConfig::new(Scheme::MinDist, tv) };
        let classic = max_err(&solve(&p, &data, &cfg(false)).unwrap().z);
        let voted = max_err(&solve(&p, &data, &cfg(true)).unwrap().z);
        ratios.push(classic / voted);
        detail.push(format!("{classic:.1}/{voted:.1}"));
    }
    let worst = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    (worst >= 5.0, format!("max |Δσ_yy| classic/ten-vote [MPa] {}; worst ratio {worst:.1}", detail.join(", ")))
}

fn classical_limit() -> (bool, String) {
    let p = build_truss(&tower()).unwrap();
    let law = truss_reference_law();
    let reference = newton_reference_solve(&p, &law, Default::default()).unwrap().state;
    let metrics: Vec<MetricTensor> = vec![p.metrics[0].clone(); p.elements.len()];
    let n = 25 * 4usize.pow(4);
    let graph: Vec<LocalState> = (0..n)
        .map(|i| {
            let e = -0.025 + 0.05 * i as f64 / (n - 1) as f64;
            let s = law.stress(&DVector::from_element(1, e)).unwrap()[0];
            LocalState::from_slices(&[e], &[s]).unwrap()
        })
        .collect();
    let ds = MaterialDataSet::new(graph, p.metrics[0].clone()).unwrap();
    let spacing = ds.mean_spacing();
    let voted = vote_dataset(&ds, &VotingConfig::new(0.25f64.powi(4), 6, Some(1)).unwrap()).unwrap();
    let data = ElementDataSets::shared(voted, p.elements.len());
    // RMS over the structure, so the figure is comparable to a point spacing
    let rms = |z: &GlobalState| global_distance(z, &reference, &metrics).unwrap() / p.total_weight().sqrt();
    // worst case over several random initial assignments
    let worst = |tv: bool| {
        (0..4u64)
            .map(|seed| {
                let cfg = SolverConfig { rng_seed: seed, ..SolverConfig::new(Scheme::MinDist, tv) };
                rms(&solve(&p, &data, &cfg).unwrap().z) / spacing
            })
            .fold(0.0, f64::max)
    };
    let (md, tv) = (worst(false), worst(true));
    let floor = p
        .elements
        .iter()
        .zip(&reference.states)
        .map(|(el, z)| el.weight * data.get(0).nearest_neighbor(z).unwrap().1.powi(2))
        .sum::<f64>()
        .sqrt()
        / p.total_weight().sqrt()
        / spacing;
    (
        md <= 2.0 && tv <= 0.1,
        format!("worst distance to reference over 4 starts, in NN spacings: min-dist {md:.2} (limit 2), ten-vote {tv:.4} (limit 0.1); reference to nearest data {floor:.2}"),
    )
}

fn oracle_equivalences() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();

    // nearest neighbours against an exhaustive scan
    let dim = 4;
    let coords: Vec<f64> = (0..3000 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let tree = KdTree::build(coords.clone(), dim);
    let dist = |i: usize, q: &[f64]| -> f64 { (0..dim).map(|k| (coords[i * dim + k] - q[k]).powi(2)).sum() };
    let mut nn_mismatch = 0;
    for _ in 0..1000 {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect();
        let mut brute: Vec<(f64, usize)> = (0..3000).map(|i| (dist(i, &q), i)).collect();
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if tree.nearest(&q).unwrap().index != brute[0].1 {
            nn_mismatch += 1;
        }
        let knn: Vec<usize> = tree.k_nearest(&q, 8, None).iter().map(|nb| nb.index).collect();
        if knn != brute[..8].iter().map(|b| b.1).collect::<Vec<_>>() {
            nn_mismatch += 1;
        }
    }
    if nn_mismatch > 0 {
        failures.push(format!("{nn_mismatch} NN/KNN mismatches"));
    }

    // constitutive tangents
    let laws: [Box<dyn ConstitutiveLaw>; 2] = [Box::new(truss_reference_law()), Box::new(plate_reference_law())];
    let mut worst_tangent = 0.0f64;
    for law in &laws {
        for _ in 0..200 {
            let e = DVector::from_fn(law.dim(), |_, _| rng.random_range(-0.02..0.02));
            let exact = law.tangent(&e).unwrap();
            let fd = finite_difference_tangent(law.as_ref(), &e, 1e-7).unwrap();
            worst_tangent = worst_tangent.max((exact.clone() - fd).norm() / exact.norm());
        }
    }
    if worst_tangent > 1e-5 {
        failures.push(format!("tangent error {worst_tangent:.1e}"));
    }

    // P_C idempotence
    let mut worst_pc = 0.0f64;
    for p in [build_truss(&tower()).unwrap(), build_plate(&PlateSpec::default()).unwrap()] {
        let proj = ConstraintProjector::new(&p).unwrap();
        let m = p.elements[0].strain_dim();
        let y: Vec<LocalState> = (0..p.elements.len())
            .map(|_| {
                let e: Vec<f64> = (0..m).map(|_| rng.random_range(-0.01..0.01)).collect();
                let s: Vec<f64> = (0..m).map(|_| rng.random_range(-500.0..500.0)).collect();
                LocalState::from_slices(&e, &s).unwrap()
            })
            .collect();
        let once = proj.project(&y).unwrap().states;
        let twice = proj.project(&once).unwrap().states;
        let metrics: Vec<MetricTensor> = p.elements.iter().map(|e| p.metrics[e.metric].clone()).collect();
        let gs = |s: Vec<LocalState>| GlobalState::new(s, p.weights()).unwrap();
        let norm = global_distance(&gs(once.clone()), &gs(vec![LocalState::zeros(m); once.len()]), &metrics).unwrap();
        worst_pc = worst_pc.max(global_distance(&gs(once), &gs(twice), &metrics).unwrap() / norm);
    }
    if worst_pc > 1e-9 {
        failures.push(format!("P_C idempotence {worst_pc:.1e}"));
    }

    // learning-space isometry, including a random anisotropic metric
    let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
    let spd = &a * a.transpose() + DMatrix::identity(3, 3) * 0.5;
    let metrics = [
        MetricTensor::isotropic_plane_strain(1e5, 0.3).unwrap(),
        MetricTensor::new(spd * 1e4).unwrap(),
        MetricTensor::scalar(1e5, 1).unwrap(),
    ];
    let mut worst_iso = 0.0f64;
    for c in &metrics {
        let m = c.dim();
        for _ in 0..300 {
            let mut draw = || {
                let e: Vec<f64> = (0..m).map(|_| rng.random_range(-0.01..0.01)).collect();
                let s: Vec<f64> = (0..m).map(|_| rng.random_range(-800.0..800.0)).collect();
                LocalState::from_slices(&e, &s).unwrap()
            };
            let (z, y) = (draw(), draw());
            let lz = to_learning_space(&z, c).unwrap();
            let ly = to_learning_space(&y, c).unwrap();
            let d = local_distance(&z, &y, c).unwrap();
            worst_iso = worst_iso.max(((lz.clone() - ly).norm_squared() - 2.0 * d * d).abs() / (2.0 * d * d));
            let back = from_learning_space(lz.as_slice(), c).unwrap();
            worst_iso = worst_iso.max(local_distance(&back, &z, c).unwrap() / d);
        }
    }
    if worst_iso > 1e-10 {
        failures.push(format!("isometry {worst_iso:.1e}"));
    }

    let detail = format!(
        "NN/KNN mismatches {nn_mismatch}/2000, tangent {worst_tangent:.1e}, P_C {worst_pc:.1e}, isometry {worst_iso:.1e}"
    );
    (failures.is_empty(), detail)
}

#[test]
fn acceptance_criteria() {
    let outcomes = [
        run(1, "convergence order on the noise-free truss", 300, convergence_order),
        run(2, "max-ent at least as close as min-dist", 120, max_ent_quality),
        run(3, "min-dist distance is non-increasing", 30, monotone_fixed_point),
        run(4, "ball-vote spectrum", 10, ball_vote_spectrum),
        run(5, "tangents of a line and a circle", 10, analytic_manifolds),
        run(6, "voting error decreases with n", 60, voting_error_decreases),
        run(7, "noisy-data ordering at 1% noise", 300, noisy_ordering),
        run(8, "plate stress error reduction", 300, plate_error_reduction),
        run(9, "classical-limit recovery on a dense graph", 120, classical_limit),
        run(10, "oracle equivalences", 60, oracle_equivalences),
    ];
    let _ = writeln!(std::io::stderr(), "acceptance summary:");
    for o in &outcomes {
        report(o);
    }
    let failed: Vec<u32> = outcomes
        .iter()
        .filter(|o| !(o.pass && o.elapsed <= o.budget))
        .map(|o| o.id)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
