//! Data-driven fixed-point solvers: min-dist and max-ent, each optionally
//! with projections onto voted tangent spaces instead of the raw data.

mod maxent;
mod output;
mod projection;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use maxent::{anneal_beta, maxent_weights};
pub use output::write_result;
pub use projection::{
    nearest_assignment, project_constraint, project_data, project_tangent, project_tangent_capped,
    ConstraintProjector, ElementDataSets, Projection,
};

use crate::error::{Error, Result};
use crate::fem::Problem;
use crate::phase_space::{from_learning_space, global_distance_with, GlobalState, LocalState, MetricTensor};

/// Relative change of the max-ent distance below which, with a stable
/// assignment, the iteration counts as converged before `beta_end`.
pub const STATIONARY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    MinDist,
    MaxEnt,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::MinDist => "min-dist",
            Scheme::MaxEnt => "max-ent",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-dist" => Ok(Scheme::MinDist),
            "max-ent" => Ok(Scheme::MaxEnt),
            _ => Err(Error::InvalidArgument(format!(
                "unknown scheme `{s}` (expected min-dist or max-ent)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub ten_vote: bool,
    pub max_iterations: usize,
    /// Initial Pareto weight; `None` uses the inverse mean squared
    /// nearest-neighbor distance of the data.
    pub beta0: Option<f64>,
    pub lambda_anneal: f64,
    /// Final Pareto weight; `None` uses `1e4 · β₀`.
    pub beta_end: Option<f64>,
    pub distance_tolerance: f64,
    pub rng_seed: u64,
    /// Limits the tangential excursion to this multiple of the mean data
    /// spacing.
    pub excursion_cap: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::MinDist,
            ten_vote: false,
            max_iterations: 2000,
            beta0: None,
            lambda_anneal: 0.5,
            beta_end: None,
            distance_tolerance: 0.0,
            rng_seed: 0,
            excursion_cap: None,
        }
    }
}

impl SolverConfig {
    pub fn new(scheme: Scheme, ten_vote: bool) -> Self {
        Self {
            scheme,
            ten_vote,
            ..Self::default()
        }
    }

    /// Short label such as `max-ent/ten-vote`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}",
            self.scheme,
            if self.ten_vote { "ten-vote" } else { "classic" }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.lambda_anneal) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda_anneal));
        }
        if !(self.distance_tolerance >= 0.0) {
            return bad("distance tolerance must be non-negative".into());
        }
        for (name, v) in [("beta0", self.beta0), ("beta_end", self.beta_end)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if let (Some(b0), Some(be)) = (self.beta0, self.beta_end) {
            if self.scheme == Scheme::MaxEnt && be <= b0 {
                return bad(format!("beta_end ({be}) must exceed beta0 ({b0})"));
            }
        }
        if let Some(c) = self.excursion_cap {
            if !(c > 0.0) {
                return bad(format!("excursion cap must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub config: SolverConfig,
    /// Compatible and equilibrated state.
    pub z: GlobalState,
    /// Assigned data states (max-ent: the weighted data averages).
    pub y: GlobalState,
    /// Tangent-space states (ten-vote only).
    pub x: Option<GlobalState>,
    pub u: DVector<f64>,
    pub eta: DVector<f64>,
    /// Constraint projections performed after the initial one.
    pub iterations: usize,
    /// Distance between `z` and its data (or tangent) target, per iteration.
    pub distance_history: Vec<f64>,
    pub converged: bool,
    /// Nearest data point per material point.
    pub assignment: Vec<usize>,
    /// Final Pareto weight (max-ent only).
    pub beta: Option<f64>,
}

impl SolveResult {
    pub fn final_distance(&self) -> f64 {
        self.distance_history.last().copied().unwrap_or(f64::NAN)
    }
}

struct Context<'a> {
    problem: &'a Problem,
    data: &'a ElementDataSets,
    metrics: Vec<&'a MetricTensor>,
    projector: ConstraintProjector<'a>,
    /// Learning-space excursion limit per distinct data set.
    caps: Vec<Option<f64>>,
}

impl Context<'_> {
    fn distance(&self, z: &[LocalState], y: &[LocalState]) -> Result<f64> {
        let w = self.problem.weights();
        global_distance_with(
            &GlobalState::new(z.to_vec(), w.clone())?,
            &GlobalState::new(y.to_vec(), w)?,
            &self.metrics,
        )
    }

    fn global(&self, states: Vec<LocalState>) -> Result<GlobalState> {
        GlobalState::new(states, self.problem.weights())
    }

    fn cap(&self, e: usize) -> Option<f64> {
        self.caps[self.data.set_index(e)]
    }
}

/// Pairs of (data state, tangent state) per material point.
type Targets = (Vec<usize>, Vec<LocalState>, Option<Vec<LocalState>>);

fn min_dist_targets(ctx: &Context<'_>, z: &[LocalState], ten_vote: bool) -> Result<Targets> {
    let rows: Vec<(usize, LocalState, Option<LocalState>)> = z
        .par_iter()
        .enumerate()
        .map(|(e, ze)| {
            let ds = ctx.data.get(e);
            let zl = ds.learning_of(ze)?;
            let nn = ds.nearest_learning(&zl)?;
            let y = ds.point(nn.index).clone();
            let x = if ten_vote {
                let xl = projection::tangent_point(
                    &zl,
                    ds.learning_point(nn.index),
                    ds.frame(nn.index)?,
                    ctx.cap(e),
                );
                Some(from_learning_space(&xl, ds.metric())?)
            } else {
                None
            };
            Ok((nn.index, y, x))
        })
        .collect::<Result<_>>()?;
    Ok(unzip(rows, ten_vote))
}

fn unzip(rows: Vec<(usize, LocalState, Option<LocalState>)>, ten_vote: bool) -> Targets {
    let mut idx = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    let mut xs = Vec::with_capacity(rows.len());
    for (i, y, x) in rows {
        idx.push(i);
        ys.push(y);
        if let Some(x) = x {
            xs.push(x);
        }
    }
    (idx, ys, ten_vote.then_some(xs))
}

struct MaxEntStep {
    assignment: Vec<usize>,
    weights: Vec<Vec<(usize, f64)>>,
    /// `Σ p_i y_i`.
    mean_data: Vec<LocalState>,
    /// `Σ p_i x_i` (ten-vote only).
    mean_tangent: Option<Vec<LocalState>>,
}

fn max_ent_targets(ctx: &Context<'_>, z: &[LocalState], beta: f64, ten_vote: bool) -> Result<MaxEntStep> {
    type Row = (usize, Vec<(usize, f64)>, LocalState, Option<LocalState>);
    let rows: Vec<Row> = z
        .par_iter()
        .enumerate()
        .map(|(e, ze)| {
            let ds = ctx.data.get(e);
            let zl = ds.learning_of(ze)?;
            let (w, nn) = maxent::truncated_weights(&zl, ds, beta)?;
            let dim = zl.len();
            let mut ymean = vec![0.0; dim];
            let mut xmean = vec![0.0; dim];
            for &(i, p) in &w {
                let yl = ds.learning_point(i);
                for (a, b) in ymean.iter_mut().zip(yl) {
                    *a += p * b;
                }
                if ten_vote {
                    projection::accumulate_tangent_point(&mut xmean, p, &zl, yl, ds.frame(i)?, ctx.cap(e));
                }
            }
            let y = from_learning_space(&ymean, ds.metric())?;
            let x = if ten_vote {
                Some(from_learning_space(&xmean, ds.metric())?)
            } else {
                None
            };
            Ok((nn, w, y, x))
        })
        .collect::<Result<_>>()?;
    let mut step = MaxEntStep {
        assignment: Vec::with_capacity(rows.len()),
        weights: Vec::with_capacity(rows.len()),
        mean_data: Vec::with_capacity(rows.len()),
        mean_tangent: ten_vote.then(Vec::new),
    };
    for (nn, w, y, x) in rows {
        step.assignment.push(nn);
        step.weights.push(w);
        step.mean_data.push(y);
        if let (Some(xs), Some(x)) = (step.mean_tangent.as_mut(), x) {
            xs.push(x);
        }
    }
    Ok(step)
}

/// Weighted mean over points of each data set's mean squared NN distance.
fn default_beta0(problem: &Problem, data: &ElementDataSets) -> f64 {
    let per_set: Vec<f64> = data.sets().iter().map(|ds| ds.spacing_stats().1).collect();
    let mut acc = 0.0;
    let mut tot = 0.0;
    for (e, el) in problem.elements.iter().enumerate() {
        acc += el.weight * per_set[data.set_index(e)];
        tot += el.weight;
    }
    let msq = acc / tot;
    if msq > 0.0 && msq.is_finite() {
        1.0 / msq
    } else {
        1.0
    }
}

/// Runs the configured data-driven scheme on `problem` with the given data.
pub fn solve(problem: &Problem, data: &ElementDataSets, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    data.check_against(problem)?;
    if cfg.ten_vote {
        if let Some(e) = (0..data.len()).find(|&e| data.get(e).frames().is_none()) {
            log::error!("material point {e} has a data set without tangent frames");
            return Err(Error::MissingFrames);
        }
    }
    let caps = data
        .sets()
        .iter()
        .map(|ds| {
            cfg.excursion_cap
                .map(|f| f * ds.mean_spacing() * std::f64::consts::SQRT_2)
        })
        .collect();
    let ctx = Context {
        problem,
        data,
        metrics: problem.element_metrics(),
        projector: ConstraintProjector::new(problem)?,
        caps,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let initial: Vec<LocalState> = (0..data.len())
        .map(|e| {
            let ds = data.get(e);
            ds.point(rng.random_range(0..ds.len())).clone()
        })
        .collect();
    let start = ctx.projector.project(&initial)?;

    match (cfg.scheme, cfg.ten_vote) {
        (Scheme::MinDist, false) => run_min_dist(&ctx, cfg, start),
        (Scheme::MinDist, true) => run_min_dist_ten_vote(&ctx, cfg, start),
        (Scheme::MaxEnt, _) => {
            let beta0 = cfg.beta0.unwrap_or_else(|| default_beta0(problem, data));
            let beta_end = cfg.beta_end.unwrap_or(1e4 * beta0);
            if beta_end <= beta0 {
                return Err(Error::InvalidArgument(format!(
                    "beta_end ({beta_end}) must exceed beta0 ({beta0})"
                )));
            }
            run_max_ent(&ctx, cfg, start, beta0, beta_end)
        }
    }
}

fn run_min_dist(ctx: &Context<'_>, cfg: &SolverConfig, start: Projection) -> Result<SolveResult> {
    let mut current = start;
    let mut previous: Option<Vec<usize>> = None;
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let (assignment, y, _) = min_dist_targets(ctx, &current.states, false)?;
        let d = ctx.distance(&current.states, &y)?;
        history.push(d);
        let stable = previous.as_ref() == Some(&assignment);
        if stable || d <= cfg.distance_tolerance || iterations == cfg.max_iterations {
            let converged = stable || d <= cfg.distance_tolerance;
            return Ok(SolveResult {
                config: cfg.clone(),
                z: ctx.global(current.states)?,
                y: ctx.global(y)?,
                x: None,
                u: current.u,
                eta: current.eta,
                iterations,
                distance_history: history,
                converged,
                assignment,
                beta: None,
            });
        }
        current = ctx.projector.project(&y)?;
        previous = Some(assignment);
        iterations += 1;
    }
}

fn run_min_dist_ten_vote(ctx: &Context<'_>, cfg: &SolverConfig, start: Projection) -> Result<SolveResult> {
    struct Best {
        proj: Projection,
        assignment: Vec<usize>,
        y: Vec<LocalState>,
        x: Vec<LocalState>,
        iterations: usize,
    }
    let mut current = start;
    let mut history: Vec<f64> = Vec::new();
    let mut best: Option<(f64, Best)> = None;
    let mut iterations = 0;
    let converged = loop {
        let (assignment, y, x) = min_dist_targets(ctx, &current.states, true)?;
        let x = x.expect("ten-vote targets");
        let d = ctx.distance(&current.states, &x)?;
        history.push(d);
        let improved = best.as_ref().is_none_or(|(bd, _)| d < *bd);
        if !improved {
            break true;
        }
        let next = ctx.projector.project(&x)?;
        best = Some((
            d,
            Best {
                proj: std::mem::replace(&mut current, next),
                assignment,
                y,
                x,
                iterations,
            },
        ));
        if d <= cfg.distance_tolerance {
            break true;
        }
        if iterations == cfg.max_iterations {
            break false;
        }
        iterations += 1;
    };
    let (_, b) = best.expect("first iterate always improves");
    Ok(SolveResult {
        config: cfg.clone(),
        z: ctx.global(b.proj.states)?,
        y: ctx.global(b.y)?,
        x: Some(ctx.global(b.x)?),
        u: b.proj.u,
        eta: b.proj.eta,
        iterations: b.iterations,
        distance_history: history,
        converged,
        assignment: b.assignment,
        beta: None,
    })
}

fn run_max_ent(
    ctx: &Context<'_>,
    cfg: &SolverConfig,
    start: Projection,
    beta0: f64,
    beta_end: f64,
) -> Result<SolveResult> {
    let mut current = start;
    let mut beta = beta0;
    let mut previous: Option<Vec<usize>> = None;
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let step = max_ent_targets(ctx, &current.states, beta, cfg.ten_vote)?;
        let target = step.mean_tangent.as_ref().unwrap_or(&step.mean_data);
        let d = ctx.distance(&current.states, target)?;
        history.push(d);
        let stable = previous.as_ref() == Some(&step.assignment);
        // the schedule saturates near 1/d² once z stops approaching the data
        let stationary = d <= cfg.distance_tolerance
            || d <= 1e-12 * history[0]
            || history.len() >= 2 && {
                let prev = history[history.len() - 2];
                (prev - d).abs() <= STATIONARY_TOLERANCE * d
            };
        let done = stable && (beta >= beta_end || stationary);
        if done || iterations == cfg.max_iterations {
            return Ok(SolveResult {
                config: cfg.clone(),
                z: ctx.global(current.states)?,
                y: ctx.global(step.mean_data)?,
                x: step.mean_tangent.map(|x| ctx.global(x)).transpose()?,
                u: current.u,
                eta: current.eta,
                iterations,
                distance_history: history,
                converged: done,
                assignment: step.assignment,
                beta: Some(beta),
            });
        }
        let next = ctx.projector.project(target)?;
        let z_next = ctx.global(next.states.clone())?;
        beta = anneal_beta(&step.weights, &z_next, ctx.data, beta, cfg.lambda_anneal, beta_end)?;
        current = next;
        previous = Some(step.assignment);
        iterations += 1;
    }
}
