//! Statistical studies over many sampled data sets: solver error versus
//! data-set size, voting accuracy, and per-point coverage of a solved state.
//!
//! Every run draws its data from a seed derived from the master seed and the
//! run's grid position, so serial and parallel execution emit the same rows.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::benchmarks::{build_plate, build_truss, plate_reference_law, truss_reference_law, PlateSpec, TrussSpec};
use crate::dd_solver::{solve, ElementDataSets, Scheme, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::fem::{newton_reference_solve, ConstitutiveLaw, Problem};
use crate::material_data::{sample_dataset, DataGenSpec, MaterialDataSet, StrainSampling};
use crate::phase_space::{global_distance, local_distance, GlobalState};
use crate::tensor_voting::{angular_error, reference_tangents_1d, vote_dataset, TangentReference, VotingConfig};

/// Curve samples used to locate the closest reference point of a noisy sample.
pub const REFERENCE_CURVE_SAMPLES: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Benchmark {
    Truss(TrussSpec),
    Plate(PlateSpec),
}

impl Benchmark {
    pub fn problem(&self) -> Result<Problem> {
        match self {
            Benchmark::Truss(s) => build_truss(s),
            Benchmark::Plate(s) => build_plate(s),
        }
    }

    pub fn law(&self) -> Arc<dyn ConstitutiveLaw> {
        match self {
            Benchmark::Truss(_) => Arc::new(truss_reference_law()),
            Benchmark::Plate(_) => Arc::new(plate_reference_law()),
        }
    }

    pub fn strain_dim(&self) -> usize {
        match self {
            Benchmark::Truss(_) => 1,
            Benchmark::Plate(_) => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Truss(_) => "truss",
            Benchmark::Plate(_) => "plate",
        }
    }
}

/// One of the four solver variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    pub scheme: Scheme,
    pub ten_vote: bool,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant { scheme: Scheme::MinDist, ten_vote: false },
        Variant { scheme: Scheme::MinDist, ten_vote: true },
        Variant { scheme: Scheme::MaxEnt, ten_vote: false },
        Variant { scheme: Scheme::MaxEnt, ten_vote: true },
    ];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scheme, if self.ten_vote { "ten-vote" } else { "classic" })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown solver variant `{s}` (expected e.g. max-ent/ten-vote)"));
        let (scheme, kind) = s.split_once('/').ok_or_else(bad)?;
        let ten_vote = match kind {
            "classic" => false,
            "ten-vote" => true,
            _ => return Err(bad()),
        };
        Ok(Variant { scheme: scheme.parse()?, ten_vote })
    }
}

/// Strain distribution of the generated data, the same for every component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling {
    Uniform { half_width: f64 },
    Normal { stddev: f64 },
}

impl Sampling {
    pub fn strain_sampling(&self, m_e: usize) -> StrainSampling {
        match *self {
            Sampling::Uniform { half_width } => StrainSampling::symmetric_uniform(half_width, m_e),
            Sampling::Normal { stddev } => StrainSampling::isotropic_normal(stddev, m_e),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudySpec {
    pub benchmark: Benchmark,
    pub variants: Vec<Variant>,
    /// Strictly increasing.
    pub set_sizes: Vec<usize>,
    /// Noise standard deviations as fractions of the largest |ε| and |σ|.
    pub noise_levels: Vec<f64>,
    pub samples_per_cell: usize,
    /// Vote scales. In convergence studies either one value for all sizes or
    /// one per size; in voting studies the grid axis.
    pub sigmas: Vec<f64>,
    pub k_neighbors: usize,
    pub sampling: Sampling,
    pub lambda_anneal: f64,
    pub beta0: Option<f64>,
    pub beta_end: Option<f64>,
    pub max_iterations: usize,
    pub seed: u64,
}

impl StudySpec {
    /// Noise-free truss study: sizes `25·4^h`, `h = 1..=levels`, vote scale
    /// `(1/4)^h`, all four variants, 20 samples per size.
    pub fn truss_convergence(tower: TrussSpec, levels: u32) -> Self {
        let hs = 1..=levels;
        Self {
            benchmark: Benchmark::Truss(tower),
            variants: Variant::ALL.to_vec(),
            set_sizes: hs.clone().map(|h| 25 * 4usize.pow(h)).collect(),
            noise_levels: vec![0.0],
            samples_per_cell: 20,
            sigmas: hs.map(|h| 0.25f64.powi(h as i32)).collect(),
            k_neighbors: 6,
            sampling: Sampling::Uniform { half_width: 0.025 },
            lambda_anneal: 0.5,
            beta0: None,
            beta_end: None,
            max_iterations: 2000,
            seed: 0,
        }
    }

    /// Noisy truss study with the vote scale and final Pareto weight tuned
    /// to the noise level (1% and 5% presets; other levels use the 5% one).
    pub fn truss_noisy(tower: TrussSpec, levels: u32, noise: f64) -> Self {
        let (sigma, beta_end) = if noise <= 0.01 { (0.5, 100.0) } else { (1.0, 10.0) };
        let mut spec = Self::truss_convergence(tower, levels);
        spec.noise_levels = vec![noise];
        spec.sigmas = vec![sigma];
        spec.k_neighbors = 12;
        spec.lambda_anneal = 0.1;
        spec.beta_end = Some(beta_end);
        // starting hot: a broad average is what filters the noise
        spec.beta0 = Some(beta_end / 100.0);
        spec
    }

    /// Voting-accuracy grid on the truss law.
    pub fn truss_voting(tower: TrussSpec) -> Self {
        let mut spec = Self::truss_convergence(tower, 3);
        spec.variants.clear();
        spec.sigmas = (1..=5).map(|h| 0.25f64.powi(h)).collect();
        spec
    }

    pub fn plate_convergence(plate: PlateSpec, sizes_per_axis: &[usize]) -> Self {
        Self {
            benchmark: Benchmark::Plate(plate),
            variants: vec![Variant::ALL[0], Variant::ALL[1]],
            set_sizes: sizes_per_axis.iter().map(|n| n * n * n).collect(),
            noise_levels: vec![0.0],
            samples_per_cell: 5,
            sigmas: vec![1.0],
            k_neighbors: 24,
            sampling: Sampling::Normal { stddev: 0.005 },
            lambda_anneal: 0.5,
            beta0: None,
            beta_end: None,
            max_iterations: 2000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.samples_per_cell == 0 {
            return bad("samples_per_cell must be >= 1".into());
        }
        if self.set_sizes.is_empty() || self.set_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("set sizes must be non-empty and strictly increasing: {:?}", self.set_sizes));
        }
        if self.set_sizes[0] <= self.k_neighbors {
            return bad(format!("smallest set size must exceed k_neighbors = {}", self.k_neighbors));
        }
        if self.noise_levels.is_empty() || self.noise_levels.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("noise levels must be finite and non-negative".into());
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("sigmas must be positive".into());
        }
        if self.k_neighbors == 0 {
            return bad("k_neighbors must be >= 1".into());
        }
        self.solver_config(Variant::ALL[0], 0).validate()
    }

    fn sigma_for(&self, size_index: usize) -> Result<f64> {
        match self.sigmas.len() {
            1 => Ok(self.sigmas[0]),
            n if n == self.set_sizes.len() => Ok(self.sigmas[size_index]),
            n => Err(Error::InvalidArgument(format!(
                "{n} sigmas for {} set sizes (give one, or one per size)",
                self.set_sizes.len()
            ))),
        }
    }

    fn solver_config(&self, v: Variant, seed: u64) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iterations,
            beta0: self.beta0,
            lambda_anneal: self.lambda_anneal,
            beta_end: self.beta_end,
            rng_seed: seed,
            ..SolverConfig::new(v.scheme, v.ten_vote)
        }
    }

    fn data_spec(&self, problem: &Problem, law: Arc<dyn ConstitutiveLaw>, n: usize, noise: f64, seed: u64) -> DataGenSpec {
        DataGenSpec {
            law,
            metric: problem.metrics[0].clone(),
            count: n,
            sampling: self.sampling.strain_sampling(self.benchmark.strain_dim()),
            noise_stddev_fraction: noise,
            rng_seed: seed,
        }
    }
}

/// Seed of grid cell `cell` under master seed `master`: the first output of
/// a ChaCha8 stream selected by the cell index.
pub fn cell_seed(master: u64, cell: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(cell);
    rng.next_u64()
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(0.5 * (values[(n - 1) / 2] + values[n / 2]))
}

/// Least-squares slope of `ln y` over `ln x`; `None` with fewer than two
/// usable points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn fmt_f(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| format!("{x:e}"))
}

/// Newton reference of a benchmark.
pub fn reference_state(problem: &Problem, law: &dyn ConstitutiveLaw) -> Result<GlobalState> {
    Ok(newton_reference_solve(problem, law, Default::default())?.state)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub variant: Variant,
    pub noise: f64,
    pub n: usize,
    pub sample: usize,
    /// Global distance to the Newton reference.
    pub distance: Option<f64>,
    /// The solver's last recorded distance to its data targets.
    pub final_distance: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceSummary {
    pub variant: Variant,
    pub noise: f64,
    pub n: usize,
    pub median_distance: Option<f64>,
    pub median_final_distance: Option<f64>,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub summary: Vec<ConvergenceSummary>,
    /// Fitted slope of median distance against `n`, per variant and noise.
    pub slopes: Vec<(Variant, f64, Option<f64>)>,
}

pub const CONVERGENCE_COLUMNS: &str =
    "scheme,n,sample,distance,iterations,wall_time,noise,final_distance,converged,error";

impl ConvergenceReport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(CONVERGENCE_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{},{},{},{}",
                r.variant,
                r.n,
                r.sample,
                fmt_f(r.distance),
                r.iterations,
                r.wall_time,
                r.noise,
                fmt_f(r.final_distance),
                r.converged,
                csv_text(r.error.as_deref().unwrap_or("")),
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("scheme,noise,n,median_distance,median_final_distance,runs,failures,slope\n");
        for s in &self.summary {
            let slope = self.slope(s.variant, s.noise);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.variant,
                s.noise,
                s.n,
                fmt_f(s.median_distance),
                fmt_f(s.median_final_distance),
                s.runs,
                s.failures,
                fmt_f(slope),
            );
        }
        out
    }

    pub fn slope(&self, variant: Variant, noise: f64) -> Option<f64> {
        self.slopes
            .iter()
            .find(|(v, nz, _)| *v == variant && *nz == noise)
            .and_then(|s| s.2)
    }

    pub fn median(&self, variant: Variant, noise: f64, n: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.variant == variant && s.noise == noise && s.n == n)
            .and_then(|s| s.median_distance)
    }

    pub fn median_final(&self, variant: Variant, noise: f64, n: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.variant == variant && s.noise == noise && s.n == n)
            .and_then(|s| s.median_final_distance)
    }

    /// Plain-text table of the summary.
    pub fn render(&self) -> String {
        let mut out = format!("{:<20} {:>7} {:>8} {:>14} {:>14} {:>9}\n", "scheme", "noise", "n", "median dist", "median final", "fail/runs");
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{:<20} {:>7} {:>8} {:>14} {:>14} {:>4}/{:<4}",
                s.variant.to_string(),
                s.noise,
                s.n,
                s.median_distance.map_or("-".into(), |v| format!("{v:.4e}")),
                s.median_final_distance.map_or("-".into(), |v| format!("{v:.4e}")),
                s.failures,
                s.runs,
            );
        }
        for (v, noise, slope) in &self.slopes {
            let _ = writeln!(
                out,
                "slope {:<20} noise {:<6} {}",
                v.to_string(),
                noise,
                slope.map_or("-".into(), |s| format!("{s:.3}"))
            );
        }
        out
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

/// Runs every (noise, size, sample) cell: samples a data set, votes it when a
/// ten-vote variant is requested, solves with each variant, and measures the
/// distance to the Newton reference. Failed runs are recorded and skipped.
pub fn run_convergence_study(spec: &StudySpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    if spec.variants.is_empty() {
        return Err(Error::InvalidArgument("no solver variants requested".into()));
    }
    let problem = spec.benchmark.problem()?;
    let law = spec.benchmark.law();
    let reference = reference_state(&problem, law.as_ref())?;
    let metrics: Vec<_> = problem.elements.iter().map(|e| problem.metrics[e.metric].clone()).collect();
    let needs_frames = spec.variants.iter().any(|v| v.ten_vote);
    let m_e = spec.benchmark.strain_dim();

    let cells: Vec<(usize, usize, usize)> = (0..spec.noise_levels.len())
        .flat_map(|a| (0..spec.set_sizes.len()).flat_map(move |b| (0..spec.samples_per_cell).map(move |c| (a, b, c))))
        .collect();
    let per_cell: Vec<Vec<ConvergenceRow>> = cells
        .par_iter()
        .map(|&(ni, si, sample)| {
            let noise = spec.noise_levels[ni];
            let n = spec.set_sizes[si];
            let cell = ((ni * spec.set_sizes.len() + si) * spec.samples_per_cell + sample) as u64;
            let seed = cell_seed(spec.seed, cell);
            let failed = |v: Variant, e: &Error| ConvergenceRow {
                variant: v,
                noise,
                n,
                sample,
                distance: None,
                final_distance: None,
                iterations: 0,
                converged: false,
                wall_time: 0.0,
                error: Some(e.to_string()),
            };
            let data = (|| -> Result<ElementDataSets> {
                let ds = sample_dataset(&spec.data_spec(&problem, law.clone(), n, noise, seed))?;
                let ds = if needs_frames {
                    vote_dataset(&ds, &VotingConfig::new(spec.sigma_for(si)?, spec.k_neighbors, Some(m_e))?)?
                } else {
                    ds
                };
                Ok(ElementDataSets::shared(ds, problem.elements.len()))
            })();
            let data = match data {
                Ok(d) => d,
                Err(e) => return spec.variants.iter().map(|&v| failed(v, &e)).collect(),
            };
            spec.variants
                .iter()
                .map(|&v| {
                    let start = Instant::now();
                    let run = solve(&problem, &data, &spec.solver_config(v, seed))
                        .and_then(|r| Ok((global_distance(&r.z, &reference, &metrics)?, r)));
                    match run {
                        Ok((d, r)) => ConvergenceRow {
                            variant: v,
                            noise,
                            n,
                            sample,
                            distance: Some(d),
                            final_distance: Some(r.final_distance()),
                            iterations: r.iterations,
                            converged: r.converged,
                            wall_time: start.elapsed().as_secs_f64(),
                            error: None,
                        },
                        Err(e) => failed(v, &e),
                    }
                })
                .collect()
        })
        .collect();

    let mut rows: Vec<ConvergenceRow> = per_cell.into_iter().flatten().collect();
    let order = |v: &Variant| spec.variants.iter().position(|x| x == v).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        order(&a.variant)
            .cmp(&order(&b.variant))
            .then(a.noise.total_cmp(&b.noise))
            .then(a.n.cmp(&b.n))
            .then(a.sample.cmp(&b.sample))
    });

    let mut summary = Vec::new();
    let mut slopes = Vec::new();
    for &v in &spec.variants {
        for &noise in &spec.noise_levels {
            let mut pts = Vec::new();
            for &n in &spec.set_sizes {
                let cell: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.variant == v && r.noise == noise && r.n == n).collect();
                let mut d: Vec<f64> = cell.iter().filter_map(|r| r.distance).collect();
                let mut f: Vec<f64> = cell.iter().filter_map(|r| r.final_distance).collect();
                let med = median(&mut d);
                if let Some(m) = med {
                    pts.push((n as f64, m));
                }
                summary.push(ConvergenceSummary {
                    variant: v,
                    noise,
                    n,
                    median_distance: med,
                    median_final_distance: median(&mut f),
                    runs: cell.len(),
                    failures: cell.iter().filter(|r| r.error.is_some()).count(),
                });
            }
            slopes.push((v, noise, log_log_slope(&pts)));
        }
    }
    Ok(ConvergenceReport { rows, summary, slopes })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VotingRow {
    pub n: usize,
    pub sigma: f64,
    pub noise: f64,
    pub sample: usize,
    pub delta_theta_deg: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VotingReport {
    pub rows: Vec<VotingRow>,
}

impl VotingReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("n,sigma,noise,sample,delta_theta_deg,error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                r.sigma,
                r.noise,
                r.sample,
                fmt_f(r.delta_theta_deg),
                csv_text(r.error.as_deref().unwrap_or(""))
            );
        }
        out
    }

    /// Median angular error of one grid cell.
    pub fn median(&self, n: usize, sigma: f64, noise: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.n == n && r.sigma == sigma && r.noise == noise)
            .filter_map(|r| r.delta_theta_deg)
            .collect();
        median(&mut v)
    }

    pub fn render(&self) -> String {
        let mut cells: Vec<(usize, f64, f64)> = self.rows.iter().map(|r| (r.n, r.sigma, r.noise)).collect();
        cells.dedup();
        let mut out = format!("{:>8} {:>12} {:>7} {:>16}\n", "n", "sigma", "noise", "median dtheta");
        for (n, s, z) in cells {
            let _ = writeln!(
                out,
                "{n:>8} {s:>12.6} {z:>7} {:>16}",
                self.median(n, s, z).map_or("-".into(), |v| format!("{v:.5}"))
            );
        }
        out
    }
}

/// Votes sampled data sets over the `(n, σ, noise)` grid and measures the
/// mean angle to the law's tangents. Data sets depend on `(noise, n,
/// sample)` only, so every σ sees the same points. One-dimensional laws only.
pub fn run_voting_study(spec: &StudySpec) -> Result<VotingReport> {
    spec.validate()?;
    if spec.benchmark.strain_dim() != 1 {
        return Err(Error::InvalidArgument("voting study supports one-dimensional laws only".into()));
    }
    let problem = spec.benchmark.problem()?;
    let law = spec.benchmark.law();
    let half_width = match spec.sampling {
        Sampling::Uniform { half_width } => half_width,
        Sampling::Normal { stddev } => 4.0 * stddev,
    };
    let cells: Vec<(usize, usize, usize)> = (0..spec.noise_levels.len())
        .flat_map(|a| (0..spec.set_sizes.len()).flat_map(move |b| (0..spec.samples_per_cell).map(move |c| (a, b, c))))
        .collect();
    let mut rows: Vec<VotingRow> = cells
        .par_iter()
        .flat_map_iter(|&(ni, si, sample)| {
            let noise = spec.noise_levels[ni];
            let n = spec.set_sizes[si];
            let cell = ((ni * spec.set_sizes.len() + si) * spec.samples_per_cell + sample) as u64;
            let seed = cell_seed(spec.seed, cell);
            let prepared = (|| -> Result<(MaterialDataSet, Vec<nalgebra::DVector<f64>>)> {
                let ds = sample_dataset(&spec.data_spec(&problem, law.clone(), n, noise, seed))?;
                let at = if noise == 0.0 {
                    TangentReference::AtSampleStrain
                } else {
                    let max = law_domain(law.as_ref(), half_width);
                    TangentReference::ClosestPoint { lo: -max, hi: max, samples: REFERENCE_CURVE_SAMPLES }
                };
                let reference = reference_tangents_1d(&ds, law.as_ref(), at)?;
                Ok((ds, reference))
            })();
            let out: Vec<VotingRow> = spec
                .sigmas
                .iter()
                .map(|&sigma| {
                    let angle = prepared.as_ref().map_err(|e| e.to_string()).and_then(|(ds, reference)| {
                        VotingConfig::new(sigma, spec.k_neighbors, Some(1))
                            .and_then(|cfg| vote_dataset(ds, &cfg))
                            .and_then(|voted| angular_error(&voted, reference))
                            .map_err(|e| e.to_string())
                    });
                    VotingRow {
                        n,
                        sigma,
                        noise,
                        sample,
                        delta_theta_deg: angle.as_ref().ok().copied(),
                        error: angle.err(),
                    }
                })
                .collect();
            out
        })
        .collect();
    rows.sort_by(|a, b| {
        a.noise
            .total_cmp(&b.noise)
            .then(a.n.cmp(&b.n))
            .then(b.sigma.total_cmp(&a.sigma))
            .then(a.sample.cmp(&b.sample))
    });
    Ok(VotingReport { rows })
}

/// Strain bound for the reference curve: the sampling range widened by a
/// quarter, clipped to where the law can still be evaluated.
fn law_domain(law: &dyn ConstitutiveLaw, half_width: f64) -> f64 {
    let mut max = 1.25 * half_width;
    while max > half_width && law.stress(&nalgebra::DVector::from_element(1, max)).is_err() {
        max = 0.5 * (max + half_width);
        if max - half_width < 1e-6 * half_width {
            return half_width;
        }
    }
    max
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub point: usize,
    pub position: [f64; 3],
    /// Local distance between the solution and its data target.
    pub distance: f64,
}

/// Remaining local distance `d_e(z, y)` at every material point of a solved
/// state: large values mark regions the data does not cover.
pub fn run_coverage_report(problem: &Problem, result: &SolveResult) -> Result<Vec<CoverageRow>> {
    if result.z.len() != problem.elements.len() || result.y.len() != problem.elements.len() {
        return Err(Error::LengthMismatch {
            what: "solved state",
            expected: problem.elements.len(),
            actual: result.z.len(),
        });
    }
    problem
        .elements
        .iter()
        .enumerate()
        .map(|(e, el)| {
            Ok(CoverageRow {
                point: e,
                position: el.position,
                distance: local_distance(&result.z.states[e], &result.y.states[e], problem.metric_of(e))?,
            })
        })
        .collect()
}

pub fn coverage_csv(rows: &[CoverageRow]) -> String {
    let mut out = String::from("point,x,y,z,distance\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:e}",
            r.point, r.position[0], r.position[1], r.position[2], r.distance
        );
    }
    out
}
