mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tenvote_core::benchmarks::{
    plate_model, plate_reference_law, truss_model, truss_reference_law, PlateSpec, TrussGenerator, TrussSpec,
};
use tenvote_core::dd_solver::write_result;
use tenvote_core::fem::{newton_reference_solve, read_model, write_model, ConstitutiveLaw};
use tenvote_core::material_data::{load_dataset, sample_dataset, save_dataset, DataGenSpec, StrainSampling};
use tenvote_core::phase_space::global_distance;
use tenvote_core::study::{
    coverage_csv, run_convergence_study, run_coverage_report, run_voting_study, StudySpec, Variant,
};
use tenvote_core::tensor_voting::vote_dataset_with_report;
use tenvote_core::{solve, ElementDataSets, MetricTensor, Problem, Scheme, SolverConfig, VotingConfig};

const SUBCOMMANDS: &[&str] = &[
    "gen-problem",
    "gen-data",
    "vote",
    "solve",
    "reference",
    "coverage",
    "study-convergence",
    "study-voting",
];

/// Data-driven solvers with tensor-voting tangent spaces.
///
/// Every flag can also be given in a `key = value` file passed with
/// `--config`; keys under a `[subcommand]` header apply to that subcommand
/// only, and explicit flags override the file.
#[derive(Parser, Debug)]
#[command(name = "tenvote", version)]
struct Cli {
    /// Config file (`key = value` lines, optional `[subcommand]` sections).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    Truss,
    Plate,
}

impl Family {
    fn law(self) -> Arc<dyn ConstitutiveLaw> {
        match self {
            Family::Truss => Arc::new(truss_reference_law()),
            Family::Plate => Arc::new(plate_reference_law()),
        }
    }

    fn strain_dim(self) -> usize {
        match self {
            Family::Truss => 1,
            Family::Plate => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Noise-free error versus data-set size.
    Convergence,
    /// Noisy data with the tuned vote scale and Pareto weights.
    Noisy,
}

#[derive(Args, Debug, Clone)]
struct TowerArgs {
    /// Storeys of the generated lattice tower.
    #[arg(long, default_value_t = 8)]
    levels: usize,
    /// Bays per side of the generated lattice tower.
    #[arg(long, default_value_t = 2)]
    bays: usize,
}

#[derive(Args, Debug, Clone)]
struct PlateArgs {
    /// Elements per plate edge (the mesh has 2·density² quads).
    #[arg(long, default_value_t = 7)]
    density: usize,
    /// Ratio of outer to inner radial element size.
    #[arg(long, default_value_t = 3.0)]
    grading: f64,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value = "min-dist", value_parser = parse_scheme)]
    scheme: Scheme,
    /// Project onto the voted tangent spaces instead of the raw points.
    #[arg(long)]
    ten_vote: bool,
    /// Initial Pareto weight (max-ent).
    #[arg(long)]
    beta0: Option<f64>,
    /// Annealing rate in [0, 1] (max-ent).
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Final Pareto weight (max-ent).
    #[arg(long)]
    beta_end: Option<f64>,
    /// Stop once the distance to the data falls to this value.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Cap on the tangential excursion, in mean data spacings.
    #[arg(long)]
    excursion_cap: Option<f64>,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iter,
            beta0: self.beta0,
            lambda_anneal: self.lambda,
            beta_end: self.beta_end,
            distance_tolerance: self.tol,
            rng_seed: seed,
            excursion_cap: self.excursion_cap,
            ..SolverConfig::new(self.scheme, self.ten_vote)
        }
    }
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: tenvote_core::Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: tenvote_core::Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a benchmark model file.
    GenProblem {
        #[arg(long, value_enum)]
        benchmark: Family,
        #[command(flatten)]
        tower: TowerArgs,
        #[command(flatten)]
        plate: PlateArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Sample a material data set from a benchmark law.
    GenData {
        #[arg(long, value_enum)]
        law: Family,
        #[arg(long)]
        count: usize,
        /// Uniform strains in [-w, w] per component (truss default 0.025).
        #[arg(long, conflicts_with = "stddev")]
        half_width: Option<f64>,
        /// Normal strains with this deviation per component (plate default 0.005).
        #[arg(long)]
        stddev: Option<f64>,
        /// Noise deviation as a fraction of the largest |ε| and |σ|.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Take the metric from this model file instead of the law's default.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Learn tangent frames of a data set by ball-tensor voting.
    Vote {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Vote scale in learning-space units.
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 6)]
        k_neighbors: usize,
        /// Fix the tangent dimension instead of estimating it.
        #[arg(long)]
        manifold_dim: Option<usize>,
    },
    /// Run a data-driven solver on a model and a data set.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also report the distance to the Newton solution of this law.
        #[arg(long, value_enum)]
        law: Option<Family>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Newton solution of a model under a benchmark law, as CSV.
    Reference {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum)]
        law: Family,
        #[arg(long)]
        output: PathBuf,
    },
    /// Per-point distance left between the solution and its data.
    Coverage {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solver error against the Newton reference over many sampled data sets.
    StudyConvergence {
        #[arg(long, value_enum, default_value = "truss")]
        benchmark: Family,
        #[arg(long, value_enum, default_value = "convergence")]
        preset: Preset,
        #[command(flatten)]
        tower: TowerArgs,
        #[command(flatten)]
        plate: PlateArgs,
        /// Truss sizes 25·4^h for h = 1..=max-h.
        #[arg(long, default_value_t = 4)]
        max_h: u32,
        /// Explicit set sizes (plate: points per strain axis, cubed).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        sigmas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        noise: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
        variants: Vec<Variant>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        k_neighbors: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        beta0: Option<f64>,
        #[arg(long)]
        beta_end: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Read the truss from this model file instead of generating a tower.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Raw rows, one per run.
        #[arg(long)]
        output: PathBuf,
        /// Medians per cell.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Angular error of voted tangents on the truss law.
    StudyVoting {
        #[command(flatten)]
        tower: TowerArgs,
        #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        sigmas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        noise: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 6)]
        k_neighbors: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_problem(path: &Path) -> Result<Problem> {
    let model = read_model(path)?;
    Ok(model.to_problem()?)
}

fn tower_spec(tower: &TowerArgs, problem: Option<PathBuf>) -> Result<TrussSpec> {
    let mut spec = TrussSpec::tower(tower.levels, tower.bays)?;
    if let Some(p) = problem {
        spec.generator = TrussGenerator::FromFile(p);
    }
    Ok(spec)
}

fn plate_spec(plate: &PlateArgs) -> PlateSpec {
    PlateSpec {
        density: plate.density,
        grading: plate.grading,
        ..PlateSpec::default()
    }
}

fn default_metric(family: Family) -> Result<MetricTensor> {
    Ok(match family {
        Family::Truss => MetricTensor::scalar(1e5, 1)?,
        Family::Plate => {
            let p = PlateSpec::default();
            MetricTensor::isotropic_plane_strain(p.young, p.poisson)?
        }
    })
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::GenProblem { benchmark, tower, plate, output } => {
            let model = match benchmark {
                Family::Truss => truss_model(&tower_spec(&tower, None)?)?,
                Family::Plate => plate_model(&plate_spec(&plate))?,
            };
            write(&output, &write_model(&model))?;
            log::info!("{} nodes, {} elements", model.nodes.len(), model.elements.len());
        }
        Command::GenData { law, count, half_width, stddev, noise, problem, output } => {
            let m_e = law.strain_dim();
            let metric = match problem {
                Some(p) => read_model(&p)?.metric.build(m_e)?,
                None => default_metric(law)?,
            };
            let sampling = match (half_width, stddev, law) {
                (Some(w), _, _) => StrainSampling::symmetric_uniform(w, m_e),
                (None, Some(s), _) => StrainSampling::isotropic_normal(s, m_e),
                (None, None, Family::Truss) => StrainSampling::symmetric_uniform(0.025, m_e),
                (None, None, Family::Plate) => StrainSampling::isotropic_normal(0.005, m_e),
            };
            let ds = sample_dataset(&DataGenSpec {
                law: law.law(),
                metric,
                count,
                sampling,
                noise_stddev_fraction: noise,
                rng_seed: seed,
            })?;
            save_dataset(&ds, &output)?;
        }
        Command::Vote { input, output, sigma, k_neighbors, manifold_dim } => {
            let ds = load_dataset(&input)?;
            let (voted, report) = vote_dataset_with_report(&ds, &VotingConfig::new(sigma, k_neighbors, manifold_dim)?)?;
            if report.degenerate_frames > 0 {
                log::warn!("{} degenerate frame(s)", report.degenerate_frames);
            }
            save_dataset(&voted, &output)?;
        }
        Command::Solve { problem, data, out, law, solver } => {
            let p = load_problem(&problem)?;
            let ds = load_dataset(&data)?;
            let data = ElementDataSets::shared(ds, p.elements.len());
            let r = solve(&p, &data, &solver.config(seed))?;
            let mut line = format!(
                "{}: {} after {} iterations, distance {:e}",
                r.config.label(),
                if r.converged { "converged" } else { "not converged" },
                r.iterations,
                r.final_distance()
            );
            if let Some(law) = law {
                let reference = newton_reference_solve(&p, law.law().as_ref(), Default::default())?;
                let metrics: Vec<MetricTensor> = p.elements.iter().map(|e| p.metrics[e.metric].clone()).collect();
                let d = global_distance(&r.z, &reference.state, &metrics)?;
                let _ = write!(line, ", distance to reference {d:e}");
            }
            println!("{line}");
            if let Some(out) = out {
                write(&out, &write_result(&r))?;
            }
        }
        Command::Reference { problem, law, output } => {
            let p = load_problem(&problem)?;
            let sol = newton_reference_solve(&p, law.law().as_ref(), Default::default())?;
            let m = law.strain_dim();
            let mut csv = String::from("point,x,y,z");
            for k in 1..=m {
                let _ = write!(csv, ",eps{k}");
            }
            for k in 1..=m {
                let _ = write!(csv, ",sig{k}");
            }
            csv.push('\n');
            for (e, (el, s)) in p.elements.iter().zip(&sol.state.states).enumerate() {
                let _ = write!(csv, "{e},{},{},{}", el.position[0], el.position[1], el.position[2]);
                for v in s.strain.iter().chain(s.stress.iter()) {
                    let _ = write!(csv, ",{v:e}");
                }
                csv.push('\n');
            }
            write(&output, &csv)?;
            log::info!("Newton converged in {} iterations", sol.residual_history.len().saturating_sub(1));
        }
        Command::Coverage { problem, data, output, solver } => {
            let p = load_problem(&problem)?;
            let ds = load_dataset(&data)?;
            let data = ElementDataSets::shared(ds, p.elements.len());
            let r = solve(&p, &data, &solver.config(seed))?;
            let rows = run_coverage_report(&p, &r)?;
            write(&output, &coverage_csv(&rows))?;
            if let Some(worst) = rows.iter().max_by(|a, b| a.distance.total_cmp(&b.distance)) {
                println!("largest remaining distance {:e} at point {} {:?}", worst.distance, worst.point, worst.position);
            }
        }
        Command::StudyConvergence {
            benchmark,
            preset,
            tower,
            plate,
            max_h,
            sizes,
            sigmas,
            noise,
            variants,
            samples,
            k_neighbors,
            lambda,
            beta0,
            beta_end,
            max_iter,
            problem,
            output,
            summary,
        } => {
            let mut spec = match (benchmark, preset) {
                (Family::Truss, Preset::Convergence) => StudySpec::truss_convergence(tower_spec(&tower, problem)?, max_h),
                (Family::Truss, Preset::Noisy) => {
                    let level = noise.first().copied().unwrap_or(0.01);
                    StudySpec::truss_noisy(tower_spec(&tower, problem)?, max_h, level)
                }
                (Family::Plate, Preset::Convergence) => {
                    let axes = if sizes.is_empty() { vec![8, 16] } else { sizes.clone() };
                    StudySpec::plate_convergence(plate_spec(&plate), &axes)
                }
                (Family::Plate, Preset::Noisy) => bail!("the noisy preset exists for the truss only"),
            };
            if !sizes.is_empty() && benchmark == Family::Truss {
                spec.set_sizes = sizes;
                if spec.sigmas.len() > 1 && sigmas.is_empty() {
                    bail!("with explicit --sizes give --sigmas too (one, or one per size)");
                }
            }
            if !sigmas.is_empty() {
                spec.sigmas = sigmas;
            }
            if !noise.is_empty() {
                spec.noise_levels = noise;
            }
            if !variants.is_empty() {
                spec.variants = variants;
            }
            spec.samples_per_cell = samples.unwrap_or(spec.samples_per_cell);
            spec.k_neighbors = k_neighbors.unwrap_or(spec.k_neighbors);
            spec.lambda_anneal = lambda.unwrap_or(spec.lambda_anneal);
            spec.beta0 = beta0.or(spec.beta0);
            spec.beta_end = beta_end.or(spec.beta_end);
            spec.max_iterations = max_iter.unwrap_or(spec.max_iterations);
            spec.seed = seed;
            let report = run_convergence_study(&spec)?;
            write(&output, &report.rows_csv())?;
            if let Some(s) = summary {
                write(&s, &report.summary_csv())?;
            }
            print!("{}", report.render());
            let failures = report.rows.iter().filter(|r| r.error.is_some()).count();
            if failures > 0 {
                log::warn!("{failures} run(s) failed; see the error column");
            }
        }
        Command::StudyVoting { tower, sizes, sigmas, noise, samples, k_neighbors, output } => {
            let mut spec = StudySpec::truss_voting(tower_spec(&tower, None)?);
            spec.set_sizes = sizes;
            if !sigmas.is_empty() {
                spec.sigmas = sigmas;
            }
            spec.noise_levels = noise;
            spec.samples_per_cell = samples;
            spec.k_neighbors = k_neighbors;
            spec.seed = seed;
            let report = run_voting_study(&spec)?;
            write(&output, &report.csv())?;
            print!("{}", report.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect(), SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
