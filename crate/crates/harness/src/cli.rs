//! Command-line driver. Exit codes: 0 on success, 2 for usage or configuration
//! errors, 1 for failures at run time.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpa_core::baselines::{solve_mbmp, solve_mfocuss, MfocussParams, DEFAULT_MBMP_MAX_ITERS};
use cpa_core::cpa::{solve_cpa_batch, solve_cpa_regularized, DEFAULT_LAMBDA};
use cpa_core::dictionary::{cpa_dimension_bound, rip_dimension_bound};
use cpa_core::signal::{add_noise, inject_novel_atom, synthesize, ActiveSet, NovelAtomSpec, ObservationSet};
use cpa_core::{icpa, io, Dictionary};

use crate::config::{Algorithm, Experiment, ExperimentConfig};
use crate::experiments::run_experiment;
use crate::results::Conditions;
use crate::BenchError;

#[derive(Debug, Parser)]
#[command(name = "cpa-bench", version, about = "Sparse-recovery experiments with CPA, M-BMP and M-FOCUSS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random unit-norm dictionary.
    GenDict(GenDictArgs),
    /// Synthesize observations from a dictionary.
    Synth(SynthArgs),
    /// Run one solver on stored observations.
    Solve(SolveArgs),
    /// Run a benchmark experiment.
    Bench(BenchArgs),
    /// Print the RIP and CPA dimension bounds.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct GenDictArgs {
    #[arg(long, default_value_t = 200)]
    n_dims: usize,
    #[arg(long, default_value_t = 2000)]
    n_atoms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    n_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = cpa_core::signal::DEFAULT_NOISE_RATIO)]
    noise_ratio: f64,
    /// Amplitude std of an injected novel atom; 0 for none.
    #[arg(long, default_value_t = 0.0)]
    novel_std: f64,
    /// Observation file; a `.csv` extension selects CSV, anything else binary.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveAlgo {
    /// Regularized batch CPA.
    Cpa,
    /// Same as `cpa`.
    CpaReg,
    /// Unregularized batch CPA.
    CpaBatch,
    Icpa,
    Mbmp,
    Mfocuss,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    algo: SolveAlgo,
    #[arg(long)]
    dict: PathBuf,
    /// Observation file, CSV if it ends in `.csv`, binary otherwise.
    #[arg(long)]
    obs: PathBuf,
    /// Regularization constant (CPA default 0.4, M-FOCUSS default 1e-3).
    #[arg(long)]
    lambda: Option<f64>,
    /// Iteration cap for M-BMP or M-FOCUSS.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentArg {
    Complexity,
    Novel,
    Masking,
    LambdaSweep,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Complexity => Experiment::Complexity,
            ExperimentArg::Novel => Experiment::Novel,
            ExperimentArg::Masking => Experiment::Masking,
            ExperimentArg::LambdaSweep => Experiment::LambdaSweep,
        }
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(value_enum)]
    experiment: ExperimentArg,
    /// JSON file with any subset of the configuration fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_dims: Option<usize>,
    #[arg(long)]
    n_atoms: Option<usize>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<usize>>,
    #[arg(long)]
    noise_ratio: Option<f64>,
    #[arg(long)]
    novel_std: Option<f64>,
    /// CPA regularization constant.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Directory for results.csv and summary.json.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Use N=500, M=10000 (slow).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    atoms: f64,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), BenchError> {
    match command {
        Command::GenDict(a) => gen_dict(a),
        Command::Synth(a) => synth(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Bounds(a) => bounds(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    Ok(BufWriter::new(File::create(path).map_err(BenchError::io(path))?))
}

fn open(path: &Path) -> Result<BufReader<File>, BenchError> {
    Ok(BufReader::new(File::open(path).map_err(BenchError::io(path))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), BenchError> {
    w.flush().map_err(BenchError::io(path))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_dict(path: &Path) -> Result<Dictionary, BenchError> {
    Ok(io::read_dictionary(&mut open(path)?)?)
}

fn read_obs(path: &Path) -> Result<ObservationSet, BenchError> {
    let mut r = open(path)?;
    Ok(if is_csv(path) {
        io::read_observations_csv(r)?
    } else {
        io::read_observations(&mut r)?
    })
}

fn gen_dict(a: GenDictArgs) -> Result<(), BenchError> {
    let dict = Dictionary::generate(a.n_dims, a.n_atoms, a.seed)?;
    let mut w = create(&a.output)?;
    io::write_dictionary(&mut w, &dict)?;
    finish(w, &a.output)
}

fn synth(a: SynthArgs) -> Result<(), BenchError> {
    let dict = read_dict(&a.dict)?;
    let active = ActiveSet::random(dict.n_atoms(), a.k, a.seed)?;
    let (clean, _) = synthesize(&dict, &active, a.n_steps, a.seed, 1.0)?;
    let mut obs = add_noise(&clean, a.noise_ratio, a.seed)?;
    if a.novel_std > 0.0 {
        let spec = NovelAtomSpec::generate(dict.n_dims(), a.novel_std, a.seed)?;
        obs = inject_novel_atom(&obs, &spec, a.seed)?;
    }
    let mut w = create(&a.output)?;
    if is_csv(&a.output) {
        io::write_observations_csv(&mut w, &obs)?;
    } else {
        io::write_observations(&mut w, &obs)?;
    }
    finish(w, &a.output)?;
    let indices: Vec<String> = active.indices().iter().map(usize::to_string).collect();
    println!("active {}", indices.join(","));
    Ok(())
}

fn solve(a: SolveArgs) -> Result<(), BenchError> {
    let dict = read_dict(&a.dict)?;
    let obs = read_obs(&a.obs)?;
    let cpa_lambda = a.lambda.unwrap_or(DEFAULT_LAMBDA);
    let mut w = create(&a.output)?;
    match a.algo {
        SolveAlgo::Cpa | SolveAlgo::CpaReg => {
            io::write_presence_csv(&mut w, &solve_cpa_regularized(&dict, &obs, cpa_lambda)?)?
        }
        SolveAlgo::CpaBatch => io::write_presence_csv(&mut w, &solve_cpa_batch(&dict, &obs)?)?,
        SolveAlgo::Icpa => io::write_presence_csv(&mut w, &icpa::run(&dict, &obs, cpa_lambda)?)?,
        SolveAlgo::Mbmp => {
            let iters = a.max_iters.unwrap_or(DEFAULT_MBMP_MAX_ITERS);
            io::write_coefficients_csv(&mut w, &solve_mbmp(&dict, &obs, iters)?)?
        }
        SolveAlgo::Mfocuss => {
            let defaults = MfocussParams::default();
            let params = MfocussParams {
                lambda: a.lambda.unwrap_or(defaults.lambda),
                max_iters: a.max_iters.unwrap_or(defaults.max_iters),
                ..defaults
            };
            let out = solve_mfocuss(&dict, &obs, &params)?;
            if !out.converged {
                eprintln!("warning: M-FOCUSS stopped at {} iterations without converging", out.iterations);
            }
            io::write_coefficients_csv(&mut w, &out.coefficients)?
        }
    }
    finish(w, &a.output)
}

fn bench_config(a: &BenchArgs) -> Result<ExperimentConfig, BenchError> {
    let experiment = Experiment::from(a.experiment);
    let mut c = match &a.config {
        Some(path) => ExperimentConfig::load(path, experiment)?,
        None => ExperimentConfig::for_experiment(experiment),
    };
    if a.paper_scale {
        c = c.paper_scale();
    }
    if let Some(v) = a.seed {
        c.base_seed = v;
    }
    if let Some(v) = a.n_dims {
        c.n_dims = v;
    }
    if let Some(v) = a.n_atoms {
        c.n_atoms = v;
    }
    if let Some(v) = a.n_steps {
        c.n_steps = v;
    }
    if let Some(v) = a.trials {
        c.n_trials = v;
    }
    if let Some(v) = &a.k_values {
        c.k_values = v.clone();
    }
    if let Some(v) = a.noise_ratio {
        c.noise_ratio = v;
    }
    if let Some(v) = a.novel_std {
        c.novel_std = Some(v);
    }
    if let Some(v) = a.lambda {
        c.cpa_lambda = v;
    }
    if let Some(names) = &a.algorithms {
        c.algorithms = names
            .iter()
            .map(|n| {
                Algorithm::parse(n.trim())
                    .ok_or_else(|| BenchError::Config(format!("unknown algorithm {n:?}")))
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = &a.output {
        c.output_path = v.clone();
    }
    c.validate()?;
    Ok(c)
}

fn bench(a: BenchArgs) -> Result<(), BenchError> {
    let config = bench_config(&a)?;
    if a.paper_scale {
        eprintln!(
            "warning: large scale (N={}, M={}) factors {}x{} systems per trial; expect hours",
            config.n_dims, config.n_atoms, config.n_atoms, config.n_atoms
        );
    }
    let output = run_experiment(a.experiment.into(), &config)?;
    output.write(&config.output_path)?;
    match output.summary().conditions {
        Conditions::Detection(groups) => {
            println!("algo\tk\tnovel_std\tlambda\tmean_f\tstd_f\tn");
            for g in groups {
                let lambda = g.lambda.map(|l| l.to_string()).unwrap_or_else(|| "-".into());
                println!(
                    "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{}",
                    g.algo, g.k, g.novel_std, lambda, g.f.mean, g.f.std, g.n
                );
            }
        }
        Conditions::Density(groups) => {
            println!("algo\tcondition\tk\tamp_std\tsupport_fraction\tpeak_score\tl1_l2_ratio\tn");
            for g in groups {
                println!(
                    "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}",
                    g.algo,
                    g.condition.name(),
                    g.k,
                    g.amp_std,
                    g.support_fraction.mean,
                    g.peak_score.mean,
                    g.l1_l2_ratio.mean,
                    g.n
                );
            }
        }
    }
    println!("wrote {}", config.output_path.display());
    Ok(())
}

/// The text printed by `bounds`.
pub fn bounds_report(k: usize, atoms: f64) -> Result<String, BenchError> {
    let bad = |e: cpa_core::Error| BenchError::Config(e.to_string());
    let rip = rip_dimension_bound(k, atoms).map_err(bad)?;
    let cpa = cpa_dimension_bound(k, atoms).map_err(bad)?;
    Ok(format!("rip_bound {rip:.1}\ncpa_bound {cpa:.1}\n"))
}

fn bounds(a: BoundsArgs) -> Result<(), BenchError> {
    print!("{}", bounds_report(a.k, a.atoms)?);
    Ok(())
}
