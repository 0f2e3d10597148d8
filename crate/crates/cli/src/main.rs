mod checks;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use eqc_core::baselines::{christofides_bound, nearest_neighbor, random_tour, solve_exact};
use eqc_core::graph::{generate_instances, read_instances, tour_cost, write_instances};
use eqc_core::qaoa::{evaluate_fixed, optimize_layerwise, LayerResult, QaoaParams, QaoaSettings};
use eqc_core::trainer::{self, episodes_csv, Summary, TrainerConfig};
use eqc_core::{Ansatz, Error, Instance};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

#[derive(Parser)]
#[command(name = "eqc", version, about = "Equivariant quantum circuits for TSP node selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances in the unit square.
    Gen {
        #[arg(long)]
        cities: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Attach an optimal tour to every instance.
        #[arg(long)]
        solve: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an agent and evaluate it greedily on validation instances.
    Train {
        #[arg(long, default_value = "eqc")]
        ansatz: String,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        /// `key = value` file applied over the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print one line per episode.
        #[arg(long)]
        verbose: bool,
    },
    /// Run a numerical property suite.
    Check {
        #[arg(long, value_enum)]
        what: CheckKind,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Nearest-neighbour and random-tour ratios per instance.
    Baseline {
        /// Instance file; generated from --cities/--count/--seed when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        cities: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start nearest neighbour at a random node instead of node 0.
        #[arg(long)]
        random_start: bool,
        /// Random tours averaged per instance.
        #[arg(long, default_value_t = 1)]
        random_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// QAOA reference solver with layerwise optimisation.
    Qaoa {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        cities: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest depth; every depth from 1 is reported.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Random-search samples at depth 1.
        #[arg(long, default_value_t = 500)]
        budget: usize,
        /// Objective evaluations per local optimisation.
        #[arg(long, default_value_t = 500)]
        max_evals: usize,
        #[arg(long, default_value_t = 1)]
        top_k: usize,
        #[arg(long, default_value_t = 1.0)]
        penalty: f64,
        /// Apply these angles to every instance instead of optimising.
        #[arg(long)]
        transfer_params: Option<PathBuf>,
        /// Write the first instance's deepest angles here.
        #[arg(long)]
        save_params: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Equivariance,
    Analytic,
    Gradients,
}

/// A failed property check; maps to the validation exit code.
struct CheckFailed;

enum Failure {
    Core(Error),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<CheckFailed> for Failure {
    fn from(_: CheckFailed) -> Self {
        Failure::Check
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { cities, count, seed, solve, out } => cmd_gen(cities, count, seed, solve, out.as_deref()),
        Command::Train {
            ansatz,
            depth,
            train,
            val,
            config,
            out,
            episodes,
            seed,
            threads,
            overrides,
            verbose,
        } => build_config(config.as_deref(), episodes, seed, threads, &overrides).and_then(|cfg| {
            let ansatz = Ansatz::new(ansatz.parse()?, depth)?;
            cmd_train(&cfg, ansatz, &train, &val, &out, verbose)
        }),
        Command::Check { what, trials, seed } => cmd_check(what, trials, seed),
        Command::Baseline {
            input,
            cities,
            count,
            seed,
            random_start,
            random_samples,
            out,
        } => cmd_baseline(input.as_deref(), cities, count, seed, random_start, random_samples, out.as_deref()),
        Command::Qaoa {
            input,
            cities,
            count,
            seed,
            depth,
            budget,
            max_evals,
            top_k,
            penalty,
            transfer_params,
            save_params,
            threads,
            out,
        } => {
            let settings = QaoaSettings {
                budget,
                max_evals,
                top_k,
                penalty,
                threads,
                ..QaoaSettings::default()
            };
            cmd_qaoa(
                input.as_deref(),
                cities,
                count,
                seed,
                depth,
                &settings,
                transfer_params.as_deref(),
                save_params.as_deref(),
                out.as_deref(),
            )
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(EXIT_FAILURE),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Capacity { .. } => EXIT_CAPACITY,
                Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            })
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    emit(Some(path), text)
}

/// Instances from `input`, or freshly generated ones.
fn load_or_generate(input: Option<&Path>, cities: usize, count: usize, seed: u64) -> Result<Vec<Instance>, Failure> {
    Ok(match input {
        Some(path) => read_instances(path)?,
        None => generate_instances(cities, count, seed)?
            .into_iter()
            .map(|graph| Instance { graph, optimal: None })
            .collect(),
    })
}

/// Fills in missing optimal tours with the exact solver.
fn ensure_optimal(instances: &mut [Instance]) -> Result<(), Failure> {
    for inst in instances.iter_mut().filter(|i| i.optimal.is_none()) {
        inst.optimal = Some(solve_exact(&inst.graph)?);
    }
    Ok(())
}

fn cmd_gen(cities: usize, count: usize, seed: u64, solve: bool, out: Option<&Path>) -> Result<(), Failure> {
    let mut instances = load_or_generate(None, cities, count, seed)?;
    if solve {
        ensure_optimal(&mut instances)?;
    }
    match out {
        Some(path) => write_instances(path, &instances)?,
        None => {
            for inst in &instances {
                println!("{}", eqc_core::graph::format_instance(inst));
            }
        }
    }
    Ok(())
}

fn summary_json(s: &Summary) -> serde_json::Value {
    json!({
        "count": s.count,
        "mean": s.mean,
        "median": s.median,
        "q1": s.q1,
        "q3": s.q3,
        "min": s.min,
        "max": s.max,
        "std_err": s.std_err,
    })
}

/// Defaults, then the config file, then flags.
fn build_config(
    file: Option<&Path>,
    episodes: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    overrides: &[String],
) -> Result<TrainerConfig, Failure> {
    let mut cfg = match file {
        Some(path) => TrainerConfig::load(path)?,
        None => TrainerConfig::default(),
    };
    if let Some(e) = episodes {
        cfg.episodes_max = e;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected KEY=VALUE, got {o:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(cfg: &TrainerConfig, ansatz: Ansatz, train: &Path, val: &Path, out: &Path, verbose: bool) -> Result<(), Failure> {
    let train_set = read_instances(train)?;
    let mut val_set = read_instances(val)?;
    ensure_optimal(&mut val_set)?;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;

    let outcome = trainer::train_with(cfg, &train_set, ansatz, |r| {
        if verbose {
            let ratio = r.ratio.map_or("-".into(), |x| format!("{x:.4}"));
            let loss = r.loss.map_or("-".into(), |x| format!("{x:.3e}"));
            println!("episode {:>5}  ratio {ratio}  loss {loss}  epsilon {:.3}", r.episode, r.epsilon);
        }
    })?;
    let report = trainer::evaluate(&outcome.params, ansatz, &val_set)?;

    let nn_ratios: Vec<f64> = val_set
        .iter()
        .map(|i| {
            let opt = i.optimal.as_ref().expect("filled above");
            Ok(tour_cost(&i.graph, &nearest_neighbor(&i.graph, 0)?)? / tour_cost(&i.graph, opt)?)
        })
        .collect::<Result<_, Error>>()?;

    outcome.checkpoint().save(&out.join("checkpoint.txt"))?;
    write_file(&out.join("episodes.csv"), &episodes_csv(&outcome.history))?;
    let mut csv = String::from("instance,ratio,nn_ratio,tour\n");
    for (k, (r, t)) in report.ratios.iter().zip(&report.tours).enumerate() {
        let tour: Vec<String> = t.order().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(csv, "{k},{r},{},{}", nn_ratios[k], tour.join(" "));
    }
    write_file(&out.join("validation.csv"), &csv)?;

    let n = outcome.n;
    let summary = json!({
        "ansatz": ansatz.kind.as_str(),
        "depth": ansatz.depth,
        "n": n,
        "n_trainable": ansatz.n_trainable(n),
        "n_trainable_per_layer": ansatz.kind.n_trainable(n, 1),
        "episodes_run": outcome.episodes_run(),
        "steps": outcome.steps,
        "solved": outcome.solved,
        "seed": cfg.seed,
        "train_final_mean_ratio": outcome.final_mean_ratio(cfg.solve_window),
        "validation": summary_json(&report.summary),
        "nearest_neighbor_validation": Summary::of(&nn_ratios).map(|s| summary_json(&s)),
    });
    write_file(
        &out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("plain JSON") + "\n"),
    )?;

    println!(
        "{} p={} n={}: {} episodes{}, validation mean {:.4} (median {:.4}), nearest neighbour {:.4}",
        ansatz.kind,
        ansatz.depth,
        n,
        outcome.episodes_run(),
        if outcome.solved { " (solved)" } else { "" },
        report.summary.mean,
        report.summary.median,
        nn_ratios.iter().sum::<f64>() / nn_ratios.len() as f64,
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_check(what: CheckKind, trials: usize, seed: u64) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = match what {
        CheckKind::Equivariance => checks::equivariance(trials, &mut rng)?,
        CheckKind::Analytic => checks::analytic(trials, &mut rng)?,
        CheckKind::Gradients => checks::gradients(trials, &mut rng)?,
    };
    let mut ok = true;
    for l in &lines {
        let verdict = if l.passed() { "PASS" } else { "FAIL" };
        println!("{verdict}  {}: {:.3e} (tolerance {:.0e}, {} trials)", l.name, l.value, l.tolerance, l.trials);
        ok &= l.passed();
    }
    if ok {
        Ok(())
    } else {
        Err(CheckFailed.into())
    }
}

fn cmd_baseline(
    input: Option<&Path>,
    cities: usize,
    count: usize,
    seed: u64,
    random_start: bool,
    random_samples: usize,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut instances = load_or_generate(input, cities, count, seed)?;
    ensure_optimal(&mut instances)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("instance,optimal_cost,christofides_bound,nn_start,nn_cost,nn_ratio,random_ratio\n");
    let (mut nn_sum, mut rnd_sum) = (0.0, 0.0);
    for (k, inst) in instances.iter().enumerate() {
        let g = &inst.graph;
        let opt = tour_cost(g, inst.optimal.as_ref().expect("filled above"))?;
        let start = if random_start { rng.gen_range(0..g.n()) } else { 0 };
        let nn = tour_cost(g, &nearest_neighbor(g, start)?)?;
        let samples = random_samples.max(1);
        let mut rnd = 0.0;
        for _ in 0..samples {
            rnd += tour_cost(g, &random_tour(g, &mut rng))?;
        }
        let rnd_ratio = rnd / samples as f64 / opt;
        nn_sum += nn / opt;
        rnd_sum += rnd_ratio;
        let _ = writeln!(
            csv,
            "{k},{opt},{},{start},{nn},{},{rnd_ratio}",
            christofides_bound(g)?,
            nn / opt
        );
    }
    emit(out, &csv)?;
    let m = instances.len().max(1) as f64;
    eprintln!(
        "{} instances: nearest neighbour mean ratio {:.4}, random mean ratio {:.4}",
        instances.len(),
        nn_sum / m,
        rnd_sum / m
    );
    Ok(())
}

fn layer_row(csv: &mut String, k: usize, r: &LayerResult, inst: &Instance) {
    let tour_len = r.tour.as_ref().map(|t| tour_cost(&inst.graph, t).expect("decoded tour is valid"));
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let _ = writeln!(
        csv,
        "{k},{},{},{},{},{},{}",
        r.params.depth(),
        r.expected_cost,
        r.evaluations,
        r.tour.is_some(),
        cell(tour_len),
        cell(r.ratio)
    );
}

#[allow(clippy::too_many_arguments)]
fn cmd_qaoa(
    input: Option<&Path>,
    cities: usize,
    count: usize,
    seed: u64,
    depth: usize,
    settings: &QaoaSettings,
    transfer: Option<&Path>,
    save: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut instances = load_or_generate(input, cities, count, seed)?;
    ensure_optimal(&mut instances)?;
    let mut csv = String::from("instance,p,expected_cost,evaluations,feasible,tour_cost,ratio\n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fixed = transfer.map(QaoaParams::load).transpose()?;
    let mut deepest: Vec<Vec<Option<f64>>> = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let opt = inst.optimal_cost();
        let layers = match &fixed {
            Some(p) => vec![evaluate_fixed(&inst.graph, opt, p, settings)?],
            None => optimize_layerwise(&inst.graph, opt, depth, settings, &mut rng)?,
        };
        if k == 0 {
            if let (Some(path), Some(last)) = (save, layers.last()) {
                write_file(path, &last.params.to_text())?;
            }
        }
        for r in &layers {
            layer_row(&mut csv, k, r, inst);
        }
        deepest.push(layers.iter().map(|r| r.ratio).collect());
    }
    emit(out, &csv)?;
    let depths = deepest.first().map_or(0, Vec::len);
    for d in 0..depths {
        let ratios: Vec<f64> = deepest.iter().filter_map(|r| r[d]).collect();
        let infeasible = deepest.len() - ratios.len();
        let label = fixed.as_ref().map_or(d + 1, |p| p.depth());
        match Summary::of(&ratios) {
            Some(s) => eprintln!(
                "p={label}: median ratio {:.4}, mean {:.4}, {infeasible} infeasible of {}",
                s.median,
                s.mean,
                deepest.len()
            ),
            None => eprintln!("p={label}: no feasible solutions"),
        }
    }
    Ok(())
}
