use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use r3l::analysis::{
    fit_failure_tail, hit_fraction, hitting_probability, sampling_complexity_bound, RandomWalkConfig, TailFit,
};
use r3l::bc::{build_dataset, train_bc, BcConfig, DemoSet, Policy, PolicyCheckpoint};
use r3l::env::EnvId;
use r3l::harness::{
    default_budget, derive_seeds, failure_tail_sweep, format_table, run_ablation, run_pipeline, summarize,
    write_pipeline_outputs, write_runs_csv, write_summary_csv, ExperimentConfig, LabeledCurve, Manifest, Variant,
};
use r3l::planner::{collect_demos, ExploreConfig, StopRule};
use r3l::rl::{default_batch_timesteps, read_curve_csv, refine, write_curve_csv, RefineConfig, TrpoConfig};
use r3l::seed::{derive_seed, rng_from_seed};
use r3l::steering::SteeringMode;

const VERSION: &str = env!("R3L_VERSION");

#[derive(Parser)]
#[command(name = "r3l", version = VERSION, about = "Planner-driven exploration for sparse-reward RL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore with the tree planner and save demonstrations.
    Explore(ExploreArgs),
    /// Run the steering and goal-bias ablation from a JSON config.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
    },
    /// Clone a policy from a demonstration file.
    Bc(BcArgs),
    /// Refine a policy with the natural policy gradient.
    Refine(RefineArgs),
    /// Explore, clone and refine against refinement from scratch.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "pipeline_out")]
        out: PathBuf,
    },
    /// Theory checks and curve summaries.
    Analyze {
        #[command(subcommand)]
        command: AnalyzeCommand,
    },
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    env: EnvId,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step cap per run; defaults to the environment's budget.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    goal_bias: f64,
    #[arg(long, default_value = "learned")]
    steering: SteeringMode,
    /// Number of successful trajectories to collect.
    #[arg(long, default_value_t = 1)]
    demos: usize,
    /// Spend the whole budget and keep the best goal trajectory.
    #[arg(long)]
    full_budget: bool,
    #[arg(long, default_value = "explore_out")]
    out: PathBuf,
}

#[derive(Args)]
struct BcArgs {
    #[arg(long)]
    demos: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    env: EnvId,
    /// Policy checkpoint, or `random` for a fresh network.
    #[arg(long, default_value = "random")]
    init: String,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to ten horizons.
    #[arg(long)]
    batch_timesteps: Option<usize>,
    /// Steps already spent (e.g. on exploration), added to the curve.
    #[arg(long, default_value_t = 0)]
    offset: u64,
    #[arg(long, default_value = "curve.csv")]
    out: PathBuf,
    /// Where to write the refined policy.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Hitting probability, optionally with a Monte Carlo estimate.
    Hitting {
        #[arg(long)]
        r: f64,
        #[arg(long = "big-r")]
        big_r: f64,
        #[arg(long)]
        d: usize,
        /// Number of Monte Carlo walks (0 disables).
        #[arg(long, default_value_t = 0)]
        walks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Expected sampling complexity for a tail `a e^(-b k)`.
    Bound {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
    /// Failure fractions across exploration budgets and their tail fit.
    Tail(TailArgs),
    /// Formula values, Monte Carlo estimates and a tail fit in one report.
    Report {
        #[arg(long, default_value_t = 10_000)]
        walks: usize,
        #[arg(long, default_value_t = 50)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "analysis_out")]
        out: PathBuf,
    },
    /// Median and quartiles of pipeline curves listed in manifests.
    Summarize {
        manifests: Vec<PathBuf>,
        #[arg(long, default_value = "r3l_pg")]
        method: r3l::harness::Method,
    },
}

#[derive(Args)]
struct TailArgs {
    #[arg(long, default_value = "mountaincar")]
    env: EnvId,
    #[arg(long, default_value = "learned")]
    steering: SteeringMode,
    #[arg(long, default_value_t = 0.05)]
    goal_bias: f64,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
    budgets: Vec<u64>,
    #[arg(long, default_value = "tail_out")]
    out: PathBuf,
}

fn read_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn explore_cmd(args: ExploreArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    let mut env = args.env.make();
    let mut cfg = ExploreConfig::new(
        args.budget.unwrap_or_else(|| default_budget(args.env)),
        args.goal_bias,
        args.steering,
        args.seed,
    );
    if args.full_budget {
        cfg.stop = StopRule::FullBudget;
    }
    let coll = collect_demos(&mut env, &cfg, args.demos)?;
    let demo_path = args.out.join("demos.jsonl");
    let mut w = BufWriter::new(File::create(&demo_path)?);
    coll.demos.write_jsonl(&mut w, &coll.header(&cfg), &env)?;
    w.flush()?;
    let mut runs = csv::Writer::from_path(args.out.join("runs.csv"))?;
    for r in &coll.runs {
        runs.serialize(r)?;
    }
    runs.flush()?;
    write_json(
        &args.out.join("manifest.json"),
        &serde_json::json!({
            "version": VERSION,
            "command": "explore",
            "env": args.env,
            "config": cfg,
            "seeds": coll.seeds,
            "timesteps": coll.timesteps,
        }),
    )?;
    for (t, seed) in coll.demos.trajectories.iter().zip(&coll.seeds) {
        println!("seed {seed}: |tau| = {}", t.len());
    }
    println!("{} demos, {} env steps -> {}", coll.demos.len(), coll.timesteps, demo_path.display());
    Ok(())
}

fn bench_cmd(config: Option<PathBuf>, out: PathBuf) -> Result<()> {
    let cfg = read_config(config.as_deref())?;
    fs::create_dir_all(&out)?;
    let table = run_ablation(&cfg)?;
    write_runs_csv(File::create(out.join("runs.csv"))?, &table)?;
    write_summary_csv(File::create(out.join("summary.csv"))?, &table)?;
    let text = format_table(&table);
    fs::write(out.join("table.txt"), &text)?;
    write_json(
        &out.join("manifest.json"),
        &serde_json::json!({ "version": VERSION, "command": "bench", "config": cfg, "seeds": cfg.run_seeds() }),
    )?;
    print!("{text}");
    Ok(())
}

fn bc_cmd(args: BcArgs) -> Result<()> {
    let file = File::open(&args.demos).with_context(|| format!("opening {}", args.demos.display()))?;
    let (header, demos): (_, DemoSet) = DemoSet::read_jsonl(BufReader::new(file))?;
    let env_id: EnvId = header.env.parse()?;
    let mut env = env_id.make();
    demos.validate(&mut env)?;
    let data = build_dataset(&demos, env.spec())?;
    let mut policy = Policy::new(env.spec(), &mut rng_from_seed(derive_seed(args.seed, 1)));
    let cfg = BcConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        seed: args.seed,
    };
    let report = train_bc(&mut policy, &data, &cfg)?;
    write_json(&args.out, &policy.to_checkpoint())?;
    println!(
        "{} pairs, loss {:.5} -> {:.5}, checkpoint {}",
        data.len(),
        report.initial_loss,
        report.final_loss(),
        args.out.display()
    );
    Ok(())
}

fn refine_cmd(args: RefineArgs) -> Result<()> {
    let mut env = args.env.make();
    let spec = env.spec().clone();
    let mut policy = if args.init == "random" {
        Policy::new(&spec, &mut rng_from_seed(derive_seed(args.seed, 1)))
    } else {
        let text = fs::read_to_string(&args.init).with_context(|| format!("reading {}", args.init))?;
        let ckpt: PolicyCheckpoint = serde_json::from_str(&text)?;
        let p = Policy::from_checkpoint(&ckpt)?;
        if ckpt.state_bounds != spec.state_bounds || ckpt.action_bounds != spec.action_bounds {
            bail!("checkpoint was not trained on {}", args.env);
        }
        p
    };
    let cfg = RefineConfig {
        iterations: args.iters,
        batch_timesteps: args.batch_timesteps.unwrap_or_else(|| default_batch_timesteps(&spec)),
        trpo: TrpoConfig::default(),
        timestep_offset: args.offset,
    };
    let curve = refine(&mut policy, &mut env, &cfg, &mut rng_from_seed(derive_seed(args.seed, 3)))?;
    write_curve_csv(File::create(&args.out)?, args.seed, &curve)?;
    if let Some(path) = &args.save {
        write_json(path, &policy.to_checkpoint())?;
    }
    for p in &curve {
        println!(
            "iter {:>4}  steps {:>9}  return {:>9.2}  success {:.2}  kl {:.4}",
            p.iteration, p.cumulative_timesteps, p.mean_return, p.success_rate, p.kl
        );
    }
    Ok(())
}

fn pipeline_cmd(config: Option<PathBuf>, out: PathBuf) -> Result<()> {
    let cfg = read_config(config.as_deref())?;
    let result = run_pipeline(&cfg)?;
    let manifest = write_pipeline_outputs(&out, &cfg, &result, VERSION)?;
    for run in &manifest.runs {
        println!("{} seed {}: {} (offset {})", run.method, run.seed, run.status, run.offset);
    }
    println!("manifest: {}", out.join("manifest.json").display());
    Ok(())
}

fn tail_fit_json(fit: &r3l::Result<TailFit>) -> serde_json::Value {
    match fit {
        Ok(f) => serde_json::to_value(f).unwrap_or_default(),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    }
}

fn analyze_cmd(cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Hitting { r, big_r, d, walks, seed } => {
            let p = hitting_probability(r, big_r, d)?;
            let mut out = serde_json::json!({ "r": r, "R": big_r, "d": d, "formula": p });
            if walks > 0 {
                let cfg = RandomWalkConfig::isotropic(d, r, big_r, r / 20.0, 1_000_000);
                out["monte_carlo"] = hit_fraction(&cfg, walks, seed)?.into();
                out["walks"] = walks.into();
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        AnalyzeCommand::Bound { a, b } => {
            println!("{}", sampling_complexity_bound(a, b)?);
        }
        AnalyzeCommand::Tail(args) => {
            fs::create_dir_all(&args.out)?;
            let variant = Variant {
                steering: args.steering,
                goal_bias: args.goal_bias,
            };
            let sweep = failure_tail_sweep(args.env, variant, &args.budgets, &derive_seeds(args.seed, args.seeds))?;
            write_tail_csv(&args.out.join("tail.csv"), &sweep.outcomes)?;
            write_json(&args.out.join("tail.json"), &sweep)?;
            for o in &sweep.outcomes {
                println!("budget {:>7}: failure fraction {:.3}", o.budget, o.failure_fraction());
            }
            match &sweep.fit {
                Some(f) => println!("fit: a = {:.4}, b = {:.6}", f.a, f.b),
                None => println!("fit: fewer than two budgets with failures"),
            }
        }
        AnalyzeCommand::Report { walks, seeds, seed, out } => {
            fs::create_dir_all(&out)?;
            let mut formulas = Vec::new();
            let mut estimates = Vec::new();
            for d in [3usize, 4, 5] {
                let p = hitting_probability(0.5, 1.0, d)?;
                formulas.push(serde_json::json!({ "quantity": "hitting_probability", "r": 0.5, "R": 1.0, "d": d, "value": p }));
                if walks > 0 {
                    let cfg = RandomWalkConfig::isotropic(d, 0.5, 1.0, 0.5 / 20.0, 1_000_000);
                    let mc = hit_fraction(&cfg, walks, derive_seed(seed, d as u64))?;
                    estimates.push(serde_json::json!({ "d": d, "walks": walks, "hit_fraction": mc, "formula": p }));
                }
            }
            for (a, b) in [(1.0, 2f64.ln()), (1.0, 4f64.ln()), (10.0, 0.05)] {
                formulas.push(serde_json::json!({
                    "quantity": "sampling_complexity_bound", "a": a, "b": b,
                    "value": sampling_complexity_bound(a, b)?,
                }));
            }
            let budgets = [250, 500, 1000, 2000, 4000];
            let variant = Variant {
                steering: SteeringMode::Learned,
                goal_bias: 0.05,
            };
            let sweep = failure_tail_sweep(EnvId::MountainCar, variant, &budgets, &derive_seeds(seed, seeds))?;
            write_tail_csv(&out.join("tail.csv"), &sweep.outcomes)?;
            let report = serde_json::json!({
                "version": VERSION,
                "formulas": formulas,
                "monte_carlo": estimates,
                "tail_fits": [{ "env": "mountaincar", "fit": tail_fit_json(&fit_failure_tail(&sweep.outcomes)) }],
            });
            write_json(&out.join("analysis.json"), &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        AnalyzeCommand::Summarize { manifests, method } => {
            let mut curves = Vec::new();
            for path in &manifests {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let manifest: Manifest = serde_json::from_str(&text)?;
                let dir = path.parent().unwrap_or(Path::new("."));
                for run in manifest.runs.iter().filter(|r| r.method == method) {
                    let Some(file) = &run.curve_file else { continue };
                    for (seed, points) in read_curve_csv(File::open(dir.join(file))?)? {
                        curves.push(LabeledCurve {
                            env: manifest.env.to_string(),
                            seed,
                            points,
                        });
                    }
                }
            }
            let summary = summarize(&curves, None)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(())
}

fn write_tail_csv(path: &Path, outcomes: &[r3l::analysis::BudgetOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["budget", "runs", "failures", "failure_fraction"])?;
    for o in outcomes {
        w.write_record(&[
            o.budget.to_string(),
            o.runs.to_string(),
            o.failures.to_string(),
            o.failure_fraction().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Explore(args) => explore_cmd(args),
        Command::Bench { config, out } => bench_cmd(config, out),
        Command::Bc(args) => bc_cmd(args),
        Command::Refine(args) => refine_cmd(args),
        Command::Pipeline { config, out } => pipeline_cmd(config, out),
        Command::Analyze { command } => analyze_cmd(command),
    }
}
