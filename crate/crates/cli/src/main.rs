use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use metaacl::harness::{
    self, classroom_size_sweep, emit_outputs, evaluation_types, final_performances, gen_classroom,
    load_history, read_results, run_condition, run_two_run, save_history, welch_ttest,
    write_results, write_summary, Condition, ExperimentConfig, OutputMode, TypeAssignment, TypeSet,
};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "metaacl",
    version,
    about = "Meta-ACL experiments on the toy cell-unlocking student"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classroom with ALP-GMM and write its trajectory history (JSONL).
    GenClassroom {
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Type set: `four` or `all`.
        #[arg(long, default_value = "four")]
        types: TypeSet,
        /// Give student i the i-th type instead of a uniform draw.
        #[arg(long)]
        one_per_type: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one condition on the fixed evaluation set.
    Run {
        #[arg(long)]
        condition: Condition,
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, default_value_t = 48)]
        seeds: usize,
        #[arg(long, default_value = "four")]
        types: TypeSet,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Long-format results CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-run summary CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train each student twice: ALP-GMM, then AGAIN-R replaying the
    /// curriculum curated from its own first run.
    TwoRun {
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value = "four")]
        types: TypeSet,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Long-format results CSV holding both runs.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate conditions with growing random subsets of a history.
    Sweep {
        #[arg(long)]
        history: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.025,0.05,0.1,0.25,0.5,1.0"
        )]
        fractions: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "again_r,in_r")]
        conditions: Vec<Condition>,
        #[arg(long, default_value_t = 96)]
        seeds: usize,
        #[arg(long, default_value = "all")]
        types: TypeSet,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-fraction summary CSV.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Welch's t-test on final performances of two results files.
    Stats {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Condition to take from `a` when it holds several.
        #[arg(long)]
        a_condition: Option<String>,
        #[arg(long)]
        b_condition: Option<String>,
    },
    /// Merge results files into a CSV, a mean ± std table or an SVG plot.
    Report {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "table")]
        mode: OutputMode,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Budgets and teacher hyperparameters shared by the training commands.
#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 200_000)]
    budget: u64,
    #[arg(long, default_value_t = 20_000)]
    pretrain: u64,
    /// ALP-GMM fitting rate N (also the IN update rate).
    #[arg(long, default_value_t = 250)]
    fitting_rate: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 0.1)]
    rho_high: f64,
    #[arg(long, default_value_t = 0.02)]
    rho_low: f64,
    #[arg(long, default_value_t = 0.2)]
    delta_lp: f64,
    #[arg(long, default_value_t = 3)]
    knn_k: usize,
}

impl Common {
    fn config(
        &self,
        condition: Condition,
        seeds: usize,
        types: TypeSet,
        seed: u64,
    ) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            condition,
            budget: self.budget,
            pretrain_budget: self.pretrain,
            seeds,
            master_seed: seed,
            types,
            rho_low: self.rho_low,
            delta_lp: self.delta_lp,
            knn_k: self.knn_k,
            in_update_rate: self.fitting_rate,
            ..ExperimentConfig::default()
        };
        c.alpgmm.fitting_rate = self.fitting_rate;
        c.alpgmm.rho_rnd = self.rho_high;
        c.alpgmm.fit.k_max = self.k_max;
        c
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot write {}", path.display())
    })?))
}

fn load_results(path: &Path) -> Result<Vec<harness::ResultRow>> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    read_results(file).with_context(|| format!("malformed results file {}", path.display()))
}

fn finals_of(path: &Path, condition: Option<&str>) -> Result<(String, Vec<f64>)> {
    let finals = final_performances(&load_results(path)?);
    match condition {
        Some(c) => finals
            .get(c)
            .map(|v| (c.to_string(), v.clone()))
            .with_context(|| format!("{} has no condition {c}", path.display())),
        None if finals.len() == 1 => Ok(finals.into_iter().next().expect("one entry")),
        None => bail!(
            "{} holds {} conditions; pick one with --a-condition/--b-condition",
            path.display(),
            finals.len()
        ),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GenClassroom {
            n,
            types,
            one_per_type,
            seed,
            out,
            common,
        } => {
            let config = common.config(Condition::Alpgmm, 1, types, seed);
            let assignment = if one_per_type {
                TypeAssignment::OnePerType
            } else {
                TypeAssignment::Uniform
            };
            log::info!(
                "training {n} classroom students on {} threads",
                harness::thread_count()
            );
            let history = gen_classroom(n, assignment, &config)?;
            save_history(&out, &history)
                .with_context(|| format!("cannot write {}", out.display()))?;
            log::info!("wrote {} trajectories to {}", history.len(), out.display());
        }
        Command::Run {
            condition,
            history,
            seeds,
            types,
            seed,
            out,
            summary,
            common,
        } => {
            let config = common.config(condition, seeds, types, seed);
            let history = match history {
                Some(p) => {
                    Some(load_history(&p).with_context(|| format!("cannot load {}", p.display()))?)
                }
                None if condition.needs_history() => {
                    bail!("condition {condition} needs --history")
                }
                None => None,
            };
            let records = run_condition(&config, history.as_deref())?;
            write_results(create(&out)?, &records)?;
            if let Some(p) = summary {
                write_summary(create(&p)?, &records)?;
            }
            let finals: Vec<f64> = records.iter().map(|r| r.final_perf).collect();
            log::info!(
                "{condition}: mean final perf {:.2} ± {:.2} over {} seeds",
                harness::mean(&finals),
                harness::std_dev(&finals),
                finals.len()
            );
        }
        Command::TwoRun {
            seeds,
            types,
            seed,
            out,
            summary,
            common,
        } => {
            let config = common.config(Condition::AgainR, seeds, types, seed);
            let jobs: Vec<(u64, usize)> = evaluation_types(&config)
                .into_iter()
                .enumerate()
                .map(|(i, ty)| (seed.wrapping_add(i as u64), ty))
                .collect();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(harness::thread_count())
                .build()?;
            let pairs = pool.install(|| {
                jobs.into_par_iter()
                    .map(|(s, ty)| run_two_run(&config, s, ty))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let (first, second): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let finals = |rs: &[harness::RunRecord]| -> Vec<f64> {
                rs.iter().map(|r| r.final_perf).collect()
            };
            let (f1, f2) = (finals(&first), finals(&second));
            let records: Vec<_> = first.into_iter().chain(second).collect();
            write_results(create(&out)?, &records)?;
            if let Some(p) = summary {
                write_summary(create(&p)?, &records)?;
            }
            log::info!(
                "run 1 mean {:.2}, run 2 mean {:.2} over {} students",
                harness::mean(&f1),
                harness::mean(&f2),
                f1.len()
            );
        }
        Command::Sweep {
            history,
            fractions,
            conditions,
            seeds,
            types,
            seed,
            out,
            common,
        } => {
            let config = common.config(Condition::AgainR, seeds, types, seed);
            let history = load_history(&history)
                .with_context(|| format!("cannot load {}", history.display()))?;
            let result = classroom_size_sweep(&history, &fractions, &conditions, &config)?;
            let mut w = create(&out)?;
            writeln!(w, "fraction,history_len,condition,mean,std,sem,n")?;
            for p in &result.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    p.fraction, p.history_len, p.condition, p.mean, p.std, p.sem, p.n
                )?;
            }
            w.flush()?;
        }
        Command::Stats {
            a,
            b,
            a_condition,
            b_condition,
        } => {
            let (ca, xa) = finals_of(&a, a_condition.as_deref())?;
            let (cb, xb) = finals_of(&b, b_condition.as_deref())?;
            let w = welch_ttest(&xa, &xb)?;
            println!(
                "{ca} (n={}, mean {:.3}) vs {cb} (n={}, mean {:.3}): t = {:.4}, df = {:.2}, p = {:.4e}",
                xa.len(),
                harness::mean(&xa),
                xb.len(),
                harness::mean(&xb),
                w.t,
                w.df,
                w.p
            );
        }
        Command::Report { inputs, mode, out } => {
            let mut rows = Vec::new();
            for p in &inputs {
                rows.extend(load_results(p)?);
            }
            let text = emit_outputs(&rows, mode)?;
            match out {
                Some(p) => {
                    let mut w = create(&p)?;
                    w.write_all(text.as_bytes())?;
                    w.flush()?;
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
