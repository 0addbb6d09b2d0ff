use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use frege_search::formula::{php_axioms, Formula};
use frege_search::g_game::{
    referee_g, AlwaysTrueLiar, AssignmentLiar, GameParamsG, GreedyConsistentLiar, Liar, ProofProver, RandomLiar,
};
use frege_search::harness::{
    load_axioms, report_lines, run_pipeline, write_estimates_csv, ExperimentConfig, PipelineError, Stage,
};
use frege_search::field::Prime;
use frege_search::h_game::referee_h;
use frege_search::proof::{check_proof, parse_proof};
use frege_search::search_tree::AnyTree;

#[derive(Parser)]
#[command(name = "frege-search", version, about = "Prover/Liar and Alice/Bob games for bounded-depth proofs with MOD_p gates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a refutation file against an axiom set.
    CheckProof(ProofArgs),
    /// Play the Prover read off a refutation against a Liar.
    PlayG {
        #[command(flatten)]
        proof: ProofArgs,
        /// `assignment:<bits>`, `greedy:<seed>`, `random:<seed>` or `true`.
        #[arg(long, default_value = "greedy:0")]
        liar: String,
        #[arg(long, default_value_t = 64)]
        t: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Play the translated Alice against one Bob of Ω.
    PlayH {
        #[command(flatten)]
        run: RunArgs,
        /// Index of the Bob in Ω.
        #[arg(long, default_value_t = 0)]
        bob: usize,
    },
    /// Build the approximation and the Alice strategy; report Err and coins.
    Translate(RunArgs),
    /// Build the search tree of the translated Alice.
    BuildTree {
        #[command(flatten)]
        run: RunArgs,
        /// Also print the materialized tree.
        #[arg(long)]
        dump: bool,
    },
    /// Estimate the success probability of the search tree over Ω.
    Estimate(RunArgs),
    /// Run every stage and write the full report.
    Pipeline(RunArgs),
}

#[derive(Args)]
struct ProofArgs {
    #[arg(long)]
    proof: PathBuf,
    /// Axiom file, one formula per line.
    #[arg(long, conflicts_with = "family")]
    axioms: Option<PathBuf>,
    /// `php:<n>` instead of an axiom file.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    proof: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["err", "star-err"])]
    mode: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    /// The configuration file with command-line values laid over it.
    fn config(&self) -> Result<ExperimentConfig, PipelineError> {
        let mut table: toml::Table = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| PipelineError {
                    stage: Stage::Config,
                    cause: format!("{}: {e}", path.display()),
                })?;
                text.parse().map_err(|e: toml::de::Error| PipelineError {
                    stage: Stage::Config,
                    cause: format!("config syntax: {}", e.message()),
                })?
            }
            None => toml::Table::new(),
        };
        let mut set = |k: &str, v: Option<toml::Value>| {
            if let Some(v) = v {
                table.insert(k.to_string(), v);
            }
        };
        set("family", self.family.clone().map(toml::Value::from));
        set("p", self.p.map(|v| toml::Value::from(v as i64)));
        set("d", self.d.map(|v| toml::Value::from(v as i64)));
        set("t", self.t.map(|v| toml::Value::from(v as i64)));
        set("omega", self.omega.clone().map(toml::Value::from));
        set("proof", self.proof.as_ref().map(|p| toml::Value::from(p.display().to_string())));
        set("seed", self.seed.map(|v| toml::Value::from(v as i64)));
        set("mode", self.mode.clone().map(toml::Value::from));
        set("samples", self.samples.map(|v| toml::Value::from(v as i64)));
        set("output", self.output.as_ref().map(|p| toml::Value::from(p.display().to_string())));
        ExperimentConfig::parse(&table.to_string())
    }
}

fn emit(lines: &[String], output: Option<&Path>) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| PipelineError {
        stage: Stage::Output,
        cause: e.to_string(),
    };
    match output {
        Some(path) => {
            let mut f = std::fs::File::create(path).map_err(io)?;
            for l in lines {
                writeln!(f, "{l}").map_err(io)?;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            for l in lines {
                writeln!(out, "{l}").map_err(io)?;
            }
        }
    }
    Ok(())
}

fn json(v: impl serde::Serialize) -> String {
    serde_json::to_string(&v).expect("serializable")
}

fn proof_inputs(args: &ProofArgs) -> Result<(frege_search::proof::Proof, Vec<Formula>), PipelineError> {
    let cfg_err = |cause: String| PipelineError {
        stage: Stage::Config,
        cause,
    };
    let text = std::fs::read_to_string(&args.proof).map_err(|e| cfg_err(format!("{}: {e}", args.proof.display())))?;
    let proof = parse_proof(&text).map_err(|e| PipelineError {
        stage: Stage::CheckProof,
        cause: e.to_string(),
    })?;
    let axioms = match (&args.axioms, &args.family) {
        (Some(path), _) => load_axioms(path).map_err(cfg_err)?,
        (None, Some(fam)) => {
            let n = fam
                .strip_prefix("php:")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| cfg_err(format!("unsupported family `{fam}`")))?;
            php_axioms(n).map_err(|e| cfg_err(e.to_string()))?
        }
        (None, None) => return Err(cfg_err("give --axioms or --family".into())),
    };
    Ok((proof, axioms))
}

fn make_liar(spec: &str, axioms: &[Formula], p: Prime) -> Result<Box<dyn Liar>, PipelineError> {
    let bad = || PipelineError {
        stage: Stage::Config,
        cause: format!("bad liar spec `{spec}`"),
    };
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match kind {
        "true" => Box::new(AlwaysTrueLiar),
        "random" => Box::new(RandomLiar::new(arg.parse().map_err(|_| bad())?)),
        "greedy" => Box::new(GreedyConsistentLiar::new(arg.parse().map_err(|_| bad())?, axioms, p)),
        "assignment" => {
            let vars: Vec<_> = axioms
                .iter()
                .flat_map(|a| a.vars())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            if arg.len() != vars.len() || !arg.chars().all(|c| c == '0' || c == '1') {
                return Err(bad());
            }
            let alpha = vars.into_iter().zip(arg.chars().map(|c| c == '1')).collect();
            Box::new(AssignmentLiar { alpha })
        }
        _ => return Err(bad()),
    })
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::CheckProof(args) => {
            let (proof, axioms) = proof_inputs(&args)?;
            check_proof(&proof, &axioms).map_err(|v| PipelineError {
                stage: Stage::CheckProof,
                cause: v.to_string(),
            })?;
            println!(
                "{}",
                json(serde_json::json!({
                    "valid": true,
                    "height": proof.height(),
                    "nodes": proof.node_count(),
                    "depth": proof.max_formula_depth(),
                    "p": proof.p.get(),
                }))
            );
            Ok(())
        }
        Command::PlayG { proof, liar, t, d } => {
            let (pf, axioms) = proof_inputs(&proof)?;
            let tree = if pf.is_tree() { pf.clone() } else { pf.unfold_to_tree() };
            let prover = ProofProver::new(&tree).map_err(|cause| PipelineError {
                stage: Stage::ExtractProver,
                cause,
            })?;
            let mut liar = make_liar(&liar, &axioms, pf.p)?;
            let params = GameParamsG { d, t, p: pf.p, axioms };
            println!("{}", json(referee_g(&prover, liar.as_mut(), &params)));
            Ok(())
        }
        Command::PlayH { run: args, bob } => {
            let cfg = args.config()?;
            let art = run_pipeline(&cfg)?;
            let b = art.omega.get(bob).ok_or_else(|| PipelineError {
                stage: Stage::Config,
                cause: format!("Bob {bob} outside Ω of size {}", art.omega.len()),
            })?;
            let tr = referee_h(art.alice.as_ref(), b.as_ref(), &art.params);
            emit(&[json(tr)], cfg.output.as_deref())
        }
        Command::Translate(args) => {
            let cfg = args.config()?;
            let art = run_pipeline(&cfg)?;
            let r = &art.report;
            let lines = vec![
                json(serde_json::json!({ "record": "derived", "data": r.derived })),
                json(serde_json::json!({ "record": "approx", "data": r.approx })),
                json(serde_json::json!({ "record": "err", "data": r.err })),
                json(serde_json::json!({ "record": "coins", "data": r.coins })),
            ];
            emit(&lines, cfg.output.as_deref())
        }
        Command::BuildTree { run: args, dump } => {
            let cfg = args.config()?;
            let art = run_pipeline(&cfg)?;
            let mut lines = vec![json(serde_json::json!({ "record": "tree", "data": art.report.tree }))];
            if dump {
                if let AnyTree::Full(t) = &art.tree {
                    lines.push(json(serde_json::json!({ "record": "nodes", "data": t })));
                }
            }
            emit(&lines, cfg.output.as_deref())
        }
        Command::Estimate(args) => {
            let cfg = args.config()?;
            let art = run_pipeline(&cfg)?;
            let r = &art.report;
            if let Some(path) = &cfg.csv {
                write_estimates_csv(path, &[&r.estimate_err, &r.estimate_star])?;
            }
            emit(&[json(&r.estimate)], cfg.output.as_deref())
        }
        Command::Pipeline(args) => {
            let cfg = args.config()?;
            let art = run_pipeline(&cfg)?;
            let r = &art.report;
            if let Some(path) = &cfg.csv {
                write_estimates_csv(path, &[&r.estimate_err, &r.estimate_star])?;
            }
            emit(&report_lines(r), cfg.output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
