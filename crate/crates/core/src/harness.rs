//! Experiment configuration and the end-to-end pipeline:
//! refutation → Prover → Alice → coin search → search tree → estimate.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::Prime;
use crate::formula::{parse_formula_list, php_axioms, poly_to_formula, Assignment, Formula};
use crate::g_game::{GameParamsG, ProofProver, Prover};
use crate::h_game::alice::{
    alice_coin_search, bob_as_liar, degree_cap, round_budget, CoinSearch, TranslatedAlice, R_CONST,
};
use crate::h_game::approx::{ApproxConfig, ApproxContext, ApproxSnapshot};
use crate::h_game::normalize::normalize_bob;
use crate::h_game::protocols::PROTOCOL_C;
use crate::h_game::{referee_h, Alice, HEnd, AssignmentBob, GameParamsH, PerturbedBob, RandomBob, SimpleBob};
use crate::poly::{all_assignments, php_polynomial_system, validate_system, PolySystem, SystemCaps};
use crate::proof::{check_proof, parse_proof, refute_by_case_split, Proof};
use crate::search_tree::{build_tree, success_probability, AnyTree, ErrMode, SuccessEstimate, TreeEval};
use crate::seeds::sub_seed;

fn default_retries() -> usize {
    8
}
fn default_max_e() -> usize {
    1 << 24
}
fn default_node_cap() -> usize {
    1 << 18
}
fn default_omega() -> String {
    "assignments".into()
}
fn default_coin_bits() -> usize {
    20
}
fn default_coin_samples() -> usize {
    1024
}
fn default_monomial_cap() -> usize {
    1 << 16
}
fn default_max_omega() -> usize {
    1 << 16
}

/// Experiment settings, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `php:<n>` or `system:<path>` (one polynomial per line).
    pub family: String,
    pub p: u32,
    pub d: usize,
    pub t: usize,
    /// Overrides `ℓ = t² + 2t`.
    #[serde(default)]
    pub ell: Option<usize>,
    /// Overrides the round budget `r`.
    #[serde(default)]
    pub r: Option<usize>,
    /// Refutation file; generated by case splitting when absent.
    #[serde(default)]
    pub proof: Option<PathBuf>,
    /// Upper limit on the derived degree cap `e`.
    #[serde(default = "default_max_e")]
    pub max_e: usize,
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default = "default_node_cap")]
    pub tree_node_cap: usize,
    #[serde(default = "default_monomial_cap")]
    pub monomial_cap: usize,
    /// `assignments`, `random:<k>[:<seed>]`, `normalized:<k>[:<seed>]` or
    /// `perturbed:<k>:<ppm>[:<seed>]`.
    #[serde(default = "default_omega")]
    pub omega: String,
    #[serde(default = "default_max_omega")]
    pub max_omega: usize,
    #[serde(default)]
    pub seed: u64,
    /// Per-stage seed overrides by stage name.
    #[serde(default)]
    pub stage_seeds: BTreeMap<String, u64>,
    #[serde(default = "default_mode")]
    pub mode: ErrMode,
    /// Sample size for the estimate; `|Ω|` (exhaustive) by default.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "default_coin_bits")]
    pub coin_exhaustive_bits: usize,
    #[serde(default = "default_coin_samples")]
    pub coin_samples: usize,
    #[serde(default)]
    pub record_transcripts: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

fn default_mode() -> ErrMode {
    ErrMode::Err
}

/// Stage names, also used as sub-seed names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    ValidateSystem,
    CheckProof,
    ExtractProver,
    Translate,
    CoinSearch,
    BuildTree,
    Estimate,
    Output,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::ValidateSystem => "validate-system",
            Stage::CheckProof => "check-proof",
            Stage::ExtractProver => "extract-prover",
            Stage::Translate => "translate",
            Stage::CoinSearch => "coin-search",
            Stage::BuildTree => "build-tree",
            Stage::Estimate => "estimate",
            Stage::Output => "output",
        }
    }

    /// Process exit code for a failure in this stage.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::ValidateSystem => 3,
            Stage::CheckProof => 4,
            Stage::ExtractProver => 5,
            Stage::Translate => 6,
            Stage::CoinSearch => 7,
            Stage::BuildTree => 8,
            Stage::Estimate => 9,
            Stage::Output => 10,
        }
    }
}

#[derive(Debug, Clone, Error)]
#[error("{}: {cause}", .stage.name())]
pub struct PipelineError {
    pub stage: Stage,
    pub cause: String,
}

fn fail<T>(stage: Stage, cause: impl ToString) -> Result<T, PipelineError> {
    Err(PipelineError {
        stage,
        cause: cause.to_string(),
    })
}

/// Parameters computed from the configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Derived {
    pub ell: usize,
    pub e: usize,
    pub r: usize,
    pub r_const: usize,
    pub protocol_c: usize,
    /// Exponent annotation `ε_d = 1/(2(d+c)+5)`, never asserted.
    pub epsilon: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let cfg: ExperimentConfig = match toml::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(Stage::Config, format!("config schema: {}", e.message())),
        };
        cfg.derived()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError {
                stage: Stage::Config,
                cause: format!("{}: {e}", path.display()),
            })?;
        Self::parse(&text)
    }

    pub fn prime(&self) -> Result<Prime, PipelineError> {
        Prime::new(self.p).map_err(|e| PipelineError {
            stage: Stage::Config,
            cause: e.to_string(),
        })
    }

    /// Validate and compute `ℓ`, `e`, `r`.
    pub fn derived(&self) -> Result<Derived, PipelineError> {
        self.prime()?;
        if self.t == 0 {
            return fail(Stage::Config, "t must be at least 1");
        }
        if self.d == 0 {
            return fail(Stage::Config, "d must be at least 1");
        }
        if !(self.family.starts_with("php:") || self.family.starts_with("system:")) {
            return fail(Stage::Config, format!("family `{}`: expected php:<n> or system:<path>", self.family));
        }
        let e = match degree_cap(self.t, self.p, self.d) {
            Some(e) if e <= self.max_e => e,
            Some(e) => return fail(Stage::Config, format!("e = {e} exceeds max_e = {}", self.max_e)),
            None => return fail(Stage::Config, "e overflows"),
        };
        Ok(Derived {
            ell: self.ell.unwrap_or(self.t * self.t + 2 * self.t),
            e,
            r: self.r.unwrap_or_else(|| round_budget(e, self.t)),
            r_const: R_CONST,
            protocol_c: PROTOCOL_C,
            epsilon: format!("1/(2({}+c)+5)", self.d),
        })
    }

    /// Seed for a stage: an explicit override or one derived from `seed`.
    pub fn stage_seed(&self, name: &str) -> u64 {
        self.stage_seeds
            .get(name)
            .copied()
            .unwrap_or_else(|| sub_seed(self.seed, name))
    }
}

/// Axioms, their polynomial system and the axiom→polynomial links.
#[derive(Debug, Clone)]
pub struct Instance {
    pub axioms: Vec<Formula>,
    pub system: PolySystem,
    pub links: HashMap<Formula, crate::poly::Polynomial>,
}

pub fn load_instance(family: &str, p: Prime) -> Result<Instance, PipelineError> {
    if let Some(n) = family.strip_prefix("php:") {
        let n: u32 = n
            .parse()
            .map_err(|_| PipelineError {
                stage: Stage::Config,
                cause: format!("bad instance size in `{family}`"),
            })?;
        let axioms = php_axioms(n).map_err(|e| PipelineError {
            stage: Stage::Config,
            cause: e.to_string(),
        })?;
        let system = php_polynomial_system(n, p);
        let links = axioms.iter().cloned().zip(system.polys.iter().cloned()).collect();
        return Ok(Instance { axioms, system, links });
    }
    let path = family.strip_prefix("system:").unwrap_or(family);
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError {
        stage: Stage::Config,
        cause: format!("{path}: {e}"),
    })?;
    let probe = PolySystem::parse(&text, p, usize::MAX).map_err(|e| PipelineError {
        stage: Stage::Config,
        cause: e.to_string(),
    })?;
    let deg = probe.polys.iter().map(|f| f.degree()).max().unwrap_or(0);
    let system = PolySystem::new(p, probe.polys, deg);
    let axioms: Vec<Formula> = system.polys.iter().map(poly_to_formula).collect();
    let links = axioms.iter().cloned().zip(system.polys.iter().cloned()).collect();
    Ok(Instance { axioms, system, links })
}

/// Read an axiom file (one formula per line), for the proof-checking CLI.
pub fn load_axioms(path: &Path) -> Result<Vec<Formula>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_formula_list(&text).map_err(|(line, e)| format!("{}:{line}: {e}", path.display()))
}

/// Build `Ω` from its textual spec.
pub fn build_omega(
    spec: &str,
    system: &PolySystem,
    default_seed: u64,
    max: usize,
) -> Result<Vec<Arc<dyn SimpleBob>>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.parse::<u64>().map_err(|_| format!("bad number `{s}` in Ω spec `{spec}`"));
    let seed_at = |i: usize| parts.get(i).map_or(Ok(default_seed), |s| num(s));
    let vars: Vec<_> = system.vars.iter().copied().collect();
    let random_alpha = |seed: u64| -> Assignment {
        vars.iter()
            .enumerate()
            .map(|(k, &v)| (v, crate::seeds::stable_hash(seed, &k.to_le_bytes()) & 1 == 1))
            .collect()
    };
    let omega: Vec<Arc<dyn SimpleBob>> = match parts[0] {
        "assignments" => {
            if vars.len() >= 63 || 1u64 << vars.len() > max as u64 {
                return Err(format!("2^{} assignments exceed max_omega = {max}", vars.len()));
            }
            all_assignments(&vars)
                .map(|a| Arc::new(AssignmentBob::new(a)) as Arc<dyn SimpleBob>)
                .collect()
        }
        "random" | "normalized" | "perturbed" => {
            let k = num(parts.get(1).ok_or(format!("Ω spec `{spec}` needs a count"))?)? as usize;
            if k == 0 || k > max {
                return Err(format!("Ω size {k} outside 1..={max}"));
            }
            match parts[0] {
                "random" => {
                    let seed = seed_at(2)?;
                    (0..k)
                        .map(|i| Arc::new(RandomBob { seed: sub_seed(seed, &i.to_string()) }) as Arc<dyn SimpleBob>)
                        .collect()
                }
                "normalized" => {
                    let seed = seed_at(2)?;
                    (0..k)
                        .map(|i| {
                            let raw = Arc::new(RandomBob { seed: sub_seed(seed, &i.to_string()) });
                            Arc::new(normalize_bob(raw, system)) as Arc<dyn SimpleBob>
                        })
                        .collect()
                }
                _ => {
                    let ppm = num(parts.get(2).ok_or(format!("Ω spec `{spec}` needs a rate"))?)? as u32;
                    let seed = seed_at(3)?;
                    (0..k)
                        .map(|i| {
                            let s = sub_seed(seed, &i.to_string());
                            Arc::new(PerturbedBob {
                                base: AssignmentBob::new(random_alpha(s)),
                                seed: s,
                                rate_ppm: ppm,
                            }) as Arc<dyn SimpleBob>
                        })
                        .collect()
                }
            }
        }
        other => return Err(format!("unknown Ω kind `{other}`")),
    };
    Ok(omega)
}

/// One H-game play, abbreviated for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaySummary {
    pub bob: usize,
    pub rounds: usize,
    pub alice_won: bool,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub questions: Option<Vec<(String, u32)>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeStats {
    pub materialized: bool,
    pub nodes: Option<usize>,
    pub depth: Option<usize>,
    pub cap_note: Option<String>,
    pub audit: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrReport {
    pub members: Vec<usize>,
    pub fraction: f64,
    pub disjunctions: usize,
    /// `2^{−ℓ}·(number of disjunctions)`, the union bound on the fraction.
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContrapositiveCheck {
    /// Bobs outside Err that Alice failed to defeat.
    pub alice_failures_outside_err: Vec<usize>,
    /// Of those, Bobs whose back-translated Liar beats Prover.
    pub liars_beating_prover: Vec<usize>,
    /// Bobs outside Err whose Liar beats Prover although Alice won.
    pub inconsistent: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub derived: Derived,
    pub instance: InstanceSummary,
    pub omega_size: usize,
    pub approx: ApproxSnapshot,
    pub err: ErrReport,
    pub coins: CoinSearch,
    pub tree: TreeStats,
    pub estimate: SuccessEstimate,
    pub estimate_err: SuccessEstimate,
    pub estimate_star: SuccessEstimate,
    pub histogram: BTreeMap<String, usize>,
    /// How the plays over Ω ended.
    pub ends: BTreeMap<String, usize>,
    pub max_rounds: usize,
    pub contrapositive: ContrapositiveCheck,
    pub plays: Vec<PlaySummary>,
    /// Milliseconds per stage; the only nondeterministic part.
    pub timings_ms: BTreeMap<String, u128>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceSummary {
    pub axioms: usize,
    pub polynomials: usize,
    pub variables: usize,
    pub proof_height: usize,
    pub proof_nodes: usize,
    pub proof_depth: usize,
}

/// The live objects built by the pipeline, for callers that want more than
/// the report.
pub struct PipelineArtifacts {
    pub report: RunReport,
    pub alice: Arc<dyn Alice>,
    pub tree: AnyTree,
    pub params: GameParamsH,
    pub omega: Vec<Arc<dyn SimpleBob>>,
    pub approx: Arc<ApproxContext>,
    pub prover: Arc<dyn Prover>,
    pub instance: Instance,
    pub proof: Proof,
}

/// Load or generate the refutation and check it.
pub fn obtain_proof(cfg: &ExperimentConfig, inst: &Instance, p: Prime) -> Result<Proof, PipelineError> {
    let proof = match &cfg.proof {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| PipelineError {
                stage: Stage::CheckProof,
                cause: format!("{}: {e}", path.display()),
            })?;
            parse_proof(&text).map_err(|e| PipelineError {
                stage: Stage::CheckProof,
                cause: e.to_string(),
            })?
        }
        None => refute_by_case_split(&inst.axioms, p).map_err(|e| PipelineError {
            stage: Stage::CheckProof,
            cause: e.to_string(),
        })?,
    };
    if proof.p != p {
        return fail(Stage::CheckProof, format!("proof is over F_{}, config over F_{p}", proof.p));
    }
    if let Err(v) = check_proof(&proof, &inst.axioms) {
        return fail(Stage::CheckProof, v);
    }
    if proof.max_formula_depth() > cfg.d {
        return fail(
            Stage::CheckProof,
            format!("proof uses depth {} above d = {}", proof.max_formula_depth(), cfg.d),
        );
    }
    Ok(proof)
}

pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineArtifacts, PipelineError> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, u128>| {
        timings.insert(name.to_string(), clock.elapsed().as_millis());
        clock = Instant::now();
    };

    let derived = cfg.derived()?;
    let p = cfg.prime()?;
    let inst = load_instance(&cfg.family, p)?;
    lap("config", &mut timings);

    let caps = SystemCaps::default();
    if let Err(v) = validate_system(&inst.system, &caps) {
        return fail(Stage::ValidateSystem, v);
    }
    lap("validate-system", &mut timings);

    let proof = obtain_proof(cfg, &inst, p)?;
    lap("check-proof", &mut timings);

    let tree_proof = if proof.is_tree() { proof.clone() } else { proof.unfold_to_tree() };
    let prover: Arc<dyn Prover> = Arc::new(ProofProver::new(&tree_proof).map_err(|e| PipelineError {
        stage: Stage::ExtractProver,
        cause: e,
    })?);
    lap("extract-prover", &mut timings);

    let omega = build_omega(&cfg.omega, &inst.system, cfg.stage_seed("omega"), cfg.max_omega)
        .map_err(|e| PipelineError {
            stage: Stage::Translate,
            cause: e,
        })?;
    let approx = Arc::new(ApproxContext::new(
        p,
        ApproxConfig {
            ell: derived.ell,
            retries: cfg.retries,
            seed: cfg.stage_seed("approx"),
            e: derived.e,
            monomial_cap: cfg.monomial_cap,
        },
        omega.clone(),
    ));
    let base = TranslatedAlice {
        prover: prover.clone(),
        approx: approx.clone(),
        axioms: inst.axioms.clone(),
        links: inst.links.clone(),
        t: cfg.t,
        coins: vec![false; cfg.t],
    };
    let params = GameParamsH::new(inst.system.clone(), derived.e, derived.r);
    lap("translate", &mut timings);

    let make = |coins: Vec<bool>| Arc::new(base.with_coins(coins)) as Arc<dyn Alice>;
    let coins = alice_coin_search(
        &make,
        cfg.t,
        &omega,
        &params,
        cfg.coin_exhaustive_bits,
        cfg.coin_samples,
        cfg.stage_seed("coins"),
    );
    let alice: Arc<dyn Alice> = Arc::new(base.with_coins(coins.coins.clone()));
    lap("coin-search", &mut timings);

    let (tree, cap) = build_tree(alice.clone(), &params, cfg.tree_node_cap);
    let tree_stats = match &tree {
        AnyTree::Full(t) => TreeStats {
            materialized: true,
            nodes: Some(t.node_count()),
            depth: Some(t.depth()),
            cap_note: None,
            audit: t.audit(derived.e, derived.r).err().map(|e| e.to_string()),
        },
        AnyTree::Lazy(_) => TreeStats {
            materialized: false,
            nodes: None,
            depth: None,
            cap_note: cap.map(|e| e.to_string()),
            audit: None,
        },
    };
    if let Some(a) = &tree_stats.audit {
        return fail(Stage::BuildTree, a);
    }
    lap("build-tree", &mut timings);

    let n = cfg.samples.unwrap_or(omega.len());
    if n == 0 {
        return fail(Stage::Estimate, "samples must be at least 1");
    }
    let est_seed = cfg.stage_seed("estimate");
    let estimate_err = success_probability(&tree, &omega, n, est_seed, ErrMode::Err, p);
    let estimate_star = success_probability(&tree, &omega, n, est_seed, ErrMode::StarErr, p);
    let estimate = match cfg.mode {
        ErrMode::Err => estimate_err.clone(),
        ErrMode::StarErr => estimate_star.clone(),
    };

    let mut histogram = BTreeMap::new();
    let mut ends = BTreeMap::new();
    let mut plays = Vec::new();
    let mut max_rounds = 0;
    let err_members = approx.err_set();
    let gparams = GameParamsG {
        d: cfg.d,
        t: cfg.t,
        p,
        axioms: inst.axioms.clone(),
    };
    let mut check = ContrapositiveCheck {
        alice_failures_outside_err: vec![],
        liars_beating_prover: vec![],
        inconsistent: vec![],
    };
    for (i, b) in omega.iter().enumerate() {
        let tr = referee_h(alice.as_ref(), b.as_ref(), &params);
        *histogram.entry(tr.outcome.kind().to_string()).or_insert(0) += 1;
        *ends.entry(end_kind(&tr.end).to_string()).or_insert(0) += 1;
        max_rounds = max_rounds.max(tr.rounds.len());
        if !err_members.contains(&i) {
            let liar_wins = !bob_as_liar(prover.as_ref(), b.as_ref(), &approx, &gparams).prover_won();
            if !tr.alice_won() {
                check.alice_failures_outside_err.push(i);
                if liar_wins {
                    check.liars_beating_prover.push(i);
                }
            } else if liar_wins {
                check.inconsistent.push(i);
            }
        }
        plays.push(PlaySummary {
            bob: i,
            rounds: tr.rounds.len(),
            alice_won: tr.alice_won(),
            outcome: serde_json::to_string(&tr.outcome).unwrap_or_default(),
            questions: cfg
                .record_transcripts
                .then(|| tr.rounds.iter().map(|(f, v)| (f.to_string(), *v)).collect()),
        });
    }
    let err = ErrReport {
        fraction: err_members.len() as f64 / omega.len() as f64,
        members: err_members.into_iter().collect(),
        disjunctions: approx.disjunction_count(),
        bound: 0.5f64.powi(derived.ell as i32) * approx.disjunction_count() as f64,
    };
    lap("estimate", &mut timings);

    let report = RunReport {
        config: cfg.clone(),
        derived,
        instance: InstanceSummary {
            axioms: inst.axioms.len(),
            polynomials: inst.system.polys.len(),
            variables: inst.system.vars.len(),
            proof_height: proof.height(),
            proof_nodes: proof.node_count(),
            proof_depth: proof.max_formula_depth(),
        },
        omega_size: omega.len(),
        approx: approx.snapshot(),
        err,
        coins,
        tree: tree_stats,
        estimate,
        estimate_err,
        estimate_star,
        histogram,
        ends,
        max_rounds,
        contrapositive: check,
        plays,
        timings_ms: timings,
    };
    Ok(PipelineArtifacts {
        report,
        alice,
        tree,
        params,
        omega,
        approx,
        prover,
        instance: inst,
        proof,
    })
}

fn end_kind(e: &HEnd) -> &'static str {
    match e {
        HEnd::Violation => "violation",
        HEnd::AliceStopped => "alice-stopped",
        HEnd::Budget => "budget",
        HEnd::Forfeit { .. } => "forfeit",
        HEnd::Contract { .. } => "contract",
    }
}

/// The report as JSON lines: one record per section, then a summary.
pub fn report_lines(r: &RunReport) -> Vec<String> {
    let rec = |kind: &str, v: serde_json::Value| serde_json::json!({ "record": kind, "data": v }).to_string();
    let mut out = vec![
        rec("config", serde_json::json!({ "config": r.config, "derived": r.derived })),
        rec("instance", serde_json::to_value(&r.instance).unwrap()),
        rec("approx", serde_json::to_value(&r.approx).unwrap()),
        rec("err", serde_json::to_value(&r.err).unwrap()),
        rec("coins", serde_json::to_value(&r.coins).unwrap()),
        rec("tree", serde_json::to_value(&r.tree).unwrap()),
    ];
    for play in &r.plays {
        out.push(rec("play", serde_json::to_value(play).unwrap()));
    }
    out.push(rec("contrapositive", serde_json::to_value(&r.contrapositive).unwrap()));
    out.push(rec(
        "summary",
        serde_json::json!({
            "estimate": r.estimate,
            "estimate_err": r.estimate_err,
            "estimate_star": r.estimate_star,
            "histogram": r.histogram,
            "ends": r.ends,
            "max_rounds": r.max_rounds,
            "omega_size": r.omega_size,
            "timings_ms": r.timings_ms,
        }),
    ));
    out
}

/// Estimates as CSV rows.
pub fn write_estimates_csv(path: &Path, rows: &[&SuccessEstimate]) -> Result<(), PipelineError> {
    let io = |e: csv::Error| PipelineError {
        stage: Stage::Output,
        cause: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| PipelineError {
        stage: Stage::Output,
        cause: e.to_string(),
    })
}

/// Evaluate a tree on every Bob; used to compare trees functionally.
pub fn tree_signature(tree: &dyn TreeEval, bobs: &[Arc<dyn SimpleBob>]) -> Vec<String> {
    bobs.iter()
        .map(|b| serde_json::to_string(&tree.evaluate(b.as_ref())).unwrap_or_default())
        .collect()
}
