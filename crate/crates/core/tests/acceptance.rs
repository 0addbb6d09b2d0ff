//! Acceptance criteria 1 to 9. Runs without the libtest harness so that the
//! one-line verdicts show up in plain `cargo test` output.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use frege_search::field::Fp;
use frege_search::formula::{php_axioms, Assignment, Formula};
use frege_search::g_game::{referee_g, AssignmentLiar, GameParamsG, GreedyConsistentLiar, Liar, ProofProver};
use frege_search::h_game::approx::{rs_agreement_exact_at, rs_agreement_rate};
use frege_search::h_game::normalize::normalize_bob;
use frege_search::h_game::protocols::{m0, m0_bound, m1, m1_bound, m2, m3, m4, protocol_round_bound, PROTOCOL_C};
use frege_search::h_game::{
    referee_h, AnswerSource, AssignmentBob, GameParamsH, PerturbedBob, RandomBob, Session, SimpleBob, Stop, TableBob,
    Vigilant,
};
use frege_search::harness::{report_lines, run_pipeline, tree_signature, PipelineArtifacts};
use frege_search::poly::{all_assignments, php_polynomial_system, Monomial, PolySystem, Polynomial};
use frege_search::proof::{check_proof, parse_proof, refute_php1, write_proof};
use frege_search::search_tree::{AnyTree, ErrMode, ErrorDescriptor, SearchTree};

use common::*;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("proof checking", c1_proof_checking),
        ("soundness oracle", c2_soundness),
        ("prover wins the G-game", c3_prover_wins),
        ("protocol bounds", c4_protocols),
        ("approximation agreement", c5_agreement),
        ("end-to-end pipeline", c6_pipeline),
        ("algebra laws", c7_algebra),
        ("normalization", c8_normalization),
        ("reproducibility", c9_reproducibility),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !only.is_empty() && !only.iter().any(|o| id.contains(o.as_str()) || name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("{id} ({name}): pass [{secs:.2}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} ({name}): FAIL [{secs:.2}s] {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        return Err(format!("{what} took {took:?}, limit {limit:?}"));
    }
    Ok(())
}

// ---------------------------------------------------------------- 1

/// Single-node mutations of a proof file: rule tag, premise swap and
/// premise-index change.
fn proof_mutations(text: &str) -> Vec<(String, String)> {
    let lines: Vec<&str> = text.lines().collect();
    let node_lines: Vec<usize> = (0..lines.len())
        .filter(|&i| lines[i].starts_with('n') && lines[i].contains(" : "))
        .collect();
    let sequent = |label: &str| {
        node_lines
            .iter()
            .map(|&i| lines[i])
            .find(|l| l.split_whitespace().next() == Some(label))
            .and_then(|l| l.split_once(" : "))
            .map(|(_, s)| s.to_string())
    };
    let groups: [&[&str]; 3] = [
        &["cut", "or-left", "not-left", "not-right"],
        &["weaken", "contract", "exchange"],
        &["axiom", "logical", "mod-axiom"],
    ];
    let mut out = Vec::new();
    let mut replace = |i: usize, new: String, what: String| {
        let mut ls: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        ls[i] = new;
        out.push((what, ls.join("\n") + "\n"));
    };
    for &i in &node_lines {
        let (head, seq) = lines[i].split_once(" : ").unwrap();
        let toks: Vec<&str> = head.split_whitespace().collect();
        let (label, tag) = (toks[0], toks[1]);
        for group in groups.iter().filter(|g| g.contains(&tag)) {
            for &other in group.iter().filter(|&&t| t != tag) {
                let new = format!("{label} {other}{} : {seq}", &head[label.len() + 1 + tag.len()..]);
                replace(i, new, format!("{label}: tag {tag} -> {other}"));
            }
        }
        let Some(from) = head.find(" from ") else { continue };
        let prems: Vec<&str> = head[from + 6..].split_whitespace().collect();
        if prems.len() >= 2 {
            let mut swapped = prems.clone();
            swapped.reverse();
            replace(
                i,
                format!("{} from {} : {seq}", &head[..from], swapped.join(" ")),
                format!("{label}: premises reversed"),
            );
        }
        let own: usize = label[1..].parse().unwrap();
        for (k, prem) in prems.iter().enumerate() {
            let target = (0..own)
                .rev()
                .map(|j| format!("n{j}"))
                .find(|j| j != prem && sequent(j) != sequent(prem));
            if let Some(t) = target {
                let mut ps: Vec<String> = prems.iter().map(|s| s.to_string()).collect();
                ps[k] = t.clone();
                replace(
                    i,
                    format!("{} from {} : {seq}", &head[..from], ps.join(" ")),
                    format!("{label}: premise {k} {prem} -> {t}"),
                );
            }
        }
    }
    out
}

fn c1_proof_checking() -> Verdict {
    let start = Instant::now();
    let text = read_fixture("php1.proof");
    let axioms = fixture_axioms("php1.axioms");
    ensure!(text == write_proof(&refute_php1()), "fixture differs from the built-in PHP_1 refutation");
    let proof = parse_proof(&text).map_err(|e| e.to_string())?;
    check_proof(&proof, &axioms).map_err(|e| format!("fixture rejected: {e}"))?;
    let muts = proof_mutations(&text);
    ensure!(muts.len() >= 50, "only {} mutations", muts.len());
    let mut by_parse = 0;
    for (what, m) in &muts {
        match parse_proof(m) {
            Err(_) => by_parse += 1,
            Ok(pf) => ensure!(check_proof(&pf, &axioms).is_err(), "mutation accepted: {what}"),
        }
    }
    within(start, Duration::from_secs(1), "checking")?;
    Ok(format!(
        "fixture accepted; {} mutations rejected ({} at parse time)",
        muts.len(),
        by_parse
    ))
}

// ---------------------------------------------------------------- 2

fn c2_soundness() -> Verdict {
    let mut summary = Vec::new();
    for name in ["php1", "php2", "toy"] {
        let proof = fixture_proof(&format!("{name}.proof"));
        let axioms = fixture_axioms(&format!("{name}.axioms"));
        check_proof(&proof, &axioms).map_err(|e| format!("{name}: {e}"))?;
        let vars: Vec<_> = axioms.iter().flat_map(Formula::vars).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        ensure!(vars.len() <= 12, "{name}: {} variables", vars.len());
        let mut n = 0;
        for alpha in all_assignments(&vars) {
            n += 1;
            let falsified = axioms.iter().any(|a| !a.eval(&alpha).unwrap());
            ensure!(falsified, "{name}: assignment satisfies every axiom");
        }
        summary.push(format!("{name} {n}/{n}"));
    }
    Ok(summary.join(", "))
}

// ---------------------------------------------------------------- 3

fn c3_prover_wins() -> Verdict {
    let start = Instant::now();
    let proof = fixture_proof("php1.proof");
    let axioms = fixture_axioms("php1.axioms");
    ensure!(proof.is_tree(), "fixture is not tree-like");
    let prover = ProofProver::new(&proof)?;
    let height = proof.height();
    let params = GameParamsG {
        d: proof.d,
        t: height,
        p: proof.p,
        axioms: axioms.clone(),
    };
    let vars: Vec<_> = php_axioms(1).unwrap().iter().flat_map(Formula::vars).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut liars: Vec<(String, Box<dyn Liar>)> = all_assignments(&vars)
        .map(|alpha| (format!("assignment {alpha:?}"), Box::new(AssignmentLiar { alpha }) as Box<dyn Liar>))
        .collect();
    ensure!(liars.len() == 4, "expected 4 assignment Liars");
    for seed in 0..1000 {
        liars.push((format!("greedy {seed}"), Box::new(GreedyConsistentLiar::new(seed, &axioms, proof.p))));
    }
    let mut max_rounds = 0;
    for (name, liar) in liars.iter_mut() {
        let tr = referee_g(&prover, liar.as_mut(), &params);
        ensure!(tr.prover_won(), "{name} beat Prover: {:?}", tr.end);
        ensure!(tr.rounds.len() <= height, "{name}: {} rounds above height {height}", tr.rounds.len());
        max_rounds = max_rounds.max(tr.rounds.len());
    }
    within(start, Duration::from_secs(10), "1004 games")?;
    Ok(format!("1004/1004 Liars defeated, at most {max_rounds} rounds (height {height})"))
}

// ---------------------------------------------------------------- 4

const PROTO_VARS: u32 = 6;
const PROTO_E: usize = 8;

fn proto_params(p: u32) -> GameParamsH {
    GameParamsH::new(PolySystem::new(prime(p), vec![], 2), PROTO_E, 100_000)
}

/// A Bob that answers honestly under a random assignment except on `table`.
fn engineered(rng: &mut ChaCha8Rng, table: Vec<(Polynomial, Fp)>) -> TableBob {
    let alpha = random_assignment(rng, (0..PROTO_VARS).map(x));
    table
        .into_iter()
        .fold(TableBob::new(Arc::new(AssignmentBob::new(alpha))), |b, (f, v)| b.with(f, v))
}

#[derive(Default)]
struct ProtoTally {
    runs: usize,
    wins: usize,
    assertions: usize,
    max_rounds: usize,
}

enum Outcome {
    Skip,
    Done { rounds: usize, bound: usize, won: bool },
}

fn run_protocol(
    name: &str,
    tally: &mut ProtoTally,
    mut one: impl FnMut(&mut ChaCha8Rng) -> Result<Outcome, String>,
) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(frege_search::seeds::sub_seed(4, name));
    let mut attempts = 0;
    while tally.runs < 200 {
        attempts += 1;
        ensure!(attempts < 20_000, "{name}: could not set up 200 preconditions");
        match one(&mut rng)? {
            Outcome::Skip => {}
            Outcome::Done { rounds, bound, won } => {
                ensure!(rounds <= bound, "{name}: {rounds} rounds above the bound {bound}");
                tally.runs += 1;
                tally.max_rounds = tally.max_rounds.max(rounds);
                if won {
                    tally.wins += 1;
                } else {
                    tally.assertions += 1;
                }
            }
        }
    }
    Ok(())
}

fn uniform_bound(polys: &[&Polynomial], p: u32, k: usize) -> usize {
    let e = polys.iter().map(|f| f.degree()).max().unwrap_or(0).max(1);
    protocol_round_bound(e, PROTO_VARS as usize, p, k)
}

/// Ask the precondition questions; `None` when an answer already broke a
/// rule, in which case the sample is redrawn.
fn setup(s: &mut Session<'_>, qs: &[&Polynomial]) -> Option<()> {
    for q in qs {
        s.ask(q).ok()?;
    }
    Some(())
}

fn classify<T>(name: &str, r: Result<T, Stop>) -> Result<Option<T>, String> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Stop::Violation(_)) => Ok(None),
        Err(other) => Err(format!("{name} ended with {other:?}")),
    }
}

fn c4_protocols() -> Verdict {
    let mut report = Vec::new();

    for p in [2u32, 3] {
        let pr = proto_params(p);
        let pp = prime(p);

        let mut t = ProtoTally::default();
        run_protocol(&format!("m0/{p}"), &mut t, |rng| {
            let u = rng.gen_range(2..=16);
            let mut seen = HashSet::new();
            while seen.len() < u {
                let m = random_monomial(rng, PROTO_VARS, 3);
                if m.degree() >= 1 {
                    seen.insert(m);
                }
            }
            let summands: Vec<Polynomial> = seen.into_iter().map(|m| Polynomial::term(pp, m, rng.gen_range(1..p))).collect();
            let total = summands.iter().fold(Polynomial::zero(pp), |a, f| &a + f);
            let v = rng.gen_range(1..p);
            let bob = engineered(rng, vec![(total.clone(), v)]);
            let mut s = Session::new(&pr, AnswerSource::Bob(&bob));
            if setup(&mut s, &[&total]).is_none() {
                return Ok(Outcome::Skip);
            }
            let before = s.round_count();
            let r = classify("M0", m0(&mut s, &summands))?;
            if let Some(j) = r {
                ensure!(s.answered(&summands[j]).is_some_and(|v| v != 0), "M0 returned a zero summand");
            }
            Ok(Outcome::Done {
                rounds: s.round_count() - before,
                bound: m0_bound(u),
                won: r.is_none(),
            })
        })?;
        report.push(format!("M0/F{p} {}+{} max {}", t.assertions, t.wins, t.max_rounds));

        let mut t = ProtoTally::default();
        run_protocol(&format!("m1/{p}"), &mut t, |rng| {
            let f = random_nonconstant(rng, pp, PROTO_VARS, 5, 2);
            let g = random_nonconstant(rng, pp, PROTO_VARS, 5, 2);
            let fg = f.mul(&g).unwrap();
            if f == g || fg == f || fg == g || fg.degree() == 0 {
                return Ok(Outcome::Skip);
            }
            let (a, b) = (rng.gen_range(0..p), rng.gen_range(0..p));
            let c = (pp.mul(a, b) + rng.gen_range(1..p)) % p;
            let bob = engineered(rng, vec![(f.clone(), a), (g.clone(), b), (fg.clone(), c)]);
            let mut s = Session::new(&pr, AnswerSource::Bob(&bob));
            if setup(&mut s, &[&f, &g, &fg]).is_none() {
                return Ok(Outcome::Skip);
            }
            let before = s.round_count();
            let r = classify("M1", m1(&mut s, &f, &g))?;
            ensure!(r.is_none(), "M1 returned without a violation");
            let rounds = s.round_count() - before;
            let fine = m1_bound(f.num_terms(), g.num_terms(), p);
            ensure!(rounds <= fine, "M1: {rounds} rounds above the term bound {fine}");
            Ok(Outcome::Done {
                rounds,
                bound: uniform_bound(&[&fg], p, 2),
                won: true,
            })
        })?;
        report.push(format!("M1/F{p} {}+{} max {}", t.assertions, t.wins, t.max_rounds));

        let mut t = ProtoTally::default();
        run_protocol(&format!("m2/{p}"), &mut t, |rng| {
            let k = rng.gen_range(2..=3);
            let factors: Vec<Polynomial> = (0..k).map(|_| random_nonconstant(rng, pp, PROTO_VARS, 3, 2)).collect();
            let all = factors.iter().try_fold(Polynomial::one(pp), |a, f| a.mul(f)).unwrap();
            if all.degree() == 0 || all.degree() > PROTO_E || factors.contains(&all) {
                return Ok(Outcome::Skip);
            }
            let j = rng.gen_range(0..k);
            let mut table = vec![(all.clone(), rng.gen_range(1..p))];
            if rng.gen_bool(0.5) {
                table.push((factors[j].clone(), 0));
            }
            let bob = engineered(rng, table);
            let mut s = Session::new(&pr, AnswerSource::Bob(&bob));
            if setup(&mut s, &[&all]).is_none() {
                return Ok(Outcome::Skip);
            }
            let before = s.round_count();
            let r = classify("M2", m2(&mut s, &factors, j))?;
            if r.is_some() {
                ensure!(s.answered(&factors[j]).is_some_and(|v| v != 0), "M2 accepted a zero factor");
            }
            Ok(Outcome::Done {
                rounds: s.round_count() - before,
                bound: uniform_bound(&[&all], p, k),
                won: r.is_none(),
            })
        })?;
        report.push(format!("M2/F{p} {}+{} max {}", t.assertions, t.wins, t.max_rounds));

        let mut t = ProtoTally::default();
        run_protocol(&format!("m3/{p}"), &mut t, |rng| {
            let k = rng.gen_range(2..=3);
            let factors: Vec<Polynomial> = (0..k).map(|_| random_nonconstant(rng, pp, PROTO_VARS, 3, 2)).collect();
            let all = factors.iter().try_fold(Polynomial::one(pp), |a, f| a.mul(f)).unwrap();
            if all.degree() == 0 || all.degree() > PROTO_E || factors.contains(&all) {
                return Ok(Outcome::Skip);
            }
            let mut table = vec![(all.clone(), 0)];
            for f in &factors {
                if rng.gen_bool(0.5) {
                    table.push((f.clone(), rng.gen_range(1..p)));
                }
            }
            let bob = engineered(rng, table);
            let mut s = Session::new(&pr, AnswerSource::Bob(&bob));
            if setup(&mut s, &[&all]).is_none() {
                return Ok(Outcome::Skip);
            }
            let before = s.round_count();
            let r = classify("M3", m3(&mut s, &factors))?;
            if let Some(j) = r {
                ensure!(s.answered(&factors[j]) == Some(0), "M3 returned a nonzero factor");
            }
            Ok(Outcome::Done {
                rounds: s.round_count() - before,
                bound: uniform_bound(&[&all], p, k),
                won: r.is_none(),
            })
        })?;
        report.push(format!("M3/F{p} {}+{} max {}", t.assertions, t.wins, t.max_rounds));
    }

    let pr = proto_params(3);
    let pp = prime(3);
    let mut t = ProtoTally::default();
    run_protocol("m4/3", &mut t, |rng| {
        let f = random_nonconstant(rng, pp, PROTO_VARS, 5, 3);
        let f2 = f.mul(&f).unwrap();
        if f2 == f || f2.degree() == 0 || f2.degree() > PROTO_E {
            return Ok(Outcome::Skip);
        }
        let mut table = vec![(f2.clone(), 2)];
        if rng.gen_bool(0.5) {
            table.push((f.clone(), rng.gen_range(0..3)));
        }
        let bob = engineered(rng, table);
        let mut s = Session::new(&pr, AnswerSource::Bob(&bob));
        if setup(&mut s, &[&f2]).is_none() {
            return Ok(Outcome::Skip);
        }
        let before = s.round_count();
        let r = classify("M4", m4(&mut s, &f))?;
        ensure!(r.is_none(), "M4 returned without a violation");
        Ok(Outcome::Done {
            rounds: s.round_count() - before,
            bound: uniform_bound(&[&f2], 3, 2),
            won: true,
        })
    })?;
    report.push(format!("M4/F3 {}+{} max {}", t.assertions, t.wins, t.max_rounds));

    Ok(format!(
        "C = {PROTOCOL_C}; runs as assertions+violations: {}",
        report.join(", ")
    ))
}

// ---------------------------------------------------------------- 5

fn c5_agreement() -> Verdict {
    let start = Instant::now();
    let (agree, total) = rs_agreement_exact_at(2, 1, prime(2), &[true, true]);
    ensure!(2 * agree == total, "exact cell gives {agree}/{total}, not 1/2");
    let cells: Vec<(u32, usize, usize)> = [2u32, 3]
        .into_iter()
        .flat_map(|p| (2..=8).flat_map(move |u| (1..=6).map(move |l| (p, u, l))))
        .collect();
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .chunks(cells.len().div_ceil(8))
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&(p, u, l)| {
                            let seed = frege_search::seeds::sub_seed(5, &format!("{p}/{u}/{l}"));
                            rs_agreement_rate(u, l, prime(p), 2000, seed)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect::<Vec<_>>()
    });
    let mut worst = f64::INFINITY;
    for est in &results {
        let margin = est.rate - (est.floor - 3.0 * est.sigma);
        ensure!(
            margin >= 0.0,
            "p={} u={} l={}: rate {:.5} below {:.5} - 3*{:.5}",
            est.p,
            est.u,
            est.ell,
            est.rate,
            est.floor,
            est.sigma
        );
        worst = worst.min(margin);
    }
    within(start, Duration::from_secs(120), "agreement grid")?;
    Ok(format!(
        "exact cell {agree}/{total}; {} cells x 2000 J-tuples, smallest margin {worst:.5}",
        results.len()
    ))
}

// ---------------------------------------------------------------- 6

fn full_tree(art: &PipelineArtifacts) -> Result<&SearchTree, String> {
    match &art.tree {
        AnyTree::Full(t) => Ok(t),
        AnyTree::Lazy(_) => Err("tree was not materialized".into()),
    }
}

/// Degree cap and no repeated label on any root-to-leaf path, checked
/// without `SearchTree::audit`.
fn independent_audit(t: &SearchTree, e: usize, path: &mut Vec<Polynomial>) -> Result<(), String> {
    if let SearchTree::Inner { label, children } = t {
        ensure!(label.degree() <= e, "label {label} has degree {} > {e}", label.degree());
        ensure!(!path.contains(label), "label {label} repeats on a path");
        path.push(label.clone());
        for c in children {
            independent_audit(c, e, path)?;
        }
        path.pop();
    }
    Ok(())
}

fn c6_pipeline() -> Verdict {
    let start = Instant::now();
    let art = run_pipeline(&php1_config("")).map_err(|e| e.to_string())?;
    let tree = full_tree(&art)?;
    let e = art.report.derived.e;
    tree.audit(e, art.params.r).map_err(|err| err.to_string())?;
    independent_audit(tree, e, &mut Vec::new())?;
    let sys = php_polynomial_system(1, prime(2));
    let mut n = 0;
    let vars: Vec<_> = sys.vars.iter().copied().collect();
    for alpha in all_assignments(&vars) {
        n += 1;
        let bob = AssignmentBob::new(alpha.clone());
        let leaf = tree.evaluate(&bob);
        let ErrorDescriptor::B4 { f } = &leaf else {
            return Err(format!("leaf for {alpha:?} is {leaf:?}"));
        };
        ensure!(sys.contains(f), "{f} is not a system polynomial");
        ensure!(f.eval(&alpha).unwrap() != 0, "{f} vanishes at {alpha:?}");
    }
    ensure!(n == 4, "{n} assignments");
    let est = &art.report.estimate;
    ensure!(est.exhaustive && est.n == 4 && est.estimate == 1.0, "estimate {est:?}");
    let star = run_pipeline(&php1_config("mode = \"star-err\"")).map_err(|e| e.to_string())?;
    let s = &star.report.estimate;
    ensure!(s.mode == ErrMode::StarErr, "second run not in *Err mode");
    ensure!(s.estimate >= est.estimate, "*Err {} below Err {}", s.estimate, est.estimate);
    within(start, Duration::from_secs(60), "pipeline")?;
    Ok(format!(
        "4/4 B4 leaves, estimate {} (Err) and {} (*Err), {} nodes, depth {}, e = {e}",
        est.estimate,
        s.estimate,
        tree.node_count(),
        tree.depth()
    ))
}

// ---------------------------------------------------------------- 7

fn c7_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let primes = [2u32, 3, 5];
    for case in 0..10_000 {
        let p = prime(primes[case % 3]);
        let nv = rng.gen_range(1..=10);
        let f = random_poly(&mut rng, p, nv, 5, 3);
        let g = random_poly(&mut rng, p, nv, 5, 3);
        let h = random_poly(&mut rng, p, nv, 4, 2);
        let alpha: Assignment = random_assignment(&mut rng, (0..nv).map(x));
        let zero = Polynomial::zero(p);
        let one = Polynomial::one(p);
        let m = |a: &Polynomial, b: &Polynomial| a.mul(b).unwrap();
        let at = |q: &Polynomial| q.eval(&alpha).unwrap();
        let ctx = || format!("case {case}, p = {p}: f = {f}, g = {g}, h = {h}");

        ensure!(&(&f + &g) + &h == &f + &(&g + &h), "additive associativity, {}", ctx());
        ensure!(&f + &g == &g + &f, "additive commutativity, {}", ctx());
        ensure!(&f + &zero == f, "additive identity, {}", ctx());
        ensure!((&f + &(-&f)).is_zero(), "additive inverse, {}", ctx());
        ensure!(m(&m(&f, &g), &h) == m(&f, &m(&g, &h)), "multiplicative associativity, {}", ctx());
        ensure!(m(&f, &g) == m(&g, &f), "multiplicative commutativity, {}", ctx());
        ensure!(m(&f, &one) == f, "multiplicative identity, {}", ctx());
        ensure!(m(&f, &(&g + &h)) == &m(&f, &g) + &m(&f, &h), "distributivity, {}", ctx());

        ensure!(at(&(&f + &g)) == p.add(at(&f), at(&g)), "evaluation of a sum, {}", ctx());
        ensure!(at(&m(&f, &g)) == p.mul(at(&f), at(&g)), "evaluation of a product, {}", ctx());
        ensure!(at(&(-&f)) == p.neg(at(&f)), "evaluation of a negation, {}", ctx());

        let fp1 = f.pow(p.get() - 1).unwrap();
        let expect = (at(&f) != 0) as Fp;
        ensure!(at(&fp1) == expect, "f^(p-1) at a point, {}", ctx());
        ensure!(m(&fp1, &fp1) == fp1, "f^(p-1) is idempotent, {}", ctx());
        ensure!(f.pow(p.get()).unwrap() == f, "f^p = f, {}", ctx());
    }
    Ok("10000 cases over F_2, F_3, F_5 with up to 10 variables".into())
}

// ---------------------------------------------------------------- 8

fn audit_bob(bob: &dyn SimpleBob, sys: &PolySystem, rng: &mut ChaCha8Rng, probes: usize) -> Result<(), String> {
    let p = sys.p;
    let vars: Vec<_> = sys.vars.iter().copied().collect();
    let nv = vars.len();
    for q in &sys.polys {
        ensure!(bob.value(q) == 0, "B4 fails on {q}");
    }
    let mono = |rng: &mut ChaCha8Rng| {
        let deg = rng.gen_range(0..=3);
        Monomial::new((0..deg).map(|_| vars[rng.gen_range(0..nv)]))
    };
    for _ in 0..probes {
        let c = rng.gen_range(0..p.get());
        ensure!(bob.value(&Polynomial::constant(p, c as u64)) == c, "B1 fails on constant {c}");
        let v = vars[rng.gen_range(0..nv)];
        ensure!(bob.value(&Polynomial::var(p, v)) <= 1, "B1 fails on {v}");
        let (a, b) = (mono(rng), mono(rng));
        let ab = a.mul(&b);
        let val = |m: &Monomial| bob.value(&Polynomial::monomial(p, m.clone()));
        ensure!(p.mul(val(&a), val(&b)) == val(&ab), "B3 fails on {a} * {b}");
    }
    Ok(())
}

fn raw_bob(i: u64, sys: &PolySystem, rng: &mut ChaCha8Rng) -> Arc<dyn SimpleBob> {
    if i.is_multiple_of(2) {
        Arc::new(RandomBob { seed: i })
    } else {
        Arc::new(PerturbedBob {
            base: AssignmentBob::new(random_assignment(rng, sys.vars.iter().copied())),
            seed: i,
            rate_ppm: rng.gen_range(0..500_000),
        })
    }
}

fn c8_normalization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let systems = [php_polynomial_system(2, prime(2)), php_polynomial_system(2, prime(3))];
    for i in 0..1000u64 {
        let sys = &systems[i as usize % 2];
        let raw = raw_bob(i, sys, &mut rng);
        let bob = normalize_bob(raw, sys);
        audit_bob(&bob, sys, &mut rng, 1000).map_err(|e| format!("Bob {i} over F_{}: {e}", sys.p))?;
    }

    let mut pairs = 0;
    let mut played = 0;
    let mut by_end: BTreeMap<String, usize> = BTreeMap::new();
    for (extra, bobs) in [("", 120u64), ("p = 3\n", 120)] {
        let cfg = if extra.is_empty() {
            php1_config("")
        } else {
            config("family = \"php:1\"\np = 3\nd = 2\nt = 4\n")
        };
        let art = run_pipeline(&cfg).map_err(|e| e.to_string())?;
        let sys = art.params.system.clone();
        let vigilant = Vigilant(art.alice.as_ref());
        for i in 0..bobs {
            let raw = raw_bob(1000 + i, &sys, &mut rng);
            played += 1;
            let plain = referee_h(art.alice.as_ref(), raw.as_ref(), &art.params);
            if !plain.alice_won() {
                continue;
            }
            pairs += 1;
            let repaired = normalize_bob(raw.clone(), &sys);
            let v = referee_h(&vigilant, &repaired, &art.params);
            ensure!(
                v.alice_won(),
                "F_{}: Bob {i} lost to A but vigilant A lost to its repair ({:?})",
                sys.p,
                v.end
            );
            *by_end.entry(v.outcome.kind().to_string()).or_default() += 1;
        }
    }
    ensure!(pairs >= 100, "only {pairs} paired runs where A won");
    Ok(format!(
        "1000 repaired Bobs audited with 1000 probes each; {pairs}/{played} paired runs, vigilant wins by {by_end:?}"
    ))
}

// ---------------------------------------------------------------- 9

fn stable_lines(art: &PipelineArtifacts) -> Vec<String> {
    report_lines(&art.report)
        .into_iter()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(&l).unwrap();
            if let Some(d) = v.get_mut("data").and_then(|d| d.as_object_mut()) {
                d.remove("timings_ms");
            }
            v.to_string()
        })
        .collect()
}

fn c9_reproducibility() -> Verdict {
    let configs = [
        php1_config("record_transcripts = true\n"),
        config(
            "family = \"php:1\"\np = 3\nd = 2\nt = 4\nomega = \"perturbed:48:200000\"\nseed = 99\nsamples = 32\nrecord_transcripts = true\n",
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut lines = 0;
    for cfg in &configs {
        let a = run_pipeline(cfg).map_err(|e| e.to_string())?;
        let b = run_pipeline(cfg).map_err(|e| e.to_string())?;
        let (la, lb) = (stable_lines(&a), stable_lines(&b));
        ensure!(la == lb, "reports differ for {}", cfg.family);
        ensure!(a.report.estimate == b.report.estimate, "estimates differ");
        ensure!(a.report.plays == b.report.plays, "transcripts differ");
        let sys = a.params.system.clone();
        let probes: Vec<Arc<dyn SimpleBob>> = (0..1000).map(|i| raw_bob(5000 + i, &sys, &mut rng)).collect();
        let (sa, sb) = (tree_signature(&a.tree, &probes), tree_signature(&b.tree, &probes));
        if let Some(i) = (0..sa.len()).find(|&i| sa[i] != sb[i]) {
            return Err(format!("{}: trees differ on probe Bob {i}: {} vs {}", cfg.family, sa[i], sb[i]));
        }
        for (bob, (pa, pb)) in probes.iter().zip(a.omega.iter().zip(b.omega.iter())).take(16) {
            let (ta, tb) = (referee_h(a.alice.as_ref(), pa.as_ref(), &a.params), referee_h(b.alice.as_ref(), pb.as_ref(), &b.params));
            ensure!(ta.rounds == tb.rounds && ta.outcome == tb.outcome, "H transcripts differ");
            let (tc, td) = (referee_h(a.alice.as_ref(), bob.as_ref(), &a.params), referee_h(b.alice.as_ref(), bob.as_ref(), &b.params));
            ensure!(tc.rounds == td.rounds, "H transcripts differ on a probe Bob");
        }
        lines += la.len();
    }
    Ok(format!(
        "2 configurations run twice: {lines} report lines, trees equal on 1000 probe Bobs each"
    ))
}
