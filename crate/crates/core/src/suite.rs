//! Property suite: seeded brute-force checks of every construction.
//!
//! Criterion `k` draws its randomness from stream `k` of the run seed, so
//! each criterion can be run alone and still reproduce the full-suite lines.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::bushy::{
    extract_nice, extract_twocol, kappa, kappa_recurrence, kappa_sequence, ncol, verify_extraction,
    verify_extraction_within, BushyShape, Coloring,
};
use crate::code::{binary_length, selfdelim_decode, selfdelim_encode};
use crate::corpus::{
    random_adversary, random_kappa_tree, random_omega_context, random_pistar, random_selection_input, random_splitting_instance,
    random_splitting_subset, random_table, random_weak_tree, sub_rng, CorpusRng, OmegaShape, TableShape,
};
use crate::cupping::{chain_survives, exhaustive_survivors, find_pi_member_chain, materialize, AdversaryBundle};
use crate::error::Result;
use crate::functional::{hat_level_tree, image_tree, pullback_tree, splitting_tree_violation, Axiom, FunctionalTable};
use crate::report::Report;
use crate::smc::{
    build_tprime, enumerate_pi, exhaustive_selection_exists, phi_from_tree, select_extensions, selection_violations,
    tprime_violations, OmegaContext, SelectionInput,
};
use crate::strings::BinaryString;
use crate::thin::{
    encode_sequence, is_thin, k_of, k_prime_of, normalize_bound, rescale_trace, spaced_level, spaced_tail_sum,
    splitting_to_thin, thin_from_trace, trace_from_thin, truncation_functional, TraceSystem,
};
use crate::traceable::{
    diagonalization_failures, extract_trace, final_node_violations, node_bound, provenance_failures, run_to,
    step_identity_holds, trace_bound,
};
use crate::tree::{FiniteTree, StagedTree};

pub const DEFAULT_SEED: u64 = 20_240_601;

pub const CRITERIA: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum SuiteLevel {
    Fast,
    Full,
}

impl std::fmt::Display for SuiteLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Fast => "fast",
            Self::Full => "full",
        })
    }
}

struct Sizes {
    twocol_exhaustive_max: usize,
    twocol_samples: usize,
    nice_samples: usize,
    random_bundles: usize,
    crafted_bundles: usize,
    member_depth: usize,
    traceable_runs: usize,
    horizon: usize,
    thin_trees: usize,
    split_pairs: usize,
    selection_configs: usize,
    stagings: usize,
    image_trees: usize,
}

impl Sizes {
    fn of(level: SuiteLevel) -> Self {
        match level {
            SuiteLevel::Full => Self {
                twocol_exhaustive_max: 2,
                twocol_samples: 10_000,
                nice_samples: 10_000,
                random_bundles: 70,
                crafted_bundles: 30,
                member_depth: 3,
                traceable_runs: 100,
                horizon: 8,
                thin_trees: 1000,
                split_pairs: 1000,
                selection_configs: 50,
                stagings: 50,
                image_trees: 1000,
            },
            SuiteLevel::Fast => Self {
                twocol_exhaustive_max: 1,
                twocol_samples: 200,
                nice_samples: 50,
                random_bundles: 6,
                crafted_bundles: 3,
                member_depth: 2,
                traceable_runs: 4,
                horizon: 6,
                thin_trees: 40,
                split_pairs: 40,
                selection_configs: 6,
                stagings: 6,
                image_trees: 40,
            },
        }
    }
}

/// Records a counted check: PASS with the count, or FAIL with the first witness.
fn tally(r: &mut Report, id: &str, total: usize, first_bad: Option<String>) {
    match first_bad {
        None => r.pass(id, Some(format!("{total} cases"))),
        Some(w) => r.fail(id, w),
    }
}

fn even_colouring(n: usize, bits: &[bool]) -> Result<Coloring> {
    let leaves = BushyShape::Even.level_strings(n)?;
    let map = leaves.into_iter().zip(bits).map(|(s, &b)| (s, u64::from(b))).collect();
    Coloring::new(map, 2)
}

fn twocol_case(n: usize, bits: &[bool]) -> Result<Option<String>> {
    let c = even_colouring(n, bits)?;
    let (d, sub) = extract_twocol(n, &c)?;
    let ok = verify_extraction(BushyShape::Even, &vec![2; n], n, &c, d, &sub);
    Ok((!ok).then(|| format!("n={n} colouring={} d={d} sub={sub}", bits_text(bits))))
}

fn bits_text(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// A mutant extraction: one kept leaf recoloured to the avoided colour
/// must be rejected.
fn twocol_mutant_detected(n: usize, bits: &[bool]) -> Result<bool> {
    let c = even_colouring(n, bits)?;
    let (d, sub) = extract_twocol(n, &c)?;
    let Some(leaf) = sub.leaves().into_iter().next() else {
        return Ok(true);
    };
    let mut flipped = c.clone();
    flipped.assignment.insert(leaf, d);
    Ok(!verify_extraction(BushyShape::Even, &vec![2; n], n, &flipped, d, &sub))
}

pub fn criterion_twocol(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    for n in 0..=sz.twocol_exhaustive_max {
        let leaves = 1usize << (2 * n);
        let mut bad = None;
        let total = 1u64 << leaves;
        for mask in 0..total {
            let bits: Vec<bool> = (0..leaves).map(|k| (mask >> k) & 1 == 1).collect();
            if let Some(w) = twocol_case(n, &bits)? {
                bad = Some(w);
                break;
            }
        }
        tally(&mut r, &format!("twocol.n{n}.exhaustive"), total as usize, bad);
    }
    let mut rng = sub_rng(seed, 1);
    let mut bad = None;
    let mut missed = None;
    for k in 0..sz.twocol_samples {
        let bits: Vec<bool> = (0..64).map(|_| rng.gen()).collect();
        if bad.is_none() {
            bad = twocol_case(3, &bits)?;
        }
        if k < 500 && missed.is_none() && !twocol_mutant_detected(3, &bits)? {
            missed = Some(bits_text(&bits));
        }
    }
    tally(&mut r, "twocol.n3.random", sz.twocol_samples, bad);
    tally(&mut r, "twocol.n3.mutants-rejected", sz.twocol_samples.min(500), missed);
    Ok(r)
}

pub fn criterion_nice(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    let mut rng = sub_rng(seed, 2);
    for i in 0..=2 {
        for n in 0..=i + 2 {
            let mut bad = None;
            for _ in 0..sz.nice_samples {
                let t0 = random_kappa_tree(&mut rng, i, n)?;
                let map: BTreeMap<BinaryString, u64> =
                    t0.leaves().into_iter().map(|l| (l, rng.gen_range(0..ncol(i)))).collect();
                let c = Coloring::new(map, ncol(i))?;
                let (d, t1) = extract_nice(i, &t0, &c)?;
                let target = kappa_sequence(i + 1, n);
                if !verify_extraction_within(BushyShape::Graded, &target, n, &c, d, &t1, &t0) {
                    bad = Some(format!("i={i} n={n} d={d} t1={t1}"));
                    break;
                }
            }
            tally(&mut r, &format!("nice.i{i}.n{n}.random"), sz.nice_samples, bad);
        }
    }
    let mut bad = None;
    for i in 0..=6usize {
        for n in 0..=10usize {
            let closed = if n >= i { 1u64 << (n + 2 - i) } else { 2 };
            if kappa(i, n) != closed || kappa_recurrence(i, n) != closed {
                bad.get_or_insert(format!("i={i} n={n} kappa={} closed={closed}", kappa(i, n)));
            }
        }
    }
    tally(&mut r, "nice.kappa.closed-form", 77, bad);
    r.check("nice.kappa.base", kappa(0, 0) == 4, || format!("kappa_0(0)={}", kappa(0, 0)));
    Ok(r)
}

/// Adversary colouring the level-`(i+1)` strings by a mixing function of
/// their bits, one table per `i < 3`, so that every colour is used.
fn crafted_bundle(k: u64) -> Result<AdversaryBundle> {
    let mut tables = Vec::new();
    for i in 0..3usize {
        let mut axioms: Vec<Axiom> = (0..i as u64)
            .map(|j| Axiom::new(BinaryString::empty(), j, 0, 1))
            .collect();
        let len = BushyShape::Graded.level_length(i + 1);
        for s in BinaryString::all_of_length(len) {
            let v = s.to_u64().unwrap();
            let colour = (v.wrapping_mul(2 * k + 1) ^ (v >> (k % 3)) ^ k) % ncol(i);
            axioms.push(Axiom::new(s, i as u64, colour, len as u64));
        }
        tables.push(FunctionalTable::new(axioms)?);
    }
    Ok(AdversaryBundle::new(tables))
}

pub fn criterion_members(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    let mut rng = sub_rng(seed, 3);
    let mut bundles = vec![AdversaryBundle::default()];
    for _ in 0..sz.random_bundles {
        let shape = TableShape {
            axioms: rng.gen_range(1..=200),
            max_sigma_len: 9,
            max_arg: 3,
            max_value: 8,
            max_steps: 9,
        };
        bundles.push(random_adversary(&mut rng, 3, shape, 0));
    }
    for k in 0..sz.crafted_bundles {
        bundles.push(crafted_bundle(k as u64)?);
    }
    let mut bad = None;
    let mut exhaustive_bad = None;
    for (b, adv) in bundles.iter().enumerate() {
        for n in 0..=sz.member_depth {
            match find_pi_member_chain(n, adv) {
                Ok(chain) => {
                    let node = chain.last().unwrap();
                    if !chain_survives(&chain, adv) || node.validate().is_err() {
                        bad.get_or_insert(format!("bundle {b} n={n}: chain blocked"));
                    }
                    if n <= 1 && exhaustive_bad.is_none() && !exhaustive_survivors(n, adv)?.contains(node) {
                        exhaustive_bad = Some(format!("bundle {b} n={n}: {} not among survivors", node.tau));
                    }
                }
                Err(e) => {
                    bad.get_or_insert(format!("bundle {b} n={n}: {e}"));
                }
            }
        }
    }
    tally(&mut r, "members.found-and-surviving", bundles.len(), bad);
    tally(&mut r, "members.exhaustive-agreement", bundles.len(), exhaustive_bad);
    let count = materialize(1)?.len();
    r.check("members.level-one-count", count == 12, || format!("{count} members"));
    Ok(r)
}

pub fn criterion_traceable(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    let mut rng = sub_rng(seed, 4);
    let mut frontier = None;
    let mut nodes = None;
    let mut traces = None;
    let mut diag = None;
    let mut finals = None;
    let mut p_actions = 0usize;
    let mut tuples = 0usize;
    let mut nodes_total = 0usize;
    for run in 0..sz.traceable_runs {
        let adv = random_adversary(&mut rng, 4, TableShape::default(), sz.horizon);
        let states = run_to(&adv, sz.horizon)?;
        for st in &states {
            if st.frontier(st.stage).is_empty() {
                frontier.get_or_insert(format!("run {run} stage {}", st.stage));
            }
            for (n, &count) in st.declared_per_level.iter().enumerate().take(5) {
                if BigUint::from(count) > node_bound(n) {
                    nodes.get_or_insert(format!("run {run} level {n}: {count} generations"));
                }
            }
        }
        let last = states.last().unwrap();
        for (i, per_n) in extract_trace(last).per_i {
            for (n, vals) in per_n {
                if BigUint::from(vals.len()) > trace_bound(i, n) {
                    traces.get_or_insert(format!("run {run} i={i} n={n}: {} values", vals.len()));
                }
            }
        }
        if let Some(t) = provenance_failures(last).first() {
            traces.get_or_insert(format!("run {run}: duplicate tuple from {}", t.node));
        }
        tuples += last.tuples.len();
        nodes_total += last.nodes.len();
        p_actions += last.actions.iter().filter(|a| matches!(a.module, crate::traceable::ModuleId::P { .. })).count();
        if let Some(x) = diagonalization_failures(last, &adv).first() {
            diag.get_or_insert(format!("run {run}: {x} not terminal"));
        }
        if let Some(v) = final_node_violations(last, &adv).first() {
            finals.get_or_insert(format!("run {run}: {v}"));
        }
    }
    let runs = sz.traceable_runs;
    tally(&mut r, "traceable.frontier-nonempty", runs, frontier);
    tally(&mut r, "traceable.node-generation-bound", runs, nodes);
    let identity = (0..=8).find(|&n| !step_identity_holds(n));
    r.check("traceable.step-identity", identity.is_none(), || format!("fails at n={}", identity.unwrap()));
    tally(&mut r, "traceable.trace-size-bound", runs, traces);
    tally(&mut r, "traceable.diagonalization", runs, diag);
    tally(&mut r, "traceable.final-nodes", runs, finals);
    if p_actions > 0 && tuples > 0 {
        r.pass("traceable.activity", format!("{nodes_total} nodes, {tuples} tuples, {p_actions} P actions"));
    } else {
        r.fail("traceable.activity", format!("{tuples} tuples, {p_actions} P actions"));
    }
    Ok(r)
}

/// A trace of `f′(m) = code(f↾k′(m))` under `p`, correct where `hit` and
/// padded with decoy codes up to size `p(m)`.
fn replay_trace(rng: &mut CorpusRng, p: &[u64], f: &[u64]) -> Result<(TraceSystem, BTreeSet<usize>)> {
    let mut ts = TraceSystem {
        p: p.to_vec(),
        w: BTreeMap::new(),
    };
    let mut hits = BTreeSet::new();
    for m in 1..p.len() {
        let mut set = BTreeSet::new();
        if let Some(kp) = k_prime_of(p, m) {
            if rng.gen_ratio(3, 4) && kp <= f.len() {
                set.insert(encode_sequence(&f[..kp])?);
                hits.insert(m);
            }
            let mut x = rng.gen_range(0..4);
            while (set.len() as u64) < p[m] {
                x += 1;
                set.insert(encode_sequence(&vec![x; kp.min(4)])?);
            }
        }
        ts.w.insert(m, set);
    }
    Ok((ts, hits))
}

pub fn criterion_thin(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    let mut rng = sub_rng(seed, 5);

    let mut bad = None;
    for _ in 0..sz.thin_trees {
        let shape = TableShape {
            axioms: 24,
            max_sigma_len: 5,
            max_arg: 4,
            max_value: 3,
            max_steps: 3,
        };
        let psi = random_table(&mut rng, shape);
        let t = hat_level_tree(&psi, 7)?;
        let mut sub = FiniteTree::root_only();
        for x in t.iter() {
            if rng.gen_ratio(1, 2) {
                sub.insert(x.clone());
                if !is_thin(&t, &sub)? {
                    sub.remove(x);
                }
            }
        }
        let ts = trace_from_thin(&psi, &sub)?;
        if let Some((n, s)) = ts.w.iter().find(|(n, s)| s.len() as u64 > 1u64 << (*n + 1)) {
            bad.get_or_insert(format!("|w[{n}]| = {}", s.len()));
        }
    }
    tally(&mut r, "thin.trace-from-thin.size", sz.thin_trees, bad);

    let mut bad = None;
    for _ in 0..sz.thin_trees {
        let staged = random_weak_tree(&mut rng, 12, 120);
        let t = staged.final_tree();
        let mut ts = TraceSystem::default();
        for n in 1..=3 {
            let mut cands = t.at_level(spaced_level(n));
            cands.shuffle(&mut rng);
            cands.truncate(rng.gen_range(0..=n));
            ts.w.insert(n, cands.iter().map(|x| x.length_lex_index().unwrap()).collect());
        }
        let out = thin_from_trace(&staged, &ts)?;
        if !is_thin(&t, &out)? {
            bad.get_or_insert(format!("output {out} is not thin"));
        }
    }
    tally(&mut r, "thin.thin-from-trace.thin", sz.thin_trees, bad);

    // Σ_{i≥1} i·4^{-i} = 4/9: partial sums plus the closed-form tail.
    let quarter = BigRational::new(1.into(), 4.into());
    let four_ninths = BigRational::new(4.into(), 9.into());
    let mut bad = None;
    for k in 1..=40usize {
        let partial = spaced_tail_sum(0, k);
        let xk1 = (0..=k).fold(BigRational::one(), |acc, _| acc * &quarter);
        let kk = BigRational::from_integer((k as i64).into());
        let tail = xk1 * (&kk + BigRational::one() - &quarter * &kk)
            / ((BigRational::one() - &quarter) * (BigRational::one() - &quarter));
        if partial.clone() + tail != four_ninths || partial >= BigRational::one() {
            bad.get_or_insert(format!("k={k} partial={partial}"));
        }
    }
    tally(&mut r, "thin.weight-bound-four-ninths", 40, bad);

    let mut bad = None;
    let mut cases = 0;
    for _ in 0..sz.thin_trees {
        let len = rng.gen_range(3..=7);
        let mut p = vec![0u64];
        for _ in 1..len {
            let step = rng.gen_range(1..=2);
            p.push(p.last().unwrap() + step);
        }
        let p = normalize_bound(&p)?;
        let f: Vec<u64> = (0..*p.last().unwrap() as usize + 1).map(|_| rng.gen_range(0..4)).collect();
        let (ts, hits) = match replay_trace(&mut rng, &p, &f) {
            Ok(x) => x,
            Err(crate::error::Error::Resource(_)) => continue,
            Err(e) => return Err(e),
        };
        cases += 1;
        let out = rescale_trace(&ts)?;
        if let Some((n, s)) = out.w.iter().find(|(n, s)| s.len() > **n) {
            bad.get_or_insert(format!("|w'[{n}]| = {}", s.len()));
        }
        for n in 0..out.p.len() {
            let hit = k_of(&p, n as u64).is_some_and(|k| hits.contains(&k));
            if hit && !out.set(n).contains(&f[n]) {
                bad.get_or_insert(format!("p={p:?} f={f:?}: f({n}) missing from w'[{n}]"));
            }
        }
    }
    tally(&mut r, "thin.rescale.size", cases, bad);

    let mut bad = None;
    for n in 1..=64u64 {
        for m in 1..=64u64 {
            let code = selfdelim_encode(n, m)?;
            let law = 2 * binary_length(n) + binary_length(m);
            if selfdelim_decode(&code)? != (n, m) || code.len() != law {
                bad.get_or_insert(format!("n={n} m={m} code={code}"));
            }
        }
    }
    tally(&mut r, "thin.selfdelim.round-trip", 64 * 64, bad);
    Ok(r)
}

pub fn criterion_split_thin(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    let mut rng = sub_rng(seed, 6);
    let mut bad = None;
    let mut missed = None;
    let mut mutants = 0;
    for _ in 0..sz.split_pairs {
        let staged = random_weak_tree(&mut rng, 10, 60);
        let tree = staged.final_tree();
        let psi = truncation_functional(&tree)?;
        let sub = random_splitting_subset(&mut rng, &psi, &tree);
        let rep = splitting_to_thin(&staged, &sub)?;
        if !rep.thin_ok {
            bad.get_or_insert(format!("sub {sub}: split {:?}", rep.split_witness));
        }
        // Break one split: add a member that fails to split with the subset.
        let breaker = tree.iter().find(|x| {
            !sub.contains(x) && {
                let mut m = sub.clone();
                m.insert((*x).clone());
                splitting_tree_violation(&psi, &m, false).is_some()
            }
        });
        if let Some(x) = breaker {
            let mut m = sub.clone();
            m.insert(x.clone());
            mutants += 1;
            let rep = splitting_to_thin(&staged, &m)?;
            if rep.thin_ok || rep.split_witness.is_none() {
                missed.get_or_insert(format!("mutant {m} accepted"));
            }
        }
    }
    tally(&mut r, "split-thin.thin-ok", sz.split_pairs, bad);
    if mutants == 0 {
        r.fail("split-thin.mutants-rejected", "no mutant could be built");
    } else {
        tally(&mut r, "split-thin.mutants-rejected", mutants, missed);
    }
    Ok(r)
}

fn full_tree(depth: usize) -> FiniteTree {
    (0..=depth).flat_map(BinaryString::all_of_length).collect()
}

/// `T(τ)` is the full binary tree cut at length `|τ|` and `f(n) = n`.
pub fn full_tree_context(depth: usize) -> Result<OmegaContext> {
    OmegaContext::new(
        phi_from_tree(&full_tree(depth), 1)?,
        (0..=depth as u64 + 2).collect(),
        BinaryString::empty(),
    )
}

fn check_selection(ctx: &OmegaContext, input: &SelectionInput) -> Result<Option<String>> {
    let res = select_extensions(ctx, input)?;
    let v = selection_violations(ctx, input, &res);
    if let Some(first) = v.first() {
        return Ok(Some(format!("tau={} sigma={}: {first}", input.tau, input.sigma)));
    }
    if exhaustive_selection_exists(ctx, input, 12) == Some(false) {
        return Ok(Some(format!("tau={}: exhaustive search finds no choice", input.tau)));
    }
    Ok(None)
}

pub fn criterion_selection(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    let fig = full_tree_context(6)?;
    let e = BinaryString::empty();
    let fixed = [
        vec![("00", 1), ("01", 1)],
        vec![("01", 1)],
        vec![("00", 1), ("0100", 2), ("0111", 2)],
    ];
    for (k, lambda) in fixed.iter().enumerate() {
        let input = SelectionInput {
            tau: e.clone(),
            tau_level: 0,
            lambda: lambda.iter().map(|&(s, l)| (s.parse().unwrap(), l)).collect(),
            sigma: e.clone(),
        };
        let w = check_selection(&fig, &input)?;
        let id = if k == 0 { "selection.two-at-level-one".to_string() } else { format!("selection.fixed-{k}") };
        tally(&mut r, &id, 1, w);
    }
    let heavy = SelectionInput {
        tau: e.clone(),
        tau_level: 0,
        lambda: [("00", 1), ("01", 1), ("1000", 2)].iter().map(|&(s, l)| (s.parse().unwrap(), l)).collect(),
        sigma: e.clone(),
    };
    let res = select_extensions(&fig, &heavy);
    r.check("selection.heavy-rejected", matches!(res, Err(crate::error::Error::Thinness(_))), || {
        format!("{:?}", res.map(|x| x.n_tau))
    });
    let mut rng = sub_rng(seed, 7);
    let mut done = 0;
    let mut attempts = 0;
    let mut bad = None;
    let mut small = 0;
    while done < sz.selection_configs && attempts < 20 * sz.selection_configs {
        attempts += 1;
        let ctx = random_omega_context(&mut rng, OmegaShape::default())?;
        let pi = enumerate_pi(&ctx, 6)?.final_tree();
        let Some(input) = random_selection_input(&mut rng, &ctx, &pi) else { continue };
        done += 1;
        if exhaustive_selection_exists(&ctx, &input, 12).is_some() {
            small += 1;
        }
        match check_selection(&ctx, &input) {
            Ok(None) => {}
            Ok(Some(w)) => {
                bad.get_or_insert(w);
            }
            Err(e) => {
                bad.get_or_insert(format!("tau={}: {e}", input.tau));
            }
        }
    }
    if done < sz.selection_configs {
        r.fail("selection.random", format!("only {done} configurations generated"));
    } else {
        tally(&mut r, "selection.random", done, bad);
    }
    r.check("selection.exhaustive-coverage", small > 0, || "no instance small enough for the exhaustive oracle".into());
    Ok(r)
}

pub fn criterion_tprime(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    let fig = full_tree_context(6)?;
    let tree = |xs: &[&str]| -> FiniteTree { xs.iter().map(|s| s.parse().unwrap()).collect() };
    let fixed = [
        ("tprime.chain", vec![FiniteTree::root_only(), tree(&["e", "01"]), tree(&["e", "01", "0110"])]),
        (
            "tprime.branching",
            vec![FiniteTree::root_only(), tree(&["e", "00", "11"]), tree(&["e", "00", "11", "0001", "0010"])],
        ),
    ];
    for (id, stages) in fixed {
        let st = StagedTree::new(stages);
        let tp = build_tprime(&fig, &st, None)?;
        tally(&mut r, id, 1, tprime_violations(&fig, &st, &tp).first().cloned());
    }

    let mut rng = sub_rng(seed, 8);
    let mut done = 0;
    let mut attempts = 0;
    let mut bad = None;
    let mut stages = 0;
    while done < sz.stagings && attempts < 20 * sz.stagings {
        attempts += 1;
        let ctx = random_omega_context(&mut rng, OmegaShape::default())?;
        let pi = enumerate_pi(&ctx, 6)?.final_tree();
        let st = random_pistar(&mut rng, &pi, 6);
        if st.stages.len() < 2 {
            continue;
        }
        done += 1;
        stages += st.stages.len() - 1;
        match build_tprime(&ctx, &st, None) {
            Ok(tp) => {
                if let Some(v) = tprime_violations(&ctx, &st, &tp).first() {
                    bad.get_or_insert(v.clone());
                }
            }
            Err(e) => {
                bad.get_or_insert(e.to_string());
            }
        }
    }
    if done < sz.stagings {
        r.fail("tprime.random-stagings", format!("only {done} stagings generated"));
    } else {
        tally(&mut r, "tprime.random-stagings", done, bad);
    }
    r.check("tprime.stages-exercised", stages >= done, || format!("{stages} stages over {done} stagings"));
    Ok(r)
}

pub fn criterion_image(level: SuiteLevel, seed: u64) -> Result<Report> {
    let sz = Sizes::of(level);
    let mut r = Report::new();
    let mut rng = sub_rng(seed, 9);
    let mut round = None;
    let mut branching = None;
    for _ in 0..sz.image_trees {
        let depth = rng.gen_range(1..=5);
        let (psi, t0) = random_splitting_instance(&mut rng, depth);
        let image = image_tree(&psi, &t0)?;
        let back = pullback_tree(&psi, &t0, &image)?;
        if back != t0 {
            round.get_or_insert(format!("t0={t0} pullback={back}"));
        }
        // A random 2-branching subtree of the image, pulled back.
        let mut t2 = FiniteTree::new();
        if let Some(root) = image.root() {
            let mut stack = vec![root];
            while let Some(x) = stack.pop() {
                t2.insert(x.clone());
                let succ: Vec<BinaryString> = image.successors(&x).into_iter().collect();
                if !succ.is_empty() && (x.is_empty() || rng.gen_ratio(2, 3)) {
                    stack.extend(succ);
                }
            }
        }
        let sub = pullback_tree(&psi, &t0, &t2)?;
        if !image.is_two_branching() || !sub.is_two_branching() || !sub.is_subset(&t0) {
            branching.get_or_insert(format!("t0={t0} t2={t2} pullback={sub}"));
        }
    }
    tally(&mut r, "image.pullback-of-image", sz.image_trees, round);
    tally(&mut r, "image.two-branching-preserved", sz.image_trees, branching);
    Ok(r)
}

type Criterion = fn(SuiteLevel, u64) -> Result<Report>;

const CHECKS: [(usize, &str, Criterion); 9] = [
    (1, "twocol", criterion_twocol),
    (2, "nice", criterion_nice),
    (3, "members", criterion_members),
    (4, "traceable", criterion_traceable),
    (5, "thin", criterion_thin),
    (6, "split-thin", criterion_split_thin),
    (7, "selection", criterion_selection),
    (8, "tprime", criterion_tprime),
    (9, "image", criterion_image),
];

fn prefixed(k: usize, rep: Result<Report>, name: &str) -> Report {
    let mut out = Report::new();
    match rep {
        Ok(rep) => {
            for mut l in rep.lines {
                l.check_id = format!("c{k}.{}", l.check_id);
                out.lines.push(l);
            }
        }
        Err(e) => out.error(format!("c{k}.{name}"), e),
    }
    out
}

/// Lines of criterion `k` (1 to 10).
pub fn run_criterion(k: usize, level: SuiteLevel, seed: u64) -> Report {
    if k == CRITERIA {
        return prefixed(k, criterion_determinism(level, seed), "determinism");
    }
    match CHECKS.iter().find(|(id, _, _)| *id == k) {
        Some((_, name, f)) => prefixed(k, f(level, seed), name),
        None => {
            let mut r = Report::new();
            r.error(format!("c{k}"), format!("no criterion {k}"));
            r
        }
    }
}

/// Renders every other criterion twice with the same seed and compares
/// the bytes. The full level repeats the cheaper criteria at full size.
pub fn criterion_determinism(level: SuiteLevel, seed: u64) -> Result<Report> {
    let mut r = Report::new();
    let render = |lvl: SuiteLevel, ks: &[usize]| -> String {
        ks.iter().map(|&k| run_criterion(k, lvl, seed).to_string()).collect()
    };
    let all: Vec<usize> = (1..CRITERIA).collect();
    let a = render(SuiteLevel::Fast, &all);
    let b = render(SuiteLevel::Fast, &all);
    r.check("determinism.fast", a == b, || first_difference(&a, &b));
    if level == SuiteLevel::Full {
        let cheap = [3, 6, 9];
        let a = render(SuiteLevel::Full, &cheap);
        let b = render(SuiteLevel::Full, &cheap);
        r.check("determinism.full-subset", a == b, || first_difference(&a, &b));
    }
    Ok(r)
}

fn first_difference(a: &str, b: &str) -> String {
    a.lines()
        .zip(b.lines())
        .find(|(x, y)| x != y)
        .map_or_else(|| "reports differ in length".into(), |(x, y)| format!("{x} vs {y}"))
}

pub fn run_suite(level: SuiteLevel, seed: u64) -> Report {
    let mut r = Report::new().with_header("suite", level).with_header("seed", seed);
    for k in 1..=CRITERIA {
        r.extend(run_criterion(k, level, seed));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crafted_bundles_use_every_colour() {
        let adv = crafted_bundle(1).unwrap();
        let leaves = BushyShape::Graded.level_strings(2).unwrap();
        let colours: BTreeSet<u64> = leaves.iter().filter_map(|l| adv.colour(1, l)).collect();
        assert_eq!(colours.len() as u64, ncol(1));
    }

    #[test]
    fn small_criteria_pass() {
        for k in [1, 2, 9] {
            let rep = run_criterion(k, SuiteLevel::Fast, 5);
            assert!(rep.passed(), "{rep}");
        }
    }
}
