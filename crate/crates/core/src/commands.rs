//! Command dispatch for scenario files.
//!
//! A command is a whitespace-separated word list such as
//! `check thin --tree T --sub S`. Names refer to scenario sections; numeric
//! options left out fall back to the scenario's `[params]` entry of the same
//! name, then to a default.

use std::collections::{BTreeMap, BTreeSet};

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use crate::bushy::{
    extract_nice, extract_twocol, kappa, kappa_recurrence, ncol, verify_extraction, verify_extraction_within,
    kappa_sequence, BushyShape, Coloring,
};
use crate::code::{binary_length, selfdelim_decode, selfdelim_encode};
use crate::corpus::{random_kappa_tree, sub_rng, CorpusRng};
use crate::cupping::{chain_survives, exhaustive_survivors, find_pi_member_chain, AdversaryBundle};
use crate::error::{Error, Result};
use crate::functional::{build_weak_splitting_tree, is_splitting_tree, weak_splitting_violation, FunctionalTable};
use crate::report::{Report, Status};
use crate::scenario::Scenario;
use crate::smc::{
    build_tprime, enumerate_pi, pi_gap_violations, smc_driver_stage, tprime_violations, Dagger, DriverBranch,
    OmegaContext,
};
use crate::strings::BinaryString;
use crate::suite::{run_suite, SuiteLevel};
use crate::thin::{
    dnr_trace, is_thin, majorizer_from_perfect, rescale_trace, splitting_to_thin,
    thin_from_trace, thin_violation, trace_from_bounded_splitting, trace_from_thin, TraceSystem,
};
use crate::traceable::{
    diagonalization_failures, extract_trace, final_node_violations, node_bound, provenance_failures, run_to,
    trace_bound,
};

#[derive(Debug, Parser)]
#[command(name = "command", no_binary_name = true, disable_help_subcommand = true)]
pub struct CommandLine {
    #[command(subcommand)]
    pub command: Command,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(subcommand)]
    Verify(Verify),
    #[command(subcommand)]
    Run(Run),
    #[command(subcommand)]
    Check(Check),
    #[command(subcommand)]
    Trace(Trace),
    #[command(subcommand)]
    Encode(Encode),
    Suite { level: SuiteLevel },
}

#[derive(Debug, Subcommand)]
pub enum Verify {
    /// Two-colour extraction on the even-shape tree of level `n`.
    Twocol {
        #[arg(long)]
        n: Option<usize>,
        /// Every colouring instead of random samples (n ≤ 2).
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Nice extraction on random `κ_i`-compatible graded trees.
    Nice {
        #[arg(long)]
        i: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// `κ_i(n)` against its closed form and recurrence.
    Kappa {
        #[arg(long)]
        i_max: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Adversary {
    /// Functionals `Ψ_0, Ψ_1, ...` in order.
    #[arg(long, value_delimiter = ',')]
    pub adversary: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Run {
    /// Finds a surviving member of `Π*` at level `n`.
    Cupping {
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        adv: Adversary,
    },
    /// Runs the traceable construction to a horizon.
    Traceable {
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        adv: Adversary,
    },
    /// One stage of the minimal-cover driver.
    Smc {
        #[arg(long)]
        tree: String,
        #[arg(long)]
        psi: String,
        #[arg(long, default_value = "e")]
        b: BinaryString,
        #[arg(long)]
        avoid: Option<BinaryString>,
        /// Tree to pull back; without it the subtree is built along `--a`.
        #[arg(long)]
        dagger: Option<String>,
        #[arg(long, default_value = "e")]
        a: BinaryString,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Enumerates `Π` from `Φ` along an initial segment of `A`.
    Pi6 {
        #[command(flatten)]
        omega: Omega,
        #[arg(long)]
        stages: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct Omega {
    #[arg(long)]
    pub phi: String,
    #[arg(long, default_value = "e")]
    pub a: BinaryString,
    /// Majorant values; computed from `Φ` when absent.
    #[arg(long, value_delimiter = ',')]
    pub f: Vec<u64>,
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Check {
    Thin {
        #[arg(long)]
        tree: String,
        #[arg(long)]
        sub: String,
    },
    Split {
        #[arg(long)]
        functional: String,
        #[arg(long)]
        tree: String,
        #[arg(long)]
        delayed: bool,
    },
    Weaksplit {
        #[arg(long)]
        psi: String,
        #[arg(long)]
        phi: String,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value = "e")]
        path: BinaryString,
    },
    /// Builds `T′` and `Θ` from a staged `Π*`.
    Theta {
        #[command(flatten)]
        omega: Omega,
        #[arg(long)]
        staged: String,
    },
    /// A splitting subset of a weak c.e. tree is thin.
    SplitThin {
        #[arg(long)]
        staged: String,
        #[arg(long)]
        sub: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum Trace {
    FromThin {
        #[arg(long)]
        psi: String,
        #[arg(long)]
        sub: String,
    },
    /// Rescales a trace given as `--p 0,2,5 --w 1:7,9 --w 2:30`.
    Rescale {
        #[command(flatten)]
        trace: TraceArgs,
    },
    FromSplit {
        #[arg(long)]
        psi: String,
        #[arg(long)]
        tree: String,
        #[arg(long)]
        m: Option<u64>,
    },
    Dnr {
        #[command(flatten)]
        adv: Adversary,
    },
    /// Thin subtree from a trace of length-lex codes.
    ToThin {
        #[arg(long)]
        staged: String,
        #[command(flatten)]
        trace: TraceArgs,
    },
    Majorizer {
        #[arg(long)]
        psi: String,
        #[arg(long)]
        tree: String,
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<u64>,
    #[arg(long)]
    pub w: Vec<String>,
}

impl TraceArgs {
    fn system(&self) -> Result<TraceSystem> {
        let mut w = BTreeMap::new();
        for item in &self.w {
            let bad = || Error::Format(format!("trace entry {item:?} is not N:V,V,..."));
            let (n, vals) = item.split_once(':').ok_or_else(bad)?;
            let n: usize = n.parse().map_err(|_| bad())?;
            let set = vals
                .split(',')
                .filter(|v| !v.is_empty())
                .map(|v| v.parse::<u64>().map_err(|_| bad()))
                .collect::<Result<BTreeSet<u64>>>()?;
            w.insert(n, set);
        }
        Ok(TraceSystem { p: self.p.clone(), w })
    }
}

#[derive(Debug, Subcommand)]
pub enum Encode {
    /// Self-delimiting code of the pair `(n, m)`.
    Sd { n: u64, m: u64 },
}

struct Ctx<'a> {
    sc: &'a Scenario,
    seed: u64,
}

impl Ctx<'_> {
    fn num(&self, opt: Option<usize>, key: &str, default: usize) -> Result<usize> {
        match (opt, self.sc.param(key)) {
            (Some(v), _) => Ok(v),
            (None, Some(v)) => usize::try_from(v).map_err(|_| Error::Domain(format!("parameter {key} = {v} is negative"))),
            (None, None) => Ok(default),
        }
    }

    fn adversary(&self, adv: &Adversary) -> Result<AdversaryBundle> {
        let tables = adv
            .adversary
            .iter()
            .map(|n| self.sc.functional(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(AdversaryBundle::new(tables))
    }

    fn omega(&self, o: &Omega) -> Result<OmegaContext> {
        let phi = self.sc.functional(&o.phi)?.clone();
        if o.f.is_empty() {
            let depth = self.num(o.depth, "depth", o.a.len().max(4))?;
            OmegaContext::with_majorant(phi, o.a.clone(), depth)
        } else {
            OmegaContext::new(phi, o.f.clone(), o.a.clone())
        }
    }

    fn rng(&self, stream: u64) -> CorpusRng {
        sub_rng(self.seed, stream)
    }
}

/// Parses and runs one command against a scenario.
///
/// Unknown commands and names that do not resolve are errors; failures of
/// the underlying operation become `ERROR` lines.
pub fn run_command(cmd: &str, sc: &Scenario) -> Result<Report> {
    let words: Vec<&str> = cmd.split_whitespace().collect();
    let line = CommandLine::try_parse_from(&words).map_err(|e| {
        let msg = e.to_string();
        let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
        Error::UnknownCommand(format!("{cmd:?}: {first}"))
    })?;
    let seed = line.seed.unwrap_or(sc.seed);
    let ctx = Ctx { sc, seed };
    let mut report = Report::new().with_header("command", words.join(" ")).with_header("seed", seed);
    let id = words.iter().take(2).copied().collect::<Vec<_>>().join(".");
    match dispatch(&ctx, &line.command) {
        Ok(r) => report.extend(r),
        Err(e @ Error::UnknownName(_)) => return Err(e),
        Err(e) => report.error(id, e),
    }
    Ok(report)
}

fn dispatch(ctx: &Ctx, cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Verify(v) => verify(ctx, v),
        Command::Run(r) => run(ctx, r),
        Command::Check(c) => check(ctx, c),
        Command::Trace(t) => trace(ctx, t),
        Command::Encode(Encode::Sd { n, m }) => encode_sd(*n, *m),
        Command::Suite { level } => Ok(run_suite(*level, ctx.seed)),
    }
}

fn verdict(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn bits_text(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn twocol_line(r: &mut Report, n: usize, bits: &[bool]) -> Result<()> {
    let leaves = BushyShape::Even.level_strings(n)?;
    let map = leaves.into_iter().zip(bits).map(|(s, &b)| (s, u64::from(b))).collect();
    let c = Coloring::new(map, 2)?;
    let (d, sub) = extract_twocol(n, &c)?;
    let ok = verify_extraction(BushyShape::Even, &vec![2; n], n, &c, d, &sub);
    let id = format!("twocol.n{n}.{}", bits_text(bits));
    r.push(verdict(ok), id, Some(format!("d={d} sub={sub}")));
    Ok(())
}

fn verify(ctx: &Ctx, v: &Verify) -> Result<Report> {
    let mut r = Report::new();
    match v {
        Verify::Twocol { n, exhaustive, samples } => {
            let n = ctx.num(*n, "n", 1)?;
            let leaves = 1usize << (2 * n);
            if *exhaustive {
                if n > 2 {
                    return Err(Error::Resource(format!("exhaustive search needs n <= 2, got {n}")));
                }
                for mask in 0..1u64 << leaves {
                    let bits: Vec<bool> = (0..leaves).map(|k| (mask >> k) & 1 == 1).collect();
                    twocol_line(&mut r, n, &bits)?;
                }
            } else {
                let mut rng = ctx.rng(1);
                for _ in 0..ctx.num(*samples, "samples", 16)? {
                    let bits: Vec<bool> = (0..leaves).map(|_| rng.gen()).collect();
                    twocol_line(&mut r, n, &bits)?;
                }
            }
        }
        Verify::Nice { i, n, samples } => {
            let i = ctx.num(*i, "i", 0)?;
            let n = ctx.num(*n, "n", 2)?;
            let mut rng = ctx.rng(2);
            for k in 0..ctx.num(*samples, "samples", 16)? {
                let t0 = random_kappa_tree(&mut rng, i, n)?;
                let map = t0.leaves().into_iter().map(|l| (l, rng.gen_range(0..ncol(i)))).collect();
                let c = Coloring::new(map, ncol(i))?;
                let (d, t1) = extract_nice(i, &t0, &c)?;
                let ok = verify_extraction_within(BushyShape::Graded, &kappa_sequence(i + 1, n), n, &c, d, &t1, &t0);
                let witness = format!("d={d} leaves={}", t1.leaves().len());
                r.push(verdict(ok), format!("nice.i{i}.n{n}.sample{k}"), Some(witness));
            }
        }
        Verify::Kappa { i_max, n_max } => {
            let n_max = ctx.num(*n_max, "n_max", 10)?;
            for i in 0..=ctx.num(*i_max, "i_max", 6)? {
                let seq: Vec<u64> = (0..=n_max).map(|n| kappa(i, n)).collect();
                let bad = (0..=n_max).find(|&n| {
                    let closed = if n >= i { 1u64.checked_shl((n + 2 - i) as u32).unwrap_or(0) } else { 2 };
                    seq[n] != closed || kappa_recurrence(i, n) != closed
                });
                let text = seq.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
                match bad {
                    None => r.pass(format!("kappa.i{i}"), text),
                    Some(n) => r.fail(format!("kappa.i{i}"), format!("n={n}: {text}")),
                }
            }
        }
    }
    Ok(r)
}

fn run(ctx: &Ctx, cmd: &Run) -> Result<Report> {
    let mut r = Report::new();
    match cmd {
        Run::Cupping { n, adv } => {
            let n = ctx.num(*n, "n", 1)?;
            let bundle = ctx.adversary(adv)?;
            let chain = find_pi_member_chain(n, &bundle)?;
            let node = chain.last().expect("chain starts at the root");
            r.pass("cupping.member", format!("tau={} level={}", node.tau, node.level));
            r.check("cupping.node-valid", node.validate().is_ok(), || format!("{:?}", node.validate()));
            r.check("cupping.chain-survives", chain_survives(&chain, &bundle), || {
                chain.iter().map(|c| c.tau.to_string()).collect::<Vec<_>>().join(" ")
            });
            if n <= 1 {
                let all = exhaustive_survivors(n, &bundle)?;
                r.check("cupping.exhaustive", all.contains(node), || format!("{} survivors", all.len()));
            }
        }
        Run::Traceable { horizon, adv } => {
            let h = ctx.num(*horizon, "horizon", 8)?;
            let bundle = ctx.adversary(adv)?;
            let states = run_to(&bundle, h)?;
            let empty = states.iter().find(|s| s.frontier(s.stage).is_empty());
            r.check("traceable.frontier-nonempty", empty.is_none(), || format!("stage {}", empty.unwrap().stage));
            let last = states.last().expect("at least the initial state");
            let over = last
                .declared_per_level
                .iter()
                .enumerate()
                .find(|(n, &c)| num_bigint::BigUint::from(c) > node_bound(*n));
            r.check("traceable.node-generation-bound", over.is_none(), || {
                let (n, c) = over.unwrap();
                format!("level {n}: {c}")
            });
            let tr = extract_trace(last);
            let big = tr.per_i.iter().find_map(|(i, per)| {
                per.iter()
                    .find(|(n, v)| num_bigint::BigUint::from(v.len()) > trace_bound(*i, **n))
                    .map(|(n, v)| format!("i={i} n={n}: {}", v.len()))
            });
            r.check("traceable.trace-size-bound", big.is_none(), || big.clone().unwrap());
            let dup = provenance_failures(last);
            r.check("traceable.provenance", dup.is_empty(), || format!("duplicate tuple from {}", dup[0].node));
            let diag = diagonalization_failures(last, &bundle);
            r.check("traceable.diagonalization", diag.is_empty(), || format!("{} not terminal", diag[0]));
            let fin = final_node_violations(last, &bundle);
            r.check("traceable.final-nodes", fin.is_empty(), || fin[0].to_string());
            r.pass(
                "traceable.summary",
                format!("stages={} nodes={} tuples={}", last.stage, last.nodes.len(), last.tuples.len()),
            );
        }
        Run::Smc { tree, psi, b, avoid, dagger, a, budget } => {
            let t = ctx.sc.tree(tree)?;
            let psi = ctx.sc.functional(psi)?;
            let dagger = match dagger {
                Some(name) => Dagger::Supplied(ctx.sc.tree(name)?.clone()),
                None => Dagger::FromTprime { a_prefix: a.clone() },
            };
            let budget = ctx.num(*budget, "budget", 1_000_000)?;
            let out = smc_driver_stage(b, t, psi, &dagger, avoid.as_ref(), budget)?;
            r.pass("smc.branch", format!("{} b_next={}", out.branch, out.b_next));
            r.check("smc.b-next-extends", b.is_prefix_of(&out.b_next) && out.t_next.contains(&out.b_next), || {
                format!("{} from {b}", out.b_next)
            });
            r.check("smc.t-next", out.t_next.is_subset(t) && out.t_next.is_two_branching(), || {
                out.t_next.to_string()
            });
            if let Some(p) = avoid {
                r.check("smc.avoids", !p.is_compatible(&out.b_next), || format!("{} meets {p}", out.b_next));
            }
            match out.branch {
                DriverBranch::NoSplittings => {
                    r.pass("smc.no-splittings", format!("above {}", out.witness.unwrap_or_default()));
                }
                DriverBranch::SplittingSubtree => {
                    let sub = out.splitting.unwrap_or_default();
                    r.check("smc.splitting-subtree", is_splitting_tree(psi, &sub, false), || sub.to_string());
                }
            }
        }
        Run::Pi6 { omega, stages } => {
            let oc = ctx.omega(omega)?;
            let stages = ctx.num(*stages, "stages", omega.a.len())?;
            let pi = enumerate_pi(&oc, stages)?;
            let fin = pi.final_tree();
            r.pass("pi6.members", format!("stages={} pi={fin}", pi.stages.len()));
            let gaps = pi_gap_violations(&oc, &fin);
            r.check("pi6.level-gap", gaps.is_empty(), || gaps[0].to_string());
            let norm = fin.iter().find_map(|t| oc.normalization_violation(t));
            r.check("pi6.normalization", norm.is_none(), || norm.clone().unwrap());
        }
    }
    Ok(r)
}

fn check(ctx: &Ctx, cmd: &Check) -> Result<Report> {
    let mut r = Report::new();
    match cmd {
        Check::Thin { tree, sub } => {
            let t = ctx.sc.tree(tree)?;
            let s = ctx.sc.tree(sub)?;
            match thin_violation(t, s)? {
                None => r.pass("thin", None),
                Some(w) => r.fail(
                    "thin",
                    format!(
                        "tau={} weight={} antichain={}",
                        w.tau,
                        w.weight,
                        w.antichain.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                    ),
                ),
            }
        }
        Check::Split { functional, tree, delayed } => {
            let f = ctx.sc.functional(functional)?;
            let t = ctx.sc.tree(tree)?;
            let id = if *delayed { "split.delayed" } else { "split" };
            match crate::functional::splitting_tree_violation(f, t, *delayed) {
                None => r.pass(id, None),
                Some((a, b)) => r.fail(id, format!("{a} {b}")),
            }
        }
        Check::Weaksplit { psi, phi, budget, path } => {
            let psi = ctx.sc.functional(psi)?;
            let phi = ctx.sc.functional(phi)?;
            let w = build_weak_splitting_tree(psi, phi, ctx.num(*budget, "budget", 8)?)?;
            r.pass("weaksplit.tree", format!("members={}", w.tree.len()));
            match weak_splitting_violation(&w, psi, path) {
                None => r.pass("weaksplit.conditions", None),
                Some(v) => r.fail("weaksplit.conditions", v.to_string()),
            }
        }
        Check::Theta { omega, staged } => {
            let oc = ctx.omega(omega)?;
            let st = ctx.sc.staged_tree(staged)?;
            let tp = build_tprime(&oc, st, None)?;
            let v = tprime_violations(&oc, st, &tp);
            r.pass("theta.axioms", format!("{}", tp.theta.axioms.len()));
            if v.is_empty() {
                r.pass("theta.round-trip", None);
            }
            for x in v {
                r.fail("theta.round-trip", x);
            }
        }
        Check::SplitThin { staged, sub } => {
            let st = ctx.sc.staged_tree(staged)?;
            let s = ctx.sc.tree(sub)?;
            let rep = splitting_to_thin(st, s)?;
            r.check("split-thin.thin-ok", rep.thin_ok, || match (&rep.split_witness, &rep.thin_witness) {
                (Some((a, b)), _) => format!("no split: {a} {b}"),
                (None, Some(w)) => format!("not thin at {} (weight {})", w.tau, w.weight),
                (None, None) => String::new(),
            });
        }
    }
    Ok(r)
}

/// One line per trace set, checked against the system's own bound `p`.
fn trace_lines(r: &mut Report, prefix: &str, ts: &TraceSystem) {
    for (n, set) in &ts.w {
        let vals = set.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        match ts.p.get(*n).copied() {
            Some(b) if set.len() as u64 > b => r.fail(format!("{prefix}.w{n}"), format!("size {} > {b}: {vals}", set.len())),
            _ => r.pass(format!("{prefix}.w{n}"), vals),
        }
    }
    if ts.w.is_empty() {
        r.pass(format!("{prefix}.empty"), None);
    }
}

fn trace(ctx: &Ctx, cmd: &Trace) -> Result<Report> {
    let mut r = Report::new();
    match cmd {
        Trace::FromThin { psi, sub } => {
            let ts = trace_from_thin(ctx.sc.functional(psi)?, ctx.sc.tree(sub)?)?;
            trace_lines(&mut r, "from-thin", &ts);
        }
        Trace::Rescale { trace } => {
            let ts = rescale_trace(&trace.system()?)?;
            trace_lines(&mut r, "rescale", &ts);
        }
        Trace::FromSplit { psi, tree, m } => {
            let m = m.unwrap_or(ctx.num(None, "m", 2)? as u64);
            let ts = trace_from_bounded_splitting(ctx.sc.functional(psi)?, ctx.sc.tree(tree)?, m)?;
            trace_lines(&mut r, "from-split", &ts);
        }
        Trace::Dnr { adv } => {
            let tables: Vec<FunctionalTable> = ctx.adversary(adv)?.psi_i;
            trace_lines(&mut r, "dnr", &dnr_trace(&tables));
        }
        Trace::ToThin { staged, trace } => {
            let st = ctx.sc.staged_tree(staged)?;
            let out = thin_from_trace(st, &trace.system()?)?;
            r.check("to-thin", is_thin(&st.final_tree(), &out)?, || out.to_string());
            r.pass("to-thin.tree", out.to_string());
        }
        Trace::Majorizer { psi, tree, n } => {
            let n = ctx.num(*n, "n", 3)?;
            let v = majorizer_from_perfect(ctx.sc.functional(psi)?, ctx.sc.tree(tree)?, n)?;
            r.pass(format!("majorizer.n{n}"), v.to_string());
        }
    }
    Ok(r)
}

fn encode_sd(n: u64, m: u64) -> Result<Report> {
    let mut r = Report::new();
    let code = selfdelim_encode(n, m)?;
    r.pass("encode.sd", code.to_string());
    let back = selfdelim_decode(&code)?;
    r.check("encode.sd.round-trip", back == (n, m), || format!("{back:?}"));
    if n >= 1 && m >= 1 {
        let law = 2 * binary_length(n) + binary_length(m);
        r.check("encode.sd.length", code.len() == law, || format!("{} != {law}", code.len()));
    }
    Ok(r)
}
