//! Stage construction of a class with no computable members whose members
//! are all c.e. traceable.
//!
//! Nodes carry `C(i, n)` modules, which confine `Ψ_i(A; n)` to one value per
//! node, and a `P(i)` module, which steers the class away from `Ψ_i(∅)`.
//! Every non-terminal string of length `s + 1` becomes a node at the end of
//! stage `s + 1`. Each declaration of a string as a node is a new generation
//! of that node.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;

use crate::cupping::AdversaryBundle;
use crate::error::{Error, Result};
use crate::strings::BinaryString;

/// Longest run [`run_to`] accepts.
pub const MAX_HORIZON: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModuleId {
    C { i: usize, n: usize },
    P { i: usize },
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::C { i, n } => write!(f, "C({i},{n})"),
            Self::P { i } => write!(f, "P({i})"),
        }
    }
}

/// Modules allocated to a node of level `j`, in running order.
pub fn modules_for_level(j: usize) -> Vec<ModuleId> {
    let mut out: Vec<ModuleId> = (0..=j).map(|i| ModuleId::C { i, n: j - i }).collect();
    out.push(ModuleId::P { i: j });
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleSlot {
    pub id: ModuleId,
    pub acted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub level: usize,
    pub generation: u64,
    pub declared_stage: usize,
    pub modules: Vec<ModuleSlot>,
    pub last_action_stage: Option<usize>,
}

/// Every extension of `root` incompatible with all of `kept` is terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalRule {
    pub root: BinaryString,
    pub kept: Vec<BinaryString>,
    pub stage: usize,
}

impl TerminalRule {
    pub fn covers(&self, x: &BinaryString) -> bool {
        self.root.is_prefix_of(x) && self.kept.iter().all(|k| !k.is_compatible(x))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleRecord {
    pub i: usize,
    pub n: usize,
    pub value: u64,
    pub node: BinaryString,
    pub node_level: usize,
    pub generation: u64,
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRecord {
    pub stage: usize,
    pub node: BinaryString,
    pub generation: u64,
    pub module: ModuleId,
    /// For `P` actions, the successor node that survives.
    pub kept: Vec<BinaryString>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstructionState {
    pub stage: usize,
    pub pi: BTreeSet<BinaryString>,
    pub nodes: BTreeMap<BinaryString, NodeInfo>,
    pub terminal: Vec<TerminalRule>,
    pub tuples: Vec<TupleRecord>,
    pub actions: Vec<ActionRecord>,
    /// Declarations so far of each string as a node.
    pub generations: BTreeMap<BinaryString, u64>,
    /// Node generations ever declared, per level.
    pub declared_per_level: Vec<u64>,
}

pub fn init_state() -> ConstructionState {
    let mut st = ConstructionState {
        stage: 0,
        pi: BTreeSet::new(),
        nodes: BTreeMap::new(),
        terminal: Vec::new(),
        tuples: Vec::new(),
        actions: Vec::new(),
        generations: BTreeMap::new(),
        declared_per_level: Vec::new(),
    };
    st.pi.insert(BinaryString::empty());
    st.declare(BinaryString::empty(), 0);
    st
}

impl ConstructionState {
    pub fn is_terminal(&self, x: &BinaryString) -> bool {
        self.terminal.iter().any(|r| r.covers(x))
    }

    fn node_level_of(&self, x: &BinaryString) -> usize {
        x.proper_prefixes().filter(|p| self.nodes.contains_key(p)).count()
    }

    fn declare(&mut self, x: BinaryString, stage: usize) {
        let level = self.node_level_of(&x);
        let gen = self.generations.entry(x.clone()).or_insert(0);
        *gen += 1;
        if self.declared_per_level.len() <= level {
            self.declared_per_level.resize(level + 1, 0);
        }
        self.declared_per_level[level] += 1;
        let info = NodeInfo {
            level,
            generation: *gen,
            declared_stage: stage,
            modules: modules_for_level(level)
                .into_iter()
                .map(|id| ModuleSlot { id, acted: false })
                .collect(),
            last_action_stage: None,
        };
        self.nodes.insert(x, info);
    }

    fn strip_proper_extensions(&mut self, tau: &BinaryString) {
        self.nodes.retain(|x, _| !tau.is_proper_prefix_of(x));
    }

    /// Non-terminal extensions of `prefix` of length `len`, length-lex, at
    /// most `limit` of them.
    pub fn non_terminal_extensions(
        &self,
        prefix: &BinaryString,
        len: usize,
        limit: usize,
    ) -> Vec<BinaryString> {
        if prefix.len() > len {
            return Vec::new();
        }
        BinaryString::all_of_length(len - prefix.len())
            .map(|tail| prefix.concat(&tail))
            .filter(|x| !self.is_terminal(x))
            .take(limit)
            .collect()
    }

    /// Non-terminal strings of length `len`.
    pub fn frontier(&self, len: usize) -> Vec<BinaryString> {
        self.non_terminal_extensions(&BinaryString::empty(), len, usize::MAX)
    }

    /// Nodes properly extending `tau` with no node in between.
    pub fn successor_nodes(&self, tau: &BinaryString) -> Vec<BinaryString> {
        let ext: Vec<&BinaryString> = self.nodes.keys().filter(|x| tau.is_proper_prefix_of(x)).collect();
        ext.iter()
            .filter(|x| !ext.iter().any(|y| y.is_proper_prefix_of(x)))
            .map(|x| (*x).clone())
            .collect()
    }

    fn slot(&self, tau: &BinaryString, id: ModuleId) -> Result<usize> {
        let info = self
            .nodes
            .get(tau)
            .ok_or_else(|| Error::Protocol(format!("{tau} is not a node")))?;
        let k = info
            .modules
            .iter()
            .position(|m| m.id == id)
            .ok_or_else(|| Error::Protocol(format!("{id} is not allocated to {tau}")))?;
        if info.modules[k].acted {
            return Err(Error::Protocol(format!("{id} at {tau} has already acted")));
        }
        Ok(k)
    }

    fn record_action(&mut self, tau: &BinaryString, k: usize, kept: Vec<BinaryString>) {
        let stage = self.stage + 1;
        let info = self.nodes.get_mut(tau).unwrap();
        info.modules[k].acted = true;
        info.last_action_stage = Some(stage);
        let rec = ActionRecord {
            stage,
            node: tau.clone(),
            generation: info.generation,
            module: info.modules[k].id,
            kept,
        };
        self.actions.push(rec);
    }

    /// The `C(i, n)` search at stage `self.stage + 1`: the length-lex least
    /// `τ′ ⊇ τ` of length below `s` with two non-terminal extensions of length
    /// `s` on which `Ψ_i(τ′; n)` converges within `s` steps.
    fn c_candidate(
        &self,
        tau: &BinaryString,
        i: usize,
        n: usize,
        adv: &AdversaryBundle,
    ) -> Option<(BinaryString, BinaryString, BinaryString, u64)> {
        let s = self.stage;
        let table = adv.psi_i.get(i)?;
        let mut candidates: BTreeSet<BinaryString> = BTreeSet::new();
        for a in table.axioms() {
            if a.arg != n as u64 || a.steps > s as u64 || !a.sigma.is_compatible(tau) {
                continue;
            }
            let t = if a.sigma.len() > tau.len() { a.sigma.clone() } else { tau.clone() };
            if t.len() < s {
                candidates.insert(t);
            }
        }
        candidates.into_iter().find_map(|t| {
            let ext = self.non_terminal_extensions(&t, s, 2);
            let value = table.eval_within(&t, n as u64, s as u64)?;
            (ext.len() == 2).then(|| (t, ext[0].clone(), ext[1].clone(), value))
        })
    }

    fn try_c(&mut self, tau: &BinaryString, k: usize, i: usize, n: usize, adv: &AdversaryBundle) -> bool {
        let Some((_, t0, t1, value)) = self.c_candidate(tau, i, n, adv) else {
            return false;
        };
        let stage = self.stage + 1;
        let (level, generation) = {
            let info = &self.nodes[tau];
            (info.level, info.generation)
        };
        self.strip_proper_extensions(tau);
        self.terminal.push(TerminalRule {
            root: tau.clone(),
            kept: vec![t0.clone(), t1.clone()],
            stage,
        });
        self.record_action(tau, k, Vec::new());
        self.declare(t0, stage);
        self.declare(t1, stage);
        self.tuples.push(TupleRecord {
            i,
            n,
            value,
            node: tau.clone(),
            node_level: level,
            generation,
            stage,
        });
        true
    }

    fn p_target(&self, tau: &BinaryString, i: usize, adv: &AdversaryBundle) -> Option<(BinaryString, BinaryString)> {
        let succ = self.successor_nodes(tau);
        if succ.len() != 2 {
            return None;
        }
        let out = adv.psi_i.get(i)?.output_within(&BinaryString::empty(), self.stage as u64);
        let path = BinaryString::from_values_prefix(&out);
        let hit = succ.iter().position(|x| x.is_prefix_of(&path))?;
        Some((succ[hit].clone(), succ[1 - hit].clone()))
    }

    fn try_p(&mut self, tau: &BinaryString, k: usize, i: usize, adv: &AdversaryBundle) -> bool {
        if self.stage + 1 < self.nodes[tau].declared_stage + 2 {
            return false;
        }
        let Some((_, other)) = self.p_target(tau, i, adv) else {
            return false;
        };
        let rule = TerminalRule {
            root: tau.clone(),
            kept: vec![other.clone()],
            stage: self.stage + 1,
        };
        self.nodes.retain(|x, _| !(tau.is_proper_prefix_of(x) && rule.covers(x)));
        self.terminal.push(rule);
        self.record_action(tau, k, vec![other]);
        true
    }

    /// Runs the first module of `tau` (in allocation order) that acts.
    fn run_node(&mut self, tau: &BinaryString, adv: &AdversaryBundle) {
        let ids: Vec<(usize, ModuleId)> = self.nodes[tau]
            .modules
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.acted)
            .map(|(k, m)| (k, m.id))
            .collect();
        for (k, id) in ids {
            let acted = match id {
                ModuleId::C { i, n } => self.try_c(tau, k, i, n, adv),
                ModuleId::P { i } => self.try_p(tau, k, i, adv),
            };
            if acted {
                return;
            }
        }
    }
}

/// Attempts one `C(i, n)` action at `tau` during stage `st.stage + 1`.
pub fn act_c_module(
    st: &ConstructionState,
    tau: &BinaryString,
    i: usize,
    n: usize,
    adv: &AdversaryBundle,
) -> Result<Option<ConstructionState>> {
    let k = st.slot(tau, ModuleId::C { i, n })?;
    let mut next = st.clone();
    Ok(next.try_c(tau, k, i, n, adv).then_some(next))
}

/// Attempts one `P(i)` action at `tau` during stage `st.stage + 1`.
pub fn act_p_module(
    st: &ConstructionState,
    tau: &BinaryString,
    i: usize,
    adv: &AdversaryBundle,
) -> Result<Option<ConstructionState>> {
    let k = st.slot(tau, ModuleId::P { i })?;
    let succ = st.successor_nodes(tau);
    if succ.len() != 2 {
        return Err(Error::Protocol(format!("{tau} has {} successor nodes", succ.len())));
    }
    let mut next = st.clone();
    Ok(next.try_p(tau, k, i, adv).then_some(next))
}

/// Stage `st.stage + 1`.
pub fn run_stage(st: &ConstructionState, adv: &AdversaryBundle) -> ConstructionState {
    let mut next = st.clone();
    let s = st.stage;
    let mut order: Vec<(usize, BinaryString)> = next
        .nodes
        .iter()
        .map(|(x, info)| (info.level, x.clone()))
        .collect();
    order.sort();
    for (_, tau) in order {
        let fresh = next.nodes.get(&tau).is_some_and(|info| info.declared_stage <= s);
        if fresh {
            next.run_node(&tau, adv);
        }
    }
    next.stage = s + 1;
    for x in BinaryString::all_of_length(s + 1) {
        if !next.is_terminal(&x) {
            next.pi.insert(x.clone());
            next.declare(x, s + 1);
        }
    }
    next
}

/// Runs from stage 0 to `horizon`, returning every intermediate state.
pub fn run_to(adv: &AdversaryBundle, horizon: usize) -> Result<Vec<ConstructionState>> {
    if horizon > MAX_HORIZON {
        return Err(Error::Resource(format!("horizon {horizon} exceeds {MAX_HORIZON}")));
    }
    let mut states = vec![init_state()];
    for _ in 0..horizon {
        let next = run_stage(states.last().unwrap(), adv);
        states.push(next);
    }
    Ok(states)
}

/// `per_i[i][n]` = values `d` with a tuple `(i, n, d)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceReport {
    pub per_i: BTreeMap<usize, BTreeMap<usize, BTreeSet<u64>>>,
}

pub fn extract_trace(st: &ConstructionState) -> TraceReport {
    let mut r = TraceReport::default();
    for t in &st.tuples {
        r.per_i.entry(t.i).or_default().entry(t.n).or_default().insert(t.value);
    }
    r
}

/// `2^n (n+1)!`, the bound on node generations of level `n`.
pub fn node_bound(n: usize) -> BigUint {
    (BigUint::one() << n) * factorial(n + 1)
}

/// `2^{n+i} (n+i+1)!`, the bound on trace sizes.
pub fn trace_bound(i: usize, n: usize) -> BigUint {
    node_bound(n + i)
}

/// `2^{n+i} (n+i)!`, the size function the construction is set up to beat.
pub fn p_bound(i: usize, n: usize) -> BigUint {
    (BigUint::one() << (n + i)) * factorial(n + i)
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

/// Checks `2(n+2) · 2^n (n+1)! = 2^{n+1} (n+2)!` in exact arithmetic.
pub fn step_identity_holds(n: usize) -> bool {
    BigUint::from(2 * (n + 2)) * node_bound(n) == (BigUint::one() << (n + 1)) * factorial(n + 2)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FinalNodeViolation {
    NoSuccessor(BinaryString),
    SuccessorOnPath { node: BinaryString, successor: BinaryString },
    Uncovered { node: BinaryString, string: BinaryString },
}

impl fmt::Display for FinalNodeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoSuccessor(t) => write!(f, "{t} has no successor node"),
            Self::SuccessorOnPath { node, successor } => {
                write!(f, "successor {successor} of {node} lies on Psi(0)")
            }
            Self::Uncovered { node, string } => {
                write!(f, "{string} extends {node} but no successor node")
            }
        }
    }
}

/// Horizon-relative check of the final-node properties.
///
/// Nodes of length equal to the horizon have no successors yet and are
/// skipped. The path condition is checked only where `P` has acted or had a
/// full stage to act after the successors were declared.
pub fn final_node_violations(st: &ConstructionState, adv: &AdversaryBundle) -> Vec<FinalNodeViolation> {
    let h = st.stage;
    let mut out = Vec::new();
    for (tau, info) in &st.nodes {
        if tau.len() >= h {
            continue;
        }
        let succ = st.successor_nodes(tau);
        if succ.is_empty() {
            out.push(FinalNodeViolation::NoSuccessor(tau.clone()));
            continue;
        }
        let p_acted = info
            .modules
            .iter()
            .any(|m| matches!(m.id, ModuleId::P { .. }) && m.acted);
        let had_chance = h >= 1
            && h >= info.declared_stage + 2
            && info.last_action_stage != Some(h)
            && succ.len() == 2
            && succ.iter().all(|x| st.nodes[x].declared_stage < h);
        if p_acted || had_chance {
            if let Some(table) = adv.psi_i.get(info.level) {
                let steps = if p_acted { u64::MAX } else { (h - 1) as u64 };
                let path = BinaryString::from_values_prefix(
                    &table.output_within(&BinaryString::empty(), steps),
                );
                for x in succ.iter().filter(|x| x.is_prefix_of(&path)) {
                    out.push(FinalNodeViolation::SuccessorOnPath {
                        node: tau.clone(),
                        successor: x.clone(),
                    });
                }
            }
        }
        for x in st.non_terminal_extensions(tau, h, usize::MAX) {
            if !succ.iter().any(|y| y.is_prefix_of(&x)) {
                out.push(FinalNodeViolation::Uncovered {
                    node: tau.clone(),
                    string: x,
                });
            }
        }
    }
    out
}

pub fn verify_final_nodes(st: &ConstructionState, adv: &AdversaryBundle) -> bool {
    final_node_violations(st, adv).is_empty()
}

/// For every `P(i)` that acted, the horizon-length prefix of `Ψ_i(∅)` (when
/// that long) is terminal. Returns the offending prefixes.
pub fn diagonalization_failures(st: &ConstructionState, adv: &AdversaryBundle) -> Vec<BinaryString> {
    let h = st.stage;
    let mut out = Vec::new();
    for a in &st.actions {
        let ModuleId::P { i } = a.module else { continue };
        let Some(table) = adv.psi_i.get(i) else { continue };
        let path = BinaryString::from_values_prefix(&table.output(&BinaryString::empty()));
        if path.len() >= h && a.node.is_prefix_of(&path) {
            let x = path.prefix(h);
            if !st.is_terminal(&x) {
                out.push(x);
            }
        }
    }
    out
}

/// Tuples enumerated twice by one node generation, or by a node of the wrong level.
pub fn provenance_failures(st: &ConstructionState) -> Vec<TupleRecord> {
    let mut seen = BTreeSet::new();
    st.tuples
        .iter()
        .filter(|t| {
            let fresh = seen.insert((t.node.clone(), t.generation, t.i, t.n));
            !fresh || t.node_level != t.n + t.i
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{Axiom, FunctionalTable};
    use crate::strings::bs;

    fn table(rows: &[(&str, u64, u64, u64)]) -> FunctionalTable {
        FunctionalTable::new(rows.iter().map(|&(s, a, v, st)| Axiom::new(bs(s), a, v, st)).collect()).unwrap()
    }

    /// Table whose output at the empty oracle is the given path.
    fn path_table(path: &str) -> FunctionalTable {
        let p = bs(path);
        FunctionalTable::new(
            (0..p.len())
                .map(|k| Axiom::new(BinaryString::empty(), k as u64, u64::from(p.bit(k).unwrap()), 1))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn init_examples() {
        let st = init_state();
        assert_eq!(st, init_state());
        assert_eq!(st.pi, [bs("e")].into_iter().collect());
        let info = &st.nodes[&bs("e")];
        assert_eq!(info.level, 0);
        let ids: Vec<ModuleId> = info.modules.iter().map(|m| m.id).collect();
        assert_eq!(ids, vec![ModuleId::C { i: 0, n: 0 }, ModuleId::P { i: 0 }]);
        assert!(st.tuples.is_empty());
        assert!(extract_trace(&st).per_i.is_empty());
    }

    #[test]
    fn empty_adversary_stage() {
        let adv = AdversaryBundle::default();
        let st = run_stage(&init_state(), &adv);
        assert!(st.pi.contains(&bs("0")) && st.pi.contains(&bs("1")));
        assert_eq!(st.nodes[&bs("0")].level, 1);
        assert_eq!(st.nodes[&bs("1")].level, 1);
        assert_eq!(act_c_module(&st, &bs("e"), 0, 0, &adv).unwrap(), None);
        assert_eq!(run_stage(&init_state(), &adv), st);
        let states = run_to(&adv, 4).unwrap();
        assert!(verify_final_nodes(states.last().unwrap(), &adv));
    }

    #[test]
    fn c_action_replay() {
        let adv = AdversaryBundle::new(vec![table(&[("e", 0, 7, 1)])]);
        let st1 = run_stage(&init_state(), &adv);
        assert!(st1.tuples.is_empty());
        let acted = act_c_module(&st1, &bs("e"), 0, 0, &adv).unwrap().unwrap();
        assert_eq!(acted.tuples.len(), 1);
        let st2 = run_stage(&st1, &adv);
        let tr = extract_trace(&st2);
        assert_eq!(tr.per_i[&0][&0], [7].into_iter().collect());
        let ids: Vec<ModuleId> = st2.nodes[&bs("0")].modules.iter().map(|m| m.id).collect();
        assert_eq!(
            ids,
            vec![ModuleId::C { i: 0, n: 1 }, ModuleId::C { i: 1, n: 0 }, ModuleId::P { i: 1 }]
        );
        assert_eq!(st2.nodes[&bs("0")].generation, 2);
        assert!(matches!(
            act_c_module(&st2, &bs("e"), 0, 0, &adv),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn p_action_prunes_path() {
        let adv = AdversaryBundle::new(vec![path_table("0110")]);
        assert!(matches!(act_p_module(&init_state(), &bs("e"), 0, &adv), Err(Error::Protocol(_))));
        let acted = act_p_module(&run_stage(&init_state(), &adv), &bs("e"), 0, &adv).unwrap().unwrap();
        assert_eq!(acted.nodes.keys().cloned().collect::<Vec<_>>(), vec![bs("e"), bs("1")]);
        let states = run_to(&adv, 6).unwrap();
        let last = states.last().unwrap();
        assert!(last.is_terminal(&bs("0")));
        assert!(!last.is_terminal(&bs("1")));
        assert!(verify_final_nodes(last, &adv));
        assert!(diagonalization_failures(last, &adv).is_empty());
        assert!(matches!(act_p_module(last, &bs("0"), 1, &adv), Err(Error::Protocol(_))));
    }

    #[test]
    fn bounds() {
        assert_eq!(node_bound(0), BigUint::from(1u32));
        assert_eq!(node_bound(2), BigUint::from(24u32));
        for n in 0..=8 {
            assert!(step_identity_holds(n));
        }
        assert_eq!(p_bound(1, 1), BigUint::from(8u32));
        assert_eq!(trace_bound(1, 1), BigUint::from(24u32));
    }

    #[test]
    fn invariants_on_mixed_adversary() {
        let adv = AdversaryBundle::new(vec![
            table(&[("e", 0, 3, 2), ("0", 1, 1, 3), ("1", 1, 2, 1), ("01", 2, 5, 2)]),
            table(&[("00", 0, 4, 1), ("1", 0, 9, 4), ("e", 1, 1, 1)]),
            path_table("101101"),
        ]);
        let states = run_to(&adv, 8).unwrap();
        for st in &states {
            assert!(!st.frontier(st.stage).is_empty());
            for (n, &count) in st.declared_per_level.iter().enumerate() {
                assert!(BigUint::from(count) <= node_bound(n));
            }
        }
        let last = states.last().unwrap();
        assert!(provenance_failures(last).is_empty());
        for (i, per_n) in extract_trace(last).per_i {
            for (n, vals) in per_n {
                assert!(BigUint::from(vals.len()) <= trace_bound(i, n));
            }
        }
        assert!(verify_final_nodes(last, &adv), "{:?}", final_node_violations(last, &adv));
        assert!(diagonalization_failures(last, &adv).is_empty());
    }
}
