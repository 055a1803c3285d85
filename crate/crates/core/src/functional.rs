//! Partial Turing functionals as finite axiom tables.
//!
//! An axiom `(σ, n, v, s)` says that every oracle extending `σ` computes
//! value `v` at argument `n` in `s` steps. Oracles are either binary strings
//! or finite value sequences; an axiom's `σ` applies to a value sequence when
//! its bits are an initial segment of the sequence.
//!
//! The hat restriction `Ψ̂(τ; n)` is defined iff some applicable axiom for `n`
//! has `steps ≤ |τ|` and `Ψ̂(τ⁻; n′)` is defined for every `n′ < n`. It is
//! therefore undefined at the empty oracle and grows by at most one argument
//! per oracle position.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::strings::BinaryString;
use crate::tree::FiniteTree;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Axiom {
    pub sigma: BinaryString,
    pub arg: u64,
    pub value: u64,
    pub steps: u64,
}

impl Axiom {
    pub fn new(sigma: BinaryString, arg: u64, value: u64, steps: u64) -> Self {
        Self {
            sigma,
            arg,
            value,
            steps,
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.sigma, self.arg, self.value, self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    value: u64,
    min_steps: u64,
}

/// A consistent finite set of axioms.
#[derive(Debug, Clone, Default)]
pub struct FunctionalTable {
    axioms: Vec<Axiom>,
    index: HashMap<(BinaryString, u64), Entry>,
}

impl PartialEq for FunctionalTable {
    fn eq(&self, other: &Self) -> bool {
        self.axioms == other.axioms
    }
}

impl Eq for FunctionalTable {}

impl FunctionalTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates `steps ≥ 1` and consistency. Clashes name the axiom positions
    /// (0-based, in input order).
    pub fn new(axioms: Vec<Axiom>) -> Result<Self> {
        if let Some((i, _)) = axioms.iter().enumerate().find(|(_, a)| a.steps == 0) {
            return Err(Error::Validation(format!("axiom #{i} has steps 0")));
        }
        let mut order: Vec<usize> = (0..axioms.len()).collect();
        order.sort_by_key(|&i| (axioms[i].sigma.len(), i));
        let mut seen: HashMap<(BinaryString, u64), usize> = HashMap::new();
        let mut index: HashMap<(BinaryString, u64), Entry> = HashMap::new();
        for &i in &order {
            let a = &axioms[i];
            for k in 0..=a.sigma.len() {
                let key = (a.sigma.prefix(k), a.arg);
                if let Some(&j) = seen.get(&key) {
                    if axioms[j].value != a.value {
                        return Err(Error::Inconsistent {
                            first: i.min(j),
                            second: i.max(j),
                            detail: format!(
                                "{} and {} give different values at argument {}",
                                axioms[i.min(j)],
                                axioms[i.max(j)],
                                a.arg
                            ),
                        });
                    }
                }
            }
            seen.entry((a.sigma.clone(), a.arg)).or_insert(i);
            index
                .entry((a.sigma.clone(), a.arg))
                .and_modify(|e| e.min_steps = e.min_steps.min(a.steps))
                .or_insert(Entry {
                    value: a.value,
                    min_steps: a.steps,
                });
        }
        Ok(Self { axioms, index })
    }

    pub fn axioms(&self) -> &[Axiom] {
        &self.axioms
    }

    pub fn len(&self) -> usize {
        self.axioms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axioms.is_empty()
    }

    /// Value at `n` together with the fewest steps and the shortest use among
    /// applicable axioms that respect the step bound.
    fn lookup(&self, oracle: &[u64], n: u64, step_bound: Option<u64>) -> Option<Lookup> {
        let bits = BinaryString::from_values_prefix(oracle);
        let mut found: Option<Lookup> = None;
        for k in 0..=bits.len() {
            if let Some(e) = self.index.get(&(bits.prefix(k), n)) {
                if step_bound.is_some_and(|b| e.min_steps > b) {
                    continue;
                }
                match &mut found {
                    None => {
                        found = Some(Lookup {
                            value: e.value,
                            steps: e.min_steps,
                            use_len: k,
                        })
                    }
                    Some(f) => f.steps = f.steps.min(e.min_steps),
                }
            }
        }
        found
    }

    /// `Ψ(τ; n)` under the use principle.
    pub fn eval(&self, tau: &BinaryString, n: u64) -> Option<u64> {
        self.eval_values(&tau.to_values(), n)
    }

    pub fn eval_values(&self, oracle: &[u64], n: u64) -> Option<u64> {
        self.lookup(oracle, n, None).map(|l| l.value)
    }

    /// `Ψ(τ; n)` restricted to computations of at most `max_steps` steps.
    pub fn eval_within(&self, tau: &BinaryString, n: u64, max_steps: u64) -> Option<u64> {
        self.lookup(&tau.to_values(), n, Some(max_steps)).map(|l| l.value)
    }

    /// `Ψ(τ)`: values on the longest initial segment of defined arguments.
    pub fn output(&self, tau: &BinaryString) -> Vec<u64> {
        self.output_values(&tau.to_values())
    }

    pub fn output_values(&self, oracle: &[u64]) -> Vec<u64> {
        (0u64..)
            .map_while(|n| self.eval_values(oracle, n))
            .collect()
    }

    /// Output with computations capped at `max_steps`.
    pub fn output_within(&self, tau: &BinaryString, max_steps: u64) -> Vec<u64> {
        let oracle = tau.to_values();
        (0u64..)
            .map_while(|n| self.lookup(&oracle, n, Some(max_steps)).map(|l| l.value))
            .collect()
    }

    /// `Ψ̂(τ; n)`.
    pub fn hat_eval(&self, tau: &BinaryString, n: u64) -> Option<u64> {
        self.hat_output(tau).get(n as usize).copied()
    }

    /// `Ψ̂(τ)`.
    pub fn hat_output(&self, tau: &BinaryString) -> Vec<u64> {
        self.hat_output_values(&tau.to_values())
    }

    pub fn hat_output_values(&self, oracle: &[u64]) -> Vec<u64> {
        self.hat_trace(oracle).0
    }

    /// Hat output along with, per defined argument, the use length of the
    /// computation that defines it at the full oracle.
    fn hat_trace(&self, oracle: &[u64]) -> (Vec<u64>, Vec<usize>) {
        let mut out: Vec<u64> = Vec::new();
        let mut uses: Vec<usize> = Vec::new();
        for k in 1..=oracle.len() {
            let prefix = &oracle[..k];
            let limit = out.len() as u64;
            let mut next = Vec::new();
            let mut next_uses = Vec::new();
            for n in 0..=limit {
                match self.lookup(prefix, n, Some(k as u64)) {
                    Some(l) => {
                        next.push(l.value);
                        next_uses.push(l.use_len);
                    }
                    None => break,
                }
            }
            out = next;
            uses = next_uses;
        }
        (out, uses)
    }

    /// True iff `Ψ(τ) = Ψ̂(τ)` as value sequences.
    pub fn is_hat_on(&self, tau: &BinaryString) -> bool {
        self.output(tau) == self.hat_output(tau)
    }
}

#[derive(Debug, Clone, Copy)]
struct Lookup {
    value: u64,
    steps: u64,
    use_len: usize,
}

/// True iff the sequences disagree at some index where both are defined.
pub fn outputs_split(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x != y)
}

/// True iff the sequences disagree at some index `≤ bound`.
pub fn outputs_split_below(a: &[u64], b: &[u64], bound: usize) -> bool {
    a.iter().zip(b).take(bound + 1).any(|(x, y)| x != y)
}

pub fn is_splitting_pair(f: &FunctionalTable, a: &BinaryString, b: &BinaryString) -> Result<bool> {
    if a.is_compatible(b) {
        return Err(Error::Precondition(format!(
            "{a} and {b} are compatible"
        )));
    }
    Ok(outputs_split(&f.output(a), &f.output(b)))
}

/// First incompatible pair violating the (plain or delayed) splitting condition.
pub fn splitting_tree_violation(
    f: &FunctionalTable,
    t: &FiniteTree,
    delayed: bool,
) -> Option<(BinaryString, BinaryString)> {
    let members: Vec<&BinaryString> = t.iter().collect();
    let outputs: Vec<Vec<u64>> = members.iter().map(|m| f.output(m)).collect();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let (a, b) = (members[i], members[j]);
            if a.is_compatible(b) {
                continue;
            }
            if delayed && !(has_member_above_meet(t, a, b) && has_member_above_meet(t, b, a)) {
                continue;
            }
            if !outputs_split(&outputs[i], &outputs[j]) {
                return Some((a.clone(), b.clone()));
            }
        }
    }
    None
}

/// Some proper prefix of `a` in `t` is incompatible with `b`.
fn has_member_above_meet(t: &FiniteTree, a: &BinaryString, b: &BinaryString) -> bool {
    let meet = (0..a.len().min(b.len()))
        .take_while(|&i| a.bit(i) == b.bit(i))
        .count();
    (meet + 1..a.len()).any(|k| t.contains(&a.prefix(k)))
}

pub fn is_splitting_tree(f: &FunctionalTable, t: &FiniteTree, delayed: bool) -> bool {
    splitting_tree_violation(f, t, delayed).is_none()
}

/// A finite weakly splitting tree with its witnesses `φ` and `ψ`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WeakSplitWitness {
    pub tree: FiniteTree,
    pub phi: BTreeMap<BinaryString, u64>,
    pub psi: BTreeMap<BinaryString, u64>,
}

impl WeakSplitWitness {
    pub fn insert(&mut self, tau: BinaryString, phi: u64, psi: u64) {
        self.tree.insert(tau.clone());
        self.phi.insert(tau.clone(), phi);
        self.psi.insert(tau, psi);
    }
}

/// Largest budget accepted by [`build_weak_splitting_tree`].
pub const MAX_WEAK_SPLIT_BUDGET: usize = 20;

/// Length of agreement between `Φ̂(Ψ̂(τ))` and `τ`, and the Ψ̂-use of each
/// agreeing argument.
fn weak_split_agreement(
    psi: &FunctionalTable,
    phi: &FunctionalTable,
    tau: &BinaryString,
) -> (usize, Vec<usize>) {
    let u = psi.hat_output(tau);
    let (v, uses) = phi.hat_trace(&u);
    let agree = v
        .iter()
        .zip(tau.bits())
        .take_while(|(x, &b)| **x == u64::from(b))
        .count();
    (agree, uses)
}

/// Enumerates the weakly `Ψ`-splitting tree built from `Φ̂(Ψ̂(τ))`.
///
/// `τ` enters when, for some `n`, `Φ̂(Ψ̂(τ))` agrees with `τ` on all
/// arguments `≤ n` and no proper initial segment of `τ` does so for the same
/// `n`. `φ(τ)` is the greatest such `n` and `ψ(τ)` the largest Ψ̂-argument
/// read by the `Φ̂` computations at arguments `≤ φ(τ)`.
pub fn build_weak_splitting_tree(
    psi: &FunctionalTable,
    phi: &FunctionalTable,
    length_budget: usize,
) -> Result<WeakSplitWitness> {
    if length_budget > MAX_WEAK_SPLIT_BUDGET {
        return Err(Error::Resource(format!(
            "length budget {length_budget} exceeds {MAX_WEAK_SPLIT_BUDGET}"
        )));
    }
    let mut w = WeakSplitWitness::default();
    // agreement length reached by some proper prefix, per node of the full tree
    let mut best_prefix: HashMap<BinaryString, usize> = HashMap::new();
    for len in 0..=length_budget {
        for tau in BinaryString::all_of_length(len) {
            let inherited = if tau.is_empty() {
                0
            } else {
                let p = tau.parent();
                let own = weak_split_agreement(psi, phi, &p).0;
                best_prefix[&p].max(own)
            };
            let (agree, uses) = weak_split_agreement(psi, phi, &tau);
            if agree > inherited {
                let n = agree - 1;
                let max_use = uses[..=n].iter().copied().max().unwrap_or(0);
                w.insert(tau.clone(), n as u64, max_use.saturating_sub(1) as u64);
            }
            best_prefix.insert(tau, inherited);
        }
    }
    Ok(w)
}

/// Which condition of a weakly splitting witness failed, with witnesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeakSplitViolation {
    MissingWitness(BinaryString),
    PhiTooLarge(BinaryString),
    PsiTooLarge(BinaryString),
    NoSplit(BinaryString, BinaryString),
    PhiNotIncreasing(BinaryString, BinaryString),
}

impl fmt::Display for WeakSplitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingWitness(t) => write!(f, "missing phi/psi at {t}"),
            Self::PhiTooLarge(t) => write!(f, "phi({t}) >= |{t}|"),
            Self::PsiTooLarge(t) => write!(f, "psi({t}) >= |Psi({t})|"),
            Self::NoSplit(a, b) => write!(f, "{a} {b} do not split below min psi"),
            Self::PhiNotIncreasing(a, b) => write!(f, "phi({a}) >= phi({b}) along path"),
        }
    }
}

/// Checks conditions (1), (2) and the finite path surrogate for (3).
pub fn weak_splitting_violation(
    w: &WeakSplitWitness,
    psi: &FunctionalTable,
    path_prefix: &BinaryString,
) -> Option<WeakSplitViolation> {
    let mut outputs = BTreeMap::new();
    for tau in w.tree.iter() {
        let (Some(&phi), Some(&ps)) = (w.phi.get(tau), w.psi.get(tau)) else {
            return Some(WeakSplitViolation::MissingWitness(tau.clone()));
        };
        if phi >= tau.len() as u64 {
            return Some(WeakSplitViolation::PhiTooLarge(tau.clone()));
        }
        let out = psi.output(tau);
        if ps >= out.len() as u64 {
            return Some(WeakSplitViolation::PsiTooLarge(tau.clone()));
        }
        outputs.insert(tau.clone(), out);
    }
    let members: Vec<&BinaryString> = w.tree.iter().collect();
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            let k = w.phi[*a].min(w.phi[*b]) as usize;
            let differs = (0..=k).any(|p| matches!((a.bit(p), b.bit(p)), (Some(x), Some(y)) if x != y));
            if differs {
                let m = w.psi[*a].min(w.psi[*b]) as usize;
                if !outputs_split_below(&outputs[*a], &outputs[*b], m) {
                    return Some(WeakSplitViolation::NoSplit((*a).clone(), (*b).clone()));
                }
            }
        }
    }
    let along: Vec<&BinaryString> = w.tree.iter().filter(|t| t.is_prefix_of(path_prefix)).collect();
    for pair in along.windows(2) {
        if w.phi[pair[0]] >= w.phi[pair[1]] {
            return Some(WeakSplitViolation::PhiNotIncreasing(pair[0].clone(), pair[1].clone()));
        }
    }
    None
}

pub fn check_weak_splitting(
    w: &WeakSplitWitness,
    psi: &FunctionalTable,
    path_prefix: &BinaryString,
) -> bool {
    weak_splitting_violation(w, psi, path_prefix).is_none()
}

/// Recovers `A↾n` from an initial segment of `Ψ(A)`.
pub fn decode_initial_segment(
    w: &WeakSplitWitness,
    psi: &FunctionalTable,
    oracle_prefix: &[u64],
    n: usize,
) -> Option<BinaryString> {
    w.tree
        .iter()
        .find(|tau| {
            let ps = w.psi[*tau] as usize;
            let out = psi.output(tau);
            let agrees = out.len() > ps
                && oracle_prefix.len() > ps
                && out[..=ps] == oracle_prefix[..=ps];
            agrees && w.phi[*tau] + 1 >= n as u64
        })
        .map(|tau| tau.prefix(n))
}

fn binary_output(f: &FunctionalTable, tau: &BinaryString) -> Result<BinaryString> {
    let out = f.output(tau);
    let s = BinaryString::from_values_prefix(&out);
    if s.len() != out.len() {
        return Err(Error::Validation(format!("Psi({tau}) is not a binary string")));
    }
    Ok(s)
}

fn check_image_preconditions(f: &FunctionalTable, t: &FiniteTree) -> Result<()> {
    if !t.is_two_branching() {
        return Err(Error::Validation("tree is not 2-branching".into()));
    }
    if let Some(tau) = t.iter().find(|tau| !f.is_hat_on(tau)) {
        return Err(Error::Validation(format!("Psi({tau}) differs from its hat restriction")));
    }
    if let Some((a, b)) = splitting_tree_violation(f, t, false) {
        return Err(Error::Validation(format!("{a} and {b} do not Psi-split")));
    }
    Ok(())
}

/// `{ Ψ(τ) : τ ∈ t }` for a 2-branching `Ψ`-splitting `t` on which `Ψ = Ψ̂`.
pub fn image_tree(f: &FunctionalTable, t: &FiniteTree) -> Result<FiniteTree> {
    check_image_preconditions(f, t)?;
    let image = t
        .iter()
        .map(|tau| binary_output(f, tau))
        .collect::<Result<FiniteTree>>()?;
    if !image.is_two_branching() {
        return Err(Error::Validation("image is not 2-branching".into()));
    }
    Ok(image)
}

/// `{ τ ∈ t0 : Ψ(τ) ∈ t2 }` for a 2-branching `t2` inside the image of `t0`.
pub fn pullback_tree(f: &FunctionalTable, t0: &FiniteTree, t2: &FiniteTree) -> Result<FiniteTree> {
    let image = image_tree(f, t0)?;
    if !t2.is_subset(&image) {
        return Err(Error::Validation("t2 is not contained in the image".into()));
    }
    if !t2.is_two_branching() {
        return Err(Error::Validation("t2 is not 2-branching".into()));
    }
    let mut out = FiniteTree::new();
    for tau in t0.iter() {
        if t2.contains(&binary_output(f, tau)?) {
            out.insert(tau.clone());
        }
    }
    if !out.is_subset(t0) || !out.is_two_branching() {
        return Err(Error::Validation("pullback is not a 2-branching subtree".into()));
    }
    Ok(out)
}

/// `Ψ(τ; n) = τ(n)` for strings of length at most `depth`, each in one step.
pub fn identity_functional(depth: usize) -> FunctionalTable {
    let mut axioms = Vec::new();
    for len in 1..=depth {
        for s in BinaryString::all_of_length(len) {
            axioms.push(Axiom::new(s.clone(), (len - 1) as u64, u64::from(s.bit(len - 1).unwrap()), 1));
        }
    }
    FunctionalTable::new(axioms).expect("identity table is consistent")
}

/// Strings enumerated into the level tree of `Ψ̂`: `τ` has level `n` when
/// `Ψ̂(τ)` has length `n` and no proper initial segment has that property.
pub fn hat_level_tree(f: &FunctionalTable, max_len: usize) -> Result<FiniteTree> {
    if max_len > MAX_WEAK_SPLIT_BUDGET {
        return Err(Error::Resource(format!("level tree depth {max_len} exceeds {MAX_WEAK_SPLIT_BUDGET}")));
    }
    let mut t = FiniteTree::new();
    for len in 0..=max_len {
        for tau in BinaryString::all_of_length(len) {
            let here = f.hat_output(&tau).len();
            let before = if tau.is_empty() {
                None
            } else {
                Some(f.hat_output(&tau.parent()).len())
            };
            if before != Some(here) {
                t.insert(tau);
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strings::bs;
    use proptest::prelude::*;

    fn table(rows: &[(&str, u64, u64, u64)]) -> FunctionalTable {
        FunctionalTable::new(
            rows.iter()
                .map(|&(s, a, v, st)| Axiom::new(bs(s), a, v, st))
                .collect(),
        )
        .unwrap()
    }

    /// Direct transcription of the recursive hat definition.
    fn hat_oracle(f: &FunctionalTable, tau: &BinaryString, n: u64) -> Option<u64> {
        let axiom = f
            .axioms()
            .iter()
            .filter(|a| a.arg == n && a.sigma.is_prefix_of(tau) && a.steps <= tau.len() as u64)
            .map(|a| a.value)
            .next()?;
        if tau.is_empty() {
            return None;
        }
        let p = tau.parent();
        (0..n).all(|k| hat_oracle(f, &p, k).is_some()).then_some(axiom)
    }

    #[test]
    fn eval_examples() {
        let f = table(&[("0", 0, 5, 1)]);
        assert_eq!(f.eval(&bs("01"), 0), Some(5));
        assert_eq!(f.eval(&bs("1"), 0), None);
        let err = FunctionalTable::new(vec![
            Axiom::new(bs("0"), 0, 5, 1),
            Axiom::new(bs("01"), 0, 7, 1),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Inconsistent { first: 0, second: 1, .. }));
    }

    #[test]
    fn hat_examples() {
        assert_eq!(table(&[("e", 0, 1, 1)]).hat_eval(&bs("0"), 0), Some(1));
        assert_eq!(table(&[("e", 0, 1, 5)]).hat_eval(&bs("0"), 0), None);
        let f = table(&[("e", 1, 1, 1)]);
        assert_eq!(f.hat_eval(&bs("00"), 1), None);
        assert_eq!(hat_oracle(&f, &bs("00"), 1), None);
    }

    #[test]
    fn splitting_pair_examples() {
        let f = table(&[("0", 0, 0), ("0", 1, 1), ("1", 0, 0), ("1", 1, 0)].map(|(s, a, v)| (s, a, v, 1)));
        assert!(is_splitting_pair(&f, &bs("0"), &bs("1")).unwrap());
        let g = table(&[("0", 0, 0, 1), ("1", 0, 0, 1), ("1", 1, 1, 1)]);
        assert!(!is_splitting_pair(&g, &bs("0"), &bs("1")).unwrap());
        let h = table(&[("1", 0, 1, 1)]);
        assert!(!is_splitting_pair(&h, &bs("0"), &bs("1")).unwrap());
        assert!(is_splitting_pair(&h, &bs("0"), &bs("01")).is_err());
    }

    #[test]
    fn splitting_tree_examples() {
        let chain: FiniteTree = [bs("e"), bs("0"), bs("01")].into_iter().collect();
        let f = FunctionalTable::empty();
        assert!(is_splitting_tree(&f, &chain, false));
        assert!(is_splitting_tree(&f, &chain, true));

        let t: FiniteTree = [bs("e"), bs("0"), bs("1"), bs("00"), bs("10")].into_iter().collect();
        let g = table(&[("00", 0, 0, 1), ("10", 0, 1, 1)]);
        assert!(!is_splitting_tree(&g, &t, false));
        assert_eq!(splitting_tree_violation(&g, &t, false), Some((bs("0"), bs("1"))));
        assert!(is_splitting_tree(&g, &t, true));
    }


    #[test]
    fn weak_splitting_identity() {
        let id = identity_functional(3);
        let w = build_weak_splitting_tree(&id, &id, 3).unwrap();
        assert!(!w.tree.is_empty());
        for tau in w.tree.iter() {
            assert_eq!(w.phi[tau], tau.len() as u64 - 1);
        }
        assert!(check_weak_splitting(&w, &id, &bs("010")));
        assert_eq!(decode_initial_segment(&w, &id, &[0, 1, 0], 2), Some(bs("01")));
        assert_eq!(decode_initial_segment(&w, &id, &[0, 1, 0], 0), Some(bs("e")));
        assert_eq!(decode_initial_segment(&w, &id, &[7, 7, 7], 1), None);
    }

    #[test]
    fn weak_splitting_degenerate() {
        let id = identity_functional(2);
        let w = build_weak_splitting_tree(&FunctionalTable::empty(), &id, 4).unwrap();
        assert!(w.tree.is_empty());
        assert!(check_weak_splitting(&w, &id, &bs("e")));
        let w = build_weak_splitting_tree(&id, &id, 0).unwrap();
        assert!(w.tree.iter().all(|t| t.is_empty()));
        let mut bad = WeakSplitWitness::default();
        bad.insert(bs("0"), 1, 0);
        assert_eq!(
            weak_splitting_violation(&bad, &id, &bs("e")),
            Some(WeakSplitViolation::PhiTooLarge(bs("0")))
        );
    }

    fn splitting_depth(depth: usize) -> (FunctionalTable, FiniteTree) {
        let id = identity_functional(depth);
        let t = (0..=depth).flat_map(BinaryString::all_of_length).collect();
        (id, t)
    }

    #[test]
    fn image_and_pullback() {
        let (id, t) = splitting_depth(0);
        assert_eq!(image_tree(&id, &t).unwrap(), t);
        let (id, t) = splitting_depth(1);
        assert_eq!(image_tree(&id, &t).unwrap(), t);
        let (id, t) = splitting_depth(2);
        let img = image_tree(&id, &t).unwrap();
        assert_eq!(img.len(), 7);
        assert_eq!(crate::tree::branching_stats(&img).unwrap().two_branching_below, 2);
        assert_eq!(pullback_tree(&id, &t, &img).unwrap(), t);
        let root = FiniteTree::root_only();
        assert_eq!(pullback_tree(&id, &t, &root).unwrap(), root);
        let sub: FiniteTree = [bs("e"), bs("0"), bs("1"), bs("10"), bs("11")].into_iter().collect();
        assert_eq!(pullback_tree(&id, &t, &sub).unwrap(), sub);
    }

    fn arb_table() -> impl Strategy<Value = FunctionalTable> {
        prop::collection::vec((0usize..4, 0u64..8, 0u64..4, 0u64..2, 1u64..4), 0..24).prop_map(|rows| {
            let mut axioms: Vec<Axiom> = Vec::new();
            for (len, bits, arg, value, steps) in rows {
                let a = Axiom::new(BinaryString::from_u64(bits % (1 << len), len), arg, value, steps);
                let mut trial = axioms.clone();
                trial.push(a);
                if FunctionalTable::new(trial.clone()).is_ok() {
                    axioms = trial;
                }
            }
            FunctionalTable::new(axioms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn hat_matches_recursive_definition(f in arb_table()) {
            for len in 0..=5 {
                for tau in BinaryString::all_of_length(len) {
                    for n in 0..4 {
                        prop_assert_eq!(f.hat_eval(&tau, n), hat_oracle(&f, &tau, n));
                    }
                }
            }
        }

        #[test]
        fn hat_monotone_and_downward_closed(f in arb_table()) {
            for len in 0..=5 {
                for tau in BinaryString::all_of_length(len) {
                    let out = f.hat_output(&tau);
                    for b in [false, true] {
                        let ext = f.hat_output(&tau.child(b));
                        prop_assert!(ext.len() >= out.len());
                        prop_assert_eq!(&ext[..out.len()], &out[..]);
                    }
                    for n in 0..out.len() as u64 {
                        prop_assert!((0..n).all(|k| f.hat_eval(&tau, k).is_some()));
                    }
                }
            }
        }

        #[test]
        fn built_witness_passes_conditions(psi in arb_table(), phi in arb_table()) {
            let w = build_weak_splitting_tree(&psi, &phi, 6).unwrap();
            let v = weak_splitting_violation(&w, &psi, &BinaryString::empty());
            prop_assert!(v.is_none(), "{:?}", v);
        }

        #[test]
        fn decode_round_trip(path in 0u64..64) {
            let id = identity_functional(6);
            let w = build_weak_splitting_tree(&id, &id, 6).unwrap();
            let a = BinaryString::from_u64(path, 6);
            let oracle = id.hat_output(&a);
            for n in 0..=6 {
                prop_assert_eq!(decode_initial_segment(&w, &id, &oracle, n), Some(a.prefix(n)));
            }
        }
    }
}
