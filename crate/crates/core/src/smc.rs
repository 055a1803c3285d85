//! Finite-stage pieces of the strong minimal cover construction: the
//! `Ω` predicate over the trees `T(τ) = { σ : Φ(τ; σ) = 1 }`, the class `Π`,
//! the selection of incompatible extensions, the trees `T′(τ)` with the
//! decoding functional `Θ`, and one stage of the finite-extension driver.
//!
//! Arguments of `Φ` are strings coded by their length-lex index.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::functional::{image_tree, outputs_split, pullback_tree, Axiom, FunctionalTable};
use crate::strings::BinaryString;
use crate::tree::{FiniteTree, StagedTree, TreeIndex};

/// Longest `σ` for which [`phi_from_tree`] writes axioms.
pub const MAX_PHI_LENGTH: usize = 14;

/// `τ(2n) = A(n)` wherever `τ(2n)` is defined.
pub fn is_a_oplus_compatible(tau: &BinaryString, a_prefix: &BinaryString) -> Result<bool> {
    if tau.len() > 2 * a_prefix.len() {
        return Err(Error::Depth(format!(
            "{tau} needs {} bits of A, only {} given",
            tau.len().div_ceil(2),
            a_prefix.len()
        )));
    }
    Ok((0..tau.len()).step_by(2).all(|k| tau.bit(k) == a_prefix.bit(k / 2)))
}

/// Even-length strings of length at most `2·depth` that are `A⊕`-compatible.
pub fn a_oplus_tree(a_prefix: &BinaryString, depth: usize) -> Result<FiniteTree> {
    if depth > a_prefix.len() {
        return Err(Error::Depth(format!("depth {depth} exceeds the oracle prefix")));
    }
    let mut out = FiniteTree::root_only();
    let mut layer = vec![BinaryString::empty()];
    for n in 0..depth {
        let a = a_prefix.bit(n).unwrap();
        layer = layer
            .iter()
            .flat_map(|x| [false, true].map(|odd| x.child(a).child(odd)))
            .collect();
        for x in &layer {
            out.insert(x.clone());
        }
    }
    Ok(out)
}

/// `Φ` with `Φ(τ; σ) = [σ ∈ t]` for every `σ` no longer than the members of
/// `t`, converging in `⌈|σ|/rate⌉` steps (at least one). With this `Φ`,
/// `T(τ)` is `t` cut at length `rate·|τ|`.
pub fn phi_from_tree(t: &FiniteTree, rate: usize) -> Result<FunctionalTable> {
    let max_len = t.iter().map(BinaryString::len).max().unwrap_or(0);
    if max_len > MAX_PHI_LENGTH {
        return Err(Error::Resource(format!("tree members of length {max_len} exceed {MAX_PHI_LENGTH}")));
    }
    let rate = rate.max(1);
    let mut axioms = Vec::new();
    for len in 0..=max_len {
        let steps = len.div_ceil(rate).max(1) as u64;
        for s in BinaryString::all_of_length(len) {
            let code = s.length_lex_index().expect("short string");
            axioms.push(Axiom::new(BinaryString::empty(), code, u64::from(t.contains(&s)), steps));
        }
    }
    FunctionalTable::new(axioms)
}

/// Axioms of `Φ` grouped by oracle string.
#[derive(Debug, Clone, Default)]
struct PhiView {
    by_sigma: HashMap<BinaryString, Vec<(BinaryString, bool, u64)>>,
    /// The value-1 entries only.
    ones: HashMap<BinaryString, Vec<(BinaryString, u64)>>,
}

impl PhiView {
    fn new(phi: &FunctionalTable) -> Self {
        let mut by_sigma: HashMap<BinaryString, Vec<(BinaryString, bool, u64)>> = HashMap::new();
        let mut ones: HashMap<BinaryString, Vec<(BinaryString, u64)>> = HashMap::new();
        for a in phi.axioms() {
            let s = BinaryString::from_length_lex_index(a.arg);
            if a.value == 1 {
                ones.entry(a.sigma.clone()).or_default().push((s.clone(), a.steps));
            }
            by_sigma.entry(a.sigma.clone()).or_default().push((s, a.value == 1, a.steps));
        }
        Self { by_sigma, ones }
    }

    /// Strings `σ` with `Φ(τ; σ)` defined within `|τ|` steps, and whether the value is 1.
    fn defined_at(&self, tau: &BinaryString) -> BTreeMap<BinaryString, bool> {
        let mut out = BTreeMap::new();
        for k in 0..=tau.len() {
            if let Some(list) = self.by_sigma.get(&tau.prefix(k)) {
                for (s, v, steps) in list {
                    if *steps <= tau.len() as u64 {
                        out.insert(s.clone(), *v);
                    }
                }
            }
        }
        out
    }

    fn tree_at(&self, tau: &BinaryString) -> FiniteTree {
        let mut out = FiniteTree::new();
        for k in 0..=tau.len() {
            for (s, steps) in self.ones.get(&tau.prefix(k)).into_iter().flatten() {
                if *steps <= tau.len() as u64 {
                    out.insert(s.clone());
                }
            }
        }
        out
    }
}

/// `T(τ)` with its level structure.
#[derive(Debug, Clone)]
pub struct OmegaProfile {
    pub tree: FiniteTree,
    pub index: TreeIndex,
    /// Greatest `n` with `Ω(τ, n)`.
    pub level: usize,
    pub min_len: Vec<usize>,
    pub max_len: Vec<usize>,
}

impl OmegaProfile {
    pub fn at_level(&self, n: usize) -> Vec<BinaryString> {
        self.index.at_level(n)
    }

    pub fn level_of(&self, s: &BinaryString) -> Option<usize> {
        self.index.level.get(s).copied()
    }
}

#[derive(Debug, Clone)]
pub struct OmegaContext {
    pub phi: FunctionalTable,
    pub f: Vec<u64>,
    pub a_prefix: BinaryString,
    view: PhiView,
}

impl OmegaContext {
    pub fn new(phi: FunctionalTable, f: Vec<u64>, a_prefix: BinaryString) -> Result<Self> {
        if let Some(k) = f.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!("f is not strictly increasing at {}", k + 1)));
        }
        let view = PhiView::new(&phi);
        Ok(Self { phi, f, a_prefix, view })
    }

    /// Context with `f` from [`compute_majorant`].
    pub fn with_majorant(phi: FunctionalTable, a_prefix: BinaryString, depth: usize) -> Result<Self> {
        let f = compute_majorant(&phi, &a_prefix, depth)?;
        Self::new(phi, f, a_prefix)
    }

    pub fn tree_at(&self, tau: &BinaryString) -> FiniteTree {
        self.view.tree_at(tau)
    }

    pub fn profile(&self, tau: &BinaryString) -> OmegaProfile {
        let tree = self.tree_at(tau);
        let index = tree.index();
        let top = index.max_level().map_or(0, |m| m + 1);
        let mut min_len = vec![usize::MAX; top];
        let mut max_len = vec![0; top];
        for (s, &l) in &index.level {
            min_len[l] = min_len[l].min(s.len());
            max_len[l] = max_len[l].max(s.len());
        }
        let within = |n: usize| self.f.get(n).is_some_and(|&b| max_len[n] as u64 <= b);
        let mut level = 0;
        if !tree.is_empty() && within(0) {
            while level + 1 < top
                && index
                    .level
                    .iter()
                    .filter(|(_, &l)| l == level)
                    .all(|(s, _)| index.children[s].len() == 2)
                && within(level + 1)
            {
                level += 1;
            }
        }
        OmegaProfile {
            tree,
            index,
            level,
            min_len,
            max_len,
        }
    }

    pub fn omega_level(&self, tau: &BinaryString) -> usize {
        self.profile(tau).level
    }

    pub fn omega(&self, tau: &BinaryString, n: usize) -> bool {
        n == 0 || n <= self.omega_level(tau)
    }

    /// Failure of the standing assumptions on `Φ` at `τ`: definedness closed
    /// downward in length, at most two successors, and `λ` as the only
    /// member of level 0.
    pub fn normalization_violation(&self, tau: &BinaryString) -> Option<String> {
        let defined = self.view.defined_at(tau);
        if let Some(longest) = defined.keys().next_back() {
            for len in 0..longest.len() {
                if let Some(s) = BinaryString::all_of_length(len).find(|s| !defined.contains_key(s)) {
                    return Some(format!("Phi({tau}; {longest}) is defined but Phi({tau}; {s}) is not"));
                }
            }
        }
        let t = self.tree_at(tau);
        if t.is_empty() {
            return None;
        }
        let idx = t.index();
        if idx.at_level(0) != vec![BinaryString::empty()] {
            return Some(format!("T({tau}) has a level-0 member other than e"));
        }
        idx.children
            .iter()
            .find(|(_, c)| c.len() > 2)
            .map(|(s, c)| format!("{s} has {} successors in T({tau})", c.len()))
    }
}

/// `f(n) = max_{k ≤ n} g(k) + n` where `g(n)` is the greatest length of a
/// level-`n` member of `T(a_prefix)`.
pub fn compute_majorant(phi: &FunctionalTable, a_prefix: &BinaryString, depth: usize) -> Result<Vec<u64>> {
    let t = PhiView::new(phi).tree_at(a_prefix);
    let idx = t.index();
    let mut g = vec![0u64; depth + 1];
    let mut seen = vec![false; depth + 1];
    for (s, &l) in &idx.level {
        if l <= depth {
            g[l] = g[l].max(s.len() as u64);
            seen[l] = true;
        }
    }
    if let Some(n) = seen.iter().position(|&b| !b) {
        return Err(Error::Depth(format!("T({a_prefix}) has no member of level {n}")));
    }
    Ok(majorant_of(&g))
}

/// `max_{k ≤ n} g(k) + n`.
pub fn majorant_of(g: &[u64]) -> Vec<u64> {
    let mut run = 0;
    g.iter()
        .enumerate()
        .map(|(n, &v)| {
            run = run.max(v);
            run + n as u64
        })
        .collect()
}

/// Least strictly increasing sequence above `g`.
pub fn tight_majorant(g: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(g.len());
    for &v in g {
        let next = out.last().map_or(v, |&p| v.max(p + 1));
        out.push(next);
    }
    out
}

/// The enumeration of `Π` up to stage `max_stage`. At stage `s` a string
/// `τ` of length `s` enters when `Ω(τ, n′)` for some `n′ ≥ n + 2` whose
/// level in `T(τ)` holds only strings of length at least `f(n + 2)`, where
/// `n` is the greatest `Ω`-level of members of `Π` below `τ`.
pub fn enumerate_pi(ctx: &OmegaContext, max_stage: usize) -> Result<StagedTree> {
    if max_stage > 20 {
        return Err(Error::Resource(format!("stage {max_stage} exceeds 20")));
    }
    let mut levels: HashMap<BinaryString, usize> = HashMap::new();
    let mut cur = FiniteTree::root_only();
    levels.insert(BinaryString::empty(), ctx.omega_level(&BinaryString::empty()));
    let mut stages = vec![cur.clone()];
    for s in 1..=max_stage {
        let mut added = Vec::new();
        for tau in BinaryString::all_of_length(s) {
            let n = tau
                .proper_prefixes()
                .filter_map(|p| levels.get(&p).copied())
                .max()
                .unwrap_or(0);
            let Some(&bound) = ctx.f.get(n + 2) else { continue };
            let prof = ctx.profile(&tau);
            if prof.level >= n + 2 && prof.min_len[prof.level] as u64 >= bound {
                added.push((tau, prof.level));
            }
        }
        for (tau, l) in added {
            levels.insert(tau.clone(), l);
            cur.insert(tau);
        }
        stages.push(cur.clone());
    }
    Ok(StagedTree::new(stages))
}

/// Members of `pi` that lack a member below them with `Ω`-level at least
/// two smaller.
pub fn pi_gap_violations(ctx: &OmegaContext, pi: &FiniteTree) -> Vec<BinaryString> {
    pi.iter()
        .filter(|tau| !tau.is_empty())
        .filter(|tau| {
            let l = ctx.omega_level(tau);
            !tau.proper_prefixes()
                .any(|p| pi.contains(&p) && ctx.omega_level(&p) + 2 <= l)
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionInput {
    pub tau: BinaryString,
    /// Level of `τ` in `Π`.
    pub tau_level: usize,
    /// `(τ_i, level of τ_i in Π)`.
    pub lambda: Vec<(BinaryString, usize)>,
    pub sigma: BinaryString,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolRecord {
    pub m: usize,
    pub i: usize,
    pub size: usize,
    pub floor: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionResult {
    pub n_tau: usize,
    pub n_i: Vec<usize>,
    pub sigma_pairs: BTreeMap<usize, (BinaryString, BinaryString)>,
    /// Pools left after the last stage, by index into `Λ`.
    pub psi_pool: BTreeMap<usize, Vec<BinaryString>>,
    /// `r_1, r_2, …`
    pub r: Vec<BigRational>,
    pub pool_history: Vec<PoolRecord>,
}

fn pow2(k: usize) -> BigRational {
    BigRational::from_integer(BigInt::one() << k)
}

/// `r_m = Σ_{m′ ≤ m} 2^{-m′} |Λ*_{m′}|` for `m = 1..=max`.
pub fn r_sequence(rel_levels: &[usize]) -> Vec<BigRational> {
    let max = rel_levels.iter().copied().max().unwrap_or(0);
    let mut acc = BigRational::zero();
    (1..=max)
        .map(|m| {
            let count = rel_levels.iter().filter(|&&l| l == m).count();
            acc += BigRational::from_integer(count.into()) / pow2(m);
            acc.clone()
        })
        .collect()
}

struct SelectionState<'a> {
    input: &'a SelectionInput,
    pools: Vec<Vec<BinaryString>>,
    chosen: Vec<BinaryString>,
}

impl SelectionState<'_> {
    fn dump(&self) -> String {
        let pools: Vec<String> = self
            .pools
            .iter()
            .map(|p| p.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
            .collect();
        let chosen: Vec<String> = self.chosen.iter().map(ToString::to_string).collect();
        format!(
            "tau={} sigma={} pools=[{}] chosen=[{}]",
            self.input.tau,
            self.input.sigma,
            pools.join(" | "),
            chosen.join(",")
        )
    }
}

/// Chooses, for each `τ_i ∈ Λ`, two strings of level `n_{τ_i}` in `T(τ_i)`
/// extending `σ`, all pairwise incompatible. Works through the relative
/// `Π`-levels `m = 1, 2, …`, keeping for each unsettled `τ_i` a pool of
/// level-`(n_τ + 2m)` strings incompatible with everything chosen so far.
/// Choices are length-lex least.
pub fn select_extensions(ctx: &OmegaContext, input: &SelectionInput) -> Result<SelectionResult> {
    let tau_prof = ctx.profile(&input.tau);
    let n_tau = tau_prof.level;
    let sigma = &input.sigma;
    let sigma_ok = match tau_prof.level_of(sigma) {
        Some(l) => l == n_tau,
        None => sigma.is_empty() && n_tau == 0,
    };
    if !sigma_ok {
        return Err(Error::Precondition(format!(
            "{sigma} is not of level {n_tau} in T({})",
            input.tau
        )));
    }
    let taus: Vec<&BinaryString> = input.lambda.iter().map(|(t, _)| t).collect();
    if !crate::tree::is_prefix_free(taus.iter().copied()) {
        return Err(Error::Precondition("the strings of Lambda are not prefix-free".into()));
    }
    let mut rel = Vec::new();
    for (t, l) in &input.lambda {
        if !input.tau.is_proper_prefix_of(t) || *l <= input.tau_level {
            return Err(Error::Precondition(format!("{t} does not lie above {}", input.tau)));
        }
        rel.push(l - input.tau_level);
    }
    let r = r_sequence(&rel);
    if let Some(k) = r.iter().position(|x| *x > BigRational::one()) {
        return Err(Error::Thinness(format!("r_{} = {} exceeds 1", k + 1, r[k])));
    }
    let profs: Vec<OmegaProfile> = taus.iter().map(|t| ctx.profile(t)).collect();
    for (i, p) in profs.iter().enumerate() {
        if p.level_of(sigma).unwrap_or(0) != n_tau {
            return Err(Error::Precondition(format!("{sigma} changes level in T({})", taus[i])));
        }
    }
    let n_i: Vec<usize> = profs.iter().map(|p| p.level).collect();
    let k = taus.len();
    let mut st = SelectionState {
        input,
        pools: vec![vec![sigma.clone()]; k],
        chosen: Vec::new(),
    };
    let mut pairs = BTreeMap::new();
    let mut history = Vec::new();
    let max_m = rel.iter().copied().max().unwrap_or(0);
    for m in 1..=max_m {
        let target = n_tau + 2 * m;
        for i in (0..k).filter(|&i| rel[i] >= m) {
            let mut next = Vec::new();
            for psi in &st.pools[i] {
                let ext: Vec<BinaryString> = profs[i]
                    .at_level(target)
                    .into_iter()
                    .filter(|x| psi.is_prefix_of(x))
                    .collect();
                if ext.len() != 4 {
                    return Err(Error::Shape(format!(
                        "{psi} has {} extensions of level {target} in T({}), expected 4",
                        ext.len(),
                        taus[i]
                    )));
                }
                next.extend(ext);
            }
            st.pools[i] = next;
        }
        for i in (0..k).filter(|&i| rel[i] == m) {
            let mut picked: Vec<BinaryString> = Vec::new();
            for cand in profs[i].at_level(n_i[i]) {
                if picked.len() == 2 {
                    break;
                }
                let in_pool = st.pools[i].iter().any(|p| p.is_prefix_of(&cand));
                let clear = st.chosen.iter().chain(&picked).all(|c| !c.is_compatible(&cand));
                if in_pool && clear {
                    picked.push(cand);
                }
            }
            if picked.len() < 2 {
                return Err(Error::Internal(format!(
                    "pool exhausted choosing for {} at m={m}: {}",
                    taus[i],
                    st.dump()
                )));
            }
            for s in &picked {
                for j in (0..k).filter(|&j| j != i && rel[j] >= m) {
                    st.pools[j].retain(|p| !p.is_compatible(s));
                }
            }
            st.chosen.extend(picked.iter().cloned());
            pairs.insert(i, (picked[0].clone(), picked[1].clone()));
        }
        let floor = (BigRational::one() - &r[m - 1]) * pow2(m + 1);
        for i in (0..k).filter(|&i| rel[i] > m) {
            let size = st.pools[i].len();
            if BigRational::from_integer(size.into()) < floor {
                return Err(Error::Internal(format!(
                    "pool for {} has {size} < {floor} strings at m={m}: {}",
                    taus[i],
                    st.dump()
                )));
            }
            history.push(PoolRecord {
                m,
                i,
                size,
                floor: floor.clone(),
            });
        }
    }
    let psi_pool = (0..k).map(|i| (i, st.pools[i].clone())).collect();
    Ok(SelectionResult {
        n_tau,
        n_i,
        sigma_pairs: pairs,
        psi_pool,
        r,
        pool_history: history,
    })
}

/// Independent check of a selection: every `τ_i` has two strings of level
/// `n_{τ_i}` in `T(τ_i)` extending `σ`, all selected strings are pairwise
/// incompatible, and every recorded pool meets its floor.
pub fn selection_violations(ctx: &OmegaContext, input: &SelectionInput, res: &SelectionResult) -> Vec<String> {
    let mut out = Vec::new();
    let mut all = Vec::new();
    for (i, (t, _)) in input.lambda.iter().enumerate() {
        let Some((a, b)) = res.sigma_pairs.get(&i) else {
            out.push(format!("no strings chosen for {t}"));
            continue;
        };
        let tree = ctx.tree_at(t);
        let n = ctx.omega_level(t);
        for s in [a, b] {
            if !input.sigma.is_prefix_of(s) {
                out.push(format!("{s} does not extend {}", input.sigma));
            }
            match tree.level_of(s) {
                Ok(l) if l == n => {}
                _ => out.push(format!("{s} is not of level {n} in T({t})")),
            }
            all.push(s.clone());
        }
    }
    for x in 0..all.len() {
        for y in x + 1..all.len() {
            if all[x].is_compatible(&all[y]) {
                out.push(format!("{} and {} are compatible", all[x], all[y]));
            }
        }
    }
    for rec in &res.pool_history {
        if BigRational::from_integer(rec.size.into()) < rec.floor {
            out.push(format!("pool {} at m={} below floor", rec.i, rec.m));
        }
    }
    out
}

/// Whether any valid choice of pairs exists, by backtracking over all
/// candidates. `None` when some `τ_i` has more than `limit` candidates.
pub fn exhaustive_selection_exists(ctx: &OmegaContext, input: &SelectionInput, limit: usize) -> Option<bool> {
    let cands: Vec<Vec<BinaryString>> = input
        .lambda
        .iter()
        .map(|(t, _)| {
            let p = ctx.profile(t);
            p.at_level(p.level)
                .into_iter()
                .filter(|x| input.sigma.is_prefix_of(x))
                .collect()
        })
        .collect();
    if cands.iter().any(|c| c.len() > limit) {
        return None;
    }
    fn go(i: usize, cands: &[Vec<BinaryString>], chosen: &mut Vec<BinaryString>) -> bool {
        if i == cands.len() {
            return true;
        }
        let c = &cands[i];
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                let ok = !c[a].is_compatible(&c[b])
                    && chosen.iter().all(|x| !x.is_compatible(&c[a]) && !x.is_compatible(&c[b]));
                if ok {
                    chosen.push(c[a].clone());
                    chosen.push(c[b].clone());
                    if go(i + 1, cands, chosen) {
                        return true;
                    }
                    chosen.truncate(chosen.len() - 2);
                }
            }
        }
        false
    }
    Some(go(0, &cands, &mut Vec::new()))
}

/// Axioms `Θ(σ′) = τ`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ThetaAxioms {
    pub axioms: BTreeMap<BinaryString, BinaryString>,
}

impl ThetaAxioms {
    /// Values of `Θ` along the initial segments of `c`.
    pub fn decode(&self, c: &BinaryString) -> Vec<BinaryString> {
        (0..=c.len())
            .filter_map(|k| self.axioms.get(&c.prefix(k)).cloned())
            .collect()
    }

    /// A pair of comparable arguments whose values are not comparable in the
    /// same direction.
    pub fn consistency_violation(&self) -> Option<(BinaryString, BinaryString)> {
        let dom: Vec<(&BinaryString, &BinaryString)> = self.axioms.iter().collect();
        for (a, ta) in &dom {
            for (b, tb) in &dom {
                if a.is_proper_prefix_of(b) && !ta.is_proper_prefix_of(tb) {
                    return Some(((*a).clone(), (*b).clone()));
                }
            }
        }
        None
    }
}

impl fmt::Display for ThetaAxioms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.axioms.iter().map(|(k, v)| format!("{k}->{v}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct TPrime {
    pub trees: BTreeMap<BinaryString, FiniteTree>,
    pub theta: ThetaAxioms,
    pub pi: FiniteTree,
    /// Leaves added at each stage.
    pub stage_leaves: Vec<Vec<BinaryString>>,
}

/// Checks the staging conditions on `Π*`: `Π*_0 = {λ}`, and each stage adds
/// pairwise incompatible strings that all extend one leaf of the previous stage.
pub fn validate_pistar(pistar: &StagedTree) -> Result<()> {
    if pistar.stages.first() != Some(&FiniteTree::root_only()) {
        return Err(Error::Validation("the first stage must be {e}".into()));
    }
    for s in 1..pistar.stages.len() {
        let prev = &pistar.stages[s - 1];
        if !prev.is_subset(&pistar.stages[s]) {
            return Err(Error::Validation(format!("stage {s} is not cumulative")));
        }
        let added = pistar.added_at(s);
        if !crate::tree::is_prefix_free(&added) {
            return Err(Error::Validation(format!("stage {s} adds compatible strings")));
        }
        if let Some(first) = added.first() {
            let leaf = prev.leaves().into_iter().find(|l| l.is_proper_prefix_of(first));
            match leaf {
                Some(l) if added.iter().all(|a| l.is_proper_prefix_of(a)) => {}
                _ => {
                    return Err(Error::Validation(format!(
                        "stage {s} does not extend exactly one leaf"
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Builds `T′(τ)` for every `τ ∈ Π*` together with `Θ`. `succ_codes`, when
/// given, must list the successors of each member of `Π*`.
pub fn build_tprime(
    ctx: &OmegaContext,
    pistar: &StagedTree,
    succ_codes: Option<&BTreeMap<BinaryString, BTreeSet<BinaryString>>>,
) -> Result<TPrime> {
    validate_pistar(pistar)?;
    let fin = pistar.final_tree();
    if let Some(codes) = succ_codes {
        for tau in fin.iter() {
            let actual = fin.successors(tau);
            let coded = codes.get(tau).cloned().unwrap_or_default();
            if actual != coded {
                return Err(Error::Validation(format!("successor code for {tau} does not match")));
            }
        }
    }
    let depth = fin.iter().map(BinaryString::len).max().unwrap_or(0);
    let pi = enumerate_pi(ctx, depth)?.final_tree();
    if let Some(x) = fin.iter().find(|x| !pi.contains(x)) {
        return Err(Error::Validation(format!("{x} is not in Pi")));
    }
    if let Some(w) = crate::thin::thin_violation(&pi, &fin)? {
        return Err(Error::Thinness(format!("Pi* is not Pi-thin at {} (weight {})", w.tau, w.weight)));
    }
    let mut trees = BTreeMap::new();
    trees.insert(BinaryString::empty(), FiniteTree::root_only());
    let mut theta = ThetaAxioms::default();
    let mut stage_leaves = Vec::new();
    for s in 1..pistar.stages.len() {
        let added = pistar.added_at(s);
        let Some(first) = added.first() else {
            stage_leaves.push(Vec::new());
            continue;
        };
        let prev = &pistar.stages[s - 1];
        let tau = prev
            .leaves()
            .into_iter()
            .find(|l| l.is_proper_prefix_of(first))
            .expect("validated");
        let base = trees[&tau].clone();
        let lambda: Vec<(BinaryString, usize)> = added
            .iter()
            .map(|t| (t.clone(), pi.level_of(t).expect("member of Pi")))
            .collect();
        let tau_level = pi.level_of(&tau)?;
        let mut new_trees: Vec<FiniteTree> = vec![base.clone(); added.len()];
        let mut leaves_here = Vec::new();
        for sigma in base.leaves() {
            let input = SelectionInput {
                tau: tau.clone(),
                tau_level,
                lambda: lambda.clone(),
                sigma,
            };
            let res = select_extensions(ctx, &input)?;
            for (i, (a, b)) in res.sigma_pairs {
                for x in [a, b] {
                    new_trees[i].insert(x.clone());
                    theta.axioms.insert(x.clone(), added[i].clone());
                    leaves_here.push(x);
                }
            }
        }
        for (i, t) in added.iter().enumerate() {
            trees.insert(t.clone(), new_trees[i].clone());
        }
        stage_leaves.push(leaves_here);
    }
    Ok(TPrime {
        trees,
        theta,
        pi,
        stage_leaves,
    })
}

/// Failures of the `T′`/`Θ` postconditions: each `T′(τ)` has level equal to
/// the `Π*`-level of `τ`, is 2-branching below it and lies inside `T(τ)`;
/// each stage's new leaves are prefix-free; `Θ` is consistent; and decoding
/// any leaf of `T′(τ)` gives the chain of `Π*` members up to `τ`.
pub fn tprime_violations(ctx: &OmegaContext, pistar: &StagedTree, tp: &TPrime) -> Vec<String> {
    let mut out = Vec::new();
    let fin = pistar.final_tree();
    for (tau, t) in &tp.trees {
        let m = fin.level_of(tau).unwrap_or(0);
        if !t.is_of_level(m) || !t.is_two_branching_below(m) {
            out.push(format!("T'({tau}) is not 2-branching of level {m}"));
        }
        if !tau.is_empty() && !t.is_subset(&ctx.tree_at(tau)) {
            out.push(format!("T'({tau}) is not inside T({tau})"));
        }
        let chain: Vec<BinaryString> = (1..=tau.len())
            .map(|k| tau.prefix(k))
            .filter(|p| fin.contains(p))
            .collect();
        for leaf in t.leaves() {
            if tp.theta.decode(&leaf) != chain {
                out.push(format!("leaf {leaf} of T'({tau}) does not decode to its chain"));
            }
        }
    }
    for (s, leaves) in tp.stage_leaves.iter().enumerate() {
        if !crate::tree::is_prefix_free(leaves) {
            out.push(format!("stage {} leaves are not prefix-free", s + 1));
        }
    }
    if let Some((a, b)) = tp.theta.consistency_violation() {
        out.push(format!("Theta is inconsistent on {a} and {b}"));
    }
    out
}

/// The chain `{τ ∈ Π : τ ⊆ a_prefix}` staged one string per stage.
pub fn chain_staging(pi: &FiniteTree, a_prefix: &BinaryString) -> StagedTree {
    let mut cur = FiniteTree::root_only();
    let mut stages = vec![cur.clone()];
    for k in 1..=a_prefix.len() {
        let p = a_prefix.prefix(k);
        if pi.contains(&p) {
            cur.insert(p);
            stages.push(cur.clone());
        }
    }
    StagedTree::new(stages)
}

/// A 2-branching subtree of `t1` from `T′` along `a_prefix`, where `Φ`
/// describes `t1` (shifted to its root) and `f` is the tight majorant.
pub fn dagger_subtree(t1: &FiniteTree, a_prefix: &BinaryString) -> Result<FiniteTree> {
    let root = t1
        .root()
        .ok_or_else(|| Error::Shape("tree has no unique root".into()))?;
    let shifted: FiniteTree = t1
        .iter()
        .map(|x| BinaryString::from_bits(x.bits()[root.len()..].to_vec()))
        .collect();
    let phi = phi_from_tree(&shifted, 1)?;
    let idx = shifted.index();
    let top = idx.max_level().unwrap_or(0);
    let g: Vec<u64> = (0..=top)
        .map(|n| idx.at_level(n).iter().map(|x| x.len() as u64).max().unwrap_or(0))
        .collect();
    let ctx = OmegaContext::new(phi, tight_majorant(&g), a_prefix.clone())?;
    let pi = enumerate_pi(&ctx, a_prefix.len())?.final_tree();
    let chain = chain_staging(&pi, a_prefix);
    if chain.stages.len() < 2 {
        return Err(Error::Depth(format!("no member of Pi along {a_prefix}")));
    }
    let tp = build_tprime(&ctx, &chain, None)?;
    let last = chain.final_tree().iter().max_by_key(|x| x.len()).cloned().unwrap();
    Ok(tp.trees[&last].iter().map(|x| root.concat(x)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverBranch {
    NoSplittings,
    SplittingSubtree,
}

impl fmt::Display for DriverBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoSplittings => "no-splittings",
            Self::SplittingSubtree => "splitting-subtree",
        })
    }
}

/// Where the driver gets its subtree of the image tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dagger {
    Supplied(FiniteTree),
    FromTprime { a_prefix: BinaryString },
}

#[derive(Debug, Clone)]
pub struct DriverOutcome {
    pub branch: DriverBranch,
    pub b_next: BinaryString,
    pub t_next: FiniteTree,
    /// The string with no splittings above it, in that branch.
    pub witness: Option<BinaryString>,
    /// The greedy splitting subtree before refinement, in the other branch.
    pub splitting: Option<FiniteTree>,
}

struct Budget {
    left: usize,
}

impl Budget {
    fn spend(&mut self, n: usize) -> Result<()> {
        if n > self.left {
            return Err(Error::Resource("driver budget exhausted".into()));
        }
        self.left -= n;
        Ok(())
    }
}

fn splits_with_all(
    x: &BinaryString,
    out_x: &[u64],
    others: &[(BinaryString, Vec<u64>)],
    budget: &mut Budget,
) -> Result<bool> {
    budget.spend(others.len())?;
    Ok(others
        .iter()
        .all(|(y, oy)| x.is_compatible(y) || outputs_split(out_x, oy)))
}

/// Greedy 2-branching `Ψ`-splitting subtree of `t` with least element `root`:
/// each leaf takes the length-lex least pair of incompatible extensions in
/// `t` that split from each other and from every incompatible member so far.
pub fn greedy_splitting_subtree(
    psi: &FunctionalTable,
    t: &FiniteTree,
    root: &BinaryString,
    budget: usize,
) -> Result<FiniteTree> {
    let mut b = Budget { left: budget };
    let mut chosen: Vec<(BinaryString, Vec<u64>)> = vec![(root.clone(), psi.output(root))];
    let mut queue = std::collections::VecDeque::from([root.clone()]);
    while let Some(x) = queue.pop_front() {
        let cands: Vec<(BinaryString, Vec<u64>)> = t
            .iter()
            .filter(|y| x.is_proper_prefix_of(y))
            .map(|y| (y.clone(), psi.output(y)))
            .collect();
        let mut found = None;
        'outer: for a in 0..cands.len() {
            for c in a + 1..cands.len() {
                b.spend(1)?;
                let (ya, oa) = &cands[a];
                let (yc, oc) = &cands[c];
                if ya.is_compatible(yc) || !outputs_split(oa, oc) {
                    continue;
                }
                if splits_with_all(ya, oa, &chosen, &mut b)? && splits_with_all(yc, oc, &chosen, &mut b)? {
                    found = Some((cands[a].clone(), cands[c].clone()));
                    break 'outer;
                }
            }
        }
        if let Some((pa, pc)) = found {
            queue.push_back(pa.0.clone());
            queue.push_back(pc.0.clone());
            chosen.push(pa);
            chosen.push(pc);
        }
    }
    Ok(chosen.into_iter().map(|(x, _)| x).collect())
}

/// Least string in `cands` incompatible with `avoid`, else the least string.
fn least_avoiding(cands: &[BinaryString], avoid: Option<&BinaryString>) -> Option<BinaryString> {
    cands
        .iter()
        .find(|c| avoid.is_none_or(|a| !a.is_compatible(c)))
        .or(cands.first())
        .cloned()
}

/// One stage of the finite-extension driver on `(b_s, t_s)` against `Ψ_s`.
/// `avoid` is the known prefix of `Ψ_s(A)`, if any, which `b_next` is
/// steered away from.
pub fn smc_driver_stage(
    b_s: &BinaryString,
    t_s: &FiniteTree,
    psi: &FunctionalTable,
    dagger: &Dagger,
    avoid: Option<&BinaryString>,
    budget: usize,
) -> Result<DriverOutcome> {
    if !t_s.is_two_branching() {
        return Err(Error::Precondition("t_s is not 2-branching".into()));
    }
    if !t_s.contains(b_s) {
        return Err(Error::Precondition(format!("{b_s} is not on t_s")));
    }
    let mut b = Budget { left: budget };
    for tau in t_s.iter().filter(|x| b_s.is_prefix_of(x) && !t_s.is_leaf(x)) {
        let above: Vec<(BinaryString, Vec<u64>)> = t_s
            .iter()
            .filter(|y| tau.is_prefix_of(y))
            .map(|y| (y.clone(), psi.output(y)))
            .collect();
        b.spend(above.len() * above.len())?;
        let splits = above.iter().enumerate().any(|(i, (x, ox))| {
            above[i + 1..]
                .iter()
                .any(|(y, oy)| !x.is_compatible(y) && outputs_split(ox, oy))
        });
        if !splits {
            let succ: Vec<BinaryString> = t_s.successors(tau).into_iter().collect();
            let b_next = least_avoiding(&succ, avoid).expect("non-leaf");
            return Ok(DriverOutcome {
                branch: DriverBranch::NoSplittings,
                b_next,
                t_next: t_s.clone(),
                witness: Some(tau.clone()),
                splitting: None,
            });
        }
    }
    let sub = greedy_splitting_subtree(psi, t_s, b_s, b.left)?;
    let image = image_tree(psi, &sub)?;
    let t2 = match dagger {
        Dagger::Supplied(t) => t.clone(),
        Dagger::FromTprime { a_prefix } => dagger_subtree(&image, a_prefix)?,
    };
    let t_next = pullback_tree(psi, &sub, &t2)?;
    let leaves = t_next.leaves();
    let b_next = least_avoiding(&leaves, avoid)
        .ok_or_else(|| Error::Internal("refined tree is empty".into()))?;
    Ok(DriverOutcome {
        branch: DriverBranch::SplittingSubtree,
        b_next,
        t_next,
        witness: None,
        splitting: Some(sub),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{identity_functional, is_splitting_tree};
    use crate::strings::bs;

    fn full(depth: usize) -> FiniteTree {
        (0..=depth).flat_map(BinaryString::all_of_length).collect()
    }

    fn tree(items: &[&str]) -> FiniteTree {
        items.iter().map(|s| bs(s)).collect()
    }

    /// `T(τ)` is the full binary tree cut at length `rate·|τ|`, `f(n) = n`.
    fn full_ctx(depth: usize, rate: usize) -> OmegaContext {
        let phi = phi_from_tree(&full(depth), rate).unwrap();
        OmegaContext::new(phi, (0..=depth as u64 + 2).collect(), bs("e")).unwrap()
    }

    #[test]
    fn oplus_examples() {
        assert!(is_a_oplus_compatible(&bs("e"), &bs("10")).unwrap());
        assert!(is_a_oplus_compatible(&bs("1100"), &bs("10")).unwrap());
        assert!(!is_a_oplus_compatible(&bs("0"), &bs("10")).unwrap());
        assert!(is_a_oplus_compatible(&bs("11000"), &bs("10")).is_err());
        let t = a_oplus_tree(&bs("10"), 2).unwrap();
        assert!(t.is_two_branching());
        assert!(t.iter().all(|x| is_a_oplus_compatible(x, &bs("10")).unwrap()));
        assert_eq!(t.len(), 7);
    }

    #[test]
    fn majorant_examples() {
        let phi = phi_from_tree(&full(4), 1).unwrap();
        assert_eq!(compute_majorant(&phi, &bs("0000"), 3).unwrap(), vec![0, 2, 4, 6]);
        assert_eq!(majorant_of(&[0, 2, 2]), vec![0, 3, 4]);
        let t = tree(&["e", "0", "11", "00", "01"]);
        let phi = phi_from_tree(&t, 1).unwrap();
        assert_eq!(compute_majorant(&phi, &bs("00"), 2).unwrap(), vec![0, 3, 4]);
        assert!(matches!(compute_majorant(&phi, &bs("00"), 3), Err(Error::Depth(_))));
        assert!(matches!(compute_majorant(&phi, &bs("0"), 2), Err(Error::Depth(_))));
        assert_eq!(tight_majorant(&[0, 2, 2, 5]), vec![0, 2, 3, 5]);
    }

    #[test]
    fn omega_examples() {
        let ctx = full_ctx(4, 1);
        assert!(ctx.omega(&bs("e"), 0));
        assert!(ctx.omega(&bs("01"), 2));
        assert!(!ctx.omega(&bs("01"), 3));
        let chain = phi_from_tree(&tree(&["e", "0", "01", "011"]), 1).unwrap();
        let c = OmegaContext::new(chain, vec![0, 1, 2, 3], bs("e")).unwrap();
        assert!(!c.omega(&bs("000"), 1));
        let short_f = OmegaContext::new(phi_from_tree(&full(4), 1).unwrap(), vec![0, 1], bs("e")).unwrap();
        assert!(!short_f.omega(&bs("0000"), 2));
        assert!(ctx.normalization_violation(&bs("0101")).is_none());
    }

    #[test]
    fn normalization_detects_gaps() {
        let phi = FunctionalTable::new(vec![Axiom::new(bs("e"), bs("01").length_lex_index().unwrap(), 1, 1)]).unwrap();
        let ctx = OmegaContext::new(phi, vec![0, 1], bs("e")).unwrap();
        assert!(ctx.normalization_violation(&bs("0")).is_some());
        assert!(OmegaContext::new(FunctionalTable::empty(), vec![0, 0], bs("e")).is_err());
    }

    #[test]
    fn pi_enumeration_examples() {
        let ctx = full_ctx(6, 1);
        let st = enumerate_pi(&ctx, 0).unwrap();
        assert_eq!(st.final_tree(), FiniteTree::root_only());
        let empty = OmegaContext::new(FunctionalTable::empty(), vec![0, 1, 2, 3], bs("e")).unwrap();
        assert_eq!(enumerate_pi(&empty, 4).unwrap().final_tree(), FiniteTree::root_only());
        // Ω-level equals length, so strings enter at every even length.
        let pi = enumerate_pi(&ctx, 6).unwrap().final_tree();
        for x in pi.iter() {
            assert_eq!(x.len() % 2, 0, "{x}");
        }
        assert_eq!(pi.len(), 1 + 4 + 16 + 64);
        assert!(pi_gap_violations(&ctx, &pi).is_empty());
        // Ω-level twice the length: every string enters.
        let fast = full_ctx(6, 2);
        let pi = enumerate_pi(&fast, 3).unwrap().final_tree();
        assert_eq!(pi.len(), 15);
    }

    #[test]
    fn select_single() {
        let ctx = full_ctx(6, 1);
        let input = SelectionInput {
            tau: bs("e"),
            tau_level: 0,
            lambda: vec![(bs("01"), 1)],
            sigma: bs("e"),
        };
        let res = select_extensions(&ctx, &input).unwrap();
        assert_eq!(res.sigma_pairs[&0], (bs("00"), bs("01")));
        assert!(selection_violations(&ctx, &input, &res).is_empty());
    }

    #[test]
    fn select_two_at_level_one() {
        let ctx = full_ctx(6, 1);
        let input = SelectionInput {
            tau: bs("e"),
            tau_level: 0,
            lambda: vec![(bs("00"), 1), (bs("01"), 1)],
            sigma: bs("e"),
        };
        let res = select_extensions(&ctx, &input).unwrap();
        assert_eq!(res.sigma_pairs[&0], (bs("00"), bs("01")));
        assert_eq!(res.sigma_pairs[&1], (bs("10"), bs("11")));
        assert_eq!(res.r, vec![BigRational::one()]);
        assert!(selection_violations(&ctx, &input, &res).is_empty());
        assert_eq!(exhaustive_selection_exists(&ctx, &input, 12), Some(true));
    }

    #[test]
    fn select_across_levels() {
        let ctx = full_ctx(6, 1);
        let input = SelectionInput {
            tau: bs("e"),
            tau_level: 0,
            lambda: vec![(bs("00"), 1), (bs("0100"), 2), (bs("0111"), 2)],
            sigma: bs("e"),
        };
        let res = select_extensions(&ctx, &input).unwrap();
        assert_eq!(res.sigma_pairs[&1], (bs("1000"), bs("1001")));
        assert_eq!(res.sigma_pairs[&2], (bs("1010"), bs("1011")));
        assert_eq!(res.pool_history.len(), 2);
        assert!(res.pool_history.iter().all(|p| p.size == 2));
        assert!(selection_violations(&ctx, &input, &res).is_empty());
        let too_heavy = SelectionInput {
            lambda: vec![(bs("00"), 1), (bs("01"), 1), (bs("1000"), 2)],
            ..input.clone()
        };
        assert!(matches!(select_extensions(&ctx, &too_heavy), Err(Error::Thinness(_))));
        assert!(select_extensions(&ctx, &SelectionInput { sigma: bs("0"), ..input }).is_err());
    }

    #[test]
    fn tprime_chain_round_trip() {
        let ctx = full_ctx(6, 1);
        let pistar = StagedTree::new(vec![
            FiniteTree::root_only(),
            tree(&["e", "01"]),
            tree(&["e", "01", "0110"]),
        ]);
        let tp = build_tprime(&ctx, &pistar, None).unwrap();
        assert_eq!(tp.trees[&bs("01")], tree(&["e", "00", "01"]));
        assert_eq!(tp.trees[&bs("0110")].len(), 7);
        assert!(tprime_violations(&ctx, &pistar, &tp).is_empty(), "{:?}", tprime_violations(&ctx, &pistar, &tp));
        let leaf = tp.trees[&bs("0110")].leaves()[0].clone();
        assert_eq!(tp.theta.decode(&leaf), vec![bs("01"), bs("0110")]);
        let mut codes = BTreeMap::new();
        codes.insert(bs("e"), [bs("01")].into_iter().collect());
        codes.insert(bs("01"), [bs("0110")].into_iter().collect());
        assert!(build_tprime(&ctx, &pistar, Some(&codes)).is_ok());
        codes.insert(bs("01"), BTreeSet::new());
        assert!(matches!(build_tprime(&ctx, &pistar, Some(&codes)), Err(Error::Validation(_))));
    }

    #[test]
    fn tprime_branching_stage() {
        let ctx = full_ctx(6, 1);
        let pistar = StagedTree::new(vec![
            FiniteTree::root_only(),
            tree(&["e", "00", "11"]),
            tree(&["e", "00", "11", "0001", "0010"]),
        ]);
        let tp = build_tprime(&ctx, &pistar, None).unwrap();
        assert!(tprime_violations(&ctx, &pistar, &tp).is_empty());
        let bad = StagedTree::new(vec![FiniteTree::root_only(), tree(&["e", "00", "0000"])]);
        assert!(matches!(build_tprime(&ctx, &bad, None), Err(Error::Validation(_))));
    }

    #[test]
    fn driver_constant_psi() {
        let t = full(3);
        let out = smc_driver_stage(&bs("e"), &t, &FunctionalTable::empty(), &Dagger::Supplied(FiniteTree::new()), Some(&bs("0")), 10_000).unwrap();
        assert_eq!(out.branch, DriverBranch::NoSplittings);
        assert_eq!(out.witness, Some(bs("e")));
        assert_eq!(out.b_next, bs("1"));
        assert_eq!(out.t_next, t);
    }

    #[test]
    fn driver_injective_psi() {
        let t = full(3);
        let id = identity_functional(3);
        let out = smc_driver_stage(&bs("e"), &t, &id, &Dagger::Supplied(t.clone()), None, 1_000_000).unwrap();
        assert_eq!(out.branch, DriverBranch::SplittingSubtree);
        assert_eq!(out.splitting.as_ref(), Some(&t));
        assert_eq!(out.t_next, t);
        let a = bs("1011");
        let t0 = a_oplus_tree(&a, 3).unwrap();
        let id6 = identity_functional(6);
        let out = smc_driver_stage(&bs("e"), &t0, &id6, &Dagger::FromTprime { a_prefix: bs("111111") }, None, 1_000_000).unwrap();
        assert!(out.t_next.is_two_branching());
        assert!(out.t_next.is_subset(&t0));
        assert!(out.t_next.len() >= 3);
    }

    #[test]
    fn driver_mixed_psi() {
        let t = full(3);
        // Ψ reads only the first and third bits.
        let mut axioms = Vec::new();
        for x in t.iter() {
            if !x.is_empty() {
                axioms.push(Axiom::new(x.prefix(1), 0, u64::from(x.bit(0).unwrap()), 1));
            }
            if x.len() >= 3 {
                axioms.push(Axiom::new(x.prefix(3), 1, u64::from(x.bit(2).unwrap()), 1));
            }
        }
        axioms.sort();
        axioms.dedup();
        let psi = FunctionalTable::new(axioms).unwrap();
        let sub = greedy_splitting_subtree(&psi, &t, &bs("e"), 1_000_000).unwrap();
        assert!(sub.is_two_branching());
        assert!(is_splitting_tree(&psi, &sub, false));
        assert!(sub.len() > 1);
        assert!(matches!(
            greedy_splitting_subtree(&psi, &t, &bs("e"), 3),
            Err(Error::Resource(_))
        ));
    }
}
