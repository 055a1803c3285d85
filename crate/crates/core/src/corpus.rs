//! Seeded generators for adversaries, trees and functionals.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bushy::{kappa, BushyShape};
use crate::cupping::AdversaryBundle;
use crate::error::Result;
use crate::functional::{outputs_split, Axiom, FunctionalTable};
use crate::smc::{tight_majorant, OmegaContext, SelectionInput};
use crate::strings::BinaryString;
use crate::thin::is_thin;
use crate::tree::{is_prefix_free, FiniteTree, StagedTree};

pub type CorpusRng = ChaCha8Rng;

pub fn rng(seed: u64) -> CorpusRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent generator for sub-case `k` of a run seeded with `seed`.
pub fn sub_rng(seed: u64, k: u64) -> CorpusRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

pub fn random_string(rng: &mut CorpusRng, len: usize) -> BinaryString {
    BinaryString::from_bits((0..len).map(|_| rng.gen()).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct TableShape {
    pub axioms: usize,
    pub max_sigma_len: usize,
    pub max_arg: u64,
    pub max_value: u64,
    pub max_steps: u64,
}

impl Default for TableShape {
    fn default() -> Self {
        Self {
            axioms: 12,
            max_sigma_len: 4,
            max_arg: 3,
            max_value: 3,
            max_steps: 6,
        }
    }
}

/// Random consistent table: candidate axioms that would clash are dropped.
pub fn random_table(rng: &mut CorpusRng, shape: TableShape) -> FunctionalTable {
    let mut kept: Vec<Axiom> = Vec::new();
    for _ in 0..shape.axioms {
        let len = rng.gen_range(0..=shape.max_sigma_len);
        let a = Axiom::new(
            random_string(rng, len),
            rng.gen_range(0..=shape.max_arg),
            rng.gen_range(0..=shape.max_value),
            rng.gen_range(1..=shape.max_steps.max(1)),
        );
        let clash = kept
            .iter()
            .any(|b| b.arg == a.arg && b.value != a.value && b.sigma.is_compatible(&a.sigma));
        if !clash {
            kept.push(a);
        }
    }
    FunctionalTable::new(kept).expect("generated table is consistent")
}

/// Table whose output at the empty oracle is `path`, one bit per argument.
pub fn path_table(path: &BinaryString, steps: u64) -> FunctionalTable {
    FunctionalTable::new(
        path.bits()
            .iter()
            .enumerate()
            .map(|(k, &b)| Axiom::new(BinaryString::empty(), k as u64, u64::from(b), steps))
            .collect(),
    )
    .expect("path table is consistent")
}

/// Tables of the given shape; roughly one in three is replaced by a path
/// table of length `path_len` so that diagonalization is exercised.
pub fn random_adversary(rng: &mut CorpusRng, tables: usize, shape: TableShape, path_len: usize) -> AdversaryBundle {
    let psi = (0..tables)
        .map(|_| {
            if path_len > 0 && rng.gen_ratio(1, 3) {
                let p = random_string(rng, path_len);
                path_table(&p, rng.gen_range(1..=3))
            } else {
                random_table(rng, shape)
            }
        })
        .collect();
    AdversaryBundle::new(psi)
}

/// Random weak c.e. enumeration: each stage tries one new string extending a
/// current member by 1 to 3 bits, kept only if it is a new leaf.
pub fn random_weak_tree(rng: &mut CorpusRng, max_depth: usize, stages: usize) -> StagedTree {
    let mut cur = FiniteTree::root_only();
    let mut out = vec![cur.clone()];
    for _ in 0..stages {
        let members: Vec<BinaryString> = cur.iter().filter(|m| m.len() < max_depth).cloned().collect();
        if let Some(base) = members.choose(rng) {
            let room = max_depth - base.len();
            let ext = rng.gen_range(1..=room.min(3));
            let x = base.concat(&random_string(rng, ext));
            let is_new_leaf = !cur.contains(&x) && !cur.iter().any(|m| x.is_proper_prefix_of(m));
            if is_new_leaf {
                cur.insert(x);
            }
        }
        out.push(cur.clone());
    }
    StagedTree::new(out)
}

/// A `κ_i`-compatible graded tree of level `n` with successors chosen at random.
pub fn random_kappa_tree(rng: &mut CorpusRng, i: usize, n: usize) -> Result<FiniteTree> {
    let mut t = FiniteTree::root_only();
    let mut layer = vec![BinaryString::empty()];
    for k in 0..n {
        let mut next = Vec::new();
        for x in &layer {
            let succ = BushyShape::Graded.successors(x, k)?;
            for y in succ.choose_multiple(rng, kappa(i, k) as usize) {
                t.insert(y.clone());
                next.push(y.clone());
            }
        }
        layer = next;
    }
    Ok(t)
}

/// Greedy `Ψ`-splitting subset of `t` containing `λ`, members tried in random order.
pub fn random_splitting_subset(rng: &mut CorpusRng, psi: &FunctionalTable, t: &FiniteTree) -> FiniteTree {
    let mut order: Vec<BinaryString> = t.iter().filter(|m| !m.is_empty()).cloned().collect();
    order.shuffle(rng);
    let mut chosen: Vec<(BinaryString, Vec<u64>)> = vec![(BinaryString::empty(), psi.output(&BinaryString::empty()))];
    for x in order {
        let out = psi.output(&x);
        let ok = chosen
            .iter()
            .all(|(y, o)| x.is_compatible(y) || outputs_split(&out, o));
        if ok && rng.gen_ratio(3, 4) {
            chosen.push((x, out));
        }
    }
    chosen.into_iter().map(|(x, _)| x).collect()
}

/// A 2-branching tree of the given depth with a `Ψ` that reads the bit at
/// every branching position, so `Ψ = Ψ̂` and the tree is `Ψ`-splitting.
/// Each successor is `x⌢f⌢b⌢g` with random filler `f` and tail `g` of at
/// most one bit.
pub fn random_splitting_instance(rng: &mut CorpusRng, depth: usize) -> (FunctionalTable, FiniteTree) {
    let mut t = FiniteTree::root_only();
    let mut positions = std::collections::BTreeSet::new();
    let mut layer = vec![BinaryString::empty()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for x in &layer {
            let filler_len = rng.gen_range(0..=1);
            let filler = random_string(rng, filler_len);
            let base = x.concat(&filler);
            positions.insert(base.len());
            for b in [false, true] {
                let tail_len = rng.gen_range(0..=1);
                let tail = random_string(rng, tail_len);
                let y = base.child(b).concat(&tail);
                t.insert(y.clone());
                next.push(y);
            }
        }
        layer = next;
    }
    let positions: Vec<usize> = positions.into_iter().collect();
    let mut axioms = std::collections::BTreeSet::new();
    for x in t.iter() {
        for (k, &p) in positions.iter().enumerate() {
            if p < x.len() {
                let sigma = x.prefix(p + 1);
                axioms.insert(Axiom::new(sigma, k as u64, u64::from(x.bit(p).unwrap()), 1));
            }
        }
    }
    let psi = FunctionalTable::new(axioms.into_iter().collect()).expect("one value per position");
    (psi, t)
}

#[derive(Debug, Clone, Copy)]
pub struct OmegaShape {
    /// Oracle strings of this length select the tree `T(τ)` grows into.
    pub class_depth: usize,
    /// `T(τ)` holds the tree's strings of length at most `rate·|τ|`.
    pub rate: usize,
    pub max_len: usize,
}

impl Default for OmegaShape {
    fn default() -> Self {
        Self {
            class_depth: 2,
            rate: 2,
            max_len: 12,
        }
    }
}

/// Grows a 2-branching tree above `x`: a level-`k` node gets successors
/// `x⌢b⌢u` with `|u| = ext(k) - 1` random. Successors longer than
/// `max_len` are dropped.
fn grow(rng: &mut CorpusRng, t: &mut FiniteTree, x: &BinaryString, level: usize, ext: &[usize], max_len: usize) {
    let e = ext.get(level).copied().unwrap_or(1);
    for b in [false, true] {
        let y = x.child(b).concat(&random_string(rng, e - 1));
        if y.len() <= max_len {
            t.insert(y.clone());
            grow(rng, t, &y, level + 1, ext, max_len);
        }
    }
}

/// `Φ` for which `T(τ)` is a 2-branching tree `G_c` cut at length `rate·|τ|`,
/// where `c` is the first `class_depth` bits of `τ`. All `G_c` agree up to
/// the length visible before `c` is known. Each class has its own
/// per-level extension lengths in `{1, 2}`; `f` is the least strictly
/// increasing bound on the level lengths of every class.
pub fn random_omega_context(rng: &mut CorpusRng, shape: OmegaShape) -> Result<OmegaContext> {
    let rate = shape.rate.max(1);
    let cd = shape.class_depth.max(1);
    let trunk_len = rate * (cd - 1);
    let levels = shape.max_len + 1;
    let trunk_ext: Vec<usize> = (0..levels).map(|_| rng.gen_range(1..=2)).collect();
    let mut trunk = FiniteTree::root_only();
    grow(rng, &mut trunk, &BinaryString::empty(), 0, &trunk_ext, trunk_len);
    let trunk_idx = trunk.index();
    let steps = |len: usize| len.div_ceil(rate).max(1) as u64;
    let code = |s: &BinaryString| s.length_lex_index().expect("short string");
    let mut axioms = Vec::new();
    for len in 0..=trunk_len {
        for s in BinaryString::all_of_length(len) {
            axioms.push(Axiom::new(BinaryString::empty(), code(&s), u64::from(trunk.contains(&s)), steps(len)));
        }
    }
    let mut g = vec![0u64; levels];
    for (s, &l) in &trunk_idx.level {
        g[l] = g[l].max(s.len() as u64);
    }
    for key in BinaryString::all_of_length(cd) {
        let ext: Vec<usize> = (0..levels)
            .map(|k| if k < trunk_ext.len() && k == 0 { trunk_ext[0] } else { rng.gen_range(1..=2) })
            .collect();
        let mut gc = trunk.clone();
        for (x, &l) in &trunk_idx.level {
            let kids = &trunk_idx.children[x];
            for b in [false, true] {
                if kids.iter().any(|k| k.bit(x.len()) == Some(b)) {
                    continue;
                }
                let need = (trunk_len + 1).saturating_sub(x.len() + 1);
                let e = need.max(ext[l] - 1);
                let y = x.child(b).concat(&random_string(rng, e));
                if y.len() <= shape.max_len {
                    gc.insert(y.clone());
                    grow(rng, &mut gc, &y, l + 1, &ext, shape.max_len);
                }
            }
        }
        for (s, &l) in &gc.index().level {
            g[l] = g[l].max(s.len() as u64);
        }
        for len in trunk_len + 1..=shape.max_len {
            for s in BinaryString::all_of_length(len) {
                axioms.push(Axiom::new(key.clone(), code(&s), u64::from(gc.contains(&s)), steps(len)));
            }
        }
    }
    let top = g.iter().rposition(|&v| v > 0).map_or(1, |k| k + 1);
    g.truncate(top);
    OmegaContext::new(FunctionalTable::new(axioms)?, tight_majorant(&g), BinaryString::empty())
}

/// Random selection instance inside `pi`: a member `τ` with members above
/// it, a prefix-free `Λ` above `τ` of total weight at most 1, and `σ` of
/// level `n_τ` in `T(τ)`.
pub fn random_selection_input(rng: &mut CorpusRng, ctx: &OmegaContext, pi: &FiniteTree) -> Option<SelectionInput> {
    let bases: Vec<&BinaryString> = pi
        .iter()
        .filter(|t| pi.iter().any(|x| t.is_proper_prefix_of(x)))
        .collect();
    let tau = (*bases.choose(rng)?).clone();
    let tau_level = pi.level_of(&tau).ok()?;
    let mut above: Vec<(BinaryString, usize)> = pi
        .iter()
        .filter(|x| tau.is_proper_prefix_of(x))
        .map(|x| (x.clone(), pi.level_of(x).unwrap()))
        .collect();
    above.shuffle(rng);
    let mut lambda: Vec<(BinaryString, usize)> = Vec::new();
    let mut weight = 0.0f64;
    for (x, l) in above {
        let w = 0.5f64.powi((l - tau_level) as i32);
        let free = lambda.iter().all(|(y, _)| !y.is_compatible(&x));
        if free && weight + w <= 1.0 && rng.gen_ratio(2, 3) {
            weight += w;
            lambda.push((x, l));
        }
    }
    if lambda.is_empty() {
        return None;
    }
    lambda.sort();
    let prof = ctx.profile(&tau);
    let sigma = if prof.tree.is_empty() {
        BinaryString::empty()
    } else {
        prof.at_level(prof.level).choose(rng)?.clone()
    };
    Some(SelectionInput {
        tau,
        tau_level,
        lambda,
        sigma,
    })
}

/// Random `Π*` staging inside `pi`: each stage adds one or two incompatible
/// `Π`-successors of a random leaf, kept only if the result stays thin.
pub fn random_pistar(rng: &mut CorpusRng, pi: &FiniteTree, stages: usize) -> StagedTree {
    let mut cur = FiniteTree::root_only();
    let mut out = vec![cur.clone()];
    for _ in 0..stages {
        let leaves: Vec<BinaryString> = cur
            .leaves()
            .into_iter()
            .filter(|l| !pi.successors(l).is_empty())
            .collect();
        let Some(leaf) = leaves.choose(rng) else { break };
        let mut succ: Vec<BinaryString> = pi.successors(leaf).into_iter().collect();
        succ.shuffle(rng);
        let k = rng.gen_range(1..=2).min(succ.len());
        let pick: Vec<BinaryString> = succ.into_iter().take(k).collect();
        let mut cand = cur.clone();
        for x in &pick {
            cand.insert(x.clone());
        }
        if is_prefix_free(&pick) && is_thin(pi, &cand).unwrap_or(false) {
            cur = cand;
            out.push(cur.clone());
        }
    }
    StagedTree::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::StagingMode;

    #[test]
    fn generators_are_deterministic_and_valid() {
        let a = random_weak_tree(&mut rng(7), 12, 40);
        let b = random_weak_tree(&mut rng(7), 12, 40);
        assert_eq!(a, b);
        assert!(a.is_valid(StagingMode::Weak));
        let t = random_table(&mut rng(3), TableShape::default());
        assert_eq!(t.axioms(), random_table(&mut rng(3), TableShape::default()).axioms());
        assert_ne!(
            random_string(&mut sub_rng(1, 0), 32),
            random_string(&mut sub_rng(1, 1), 32)
        );
    }

    #[test]
    fn splitting_instances_are_splitting() {
        for seed in 0..20 {
            let (psi, t) = random_splitting_instance(&mut rng(seed), 4);
            assert!(t.is_two_branching());
            assert!(crate::functional::is_splitting_tree(&psi, &t, false));
            assert!(t.iter().all(|x| psi.is_hat_on(x)));
        }
    }

    #[test]
    fn omega_contexts_are_normal() {
        for seed in 0..5 {
            let ctx = random_omega_context(&mut rng(seed), OmegaShape::default()).unwrap();
            for tau in ["e", "0", "01", "110", "1011"] {
                let tau: BinaryString = tau.parse().unwrap();
                assert_eq!(ctx.normalization_violation(&tau), None, "seed {seed} at {tau}");
            }
            let pi = crate::smc::enumerate_pi(&ctx, 6).unwrap().final_tree();
            assert!(crate::smc::pi_gap_violations(&ctx, &pi).is_empty());
            let st = random_pistar(&mut rng(seed), &pi, 6);
            assert!(crate::smc::validate_pistar(&st).is_ok());
        }
    }
}
