//! The cupping class: the `Π*` recursion over graded bushy trees, the stage
//! filter that cuts it down to `Π`, and the witness search showing that every
//! level of `Π*` keeps a member of `Π`.
//!
//! `Π*` is never materialized past small levels. A node at level `n` is
//! determined by its extension tree `T^τ` and colour vector, and its label is
//! rebuilt by replaying the recursion. The successors of `τ` are numbered
//! `j = ncol(n)·r + c`, where `r` is the rank of the extension tree and `c`
//! the colour, and the `j`-th successor is `τ` followed by the prefix code of
//! `j + 1`.

use crate::bushy::{
    extract_nice, is_compatible, is_compatible_with, ncol, BushyShape, Coloring,
};
use crate::code::prefix_code;
use crate::error::{Error, Result};
use crate::functional::FunctionalTable;
use crate::strings::BinaryString;
use crate::tree::{FiniteTree, TreeIndex};

/// Largest number of nodes [`pi_star_successors`] and [`materialize`] will build.
pub const NODE_BUDGET: u128 = 200_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiStarNode {
    pub tau: BinaryString,
    pub level: usize,
    pub t_tau: FiniteTree,
    pub psi_values: Vec<u64>,
}

impl PiStarNode {
    pub fn root() -> Self {
        Self {
            tau: BinaryString::empty(),
            level: 0,
            t_tau: FiniteTree::root_only(),
            psi_values: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shape = BushyShape::Graded;
        if !is_compatible_with(shape, &self.t_tau, |_| 2) || !self.t_tau.is_of_level(self.level) {
            return Err(Error::Validation(format!(
                "T^tau is not (T,2)-compatible of level {}",
                self.level
            )));
        }
        if self.psi_values.len() != self.level {
            return Err(Error::Validation(format!(
                "{} colour values for a level-{} node",
                self.psi_values.len(),
                self.level
            )));
        }
        if let Some((k, v)) = self.psi_values.iter().enumerate().find(|(k, &v)| v >= ncol(*k)) {
            return Err(Error::Validation(format!("colour {v} at {k} is not below ncol({k})")));
        }
        Ok(())
    }
}

/// The requirement functionals `Ψ_i`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdversaryBundle {
    pub psi_i: Vec<FunctionalTable>,
}

impl AdversaryBundle {
    pub fn new(psi_i: Vec<FunctionalTable>) -> Self {
        Self { psi_i }
    }

    pub fn len(&self) -> usize {
        self.psi_i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi_i.is_empty()
    }

    /// `Ψ̂_i(σ; i)` when it is defined and below `ncol(i)`.
    pub fn colour(&self, i: usize, sigma: &BinaryString) -> Option<u64> {
        self.psi_i
            .get(i)?
            .hat_eval(sigma, i as u64)
            .filter(|&v| v < ncol(i))
    }
}

/// Leaves of a level-`n` tree in length-lex order, with their successors in
/// the graded tree.
fn leaf_successors(t: &FiniteTree, n: usize) -> Result<Vec<(BinaryString, Vec<BinaryString>)>> {
    let idx = t.index();
    idx.leaves()
        .into_iter()
        .map(|l| {
            let succ = BushyShape::Graded.successors(&l, n)?;
            Ok((l, succ))
        })
        .collect()
}

fn pair_count(k: u128) -> u128 {
    k * (k - 1) / 2
}

/// Rank of the pair `a < b` among all pairs of `0..k` in lexicographic order.
fn pair_rank(a: u128, b: u128, k: u128) -> u128 {
    a * (2 * k - a - 1) / 2 + (b - a - 1)
}

fn pair_unrank(mut r: u128, k: u128) -> (u128, u128) {
    for a in 0..k {
        let row = k - a - 1;
        if r < row {
            return (a, a + 1 + r);
        }
        r -= row;
    }
    unreachable!("pair rank out of range")
}

/// Number of `(T,2)`-compatible level-`n+1` trees extending a level-`n` tree
/// with `leaves` leaves.
pub fn extension_count(n: usize, leaves: usize) -> Result<u128> {
    let k = BushyShape::Graded.branching(n) as u128;
    let per = pair_count(k);
    let mut total: u128 = 1;
    for _ in 0..leaves {
        total = total
            .checked_mul(per)
            .ok_or_else(|| Error::Resource(format!("extension count at level {n} overflows")))?;
    }
    Ok(total)
}

/// The extension tree with the given rank. The first leaf is the most
/// significant digit.
pub fn extension_from_rank(t: &FiniteTree, n: usize, mut rank: u128) -> Result<FiniteTree> {
    let leaves = leaf_successors(t, n)?;
    let k = BushyShape::Graded.branching(n) as u128;
    let per = pair_count(k);
    let mut digits = vec![0u128; leaves.len()];
    for d in digits.iter_mut().rev() {
        *d = rank % per;
        rank /= per;
    }
    if rank != 0 {
        return Err(Error::Domain("extension rank out of range".into()));
    }
    let mut out = t.clone();
    for ((_, succ), d) in leaves.iter().zip(digits) {
        let (a, b) = pair_unrank(d, k);
        out.insert(succ[a as usize].clone());
        out.insert(succ[b as usize].clone());
    }
    Ok(out)
}

/// Rank of a `(T,2)`-compatible level-`n+1` extension of `t`.
pub fn extension_rank(t: &FiniteTree, n: usize, ext: &FiniteTree) -> Result<u128> {
    let leaves = leaf_successors(t, n)?;
    let k = BushyShape::Graded.branching(n) as u128;
    let per = pair_count(k);
    let mut rank: u128 = 0;
    for (_, succ) in &leaves {
        let picked: Vec<u128> = succ
            .iter()
            .enumerate()
            .filter(|(_, s)| ext.contains(s))
            .map(|(p, _)| p as u128)
            .collect();
        if picked.len() != 2 {
            return Err(Error::Shape(format!(
                "extension picks {} successors of a leaf instead of 2",
                picked.len()
            )));
        }
        rank = rank
            .checked_mul(per)
            .and_then(|r| r.checked_add(pair_rank(picked[0], picked[1], k)))
            .ok_or_else(|| Error::Resource(format!("extension rank at level {n} overflows")))?;
    }
    Ok(rank)
}

/// The successor of `node` with extension-tree rank `rank` and colour `colour`.
pub fn successor_at(node: &PiStarNode, rank: u128, colour: u64) -> Result<PiStarNode> {
    let m_col = ncol(node.level);
    if colour >= m_col {
        return Err(Error::Shape(format!("colour {colour} >= ncol({})", node.level)));
    }
    let j = rank
        .checked_mul(u128::from(m_col))
        .and_then(|v| v.checked_add(u128::from(colour) + 1))
        .ok_or_else(|| Error::Resource("successor index overflows".into()))?;
    let t_tau = extension_from_rank(&node.t_tau, node.level, rank)?;
    let mut psi_values = node.psi_values.clone();
    psi_values.push(colour);
    Ok(PiStarNode {
        tau: node.tau.concat(&prefix_code(j)?),
        level: node.level + 1,
        t_tau,
        psi_values,
    })
}

/// Every successor of `node` in `Π*`, in label order.
pub fn pi_star_successors(node: &PiStarNode) -> Result<Vec<PiStarNode>> {
    node.validate()?;
    let leaves = node.t_tau.leaves().len();
    let m = extension_count(node.level, leaves)?;
    let total = m * u128::from(ncol(node.level));
    if total > NODE_BUDGET {
        return Err(Error::Resource(format!(
            "{total} successors exceed the budget of {NODE_BUDGET}"
        )));
    }
    let mut out = Vec::with_capacity(total as usize);
    for r in 0..m {
        for c in 0..ncol(node.level) {
            out.push(successor_at(node, r, c)?);
        }
    }
    Ok(out)
}

/// The chain of `Π*` nodes from the root to the node with `T^τ = t` and
/// `Ψ(τ) = f`.
pub fn realize_chain(n: usize, f: &[u64], t: &FiniteTree) -> Result<Vec<PiStarNode>> {
    if f.len() != n {
        return Err(Error::Shape(format!("f has length {} instead of {n}", f.len())));
    }
    if let Some((k, v)) = f.iter().enumerate().find(|(k, &v)| v >= ncol(*k)) {
        return Err(Error::Shape(format!("f({k}) = {v} is not below ncol({k})")));
    }
    if !is_compatible(BushyShape::Graded, t, &vec![2; n]) || !t.is_of_level(n) {
        return Err(Error::Shape(format!("tree is not (T,2)-compatible of level {n}")));
    }
    let idx = t.index();
    let mut chain = vec![PiStarNode::root()];
    for (k, &colour) in f.iter().enumerate() {
        let next_tree = truncate(&idx, k + 1);
        let node = chain.last().unwrap();
        let rank = extension_rank(&node.t_tau, k, &next_tree)?;
        chain.push(successor_at(node, rank, colour)?);
    }
    Ok(chain)
}

fn truncate(idx: &TreeIndex, n: usize) -> FiniteTree {
    idx.level
        .iter()
        .filter(|(_, &l)| l <= n)
        .map(|(s, _)| s.clone())
        .collect()
}

/// The node of `Π*(n)` with the given tree and colour vector.
pub fn realize(n: usize, f: &[u64], t: &FiniteTree) -> Result<PiStarNode> {
    Ok(realize_chain(n, f, t)?.pop().unwrap())
}

/// First `(i, σ)` that blocks `node` at stage `s`.
pub fn stage_filter_witness(
    node: &PiStarNode,
    adv: &AdversaryBundle,
    s: usize,
) -> Option<(usize, BinaryString)> {
    let bound = s.min(adv.len()).min(node.psi_values.len());
    for i in 0..bound {
        for sigma in node.t_tau.iter() {
            if adv.colour(i, sigma) == Some(node.psi_values[i]) {
                return Some((i, sigma.clone()));
            }
        }
    }
    None
}

/// True iff the successors of `node` enter `Π` at stage `s + 1`.
pub fn stage_filter(node: &PiStarNode, adv: &AdversaryBundle, s: usize) -> bool {
    stage_filter_witness(node, adv, s).is_none()
}

/// True iff every node of the chain passes the filter at its own level.
pub fn chain_survives(chain: &[PiStarNode], adv: &AdversaryBundle) -> bool {
    chain.iter().all(|node| stage_filter(node, adv, node.level))
}

/// A member of `Π*(n)` whose whole ancestor chain survives the stage filter.
///
/// Starts from the full graded tree of level `n` and, for each `i < n`,
/// colours the leaves by `Ψ̂_i(σ; i)` and extracts a `κ_{i+1}`-compatible
/// subtree avoiding some colour `d_i`. The result is realized with colour
/// vector `(d_0, …, d_{n-1})`.
pub fn find_pi_member_chain(n: usize, adv: &AdversaryBundle) -> Result<Vec<PiStarNode>> {
    let mut t = BushyShape::Graded.full_tree(n)?;
    let mut d = Vec::with_capacity(n);
    for i in 0..n {
        let assignment = t
            .leaves()
            .into_iter()
            .filter_map(|l| adv.colour(i, &l).map(|c| (l, c)))
            .collect();
        let colouring = Coloring::new(assignment, ncol(i))?;
        let (di, next) = extract_nice(i, &t, &colouring)?;
        d.push(di);
        t = next;
    }
    let chain = realize_chain(n, &d, &t)?;
    if let Some(bad) = chain.iter().find(|node| !stage_filter(node, adv, node.level)) {
        let (i, sigma) = stage_filter_witness(bad, adv, bad.level).unwrap();
        return Err(Error::Internal(format!(
            "level-{} ancestor blocked by Psi_{i} at {sigma}",
            bad.level
        )));
    }
    Ok(chain)
}

pub fn find_pi_member(n: usize, adv: &AdversaryBundle) -> Result<PiStarNode> {
    Ok(find_pi_member_chain(n, adv)?.pop().unwrap())
}

/// `Π*(n)` in full, for small `n`.
pub fn materialize(n: usize) -> Result<Vec<PiStarNode>> {
    let mut level = vec![PiStarNode::root()];
    let mut built: u128 = 1;
    for _ in 0..n {
        let mut next = Vec::new();
        for node in &level {
            let succ = pi_star_successors(node)?;
            built += succ.len() as u128;
            if built > NODE_BUDGET {
                return Err(Error::Resource(format!("materializing exceeds {NODE_BUDGET} nodes")));
            }
            next.extend(succ);
        }
        level = next;
    }
    Ok(level)
}

/// Members of `Π*(n)` whose ancestors (and themselves) all pass the filter,
/// found by materializing the whole level.
pub fn exhaustive_survivors(n: usize, adv: &AdversaryBundle) -> Result<Vec<PiStarNode>> {
    Ok(materialize(n)?
        .into_iter()
        .filter(|node| {
            realize_chain(node.level, &node.psi_values, &node.t_tau)
                .map(|chain| chain_survives(&chain, adv))
                .unwrap_or(false)
        })
        .collect())
}

fn two_successors(t: &FiniteTree, sigma: &BinaryString) -> Result<(BinaryString, BinaryString)> {
    let succ: Vec<BinaryString> = t.successors(sigma).into_iter().collect();
    match succ.len() {
        2 => Ok((succ[0].clone(), succ[1].clone())),
        0 => Err(Error::Depth(format!("{sigma} is a leaf"))),
        k => Err(Error::Validation(format!("{sigma} has {k} successors"))),
    }
}

/// Walks a 2-branching tree along `b`: bit 1 takes the length-lex larger
/// successor, bit 0 the smaller one.
pub fn join_code(t: &FiniteTree, b: &BinaryString) -> Result<BinaryString> {
    let mut sigma = t
        .root()
        .ok_or_else(|| Error::Validation("tree has no unique root".into()))?;
    for &bit in b.bits() {
        let (left, right) = two_successors(t, &sigma)?;
        sigma = if bit { right } else { left };
    }
    Ok(sigma)
}

/// Inverse of [`join_code`].
pub fn join_decode(t: &FiniteTree, sigma: &BinaryString) -> Result<BinaryString> {
    let mut cur = t
        .root()
        .ok_or_else(|| Error::Validation("tree has no unique root".into()))?;
    let mut out = BinaryString::empty();
    while cur != *sigma {
        let (left, right) = two_successors(t, &cur)?;
        if left.is_prefix_of(sigma) {
            out.push(false);
            cur = left;
        } else if right.is_prefix_of(sigma) {
            out.push(true);
            cur = right;
        } else {
            return Err(Error::Domain(format!("{sigma} is not on the tree")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::Axiom;
    use crate::strings::bs;

    fn first_level_trees() -> Vec<FiniteTree> {
        let succ = BushyShape::Graded.level_strings(1).unwrap();
        let mut out = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                out.push([bs("e"), succ[a].clone(), succ[b].clone()].into_iter().collect());
            }
        }
        out
    }

    #[test]
    fn root_successors() {
        let succ = pi_star_successors(&PiStarNode::root()).unwrap();
        assert_eq!(succ.len(), 12);
        let labels: Vec<BinaryString> = succ.iter().map(|s| s.tau.clone()).collect();
        assert!(crate::tree::is_prefix_free(&labels));
        let trees = first_level_trees();
        for (j, node) in succ.iter().enumerate() {
            assert_eq!(node.t_tau, trees[j / 2]);
            assert_eq!(node.psi_values, vec![(j % 2) as u64]);
        }
    }

    #[test]
    fn level_one_successor_count() {
        let node = &pi_star_successors(&PiStarNode::root()).unwrap()[0];
        // 8 successors per leaf, two leaves
        let m = 28u128 * 28;
        assert_eq!(extension_count(1, 2).unwrap(), m);
        assert_eq!(pi_star_successors(node).unwrap().len() as u128, m * 4);
    }

    #[test]
    fn invalid_node_rejected() {
        let mut node = PiStarNode::root();
        node.t_tau.insert(bs("00"));
        assert!(pi_star_successors(&node).is_err());
    }

    #[test]
    fn rank_round_trip() {
        let t = &first_level_trees()[3];
        for r in (0..784u128).step_by(37) {
            let ext = extension_from_rank(t, 1, r).unwrap();
            assert_eq!(extension_rank(t, 1, &ext).unwrap(), r);
        }
        for k in 2..10u128 {
            let mut r = 0;
            for a in 0..k {
                for b in a + 1..k {
                    assert_eq!(pair_rank(a, b, k), r);
                    assert_eq!(pair_unrank(r, k), (a, b));
                    r += 1;
                }
            }
        }
    }

    #[test]
    fn realize_examples() {
        assert_eq!(realize(0, &[], &FiniteTree::root_only()).unwrap(), PiStarNode::root());
        let t = &first_level_trees()[0];
        let node = realize(1, &[1], t).unwrap();
        assert_eq!(node, pi_star_successors(&PiStarNode::root()).unwrap()[1]);
        assert!(matches!(realize(1, &[2], t), Err(Error::Shape(_))));
    }

    fn table(rows: &[(&str, u64, u64, u64)]) -> FunctionalTable {
        FunctionalTable::new(rows.iter().map(|&(s, a, v, st)| Axiom::new(bs(s), a, v, st)).collect()).unwrap()
    }

    #[test]
    fn filter_examples() {
        let node = realize(1, &[1], &first_level_trees()[0]).unwrap();
        assert!(stage_filter(&node, &AdversaryBundle::default(), 1));
        let adv = AdversaryBundle::new(vec![table(&[("e", 0, 1, 1)])]);
        assert!(!stage_filter(&node, &adv, 1));
        let adv = AdversaryBundle::new(vec![table(&[("e", 0, 5, 1)])]);
        assert!(stage_filter(&node, &adv, 1));
    }

    #[test]
    fn find_member_examples() {
        let empty = AdversaryBundle::default();
        assert_eq!(find_pi_member(0, &empty).unwrap(), PiStarNode::root());
        let node = find_pi_member(1, &empty).unwrap();
        assert_eq!(node.psi_values, vec![0]);
        assert_eq!(node.t_tau, first_level_trees()[0]);
        assert!(exhaustive_survivors(1, &empty).unwrap().contains(&node));

        let adv = AdversaryBundle::new(vec![table(&[("e", 0, 0, 1)])]);
        let node = find_pi_member(1, &adv).unwrap();
        assert_eq!(node.psi_values, vec![1]);
        let survivors = exhaustive_survivors(1, &adv).unwrap();
        assert_eq!(survivors.len(), 6);
        assert!(survivors.iter().all(|s| s.psi_values == vec![1]));
        assert!(survivors.contains(&node));
    }

    #[test]
    fn find_member_deep() {
        let adv = AdversaryBundle::new(vec![
            table(&[("0", 0, 1, 1), ("1", 0, 0, 1)]),
            table(&[("00", 1, 3, 2), ("01", 1, 0, 2), ("1", 1, 1, 1)]),
            table(&[("e", 2, 7, 1)]),
        ]);
        for n in 0..=3 {
            let chain = find_pi_member_chain(n, &adv).unwrap();
            assert!(chain_survives(&chain, &adv));
        }
        assert!(matches!(extension_count(4, 16), Err(Error::Resource(_))));
    }

    #[test]
    fn join_examples() {
        let full: FiniteTree = (0..=3).flat_map(BinaryString::all_of_length).collect();
        assert_eq!(join_code(&full, &bs("101")).unwrap(), bs("101"));
        let t: FiniteTree = ["e", "00", "11", "1100", "1111", "0000", "0011"].iter().map(|s| bs(s)).collect();
        assert_eq!(join_code(&t, &bs("10")).unwrap(), bs("1100"));
        assert_eq!(join_code(&t, &bs("e")).unwrap(), bs("e"));
        assert!(matches!(join_code(&t, &bs("100")), Err(Error::Depth(_))));
        for len in 0..=3 {
            for b in BinaryString::all_of_length(len) {
                assert_eq!(join_decode(&full, &join_code(&full, &b).unwrap()).unwrap(), b);
            }
        }
    }
}
