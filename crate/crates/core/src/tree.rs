//! Finite sets of binary strings viewed as trees.
//!
//! A [`FiniteTree`] is just a member set; it need not be downward closed.
//! Level, leaf and successor structure is always recomputed from the members.
//! [`TreeIndex`] is a throwaway snapshot of that structure for callers that
//! query it many times.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::strings::BinaryString;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct FiniteTree {
    members: BTreeSet<BinaryString>,
}

impl FiniteTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// The tree `{λ}`.
    pub fn root_only() -> Self {
        Self::from_iter([BinaryString::empty()])
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, s: &BinaryString) -> bool {
        self.members.contains(s)
    }

    pub fn insert(&mut self, s: BinaryString) -> bool {
        self.members.insert(s)
    }

    pub fn remove(&mut self, s: &BinaryString) -> bool {
        self.members.remove(s)
    }

    /// Members in length-lex order.
    pub fn iter(&self) -> impl Iterator<Item = &BinaryString> {
        self.members.iter()
    }

    pub fn members(&self) -> &BTreeSet<BinaryString> {
        &self.members
    }

    pub fn is_subset(&self, other: &FiniteTree) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn union(&self, other: &FiniteTree) -> FiniteTree {
        self.members.union(&other.members).cloned().collect()
    }

    /// Number of proper initial segments of `tau` that are members.
    pub fn level_of(&self, tau: &BinaryString) -> Result<usize> {
        if !self.contains(tau) {
            return Err(Error::NotAMember(tau.clone()));
        }
        Ok(self.prefix_count(tau))
    }

    /// Like [`FiniteTree::level_of`] but without the membership requirement.
    pub fn prefix_count(&self, tau: &BinaryString) -> usize {
        tau.proper_prefixes().filter(|p| self.contains(p)).count()
    }

    /// `(is_leaf, successors)` of a member.
    pub fn leaf_and_successors(
        &self,
        tau: &BinaryString,
    ) -> Result<(bool, BTreeSet<BinaryString>)> {
        if !self.contains(tau) {
            return Err(Error::NotAMember(tau.clone()));
        }
        let succs = self.successors(tau);
        let is_leaf = !self.members.iter().any(|m| tau.is_proper_prefix_of(m));
        Ok((is_leaf, succs))
    }

    /// Minimal proper extensions of `tau` among the members.
    pub fn successors(&self, tau: &BinaryString) -> BTreeSet<BinaryString> {
        let ext: Vec<&BinaryString> = self
            .members
            .iter()
            .filter(|m| tau.is_proper_prefix_of(m))
            .collect();
        ext.iter()
            .filter(|m| {
                !ext.iter()
                    .any(|between| between.is_proper_prefix_of(m))
            })
            .map(|m| (*m).clone())
            .collect()
    }

    pub fn is_leaf(&self, tau: &BinaryString) -> bool {
        self.contains(tau) && !self.members.iter().any(|m| tau.is_proper_prefix_of(m))
    }

    /// `T_τ = { τ' ∈ T : τ' ⊇ τ }`.
    pub fn extensions_of(&self, tau: &BinaryString) -> FiniteTree {
        self.members
            .iter()
            .filter(|m| tau.is_prefix_of(m))
            .cloned()
            .collect()
    }

    pub fn index(&self) -> TreeIndex {
        TreeIndex::build(self)
    }

    pub fn leaves(&self) -> Vec<BinaryString> {
        self.index().leaves()
    }

    /// Members of level `n`, length-lex.
    pub fn at_level(&self, n: usize) -> Vec<BinaryString> {
        self.index().at_level(n)
    }

    /// Members of level at most `n`.
    pub fn truncate_to_level(&self, n: usize) -> FiniteTree {
        let idx = self.index();
        self.members
            .iter()
            .filter(|m| idx.level[*m] <= n)
            .cloned()
            .collect()
    }

    /// True iff the tree is nonempty and every leaf has level `n`.
    pub fn is_of_level(&self, n: usize) -> bool {
        let idx = self.index();
        !self.is_empty() && idx.leaves().iter().all(|l| idx.level[l] == n)
    }

    /// True iff the tree is nonempty and every leaf has level at least `n`.
    pub fn is_of_level_at_least(&self, n: usize) -> bool {
        let idx = self.index();
        !self.is_empty() && idx.leaves().iter().all(|l| idx.level[l] >= n)
    }

    /// Exactly one member of level 0 and every member has zero or two successors.
    pub fn is_two_branching(&self) -> bool {
        let idx = self.index();
        idx.at_level(0).len() == 1 && idx.children.values().all(|c| c.is_empty() || c.len() == 2)
    }

    /// Every member of level below `n` has exactly two successors.
    pub fn is_two_branching_below(&self, n: usize) -> bool {
        let idx = self.index();
        idx.children
            .iter()
            .all(|(m, c)| idx.level[m] >= n || c.len() == 2)
    }

    /// The unique member of level 0, if there is exactly one.
    pub fn root(&self) -> Option<BinaryString> {
        let roots = self.at_level(0);
        (roots.len() == 1).then(|| roots[0].clone())
    }
}

impl FromIterator<BinaryString> for FiniteTree {
    fn from_iter<I: IntoIterator<Item = BinaryString>>(iter: I) -> Self {
        Self {
            members: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a FiniteTree {
    type Item = &'a BinaryString;
    type IntoIter = std::collections::btree_set::Iter<'a, BinaryString>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

impl fmt::Debug for FiniteTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members.iter()).finish()
    }
}

impl fmt::Display for FiniteTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("}")
    }
}

/// Parent/level/successor snapshot of a [`FiniteTree`].
#[derive(Debug, Clone)]
pub struct TreeIndex {
    pub level: BTreeMap<BinaryString, usize>,
    pub parent: BTreeMap<BinaryString, Option<BinaryString>>,
    pub children: BTreeMap<BinaryString, Vec<BinaryString>>,
}

impl TreeIndex {
    pub fn build(tree: &FiniteTree) -> Self {
        let mut level = BTreeMap::new();
        let mut parent = BTreeMap::new();
        let mut children: BTreeMap<BinaryString, Vec<BinaryString>> = BTreeMap::new();
        // length-lex order visits every proper prefix before its extensions
        for m in tree.iter() {
            let p = (0..m.len())
                .rev()
                .map(|n| m.prefix(n))
                .find(|p| tree.contains(p));
            let lvl = p.as_ref().map_or(0, |p| level[p] + 1);
            if let Some(p) = &p {
                children.entry(p.clone()).or_default().push(m.clone());
            }
            children.entry(m.clone()).or_default();
            level.insert(m.clone(), lvl);
            parent.insert(m.clone(), p);
        }
        Self {
            level,
            parent,
            children,
        }
    }

    pub fn leaves(&self) -> Vec<BinaryString> {
        self.children
            .iter()
            .filter(|(_, c)| c.is_empty())
            .map(|(m, _)| m.clone())
            .collect()
    }

    pub fn at_level(&self, n: usize) -> Vec<BinaryString> {
        self.level
            .iter()
            .filter(|(_, &l)| l == n)
            .map(|(m, _)| m.clone())
            .collect()
    }

    pub fn max_level(&self) -> Option<usize> {
        self.level.values().copied().max()
    }
}

/// True iff no element is a proper initial segment of another.
pub fn is_prefix_free<'a, I>(strings: I) -> bool
where
    I: IntoIterator<Item = &'a BinaryString>,
{
    let v: Vec<&BinaryString> = strings.into_iter().collect();
    v.iter().enumerate().all(|(i, a)| {
        v.iter()
            .enumerate()
            .all(|(j, b)| i == j || a == b || !a.is_prefix_of(b))
    })
}

/// All strings that are an initial segment of some element.
pub fn downward_closure<'a, I>(strings: I) -> FiniteTree
where
    I: IntoIterator<Item = &'a BinaryString>,
{
    let mut out = FiniteTree::new();
    for s in strings {
        for n in 0..=s.len() {
            out.insert(s.prefix(n));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchingStats {
    pub max_successors: usize,
    /// Every non-leaf member has at least two successors.
    pub perfect_over_non_leaves: bool,
    /// Largest `n` such that every member of level `< n` has exactly two successors.
    pub two_branching_below: usize,
}

pub fn branching_stats(t: &FiniteTree) -> Result<BranchingStats> {
    if t.is_empty() {
        return Err(Error::EmptyInput("branching_stats needs a nonempty tree"));
    }
    let idx = t.index();
    let max_successors = idx.children.values().map(Vec::len).max().unwrap_or(0);
    let perfect_over_non_leaves = idx
        .children
        .values()
        .all(|c| c.is_empty() || c.len() >= 2);
    let max_level = idx.max_level().unwrap_or(0);
    let mut two_branching_below = 0;
    for n in 0..=max_level {
        let ok = idx
            .level
            .iter()
            .filter(|(_, &l)| l == n)
            .all(|(m, _)| idx.children[m].len() == 2);
        if !ok {
            break;
        }
        two_branching_below = n + 1;
    }
    Ok(BranchingStats {
        max_successors,
        perfect_over_non_leaves,
        two_branching_below,
    })
}

/// A finite enumeration `T_0 ⊆ T_1 ⊆ … ⊆ T_S`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StagedTree {
    pub stages: Vec<FiniteTree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StagingMode {
    /// `|T_0| = 1`; new strings extend a leaf of the previous stage.
    Ce,
    /// `T_0 = {λ}`; at most one new string per stage, and it is a leaf of its stage.
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageViolation {
    pub stage: usize,
    pub witness: Option<BinaryString>,
    pub reason: String,
}

impl fmt::Display for StageViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.reason)?;
        if let Some(w) = &self.witness {
            write!(f, " ({w})")?;
        }
        Ok(())
    }
}

impl StagedTree {
    pub fn new(stages: Vec<FiniteTree>) -> Self {
        Self { stages }
    }

    pub fn final_tree(&self) -> FiniteTree {
        self.stages.last().cloned().unwrap_or_default()
    }

    /// Strings added at stage `s` (for `s ≥ 1`).
    pub fn added_at(&self, s: usize) -> Vec<BinaryString> {
        match (s.checked_sub(1).and_then(|p| self.stages.get(p)), self.stages.get(s)) {
            (Some(prev), Some(cur)) => cur.iter().filter(|m| !prev.contains(m)).cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// First violated stage condition, if any.
    pub fn validate(&self, mode: StagingMode) -> std::result::Result<(), StageViolation> {
        let violation = |stage, witness: Option<&BinaryString>, reason: &str| StageViolation {
            stage,
            witness: witness.cloned(),
            reason: reason.to_string(),
        };
        let Some(first) = self.stages.first() else {
            return Err(violation(0, None, "no stages"));
        };
        match mode {
            StagingMode::Ce if first.len() != 1 => {
                return Err(violation(0, None, "first stage must have exactly one member"))
            }
            StagingMode::Weak if *first != FiniteTree::root_only() => {
                return Err(violation(0, None, "first stage must be {e}"))
            }
            _ => {}
        }
        for (s, pair) in self.stages.windows(2).enumerate() {
            let (prev, cur) = (&pair[0], &pair[1]);
            let stage = s + 1;
            if let Some(lost) = prev.iter().find(|m| !cur.contains(m)) {
                return Err(violation(stage, Some(lost), "stages must be cumulative"));
            }
            let added: Vec<&BinaryString> = cur.iter().filter(|m| !prev.contains(m)).collect();
            match mode {
                StagingMode::Ce => {
                    let prev_leaves = prev.leaves();
                    if let Some(bad) = added
                        .iter()
                        .find(|a| !prev_leaves.iter().any(|l| l.is_prefix_of(a)))
                    {
                        return Err(violation(stage, Some(bad), "new string extends no leaf of the previous stage"));
                    }
                }
                StagingMode::Weak => {
                    if added.len() > 1 {
                        return Err(violation(stage, Some(added[1]), "more than one string added"));
                    }
                    if let Some(a) = added.first() {
                        if !cur.is_leaf(a) {
                            return Err(violation(stage, Some(a), "new string is not a leaf of its stage"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_valid(&self, mode: StagingMode) -> bool {
        self.validate(mode).is_ok()
    }

    /// Collapses the enumeration to `[T_0, T_S]`.
    pub fn merged(&self) -> StagedTree {
        match (self.stages.first(), self.stages.last()) {
            (Some(a), Some(b)) if self.stages.len() > 1 => StagedTree::new(vec![a.clone(), b.clone()]),
            _ => self.clone(),
        }
    }
}
