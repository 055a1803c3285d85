//! Bushy trees, colourings, and the colour-avoiding subtree extractions.
//!
//! Two shapes are supported. In the even shape the level-`n` strings are the
//! strings of length `2n`, so every node has four successors. In the graded
//! shape level `n` has length `n(n+3)/2`, so a level-`n` node has
//! `2^{n+2}` successors.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::strings::BinaryString;
use crate::tree::{FiniteTree, TreeIndex};

/// Longest string length the enumerators will materialize.
pub const MAX_LEVEL_LENGTH: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BushyShape {
    Even,
    Graded,
}

impl BushyShape {
    /// Length of the strings of level `n`.
    pub fn level_length(self, n: usize) -> usize {
        match self {
            Self::Even => 2 * n,
            Self::Graded => n * (n + 3) / 2,
        }
    }

    /// Inverse of [`BushyShape::level_length`].
    pub fn level_of_length(self, len: usize) -> Option<usize> {
        (0..=len).find(|&n| self.level_length(n) == len)
    }

    /// Number of successors a level-`n` node has in the full tree.
    pub fn branching(self, n: usize) -> usize {
        1 << (self.level_length(n + 1) - self.level_length(n))
    }

    pub fn level_strings(self, n: usize) -> Result<Vec<BinaryString>> {
        let len = self.level_length(n);
        if len > MAX_LEVEL_LENGTH {
            return Err(Error::Resource(format!(
                "level {n} has strings of length {len}, above {MAX_LEVEL_LENGTH}"
            )));
        }
        Ok(BinaryString::all_of_length(len).collect())
    }

    /// All strings of level `≤ n`.
    pub fn full_tree(self, n: usize) -> Result<FiniteTree> {
        let mut t = FiniteTree::new();
        for k in 0..=n {
            for s in self.level_strings(k)? {
                t.insert(s);
            }
        }
        Ok(t)
    }

    /// Successors of a level-`n` string in the full tree, length-lex.
    pub fn successors(self, sigma: &BinaryString, n: usize) -> Result<Vec<BinaryString>> {
        let extra = self.level_length(n + 1) - self.level_length(n);
        if sigma.len() + extra > MAX_LEVEL_LENGTH {
            return Err(Error::Resource(format!(
                "successors of {sigma} have length above {MAX_LEVEL_LENGTH}"
            )));
        }
        Ok(BinaryString::all_of_length(extra)
            .map(|tail| sigma.concat(&tail))
            .collect())
    }
}

pub fn ncol(i: usize) -> u64 {
    1u64 << (i + 1)
}

/// `κ_i(n)`.
pub fn kappa(i: usize, n: usize) -> u64 {
    if n < i {
        2
    } else {
        1u64 << (n - i + 2)
    }
}

/// `κ_i(n)` from the recursive definition.
pub fn kappa_recurrence(i: usize, n: usize) -> u64 {
    if n < i {
        2
    } else if n == 0 {
        4
    } else {
        2 * kappa_recurrence(i, n - 1)
    }
}

/// Leaf colouring. Leaves missing from the map are uncoloured and never
/// match any colour.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Coloring {
    pub assignment: BTreeMap<BinaryString, u64>,
    pub num_colors: u64,
}

impl Coloring {
    pub fn new(assignment: BTreeMap<BinaryString, u64>, num_colors: u64) -> Result<Self> {
        if let Some((s, c)) = assignment.iter().find(|(_, &c)| c >= num_colors) {
            return Err(Error::Domain(format!("{s} has colour {c} >= {num_colors}")));
        }
        Ok(Self {
            assignment,
            num_colors,
        })
    }

    pub fn get(&self, s: &BinaryString) -> Option<u64> {
        self.assignment.get(s).copied()
    }
}

/// `(T,f)`-compatibility: level-`k` members of `sub` are level-`k` strings of
/// the shape and non-leaves of level `k` have exactly `f(k)` successors.
pub fn is_compatible_with(shape: BushyShape, sub: &FiniteTree, f: impl Fn(usize) -> u64) -> bool {
    if sub.is_empty() {
        return false;
    }
    let idx = sub.index();
    idx.level.iter().all(|(m, &k)| {
        let succ = idx.children[m].len() as u64;
        m.len() == shape.level_length(k) && (succ == 0 || succ == f(k))
    })
}

/// [`is_compatible_with`] for a finite sequence; levels past its end fail.
pub fn is_compatible(shape: BushyShape, sub: &FiniteTree, f: &[u64]) -> bool {
    is_compatible_with(shape, sub, |k| f.get(k).copied().unwrap_or(u64::MAX))
}

/// Shared propagate-and-unwind step of both extractions.
///
/// Colours flow from level `n` down to level `base`: a node takes a colour
/// (or the uncoloured mark) held by more than half of its successors, and
/// colour 0 otherwise. `d` is the least colour absent at level `base`. The
/// subtree keeps `t0` up to level `base`, then `keep(k)` non-`d` successors
/// of each level-`k` leaf, length-lex least first.
fn extract_core(
    t0: &FiniteTree,
    idx: &TreeIndex,
    n: usize,
    base: usize,
    c: &Coloring,
    keep: impl Fn(usize) -> usize,
) -> Result<(u64, FiniteTree)> {
    let mut col: HashMap<&BinaryString, Option<u64>> = HashMap::new();
    for s in idx.at_level(n) {
        let s = idx.level.get_key_value(&s).unwrap().0;
        col.insert(s, c.get(s));
    }
    for k in (base..n).rev() {
        for (s, &lvl) in &idx.level {
            if lvl != k {
                continue;
            }
            let succ = &idx.children[s];
            let mut counts: BTreeMap<Option<u64>, usize> = BTreeMap::new();
            for x in succ {
                *counts.entry(col[x]).or_default() += 1;
            }
            let winner = counts
                .into_iter()
                .find(|&(_, cnt)| 2 * cnt > succ.len())
                .map_or(Some(0), |(colour, _)| colour);
            col.insert(s, winner);
        }
    }
    let used: Vec<u64> = idx
        .level
        .iter()
        .filter(|(_, &l)| l == base)
        .filter_map(|(s, _)| col[s])
        .collect();
    let d = (0..c.num_colors)
        .find(|x| !used.contains(x))
        .ok_or_else(|| Error::Internal(format!("every colour is used at level {base}")))?;

    let mut sub: FiniteTree = idx
        .level
        .iter()
        .filter(|(_, &l)| l <= base)
        .map(|(s, _)| s.clone())
        .collect();
    let mut frontier: Vec<BinaryString> = sub.iter().filter(|s| idx.level[*s] == base).cloned().collect();
    for k in base..n {
        let mut next = Vec::new();
        for s in &frontier {
            let chosen: Vec<&BinaryString> = idx.children[s]
                .iter()
                .filter(|x| col[x] != Some(d))
                .take(keep(k))
                .collect();
            if chosen.len() < keep(k) {
                return Err(Error::Internal(format!(
                    "{s} has fewer than {} successors avoiding colour {d}",
                    keep(k)
                )));
            }
            for x in chosen {
                sub.insert(x.clone());
                next.push(x.clone());
            }
        }
        frontier = next;
    }
    debug_assert!(sub.is_subset(t0));
    Ok((d, sub))
}

/// Two-colour extraction on the even-shape tree of level `n`.
pub fn extract_twocol(n: usize, c: &Coloring) -> Result<(u64, FiniteTree)> {
    let shape = BushyShape::Even;
    let leaves = shape.level_strings(n)?;
    if c.num_colors != 2 {
        return Err(Error::Domain(format!("expected 2 colours, got {}", c.num_colors)));
    }
    if c.assignment.len() != leaves.len() || leaves.iter().any(|s| !c.assignment.contains_key(s)) {
        return Err(Error::Domain(format!(
            "colouring must cover exactly the {} strings of level {n}",
            leaves.len()
        )));
    }
    let t0 = shape.full_tree(n)?;
    let idx = t0.index();
    extract_core(&t0, &idx, n, 0, c, |_| 2)
}

/// For `κ_i`-compatible graded trees: returns `d < ncol(i)` and a
/// `κ_{i+1}`-compatible subtree of the same level with no leaf coloured `d`.
pub fn extract_nice(i: usize, t0: &FiniteTree, c: &Coloring) -> Result<(u64, FiniteTree)> {
    let shape = BushyShape::Graded;
    let idx = t0.index();
    let n = idx
        .max_level()
        .ok_or(Error::Shape("empty tree".into()))?;
    if !t0.is_of_level(n) || !is_compatible_with(shape, t0, |k| kappa(i, k)) {
        return Err(Error::Shape(format!("tree is not kappa_{i}-compatible of level {n}")));
    }
    if c.num_colors > ncol(i) {
        return Err(Error::Shape(format!("{} colours exceed ncol({i})", c.num_colors)));
    }
    let leaves = idx.leaves();
    if let Some(s) = c.assignment.keys().find(|s| !leaves.contains(s)) {
        return Err(Error::Shape(format!("{s} is coloured but is not a leaf")));
    }
    let c = Coloring {
        assignment: c.assignment.clone(),
        num_colors: ncol(i),
    };
    extract_core(t0, &idx, n, n.min(i), &c, |k| kappa(i + 1, k) as usize)
}

/// Checks that `sub` is `f_target`-compatible, of level `n`, and has no leaf
/// coloured `d`.
pub fn verify_extraction(
    shape: BushyShape,
    f_target: &[u64],
    n: usize,
    c: &Coloring,
    d: u64,
    sub: &FiniteTree,
) -> bool {
    d < c.num_colors
        && is_compatible(shape, sub, f_target)
        && sub.is_of_level(n)
        && sub.leaves().iter().all(|l| c.get(l) != Some(d))
}

/// [`verify_extraction`] plus `sub ⊆ within`.
pub fn verify_extraction_within(
    shape: BushyShape,
    f_target: &[u64],
    n: usize,
    c: &Coloring,
    d: u64,
    sub: &FiniteTree,
    within: &FiniteTree,
) -> bool {
    sub.is_subset(within) && verify_extraction(shape, f_target, n, c, d, sub)
}

pub fn kappa_sequence(i: usize, len: usize) -> Vec<u64> {
    (0..len).map(|n| kappa(i, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strings::bs;
    use proptest::prelude::*;

    fn colouring(pairs: &[(&str, u64)], m: u64) -> Coloring {
        Coloring::new(pairs.iter().map(|&(s, c)| (bs(s), c)).collect(), m).unwrap()
    }

    fn even_colouring(n: usize, bits: u64) -> Coloring {
        let leaves = BushyShape::Even.level_strings(n).unwrap();
        let map = leaves
            .into_iter()
            .enumerate()
            .map(|(k, s)| (s, (bits >> k) & 1))
            .collect();
        Coloring::new(map, 2).unwrap()
    }

    /// All subsets of `items` of size `k`, in lexicographic index order.
    fn choose<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
        if k == 0 {
            return vec![vec![]];
        }
        if items.len() < k {
            return vec![];
        }
        let mut out: Vec<Vec<T>> = choose(&items[1..], k - 1)
            .into_iter()
            .map(|mut rest| {
                rest.insert(0, items[0].clone());
                rest
            })
            .collect();
        out.extend(choose(&items[1..], k));
        out
    }

    /// Every `(T,2)`-compatible even-shape subtree of level `n`, built
    /// independently of the extraction code.
    fn all_two_subtrees(n: usize) -> Vec<FiniteTree> {
        let mut trees = vec![FiniteTree::root_only()];
        for k in 0..n {
            let mut next = Vec::new();
            for t in &trees {
                let leaves: Vec<BinaryString> = t.iter().filter(|s| s.len() == 2 * k).cloned().collect();
                let mut partial = vec![t.clone()];
                for leaf in &leaves {
                    let succ: Vec<BinaryString> =
                        BinaryString::all_of_length(2).map(|x| leaf.concat(&x)).collect();
                    let mut grown = Vec::new();
                    for p in &partial {
                        for pair in choose(&succ, 2) {
                            let mut q = p.clone();
                            pair.into_iter().for_each(|s| {
                                q.insert(s);
                            });
                            grown.push(q);
                        }
                    }
                    partial = grown;
                }
                next.extend(partial);
            }
            trees = next;
        }
        trees
    }

    #[test]
    fn level_strings_examples() {
        assert_eq!(BushyShape::Graded.level_strings(2).unwrap().len(), 32);
        assert_eq!(
            BushyShape::Even.level_strings(1).unwrap(),
            vec![bs("00"), bs("01"), bs("10"), bs("11")]
        );
        assert_eq!(BushyShape::Graded.level_strings(0).unwrap(), vec![bs("e")]);
        for n in 0..=3 {
            let expected = 1usize << (0..n).map(|i| i + 2).sum::<usize>();
            assert_eq!(BushyShape::Graded.level_strings(n).unwrap().len(), expected);
        }
        assert!(BushyShape::Graded.level_strings(6).is_err());
    }

    #[test]
    fn ncol_and_kappa() {
        assert_eq!((ncol(0), ncol(2), ncol(4)), (2, 8, 32));
        assert_eq!(kappa(0, 0), 4);
        for i in 0..=6 {
            for n in 0..=10 {
                assert_eq!(kappa(i, n), kappa_recurrence(i, n));
            }
        }
    }

    #[test]
    fn compatibility_examples() {
        assert!(is_compatible(BushyShape::Even, &FiniteTree::root_only(), &[]));
        let t: FiniteTree = [bs("e"), bs("01"), bs("10")].into_iter().collect();
        assert!(is_compatible(BushyShape::Even, &t, &[2, 2]));
        let t: FiniteTree = [bs("e"), bs("00"), bs("01"), bs("10")].into_iter().collect();
        assert!(!is_compatible(BushyShape::Even, &t, &[2, 2]));
        let t: FiniteTree = [bs("e"), bs("0"), bs("1")].into_iter().collect();
        assert!(!is_compatible(BushyShape::Even, &t, &[2]));
    }

    #[test]
    fn twocol_examples() {
        let (d, sub) = extract_twocol(0, &colouring(&[("e", 0)], 2)).unwrap();
        assert_eq!((d, sub), (1, FiniteTree::root_only()));
        let c = colouring(&[("00", 0), ("01", 0), ("10", 0), ("11", 0)], 2);
        let (d, sub) = extract_twocol(1, &c).unwrap();
        assert_eq!(d, 1);
        assert_eq!(sub, [bs("e"), bs("00"), bs("01")].into_iter().collect());
        assert!(extract_twocol(1, &colouring(&[("00", 0)], 2)).is_err());
    }

    #[test]
    fn twocol_n2_exhaustive_against_enumeration() {
        let subs = all_two_subtrees(2);
        assert_eq!(subs.len(), 6 * 36);
        for bits in (0..1u64 << 16).step_by(97) {
            let c = even_colouring(2, bits);
            let (d, sub) = extract_twocol(2, &c).unwrap();
            let valid: Vec<_> = subs
                .iter()
                .filter(|s| s.leaves().iter().all(|l| c.get(l) != Some(d)))
                .collect();
            assert!(valid.contains(&&sub), "bits {bits:#x}");
        }
    }

    #[test]
    fn verify_rejects_bad_outputs() {
        let c = colouring(&[("00", 0), ("01", 1), ("10", 0), ("11", 0)], 2);
        let bad: FiniteTree = [bs("e"), bs("00"), bs("01")].into_iter().collect();
        assert!(!verify_extraction(BushyShape::Even, &[2], 1, &c, 0, &bad));
        assert!(!verify_extraction(BushyShape::Even, &[2], 1, &c, 1, &bad));
        let good: FiniteTree = [bs("e"), bs("00"), bs("10")].into_iter().collect();
        assert!(verify_extraction(BushyShape::Even, &[2], 1, &c, 1, &good));
        assert!(!verify_extraction(BushyShape::Even, &[2], 2, &c, 1, &good));
    }

    #[test]
    fn nice_examples() {
        let c = colouring(&[("e", 0)], 2);
        let (d, t1) = extract_nice(0, &FiniteTree::root_only(), &c).unwrap();
        assert_eq!((d, t1), (1, FiniteTree::root_only()));

        // base case: level 1 with i = 1, two leaves coloured 0 and 1
        let t0: FiniteTree = [bs("e"), bs("00"), bs("11")].into_iter().collect();
        let c = colouring(&[("00", 0), ("11", 1)], 4);
        let (d, t1) = extract_nice(1, &t0, &c).unwrap();
        assert_eq!((d, &t1), (2, &t0));

        let bad: FiniteTree = [bs("e"), bs("00")].into_iter().collect();
        assert!(matches!(extract_nice(0, &bad, &Coloring::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn nice_i0_n1_against_enumeration() {
        let t0 = BushyShape::Graded.full_tree(1).unwrap();
        let succ = BushyShape::Graded.level_strings(1).unwrap();
        for bits in 0..16u64 {
            let map = succ.iter().enumerate().map(|(k, s)| (s.clone(), (bits >> k) & 1)).collect();
            let c = Coloring::new(map, 2).unwrap();
            let (d, t1) = extract_nice(0, &t0, &c).unwrap();
            let valid = choose(&succ, 2).into_iter().any(|pair| {
                let cand: FiniteTree = std::iter::once(BinaryString::empty()).chain(pair.clone()).collect();
                cand == t1 && pair.iter().all(|s| c.get(s) != Some(d))
            });
            assert!(valid, "bits {bits}");
        }
    }

    fn arb_partial(leaves: Vec<BinaryString>, m: u64) -> impl Strategy<Value = Coloring> {
        prop::collection::vec(prop::option::of(0..m), leaves.len()).prop_map(move |cols| {
            let map = leaves
                .iter()
                .zip(cols)
                .filter_map(|(s, c)| c.map(|c| (s.clone(), c)))
                .collect();
            Coloring::new(map, m).unwrap()
        })
    }

    proptest! {
        #[test]
        fn twocol_n3_random(bits in any::<u64>()) {
            let c = even_colouring(3, bits);
            let (d, sub) = extract_twocol(3, &c).unwrap();
            prop_assert!(verify_extraction(BushyShape::Even, &[2, 2, 2], 3, &c, d, &sub));
        }

        #[test]
        fn nice_i1_n2_partial(c in arb_partial(
            BushyShape::Graded.full_tree(2).unwrap().iter().filter(|s| s.len() == 5).cloned().collect(), 4)) {
            // a kappa_1-compatible level-2 tree: two level-1 nodes, 4 successors each
            let mut t0 = FiniteTree::root_only();
            for a in [bs("00"), bs("01")] {
                for s in BushyShape::Graded.successors(&a, 1).unwrap().into_iter().take(4) {
                    t0.insert(s);
                }
                t0.insert(a);
            }
            let c = Coloring::new(c.assignment.into_iter().filter(|(s, _)| t0.contains(s)).collect(), 4).unwrap();
            let (d, t1) = extract_nice(1, &t0, &c).unwrap();
            prop_assert!(verify_extraction_within(BushyShape::Graded, &kappa_sequence(2, 2), 2, &c, d, &t1, &t0));
        }
    }
}
