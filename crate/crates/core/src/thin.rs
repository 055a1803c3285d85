//! Thin subtrees, trace systems and the conversions between them.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::code::{prefix_code, read_prefix_code};
use crate::error::{Error, Result};
use crate::functional::{outputs_split, Axiom, FunctionalTable};
use crate::strings::BinaryString;
use crate::tree::{branching_stats, is_prefix_free, FiniteTree, StagedTree, StagingMode};

/// Size bounds `p` and trace sets `w`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceSystem {
    pub p: Vec<u64>,
    pub w: BTreeMap<usize, BTreeSet<u64>>,
}

impl TraceSystem {
    pub fn set(&self, n: usize) -> BTreeSet<u64> {
        self.w.get(&n).cloned().unwrap_or_default()
    }

    /// First `n` with `|w[n]| > p[n]`.
    pub fn size_violation(&self) -> Option<usize> {
        self.w
            .iter()
            .find(|(n, set)| self.p.get(**n).is_some_and(|&b| set.len() as u64 > b))
            .map(|(n, _)| *n)
    }
}

fn pow2_neg(k: usize) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << k)
}

/// Number of members of `t` in `[tau, x)`: the level of `x` in `t_tau`.
fn relative_level(t: &FiniteTree, tau: &BinaryString, x: &BinaryString) -> usize {
    (tau.len()..x.len()).filter(|&k| t.contains(&x.prefix(k))).count()
}

/// `Σ_{x ∈ Λ} 2^{-|x|_{t_tau}}`.
pub fn kraft_weight(t: &FiniteTree, tau: &BinaryString, lambda_set: &[BinaryString]) -> Result<BigRational> {
    if !t.contains(tau) {
        return Err(Error::Domain(format!("{tau} is not in the tree")));
    }
    if let Some(x) = lambda_set.iter().find(|x| !t.contains(x) || !tau.is_prefix_of(x)) {
        return Err(Error::Domain(format!("{x} is not a member extending {tau}")));
    }
    if !is_prefix_free(lambda_set) {
        return Err(Error::Domain("set is not prefix-free".into()));
    }
    Ok(lambda_set
        .iter()
        .map(|x| pow2_neg(relative_level(t, tau, x)))
        .fold(BigRational::zero(), |a, b| a + b))
}

/// Heaviest prefix-free subset of `tp` above `tau`, weighted in `t_tau`.
fn heaviest_antichain(t: &FiniteTree, tp: &FiniteTree, tau: &BinaryString) -> (BigRational, Vec<BinaryString>) {
    let above: Vec<&BinaryString> = tp.iter().filter(|x| tau.is_prefix_of(x)).collect();
    // Members sorted length-lex, so every strict prefix precedes its extensions.
    let mut best: BTreeMap<&BinaryString, (BigRational, Vec<BinaryString>)> = BTreeMap::new();
    for x in above.iter().rev() {
        let own = pow2_neg(relative_level(t, tau, x));
        let children = above
            .iter()
            .filter(|y| x.is_proper_prefix_of(y) && !above.iter().any(|z| x.is_proper_prefix_of(z) && z.is_proper_prefix_of(y)));
        let mut sum = BigRational::zero();
        let mut set = Vec::new();
        for c in children {
            let (w, s) = &best[*c];
            sum += w;
            set.extend(s.iter().cloned());
        }
        let entry = if sum > own { (sum, set) } else { (own, vec![(*x).clone()]) };
        best.insert(x, entry);
    }
    best.remove(tau).unwrap_or((BigRational::zero(), Vec::new()))
}

/// A member of `tp` and an antichain above it of weight greater than 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThinWitness {
    pub tau: BinaryString,
    pub antichain: Vec<BinaryString>,
    pub weight: BigRational,
}

/// `None` when `tp` is `t`-thin, otherwise the heaviest violating antichain.
/// A missing root is reported with an empty antichain at `λ`.
pub fn thin_violation(t: &FiniteTree, tp: &FiniteTree) -> Result<Option<ThinWitness>> {
    if !tp.is_subset(t) {
        return Err(Error::Domain("subset is not contained in the tree".into()));
    }
    if !tp.contains(&BinaryString::empty()) {
        return Ok(Some(ThinWitness {
            tau: BinaryString::empty(),
            antichain: Vec::new(),
            weight: BigRational::zero(),
        }));
    }
    for tau in tp.iter() {
        let (weight, antichain) = heaviest_antichain(t, tp, tau);
        if weight > BigRational::one() {
            return Ok(Some(ThinWitness {
                tau: tau.clone(),
                antichain,
                weight,
            }));
        }
    }
    Ok(None)
}

pub fn is_thin(t: &FiniteTree, tp: &FiniteTree) -> Result<bool> {
    Ok(thin_violation(t, tp)?.is_none())
}

/// `w[n] = { Ψ(τ)(n) : τ ∈ tp of level n+1 }` in the level tree of `Ψ̂`,
/// with `p(n) = 2^{n+1}`.
pub fn trace_from_thin(psi: &FunctionalTable, tp: &FiniteTree) -> Result<TraceSystem> {
    let depth = tp.iter().map(BinaryString::len).max().unwrap_or(0);
    let t = crate::functional::hat_level_tree(psi, depth)?;
    if let Some(w) = thin_violation(&t, tp)? {
        return Err(Error::Domain(format!(
            "subset is not thin in the level tree at {} (weight {})",
            w.tau, w.weight
        )));
    }
    let mut ts = TraceSystem::default();
    let mut top = 0;
    for tau in tp.iter() {
        let level = t.level_of(tau)?;
        top = top.max(level);
        if level == 0 {
            continue;
        }
        let n = level - 1;
        if let Some(v) = psi.hat_eval(tau, n as u64) {
            ts.w.entry(n).or_default().insert(v);
        }
    }
    ts.p = (0..top).map(|n| 1u64.checked_shl(n as u32 + 1).unwrap_or(u64::MAX)).collect();
    if let Some(n) = ts.size_violation() {
        return Err(Error::Internal(format!("trace at {n} exceeds 2^(n+1)")));
    }
    Ok(ts)
}

/// Code of a finite sequence: the prefix code of `len + 1` followed by the
/// prefix code of `v + 1` for each element, read as the binary numeral
/// `1b` minus one.
pub fn encode_sequence(values: &[u64]) -> Result<u64> {
    let mut bits = prefix_code(values.len() as u128 + 1)?;
    for &v in values {
        bits = bits.concat(&prefix_code(u128::from(v) + 1)?);
    }
    if bits.len() > 63 {
        return Err(Error::Resource(format!("sequence code needs {} bits", bits.len())));
    }
    let numeral = bits.bits().iter().fold(1u64, |acc, &b| (acc << 1) | u64::from(b));
    Ok(numeral - 1)
}

pub fn decode_sequence(code: u64) -> Result<Vec<u64>> {
    let numeral = code
        .checked_add(1)
        .ok_or_else(|| Error::Format("sequence code overflows".into()))?;
    let width = 64 - numeral.leading_zeros() as usize;
    let bits = BinaryString::from_bits((0..width - 1).rev().map(|k| (numeral >> k) & 1 == 1).collect());
    let (len, mut pos) = read_prefix_code(&bits, 0)?;
    let mut out = Vec::new();
    for _ in 1..len {
        let (v, next) = read_prefix_code(&bits, pos)?;
        out.push(v as u64 - 1);
        pos = next;
    }
    if pos != bits.len() {
        return Err(Error::Format(format!("trailing bits in sequence code {code}")));
    }
    Ok(out)
}

/// `p` with `p(0) = 0` and strictly increasing, raising entries as needed.
pub fn normalize_bound(p: &[u64]) -> Result<Vec<u64>> {
    if let Some(k) = p.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Normalization(format!("p decreases at {}", k + 1)));
    }
    let mut out: Vec<u64> = Vec::with_capacity(p.len());
    for (k, &v) in p.iter().enumerate() {
        let next = match k {
            0 => 0,
            _ => v.max(out[k - 1] + 1),
        };
        out.push(next);
    }
    Ok(out)
}

/// Greatest `m` with `p(m) ≤ n`, if `p` is known far enough to tell.
pub fn k_of(p: &[u64], n: u64) -> Option<usize> {
    let m = p.iter().rposition(|&v| v <= n)?;
    (m + 1 < p.len()).then_some(m)
}

/// Least `m` with `k(m) > n`.
pub fn k_prime_of(p: &[u64], n: usize) -> Option<usize> {
    p.get(n + 1).map(|&v| v as usize)
}

/// From a trace of `f′(m) = code(f↾k′(m))` under `p`, a trace of `f` with
/// `|w′[n]| ≤ n`: `w′[n]` collects the `n`-th entries of the sequences coded
/// in `w[k(n)]`.
pub fn rescale_trace(ts: &TraceSystem) -> Result<TraceSystem> {
    let p = normalize_bound(&ts.p)?;
    if let Some((m, set)) = ts.w.iter().find(|(m, set)| p.get(**m).is_some_and(|&b| set.len() as u64 > b)) {
        return Err(Error::Precondition(format!("input trace at {m} has {} > p({m}) elements", set.len())));
    }
    let mut out = TraceSystem::default();
    let Some(&last) = p.last() else {
        return Ok(out);
    };
    for n in 0..last {
        let Some(k) = k_of(&p, n) else { break };
        out.p.push(n);
        let mut set = BTreeSet::new();
        if k > 0 {
            for &code in ts.w.get(&k).into_iter().flatten() {
                if let Some(&v) = decode_sequence(code)?.get(n as usize) {
                    set.insert(v);
                }
            }
        }
        if !set.is_empty() {
            out.w.insert(n as usize, set);
        }
    }
    if let Some(n) = out.size_violation() {
        return Err(Error::Internal(format!("rescaled trace at {n} exceeds n")));
    }
    Ok(out)
}

/// `Σ_{i ≤ n} 2i = n(n+1)`: the level in `T` of level-`n` strings of `T*`.
pub fn spaced_level(n: usize) -> usize {
    n * (n + 1)
}

/// `{λ}` together with the strings coded (by length-lex index) in the
/// trace, each required to have level `n(n+1)` in the final tree.
pub fn thin_from_trace(t: &StagedTree, ts: &TraceSystem) -> Result<FiniteTree> {
    if let Err(v) = t.validate(StagingMode::Weak) {
        return Err(Error::Validation(format!("not a weak enumeration: {v}")));
    }
    let tree = t.final_tree();
    let mut out = FiniteTree::root_only();
    for (&n, set) in &ts.w {
        if set.len() > n {
            return Err(Error::Precondition(format!("trace at {n} has {} elements", set.len())));
        }
        for &code in set {
            let x = BinaryString::from_length_lex_index(code);
            if !tree.contains(&x) || tree.level_of(&x)? != spaced_level(n) {
                return Err(Error::Format(format!(
                    "code {code} ({x}) is not a string of level {} in the tree",
                    spaced_level(n)
                )));
            }
            out.insert(x);
        }
    }
    if let Some(w) = thin_violation(&tree, &out)? {
        return Err(Error::Internal(format!("output is not thin at {}", w.tau)));
    }
    Ok(out)
}

/// `Σ_{i=1}^{terms} (n+i) 2^{-2(n+i)}`.
pub fn spaced_tail_sum(n: usize, terms: usize) -> BigRational {
    (1..=terms)
        .map(|i| BigRational::from_integer(BigInt::from(n + i)) * pow2_neg(2 * (n + i)))
        .fold(BigRational::zero(), |a, b| a + b)
}

/// `w[n] = {Ψ_n(∅; n)}` when defined.
pub fn dnr_trace(adv: &[FunctionalTable]) -> TraceSystem {
    let mut ts = TraceSystem {
        p: vec![1; adv.len()],
        w: BTreeMap::new(),
    };
    for (n, psi) in adv.iter().enumerate() {
        if let Some(v) = psi.eval(&BinaryString::empty(), n as u64) {
            ts.w.insert(n, [v].into_iter().collect());
        }
    }
    ts
}

#[derive(Debug, Clone)]
pub struct SplitThinReport {
    pub psi: FunctionalTable,
    pub thin_ok: bool,
    /// A non-splitting incompatible pair, when there is one.
    pub split_witness: Option<(BinaryString, BinaryString)>,
    pub thin_witness: Option<ThinWitness>,
}

/// The functional `Ψ(τ) = τ↾n` for `τ` of level `n` in the final tree.
pub fn truncation_functional(t: &FiniteTree) -> Result<FunctionalTable> {
    let mut axioms = Vec::new();
    for tau in t.iter() {
        let n = t.level_of(tau)?;
        for k in 0..n {
            axioms.push(Axiom::new(tau.clone(), k as u64, u64::from(tau.bit(k).unwrap()), 1));
        }
    }
    FunctionalTable::new(axioms)
}

pub fn splitting_to_thin(t: &StagedTree, split_sub: &FiniteTree) -> Result<SplitThinReport> {
    if let Err(v) = t.validate(StagingMode::Weak) {
        return Err(Error::Validation(format!("not a weak enumeration: {v}")));
    }
    let tree = t.final_tree();
    if !split_sub.is_subset(&tree) || !split_sub.contains(&BinaryString::empty()) {
        return Err(Error::Precondition("subset must lie in the tree and contain e".into()));
    }
    let psi = truncation_functional(&tree)?;
    let split_witness = crate::functional::splitting_tree_violation(&psi, split_sub, false);
    let thin_witness = thin_violation(&tree, split_sub)?;
    Ok(SplitThinReport {
        thin_ok: split_witness.is_none() && thin_witness.is_none(),
        psi,
        split_witness,
        thin_witness,
    })
}

/// First incompatible pair of `t` whose `Ψ̂`-outputs do not split.
pub fn hat_splitting_violation(psi: &FunctionalTable, t: &FiniteTree) -> Option<(BinaryString, BinaryString)> {
    let members: Vec<&BinaryString> = t.iter().collect();
    let outs: Vec<Vec<u64>> = members.iter().map(|m| psi.hat_output(m)).collect();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if !members[i].is_compatible(members[j]) && !outputs_split(&outs[i], &outs[j]) {
                return Some((members[i].clone(), members[j].clone()));
            }
        }
    }
    None
}

/// `w[n] = { Ψ̂(τ; n) : τ of level n+1 }` with `p(n) = m^{n+1}`.
pub fn trace_from_bounded_splitting(psi: &FunctionalTable, t: &FiniteTree, m: u64) -> Result<TraceSystem> {
    let stats = branching_stats(t)?;
    if stats.max_successors as u64 > m {
        return Err(Error::Precondition(format!(
            "branching {} exceeds {m}",
            stats.max_successors
        )));
    }
    if let Some((a, b)) = hat_splitting_violation(psi, t) {
        return Err(Error::Precondition(format!("{a} and {b} do not split")));
    }
    let idx = t.index();
    let top = idx.max_level().unwrap_or(0);
    let mut ts = TraceSystem::default();
    for n in 0..top {
        ts.p.push(m.saturating_pow(n as u32 + 1));
        let set: BTreeSet<u64> = idx
            .at_level(n + 1)
            .iter()
            .filter_map(|tau| psi.hat_eval(tau, n as u64))
            .collect();
        if !set.is_empty() {
            ts.w.insert(n, set);
        }
    }
    if let Some(n) = ts.size_violation() {
        return Err(Error::Internal(format!("trace at {n} exceeds m^(n+1)")));
    }
    Ok(ts)
}

/// `m^n`, the number of level-`n` strings of an `m`-branching tree. The trace
/// at `n` reads level `n+1` and can hold `m^{n+1}` values.
pub fn level_size_bound(m: u64, n: usize) -> u64 {
    m.saturating_pow(n as u32)
}

/// Largest defined `Ψ̂(τ; n)` over `τ` of level `n+1`.
pub fn majorizer_from_perfect(psi: &FunctionalTable, t: &FiniteTree, n: usize) -> Result<u64> {
    if !t.is_of_level_at_least(n + 1) || !t.is_two_branching_below(n + 1) {
        return Err(Error::Precondition(format!("tree is not perfect to level {}", n + 1)));
    }
    if let Some((a, b)) = hat_splitting_violation(psi, &t.truncate_to_level(n + 1)) {
        return Err(Error::Precondition(format!("{a} and {b} do not split")));
    }
    t.at_level(n + 1)
        .iter()
        .filter_map(|tau| psi.hat_eval(tau, n as u64))
        .max()
        .ok_or_else(|| Error::Domain(format!("no defined value at argument {n}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_splitting_subset, random_weak_tree, rng};
    use crate::strings::bs;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn tree(items: &[&str]) -> FiniteTree {
        items.iter().map(|s| bs(s)).collect()
    }

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn full(depth: usize) -> FiniteTree {
        (0..=depth).flat_map(BinaryString::all_of_length).collect()
    }

    /// Weak enumeration adding the members of `t` one per stage, length-lex.
    fn weak_of(t: &FiniteTree) -> StagedTree {
        let mut cur = FiniteTree::root_only();
        let mut stages = vec![cur.clone()];
        for x in t.iter().filter(|x| !x.is_empty()) {
            cur.insert(x.clone());
            stages.push(cur.clone());
        }
        StagedTree::new(stages)
    }

    /// Enumerates every subset of `tp` above each member.
    fn thin_oracle(t: &FiniteTree, tp: &FiniteTree) -> bool {
        if !tp.contains(&bs("e")) {
            return false;
        }
        let members: Vec<BinaryString> = tp.iter().cloned().collect();
        members.iter().all(|tau| {
            let above: Vec<BinaryString> = members.iter().filter(|x| tau.is_prefix_of(x)).cloned().collect();
            (0u32..1 << above.len()).all(|mask| {
                let set: Vec<BinaryString> = (0..above.len())
                    .filter(|k| mask >> k & 1 == 1)
                    .map(|k| above[k].clone())
                    .collect();
                !is_prefix_free(&set) || kraft_weight(t, tau, &set).unwrap() <= BigRational::one()
            })
        })
    }

    #[test]
    fn kraft_examples() {
        let t = full(2);
        assert_eq!(kraft_weight(&t, &bs("e"), &[bs("0"), bs("1")]).unwrap(), ratio(1, 1));
        assert_eq!(kraft_weight(&t, &bs("e"), &[bs("01")]).unwrap(), ratio(1, 4));
        assert_eq!(kraft_weight(&t, &bs("e"), &[]).unwrap(), ratio(0, 1));
        assert!(kraft_weight(&t, &bs("e"), &[bs("0"), bs("01")]).is_err());
        assert!(kraft_weight(&t, &bs("000"), &[]).is_err());
    }

    #[test]
    fn thin_examples() {
        let t = full(3);
        assert!(is_thin(&t, &tree(&["e", "0", "01", "011"])).unwrap());
        assert!(is_thin(&t, &t).unwrap());
        let three = tree(&["e", "00", "01", "10"]);
        let t3 = tree(&["e", "00", "01", "10"]);
        let w = thin_violation(&t3, &three).unwrap().unwrap();
        assert_eq!(w.weight, ratio(3, 2));
        assert!(is_thin(&t, &tree(&["0"])).is_ok_and(|b| !b));
        assert!(is_thin(&t, &tree(&["e", "0000"])).is_err());
    }

    #[test]
    fn thin_matches_oracle_on_small_trees() {
        let mut r = rng(11);
        for _ in 0..300 {
            let t = random_weak_tree(&mut r, 6, 20).final_tree();
            let mut members: Vec<BinaryString> = t.iter().filter(|m| !m.is_empty()).cloned().collect();
            members.shuffle(&mut r);
            members.truncate(r.gen_range(0..=members.len().min(15)));
            let mut tp: FiniteTree = members.into_iter().collect();
            if r.gen_ratio(9, 10) {
                tp.insert(bs("e"));
            }
            assert_eq!(is_thin(&t, &tp).unwrap(), thin_oracle(&t, &tp), "{t} {tp}");
        }
    }

    #[test]
    fn trace_from_thin_examples() {
        let id = crate::functional::identity_functional(5);
        let ts = trace_from_thin(&id, &tree(&["e"])).unwrap();
        assert!(ts.w.is_empty());
        let chain = tree(&["e", "1", "10", "101"]);
        let ts = trace_from_thin(&id, &chain).unwrap();
        for (n, set) in &ts.w {
            assert_eq!(set.len(), 1, "{n}");
            assert!(set.len() as u64 <= ts.p[*n]);
        }
        assert_eq!(ts.w.values().map(|s| *s.iter().next().unwrap()).collect::<Vec<_>>(), vec![1, 0, 1]);
    }

    #[test]
    fn sequence_code_round_trip() {
        for v in [vec![], vec![0], vec![3, 1, 4], vec![0, 0, 0, 0]] {
            assert_eq!(decode_sequence(encode_sequence(&v).unwrap()).unwrap(), v);
        }
        assert!(encode_sequence(&[u64::MAX >> 2; 4]).is_err());
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(k_of(&[0, 1, 2, 3], 1), Some(1));
        assert_eq!(k_prime_of(&[0, 1, 2, 3], 1), Some(2));
        let empty = TraceSystem {
            p: vec![0, 1, 2, 3, 4],
            w: BTreeMap::new(),
        };
        let out = rescale_trace(&empty).unwrap();
        assert!(out.w.is_empty());
        assert!(rescale_trace(&TraceSystem { p: vec![0, 3, 2], w: BTreeMap::new() }).is_err());
    }

    /// Replays the rescaling on a function `f` and a noisy trace of
    /// `f′(m) = code(f↾k′(m))` that is correct on the listed arguments.
    fn rescale_replay(p: &[u64], f: &[u64], hits: &[usize], noise: u64) {
        let p = normalize_bound(p).unwrap();
        let mut ts = TraceSystem { p: p.clone(), w: BTreeMap::new() };
        for m in 1..p.len() {
            let mut set = BTreeSet::new();
            if let Some(kp) = k_prime_of(&p, m) {
                if hits.contains(&m) && kp <= f.len() {
                    set.insert(encode_sequence(&f[..kp]).unwrap());
                }
                let mut x = noise;
                while (set.len() as u64) < p[m] {
                    x += 1;
                    set.insert(encode_sequence(&vec![x; kp.min(5)]).unwrap());
                }
            }
            ts.w.insert(m, set);
        }
        let out = rescale_trace(&ts).unwrap();
        for (n, set) in &out.w {
            assert!(set.len() <= *n);
        }
        for n in 0..out.p.len() {
            let k = k_of(&p, n as u64).unwrap();
            if hits.contains(&k) && k > 0 && k_prime_of(&p, k).unwrap() <= f.len() {
                assert!(out.set(n).contains(&f[n]), "f({n}) missing");
            }
        }
    }

    #[test]
    fn rescale_identity_bound() {
        rescale_replay(&[0, 1, 2, 3, 4, 5, 6], &[2, 7, 1, 8, 2, 8, 1], &[1, 2, 3, 4, 5], 0);
        rescale_replay(&[0, 2, 4, 7], &[1, 1, 2, 3, 0, 1, 2, 1], &[1, 2], 9);
    }

    #[test]
    fn spaced_tail_matches_closed_form() {
        let four_ninths = ratio(4, 9);
        for k in 1..40usize {
            let partial = spaced_tail_sum(0, k);
            // Σ_{i>k} i x^i = x^{k+1} ((k+1) - k x) / (1-x)^2 with x = 1/4.
            let x = ratio(1, 4);
            let mut xp = BigRational::one();
            for _ in 0..=k {
                xp *= &x;
            }
            let tail = xp * (BigRational::from_integer((k as i64 + 1).into()) - &x * BigRational::from_integer((k as i64).into()))
                / ((BigRational::one() - &x) * (BigRational::one() - &x));
            assert_eq!(&partial + tail, four_ninths);
            assert!(partial < BigRational::one());
        }
    }

    #[test]
    fn thin_from_trace_examples() {
        let t = weak_of(&full(6));
        assert_eq!(thin_from_trace(&t, &TraceSystem::default()).unwrap(), FiniteTree::root_only());
        let mut ts = TraceSystem::default();
        ts.w.insert(1, [bs("01").length_lex_index().unwrap()].into_iter().collect());
        ts.w.insert(2, [bs("011010").length_lex_index().unwrap(), bs("111111").length_lex_index().unwrap()].into_iter().collect());
        let out = thin_from_trace(&t, &ts).unwrap();
        assert_eq!(out.len(), 4);
        ts.w.insert(1, [0, 1].into_iter().collect());
        assert!(matches!(thin_from_trace(&t, &ts), Err(Error::Precondition(_))));
        ts.w.insert(1, [bs("011").length_lex_index().unwrap()].into_iter().collect());
        assert!(matches!(thin_from_trace(&t, &ts), Err(Error::Format(_))));
    }

    #[test]
    fn dnr_examples() {
        assert!(dnr_trace(&[]).w.is_empty());
        let f = FunctionalTable::new(vec![Axiom::new(bs("e"), 2, 9, 1)]).unwrap();
        let ts = dnr_trace(&[FunctionalTable::empty(), FunctionalTable::empty(), f]);
        assert_eq!(ts.set(2), [9].into_iter().collect());
        assert!(ts.size_violation().is_none());
    }

    #[test]
    fn splitting_to_thin_examples() {
        let t = weak_of(&full(3));
        let r = splitting_to_thin(&t, &FiniteTree::root_only()).unwrap();
        assert!(r.thin_ok);
        let r = splitting_to_thin(&t, &tree(&["e", "0", "00", "01"])).unwrap();
        assert!(r.thin_ok);
        let bushy = weak_of(&tree(&["e", "00", "01", "10", "11"]));
        let r = splitting_to_thin(&bushy, &tree(&["e", "00", "01"])).unwrap();
        assert!(!r.thin_ok);
        assert_eq!(r.split_witness, Some((bs("00"), bs("01"))));
    }

    #[test]
    fn bounded_splitting_examples() {
        let chain = tree(&["e", "0", "01", "011"]);
        let id = crate::functional::identity_functional(4);
        let ts = trace_from_bounded_splitting(&id, &chain, 1).unwrap();
        assert!(ts.w.values().all(|s| s.len() == 1));
        let t = full(3);
        let ts = trace_from_bounded_splitting(&id, &t, 2).unwrap();
        assert!(ts.set(1).len() <= 4);
        assert_eq!(level_size_bound(2, 1), 2);
        assert!(matches!(trace_from_bounded_splitting(&id, &t, 1), Err(Error::Precondition(_))));
        let partial = FunctionalTable::new(vec![Axiom::new(bs("e"), 0, 1, 2)]).unwrap();
        let ts = trace_from_bounded_splitting(&partial, &tree(&["e", "0"]), 1).unwrap();
        assert!(ts.w.is_empty());
    }

    #[test]
    fn majorizer_examples() {
        let t = full(2);
        let psi = FunctionalTable::new(vec![
            Axiom::new(bs("0"), 0, 6, 1),
            Axiom::new(bs("1"), 0, 7, 1),
            Axiom::new(bs("00"), 1, 3, 1),
            Axiom::new(bs("01"), 1, 2, 1),
            Axiom::new(bs("10"), 1, 9, 1),
            Axiom::new(bs("11"), 1, 8, 1),
        ])
        .unwrap();
        let one_level = full(1);
        let split = FunctionalTable::new(vec![
            Axiom::new(bs("0"), 0, 3, 1),
            Axiom::new(bs("1"), 0, 9, 1),
        ])
        .unwrap();
        assert_eq!(majorizer_from_perfect(&split, &one_level, 0).unwrap(), 9);
        let same = FunctionalTable::new(vec![Axiom::new(bs("0"), 0, 4, 1), Axiom::new(bs("1"), 0, 4, 1)]).unwrap();
        assert!(majorizer_from_perfect(&same, &one_level, 0).is_err());
        let brute = t
            .at_level(2)
            .iter()
            .filter_map(|x| psi.hat_eval(x, 1))
            .max();
        assert_eq!(majorizer_from_perfect(&psi, &t, 1).ok(), brute);
        assert!(matches!(
            majorizer_from_perfect(&FunctionalTable::empty(), &t, 5),
            Err(Error::Precondition(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn thin_from_random_trace(seed in any::<u64>()) {
            let mut r = rng(seed);
            let staged = random_weak_tree(&mut r, 12, 120);
            let t = staged.final_tree();
            let mut ts = TraceSystem::default();
            for n in 1..=3 {
                let mut cands = t.at_level(spaced_level(n));
                cands.shuffle(&mut r);
                cands.truncate(r.gen_range(0..=n));
                ts.w.insert(n, cands.iter().map(|x| x.length_lex_index().unwrap()).collect());
            }
            let out = thin_from_trace(&staged, &ts).unwrap();
            prop_assert!(is_thin(&t, &out).unwrap());
        }

        #[test]
        fn random_splitting_subsets_are_thin(seed in any::<u64>()) {
            let mut r = rng(seed);
            let staged = random_weak_tree(&mut r, 10, 60);
            let psi = truncation_functional(&staged.final_tree()).unwrap();
            let sub = random_splitting_subset(&mut r, &psi, &staged.final_tree());
            let rep = splitting_to_thin(&staged, &sub).unwrap();
            prop_assert!(rep.thin_ok, "{:?} {:?}", rep.split_witness, rep.thin_witness);
        }

        #[test]
        fn trace_from_thin_respects_bound(seed in any::<u64>()) {
            let mut r = rng(seed);
            let psi = crate::corpus::random_table(&mut r, crate::corpus::TableShape { axioms: 24, max_sigma_len: 5, max_arg: 4, max_value: 3, max_steps: 3 });
            let t = crate::functional::hat_level_tree(&psi, 7).unwrap();
            let mut sub = FiniteTree::root_only();
            for x in t.iter() {
                if r.gen_ratio(1, 2) {
                    sub.insert(x.clone());
                    if !is_thin(&t, &sub).unwrap() {
                        sub.remove(x);
                    }
                }
            }
            let ts = trace_from_thin(&psi, &sub).unwrap();
            for (n, set) in &ts.w {
                prop_assert!(set.len() as u64 <= 1u64 << (n + 1));
            }
        }
    }
}
