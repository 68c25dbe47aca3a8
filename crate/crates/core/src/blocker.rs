//! `B`-blockers: pairs `(C, D)` of subsets witnessing that `B` cannot absorb.
//!
//! A pair is a blocker when `D` is a subuniverse, `∅ ≠ C ⊊ D`, `C` misses
//! `B`, `D` meets `B`, and every basic operation `t` has a coordinate `i`
//! with `t(D,…,D,C,D,…,D) ⊆ C` (`C` at `i`). The fixed-parameter search
//! guesses that coordinate for every operation up front, so it runs in
//! `|A∖B|·|B|·∏ arity` iterations of a reachability computation.

use std::sync::OnceLock;

use serde::Serialize;

use crate::algebra::{advance, Algebra, Elem, Operation, Subset, SubuniverseViolation};
use crate::bits::BitSet;
use crate::error::{Error, Result};
use crate::par;
use crate::Budget;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BlockerPair {
    pub c: Subset,
    pub d: Subset,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum BlockerViolation {
    /// Condition (1).
    DNotSubuniverse(SubuniverseViolation),
    /// Condition (2), `C` empty.
    CEmpty,
    /// Condition (2), `C` not a proper subset of `D`.
    CNotProperSubset,
    /// Condition (3).
    CMeetsB { elem: Elem },
    /// Condition (4).
    DMissesB,
    /// Condition (5): no coordinate of `op` maps `(D,…,C,…,D)` into `C`.
    NoAbsorbingPosition { op: String },
}

/// The least coordinate `i` with `op(D,…,C,…,D) ⊆ C`, `C` at `i`.
fn absorbing_position(
    n: usize,
    op: &Operation,
    c: &Subset,
    d: &Subset,
    in_c: &[bool],
) -> Option<usize> {
    let r = op.arity();
    let (cm, dm) = (c.members(), d.members());
    let mut args = vec![0; r];
    'position: for i in 0..r {
        let mut pos = vec![0usize; r];
        loop {
            for (l, a) in args.iter_mut().enumerate() {
                *a = if l == i { cm[pos[l]] } else { dm[pos[l]] };
            }
            if !in_c[op.apply(n, &args) as usize] {
                continue 'position;
            }
            // mixed-radix step: |C| at i, |D| elsewhere
            let mut l = r;
            loop {
                if l == 0 {
                    return Some(i);
                }
                l -= 1;
                pos[l] += 1;
                let base = if l == i { cm.len() } else { dm.len() };
                if pos[l] < base {
                    break;
                }
                pos[l] = 0;
            }
        }
    }
    None
}

/// Checks the five blocker conditions in order and reports the first that
/// fails.
pub fn is_blocker(a: &Algebra, b: &Subset, c: &Subset, d: &Subset) -> Result<(), BlockerViolation> {
    a.is_subuniverse(d)
        .map_err(BlockerViolation::DNotSubuniverse)?;
    if c.is_empty() {
        return Err(BlockerViolation::CEmpty);
    }
    if !c.is_subset_of(d) || c.len() == d.len() {
        return Err(BlockerViolation::CNotProperSubset);
    }
    if let Some(elem) = c.iter().find(|&x| b.contains(x)) {
        return Err(BlockerViolation::CMeetsB { elem });
    }
    if !d.meets(b) {
        return Err(BlockerViolation::DMissesB);
    }
    let in_c = c.mask(a.size());
    for op in a.ops() {
        if absorbing_position(a.size(), op, c, d, &in_c).is_none() {
            return Err(BlockerViolation::NoAbsorbingPosition {
                op: op.name().to_string(),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum DefinitionViolation {
    Basic(BlockerViolation),
    /// `op` applied to the rows `args` of `D^n ∖ (D∖C)^n` leaves the set.
    NotClosed {
        n: usize,
        op: String,
        args: Vec<Vec<Elem>>,
        value: Vec<Elem>,
    },
}

/// Checks the defining conditions directly: conditions (1)–(4) and, for
/// every `1 ≤ m ≤ max_n`, that `D^m ∖ (D∖C)^m` is a subuniverse of `A^m`.
pub fn check_blocker_def(
    a: &Algebra,
    b: &Subset,
    c: &Subset,
    d: &Subset,
    max_n: usize,
    cap: usize,
) -> Result<Option<DefinitionViolation>> {
    match is_blocker(a, b, c, d) {
        Err(BlockerViolation::NoAbsorbingPosition { .. }) | Ok(()) => {}
        Err(v) => return Ok(Some(DefinitionViolation::Basic(v))),
    }
    let n = a.size();
    let in_c = c.mask(n);
    let in_d = d.mask(n);
    for m in 1..=max_n {
        let mut set: Vec<Vec<Elem>> = Vec::new();
        let mut pos = vec![0usize; m];
        loop {
            let t: Vec<Elem> = pos.iter().map(|&p| d.members()[p]).collect();
            if t.iter().any(|&x| in_c[x as usize]) {
                set.push(t);
            }
            if !advance(&mut pos, d.len()) {
                break;
            }
        }
        let inside =
            |t: &[Elem]| t.iter().all(|&x| in_d[x as usize]) && t.iter().any(|&x| in_c[x as usize]);
        for op in a.ops() {
            let r = op.arity();
            let work = (set.len() as u128).saturating_pow(r as u32);
            if work > cap as u128 {
                return Err(Error::cap("blocker definition check", work, cap));
            }
            let mut idx = vec![0usize; r];
            let mut args = vec![0; r];
            let mut value = vec![0; m];
            loop {
                for (j, v) in value.iter_mut().enumerate() {
                    for (x, &i) in args.iter_mut().zip(&idx) {
                        *x = set[i][j];
                    }
                    *v = op.apply(n, &args);
                }
                if !inside(&value) {
                    return Ok(Some(DefinitionViolation::NotClosed {
                        n: m,
                        op: op.name().to_string(),
                        args: idx.iter().map(|&i| set[i].clone()).collect(),
                        value,
                    }));
                }
                if !advance(&mut idx, set.len()) {
                    break;
                }
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FptOutcome {
    pub blocker: Option<BlockerPair>,
    /// Outer iterations `(c, b, index vector)` in canonical order up to and
    /// including the one that produced the answer.
    pub iterations: u64,
}

/// Per-`(c, b)` data: `D = ⟨b, c⟩` and, for each operation and coordinate,
/// the one-step successor sets `u ↦ t(D,…,u,…,D)` over local indices of `D`.
struct PairGraph {
    d: Subset,
    start: usize,
    in_b: BitSet,
    /// `succ[op][coord][u]`
    succ: Vec<Vec<Vec<BitSet>>>,
}

impl PairGraph {
    fn build(a: &Algebra, b: &Subset, b_elem: Elem, c_elem: Elem) -> Self {
        let n = a.size();
        let d = a.generate_subuniverse(&Subset::new([b_elem, c_elem], n).expect("in range"));
        let dm = d.members();
        let mut local = vec![usize::MAX; n];
        for (i, &x) in dm.iter().enumerate() {
            local[x as usize] = i;
        }
        let m = dm.len();
        let mut in_b = BitSet::new(m);
        for (i, &x) in dm.iter().enumerate() {
            if b.contains(x) {
                in_b.insert(i);
            }
        }
        let succ = a
            .ops()
            .iter()
            .map(|op| {
                let r = op.arity();
                let mut s = vec![vec![BitSet::new(m); m]; r];
                let mut pos = vec![0usize; r];
                let mut args = vec![0; r];
                loop {
                    for (x, &p) in args.iter_mut().zip(&pos) {
                        *x = dm[p];
                    }
                    let v = local[op.apply(n, &args) as usize];
                    for (j, &u) in pos.iter().enumerate() {
                        s[j][u].insert(v);
                    }
                    if !advance(&mut pos, m) {
                        break;
                    }
                }
                s
            })
            .collect();
        PairGraph {
            start: local[c_elem as usize],
            d,
            in_b,
            succ,
        }
    }

    /// Vertices reachable from `c` under the chosen coordinates, or `None`
    /// as soon as the reachable set meets `B`.
    fn reach(&self, coords: &[usize]) -> Option<BitSet> {
        let mut seen = BitSet::new(self.d.len());
        seen.insert(self.start);
        let mut stack = vec![self.start];
        while let Some(u) = stack.pop() {
            for (op, &j) in self.succ.iter().zip(coords) {
                for v in op[j][u].iter() {
                    if seen.insert(v) {
                        if self.in_b.contains(v) {
                            return None;
                        }
                        stack.push(v);
                    }
                }
            }
        }
        Some(seen)
    }
}

/// Searches for a `B`-blocker by guessing one coordinate per basic
/// operation. Iterates `c ∈ A∖B`, then `b ∈ B`, then coordinate vectors in
/// lexicographic order; the first blocker in that order is returned.
pub fn find_blocker_fpt(a: &Algebra, b: &Subset, budget: &Budget) -> Result<FptOutcome> {
    a.require_idempotent()?;
    a.require_subuniverse(b)?;
    let n = a.size();
    let outside = b.complement(n);
    let arities: Vec<usize> = a.arities().collect();
    let per_pair = arities
        .iter()
        .try_fold(1u64, |acc, &s| acc.checked_mul(s as u64))
        .ok_or_else(|| Error::cap("coordinate vectors", u128::MAX, budget.cap))?;
    let pairs = (outside.len() * b.len()) as u64;
    let total = pairs
        .checked_mul(per_pair)
        .ok_or_else(|| Error::cap("blocker iterations", u128::MAX, budget.cap))?;
    let graphs: Vec<OnceLock<PairGraph>> = (0..pairs).map(|_| OnceLock::new()).collect();

    let hit = par::find_first(total, budget.threads, |idx| {
        let pair = (idx / per_pair) as usize;
        let mut rest = idx % per_pair;
        let mut coords = vec![0usize; arities.len()];
        for (slot, &s) in coords.iter_mut().zip(&arities).rev() {
            *slot = (rest % s as u64) as usize;
            rest /= s as u64;
        }
        let g = graphs[pair].get_or_init(|| {
            let c_elem = outside.members()[pair / b.len()];
            let b_elem = b.members()[pair % b.len()];
            PairGraph::build(a, b, b_elem, c_elem)
        });
        g.reach(&coords).map(|seen| BlockerPair {
            c: Subset::from_sorted_unchecked(seen.iter().map(|i| g.d.members()[i]).collect()),
            d: g.d.clone(),
        })
    });
    Ok(match hit {
        Some((i, pair)) => FptOutcome {
            blocker: Some(pair),
            iterations: i + 1,
        },
        None => FptOutcome {
            blocker: None,
            iterations: total,
        },
    })
}

/// Oracle: every subuniverse `D` meeting `B` (ascending by bitmask) and
/// every nonempty `C ⊆ D∖B` (ascending by bitmask), checked with
/// [`is_blocker`].
pub fn find_blocker_naive(a: &Algebra, b: &Subset, budget: &Budget) -> Result<Option<BlockerPair>> {
    let n = a.size();
    if n >= 63 || (1u128 << n) > budget.cap as u128 {
        return Err(Error::cap(
            "subsets of the universe",
            1u128 << n.min(127),
            budget.cap,
        ));
    }
    let to_mask = |s: &Subset| s.iter().fold(0u64, |m, x| m | 1 << x);
    let b_mask = to_mask(b);
    let mut subuniverses: Vec<u64> = (1u64..1 << n)
        .map(|m| to_mask(&a.generate_subuniverse(&Subset::from_mask(m))))
        .collect();
    subuniverses.sort_unstable();
    subuniverses.dedup();
    for &dm in &subuniverses {
        if dm & b_mask == 0 {
            continue;
        }
        let d = Subset::from_mask(dm);
        let free = dm & !b_mask;
        let mut cm = 0u64;
        loop {
            // next nonempty submask of `free` in increasing order
            cm = (cm.wrapping_sub(free)) & free;
            if cm == 0 {
                break;
            }
            let c = Subset::from_mask(cm);
            if is_blocker(a, b, &c, &d).is_ok() {
                return Ok(Some(BlockerPair { c, d }));
            }
        }
    }
    Ok(None)
}
