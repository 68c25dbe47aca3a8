//! Jónsson absorption: the digraph decision criterion, chain construction
//! and merging, exhaustive chain verification, and a brute-force oracle
//! that searches the ternary clone directly.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::algebra::{checked_pow, Algebra, Elem, Subset};
use crate::closure::{generate_subpower, generate_subpower_until};
use crate::error::{Error, Result};
use crate::par;
use crate::term::Term;
use crate::Budget;

/// A tuple `(a, c, d, b1, b2)` for which no `B`-coloured path from `a` to `c`
/// exists in `⟨(b1,a,a), (b2,c,c), (d,a,c)⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct JonssonFailure {
    pub a: Elem,
    pub c: Elem,
    pub d: Elem,
    pub b1: Elem,
    pub b2: Elem,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct JonssonVerdict {
    /// Least failing tuple in ascending `(a, c, d, b1, b2)` order.
    pub failure: Option<JonssonFailure>,
    /// Tuples examined in canonical order up to and including the answer.
    pub tuples_checked: u64,
}

impl JonssonVerdict {
    pub fn holds(&self) -> bool {
        self.failure.is_none()
    }
}

/// Decides whether `b` Jónsson absorbs `a`.
///
/// For every `a, c, d ∈ A` and `b1, b2 ∈ B` the ternary subpower generated by
/// `(b1,a,a), (b2,c,c), (d,a,c)` is read as a digraph on `A` with an edge
/// `u → v` for each member `(b,u,v)` with `b ∈ B`; absorption holds iff every
/// such digraph has a directed path from `a` to `c`. The closure stops as
/// soon as the path appears.
pub fn decide_jonsson(a: &Algebra, b: &Subset, budget: &Budget) -> Result<JonssonVerdict> {
    a.require_idempotent()?;
    a.require_subuniverse(b)?;
    let n = a.size();
    let bm = b.members();
    let nb = bm.len() as u64;
    let total = (n as u64).pow(3) * nb * nb;
    let in_b = b.mask(n);

    let hit = par::find_first(total, budget.threads, |idx| {
        let mut rest = idx;
        let b2 = bm[(rest % nb) as usize];
        rest /= nb;
        let b1 = bm[(rest % nb) as usize];
        rest /= nb;
        let d = (rest % n as u64) as Elem;
        rest /= n as u64;
        let c = (rest % n as u64) as Elem;
        let x = (rest / n as u64) as Elem;
        let t = JonssonFailure { a: x, c, d, b1, b2 };
        match has_coloured_path(a, &in_b, t, budget.cap) {
            Ok(true) => None,
            Ok(false) => Some(Ok(t)),
            Err(e) => Some(Err(e)),
        }
    });
    match hit {
        None => Ok(JonssonVerdict {
            failure: None,
            tuples_checked: total,
        }),
        Some((_, Err(e))) => Err(e),
        Some((i, Ok(t))) => Ok(JonssonVerdict {
            failure: Some(t),
            tuples_checked: i + 1,
        }),
    }
}

fn has_coloured_path(a: &Algebra, in_b: &[bool], t: JonssonFailure, cap: usize) -> Result<bool> {
    if t.a == t.c {
        return Ok(true);
    }
    let n = a.size();
    let mut adj: Vec<Vec<Elem>> = vec![Vec::new(); n];
    let mut reached = vec![false; n];
    reached[t.a as usize] = true;
    let mut stack = Vec::new();
    let target = t.c as usize;
    let gens = [
        vec![t.b1, t.a, t.a],
        vec![t.b2, t.c, t.c],
        vec![t.d, t.a, t.c],
    ];
    let (_, stopped) = generate_subpower_until(a, 3, &gens, false, cap, |m| {
        if !in_b[m[0] as usize] {
            return false;
        }
        let (u, v) = (m[1] as usize, m[2] as usize);
        adj[u].push(v as Elem);
        if reached[u] && !reached[v] {
            reached[v] = true;
            stack.push(v);
            while let Some(w) = stack.pop() {
                for &z in &adj[w] {
                    if !reached[z as usize] {
                        reached[z as usize] = true;
                        stack.push(z as usize);
                    }
                }
            }
        }
        reached[target]
    })?;
    Ok(stopped.is_some())
}

/// A sequence of ternary terms `d_0, …, d_m` over variables `x0, x1, x2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JonssonChain {
    pub terms: Vec<Term>,
}

impl JonssonChain {
    pub fn new(terms: Vec<Term>) -> Self {
        JonssonChain { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The two-term chain `x, z`.
    pub fn trivial() -> Self {
        JonssonChain::new(vec![Term::Var(0), Term::Var(2)])
    }
}

impl fmt::Display for JonssonChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " ; ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// The chain `x, t(y,x,…,x), t(z,y,x,…,x), …, t(z,…,z,y), z` built from an
/// absorption term `t` of the given arity; it has `arity + 2` terms.
///
/// A unary idempotent term is the identity, which absorbs only `B = A`; it
/// is accepted only on a one-element algebra, where the chain is `x, z`.
pub fn chain_from_term(a: &Algebra, t: &Term, arity: usize) -> Result<JonssonChain> {
    if arity <= 1 {
        return if a.size() == 1 {
            Ok(JonssonChain::trivial())
        } else {
            Err(Error::DegenerateArity)
        };
    }
    let (x, y, z) = (Term::Var(0), Term::Var(1), Term::Var(2));
    let mut terms = vec![x.clone()];
    for i in 1..=arity {
        let args: Vec<Term> = (0..arity)
            .map(|p| match (p + 1).cmp(&i) {
                std::cmp::Ordering::Less => z.clone(),
                std::cmp::Ordering::Equal => y.clone(),
                std::cmp::Ordering::Greater => x.clone(),
            })
            .collect();
        terms.push(t.substitute(&args));
    }
    terms.push(z);
    Ok(JonssonChain::new(terms))
}

/// Merges a chain for `b` and a chain for `c` into one chain valid for both:
/// `f_{i(l+1)+j}(x,y,z) = d_i(x, e_j(x,y,z), z)`.
pub fn merge_chains(
    a: &Algebra,
    b: &Subset,
    c: &Subset,
    d_chain: &JonssonChain,
    e_chain: &JonssonChain,
) -> Result<JonssonChain> {
    verify_chain(a, b, d_chain).map_err(|v| Error::ChainInvalid(format!("first chain: {v}")))?;
    verify_chain(a, c, e_chain).map_err(|v| Error::ChainInvalid(format!("second chain: {v}")))?;
    let mut terms = Vec::with_capacity(d_chain.len() * e_chain.len());
    for d in &d_chain.terms {
        for e in &e_chain.terms {
            terms.push(d.substitute(&[Term::Var(0), e.clone(), Term::Var(2)]));
        }
    }
    Ok(JonssonChain::new(terms))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ChainViolation {
    Empty,
    BadTerm {
        index: usize,
        reason: String,
    },
    FirstNotProjection {
        args: [Elem; 3],
        value: Elem,
    },
    LastNotProjection {
        args: [Elem; 3],
        value: Elem,
    },
    /// `d_i(x,y,y) ≠ d_{i+1}(x,x,y)`.
    Link {
        index: usize,
        x: Elem,
        y: Elem,
    },
    /// `d_i(b,y,b') ∉ B`.
    Escapes {
        index: usize,
        args: [Elem; 3],
        value: Elem,
    },
}

impl fmt::Display for ChainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainViolation::Empty => write!(f, "empty chain"),
            ChainViolation::BadTerm { index, reason } => write!(f, "term {index}: {reason}"),
            ChainViolation::FirstNotProjection { args, value } => {
                write!(f, "d_0{args:?} = {value}, not the first projection")
            }
            ChainViolation::LastNotProjection { args, value } => {
                write!(
                    f,
                    "last term at {args:?} = {value}, not the third projection"
                )
            }
            ChainViolation::Link { index, x, y } => write!(
                f,
                "d_{index}({x},{y},{y}) differs from d_{}({x},{x},{y})",
                index + 1
            ),
            ChainViolation::Escapes { index, args, value } => {
                write!(f, "d_{index}{args:?} = {value} leaves B")
            }
        }
    }
}

/// Exhaustively checks the chain identities and `d_i(B,A,B) ⊆ B`.
pub fn verify_chain(a: &Algebra, b: &Subset, chain: &JonssonChain) -> Result<(), ChainViolation> {
    if chain.is_empty() {
        return Err(ChainViolation::Empty);
    }
    let n = a.size();
    let mut tables = Vec::with_capacity(chain.len());
    for (index, t) in chain.terms.iter().enumerate() {
        let table = t
            .table(a, 3, usize::MAX)
            .map_err(|e| ChainViolation::BadTerm {
                index,
                reason: e.to_string(),
            })?;
        tables.push(table);
    }
    let at =
        |t: &[Elem], x: Elem, y: Elem, z: Elem| t[(x as usize * n + y as usize) * n + z as usize];
    let all = 0..n as Elem;
    let first = &tables[0];
    let last = &tables[tables.len() - 1];
    for x in all.clone() {
        for y in all.clone() {
            for z in all.clone() {
                let v = at(first, x, y, z);
                if v != x {
                    return Err(ChainViolation::FirstNotProjection {
                        args: [x, y, z],
                        value: v,
                    });
                }
            }
        }
    }
    for x in all.clone() {
        for y in all.clone() {
            for z in all.clone() {
                let v = at(last, x, y, z);
                if v != z {
                    return Err(ChainViolation::LastNotProjection {
                        args: [x, y, z],
                        value: v,
                    });
                }
            }
        }
    }
    for (index, w) in tables.windows(2).enumerate() {
        for x in all.clone() {
            for y in all.clone() {
                if at(&w[0], x, y, y) != at(&w[1], x, x, y) {
                    return Err(ChainViolation::Link { index, x, y });
                }
            }
        }
    }
    let in_b = b.mask(n);
    for (index, t) in tables.iter().enumerate() {
        for &b1 in b.members() {
            for y in all.clone() {
                for &b2 in b.members() {
                    let v = at(t, b1, y, b2);
                    if !in_b[v as usize] {
                        return Err(ChainViolation::Escapes {
                            index,
                            args: [b1, y, b2],
                            value: v,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CdVerdict {
    /// Least `x` for which `{x}` does not Jónsson absorb, with its failure.
    pub failure: Option<(Elem, JonssonFailure)>,
}

impl CdVerdict {
    pub fn holds(&self) -> bool {
        self.failure.is_none()
    }
}

/// Congruence distributivity of the variety: every singleton Jónsson absorbs.
pub fn decide_cd(a: &Algebra, budget: &Budget) -> Result<CdVerdict> {
    a.require_idempotent()?;
    for x in 0..a.size() as Elem {
        let v = decide_jonsson(a, &Subset::singleton(x), budget)?;
        if let Some(f) = v.failure {
            return Ok(CdVerdict {
                failure: Some((x, f)),
            });
        }
    }
    Ok(CdVerdict { failure: None })
}

/// Oracle: generates the whole ternary clone as a subpower of `A^(n^3)` and
/// looks for a path `x → … → z` through term operations `d` with
/// `d(B,A,B) ⊆ B`, linking `d → d'` when `d(x,y,y) = d'(x,x,y)`. Returns the
/// shortest chain found.
pub fn brute_chain_search(
    a: &Algebra,
    b: &Subset,
    budget: &Budget,
) -> Result<Option<JonssonChain>> {
    let n = a.size();
    let k = checked_pow(n, 3)
        .ok_or_else(|| Error::cap("ternary clone coordinates", u128::MAX, budget.cap))?;
    let gens: Vec<Vec<Elem>> = (0..3)
        .map(|p| {
            (0..k)
                .map(|code| {
                    let digits = [code / (n * n), (code / n) % n, code % n];
                    digits[p] as Elem
                })
                .collect()
        })
        .collect();
    let clone = generate_subpower(a, k, &gens, true, budget.limits())?;
    let idx = |x: usize, y: usize, z: usize| (x * n + y) * n + z;
    let in_b = b.mask(n);
    let qualifies = |d: &[Elem]| {
        b.iter().all(|b1| {
            (0..n).all(|y| {
                b.iter()
                    .all(|b2| in_b[d[idx(b1 as usize, y, b2 as usize)] as usize])
            })
        })
    };
    let key = |d: &[Elem], left: bool| -> Vec<Elem> {
        let mut out = Vec::with_capacity(n * n);
        for x in 0..n {
            for y in 0..n {
                out.push(if left {
                    d[idx(x, y, y)]
                } else {
                    d[idx(x, x, y)]
                });
            }
        }
        out
    };
    let good: Vec<usize> = (0..clone.len())
        .filter(|&i| qualifies(clone.member(i)))
        .collect();
    let mut by_entry: HashMap<Vec<Elem>, Vec<usize>> = HashMap::new();
    for &i in &good {
        by_entry
            .entry(key(clone.member(i), false))
            .or_default()
            .push(i);
    }
    let start = clone.generator_indices()[0];
    let goal = clone.generator_indices()[2];
    let mut prev: HashMap<usize, usize> = HashMap::new();
    prev.insert(start, start);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if u == goal {
            let mut path = vec![u];
            let mut cur = u;
            while cur != start {
                cur = prev[&cur];
                path.push(cur);
            }
            path.reverse();
            let terms = path
                .into_iter()
                .map(|i| clone.term_at(a, i))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Some(JonssonChain::new(terms)));
        }
        if let Some(next) = by_entry.get(&key(clone.member(u), true)) {
            for &v in next {
                if let std::collections::hash_map::Entry::Vacant(e) = prev.entry(v) {
                    e.insert(u);
                    queue.push_back(v);
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::fixtures::*;

    fn budget() -> Budget {
        Budget::with_cap(1 << 16)
    }

    fn maj_term() -> Term {
        Term::apply("maj", vec![Term::Var(0), Term::Var(1), Term::Var(2)])
    }

    fn implication_chain() -> JonssonChain {
        let x = || Term::Var(0);
        let y = || Term::Var(1);
        let z = || Term::Var(2);
        JonssonChain::new(vec![
            x(),
            Term::apply("d1", vec![x(), y(), z()]),
            Term::apply("d2", vec![x(), y(), z()]),
            z(),
        ])
    }

    #[test]
    fn decisions_on_fixtures() {
        let b0 = Subset::singleton(0);
        assert!(decide_jonsson(&majority(), &b0, &budget()).unwrap().holds());
        assert!(decide_jonsson(&implication(), &b0, &budget())
            .unwrap()
            .holds());
        let v = decide_jonsson(&z2_maltsev(), &b0, &budget()).unwrap();
        // d=0 puts the edge 0→1 among the generators; with d=1 every member
        // has even weight, so 0-coloured edges are loops
        assert_eq!(
            v.failure,
            Some(JonssonFailure {
                a: 0,
                c: 1,
                d: 1,
                b1: 0,
                b2: 0
            })
        );
        assert_eq!(v.tuples_checked, 4);
    }

    #[test]
    fn decision_preconditions() {
        let bad = Algebra::from_tables(2, vec![("imp", 2, vec![1, 1, 0, 1])]).unwrap();
        assert!(matches!(
            decide_jonsson(&bad, &Subset::singleton(0), &budget()),
            Err(Error::NotIdempotent { .. })
        ));
        assert_eq!(
            decide_jonsson(&majority(), &Subset::default(), &budget()),
            Err(Error::EmptyB)
        );
        let f = Algebra::from_tables(3, vec![("f", 2, vec![0, 2, 2, 2, 1, 2, 2, 2, 2])]).unwrap();
        assert!(matches!(
            decide_jonsson(&f, &Subset::new([0, 1], 3).unwrap(), &budget()),
            Err(Error::NotASubuniverse { .. })
        ));
    }

    #[test]
    fn chain_from_majority() {
        let a = majority();
        let ch = chain_from_term(&a, &maj_term(), 3).unwrap();
        let shown: Vec<String> = ch.terms.iter().map(|t| t.to_string()).collect();
        assert_eq!(
            shown,
            [
                "x0",
                "maj(x1,x0,x0)",
                "maj(x2,x1,x0)",
                "maj(x2,x2,x1)",
                "x2"
            ]
        );
        assert_eq!(verify_chain(&a, &Subset::singleton(0), &ch), Ok(()));
        assert_eq!(verify_chain(&a, &Subset::singleton(1), &ch), Ok(()));
    }

    #[test]
    fn chain_from_binary_and_unary_terms() {
        let a = Algebra::from_tables(2, vec![("and", 2, vec![0, 0, 0, 1])]).unwrap();
        let t = Term::apply("and", vec![Term::Var(0), Term::Var(1)]);
        let ch = chain_from_term(&a, &t, 2).unwrap();
        assert_eq!(ch.len(), 4);
        assert_eq!(verify_chain(&a, &Subset::singleton(0), &ch), Ok(()));
        assert_eq!(
            chain_from_term(&a, &Term::Var(0), 1),
            Err(Error::DegenerateArity)
        );
        assert_eq!(
            chain_from_term(&trivial(), &Term::Var(0), 1).unwrap(),
            JonssonChain::trivial()
        );
    }

    #[test]
    fn implication_chain_verifies() {
        let a = implication();
        assert_eq!(
            verify_chain(&a, &Subset::singleton(0), &implication_chain()),
            Ok(())
        );
        // d1 = x ∨ (y ∧ z) and d2 = z ∨ (x ∧ y) also keep {1}
        assert_eq!(
            verify_chain(&a, &Subset::singleton(1), &implication_chain()),
            Ok(())
        );
        assert_eq!(
            verify_chain(&a, &Subset::singleton(0), &JonssonChain::trivial()),
            Err(ChainViolation::Link {
                index: 0,
                x: 0,
                y: 1
            })
        );
    }

    #[test]
    fn verify_chain_reports_escape() {
        let a = z2_maltsev();
        let m = Term::apply("m", vec![Term::Var(0), Term::Var(1), Term::Var(2)]);
        let ch = JonssonChain::new(vec![Term::Var(0), m, Term::Var(2)]);
        // x+y+z: d_0(x,y,y)=x vs m(x,x,y)=y fails first
        assert_eq!(
            verify_chain(&a, &Subset::singleton(0), &ch),
            Err(ChainViolation::Link {
                index: 0,
                x: 0,
                y: 1
            })
        );
    }

    #[test]
    fn merging() {
        let a = majority();
        let ch = chain_from_term(&a, &maj_term(), 3).unwrap();
        let b0 = Subset::singleton(0);
        let b1 = Subset::singleton(1);
        let merged = merge_chains(&a, &b0, &b1, &ch, &ch).unwrap();
        assert_eq!(merged.len(), 25);
        assert_eq!(verify_chain(&a, &b0, &merged), Ok(()));
        assert_eq!(verify_chain(&a, &b1, &merged), Ok(()));
        assert!(matches!(
            merge_chains(&a, &b0, &b1, &JonssonChain::trivial(), &ch),
            Err(Error::ChainInvalid(_))
        ));
        let one = trivial();
        let t = JonssonChain::trivial();
        let m = merge_chains(&one, &Subset::singleton(0), &Subset::singleton(0), &t, &t).unwrap();
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn cd() {
        assert!(decide_cd(&majority(), &budget()).unwrap().holds());
        assert_eq!(
            decide_cd(&z2_maltsev(), &budget())
                .unwrap()
                .failure
                .map(|f| f.0),
            Some(0)
        );
        assert!(decide_cd(&trivial(), &budget()).unwrap().holds());
    }

    #[test]
    fn brute_oracle_on_fixtures() {
        let b0 = Subset::singleton(0);
        for a in [majority(), implication()] {
            let ch = brute_chain_search(&a, &b0, &budget())
                .unwrap()
                .expect("chain");
            assert_eq!(verify_chain(&a, &b0, &ch), Ok(()));
        }
        assert_eq!(
            brute_chain_search(&z2_maltsev(), &b0, &budget()).unwrap(),
            None
        );
        let ch = brute_chain_search(&trivial(), &b0, &budget())
            .unwrap()
            .unwrap();
        assert_eq!(verify_chain(&trivial(), &b0, &ch), Ok(()));
    }

    #[test]
    fn diagonal_of_square_never_jonsson_absorbs() {
        for a in [majority(), implication(), z2_maltsev(), z3_maltsev()] {
            let sq = a.power(2, 1 << 16).unwrap();
            let n = a.size() as Elem;
            let diag = Subset::new((0..n).map(|x| x * n + x), sq.size()).unwrap();
            assert!(!decide_jonsson(&sq, &diag, &budget()).unwrap().holds());
        }
    }

    #[test]
    fn thread_count_does_not_change_the_witness() {
        let a = z3_maltsev();
        let one = decide_jonsson(&a, &Subset::singleton(1), &budget()).unwrap();
        let four = decide_jonsson(&a, &Subset::singleton(1), &budget().threads(4)).unwrap();
        assert_eq!(one, four);
    }
}
