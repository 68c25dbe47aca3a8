//! Deciding absorption, and extracting or refuting absorption terms.
//!
//! `B` absorbs an idempotent algebra exactly when it Jónsson absorbs it and
//! there is no `B`-blocker; [`decide_absorption`] runs the two tests in that
//! order. Independently, a `k`-ary absorption term exists iff there is no
//! `k`-ary `B`-essential subpower: [`find_absorption_term`] searches the
//! `k`-ary clone restricted to the "one exceptional argument" tuples, and
//! [`find_b_essential`] enumerates the generating matrices of essential
//! subpowers.

use std::fmt;

use serde::Serialize;

use crate::algebra::{Algebra, Elem, Subset};
use crate::blocker::{find_blocker_fpt, BlockerPair};
use crate::closure::{generate_subpower_until, SubpowerSet};
use crate::error::{Error, Result};
use crate::jonsson::{decide_jonsson, JonssonFailure};
use crate::par;
use crate::term::{star_compose, Term};
use crate::Budget;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Absorbs,
    NotAbsorbs,
    Capped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Term { term: Term, arity: usize },
    JonssonFailure(JonssonFailure),
    Blocker(BlockerPair),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub jonsson_tuples: Option<u64>,
    pub fpt_iterations: Option<u64>,
    pub term_arity_tried: Option<usize>,
    pub term_closure_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub witness: Option<Witness>,
    /// Resource caps hit along the way, in the order they occurred.
    pub caps: Vec<String>,
    pub counters: Counters,
}

impl Verdict {
    fn new(decision: Decision, witness: Option<Witness>, counters: Counters) -> Self {
        Verdict {
            decision,
            witness,
            caps: Vec::new(),
            counters,
        }
    }

    fn capped(err: Error, counters: Counters) -> Result<Self> {
        if !err.is_cap() {
            return Err(err);
        }
        Ok(Verdict {
            decision: Decision::Capped,
            witness: None,
            caps: vec![err.to_string()],
            counters,
        })
    }

    pub fn absorbs(&self) -> bool {
        self.decision == Decision::Absorbs
    }
}

/// Decides `B ⊴ A`: Jónsson absorption first, then the blocker search.
/// `B = A` absorbs trivially, witnessed by the projection `x0`.
pub fn decide_absorption(a: &Algebra, b: &Subset, budget: &Budget) -> Result<Verdict> {
    a.require_idempotent()?;
    a.require_subuniverse(b)?;
    let mut counters = Counters::default();
    if b.len() == a.size() {
        let w = Witness::Term {
            term: Term::Var(0),
            arity: 1,
        };
        return Ok(Verdict::new(Decision::Absorbs, Some(w), counters));
    }
    let j = match decide_jonsson(a, b, budget) {
        Ok(j) => j,
        Err(e) => return Verdict::capped(e, counters),
    };
    counters.jonsson_tuples = Some(j.tuples_checked);
    if let Some(f) = j.failure {
        return Ok(Verdict::new(
            Decision::NotAbsorbs,
            Some(Witness::JonssonFailure(f)),
            counters,
        ));
    }
    let fpt = match find_blocker_fpt(a, b, budget) {
        Ok(f) => f,
        Err(e) => return Verdict::capped(e, counters),
    };
    counters.fpt_iterations = Some(fpt.iterations);
    Ok(match fpt.blocker {
        Some(pair) => Verdict::new(Decision::NotAbsorbs, Some(Witness::Blocker(pair)), counters),
        None => Verdict::new(Decision::Absorbs, None, counters),
    })
}

/// [`decide_absorption`], then, for a positive answer without a witness,
/// the least-arity term search up to `max_arity`. A positive decision with
/// no term inside the cap is reported as such; the decision is not changed.
pub fn decide_absorption_with_term(
    a: &Algebra,
    b: &Subset,
    max_arity: usize,
    budget: &Budget,
) -> Result<Verdict> {
    let mut v = decide_absorption(a, b, budget)?;
    if v.absorbs() && v.witness.is_none() {
        let search = least_absorption_term(a, b, max_arity, budget)?;
        v.counters.term_arity_tried = Some(search.tried);
        v.counters.term_closure_size = search.closure_size;
        if let Some(cap) = search.cap {
            v.caps.push(cap);
        }
        v.witness = search
            .found
            .map(|(arity, term)| Witness::Term { term, arity });
    }
    Ok(v)
}

/// The `k`-tuples with exactly one coordinate outside `B`, ordered by the
/// position of that coordinate and then lexicographically.
pub fn exceptional_index_set(a: &Algebra, b: &Subset, k: usize) -> Vec<Vec<Elem>> {
    let outside = b.complement(a.size());
    let mut out = Vec::new();
    for p in 0..k {
        let radix = |l: usize| {
            if l == p {
                outside.members()
            } else {
                b.members()
            }
        };
        if (0..k).any(|l| radix(l).is_empty()) {
            continue;
        }
        let mut pos = vec![0usize; k];
        loop {
            out.push((0..k).map(|l| radix(l)[pos[l]]).collect());
            let mut l = k;
            loop {
                if l == 0 {
                    break;
                }
                l -= 1;
                pos[l] += 1;
                if pos[l] < radix(l).len() {
                    break;
                }
                pos[l] = 0;
                if l == 0 {
                    l = usize::MAX;
                    break;
                }
            }
            if l == usize::MAX {
                break;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermSearch {
    pub term: Option<Term>,
    /// Members generated before the search stopped.
    pub closure_size: usize,
}

/// Searches for a `k`-ary absorption term.
///
/// Over the index set `I` of [`exceptional_index_set`], the `k` projection
/// tuples `(e_j)_{e ∈ I}` generate the `k`-ary term operations restricted to
/// `I`. A member inside `B^I` is an absorption term; a closed subpower that
/// avoids `B^I` certifies that none of arity `k` exists.
pub fn find_absorption_term(
    a: &Algebra,
    b: &Subset,
    k: usize,
    budget: &Budget,
) -> Result<TermSearch> {
    a.require_idempotent()?;
    a.require_subuniverse(b)?;
    if k == 0 {
        return Ok(TermSearch {
            term: None,
            closure_size: 0,
        });
    }
    let width = (k as u128) * (b.len() as u128).pow(k as u32 - 1) * (a.size() - b.len()) as u128;
    if width > budget.cap as u128 {
        return Err(Error::cap("absorption index set", width, budget.cap));
    }
    let index = exceptional_index_set(a, b, k);
    let gens: Vec<Vec<Elem>> = (0..k)
        .map(|j| index.iter().map(|e| e[j]).collect())
        .collect();
    let in_b = b.mask(a.size());
    let (s, hit) = generate_subpower_until(a, index.len(), &gens, true, budget.limits(), |m| {
        m.iter().all(|&x| in_b[x as usize])
    })?;
    let term = hit.map(|i| s.term_at(a, i)).transpose()?;
    Ok(TermSearch {
        term,
        closure_size: s.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AritySearch {
    /// Least arity with a term, and the term.
    pub found: Option<(usize, Term)>,
    /// Largest arity examined.
    pub tried: usize,
    pub closure_size: Option<usize>,
    /// Set when the search stopped at a resource cap.
    pub cap: Option<String>,
}

/// Tries `k = 1, 2, …, max_arity` and returns the least arity with a term.
pub fn least_absorption_term(
    a: &Algebra,
    b: &Subset,
    max_arity: usize,
    budget: &Budget,
) -> Result<AritySearch> {
    let mut out = AritySearch {
        found: None,
        tried: 0,
        closure_size: None,
        cap: None,
    };
    for k in 1..=max_arity {
        out.tried = k;
        match find_absorption_term(a, b, k, budget) {
            Ok(s) => {
                out.closure_size = Some(s.closure_size);
                if let Some(t) = s.term {
                    out.found = Some((k, t));
                    break;
                }
            }
            Err(e) if e.is_cap() => {
                out.cap = Some(format!("arity {k}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum AbsorptionViolation {
    BadTerm(String),
    NotIdempotent {
        x: Elem,
    },
    /// `t(args) ∉ B` with the exceptional argument at `position`.
    Escapes {
        position: usize,
        args: Vec<Elem>,
        value: Elem,
    },
}

impl fmt::Display for AbsorptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbsorptionViolation::BadTerm(e) => write!(f, "{e}"),
            AbsorptionViolation::NotIdempotent { x } => write!(f, "t({x},…,{x}) ≠ {x}"),
            AbsorptionViolation::Escapes {
                position,
                args,
                value,
            } => {
                write!(
                    f,
                    "t{args:?} = {value} leaves B (exceptional position {position})"
                )
            }
        }
    }
}

/// Checks that the `k`-ary term `t` is idempotent and lands in `B` whenever
/// all but one argument lie in `B`.
pub fn verify_absorption_term(
    a: &Algebra,
    b: &Subset,
    t: &Term,
    k: usize,
) -> Result<(), AbsorptionViolation> {
    let needed = t
        .check(a)
        .map_err(|e| AbsorptionViolation::BadTerm(e.to_string()))?;
    if needed > k || k == 0 {
        return Err(AbsorptionViolation::BadTerm(format!(
            "term uses {needed} variables, arity is {k}"
        )));
    }
    for x in 0..a.size() as Elem {
        if t.eval_unchecked(a, &vec![x; k]) != x {
            return Err(AbsorptionViolation::NotIdempotent { x });
        }
    }
    let in_b = b.mask(a.size());
    let all = Subset::full(a.size());
    let mut args = vec![0; k];
    for position in 0..k {
        let radix = |l: usize| {
            if l == position {
                all.members()
            } else {
                b.members()
            }
        };
        if b.is_empty() && k > 1 {
            continue;
        }
        let mut pos = vec![0usize; k];
        'outer: loop {
            for (l, slot) in args.iter_mut().enumerate() {
                *slot = radix(l)[pos[l]];
            }
            let value = t.eval_unchecked(a, &args);
            if !in_b[value as usize] {
                return Err(AbsorptionViolation::Escapes {
                    position,
                    args,
                    value,
                });
            }
            for l in (0..k).rev() {
                pos[l] += 1;
                if pos[l] < radix(l).len() {
                    continue 'outer;
                }
                pos[l] = 0;
            }
            break;
        }
    }
    Ok(())
}

/// Looks for a `k`-ary `B`-essential subpower generated by a matrix whose
/// `i`-th row has an element of `A∖B` at position `i` and elements of `B`
/// elsewhere. Rows are enumerated lexicographically, first row most
/// significant; the first closure avoiding `B^k` is returned.
pub fn find_b_essential(
    a: &Algebra,
    b: &Subset,
    k: usize,
    budget: &Budget,
) -> Result<Option<SubpowerSet>> {
    a.require_idempotent()?;
    a.require_subuniverse(b)?;
    let outside = b.complement(a.size());
    if k == 0 || outside.is_empty() {
        return Ok(None);
    }
    let per_row = outside.len() as u128 * (b.len() as u128).pow(k as u32 - 1);
    let total = per_row.checked_pow(k as u32).unwrap_or(u128::MAX);
    if total > budget.cap as u128 {
        return Err(Error::cap(
            "essential generator matrices",
            total,
            budget.cap,
        ));
    }
    let per_row = per_row as u64;
    let in_b = b.mask(a.size());
    let row = |i: usize, mut code: u64| -> Vec<Elem> {
        let mut out = vec![0; k];
        for l in (0..k).rev() {
            let radix = if l == i {
                outside.members()
            } else {
                b.members()
            };
            out[l] = radix[(code % radix.len() as u64) as usize];
            code /= radix.len() as u64;
        }
        out
    };
    let hit = par::find_first(total as u64, budget.threads, |idx| {
        let mut rest = idx;
        let mut rows = vec![Vec::new(); k];
        for i in (0..k).rev() {
            rows[i] = row(i, rest % per_row);
            rest /= per_row;
        }
        match generate_subpower_until(a, k, &rows, false, budget.limits(), |m| {
            m.iter().all(|&x| in_b[x as usize])
        }) {
            Ok((s, None)) => Some(Ok(s)),
            Ok((_, Some(_))) => None,
            Err(e) => Some(Err(e)),
        }
    });
    hit.map(|(_, r)| r).transpose()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum EssentialViolation {
    NotClosed,
    MeetsB {
        tuple: Vec<Elem>,
    },
    /// Deleting `coordinate` leaves no tuple inside `B^(k-1)`.
    ProjectionMissesB {
        coordinate: usize,
    },
}

/// Checks that `s` is closed, avoids `B^k`, and that every
/// coordinate-deleted projection meets `B^(k-1)`.
pub fn is_b_essential(a: &Algebra, b: &Subset, s: &SubpowerSet) -> Result<(), EssentialViolation> {
    if !s.is_closed(a) {
        return Err(EssentialViolation::NotClosed);
    }
    let in_b = b.mask(a.size());
    let inside = |x: Elem| in_b[x as usize];
    if let Some(t) = s.members().find(|t| t.iter().all(|&x| inside(x))) {
        return Err(EssentialViolation::MeetsB { tuple: t.to_vec() });
    }
    for coordinate in 0..s.arity() {
        let hit = s.members().any(|t| {
            t.iter()
                .enumerate()
                .all(|(j, &x)| j == coordinate || inside(x))
        });
        if !hit {
            return Err(EssentialViolation::ProjectionMissesB { coordinate });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NuVerdict {
    pub decision: Decision,
    /// Least `x` whose singleton does not absorb (or whose test was capped).
    pub failing: Option<Elem>,
    pub verdict: Option<Verdict>,
}

/// The algebra has a near-unanimity term iff every singleton absorbs.
pub fn decide_nu(a: &Algebra, budget: &Budget) -> Result<NuVerdict> {
    a.require_idempotent()?;
    for x in 0..a.size() as Elem {
        let v = decide_absorption(a, &Subset::singleton(x), budget)?;
        if !v.absorbs() {
            return Ok(NuVerdict {
                decision: v.decision,
                failing: Some(x),
                verdict: Some(v),
            });
        }
    }
    Ok(NuVerdict {
        decision: Decision::Absorbs,
        failing: None,
        verdict: None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NuTerm {
    pub term: Option<(Term, usize)>,
    pub caps: Vec<String>,
}

/// Builds a near-unanimity term by star-composing least-arity absorption
/// terms for every singleton, then checks `t(y,x,…,x) = … = t(x,…,x,y) = x`
/// exhaustively. Gives up (with a cap note) if some singleton has no term up
/// to `max_arity` or the composed term exceeds `budget.cap` nodes.
pub fn nu_term(a: &Algebra, max_arity: usize, budget: &Budget) -> Result<NuTerm> {
    a.require_idempotent()?;
    let mut caps = Vec::new();
    let mut acc: Option<(Term, usize)> = None;
    for x in 0..a.size() as Elem {
        let search = least_absorption_term(a, &Subset::singleton(x), max_arity, budget)?;
        let Some((k, t)) = search.found else {
            caps.push(search.cap.unwrap_or_else(|| {
                format!("no absorption term for {{{x}}} up to arity {max_arity}")
            }));
            return Ok(NuTerm { term: None, caps });
        };
        acc = Some(match acc {
            None => (t, k),
            Some((s, m)) => {
                let arity = m.saturating_mul(k);
                let composed = star_compose(&s, m, &t, k);
                if composed.node_count() > budget.cap || arity > budget.cap {
                    caps.push(format!("composed term has {} nodes", composed.node_count()));
                    return Ok(NuTerm { term: None, caps });
                }
                (composed, arity)
            }
        });
    }
    let (t, k) = acc.expect("nonempty universe");
    verify_nu(a, &t, k).map_err(|(p, x, y)| {
        Error::ChainInvalid(format!(
            "composed term fails near-unanimity at position {p} for x={x}, y={y}"
        ))
    })?;
    Ok(NuTerm {
        term: Some((t, k)),
        caps,
    })
}

/// Checks the near-unanimity identities, reporting `(position, x, y)`.
pub fn verify_nu(a: &Algebra, t: &Term, k: usize) -> std::result::Result<(), (usize, Elem, Elem)> {
    if t.check(a).map_or(true, |need| need > k) {
        return Err((0, 0, 0));
    }
    let n = a.size() as Elem;
    let mut args = vec![0; k];
    for p in 0..k {
        for x in 0..n {
            for y in 0..n {
                args.iter_mut().for_each(|v| *v = x);
                args[p] = y;
                if t.eval_unchecked(a, &args) != x {
                    return Err((p, x, y));
                }
            }
        }
    }
    Ok(())
}
