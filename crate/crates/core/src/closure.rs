//! Subpower generation: the least subset of `A^k` containing a set of
//! generator tuples and closed under the basic operations applied
//! coordinatewise.
//!
//! The closure is a semi-naive worklist. Members are kept in insertion
//! order; when member `i` is dequeued, every operation (in declaration
//! order) is applied to exactly those argument tuples over members `0..=i`
//! that mention `i`, in lexicographic order, so each argument tuple is tried
//! once over the whole run. Membership is a dense
//! bitset indexed by the radix code of the tuple when `n^k` is small and a
//! hash set otherwise.

use std::collections::{HashMap, HashSet};

use crate::algebra::{checked_pow, Algebra, Elem};
use crate::bits::BitSet;
use crate::error::{Error, Result};
use crate::term::Term;

/// Radix code of a tuple in `A^k`, first coordinate most significant.
pub type TupleCode = u128;

/// Largest `n^k` for which membership uses a dense bitset.
const DENSE_LIMIT: usize = 1 << 26;

pub fn encode_tuple(n: usize, tuple: &[Elem]) -> Option<TupleCode> {
    tuple.iter().try_fold(0u128, |acc, &x| {
        acc.checked_mul(n as u128)
            .and_then(|v| v.checked_add(x as u128))
    })
}

pub fn decode_tuple(n: usize, k: usize, mut code: TupleCode) -> Vec<Elem> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = (code % n as u128) as Elem;
        code /= n as u128;
    }
    out
}

/// How a member entered the closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Derivation {
    Generator(usize),
    Apply { op: usize, parents: Vec<u32> },
}

#[derive(Clone, Debug)]
enum Membership {
    Dense(BitSet),
    Coded(HashSet<u128>),
    Wide(HashSet<Box<[Elem]>>),
}

impl Membership {
    fn new(n: usize, k: usize) -> Self {
        match checked_pow(n, k) {
            Some(space) if space <= DENSE_LIMIT => Membership::Dense(BitSet::new(space)),
            _ if (n as f64).log2() * k as f64 <= 127.0 => Membership::Coded(HashSet::new()),
            _ => Membership::Wide(HashSet::new()),
        }
    }

    /// Inserts `t`, returning `true` if it was new.
    #[inline]
    fn insert(&mut self, n: usize, t: &[Elem]) -> bool {
        match self {
            Membership::Dense(bits) => {
                let code = t.iter().fold(0usize, |acc, &x| acc * n + x as usize);
                bits.insert(code)
            }
            Membership::Coded(set) => set.insert(encode_tuple(n, t).expect("fits")),
            Membership::Wide(set) => {
                if set.contains(t) {
                    false
                } else {
                    set.insert(t.into())
                }
            }
        }
    }

    fn contains(&self, n: usize, t: &[Elem]) -> bool {
        match self {
            Membership::Dense(bits) => {
                bits.contains(t.iter().fold(0usize, |acc, &x| acc * n + x as usize))
            }
            Membership::Coded(set) => encode_tuple(n, t).is_some_and(|c| set.contains(&c)),
            Membership::Wide(set) => set.contains(t),
        }
    }
}

/// A subset of `A^k`, usually a closed subpower, with members in insertion
/// order.
#[derive(Clone, Debug)]
pub struct SubpowerSet {
    n: usize,
    k: usize,
    len: usize,
    data: Vec<Elem>,
    membership: Membership,
    /// Member index of each generator, in generator order.
    generators: Vec<usize>,
    provenance: Option<Vec<Derivation>>,
}

impl SubpowerSet {
    fn empty(n: usize, k: usize, provenance: bool) -> Self {
        SubpowerSet {
            n,
            k,
            len: 0,
            data: Vec::new(),
            membership: Membership::new(n, k),
            generators: Vec::new(),
            provenance: provenance.then(Vec::new),
        }
    }

    /// A plain set of tuples; no closure is taken.
    pub fn from_tuples(n: usize, k: usize, tuples: &[Vec<Elem>]) -> Result<Self> {
        let mut s = SubpowerSet::empty(n, k, false);
        for t in tuples {
            check_tuple(n, k, t)?;
            if s.membership.insert(n, t) {
                s.data.extend_from_slice(t);
                s.len += 1;
            }
        }
        Ok(s)
    }

    pub fn universe_size(&self) -> usize {
        self.n
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn member(&self, i: usize) -> &[Elem] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn members(&self) -> impl Iterator<Item = &[Elem]> + '_ {
        (0..self.len).map(|i| self.member(i))
    }

    pub fn contains(&self, t: &[Elem]) -> bool {
        t.len() == self.k
            && t.iter().all(|&x| (x as usize) < self.n)
            && self.membership.contains(self.n, t)
    }

    pub fn code(&self, i: usize) -> Option<TupleCode> {
        encode_tuple(self.n, self.member(i))
    }

    pub fn generator_indices(&self) -> &[usize] {
        &self.generators
    }

    pub fn has_provenance(&self) -> bool {
        self.provenance.is_some()
    }

    pub fn derivation(&self, i: usize) -> Option<&Derivation> {
        self.provenance.as_ref().map(|p| &p[i])
    }

    pub fn index_of(&self, t: &[Elem]) -> Option<usize> {
        if !self.contains(t) {
            return None;
        }
        (0..self.len).find(|&i| self.member(i) == t)
    }

    /// A term over the generators (variable `i` is generator `i`) whose
    /// coordinatewise evaluation on the generators is `target`.
    pub fn extract_term(&self, a: &Algebra, target: &[Elem]) -> Result<Term> {
        let idx = self.index_of(target).ok_or(Error::NotAMember)?;
        self.term_at(a, idx)
    }

    pub fn term_at(&self, a: &Algebra, idx: usize) -> Result<Term> {
        let prov = self.provenance.as_ref().ok_or(Error::NoProvenance)?;
        let mut memo: HashMap<usize, Term> = HashMap::new();
        Ok(build_term(a, prov, idx, &mut memo))
    }

    /// Whether one more pass of every operation over all member tuples adds
    /// nothing.
    pub fn is_closed(&self, a: &Algebra) -> bool {
        let k = self.k;
        let mut out = vec![0; k];
        let mut args = Vec::new();
        for op in a.ops() {
            let r = op.arity();
            if self.len == 0 {
                continue;
            }
            let mut pos = vec![0usize; r];
            args.resize(r, 0);
            loop {
                for (j, slot) in out.iter_mut().enumerate() {
                    for (x, &p) in args.iter_mut().zip(&pos) {
                        *x = self.data[p * k + j];
                    }
                    *slot = op.apply(self.n, &args);
                }
                if !self.membership.contains(self.n, &out) {
                    return false;
                }
                if !crate::algebra::advance(&mut pos, self.len) {
                    break;
                }
            }
        }
        true
    }

    fn push(&mut self, t: &[Elem], how: impl FnOnce() -> Derivation) -> bool {
        if !self.membership.insert(self.n, t) {
            return false;
        }
        self.data.extend_from_slice(t);
        self.len += 1;
        if let Some(p) = &mut self.provenance {
            p.push(how());
        }
        true
    }
}

fn build_term(
    a: &Algebra,
    prov: &[Derivation],
    idx: usize,
    memo: &mut HashMap<usize, Term>,
) -> Term {
    if let Some(t) = memo.get(&idx) {
        return t.clone();
    }
    let t = match &prov[idx] {
        Derivation::Generator(g) => Term::Var(*g),
        Derivation::Apply { op, parents } => Term::apply(
            a.ops()[*op].name(),
            parents
                .iter()
                .map(|&p| build_term(a, prov, p as usize, memo))
                .collect(),
        ),
    };
    memo.insert(idx, t.clone());
    t
}

fn check_tuple(n: usize, k: usize, t: &[Elem]) -> Result<()> {
    if t.len() != k {
        return Err(Error::Format {
            line: 0,
            msg: format!("tuple of length {} in a subpower of arity {k}", t.len()),
        });
    }
    match t.iter().find(|&&x| x as usize >= n) {
        Some(&bad) => Err(Error::ElementOutOfRange(bad as u64)),
        None => Ok(()),
    }
}

/// Bounds on a single closure run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Stored members.
    pub members: usize,
    /// Operation applications.
    pub work: u64,
}

impl From<usize> for Limits {
    fn from(members: usize) -> Self {
        Limits {
            members,
            work: u64::MAX,
        }
    }
}

/// `⟨gens⟩ ≤ A^k`. With `provenance`, each non-generator member records the
/// first application that produced it.
pub fn generate_subpower(
    a: &Algebra,
    k: usize,
    gens: &[Vec<Elem>],
    provenance: bool,
    limits: impl Into<Limits>,
) -> Result<SubpowerSet> {
    generate_subpower_until(a, k, gens, provenance, limits, |_| false).map(|(s, _)| s)
}

/// Like [`generate_subpower`], but stops as soon as `stop` accepts a newly
/// inserted member (generators included) and returns that member's index.
/// A stopped run is not closed.
pub fn generate_subpower_until<F>(
    a: &Algebra,
    k: usize,
    gens: &[Vec<Elem>],
    provenance: bool,
    limits: impl Into<Limits>,
    mut stop: F,
) -> Result<(SubpowerSet, Option<usize>)>
where
    F: FnMut(&[Elem]) -> bool,
{
    let Limits {
        members: cap,
        work: max_work,
    } = limits.into();
    let mut work = 0u64;
    let n = a.size();
    let mut s = SubpowerSet::empty(n, k, provenance);
    for (g, t) in gens.iter().enumerate() {
        check_tuple(n, k, t)?;
        if s.push(t, || Derivation::Generator(g)) {
            s.generators.push(s.len - 1);
            if s.len > cap {
                return Err(Error::cap("subpower closure", s.len as u128, cap));
            }
            if stop(t) {
                let at = s.len - 1;
                return Ok((s, Some(at)));
            }
        } else {
            let first = s.index_of(t).expect("present");
            s.generators.push(first);
        }
    }

    let ops = a.ops();
    let max_r = ops.iter().map(|o| o.arity()).max().unwrap_or(0);
    let strides: Vec<Vec<usize>> = ops
        .iter()
        .map(|o| {
            (0..o.arity())
                .map(|l| n.pow((o.arity() - 1 - l) as u32))
                .collect()
        })
        .collect();
    // partial[l*k + j] = Σ_{l' < l} member(pos[l'])[j] · stride[l']
    let mut partial = vec![0usize; (max_r + 1) * k.max(1)];
    let mut pos = vec![0usize; max_r];
    let mut out = vec![0 as Elem; k];

    let mut i = 0;
    while i < s.len {
        for (oi, op) in ops.iter().enumerate() {
            let r = op.arity();
            let table = op.table();
            let stride = &strides[oi];
            // Argument tuples over members 0..=i that mention i, in
            // lexicographic order: the prefix runs over [0, i]^(r-1) and the
            // last position is forced to i when the prefix lacks it.
            let m = r - 1;
            pos[..r].iter_mut().for_each(|x| *x = 0);
            let mut from = 0;
            loop {
                for l in from..m {
                    let (done, rest) = partial.split_at_mut((l + 1) * k);
                    let prev = &done[l * k..];
                    let row = &s.data[pos[l] * k..(pos[l] + 1) * k];
                    for j in 0..k {
                        rest[j] = prev[j] + row[j] as usize * stride[l];
                    }
                }
                let lo = if pos[..m].contains(&i) { 0 } else { i };
                work += (i + 1 - lo) as u64;
                if work > max_work {
                    return Err(Error::cap(
                        "subpower closure work",
                        work as u128,
                        max_work as usize,
                    ));
                }
                for last in lo..=i {
                    let base = &partial[m * k..(m + 1) * k];
                    let row = &s.data[last * k..(last + 1) * k];
                    for j in 0..k {
                        out[j] = table[base[j] + row[j] as usize];
                    }
                    pos[m] = last;
                    let how = || Derivation::Apply {
                        op: oi,
                        parents: pos[..r].iter().map(|&x| x as u32).collect(),
                    };
                    if s.push(&out, how) {
                        if s.len > cap {
                            return Err(Error::cap("subpower closure", s.len as u128, cap));
                        }
                        if stop(&out) {
                            let at = s.len - 1;
                            return Ok((s, Some(at)));
                        }
                    }
                }
                let mut advanced = None;
                for l in (0..m).rev() {
                    if pos[l] < i {
                        pos[l] += 1;
                        advanced = Some(l);
                        break;
                    }
                    pos[l] = 0;
                }
                match advanced {
                    Some(l) => from = l,
                    None => break,
                }
            }
        }
        i += 1;
    }
    Ok((s, None))
}
