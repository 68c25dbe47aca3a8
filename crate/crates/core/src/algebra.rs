//! Finite algebras given by flat operation tables.
//!
//! The universe is `{0, …, n-1}`. An operation of arity `r` stores `n^r`
//! entries; the entry for `(x_0, …, x_{r-1})` sits at `Σ x_i·n^(r-1-i)`, so the
//! last argument varies fastest and table order is lexicographic tuple order.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// An element of a finite universe.
pub type Elem = u32;

/// An operation given as a function of its arguments.
pub type OpFn = dyn Fn(&[Elem]) -> Elem;

/// An operation table as read from input, before validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawOperation {
    pub name: String,
    pub arity: usize,
    pub table: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawAlgebra {
    pub size: usize,
    pub ops: Vec<RawOperation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    name: String,
    arity: usize,
    table: Vec<Elem>,
}

impl Operation {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table(&self) -> &[Elem] {
        &self.table
    }

    #[inline]
    pub fn apply(&self, n: usize, args: &[Elem]) -> Elem {
        debug_assert_eq!(args.len(), self.arity);
        let idx = args.iter().fold(0usize, |acc, &x| acc * n + x as usize);
        self.table[idx]
    }
}

#[derive(Clone, Debug)]
pub struct Algebra {
    size: usize,
    ops: Vec<Operation>,
    by_name: HashMap<String, usize>,
}

impl PartialEq for Algebra {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size && self.ops == other.ops
    }
}

impl Eq for Algebra {}

pub(crate) fn valid_op_name(name: &str) -> bool {
    !name.is_empty()
        && !name
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '(' | ')' | ',' | '#'))
}

/// Validates a raw description. Violations are reported in declaration
/// order: names first, then table length, then entries.
pub fn validate_algebra(raw: RawAlgebra) -> Result<Algebra> {
    let n = raw.size;
    if n == 0 {
        return Err(Error::EmptyUniverse);
    }
    let mut by_name = HashMap::with_capacity(raw.ops.len());
    let mut ops = Vec::with_capacity(raw.ops.len());
    for (i, op) in raw.ops.into_iter().enumerate() {
        if !valid_op_name(&op.name) {
            return Err(Error::InvalidOpName(op.name));
        }
        if by_name.insert(op.name.clone(), i).is_some() {
            return Err(Error::DuplicateOpName(op.name));
        }
        if op.arity == 0 {
            return Err(Error::ZeroArity(op.name));
        }
        let expected = checked_pow(n, op.arity).ok_or_else(|| Error::MalformedTable {
            op: op.name.clone(),
            expected: usize::MAX,
            found: op.table.len(),
        })?;
        if op.table.len() != expected {
            return Err(Error::MalformedTable {
                op: op.name,
                expected,
                found: op.table.len(),
            });
        }
        let mut table = Vec::with_capacity(expected);
        for (index, &value) in op.table.iter().enumerate() {
            if value >= n as u64 {
                return Err(Error::ValueOutOfRange {
                    op: op.name,
                    index,
                    value,
                });
            }
            table.push(value as Elem);
        }
        ops.push(Operation {
            name: op.name,
            arity: op.arity,
            table,
        });
    }
    Ok(Algebra {
        size: n,
        ops,
        by_name,
    })
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    u32::try_from(exp).ok().and_then(|e| base.checked_pow(e))
}

/// Radix code of a tuple, first coordinate most significant.
pub(crate) fn encode(n: usize, digits: &[Elem]) -> usize {
    digits.iter().fold(0usize, |acc, &x| acc * n + x as usize)
}

pub(crate) fn decode_into(n: usize, mut code: usize, out: &mut [Elem]) {
    for slot in out.iter_mut().rev() {
        *slot = (code % n) as Elem;
        code /= n;
    }
}

/// First operation application that fails idempotency.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdempotencyViolation {
    pub op: String,
    pub x: Elem,
}

/// First application that leaves a candidate subuniverse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubuniverseViolation {
    pub op: String,
    pub args: Vec<Elem>,
    pub value: Elem,
}

impl Algebra {
    /// Convenience constructor from `(name, arity, table)` triples.
    pub fn from_tables<S: Into<String>>(
        size: usize,
        ops: Vec<(S, usize, Vec<u64>)>,
    ) -> Result<Self> {
        validate_algebra(RawAlgebra {
            size,
            ops: ops
                .into_iter()
                .map(|(name, arity, table)| RawOperation {
                    name: name.into(),
                    arity,
                    table,
                })
                .collect(),
        })
    }

    /// Builds an algebra whose operations are given by closures.
    pub fn from_fns<S: Into<String>>(size: usize, ops: Vec<(S, usize, &OpFn)>) -> Result<Self> {
        let mut raw = Vec::with_capacity(ops.len());
        for (name, arity, f) in ops {
            let len = checked_pow(size, arity)
                .ok_or_else(|| Error::cap("operation table", u128::MAX, usize::MAX))?;
            let mut args = vec![0; arity];
            let table = (0..len)
                .map(|code| {
                    decode_into(size, code, &mut args);
                    f(&args) as u64
                })
                .collect();
            raw.push((name, arity, table));
        }
        Algebra::from_tables(size, raw)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn op_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn op(&self, name: &str) -> Option<&Operation> {
        self.op_index(name).map(|i| &self.ops[i])
    }

    /// `|A|` plus the total number of table entries.
    pub fn input_size(&self) -> usize {
        self.size + self.ops.iter().map(|o| o.table.len()).sum::<usize>()
    }

    pub fn arities(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops.iter().map(|o| o.arity)
    }

    pub fn check_idempotent(&self) -> Result<(), IdempotencyViolation> {
        for op in &self.ops {
            for x in 0..self.size as Elem {
                let args = vec![x; op.arity];
                if op.apply(self.size, &args) != x {
                    return Err(IdempotencyViolation {
                        op: op.name.clone(),
                        x,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_idempotent(&self) -> bool {
        self.check_idempotent().is_ok()
    }

    pub fn require_idempotent(&self) -> Result<()> {
        self.check_idempotent()
            .map_err(|v| Error::NotIdempotent { op: v.op, x: v.x })
    }

    /// Checks closure of `s` under every basic operation. The first
    /// violation is reported with ops in declaration order and argument
    /// tuples in lexicographic order over the members of `s`.
    pub fn is_subuniverse(&self, s: &Subset) -> Result<(), SubuniverseViolation> {
        let members = s.members();
        if members.is_empty() {
            return Ok(());
        }
        let mask = s.mask(self.size);
        for op in &self.ops {
            let mut pos = vec![0usize; op.arity];
            let mut args = vec![members[0]; op.arity];
            loop {
                let value = op.apply(self.size, &args);
                if !mask[value as usize] {
                    return Err(SubuniverseViolation {
                        op: op.name.clone(),
                        args,
                        value,
                    });
                }
                if !advance(&mut pos, members.len()) {
                    break;
                }
                for (a, &p) in args.iter_mut().zip(&pos) {
                    *a = members[p];
                }
            }
        }
        Ok(())
    }

    /// Validates `b` as the subuniverse argument of a decision procedure.
    pub fn require_subuniverse(&self, b: &Subset) -> Result<()> {
        if b.is_empty() {
            return Err(Error::EmptyB);
        }
        self.is_subuniverse(b).map_err(|v| Error::NotASubuniverse {
            op: v.op,
            args: v.args,
            value: v.value,
        })
    }

    /// The subuniverse generated by `seed`.
    pub fn generate_subuniverse(&self, seed: &Subset) -> Subset {
        let n = self.size;
        let mut inside = vec![false; n];
        let mut order: Vec<Elem> = Vec::with_capacity(n);
        for &x in seed.members() {
            if !inside[x as usize] {
                inside[x as usize] = true;
                order.push(x);
            }
        }
        // Semi-naive: tuples whose largest position index is `i` are tried
        // once, when element `i` is processed.
        let mut i = 0;
        let mut args = Vec::new();
        while i < order.len() {
            for op in &self.ops {
                let r = op.arity;
                let mut pos = vec![0usize; r];
                args.resize(r, 0);
                loop {
                    if pos.contains(&i) {
                        for (a, &p) in args.iter_mut().zip(&pos) {
                            *a = order[p];
                        }
                        let v = op.apply(n, &args);
                        if !inside[v as usize] {
                            inside[v as usize] = true;
                            order.push(v);
                        }
                    }
                    if !advance(&mut pos, i + 1) {
                        break;
                    }
                }
            }
            i += 1;
        }
        Subset::from_sorted_unchecked({
            order.sort_unstable();
            order
        })
    }

    /// `A^k` with coordinatewise operations. Element `e` of the power
    /// encodes the tuple with digits `e = Σ x_j·n^(k-1-j)`.
    pub fn power(&self, k: usize, cap: usize) -> Result<Algebra> {
        let n = self.size;
        let size = checked_pow(n, k).filter(|&s| s <= cap).ok_or_else(|| {
            Error::cap("power universe", (n as u128).saturating_pow(k as u32), cap)
        })?;
        let mut ops = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let r = op.arity;
            let len = checked_pow(size, r)
                .filter(|&l| l <= cap.saturating_mul(64))
                .ok_or_else(|| {
                    Error::cap("power table", (size as u128).saturating_pow(r as u32), cap)
                })?;
            let mut table = Vec::with_capacity(len);
            let mut codes = vec![0usize; r];
            let mut digits = vec![vec![0 as Elem; k]; r];
            let mut args = vec![0 as Elem; r];
            let mut out = vec![0 as Elem; k];
            for idx in 0..len {
                decode_usize(size, idx, &mut codes);
                for (d, &c) in digits.iter_mut().zip(&codes) {
                    decode_into(n, c, d);
                }
                for (j, slot) in out.iter_mut().enumerate() {
                    for (a, d) in args.iter_mut().zip(&digits) {
                        *a = d[j];
                    }
                    *slot = op.apply(n, &args);
                }
                table.push(encode(n, &out) as Elem);
            }
            ops.push(Operation {
                name: op.name.clone(),
                arity: r,
                table,
            });
        }
        Ok(Algebra {
            size,
            ops,
            by_name: self.by_name.clone(),
        })
    }

    /// The universe with its elements relabelled by `perm` (`x ↦ perm[x]`).
    pub fn relabel(&self, perm: &[Elem]) -> Algebra {
        let n = self.size;
        let mut inv = vec![0 as Elem; n];
        for (x, &p) in perm.iter().enumerate() {
            inv[p as usize] = x as Elem;
        }
        let ops = self
            .ops
            .iter()
            .map(|op| {
                let mut args = vec![0; op.arity];
                let mut pre = vec![0; op.arity];
                let table = (0..op.table.len())
                    .map(|idx| {
                        decode_into(n, idx, &mut args);
                        for (p, &a) in pre.iter_mut().zip(&args) {
                            *p = inv[a as usize];
                        }
                        perm[op.apply(n, &pre) as usize]
                    })
                    .collect();
                Operation {
                    name: op.name.clone(),
                    arity: op.arity,
                    table,
                }
            })
            .collect();
        Algebra {
            size: n,
            ops,
            by_name: self.by_name.clone(),
        }
    }
}

fn decode_usize(base: usize, mut code: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = code % base;
        code /= base;
    }
}

/// Odometer step over `[0, base)^len`, last position fastest.
pub(crate) fn advance(pos: &mut [usize], base: usize) -> bool {
    for p in pos.iter_mut().rev() {
        *p += 1;
        if *p < base {
            return true;
        }
        *p = 0;
    }
    false
}

/// A sorted, duplicate-free set of elements.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Subset {
    members: Vec<Elem>,
}

impl Subset {
    /// Sorts and deduplicates `members`, rejecting anything `>= n`.
    pub fn new(members: impl IntoIterator<Item = Elem>, n: usize) -> Result<Self> {
        let mut members: Vec<Elem> = members.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&x| x as usize >= n) {
            return Err(Error::ElementOutOfRange(bad as u64));
        }
        members.sort_unstable();
        members.dedup();
        Ok(Subset { members })
    }

    pub(crate) fn from_sorted_unchecked(members: Vec<Elem>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Subset { members }
    }

    pub fn full(n: usize) -> Self {
        Subset {
            members: (0..n as Elem).collect(),
        }
    }

    pub fn singleton(x: Elem) -> Self {
        Subset { members: vec![x] }
    }

    pub fn from_mask(mask: u64) -> Self {
        Subset {
            members: (0..64).filter(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn members(&self) -> &[Elem] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: Elem) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.members.iter().all(|&x| other.contains(x))
    }

    pub fn meets(&self, other: &Subset) -> bool {
        self.members.iter().any(|&x| other.contains(x))
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &x in &self.members {
            m[x as usize] = true;
        }
        m
    }

    /// Elements of `{0, …, n-1}` not in the set.
    pub fn complement(&self, n: usize) -> Subset {
        Subset {
            members: (0..n as Elem).filter(|&x| !self.contains(x)).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Elem> + '_ {
        self.members.iter().copied()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn majority() -> Algebra {
        Algebra::from_tables(2, vec![("maj", 3, vec![0, 0, 0, 1, 0, 1, 1, 1])]).unwrap()
    }

    pub fn z2_maltsev() -> Algebra {
        Algebra::from_fns(2, vec![("m", 3, &|a: &[Elem]| (a[0] + a[1] + a[2]) % 2)]).unwrap()
    }

    pub fn z3_maltsev() -> Algebra {
        Algebra::from_fns(
            3,
            vec![("m", 3, &|a: &[Elem]| (a[0] + 3 - a[1] + a[2]) % 3)],
        )
        .unwrap()
    }

    /// `d1 = (y→(z→x))→x` and `d2 = (x→(y→z))→z` on `{0,1}`.
    pub fn implication() -> Algebra {
        Algebra::from_tables(
            2,
            vec![
                ("d1", 3, vec![0, 0, 0, 1, 1, 1, 1, 1]),
                ("d2", 3, vec![0, 1, 0, 1, 0, 1, 1, 1]),
            ],
        )
        .unwrap()
    }

    pub fn trivial() -> Algebra {
        Algebra::from_tables(1, vec![("f", 2, vec![0])]).unwrap()
    }
}
