//! 3-SAT to singleton-blocker reduction, with a brute-force SAT oracle.
//!
//! The algebra has universe `0, 1, w1, …, wn` (encoded `0, 1, 2, …, n+1`),
//! a binary `s_i` per variable, a ternary `t_j` per clause, and two ternary
//! operations `d1, d2` forming a directed Jónsson chain. It has a
//! `{0}`-blocker iff the formula is satisfiable.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::algebra::{Algebra, Elem, Subset};
use crate::blocker::{find_blocker_fpt, is_blocker, BlockerPair};
use crate::error::{Error, Result};
use crate::jonsson::{verify_chain, JonssonChain};
use crate::term::Term;
use crate::Budget;

/// Largest variable count [`brute_sat`] will enumerate.
pub const MAX_BRUTE_VARS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Lit {
    /// 1-based.
    pub var: usize,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: usize) -> Lit {
        Lit {
            var,
            positive: true,
        }
    }

    pub fn neg(var: usize) -> Lit {
        Lit {
            var,
            positive: false,
        }
    }

    pub fn holds(&self, assignment: &[bool]) -> bool {
        assignment[self.var - 1] == self.positive
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.var)
        } else {
            write!(f, "-{}", self.var)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cnf {
    var_count: usize,
    clauses: Vec<[Lit; 3]>,
    /// Indices of clauses that were padded up to three literals.
    padded: Vec<usize>,
}

impl Cnf {
    /// Builds a formula, padding short clauses by repeating their last
    /// literal.
    pub fn new(var_count: usize, clauses: Vec<Vec<Lit>>) -> Result<Cnf> {
        if clauses.is_empty() {
            return Err(Error::EmptyFormula);
        }
        let mut out = Vec::with_capacity(clauses.len());
        let mut padded = Vec::new();
        for (i, c) in clauses.into_iter().enumerate() {
            let Some(&last) = c.last() else {
                return Err(Error::ParseError {
                    line: 0,
                    msg: format!("clause {} is empty", i + 1),
                });
            };
            if c.len() > 3 {
                return Err(Error::ClauseTooLong {
                    clause: i + 1,
                    len: c.len(),
                });
            }
            if let Some(l) = c.iter().find(|l| l.var == 0 || l.var > var_count) {
                return Err(Error::ParseError {
                    line: 0,
                    msg: format!("literal {l} outside 1..={var_count}"),
                });
            }
            if c.len() < 3 {
                padded.push(i);
            }
            let get = |j: usize| c.get(j).copied().unwrap_or(last);
            out.push([get(0), get(1), get(2)]);
        }
        Ok(Cnf {
            var_count,
            clauses: out,
            padded,
        })
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn clauses(&self) -> &[[Lit; 3]] {
        &self.clauses
    }

    pub fn padded_clauses(&self) -> &[usize] {
        &self.padded
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|l| l.holds(assignment)))
    }
}

/// DIMACS output, always with three literals per clause.
impl fmt::Display for Cnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p cnf {} {}", self.var_count, self.clauses.len())?;
        for [a, b, c] in &self.clauses {
            writeln!(f, "{a} {b} {c} 0")?;
        }
        Ok(())
    }
}

impl FromStr for Cnf {
    type Err = Error;

    fn from_str(s: &str) -> Result<Cnf> {
        parse_dimacs(s)
    }
}

/// Parses DIMACS CNF. `c` lines are comments and a line starting with `%`
/// ends the input. A final clause missing its terminating `0` is accepted.
pub fn parse_dimacs(text: &str) -> Result<Cnf> {
    let mut vars: Option<usize> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        let err = |msg: String| Error::ParseError { line: line_no, msg };
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if vars.is_some() {
                return Err(err("duplicate problem line".into()));
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            match fields.as_slice() {
                ["cnf", v, c] => {
                    let v = v
                        .parse()
                        .map_err(|_| err(format!("bad variable count {v:?}")))?;
                    c.parse::<usize>()
                        .map_err(|_| err(format!("bad clause count {c:?}")))?;
                    vars = Some(v);
                }
                _ => return Err(err("expected `p cnf VARS CLAUSES`".into())),
            }
            continue;
        }
        let Some(v) = vars else {
            return Err(err("clause before problem line".into()));
        };
        for tok in line.split_whitespace() {
            let x: i64 = tok
                .parse()
                .map_err(|_| err(format!("bad literal {tok:?}")))?;
            if x == 0 {
                if current.is_empty() {
                    return Err(err("empty clause".into()));
                }
                if current.len() > 3 {
                    return Err(Error::ClauseTooLong {
                        clause: clauses.len() + 1,
                        len: current.len(),
                    });
                }
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            let var = x.unsigned_abs() as usize;
            if var > v {
                return Err(err(format!("literal {x} outside 1..={v}")));
            }
            current.push(Lit {
                var,
                positive: x > 0,
            });
        }
    }
    let Some(v) = vars else {
        return Err(Error::ParseError {
            line: 0,
            msg: "missing problem line".into(),
        });
    };
    if !current.is_empty() {
        clauses.push(current);
    }
    Cnf::new(v, clauses)
}

/// First satisfying assignment in counting order (variable 1 least
/// significant, `false` before `true`), if any.
pub fn brute_sat(f: &Cnf) -> Result<Option<Vec<bool>>> {
    let n = f.var_count;
    if n > MAX_BRUTE_VARS {
        return Err(Error::TooManyVariables(n));
    }
    let mut e = vec![false; n];
    for mask in 0u32..1 << n {
        for (i, v) in e.iter_mut().enumerate() {
            *v = mask >> i & 1 == 1;
        }
        if f.satisfied_by(&e) {
            return Ok(Some(e));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionAlgebra {
    pub algebra: Algebra,
    /// Element names `0, 1, w1, …, wn`.
    pub names: Vec<String>,
    /// The designated singleton, always `0`.
    pub b: Elem,
}

fn w(k: usize) -> Elem {
    (k + 1) as Elem
}

fn clause_op(n: usize, clause: &[Lit; 3], name: &str) -> Result<Vec<Elem>> {
    let size = n + 2;
    let mut table = Vec::with_capacity(size * size * size);
    for x in 0..size as Elem {
        for y in 0..size as Elem {
            for z in 0..size as Elem {
                let args = [x, y, z];
                let mut value: Option<Elem> = None;
                let mut set = |v: Elem| -> Result<()> {
                    match value {
                        Some(old) if old != v => Err(Error::RuleConflict {
                            op: name.to_string(),
                            args,
                        }),
                        _ => {
                            value = Some(v);
                            Ok(())
                        }
                    }
                };
                if x == y && y == z {
                    set(x)?;
                }
                for (p, lit) in clause.iter().enumerate() {
                    let wk = w(lit.var);
                    let others_all = |v: Elem| (0..3).filter(|&q| q != p).all(|q| args[q] == v);
                    if lit.positive && args[p] == 1 && others_all(wk) {
                        set(wk)?;
                    }
                    if !lit.positive && args[p] == wk && others_all(0) {
                        set(0)?;
                    }
                }
                table.push(value.unwrap_or(1));
            }
        }
    }
    Ok(table)
}

/// Builds the reduction algebra. Operations are `s1..sn`, `t1..tm`, `d1`,
/// `d2` in that order.
pub fn build_reduction_algebra(f: &Cnf) -> Result<ReductionAlgebra> {
    let n = f.var_count;
    let size = n + 2;
    let mut ops: Vec<(String, usize, Vec<Elem>)> = Vec::new();
    for i in 1..=n {
        let mut t = Vec::with_capacity(size * size);
        for x in 0..size as Elem {
            for y in 0..size as Elem {
                t.push(match (x, y) {
                    _ if x == y => x,
                    (0, 1) => w(i),
                    _ => 1,
                });
            }
        }
        ops.push((format!("s{i}"), 2, t));
    }
    for (j, c) in f.clauses.iter().enumerate() {
        let name = format!("t{}", j + 1);
        let t = clause_op(n, c, &name)?;
        ops.push((name, 3, t));
    }
    let ternary = |g: &dyn Fn(Elem, Elem, Elem) -> Elem| {
        let mut t = Vec::with_capacity(size.pow(3));
        for x in 0..size as Elem {
            for y in 0..size as Elem {
                for z in 0..size as Elem {
                    t.push(g(x, y, z));
                }
            }
        }
        t
    };
    ops.push((
        "d1".into(),
        3,
        ternary(&|x, y, z| if x == y || x == z { x } else { 1 }),
    ));
    ops.push((
        "d2".into(),
        3,
        ternary(&|x, y, z| if y == z || x == z { z } else { 1 }),
    ));
    let ops = ops
        .into_iter()
        .map(|(name, arity, t)| (name, arity, t.into_iter().map(u64::from).collect()))
        .collect();
    let algebra = Algebra::from_tables(size, ops)?;
    let mut names = vec!["0".to_string(), "1".to_string()];
    names.extend((1..=n).map(|i| format!("w{i}")));
    Ok(ReductionAlgebra {
        algebra,
        names,
        b: 0,
    })
}

/// The chain `x, d1, d2, z`.
pub fn d_chain() -> JonssonChain {
    let xyz = || vec![Term::Var(0), Term::Var(1), Term::Var(2)];
    JonssonChain::new(vec![
        Term::Var(0),
        Term::apply("d1", xyz()),
        Term::apply("d2", xyz()),
        Term::Var(2),
    ])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReductionReport {
    pub var_count: usize,
    pub clause_count: usize,
    pub padded_clauses: Vec<usize>,
    pub idempotent: bool,
    /// `x = d1(x,x,y)`, `d1(x,y,y) = d2(x,x,y)`, `d2(x,y,y) = y` and
    /// `d1(x,y,x) = d2(x,y,x) = x` for all `x, y`.
    pub chain_identities: bool,
    /// The chain verifies as a Jónsson chain for `{0}`.
    pub chain_absorbs: bool,
    pub satisfiable: bool,
    pub blocker: Option<BlockerPair>,
    pub fpt_iterations: u64,
    /// Assignment read off the blocker's `C`.
    pub decoded: Option<Vec<bool>>,
    /// The blocker is valid, `1 ∈ C`, `0 ∉ C`, and the decoded assignment
    /// satisfies the formula. Vacuously true without a blocker.
    pub decoded_ok: bool,
}

impl ReductionReport {
    pub fn passed(&self) -> bool {
        self.idempotent
            && self.chain_identities
            && self.chain_absorbs
            && self.satisfiable == self.blocker.is_some()
            && self.decoded_ok
    }
}

fn chain_identities(a: &Algebra) -> bool {
    let (d1, d2) = (a.op("d1").unwrap(), a.op("d2").unwrap());
    let n = a.size() as Elem;
    (0..n).all(|x| {
        (0..n).all(|y| {
            d1.apply(a.size(), &[x, x, y]) == x
                && d1.apply(a.size(), &[x, y, y]) == d2.apply(a.size(), &[x, x, y])
                && d2.apply(a.size(), &[x, y, y]) == y
                && d1.apply(a.size(), &[x, y, x]) == x
                && d2.apply(a.size(), &[x, y, x]) == x
        })
    })
}

/// Builds the reduction algebra and checks it end to end against
/// [`brute_sat`].
pub fn verify_reduction(f: &Cnf, budget: &Budget) -> Result<ReductionReport> {
    let satisfiable = brute_sat(f)?.is_some();
    let r = build_reduction_algebra(f)?;
    let a = &r.algebra;
    let b = Subset::singleton(r.b);
    let idempotent = a.is_idempotent();
    let chain_identities = chain_identities(a);
    let chain_absorbs = verify_chain(a, &b, &d_chain()).is_ok();
    let fpt = find_blocker_fpt(a, &b, budget)?;
    let mut decoded = None;
    let decoded_ok = match &fpt.blocker {
        None => true,
        Some(pair) => {
            let e: Vec<bool> = (1..=f.var_count).map(|k| pair.c.contains(w(k))).collect();
            let ok = is_blocker(a, &b, &pair.c, &pair.d).is_ok()
                && pair.c.contains(1)
                && !pair.c.contains(0)
                && f.satisfied_by(&e);
            decoded = Some(e);
            ok
        }
    };
    Ok(ReductionReport {
        var_count: f.var_count,
        clause_count: f.clauses.len(),
        padded_clauses: f.padded.clone(),
        idempotent,
        chain_identities,
        chain_absorbs,
        satisfiable,
        blocker: fpt.blocker,
        fpt_iterations: fpt.iterations,
        decoded,
        decoded_ok,
    })
}
