//! Terms over the basic operation symbols of an algebra.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::algebra::{checked_pow, valid_op_name, Algebra, Elem};
use crate::error::{Error, Result};

/// A term tree. Variables are numbered from zero and print as `x0, x1, …`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(usize),
    Apply { op: String, args: Vec<Term> },
}

impl Term {
    pub fn var(i: usize) -> Term {
        Term::Var(i)
    }

    pub fn apply(op: impl Into<String>, args: Vec<Term>) -> Term {
        Term::Apply {
            op: op.into(),
            args,
        }
    }

    /// One more than the largest variable index, or 0 for a ground term.
    pub fn arity(&self) -> usize {
        match self {
            Term::Var(i) => i + 1,
            Term::Apply { args, .. } => args.iter().map(Term::arity).max().unwrap_or(0),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::Apply { args, .. } => 1 + args.iter().map(Term::node_count).sum::<usize>(),
        }
    }

    /// Replaces every `Var(i)` by `subst[i]`.
    pub fn substitute(&self, subst: &[Term]) -> Term {
        match self {
            Term::Var(i) => subst[*i].clone(),
            Term::Apply { op, args } => Term::Apply {
                op: op.clone(),
                args: args.iter().map(|t| t.substitute(subst)).collect(),
            },
        }
    }

    /// Checks every symbol against `a` and returns the term's arity.
    pub fn check(&self, a: &Algebra) -> Result<usize> {
        match self {
            Term::Var(i) => Ok(i + 1),
            Term::Apply { op, args } => {
                let o = a.op(op).ok_or_else(|| Error::UnknownOp(op.clone()))?;
                if o.arity() != args.len() {
                    return Err(Error::ArityMismatch {
                        op: op.clone(),
                        expected: o.arity(),
                        found: args.len(),
                    });
                }
                args.iter().try_fold(0, |m, t| t.check(a).map(|k| m.max(k)))
            }
        }
    }

    /// Evaluates the term at `args` by table lookups.
    pub fn eval(&self, a: &Algebra, args: &[Elem]) -> Result<Elem> {
        let needed = self.check(a)?;
        if args.len() < needed {
            return Err(Error::MissingArguments {
                needed,
                supplied: args.len(),
            });
        }
        if let Some(&bad) = args.iter().find(|&&x| x as usize >= a.size()) {
            return Err(Error::ElementOutOfRange(bad as u64));
        }
        Ok(self.eval_unchecked(a, args))
    }

    pub(crate) fn eval_unchecked(&self, a: &Algebra, args: &[Elem]) -> Elem {
        match self {
            Term::Var(i) => args[*i],
            Term::Apply { op, args: sub } => {
                let o = &a.ops()[a.op_index(op).expect("checked term")];
                let n = a.size();
                let idx = sub.iter().fold(0usize, |acc, t| {
                    acc * n + t.eval_unchecked(a, args) as usize
                });
                o.table()[idx]
            }
        }
    }

    /// The full table of the `arity`-ary term operation, in the same layout
    /// as a basic operation table.
    pub fn table(&self, a: &Algebra, arity: usize, cap: usize) -> Result<Vec<Elem>> {
        let needed = self.check(a)?;
        if needed > arity {
            return Err(Error::MissingArguments {
                needed,
                supplied: arity,
            });
        }
        let n = a.size();
        let len = checked_pow(n, arity).filter(|&l| l <= cap).ok_or_else(|| {
            Error::cap("term table", (n as u128).saturating_pow(arity as u32), cap)
        })?;
        Ok(self.columns(a, arity, len))
    }

    fn columns(&self, a: &Algebra, arity: usize, len: usize) -> Vec<Elem> {
        let n = a.size();
        match self {
            Term::Var(i) => {
                // digit i of the code, first argument most significant
                let stride = n.pow((arity - 1 - i) as u32);
                (0..len).map(|c| ((c / stride) % n) as Elem).collect()
            }
            Term::Apply { op, args } => {
                let o = &a.ops()[a.op_index(op).expect("checked term")];
                let cols: Vec<Vec<Elem>> = args.iter().map(|t| t.columns(a, arity, len)).collect();
                (0..len)
                    .map(|c| {
                        let idx = cols
                            .iter()
                            .fold(0usize, |acc, col| acc * n + col[c] as usize);
                        o.table()[idx]
                    })
                    .collect()
            }
        }
    }

    /// Whether `t(x, …, x) = x` for every `x`.
    pub fn is_idempotent_in(&self, a: &Algebra, arity: usize) -> Result<bool> {
        self.check(a)?;
        Ok((0..a.size() as Elem).all(|x| self.eval_unchecked(a, &vec![x; arity.max(1)]) == x))
    }
}

/// `s ⋆ t = s(t(x_0…x_{n-1}), t(x_n…x_{2n-1}), …)` of arity `m·n`, where `s`
/// has arity `m` and `t` arity `n`. Row `i` of the `m×n` variable grid feeds
/// the `i`-th argument of `s`.
pub fn star_compose(s: &Term, m: usize, t: &Term, n: usize) -> Term {
    let rows: Vec<Term> = (0..m)
        .map(|i| {
            let shifted: Vec<Term> = (0..n).map(|j| Term::Var(i * n + j)).collect();
            t.substitute(&shifted)
        })
        .collect();
    s.substitute(&rows)
}

/// Evaluates `t` coordinatewise: `columns[i]` is the tuple bound to `x_i`.
pub fn eval_columns(t: &Term, a: &Algebra, columns: &[&[Elem]]) -> Result<Vec<Elem>> {
    let k = columns.first().map_or(0, |c| c.len());
    let mut row = vec![0; columns.len()];
    (0..k)
        .map(|j| {
            for (r, col) in row.iter_mut().zip(columns) {
                *r = col[j];
            }
            t.eval(a, &row)
        })
        .collect()
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(i) => write!(f, "x{i}"),
            Term::Apply { op, args } => {
                write!(f, "{op}(")?;
                for (i, t) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for Term {
    type Err = Error;

    /// Parses the prefix form produced by `Display`, e.g. `maj(x0,x1,x2)`.
    fn from_str(s: &str) -> Result<Term> {
        let mut p = Parser { src: s, pos: 0 };
        let t = p.term()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("trailing input"));
        }
        Ok(t)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Format {
            line: 1,
            msg: format!("term at byte {}: {msg}", self.pos),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn term(&mut self) -> Result<Term> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| c.is_whitespace() || matches!(c, '(' | ')' | ','))
            .unwrap_or(rest.len());
        let name = &rest[..len];
        if !valid_op_name(name) {
            return Err(self.error("expected a symbol"));
        }
        self.pos += len;
        self.skip_ws();
        if self.src[self.pos..].starts_with('(') {
            self.pos += 1;
            let mut args = vec![self.term()?];
            loop {
                self.skip_ws();
                match self.src[self.pos..].chars().next() {
                    Some(',') => {
                        self.pos += 1;
                        args.push(self.term()?);
                    }
                    Some(')') => {
                        self.pos += 1;
                        return Ok(Term::apply(name, args));
                    }
                    _ => return Err(self.error("expected ',' or ')'")),
                }
            }
        }
        name.strip_prefix('x')
            .and_then(|d| d.parse::<usize>().ok())
            .map(Term::Var)
            .ok_or_else(|| self.error("expected a variable x<N> or an application"))
    }
}
