//! Plain-text algebra files.
//!
//! ```text
//! absorber-algebra v1
//! # majority on two elements
//! size 2
//! names lo hi
//! op maj 3
//! 0 0 0 1
//! 0 1 1 1
//! ```
//!
//! `names` is optional. Each `op NAME ARITY` line is followed by the
//! `size^ARITY` table entries, whitespace separated over any number of
//! lines, last argument varying fastest. Lines starting with `#` are
//! ignored.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::algebra::{validate_algebra, Algebra, Elem, RawAlgebra, RawOperation, Subset};
use crate::error::{Error, Result};

pub const HEADER: &str = "absorber-algebra v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraFile {
    pub algebra: Algebra,
    pub names: Option<Vec<String>>,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        line,
        msg: msg.into(),
    }
}

impl AlgebraFile {
    pub fn new(algebra: Algebra) -> Self {
        AlgebraFile {
            algebra,
            names: None,
        }
    }

    pub fn with_names(algebra: Algebra, names: Vec<String>) -> Result<Self> {
        check_names(algebra.size(), &names, 0)?;
        Ok(AlgebraFile {
            algebra,
            names: Some(names),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        match lines.next() {
            Some((_, HEADER)) => {}
            Some((no, other)) => {
                return Err(err(no, format!("expected `{HEADER}`, found `{other}`")))
            }
            None => return Err(err(0, "empty file")),
        }
        let (no, size_line) = lines.next().ok_or_else(|| err(0, "missing size line"))?;
        let size: usize = match size_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["size", n] => n.parse().map_err(|_| err(no, format!("bad size {n:?}")))?,
            _ => return Err(err(no, "expected `size N`")),
        };

        let mut names = None;
        let mut ops: Vec<RawOperation> = Vec::new();
        for (no, line) in lines {
            let mut words = line.split_whitespace();
            match words.next() {
                Some("names") => {
                    if names.is_some() || !ops.is_empty() {
                        return Err(err(no, "`names` must come once, before the operations"));
                    }
                    let list: Vec<String> = words.map(str::to_string).collect();
                    check_names(size, &list, no)?;
                    names = Some(list);
                }
                Some("op") => {
                    let fields: Vec<&str> = words.collect();
                    let [name, arity] = fields.as_slice() else {
                        return Err(err(no, "expected `op NAME ARITY`"));
                    };
                    let arity = arity
                        .parse()
                        .map_err(|_| err(no, format!("bad arity {arity:?}")))?;
                    ops.push(RawOperation {
                        name: name.to_string(),
                        arity,
                        table: Vec::new(),
                    });
                }
                Some(_) => {
                    let op = ops
                        .last_mut()
                        .ok_or_else(|| err(no, "table entries before any `op` line"))?;
                    for tok in line.split_whitespace() {
                        let v = tok
                            .parse()
                            .map_err(|_| err(no, format!("bad table entry {tok:?}")))?;
                        op.table.push(v);
                    }
                }
                None => unreachable!("blank lines are filtered"),
            }
        }
        let algebra = validate_algebra(RawAlgebra { size, ops })?;
        Ok(AlgebraFile { algebra, names })
    }

    pub fn serialize(&self) -> String {
        let a = &self.algebra;
        let n = a.size();
        let mut out = format!("{HEADER}\nsize {n}\n");
        if let Some(names) = &self.names {
            writeln!(out, "names {}", names.join(" ")).unwrap();
        }
        for op in a.ops() {
            writeln!(out, "op {} {}", op.name(), op.arity()).unwrap();
            for row in op.table().chunks(n) {
                let row: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn name_of(&self, e: Elem) -> String {
        match &self.names {
            Some(names) => names[e as usize].clone(),
            None => e.to_string(),
        }
    }

    /// Resolves a comma-separated list of element names or indices. Names
    /// take precedence over indices when both match.
    pub fn parse_subset(&self, csv: &str) -> Result<Subset> {
        let by_name: HashMap<&str, Elem> = self
            .names
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as Elem))
            .collect();
        let mut out = Vec::new();
        for tok in csv.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let e = match by_name.get(tok) {
                Some(&e) => e,
                None => {
                    let v: u64 = tok
                        .parse()
                        .map_err(|_| err(0, format!("unknown element {tok:?}")))?;
                    if v >= self.algebra.size() as u64 {
                        return Err(Error::ElementOutOfRange(v));
                    }
                    v as Elem
                }
            };
            out.push(e);
        }
        Subset::new(out, self.algebra.size())
    }

    pub fn format_subset(&self, s: &Subset) -> String {
        let names: Vec<String> = s.iter().map(|e| self.name_of(e)).collect();
        format!("{{{}}}", names.join(","))
    }
}

fn check_names(size: usize, names: &[String], line: usize) -> Result<()> {
    if names.len() != size {
        return Err(err(
            line,
            format!("{} names for {size} elements", names.len()),
        ));
    }
    let mut seen = std::collections::HashSet::new();
    for n in names {
        if n.is_empty() || n.contains(|c: char| c.is_whitespace() || c == ',' || c == '#') {
            return Err(err(line, format!("invalid element name {n:?}")));
        }
        if !seen.insert(n) {
            return Err(err(line, format!("duplicate element name {n:?}")));
        }
    }
    Ok(())
}
