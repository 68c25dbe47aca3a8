use std::fs;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use absorber_core::absorption::{
    decide_absorption, decide_absorption_with_term, decide_nu, find_absorption_term,
    find_b_essential, is_b_essential, nu_term, verify_absorption_term, Decision, Verdict, Witness,
};
use absorber_core::blocker::{find_blocker_fpt, find_blocker_naive, is_blocker, BlockerPair};
use absorber_core::closure::SubpowerSet;
use absorber_core::format::AlgebraFile;
use absorber_core::jonsson::{brute_chain_search, decide_cd, decide_jonsson, JonssonFailure};
use absorber_core::reduction::{build_reduction_algebra, parse_dimacs, verify_reduction};
use absorber_core::{Budget, Subset};

use crate::report::{Report, EXIT_CAP};
use crate::{Cli, Command, OracleKind};

pub fn run(cli: &Cli) -> Report {
    let report = Report::new(echo(cli));
    let mut ok = Report::new(echo(cli));
    match dispatch(cli, &mut ok) {
        Ok(()) => ok,
        Err(e) => report.fail(e),
    }
}

/// The command as echoed in reports. Thread count is left out so reports
/// compare equal across `--threads`.
fn echo(cli: &Cli) -> Value {
    let c = &cli.common;
    let mut v = json!({ "cap": c.cap, "work": c.work });
    let (name, extra) = match &cli.command {
        Command::Check => ("check", json!({})),
        Command::Jonsson => ("jonsson", json!({})),
        Command::Blocker => ("blocker", json!({})),
        Command::Absorb { max_arity } => ("absorb", json!({ "max_arity": max_arity })),
        Command::Term { arity } => ("term", json!({ "arity": arity })),
        Command::Essential { arity } => ("essential", json!({ "arity": arity })),
        Command::Nu { max_arity } => ("nu", json!({ "max_arity": max_arity })),
        Command::Cd => ("cd", json!({})),
        Command::Reduce3sat { cnf, output } => (
            "reduce-3sat",
            json!({ "cnf": cnf.display().to_string(), "output": output.display().to_string() }),
        ),
        Command::VerifyReduction { cnf } => (
            "verify-reduction",
            json!({ "cnf": cnf.display().to_string() }),
        ),
        Command::Oracle { which, arity } => (
            "oracle",
            json!({ "oracle": format!("{which:?}").to_lowercase(), "arity": arity }),
        ),
    };
    v["name"] = json!(name);
    if let Some(p) = &c.algebra {
        v["algebra"] = json!(p.display().to_string());
    }
    if let Some(s) = &c.subset {
        v["subset"] = json!(s);
    }
    for (k, x) in extra.as_object().unwrap() {
        if !x.is_null() {
            v[k] = x.clone();
        }
    }
    v
}

fn budget(cli: &Cli) -> Budget {
    Budget::with_cap(cli.common.cap)
        .work(cli.common.work)
        .threads(cli.common.threads)
}

fn load(cli: &Cli) -> Result<AlgebraFile> {
    let Some(path) = &cli.common.algebra else {
        bail!("--algebra is required");
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(AlgebraFile::parse(&text)?)
}

fn subset(cli: &Cli, file: &AlgebraFile) -> Result<Subset> {
    let Some(csv) = &cli.common.subset else {
        bail!("--subset is required");
    };
    let b = file.parse_subset(csv)?;
    file.algebra.require_idempotent()?;
    file.algebra.require_subuniverse(&b)?;
    Ok(b)
}

fn failure_line(f: &AlgebraFile, j: &JonssonFailure) -> String {
    let n = |e| f.name_of(e);
    format!(
        "no B-coloured path from {} to {} in the subpower generated by ({},{},{}), ({},{},{}), ({},{},{})",
        n(j.a), n(j.c), n(j.b1), n(j.a), n(j.a), n(j.b2), n(j.c), n(j.c), n(j.d), n(j.a), n(j.c)
    )
}

fn blocker_line(f: &AlgebraFile, p: &BlockerPair) -> String {
    format!(
        "blocker C = {}, D = {}",
        f.format_subset(&p.c),
        f.format_subset(&p.d)
    )
}

fn essential_json(s: &SubpowerSet) -> Value {
    let gens: Vec<Vec<u32>> = s
        .generator_indices()
        .iter()
        .map(|&i| s.member(i).to_vec())
        .collect();
    let mut members: Vec<Vec<u32>> = s.members().map(<[u32]>::to_vec).collect();
    members.sort();
    json!({ "generators": gens, "members": members })
}

fn dispatch(cli: &Cli, r: &mut Report) -> Result<()> {
    let budget = budget(cli);
    match &cli.command {
        Command::Check => {
            let f = load(cli)?;
            let a = &f.algebra;
            r.counter("size", a.size());
            r.counter("operations", a.ops().len());
            if let Some(csv) = &cli.common.subset {
                let b = f.parse_subset(csv)?;
                a.require_subuniverse(&b)?;
                r.line(format!("{} is a subuniverse", f.format_subset(&b)));
            }
            match a.check_idempotent() {
                Ok(()) => r.decide(true, "pass", "fail"),
                Err(v) => {
                    r.decide(false, "pass", "fail");
                    r.line(format!("{}({x},…,{x}) ≠ {x}", v.op, x = f.name_of(v.x)));
                    r.witness = json!({ "kind": "not_idempotent", "op": v.op, "x": v.x });
                }
            }
        }
        Command::Jonsson => {
            let f = load(cli)?;
            let b = subset(cli, &f)?;
            let v = decide_jonsson(&f.algebra, &b, &budget)?;
            r.decide(v.holds(), "yes", "no");
            r.counter("jonsson_tuples", v.tuples_checked);
            if let Some(j) = &v.failure {
                r.line(failure_line(&f, j));
                r.witness = json!({ "kind": "jonsson_failure", "a": j.a, "c": j.c, "d": j.d, "b1": j.b1, "b2": j.b2 });
            }
        }
        Command::Blocker => {
            let f = load(cli)?;
            let b = subset(cli, &f)?;
            let out = find_blocker_fpt(&f.algebra, &b, &budget)?;
            r.decide(out.blocker.is_some(), "found", "none");
            r.counter("fpt_iterations", out.iterations);
            if let Some(p) = &out.blocker {
                r.line(blocker_line(&f, p));
                r.witness = json!({ "kind": "blocker", "c": p.c, "d": p.d });
            }
        }
        Command::Absorb { max_arity } => {
            let f = load(cli)?;
            let b = subset(cli, &f)?;
            let v = match max_arity {
                Some(k) => decide_absorption_with_term(&f.algebra, &b, *k, &budget)?,
                None => decide_absorption(&f.algebra, &b, &budget)?,
            };
            verdict_into(&f, &v, r);
        }
        Command::Term { arity } => {
            let f = load(cli)?;
            let b = subset(cli, &f)?;
            let s = find_absorption_term(&f.algebra, &b, *arity, &budget)?;
            r.decide(s.term.is_some(), "found", "none");
            r.counter("closure_size", s.closure_size);
            if let Some(t) = &s.term {
                if let Err(v) = verify_absorption_term(&f.algebra, &b, t, *arity) {
                    bail!("extracted term failed verification: {v}");
                }
                r.line(format!("term {t}"));
                r.witness = json!({ "kind": "term", "term": t, "arity": arity });
            }
        }
        Command::Essential { arity } => {
            let f = load(cli)?;
            let b = subset(cli, &f)?;
            essential(&f, &b, *arity, false, &budget, r)?;
        }
        Command::Nu { max_arity } => {
            let f = load(cli)?;
            let v = decide_nu(&f.algebra, &budget)?;
            match v.decision {
                Decision::Capped => {
                    r.verdict = "capped".into();
                    r.exit = EXIT_CAP;
                }
                d => r.decide(d == Decision::Absorbs, "yes", "no"),
            }
            if let Some(x) = v.failing {
                r.line(format!("{{{}}} does not absorb", f.name_of(x)));
                let inner = v.verdict.as_ref().map(|v| witness_json(v.witness.as_ref()));
                r.witness = json!({ "kind": "failing_singleton", "x": x, "witness": inner });
                if let Some(inner) = &v.verdict {
                    r.caps.extend(inner.caps.iter().cloned());
                    if let Some(w) = &inner.witness {
                        r.line(witness_line(&f, w));
                    }
                }
            } else if let Some(k) = max_arity {
                let t = nu_term(&f.algebra, *k, &budget)?;
                r.caps.extend(t.caps);
                if let Some((term, arity)) = t.term {
                    r.line(format!("near-unanimity term of arity {arity}: {term}"));
                    r.witness = json!({ "kind": "term", "term": term, "arity": arity });
                }
            }
        }
        Command::Cd => {
            let f = load(cli)?;
            let v = decide_cd(&f.algebra, &budget)?;
            r.decide(v.holds(), "yes", "no");
            if let Some((x, j)) = &v.failure {
                r.line(format!("{{{}}}: {}", f.name_of(*x), failure_line(&f, j)));
                r.witness = json!({
                    "kind": "jonsson_failure", "x": x,
                    "a": j.a, "c": j.c, "d": j.d, "b1": j.b1, "b2": j.b2,
                });
            }
        }
        Command::Reduce3sat { cnf, output } => {
            let text =
                fs::read_to_string(cnf).with_context(|| format!("reading {}", cnf.display()))?;
            let formula = parse_dimacs(&text)?;
            let red = build_reduction_algebra(&formula)?;
            let file = AlgebraFile::with_names(red.algebra, red.names)?;
            let mut body = format!(
                "# blocker instance for {} ({} variables, {} clauses); query the subset 0\n",
                cnf.display(),
                formula.var_count(),
                formula.clauses().len()
            );
            if !formula.padded_clauses().is_empty() {
                let list: Vec<String> = formula
                    .padded_clauses()
                    .iter()
                    .map(|i| (i + 1).to_string())
                    .collect();
                body.push_str(&format!(
                    "# clauses padded to three literals: {}\n",
                    list.join(" ")
                ));
            }
            body.push_str(&file.serialize());
            fs::write(output, body).with_context(|| format!("writing {}", output.display()))?;
            r.decide(true, "written", "");
            r.counter("size", file.algebra.size());
            r.counter("variables", formula.var_count());
            r.counter("clauses", formula.clauses().len());
            r.counter("padded_clauses", formula.padded_clauses().to_vec());
            r.line(format!("wrote {}", output.display()));
        }
        Command::VerifyReduction { cnf } => {
            let text =
                fs::read_to_string(cnf).with_context(|| format!("reading {}", cnf.display()))?;
            let formula = parse_dimacs(&text)?;
            let rep = verify_reduction(&formula, &budget)?;
            r.decide(rep.passed(), "pass", "fail");
            r.line(format!("satisfiable: {}", rep.satisfiable));
            r.line(format!("blocker found: {}", rep.blocker.is_some()));
            r.line(format!("idempotent: {}", rep.idempotent));
            r.line(format!(
                "d-chain identities: {}",
                rep.chain_identities && rep.chain_absorbs
            ));
            if let Some(e) = &rep.decoded {
                let lits: Vec<String> = e
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| format!("{}{}", if v { "" } else { "-" }, i + 1))
                    .collect();
                r.line(format!("decoded assignment: {}", lits.join(" ")));
            }
            r.witness = serde_json::to_value(&rep)?;
            r.counter("fpt_iterations", rep.fpt_iterations);
        }
        Command::Oracle { which, arity } => {
            let f = load(cli)?;
            let b = subset(cli, &f)?;
            match which {
                OracleKind::Blocker => {
                    let p = find_blocker_naive(&f.algebra, &b, &budget)?;
                    r.decide(p.is_some(), "found", "none");
                    if let Some(p) = &p {
                        debug_assert!(is_blocker(&f.algebra, &b, &p.c, &p.d).is_ok());
                        r.line(blocker_line(&f, p));
                        r.witness = json!({ "kind": "blocker", "c": p.c, "d": p.d });
                    }
                }
                OracleKind::Chain => {
                    let c = brute_chain_search(&f.algebra, &b, &budget)?;
                    r.decide(c.is_some(), "yes", "no");
                    if let Some(c) = &c {
                        r.line(format!("chain {c}"));
                        r.witness = json!({ "kind": "chain", "terms": c.terms });
                        r.counter("chain_length", c.len());
                    }
                }
                OracleKind::Essential => {
                    let Some(k) = arity else {
                        bail!("oracle essential needs --arity");
                    };
                    essential(&f, &b, *k, true, &budget, r)?;
                }
            }
        }
    }
    Ok(())
}

fn essential(
    f: &AlgebraFile,
    b: &Subset,
    k: usize,
    oracle: bool,
    budget: &Budget,
    r: &mut Report,
) -> Result<()> {
    let s = find_b_essential(&f.algebra, b, k, budget)?;
    r.decide(s.is_some(), "found", "none");
    if let Some(s) = &s {
        if oracle {
            if let Err(v) = is_b_essential(&f.algebra, b, s) {
                bail!("subpower failed the essential check: {v:?}");
            }
        }
        r.counter("closure_size", s.len());
        r.line(format!("essential subpower with {} tuples", s.len()));
        let mut w = essential_json(s);
        w["kind"] = json!("essential");
        r.witness = w;
    }
    Ok(())
}

fn witness_json(w: Option<&Witness>) -> Value {
    match w {
        None => Value::Null,
        Some(Witness::Term { term, arity }) => {
            json!({ "kind": "term", "term": term, "arity": arity })
        }
        Some(Witness::JonssonFailure(j)) => {
            json!({ "kind": "jonsson_failure", "a": j.a, "c": j.c, "d": j.d, "b1": j.b1, "b2": j.b2 })
        }
        Some(Witness::Blocker(p)) => json!({ "kind": "blocker", "c": p.c, "d": p.d }),
    }
}

fn witness_line(f: &AlgebraFile, w: &Witness) -> String {
    match w {
        Witness::Term { term, arity } => format!("term {term} (arity {arity})"),
        Witness::JonssonFailure(j) => failure_line(f, j),
        Witness::Blocker(p) => blocker_line(f, p),
    }
}

fn verdict_into(f: &AlgebraFile, v: &Verdict, r: &mut Report) {
    match v.decision {
        Decision::Capped => {
            r.verdict = "capped".into();
            r.exit = EXIT_CAP;
        }
        d => r.decide(d == Decision::Absorbs, "absorbs", "not_absorbs"),
    }
    r.witness = witness_json(v.witness.as_ref());
    if let Some(w) = &v.witness {
        r.line(witness_line(f, w));
    }
    r.caps.extend(v.caps.iter().cloned());
    let c = &v.counters;
    if let Some(x) = c.jonsson_tuples {
        r.counter("jonsson_tuples", x);
    }
    if let Some(x) = c.fpt_iterations {
        r.counter("fpt_iterations", x);
    }
    if let Some(x) = c.term_arity_tried {
        r.counter("term_arity_tried", x);
    }
    if let Some(x) = c.term_closure_size {
        r.counter("term_closure_size", x);
    }
}
