//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use absorber_core::absorption::{
    decide_absorption, find_absorption_term, find_b_essential, is_b_essential,
    verify_absorption_term, Decision,
};
use absorber_core::blocker::{check_blocker_def, find_blocker_fpt, find_blocker_naive, is_blocker};
use absorber_core::closure::SubpowerSet;
use absorber_core::format::AlgebraFile;
use absorber_core::jonsson::{brute_chain_search, decide_jonsson, verify_chain, JonssonChain};
use absorber_core::reduction::{brute_sat, parse_dimacs, verify_reduction, Cnf, Lit};
use absorber_core::{Algebra, Budget, Elem, Subset, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SUITE_SEED: u64 = 0x0ab5_0b3d;
const SUITE_SIZE: usize = 220;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn load(name: &str) -> AlgebraFile {
    AlgebraFile::parse(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// Runs the CLI with `--json`; returns the exit code and the report without
/// its wall time.
fn cli(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_absorber"))
        .args(args)
        .arg("--json")
        .current_dir(fixture(""))
        .output()
        .expect("spawn absorber");
    let mut v: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{args:?}: bad json ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    });
    v.as_object_mut().unwrap().remove("wall_time_ms");
    (out.status.code().unwrap(), v)
}

fn expect(args: &[&str], code: i32, verdict: &str) -> Value {
    let (c, v) = cli(args);
    assert_eq!(
        (c, v["verdict"].as_str().unwrap()),
        (code, verdict),
        "{args:?}: {v}"
    );
    v
}

fn random_idempotent(n: usize, arity: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    (0..n.pow(arity as u32))
        .map(|code| {
            let first = code / n.pow(arity as u32 - 1);
            let diag: usize = (0..arity).map(|l| first * n.pow(l as u32)).sum();
            if code == diag {
                first as u64
            } else {
                rng.gen_range(0..n as u64)
            }
        })
        .collect()
}

/// The random suite: alternately n = 2 and n = 3, one binary and one ternary
/// idempotent operation each.
fn random_suite() -> Vec<Algebra> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    (0..SUITE_SIZE)
        .map(|i| {
            let n = 2 + i % 2;
            let f = random_idempotent(n, 2, &mut rng);
            let g = random_idempotent(n, 3, &mut rng);
            Algebra::from_tables(n, vec![("f", 2, f), ("g", 3, g)]).unwrap()
        })
        .collect()
}

fn subuniverses(a: &Algebra) -> Vec<Subset> {
    (1u64..1 << a.size())
        .map(Subset::from_mask)
        .filter(|b| a.is_subuniverse(b).is_ok())
        .collect()
}

fn chain(names: &[&str]) -> JonssonChain {
    JonssonChain::new(names.iter().map(|s| s.parse().unwrap()).collect())
}

fn criterion_1() -> String {
    let t = Instant::now();
    let f = load("maj.alg");
    for s in ["0", "1"] {
        expect(
            &["absorb", "--algebra", "maj.alg", "--subset", s],
            0,
            "absorbs",
        );
        let v = expect(
            &[
                "term",
                "--arity",
                "3",
                "--algebra",
                "maj.alg",
                "--subset",
                s,
            ],
            0,
            "found",
        );
        let term: Term = v["witness"]["term"].as_str().unwrap().parse().unwrap();
        let b = f.parse_subset(s).unwrap();
        assert_eq!(verify_absorption_term(&f.algebra, &b, &term, 3), Ok(()));
    }
    expect(&["nu", "--algebra", "maj.alg"], 0, "yes");
    let el = t.elapsed();
    assert!(el < Duration::from_secs(1), "took {el:?}");
    format!(
        "absorbs for {{0}} and {{1}}, verified ternary terms, nu = yes ({} ms)",
        el.as_millis()
    )
}

fn criterion_2() -> String {
    let t = Instant::now();
    let f = load("maltsev.alg");
    let base = ["--algebra", "maltsev.alg", "--subset", "0"];
    let with =
        |cmd: &[&str]| -> Vec<String> { cmd.iter().chain(&base).map(|s| s.to_string()).collect() };
    let run = |cmd: &[&str], code, verdict| {
        let args = with(cmd);
        expect(
            &args.iter().map(String::as_str).collect::<Vec<_>>(),
            code,
            verdict,
        )
    };
    run(&["jonsson"], 1, "no");
    run(&["blocker"], 1, "none");
    let v = run(&["absorb"], 1, "not_absorbs");
    assert_eq!(v["witness"]["kind"], "jonsson_failure");
    for k in 1..=6 {
        run(&["term", "--arity", &k.to_string()], 1, "none");
    }
    let v = run(&["essential", "--arity", "3"], 0, "found");
    let members: Vec<Vec<Elem>> = serde_json::from_value(v["witness"]["members"].clone()).unwrap();
    let s = SubpowerSet::from_tuples(2, 3, &members).unwrap();
    assert_eq!(
        is_b_essential(&f.algebra, &Subset::singleton(0), &s),
        Ok(())
    );
    let el = t.elapsed();
    assert!(el < Duration::from_secs(1), "took {el:?}");
    format!(
        "jonsson no, no blocker, Jónsson witness, no term for k = 1..6, essential subpower of size {} ({} ms)",
        members.len(),
        el.as_millis()
    )
}

fn criterion_3() -> String {
    let t = Instant::now();
    let f = load("implication.alg");
    let b = Subset::singleton(0);
    expect(
        &["jonsson", "--algebra", "implication.alg", "--subset", "0"],
        0,
        "yes",
    );
    let d = chain(&["x0", "d1(x0,x1,x2)", "d2(x0,x1,x2)", "x2"]);
    assert_eq!(verify_chain(&f.algebra, &b, &d), Ok(()));
    let v = expect(
        &["blocker", "--algebra", "implication.alg", "--subset", "0"],
        0,
        "found",
    );
    let set = |key: &str| {
        let m: Vec<Elem> = serde_json::from_value(v["witness"][key].clone()).unwrap();
        Subset::new(m, 2).unwrap()
    };
    let (c, dd) = (set("c"), set("d"));
    assert_eq!(is_blocker(&f.algebra, &b, &c, &dd), Ok(()));
    assert_eq!(
        check_blocker_def(&f.algebra, &b, &c, &dd, 3, 1 << 20).unwrap(),
        None
    );
    let v = expect(
        &["absorb", "--algebra", "implication.alg", "--subset", "0"],
        1,
        "not_absorbs",
    );
    assert_eq!(v["witness"]["kind"], "blocker");
    let el = t.elapsed();
    assert!(el < Duration::from_secs(1), "took {el:?}");
    format!(
        "chain (x,d1,d2,z) verifies, blocker ({c},{dd}) passes both checks ({} ms)",
        el.as_millis()
    )
}

/// All formulas over `vars` variables with 1..=3 clauses, clauses and
/// formulas taken as sorted multisets.
fn canonical_formulas(vars: usize) -> Vec<Cnf> {
    let lits: Vec<Lit> = (1..=vars)
        .flat_map(|v| [Lit::pos(v), Lit::neg(v)])
        .collect();
    let mut clauses = Vec::new();
    for i in 0..lits.len() {
        for j in i..lits.len() {
            for k in j..lits.len() {
                clauses.push(vec![lits[i], lits[j], lits[k]]);
            }
        }
    }
    let m = clauses.len();
    let mut out = Vec::new();
    for i in 0..m {
        out.push(vec![i]);
        for j in i..m {
            out.push(vec![i, j]);
            for k in j..m {
                out.push(vec![i, j, k]);
            }
        }
    }
    out.into_iter()
        .map(|idx| Cnf::new(vars, idx.into_iter().map(|i| clauses[i].clone()).collect()).unwrap())
        .collect()
}

fn criterion_4() -> String {
    let t = Instant::now();
    let budget = Budget::default();
    let (mut total, mut sat) = (0, 0);
    for vars in 1..=3 {
        for f in canonical_formulas(vars) {
            let rep = verify_reduction(&f, &budget).unwrap();
            assert!(rep.passed(), "{f}: {rep:?}");
            total += 1;
            sat += rep.satisfiable as usize;
        }
    }
    let dir = std::env::temp_dir().join(format!("absorber-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for name in ["sat1.cnf", "unsat1.cnf"] {
        let alg = dir.join(name.replace(".cnf", ".alg"));
        let (code, _) = cli(&["reduce-3sat", name, "-o", alg.to_str().unwrap()]);
        assert_eq!(code, 0);
        let f = parse_dimacs(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap();
        let expected = if brute_sat(&f).unwrap().is_some() {
            0
        } else {
            1
        };
        let (code, _) = cli(&[
            "blocker",
            "--algebra",
            alg.to_str().unwrap(),
            "--subset",
            "0",
        ]);
        assert_eq!(code, expected, "{name}");
    }
    std::fs::remove_dir_all(&dir).ok();
    let el = t.elapsed();
    assert!(el < Duration::from_secs(300), "took {el:?}");
    format!(
        "{total} formulas ({sat} satisfiable): blocker existence = brute force, idempotent, chain identities hold ({:.1} s)",
        el.as_secs_f64()
    )
}

fn criterion_5() -> String {
    let t = Instant::now();
    let budget = Budget::default();
    let clone_budget = Budget::with_cap(1 << 14).work(1 << 28);
    let mut pairs = 0;
    let mut chain_checked = 0;
    let mut term_checks = 0;
    let mut not_absorbs = 0;
    let mut quartic_capped = 0;
    for (i, a) in random_suite().iter().enumerate() {
        for b in subuniverses(a) {
            pairs += 1;
            let ctx = format!(
                "algebra #{i} {:?}, B = {b}",
                a.ops().iter().map(|o| o.table()).collect::<Vec<_>>()
            );
            // (a)
            let fpt = find_blocker_fpt(a, &b, &budget).unwrap();
            let naive = find_blocker_naive(a, &b, &budget).unwrap();
            assert_eq!(fpt.blocker.is_some(), naive.is_some(), "{ctx}");
            if let Some(p) = &fpt.blocker {
                assert_eq!(is_blocker(a, &b, &p.c, &p.d), Ok(()), "{ctx}");
            }
            // (b)
            let j = decide_jonsson(a, &b, &budget).unwrap();
            match brute_chain_search(a, &b, &clone_budget) {
                Ok(found) => {
                    chain_checked += 1;
                    assert_eq!(j.holds(), found.is_some(), "{ctx}");
                    if let Some(c) = found {
                        assert_eq!(verify_chain(a, &b, &c), Ok(()), "{ctx}");
                    }
                }
                Err(e) => assert!(e.is_cap(), "{ctx}: {e}"),
            }
            // (c), (d)
            let v = decide_absorption(a, &b, &budget).unwrap();
            assert_ne!(v.decision, Decision::Capped, "{ctx}");
            if v.decision == Decision::NotAbsorbs {
                not_absorbs += 1;
            }
            let absorbs = v.decision == Decision::Absorbs;
            for k in 1..=if absorbs { 3 } else { 4 } {
                let term = match find_absorption_term(a, &b, k, &budget) {
                    Ok(s) => s.term,
                    Err(e) if e.is_cap() && k == 4 => {
                        quartic_capped += 1;
                        continue;
                    }
                    Err(e) => panic!("{ctx} k={k}: {e}"),
                };
                if let Some(t) = &term {
                    assert_eq!(verify_absorption_term(a, &b, t, k), Ok(()), "{ctx} k={k}");
                    assert_eq!(v.decision, Decision::Absorbs, "{ctx} k={k}");
                    assert!(j.holds() && fpt.blocker.is_none(), "{ctx} k={k}");
                }
                if k <= 3 {
                    term_checks += 1;
                    let ess = find_b_essential(a, &b, k, &budget).unwrap();
                    assert_eq!(term.is_some(), ess.is_none(), "{ctx} k={k}");
                    if let Some(s) = &ess {
                        assert_eq!(is_b_essential(a, &b, s), Ok(()), "{ctx} k={k}");
                    }
                }
            }
        }
    }
    let el = t.elapsed();
    assert!(el < Duration::from_secs(600), "took {el:?}");
    format!(
        "{SUITE_SIZE} algebras, {pairs} (A, B) pairs ({not_absorbs} not absorbing): blocker oracles agree, \
         Jónsson oracle agrees on {chain_checked} pairs within the clone cap, term/essential duality on \
         {term_checks} (pair, k) cases, terms only for absorbing B, {quartic_capped} arity-4 searches capped ({:.1} s)",
        el.as_secs_f64()
    )
}

fn criterion_6() -> String {
    let t = Instant::now();
    let budget = Budget::default();
    let suite = random_suite();
    for (i, a) in suite.iter().enumerate() {
        let n = a.size();
        let sq = a.power(2, 1 << 10).unwrap();
        let diag = Subset::new((0..n).map(|x| (x * n + x) as Elem), n * n).unwrap();
        let v = decide_jonsson(&sq, &diag, &budget).unwrap();
        assert!(!v.holds(), "algebra #{i}");
    }
    let el = t.elapsed();
    assert!(el < Duration::from_secs(300), "took {el:?}");
    format!(
        "diagonal of A² never Jónsson absorbs, {} algebras ({:.1} s)",
        suite.len(),
        el.as_secs_f64()
    )
}

fn criterion_7() -> String {
    let budget = Budget::default();
    let mut cases: Vec<(String, Algebra, Subset)> = vec![
        (
            "maj {0}".into(),
            load("maj.alg").algebra,
            Subset::singleton(0),
        ),
        (
            "maj {1}".into(),
            load("maj.alg").algebra,
            Subset::singleton(1),
        ),
        (
            "maltsev {0}".into(),
            load("maltsev.alg").algebra,
            Subset::singleton(0),
        ),
        (
            "implication {1}".into(),
            load("implication.alg").algebra,
            Subset::singleton(1),
        ),
    ];
    let mut random = 0;
    for (i, a) in random_suite()
        .into_iter()
        .enumerate()
        .filter(|(_, a)| a.size() == 3)
    {
        for b in subuniverses(&a).into_iter().filter(|b| b.len() < 3) {
            if random < 10 && find_blocker_fpt(&a, &b, &budget).unwrap().blocker.is_none() {
                cases.push((format!("random #{i} {b}"), a.clone(), b));
                random += 1;
            }
        }
    }
    assert_eq!(random, 10);
    for (name, a, b) in &cases {
        let out = find_blocker_fpt(a, b, &budget).unwrap();
        assert!(out.blocker.is_none(), "{name}");
        let prod: u64 = a.arities().map(|r| r as u64).product();
        let expected = (a.size() - b.len()) as u64 * b.len() as u64 * prod;
        assert_eq!(out.iterations, expected, "{name}");
    }
    format!(
        "iteration count = |A∖B|·|B|·∏ arities on {} completed searches",
        cases.len()
    )
}

fn criterion_8() -> String {
    let dir = std::env::temp_dir().join(format!("absorber-determinism-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let reduced = dir.join("sat1.alg");
    let reduced = reduced.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["check", "--algebra", "implication.alg", "--subset", "1"],
        vec![
            "absorb",
            "--algebra",
            "maj.alg",
            "--subset",
            "0",
            "--max-arity",
            "4",
        ],
        vec!["absorb", "--algebra", "maj.alg", "--subset", "1"],
        vec![
            "term",
            "--arity",
            "3",
            "--algebra",
            "maj.alg",
            "--subset",
            "0",
        ],
        vec!["nu", "--algebra", "maj.alg", "--max-arity", "4"],
        vec!["jonsson", "--algebra", "maltsev.alg", "--subset", "0"],
        vec!["blocker", "--algebra", "maltsev.alg", "--subset", "0"],
        vec!["absorb", "--algebra", "maltsev.alg", "--subset", "0"],
        vec![
            "term",
            "--arity",
            "4",
            "--algebra",
            "maltsev.alg",
            "--subset",
            "0",
        ],
        vec![
            "essential",
            "--arity",
            "3",
            "--algebra",
            "maltsev.alg",
            "--subset",
            "0",
        ],
        vec!["jonsson", "--algebra", "implication.alg", "--subset", "0"],
        vec!["blocker", "--algebra", "implication.alg", "--subset", "0"],
        vec!["absorb", "--algebra", "implication.alg", "--subset", "0"],
        vec!["nu", "--algebra", "implication.alg"],
        vec!["cd", "--algebra", "implication.alg"],
        vec![
            "oracle",
            "blocker",
            "--algebra",
            "implication.alg",
            "--subset",
            "0",
        ],
        vec![
            "oracle",
            "chain",
            "--algebra",
            "implication.alg",
            "--subset",
            "0",
        ],
        vec![
            "oracle",
            "essential",
            "--arity",
            "3",
            "--algebra",
            "maltsev.alg",
            "--subset",
            "0",
        ],
        vec!["reduce-3sat", "sat1.cnf", "-o", reduced],
        vec!["blocker", "--algebra", reduced, "--subset", "0"],
        vec!["verify-reduction", "unsat1.cnf"],
    ];
    for cmd in &commands {
        let mut seen = BTreeSet::new();
        for threads in ["1", "1", "4", "4"] {
            let mut args = cmd.clone();
            args.extend(["--threads", threads]);
            let (code, v) = cli(&args);
            seen.insert((code, serde_json::to_string(&v).unwrap()));
            if cmd[0] == "reduce-3sat" {
                seen.insert((-1, std::fs::read_to_string(reduced).unwrap()));
            }
        }
        let expected = if cmd[0] == "reduce-3sat" { 2 } else { 1 };
        assert_eq!(seen.len(), expected, "{cmd:?}: {seen:#?}");
    }
    std::fs::remove_dir_all(&dir).ok();
    format!(
        "{} commands byte-identical across two runs each at 1 and 4 threads",
        commands.len()
    )
}

type Criterion = (&'static str, fn() -> String);

fn main() {
    let criteria: [Criterion; 8] = [
        ("majority fixture", criterion_1),
        ("Maltsev fixture", criterion_2),
        ("implication fixture", criterion_3),
        ("3-SAT reduction soundness", criterion_4),
        ("random oracle agreement", criterion_5),
        ("diagonal law", criterion_6),
        ("FPT iteration count", criterion_7),
        ("determinism", criterion_8),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(detail) => println!("criterion {id} ({name}): PASS: {detail}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {id} ({name}): FAIL: {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
