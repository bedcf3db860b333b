use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use effhom::cmbn::Cmbn;
use effhom::complex::{Morphism, Rng};
use effhom::reduction::{Equivalence, Reduction};
use effhom::simplicial::{rproj_truncated, sphere, EHObject};
use effhom_cli::{probe_equivalence, run_script, Config};
use rand::SeedableRng;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_effhom"));
    for v in ["SCRIPT", "JSON", "SEED", "DEGREE_BOUND", "BPL_CAP", "TIME_BUDGET"] {
        c.env_remove(v);
    }
    c
}

fn feed(mut c: Command, src: &str) -> Output {
    let mut child = c.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(src.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scripts() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scripts")
}

#[test]
fn exit_codes() {
    let cases = [
        ("S = sphere 2\nhomology S 0..3\n", 0),
        ("S = sphere 2\nhomology S 0..\n", 2),
        ("homology Y 2\n", 3),
        ("S = sphere 0\n", 3),
        ("P = rproj 4\nO = loop P\nbasis O.chains 4\n", 4),
        ("S = sphere 2\nhomology S 40\n", 5),
    ];
    for (src, code) in cases {
        let o = feed(bin(), src);
        assert_eq!(o.status.code(), Some(code), "{src:?}: {}", stderr(&o));
    }
    let o = bin().arg("--script").arg(scripts().join("locally_effective.eff")).output().unwrap();
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn parse_errors_carry_line_and_column() {
    let o = feed(bin(), "S = sphere 2\n\nS2 = sphere two\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3, column"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn environment_configures_and_flags_win() {
    let src = "S = sphere 2\nhomology S 7\n";
    let mut c = bin();
    c.env("DEGREE_BOUND", "6");
    assert_eq!(feed(c, src).status.code(), Some(5));
    let mut c = bin();
    c.env("DEGREE_BOUND", "6").arg("--degree-bound").arg("8");
    assert_eq!(feed(c, src).status.code(), Some(0));
    let mut c = bin();
    c.env("JSON", "true");
    let v: Value = serde_json::from_str(stdout(&feed(c, src)).trim()).unwrap();
    assert_eq!(v["command"], "homology");
    let probe = "P = rproj 4\nO = loop P\nprobe O 4 8\n";
    let runs: Vec<String> = ["5", "5"]
        .iter()
        .map(|s| {
            let mut c = bin();
            c.env("SEED", s).arg("--json");
            stdout(&feed(c, probe))
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn bases_and_queries() {
    let cfg = Config { base_dir: scripts(), ..Config::default() };
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_script("S = sphere 3\nbasis S 3\nbasis S -1\n", &cfg, &mut out, &mut err);
    assert_eq!(code, 0);
    let out = String::from_utf8(out).unwrap();
    assert!(out.contains("S.eff degree 3: 1 generator"), "{out}");
    assert!(out.contains("S.eff degree -1: 0 generators"), "{out}");
}

fn check_schema(v: &Value) -> Result<(), String> {
    let group = |g: &Value| -> Result<(), String> {
        let t = g["torsion"].as_array().ok_or("torsion")?;
        if !t.iter().all(|d| d.as_u64().map_or(false, |d| d > 1)) {
            return Err(format!("bad torsion {g}"));
        }
        g["free_rank"].as_u64().ok_or("free_rank")?;
        g["degree"].as_i64().ok_or("degree")?;
        Ok(())
    };
    let report = |r: &Value| -> Result<(), String> {
        for row in r["rows"].as_array().ok_or("rows")? {
            row["equation"].as_str().ok_or("equation")?;
            row["passed"].as_u64().ok_or("passed")?;
            row["failed"].as_u64().ok_or("failed")?;
        }
        r["failures"].as_array().ok_or("failures")?;
        Ok(())
    };
    if let Some(e) = v.get("error") {
        e["kind"].as_str().ok_or("kind")?;
        e["message"].as_str().ok_or("message")?;
        return if e["line"].is_u64() || e["line"].is_null() { Ok(()) } else { Err("line".into()) };
    }
    v["name"].as_str().ok_or("name")?;
    match v["command"].as_str().ok_or("command")? {
        "homology" => v["groups"].as_array().ok_or("groups")?.iter().try_for_each(group),
        "basis" => {
            v["degree"].as_i64().ok_or("degree")?;
            v["side"].as_str().ok_or("side")?;
            v["basis"].as_array().ok_or("basis")?.iter().try_for_each(|g| g.as_str().map(|_| ()).ok_or("generator".to_string()))
        }
        "probe" => {
            v["degree"].as_i64().ok_or("degree")?;
            v["trials"].as_u64().ok_or("trials")?;
            v["equal"].as_u64().ok_or("equal")?;
            v["mismatches"].as_array().ok_or("mismatches")?;
            report(&v["equations"])
        }
        "check" => {
            v["degree"].as_i64().ok_or("degree")?;
            report(&v["report"])
        }
        c => Err(format!("unknown command {c}")),
    }
}

#[test]
fn json_lines_follow_the_schema() {
    let o = bin().arg("--json").arg("--script").arg(scripts().join("queries.eff")).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() >= 6);
    for v in &lines {
        check_schema(v).unwrap_or_else(|e| panic!("{e}: {v}"));
    }
    let o = feed({
        let mut c = bin();
        c.arg("--json");
        c
    }, "S = sphere 2\nhomology S 3\nhomology T 1\n");
    assert_eq!(o.status.code(), Some(3));
    let last: Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    check_schema(&last).unwrap();
    assert_eq!(last["error"]["line"], 3);
    assert_eq!(last["error"]["kind"], "precondition");
}

#[test]
fn probe_agrees_on_honest_equivalences() {
    let mut rng = Rng::seed_from_u64(1);
    let s = sphere(3).unwrap();
    let id = EHObject::new("S", s.space.clone(), s.chains.clone(), Equivalence::identity(&s.chains)).unwrap();
    let rep = probe_equivalence(&id, 3, 10, &mut rng).unwrap();
    assert!(rep.passed() && rep.trials > 0);
    let o = rproj_truncated(4).map(|p| effhom::loops::loop_space_eh(&p).unwrap()).unwrap();
    let rep = probe_equivalence(&o, 4, 20, &mut rng).unwrap();
    assert!(rep.passed(), "{:?}", rep.mismatches);
    assert_eq!(rep.equal, rep.trials);
}

#[test]
fn probe_catches_a_broken_inclusion() {
    // Drops the degree-4 part of the inclusion into the middle complex; it stops
    // commuting with the differential d(c5) = 2·c4 behind the Z/2 in degree 4.
    let p = rproj_truncated(4).unwrap();
    let o = effhom::loops::loop_space_eh(&p).unwrap();
    let g = o.equiv.right.g.clone();
    let broken = Morphism::new(o.equiv.right.bottom(), o.equiv.right.top(), 0, move |n, x| {
        if n == 4 {
            Cmbn::zero(n)
        } else {
            g.apply(&Cmbn::gen(n, x.clone()))
        }
    });
    let right = Reduction { g: broken, ..o.equiv.right.clone() };
    let bad = EHObject { equiv: Equivalence { left: o.equiv.left.clone(), right }, ..o };
    let mut rng = Rng::seed_from_u64(2);
    let rep = probe_equivalence(&bad, 5, 20, &mut rng).unwrap();
    assert!(!rep.mismatches.is_empty());
    assert!(!rep.passed());
}
