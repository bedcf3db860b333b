//! One line per acceptance criterion. Everything runs inside a single test so the
//! heavy loop-space computation never shares the machine with another test.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use effhom::cmbn::Cmbn;
use effhom::complex::{Rng, CC};
use effhom::linalg::{homology_of_pair, smith_normal_form, solve_factorization, AbelianGroupDescr, IntMatrix};
use effhom::postnikov::cohomology_group;
use effhom::reduction::{check_reduction, sample_generators, CheckReport, Reduction};
use effhom::simplicial::EHObject;
use effhom_cli::{parse_script, run_script, Config, Session};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};

/// Writes to the process stdout, past the test harness capture.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let mut o = std::io::stdout().lock();
        let _ = writeln!(o, $($t)*);
        let _ = o.flush();
    }};
}

const BUDGET_HEADLINE_A: Duration = Duration::from_secs(600);
const BUDGET_HEADLINE_B: Duration = Duration::from_secs(3600);
const BUDGET_ORACLE_ROW: Duration = Duration::from_secs(10);
const PROPERTY_SAMPLES: usize = 50;
const PROPERTY_DEGREE: i32 = 5;

fn scripts() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scripts")
}

fn golden(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn config() -> Config {
    Config { base_dir: scripts(), ..Config::default() }
}

/// Runs a script in process; returns (exit code, stdout, stderr, elapsed).
fn run(src: &str, cfg: &Config) -> (i32, String, String, Duration) {
    let t = Instant::now();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_script(src, cfg, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap(), t.elapsed())
}

fn run_file(name: &str, cfg: &Config) -> (i32, String, String, Duration) {
    run(&std::fs::read_to_string(scripts().join(name)).unwrap(), cfg)
}

struct Ledger {
    lines: Vec<(String, bool, String)>,
}

impl Ledger {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        say!("[{}] criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id.to_string(), pass, detail));
    }
}

fn z(r: usize) -> AbelianGroupDescr {
    AbelianGroupDescr::free(r)
}

fn zero() -> AbelianGroupDescr {
    AbelianGroupDescr::zero()
}

fn render(groups: &[AbelianGroupDescr]) -> String {
    groups.iter().enumerate().map(|(i, g)| format!("{i}:{g}")).collect::<Vec<_>>().join(" ")
}

/// Homology of a finite cellular complex given by its boundary matrices `d[k]: C_k → C_{k−1}`.
fn cellular(ranks: &[usize], d: &dyn Fn(usize) -> IntMatrix) -> Vec<AbelianGroupDescr> {
    let top = ranks.len() - 1;
    (0..top)
        .map(|k| {
            let d_out = if k == 0 { IntMatrix::zeros(0, ranks[0]) } else { d(k) };
            homology_of_pair(&d(k + 1), &d_out).unwrap()
        })
        .collect()
}

/// RP^∞ with the cells below `bottom` (except the vertex) removed: d_k = 1 + (−1)^k.
fn projective_oracle(bottom: usize, upto: usize) -> Vec<AbelianGroupDescr> {
    let ranks: Vec<usize> = (0..=upto + 1).map(|k| usize::from(k == 0 || k >= bottom)).collect();
    let r2 = ranks.clone();
    let d = move |k: usize| {
        let (rows, cols) = (r2[k - 1], r2[k]);
        if rows == 1 && cols == 1 && k > bottom {
            IntMatrix::from_rows(&[vec![1 + if k % 2 == 0 { 1 } else { -1 }]])
        } else {
            IntMatrix::zeros(rows, cols)
        }
    };
    cellular(&ranks, &d)
}

fn sphere_oracle(n: usize, upto: usize) -> Vec<AbelianGroupDescr> {
    (0..=upto).map(|k| if k == 0 || k == n { z(1) } else { zero() }).collect()
}

fn cyclics(a: &AbelianGroupDescr) -> Vec<BigInt> {
    let mut v = a.torsion.clone();
    v.extend(std::iter::repeat(BigInt::zero()).take(a.free_rank));
    v
}

/// H_n(X×Y) = ⊕ H_p⊗H_q ⊕ ⊕_{p+q=n−1} Tor(H_p,H_q).
fn kunneth(hx: &[AbelianGroupDescr], hy: &[AbelianGroupDescr], n: usize) -> AbelianGroupDescr {
    let mut f = Vec::new();
    for p in 0..=n {
        for a in cyclics(&hx[p]) {
            for b in cyclics(&hy[n - p]) {
                f.push(a.gcd(&b));
            }
        }
    }
    for p in 0..n {
        for a in cyclics(&hx[p]) {
            for b in cyclics(&hy[n - 1 - p]) {
                if !a.is_zero() && !b.is_zero() {
                    f.push(a.gcd(&b));
                }
            }
        }
    }
    AbelianGroupDescr::from_factors(f, 0)
}

fn det(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<BigInt>> = m[1..].iter().map(|r| [&r[..j], &r[j + 1..]].concat()).collect();
            let s = &m[0][j] * det(&minor);
            if j % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .sum()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Invariant factors d_k = D_k / D_{k−1}, D_k the gcd of k×k minors.
fn determinantal_factors(m: &[Vec<i64>]) -> Vec<BigInt> {
    let (r, c) = (m.len(), m.first().map_or(0, Vec::len));
    let mut prev = BigInt::one();
    let mut out = Vec::new();
    for k in 1..=r.min(c) {
        let mut g = BigInt::zero();
        for rows in subsets(r, k) {
            for cols in subsets(c, k) {
                let minor: Vec<Vec<BigInt>> =
                    rows.iter().map(|&i| cols.iter().map(|&j| BigInt::from(m[i][j])).collect()).collect();
                g = g.gcd(&det(&minor));
            }
        }
        if g.is_zero() {
            break;
        }
        out.push(&g / &prev);
        prev = g;
    }
    out
}

/// Generators checked on one side of a reduction: all of them when fewer than the
/// target exist in degrees ≤ deg, otherwise a sample of the target size.
fn property_generators(c: &CC, deg: i32, rng: &mut Rng) -> (Vec<Cmbn>, usize) {
    let all: Option<Vec<Cmbn>> = (0..=deg)
        .map(|n| c.basis(n).ok().map(|b| b.into_iter().map(move |g| Cmbn::gen(n, g)).collect::<Vec<_>>()))
        .collect::<Option<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect());
    match all {
        Some(v) if v.len() < PROPERTY_SAMPLES => {
            let n = v.len();
            (v, n)
        }
        Some(v) => (v.choose_multiple(rng, PROPERTY_SAMPLES).cloned().collect(), PROPERTY_SAMPLES),
        None => (sample_generators(c, deg, PROPERTY_SAMPLES, rng), PROPERTY_SAMPLES),
    }
}

fn property_suite(x: &EHObject, rng: &mut Rng) -> (CheckReport, bool, usize) {
    let mut rep = CheckReport::default();
    let mut enough = true;
    let mut fewest = usize::MAX;
    for r in [&x.equiv.left, &x.equiv.right] {
        let r: &Reduction = r;
        let (top, want_top) = property_generators(r.top(), PROPERTY_DEGREE, rng);
        let (bot, want_bot) = property_generators(r.bottom(), PROPERTY_DEGREE, rng);
        for (side, got, want) in [("top", top.len(), want_top), ("bottom", bot.len(), want_bot)] {
            if got < want {
                say!("    {}: {side} {} gave {got} of {want} generators", x.name, if side == "top" { r.top().name() } else { r.bottom().name() });
                enough = false;
            }
        }
        fewest = fewest.min(want_top).min(want_bot);
        let part = check_reduction(r, &top, &bot);
        if rep.rows.is_empty() {
            rep = part;
        } else {
            rep.merge(&part);
        }
    }
    (rep, enough, fewest)
}

fn criterion_1(l: &mut Ledger) {
    let (code, out, err, t) = run_file("headline.eff", &config());
    let h5 = out.lines().last().unwrap_or("");
    let ok = code == 0 && h5 == "Z/4 + Z/2 + Z" && t <= BUDGET_HEADLINE_A && out == golden("headline.out");
    l.record("1", ok, format!("H5(X) = {h5} in {:.1} s (budget {} s) {err}", t.as_secs_f64(), BUDGET_HEADLINE_A.as_secs()));
}

fn criterion_2(l: &mut Ledger) {
    let cfg = Config { time_budget: Some(BUDGET_HEADLINE_B), ..config() };
    let (code, out, err, t) = run_file("headline_loop.eff", &cfg);
    let want = "Z/16 + Z/8 + 23×Z/2";
    let h5 = out.lines().last().unwrap_or("").to_string();
    if code == 0 {
        let ok = h5 == want && out == golden("headline_loop.out");
        l.record("2", ok, format!("H5(ΩX) = {h5} in {:.1} s (budget {} s)", t.as_secs_f64(), BUDGET_HEADLINE_B.as_secs()));
        return;
    }
    // Over budget: H4 exactly plus a passing probe through degree 5.
    let src = std::fs::read_to_string(scripts().join("headline_loop.eff")).unwrap().replace("homology OX 5", "probe OX 5 10");
    let (code2, out2, err2, _) = run(&src, &config());
    let h4_ok = out2.lines().next() == golden("headline_loop.out").lines().next();
    let probe_ok = out2.lines().nth(1).map_or(false, |s| s.contains(" 0 failures") && !s.contains("mismatch"));
    l.record(
        "2",
        code2 == 0 && h4_ok && probe_ok,
        format!("DEGRADED: full run exited {code} ({}); H4 exact: {h4_ok}; probe: {probe_ok} {err2}", err.trim()),
    );
}

fn criterion_3(l: &mut Ledger) {
    let (code, out, _, t) = run("P4 = rproj 4\nOP4 = loop P4\nhomology OP4 3\n", &config());
    l.record("3", code == 0 && out.trim() == "Z", format!("H3(Ω(P∞/P³)) = {} in {:.1} s", out.trim(), t.as_secs_f64()));
}

fn criterion_4(l: &mut Ledger) {
    let mut rows: Vec<(String, String, String)> = Vec::new();
    for n in 1..=6 {
        rows.push((format!("S{n}"), format!("X = sphere {n}\nhomology X 0..7"), render(&sphere_oracle(n, 7))));
    }
    rows.push(("P∞/P³".into(), "X = rproj 4\nhomology X 0..7".into(), render(&projective_oracle(4, 7))));
    let cobar: Vec<AbelianGroupDescr> = (0..=8).map(|k| if k % 2 == 0 { z(1) } else { zero() }).collect();
    rows.push(("ΩS3".into(), "S = sphere 3\nX = loop S\nhomology X 0..8".into(), render(&cobar)));
    let cp: Vec<AbelianGroupDescr> = (0..=6).map(|k| if k % 2 == 0 { z(1) } else { zero() }).collect();
    rows.push(("K(Z,2)".into(), "X = em Z 2\nhomology X 0..6".into(), render(&cp)));
    rows.push(("K(Z/2,1)".into(), "X = em Z/2 1\nhomology X 0..6".into(), render(&projective_oracle(1, 6))));
    let s1 = sphere_oracle(1, 3);
    let torus: Vec<AbelianGroupDescr> = (0..=3).map(|n| kunneth(&s1, &s1, n)).collect();
    rows.push(("S1×S1".into(), "C = sphere 1\nX = product C C\nhomology X 0..3".into(), render(&torus)));
    let mut all = true;
    let mut worst = Duration::ZERO;
    for (name, src, want) in &rows {
        let (code, out, _, t) = run(src, &config());
        let ok = code == 0 && out.trim() == want && t <= BUDGET_ORACLE_ROW;
        worst = worst.max(t);
        if !ok {
            say!("    {name}: got `{}`, want `{want}` in {:.2} s", out.trim(), t.as_secs_f64());
        }
        all &= ok;
    }
    l.record("4", all, format!("{} oracle rows, slowest {:.2} s (budget {} s each)", rows.len(), worst.as_secs_f64(), BUDGET_ORACLE_ROW.as_secs()));
}

fn criterion_5(l: &mut Ledger) {
    let mut rng = Rng::seed_from_u64(2024);
    let mut sink = Vec::new();
    let cfg = Config { smoke_samples: 0, ..config() };
    let mut session = Session::new(cfg, &mut sink);
    let src = [
        std::fs::read_to_string(scripts().join("headline.eff")).unwrap(),
        std::fs::read_to_string(scripts().join("oracles.eff")).unwrap().replace("P4 = rproj 4\n", "").replace("OP4 = loop P4\n", ""),
        "OX = loop X\n".to_string(),
    ]
    .join("\n");
    let stmts = parse_script(&src).unwrap();
    for st in stmts.iter().filter(|s| s.bind.is_some()) {
        session.run(st).unwrap();
    }
    let objects: Vec<(String, EHObject)> = session.spaces().map(|(n, x)| (n.clone(), x.clone())).collect();
    drop(session);
    let (mut checks, mut failures, mut enough) = (0, 0, true);
    let mut thin = Vec::new();
    for (name, x) in &objects {
        let t = Instant::now();
        let (rep, ok, fewest) = property_suite(x, &mut rng);
        say!("    {name}: {} checks in {:.1} s", rep.checks(), t.elapsed().as_secs_f64());
        checks += rep.checks();
        failures += rep.failure_count();
        enough &= ok;
        if fewest < PROPERTY_SAMPLES {
            thin.push(format!("{name}({fewest})"));
        }
        if !rep.passed() {
            say!("    {name}:\n{rep}");
        }
    }
    l.record(
        "5",
        failures == 0 && enough,
        format!(
            "{} objects, {checks} exact checks through degree {PROPERTY_DEGREE}, {failures} failures; exhaustive where fewer than {PROPERTY_SAMPLES} generators exist: {}",
            objects.len(),
            thin.join(" ")
        ),
    );
}

fn criterion_6(l: &mut Ledger) {
    let (code, out, _, t) = run("P = postnikov towers/kz2_kz3.tower 3\nhomology P 0..5\n", &config());
    let cp: Vec<AbelianGroupDescr> = (0..=5).map(|k| if k % 2 == 0 { z(1) } else { zero() }).collect();
    // H_*(K(Z,3)) through degree 5 (Serre): Z, 0, 0, Z, 0, Z/2.
    let kz3 = vec![z(1), zero(), zero(), z(1), zero(), AbelianGroupDescr::new(&[2], 0)];
    let want = render(&(0..=5).map(|n| kunneth(&cp, &kz3, n)).collect::<Vec<_>>());
    let k2 = effhom::em::em_space(&z(1), 2).unwrap();
    let (h4, _) = cohomology_group(&k2, 4, &z(1)).unwrap();
    let ok = code == 0 && out.trim() == want && h4 == z(1);
    l.record("6", ok, format!("tower homology `{}` vs Künneth `{want}`; H⁴(K(Z,2);Z) = {h4}; {:.1} s", out.trim(), t.as_secs_f64()));
}

fn criterion_7(l: &mut Ledger) {
    let f = IntMatrix::zeros(0, 1);
    let brouwer = solve_factorization(&f, &IntMatrix::identity(1)).unwrap().is_none();
    let mut rng = Rng::seed_from_u64(7);
    let mut agree = 0;
    for _ in 0..200 {
        let (r, c) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let m: Vec<Vec<i64>> = (0..r).map(|_| (0..c).map(|_| rng.gen_range(-9..=9)).collect()).collect();
        let snf = smith_normal_form(&IntMatrix::from_rows(&m));
        let mut got: Vec<BigInt> = snf.diag.iter().filter(|d| !d.is_zero()).map(|d| d.abs()).collect();
        got.sort();
        let mut want = determinantal_factors(&m);
        want.sort();
        if got == want {
            agree += 1;
        }
    }
    l.record("7", brouwer && agree == 200, format!("no lift through Z → 0: {brouwer}; SNF = determinantal oracle on {agree}/200 matrices"));
}

fn criterion_8(l: &mut Ledger) {
    let bin = env!("CARGO_BIN_EXE_effhom");
    let mut same = true;
    let mut compared = Vec::new();
    for (script, json) in [("headline.eff", false), ("oracles.eff", false), ("tower.eff", false), ("queries.eff", false), ("queries.eff", true)] {
        let go_with = |seed: Option<&str>| {
            let mut c = Command::new(bin);
            for v in ["SCRIPT", "JSON", "SEED", "DEGREE_BOUND", "BPL_CAP", "TIME_BUDGET"] {
                c.env_remove(v);
            }
            c.arg("--script").arg(scripts().join(script));
            if let Some(s) = seed {
                c.arg("--seed").arg(s);
            }
            if json {
                c.arg("--json");
            }
            c.output().unwrap()
        };
        let (a, b) = (go_with(Some("42")), go_with(Some("42")));
        same &= a.status.success() && a.stdout == b.stdout && a.status.code() == b.status.code();
        if !json {
            let gold = golden(&script.replace(".eff", ".out"));
            same &= String::from_utf8_lossy(&go_with(None).stdout) == gold;
        }
        compared.push(format!("{script}{}", if json { " --json" } else { "" }));
    }
    l.record("8", same, format!("two runs byte-identical and equal to the golden files: {}", compared.join(", ")));
}

#[test]
fn acceptance() {
    let mut l = Ledger { lines: Vec::new() };
    criterion_1(&mut l);
    criterion_3(&mut l);
    criterion_4(&mut l);
    criterion_6(&mut l);
    criterion_7(&mut l);
    criterion_8(&mut l);
    criterion_5(&mut l);
    criterion_2(&mut l);
    let failed: Vec<&str> = l.lines.iter().filter(|x| !x.1).map(|x| x.0.as_str()).collect();
    say!("acceptance: {} of {} criteria pass", l.lines.len() - failed.len(), l.lines.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
