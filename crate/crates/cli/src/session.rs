//! Executing parsed scripts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use effhom::complex::Rng;
use effhom::guard::{catch, set_bpl_slack, set_time_budget};
use effhom::linalg::AbelianGroupDescr;
use effhom::loops::loop_space_eh;
use effhom::postnikov::{realize, PostnikovTower};
use effhom::reduction::{check_equivalence_sampled, sample_generators, transfer_from_effective, CheckReport};
use effhom::simplicial::{cartesian_product, disk_pasting, rproj_truncated, sphere, EHObject, Simplex};
use effhom::{em, Error, Result};
use rand::SeedableRng;
use serde_json::{json, Value};

use crate::script::{parse_script, Command, Face, Side, Statement};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_LOCALLY_EFFECTIVE: i32 = 4;
pub const EXIT_RESOURCE: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => EXIT_PARSE,
        Error::Precondition(_) | Error::Contract(_) | Error::Shape(_) => EXIT_PRECONDITION,
        Error::LocallyEffective(..) => EXIT_LOCALLY_EFFECTIVE,
        Error::Diverging(_) | Error::Resource(_) => EXIT_RESOURCE,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse(_) => "parse",
        Error::Precondition(_) => "precondition",
        Error::Contract(_) => "contract",
        Error::Shape(_) => "shape",
        Error::LocallyEffective(..) => "locally-effective",
        Error::Diverging(_) => "diverging",
        Error::Resource(_) => "resource",
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub seed: u64,
    pub json: bool,
    /// Largest degree a query may ask for.
    pub degree_bound: i32,
    /// Perturbation series slack beyond twice the degree.
    pub bpl_cap: Option<usize>,
    pub time_budget: Option<Duration>,
    /// Per-side samples of the smoke test run on every new binding; 0 disables it.
    pub smoke_samples: usize,
    /// Directory against which tower files are resolved.
    pub base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            json: false,
            degree_bound: 12,
            bpl_cap: None,
            time_budget: None,
            smoke_samples: 6,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Outcome of the two-path experiment on an equivalence.
#[derive(Clone, Debug, Default)]
pub struct ProbeReport {
    pub trials: usize,
    pub equal: usize,
    pub mismatches: Vec<String>,
    pub equations: CheckReport,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.equal == self.trials && self.equations.passed()
    }
}

/// For sampled effective generators c in degrees `0..=deg`, compares
/// d(transfer c) with transfer(d c), then runs the reduction equations.
pub fn probe_equivalence(x: &EHObject, deg: i32, trials: usize, rng: &mut Rng) -> Result<ProbeReport> {
    let eff = x.effective();
    let mut rep = ProbeReport::default();
    for c in sample_generators(eff, deg, trials, rng) {
        rep.trials += 1;
        let a = transfer_from_effective(&x.equiv, &c).map(|t| x.chains.diff(&t));
        let b = catch(|| eff.diff(&c)).and_then(|dc| transfer_from_effective(&x.equiv, &dc));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => rep.equal += 1,
            (Ok(_), Ok(_)) => {
                let g = c.terms.first().map(|t| t.1.to_string()).unwrap_or_default();
                rep.mismatches.push(format!("paths differ on {g} (degree {})", c.deg));
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    rep.equations = catch(|| check_equivalence_sampled(&x.equiv, deg, trials, rng))?;
    Ok(rep)
}

pub fn group_json(g: &AbelianGroupDescr) -> Value {
    let torsion: Vec<Value> = g.summands().into_iter().flatten().map(|d| json!(d.to_string().parse::<u64>().ok())).collect();
    json!({ "torsion": torsion, "free_rank": g.free_rank })
}

fn report_json(r: &CheckReport) -> Value {
    let rows: Vec<Value> = r
        .rows
        .iter()
        .map(|(eq, p, f)| json!({ "equation": eq, "passed": p, "failed": f }))
        .collect();
    json!({ "rows": rows, "failures": r.failures })
}

pub struct Session<'a> {
    cfg: Config,
    rng: Rng,
    spaces: BTreeMap<String, EHObject>,
    out: &'a mut dyn Write,
}

impl<'a> Session<'a> {
    pub fn new(cfg: Config, out: &'a mut dyn Write) -> Session<'a> {
        set_bpl_slack(cfg.bpl_cap.unwrap_or(64));
        set_time_budget(cfg.time_budget);
        let rng = Rng::seed_from_u64(cfg.seed);
        Session { cfg, rng, spaces: BTreeMap::new(), out }
    }

    pub fn space(&self, name: &str) -> Result<&EHObject> {
        self.spaces.get(name).ok_or_else(|| Error::Precondition(format!("unknown name `{name}`")))
    }

    /// Bound spaces in name order.
    pub fn spaces(&self) -> impl Iterator<Item = (&String, &EHObject)> {
        self.spaces.iter()
    }

    fn emit(&mut self, text: &str, v: Value) -> Result<()> {
        let r = if self.cfg.json { writeln!(self.out, "{v}") } else { writeln!(self.out, "{text}") };
        r.and_then(|_| self.out.flush()).map_err(|e| Error::Resource(format!("cannot write output: {e}")))
    }

    fn bound(&self, deg: i32) -> Result<()> {
        if deg > self.cfg.degree_bound {
            return Err(Error::Resource(format!("degree {deg} exceeds the degree bound {}", self.cfg.degree_bound)));
        }
        Ok(())
    }

    fn build(&mut self, cmd: &Command) -> Result<EHObject> {
        match cmd {
            Command::Sphere(n) => sphere(*n),
            Command::RProj(k) => rproj_truncated(*k),
            Command::Loop(x) => loop_space_eh(self.space(x)?),
            Command::Attach { space, dim, label, faces } => {
                let x = self.space(space)?;
                let faces = faces
                    .iter()
                    .map(|f| match f {
                        Face::Simplex(s) => s.clone(),
                        Face::Base(k) => Simplex::iterated(x.space.base(), *k),
                    })
                    .collect();
                disk_pasting(x, *dim, label, faces)
            }
            Command::Product(a, b) => cartesian_product(self.space(a)?, self.space(b)?),
            Command::Em { pi, n } => em::em_space(pi, *n),
            Command::Postnikov { file, stage } => {
                let path = self.cfg.base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Precondition(format!("cannot read {}: {e}", path.display())))?;
                let tower = PostnikovTower::parse(&text)?;
                realize(&tower, *stage)
            }
            _ => unreachable!("queries are not bound"),
        }
    }

    fn smoke(&mut self, x: &EHObject) -> Result<()> {
        if self.cfg.smoke_samples == 0 {
            return Ok(());
        }
        let rep = catch(|| check_equivalence_sampled(&x.equiv, 3, self.cfg.smoke_samples, &mut self.rng))?;
        if !rep.passed() {
            return Err(Error::Contract(format!("{} fails its smoke test:\n{rep}", x.name)));
        }
        Ok(())
    }

    pub fn run(&mut self, st: &Statement) -> Result<()> {
        if let Some(name) = &st.bind {
            let mut x = catch(|| self.build(&st.cmd))??;
            self.smoke(&x)?;
            x.name = name.clone();
            self.spaces.insert(name.clone(), x);
            return Ok(());
        }
        match &st.cmd {
            Command::Homology { name, lo, hi } => {
                self.bound(*hi)?;
                let x = self.space(name)?.clone();
                let mut groups = Vec::new();
                for d in *lo..=*hi {
                    let g = if d < 0 { AbelianGroupDescr::zero() } else { catch(|| x.homology(d))?? };
                    groups.push((d, g));
                }
                let text = if lo == hi {
                    groups[0].1.to_string()
                } else {
                    groups.iter().map(|(d, g)| format!("{d}:{g}")).collect::<Vec<_>>().join(" ")
                };
                let gj: Vec<Value> = groups
                    .iter()
                    .map(|(d, g)| {
                        let mut v = group_json(g);
                        v["degree"] = json!(d);
                        v
                    })
                    .collect();
                self.emit(&text, json!({ "command": "homology", "name": name, "groups": gj }))
            }
            Command::Basis { name, side, deg } => {
                self.bound(*deg)?;
                let x = self.space(name)?;
                let c = match side {
                    Side::Effective => x.effective().clone(),
                    Side::Chains => x.chains.clone(),
                };
                let b = if *deg < 0 { Vec::new() } else { catch(|| c.basis(*deg))?? };
                let side_name = match side {
                    Side::Effective => "eff",
                    Side::Chains => "chains",
                };
                let mut text = format!("{name}.{side_name} degree {deg}: {} generator{}", b.len(), if b.len() == 1 { "" } else { "s" });
                for g in &b {
                    text.push_str(&format!("\n  {g}"));
                }
                let list: Vec<String> = b.iter().map(|g| g.to_string()).collect();
                let v = json!({ "command": "basis", "name": name, "side": side_name, "degree": deg, "basis": list });
                self.emit(&text, v)
            }
            Command::Probe { name, deg, trials } => {
                self.bound(*deg)?;
                let x = self.space(name)?.clone();
                let rep = probe_equivalence(&x, *deg, *trials, &mut self.rng)?;
                let mut text = format!(
                    "probe {name} through degree {deg}: {}/{} paths equal, {} equation checks, {} failures",
                    rep.equal,
                    rep.trials,
                    rep.equations.checks(),
                    rep.equations.failure_count()
                );
                for m in rep.mismatches.iter().chain(&rep.equations.failures) {
                    text.push_str(&format!("\n  {m}"));
                }
                let v = json!({
                    "command": "probe", "name": name, "degree": deg,
                    "trials": rep.trials, "equal": rep.equal, "mismatches": rep.mismatches,
                    "equations": report_json(&rep.equations), "passed": rep.passed(),
                });
                self.emit(&text, v)
            }
            Command::Check { name, deg, trials } => {
                self.bound(*deg)?;
                let x = self.space(name)?.clone();
                let rep = catch(|| check_equivalence_sampled(&x.equiv, *deg, *trials, &mut self.rng))?;
                let text = format!("check {name} through degree {deg}:\n{}", rep.to_string().trim_end());
                let v = json!({ "command": "check", "name": name, "degree": deg, "report": report_json(&rep), "passed": rep.passed() });
                self.emit(&text, v)?;
                if !rep.passed() {
                    return Err(Error::Contract(format!("{} of {} checks failed on {name}", rep.failure_count(), rep.checks())));
                }
                Ok(())
            }
            _ => unreachable!("space builders are bound"),
        }
    }
}

/// Parses and runs a script; diagnostics go to `err`. Returns the exit code.
pub fn run_script(src: &str, cfg: &Config, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let json = cfg.json;
    let fail = |out: &mut dyn Write, err: &mut dyn Write, e: &Error, line: Option<usize>| {
        let at = line.map(|l| format!(" (line {l})")).unwrap_or_default();
        let _ = writeln!(err, "error{at}: {e}");
        if json {
            let _ = writeln!(out, "{}", json!({ "error": { "kind": error_kind(e), "message": e.to_string(), "line": line } }));
        }
        exit_code(e)
    };
    let stmts = match parse_script(src) {
        Ok(s) => s,
        Err(e) => return fail(out, err, &e, None),
    };
    let res = {
        let mut s = Session::new(cfg.clone(), &mut *out);
        let mut res = Ok(());
        for st in &stmts {
            if let Err(e) = s.run(st) {
                res = Err((e, st.line));
                break;
            }
        }
        res
    };
    set_time_budget(None);
    match res {
        Ok(()) => EXIT_OK,
        Err((e, line)) => fail(out, err, &e, Some(line)),
    }
}
