//! Script grammar.
//!
//! One statement per line. `name = command args...` binds a space, a bare
//! `command args...` is a query. `#` starts a comment outside brackets.
//! Arguments are separated by whitespace; text inside `()`, `<>`, `[]` or `{}`
//! stays in one argument, so generator terms may contain spaces.

use effhom::gen::parse_gen;
use effhom::linalg::AbelianGroupDescr;
use effhom::simplicial::Simplex;
use effhom::Error;
use num_bigint::BigInt;

/// One face of an attached cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Face {
    Simplex(Simplex),
    /// The k-fold degenerate basepoint.
    Base(usize),
}

/// Which complex of a bound space a basis query reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Effective,
    Chains,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Sphere(usize),
    RProj(usize),
    Loop(String),
    Attach { space: String, dim: usize, label: String, faces: Vec<Face> },
    Product(String, String),
    Em { pi: AbelianGroupDescr, n: usize },
    Postnikov { file: String, stage: usize },
    Homology { name: String, lo: i32, hi: i32 },
    Basis { name: String, side: Side, deg: i32 },
    Probe { name: String, deg: i32, trials: usize },
    Check { name: String, deg: i32, trials: usize },
}

impl Command {
    pub fn builds_space(&self) -> bool {
        !matches!(self, Command::Homology { .. } | Command::Basis { .. } | Command::Probe { .. } | Command::Check { .. })
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            Command::Sphere(_) => "sphere",
            Command::RProj(_) => "rproj",
            Command::Loop(_) => "loop",
            Command::Attach { .. } => "attach",
            Command::Product(..) => "product",
            Command::Em { .. } => "em",
            Command::Postnikov { .. } => "postnikov",
            Command::Homology { .. } => "homology",
            Command::Basis { .. } => "basis",
            Command::Probe { .. } => "probe",
            Command::Check { .. } => "check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub line: usize,
    pub text: String,
    pub bind: Option<String>,
    pub cmd: Command,
}

#[derive(Clone, Debug)]
struct Tok {
    text: String,
    col: usize,
}

fn perr(line: usize, col: usize, msg: impl AsRef<str>) -> Error {
    Error::Parse(format!("line {line}, column {col}: {}", msg.as_ref()))
}

/// Splits a line into bracket-aware tokens with 1-based columns; drops the comment.
fn tokenize(line: usize, src: &str) -> Result<Vec<Tok>, Error> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let mut stack: Vec<(char, usize)> = Vec::new();
    for (i, c) in src.chars().enumerate() {
        let col = i + 1;
        if stack.is_empty() && c == '#' {
            break;
        }
        if stack.is_empty() && c.is_whitespace() {
            if !cur.is_empty() {
                out.push(Tok { text: std::mem::take(&mut cur), col: start });
            }
            continue;
        }
        if cur.is_empty() {
            start = col;
        }
        match c {
            '(' | '<' | '[' | '{' => stack.push((c, col)),
            ')' | '>' | ']' | '}' => {
                let want = match c {
                    ')' => '(',
                    '>' => '<',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((o, _)) if o == want => {}
                    _ => return Err(perr(line, col, format!("unbalanced `{c}`"))),
                }
            }
            _ => {}
        }
        cur.push(c);
    }
    if let Some((c, col)) = stack.last() {
        return Err(perr(line, *col, format!("unclosed `{c}`")));
    }
    if !cur.is_empty() {
        out.push(Tok { text: cur, col: start });
    }
    Ok(out)
}

fn is_name(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Args<'a> {
    line: usize,
    cmd: &'a Tok,
    toks: &'a [Tok],
    pos: usize,
}

impl<'a> Args<'a> {
    fn next(&mut self, what: &str) -> Result<&'a Tok, Error> {
        let t = self.toks.get(self.pos).ok_or_else(|| {
            let col = self.toks.last().map_or(self.cmd.col + self.cmd.text.len(), |t| t.col + t.text.len());
            perr(self.line, col, format!("`{}` expects {what}", self.cmd.text))
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn name(&mut self) -> Result<String, Error> {
        let t = self.next("a space name")?;
        if !is_name(&t.text) {
            return Err(perr(self.line, t.col, format!("`{}` is not a name", t.text)));
        }
        Ok(t.text.clone())
    }

    fn int<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, Error> {
        let t = self.next(what)?;
        t.text.parse().map_err(|_| perr(self.line, t.col, format!("expected {what}, found `{}`", t.text)))
    }

    fn done(&self) -> Result<(), Error> {
        match self.toks.get(self.pos) {
            Some(t) => Err(perr(self.line, t.col, format!("unexpected argument `{}`", t.text))),
            None => Ok(()),
        }
    }
}

fn parse_face(line: usize, t: &Tok) -> Result<Face, Error> {
    if let Some(k) = t.text.strip_prefix('*') {
        if k.is_empty() {
            return Ok(Face::Base(0));
        }
        return k
            .parse()
            .map(Face::Base)
            .map_err(|_| perr(line, t.col, format!("bad basepoint face `{}`", t.text)));
    }
    let g = parse_gen(&t.text).map_err(|e| perr(line, t.col, e))?;
    Ok(Face::Simplex(Simplex::from_gen(&g)))
}

/// `Z`, `Z/d`, comma separated, then an optional `;rank` of extra Z's.
fn parse_group(line: usize, t: &Tok) -> Result<AbelianGroupDescr, Error> {
    let (list, rank) = match t.text.split_once(';') {
        Some((a, b)) => (a, Some(b)),
        None => (t.text.as_str(), None),
    };
    let mut factors = Vec::new();
    let mut free = 0;
    for f in list.split(',').filter(|s| !s.is_empty()) {
        if f == "Z" {
            free += 1;
            continue;
        }
        let d: u64 = f
            .strip_prefix("Z/")
            .and_then(|d| d.parse().ok())
            .filter(|&d| d >= 1)
            .ok_or_else(|| perr(line, t.col, format!("bad group factor `{f}`")))?;
        factors.push(BigInt::from(d));
    }
    if let Some(r) = rank {
        free += r
            .parse::<usize>()
            .map_err(|_| perr(line, t.col, format!("bad rank `{r}`")))?;
    }
    Ok(AbelianGroupDescr::from_factors(factors, free))
}

fn parse_range(line: usize, t: &Tok) -> Result<(i32, i32), Error> {
    let bad = || perr(line, t.col, format!("expected a degree or range `a..b`, found `{}`", t.text));
    match t.text.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            if a > b {
                return Err(perr(line, t.col, "empty degree range"));
            }
            Ok((a, b))
        }
        None => {
            let d = t.text.parse().map_err(|_| bad())?;
            Ok((d, d))
        }
    }
}

fn parse_command(line: usize, toks: &[Tok]) -> Result<Command, Error> {
    let cmd = &toks[0];
    let mut a = Args { line, cmd, toks: &toks[1..], pos: 0 };
    let c = match cmd.text.as_str() {
        "sphere" => Command::Sphere(a.int("a dimension")?),
        "rproj" => Command::RProj(a.int("a bottom dimension")?),
        "loop" => Command::Loop(a.name()?),
        "attach" => {
            let space = a.name()?;
            let dim: usize = a.int("a cell dimension")?;
            let label = a.name()?;
            let mut faces = Vec::new();
            while a.pos < a.toks.len() {
                faces.push(parse_face(line, a.next("a face")?)?);
            }
            if faces.len() != dim + 1 {
                let col = a.toks.last().map_or(cmd.col, |t| t.col);
                return Err(perr(line, col, format!("a {dim}-cell needs {} faces, got {}", dim + 1, faces.len())));
            }
            Command::Attach { space, dim, label, faces }
        }
        "product" => Command::Product(a.name()?, a.name()?),
        "em" => {
            let t = a.next("a group")?;
            let pi = parse_group(line, t)?;
            Command::Em { pi, n: a.int("a degree")? }
        }
        "postnikov" => {
            let file = a.next("a tower file")?.text.clone();
            Command::Postnikov { file, stage: a.int("a stage")? }
        }
        "homology" => {
            let name = a.name()?;
            let (lo, hi) = parse_range(line, a.next("a degree")?)?;
            Command::Homology { name, lo, hi }
        }
        "basis" => {
            let t = a.next("a space name")?;
            let (name, side) = match t.text.split_once('.') {
                None => (t.text.as_str(), Side::Effective),
                Some((n, "eff")) => (n, Side::Effective),
                Some((n, "chains")) => (n, Side::Chains),
                Some((_, s)) => return Err(perr(line, t.col, format!("unknown side `{s}`, expected `eff` or `chains`"))),
            };
            if !is_name(name) {
                return Err(perr(line, t.col, format!("`{name}` is not a name")));
            }
            Command::Basis { name: name.to_string(), side, deg: a.int("a degree")? }
        }
        "probe" => Command::Probe { name: a.name()?, deg: a.int("a degree")?, trials: a.int("a trial count")? },
        "check" => Command::Check { name: a.name()?, deg: a.int("a degree")?, trials: a.int("a trial count")? },
        other => return Err(perr(line, cmd.col, format!("unknown command `{other}`"))),
    };
    a.done()?;
    Ok(c)
}

/// Parses a whole script; the first malformed line aborts.
pub fn parse_script(src: &str) -> Result<Vec<Statement>, Error> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let toks = tokenize(line, raw)?;
        if toks.is_empty() {
            continue;
        }
        let text = raw.split('#').next().unwrap_or("").trim().to_string();
        let (bind, rest) = if toks.len() >= 2 && toks[1].text == "=" {
            if !is_name(&toks[0].text) {
                return Err(perr(line, toks[0].col, format!("`{}` is not a name", toks[0].text)));
            }
            if toks.len() == 2 {
                return Err(perr(line, toks[1].col + 1, "missing command after `=`"));
            }
            (Some(toks[0].text.clone()), &toks[2..])
        } else {
            (None, &toks[..])
        };
        let cmd = parse_command(line, rest)?;
        match (&bind, cmd.builds_space()) {
            (Some(_), false) => {
                return Err(perr(line, rest[0].col, format!("`{}` is a query and cannot be bound", rest[0].text)))
            }
            (None, true) => {
                return Err(perr(line, rest[0].col, format!("`{}` builds a space; write `name = {} ...`", rest[0].text, rest[0].text)))
            }
            _ => {}
        }
        out.push(Statement { line, text, bind, cmd });
    }
    Ok(out)
}
