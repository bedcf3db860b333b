//! Symbolic generators: term trees naming basis elements.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Tree shapes used by the constructions.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    /// A named cell (`*`, `S3`, `P5`, a disk label).
    Atom(Arc<str>),
    /// An integer tuple; simplices of K(Z,1) and K(Z/d,1) in bar notation.
    Ints(Vec<i64>),
    /// A degenerate simplex: strictly decreasing degeneracy indices over a geometric part.
    Simplex(Vec<u8>, Gen),
    /// A tagged node with ordered children (products, bicone summands, ...).
    Node(&'static str, Vec<Gen>),
    /// A tagged sequence of graded components (tensor words, cobar and bar words).
    Graded(&'static str, Vec<(i32, Gen)>),
    /// A reduced word in a free group: letters with nonzero exponents.
    Word(Vec<(Gen, i32)>),
}

struct Inner {
    hash: u64,
    term: Term,
}

/// A cheaply clonable, hash-cached term tree.
#[derive(Clone)]
pub struct Gen(Arc<Inner>);

impl Gen {
    pub fn new(term: Term) -> Gen {
        let mut h = DefaultHasher::new();
        term.hash(&mut h);
        Gen(Arc::new(Inner { hash: h.finish(), term }))
    }

    pub fn atom(name: &str) -> Gen {
        Gen::new(Term::Atom(Arc::from(name)))
    }

    pub fn ints(v: Vec<i64>) -> Gen {
        Gen::new(Term::Ints(v))
    }

    pub fn node(tag: &'static str, kids: Vec<Gen>) -> Gen {
        Gen::new(Term::Node(tag, kids))
    }

    pub fn graded(tag: &'static str, items: Vec<(i32, Gen)>) -> Gen {
        Gen::new(Term::Graded(tag, items))
    }

    pub fn word(letters: Vec<(Gen, i32)>) -> Gen {
        Gen::new(Term::Word(letters))
    }

    pub fn term(&self) -> &Term {
        &self.0.term
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self.term() {
            Term::Atom(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_node(&self, tag: &str) -> Option<&[Gen]> {
        match self.term() {
            Term::Node(t, k) if *t == tag => Some(k),
            _ => None,
        }
    }

    pub fn as_graded(&self, tag: &str) -> Option<&[(i32, Gen)]> {
        match self.term() {
            Term::Graded(t, k) if *t == tag => Some(k),
            _ => None,
        }
    }

    pub fn as_word(&self) -> Option<&[(Gen, i32)]> {
        match self.term() {
            Term::Word(w) => Some(w),
            _ => None,
        }
    }

    pub fn as_ints(&self) -> Option<&[i64]> {
        match self.term() {
            Term::Ints(v) => Some(v),
            _ => None,
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self.term() {
            Term::Atom(_) | Term::Ints(_) => 1,
            Term::Simplex(_, g) => 1 + g.size(),
            Term::Node(_, k) => 1 + k.iter().map(Gen::size).sum::<usize>(),
            Term::Graded(_, k) => 1 + k.iter().map(|(_, g)| g.size()).sum::<usize>(),
            Term::Word(w) => 1 + w.iter().map(|(g, _)| g.size()).sum::<usize>(),
        }
    }
}

impl PartialEq for Gen {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.term == other.0.term)
    }
}

impl Eq for Gen {}

impl Hash for Gen {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialOrd for Gen {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Gen {
    /// Depth-first lexicographic order on the trees.
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0.term.cmp(&other.0.term)
    }
}

impl fmt::Debug for Gen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Gen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.term() {
            Term::Atom(s) => write!(f, "{s}"),
            Term::Ints(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", s.join("|"))
            }
            Term::Simplex(d, g) => {
                write!(f, "(")?;
                for i in d {
                    write!(f, "s{i} ")?;
                }
                write!(f, "{g})")
            }
            Term::Node(t, k) => {
                write!(f, "<{t}")?;
                for g in k {
                    write!(f, " {g}")?;
                }
                write!(f, ">")
            }
            Term::Graded(t, k) => {
                write!(f, "<{t}")?;
                for (d, g) in k {
                    write!(f, " {d}:{g}")?;
                }
                write!(f, ">")
            }
            Term::Word(w) => {
                write!(f, "{{")?;
                for (i, (g, e)) in w.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{g}^{e}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Tags are interned as static strings; parsing maps text back to them.
pub const TAGS: &[&str] = &[
    "x", "T", "Cob", "Bar", "BcA", "BcB", "BcD", "Disk", "Fx", "Tw", "Em", "Wb",
];

fn tag_of(s: &str) -> Option<&'static str> {
    TAGS.iter().copied().find(|t| *t == s)
}

/// Parses the text produced by `Display`.
pub fn parse_gen(s: &str) -> Result<Gen, String> {
    let toks = tokenize(s)?;
    let mut pos = 0;
    let g = parse_at(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(format!("trailing input after term in `{s}`"));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open(char),
    Close(char),
    Word(String),
    Bar,
    Colon,
    Caret,
}

fn tokenize(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        match c {
            ' ' | '\t' => i += 1,
            '(' | '<' | '[' | '{' => {
                out.push(Tok::Open(c));
                i += 1;
            }
            ')' | '>' | ']' | '}' => {
                out.push(Tok::Close(c));
                i += 1;
            }
            '|' => {
                out.push(Tok::Bar);
                i += 1;
            }
            ':' => {
                out.push(Tok::Colon);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            _ => {
                let st = i;
                while i < cs.len() && !" \t()<>[]{}|:^".contains(cs[i]) {
                    i += 1;
                }
                out.push(Tok::Word(cs[st..i].iter().collect()));
            }
        }
    }
    Ok(out)
}

fn expect(toks: &[Tok], pos: &mut usize, t: Tok) -> Result<(), String> {
    if toks.get(*pos) == Some(&t) {
        *pos += 1;
        Ok(())
    } else {
        Err(format!("expected {t:?}, found {:?}", toks.get(*pos)))
    }
}

fn int_word(toks: &[Tok], pos: &mut usize) -> Result<i64, String> {
    match toks.get(*pos) {
        Some(Tok::Word(w)) => {
            *pos += 1;
            w.parse::<i64>().map_err(|_| format!("expected integer, found `{w}`"))
        }
        other => Err(format!("expected integer, found {other:?}")),
    }
}

fn parse_at(toks: &[Tok], pos: &mut usize) -> Result<Gen, String> {
    match toks.get(*pos) {
        Some(Tok::Word(w)) => {
            *pos += 1;
            Ok(Gen::atom(w))
        }
        Some(Tok::Open('[')) => {
            *pos += 1;
            let mut v = Vec::new();
            if toks.get(*pos) != Some(&Tok::Close(']')) {
                v.push(int_word(toks, pos)?);
                while toks.get(*pos) == Some(&Tok::Bar) {
                    *pos += 1;
                    v.push(int_word(toks, pos)?);
                }
            }
            expect(toks, pos, Tok::Close(']'))?;
            Ok(Gen::ints(v))
        }
        Some(Tok::Open('(')) => {
            *pos += 1;
            let mut degs = Vec::new();
            while let Some(Tok::Word(w)) = toks.get(*pos) {
                let is_deg = w.len() > 1 && w.starts_with('s') && w[1..].chars().all(|c| c.is_ascii_digit());
                let next_is_term = toks.get(*pos + 1).map_or(false, |t| !matches!(t, Tok::Close(_)));
                if is_deg && next_is_term {
                    degs.push(w[1..].parse::<u8>().map_err(|e| e.to_string())?);
                    *pos += 1;
                } else {
                    break;
                }
            }
            let g = parse_at(toks, pos)?;
            expect(toks, pos, Tok::Close(')'))?;
            if degs.is_empty() {
                return Ok(g);
            }
            if !degs.windows(2).all(|w| w[0] > w[1]) {
                return Err("degeneracy indices must be strictly decreasing".into());
            }
            Ok(Gen::new(Term::Simplex(degs, g)))
        }
        Some(Tok::Open('<')) => {
            *pos += 1;
            let tag = match toks.get(*pos) {
                Some(Tok::Word(w)) => tag_of(w).ok_or_else(|| format!("unknown tag `{w}`"))?,
                other => return Err(format!("expected tag, found {other:?}")),
            };
            *pos += 1;
            // Graded when the first child is `d:`.
            let graded = matches!(toks.get(*pos + 1), Some(Tok::Colon));
            if graded {
                let mut items = Vec::new();
                while toks.get(*pos) != Some(&Tok::Close('>')) {
                    let d = int_word(toks, pos)?;
                    expect(toks, pos, Tok::Colon)?;
                    items.push((d as i32, parse_at(toks, pos)?));
                }
                *pos += 1;
                Ok(Gen::graded(tag, items))
            } else {
                let mut kids = Vec::new();
                while toks.get(*pos) != Some(&Tok::Close('>')) {
                    if *pos >= toks.len() {
                        return Err("unterminated node".into());
                    }
                    kids.push(parse_at(toks, pos)?);
                }
                *pos += 1;
                Ok(Gen::node(tag, kids))
            }
        }
        Some(Tok::Open('{')) => {
            *pos += 1;
            let mut letters = Vec::new();
            while toks.get(*pos) != Some(&Tok::Close('}')) {
                if *pos >= toks.len() {
                    return Err("unterminated word".into());
                }
                let g = parse_at(toks, pos)?;
                let e = if toks.get(*pos) == Some(&Tok::Caret) {
                    *pos += 1;
                    int_word(toks, pos)? as i32
                } else {
                    1
                };
                letters.push((g, e));
            }
            *pos += 1;
            Ok(Gen::word(letters))
        }
        other => Err(format!("unexpected token {other:?}")),
    }
}
