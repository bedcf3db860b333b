//! Postnikov towers: groups in canonical form, cohomology of effective complexes
//! with coefficients, and realization of a tower by iterated twisted products with
//! Eilenberg–MacLane fibers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::cmbn::Cmbn;
use crate::complex::{Complex, Memo};
use crate::em::{cochain_tau, cocycle_simplex, cyclic_factors, em_cyclic, em_space, group_name, twisted_product, Cyclic, Twisting};
use crate::error::{Error, Result};
use crate::gen::{parse_gen, Gen};
use crate::guard::catch;
use crate::linalg::{homology_generators, IntMatrix};
pub use crate::linalg::{canonical_form, AbelianGroupDescr};
use crate::simplicial::{compose_degs, faces, unpair, EHObject, Simplex, SimplicialSet};

/// A cochain on an effective complex with values in ⊕ Z/d_i (d_i = 0 for Z).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cochain {
    pub deg: i32,
    pub pi: Vec<Cyclic>,
    pub values: BTreeMap<Gen, Vec<i64>>,
}

impl Cochain {
    pub fn zero(deg: i32, pi: Vec<Cyclic>) -> Cochain {
        Cochain { deg, pi, values: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    fn norm(&self, v: Vec<i64>) -> Vec<i64> {
        v.into_iter().zip(&self.pi).map(|(a, c)| c.norm(a)).collect()
    }

    /// Sets the value on one generator (normalized, zero values dropped).
    pub fn set(&mut self, g: Gen, v: Vec<i64>) {
        let v = self.norm(v);
        if v.iter().all(|&a| a == 0) {
            self.values.remove(&g);
        } else {
            self.values.insert(g, v);
        }
    }

    pub fn eval(&self, c: &Cmbn) -> Vec<i64> {
        let mut acc = vec![0i64; self.pi.len()];
        for (u, g) in &c.terms {
            if let Some(v) = self.values.get(g) {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += u * b;
                }
            }
        }
        self.norm(acc)
    }

    /// δk = 0 on every generator of the next degree.
    pub fn is_cocycle(&self, c: &Complex) -> Result<bool> {
        let basis = c.basis(self.deg + 1)?;
        catch(|| basis.iter().all(|g| self.eval(&c.d(self.deg + 1, g)).iter().all(|&a| a == 0)))
    }

    /// One factor of the coefficient group.
    pub fn component(&self, i: usize) -> Cochain {
        let mut out = Cochain::zero(self.deg, vec![self.pi[i]]);
        for (g, v) in &self.values {
            out.set(g.clone(), vec![v[i]]);
        }
        out
    }
}

impl fmt::Display for Cochain {
    /// `(gen,c)` pairs; multi-factor values as `c1:c2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.values.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .values
            .iter()
            .map(|(g, v)| format!("({g},{})", v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(":")))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

fn block(rows: usize, cols: usize, parts: &[(usize, usize, &IntMatrix, i64)]) -> IntMatrix {
    let mut ents: Vec<(usize, usize, BigInt)> = Vec::new();
    for (r0, c0, m, s) in parts {
        for (r, c, v) in m.nonzeros() {
            ents.push((r0 + r, c0 + c, v * BigInt::from(*s)));
        }
    }
    IntMatrix::from_entries(rows, cols, ents)
}

/// H^m(X; π) from the effective complex, with a representing cocycle for each
/// cyclic summand found (order 0 meaning Z).
pub fn cohomology_group(x: &EHObject, m: i32, pi: &AbelianGroupDescr) -> Result<(AbelianGroupDescr, Vec<(BigInt, Cochain)>)> {
    let c = x.effective();
    let factors = cyclic_factors(pi);
    let basis_m = c.basis(m)?;
    let mut orders = Vec::new();
    let mut gens = Vec::new();
    for (i, cy) in factors.iter().enumerate() {
        // δ^j = ∂_{j+1}^T
        let delta = |j: i32| -> Result<IntMatrix> { Ok(c.boundary_matrix(j + 1)?.transpose()) };
        let (dm1, dm) = (delta(m - 1)?, delta(m)?);
        let found = if cy.0 == 0 {
            homology_generators(&dm1, &dm)?
        } else {
            // Cochains tensored with the resolution Z --d--> Z of Z/d.
            let dp1 = delta(m + 1)?;
            let (a, b, e) = (dm1.cols(), dm.cols(), dm.rows());
            let f = dp1.rows();
            let id_m = IntMatrix::identity(b);
            let id_p = IntMatrix::identity(e);
            let d = cy.0;
            let d_in = block(b + e, a + b, &[(0, 0, &dm1, 1), (0, a, &id_m, d), (b, a, &dm, -1)]);
            let d_out = block(e + f, b + e, &[(0, 0, &dm, 1), (0, b, &id_p, d), (e, b, &dp1, -1)]);
            homology_generators(&d_in, &d_out)?
        };
        for (order, v) in found {
            let mut k = Cochain::zero(m, factors.clone());
            for (g, a) in basis_m.iter().zip(&v) {
                let a = if cy.0 == 0 { a.clone() } else { a.mod_floor(&BigInt::from(cy.0)) };
                let mut val = vec![0i64; factors.len()];
                val[i] = a.to_i64().ok_or_else(|| Error::Resource("cocycle coefficient overflow".into()))?;
                k.set(g.clone(), val);
            }
            orders.push(order.clone());
            gens.push((order, k));
        }
    }
    let free = orders.iter().filter(|o| o.is_zero()).count();
    let group = AbelianGroupDescr::from_factors(orders.into_iter().filter(|o| !o.is_zero()), free);
    Ok((group, gens))
}

/// A reference to an effective generator in a tower document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GenRef {
    /// Position in the basis of the effective complex.
    Index(usize),
    Gen(Gen),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub n: usize,
    pub pi: AbelianGroupDescr,
    pub k: Vec<(GenRef, Vec<i64>)>,
}

/// Stages n = 2, 3, ... with π_n and k_n (k_2 absent).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PostnikovTower {
    pub stages: Vec<Stage>,
}

fn perr(line: usize, col: usize, msg: &str) -> Error {
    Error::Parse(format!("line {line}, column {col}: {msg}"))
}

fn parse_group(text: &str, line: usize, col: usize) -> Result<AbelianGroupDescr> {
    let t = text.trim_start_matches('<').trim_end_matches('>');
    let (tors, rank) = t.split_once(';').unwrap_or((t, "0"));
    let mut factors = Vec::new();
    for d in tors.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v: u64 = d.parse().map_err(|_| perr(line, col, &format!("bad torsion coefficient `{d}`")))?;
        factors.push(BigInt::from(v));
    }
    let rank: usize = if rank.trim().is_empty() {
        0
    } else {
        rank.trim().parse().map_err(|_| perr(line, col, &format!("bad rank `{rank}`")))?
    };
    Ok(AbelianGroupDescr::from_factors(factors, rank))
}

fn parse_pairs(text: &str, line: usize, col: usize) -> Result<Vec<(GenRef, Vec<i64>)>> {
    let t = text.trim();
    if t.is_empty() || t == "0" {
        return Ok(Vec::new());
    }
    let chars: Vec<char> = t.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        if chars[i] != '(' {
            return Err(perr(line, col + i, "expected `(`"));
        }
        let start = i + 1;
        let mut depth = 0i32;
        let mut comma = None;
        let mut end = None;
        for (j, &ch) in chars.iter().enumerate().skip(start) {
            match ch {
                '(' | '<' | '[' | '{' => depth += 1,
                ')' if depth == 0 => {
                    end = Some(j);
                    break;
                }
                ')' | '>' | ']' | '}' => depth -= 1,
                ',' if depth == 0 => comma = Some(j),
                _ => {}
            }
        }
        let end = end.ok_or_else(|| perr(line, col + i, "unclosed `(`"))?;
        let comma = comma.ok_or_else(|| perr(line, col + i, "expected `(generator,coefficient)`"))?;
        let g: String = chars[start..comma].iter().collect();
        let c: String = chars[comma + 1..end].iter().collect();
        let g = g.trim();
        let gref = match g.strip_prefix('#') {
            Some(num) => GenRef::Index(num.parse().map_err(|_| perr(line, col + start, "bad generator index"))?),
            None => GenRef::Gen(parse_gen(g).map_err(|e| perr(line, col + start, &e))?),
        };
        let mut vals = Vec::new();
        for part in c.split(':') {
            vals.push(part.trim().parse::<i64>().map_err(|_| perr(line, col + comma + 1, "bad coefficient"))?);
        }
        out.push((gref, vals));
        i = end + 1;
    }
    Ok(out)
}

impl PostnikovTower {
    /// One stage per line: `stage <n> pi=<d1,d2,...;rank> k=<(generator,coeff) pairs>`.
    /// Generators are written as in the effective complex or as `#i` (basis position).
    pub fn parse(text: &str) -> Result<PostnikovTower> {
        let mut stages: Vec<Stage> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = strip_comment(raw);
            let body = body.trim();
            if body.is_empty() {
                continue;
            }
            let col0 = raw.find(body).unwrap_or(0) + 1;
            let rest = body
                .strip_prefix("stage")
                .ok_or_else(|| perr(line, col0, "expected `stage`"))?
                .trim_start();
            let (num, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            let n: usize = num.parse().map_err(|_| perr(line, col0 + 6, &format!("bad stage number `{num}`")))?;
            let rest = rest.trim_start();
            let pi_text = rest.strip_prefix("pi=").ok_or_else(|| perr(line, col0, "expected `pi=`"))?;
            let (pi_text, rest) = pi_text.split_once(char::is_whitespace).unwrap_or((pi_text, ""));
            let pi = parse_group(pi_text, line, col0)?;
            let rest = rest.trim();
            let k = if rest.is_empty() {
                Vec::new()
            } else {
                let kt = rest.strip_prefix("k=").ok_or_else(|| perr(line, col0, "expected `k=`"))?;
                let kcol = raw.find("k=").map_or(col0, |p| p + 3);
                parse_pairs(kt, line, kcol)?
            };
            let expect = stages.last().map_or(2, |s| s.n + 1);
            if n != expect {
                return Err(perr(line, col0, &format!("expected stage {expect}, found {n}")));
            }
            if n == 2 && !k.is_empty() {
                return Err(perr(line, col0, "stage 2 has no k-invariant"));
            }
            stages.push(Stage { n, pi, k });
        }
        Ok(PostnikovTower { stages })
    }

    pub fn stage(&self, n: usize) -> Option<&Stage> {
        self.stages.iter().find(|s| s.n == n)
    }
}

/// Drops a trailing `# comment` but keeps `(#i,...)` references.
fn strip_comment(raw: &str) -> String {
    let mut depth = 0i32;
    for (i, ch) in raw.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '#' if depth == 0 => return raw[..i].to_string(),
            _ => {}
        }
    }
    raw.to_string()
}

impl fmt::Display for PostnikovTower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            let tors: Vec<String> = s.pi.torsion.iter().map(|d| d.to_string()).collect();
            write!(f, "stage {} pi={};{}", s.n, tors.join(","), s.pi.free_rank)?;
            if !s.k.is_empty() {
                let parts: Vec<String> = s
                    .k
                    .iter()
                    .map(|(g, v)| {
                        let gs = match g {
                            GenRef::Index(i) => format!("#{i}"),
                            GenRef::Gen(g) => g.to_string(),
                        };
                        format!("({gs},{})", v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(":"))
                    })
                    .collect();
                write!(f, " k={}", parts.join(" "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// The k-invariant of a stage as a cochain on the effective complex of `base`.
pub fn resolve_cochain(base: &EHObject, deg: i32, pi: &AbelianGroupDescr, k: &[(GenRef, Vec<i64>)]) -> Result<Cochain> {
    let factors = cyclic_factors(pi);
    let c = base.effective();
    let basis = c.basis(deg)?;
    let mut out = Cochain::zero(deg, factors.clone());
    for (g, v) in k {
        let gen = match g {
            GenRef::Index(i) => basis
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::Precondition(format!("degree {deg} of {} has no generator #{i}", c.name())))?,
            GenRef::Gen(g) => {
                if !basis.contains(g) {
                    return Err(Error::Precondition(format!("{g} is not a degree {deg} generator of {}", c.name())));
                }
                g.clone()
            }
        };
        if v.len() != factors.len() {
            return Err(Error::Precondition(format!(
                "coefficient of {gen} has {} components, {} has {}",
                v.len(),
                group_name(pi),
                factors.len()
            )));
        }
        let mut cur = out.values.get(&gen).cloned().unwrap_or_else(|| vec![0; factors.len()]);
        for (a, b) in cur.iter_mut().zip(v) {
            *a += b;
        }
        out.set(gen, cur);
    }
    Ok(out)
}

/// The component of a simplex of a stage built over `base` lying in `base`.
fn project(levels: usize, s: &Simplex) -> Simplex {
    let mut s = s.clone();
    for _ in 0..levels {
        let (_, y) = unpair(&s.geo);
        let ys = Simplex::from_gen(y);
        s = Simplex { degs: compose_degs(&s.degs, &ys.degs), geo: ys.geo };
    }
    s
}

/// The twisting function B_m → K(π,n)_{m−1} classifying an (n+1)-cocycle on the
/// effective complex of `base`, read on simplices of a space lying `levels`
/// twisted products above `base`.
pub fn cocycle_twisting(base: &EHObject, k: &Cochain, n: usize, levels: usize) -> Twisting {
    assert_eq!(k.pi.len(), 1, "one coefficient factor at a time");
    let pi = k.pi[0];
    let space = base.space.clone();
    let (gl, fr) = (base.equiv.left.g.clone(), base.equiv.right.f.clone());
    let k = k.clone();
    let values: Arc<Memo<Gen, i64>> = Arc::new(Memo::new());
    let eval = move |sig: &Gen| -> i64 {
        values.get_or(sig, || {
            let c = fr.apply(&gl.at(n as i32 + 1, sig));
            k.eval(&c)[0]
        })
    };
    let eval = Arc::new(eval);
    Twisting(Arc::new(move |m: usize, b: &Gen| {
        let bb = project(levels, &Simplex::nondeg(b.clone()));
        let sp: &dyn SimplicialSet = &*space;
        let ev = eval.clone();
        let kb = move |idx: &[usize]| -> i64 {
            if idx.len() != n + 2 || idx.windows(2).any(|w| w[0] >= w[1]) {
                return 0;
            }
            let drop: Vec<usize> = (0..=m).rev().filter(|i| !idx.contains(i)).collect();
            let f = faces(sp, &drop, m, &bb);
            if f.is_degenerate() {
                0
            } else {
                ev(&f.geo)
            }
        };
        let t = cochain_tau(&kb);
        cocycle_simplex(pi, n, m - 1, &t)
    }))
}

/// Realizes the tower through stage `top`: X_2 = K(π_2, 2), then
/// X_n = K(π_n, n) ×_τ X_{n−1} with τ classifying k_n, one cyclic factor at a time.
pub fn realize(tower: &PostnikovTower, top: usize) -> Result<EHObject> {
    let s2 = tower.stage(2).ok_or_else(|| Error::Precondition("the tower has no stage 2".into()))?;
    let mut cur = em_space(&s2.pi, 2)?;
    cur.name = "X2".into();
    for n in 3..=top {
        let st = tower.stage(n).ok_or_else(|| Error::Precondition(format!("the tower is not defined through stage {top}")))?;
        let k = resolve_cochain(&cur, n as i32 + 1, &st.pi, &st.k)?;
        if !k.is_cocycle(cur.effective())? {
            return Err(Error::Precondition(format!("k_{n} = {k} is not a cocycle on X{}", n - 1)));
        }
        let base = cur.clone();
        let mut e = cur;
        for (i, cy) in cyclic_factors(&st.pi).into_iter().enumerate() {
            let fiber = em_cyclic(cy, n)?;
            let tau = cocycle_twisting(&base, &k.component(i), n, i);
            e = twisted_product(&fiber, &e, tau, &format!("X{n}"))?;
        }
        e.name = format!("X{n}");
        cur = e;
    }
    Ok(cur)
}
