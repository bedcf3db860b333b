//! Simplicial sets given by face operators on nondegenerate simplices, their
//! normalized chains, and the basic spaces.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng as _;

use crate::cmbn::{Acc, Cmbn};
use crate::complex::{tensor_product, with_cells, Complex, Memo, Morphism, Rng, CC};
use crate::error::{Error, Result};
use crate::gen::{Gen, Term};
use crate::guard::fail;
use crate::reduction::{bpl, compose_equivalences, tensor_reduction, Equivalence, Reduction};

/// `s_{j1} ... s_{jk} geo` with j1 > ... > jk; `geo` nondegenerate.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct Simplex {
    pub degs: Vec<u8>,
    pub geo: Gen,
}

/// Inserts `s_i` in front of the normalized list `lst`.
pub fn degen_list(i: u8, lst: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(lst.len() + 1);
    for (idx, &j) in lst.iter().enumerate() {
        if i > j {
            out.push(i);
            out.extend_from_slice(&lst[idx..]);
            return out;
        }
        out.push(j + 1);
    }
    out.push(i);
    out
}

/// `outer ∘ inner` for normalized lists (outer applied last).
pub fn compose_degs(outer: &[u8], inner: &[u8]) -> Vec<u8> {
    let mut r = inner.to_vec();
    for &j in outer.iter().rev() {
        r = degen_list(j, &r);
    }
    r
}

/// Removes `s_a` (which must occur) so that `s_J = s_a s_{J'}`.
pub fn peel_deg(lst: &[u8], a: u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(lst.len());
    let mut found = false;
    for &j in lst {
        if j == a && !found {
            found = true;
        } else if !found {
            out.push(j - 1);
        } else {
            out.push(j);
        }
    }
    debug_assert!(found);
    out
}

pub fn mask(degs: &[u8]) -> u64 {
    degs.iter().fold(0u64, |m, &j| m | (1u64 << j))
}

impl Simplex {
    pub fn nondeg(geo: Gen) -> Simplex {
        Simplex { degs: Vec::new(), geo }
    }

    pub fn new(degs: Vec<u8>, geo: Gen) -> Simplex {
        debug_assert!(degs.windows(2).all(|w| w[0] > w[1]));
        Simplex { degs, geo }
    }

    /// Iterated degeneracy `s_{k-1} ... s_0 geo`.
    pub fn iterated(geo: Gen, k: usize) -> Simplex {
        Simplex { degs: (0..k as u8).rev().collect(), geo }
    }

    pub fn to_gen(&self) -> Gen {
        if self.degs.is_empty() {
            self.geo.clone()
        } else {
            Gen::new(Term::Simplex(self.degs.clone(), self.geo.clone()))
        }
    }

    pub fn from_gen(g: &Gen) -> Simplex {
        match g.term() {
            Term::Simplex(d, geo) => Simplex { degs: d.clone(), geo: geo.clone() },
            _ => Simplex::nondeg(g.clone()),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degs.is_empty()
    }

    pub fn degen(&self, i: u8) -> Simplex {
        Simplex { degs: degen_list(i, &self.degs), geo: self.geo.clone() }
    }

    pub fn degset(&self) -> u64 {
        mask(&self.degs)
    }
}

impl std::fmt::Display for Simplex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for d in &self.degs {
            write!(f, "s{d} ")?;
        }
        write!(f, "{}", self.geo)
    }
}

/// Parses `s3 s1 g`.
pub fn parse_simplex(s: &str) -> std::result::Result<Simplex, String> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    let Some((last, front)) = toks.split_last() else {
        return Err("empty simplex".into());
    };
    let mut degs = Vec::new();
    for t in front {
        let k = t
            .strip_prefix('s')
            .and_then(|r| r.parse::<u8>().ok())
            .ok_or_else(|| format!("bad degeneracy `{t}`"))?;
        degs.push(k);
    }
    if !degs.windows(2).all(|w| w[0] > w[1]) {
        return Err("degeneracy indices must be strictly decreasing".into());
    }
    let geo = crate::gen::parse_gen(last)?;
    Ok(Simplex::new(degs, geo))
}

/// A locally effective simplicial set.
pub trait SimplicialSet: Send + Sync {
    fn name(&self) -> String;

    /// The unique vertex of a reduced set (or a chosen one).
    fn base(&self) -> Gen;

    /// `∂_i` of a nondegenerate `n`-simplex, normalized.
    fn face_geo(&self, i: usize, n: usize, g: &Gen) -> Simplex;

    /// Nondegenerate simplices of dimension `n`, when finitely enumerable.
    fn basis(&self, n: usize) -> Option<Vec<Gen>>;

    fn contains(&self, n: usize, g: &Gen) -> bool;

    /// A random nondegenerate `n`-simplex reachable from the constructors.
    fn sample(&self, n: usize, rng: &mut Rng) -> Option<Gen>;

    /// Number of vertices is one.
    fn reduced(&self) -> bool {
        self.basis(0).map_or(false, |b| b.len() == 1)
    }

    /// No nondegenerate simplices in dimensions `1..=k`.
    fn k_reduced(&self, k: usize) -> bool {
        self.reduced() && (1..=k).all(|n| self.basis(n).map_or(false, |b| b.is_empty()))
    }
}

pub type SS = Arc<dyn SimplicialSet>;

/// `∂_i` of an arbitrary `n`-simplex through the simplicial identities.
pub fn face(x: &dyn SimplicialSet, i: usize, n: usize, s: &Simplex) -> Simplex {
    if i > n {
        fail(Error::Precondition(format!("face index {i} out of range for dimension {n}")));
    }
    let mut i = i as i64;
    let mut out: Vec<u8> = Vec::new();
    for (idx, &j) in s.degs.iter().enumerate() {
        let j = j as i64;
        if i < j {
            out.push((j - 1) as u8);
            continue;
        }
        if i == j || i == j + 1 {
            return Simplex { degs: compose_degs(&out, &s.degs[idx + 1..]), geo: s.geo.clone() };
        }
        out.push(j as u8);
        i -= 1;
    }
    let m = n - s.degs.len();
    let f = x.face_geo(i as usize, m, &s.geo);
    Simplex { degs: compose_degs(&out, &f.degs), geo: f.geo }
}

/// Checked variant of [`face`].
pub fn face_checked(x: &dyn SimplicialSet, i: usize, n: usize, s: &Simplex) -> Result<Simplex> {
    if i > n {
        return Err(Error::Precondition(format!("face index {i} out of range for dimension {n}")));
    }
    crate::guard::catch(|| face(x, i, n, s))
}

/// Applies faces in the given order.
pub fn faces(x: &dyn SimplicialSet, idx: &[usize], n: usize, s: &Simplex) -> Simplex {
    let mut s = s.clone();
    let mut n = n;
    for &i in idx {
        s = face(x, i, n, &s);
        n -= 1;
    }
    s
}

/// Normalized chains: nondegenerate simplices, d = Σ (−1)^i ∂_i.
pub fn normalized_chains(x: &SS) -> CC {
    let (x1, x2, x3, x4) = (x.clone(), x.clone(), x.clone(), x.clone());
    Complex::builder(format!("C*{}", x.name()), move |n, g| {
        let n = n as usize;
        let mut acc = Acc::new(n as i32 - 1);
        for i in 0..=n {
            let f = x1.face_geo(i, n, g);
            if !f.is_degenerate() {
                acc.push(if i % 2 == 0 { 1 } else { -1 }, f.geo);
            }
        }
        acc.finish()
    })
    .basis(move |n| x2.basis(n as usize))
    .member(move |n, g| x3.contains(n as usize, g))
    .sampler(move |n, rng| x4.sample(n as usize, rng))
    .base(x.base())
    .build()
}

/// A space with an effective homology.
#[derive(Clone)]
pub struct EHObject {
    pub name: String,
    pub space: SS,
    pub chains: CC,
    pub equiv: Equivalence,
}

impl EHObject {
    pub fn new(name: impl Into<String>, space: SS, chains: CC, equiv: Equivalence) -> Result<EHObject> {
        if equiv.lbottom().id() != chains.id() {
            return Err(Error::Contract("equivalence does not start from the chains".into()));
        }
        Ok(EHObject { name: name.into(), space, chains, equiv })
    }

    /// Finite-type spaces: the chains are already effective.
    pub fn effective_space(name: impl Into<String>, space: SS) -> EHObject {
        let chains = normalized_chains(&space);
        let equiv = Equivalence::identity(&chains);
        EHObject { name: name.into(), space, chains, equiv }
    }

    pub fn effective(&self) -> &CC {
        self.equiv.rbottom()
    }

    pub fn homology(&self, n: i32) -> Result<crate::linalg::AbelianGroupDescr> {
        crate::complex::homology(self.effective(), n)
    }
}

pub const BASE: &str = "*";

fn star() -> Gen {
    Gen::atom(BASE)
}

/// Sⁿ with one vertex and one n-simplex.
pub struct Sphere {
    n: usize,
    cell: Gen,
}

impl SimplicialSet for Sphere {
    fn name(&self) -> String {
        format!("S{}", self.n)
    }
    fn base(&self) -> Gen {
        star()
    }
    fn face_geo(&self, _i: usize, n: usize, g: &Gen) -> Simplex {
        if n != self.n || *g != self.cell {
            fail(Error::Precondition(format!("{g} is not a nondegenerate {n}-simplex of S{}", self.n)));
        }
        Simplex::iterated(star(), n - 1)
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        Some(match n {
            0 => vec![star()],
            k if k == self.n => vec![self.cell.clone()],
            _ => vec![],
        })
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        (n == 0 && g.as_atom() == Some(BASE)) || (n == self.n && *g == self.cell)
    }
    fn sample(&self, n: usize, _rng: &mut Rng) -> Option<Gen> {
        self.basis(n).and_then(|b| b.first().cloned())
    }
}

pub fn sphere_space(n: usize) -> Result<SS> {
    if n < 1 {
        return Err(Error::Precondition("sphere dimension must be at least 1".into()));
    }
    Ok(Arc::new(Sphere { n, cell: Gen::atom(&format!("S{n}")) }))
}

pub fn sphere(n: usize) -> Result<EHObject> {
    Ok(EHObject::effective_space(format!("S{n}"), sphere_space(n)?))
}

/// P∞(R)/P^{k−1}(R): vertex plus one simplex `P<d>` in each dimension d ≥ k.
pub struct RProj {
    k: usize,
}

impl RProj {
    fn cell(&self, d: usize) -> Simplex {
        if d < self.k {
            Simplex::iterated(star(), d)
        } else {
            Simplex::nondeg(Gen::atom(&format!("P{d}")))
        }
    }

    fn dim_of(g: &Gen) -> Option<usize> {
        g.as_atom()?.strip_prefix('P')?.parse().ok()
    }
}

impl SimplicialSet for RProj {
    fn name(&self) -> String {
        format!("P{}", self.k)
    }
    fn base(&self) -> Gen {
        star()
    }
    fn face_geo(&self, i: usize, n: usize, g: &Gen) -> Simplex {
        if RProj::dim_of(g) != Some(n) || n < self.k {
            fail(Error::Precondition(format!("{g} is not a nondegenerate {n}-simplex of {}", self.name())));
        }
        if i == 0 || i == n {
            return self.cell(n - 1);
        }
        self.cell(n - 2).degen(i as u8 - 1)
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        Some(if n == 0 {
            vec![star()]
        } else if n >= self.k {
            vec![Gen::atom(&format!("P{n}"))]
        } else {
            vec![]
        })
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        (n == 0 && g.as_atom() == Some(BASE)) || (n >= self.k && RProj::dim_of(g) == Some(n))
    }
    fn sample(&self, n: usize, _rng: &mut Rng) -> Option<Gen> {
        self.basis(n).and_then(|b| b.first().cloned())
    }
}

pub fn rproj_space(k: usize) -> Result<SS> {
    if k < 1 {
        return Err(Error::Precondition("truncation index must be at least 1".into()));
    }
    Ok(Arc::new(RProj { k }))
}

pub fn rproj_truncated(k: usize) -> Result<EHObject> {
    Ok(EHObject::effective_space(format!("P{k}"), rproj_space(k)?))
}

/// `X` with one extra nondegenerate simplex attached along `faces`.
pub struct Pasted {
    inner: SS,
    n: usize,
    cell: Gen,
    faces: Vec<Simplex>,
}

impl SimplicialSet for Pasted {
    fn name(&self) -> String {
        format!("{}+{}", self.inner.name(), self.cell)
    }
    fn base(&self) -> Gen {
        self.inner.base()
    }
    fn face_geo(&self, i: usize, n: usize, g: &Gen) -> Simplex {
        if n == self.n && *g == self.cell {
            return self.faces[i].clone();
        }
        self.inner.face_geo(i, n, g)
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        let mut b = self.inner.basis(n)?;
        if n == self.n {
            b.push(self.cell.clone());
        }
        Some(b)
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        (n == self.n && *g == self.cell) || self.inner.contains(n, g)
    }
    fn sample(&self, n: usize, rng: &mut Rng) -> Option<Gen> {
        if n == self.n && rng.gen_bool(0.3) {
            return Some(self.cell.clone());
        }
        self.inner.sample(n, rng).or_else(|| (n == self.n).then(|| self.cell.clone()))
    }
}

/// Checks that `faces` define a simplicial map ∂Δⁿ → X; returns the failing pairs.
pub fn incompatible_faces(x: &dyn SimplicialSet, n: usize, faces: &[Simplex]) -> Result<Vec<(usize, usize)>> {
    let mut bad = Vec::new();
    for j in 0..=n {
        for i in 0..j {
            let l = face_checked(x, i, n - 1, &faces[j])?;
            let r = face_checked(x, j - 1, n - 1, &faces[i])?;
            if l != r {
                bad.push((i, j));
            }
        }
    }
    Ok(bad)
}

/// Attaches an n-cell; the effective complex gains one generator with
/// boundary `f_r g_l (∂ cell)`.
pub fn disk_pasting(x: &EHObject, n: usize, name: &str, faces: Vec<Simplex>) -> Result<EHObject> {
    if n < 1 {
        return Err(Error::Precondition("cells are attached in dimension at least 1".into()));
    }
    if faces.len() != n + 1 {
        return Err(Error::Precondition(format!("an {n}-cell needs {} faces, got {}", n + 1, faces.len())));
    }
    let cell = Gen::atom(name);
    if x.space.contains(n, &cell) {
        return Err(Error::Precondition(format!("{name} already names a simplex")));
    }
    for (i, s) in faces.iter().enumerate() {
        let ok = n - 1 >= s.degs.len() && x.space.contains(n - 1 - s.degs.len(), &s.geo);
        if !ok {
            return Err(Error::Precondition(format!("face {i} ({s}) is not a simplex of {}", x.name)));
        }
    }
    let bad = incompatible_faces(&*x.space, n, &faces)?;
    if !bad.is_empty() {
        let list: Vec<String> = bad.iter().map(|(i, j)| format!("({i},{j})")).collect();
        return Err(Error::Precondition(format!("incompatible faces at {}", list.join(" "))));
    }
    let mut boundary = Acc::new(n as i32 - 1);
    for (i, s) in faces.iter().enumerate() {
        if !s.is_degenerate() {
            boundary.push(if i % 2 == 0 { 1 } else { -1 }, s.geo.clone());
        }
    }
    let boundary = boundary.finish();
    let space: SS = Arc::new(Pasted { inner: x.space.clone(), n, cell: cell.clone(), faces });
    let chains = normalized_chains(&space);

    let left = &x.equiv.left;
    let right = &x.equiv.right;
    let dhat = Gen::node("Disk", vec![cell.clone()]);
    let nn = n as i32;
    let t0 = with_cells(x.equiv.top(), vec![(nn, dhat.clone(), Cmbn::zero(nn - 1))]);
    let e0 = with_cells(x.effective(), vec![(nn, dhat.clone(), Cmbn::zero(nn - 1))]);
    let rho0 = extend_reduction(right, &t0, &e0, &dhat, nn, &dhat);
    let gl = left.g.clone();
    let gb = gl.apply(&boundary);
    let dh = dhat.clone();
    let delta = Morphism::cheap(&t0, &t0, -1, move |m, g| {
        if m == nn && *g == dh {
            gb.clone()
        } else {
            Cmbn::zero(m - 1)
        }
    });
    let rho = bpl(&rho0, &delta)?;
    let top = rho.top().clone();
    let lrho = extend_reduction(left, &top, &chains, &dhat, nn, &cell);
    let equiv = Equivalence::new(lrho, rho)?;
    EHObject::new(format!("{}+{}", x.name, name), space, chains, equiv)
}

/// `r ⊕ (one generator mapped to one generator)`, with new endpoints.
fn extend_reduction(r: &Reduction, top: &CC, bot: &CC, t: &Gen, n: i32, b: &Gen) -> Reduction {
    let (f, tt, bb) = (r.f.clone(), t.clone(), b.clone());
    let fm = Morphism::cheap(top, bot, 0, move |m, g| {
        if m == n && *g == tt {
            Cmbn::gen(m, bb.clone())
        } else {
            f.at(m, g)
        }
    });
    let (g, tt, bb) = (r.g.clone(), t.clone(), b.clone());
    let gm = Morphism::cheap(bot, top, 0, move |m, x| {
        if m == n && *x == bb {
            Cmbn::gen(m, tt.clone())
        } else {
            g.at(m, x)
        }
    });
    let (h, tt) = (r.h.clone(), t.clone());
    let hm = Morphism::cheap(top, top, 1, move |m, x| {
        if m == n && *x == tt {
            Cmbn::zero(m + 1)
        } else {
            h.at(m, x)
        }
    });
    Reduction { f: fm, g: gm, h: hm }
}

/// A simplicial abelian group presented by a basis: faces are linear, degeneracies
/// send basis elements to basis elements. Basis elements may be degenerate.
pub trait SMod: Send + Sync {
    fn mface(&self, i: usize, n: usize, b: &Gen) -> Cmbn;
    fn mdegen(&self, i: usize, n: usize, b: &Gen) -> Gen;
    /// Bit k set when `b` lies in the image of `s_k`.
    fn mdegset(&self, n: usize, b: &Gen) -> u64;
}

/// Z[X] for a simplicial set; basis elements are simplex generators.
pub struct FreeMod(pub SS);

impl SMod for FreeMod {
    fn mface(&self, i: usize, n: usize, b: &Gen) -> Cmbn {
        Cmbn::gen(n as i32 - 1, face(&*self.0, i, n, &Simplex::from_gen(b)).to_gen())
    }
    fn mdegen(&self, i: usize, _n: usize, b: &Gen) -> Gen {
        Simplex::from_gen(b).degen(i as u8).to_gen()
    }
    fn mdegset(&self, _n: usize, b: &Gen) -> u64 {
        match b.term() {
            Term::Simplex(d, _) => mask(d),
            _ => 0,
        }
    }
}

pub fn mface_c(m: &dyn SMod, i: usize, c: &Cmbn) -> Cmbn {
    let n = c.deg as usize;
    c.map(c.deg - 1, |b| m.mface(i, n, b))
}

pub fn mfaces(m: &dyn SMod, idx: &[usize], c: &Cmbn) -> Cmbn {
    let mut c = c.clone();
    for &i in idx {
        if c.is_zero() {
            return Cmbn::zero(c.deg - (idx.len() as i32));
        }
        c = mface_c(m, i, &c);
    }
    c
}

pub fn mdegens(m: &dyn SMod, idx: &[usize], b: &Gen, n: usize) -> Gen {
    let mut b = b.clone();
    let mut n = n;
    for &i in idx {
        b = m.mdegen(i, n, &b);
        n += 1;
    }
    b
}

/// Drops degenerate basis elements.
pub fn mnormalize(m: &dyn SMod, c: &Cmbn) -> Cmbn {
    if c.deg == 0 {
        return c.clone();
    }
    let n = c.deg as usize;
    Cmbn { deg: c.deg, terms: c.terms.iter().filter(|(_, b)| m.mdegset(n, b) == 0).cloned().collect() }
}

/// Normalized chains of a simplicial module.
pub fn module_chains(m: Arc<dyn SMod>, name: &str) -> CC {
    Complex::builder(name.to_string(), move |n, b| {
        let nu = n as usize;
        let mut acc = Acc::new(n - 1);
        for i in 0..=nu {
            let f = m.mface(i, nu, b);
            acc.add_scaled(if i % 2 == 0 { 1 } else { -1 }, &f);
        }
        mnormalize(&*m, &acc.finish())
    })
    .build()
}

pub const PROD: &str = "x";

pub fn pair(a: &Gen, b: &Gen) -> Gen {
    Gen::node(PROD, vec![a.clone(), b.clone()])
}

pub fn unpair(g: &Gen) -> (&Gen, &Gen) {
    match g.as_node(PROD) {
        Some([a, b]) => (a, b),
        _ => fail(Error::Contract(format!("{g} is not a product simplex"))),
    }
}

/// The diagonal tensor product of two simplicial modules.
pub struct DiagTensor(pub Arc<dyn SMod>, pub Arc<dyn SMod>);

impl SMod for DiagTensor {
    fn mface(&self, i: usize, n: usize, b: &Gen) -> Cmbn {
        let (x, y) = unpair(b);
        let fx = self.0.mface(i, n, x);
        let fy = self.1.mface(i, n, y);
        let mut acc = Acc::new(n as i32 - 1);
        for (u, p) in &fx.terms {
            for (v, q) in &fy.terms {
                acc.push(u * v, pair(p, q));
            }
        }
        acc.finish()
    }
    fn mdegen(&self, i: usize, n: usize, b: &Gen) -> Gen {
        let (x, y) = unpair(b);
        pair(&self.0.mdegen(i, n, x), &self.1.mdegen(i, n, y))
    }
    fn mdegset(&self, n: usize, b: &Gen) -> u64 {
        let (x, y) = unpair(b);
        self.0.mdegset(n, x) & self.1.mdegset(n, y)
    }
}

/// The cartesian product X × Y.
pub struct Product {
    pub x: SS,
    pub y: SS,
    memo: Memo<(usize, usize, Gen), Simplex>,
}

impl Product {
    pub fn new(x: SS, y: SS) -> Product {
        Product { x, y, memo: Memo::new() }
    }
}

/// `(s_J a, s_K b)` normalized to `s_{J∩K}` of a pair with no common degeneracy.
pub fn product_simplex(a: &Simplex, b: &Simplex) -> Simplex {
    let (mut ad, mut bd) = (a.degs.clone(), b.degs.clone());
    let mut peeled = Vec::new();
    loop {
        let common = mask(&ad) & mask(&bd);
        if common == 0 {
            break;
        }
        let top = 63 - common.leading_zeros() as u8;
        ad = peel_deg(&ad, top);
        bd = peel_deg(&bd, top);
        peeled.push(top);
    }
    let geo = pair(&Simplex { degs: ad, geo: a.geo.clone() }.to_gen(), &Simplex { degs: bd, geo: b.geo.clone() }.to_gen());
    Simplex { degs: peeled, geo }
}

impl SimplicialSet for Product {
    fn name(&self) -> String {
        format!("{}x{}", self.x.name(), self.y.name())
    }
    fn base(&self) -> Gen {
        pair(&self.x.base(), &self.y.base())
    }
    fn face_geo(&self, i: usize, n: usize, g: &Gen) -> Simplex {
        self.memo.get_or(&(i, n, g.clone()), || {
            let (a, b) = unpair(g);
            let fa = face(&*self.x, i, n, &Simplex::from_gen(a));
            let fb = face(&*self.y, i, n, &Simplex::from_gen(b));
            product_simplex(&fa, &fb)
        })
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        let mut out = Vec::new();
        for p in 0..=n {
            let bx = self.x.basis(p)?;
            if bx.is_empty() {
                continue;
            }
            for q in (n - p)..=n {
                let by = self.y.basis(q)?;
                if by.is_empty() {
                    continue;
                }
                for (jx, jy) in disjoint_degeneracies(n, n - p, n - q) {
                    for a in &bx {
                        for b in &by {
                            out.push(pair(&Simplex::new(jx.clone(), a.clone()).to_gen(), &Simplex::new(jy.clone(), b.clone()).to_gen()));
                        }
                    }
                }
            }
        }
        Some(out)
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        let Some([a, b]) = g.as_node(PROD) else { return false };
        let (a, b) = (Simplex::from_gen(a), Simplex::from_gen(b));
        a.degs.len() <= n
            && b.degs.len() <= n
            && a.degs.first().map_or(true, |&d| (d as usize) < n)
            && b.degs.first().map_or(true, |&d| (d as usize) < n)
            && a.degset() & b.degset() == 0
            && self.x.contains(n - a.degs.len(), &a.geo)
            && self.y.contains(n - b.degs.len(), &b.geo)
    }
    fn sample(&self, n: usize, rng: &mut Rng) -> Option<Gen> {
        for _ in 0..24 {
            let p = rng.gen_range(0..=n);
            let q = rng.gen_range((n - p)..=n);
            let (Some(a), Some(b)) = (self.x.sample(p, rng), self.y.sample(q, rng)) else { continue };
            let mut idx: Vec<u8> = (0..n as u8).collect();
            shuffle(&mut idx, rng);
            let mut jx: Vec<u8> = idx[..n - p].to_vec();
            let mut jy: Vec<u8> = idx[n - p..n - p + (n - q)].to_vec();
            jx.sort_unstable_by(|a, b| b.cmp(a));
            jy.sort_unstable_by(|a, b| b.cmp(a));
            return Some(pair(&Simplex::new(jx, a).to_gen(), &Simplex::new(jy, b).to_gen()));
        }
        None
    }
}

fn shuffle<T>(v: &mut [T], rng: &mut Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.gen_range(0..=i);
        v.swap(i, j);
    }
}

/// Pairs of disjoint decreasing index lists in `0..n` of the given sizes.
pub fn disjoint_degeneracies(n: usize, kx: usize, ky: usize) -> Vec<(Vec<u8>, Vec<u8>)> {
    let mut out = Vec::new();
    if kx + ky > n {
        return out;
    }
    let all: Vec<u8> = (0..n as u8).collect();
    for sx in combinations(&all, kx) {
        let rest: Vec<u8> = all.iter().copied().filter(|i| !sx.contains(i)).collect();
        for sy in combinations(&rest, ky) {
            let mut a = sx.clone();
            let mut b = sy.clone();
            a.reverse();
            b.reverse();
            out.push((a, b));
        }
    }
    out
}

/// k-subsets in lexicographic order (ascending inside each subset).
pub fn combinations<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > items.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| items[i].clone()).collect());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + items.len() - k {
                break;
            }
            if i == 0 && idx[0] == items.len() - k {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Shuffles of (p, q): ascending μ of size p, complement ν, and the sign (−1)^{Σ(μ_i − i)}.
pub fn shuffles(p: usize, q: usize) -> Vec<(Vec<usize>, Vec<usize>, i64)> {
    let all: Vec<usize> = (0..p + q).collect();
    combinations(&all, p)
        .into_iter()
        .map(|mu| {
            let nu: Vec<usize> = all.iter().copied().filter(|i| !mu.contains(i)).collect();
            let s: usize = mu.iter().enumerate().map(|(i, m)| m - i).sum();
            (mu, nu, if s % 2 == 0 { 1 } else { -1 })
        })
        .collect()
}

/// Eilenberg–Zilber data between the diagonal tensor product of two simplicial
/// modules and the tensor product of their normalized chains.
pub struct EZ {
    pub a: Arc<dyn SMod>,
    pub b: Arc<dyn SMod>,
}

impl EZ {
    /// Alexander–Whitney on the pair `(x, y)` of dimension n.
    pub fn aw(&self, n: usize, x: &Gen, y: &Gen) -> Cmbn {
        let mut acc = Acc::new(n as i32);
        let a = &*self.a;
        let b = &*self.b;
        for p in 0..=n {
            let back: Vec<usize> = (p + 1..=n).rev().collect();
            let fa = mnormalize(a, &mfaces(a, &back, &Cmbn::gen(n as i32, x.clone())));
            if fa.is_zero() {
                continue;
            }
            let front = vec![0usize; p];
            let fb = mnormalize(b, &mfaces(b, &front, &Cmbn::gen(n as i32, y.clone())));
            for (u, xa) in &fa.terms {
                for (v, yb) in &fb.terms {
                    acc.push(u * v, crate::complex::tensor_gen(p as i32, xa, (n - p) as i32, yb));
                }
            }
        }
        acc.finish()
    }

    /// Eilenberg–MacLane shuffle map on `x ⊗ y`.
    pub fn eml(&self, p: usize, x: &Gen, q: usize, y: &Gen) -> Cmbn {
        let mut acc = Acc::new((p + q) as i32);
        for (mu, nu, sg) in shuffles(p, q) {
            let xa = mdegens(&*self.a, &nu, x, p);
            let yb = mdegens(&*self.b, &mu, y, q);
            if self.a.mdegset(p + q, &xa) & self.b.mdegset(p + q, &yb) == 0 {
                acc.push(sg, pair(&xa, &yb));
            }
        }
        acc.finish()
    }

    /// Shih homotopy on the pair `(x, y)` of dimension m.
    pub fn shih(&self, m: usize, x: &Gen, y: &Gen) -> Cmbn {
        let mut acc = Acc::new(m as i32 + 1);
        let (a, b) = (&*self.a, &*self.b);
        for q in 0..m {
            let fidx: Vec<usize> = (m - q + 1..=m).rev().collect();
            let fa = mfaces(a, &fidx, &Cmbn::gen(m as i32, x.clone()));
            if fa.is_zero() {
                continue;
            }
            for p in 0..(m - q) {
                let mb = m - p - q;
                let gidx: Vec<usize> = (mb..m - q).rev().collect();
                let fb = mfaces(b, &gidx, &Cmbn::gen(m as i32, y.clone()));
                if fb.is_zero() {
                    continue;
                }
                for (al, be, _) in shuffles(p + 1, q) {
                    let eps: usize = al.iter().enumerate().map(|(i, x)| x - i).sum();
                    let s = if (mb + eps) % 2 == 0 { 1 } else { -1 };
                    let mut da = vec![mb - 1];
                    da.extend(be.iter().map(|x| x + mb));
                    let db: Vec<usize> = al.iter().map(|x| x + mb).collect();
                    for (u, xa) in &fa.terms {
                        let xa2 = mdegens(a, &da, xa, m - q);
                        for (v, yb) in &fb.terms {
                            let yb2 = mdegens(b, &db, yb, m - p);
                            if a.mdegset(m + 1, &xa2) & b.mdegset(m + 1, &yb2) == 0 {
                                acc.push(s * u * v, pair(&xa2, &yb2));
                            }
                        }
                    }
                }
            }
        }
        acc.finish()
    }

    /// The reduction `top ⇒ bottom` where `top` is the normalized diagonal tensor
    /// product and `bottom` the tensor product of the normalized chains.
    pub fn reduction(self: &Arc<Self>, top: &CC, bottom: &CC) -> Reduction {
        let (e1, e2, e3) = (self.clone(), self.clone(), self.clone());
        let f = Morphism::new(top, bottom, 0, move |n, g| {
            let (x, y) = unpair(g);
            e1.aw(n as usize, x, y)
        });
        let g = Morphism::new(bottom, top, 0, move |_, t| {
            let (p, x, q, y) = crate::complex::untensor(t);
            e2.eml(p as usize, x, q as usize, y)
        });
        let h = Morphism::new(top, top, 1, move |n, g| {
            if n == 0 {
                return Cmbn::zero(1);
            }
            let (x, y) = unpair(g);
            e3.shih(n as usize, x, y)
        });
        Reduction { f, g, h }
    }
}

/// Eilenberg–Zilber reduction `C*(X × Y) ⇒ C*X ⊗ C*Y`.
pub fn ez_reduction(x: &SS, y: &SS) -> (SS, Reduction) {
    let prod: SS = Arc::new(Product::new(x.clone(), y.clone()));
    let top = normalized_chains(&prod);
    let bottom = tensor_product(&normalized_chains(x), &normalized_chains(y));
    let ez = Arc::new(EZ { a: Arc::new(FreeMod(x.clone())), b: Arc::new(FreeMod(y.clone())) });
    (prod, ez.reduction(&top, &bottom))
}

/// X × Y with the EZ reduction followed by the tensor product of the two equivalences.
pub fn cartesian_product(x: &EHObject, y: &EHObject) -> Result<EHObject> {
    let prod: SS = Arc::new(Product::new(x.space.clone(), y.space.clone()));
    let top = normalized_chains(&prod);
    let bottom = tensor_product(&x.chains, &y.chains);
    let ez = Arc::new(EZ { a: Arc::new(FreeMod(x.space.clone())), b: Arc::new(FreeMod(y.space.clone())) });
    let ezr = ez.reduction(&top, &bottom);
    let l = tensor_reduction(&x.equiv.left, &y.equiv.left);
    let r = tensor_reduction(&x.equiv.right, &y.equiv.right);
    let r = retop(&r, l.top());
    let l = rebottom(&l, &bottom);
    let e2 = Equivalence::new(l, r)?;
    let e1 = Equivalence::from_reduction(&ezr);
    let equiv = compose_equivalences(&e1, &e2)?;
    EHObject::new(format!("{}x{}", x.name, y.name), prod, top, equiv)
}

/// Same maps, with the top complex replaced by an identical one.
pub fn retop(r: &Reduction, top: &CC) -> Reduction {
    Reduction { f: r.f.retarget(top, r.bottom()), g: r.g.retarget(r.bottom(), top), h: r.h.retarget(top, top) }
}

/// Same maps, with the bottom complex replaced by an identical one.
pub fn rebottom(r: &Reduction, bottom: &CC) -> Reduction {
    Reduction { f: r.f.retarget(r.top(), bottom), g: r.g.retarget(bottom, r.top()), h: r.h.clone() }
}

/// Distinct generators for tests: every nondegenerate simplex up to `max_dim` when
/// enumerable, else samples.
pub fn simplices_upto(x: &dyn SimplicialSet, max_dim: usize, cap: usize, rng: &mut Rng) -> Vec<(usize, Gen)> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for n in 0..=max_dim {
        match x.basis(n) {
            Some(b) => {
                for g in b.into_iter().take(cap) {
                    out.push((n, g));
                }
            }
            None => {
                for _ in 0..cap * 4 {
                    if let Some(g) = x.sample(n, rng) {
                        if seen.insert((n, g.clone())) {
                            out.push((n, g));
                        }
                    }
                    if out.iter().filter(|(m, _)| *m == n).count() >= cap {
                        break;
                    }
                }
            }
        }
    }
    out
}
