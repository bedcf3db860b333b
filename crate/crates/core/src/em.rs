//! Eilenberg–MacLane spaces, classifying spaces and twisted cartesian products.
//!
//! K(π,1) for cyclic π is the nerve of π, its simplices being tuples of nonzero
//! elements; its effective homology compares the bar resolution with the periodic
//! resolution of Z over Z[π]. K(π,n) is obtained by iterating W̄, whose effective
//! homology is the bar construction of the effective homology of the group.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng as _;

use crate::cmbn::{Acc, Cmbn};
use crate::complex::{tensor_gen, tensor_product, untensor, Complex, Memo, Morphism, Rng, CC};
use crate::error::{Error, Result};
use crate::gen::Gen;
use crate::linalg::{to_i64, AbelianGroupDescr};
use crate::loops::SimplicialGroup;
use crate::reduction::{bpl, compose_equivalences, tensor_reduction, tpl, Equivalence, Reduction};
use crate::simplicial::{
    cartesian_product, face, normalized_chains, pair, peel_deg, product_simplex, rebottom, retop, unpair,
    EHObject, FreeMod, Product, SMod, Simplex, SimplicialSet, EZ, SS,
};
use crate::words::{concat_tagged, series, tagged, tensor_algebra, transport, word_letters};

pub type SG = Arc<dyn SimplicialGroup>;

/// Z (order 0) or Z/d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cyclic(pub i64);

impl Cyclic {
    pub fn norm(self, a: i64) -> i64 {
        if self.0 == 0 {
            a
        } else {
            a.rem_euclid(self.0)
        }
    }

    pub fn name(self) -> String {
        if self.0 == 0 {
            "Z".into()
        } else {
            format!("Z/{}", self.0)
        }
    }
}

/// A simplicial group together with an effective homology of its chains.
#[derive(Clone)]
pub struct GroupEH {
    pub group: SG,
    pub eh: EHObject,
}

fn is_unit(n: usize, s: &Simplex, base: &Gen) -> bool {
    s.degs.len() == n && s.geo == *base
}

/// The entries of a tuple simplex with zeros reinserted at the degeneracies.
pub fn tuple_raw(s: &Simplex) -> Vec<i64> {
    let mut v = s.geo.as_ints().expect("tuple simplex").to_vec();
    for &j in s.degs.iter().rev() {
        v.insert(j as usize, 0);
    }
    v
}

pub fn tuple_simplex(v: Vec<i64>) -> Simplex {
    let mut degs = Vec::new();
    let mut geo = Vec::new();
    for (i, a) in v.into_iter().enumerate() {
        if a == 0 {
            degs.push(i as u8);
        } else {
            geo.push(a);
        }
    }
    degs.reverse();
    Simplex { degs, geo: Gen::ints(geo) }
}

/// The nerve of a cyclic group: n-simplices are tuples [a1|...|an].
pub struct KPi1 {
    pub pi: Cyclic,
}

impl SimplicialSet for KPi1 {
    fn name(&self) -> String {
        format!("K({},1)", self.pi.name())
    }
    fn base(&self) -> Gen {
        Gen::ints(vec![])
    }
    fn face_geo(&self, i: usize, n: usize, g: &Gen) -> Simplex {
        let v = g.as_ints().expect("tuple simplex");
        let out: Vec<i64> = if i == 0 {
            v[1..].to_vec()
        } else if i == n {
            v[..n - 1].to_vec()
        } else {
            let mut w = v[..i - 1].to_vec();
            w.push(self.pi.norm(v[i - 1] + v[i]));
            w.extend_from_slice(&v[i + 1..]);
            w
        };
        tuple_simplex(out)
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        if n == 0 {
            return Some(vec![self.base()]);
        }
        if self.pi.0 == 0 {
            return None;
        }
        let d = self.pi.0;
        let mut out = vec![Vec::new()];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|v: Vec<i64>| {
                    (1..d).map(move |a| {
                        let mut w = v.clone();
                        w.push(a);
                        w
                    })
                })
                .collect();
        }
        Some(out.into_iter().map(Gen::ints).collect())
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        match g.as_ints() {
            Some(v) => v.len() == n && v.iter().all(|&a| a != 0 && self.pi.norm(a) == a),
            None => false,
        }
    }
    fn sample(&self, n: usize, rng: &mut Rng) -> Option<Gen> {
        if self.pi.0 == 1 && n > 0 {
            return None;
        }
        let v = (0..n)
            .map(|_| {
                if self.pi.0 == 0 {
                    let a = rng.gen_range(1..=3);
                    if rng.gen_bool(0.5) {
                        a
                    } else {
                        -a
                    }
                } else {
                    rng.gen_range(1..self.pi.0)
                }
            })
            .collect();
        Some(Gen::ints(v))
    }
}

impl SimplicialGroup for KPi1 {
    fn mul(&self, _n: usize, a: &Simplex, b: &Simplex) -> Simplex {
        let (x, y) = (tuple_raw(a), tuple_raw(b));
        tuple_simplex(x.iter().zip(&y).map(|(p, q)| self.pi.norm(p + q)).collect())
    }
    fn inv(&self, _n: usize, a: &Simplex) -> Simplex {
        tuple_simplex(tuple_raw(a).iter().map(|p| self.pi.norm(-p)).collect())
    }
    fn unit(&self, n: usize) -> Simplex {
        Simplex::iterated(self.base(), n)
    }
    fn is_abelian(&self) -> bool {
        true
    }
}

type BEl = BTreeMap<(i64, Vec<i64>), i64>;
type PEl = BTreeMap<(i64, usize), i64>;

fn bump<K: Ord>(m: &mut BTreeMap<K, i64>, k: K, c: i64) {
    match m.entry(k) {
        Entry::Occupied(mut o) => {
            *o.get_mut() += c;
            if *o.get() == 0 {
                o.remove();
            }
        }
        Entry::Vacant(v) => {
            if c != 0 {
                v.insert(c);
            }
        }
    }
}

/// Comparison of the bar resolution B (free on g·[a1|...|an]) with the periodic
/// resolution P (free on g·u_k) by equivariant contracting homotopies.
struct Resolution {
    pi: Cyclic,
    mf: Memo<Vec<i64>, PEl>,
    mg: Memo<usize, BEl>,
    mh: Memo<Vec<i64>, BEl>,
}

impl Resolution {
    fn top_k(&self) -> Option<usize> {
        if self.pi.0 == 0 {
            Some(1)
        } else {
            None
        }
    }

    fn d_b(&self, x: &BEl) -> BEl {
        let mut out = BEl::new();
        for ((g, t), &c) in x {
            let n = t.len();
            if n == 0 {
                continue;
            }
            bump(&mut out, (self.pi.norm(g + t[0]), t[1..].to_vec()), c);
            for i in 1..n {
                let m = self.pi.norm(t[i - 1] + t[i]);
                if m == 0 {
                    continue;
                }
                let mut w = t[..i - 1].to_vec();
                w.push(m);
                w.extend_from_slice(&t[i + 1..]);
                bump(&mut out, (*g, w), if i % 2 == 0 { c } else { -c });
            }
            bump(&mut out, (*g, t[..n - 1].to_vec()), if n % 2 == 0 { c } else { -c });
        }
        out
    }

    fn s_b(&self, x: &BEl) -> BEl {
        let mut out = BEl::new();
        for ((g, t), &c) in x {
            if *g == 0 {
                continue;
            }
            let mut w = vec![*g];
            w.extend_from_slice(t);
            bump(&mut out, (0, w), c);
        }
        out
    }

    fn d_p(&self, x: &PEl) -> PEl {
        let mut out = PEl::new();
        for (&(g, k), &c) in x {
            if k == 0 {
                continue;
            }
            if k % 2 == 1 {
                bump(&mut out, (self.pi.norm(g + 1), k - 1), c);
                bump(&mut out, (g, k - 1), -c);
            } else {
                for j in 0..self.pi.0 {
                    bump(&mut out, (self.pi.norm(g + j), k - 1), c);
                }
            }
        }
        out
    }

    fn s_p(&self, x: &PEl) -> PEl {
        let mut out = PEl::new();
        for (&(g, k), &c) in x {
            if self.top_k().map_or(false, |t| k + 1 > t) {
                continue;
            }
            if k % 2 == 0 {
                if g >= 0 {
                    for j in 0..g {
                        bump(&mut out, (j, k + 1), c);
                    }
                } else {
                    for j in g..0 {
                        bump(&mut out, (j, k + 1), -c);
                    }
                }
            } else if self.pi.0 != 0 && g == self.pi.0 - 1 {
                bump(&mut out, (0, k + 1), c);
            }
        }
        out
    }

    fn f_eq(&self, x: &BEl) -> PEl {
        let mut out = PEl::new();
        for ((g, t), &c) in x {
            for (&(h, k), &u) in &self.f(t) {
                bump(&mut out, (self.pi.norm(g + h), k), c * u);
            }
        }
        out
    }

    fn g_eq(&self, x: &PEl) -> BEl {
        let mut out = BEl::new();
        for (&(g, k), &c) in x {
            for ((h, t), &u) in &self.g(k) {
                bump(&mut out, (self.pi.norm(g + h), t.clone()), c * u);
            }
        }
        out
    }

    fn h_eq(&self, x: &BEl) -> BEl {
        let mut out = BEl::new();
        for ((g, t), &c) in x {
            for ((h, w), &u) in &self.h(t) {
                bump(&mut out, (self.pi.norm(g + h), w.clone()), c * u);
            }
        }
        out
    }

    fn f(&self, t: &[i64]) -> PEl {
        if t.is_empty() {
            return PEl::from([((0, 0), 1)]);
        }
        self.mf.get_or(&t.to_vec(), || {
            let one = BEl::from([((0, t.to_vec()), 1)]);
            self.s_p(&self.f_eq(&self.d_b(&one)))
        })
    }

    fn g(&self, k: usize) -> BEl {
        if k == 0 {
            return BEl::from([((0, vec![]), 1)]);
        }
        self.mg.get_or(&k, || {
            let one = PEl::from([((0, k), 1)]);
            self.s_b(&self.g_eq(&self.d_p(&one)))
        })
    }

    fn h(&self, t: &[i64]) -> BEl {
        if t.is_empty() {
            return BEl::new();
        }
        self.mh.get_or(&t.to_vec(), || {
            let mut y = BEl::from([((0, t.to_vec()), 1)]);
            for (k, c) in self.g_eq(&self.f(t)) {
                bump(&mut y, k, -c);
            }
            let one = BEl::from([((0, t.to_vec()), 1)]);
            for (k, c) in self.h_eq(&self.d_b(&one)) {
                bump(&mut y, k, -c);
            }
            self.s_b(&y)
        })
    }
}

fn u_gen(k: usize) -> Gen {
    Gen::atom(&format!("u{k}"))
}

fn u_index(g: &Gen) -> usize {
    g.as_atom().and_then(|s| s.strip_prefix('u')).and_then(|s| s.parse().ok()).expect("resolution generator")
}

/// Z ⊗_π P: one generator per degree (degrees 0, 1 for π = Z).
fn periodic_complex(pi: Cyclic) -> CC {
    Complex::builder(format!("EK({},1)", pi.name()), move |n, g| {
        let k = u_index(g);
        if pi.0 != 0 && k >= 2 && k % 2 == 0 {
            Cmbn::term(n - 1, pi.0, u_gen(k - 1))
        } else {
            Cmbn::zero(n - 1)
        }
    })
    .basis(move |n| Some(if n < 0 || (pi.0 == 0 && n > 1) { vec![] } else { vec![u_gen(n as usize)] }))
    .member(move |n, g| g.as_atom().map_or(false, |_| u_index(g) == n as usize) && (pi.0 != 0 || n <= 1))
    .base(u_gen(0))
    .no_memo()
    .build()
}

/// K(π,1) with its reduction onto the periodic complex.
pub fn kpi1(pi: Cyclic) -> Result<GroupEH> {
    if pi.0 < 0 || pi.0 == 1 {
        return Err(Error::Precondition(format!("Z/{} is not a supported cyclic group", pi.0)));
    }
    let space = Arc::new(KPi1 { pi });
    let ss: SS = space.clone();
    let top = normalized_chains(&ss);
    let bot = periodic_complex(pi);
    let res = Arc::new(Resolution { pi, mf: Memo::new(), mg: Memo::new(), mh: Memo::new() });
    let (r1, r2, r3) = (res.clone(), res.clone(), res.clone());
    let f = Morphism::new(&top, &bot, 0, move |n, t| {
        let v = t.as_ints().expect("tuple");
        let mut acc = Acc::new(n);
        for (&(_, k), &c) in &r1.f(v) {
            acc.push(c, u_gen(k));
        }
        acc.finish()
    });
    let g = Morphism::new(&bot, &top, 0, move |n, u| {
        let mut acc = Acc::new(n);
        for ((_, t), &c) in &r2.g(u_index(u)) {
            acc.push(c, Gen::ints(t.clone()));
        }
        acc.finish()
    });
    let h = Morphism::new(&top, &top, 1, move |n, t| {
        let v = t.as_ints().expect("tuple");
        let mut acc = Acc::new(n + 1);
        for ((_, w), &c) in &r3.h(v) {
            acc.push(c, Gen::ints(w.clone()));
        }
        acc.finish()
    });
    let red = Reduction { f, g, h };
    let name = space.name();
    let eh = EHObject::new(name, ss, top, Equivalence::from_reduction(&red))?;
    Ok(GroupEH { group: space, eh })
}

/// The augmentation ideal of Z[G] for a reduced simplicial group, with basis the
/// simplices other than the unit (x standing for x − e).
pub struct IMod(pub SG);

impl SMod for IMod {
    fn mface(&self, i: usize, n: usize, b: &Gen) -> Cmbn {
        let s = face(&*self.0, i, n, &Simplex::from_gen(b));
        if is_unit(n - 1, &s, &self.0.base()) {
            Cmbn::zero(n as i32 - 1)
        } else {
            Cmbn::gen(n as i32 - 1, s.to_gen())
        }
    }
    fn mdegen(&self, i: usize, _n: usize, b: &Gen) -> Gen {
        Simplex::from_gen(b).degen(i as u8).to_gen()
    }
    fn mdegset(&self, _n: usize, b: &Gen) -> u64 {
        Simplex::from_gen(b).degset()
    }
}

pub const WB: &str = "Wb";

/// W̄G for a reduced abelian simplicial group G: n-simplices are tuples
/// (h_{n−1}, ..., h_0) with h_k ∈ G_k, stored in that order.
pub struct Wbar {
    pub g: SG,
    name: String,
    memo: Memo<(usize, usize, Gen), Simplex>,
}

fn w_entries(g: &Gen) -> Vec<Simplex> {
    match g.as_node(WB) {
        Some(ks) => ks.iter().map(Simplex::from_gen).collect(),
        None => crate::guard::fail(Error::Contract(format!("{g} is not a W̄ simplex"))),
    }
}

fn w_gen(e: &[Simplex]) -> Gen {
    Gen::node(WB, e.iter().map(|s| s.to_gen()).collect())
}

/// Peels the degeneracies of a W̄ tuple over a group with unit vertex `base`,
/// largest index first.
pub fn normalize_tuple(base: &Gen, mut e: Vec<Simplex>) -> Simplex {
    let mut peeled = Vec::new();
    loop {
        let m = e.len();
        let mut found = None;
        for i in (0..m).rev() {
            if !is_unit(m - 1 - i, &e[i], base) {
                continue;
            }
            if (0..i).all(|j| e[j].degset() & (1u64 << (i - j - 1)) != 0) {
                found = Some(i);
                break;
            }
        }
        let Some(i) = found else { break };
        for j in 0..i {
            e[j] = Simplex { degs: peel_deg(&e[j].degs, (i - j - 1) as u8), geo: e[j].geo.clone() };
        }
        e.remove(i);
        peeled.push(i as u8);
    }
    Simplex { degs: peeled, geo: w_gen(&e) }
}

impl Wbar {
    pub fn new(g: SG, name: String) -> Wbar {
        Wbar { g, name, memo: Memo::new() }
    }

    pub fn normalize(&self, e: Vec<Simplex>) -> Simplex {
        normalize_tuple(&self.g.base(), e)
    }

    /// The full tuple of an arbitrary simplex.
    pub fn raw(&self, s: &Simplex) -> Vec<Simplex> {
        let mut e = w_entries(&s.geo);
        for &j in s.degs.iter().rev() {
            let j = j as usize;
            let m = e.len();
            for (idx, x) in e.iter_mut().enumerate().take(j) {
                *x = x.degen((j - 1 - idx) as u8);
            }
            e.insert(j, self.g.unit(m - j));
        }
        e
    }

    fn face_tuple(&self, i: usize, e: &[Simplex]) -> Vec<Simplex> {
        let n = e.len();
        let g = &*self.g;
        if i == 0 {
            return e[1..].to_vec();
        }
        let mut out = Vec::with_capacity(n - 1);
        for j in 0..i - 1 {
            out.push(face(g, i - 1 - j, n - 1 - j, &e[j]));
        }
        if i < n {
            out.push(g.mul(n - 1 - i, &face(g, 0, n - i, &e[i - 1]), &e[i]));
            out.extend_from_slice(&e[i + 1..]);
        }
        out
    }

    /// A random simplex of G_k, degenerate or not.
    fn sample_any(&self, k: usize, rng: &mut Rng) -> Simplex {
        if k == 0 || rng.gen_range(0..4) == 0 {
            return self.g.unit(k);
        }
        for _ in 0..8 {
            let kk = rng.gen_range(1..=k);
            if let Some(x) = self.g.sample(kk, rng) {
                let mut idx: Vec<u8> = (0..k as u8).collect();
                for i in (1..idx.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    idx.swap(i, j);
                }
                let mut degs = idx[..k - kk].to_vec();
                degs.sort_unstable_by(|a, b| b.cmp(a));
                return Simplex { degs, geo: x };
            }
        }
        self.g.unit(k)
    }
}

impl SimplicialSet for Wbar {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn base(&self) -> Gen {
        w_gen(&[])
    }
    fn face_geo(&self, i: usize, n: usize, g: &Gen) -> Simplex {
        self.memo.get_or(&(i, n, g.clone()), || self.normalize(self.face_tuple(i, &w_entries(g))))
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        match n {
            0 => Some(vec![self.base()]),
            1 => Some(vec![]),
            _ => None,
        }
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        let Some(ks) = g.as_node(WB) else { return false };
        if ks.len() != n {
            return false;
        }
        for (j, k) in ks.iter().enumerate() {
            let s = Simplex::from_gen(k);
            let dim = n - 1 - j;
            if s.degs.len() > dim || s.degs.first().map_or(false, |&d| d as usize >= dim) {
                return false;
            }
            if !self.g.contains(dim - s.degs.len(), &s.geo) {
                return false;
            }
        }
        let e: Vec<Simplex> = ks.iter().map(Simplex::from_gen).collect();
        self.normalize(e).degs.is_empty()
    }
    fn sample(&self, n: usize, rng: &mut Rng) -> Option<Gen> {
        if n == 0 {
            return Some(self.base());
        }
        for _ in 0..32 {
            let e: Vec<Simplex> = (0..n).map(|j| self.sample_any(n - 1 - j, rng)).collect();
            let s = self.normalize(e);
            if s.degs.is_empty() {
                return Some(s.geo);
            }
        }
        None
    }
}

impl SimplicialGroup for Wbar {
    fn mul(&self, _n: usize, a: &Simplex, b: &Simplex) -> Simplex {
        let (x, y) = (self.raw(a), self.raw(b));
        let m = x.len();
        let e = x.iter().zip(&y).enumerate().map(|(j, (p, q))| self.g.mul(m - 1 - j, p, q)).collect();
        self.normalize(e)
    }
    fn inv(&self, _n: usize, a: &Simplex) -> Simplex {
        let x = self.raw(a);
        let m = x.len();
        let e = x.iter().enumerate().map(|(j, p)| self.g.inv(m - 1 - j, p)).collect();
        self.normalize(e)
    }
    fn unit(&self, n: usize) -> Simplex {
        Simplex::iterated(self.base(), n)
    }
    fn is_abelian(&self) -> bool {
        self.g.is_abelian()
    }
}

/// The reduction C*W̄G ⇒ B(C*G): an n-simplex (g, w) of W̄G is (g − e) ⊗ w in the
/// augmentation ideal tensored with Z[W̄G] in dimension n − 1, whose differential is
/// minus the diagonal one perturbed by the twisting; Eilenberg–Zilber and the
/// recursion on the right factor finish the job.
struct WbarRed {
    w: Arc<Wbar>,
    im: Arc<IMod>,
    fm: Arc<FreeMod>,
    ez: EZ,
    cg: CC,
    mf: Memo<(i32, Gen), Cmbn>,
    mg: Memo<Gen, Cmbn>,
    mh: Memo<(i32, Gen), Cmbn>,
    md: Memo<Gen, Cmbn>,
    mdelta1: Memo<Gen, Cmbn>,
}

impl WbarRed {
    fn nondeg(&self, n: usize, a: &Gen, b: &Gen) -> bool {
        n == 0 || self.im.mdegset(n, a) & self.fm.mdegset(n, b) == 0
    }

    fn split(&self, w: &Gen) -> Gen {
        let e = w_entries(w);
        pair(&e[0].to_gen(), &self.w.normalize(e[1..].to_vec()).to_gen())
    }

    fn to_a(&self, c: &Cmbn) -> Cmbn {
        let mut acc = Acc::new(c.deg + 1);
        for (k, p) in &c.terms {
            let (g, w) = unpair(p);
            let gs = Simplex::from_gen(g);
            if is_unit(c.deg as usize, &gs, &self.w.g.base()) {
                continue;
            }
            let mut e = vec![gs];
            e.extend(self.w.raw(&Simplex::from_gen(w)));
            let s = self.w.normalize(e);
            if s.degs.is_empty() {
                acc.push(*k, s.geo);
            }
        }
        acc.finish()
    }

    fn twist(&self, m: i32, p: &Gen) -> Cmbn {
        let mu = m as usize;
        let mut acc = Acc::new(m - 1);
        if mu == 0 {
            return acc.finish();
        }
        let (g, w) = unpair(p);
        let gr = &*self.w.g;
        let e = self.w.raw(&Simplex::from_gen(w));
        let tw = e[0].clone();
        let d0w = self.w.normalize(e[1..].to_vec()).to_gen();
        let d0g = face(gr, 0, mu, &Simplex::from_gen(g));
        let base = gr.base();
        let mut push = |k: i64, x: Simplex| {
            if !is_unit(mu - 1, &x, &base) {
                let xg = x.to_gen();
                if self.nondeg(mu - 1, &xg, &d0w) {
                    acc.push(k, pair(&xg, &d0w));
                }
            }
        };
        push(1, gr.mul(mu - 1, &d0g, &tw));
        push(-1, tw);
        push(-1, d0g);
        acc.finish()
    }

    fn twist_c(&self, c: &Cmbn) -> Cmbn {
        c.map(c.deg - 1, |p| self.twist(c.deg, p))
    }

    fn ez_f(&self, c: &Cmbn) -> Cmbn {
        let n = c.deg;
        c.map(n, |p| {
            let (x, y) = unpair(p);
            self.ez.aw(n as usize, x, y)
        })
    }

    fn ez_g(&self, c: &Cmbn) -> Cmbn {
        c.map(c.deg, |t| {
            let (p, x, q, y) = untensor(t);
            self.ez.eml(p as usize, x, q as usize, y)
        })
    }

    fn ez_h(&self, c: &Cmbn) -> Cmbn {
        let n = c.deg;
        c.map(n + 1, |p| {
            if n == 0 {
                return Cmbn::zero(1);
            }
            let (x, y) = unpair(p);
            self.ez.shih(n as usize, x, y)
        })
    }

    fn phi1(&self, c: &Cmbn) -> Cmbn {
        series(c, |x| self.ez_h(&self.twist_c(x)))
    }

    fn psi1(&self, c: &Cmbn) -> Cmbn {
        series(c, |x| self.twist_c(&self.ez_h(x)))
    }

    fn r1_f(&self, c: &Cmbn) -> Cmbn {
        self.ez_f(&self.psi1(c))
    }

    fn r1_g(&self, c: &Cmbn) -> Cmbn {
        self.phi1(&self.ez_g(c))
    }

    fn r1_h(&self, c: &Cmbn) -> Cmbn {
        self.phi1(&self.ez_h(c))
    }

    fn delta1(&self, c: &Cmbn) -> Cmbn {
        c.map(c.deg - 1, |t| {
            self.mdelta1.get_or(t, || {
                let one = Cmbn::gen(c.deg, t.clone());
                self.ez_f(&self.twist_c(&self.phi1(&self.ez_g(&one))))
            })
        })
    }

    fn t_f(&self, c: &Cmbn) -> Cmbn {
        let mut acc = Acc::new(c.deg + 1);
        for (k, t) in &c.terms {
            let (p, a, q, w) = untensor(t);
            for (u, r) in &self.f(q, w).terms {
                acc.push(k * u, concat_tagged(1, &[(p + 1, a.clone())], word_letters(r)));
            }
        }
        acc.finish()
    }

    fn t_g(&self, c: &Cmbn) -> Cmbn {
        let mut acc = Acc::new(c.deg - 1);
        for (k, om) in &c.terms {
            let ls = word_letters(om);
            let (l, a) = ls[0].clone();
            let q = c.deg - l;
            for (u, w) in &self.g(q, &tagged(1, ls[1..].to_vec())).terms {
                acc.push(k * u, tensor_gen(l - 1, &a, q, w));
            }
        }
        acc.finish()
    }

    fn t_h(&self, c: &Cmbn) -> Cmbn {
        let mut acc = Acc::new(c.deg + 1);
        for (k, t) in &c.terms {
            let (p, a, q, w) = untensor(t);
            let s = if p % 2 == 0 { 1 } else { -1 };
            for (u, b) in &self.h(q, w).terms {
                acc.push(s * k * u, tensor_gen(p, a, q + 1, b));
            }
        }
        acc.finish()
    }

    fn phi2(&self, c: &Cmbn) -> Cmbn {
        series(c, |x| self.t_h(&self.delta1(x)))
    }

    fn psi2(&self, c: &Cmbn) -> Cmbn {
        series(c, |x| self.delta1(&self.t_h(x)))
    }

    fn f(&self, n: i32, w: &Gen) -> Cmbn {
        if n == 0 {
            return Cmbn::gen(0, tagged(1, vec![]));
        }
        self.mf.get_or(&(n, w.clone()), || {
            let x = Cmbn::gen(n - 1, self.split(w));
            self.t_f(&self.psi2(&self.r1_f(&x)))
        })
    }

    fn g(&self, n: i32, om: &Gen) -> Cmbn {
        if n == 0 {
            return Cmbn::gen(0, self.w.base());
        }
        self.mg.get_or(om, || {
            let one = Cmbn::gen(n, om.clone());
            self.to_a(&self.r1_g(&self.phi2(&self.t_g(&one))))
        })
    }

    fn h(&self, n: i32, w: &Gen) -> Cmbn {
        if n == 0 {
            return Cmbn::zero(1);
        }
        self.mh.get_or(&(n, w.clone()), || {
            let x = Cmbn::gen(n - 1, self.split(w));
            let a = self.r1_h(&x);
            let b = self.r1_g(&self.phi2(&self.t_h(&self.r1_f(&x))));
            self.to_a(&a.add(&b)).neg()
        })
    }

    fn d(&self, n: i32, om: &Gen) -> Cmbn {
        if n <= 1 {
            return Cmbn::zero(n - 1);
        }
        self.md.get_or(om, || {
            let ls = word_letters(om);
            let (l, a) = ls[0].clone();
            let rest = &ls[1..];
            let (p, q) = (l - 1, n - l);
            let mut acc = Acc::new(n - 1);
            if p >= 2 {
                for (u, z) in &self.cg.d(p, &a).terms {
                    acc.push(-u, concat_tagged(1, &[(l - 1, z.clone())], rest));
                }
            }
            if q >= 2 {
                let s = if p % 2 == 0 { -1 } else { 1 };
                for (u, r) in &self.d(q, &tagged(1, rest.to_vec())).terms {
                    acc.push(s * u, concat_tagged(1, &[(l, a.clone())], word_letters(r)));
                }
            }
            let one = Cmbn::gen(n, om.clone());
            acc.add_scaled(-1, &self.t_f(&self.delta1(&self.phi2(&self.t_g(&one)))));
            acc.finish()
        })
    }
}

/// W̄G with the effective homology of the bar construction on the effective
/// homology of G.
pub fn classifying_space(g: &GroupEH, name: &str) -> Result<GroupEH> {
    if !g.group.is_abelian() {
        return Err(Error::Precondition(format!("{} is not abelian", g.eh.name)));
    }
    if !g.group.reduced() {
        return Err(Error::Precondition(format!("{} is not reduced", g.eh.name)));
    }
    let w = Arc::new(Wbar::new(g.group.clone(), name.to_string()));
    let ws: SS = w.clone();
    let a = normalized_chains(&ws);
    let im = Arc::new(IMod(g.group.clone()));
    let fm = Arc::new(FreeMod(ws.clone()));
    let ez = EZ { a: im.clone(), b: fm.clone() };
    let red = Arc::new(WbarRed {
        w: w.clone(),
        im,
        fm,
        ez,
        cg: g.eh.chains.clone(),
        mf: Memo::new(),
        mg: Memo::new(),
        mh: Memo::new(),
        md: Memo::new(),
        mdelta1: Memo::new(),
    });
    let lin = tensor_algebra(&g.eh.chains, "", 1);
    let rd = red.clone();
    let bar = Complex::derived(&lin, format!("B'{}", g.eh.name), move |n, om| rd.d(n, om)).build();
    let (r1, r2, r3) = (red.clone(), red.clone(), red);
    let rho = Reduction {
        f: Morphism::new(&a, &bar, 0, move |n, x| r1.f(n, x)),
        g: Morphism::new(&bar, &a, 0, move |n, x| r2.g(n, x)),
        h: Morphism::new(&a, &a, 1, move |n, x| r3.h(n, x)),
    };
    let equiv = transport(&rho, &g.eh, &lin, 1, &format!("EB{}", g.eh.name))?;
    let eh = EHObject::new(name, ws, a, equiv)?;
    Ok(GroupEH { group: w, eh })
}

/// K(π,n) for cyclic π.
pub fn em_cyclic(pi: Cyclic, n: usize) -> Result<GroupEH> {
    if n == 0 {
        return Err(Error::Precondition("K(π,n) needs n ≥ 1".into()));
    }
    let mut cur = kpi1(pi)?;
    for k in 2..=n {
        cur = classifying_space(&cur, &format!("K({},{k})", pi.name()))?;
    }
    Ok(cur)
}

/// The one-point space.
pub struct Point;

impl SimplicialSet for Point {
    fn name(&self) -> String {
        "pt".into()
    }
    fn base(&self) -> Gen {
        Gen::atom("*")
    }
    fn face_geo(&self, _i: usize, _n: usize, _g: &Gen) -> Simplex {
        crate::guard::fail(Error::Contract("the point has no faces".into()))
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        Some(if n == 0 { vec![self.base()] } else { vec![] })
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        n == 0 && *g == self.base()
    }
    fn sample(&self, n: usize, _rng: &mut Rng) -> Option<Gen> {
        (n == 0).then(|| self.base())
    }
}

pub fn point() -> EHObject {
    EHObject::effective_space("pt", Arc::new(Point))
}

/// Cyclic summands of a finitely generated abelian group.
pub fn cyclic_factors(pi: &AbelianGroupDescr) -> Vec<Cyclic> {
    let mut v: Vec<Cyclic> = pi.torsion.iter().map(|d| Cyclic(to_i64(d))).filter(|c| c.0 != 1).collect();
    v.extend(std::iter::repeat(Cyclic(0)).take(pi.free_rank));
    v
}

pub fn group_name(pi: &AbelianGroupDescr) -> String {
    let f = cyclic_factors(pi);
    if f.is_empty() {
        return "0".into();
    }
    f.iter().map(|c| c.name()).collect::<Vec<_>>().join("+")
}

/// K(π,n): products of the cyclic factors.
pub fn em_space(pi: &AbelianGroupDescr, n: usize) -> Result<EHObject> {
    let factors = cyclic_factors(pi);
    let Some((first, rest)) = factors.split_first() else { return Ok(point()) };
    let mut cur = em_cyclic(*first, n)?.eh;
    for c in rest {
        cur = cartesian_product(&cur, &em_cyclic(*c, n)?.eh)?;
    }
    cur.name = format!("K({},{n})", group_name(pi));
    Ok(cur)
}

/// A twisting function B_n → G_{n−1} on nondegenerate simplices of dimension ≥ 1.
#[derive(Clone)]
pub struct Twisting(pub Arc<dyn Fn(usize, &Gen) -> Simplex + Send + Sync>);

impl Twisting {
    pub fn trivial(g: SG) -> Twisting {
        Twisting(Arc::new(move |n, _| g.unit(n - 1)))
    }

    /// τ of an arbitrary simplex: τ(s_0 b) = e, τ(s_{i+1} b) = s_i τ(b).
    pub fn at(&self, g: &dyn SimplicialGroup, n: usize, b: &Simplex) -> Simplex {
        if b.degs.last() == Some(&0) {
            return g.unit(n - 1);
        }
        let t = (self.0)(n - b.degs.len(), &b.geo);
        let mut degs = t.degs.clone();
        let shifted: Vec<u8> = b.degs.iter().map(|d| d - 1).collect();
        degs = crate::simplicial::compose_degs(&shifted, &degs);
        Simplex { degs, geo: t.geo }
    }
}

/// G ×_τ B: face 0 is (d_0 g · τ(b), d_0 b), the other faces componentwise.
pub struct TwistedProduct {
    pub g: SG,
    pub b: SS,
    pub tau: Twisting,
    memo: Memo<(usize, usize, Gen), Simplex>,
}

impl TwistedProduct {
    fn sample_any(x: &dyn SimplicialSet, k: usize, rng: &mut Rng) -> Option<Simplex> {
        for _ in 0..8 {
            let kk = rng.gen_range(0..=k);
            if let Some(s) = x.sample(kk, rng) {
                let mut idx: Vec<u8> = (0..k as u8).collect();
                for i in (1..idx.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    idx.swap(i, j);
                }
                let mut degs = idx[..k - kk].to_vec();
                degs.sort_unstable_by(|a, b| b.cmp(a));
                return Some(Simplex { degs, geo: s });
            }
        }
        None
    }
}

impl SimplicialSet for TwistedProduct {
    fn name(&self) -> String {
        format!("{}x_t{}", self.g.name(), self.b.name())
    }
    fn base(&self) -> Gen {
        pair(&self.g.base(), &self.b.base())
    }
    fn face_geo(&self, i: usize, n: usize, p: &Gen) -> Simplex {
        self.memo.get_or(&(i, n, p.clone()), || {
            let (x, y) = unpair(p);
            let (xs, ys) = (Simplex::from_gen(x), Simplex::from_gen(y));
            let fx = face(&*self.g, i, n, &xs);
            let fy = face(&*self.b, i, n, &ys);
            if i == 0 {
                let t = self.tau.at(&*self.g, n, &ys);
                product_simplex(&self.g.mul(n - 1, &fx, &t), &fy)
            } else {
                product_simplex(&fx, &fy)
            }
        })
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        Product::new(self.g.clone(), self.b.clone()).basis(n)
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        Product::new(self.g.clone(), self.b.clone()).contains(n, g)
    }
    fn sample(&self, n: usize, rng: &mut Rng) -> Option<Gen> {
        for _ in 0..24 {
            let (Some(a), Some(b)) =
                (Self::sample_any(&*self.g, n, rng), Self::sample_any(&*self.b, n, rng))
            else {
                continue;
            };
            if a.degset() & b.degset() == 0 {
                return Some(pair(&a.to_gen(), &b.to_gen()));
            }
        }
        None
    }
}

/// G ×_τ B with effective homology: Eilenberg–Zilber perturbed by the twisting,
/// then the tensor product of the two equivalences perturbed accordingly.
pub fn twisted_product(fiber: &GroupEH, base: &EHObject, tau: Twisting, name: &str) -> Result<EHObject> {
    let g = fiber.group.clone();
    let gs: SS = g.clone();
    let tp = Arc::new(TwistedProduct { g: g.clone(), b: base.space.clone(), tau: tau.clone(), memo: Memo::new() });
    let es: SS = tp.clone();
    let prod: SS = Arc::new(Product::new(gs.clone(), base.space.clone()));
    let top0 = normalized_chains(&prod);
    let bottom0 = tensor_product(&fiber.eh.chains, &base.chains);
    let ez = Arc::new(EZ { a: Arc::new(FreeMod(gs.clone())), b: Arc::new(FreeMod(base.space.clone())) });
    let ezr = ez.reduction(&top0, &bottom0);
    let tp2 = tp.clone();
    let delta = Morphism::new(&top0, &top0, -1, move |n, p| {
        if n == 0 {
            return Cmbn::zero(-1);
        }
        let nu = n as usize;
        let mut acc = Acc::new(n - 1);
        let tw = tp2.face_geo(0, nu, p);
        if !tw.is_degenerate() {
            acc.push(1, tw.geo);
        }
        let (x, y) = unpair(p);
        let plain = product_simplex(
            &face(&*tp2.g, 0, nu, &Simplex::from_gen(x)),
            &face(&*tp2.b, 0, nu, &Simplex::from_gen(y)),
        );
        if !plain.is_degenerate() {
            acc.push(-1, plain.geo);
        }
        acc.finish()
    });
    let r1 = bpl(&ezr, &delta)?;
    let chains = normalized_chains(&es);
    let r1 = retop(&r1, &chains);
    let pert_bot = r1.bottom().clone();
    let l = tensor_reduction(&fiber.eh.equiv.left, &base.equiv.left);
    let r = tensor_reduction(&fiber.eh.equiv.right, &base.equiv.right);
    let r = retop(&r, l.top());
    let l = rebottom(&l, &bottom0);
    let (pb, b0) = (pert_bot.clone(), bottom0.clone());
    let delta1 = Morphism::new(&bottom0, &bottom0, -1, move |n, t| pb.d(n, t).sub(&b0.d(n, t)));
    let (lf, lg, d1) = (l.f.clone(), l.g.clone(), delta1.clone());
    let top_t = l.top().clone();
    let delta_hat = Morphism::new(&top_t, &top_t, -1, move |n, x| lg.apply(&d1.apply(&lf.at(n, x))));
    let right = bpl(&r, &delta_hat)?;
    let left = tpl(&l, &delta1);
    let ttop = right.top().clone();
    let left = Reduction {
        f: left.f.retarget(&ttop, &pert_bot),
        g: left.g.retarget(&pert_bot, &ttop),
        h: left.h.retarget(&ttop, &ttop),
    };
    let e2 = Equivalence::new(left, right)?;
    let e1 = Equivalence::from_reduction(&r1);
    let equiv = compose_equivalences(&e1, &e2)?;
    EHObject::new(name, es, chains, equiv)
}

/// τ(z)(I) = z(0, I+1) − z(1, I+1): an (n+1)-cocycle on Δ[m] to an n-cocycle on Δ[m−1].
/// Cochains on Δ[m] are maps from increasing index tuples.
pub fn cochain_tau(z: &dyn Fn(&[usize]) -> i64) -> impl Fn(&[usize]) -> i64 + '_ {
    move |idx: &[usize]| {
        let shifted: Vec<usize> = idx.iter().map(|i| i + 1).collect();
        let mut a = vec![0];
        a.extend_from_slice(&shifted);
        let mut b = vec![1];
        b.extend_from_slice(&shifted);
        let vb = if b.windows(2).all(|w| w[0] < w[1]) { z(&b) } else { 0 };
        z(&a) - vb
    }
}

/// The m-simplex of K(π,n) classifying an n-cocycle on Δ[m].
pub fn cocycle_simplex(pi: Cyclic, n: usize, m: usize, z: &dyn Fn(&[usize]) -> i64) -> Simplex {
    if n == 1 {
        return tuple_simplex((0..m).map(|i| pi.norm(z(&[i, i + 1]))).collect());
    }
    let mut entries = Vec::with_capacity(m);
    for j in 0..m {
        let zj = move |idx: &[usize]| -> i64 {
            let shifted: Vec<usize> = idx.iter().map(|i| i + j).collect();
            z(&shifted)
        };
        let t = cochain_tau(&zj);
        entries.push(cocycle_simplex(pi, n - 1, m - 1 - j, &t));
    }
    let base = if n == 2 { Gen::ints(vec![]) } else { w_gen(&[]) };
    normalize_tuple(&base, entries)
}
