//! Kan loop groups and their effective homology.
//!
//! For a 1-reduced Y the chains of GY reduce onto Ω'(C*Y): words of nondegenerate
//! simplices of Y (a simplex of dimension m is a letter of degree m − 1) with a
//! differential produced by the construction. The reduction is obtained from the
//! Fox isomorphism between the augmentation ideal of Z[GY] and the twisted diagonal
//! tensor product Z[GY] ⊗_t K, where K_n is free on the simplices of Y_{n+1}, followed
//! by Eilenberg–Zilber with a perturbation, and a second perturbation of ρ ⊗ 1 that
//! recurses on the strictly smaller degree of the left factor.

use std::sync::Arc;

use rand::Rng as _;

use crate::cmbn::{Acc, Cmbn};
use crate::complex::{tensor_gen, untensor, Complex, Memo, Morphism, Rng, CC};
use crate::error::{Error, Result};
use crate::gen::{Gen, Term};
use crate::guard::{check_budget, fail};
use crate::reduction::Reduction;
use crate::words::{concat, series, tensor_algebra, transport, word, word_letters};
use crate::simplicial::{
    face, mask, normalized_chains, peel_deg, EHObject, FreeMod, SMod, Simplex, SimplicialSet, EZ, SS,
};

/// Simplicial groups: group structure on simplices of each dimension.
pub trait SimplicialGroup: SimplicialSet {
    fn mul(&self, n: usize, a: &Simplex, b: &Simplex) -> Simplex;
    fn inv(&self, n: usize, a: &Simplex) -> Simplex;
    fn unit(&self, n: usize) -> Simplex;
    fn is_abelian(&self) -> bool;
}

type Raw = Vec<(Simplex, i32)>;

fn s0_degenerate(s: &Simplex) -> bool {
    s.degs.last() == Some(&0)
}

/// Free reduction, dropping letters that are units.
fn reduce(raw: Raw) -> Raw {
    let mut out: Raw = Vec::with_capacity(raw.len());
    for (y, e) in raw {
        if e == 0 || s0_degenerate(&y) {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.0 == y => {
                last.1 += e;
                if last.1 == 0 {
                    out.pop();
                }
            }
            _ => out.push((y, e)),
        }
    }
    out
}

/// The Kan loop group GY of a reduced simplicial set (letters ȳ for y ∈ Y_{n+1}).
pub struct LoopGroup {
    pub y: SS,
    faces: Memo<(usize, usize, Gen), Simplex>,
}

impl LoopGroup {
    pub fn new(y: SS) -> Result<Arc<LoopGroup>> {
        if !y.reduced() {
            return Err(Error::Precondition(format!("{} is not reduced: the loop group needs one vertex", y.name())));
        }
        Ok(Arc::new(LoopGroup { y, faces: Memo::new() }))
    }

    pub fn word_gen(raw: &Raw) -> Gen {
        Gen::word(raw.iter().map(|(s, e)| (s.to_gen(), *e)).collect())
    }

    pub fn letters(g: &Gen) -> Raw {
        match g.as_word() {
            Some(w) => w.iter().map(|(s, e)| (Simplex::from_gen(s), *e)).collect(),
            None => fail(Error::Contract(format!("{g} is not a loop word"))),
        }
    }

    /// Letters of a possibly degenerate simplex of dimension `n`.
    pub fn raw(s: &Simplex) -> Raw {
        let mut raw = LoopGroup::letters(&s.geo);
        for &j in s.degs.iter().rev() {
            for (y, _) in raw.iter_mut() {
                *y = y.degen(j + 1);
            }
        }
        raw
    }

    /// Reduced word in dimension `n` to a normalized simplex.
    pub fn normalize(raw: Raw, n: usize) -> Simplex {
        let mut raw = reduce(raw);
        let mut peeled = Vec::new();
        let mut m = n;
        loop {
            let full: u64 = if m == 0 { 0 } else { (1u64 << m) - 1 };
            let common = raw.iter().fold(full, |m, (y, _)| m & (mask(&y.degs) >> 1));
            if common == 0 {
                break;
            }
            let top = 63 - common.leading_zeros() as u8;
            for (y, _) in raw.iter_mut() {
                y.degs = peel_deg(&y.degs, top + 1);
            }
            peeled.push(top);
            m -= 1;
        }
        Simplex { degs: peeled, geo: LoopGroup::word_gen(&raw) }
    }

    pub fn letter(y: &Simplex) -> Raw {
        vec![(y.clone(), 1)]
    }

    pub fn mul_raw(a: &Raw, b: &Raw) -> Raw {
        let mut v = a.clone();
        v.extend(b.iter().cloned());
        reduce(v)
    }

    pub fn inv_raw(a: &Raw) -> Raw {
        a.iter().rev().map(|(y, e)| (y.clone(), -e)).collect()
    }

    /// Faces of a letter word in dimension n (letters in Y_{n+1}).
    pub fn face_raw(&self, i: usize, n: usize, raw: &Raw) -> Raw {
        let y = &*self.y;
        let mut out = Vec::with_capacity(raw.len() * 2);
        for (l, e) in raw {
            if i == 0 {
                let a = face(y, 1, n + 1, l);
                let b = face(y, 0, n + 1, l);
                for _ in 0..e.unsigned_abs() {
                    if *e > 0 {
                        out.push((a.clone(), 1));
                        out.push((b.clone(), -1));
                    } else {
                        out.push((b.clone(), 1));
                        out.push((a.clone(), -1));
                    }
                }
            } else {
                out.push((face(y, i + 1, n + 1, l), *e));
            }
        }
        reduce(out)
    }
}

impl SimplicialSet for LoopGroup {
    fn name(&self) -> String {
        format!("G{}", self.y.name())
    }
    fn base(&self) -> Gen {
        Gen::word(vec![])
    }
    fn face_geo(&self, i: usize, n: usize, g: &Gen) -> Simplex {
        self.faces.get_or(&(i, n, g.clone()), || {
            check_budget();
            let raw = LoopGroup::letters(g);
            LoopGroup::normalize(self.face_raw(i, n, &raw), n - 1)
        })
    }
    fn basis(&self, n: usize) -> Option<Vec<Gen>> {
        if n == 0 || self.y.k_reduced(n + 1) {
            Some(if n == 0 { vec![self.base()] } else { vec![] })
        } else {
            None
        }
    }
    fn contains(&self, n: usize, g: &Gen) -> bool {
        let Some(w) = g.as_word() else { return false };
        if n == 0 {
            return w.is_empty();
        }
        let raw: Raw = w.iter().map(|(s, e)| (Simplex::from_gen(s), *e)).collect();
        let valid = raw.iter().all(|(y, e)| {
            *e != 0
                && !s0_degenerate(y)
                && y.degs.len() <= n + 1
                && y.degs.first().map_or(true, |&d| (d as usize) <= n)
                && self.y.contains(n + 1 - y.degs.len(), &y.geo)
        });
        valid && reduce(raw.clone()) == raw && LoopGroup::normalize(raw, n).degs.is_empty()
    }
    fn sample(&self, n: usize, rng: &mut Rng) -> Option<Gen> {
        if n == 0 {
            return Some(self.base());
        }
        for _ in 0..40 {
            let len = rng.gen_range(1..=3);
            let mut raw = Vec::new();
            for _ in 0..len {
                if let Some(l) = sample_letter(&*self.y, n + 1, rng) {
                    raw.push((l, if rng.gen_bool(0.7) { 1 } else { -1 }));
                }
            }
            let s = LoopGroup::normalize(raw, n);
            if s.degs.is_empty() && !LoopGroup::letters(&s.geo).is_empty() {
                return Some(s.geo);
            }
        }
        None
    }
}

/// A random simplex of dimension `m` that is not s0-degenerate.
pub fn sample_letter(y: &dyn SimplicialSet, m: usize, rng: &mut Rng) -> Option<Simplex> {
    for _ in 0..12 {
        let k = rng.gen_range(1..=m);
        let Some(geo) = y.sample(k, rng) else { continue };
        let r = m - k;
        let mut idx: Vec<u8> = (1..m as u8).collect();
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        if idx.len() < r {
            continue;
        }
        let mut degs: Vec<u8> = idx[..r].to_vec();
        degs.sort_unstable_by(|a, b| b.cmp(a));
        return Some(Simplex::new(degs, geo));
    }
    None
}

impl SimplicialGroup for LoopGroup {
    fn mul(&self, n: usize, a: &Simplex, b: &Simplex) -> Simplex {
        LoopGroup::normalize(LoopGroup::mul_raw(&LoopGroup::raw(a), &LoopGroup::raw(b)), n)
    }
    fn inv(&self, n: usize, a: &Simplex) -> Simplex {
        LoopGroup::normalize(LoopGroup::inv_raw(&LoopGroup::raw(a)), n)
    }
    fn unit(&self, n: usize) -> Simplex {
        Simplex::iterated(self.base(), n)
    }
    fn is_abelian(&self) -> bool {
        false
    }
}

pub fn kan_loop_group(y: &SS) -> Result<Arc<LoopGroup>> {
    LoopGroup::new(y.clone())
}

/// K_n = Z[Y_{n+1}] modulo s0-degenerate simplices, with the faces of the letters ȳ
/// read additively.
pub struct LetterMod(pub SS);

impl LetterMod {
    fn e(s: Simplex) -> Option<Gen> {
        (!s0_degenerate(&s)).then(|| s.to_gen())
    }
}

impl SMod for LetterMod {
    fn mface(&self, i: usize, n: usize, b: &Gen) -> Cmbn {
        let y = Simplex::from_gen(b);
        let deg = n as i32 - 1;
        if i >= 1 {
            return match LetterMod::e(face(&*self.0, i + 1, n + 1, &y)) {
                Some(g) => Cmbn::gen(deg, g),
                None => Cmbn::zero(deg),
            };
        }
        let mut terms = Vec::new();
        if let Some(g) = LetterMod::e(face(&*self.0, 1, n + 1, &y)) {
            terms.push((1, g));
        }
        if let Some(g) = LetterMod::e(face(&*self.0, 0, n + 1, &y)) {
            terms.push((-1, g));
        }
        Cmbn::from_terms(deg, terms)
    }
    fn mdegen(&self, i: usize, _n: usize, b: &Gen) -> Gen {
        Simplex::from_gen(b).degen(i as u8 + 1).to_gen()
    }
    fn mdegset(&self, _n: usize, b: &Gen) -> u64 {
        match b.term() {
            Term::Simplex(d, _) => mask(d) >> 1,
            _ => 0,
        }
    }
}

/// The reduction C*GY ⇒ Ω'(C*Y).
pub struct Fox {
    pub y: SS,
    pub group: Arc<LoopGroup>,
    r: Arc<dyn SMod>,
    k: Arc<LetterMod>,
    ez: EZ,
    pub chains: CC,
    mf: Memo<(i32, Gen), Cmbn>,
    mg: Memo<Gen, Cmbn>,
    mh: Memo<(i32, Gen), Cmbn>,
    md: Memo<Gen, Cmbn>,
    mdelta1: Memo<Gen, Cmbn>,
}

impl Fox {
    pub fn new(y: &SS) -> Result<Arc<Fox>> {
        if !y.k_reduced(1) {
            return Err(Error::Precondition(format!(
                "{} must be 1-reduced (no nondegenerate 1-simplices, one vertex)",
                y.name()
            )));
        }
        let group = LoopGroup::new(y.clone())?;
        let gs: SS = group.clone();
        let r: Arc<dyn SMod> = Arc::new(FreeMod(gs.clone()));
        let k = Arc::new(LetterMod(y.clone()));
        let kk: Arc<dyn SMod> = k.clone();
        let ez = EZ { a: r.clone(), b: kk };
        let chains = normalized_chains(&gs);
        Ok(Arc::new(Fox {
            y: y.clone(),
            group,
            r,
            k,
            ez,
            chains,
            mf: Memo::new(),
            mg: Memo::new(),
            mh: Memo::new(),
            md: Memo::new(),
            mdelta1: Memo::new(),
        }))
    }

    fn rk_nondeg(&self, n: usize, r: &Gen, y: &Gen) -> bool {
        n == 0 || self.r.mdegset(n, r) & self.k.mdegset(n, y) == 0
    }

    /// Normalized differential of the letter module: −d_Y on nondegenerate letters.
    fn d_k(&self, q: i32, y: &Gen) -> Cmbn {
        let mut acc = Acc::new(q - 1);
        for i in 0..=q as usize {
            let f = self.k.mface(i, q as usize, y);
            acc.add_scaled(if i % 2 == 0 { 1 } else { -1 }, &f);
        }
        let c = acc.finish();
        Cmbn { deg: c.deg, terms: c.terms.into_iter().filter(|(_, g)| self.k.mdegset((q - 1) as usize, g) == 0).collect() }
    }

    fn fox(&self, n: i32, w: &Gen) -> Cmbn {
        let nu = n as usize;
        let mut acc = Acc::new(n);
        let mut pre: Raw = Vec::new();
        for (y, e) in LoopGroup::letters(w) {
            let yl = LoopGroup::letter(&y);
            let yg = y.to_gen();
            for _ in 0..e.unsigned_abs() {
                if e > 0 {
                    let r = LoopGroup::normalize(pre.clone(), nu).to_gen();
                    if self.rk_nondeg(nu, &r, &yg) {
                        acc.push(1, crate::simplicial::pair(&r, &yg));
                    }
                    pre = LoopGroup::mul_raw(&pre, &yl);
                } else {
                    pre = LoopGroup::mul_raw(&pre, &LoopGroup::inv_raw(&yl));
                    let r = LoopGroup::normalize(pre.clone(), nu).to_gen();
                    if self.rk_nondeg(nu, &r, &yg) {
                        acc.push(-1, crate::simplicial::pair(&r, &yg));
                    }
                }
            }
        }
        acc.finish()
    }

    fn unfox(&self, c: &Cmbn) -> Cmbn {
        let n = c.deg as usize;
        let mut acc = Acc::new(c.deg);
        for (k, p) in &c.terms {
            let (r, y) = crate::simplicial::unpair(p);
            let rr = LoopGroup::raw(&Simplex::from_gen(r));
            let ry = LoopGroup::mul_raw(&rr, &LoopGroup::letter(&Simplex::from_gen(y)));
            let a = LoopGroup::normalize(ry, n);
            if a.degs.is_empty() {
                acc.push(*k, a.geo);
            }
            let b = LoopGroup::normalize(rr, n);
            if b.degs.is_empty() {
                acc.push(-*k, b.geo);
            }
        }
        acc.finish()
    }

    /// The twisting part of face 0 on Z[GY] ⊗ K.
    fn twist(&self, n: i32, p: &Gen) -> Cmbn {
        let nu = n as usize;
        let (r, y) = crate::simplicial::unpair(p);
        let ys = Simplex::from_gen(y);
        let y0 = face(&*self.y, 0, nu + 1, &ys);
        if s0_degenerate(&y0) {
            return Cmbn::zero(n - 1);
        }
        let y0g = y0.to_gen();
        let d0r = face(&*self.group, 0, nu, &Simplex::from_gen(r));
        let gface = self.group.face_raw(0, nu, &LoopGroup::letter(&ys));
        let prod = LoopGroup::normalize(LoopGroup::mul_raw(&LoopGroup::raw(&d0r), &gface), nu - 1);
        let mut acc = Acc::new(n - 1);
        let d0g = d0r.to_gen();
        if self.rk_nondeg(nu - 1, &d0g, &y0g) {
            acc.push(1, crate::simplicial::pair(&d0g, &y0g));
        }
        let pg = prod.to_gen();
        if self.rk_nondeg(nu - 1, &pg, &y0g) {
            acc.push(-1, crate::simplicial::pair(&pg, &y0g));
        }
        acc.finish()
    }

    fn twist_c(&self, c: &Cmbn) -> Cmbn {
        c.map(c.deg - 1, |p| self.twist(c.deg, p))
    }

    fn ez_f(&self, c: &Cmbn) -> Cmbn {
        let n = c.deg;
        c.map(n, |p| {
            let (x, y) = crate::simplicial::unpair(p);
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
            let (x, y) = crate::simplicial::unpair(p);
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

    /// Induced perturbation on C*GY ⊗ NK.
    fn delta1(&self, c: &Cmbn) -> Cmbn {
        c.map(c.deg - 1, |t| {
            self.mdelta1.get_or(t, || {
                let one = Cmbn::gen(c.deg, t.clone());
                self.ez_f(&self.twist_c(&self.phi1(&self.ez_g(&one))))
            })
        })
    }

    fn t_f(&self, c: &Cmbn) -> Cmbn {
        let mut acc = Acc::new(c.deg);
        for (k, t) in &c.terms {
            let (p, a, q, y) = untensor(t);
            for (u, om) in &self.f(p, a).terms {
                acc.push(k * u, concat(word_letters(om), &[(q, y.clone())]));
            }
        }
        acc.finish()
    }

    fn t_g(&self, c: &Cmbn) -> Cmbn {
        let mut acc = Acc::new(c.deg);
        for (k, om) in &c.terms {
            let ls = word_letters(om);
            let (q, y) = ls.last().expect("nonempty word").clone();
            let w = word(ls[..ls.len() - 1].to_vec());
            let p = c.deg - q;
            for (u, a) in &self.g(p, &w).terms {
                acc.push(k * u, tensor_gen(p, a, q, &y));
            }
        }
        acc.finish()
    }

    fn t_h(&self, c: &Cmbn) -> Cmbn {
        let mut acc = Acc::new(c.deg + 1);
        for (k, t) in &c.terms {
            let (p, a, q, y) = untensor(t);
            for (u, b) in &self.h(p, a).terms {
                acc.push(k * u, tensor_gen(p + 1, b, q, y));
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

    /// f: C*GY → Ω' on a nondegenerate word of dimension n.
    pub fn f(&self, n: i32, w: &Gen) -> Cmbn {
        if n == 0 {
            return Cmbn::gen(0, word(vec![]));
        }
        self.mf.get_or(&(n, w.clone()), || {
            let x = self.fox(n, w);
            self.t_f(&self.psi2(&self.r1_f(&x)))
        })
    }

    /// g: Ω' → C*GY.
    pub fn g(&self, n: i32, om: &Gen) -> Cmbn {
        if n == 0 {
            return Cmbn::gen(0, self.group.base());
        }
        self.mg.get_or(om, || {
            let one = Cmbn::gen(n, om.clone());
            let x = self.r1_g(&self.phi2(&self.t_g(&one)));
            self.unfox(&x)
        })
    }

    /// h: C*GY → C*GY of degree +1.
    pub fn h(&self, n: i32, w: &Gen) -> Cmbn {
        if n == 0 {
            return Cmbn::zero(1);
        }
        self.mh.get_or(&(n, w.clone()), || {
            let x = self.fox(n, w);
            let a = self.r1_h(&x);
            let b = self.r1_g(&self.phi2(&self.t_h(&self.r1_f(&x))));
            self.unfox(&a.add(&b))
        })
    }

    /// The differential of Ω'.
    pub fn d(&self, n: i32, om: &Gen) -> Cmbn {
        if n <= 1 {
            return Cmbn::zero(n - 1);
        }
        self.md.get_or(om, || {
            let ls = word_letters(om);
            let (q, y) = ls.last().expect("nonempty word").clone();
            let pre = &ls[..ls.len() - 1];
            let p = n - q;
            let mut acc = Acc::new(n - 1);
            if p > 1 {
                for (u, x) in &self.d(p, &word(pre.to_vec())).terms {
                    acc.push(*u, concat(word_letters(x), &[(q, y.clone())]));
                }
            }
            let sign = if p % 2 == 0 { 1 } else { -1 };
            for (u, z) in &self.d_k(q, &y).terms {
                acc.push(sign * u, concat(pre, &[(q - 1, z.clone())]));
            }
            let one = Cmbn::gen(n, om.clone());
            acc.add(&self.t_f(&self.delta1(&self.phi2(&self.t_g(&one)))));
            acc.finish()
        })
    }
}

/// Effective homology of the Kan loop group of a 1-reduced space.
pub fn loop_space_eh(x: &EHObject) -> Result<EHObject> {
    let fox = Fox::new(&x.space)?;
    let group: SS = fox.group.clone();
    let a = fox.chains.clone();
    let om_lin = tensor_algebra(&x.chains, "", -1);
    let fx = fox.clone();
    let om = Complex::derived(&om_lin, format!("Ω'{}", x.name), move |n, w| fx.d(n, w)).build();
    let (f1, f2, f3) = (fox.clone(), fox.clone(), fox.clone());
    let rho = Reduction {
        f: Morphism::new(&a, &om, 0, move |n, w| f1.f(n, w)),
        g: Morphism::new(&om, &a, 0, move |n, w| f2.g(n, w)),
        h: Morphism::new(&a, &a, 1, move |n, w| f3.h(n, w)),
    };
    let equiv = transport(&rho, x, &om_lin, -1, &format!("EΩ{}", x.name))?;
    EHObject::new(format!("Ω{}", x.name), group, a, equiv)
}

/// n-fold loop space.
pub fn iterated_cobar(x: &EHObject, n: usize) -> Result<EHObject> {
    if n > 0 && !x.space.k_reduced(n) {
        return Err(Error::Precondition(format!("{} is not {n}-reduced", x.name)));
    }
    let mut cur = x.clone();
    for _ in 0..n {
        cur = loop_space_eh(&cur)?;
    }
    Ok(cur)
}
