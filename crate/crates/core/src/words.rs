//! Words of shifted generators: the tensor algebra T(s^k C̄) underlying cobar
//! (k = −1) and bar (k = +1) constructions, and the transfer of an equivalence
//! of C to an equivalence of such word complexes.

use std::sync::Arc;

use once_cell::sync::OnceCell;
use rand::Rng as _;

use crate::cmbn::{Acc, Cmbn};
use crate::complex::{Complex, Morphism, CC};
use crate::error::{Error, Result};
use crate::gen::Gen;
use crate::guard::{bpl_cap, check_budget, fail};
use crate::reduction::{bpl, compose_equivalences, tpl, Equivalence, Reduction};
use crate::simplicial::EHObject;

pub const COB: &str = "Cob";
pub const BAR: &str = "Bar";

fn tag(shift: i32) -> &'static str {
    if shift < 0 {
        COB
    } else {
        BAR
    }
}

/// A cobar word; each letter carries its shifted degree.
pub fn word(letters: Vec<(i32, Gen)>) -> Gen {
    Gen::graded(COB, letters)
}

pub fn tagged(shift: i32, letters: Vec<(i32, Gen)>) -> Gen {
    Gen::graded(tag(shift), letters)
}

pub fn word_letters(g: &Gen) -> &[(i32, Gen)] {
    match g.as_graded(COB).or_else(|| g.as_graded(BAR)) {
        Some(l) => l,
        None => fail(Error::Contract(format!("{g} is not a tensor word"))),
    }
}

pub fn concat(a: &[(i32, Gen)], b: &[(i32, Gen)]) -> Gen {
    concat_tagged(-1, a, b)
}

pub fn concat_tagged(shift: i32, a: &[(i32, Gen)], b: &[(i32, Gen)]) -> Gen {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    tagged(shift, v)
}

/// Σ (−step)^i c, with the perturbation cap.
pub(crate) fn series<F: Fn(&Cmbn) -> Cmbn>(c: &Cmbn, step: F) -> Cmbn {
    let cap = bpl_cap(c.deg);
    let mut acc = c.clone();
    let mut cur = c.clone();
    let mut i = 0;
    while !cur.is_zero() {
        i += 1;
        if i > cap {
            fail(Error::Diverging(format!("perturbation series exceeded {cap} iterations")));
        }
        check_budget();
        cur = step(&cur).neg();
        acc = acc.add(&cur);
    }
    acc
}

/// T(s^shift C̄): words of generators of C of degree ≥ 1, a letter x of degree m
/// having degree m + shift ≥ 1, with d_L = −d and Koszul signs.
pub fn tensor_algebra(c: &CC, name: &str, shift: i32) -> CC {
    let (c1, c2, c3, c4) = (c.clone(), c.clone(), c.clone(), c.clone());
    Complex::builder(name.to_string(), move |n, w| {
        let ls = word_letters(w);
        let mut acc = Acc::new(n - 1);
        let mut pre = 0;
        for (i, (q, x)) in ls.iter().enumerate() {
            let m = q - shift;
            if *q >= 2 && m >= 2 {
                let sign = if pre % 2 == 0 { -1 } else { 1 };
                for (u, z) in &c1.d(m, x).terms {
                    let mut v = ls[..i].to_vec();
                    v.push((q - 1, z.clone()));
                    v.extend_from_slice(&ls[i + 1..]);
                    acc.push(sign * u, tagged(shift, v));
                }
            }
            pre += q;
        }
        acc.finish()
    })
    .basis(move |n| words_basis(&c2, n, shift))
    .member(move |n, g| match g.as_graded(tag(shift)) {
        Some(ls) => {
            ls.iter().map(|t| t.0).sum::<i32>() == n
                && ls.iter().all(|(q, x)| *q >= 1 && q - shift >= 1 && c3.contains(q - shift, x))
        }
        None => false,
    })
    .sampler(move |n, rng| {
        if n == 0 {
            return Some(tagged(shift, vec![]));
        }
        for _ in 0..24 {
            let mut left = n;
            let mut v = Vec::new();
            let lo = 1.max(1 + shift);
            while left >= lo {
                let q = rng.gen_range(lo..=left);
                match c4.sample(q - shift, rng) {
                    Some(x) => {
                        v.push((q, x));
                        left -= q;
                    }
                    None => break,
                }
            }
            if left == 0 {
                return Some(tagged(shift, v));
            }
        }
        None
    })
    .base(tagged(shift, vec![]))
    .build()
}

/// All words of total degree n over the basis of C.
pub fn words_basis(c: &Complex, n: i32, shift: i32) -> Option<Vec<Gen>> {
    if n < 0 {
        return Some(vec![]);
    }
    let mut letters: Vec<Vec<Gen>> = vec![Vec::new(); n as usize + 1];
    for q in 1..=n {
        if q - shift >= 1 {
            letters[q as usize] = c.basis(q - shift).ok()?;
        }
    }
    fn rec(left: i32, shift: i32, letters: &[Vec<Gen>], cur: &mut Vec<(i32, Gen)>, out: &mut Vec<Gen>) {
        if left == 0 {
            out.push(tagged(shift, cur.clone()));
            return;
        }
        for q in 1..=left {
            for x in &letters[q as usize] {
                cur.push((q, x.clone()));
                rec(left - q, shift, letters, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, shift, &letters, &mut Vec::new(), &mut out);
    Some(out)
}

fn map_letters(w: &Gen, deg: i32, f: &Morphism, shift: i32) -> Cmbn {
    let mut acc: Vec<(i64, Vec<(i32, Gen)>)> = vec![(1, Vec::new())];
    for (q, x) in word_letters(w) {
        let img = f.at(q - shift, x);
        let mut next = Vec::with_capacity(acc.len() * img.len());
        for (k, pre) in &acc {
            for (u, z) in &img.terms {
                let mut v = pre.clone();
                v.push((*q, z.clone()));
                next.push((k * u, v));
            }
        }
        acc = next;
        if acc.is_empty() {
            break;
        }
    }
    Cmbn::from_terms(deg, acc.into_iter().map(|(k, v)| (k, tagged(shift, v))).collect())
}

/// T(ρ): T(s^k C̄) ⇒ T(s^k D̄) for a basepoint-preserving reduction ρ: C ⇒ D,
/// with h(a·w) = h_L(a)·w + (−1)^{|a|} gf(a)·h(w) and h_L = −h.
pub fn tensor_algebra_reduction(r: &Reduction, top: &CC, bot: &CC, shift: i32) -> Reduction {
    let rf = r.f.clone();
    let f = Morphism::new(top, bot, 0, move |n, w| map_letters(w, n, &rf, shift));
    let rg = r.g.clone();
    let g = Morphism::new(bot, top, 0, move |n, w| map_letters(w, n, &rg, shift));
    let (rf, rg, rh) = (r.f.clone(), r.g.clone(), r.h.clone());
    let cell: Arc<OnceCell<Morphism>> = Arc::new(OnceCell::new());
    let me = cell.clone();
    let h = Morphism::new(top, top, 1, move |n, w| {
        let ls = word_letters(w);
        if ls.is_empty() {
            return Cmbn::zero(n + 1);
        }
        let (q, a) = &ls[0];
        let rest = &ls[1..];
        let mut acc = Acc::new(n + 1);
        for (u, b) in &rh.at(q - shift, a).terms {
            acc.push(-u, concat_tagged(shift, &[(q + 1, b.clone())], rest));
        }
        if !rest.is_empty() {
            let gf = rg.apply(&rf.at(q - shift, a));
            if !gf.is_zero() {
                let sign = if q % 2 == 0 { 1 } else { -1 };
                let hr = me.get().expect("initialised").at(n - q, &tagged(shift, rest.to_vec()));
                for (u, b) in &gf.terms {
                    for (v, t) in &hr.terms {
                        acc.push(sign * u * v, concat_tagged(shift, &[(*q, b.clone())], word_letters(t)));
                    }
                }
            }
        }
        acc.finish()
    });
    let _ = cell.set(h.clone());
    Reduction { f, g, h }
}

/// Given ρ: A ⇒ W where W is T(s^k C*X) with a perturbed differential (`lin` is the
/// same word complex with the plain differential), and the equivalence of X,
/// builds A ⇐ · ⇒ T(s^k EC): the trivial perturbation lemma on the left, the basic
/// one on the right (nilpotent when the perturbation shortens or lengthens words).
pub fn transport(rho: &Reduction, x: &EHObject, lin: &CC, shift: i32, name: &str) -> Result<Equivalence> {
    let om = rho.bottom().clone();
    let e1 = Equivalence::from_reduction(rho);
    let t_top = tensor_algebra(x.equiv.top(), "", shift);
    let t_ec = tensor_algebra(x.effective(), name, shift);
    let lt = tensor_algebra_reduction(&x.equiv.left, &t_top, lin, shift);
    let rt = tensor_algebra_reduction(&x.equiv.right, &t_top, &t_ec, shift);
    let (om2, lin2) = (om.clone(), lin.clone());
    let delta = Morphism::new(lin, lin, -1, move |n, w| om2.d(n, w).sub(&lin2.d(n, w)));
    let (ltf, ltg, dl) = (lt.f.clone(), lt.g.clone(), delta.clone());
    let delta_hat = Morphism::new(&t_top, &t_top, -1, move |n, w| ltg.apply(&dl.apply(&ltf.at(n, w))));
    let right = bpl(&rt, &delta_hat)?;
    let left = tpl(&lt, &delta);
    let top = right.top().clone();
    let left = Reduction {
        f: left.f.retarget(&top, &om),
        g: left.g.retarget(&om, &top),
        h: left.h.retarget(&top, &top),
    };
    let e2 = Equivalence::new(left, right)?;
    compose_equivalences(&e1, &e2)
}
