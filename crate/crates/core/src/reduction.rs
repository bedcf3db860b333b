//! Reductions, strong chain equivalences and the perturbation lemmas.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;

use crate::cmbn::{Acc, Cmbn};
use crate::complex::{tensor_morphism, tensor_product, Complex, Morphism, Rng, CC};
use crate::error::{Error, Result};
use crate::gen::Gen;
use crate::guard::{bpl_cap, catch, check_budget, fail};

/// A reduction `top ⇒ bottom`: f: top → bottom, g: bottom → top, h: top → top of degree +1.
#[derive(Clone)]
pub struct Reduction {
    pub f: Morphism,
    pub g: Morphism,
    pub h: Morphism,
}

fn same(a: &CC, b: &CC) -> bool {
    a.id() == b.id() || a.name() == b.name()
}

impl Reduction {
    pub fn new(f: Morphism, g: Morphism, h: Morphism) -> Result<Reduction> {
        let ok = same(f.src(), g.tgt())
            && same(f.tgt(), g.src())
            && same(h.src(), f.src())
            && same(h.tgt(), f.src())
            && f.shift() == 0
            && g.shift() == 0
            && h.shift() == 1;
        if !ok {
            return Err(Error::Precondition(format!(
                "inconsistent reduction data: f {}→{}, g {}→{}, h {}→{}",
                f.src().name(),
                f.tgt().name(),
                g.src().name(),
                g.tgt().name(),
                h.src().name(),
                h.tgt().name()
            )));
        }
        Ok(Reduction { f, g, h })
    }

    pub fn top(&self) -> &CC {
        self.f.src()
    }

    pub fn bottom(&self) -> &CC {
        self.f.tgt()
    }
}

pub fn identity_reduction(c: &CC) -> Reduction {
    Reduction {
        f: Morphism::identity(c),
        g: Morphism::identity(c),
        h: Morphism::zero(c, c, 1),
    }
}

/// `r1: C ⇒ D` then `r2: D ⇒ E`.
pub fn compose_reductions(r1: &Reduction, r2: &Reduction) -> Result<Reduction> {
    if !same(r1.bottom(), r2.top()) {
        return Err(Error::Precondition(format!(
            "cannot compose {} ⇒ {} with {} ⇒ {}",
            r1.top().name(),
            r1.bottom().name(),
            r2.top().name(),
            r2.bottom().name()
        )));
    }
    let f = r2.f.after(&r1.f);
    let g = r1.g.after(&r2.g);
    let h = r1.h.plus(&r1.g.after(&r2.h.after(&r1.f)));
    Ok(Reduction { f, g, h })
}

/// `r1 ⊗ r2` with h = h1 ⊗ 1 + g1 f1 ⊗ h2.
pub fn tensor_reduction(r1: &Reduction, r2: &Reduction) -> Reduction {
    let top = tensor_product(r1.top(), r2.top());
    let bot = tensor_product(r1.bottom(), r2.bottom());
    let f = tensor_morphism(&r1.f, &r2.f, &top, &bot);
    let g = tensor_morphism(&r1.g, &r2.g, &bot, &top);
    let h1 = tensor_morphism(&r1.h, &Morphism::identity(r2.top()), &top, &top);
    let gf = r1.g.after(&r1.f);
    let h2 = tensor_morphism(&gf, &r2.h, &top, &top);
    Reduction { f: memo(&f), g: memo(&g), h: memo(&h1.plus(&h2)) }
}

/// Wraps a morphism in a generator cache.
pub fn memo(m: &Morphism) -> Morphism {
    let a = m.clone();
    Morphism::new(m.src(), m.tgt(), m.shift(), move |n, g| a.at(n, g))
}

/// A strong chain equivalence `left.bottom ⇐ top ⇒ right.bottom`.
#[derive(Clone)]
pub struct Equivalence {
    pub left: Reduction,
    pub right: Reduction,
}

impl Equivalence {
    pub fn new(left: Reduction, right: Reduction) -> Result<Equivalence> {
        if !same(left.top(), right.top()) {
            return Err(Error::Precondition(format!(
                "reductions start at {} and {}",
                left.top().name(),
                right.top().name()
            )));
        }
        Ok(Equivalence { left, right })
    }

    pub fn identity(c: &CC) -> Equivalence {
        Equivalence { left: identity_reduction(c), right: identity_reduction(c) }
    }

    /// A single reduction `C ⇒ D` seen as `C ⇐ C ⇒ D`.
    pub fn from_reduction(r: &Reduction) -> Equivalence {
        Equivalence { left: identity_reduction(r.top()), right: r.clone() }
    }

    pub fn top(&self) -> &CC {
        self.left.top()
    }

    pub fn lbottom(&self) -> &CC {
        self.left.bottom()
    }

    pub fn rbottom(&self) -> &CC {
        self.right.bottom()
    }
}

impl fmt::Display for Equivalence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Equivalence {} <= {} => {}", self.lbottom().name(), self.top().name(), self.rbottom().name())
    }
}

/// `right.g` then `left.f`: carries an effective cycle back to the chains.
pub fn transfer_from_effective(e: &Equivalence, c: &Cmbn) -> Result<Cmbn> {
    let y = e.right.g.apply_checked(c)?;
    catch(|| e.left.f.apply(&y))
}

/// The perturbed complex `(C, d + δ)`.
pub fn perturb_complex(c: &CC, delta: &Morphism) -> CC {
    let (c1, dl) = (c.clone(), delta.clone());
    Complex::derived(c, "", move |n, g| c1.d(n, g).add(&dl.at(n, g))).build()
}

/// Checks `(d + δ)² = 0` on a handful of sampled generators.
fn check_square_zero(c: &CC, delta: &Morphism, degrees: i32) -> Result<()> {
    let mut rng = Rng::seed_from_u64(0x5eed);
    let dd = |x: &Cmbn| c.diff(x).add(&delta.apply(x));
    for n in 1..=degrees {
        for _ in 0..4 {
            let Some(g) = c.sample(n, &mut rng) else { break };
            let x = Cmbn::gen(n, g.clone());
            let sq = catch(|| dd(&dd(&x)))?;
            if !sq.is_zero() {
                return Err(Error::Contract(format!(
                    "perturbed differential does not square to zero on {g} in {}",
                    c.name()
                )));
            }
        }
    }
    Ok(())
}

thread_local! {
    static DEPTH: Cell<usize> = const { Cell::new(0) };
}

struct DepthGuard;

impl DepthGuard {
    fn enter(cap: usize) -> DepthGuard {
        let d = DEPTH.with(|c| {
            let d = c.get() + 1;
            c.set(d);
            d
        });
        let g = DepthGuard;
        if d > cap {
            fail(Error::Diverging(format!("perturbation series exceeded {cap} iterations")));
        }
        g
    }
}

impl Drop for DepthGuard {
    fn drop(&mut self) {
        DEPTH.with(|c| c.set(c.get() - 1));
    }
}

/// The series φ = Σ (−1)^i (hδ)^i on the top complex, generator-wise and cached.
fn phi_series(top: &CC, h: &Morphism, delta: &Morphism) -> Morphism {
    let cell: Arc<once_cell::sync::OnceCell<Morphism>> = Arc::new(once_cell::sync::OnceCell::new());
    let (h, delta, me) = (h.clone(), delta.clone(), cell.clone());
    let phi = Morphism::new(top, top, 0, move |n, g| {
        check_budget();
        let _guard = DepthGuard::enter(bpl_cap(n));
        let hd = h.apply(&delta.at(n, g));
        let mut out = Cmbn::gen(n, g.clone());
        if !hd.is_zero() {
            let rest = me.get().expect("series initialised").apply(&hd);
            out = out.sub(&rest);
        }
        out
    });
    let _ = cell.set(phi.clone());
    phi
}

/// Basic perturbation lemma: perturbs the top differential of `r` by `delta`.
pub fn bpl(r: &Reduction, delta: &Morphism) -> Result<Reduction> {
    let c = r.top();
    if delta.shift() != -1 || !same(delta.src(), c) || !same(delta.tgt(), c) {
        return Err(Error::Precondition("perturbation must be a degree −1 endomorphism of the top".into()));
    }
    check_square_zero(c, delta, 4)?;
    Ok(bpl_unchecked(r, delta))
}

/// `bpl` without the square-zero smoke test (for perturbations correct by construction).
pub fn bpl_unchecked(r: &Reduction, delta: &Morphism) -> Reduction {
    let c = r.top().clone();
    let d = r.bottom().clone();
    let c2 = perturb_complex(&c, delta);
    let phi = phi_series(&c, &r.h, delta);
    let (f, g, dl, ph) = (r.f.clone(), r.g.clone(), delta.clone(), phi.clone());
    let d_old = d.clone();
    let d2 = Complex::derived(&d, "", move |n, y| {
        let gy = g.at(n, y);
        let t = f.apply(&dl.apply(&ph.apply(&gy)));
        d_old.d(n, y).add(&t)
    })
    .build();
    let (h, ph) = (r.h.clone(), phi.clone());
    let h2 = Morphism::new(&c2, &c2, 1, move |n, x| ph.apply(&h.at(n, x)));
    let (g, ph) = (r.g.clone(), phi.clone());
    let g2 = Morphism::new(&d2, &c2, 0, move |n, y| ph.apply(&g.at(n, y)));
    let (f, dl, h2c) = (r.f.clone(), delta.clone(), h2.clone());
    let f2 = Morphism::new(&c2, &d2, 0, move |n, x| {
        let corr = f.apply(&dl.apply(&h2c.at(n, x)));
        f.at(n, x).sub(&corr)
    });
    Reduction { f: f2, g: g2, h: h2 }
}

/// Trivial perturbation lemma: perturbing the bottom by `delta` perturbs the top by g δ f.
pub fn tpl(r: &Reduction, delta: &Morphism) -> Reduction {
    let (c, d) = (r.top().clone(), r.bottom().clone());
    let (c1, f, g, dl) = (c.clone(), r.f.clone(), r.g.clone(), delta.clone());
    let c2 = Complex::derived(&c, "", move |n, x| {
        let fx = f.at(n, x);
        let t = if fx.is_zero() { Cmbn::zero(n - 1) } else { g.apply(&dl.apply(&fx)) };
        c1.d(n, x).add(&t)
    })
    .build();
    let (d1, dl) = (d.clone(), delta.clone());
    let d2 = Complex::derived(&d, "", move |n, y| d1.d(n, y).add(&dl.at(n, y))).build();
    Reduction {
        f: r.f.retarget(&c2, &d2),
        g: r.g.retarget(&d2, &c2),
        h: r.h.retarget(&c2, &c2),
    }
}

pub const BC_A: &str = "BcA";
pub const BC_B: &str = "BcB";
pub const BC_D: &str = "BcD";

/// Composes `C ⇐ A ⇒ D` with `D ⇐ B ⇒ E` through the bicone of `A ⇒ D ⇐ B`.
///
/// When all three middle complexes have a single degree-0 basepoint preserved by the
/// maps, the two basepoints are identified so a reduced top stays reduced.
pub fn compose_equivalences(e1: &Equivalence, e2: &Equivalence) -> Result<Equivalence> {
    if !same(e1.rbottom(), e2.lbottom()) {
        return Err(Error::Precondition(format!(
            "cannot compose equivalences meeting at {} and {}",
            e1.rbottom().name(),
            e2.lbottom().name()
        )));
    }
    let a = e1.top().clone();
    let b = e2.top().clone();
    let dd = e1.rbottom().clone();
    let r1 = e1.right.clone();
    let r2 = e2.left.clone();
    let bases = match (a.base(), b.base(), dd.base()) {
        (Some(a0), Some(b0), Some(x0)) => {
            let (a0, b0, x0) = (a0.clone(), b0.clone(), x0.clone());
            let ok = catch(|| {
                r1.f.at(0, &a0) == Cmbn::gen(0, x0.clone())
                    && r2.f.at(0, &b0) == Cmbn::gen(0, x0.clone())
                    && r1.g.at(0, &x0) == Cmbn::gen(0, a0.clone())
                    && r2.g.at(0, &x0) == Cmbn::gen(0, b0.clone())
                    && r1.h.at(0, &a0).is_zero()
                    && r2.h.at(0, &b0).is_zero()
            })?;
            ok.then_some((a0, b0, x0))
        }
        _ => None,
    };
    let bc = Arc::new(Bicone { a: a.clone(), b: b.clone(), d: dd.clone(), r1: r1.clone(), r2: r2.clone(), bases });
    let z = bc.complex();
    let left = compose_reductions(&bc.onto_a(&z), &e1.left)?;
    let right = compose_reductions(&bc.onto_b(&z), &e2.right)?;
    Equivalence::new(left, right)
}

struct Bicone {
    a: CC,
    b: CC,
    d: CC,
    r1: Reduction,
    r2: Reduction,
    bases: Option<(Gen, Gen, Gen)>,
}

impl Bicone {
    fn in_a(&self, c: &Cmbn) -> Cmbn {
        Cmbn::from_terms(c.deg, c.terms.iter().map(|(k, g)| (*k, Gen::node(BC_A, vec![g.clone()]))).collect())
    }

    fn gen_b(&self, g: &Gen) -> Gen {
        match &self.bases {
            Some((a0, b0, _)) if g == b0 => Gen::node(BC_A, vec![a0.clone()]),
            _ => Gen::node(BC_B, vec![g.clone()]),
        }
    }

    fn in_b(&self, c: &Cmbn) -> Cmbn {
        Cmbn::from_terms(c.deg, c.terms.iter().map(|(k, g)| (*k, self.gen_b(g))).collect())
    }

    /// Suspension of a D-combination, dropping the basepoint in the connected case.
    fn in_s(&self, c: &Cmbn) -> Cmbn {
        let x0 = self.bases.as_ref().map(|t| &t.2);
        let mut acc = Acc::new(c.deg + 1);
        for (k, g) in &c.terms {
            if c.deg == 0 && Some(g) == x0 {
                continue;
            }
            acc.push(*k, Gen::node(BC_D, vec![g.clone()]));
        }
        acc.finish()
    }

    fn split(g: &Gen) -> (&'static str, &Gen) {
        for tag in [BC_A, BC_B, BC_D] {
            if let Some([x]) = g.as_node(tag) {
                return (tag, x);
            }
        }
        fail(Error::Contract(format!("{g} is not a bicone generator")))
    }

    fn complex(self: &Arc<Self>) -> CC {
        let (s1, s2, s3, s4) = (self.clone(), self.clone(), self.clone(), self.clone());
        let mut builder = Complex::builder("", move |n, g| {
            let s = &s1;
            match Bicone::split(g) {
                (BC_A, x) => s.in_a(&s.a.d(n, x)),
                (BC_B, x) => s.in_b(&s.b.d(n, x)),
                (_, x) => {
                    let gx = s.in_a(&s.r1.g.at(n - 1, x));
                    let hx = s.in_b(&s.r2.g.at(n - 1, x));
                    gx.sub(&hx).sub(&s.in_s(&s.d.d(n - 1, x)))
                }
            }
        })
        .basis(move |n| {
            let s = &s2;
            let mut out = Vec::new();
            for x in s.a.basis(n).ok()? {
                out.push(Gen::node(BC_A, vec![x]));
            }
            for x in s.b.basis(n).ok()? {
                if !matches!(&s.bases, Some((_, b0, _)) if *b0 == x) {
                    out.push(Gen::node(BC_B, vec![x]));
                }
            }
            for x in s.d.basis(n - 1).ok()? {
                if !(n == 1 && matches!(&s.bases, Some((_, _, x0)) if *x0 == x)) {
                    out.push(Gen::node(BC_D, vec![x]));
                }
            }
            Some(out)
        })
        .member(move |n, g| {
            let s = &s3;
            match g.term() {
                crate::gen::Term::Node(BC_A, k) if k.len() == 1 => s.a.contains(n, &k[0]),
                crate::gen::Term::Node(BC_B, k) if k.len() == 1 => {
                    s.b.contains(n, &k[0]) && !matches!(&s.bases, Some((_, b0, _)) if *b0 == k[0])
                }
                crate::gen::Term::Node(BC_D, k) if k.len() == 1 => {
                    s.d.contains(n - 1, &k[0]) && !(n == 1 && matches!(&s.bases, Some((_, _, x0)) if *x0 == k[0]))
                }
                _ => false,
            }
        })
        .sampler(move |n, rng| {
            use rand::Rng as _;
            let s = &s4;
            for _ in 0..12 {
                let pick = rng.gen_range(0..3);
                let got = match pick {
                    0 => s.a.sample(n, rng).map(|x| Gen::node(BC_A, vec![x])),
                    1 => s.b.sample(n, rng).map(|x| s.gen_b(&x)),
                    _ => s.d.sample(n - 1, rng).and_then(|x| {
                        let skip = n == 1 && matches!(&s.bases, Some((_, _, x0)) if *x0 == x);
                        (!skip).then(|| Gen::node(BC_D, vec![x]))
                    }),
                };
                if got.is_some() {
                    return got;
                }
            }
            None
        });
        if let Some((a0, _, _)) = &self.bases {
            builder = builder.base(Gen::node(BC_A, vec![a0.clone()]));
        }
        builder.build()
    }

    fn onto_a(self: &Arc<Self>, z: &CC) -> Reduction {
        let (s1, s2, s3) = (self.clone(), self.clone(), self.clone());
        let f = Morphism::new(z, &self.a, 0, move |n, g| {
            let s = &s1;
            match Bicone::split(g) {
                (BC_A, x) => Cmbn::gen(n, x.clone()),
                (BC_B, x) => s.r1.g.apply(&s.r2.f.at(n, x)),
                _ => Cmbn::zero(n),
            }
        });
        let g = Morphism::cheap(&self.a, z, 0, move |n, x| s2.in_a(&Cmbn::gen(n, x.clone())));
        let h = Morphism::new(z, z, 1, move |n, g| {
            let s = &s3;
            match Bicone::split(g) {
                (BC_B, x) => s.in_b(&s.r2.h.at(n, x)).sub(&s.in_s(&s.r2.f.at(n, x))),
                _ => Cmbn::zero(n + 1),
            }
        });
        Reduction { f, g, h }
    }

    fn onto_b(self: &Arc<Self>, z: &CC) -> Reduction {
        let (s1, s2, s3) = (self.clone(), self.clone(), self.clone());
        let f = Morphism::new(z, &self.b, 0, move |n, g| {
            let s = &s1;
            match Bicone::split(g) {
                (BC_B, x) => Cmbn::gen(n, x.clone()),
                (BC_A, x) => s.r2.g.apply(&s.r1.f.at(n, x)),
                _ => Cmbn::zero(n),
            }
        });
        let g = Morphism::cheap(&self.b, z, 0, move |n, x| s2.in_b(&Cmbn::gen(n, x.clone())));
        let h = Morphism::new(z, z, 1, move |n, g| {
            let s = &s3;
            match Bicone::split(g) {
                (BC_A, x) => s.in_a(&s.r1.h.at(n, x)).add(&s.in_s(&s.r1.f.at(n, x))),
                _ => Cmbn::zero(n + 1),
            }
        });
        Reduction { f, g, h }
    }
}

/// Per-equation outcome of [`check_reduction`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub rows: Vec<(String, usize, usize)>,
    pub failures: Vec<String>,
}

pub const EQUATIONS: [&str; 9] = [
    "f∘h = 0",
    "h∘g = 0",
    "h∘h = 0",
    "f∘g = id",
    "g∘f + d∘h + h∘d = id",
    "f∘d = d∘f",
    "g∘d = d∘g",
    "d∘d = 0 (top)",
    "d∘d = 0 (bottom)",
];

impl CheckReport {
    fn new() -> CheckReport {
        CheckReport { rows: EQUATIONS.iter().map(|e| (e.to_string(), 0, 0)).collect(), failures: Vec::new() }
    }

    fn record(&mut self, i: usize, ok: Result<bool>, what: &Cmbn) {
        match ok {
            Ok(true) => self.rows[i].1 += 1,
            Ok(false) => {
                self.rows[i].2 += 1;
                if self.failures.len() < 20 {
                    let g = what.terms.first().map(|t| t.1.to_string()).unwrap_or_default();
                    self.failures.push(format!("{} fails on {} (degree {})", EQUATIONS[i], g, what.deg));
                }
            }
            Err(e) => {
                self.rows[i].2 += 1;
                if self.failures.len() < 20 {
                    self.failures.push(format!("{}: {}", EQUATIONS[i], e));
                }
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.2 == 0)
    }

    pub fn failure_count(&self) -> usize {
        self.rows.iter().map(|r| r.2).sum()
    }

    pub fn checks(&self) -> usize {
        self.rows.iter().map(|r| r.1 + r.2).sum()
    }

    pub fn merge(&mut self, other: &CheckReport) {
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.1 += b.1;
            a.2 += b.2;
        }
        self.failures.extend(other.failures.iter().cloned());
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, p, q) in &self.rows {
            writeln!(f, "{name}: {p} passed, {q} failed")?;
        }
        for m in &self.failures {
            writeln!(f, "  {m}")?;
        }
        Ok(())
    }
}

/// Evaluates the five reduction equations, both chain-map conditions and d∘d = 0.
pub fn check_reduction(r: &Reduction, top: &[Cmbn], bottom: &[Cmbn]) -> CheckReport {
    let mut rep = CheckReport::new();
    let (c, d) = (r.top(), r.bottom());
    for x in top {
        rep.record(0, catch(|| r.f.apply(&r.h.apply(x)).is_zero()), x);
        rep.record(2, catch(|| r.h.apply(&r.h.apply(x)).is_zero()), x);
        rep.record(
            4,
            catch(|| {
                let gf = r.g.apply(&r.f.apply(x));
                let dh = c.diff(&r.h.apply(x));
                let hd = r.h.apply(&c.diff(x));
                gf.add(&dh).add(&hd) == *x
            }),
            x,
        );
        rep.record(5, catch(|| r.f.apply(&c.diff(x)) == d.diff(&r.f.apply(x))), x);
        rep.record(7, catch(|| c.diff(&c.diff(x)).is_zero()), x);
    }
    for y in bottom {
        rep.record(1, catch(|| r.h.apply(&r.g.apply(y)).is_zero()), y);
        rep.record(3, catch(|| r.f.apply(&r.g.apply(y)) == *y), y);
        rep.record(6, catch(|| r.g.apply(&d.diff(y)) == c.diff(&r.g.apply(y))), y);
        rep.record(8, catch(|| d.diff(&d.diff(y)).is_zero()), y);
    }
    rep
}

/// Up to `count` distinct sampled generators in degrees `0..=max_deg`, cycling degrees.
/// A degree is dropped when it has no generators or after 40 repeats in a row.
pub fn sample_generators(c: &Complex, max_deg: i32, count: usize, rng: &mut Rng) -> Vec<Cmbn> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut dead = vec![0usize; (max_deg + 1).max(0) as usize];
    let mut tries = 0;
    while out.len() < count && tries < 40 * count.max(1) {
        let n = (tries as i32) % (max_deg + 1);
        tries += 1;
        if dead[n as usize] >= 40 {
            continue;
        }
        match c.sample(n, rng) {
            Some(g) => {
                if seen.insert((n, g.clone())) {
                    out.push(Cmbn::gen(n, g));
                    dead[n as usize] = 0;
                } else {
                    dead[n as usize] += 1;
                }
            }
            None => dead[n as usize] = 40,
        }
    }
    out
}

/// Checks a reduction on `count` sampled generators of each end.
pub fn check_reduction_sampled(r: &Reduction, max_deg: i32, count: usize, rng: &mut Rng) -> CheckReport {
    let top = sample_generators(r.top(), max_deg, count, rng);
    let bot = sample_generators(r.bottom(), max_deg, count, rng);
    check_reduction(r, &top, &bot)
}

/// Both reductions of an equivalence.
pub fn check_equivalence_sampled(e: &Equivalence, max_deg: i32, count: usize, rng: &mut Rng) -> CheckReport {
    let mut rep = check_reduction_sampled(&e.left, max_deg, count, rng);
    rep.merge(&check_reduction_sampled(&e.right, max_deg, count, rng));
    rep
}
