//! Chain complexes given generator-wise, chain morphisms, tensor products and
//! homology of effective complexes.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::cmbn::{Acc, Cmbn};
use crate::error::{Error, Result};
use crate::gen::Gen;
use crate::guard::{catch, fail};
use crate::linalg::{homology_of_pair, AbelianGroupDescr, IntMatrix};

/// A thread-safe memo table. The lock is never held while computing.
pub struct Memo<K, V> {
    map: Mutex<HashMap<K, V>>,
}

impl<K: Eq + Hash + Clone, V: Clone> Memo<K, V> {
    pub fn new() -> Self {
        Memo { map: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, k: &K) -> Option<V> {
        self.map.lock().unwrap().get(k).cloned()
    }

    pub fn insert(&self, k: K, v: V) {
        self.map.lock().unwrap().insert(k, v);
    }

    pub fn get_or<F: FnOnce() -> V>(&self, k: &K, f: F) -> V {
        if let Some(v) = self.get(k) {
            return v;
        }
        let v = f();
        self.insert(k.clone(), v.clone());
        v
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<K: Eq + Hash + Clone, V: Clone> Default for Memo<K, V> {
    fn default() -> Self {
        Self::new()
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

type DiffFn = Box<dyn Fn(i32, &Gen) -> Cmbn + Send + Sync>;
type BasisFn = Box<dyn Fn(i32) -> Option<Vec<Gen>> + Send + Sync>;
type MemberFn = Box<dyn Fn(i32, &Gen) -> bool + Send + Sync>;
type SampleFn = Box<dyn Fn(i32, &mut Rng) -> Option<Gen> + Send + Sync>;

pub type Rng = rand_chacha::ChaCha8Rng;

/// A chain complex of free Z-modules described generator by generator.
///
/// `basis(n)` is `Some` exactly in the degrees where the complex is effective.
pub struct Complex {
    id: u64,
    name: String,
    diff: DiffFn,
    basis: BasisFn,
    member: Option<MemberFn>,
    sampler: Option<SampleFn>,
    base: Option<Gen>,
    memo: Option<Memo<(i32, Gen), Cmbn>>,
    basis_memo: Memo<i32, Option<Arc<Vec<Gen>>>>,
}

pub type CC = Arc<Complex>;

pub struct ComplexBuilder {
    name: String,
    diff: DiffFn,
    basis: BasisFn,
    member: Option<MemberFn>,
    sampler: Option<SampleFn>,
    base: Option<Gen>,
    memo: bool,
}

impl ComplexBuilder {
    pub fn basis<F: Fn(i32) -> Option<Vec<Gen>> + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.basis = Box::new(f);
        self
    }

    pub fn member<F: Fn(i32, &Gen) -> bool + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.member = Some(Box::new(f));
        self
    }

    /// Draws constructor-reachable generators of a degree (for property checks).
    pub fn sampler<F: Fn(i32, &mut Rng) -> Option<Gen> + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.sampler = Some(Box::new(f));
        self
    }

    /// Declares degree 0 to be spanned by the single generator `g`.
    pub fn base(mut self, g: Gen) -> Self {
        self.base = Some(g);
        self
    }

    /// Skips the differential cache (for differentials cheaper than a lookup).
    pub fn no_memo(mut self) -> Self {
        self.memo = false;
        self
    }

    pub fn build(self) -> CC {
        let id = fresh_id();
        Arc::new(Complex {
            id,
            name: if self.name.is_empty() { format!("K{id}") } else { self.name },
            diff: self.diff,
            basis: self.basis,
            member: self.member,
            sampler: self.sampler,
            base: self.base,
            memo: if self.memo { Some(Memo::new()) } else { None },
            basis_memo: Memo::new(),
        })
    }
}

impl Complex {
    pub fn builder<F>(name: impl Into<String>, diff: F) -> ComplexBuilder
    where
        F: Fn(i32, &Gen) -> Cmbn + Send + Sync + 'static,
    {
        ComplexBuilder {
            name: name.into(),
            diff: Box::new(diff),
            basis: Box::new(|_| None),
            member: None,
            sampler: None,
            base: None,
            memo: true,
        }
    }

    /// Same generators, basis, sampler and basepoint as `old`, new differential.
    pub fn derived<F>(old: &CC, name: impl Into<String>, diff: F) -> ComplexBuilder
    where
        F: Fn(i32, &Gen) -> Cmbn + Send + Sync + 'static,
    {
        let (o1, o2, o3) = (old.clone(), old.clone(), old.clone());
        let mut b = Complex::builder(name, diff)
            .basis(move |n| o1.basis_arc(n).map(|v| (*v).clone()))
            .member(move |n, g| o2.contains(n, g))
            .sampler(move |n, rng| o3.sample(n, rng));
        if let Some(g) = old.base() {
            b = b.base(g.clone());
        }
        b
    }

    /// A finite complex from explicit bases and differentials.
    pub fn finite(name: impl Into<String>, cells: Vec<(i32, Gen, Vec<(i64, Gen)>)>) -> CC {
        let mut by_deg: HashMap<i32, Vec<Gen>> = HashMap::new();
        let mut diffs: HashMap<(i32, Gen), Cmbn> = HashMap::new();
        for (n, g, d) in cells {
            by_deg.entry(n).or_default().push(g.clone());
            diffs.insert((n, g), Cmbn::from_terms(n - 1, d));
        }
        for v in by_deg.values_mut() {
            v.sort();
        }
        let diffs2 = diffs.clone();
        let base = match by_deg.get(&0) {
            Some(v) if v.len() == 1 => Some(v[0].clone()),
            _ => None,
        };
        let mut b = Complex::builder(name, move |n, g| diffs.get(&(n, g.clone())).cloned().unwrap_or_else(|| Cmbn::zero(n - 1)))
            .basis(move |n| Some(by_deg.get(&n).cloned().unwrap_or_default()))
            .member(move |n, g| diffs2.contains_key(&(n, g.clone())))
            .no_memo();
        if let Some(g) = base {
            b = b.base(g);
        }
        b.build()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> Option<&Gen> {
        self.base.as_ref()
    }

    /// A random generator of degree `n`: from the sampler, else from the basis.
    pub fn sample(&self, n: i32, rng: &mut Rng) -> Option<Gen> {
        use rand::Rng as _;
        if n < 0 {
            return None;
        }
        if let Some(s) = &self.sampler {
            return s(n, rng);
        }
        let b = self.basis_arc(n)?;
        if b.is_empty() {
            None
        } else {
            Some(b[rng.gen_range(0..b.len())].clone())
        }
    }

    pub fn contains(&self, n: i32, g: &Gen) -> bool {
        if n < 0 {
            return false;
        }
        match &self.member {
            Some(m) => m(n, g),
            None => match self.basis_arc(n) {
                Some(b) => b.binary_search(g).is_ok(),
                None => true,
            },
        }
    }

    /// Differential of a generator of degree `n`.
    pub fn d(&self, n: i32, g: &Gen) -> Cmbn {
        if n <= 0 {
            return Cmbn::zero(n - 1);
        }
        match &self.memo {
            Some(m) => m.get_or(&(n, g.clone()), || (self.diff)(n, g)),
            None => (self.diff)(n, g),
        }
    }

    pub fn diff(&self, c: &Cmbn) -> Cmbn {
        c.map(c.deg - 1, |g| self.d(c.deg, g))
    }

    fn basis_arc(&self, n: i32) -> Option<Arc<Vec<Gen>>> {
        if n < 0 {
            return Some(Arc::new(Vec::new()));
        }
        self.basis_memo.get_or(&n, || {
            (self.basis)(n).map(|mut v| {
                v.sort();
                v.dedup();
                Arc::new(v)
            })
        })
    }

    /// The sorted basis in degree `n`, or a LOCALLY-EFFECTIVE error.
    pub fn basis(&self, n: i32) -> Result<Vec<Gen>> {
        match self.basis_arc(n) {
            Some(b) => Ok((*b).clone()),
            None => Err(Error::LocallyEffective(self.name.clone(), n)),
        }
    }

    pub fn is_effective_at(&self, n: i32) -> bool {
        self.basis_arc(n).is_some()
    }

    /// Boundary matrix of `d: C_n -> C_{n-1}` acting on column vectors.
    pub fn boundary_matrix(&self, n: i32) -> Result<IntMatrix> {
        let src = self.basis_arc(n).ok_or_else(|| Error::LocallyEffective(self.name.clone(), n))?;
        let tgt = self
            .basis_arc(n - 1)
            .ok_or_else(|| Error::LocallyEffective(self.name.clone(), n - 1))?;
        let index: HashMap<&Gen, usize> = tgt.iter().enumerate().map(|(i, g)| (g, i)).collect();
        let mut ents = Vec::new();
        let columns: Vec<Cmbn> = catch(|| src.iter().map(|g| self.d(n, g)).collect())?;
        for (j, dg) in columns.iter().enumerate() {
            for (c, h) in &dg.terms {
                let i = *index.get(h).ok_or_else(|| {
                    Error::Contract(format!("{}: d({}) leaves the basis: {}", self.name, src[j], h))
                })?;
                ents.push((i, j, *c));
            }
        }
        Ok(IntMatrix::from_entries(tgt.len(), src.len(), ents))
    }
}

/// H_n of an effective complex via Smith normal form.
pub fn homology(c: &Complex, n: i32) -> Result<AbelianGroupDescr> {
    if n < 0 {
        return Ok(AbelianGroupDescr::zero());
    }
    let d_out = c.boundary_matrix(n)?;
    let d_in = c.boundary_matrix(n + 1)?;
    homology_of_pair(&d_in, &d_out)
}

type MapFn = Box<dyn Fn(i32, &Gen) -> Cmbn + Send + Sync>;

struct MorphInner {
    src: CC,
    tgt: CC,
    shift: i32,
    f: MapFn,
    memo: Option<Memo<(i32, Gen), Cmbn>>,
}

/// A degree-`shift` linear map given on generators.
#[derive(Clone)]
pub struct Morphism(Arc<MorphInner>);

impl Morphism {
    pub fn new<F>(src: &CC, tgt: &CC, shift: i32, f: F) -> Morphism
    where
        F: Fn(i32, &Gen) -> Cmbn + Send + Sync + 'static,
    {
        Morphism(Arc::new(MorphInner {
            src: src.clone(),
            tgt: tgt.clone(),
            shift,
            f: Box::new(f),
            memo: Some(Memo::new()),
        }))
    }

    /// Like `new` but without a cache, for maps cheaper than a lookup.
    pub fn cheap<F>(src: &CC, tgt: &CC, shift: i32, f: F) -> Morphism
    where
        F: Fn(i32, &Gen) -> Cmbn + Send + Sync + 'static,
    {
        Morphism(Arc::new(MorphInner {
            src: src.clone(),
            tgt: tgt.clone(),
            shift,
            f: Box::new(f),
            memo: None,
        }))
    }

    pub fn identity(c: &CC) -> Morphism {
        Morphism::cheap(c, c, 0, |n, g| Cmbn::gen(n, g.clone()))
    }

    pub fn zero(src: &CC, tgt: &CC, shift: i32) -> Morphism {
        Morphism::cheap(src, tgt, shift, move |n, _| Cmbn::zero(n + shift))
    }

    pub fn src(&self) -> &CC {
        &self.0.src
    }

    pub fn tgt(&self) -> &CC {
        &self.0.tgt
    }

    pub fn shift(&self) -> i32 {
        self.0.shift
    }

    pub fn at(&self, n: i32, g: &Gen) -> Cmbn {
        if n < 0 {
            return Cmbn::zero(n + self.0.shift);
        }
        match &self.0.memo {
            Some(m) => m.get_or(&(n, g.clone()), || (self.0.f)(n, g)),
            None => (self.0.f)(n, g),
        }
    }

    pub fn apply(&self, c: &Cmbn) -> Cmbn {
        c.map(c.deg + self.0.shift, |g| self.at(c.deg, g))
    }

    /// `apply` with a membership check on the source.
    pub fn apply_checked(&self, c: &Cmbn) -> Result<Cmbn> {
        for (_, g) in &c.terms {
            if !self.0.src.contains(c.deg, g) {
                return Err(Error::Precondition(format!(
                    "{g} is not a degree {} generator of {}",
                    c.deg,
                    self.0.src.name()
                )));
            }
        }
        catch(|| self.apply(c))
    }

    /// `self ∘ other`.
    pub fn after(&self, other: &Morphism) -> Morphism {
        let (a, b) = (self.clone(), other.clone());
        let s = b.shift();
        Morphism::cheap(other.src(), self.tgt(), self.shift() + other.shift(), move |n, g| {
            a.apply(&b.at(n, g)).with_check(n + s + a.shift())
        })
    }

    pub fn plus(&self, other: &Morphism) -> Morphism {
        assert_eq!(self.shift(), other.shift(), "adding maps of different degree");
        let (a, b) = (self.clone(), other.clone());
        Morphism::cheap(self.src(), self.tgt(), self.shift(), move |n, g| a.at(n, g).add(&b.at(n, g)))
    }

    pub fn scaled(&self, k: i64) -> Morphism {
        let a = self.clone();
        Morphism::cheap(self.src(), self.tgt(), self.shift(), move |n, g| a.at(n, g).scale(k))
    }

    /// Same map, re-labelled endpoints (for perturbed complexes sharing generators).
    pub fn retarget(&self, src: &CC, tgt: &CC) -> Morphism {
        let a = self.clone();
        Morphism::cheap(src, tgt, self.shift(), move |n, g| a.at(n, g))
    }

    /// The differential of a complex as a degree −1 map.
    pub fn differential(c: &CC) -> Morphism {
        let cc = c.clone();
        Morphism::cheap(c, c, -1, move |n, g| cc.d(n, g))
    }
}

trait WithCheck {
    fn with_check(self, deg: i32) -> Self;
}

impl WithCheck for Cmbn {
    fn with_check(self, deg: i32) -> Self {
        if self.deg != deg && !self.is_zero() {
            fail(Error::Contract(format!("degree bookkeeping: got {} expected {}", self.deg, deg)));
        }
        Cmbn { deg, terms: self.terms }
    }
}

pub const TENSOR: &str = "T";

/// Generator `x ⊗ y` with |x| = p, |y| = q.
pub fn tensor_gen(p: i32, x: &Gen, q: i32, y: &Gen) -> Gen {
    Gen::graded(TENSOR, vec![(p, x.clone()), (q, y.clone())])
}

pub fn untensor(g: &Gen) -> (i32, &Gen, i32, &Gen) {
    match g.as_graded(TENSOR) {
        Some([(p, x), (q, y)]) => (*p, x, *q, y),
        _ => fail(Error::Contract(format!("{g} is not a tensor generator"))),
    }
}

/// Basis of a graded tensor product in degree `n`.
pub fn tensor_basis(c: &Complex, d: &Complex, n: i32) -> Option<Vec<Gen>> {
    let mut out = Vec::new();
    for p in 0..=n {
        let bc = c.basis(p).ok()?;
        if bc.is_empty() {
            continue;
        }
        let bd = d.basis(n - p).ok()?;
        for x in &bc {
            for y in &bd {
                out.push(tensor_gen(p, x, n - p, y));
            }
        }
    }
    Some(out)
}

/// `C ⊗ D` with d(x⊗y) = dx⊗y + (−1)^|x| x⊗dy.
pub fn tensor_product(c: &CC, d: &CC) -> CC {
    let (c1, d1) = (c.clone(), d.clone());
    let (c2, d2) = (c.clone(), d.clone());
    let (c3, d3) = (c.clone(), d.clone());
    let (c4, d4) = (c.clone(), d.clone());
    let mut builder = Complex::builder(format!("{}⊗{}", c.name(), d.name()), move |n, g| {
        let (p, x, q, y) = untensor(g);
        let mut acc = Acc::new(n - 1);
        for (k, x2) in &c1.d(p, x).terms {
            acc.push(*k, tensor_gen(p - 1, x2, q, y));
        }
        let sign = if p % 2 == 0 { 1 } else { -1 };
        for (k, y2) in &d1.d(q, y).terms {
            acc.push(sign * k, tensor_gen(p, x, q - 1, y2));
        }
        acc.finish()
    })
    .basis(move |n| tensor_basis(&c2, &d2, n))
    .member(move |n, g| match g.as_graded(TENSOR) {
        Some([(p, x), (q, y)]) => p + q == n && c3.contains(*p, x) && d3.contains(*q, y),
        _ => false,
    })
    .sampler(move |n, rng| {
        use rand::Rng as _;
        for _ in 0..16 {
            let p = rng.gen_range(0..=n);
            if let (Some(x), Some(y)) = (c4.sample(p, rng), d4.sample(n - p, rng)) {
                return Some(tensor_gen(p, &x, n - p, &y));
            }
        }
        None
    });
    if let (Some(a), Some(b)) = (c.base(), d.base()) {
        builder = builder.base(tensor_gen(0, a, 0, b));
    }
    builder.build()
}

/// `f ⊗ g` with the Koszul sign (−1)^{|g|·|x|}.
pub fn tensor_morphism(f: &Morphism, g: &Morphism, src: &CC, tgt: &CC) -> Morphism {
    let (f, g) = (f.clone(), g.clone());
    let (sf, sg) = (f.shift(), g.shift());
    Morphism::cheap(src, tgt, sf + sg, move |n, gen| {
        let (p, x, q, y) = untensor(gen);
        let fx = f.at(p, x);
        if fx.is_zero() {
            return Cmbn::zero(n + sf + sg);
        }
        let gy = g.at(q, y);
        let sign = if (sg * p) % 2 == 0 { 1 } else { -1 };
        let mut acc = Acc::new(n + sf + sg);
        for (a, x2) in &fx.terms {
            for (b, y2) in &gy.terms {
                acc.push(sign * a * b, tensor_gen(p + sf, x2, q + sg, y2));
            }
        }
        acc.finish()
    })
}

/// `c` plus extra generators with prescribed differentials.
pub fn with_cells(c: &CC, cells: Vec<(i32, Gen, Cmbn)>) -> CC {
    let cells = Arc::new(cells);
    let (c1, k1) = (c.clone(), cells.clone());
    let (c2, k2) = (c.clone(), cells.clone());
    let (c3, k3) = (c.clone(), cells.clone());
    let (c4, k4) = (c.clone(), cells.clone());
    let mut b = Complex::builder("", move |n, g| {
        for (m, x, d) in k1.iter() {
            if *m == n && x == g {
                return d.clone();
            }
        }
        c1.d(n, g)
    })
    .basis(move |n| {
        let mut v = c2.basis(n).ok()?;
        v.extend(k2.iter().filter(|t| t.0 == n).map(|t| t.1.clone()));
        Some(v)
    })
    .member(move |n, g| k3.iter().any(|t| t.0 == n && t.1 == *g) || c3.contains(n, g))
    .sampler(move |n, rng| {
        use rand::Rng as _;
        let extra: Vec<&Gen> = k4.iter().filter(|t| t.0 == n).map(|t| &t.1).collect();
        if !extra.is_empty() && rng.gen_bool(0.3) {
            return Some(extra[rng.gen_range(0..extra.len())].clone());
        }
        c4.sample(n, rng).or_else(|| extra.first().map(|g| (*g).clone()))
    });
    if let Some(g) = c.base() {
        b = b.base(g.clone());
    }
    b.build()
}
