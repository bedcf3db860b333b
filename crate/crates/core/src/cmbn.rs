//! Finite integer combinations of generators of a fixed degree.

use std::fmt;

use crate::error::Error;
use crate::gen::Gen;
use crate::guard::fail;

/// Terms are sorted strictly by generator, coefficients nonzero.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Cmbn {
    pub deg: i32,
    pub terms: Vec<(i64, Gen)>,
}

fn checked_add(a: i64, b: i64) -> i64 {
    a.checked_add(b)
        .unwrap_or_else(|| fail(Error::Resource("coefficient overflow".into())))
}

fn checked_mul(a: i64, b: i64) -> i64 {
    a.checked_mul(b)
        .unwrap_or_else(|| fail(Error::Resource("coefficient overflow".into())))
}

impl Cmbn {
    pub fn zero(deg: i32) -> Cmbn {
        Cmbn { deg, terms: Vec::new() }
    }

    pub fn gen(deg: i32, g: Gen) -> Cmbn {
        Cmbn { deg, terms: vec![(1, g)] }
    }

    pub fn term(deg: i32, c: i64, g: Gen) -> Cmbn {
        if c == 0 {
            Cmbn::zero(deg)
        } else {
            Cmbn { deg, terms: vec![(c, g)] }
        }
    }

    /// Normalizes an arbitrary list of terms.
    pub fn from_terms(deg: i32, mut terms: Vec<(i64, Gen)>) -> Cmbn {
        if terms.len() <= 1 {
            terms.retain(|t| t.0 != 0);
            return Cmbn { deg, terms };
        }
        terms.sort_unstable_by(|a, b| a.1.cmp(&b.1));
        let mut out: Vec<(i64, Gen)> = Vec::with_capacity(terms.len());
        for (c, g) in terms {
            match out.last_mut() {
                Some(last) if last.1 == g => last.0 = checked_add(last.0, c),
                _ => {
                    if let Some(last) = out.last() {
                        if last.0 == 0 {
                            out.pop();
                        }
                    }
                    out.push((c, g));
                }
            }
        }
        if out.last().map_or(false, |t| t.0 == 0) {
            out.pop();
        }
        Cmbn { deg, terms: out }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, g: &Gen) -> i64 {
        match self.terms.binary_search_by(|t| t.1.cmp(g)) {
            Ok(i) => self.terms[i].0,
            Err(_) => 0,
        }
    }

    /// Sum; degrees must agree.
    pub fn add(&self, other: &Cmbn) -> Cmbn {
        self.axpy(1, other)
    }

    pub fn sub(&self, other: &Cmbn) -> Cmbn {
        self.axpy(-1, other)
    }

    /// `self + k * other` by a sorted merge.
    pub fn axpy(&self, k: i64, other: &Cmbn) -> Cmbn {
        if self.deg != other.deg {
            fail(Error::Contract(format!(
                "adding combinations of degrees {} and {}",
                self.deg, other.deg
            )));
        }
        if other.is_zero() || k == 0 {
            return self.clone();
        }
        if self.is_zero() {
            return other.scale(k);
        }
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() && j < b.len() {
            match a[i].1.cmp(&b[j].1) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((checked_mul(k, b[j].0), b[j].1.clone()));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = checked_add(a[i].0, checked_mul(k, b[j].0));
                    if c != 0 {
                        out.push((c, a[i].1.clone()));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().map(|(c, g)| (checked_mul(k, *c), g.clone())));
        Cmbn { deg: self.deg, terms: out }
    }

    pub fn scale(&self, k: i64) -> Cmbn {
        if k == 0 {
            return Cmbn::zero(self.deg);
        }
        Cmbn {
            deg: self.deg,
            terms: self.terms.iter().map(|(c, g)| (checked_mul(*c, k), g.clone())).collect(),
        }
    }

    pub fn neg(&self) -> Cmbn {
        self.scale(-1)
    }

    /// Linear extension of a generator-wise map landing in degree `deg`.
    pub fn map<F: FnMut(&Gen) -> Cmbn>(&self, deg: i32, mut f: F) -> Cmbn {
        let mut acc = Acc::new(deg);
        for (c, g) in &self.terms {
            acc.add_scaled(*c, &f(g));
        }
        acc.finish()
    }
}

/// Accumulator for many terms; normalizes once at the end.
pub struct Acc {
    deg: i32,
    terms: Vec<(i64, Gen)>,
    limit: usize,
}

impl Acc {
    pub fn new(deg: i32) -> Acc {
        Acc { deg, terms: Vec::new(), limit: 4096 }
    }

    pub fn push(&mut self, c: i64, g: Gen) {
        if c != 0 {
            self.terms.push((c, g));
        }
    }

    pub fn add_scaled(&mut self, k: i64, c: &Cmbn) {
        if k == 0 || c.is_zero() {
            return;
        }
        if c.deg != self.deg {
            fail(Error::Contract(format!(
                "accumulating a degree {} combination into degree {}",
                c.deg, self.deg
            )));
        }
        for (x, g) in &c.terms {
            self.terms.push((checked_mul(k, *x), g.clone()));
        }
        if self.terms.len() > self.limit {
            let t = std::mem::take(&mut self.terms);
            self.terms = Cmbn::from_terms(self.deg, t).terms;
            self.limit = self.limit.max(2 * self.terms.len());
        }
    }

    pub fn add(&mut self, c: &Cmbn) {
        self.add_scaled(1, c)
    }

    pub fn finish(self) -> Cmbn {
        Cmbn::from_terms(self.deg, self.terms)
    }
}

impl fmt::Display for Cmbn {
    /// One term per line: coefficient then generator.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{{CMBN {}}}", self.deg)?;
        for (c, g) in &self.terms {
            writeln!(f, "{c} {g}")?;
        }
        Ok(())
    }
}

/// `a + b`, erroring on a degree mismatch.
pub fn cmbn_add(a: &Cmbn, b: &Cmbn) -> crate::Result<Cmbn> {
    if a.deg != b.deg {
        return Err(Error::Contract(format!(
            "adding combinations of degrees {} and {}",
            a.deg, b.deg
        )));
    }
    Ok(a.add(b))
}
