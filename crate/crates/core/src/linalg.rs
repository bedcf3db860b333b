//! Exact integer matrices, Smith normal form, homology of a pair of boundary
//! matrices and the lifting problem `g * f = F`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Matrices with fewer than this many rows and columns are stored densely.
pub const DENSE_LIMIT: usize = 32;

#[derive(Clone, Debug)]
enum Storage {
    Dense(Vec<BigInt>),
    Sparse(BTreeMap<(usize, usize), BigInt>),
}

/// An immutable integer matrix.
#[derive(Clone, Debug)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Storage,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_entries(rows, cols, std::iter::empty::<(usize, usize, BigInt)>())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_entries(n, n, (0..n).map(|i| (i, i, BigInt::one())))
    }

    /// Builds a matrix from `(row, col, value)` triples; repeated positions add up.
    pub fn from_entries<I, V>(rows: usize, cols: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, V)>,
        V: Into<BigInt>,
    {
        let mut map: BTreeMap<(usize, usize), BigInt> = BTreeMap::new();
        for (r, c, v) in entries {
            assert!(r < rows && c < cols, "entry ({r},{c}) outside {rows}x{cols}");
            let v: BigInt = v.into();
            let e = map.entry((r, c)).or_insert_with(BigInt::zero);
            *e += v;
        }
        map.retain(|_, v| !v.is_zero());
        if rows < DENSE_LIMIT && cols < DENSE_LIMIT {
            let mut d = vec![BigInt::zero(); rows * cols];
            for ((r, c), v) in map {
                d[r * cols + c] = v;
            }
            IntMatrix { rows, cols, data: Storage::Dense(d) }
        } else {
            IntMatrix { rows, cols, data: Storage::Sparse(map) }
        }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut ents = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                if v != 0 {
                    ents.push((i, j, BigInt::from(v)));
                }
            }
        }
        Self::from_entries(r, c, ents)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.data, Storage::Dense(_))
    }

    pub fn get(&self, r: usize, c: usize) -> Result<BigInt> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::Shape(format!(
                "entry ({r},{c}) outside {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(match &self.data {
            Storage::Dense(d) => d[r * self.cols + c].clone(),
            Storage::Sparse(m) => m.get(&(r, c)).cloned().unwrap_or_default(),
        })
    }

    /// Nonzero entries in row-major order.
    pub fn nonzeros(&self) -> Vec<(usize, usize, BigInt)> {
        match &self.data {
            Storage::Dense(d) => {
                let mut out = Vec::new();
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        let v = &d[r * self.cols + c];
                        if !v.is_zero() {
                            out.push((r, c, v.clone()));
                        }
                    }
                }
                out
            }
            Storage::Sparse(m) => m.iter().map(|(&(r, c), v)| (r, c, v.clone())).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.nonzeros().is_empty()
    }

    pub fn transpose(&self) -> Self {
        Self::from_entries(
            self.cols,
            self.rows,
            self.nonzeros().into_iter().map(|(r, c, v)| (c, r, v)),
        )
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut by_row: Vec<Vec<(usize, BigInt)>> = vec![Vec::new(); other.rows];
        for (r, c, v) in other.nonzeros() {
            by_row[r].push((c, v));
        }
        let mut acc: BTreeMap<(usize, usize), BigInt> = BTreeMap::new();
        for (r, k, v) in self.nonzeros() {
            for (c, w) in &by_row[k] {
                *acc.entry((r, *c)).or_insert_with(BigInt::zero) += &v * w;
            }
        }
        Ok(Self::from_entries(self.rows, other.cols, acc.into_iter().map(|((r, c), v)| (r, c, v))))
    }

    pub fn determinant(&self) -> Result<BigInt> {
        if self.rows != self.cols {
            return Err(Error::Shape("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); n]; n];
        for (r, c, v) in self.nonzeros() {
            a[r][c] = v;
        }
        Ok(bareiss_det(a))
    }
}

impl PartialEq for IntMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.nonzeros() == other.nonzeros()
    }
}

impl Eq for IntMatrix {}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> =
                (0..self.cols).map(|c| self.get(r, c).unwrap().to_string()).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Fraction-free Gaussian elimination.
fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

/// Invariant factors with unimodular transforms: `p * m * q == diag`.
#[derive(Clone, Debug)]
pub struct SmithForm {
    pub diag: Vec<BigInt>,
    pub p: IntMatrix,
    pub q: IntMatrix,
    pub rank: usize,
}

impl SmithForm {
    /// The `rows x cols` diagonal matrix carrying the invariant factors.
    pub fn diag_matrix(&self) -> IntMatrix {
        IntMatrix::from_entries(
            self.p.rows(),
            self.q.cols(),
            self.diag.iter().enumerate().map(|(i, d)| (i, i, d.clone())),
        )
    }
}

/// A finitely generated abelian group `Z/d1 + ... + Z/dk + Z^r` in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbelianGroupDescr {
    pub torsion: Vec<BigInt>,
    pub free_rank: usize,
}

impl AbelianGroupDescr {
    pub fn new(torsion: &[u64], free_rank: usize) -> Self {
        Self::from_factors(torsion.iter().map(|&t| BigInt::from(t)), free_rank)
    }

    pub fn zero() -> Self {
        AbelianGroupDescr { torsion: Vec::new(), free_rank: 0 }
    }

    pub fn free(rank: usize) -> Self {
        AbelianGroupDescr { torsion: Vec::new(), free_rank: rank }
    }

    /// Normalizes arbitrary cyclic factors: zeros become free rank, units vanish,
    /// the rest is rearranged into a divisibility chain.
    pub fn from_factors<I: IntoIterator<Item = BigInt>>(factors: I, free_rank: usize) -> Self {
        let mut free = free_rank;
        let mut tors = Vec::new();
        for f in factors {
            let f = f.abs();
            if f.is_zero() {
                free += 1;
            } else if !f.is_one() {
                tors.push(f);
            }
        }
        let mut torsion = divisibility_chain(tors);
        torsion.retain(|x| !x.is_one());
        AbelianGroupDescr { torsion, free_rank: free }
    }

    pub fn is_trivial(&self) -> bool {
        self.torsion.is_empty() && self.free_rank == 0
    }

    pub fn is_valid(&self) -> bool {
        self.torsion.iter().all(|d| d > &BigInt::one())
            && self.torsion.windows(2).all(|w| (&w[1] % &w[0]).is_zero())
    }

    /// Cyclic summands in the usual order: torsion from largest to smallest, then Z's.
    pub fn summands(&self) -> Vec<Option<BigInt>> {
        let mut out: Vec<Option<BigInt>> = self.torsion.iter().rev().cloned().map(Some).collect();
        out.extend(std::iter::repeat(None).take(self.free_rank));
        out
    }
}

impl fmt::Display for AbelianGroupDescr {
    /// `Z/4 + Z/2 + Z`, with runs of equal summands collapsed as `23×Z/2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts: Vec<String> = Vec::new();
        let items = self.summands();
        let mut i = 0;
        while i < items.len() {
            let mut j = i;
            while j < items.len() && items[j] == items[i] {
                j += 1;
            }
            let name = match &items[i] {
                Some(d) => format!("Z/{d}"),
                None => "Z".to_string(),
            };
            if j - i > 1 {
                parts.push(format!("{}×{}", j - i, name));
            } else {
                parts.push(name);
            }
            i = j;
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// Rearranges positive integers (all ≥ 2) into invariant factors of the same group.
fn divisibility_chain(mut v: Vec<BigInt>) -> Vec<BigInt> {
    // Repeatedly replace (a, b) by (gcd, lcm) until sorted by divisibility.
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            let g = v[i].gcd(&v[j]);
            if g != v[i] {
                let l = &v[i] / &g * &v[j];
                v[i] = g;
                v[j] = l;
            }
        }
    }
    v
}

/// Working matrix for elimination: rows as sparse maps plus a column index.
struct Work {
    rows: Vec<BTreeMap<usize, BigInt>>,
    cols: Vec<BTreeSet<usize>>,
}

impl Work {
    fn new(m: &IntMatrix) -> Self {
        let mut w = Work {
            rows: vec![BTreeMap::new(); m.rows()],
            cols: vec![BTreeSet::new(); m.cols()],
        };
        for (r, c, v) in m.nonzeros() {
            w.rows[r].insert(c, v);
            w.cols[c].insert(r);
        }
        w
    }

    /// row[t] -= q * row[s]
    fn row_axpy(&mut self, t: usize, s: usize, q: &BigInt) {
        let src: Vec<(usize, BigInt)> = self.rows[s].iter().map(|(c, v)| (*c, v.clone())).collect();
        for (c, v) in src {
            let e = self.rows[t].entry(c).or_insert_with(BigInt::zero);
            *e -= q * v;
            if e.is_zero() {
                self.rows[t].remove(&c);
                self.cols[c].remove(&t);
            } else {
                self.cols[c].insert(t);
            }
        }
    }

    /// col[t] -= q * col[s]
    fn col_axpy(&mut self, t: usize, s: usize, q: &BigInt) {
        let rows: Vec<usize> = self.cols[s].iter().copied().collect();
        for r in rows {
            let v = self.rows[r][&s].clone();
            let e = self.rows[r].entry(t).or_insert_with(BigInt::zero);
            *e -= q * v;
            if e.is_zero() {
                self.rows[r].remove(&t);
                self.cols[t].remove(&r);
            } else {
                self.cols[t].insert(r);
            }
        }
    }
}

/// Row-operation recorder for a unimodular transform (stored by rows).
struct Transform {
    rows: Vec<BTreeMap<usize, BigInt>>,
}

impl Transform {
    fn identity(n: usize) -> Self {
        Transform {
            rows: (0..n).map(|i| BTreeMap::from([(i, BigInt::one())])).collect(),
        }
    }

    fn axpy(&mut self, t: usize, s: usize, q: &BigInt) {
        let src: Vec<(usize, BigInt)> = self.rows[s].iter().map(|(c, v)| (*c, v.clone())).collect();
        for (c, v) in src {
            let e = self.rows[t].entry(c).or_insert_with(BigInt::zero);
            *e -= q * v;
            if e.is_zero() {
                self.rows[t].remove(&c);
            }
        }
    }

    /// Replaces rows (i, j) by (a*ri + b*rj, c*ri + d*rj).
    fn mix(&mut self, i: usize, j: usize, a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt) {
        let ri = std::mem::take(&mut self.rows[i]);
        let rj = std::mem::take(&mut self.rows[j]);
        let comb = |x: &BigInt, y: &BigInt| {
            let mut out = BTreeMap::new();
            for (k, v) in &ri {
                *out.entry(*k).or_insert_with(BigInt::zero) += x * v;
            }
            for (k, v) in &rj {
                *out.entry(*k).or_insert_with(BigInt::zero) += y * v;
            }
            out.retain(|_, v: &mut BigInt| !v.is_zero());
            out
        };
        self.rows[i] = comb(a, b);
        self.rows[j] = comb(c, d);
    }

    fn negate(&mut self, i: usize) {
        for v in self.rows[i].values_mut() {
            *v = -v.clone();
        }
    }

    fn into_matrix(self, n: usize, transpose: bool) -> IntMatrix {
        let mut ents = Vec::new();
        for (r, row) in self.rows.into_iter().enumerate() {
            for (c, v) in row {
                if transpose {
                    ents.push((c, r, v));
                } else {
                    ents.push((r, c, v));
                }
            }
        }
        IntMatrix::from_entries(n, n, ents)
    }
}

/// Pivot: nonzero entry of minimal absolute value among active rows and columns,
/// ties broken by lowest (row, col).
fn choose_pivot(w: &Work) -> Option<(usize, usize)> {
    let mut best: Option<(BigInt, usize, usize)> = None;
    for (r, row) in w.rows.iter().enumerate() {
        for (c, v) in row {
            let a = v.abs();
            let better = match &best {
                None => true,
                Some((b, _, _)) => a < *b,
            };
            if better {
                let unit = a.is_one();
                best = Some((a, r, *c));
                if unit {
                    return best.map(|(_, r, c)| (r, c));
                }
            }
        }
    }
    best.map(|(_, r, c)| (r, c))
}

/// Quotient rounded to nearest so remainders are as small as possible.
fn near_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_mod_floor(b);
    let twice: BigInt = &r * BigInt::from(2);
    if twice.abs() > b.abs() {
        q + 1
    } else {
        q
    }
}

struct Elimination {
    /// (row, col, pivot value) in elimination order.
    pivots: Vec<(usize, usize, BigInt)>,
}

fn eliminate(w: &mut Work, mut p: Option<&mut Transform>, mut qt: Option<&mut Transform>) -> Elimination {
    let mut pivots = Vec::new();
    while let Some((r, c)) = choose_pivot(w) {
        let pv = w.rows[r][&c].clone();
        let others: Vec<usize> = w.cols[c].iter().copied().filter(|&i| i != r).collect();
        for i in others {
            let q = near_div(&w.rows[i][&c], &pv);
            if !q.is_zero() {
                w.row_axpy(i, r, &q);
                if let Some(p) = p.as_deref_mut() {
                    p.axpy(i, r, &q);
                }
            }
        }
        let others: Vec<usize> = w.rows[r].keys().copied().filter(|&j| j != c).collect();
        for j in others {
            let q = near_div(&w.rows[r][&j], &pv);
            if !q.is_zero() {
                w.col_axpy(j, c, &q);
                if let Some(qt) = qt.as_deref_mut() {
                    qt.axpy(j, c, &q);
                }
            }
        }
        // Surviving remainders are strictly smaller than the pivot; pick again.
        if w.cols[c].len() == 1 && w.rows[r].len() == 1 {
            let v = w.rows[r].remove(&c).unwrap();
            w.cols[c].remove(&r);
            pivots.push((r, c, v));
        }
    }
    Elimination { pivots }
}

/// Smith normal form with unimodular transforms.
pub fn smith_normal_form(m: &IntMatrix) -> SmithForm {
    let (nr, nc) = (m.rows(), m.cols());
    let mut w = Work::new(m);
    let mut p = Transform::identity(nr);
    let mut qt = Transform::identity(nc);
    let el = eliminate(&mut w, Some(&mut p), Some(&mut qt));
    // Permute pivots to the leading diagonal positions.
    let rank = el.pivots.len();
    let mut row_order: Vec<usize> = el.pivots.iter().map(|x| x.0).collect();
    let mut col_order: Vec<usize> = el.pivots.iter().map(|x| x.1).collect();
    let used_r: BTreeSet<usize> = row_order.iter().copied().collect();
    let used_c: BTreeSet<usize> = col_order.iter().copied().collect();
    row_order.extend((0..nr).filter(|r| !used_r.contains(r)));
    col_order.extend((0..nc).filter(|c| !used_c.contains(c)));
    let mut p = Transform { rows: row_order.iter().map(|&r| std::mem::take(&mut p.rows[r])).collect() };
    let mut qt = Transform { rows: col_order.iter().map(|&c| std::mem::take(&mut qt.rows[c])).collect() };
    let mut diag: Vec<BigInt> = el.pivots.into_iter().map(|x| x.2).collect();
    // Signs: make every factor positive through the row transform.
    for (i, d) in diag.iter_mut().enumerate() {
        if d.is_negative() {
            *d = -d.clone();
            p.negate(i);
        }
    }
    // Divisibility: diag(a, b) -> diag(gcd, lcm) with explicit 2x2 unimodular moves.
    for i in 0..rank {
        for j in i + 1..rank {
            let (a, b) = (diag[i].clone(), diag[j].clone());
            if (&b % &a).is_zero() {
                continue;
            }
            let eg = a.extended_gcd(&b);
            let (g, x, y) = (eg.gcd, eg.x, eg.y);
            let (bg, ag) = (&b / &g, &a / &g);
            // Left: [[x, y], [-b/g, a/g]]; right: [[1, -y b/g], [1, x a/g]].
            p.mix(i, j, &x, &y, &(-&bg), &ag);
            // Columns of Q mix as: col_i' = col_i + col_j, col_j' = -y b/g col_i + x a/g col_j.
            qt.mix(i, j, &BigInt::one(), &BigInt::one(), &(-(&y * &bg)), &(&x * &ag));
            diag[j] = &a / &g * &b;
            diag[i] = g;
        }
    }
    SmithForm {
        diag,
        p: p.into_matrix(nr, false),
        q: qt.into_matrix(nc, true),
        rank,
    }
}

/// Invariant factors only (no transforms), for large boundary matrices.
pub fn invariant_factors(m: &IntMatrix) -> Vec<BigInt> {
    let mut w = Work::new(m);
    let el = eliminate(&mut w, None, None);
    let mut ones = 0usize;
    let mut rest = Vec::new();
    for (_, _, v) in el.pivots {
        let v = v.abs();
        if v.is_one() {
            ones += 1;
        } else {
            rest.push(v);
        }
    }
    let mut out = vec![BigInt::one(); ones];
    let mut rest = divisibility_chain(rest);
    rest.sort();
    out.extend(rest);
    out
}

pub fn rank(m: &IntMatrix) -> usize {
    let mut w = Work::new(m);
    eliminate(&mut w, None, None).pivots.len()
}

/// H = ker(d_out) / im(d_in) where `d_in: C_{n+1} -> C_n` and `d_out: C_n -> C_{n-1}`
/// act on column vectors.
pub fn homology_of_pair(d_in: &IntMatrix, d_out: &IntMatrix) -> Result<AbelianGroupDescr> {
    if d_in.rows() != d_out.cols() {
        return Err(Error::Shape(format!(
            "d_in has {} rows but d_out has {} columns",
            d_in.rows(),
            d_out.cols()
        )));
    }
    if !d_out.mul(d_in)?.is_zero() {
        return Err(Error::Contract("boundary matrices do not compose to zero".into()));
    }
    let n = d_out.cols();
    let r_out = rank(d_out);
    let f_in = invariant_factors(d_in);
    let r_in = f_in.len();
    Ok(AbelianGroupDescr::from_factors(f_in, n - r_out - r_in))
}

/// ker(d_out) / im(d_in) with representatives: one `(order, cycle)` per nontrivial
/// cyclic summand, order 0 meaning Z.
pub fn homology_generators(d_in: &IntMatrix, d_out: &IntMatrix) -> Result<Vec<(BigInt, Vec<BigInt>)>> {
    if d_in.rows() != d_out.cols() {
        return Err(Error::Shape(format!(
            "d_in has {} rows but d_out has {} columns",
            d_in.rows(),
            d_out.cols()
        )));
    }
    let n = d_out.cols();
    let s = smith_normal_form(d_out);
    let k = n - s.rank;
    if k == 0 {
        return Ok(Vec::new());
    }
    let kernel = IntMatrix::from_entries(
        n,
        k,
        s.q.nonzeros().into_iter().filter(|e| e.1 >= s.rank).map(|(r, c, v)| (r, c - s.rank, v)),
    );
    let xt = solve_factorization(&kernel.transpose(), &d_in.transpose())?
        .ok_or_else(|| Error::Contract("image of d_in is not in the kernel of d_out".into()))?;
    let t = smith_normal_form(&xt.transpose());
    let pinv = solve_factorization(&t.p, &IntMatrix::identity(k))?.expect("unimodular transform");
    let gens = kernel.mul(&pinv)?;
    let mut cols: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); n]; k];
    for (r, c, v) in gens.nonzeros() {
        cols[c][r] = v;
    }
    let mut out = Vec::new();
    for (i, col) in cols.into_iter().enumerate() {
        let order = if i < t.rank { t.diag[i].clone() } else { BigInt::zero() };
        if !order.is_one() {
            out.push((order, col));
        }
    }
    Ok(out)
}

/// Finds `g` (p x n) with `g * f == F` for `f` (n x m) and `F` (p x m), if one exists.
pub fn solve_factorization(f: &IntMatrix, big_f: &IntMatrix) -> Result<Option<IntMatrix>> {
    if f.cols() != big_f.cols() {
        return Err(Error::Shape(format!(
            "f has {} columns but F has {}",
            f.cols(),
            big_f.cols()
        )));
    }
    let (n, m, p) = (f.rows(), f.cols(), big_f.rows());
    let s = smith_normal_form(f);
    // g f = F  <=>  (g P^-1) D = F Q.
    let y = big_f.mul(&s.q)?;
    let mut x = Vec::new();
    for (r, c, v) in y.nonzeros() {
        if c >= s.rank {
            return Ok(None);
        }
        let (q, rem) = v.div_rem(&s.diag[c]);
        if !rem.is_zero() {
            return Ok(None);
        }
        x.push((r, c, q));
    }
    let _ = m;
    let x = IntMatrix::from_entries(p, n, x);
    Ok(Some(x.mul(&s.p)?))
}

/// Canonical group presented by a relation matrix whose rows index generators.
pub fn canonical_form(presentation: &IntMatrix) -> AbelianGroupDescr {
    let f = invariant_factors(presentation);
    let free = presentation.rows() - f.len();
    AbelianGroupDescr::from_factors(f, free)
}

/// Converts a small integer to i64, failing loudly if it does not fit.
pub fn to_i64(v: &BigInt) -> i64 {
    v.to_i64().expect("integer does not fit in 64 bits")
}
