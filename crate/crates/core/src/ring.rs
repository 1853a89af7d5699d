//! Chain rings Z/p^m, group rings (Z/p^m)[G] over finite abelian p-groups,
//! and Howell-form linear algebra over the base chain ring.
//!
//! Group-ring elements are coefficient vectors in the group basis. Group
//! elements are indexed in mixed radix: index = e_0 + o_0 * (e_1 + o_1 * ...).

use serde::{Deserialize, Serialize};

use crate::Error;

/// Residues modulo q = p^m.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Zq {
    pub p: u64,
    pub m: u32,
    pub q: u64,
}

impl Zq {
    pub fn new(p: u64, m: u32) -> Zq {
        Zq { p, m, q: p.pow(m) }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.q
    }

    pub fn from_i64(&self, a: i64) -> u64 {
        a.rem_euclid(self.q as i64) as u64
    }

    /// p-adic valuation, `m` for zero.
    pub fn val(&self, mut a: u64) -> u32 {
        if a == 0 {
            return self.m;
        }
        let mut v = 0;
        while a % self.p == 0 {
            a /= self.p;
            v += 1;
        }
        v
    }

    pub fn pow_p(&self, k: u32) -> u64 {
        if k >= self.m {
            0
        } else {
            self.p.pow(k)
        }
    }

    pub fn is_unit(&self, a: u64) -> bool {
        a % self.p != 0
    }

    pub fn inv(&self, a: u64) -> Option<u64> {
        if !self.is_unit(a) {
            return None;
        }
        let (mut r0, mut r1) = (self.q as i64, a as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let k = r0 / r1;
            (r0, r1) = (r1, r0 - k * r1);
            (t0, t1) = (t1, t0 - k * t1);
        }
        Some(self.from_i64(t0))
    }

    /// Writes a nonzero `a` as p^v * u with u a unit.
    pub fn split(&self, a: u64) -> (u32, u64) {
        let v = self.val(a);
        (v, a / self.p.pow(v))
    }

    pub fn reduce_to(&self, a: u64, m: u32) -> u64 {
        a % self.p.pow(m)
    }
}

/// Howell form of the row module spanned by `rows` (each of length `ncols`).
///
/// Rows come back in echelon order with pivot entries p^v, entries above a
/// pivot reduced modulo it, and the Howell property: any element of the span
/// that vanishes in the first c columns is spanned by the rows whose pivot
/// lies at column c or later.
pub fn howell(zq: Zq, rows: Vec<Vec<u64>>, ncols: usize) -> Vec<Vec<u64>> {
    let mut work: Vec<Vec<u64>> = rows.into_iter().filter(|r| r.iter().any(|&x| x != 0)).collect();
    let mut out: Vec<(usize, Vec<u64>)> = Vec::new();
    for c in 0..ncols {
        if work.is_empty() {
            break;
        }
        let mut best = None;
        let mut bv = zq.m;
        for (i, r) in work.iter().enumerate() {
            let v = zq.val(r[c]);
            if v < bv {
                bv = v;
                best = Some(i);
                if v == 0 {
                    break;
                }
            }
        }
        let Some(bi) = best else { continue };
        let mut piv = work.swap_remove(bi);
        let (v, u) = zq.split(piv[c]);
        let ui = zq.inv(u).unwrap();
        if ui != 1 {
            for x in piv[c..].iter_mut() {
                *x = zq.mul(*x, ui);
            }
        }
        let pv = zq.p.pow(v);
        for r in work.iter_mut() {
            if r[c] != 0 {
                let f = zq.neg(r[c] / pv);
                axpy(zq, r, f, &piv, c);
            }
        }
        if v > 0 {
            let s = zq.p.pow(zq.m - v);
            let extra: Vec<u64> = piv.iter().map(|&x| zq.mul(x, s)).collect();
            if extra.iter().any(|&x| x != 0) {
                work.push(extra);
            }
        }
        work.retain(|r| r.iter().any(|&x| x != 0));
        out.push((c, piv));
    }
    for i in 0..out.len() {
        let (c, pv) = (out[i].0, out[i].1[out[i].0]);
        let (lo, hi) = out.split_at_mut(i);
        for (_, rj) in lo.iter_mut() {
            let f = rj[c] / pv;
            if f != 0 {
                axpy(zq, rj, zq.neg(f), &hi[0].1, c);
            }
        }
    }
    out.into_iter().map(|(_, r)| r).collect()
}

/// r += f * s on columns from `start`.
#[inline]
pub fn axpy(zq: Zq, r: &mut [u64], f: u64, s: &[u64], start: usize) {
    if f == 0 {
        return;
    }
    for (x, &y) in r[start..].iter_mut().zip(&s[start..]) {
        if y != 0 {
            *x = (*x + f * y) % zq.q;
        }
    }
}

/// A submodule of (Z/p^m)^ncols held in Howell form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span {
    pub zq: Zq,
    pub ncols: usize,
    pub rows: Vec<Vec<u64>>,
    pivots: Vec<usize>,
}

fn lead(r: &[u64]) -> usize {
    r.iter().position(|&x| x != 0).unwrap()
}

impl Span {
    pub fn new(zq: Zq, ncols: usize, gens: Vec<Vec<u64>>) -> Span {
        debug_assert!(gens.iter().all(|g| g.len() == ncols));
        let rows = howell(zq, gens, ncols);
        let pivots = rows.iter().map(|r| lead(r)).collect();
        Span { zq, ncols, rows, pivots }
    }

    pub fn zero(zq: Zq, ncols: usize) -> Span {
        Span { zq, ncols, rows: vec![], pivots: vec![] }
    }

    pub fn full(zq: Zq, ncols: usize) -> Span {
        let rows = (0..ncols).map(|i| unit_vec(ncols, i)).collect();
        Span { zq, ncols, rows, pivots: (0..ncols).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    /// Replaces `v` by its canonical representative modulo the span.
    pub fn reduce(&self, v: &mut [u64]) {
        for (r, &c) in self.rows.iter().zip(&self.pivots) {
            if v[c] != 0 {
                let f = v[c] / r[c];
                if f != 0 {
                    axpy(self.zq, v, self.zq.neg(f), r, c);
                }
            }
        }
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(|&x| x == 0)
    }

    pub fn contains_span(&self, other: &Span) -> bool {
        other.rows.iter().all(|r| self.contains(r))
    }

    /// log_p of the number of elements.
    pub fn log_size(&self) -> u32 {
        self.rows
            .iter()
            .zip(&self.pivots)
            .map(|(r, &c)| self.zq.m - self.zq.val(r[c]))
            .sum()
    }

    pub fn is_full(&self) -> bool {
        self.log_size() == self.zq.m * self.ncols as u32
    }

    pub fn sum(&self, other: &Span) -> Span {
        let mut g = self.rows.clone();
        g.extend(other.rows.iter().cloned());
        Span::new(self.zq, self.ncols, g)
    }

    pub fn with(&self, extra: &[Vec<u64>]) -> Span {
        let mut g = self.rows.clone();
        g.extend(extra.iter().cloned());
        Span::new(self.zq, self.ncols, g)
    }

    pub fn intersect(&self, other: &Span) -> Span {
        // y in both: y = a A = b B  <=>  (a, b) in left kernel of [A; -B]
        let n = self.ncols;
        let mut stacked: Vec<Vec<u64>> = self.rows.clone();
        for r in &other.rows {
            stacked.push(r.iter().map(|&x| self.zq.neg(x)).collect());
        }
        let k = left_kernel(self.zq, &stacked, n);
        let na = self.rows.len();
        let gens = k
            .rows
            .iter()
            .map(|y| {
                let mut v = vec![0u64; n];
                for (i, r) in self.rows.iter().enumerate() {
                    axpy(self.zq, &mut v, y[i], r, 0);
                }
                let _ = na;
                v
            })
            .collect();
        Span::new(self.zq, n, gens)
    }

    /// Elements of the quotient (Z/p^m)^ncols / span, enumerated through
    /// canonical representatives is expensive; this only reports whether the
    /// span is the whole space.
    pub fn codim_log(&self) -> u32 {
        self.zq.m * self.ncols as u32 - self.log_size()
    }
}

pub fn unit_vec(n: usize, i: usize) -> Vec<u64> {
    let mut v = vec![0; n];
    v[i] = 1;
    v
}

/// {y : y B in W}, with B given by rows (k rows of length ncols).
pub fn preimage(zq: Zq, b: &[Vec<u64>], ncols: usize, w: Option<&Span>) -> Span {
    let k = b.len();
    let mut aug: Vec<Vec<u64>> = Vec::with_capacity(k + w.map_or(0, |s| s.rows.len()));
    for (i, r) in b.iter().enumerate() {
        let mut row = r.clone();
        row.resize(ncols + k, 0);
        row[ncols + i] = 1;
        aug.push(row);
    }
    if let Some(w) = w {
        for r in &w.rows {
            let mut row = r.clone();
            row.resize(ncols + k, 0);
            aug.push(row);
        }
    }
    let h = howell(zq, aug, ncols + k);
    let gens = h
        .into_iter()
        .filter(|r| r[..ncols].iter().all(|&x| x == 0))
        .map(|r| r[ncols..].to_vec())
        .collect();
    Span::new(zq, k, gens)
}

/// {y : y B = 0}.
pub fn left_kernel(zq: Zq, b: &[Vec<u64>], ncols: usize) -> Span {
    preimage(zq, b, ncols, None)
}

/// Some y with y B = t, if any.
pub fn solve_left(zq: Zq, b: &[Vec<u64>], ncols: usize, t: &[u64]) -> Option<Vec<u64>> {
    let k = b.len();
    let aug: Vec<Vec<u64>> = b
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.resize(ncols + k, 0);
            row[ncols + i] = 1;
            row
        })
        .collect();
    let s = Span::new(zq, ncols + k, aug);
    let mut v = t.to_vec();
    v.resize(ncols + k, 0);
    s.reduce(&mut v);
    if v[..ncols].iter().any(|&x| x != 0) {
        return None;
    }
    Some(v[ncols..].iter().map(|&x| zq.neg(x)).collect())
}

/// Solution set of A x = b: a particular solution and the kernel.
#[derive(Clone, Debug)]
pub struct Solutions {
    pub particular: Vec<u64>,
    pub kernel: Span,
}

/// All x with A x = b over Z/p^m (A given by rows, acting on column vectors).
pub fn solve_linear(zq: Zq, a: &[Vec<u64>], b: &[u64]) -> Option<Solutions> {
    let cols = a.first().map_or(0, |r| r.len());
    let at = transpose(a, cols);
    let particular = solve_left(zq, &at, a.len(), b)?;
    let kernel = left_kernel(zq, &at, a.len());
    Some(Solutions { particular, kernel })
}

pub fn transpose(a: &[Vec<u64>], cols: usize) -> Vec<Vec<u64>> {
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Ring descriptor as it appears in JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingSpec {
    pub p: u64,
    pub m: u32,
    #[serde(default)]
    pub orders: Vec<u64>,
}

/// (Z/p^m)[G], G = product of cyclic groups of the given orders; a chain
/// ring when `orders` is empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ring {
    pub base: Zq,
    pub orders: Vec<u64>,
    pub n: usize,
    add_table: Option<Vec<u32>>,
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

impl Ring {
    pub fn new(p: u64, m: u32, orders: &[u64]) -> Result<Ring, Error> {
        if !is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        if m == 0 {
            return Err(Error::Invalid("exponent m must be positive".into()));
        }
        if (p as f64).powi(m as i32) > 2f64.powi(31) {
            return Err(Error::Invalid(format!("{p}^{m} exceeds the supported modulus")));
        }
        for &o in orders {
            let mut x = o;
            while x > 1 && x % p == 0 {
                x /= p;
            }
            if x != 1 || o < p {
                return Err(Error::Invalid(format!("group order {o} is not a power of {p}")));
            }
        }
        let n: usize = orders.iter().map(|&o| o as usize).product();
        let mut r = Ring { base: Zq::new(p, m), orders: orders.to_vec(), n, add_table: None };
        if n > 1 && n <= 256 {
            let mut t = vec![0u32; n * n];
            for i in 0..n {
                for j in 0..n {
                    t[i * n + j] = r.gadd_slow(i, j) as u32;
                }
            }
            r.add_table = Some(t);
        }
        Ok(r)
    }

    pub fn from_spec(s: &RingSpec) -> Result<Ring, Error> {
        Ring::new(s.p, s.m, &s.orders)
    }

    pub fn spec(&self) -> RingSpec {
        RingSpec { p: self.base.p, m: self.base.m, orders: self.orders.clone() }
    }

    pub fn is_chain(&self) -> bool {
        self.n == 1
    }

    /// Same group, base reduced to Z/p^m2.
    pub fn with_m(&self, m2: u32) -> Ring {
        Ring::new(self.base.p, m2, &self.orders).unwrap()
    }

    pub fn digits(&self, mut i: usize) -> Vec<u64> {
        self.orders
            .iter()
            .map(|&o| {
                let d = (i as u64) % o;
                i /= o as usize;
                d
            })
            .collect()
    }

    pub fn index(&self, digits: &[u64]) -> usize {
        let mut i = 0usize;
        for (d, &o) in digits.iter().zip(&self.orders).rev() {
            i = i * o as usize + (*d % o) as usize;
        }
        i
    }

    fn gadd_slow(&self, i: usize, j: usize) -> usize {
        let a = self.digits(i);
        let b = self.digits(j);
        let s: Vec<u64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        self.index(&s)
    }

    #[inline]
    pub fn gadd(&self, i: usize, j: usize) -> usize {
        match &self.add_table {
            Some(t) => t[i * self.n + j] as usize,
            None => self.gadd_slow(i, j),
        }
    }

    pub fn ginv(&self, i: usize) -> usize {
        let d: Vec<u64> = self.digits(i).iter().zip(&self.orders).map(|(x, o)| (o - x) % o).collect();
        self.index(&d)
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.n]
    }

    pub fn one(&self) -> Vec<u64> {
        self.scalar(1)
    }

    pub fn scalar(&self, a: u64) -> Vec<u64> {
        let mut v = self.zero();
        v[0] = a % self.base.q;
        v
    }

    /// The group element with the given index.
    pub fn group_elem(&self, i: usize) -> Vec<u64> {
        unit_vec(self.n, i)
    }

    /// The i-th cyclic generator sigma_i.
    pub fn sigma(&self, i: usize) -> Vec<u64> {
        let mut d = vec![0u64; self.orders.len()];
        d[i] = 1;
        self.group_elem(self.index(&d))
    }

    /// Sum of all group elements.
    pub fn norm_elem(&self) -> Vec<u64> {
        vec![1; self.n]
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| self.base.add(x, y)).collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| self.base.sub(x, y)).collect()
    }

    pub fn neg(&self, a: &[u64]) -> Vec<u64> {
        a.iter().map(|&x| self.base.neg(x)).collect()
    }

    pub fn scale(&self, s: u64, a: &[u64]) -> Vec<u64> {
        a.iter().map(|&x| self.base.mul(s, x)).collect()
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        if self.n == 1 {
            return vec![self.base.mul(a[0], b[0])];
        }
        let mut out = vec![0u64; self.n];
        self.mul_acc(&mut out, a, b);
        out
    }

    /// out += a * b.
    pub fn mul_acc(&self, out: &mut [u64], a: &[u64], b: &[u64]) {
        let q = self.base.q;
        if self.n == 1 {
            out[0] = (out[0] + a[0] * b[0]) % q;
            return;
        }
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                if y != 0 {
                    let k = self.gadd(i, j);
                    out[k] = (out[k] + x * y) % q;
                }
            }
        }
    }

    pub fn is_zero(&self, a: &[u64]) -> bool {
        a.iter().all(|&x| x == 0)
    }

    pub fn augmentation(&self, a: &[u64]) -> u64 {
        a.iter().fold(0, |s, &x| self.base.add(s, x))
    }

    pub fn is_unit(&self, a: &[u64]) -> bool {
        self.base.is_unit(self.augmentation(a))
    }

    pub fn inv(&self, a: &[u64]) -> Option<Vec<u64>> {
        if !self.is_unit(a) {
            return None;
        }
        if self.n == 1 {
            return Some(vec![self.base.inv(a[0]).unwrap()]);
        }
        solve_left(self.base, &self.mul_matrix(a), self.n, &self.one())
    }

    /// Generator of the socle: p^(m-1) times the norm element.
    pub fn socle_gen(&self) -> Vec<u64> {
        self.scale(self.base.p.pow(self.base.m - 1), &self.norm_elem())
    }

    /// h * a for the group element with index h.
    pub fn shift(&self, a: &[u64], h: usize) -> Vec<u64> {
        if h == 0 {
            return a.to_vec();
        }
        let mut out = vec![0u64; self.n];
        for (k, &x) in a.iter().enumerate() {
            out[self.gadd(h, k)] = x;
        }
        out
    }

    /// Matrix of x -> x * a on row vectors: row h holds h * a.
    pub fn mul_matrix(&self, a: &[u64]) -> Vec<Vec<u64>> {
        (0..self.n).map(|h| self.shift(a, h)).collect()
    }

    /// All group translates of a vector in R^g stored flat (g * n entries).
    pub fn translates(&self, v: &[u64]) -> Vec<Vec<u64>> {
        if self.n == 1 {
            return vec![v.to_vec()];
        }
        let g = v.len() / self.n;
        (0..self.n)
            .map(|h| {
                let mut out = vec![0u64; v.len()];
                for j in 0..g {
                    let s = &v[j * self.n..(j + 1) * self.n];
                    for (k, &x) in s.iter().enumerate() {
                        out[j * self.n + self.gadd(h, k)] = x;
                    }
                }
                out
            })
            .collect()
    }

    /// Base span of the R-submodule of R^g generated by `gens`.
    pub fn rspan(&self, g: usize, gens: &[Vec<u64>]) -> Span {
        let mut rows = Vec::with_capacity(gens.len() * self.n);
        for v in gens {
            rows.extend(self.translates(v));
        }
        Span::new(self.base, g * self.n, rows)
    }

    /// Restriction of scalars of an R-matrix (rows of R-vectors, x -> x A):
    /// row (i, h) of the result is h * A_i.
    pub fn restrict(&self, rows: &[Vec<u64>]) -> Vec<Vec<u64>> {
        rows.iter().flat_map(|r| self.translates(r)).collect()
    }

    /// Inverse of `restrict`: keeps the identity translates.
    pub fn unrestrict(&self, rows: &[Vec<u64>]) -> Vec<Vec<u64>> {
        rows.iter().step_by(self.n).cloned().collect()
    }

    /// a * v for v in R^g (flat).
    pub fn scale_vec(&self, a: &[u64], v: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; v.len()];
        for j in 0..v.len() / self.n {
            self.mul_acc(&mut out[j * self.n..(j + 1) * self.n], a, &v[j * self.n..(j + 1) * self.n]);
        }
        out
    }

    /// out += a * v.
    pub fn axpy_vec(&self, out: &mut [u64], a: &[u64], v: &[u64]) {
        for j in 0..v.len() / self.n {
            self.mul_acc(&mut out[j * self.n..(j + 1) * self.n], a, &v[j * self.n..(j + 1) * self.n]);
        }
    }

    pub fn entry<'a>(&self, v: &'a [u64], j: usize) -> &'a [u64] {
        &v[j * self.n..(j + 1) * self.n]
    }

    /// Determinant of a square matrix of ring elements (entries[i][j]).
    pub fn det(&self, a: &[Vec<Vec<u64>>]) -> Vec<u64> {
        let k = a.len();
        if k == 0 {
            return self.one();
        }
        if self.n == 1 {
            let b: Vec<Vec<u64>> = a.iter().map(|r| r.iter().map(|e| e[0]).collect()).collect();
            return vec![det_zq(self.base, &b)];
        }
        // subset dynamic programme over columns
        let mut dp: Vec<Option<Vec<u64>>> = vec![None; 1 << k];
        dp[0] = Some(self.one());
        for s in 0..(1usize << k) {
            let Some(cur) = dp[s].take() else { continue };
            let row = s.count_ones() as usize;
            if row == k {
                dp[s] = Some(cur);
                continue;
            }
            for j in 0..k {
                if s >> j & 1 == 1 || self.is_zero(&a[row][j]) {
                    continue;
                }
                let above = (s >> (j + 1)).count_ones();
                let mut t = self.mul(&cur, &a[row][j]);
                if above % 2 == 1 {
                    t = self.neg(&t);
                }
                let slot = dp[s | 1 << j].get_or_insert_with(|| self.zero());
                *slot = self.add(slot, &t);
            }
            dp[s] = Some(cur);
        }
        dp[(1 << k) - 1].clone().unwrap_or_else(|| self.zero())
    }

    /// Reduction of coefficients to Z/p^m2.
    pub fn reduce_elem(&self, a: &[u64], m2: u32) -> Vec<u64> {
        a.iter().map(|&x| self.base.reduce_to(x, m2)).collect()
    }
}

/// Determinant over Z/p^m by elimination with pivoting on valuation.
pub fn det_zq(zq: Zq, a: &[Vec<u64>]) -> u64 {
    let k = a.len();
    let mut m: Vec<Vec<u64>> = a.to_vec();
    let mut det = 1u64;
    for c in 0..k {
        let mut best = None;
        let mut bv = zq.m;
        for (i, row) in m.iter().enumerate().skip(c) {
            let v = zq.val(row[c]);
            if v < bv {
                bv = v;
                best = Some(i);
            }
        }
        let Some(bi) = best else { return 0 };
        if bi != c {
            m.swap(bi, c);
            det = zq.neg(det);
        }
        let (v, u) = zq.split(m[c][c]);
        det = zq.mul(det, m[c][c]);
        if det == 0 {
            return 0;
        }
        let ui = zq.inv(u).unwrap();
        let pv = zq.p.pow(v);
        let piv = m[c].clone();
        for row in m.iter_mut().skip(c + 1) {
            if row[c] != 0 {
                // row[c] = p^w * t with w >= v; eliminate exactly
                let f = zq.mul(row[c] / pv, ui);
                axpy(zq, row, zq.neg(f), &piv, c);
            }
        }
    }
    det
}
