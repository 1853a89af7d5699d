//! Synthetic higher-rank Euler systems over group-ring towers.
//!
//! Working coefficients are Z/p^m_big; the target modulus is M = p^m. Level
//! n carries the group ring of H_n = prod_{q | n} G_q with G_q cyclic of
//! order divisible by M, and classes of rank r are C(d, r) group-ring
//! elements, d = r + s. Corestriction is coefficient projection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bidual::contract;
use crate::combo::{binom, elems, Combos};
use crate::kolyvagin::{phi_fs, regulator, verify_fs, KolyvaginSystem};
use crate::ring::{det_zq, solve_linear, Ring, Zq};
use crate::report::Check;
use crate::selmer::{det_one_minus, divisors, generate_instance, mat_inv, mat_mul, nu, SelmerInstance};
use crate::stark::basis;
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeFrob {
    pub label: String,
    /// |G_q|
    pub order: u64,
    /// Frobenius matrix on F whose det(1 - Fr x) is P_q.
    pub matrix: Vec<Vec<u64>>,
    /// Coefficients of P_q, lowest degree first.
    pub poly: Vec<u64>,
    /// Exponents of Fr_q in the generators sigma_q' (zero at q itself).
    pub exponents: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EulerTower {
    pub p: u64,
    pub m_big: u32,
    /// M = p^m
    pub m: u32,
    pub r: usize,
    pub primes: Vec<PrimeFrob>,
}

/// Index bookkeeping for the group H_n.
#[derive(Clone, Debug)]
pub struct Level {
    pub n: u32,
    pub axes: Vec<usize>,
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
    pub size: usize,
}

impl Level {
    pub fn digit(&self, h: usize, a: usize) -> usize {
        h / self.strides[a] % self.dims[a]
    }

    /// Position of prime q among the axes.
    pub fn axis_of(&self, q: usize) -> Option<usize> {
        self.axes.iter().position(|&x| x == q)
    }

    /// y * sigma_axis^t
    pub fn shift_axis(&self, y: &[u64], a: usize, t: usize) -> Vec<u64> {
        let dim = self.dims[a];
        let t = t % dim;
        if t == 0 {
            return y.to_vec();
        }
        let st = self.strides[a];
        let mut out = vec![0u64; y.len()];
        for (h, &v) in y.iter().enumerate() {
            let dg = h / st % dim;
            let nd = (dg + t) % dim;
            out[h + nd * st - dg * st] = v;
        }
        out
    }

    /// y * g, g given by exponents over all primes.
    pub fn shift(&self, y: &[u64], g: &[u64]) -> Vec<u64> {
        let mut cur = y.to_vec();
        for (a, &q) in self.axes.iter().enumerate() {
            let t = (g[q] % self.dims[a] as u64) as usize;
            if t != 0 {
                cur = self.shift_axis(&cur, a, t);
            }
        }
        cur
    }

    /// Index map of the projection H_n -> H_d.
    pub fn projection_map(&self, to: &Level) -> Vec<usize> {
        (0..self.size)
            .map(|h| {
                to.axes
                    .iter()
                    .enumerate()
                    .map(|(b, &q)| self.digit(h, self.axis_of(q).unwrap()) * to.strides[b])
                    .sum()
            })
            .collect()
    }

    /// Index map of the inclusion H_d -> H_n.
    pub fn inclusion_map(&self, from: &Level) -> Vec<usize> {
        (0..from.size)
            .map(|h| {
                from.axes
                    .iter()
                    .enumerate()
                    .map(|(b, &q)| from.digit(h, b) * self.strides[self.axis_of(q).unwrap()])
                    .sum()
            })
            .collect()
    }

    /// Exponent vector (over all primes) of index h.
    pub fn exponents(&self, h: usize, s: usize) -> Vec<u64> {
        let mut e = vec![0u64; s];
        for (a, &q) in self.axes.iter().enumerate() {
            e[q] = self.digit(h, a) as u64;
        }
        e
    }
}

impl EulerTower {
    pub fn s(&self) -> usize {
        self.primes.len()
    }

    pub fn d(&self) -> usize {
        self.r + self.s()
    }

    pub fn top(&self) -> u32 {
        ((1u64 << self.s()) - 1) as u32
    }

    pub fn big(&self) -> Zq {
        Zq::new(self.p, self.m_big)
    }

    pub fn small(&self) -> Zq {
        Zq::new(self.p, self.m)
    }

    pub fn modulus(&self) -> u64 {
        self.p.pow(self.m)
    }

    pub fn combos(&self) -> Combos {
        Combos::new(self.d(), self.r)
    }

    pub fn level(&self, n: u32) -> Level {
        let axes: Vec<usize> = (0..self.s()).filter(|q| n >> q & 1 == 1).collect();
        let dims: Vec<usize> = axes.iter().map(|&q| self.primes[q].order as usize).collect();
        let mut strides = Vec::with_capacity(dims.len());
        let mut acc = 1;
        for &d in &dims {
            strides.push(acc);
            acc *= d;
        }
        Level { n, axes, dims, strides, size: acc }
    }

    /// Exponents of Fr_q^{-1}.
    pub fn frob_inv(&self, q: usize) -> Vec<u64> {
        self.primes[q]
            .exponents
            .iter()
            .enumerate()
            .map(|(j, &a)| (self.primes[j].order - a % self.primes[j].order) % self.primes[j].order)
            .collect()
    }

    /// P_q(g) * y at a level, over Z/p^m_big.
    pub fn poly_times(&self, lv: &Level, q: usize, g: &[u64], y: &[u64]) -> Vec<u64> {
        let zq = self.big();
        let mut acc = vec![0u64; y.len()];
        let mut cur = y.to_vec();
        for (k, &c) in self.primes[q].poly.iter().enumerate() {
            if c != 0 {
                for (a, &b) in acc.iter_mut().zip(&cur) {
                    *a = zq.add(*a, zq.mul(c, b));
                }
            }
            if k + 1 < self.primes[q].poly.len() {
                cur = lv.shift(&cur, g);
            }
        }
        acc
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.m == 0 || self.m > self.m_big {
            return Err(Error::Invalid("need 1 <= m <= m_big".into()));
        }
        let m = self.modulus();
        let d = self.d();
        for (i, pf) in self.primes.iter().enumerate() {
            if pf.order % m != 0 || !is_power_of(pf.order, self.p) {
                return Err(Error::Invalid(format!("|G_{}| must be a power of p divisible by M", pf.label)));
            }
            if pf.exponents.len() != self.s() || pf.exponents[i] != 0 {
                return Err(Error::Invalid(format!("bad Frobenius exponents at {}", pf.label)));
            }
            if pf.matrix.len() != d || pf.matrix.iter().any(|r| r.len() != d) {
                return Err(Error::Invalid(format!("bad Frobenius matrix at {}", pf.label)));
            }
            let want = char_poly(self, &pf.matrix);
            if want != pf.poly {
                return Err(Error::Invalid(format!("P at {} does not match its matrix", pf.label)));
            }
            let at_one = pf.poly.iter().fold(0u64, |a, &c| (a + c) % self.big().q);
            if at_one % m != 0 {
                return Err(Error::Invalid(format!("P_{}(1) is not divisible by M", pf.label)));
            }
        }
        Ok(())
    }

    pub fn class_len(&self, n: u32) -> usize {
        binom(self.d(), self.r) * self.level(n).size
    }
}

fn is_power_of(mut x: u64, p: u64) -> bool {
    while x > 1 && x % p == 0 {
        x /= p;
    }
    x == 1
}

/// det(1 - Fr x) over Z/p^m_big.
pub fn char_poly(t: &EulerTower, mat: &[Vec<u64>]) -> Vec<u64> {
    let ring = Ring::new(t.p, t.m_big, &[]).unwrap();
    let m: Vec<Vec<Vec<u64>>> = mat.iter().map(|r| r.iter().map(|&x| vec![x]).collect()).collect();
    det_one_minus(&ring, &m).into_iter().map(|c| c[0]).collect()
}

/// Random tower with Frobenius eigenvalue 1 mod M at every prime.
pub fn generate_tower(seed: u64, p: u64, m_big: u32, m: u32, r: usize, orders: &[u64]) -> Result<EulerTower, Error> {
    if m == 0 || m > m_big {
        return Err(Error::Invalid("need 1 <= m <= m_big".into()));
    }
    if r == 0 {
        return Err(Error::Invalid("rank r must be positive".into()));
    }
    let s = orders.len();
    let d = r + s;
    let ring = Ring::new(p, m_big, &[])?;
    let zq = ring.base;
    let mm = p.pow(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe0_1e4);
    let mut primes = Vec::with_capacity(s);
    for q in 0..s {
        let (qm, qi) = loop {
            let a: Vec<Vec<Vec<u64>>> = (0..d).map(|_| (0..d).map(|_| vec![rng.gen_range(0..zq.q)]).collect()).collect();
            if let Some(ai) = mat_inv(&ring, &a) {
                break (a, ai);
            }
        };
        let mut u = vec![vec![vec![0u64]; d]; d];
        for i in 0..d {
            for j in i + 1..d {
                u[i][j] = vec![rng.gen_range(0..zq.q)];
            }
            u[i][i] = vec![if i == 0 {
                zq.add(1, zq.mul(mm % zq.q, rng.gen_range(0..zq.q)))
            } else {
                loop {
                    let x = rng.gen_range(1..zq.q);
                    if zq.is_unit(x) {
                        break x;
                    }
                }
            }];
        }
        let fr = mat_mul(&ring, &mat_mul(&ring, &qm, &u), &qi);
        let matrix: Vec<Vec<u64>> = fr.iter().map(|r| r.iter().map(|e| e[0]).collect()).collect();
        let exponents: Vec<u64> = (0..s).map(|j| if j == q { 0 } else { rng.gen_range(0..orders[j]) }).collect();
        primes.push(PrimeFrob { label: format!("q{}", q + 1), order: orders[q], matrix, poly: vec![], exponents });
    }
    let mut t = EulerTower { p, m_big, m, r, primes };
    for q in 0..s {
        let poly = char_poly(&t, &t.primes[q].matrix);
        t.primes[q].poly = poly;
    }
    t.validate()?;
    Ok(t)
}

/// Classes c_n indexed by divisor mask; each a flat [J][h] array over
/// Z/p^m_big.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EulerSystem {
    pub classes: Vec<Vec<u64>>,
}

/// Applies f to every coordinate block of a class.
fn per_coord(_t: &EulerTower, lv: &Level, c: &[u64], mut f: impl FnMut(&[u64]) -> Vec<u64>) -> Vec<u64> {
    let nj = c.len() / lv.size;
    let mut out = Vec::with_capacity(c.len());
    for j in 0..nj {
        out.extend(f(&c[j * lv.size..(j + 1) * lv.size]));
    }
    out
}

/// prod_{q | n/d} P_q(Fr_q^{-1}) acting on a class at level d.
pub fn euler_factor(t: &EulerTower, nq: u32, lv: &Level, c: &[u64]) -> Vec<u64> {
    let mut cur = c.to_vec();
    for q in 0..t.s() {
        if nq >> q & 1 == 1 {
            let g = t.frob_inv(q);
            cur = per_coord(t, lv, &cur, |y| t.poly_times(lv, q, &g, y));
        }
    }
    cur
}

pub fn project_class(t: &EulerTower, from: &Level, to: &Level, c: &[u64]) -> Vec<u64> {
    let zq = t.big();
    let map = from.projection_map(to);
    per_coord(t, from, c, |y| {
        let mut out = vec![0u64; to.size];
        for (h, &v) in y.iter().enumerate() {
            out[map[h]] = zq.add(out[map[h]], v);
        }
        out
    })
}

pub fn include_class(t: &EulerTower, from: &Level, to: &Level, c: &[u64]) -> Vec<u64> {
    let map = to.inclusion_map(from);
    per_coord(t, from, c, |y| {
        let mut out = vec![0u64; to.size];
        for (h, &v) in y.iter().enumerate() {
            out[map[h]] = v;
        }
        out
    })
}

/// c_n = sum_{d | n} prod_{q | n/d} P_q(Fr_q^{-1}) k_d, where k_1 = x and
/// every other seed lies in the joint corestriction kernel.
pub fn from_seeds(t: &EulerTower, x: &[u64], seeds: &[Vec<u64>]) -> EulerSystem {
    let top = t.top();
    let mut classes = Vec::with_capacity(1 << t.s());
    for n in 0..=top {
        let lv = t.level(n);
        let zq = t.big();
        let mut acc = vec![0u64; t.class_len(n)];
        for d in divisors(n) {
            let k = if d == 0 { x.to_vec() } else { seeds[d as usize].clone() };
            if k.iter().all(|&v| v == 0) {
                continue;
            }
            let inc = include_class(t, &t.level(d), &lv, &k);
            let term = euler_factor(t, n & !d, &lv, &inc);
            for (a, b) in acc.iter_mut().zip(term) {
                *a = zq.add(*a, b);
            }
        }
        classes.push(acc);
    }
    EulerSystem { classes }
}

/// c_n = prod_{q | n} P_q(Fr_q^{-1}) (x tensor 1).
pub fn canonical_euler(t: &EulerTower, x: &[u64]) -> EulerSystem {
    let seeds: Vec<Vec<u64>> = (0..=t.top()).map(|n| vec![0; t.class_len(n)]).collect();
    from_seeds(t, x, &seeds)
}

/// prod_{q | n} (sigma_q^e - 1) y, e = +1 or -1.
fn augmentation_kill(t: &EulerTower, lv: &Level, y: &[u64], inverse: bool) -> Vec<u64> {
    let zq = t.big();
    let mut cur = y.to_vec();
    for a in 0..lv.axes.len() {
        let step = if inverse { lv.dims[a] - 1 } else { 1 };
        let sh = lv.shift_axis(&cur, a, step);
        cur = sh.iter().zip(&cur).map(|(&u, &v)| zq.sub(u, v)).collect();
    }
    cur
}

/// Seed prod (sigma_q^{-1} - 1) (z delta_1) at level n.
pub fn constant_seed(t: &EulerTower, n: u32, z: &[u64]) -> Vec<u64> {
    let lv = t.level(n);
    let mut base = vec![0u64; t.class_len(n)];
    for (j, &v) in z.iter().enumerate() {
        base[j * lv.size] = v;
    }
    per_coord(t, &lv, &base, |y| augmentation_kill(t, &lv, y, true))
}

/// Random element of the joint corestriction kernel at level n.
pub fn random_seed(t: &EulerTower, n: u32, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let lv = t.level(n);
    let q = t.big().q;
    let base: Vec<u64> = (0..t.class_len(n)).map(|_| rng.gen_range(0..q)).collect();
    per_coord(t, &lv, &base, |y| augmentation_kill(t, &lv, y, false))
}

pub fn random_euler(t: &EulerTower, seed: u64) -> EulerSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe5);
    let q = t.big().q;
    let x: Vec<u64> = (0..binom(t.d(), t.r)).map(|_| rng.gen_range(0..q)).collect();
    let seeds: Vec<Vec<u64>> =
        (0..=t.top()).map(|n| if n == 0 { vec![] } else { random_seed(t, n, &mut rng) }).collect();
    from_seeds(t, &x, &seeds)
}

/// Euler relation at every divisor pair; returns the first failing (n, d).
pub fn check_euler_relations(t: &EulerTower, c: &EulerSystem) -> Result<usize, (u32, u32)> {
    let mut count = 0;
    for n in divisors(t.top()) {
        let ln = t.level(n);
        for d in divisors(n) {
            let ld = t.level(d);
            let lhs = project_class(t, &ln, &ld, &c.classes[n as usize]);
            let rhs = euler_factor(t, n & !d, &ld, &c.classes[d as usize]);
            if lhs != rhs {
                return Err((n, d));
            }
            count += 1;
        }
    }
    Ok(count)
}

/// D_q = sum_{i=1}^{g-1} i sigma^i, as integer coefficients.
pub fn derivative_coeffs(g: u64) -> Vec<i64> {
    (0..g as i64).collect()
}

/// (sigma - 1) D_q = |G| - N_G in Z[G], checked over the integers.
pub fn telescoping_holds(g: u64) -> bool {
    let dq = derivative_coeffs(g);
    let n = g as usize;
    let mut prod = vec![0i64; n];
    for (i, &c) in dq.iter().enumerate() {
        prod[(i + 1) % n] += c;
        prod[i] -= c;
    }
    prod.iter().enumerate().all(|(i, &v)| v == if i == 0 { g as i64 - 1 } else { -1 })
}

/// D_n applied along every axis of a level, mod M.
fn apply_derivative(t: &EulerTower, lv: &Level, y: &[u64]) -> Vec<u64> {
    let zq = t.small();
    let mut cur = y.to_vec();
    for a in 0..lv.axes.len() {
        let dim = lv.dims[a];
        let st = lv.strides[a];
        let mut out = vec![0u64; cur.len()];
        for h in 0..cur.len() {
            if h / st % dim != 0 {
                continue;
            }
            let fiber: Vec<u64> = (0..dim).map(|k| cur[h + k * st]).collect();
            for j in 0..dim {
                let mut acc = 0u64;
                for i in 1..dim {
                    let v = fiber[(j + dim - i) % dim];
                    if v != 0 {
                        acc = zq.add(acc, zq.mul(i as u64 % zq.q, v));
                    }
                }
                out[h + j * st] = acc;
            }
        }
        cur = out;
    }
    cur
}

/// D_n c_n mod M, checked for H_n-invariance.
pub fn derivative_class(t: &EulerTower, c: &[u64], n: u32) -> Result<Vec<u64>, String> {
    let lv = t.level(n);
    let mm = t.modulus();
    let red: Vec<u64> = c.iter().map(|&x| x % mm).collect();
    let dc = per_coord(t, &lv, &red, |y| apply_derivative(t, &lv, y));
    for a in 0..lv.axes.len() {
        let moved = per_coord(t, &lv, &dc, |y| lv.shift_axis(y, a, 1));
        if moved != dc {
            return Err(format!("derivative at level {n:b} is not invariant under sigma of axis {a}"));
        }
    }
    Ok(dc)
}

/// Kolyvagin derivative as an element of the r-th exterior power of
/// (Z/M)^d: the constant coefficient of the invariant class.
pub fn kolyvagin_derivative(t: &EulerTower, c: &[u64], n: u32) -> Result<Vec<u64>, String> {
    let lv = t.level(n);
    let dc = derivative_class(t, c, n)?;
    Ok((0..c.len() / lv.size).map(|j| dc[j * lv.size]).collect())
}

/// Matrix C_n with C[i][j] = -a_{ij} P'_{q_i}(1) mod M, zero diagonal, rows
/// and columns in the given prime order.
pub fn d_matrix(t: &EulerTower, order: &[usize]) -> Vec<Vec<u64>> {
    let zq = t.small();
    order
        .iter()
        .map(|&qi| {
            let dp = t.primes[qi].poly.iter().enumerate().fold(0u64, |a, (k, &c)| zq.add(a, zq.mul(k as u64 % zq.q, c % zq.q)));
            order
                .iter()
                .map(|&qj| if qi == qj { 0 } else { zq.neg(zq.mul(t.primes[qi].exponents[qj] % zq.q, dp)) })
                .collect()
        })
        .collect()
}

/// The determinant D_n with the natural prime ordering.
pub fn curly_d(t: &EulerTower, n: u32) -> u64 {
    curly_d_ordered(t, &elems(n))
}

pub fn curly_d_ordered(t: &EulerTower, order: &[usize]) -> u64 {
    if order.is_empty() {
        return 1;
    }
    det_zq(t.small(), &d_matrix(t, order))
}

/// D_n via a determinant over the group ring of H_n with entries
/// P_{q_i}(Fr_{q_i}^{-1}) projected to G_{q_j} minus P_{q_i}(1), read off by
/// the multilinear functional sum_h y_h prod_q e_q(h) mod M.
pub fn curly_d_group(t: &EulerTower, n: u32) -> u64 {
    let primes = elems(n);
    let k = primes.len();
    if k == 0 {
        return 1;
    }
    let lv = t.level(n);
    let zq = t.big();
    let small = t.small();
    // entry (i, j) as an element of Z/p^m_big[G_{q_j}]
    let entry = |i: usize, j: usize| -> Vec<u64> {
        let qi = primes[i];
        let qj = primes[j];
        let g = t.primes[qj].order as usize;
        if i == j {
            return vec![0; g];
        }
        let e = (t.primes[qj].order - t.primes[qi].exponents[qj] % t.primes[qj].order) % t.primes[qj].order;
        let mut out = vec![0u64; g];
        for (kk, &c) in t.primes[qi].poly.iter().enumerate() {
            let pos = (kk as u64 * e % g as u64) as usize;
            out[pos] = zq.add(out[pos], c);
            out[0] = zq.sub(out[0], c);
        }
        out
    };
    let mut perm: Vec<usize> = (0..k).collect();
    let mut total = vec![0u64; lv.size];
    loop {
        let sign = perm_sign(&perm);
        // product over columns j of entry(perm[j], j), a tensor product
        let mut prod = vec![0u64; lv.size];
        prod[0] = 1;
        for j in 0..k {
            let f = entry(perm[j], j);
            let mut next = vec![0u64; lv.size];
            for (h, &v) in prod.iter().enumerate() {
                if v == 0 {
                    continue;
                }
                for (e, &w) in f.iter().enumerate() {
                    if w != 0 {
                        let idx = h + e * lv.strides[j];
                        next[idx] = zq.add(next[idx], zq.mul(v, w));
                    }
                }
            }
            prod = next;
        }
        for (a, b) in total.iter_mut().zip(prod) {
            *a = if sign { zq.sub(*a, b) } else { zq.add(*a, b) };
        }
        if !next_perm(&mut perm) {
            break;
        }
    }
    let mut acc = 0u64;
    for (h, &v) in total.iter().enumerate() {
        let w: u64 = (0..k).fold(1u64, |a, j| small.mul(a, lv.digit(h, j) as u64 % small.q));
        acc = small.add(acc, small.mul(v % small.q, w));
    }
    acc
}

/// true if odd
pub fn perm_sign(p: &[usize]) -> bool {
    let mut inv = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    inv % 2 == 1
}

pub fn next_perm(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All Kolyvagin derivatives, indexed by divisor mask.
pub fn all_derivatives(t: &EulerTower, c: &EulerSystem) -> Result<Vec<Vec<u64>>, String> {
    (0..=t.top()).map(|n| kolyvagin_derivative(t, &c.classes[n as usize], n)).collect()
}

/// kappa(c)_n = sum_{d | n} D_{n/d} kappa'(c_d).
pub fn assemble_kappa(t: &EulerTower, kp: &[Vec<u64>], n: u32) -> Vec<u64> {
    let zq = t.small();
    let mut out = vec![0u64; kp[0].len()];
    for d in divisors(n) {
        let dd = curly_d(t, n & !d);
        if dd == 0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(&kp[d as usize]) {
            *o = zq.add(*o, zq.mul(dd, v));
        }
    }
    out
}

/// The same element as a signed sum over permutations of the primes of n.
pub fn assemble_kappa_perm(t: &EulerTower, kp: &[Vec<u64>], n: u32) -> Vec<u64> {
    let zq = t.small();
    let primes = elems(n);
    let k = primes.len();
    let full = d_matrix(t, &primes);
    let mut out = vec![0u64; kp[0].len()];
    let mut perm: Vec<usize> = (0..k).collect();
    loop {
        let mut dmask = 0u32;
        let mut coef = 1u64;
        for (j, &pj) in perm.iter().enumerate() {
            if pj == j {
                dmask |= 1 << primes[j];
            } else {
                coef = zq.mul(coef, full[pj][j]);
            }
        }
        if perm_sign(&perm) {
            coef = zq.neg(coef);
        }
        if coef != 0 {
            for (o, &v) in out.iter_mut().zip(&kp[dmask as usize]) {
                *o = zq.add(*o, zq.mul(coef, v));
            }
        }
        if !next_perm(&mut perm) {
            break;
        }
    }
    out
}

pub fn kappa_system(t: &EulerTower, c: &EulerSystem) -> Result<KolyvaginSystem, String> {
    let kp = all_derivatives(t, c)?;
    Ok(KolyvaginSystem { r: t.r, comps: (0..=t.top()).map(|n| assemble_kappa(t, &kp, n)).collect() })
}

/// The ring Z/M that κ(c) lives over.
pub fn target_ring(t: &EulerTower) -> Ring {
    Ring::new(t.p, t.m, &[]).unwrap()
}

/// Functional lift Psi_N of Phi: coefficients Phi_J delta_1 plus random
/// augmentation-zero elements; Psi_d is its projection.
pub fn psi_lift(t: &EulerTower, phi: &[u64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    let lv = t.level(t.top());
    let zq = t.big();
    let mut out = Vec::with_capacity(phi.len() * lv.size);
    for &a in phi {
        let mut y: Vec<u64> = (0..lv.size).map(|_| rng.gen_range(0..zq.q)).collect();
        let aug = y.iter().fold(0u64, |s, &v| zq.add(s, v));
        y[0] = zq.add(zq.sub(y[0], aug), a);
        out.extend(y);
    }
    out
}

/// Group-ring product on a level.
fn group_mul(t: &EulerTower, lv: &Level, a: &[u64], b: &[u64]) -> Vec<u64> {
    let zq = t.big();
    let mut out = vec![0u64; lv.size];
    let digits: Vec<Vec<usize>> = (0..lv.size).map(|h| (0..lv.axes.len()).map(|x| lv.digit(h, x)).collect()).collect();
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if y == 0 {
                continue;
            }
            let idx: usize = (0..lv.axes.len()).map(|k| (digits[i][k] + digits[j][k]) % lv.dims[k] * lv.strides[k]).sum();
            out[idx] = zq.add(out[idx], zq.mul(x, y));
        }
    }
    out
}

/// Psi_n(c_n): contraction over the group ring, giving a rank-one class
/// (d coordinates).
pub fn psi_apply(t: &EulerTower, psi_n: &[u64], c: &[u64], n: u32) -> Vec<u64> {
    let lv = t.level(n);
    let zq = t.big();
    let d = t.d();
    let ck = Combos::new(d, t.r - 1);
    let cs = Combos::new(d, t.r);
    let mut out = vec![0u64; d * lv.size];
    for (ki, &km) in ck.list.iter().enumerate() {
        let pk = &psi_n[ki * lv.size..(ki + 1) * lv.size];
        for j in 0..d {
            let jm = 1u32 << j;
            if km & jm != 0 {
                continue;
            }
            let ci = cs.idx(km | jm);
            let prod = group_mul(t, &lv, pk, &c[ci * lv.size..(ci + 1) * lv.size]);
            let neg = crate::combo::wedge_sign(km, jm);
            let o = &mut out[j * lv.size..(j + 1) * lv.size];
            for (a, b) in o.iter_mut().zip(prod) {
                *a = if neg { zq.sub(*a, b) } else { zq.add(*a, b) };
            }
        }
    }
    out
}

/// Phi(kappa'(c_d)) = kappa'(Psi(c)_d) for all d, with Psi lifting Phi.
pub fn key_lemma(t: &EulerTower, c: &EulerSystem, phi: &[u64], seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi_top = psi_lift(t, phi, &mut rng);
    let ltop = t.level(t.top());
    let ring = target_ring(t);
    let nk = binom(t.d(), t.r - 1);
    let mut psi_classes = Vec::new();
    for n in 0..=t.top() {
        let lv = t.level(n);
        let psi_n = project_psi(t, &ltop, &lv, &psi_top, nk);
        psi_classes.push(psi_apply(t, &psi_n, &c.classes[n as usize], n));
    }
    let pc = EulerSystem { classes: psi_classes };
    check_euler_relations(t, &pc).map_err(|(n, d)| format!("Psi(c) fails the Euler relation at ({n:b}, {d:b})"))?;
    let phi_small: Vec<u64> = phi.iter().map(|&x| x % t.modulus()).collect();
    for n in divisors(t.top()) {
        let kp = kolyvagin_derivative(t, &c.classes[n as usize], n)?;
        let lhs = contract(&ring, t.d(), t.r - 1, &phi_small, t.r, &kp);
        let rhs = kolyvagin_derivative(t, &pc.classes[n as usize], n)?;
        if lhs != rhs {
            return Err(format!("identity fails at level {n:b}"));
        }
    }
    Ok(())
}

fn project_psi(t: &EulerTower, from: &Level, to: &Level, psi: &[u64], nk: usize) -> Vec<u64> {
    let zq = t.big();
    let map = from.projection_map(to);
    let mut out = vec![0u64; nk * to.size];
    for k in 0..nk {
        for h in 0..from.size {
            let o = &mut out[k * to.size + map[h]];
            *o = zq.add(*o, psi[k * from.size + h]);
        }
    }
    out
}

/// Degree r-1 monomials e*_J.
pub fn monomials(t: &EulerTower) -> Vec<Vec<u64>> {
    let nk = binom(t.d(), t.r - 1);
    (0..nk).map(|i| (0..nk).map(|j| (i == j) as u64).collect()).collect()
}

/// Rank-one reduction of the finite-singular relation and membership at
/// (n, q) for a functional Phi: true when it holds.
pub fn rank_one_fs(inst: &SelmerInstance, kappa: &KolyvaginSystem, phi: &[u64], n: u32, q: usize) -> bool {
    let ring = &inst.ring;
    let d = inst.d();
    let r = kappa.r;
    let a = contract(ring, d, r - 1, phi, r, &kappa.comps[n as usize]);
    let b = contract(ring, d, r - 1, phi, r, &kappa.comps[(n & !(1 << q)) as usize]);
    let lhs = contract(ring, d, 1, &inst.primes[q].v, 1, &a);
    let rhs = contract(ring, d, 1, &phi_fs(inst, q, &ring.one()), 1, &b);
    lhs == rhs
}

pub fn rank_one_membership(inst: &SelmerInstance, kappa: &KolyvaginSystem, phi: &[u64], n: u32) -> bool {
    let ring = &inst.ring;
    let d = inst.d();
    let r = kappa.r;
    let a = contract(ring, d, r - 1, phi, r, &kappa.comps[n as usize]);
    inst.conditions(crate::selmer::Selector::transverse(n))
        .iter()
        .all(|psi| contract(ring, d, 1, psi, 1, &a).iter().all(|&x| x == 0))
}

/// Outcome of the rank-reduction comparison at every (n, q).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionReport {
    /// (n, q) pairs where the rank-r relation fails.
    pub rank_r_failures: Vec<(u32, usize)>,
    /// (n, q, monomial index) witnesses where a rank-one reduction fails.
    pub witnesses: Vec<(u32, usize, usize)>,
    /// whether "rank-r holds" agreed with "all reductions hold" everywhere.
    pub equivalent: bool,
}

pub fn rank_reduction(inst: &SelmerInstance, t: &EulerTower, kappa: &KolyvaginSystem) -> ReductionReport {
    let ring = &inst.ring;
    let d = inst.d();
    let r = kappa.r;
    let monos = monomials(t);
    let mut rank_r_failures = Vec::new();
    let mut witnesses = Vec::new();
    let mut equivalent = true;
    for n in divisors(inst.top()) {
        let member_r = crate::kolyvagin::check_membership(inst, r, n, &kappa.comps[n as usize]);
        let member_1 = monos.iter().all(|phi| rank_one_membership(inst, kappa, phi, n));
        if member_r != member_1 {
            equivalent = false;
        }
        for q in 0..inst.s() {
            if n >> q & 1 == 0 {
                continue;
            }
            let lhs = contract(ring, d, 1, &inst.primes[q].v, r, &kappa.comps[n as usize]);
            let rhs = contract(ring, d, 1, &phi_fs(inst, q, &ring.one()), r, &kappa.comps[(n & !(1 << q)) as usize]);
            let full = lhs == rhs;
            let mut all = true;
            for (i, phi) in monos.iter().enumerate() {
                if !rank_one_fs(inst, kappa, phi, n, q) {
                    all = false;
                    witnesses.push((n, q, i));
                }
            }
            if !full {
                rank_r_failures.push((n, q));
            }
            if full != all {
                equivalent = false;
            }
        }
    }
    ReductionReport { rank_r_failures, witnesses, equivalent }
}

/// Phi(kappa(c)_n) against the expansion sum_{d | n} Phi(kappa'(c_d)) D_{n/d}.
pub fn trans_identity(t: &EulerTower, c: &EulerSystem, phi: &[u64]) -> Result<(), String> {
    let ring = target_ring(t);
    let kp = all_derivatives(t, c)?;
    let zq = t.small();
    for n in divisors(t.top()) {
        let k = assemble_kappa(t, &kp, n);
        let lhs = contract(&ring, t.d(), t.r - 1, phi, t.r, &k);
        let mut rhs = vec![0u64; lhs.len()];
        for dv in divisors(n) {
            let term = contract(&ring, t.d(), t.r - 1, phi, t.r, &kp[dv as usize]);
            let dd = curly_d(t, n & !dv);
            for (o, v) in rhs.iter_mut().zip(term) {
                *o = zq.add(*o, zq.mul(dd, v));
            }
        }
        if lhs != rhs {
            return Err(format!("expansion fails at {n:b}"));
        }
    }
    Ok(())
}

/// Solves each f_q from the rank-one constraints f_q(Phi kappa_n) = 0 for
/// q | n and u_q f_q(Phi kappa_{n/q}) = v_q(Phi kappa_n), over all monomials.
pub fn solve_finite_parts(inst: &SelmerInstance, t: &EulerTower, kappa: &KolyvaginSystem) -> Result<Vec<Vec<u64>>, Error> {
    let ring = &inst.ring;
    let zq = ring.base;
    let d = inst.d();
    let r = kappa.r;
    let monos = monomials(t);
    let mut out = Vec::new();
    for q in 0..inst.s() {
        let u = inst.primes[q].u[0];
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for n in divisors(inst.top()) {
            if n >> q & 1 == 0 {
                continue;
            }
            for phi in &monos {
                let a = contract(ring, d, r - 1, phi, r, &kappa.comps[n as usize]);
                let b = contract(ring, d, r - 1, phi, r, &kappa.comps[(n & !(1 << q)) as usize]);
                rows.push(a.clone());
                rhs.push(0);
                rows.push(b.iter().map(|&x| zq.mul(u, x)).collect());
                rhs.push(contract(ring, d, 1, &inst.primes[q].v, 1, &a)[0]);
            }
        }
        let sol = solve_linear(zq, &rows, &rhs)
            .ok_or_else(|| Error::Hypothesis(format!("no finite part at {} fits the derived classes", inst.primes[q].label)))?;
        out.push(sol.particular);
    }
    Ok(out)
}

/// A tower, an Euler system whose derived classes match the basis
/// Kolyvagin system of a hidden instance, and the instance re-bound with
/// finite parts solved from rank-one constraints.
pub struct FsConsistent {
    pub tower: EulerTower,
    pub system: EulerSystem,
    pub selmer: SelmerInstance,
}

pub fn generate_fs_consistent(seed: u64, p: u64, m_big: u32, m: u32, r: usize, orders: &[u64]) -> Result<FsConsistent, Error> {
    let s = orders.len();
    let tower = generate_tower(seed, p, m_big, m, r, orders)?;
    let ring = target_ring(&tower);
    let hidden = generate_instance(seed, &ring, r, s, "generic")?;
    let k0 = regulator(&hidden, &basis(&hidden));
    let seeds: Vec<Vec<u64>> =
        (0..=tower.top()).map(|n| if n == 0 { vec![] } else { constant_seed(&tower, n, &k0.comps[n as usize]) }).collect();
    let system = from_seeds(&tower, &k0.comps[0], &seeds);
    let kappa = kappa_system(&tower, &system).map_err(Error::Hypothesis)?;
    let mut selmer = hidden.clone();
    for pd in selmer.primes.iter_mut() {
        pd.f = vec![0; d_len(&tower)];
    }
    let fs = solve_finite_parts(&selmer, &tower, &kappa)?;
    for (pd, f) in selmer.primes.iter_mut().zip(fs) {
        pd.f = f;
    }
    selmer.profile = "fs-consistent".into();
    Ok(FsConsistent { tower, system, selmer })
}

fn d_len(t: &EulerTower) -> usize {
    t.d()
}

/// Full conclusion: kappa(c) is a Kolyvagin system for the bound instance.
pub fn kappa_in_ks(inst: &SelmerInstance, t: &EulerTower, c: &EulerSystem) -> Result<(), String> {
    let kappa = kappa_system(t, c)?;
    verify_fs(inst, &kappa).map_err(|e| e.describe(inst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telescoping_small() {
        assert!(telescoping_holds(5));
        assert!(telescoping_holds(25));
    }

    #[test]
    fn perms() {
        let mut p = vec![0, 1, 2];
        let mut n = 1;
        while next_perm(&mut p) {
            n += 1;
        }
        assert_eq!(n, 6);
    }
}

/// Restriction H_d -> H_n: y lifted constantly along the fibers.
pub fn restrict_class(t: &EulerTower, from: &Level, to: &Level, c: &[u64]) -> Vec<u64> {
    let map = to.projection_map(from);
    per_coord(t, from, c, |y| map.iter().map(|&i| y[i]).collect())
}

/// Norm of H_{n/d} acting on a class at level n.
pub fn norm_class(t: &EulerTower, lv: &Level, nd: u32, c: &[u64]) -> Vec<u64> {
    let zq = t.big();
    let mut cur = c.to_vec();
    for (a, &q) in lv.axes.iter().enumerate() {
        if nd >> q & 1 == 0 {
            continue;
        }
        let mut acc = vec![0u64; cur.len()];
        for k in 0..lv.dims[a] {
            let sh = per_coord(t, lv, &cur, |y| lv.shift_axis(y, a, k));
            for (o, v) in acc.iter_mut().zip(sh) {
                *o = zq.add(*o, v);
            }
        }
        cur = acc;
    }
    cur
}

/// Restriction after corestriction equals the norm, at every divisor pair.
pub fn check_restriction_norm(t: &EulerTower, c: &EulerSystem) -> Result<(), (u32, u32)> {
    for n in divisors(t.top()) {
        let ln = t.level(n);
        for d in divisors(n) {
            let ld = t.level(d);
            let cor = project_class(t, &ln, &ld, &c.classes[n as usize]);
            let back = restrict_class(t, &ld, &ln, &cor);
            if back != norm_class(t, &ln, n & !d, &c.classes[n as usize]) {
                return Err((n, d));
            }
        }
    }
    Ok(())
}

pub fn tower_label(t: &EulerTower, n: u32) -> String {
    if n == 0 {
        return "1".into();
    }
    elems(n).iter().map(|&q| t.primes[q].label.as_str()).collect()
}

pub const EULER_PROFILES: [&str; 4] = ["canonical", "random", "fs-consistent", "zero"];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassJson {
    pub divisor: String,
    pub mask: u32,
    /// Coefficients grouped by r-subset, each a group-ring element of H_n.
    pub values: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EulerArtifact {
    pub schema_version: u32,
    pub kind: String,
    pub profile: String,
    pub seed: u64,
    pub tower: EulerTower,
    pub classes: Vec<ClassJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selmer: Option<crate::selmer::InstanceJson>,
}

impl EulerSystem {
    pub fn to_json(&self, t: &EulerTower) -> Vec<ClassJson> {
        self.classes
            .iter()
            .enumerate()
            .map(|(n, c)| {
                let size = t.level(n as u32).size;
                ClassJson { divisor: tower_label(t, n as u32), mask: n as u32, values: c.chunks(size).map(|x| x.to_vec()).collect() }
            })
            .collect()
    }

    pub fn from_json(t: &EulerTower, cs: &[ClassJson]) -> Result<EulerSystem, Error> {
        let count = 1usize << t.s();
        if cs.len() != count {
            return Err(Error::Invalid(format!("expected {count} classes, found {}", cs.len())));
        }
        let mut out = vec![Vec::new(); count];
        let nj = binom(t.d(), t.r);
        for c in cs {
            let n = c.mask as usize;
            if n >= count || !out[n].is_empty() {
                return Err(Error::Invalid(format!("bad divisor mask {}", c.mask)));
            }
            let size = t.level(c.mask).size;
            let q = t.big().q;
            if c.values.len() != nj || c.values.iter().any(|v| v.len() != size || v.iter().any(|&x| x >= q)) {
                return Err(Error::Invalid(format!("class {} has malformed values", c.divisor)));
            }
            out[n] = c.values.concat();
        }
        Ok(EulerSystem { classes: out })
    }
}

/// Generated artifact: tower, system and, for fs-consistent, the bound
/// Selmer instance.
pub struct Generated {
    pub tower: EulerTower,
    pub system: EulerSystem,
    pub selmer: Option<SelmerInstance>,
}

pub fn generate(seed: u64, p: u64, m_big: u32, m: u32, r: usize, orders: &[u64], profile: &str) -> Result<Generated, Error> {
    if orders.len() > 6 {
        return Err(Error::Invalid("at most 6 primes in an Euler tower".into()));
    }
    let level_size: u64 = orders.iter().product();
    if level_size > 1 << 16 {
        return Err(Error::Invalid("top level group too large".into()));
    }
    if profile == "fs-consistent" {
        let fc = generate_fs_consistent(seed, p, m_big, m, r, orders)?;
        return Ok(Generated { tower: fc.tower, system: fc.system, selmer: Some(fc.selmer) });
    }
    let tower = generate_tower(seed, p, m_big, m, r, orders)?;
    let nj = binom(tower.d(), r);
    let system = match profile {
        "canonical" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xca);
            let x: Vec<u64> = (0..nj).map(|_| rng.gen_range(0..tower.big().q)).collect();
            canonical_euler(&tower, &x)
        }
        "random" => random_euler(&tower, seed),
        "zero" => canonical_euler(&tower, &vec![0; nj]),
        _ => return Err(Error::Invalid(format!("unknown Euler profile {profile}"))),
    };
    Ok(Generated { tower, system, selmer: None })
}

impl Generated {
    pub fn to_artifact(&self, profile: &str, seed: u64) -> EulerArtifact {
        EulerArtifact {
            schema_version: crate::selmer::SCHEMA_VERSION,
            kind: "euler_system".into(),
            profile: profile.into(),
            seed,
            tower: self.tower.clone(),
            classes: self.system.to_json(&self.tower),
            selmer: self.selmer.as_ref().map(|s| s.to_json()),
        }
    }

    pub fn from_artifact(a: &EulerArtifact) -> Result<Generated, Error> {
        if a.schema_version != crate::selmer::SCHEMA_VERSION || a.kind != "euler_system" {
            return Err(Error::Invalid("not a supported Euler artifact".into()));
        }
        a.tower.validate()?;
        let system = EulerSystem::from_json(&a.tower, &a.classes)?;
        let selmer = match &a.selmer {
            Some(j) => Some(SelmerInstance::from_json(j)?),
            None => None,
        };
        if let Some(s) = &selmer {
            check_bound(&a.tower, s)?;
        }
        Ok(Generated { tower: a.tower.clone(), system, selmer })
    }
}

/// The Selmer instance must live on the base level over Z/M.
pub fn check_bound(t: &EulerTower, inst: &SelmerInstance) -> Result<(), Error> {
    let spec = inst.ring.spec();
    if spec.p != t.p || spec.m != t.m || !spec.orders.is_empty() {
        return Err(Error::Invalid(format!("Selmer ring {}^{} does not match M = {}^{}", spec.p, spec.m, t.p, t.m)));
    }
    if inst.r != t.r || inst.s() != t.s() {
        return Err(Error::Invalid("Selmer rank or prime count does not match the tower".into()));
    }
    Ok(())
}

fn random_functional(t: &EulerTower, rng: &mut ChaCha8Rng, modulus: u64) -> Vec<u64> {
    (0..binom(t.d(), t.r - 1)).map(|_| rng.gen_range(0..modulus)).collect()
}

/// Full check suite for an Euler system, with the rank-reduction checks
/// when a bound Selmer instance is present.
pub fn verify_euler(t: &EulerTower, c: &EulerSystem, selmer: Option<&SelmerInstance>, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut orders: Vec<u64> = t.primes.iter().map(|p| p.order).collect();
    orders.sort_unstable();
    orders.dedup();
    let bad: Vec<u64> = orders.iter().copied().filter(|&g| !telescoping_holds(g)).collect();
    out.push(Check::new("euler.telescoping", bad.is_empty()).data(serde_json::json!({ "orders": orders })));
    out.push(match check_euler_relations(t, c) {
        Ok(k) => Check::new("euler.relations", true).data(serde_json::json!({ "pairs": k })),
        Err((n, d)) => Check::new("euler.relations", false)
            .witness(format!("n = {}, d = {}", tower_label(t, n), tower_label(t, d))),
    });
    out.push(match check_restriction_norm(t, c) {
        Ok(()) => Check::new("euler.restriction_norm", true),
        Err((n, d)) => Check::new("euler.restriction_norm", false)
            .witness(format!("n = {}, d = {}", tower_label(t, n), tower_label(t, d))),
    });
    let kp = match all_derivatives(t, c) {
        Ok(k) => {
            out.push(Check::new("euler.derivative_invariant", true));
            k
        }
        Err(e) => {
            out.push(Check::new("euler.derivative_invariant", false).witness(e));
            out.sort_by(|a, b| a.name.cmp(&b.name));
            return out;
        }
    };
    out.push(Check::from_result("euler.curly_d_labeling", check_labeling(t)));
    out.push(check_curly_d_group(t));
    let perm_ok = divisors(t.top()).into_iter().find(|&n| assemble_kappa(t, &kp, n) != assemble_kappa_perm(t, &kp, n));
    out.push(match perm_ok {
        None => Check::new("euler.kappa_permutation_form", true),
        Some(n) => Check::new("euler.kappa_permutation_form", false).witness(format!("n = {}", tower_label(t, n))),
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let phis: Vec<Vec<u64>> = monomials(t).into_iter().chain((0..2).map(|_| random_functional(t, &mut rng, t.modulus()))).collect();
    out.push(Check::from_result("euler.mod_m_contraction", check_mod_m_contraction(t, c, &mut rng)));
    out.push(Check::from_result("euler.trans_identity", phis.iter().try_for_each(|phi| trans_identity(t, c, phi))));
    if t.level(t.top()).size <= 3125 {
        let res = (0..3).try_for_each(|i| {
            let phi = random_functional(t, &mut rng, t.big().q);
            key_lemma(t, c, &phi, seed.wrapping_add(i))
        });
        out.push(Check::from_result("euler.key_lemma", res));
    } else {
        out.push(Check::info("euler.key_lemma", serde_json::json!({ "skipped": "top level too large" })));
    }
    if let Some(inst) = selmer {
        let kappa = KolyvaginSystem { r: t.r, comps: (0..=t.top()).map(|n| assemble_kappa(t, &kp, n)).collect() };
        let rep = rank_reduction(inst, t, &kappa);
        let mut ch = Check::new("euler.rank_reduction_equivalence", rep.equivalent).data(serde_json::json!({
            "rank_r_failures": rep.rank_r_failures.len(),
            "rank_one_failures": rep.witnesses.len(),
        }));
        if let Some(&(n, q, i)) = rep.witnesses.first() {
            ch = ch.witness(format!("n = {}, q = {}, Phi = monomial {}", tower_label(t, n), t.primes[q].label, i));
        }
        out.push(ch);
        out.push(Check::from_result("euler.kappa_is_kolyvagin", verify_fs(inst, &kappa).map_err(|e| e.describe(inst))));
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// D_n under every ordering of the primes (nu <= 4), or reversal beyond.
pub fn check_labeling(t: &EulerTower) -> Result<(), String> {
    for n in divisors(t.top()) {
        let base = curly_d(t, n);
        let mut p = elems(n);
        if p.len() > 4 {
            p.reverse();
            if curly_d_ordered(t, &p) != base {
                return Err(format!("reversed labeling changes D at {}", tower_label(t, n)));
            }
            continue;
        }
        while next_perm(&mut p) {
            if curly_d_ordered(t, &p) != base {
                return Err(format!("labeling {p:?} changes D at {}", tower_label(t, n)));
            }
        }
    }
    Ok(())
}

fn check_curly_d_group(t: &EulerTower) -> Check {
    let mut checked = 0;
    for n in divisors(t.top()) {
        let k = nu(n);
        let fact: usize = (1..=k).product();
        let lv = t.level(n);
        let gmax = lv.dims.iter().copied().max().unwrap_or(1);
        if fact * lv.size * k.max(1) * gmax > 50_000_000 {
            continue;
        }
        if curly_d(t, n) != curly_d_group(t, n) {
            return Check::new("euler.curly_d_group_ring", false).witness(format!("n = {}", tower_label(t, n)));
        }
        checked += 1;
    }
    Check::new("euler.curly_d_group_ring", true).data(serde_json::json!({ "divisors": checked }))
}

/// Reduction mod M commutes with contraction by a functional.
fn check_mod_m_contraction(t: &EulerTower, c: &EulerSystem, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let big = Ring::new(t.p, t.m_big, &[]).unwrap();
    let small = target_ring(t);
    let mm = t.modulus();
    let phi = random_functional(t, rng, t.big().q);
    let phi_m: Vec<u64> = phi.iter().map(|x| x % mm).collect();
    let nj = binom(t.d(), t.r);
    for n in divisors(t.top()) {
        let lv = t.level(n);
        for h in [0, lv.size - 1] {
            let coeff: Vec<u64> = (0..nj).map(|j| c.classes[n as usize][j * lv.size + h]).collect();
            let a: Vec<u64> = contract(&big, t.d(), t.r - 1, &phi, t.r, &coeff).iter().map(|x| x % mm).collect();
            let red: Vec<u64> = coeff.iter().map(|x| x % mm).collect();
            if a != contract(&small, t.d(), t.r - 1, &phi_m, t.r, &red) {
                return Err(format!("n = {}", tower_label(t, n)));
            }
        }
    }
    Ok(())
}
