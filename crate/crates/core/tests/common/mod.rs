//! Brute-force oracles shared by the integration tests. Everything here is
//! written from scratch on plain integer vectors: it never calls the
//! library's linear algebra.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

/// (Z/p^m)[G] with naive arithmetic.
#[derive(Clone, Debug)]
pub struct ORing {
    pub p: u64,
    pub m: u32,
    pub q: u64,
    pub orders: Vec<u64>,
    pub n: usize,
}

impl ORing {
    pub fn new(p: u64, m: u32, orders: &[u64]) -> ORing {
        let n = orders.iter().product::<u64>() as usize;
        ORing { p, m, q: p.pow(m), orders: orders.to_vec(), n: n.max(1) }
    }

    fn digits(&self, mut i: usize) -> Vec<u64> {
        self.orders
            .iter()
            .map(|&o| {
                let d = i as u64 % o;
                i /= o as usize;
                d
            })
            .collect()
    }

    fn index(&self, d: &[u64]) -> usize {
        let mut i = 0usize;
        for (x, &o) in d.iter().zip(&self.orders).rev() {
            i = i * o as usize + (x % o) as usize;
        }
        i
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                let di = self.digits(i);
                let dj = self.digits(j);
                let s: Vec<u64> = di.iter().zip(&dj).map(|(x, y)| x + y).collect();
                let k = self.index(&s);
                out[k] = (out[k] + a[i] * b[j]) % self.q;
            }
        }
        out
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(x, y)| (x + y) % self.q).collect()
    }

    pub fn neg(&self, a: &[u64]) -> Vec<u64> {
        a.iter().map(|x| (self.q - x) % self.q).collect()
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.n]
    }

    pub fn one(&self) -> Vec<u64> {
        let mut v = self.zero();
        v[0] = 1;
        v
    }

    pub fn size(&self) -> u64 {
        self.q.pow(self.n as u32)
    }

    /// Every element of the ring.
    pub fn elements(&self) -> Vec<Vec<u64>> {
        let total = self.size();
        (0..total)
            .map(|mut c| {
                (0..self.n)
                    .map(|_| {
                        let d = c % self.q;
                        c /= self.q;
                        d
                    })
                    .collect()
            })
            .collect()
    }

    pub fn group_elems(&self) -> Vec<Vec<u64>> {
        (0..self.n)
            .map(|i| {
                let mut v = self.zero();
                v[i] = 1;
                v
            })
            .collect()
    }

    /// Vectors of R^k (flat) as all combinations.
    pub fn vectors(&self, k: usize) -> Vec<Vec<u64>> {
        let els = self.elements();
        let mut out = vec![vec![]];
        for _ in 0..k {
            let mut next = Vec::with_capacity(out.len() * els.len());
            for v in &out {
                for e in &els {
                    let mut w = v.clone();
                    w.extend_from_slice(e);
                    next.push(w);
                }
            }
            out = next;
        }
        out
    }

    pub fn entry<'a>(&self, v: &'a [u64], j: usize) -> &'a [u64] {
        &v[j * self.n..(j + 1) * self.n]
    }

    pub fn dot(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut s = self.zero();
        for j in 0..a.len() / self.n {
            s = self.add(&s, &self.mul(self.entry(a, j), self.entry(b, j)));
        }
        s
    }

    pub fn scale_vec(&self, c: &[u64], v: &[u64]) -> Vec<u64> {
        (0..v.len() / self.n).flat_map(|j| self.mul(c, self.entry(v, j))).collect()
    }

    pub fn vadd(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        self.add(a, b)
    }

    /// The R-span of vectors, as a set, by breadth-first closure under
    /// addition and multiplication by group elements and by p.
    pub fn span(&self, gens: &[Vec<u64>], len: usize) -> HashSet<Vec<u64>> {
        let mut seen: HashSet<Vec<u64>> = HashSet::new();
        let zero = vec![0u64; len];
        seen.insert(zero.clone());
        let mut mult: Vec<Vec<u64>> = self.group_elems();
        let mut pe = self.zero();
        pe[0] = self.p % self.q;
        mult.push(pe);
        let mut basis: Vec<Vec<u64>> = gens.to_vec();
        let mut i = 0;
        while i < basis.len() {
            let b = basis[i].clone();
            for c in &mult {
                let t = self.scale_vec(c, &b);
                if !basis.contains(&t) {
                    basis.push(t);
                }
            }
            i += 1;
            if basis.len() > 4096 {
                break;
            }
        }
        let mut queue: VecDeque<Vec<u64>> = VecDeque::new();
        queue.push_back(zero);
        while let Some(v) = queue.pop_front() {
            for b in &basis {
                let w = self.vadd(&v, b);
                if seen.insert(w.clone()) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Determinant by the Leibniz formula.
    pub fn det(&self, a: &[Vec<Vec<u64>>]) -> Vec<u64> {
        let k = a.len();
        let mut total = self.zero();
        let mut perm: Vec<usize> = (0..k).collect();
        loop {
            let mut term = self.one();
            for i in 0..k {
                term = self.mul(&term, &a[i][perm[i]]);
            }
            let mut inv = 0;
            for i in 0..k {
                for j in i + 1..k {
                    if perm[i] > perm[j] {
                        inv += 1;
                    }
                }
            }
            if inv % 2 == 1 {
                term = self.neg(&term);
            }
            total = self.add(&total, &term);
            if !next_perm(&mut perm) {
                break;
            }
        }
        total
    }
}

pub fn next_perm(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

pub fn subsets(t: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for m in 0u32..(1 << t) {
        if m.count_ones() as usize == r {
            out.push((0..t).filter(|i| m >> i & 1 == 1).collect());
        }
    }
    out
}

/// Hom(X, R) for X = R^g / <rels>, by enumerating R^g.
pub fn hom_enum(r: &ORing, g: usize, rels: &[Vec<u64>]) -> Vec<Vec<u64>> {
    r.vectors(g)
        .into_iter()
        .filter(|phi| rels.iter().all(|w| r.dot(phi, w).iter().all(|&x| x == 0)))
        .collect()
}

/// Greedy R-generators of a finite submodule given as a list.
pub fn greedy_gens(r: &ORing, elems: &[Vec<u64>], len: usize) -> Vec<Vec<u64>> {
    let mut gens: Vec<Vec<u64>> = Vec::new();
    let mut closure = r.span(&[], len);
    let mut sorted = elems.to_vec();
    sorted.sort();
    for e in &sorted {
        if !closure.contains(e) {
            gens.push(e.clone());
            closure = r.span(&gens, len);
        }
    }
    gens
}

/// Elements of the r-th exterior bidual of X = R^g/<rels>: alternating
/// values on r-subsets of oracle-chosen generators of X*, respecting every
/// syzygy among those generators. Returns (t, tables).
pub fn bidual_enum(rg: &ORing, g: usize, rels: &[Vec<u64>], r: usize, budget: u64) -> Option<(usize, Vec<Vec<u64>>)> {
    let homs = hom_enum(rg, g, rels);
    let psi = greedy_gens(rg, &homs, g * rg.n);
    let t = psi.len();
    if (rg.size() as f64).powi(t as i32) > budget as f64 {
        return None;
    }
    // syzygies among psi
    let syz_all: Vec<Vec<u64>> = rg
        .vectors(t)
        .into_iter()
        .filter(|a| {
            let mut s = vec![0u64; g * rg.n];
            for l in 0..t {
                s = rg.vadd(&s, &rg.scale_vec(rg.entry(a, l), &psi[l]));
            }
            s.iter().all(|&x| x == 0)
        })
        .collect();
    let syz = greedy_gens(rg, &syz_all, t * rg.n);
    let subs = subsets(t, r);
    let lower = subsets(t, r.saturating_sub(1));
    let idx = |s: &[usize]| subs.iter().position(|x| x == s).unwrap();
    // constraints: for each syzygy a and (r-1)-subset J:
    // sum_l a_l * sign * F[{l} u J] = 0, sign from moving l to its place
    let mut cons: Vec<Vec<(usize, Vec<u64>)>> = Vec::new();
    if r >= 1 {
        for a in &syz {
            for j in &lower {
                let mut terms = Vec::new();
                for l in 0..t {
                    if j.contains(&l) {
                        continue;
                    }
                    let mut s: Vec<usize> = j.clone();
                    s.push(l);
                    s.sort();
                    let pos = j.iter().filter(|&&x| x < l).count();
                    let mut c = rg.entry(a, l).to_vec();
                    if pos % 2 == 1 {
                        c = rg.neg(&c);
                    }
                    if c.iter().any(|&x| x != 0) {
                        terms.push((idx(&s), c));
                    }
                }
                if !terms.is_empty() {
                    cons.push(terms);
                }
            }
        }
    }
    let nv = subs.len();
    let els = rg.elements();
    // constraint checked once its largest variable is assigned
    let mut by_last: Vec<Vec<usize>> = vec![vec![]; nv.max(1)];
    for (ci, c) in cons.iter().enumerate() {
        let last = c.iter().map(|x| x.0).max().unwrap();
        by_last[last].push(ci);
    }
    let mut out = Vec::new();
    let mut cur: Vec<Vec<u64>> = vec![rg.zero(); nv];
    fn rec(
        k: usize,
        nv: usize,
        rg: &ORing,
        els: &[Vec<u64>],
        cons: &[Vec<(usize, Vec<u64>)>],
        by_last: &[Vec<usize>],
        cur: &mut Vec<Vec<u64>>,
        out: &mut Vec<Vec<u64>>,
    ) {
        if k == nv {
            out.push(cur.concat());
            return;
        }
        for e in els {
            cur[k] = e.clone();
            let ok = by_last[k].iter().all(|&ci| {
                let mut s = rg.zero();
                for (v, c) in &cons[ci] {
                    s = rg.add(&s, &rg.mul(c, &cur[*v]));
                }
                s.iter().all(|&x| x == 0)
            });
            if ok {
                rec(k + 1, nv, rg, els, cons, by_last, cur, out);
            }
        }
    }
    if nv == 0 {
        return Some((t, vec![vec![]]));
    }
    rec(0, nv, rg, &els, &cons, &by_last, &mut cur, &mut out);
    Some((t, out))
}

/// Number of elements of a finite set of vectors killed by a ring element.
pub fn killed_by(rg: &ORing, set: &[Vec<u64>], c: &[u64]) -> usize {
    set.iter().filter(|v| rg.scale_vec(c, v).iter().all(|&x| x == 0)).count()
}

/// Fitting ideal (as a set) from minors of the given relation rows.
pub fn fitting_enum(rg: &ORing, g: usize, rels: &[Vec<u64>], i: usize) -> HashSet<Vec<u64>> {
    if i >= g {
        return rg.span(&[rg.one()], rg.n);
    }
    let s = g - i;
    if s > rels.len() {
        return rg.span(&[], rg.n);
    }
    let mut minors = Vec::new();
    for rs in subsets(rels.len(), s) {
        for cs in subsets(g, s) {
            let sub: Vec<Vec<Vec<u64>>> =
                rs.iter().map(|&a| cs.iter().map(|&b| rg.entry(&rels[a], b).to_vec()).collect()).collect();
            minors.push(rg.det(&sub));
        }
    }
    rg.span(&minors, rg.n)
}

/// Quotient size |R^g / span| by enumerating cosets through a canonical
/// choice; only for small cases.
pub fn module_size(rg: &ORing, g: usize, rels: &[Vec<u64>]) -> usize {
    let span = rg.span(rels, g * rg.n);
    (rg.size() as usize).pow(g as u32) / span.len()
}
