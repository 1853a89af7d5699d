//! A synthetic Selmer-structure model.
//!
//! The ambient module is H = R^d, d = r + s. Each prime q carries a
//! finite-part functional f_q, a singular-part functional v_q and a unit u_q.
//! The local cohomology at q is R^2 with coordinates (f_q, v_q); the local
//! conditions are: finite R x 0, transverse 0 x R, strict 0, relaxed R^2.
//! A structure cuts H by the functionals whose coordinates it kills, and its
//! dual Selmer module is the cokernel of H -> (sum of R^2 / L_q), presented on
//! those same functionals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::module::{fitting_from_matrix, min_gens, sub_presentation, FPModule, Ideal, ModuleMap};
use crate::ring::{preimage, Ring, RingSpec, Span, Zq};
use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeData {
    pub label: String,
    pub f: Vec<u64>,
    pub v: Vec<u64>,
    pub u: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fr: Option<Vec<Vec<Vec<u64>>>>,
}

#[derive(Clone, Debug)]
pub struct SelmerInstance {
    pub ring: Ring,
    pub r: usize,
    pub primes: Vec<PrimeData>,
    pub profile: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceJson {
    pub schema_version: u32,
    pub kind: String,
    pub ring: RingSpec,
    pub r: usize,
    pub primes: Vec<PrimeData>,
    pub profile: String,
    pub seed: u64,
}

/// Structure F_a^b(n): strict at a, relaxed at b, transverse at n, finite
/// elsewhere. Divisors are bitmasks over the primes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selector {
    pub a: u32,
    pub b: u32,
    pub n: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cond {
    Finite,
    Transverse,
    Strict,
    Relaxed,
}

impl Selector {
    pub fn new(a: u32, b: u32, n: u32) -> Result<Selector, Error> {
        if a & b != 0 || a & n != 0 || b & n != 0 {
            return Err(Error::Invalid("selector divisors must be coprime".into()));
        }
        Ok(Selector { a, b, n })
    }

    /// F(n)
    pub fn transverse(n: u32) -> Selector {
        Selector { a: 0, b: 0, n }
    }

    /// F^n
    pub fn relaxed(b: u32) -> Selector {
        Selector { a: 0, b, n: 0 }
    }

    pub fn cond(&self, q: usize) -> Cond {
        let bit = 1u32 << q;
        if self.a & bit != 0 {
            Cond::Strict
        } else if self.b & bit != 0 {
            Cond::Relaxed
        } else if self.n & bit != 0 {
            Cond::Transverse
        } else {
            Cond::Finite
        }
    }
}

pub fn nu(n: u32) -> usize {
    n.count_ones() as usize
}

/// Divisors of n (as bitmasks), ascending.
pub fn divisors(n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 0u32;
    loop {
        out.push(d);
        if d == n {
            break;
        }
        d = (d.wrapping_sub(n)) & n;
    }
    out.sort();
    out
}

/// Reduction of a ring element to the residue field F_p.
pub fn residue(ring: &Ring, a: &[u64]) -> u64 {
    ring.augmentation(a) % ring.base.p
}

impl SelmerInstance {
    pub fn s(&self) -> usize {
        self.primes.len()
    }

    pub fn d(&self) -> usize {
        self.r + self.s()
    }

    pub fn top(&self) -> u32 {
        ((1u64 << self.s()) - 1) as u32
    }

    pub fn h(&self) -> FPModule {
        FPModule::free(&self.ring, self.d())
    }

    /// Functionals killed by the structure, in prime order (f before v).
    pub fn conditions(&self, sel: Selector) -> Vec<Vec<u64>> {
        let mut out = Vec::new();
        for (q, pd) in self.primes.iter().enumerate() {
            match sel.cond(q) {
                Cond::Finite => out.push(pd.v.clone()),
                Cond::Transverse => out.push(pd.f.clone()),
                Cond::Strict => {
                    out.push(pd.f.clone());
                    out.push(pd.v.clone());
                }
                Cond::Relaxed => {}
            }
        }
        out
    }

    /// The map H -> R^k, x -> (phi(x))_phi, as rows indexed by generators of H.
    pub fn loc_rows(&self, funcs: &[Vec<u64>]) -> Vec<Vec<u64>> {
        let n = self.ring.n;
        (0..self.d())
            .map(|j| funcs.iter().flat_map(|phi| phi[j * n..(j + 1) * n].to_vec()).collect())
            .collect()
    }

    pub fn loc_map(&self, sel: Selector) -> ModuleMap {
        let funcs = self.conditions(sel);
        ModuleMap {
            src: self.h(),
            dst: FPModule::free(&self.ring, funcs.len()),
            mat: self.loc_rows(&funcs),
        }
    }

    /// H^1_F as a span in H.
    pub fn selmer_span(&self, sel: Selector) -> Span {
        self.loc_map(sel).kernel_span()
    }

    /// H^1_F presented, with its inclusion into H.
    pub fn selmer_submodule(&self, sel: Selector) -> ModuleMap {
        let k = self.selmer_span(sel);
        let gens = min_gens(&self.ring, &k, None);
        sub_presentation(&self.h(), gens)
    }

    /// Dual Selmer module of the structure, presented on the killed
    /// functionals with relation rows the images of the basis of H.
    pub fn dual_selmer(&self, sel: Selector) -> FPModule {
        let funcs = self.conditions(sel);
        FPModule::new(&self.ring, funcs.len(), &self.loc_rows(&funcs))
    }

    pub fn dual_fitting(&self, sel: Selector, i: usize) -> Ideal {
        let funcs = self.conditions(sel);
        fitting_from_matrix(&self.ring, funcs.len(), &self.loc_rows(&funcs), i)
    }

    /// Functionals reduced to F_p^d.
    pub fn residue_vec(&self, phi: &[u64]) -> Vec<u64> {
        let n = self.ring.n;
        (0..self.d()).map(|j| residue(&self.ring, &phi[j * n..(j + 1) * n])).collect()
    }

    pub fn residue_field(&self) -> Zq {
        Zq::new(self.ring.base.p, 1)
    }

    /// (lambda, lambda*) over the residue field.
    pub fn lambda(&self, sel: Selector) -> (usize, usize) {
        let k = self.residue_field();
        let funcs: Vec<Vec<u64>> = self.conditions(sel).iter().map(|f| self.residue_vec(f)).collect();
        let rank = Span::new(k, self.d(), funcs.clone()).rows.len();
        (self.d() - rank, funcs.len() - rank)
    }

    /// Residue-field Selmer group of the structure (a span in F_p^d).
    pub fn residue_selmer(&self, sel: Selector) -> Span {
        let k = self.residue_field();
        let funcs: Vec<Vec<u64>> = self.conditions(sel).iter().map(|f| self.residue_vec(f)).collect();
        let cols: Vec<Vec<u64>> = (0..self.d()).map(|j| funcs.iter().map(|f| f[j]).collect()).collect();
        preimage(k, &cols, funcs.len(), None)
    }

    pub fn is_core(&self, n: u32) -> bool {
        self.lambda(Selector::transverse(n)).1 == 0
    }

    pub fn core_vertices(&self) -> Vec<u32> {
        divisors(self.top()).into_iter().filter(|&n| self.is_core(n)).collect()
    }

    /// Edges n -- nq between core vertices with f_q nonzero on the residue
    /// Selmer group of F(n).
    pub fn core_graph(&self) -> CoreGraph {
        let verts = self.core_vertices();
        let mut edges = Vec::new();
        for &n in &verts {
            let sel = self.residue_selmer(Selector::transverse(n));
            for q in 0..self.s() {
                let bit = 1u32 << q;
                if n & bit != 0 || !verts.contains(&(n | bit)) {
                    continue;
                }
                let fq = self.residue_vec(&self.primes[q].f);
                let k = self.residue_field();
                let nonzero = sel.rows.iter().any(|e| e.iter().zip(&fq).fold(0, |s, (&a, &b)| (s + a * b) % k.q) != 0);
                if nonzero {
                    edges.push((n, n | bit));
                }
            }
        }
        let connected = is_connected(&verts, &edges);
        CoreGraph { vertices: verts, edges, connected }
    }

    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            schema_version: SCHEMA_VERSION,
            kind: "selmer_instance".into(),
            ring: self.ring.spec(),
            r: self.r,
            primes: self.primes.clone(),
            profile: self.profile.clone(),
            seed: self.seed,
        }
    }

    pub fn from_json(j: &InstanceJson) -> Result<SelmerInstance, Error> {
        let ring = Ring::from_spec(&j.ring)?;
        let d = j.r + j.primes.len();
        for pd in &j.primes {
            if pd.f.len() != d * ring.n || pd.v.len() != d * ring.n || pd.u.len() != ring.n {
                return Err(Error::Invalid(format!("prime {} has malformed data", pd.label)));
            }
            if !ring.is_unit(&pd.u) {
                return Err(Error::Invalid(format!("u at prime {} is not a unit", pd.label)));
            }
        }
        Ok(SelmerInstance { ring, r: j.r, primes: j.primes.clone(), profile: j.profile.clone(), seed: j.seed })
    }

    /// Base change along reduction Z/p^m -> Z/p^m2.
    pub fn reduce(&self, m2: u32) -> SelmerInstance {
        let ring = self.ring.with_m(m2);
        let red = |v: &Vec<u64>| self.ring.reduce_elem(v, m2);
        SelmerInstance {
            ring,
            r: self.r,
            primes: self
                .primes
                .iter()
                .map(|pd| PrimeData {
                    label: pd.label.clone(),
                    f: red(&pd.f),
                    v: red(&pd.v),
                    u: red(&pd.u),
                    fr: pd.fr.as_ref().map(|m| m.iter().map(|row| row.iter().map(red).collect()).collect()),
                })
                .collect(),
            profile: self.profile.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreGraph {
    pub vertices: Vec<u32>,
    pub edges: Vec<(u32, u32)>,
    pub connected: bool,
}

fn is_connected(verts: &[u32], edges: &[(u32, u32)]) -> bool {
    if verts.is_empty() {
        return true;
    }
    let mut seen = vec![verts[0]];
    let mut i = 0;
    while i < seen.len() {
        let x = seen[i];
        for &(a, b) in edges {
            for (u, w) in [(a, b), (b, a)] {
                if u == x && !seen.contains(&w) {
                    seen.push(w);
                }
            }
        }
        i += 1;
    }
    seen.len() == verts.len()
}

impl CoreGraph {
    pub fn to_dot(&self, inst: &SelmerInstance) -> String {
        let mut s = String::from("graph core {\n");
        s.push_str(&format!("  label=\"connected={}\";\n", self.connected));
        for &v in &self.vertices {
            let (l, ls) = inst.lambda(Selector::transverse(v));
            s.push_str(&format!(
                "  \"{}\" [label=\"{}\\nnu={} lambda={} lambda*={}\"];\n",
                label(inst, v),
                label(inst, v),
                nu(v),
                l,
                ls
            ));
        }
        for v in divisors(inst.top()) {
            if !self.vertices.contains(&v) {
                s.push_str(&format!("  \"{}\" [style=dashed];\n", label(inst, v)));
            }
        }
        for &(a, b) in &self.edges {
            s.push_str(&format!("  \"{}\" -- \"{}\";\n", label(inst, a), label(inst, b)));
        }
        for &v in &self.vertices {
            if !self.edges.iter().any(|&(a, b)| a == v || b == v) && self.vertices.len() > 1 {
                s.push_str(&format!("  \"{}\" [color=red];\n", label(inst, v)));
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Divisor label such as "q1q3", or "1".
pub fn label(inst: &SelmerInstance, n: u32) -> String {
    if n == 0 {
        return "1".into();
    }
    (0..inst.s()).filter(|q| n >> q & 1 == 1).map(|q| inst.primes[q].label.clone()).collect()
}

/// Polynomial helpers over R: coefficient lists, lowest degree first.
fn poly_mul(ring: &Ring, a: &[Vec<u64>], b: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let mut out = vec![ring.zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            ring.mul_acc(&mut out[i + j], x, y);
        }
    }
    out
}

/// det(1 - F x) for a square matrix over R, as a polynomial.
pub fn det_one_minus(ring: &Ring, fr: &[Vec<Vec<u64>>]) -> Vec<Vec<u64>> {
    let k = fr.len();
    let entry = |i: usize, j: usize| -> Vec<Vec<u64>> {
        let c0 = if i == j { ring.one() } else { ring.zero() };
        vec![c0, ring.neg(&fr[i][j])]
    };
    // subset recursion on columns
    let mut dp: Vec<Option<Vec<Vec<u64>>>> = vec![None; 1 << k];
    dp[0] = Some(vec![ring.one()]);
    for s in 0..(1usize << k) {
        let Some(cur) = dp[s].clone() else { continue };
        let row = s.count_ones() as usize;
        if row == k {
            continue;
        }
        for j in 0..k {
            if s >> j & 1 == 1 {
                continue;
            }
            let mut t = poly_mul(ring, &cur, &entry(row, j));
            if (s >> (j + 1)).count_ones() % 2 == 1 {
                t = t.iter().map(|c| ring.neg(c)).collect();
            }
            let slot = dp[s | 1 << j].get_or_insert_with(|| vec![ring.zero(); k + 1]);
            for (i, c) in t.iter().take(k + 1).enumerate() {
                slot[i] = ring.add(&slot[i], c);
            }
        }
    }
    let mut out = dp[(1 << k) - 1].clone().unwrap();
    out.resize(k + 1, ring.zero());
    out
}

/// Divides a polynomial by (x - 1); returns the quotient or None when the
/// remainder is nonzero.
pub fn div_x_minus_one(ring: &Ring, p: &[Vec<u64>]) -> Option<Vec<Vec<u64>>> {
    let d = p.len() - 1;
    if d == 0 {
        return if ring.is_zero(&p[0]) { Some(vec![ring.zero()]) } else { None };
    }
    let mut q = vec![ring.zero(); d];
    let mut carry = ring.zero();
    for i in (1..=d).rev() {
        carry = ring.add(&p[i], &carry);
        q[i - 1] = carry.clone();
    }
    let rem = ring.add(&p[0], &carry);
    if ring.is_zero(&rem) {
        Some(q)
    } else {
        None
    }
}

pub fn mat_mul(ring: &Ring, a: &[Vec<Vec<u64>>], b: &[Vec<Vec<u64>>]) -> Vec<Vec<Vec<u64>>> {
    let k = b.len();
    let c = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..c)
                .map(|j| {
                    let mut s = ring.zero();
                    for l in 0..k {
                        ring.mul_acc(&mut s, &row[l], &b[l][j]);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn mat_identity(ring: &Ring, k: usize) -> Vec<Vec<Vec<u64>>> {
    (0..k).map(|i| (0..k).map(|j| if i == j { ring.one() } else { ring.zero() }).collect()).collect()
}

/// Inverse of a square matrix over R (None if not invertible).
pub fn mat_inv(ring: &Ring, a: &[Vec<Vec<u64>>]) -> Option<Vec<Vec<Vec<u64>>>> {
    let k = a.len();
    // columns of the inverse solve a x = e_j; use row-vector form x^T a^T
    let at: Vec<Vec<u64>> = (0..k).map(|j| (0..k).flat_map(|i| a[i][j].clone()).collect()).collect();
    let rows = ring.restrict(&at);
    let mut inv = vec![vec![ring.zero(); k]; k];
    for j in 0..k {
        let mut e = vec![0u64; k * ring.n];
        e[j * ring.n] = 1;
        let y = crate::ring::solve_left(ring.base, &rows, k * ring.n, &e)?;
        // y in base coordinates of R^k, layout (i, h)
        for i in 0..k {
            inv[i][j] = y[i * ring.n..(i + 1) * ring.n].to_vec();
        }
    }
    Some(inv)
}

/// Frobenius data on A = R^k with Fr acting on column vectors:
/// det(1 - Fr x) = (x - 1) Q(x), and u with Q(Fr^{-1}) a0 = u b0 where a0
/// generates A/(Fr - 1)A and b0 generates the fixed line.
#[derive(Clone, Debug)]
pub struct FrobeniusData {
    pub det: Vec<Vec<u64>>,
    pub q: Vec<Vec<u64>>,
    pub u: Vec<u64>,
}

pub fn frobenius_data(ring: &Ring, fr: &[Vec<Vec<u64>>]) -> Result<FrobeniusData, Error> {
    let k = fr.len();
    let det = det_one_minus(ring, fr);
    let q = div_x_minus_one(ring, &det).ok_or_else(|| Error::Hypothesis("(x - 1) does not divide det(1 - Fr x)".into()))?;
    let fri = mat_inv(ring, fr).ok_or_else(|| Error::Hypothesis("Fr is not invertible".into()))?;
    // Fr - 1 as a map on row vectors: x -> x (Fr - 1)^T
    let a = FPModule::free(ring, k);
    let rows: Vec<Vec<u64>> = (0..k)
        .map(|i| {
            (0..k)
                .flat_map(|j| {
                    let e = if i == j { ring.sub(&fr[j][i], &ring.one()) } else { fr[j][i].clone() };
                    e
                })
                .collect()
        })
        .collect();
    let m = ModuleMap { src: a.clone(), dst: a.clone(), mat: rows };
    let coker = m.cokernel().dst;
    let full = ring.base.m * ring.n as u32;
    if coker.log_size() != full || coker.min_gen_count() != 1 {
        return Err(Error::Hypothesis("A/(Fr - 1)A is not free of rank one".into()));
    }
    let a0 = (0..k)
        .map(|i| a.gen(i))
        .find(|e| coker.rels.with(&ring.translates(e)).is_full())
        .unwrap();
    let fixed = m.kernel_span();
    let b0 = min_gens(ring, &fixed, None);
    if b0.len() != 1 {
        return Err(Error::Hypothesis("fixed module is not cyclic".into()));
    }
    let b0 = &b0[0];
    // Q(Fr^{-1}) a0
    let mut pw = mat_identity(ring, k);
    let mut acc = vec![ring.zero(); k];
    for c in &q {
        for i in 0..k {
            let mut s = ring.zero();
            for j in 0..k {
                ring.mul_acc(&mut s, &pw[i][j], ring.entry(&a0, j));
            }
            let t = ring.mul(c, &s);
            acc[i] = ring.add(&acc[i], &t);
        }
        pw = mat_mul(ring, &pw, &fri);
    }
    let target: Vec<u64> = acc.concat();
    // u * b0 = target
    let rows = ring.mul_matrix(&ring.one());
    let brows: Vec<Vec<u64>> = rows.iter().map(|e| ring.scale_vec(e, b0)).collect();
    let y = crate::ring::solve_left(ring.base, &brows, k * ring.n, &target)
        .ok_or_else(|| Error::Hypothesis("Q(Fr^-1) does not land in the fixed line".into()))?;
    let u = y;
    if !ring.is_unit(&u) {
        return Err(Error::Hypothesis("comparison map is not an isomorphism".into()));
    }
    Ok(FrobeniusData { det, q, u })
}

pub fn random_elem(ring: &Ring, rng: &mut ChaCha8Rng) -> Vec<u64> {
    (0..ring.n).map(|_| rng.gen_range(0..ring.base.q)).collect()
}

pub fn random_unit(ring: &Ring, rng: &mut ChaCha8Rng) -> Vec<u64> {
    loop {
        let a = random_elem(ring, rng);
        if ring.is_unit(&a) {
            return a;
        }
    }
}

/// Random vector of R^d with at least one unit entry.
fn random_unit_row(ring: &Ring, d: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    loop {
        let v: Vec<u64> = (0..d).flat_map(|_| random_elem(ring, rng)).collect();
        if (0..d).any(|j| ring.is_unit(ring.entry(&v, j))) {
            return v;
        }
    }
}

fn random_frobenius(ring: &Ring, rng: &mut ChaCha8Rng) -> Option<(Vec<Vec<Vec<u64>>>, Vec<u64>)> {
    if ring.base.p == 2 {
        return None;
    }
    for _ in 0..50 {
        let lam = random_unit(ring, rng);
        if !ring.is_unit(&ring.sub(&lam, &ring.one())) {
            continue;
        }
        let p: Vec<Vec<Vec<u64>>> = (0..2).map(|_| (0..2).map(|_| random_elem(ring, rng)).collect()).collect();
        let Some(pi) = mat_inv(ring, &p) else { continue };
        let dg = vec![vec![ring.one(), ring.zero()], vec![ring.zero(), lam]];
        let fr = mat_mul(ring, &mat_mul(ring, &p, &dg), &pi);
        if let Ok(fd) = frobenius_data(ring, &fr) {
            return Some((fr, fd.u));
        }
    }
    None
}

pub const PROFILES: [&str; 4] = ["generic", "class-trivial", "pir-basis", "degenerate"];

/// Deterministic instance generation.
pub fn generate_instance(seed: u64, ring: &Ring, r: usize, s: usize, profile: &str) -> Result<SelmerInstance, Error> {
    if r == 0 {
        return Err(Error::Invalid("rank r must be positive".into()));
    }
    if s > 12 {
        return Err(Error::Invalid("at most 12 primes are supported".into()));
    }
    if !PROFILES.contains(&profile) {
        return Err(Error::Invalid(format!("unknown profile {profile}")));
    }
    let d = r + s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1_3e7);
    for _attempt in 0..200 {
        let mut primes = Vec::with_capacity(s);
        for q in 0..s {
            let (fr, u) = match random_frobenius(ring, &mut rng) {
                Some((fr, u)) => (Some(fr), u),
                None => (None, random_unit(ring, &mut rng)),
            };
            let (f, v) = match profile {
                "degenerate" => (vec![0; d * ring.n], vec![0; d * ring.n]),
                "pir-basis" => {
                    let a = rng.gen_range(0..ring.base.m);
                    let mut v = vec![0u64; d * ring.n];
                    v[(r + q) * ring.n] = ring.base.p.pow(a);
                    (random_unit_row(ring, d, &mut rng), v)
                }
                _ => (random_unit_row(ring, d, &mut rng), random_unit_row(ring, d, &mut rng)),
            };
            primes.push(PrimeData { label: format!("q{}", q + 1), f, v, u, fr });
        }
        let inst = SelmerInstance { ring: ring.clone(), r, primes, profile: profile.into(), seed };
        let ok = match profile {
            "class-trivial" => inst.is_core(0),
            "generic" => !ring.is_chain() || generic_guarantee(&inst, &mut rng),
            _ => true,
        };
        if ok {
            return Ok(inst);
        }
    }
    Err(Error::Invalid(format!("could not satisfy profile {profile} for r={r}, s={s}")))
}

/// For every proper divisor n of N: H_{F(n)} has zero annihilator, and for
/// some nonempty m coprime to n the structure strict at m and transverse at
/// n has vanishing dual Selmer module while a single residue class of
/// H_{F(n)} has nonzero finite part at every prime of m.
pub fn generic_guarantee(inst: &SelmerInstance, rng: &mut ChaCha8Rng) -> bool {
    let top = inst.top();
    let k = inst.residue_field();
    for n in divisors(top) {
        if n == top {
            continue;
        }
        let sel = inst.selmer_submodule(Selector::transverse(n)).src;
        if !crate::module::annihilator(&sel).is_zero() {
            return false;
        }
        let hs = inst.selmer_span(Selector::transverse(n));
        let red: Vec<Vec<u64>> = hs.rows.iter().map(|row| inst.residue_vec(row)).collect();
        let e = Span::new(k, inst.d(), red);
        let classes = residue_classes(&e, rng);
        let ok = divisors(top & !n).into_iter().any(|m| {
            if m == 0 || !inst.dual_selmer(Selector { a: m, b: 0, n }).is_zero() {
                return false;
            }
            let fs: Vec<Vec<u64>> =
                (0..inst.s()).filter(|q| m >> q & 1 == 1).map(|q| inst.residue_vec(&inst.primes[q].f)).collect();
            classes
                .iter()
                .any(|v| fs.iter().all(|f| f.iter().zip(v).fold(0, |s, (&a, &b)| (s + a * b) % k.q) != 0))
        });
        if !ok {
            return false;
        }
    }
    true
}

/// All vectors of a residue-field span when small, else a random sample.
fn residue_classes(e: &Span, rng: &mut ChaCha8Rng) -> Vec<Vec<u64>> {
    let k = e.zq;
    let dim = e.rows.len() as u32;
    let combine = |coeffs: &mut dyn FnMut() -> u64| -> Vec<u64> {
        let mut v = vec![0u64; e.ncols];
        for row in &e.rows {
            let a = coeffs();
            for (x, &y) in v.iter_mut().zip(row) {
                *x = (*x + a * y) % k.q;
            }
        }
        v
    };
    if (k.q as f64).powi(dim as i32) <= 4096.0 {
        (0..k.q.pow(dim))
            .map(|mut c| {
                combine(&mut || {
                    let a = c % k.q;
                    c /= k.q;
                    a
                })
            })
            .collect()
    } else {
        (0..4000).map(|_| combine(&mut || rng.gen_range(0..k.q))).collect()
    }
}

/// Exactness of 0 -> H_F -> H_G -> sum L^G/L^F -> D_F -> D_G -> 0 for
/// nested structures F <= G, all terms viewed as subquotients of H and of
/// W = R^{2s} (coordinates (f_q, v_q)). Returns the first failing position.
pub fn five_term_exact(inst: &SelmerInstance, f: Selector, g: Selector) -> Result<(), usize> {
    let ring = &inst.ring;
    let s = inst.s();
    let n = ring.n;
    let w_dim = 2 * s * n;
    let local = |sel: Selector| -> Span {
        let mut gens = Vec::new();
        for q in 0..s {
            let mut ef = vec![0u64; w_dim];
            ef[2 * q * n] = 1;
            let mut ev = vec![0u64; w_dim];
            ev[(2 * q + 1) * n] = 1;
            match sel.cond(q) {
                Cond::Finite => gens.push(ef),
                Cond::Transverse => gens.push(ev),
                Cond::Strict => {}
                Cond::Relaxed => {
                    gens.push(ef);
                    gens.push(ev);
                }
            }
        }
        ring.rspan(2 * s, &gens)
    };
    let lf = local(f);
    let lg = local(g);
    if !lg.contains_span(&lf) {
        return Err(0);
    }
    let funcs: Vec<Vec<u64>> = inst.primes.iter().flat_map(|pd| [pd.f.clone(), pd.v.clone()]).collect();
    let loc = inst.loc_rows(&funcs);
    let loc_r = ring.restrict(&loc);
    let im = Span::new(ring.base, w_dim, loc_r.clone());
    let hf = preimage(ring.base, &loc_r, w_dim, Some(&lf));
    let hg = preimage(ring.base, &loc_r, w_dim, Some(&lg));
    // selmer spans agree with the conditions rule
    if hf != inst.selmer_span(f) || hg != inst.selmer_span(g) {
        return Err(1);
    }
    // at H_G: kernel of H_G -> L^G/L^F is H_F
    if hg.intersect(&hf) != hf {
        return Err(2);
    }
    // at L^G/L^F: loc(H_G) + L^F = L^G n (L^F + loc(H))
    let apply = |x: &[u64]| -> Vec<u64> {
        let mut out = vec![0u64; w_dim];
        for (i, row) in loc_r.iter().enumerate() {
            crate::ring::axpy(ring.base, &mut out, x[i], row, 0);
        }
        out
    };
    let loc_hg = Span::new(ring.base, w_dim, hg.rows.iter().map(|x| apply(x)).collect()).sum(&lf);
    if loc_hg != lg.intersect(&lf.sum(&im)) {
        return Err(3);
    }
    // at D_F: image of L^G equals kernel of D_F -> D_G, both L^G + im
    let a = lg.sum(&lf).sum(&im);
    let b = lg.sum(&im);
    if a != b {
        return Err(4);
    }
    // D_G is a quotient of D_F: L^F + im <= L^G + im
    if !b.contains_span(&lf.sum(&im)) {
        return Err(5);
    }
    // the coordinate presentation matches: |D_F| = |W / (L^F + im)|
    let df = inst.dual_selmer(f);
    if df.log_size() != lf.sum(&im).codim_log() {
        return Err(6);
    }
    Ok(())
}


/// Structural checks on one instance: five-term exactness for every nested
/// pair of structures, the Fitting sum identity over relaxations at one
/// prime, and lambda - lambda* = r at every divisor.
pub fn verify_selmer(inst: &SelmerInstance) -> Vec<crate::report::Check> {
    use crate::report::Check;
    let top = inst.top();
    let mut out = Vec::new();
    let mut pairs = 0usize;
    let mut five = Ok(());
    'outer: for a in divisors(top) {
        for b in divisors(top & !a) {
            for n in divisors(top & !a & !b) {
                let f = Selector { a, b: 0, n };
                let g = Selector { a: 0, b: a | b, n };
                if let Err(pos) = five_term_exact(inst, f, g) {
                    five = Err(format!("position {pos} for strict {}, relaxed {}, transverse {}", label(inst, a), label(inst, b), label(inst, n)));
                    break 'outer;
                }
                pairs += 1;
            }
        }
    }
    out.push(Check::from_result("selmer.five_term_exact", five).data(serde_json::json!({ "pairs": pairs })));
    let mut fitt = Ok(());
    for i in 1..=inst.d() {
        let lhs = inst.dual_fitting(Selector::transverse(0), i);
        let mut rhs = Ideal::zero(&inst.ring);
        for q in 0..inst.s() {
            rhs = rhs.sum(&inst.dual_fitting(Selector::relaxed(1 << q), i - 1));
        }
        if inst.s() > 0 && lhs != rhs {
            fitt = Err(format!("i = {i}"));
            break;
        }
    }
    out.push(Check::from_result("selmer.fitting_sum", fitt));
    let mut lam = Ok(());
    for n in divisors(top) {
        let sel = Selector::transverse(n);
        let lambda = self_dim(inst, sel);
        let (_, lstar) = inst.lambda(sel);
        if lambda != inst.r + lstar {
            lam = Err(format!("n = {}", label(inst, n)));
            break;
        }
    }
    out.push(Check::from_result("selmer.lambda_difference", lam));
    let graph = inst.core_graph();
    out.push(Check::info(
        "selmer.core_graph",
        serde_json::json!({ "vertices": graph.vertices.len(), "edges": graph.edges.len(), "connected": graph.connected }),
    ));
    out
}

/// Dimension of the residue Selmer group, computed from its kernel.
fn self_dim(inst: &SelmerInstance, sel: Selector) -> usize {
    inst.residue_selmer(sel).log_size() as usize
}
