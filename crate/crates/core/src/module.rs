//! Finitely presented modules, maps between them, ideals, duals and Fitting
//! ideals.
//!
//! A module on g generators is stored through the base-level span of its
//! relations inside R^g (coordinates j * n + h), which is G-stable. All
//! computations go through Howell forms over Z/p^m.

use serde::{Deserialize, Serialize};

use crate::combo::Combos;
use crate::ring::{preimage, solve_left, Ring, RingSpec, Span};
use crate::Error;

#[derive(Clone, Debug)]
pub struct FPModule {
    pub ring: Ring,
    pub g: usize,
    pub rels: Span,
}

impl PartialEq for FPModule {
    fn eq(&self, o: &FPModule) -> bool {
        self.ring == o.ring && self.g == o.g && self.rels == o.rels
    }
}

impl FPModule {
    /// Module R^g / (R-span of the given relation vectors).
    pub fn new(ring: &Ring, g: usize, rels: &[Vec<u64>]) -> FPModule {
        let rels = ring.rspan(g, rels);
        FPModule { ring: ring.clone(), g, rels }
    }

    pub fn free(ring: &Ring, g: usize) -> FPModule {
        FPModule::new(ring, g, &[])
    }

    pub fn from_span(ring: &Ring, g: usize, rels: Span) -> FPModule {
        FPModule { ring: ring.clone(), g, rels }
    }

    pub fn dim(&self) -> usize {
        self.g * self.ring.n
    }

    /// log_p of the number of elements.
    pub fn log_size(&self) -> u32 {
        self.dim() as u32 * self.ring.base.m - self.rels.log_size()
    }

    pub fn is_zero(&self) -> bool {
        self.log_size() == 0
    }

    pub fn is_zero_elem(&self, v: &[u64]) -> bool {
        self.rels.contains(v)
    }

    pub fn canonical(&self, v: &[u64]) -> Vec<u64> {
        let mut w = v.to_vec();
        self.rels.reduce(&mut w);
        w
    }

    pub fn gen(&self, j: usize) -> Vec<u64> {
        let mut v = vec![0u64; self.dim()];
        v[j * self.ring.n] = 1;
        v
    }

    /// A minimal set of R-generators of the relation module.
    pub fn relation_rows(&self) -> Vec<Vec<u64>> {
        min_gens(&self.ring, &self.rels, None)
    }

    /// Number of generators of a minimal presentation: dim_k X / mX.
    pub fn min_gen_count(&self) -> usize {
        let all: Vec<Vec<u64>> = (0..self.g).map(|j| self.gen(j)).collect();
        let span = self.ring.rspan(self.g, &all);
        min_gens(&self.ring, &span, Some(&self.rels)).len()
    }

    pub fn to_json(&self) -> ModuleJson {
        ModuleJson { ring: self.ring.spec(), gens: self.g, relations: self.relation_rows() }
    }

    pub fn from_json(j: &ModuleJson) -> Result<FPModule, Error> {
        let ring = Ring::from_spec(&j.ring)?;
        for r in &j.relations {
            if r.len() != j.gens * ring.n {
                return Err(Error::Invalid("relation row has wrong length".into()));
            }
        }
        Ok(FPModule::new(&ring, j.gens, &j.relations))
    }

    /// Direct sum with another module over the same ring.
    pub fn direct_sum(&self, o: &FPModule) -> FPModule {
        let d1 = self.dim();
        let d2 = o.dim();
        let mut rows: Vec<Vec<u64>> = self
            .rels
            .rows
            .iter()
            .map(|r| {
                let mut v = r.clone();
                v.resize(d1 + d2, 0);
                v
            })
            .collect();
        for r in &o.rels.rows {
            let mut v = vec![0u64; d1];
            v.extend_from_slice(r);
            rows.push(v);
        }
        FPModule::from_span(&self.ring, self.g + o.g, Span::new(self.ring.base, d1 + d2, rows))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModuleJson {
    pub ring: RingSpec,
    pub gens: usize,
    pub relations: Vec<Vec<u64>>,
}

/// Greedy minimal generating set (Nakayama) of a G-stable span, chosen from
/// its Howell rows, optionally modulo a second G-stable span.
pub fn min_gens(ring: &Ring, span: &Span, modulo: Option<&Span>) -> Vec<Vec<u64>> {
    let zq = ring.base;
    let mut m_rows: Vec<Vec<u64>> = Vec::new();
    if let Some(w) = modulo {
        m_rows.extend(w.rows.iter().cloned());
    }
    let sig: Vec<usize> = (0..ring.orders.len())
        .map(|i| ring.sigma(i).iter().position(|&x| x == 1).unwrap())
        .collect();
    for r in &span.rows {
        m_rows.push(r.iter().map(|&x| zq.mul(x, zq.p)).collect());
        if !sig.is_empty() {
            let t = ring.translates(r);
            for &idx in &sig {
                m_rows.push(zq_sub(zq.q, &t[idx], r));
            }
        }
    }
    let mut cur = Span::new(zq, span.ncols, m_rows);
    let mut chosen = Vec::new();
    for r in &span.rows {
        if !cur.contains(r) {
            chosen.push(r.clone());
            cur = cur.with(&ring.translates(r));
        }
    }
    chosen
}

fn zq_sub(q: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| (x + q - y) % q).collect()
}

/// R-linear map between presented modules: generator i of `src` goes to
/// row i of `mat` (an element of R^{dst.g}).
#[derive(Clone, Debug)]
pub struct ModuleMap {
    pub src: FPModule,
    pub dst: FPModule,
    pub mat: Vec<Vec<u64>>,
}

/// x * M for x in R^a and M given by a rows of R^b.
pub fn apply_rows(ring: &Ring, x: &[u64], mat: &[Vec<u64>], b: usize) -> Vec<u64> {
    let mut out = vec![0u64; b * ring.n];
    for (i, row) in mat.iter().enumerate() {
        let xi = ring.entry(x, i);
        if ring.is_zero(xi) {
            continue;
        }
        ring.axpy_vec(&mut out, xi, row);
    }
    out
}

impl ModuleMap {
    pub fn new(src: &FPModule, dst: &FPModule, mat: Vec<Vec<u64>>) -> Result<ModuleMap, Error> {
        let f = ModuleMap { src: src.clone(), dst: dst.clone(), mat };
        if f.mat.len() != src.g || f.mat.iter().any(|r| r.len() != dst.dim()) {
            return Err(Error::Invalid("matrix shape does not match modules".into()));
        }
        for w in &src.rels.rows {
            if !dst.rels.contains(&f.apply(w)) {
                return Err(Error::IllDefined("a relation of the source is not sent to zero".into()));
            }
        }
        Ok(f)
    }

    pub fn apply(&self, x: &[u64]) -> Vec<u64> {
        apply_rows(&self.src.ring, x, &self.mat, self.dst.g)
    }

    /// Base matrix of the map on R^{src.g} (rows (i, h) = h * M_i).
    pub fn restricted(&self) -> Vec<Vec<u64>> {
        self.src.ring.restrict(&self.mat)
    }

    /// {x in R^{src.g} : f(x) = 0 in dst}, a G-stable span containing src.rels.
    pub fn kernel_span(&self) -> Span {
        preimage(self.src.ring.base, &self.restricted(), self.dst.dim(), Some(&self.dst.rels))
    }

    /// Kernel as a presented module with its inclusion into `src`.
    pub fn kernel(&self) -> ModuleMap {
        let k = self.kernel_span();
        let gens = min_gens(&self.src.ring, &k, Some(&self.src.rels));
        sub_presentation(&self.src, gens)
    }

    pub fn image_span(&self) -> Span {
        self.src.ring.rspan(self.dst.g, &self.mat).sum(&self.dst.rels)
    }

    /// Image as a presented module with its inclusion into `dst`.
    pub fn image(&self) -> ModuleMap {
        let im = self.image_span();
        let gens = min_gens(&self.src.ring, &im, Some(&self.dst.rels));
        sub_presentation(&self.dst, gens)
    }

    /// Cokernel with the projection from `dst`.
    pub fn cokernel(&self) -> ModuleMap {
        let c = FPModule::from_span(&self.dst.ring, self.dst.g, self.image_span());
        let id = (0..self.dst.g).map(|j| self.dst.gen(j)).collect();
        ModuleMap { src: self.dst.clone(), dst: c, mat: id }
    }

    pub fn is_injective(&self) -> bool {
        self.kernel_span() == self.src.rels
    }

    pub fn is_surjective(&self) -> bool {
        self.image_span().is_full()
    }

    pub fn compose(&self, then: &ModuleMap) -> ModuleMap {
        let mat = self.mat.iter().map(|r| then.apply(r)).collect();
        ModuleMap { src: self.src.clone(), dst: then.dst.clone(), mat }
    }
}

/// The submodule of X generated by `gens`, presented on those generators,
/// together with its inclusion map.
pub fn sub_presentation(x: &FPModule, gens: Vec<Vec<u64>>) -> ModuleMap {
    let ring = &x.ring;
    let rows = ring.restrict(&gens);
    let rels = preimage(ring.base, &rows, x.dim(), Some(&x.rels));
    let sub = FPModule::from_span(ring, gens.len(), rels);
    ModuleMap { src: sub, dst: x.clone(), mat: gens }
}

/// Submodule spans in R^g are compared through `Span`. This tests exactness
/// of A -f-> B -g-> C at B.
pub fn is_exact(f: &ModuleMap, g: &ModuleMap) -> bool {
    f.image_span() == g.kernel_span()
}

/// An ideal of R, held as a G-stable span in R (n base coordinates).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ideal {
    pub ring: Ring,
    pub span: Span,
}

impl Ideal {
    pub fn new(ring: &Ring, gens: &[Vec<u64>]) -> Ideal {
        Ideal { ring: ring.clone(), span: ring.rspan(1, gens) }
    }

    pub fn zero(ring: &Ring) -> Ideal {
        Ideal::new(ring, &[])
    }

    pub fn unit(ring: &Ring) -> Ideal {
        Ideal::new(ring, &[ring.one()])
    }

    pub fn is_unit(&self) -> bool {
        self.span.is_full()
    }

    pub fn is_zero(&self) -> bool {
        self.span.is_zero()
    }

    pub fn contains(&self, a: &[u64]) -> bool {
        self.span.contains(a)
    }

    pub fn contains_ideal(&self, o: &Ideal) -> bool {
        self.span.contains_span(&o.span)
    }

    pub fn sum(&self, o: &Ideal) -> Ideal {
        Ideal { ring: self.ring.clone(), span: self.span.sum(&o.span) }
    }

    pub fn add_gen(&mut self, a: &[u64]) {
        if !self.span.contains(a) {
            self.span = self.span.with(&self.ring.translates(a));
        }
    }

    pub fn product(&self, o: &Ideal) -> Ideal {
        let mut gens = Vec::new();
        for a in &self.span.rows {
            for b in &o.span.rows {
                gens.push(self.ring.mul(a, b));
            }
        }
        Ideal::new(&self.ring, &gens)
    }

    pub fn scale(&self, a: &[u64]) -> Ideal {
        let gens: Vec<Vec<u64>> = self.span.rows.iter().map(|b| self.ring.mul(a, b)).collect();
        Ideal::new(&self.ring, &gens)
    }

    pub fn intersect(&self, o: &Ideal) -> Ideal {
        Ideal { ring: self.ring.clone(), span: self.span.intersect(&o.span) }
    }

    /// For a chain ring, the exponent e with I = (p^e).
    pub fn exponent(&self) -> Option<u32> {
        if self.ring.is_chain() {
            Some(self.ring.base.m - self.span.log_size())
        } else {
            None
        }
    }

    /// Canonical generators (Howell rows).
    pub fn generators(&self) -> Vec<Vec<u64>> {
        self.span.rows.clone()
    }

    /// Annihilator ideal {a : a I = 0}.
    pub fn annihilator(&self) -> Ideal {
        let rows: Vec<Vec<u64>> = (0..self.ring.n).map(|h| self.ring.group_elem(h)).collect();
        let mut acc: Option<Span> = None;
        for b in &self.span.rows {
            // a -> a b on base coordinates
            let lm: Vec<Vec<u64>> = rows.iter().map(|e| self.ring.mul(e, b)).collect();
            let k = preimage(self.ring.base, &lm, self.ring.n, None);
            acc = Some(match acc {
                None => k,
                Some(s) => s.intersect(&k),
            });
        }
        Ideal { ring: self.ring.clone(), span: acc.unwrap_or_else(|| Span::full(self.ring.base, self.ring.n)) }
    }

    /// Reduction modulo p^m2 (image in the ring with smaller base exponent).
    pub fn reduce(&self, target: &Ring) -> Ideal {
        let gens: Vec<Vec<u64>> = self.span.rows.iter().map(|a| self.ring.reduce_elem(a, target.base.m)).collect();
        Ideal::new(target, &gens)
    }

    pub fn to_json(&self) -> IdealJson {
        IdealJson { generators: self.generators(), p_exponent: self.exponent() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct IdealJson {
    pub generators: Vec<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_exponent: Option<u32>,
}

/// Hom_R(X, R): functionals are elements phi of R^g with phi(w) = 0 for all
/// relations w; phi(x) = sum_j phi_j x_j.
#[derive(Clone, Debug)]
pub struct Dual {
    /// Minimal generators of X*, as vectors in R^g.
    pub gens: Vec<Vec<u64>>,
    /// Presentation of X* on `gens`.
    pub module: FPModule,
    /// All functionals, as a span in R^g.
    pub span: Span,
}

pub fn eval(ring: &Ring, phi: &[u64], x: &[u64]) -> Vec<u64> {
    let mut out = ring.zero();
    for j in 0..phi.len() / ring.n {
        ring.mul_acc(&mut out, ring.entry(phi, j), ring.entry(x, j));
    }
    out
}

/// Span of all functionals on X (as vectors of R^g).
pub fn dual_span(x: &FPModule) -> Span {
    let ring = &x.ring;
    let n = ring.n;
    let inv: Vec<usize> = (0..n).map(|h| ring.ginv(h)).collect();
    // row (j, h') of T has entry w[j n + h'^{-1}] in the column of relation w
    let cols = x.rels.rows.len();
    let t: Vec<Vec<u64>> = (0..x.g * n)
        .map(|jh| {
            let (j, h) = (jh / n, jh % n);
            x.rels.rows.iter().map(|w| w[j * n + inv[h]]).collect()
        })
        .collect();
    preimage(ring.base, &t, cols, None)
}

pub fn dual(x: &FPModule) -> Dual {
    let ring = &x.ring;
    let span = dual_span(x);
    let gens = min_gens(ring, &span, None);
    let module = sub_presentation(&FPModule::free(ring, x.g), gens.clone()).src;
    Dual { gens, module, span }
}

impl Dual {
    /// Coordinates of a functional (in R^g) with respect to `gens`.
    pub fn coords(&self, ring: &Ring, phi: &[u64]) -> Option<Vec<u64>> {
        let rows = ring.restrict(&self.gens);
        let y = solve_left(ring.base, &rows, phi.len(), phi)?;
        Some(y)
    }
}

/// The canonical map X -> X**, with X** presented as the dual of the
/// presentation of X*. Returns the map and whether it is an isomorphism.
pub fn bidual_map(x: &FPModule) -> (ModuleMap, bool) {
    let ring = &x.ring;
    let d = dual(x);
    let dd = dual(&d.module);
    // x -> (phi_l(x))_l in R^t, then coordinates in X** generators
    let mat: Vec<Vec<u64>> = (0..x.g)
        .map(|j| {
            let e = x.gen(j);
            let v: Vec<u64> = d.gens.iter().flat_map(|phi| eval(ring, phi, &e)).collect();
            dd.coords(ring, &v).expect("evaluation functional lies in the double dual")
        })
        .collect();
    let f = ModuleMap { src: x.clone(), dst: dd.module.clone(), mat };
    let iso = f.is_injective() && f.is_surjective();
    (f, iso)
}

/// Annihilator of a module.
pub fn annihilator(x: &FPModule) -> Ideal {
    let ring = &x.ring;
    let n = ring.n;
    let mut acc: Option<Span> = None;
    for j in 0..x.g {
        let lm: Vec<Vec<u64>> = (0..n)
            .map(|h| {
                let mut v = vec![0u64; x.dim()];
                v[j * n + h] = 1;
                v
            })
            .collect();
        let k = preimage(ring.base, &lm, x.dim(), Some(&x.rels));
        acc = Some(match acc {
            None => k,
            Some(s) => s.intersect(&k),
        });
    }
    Ideal { ring: ring.clone(), span: acc.unwrap_or_else(|| Span::full(ring.base, n)) }
}

/// Fixed points of commuting actions (R-matrices acting on row vectors of
/// R^g) on B, with the inclusion into B.
pub fn fixed_points(b: &FPModule, actions: &[Vec<Vec<u64>>]) -> Result<ModuleMap, Error> {
    let ring = &b.ring;
    let maps: Vec<ModuleMap> = actions
        .iter()
        .map(|a| ModuleMap::new(b, b, a.clone()))
        .collect::<Result<_, _>>()?;
    for (i, f) in maps.iter().enumerate() {
        for g in &maps[i + 1..] {
            for j in 0..b.g {
                let e = b.gen(j);
                let x = g.apply(&f.apply(&e));
                let y = f.apply(&g.apply(&e));
                if !b.rels.contains(&ring.sub(&x, &y)) {
                    return Err(Error::Invalid("action matrices do not commute".into()));
                }
            }
        }
    }
    let mut acc = Span::full(ring.base, b.dim());
    for f in &maps {
        let diff: Vec<Vec<u64>> = f
            .mat
            .iter()
            .enumerate()
            .map(|(j, r)| ring.sub(r, &b.gen(j)))
            .collect();
        let d = ModuleMap { src: b.clone(), dst: b.clone(), mat: diff };
        acc = acc.intersect(&d.kernel_span());
    }
    let gens = min_gens(ring, &acc, Some(&b.rels));
    Ok(sub_presentation(b, gens))
}

/// i-th Fitting ideal.
pub fn fitting_ideal(x: &FPModule, i: usize) -> Ideal {
    let rows = x.relation_rows();
    fitting_from_matrix(&x.ring, x.g, &rows, i)
}

/// i-th Fitting ideal of the cokernel of the relation rows (k x g over R).
pub fn fitting_from_matrix(ring: &Ring, g: usize, rows: &[Vec<u64>], i: usize) -> Ideal {
    let (g, a) = prune_units(ring, g, rows);
    if i >= g {
        return Ideal::unit(ring);
    }
    let s = g - i;
    if s > a.len() {
        return Ideal::zero(ring);
    }
    let mut ideal = Ideal::zero(ring);
    let rc = Combos::new(a.len(), s);
    let cc = Combos::new(g, s);
    for &rm in &rc.list {
        let ri = crate::combo::elems(rm);
        for &cm in &cc.list {
            let ci = crate::combo::elems(cm);
            let sub: Vec<Vec<Vec<u64>>> = ri
                .iter()
                .map(|&r| ci.iter().map(|&c| ring.entry(&a[r], c).to_vec()).collect())
                .collect();
            let d = ring.det(&sub);
            if !ring.is_zero(&d) {
                ideal.add_gen(&d);
                if ideal.is_unit() {
                    return ideal;
                }
            }
        }
    }
    ideal
}

/// Removes unit pivots: a relation with a unit entry eliminates one generator
/// without changing any Fitting ideal of the presented module.
fn prune_units(ring: &Ring, g: usize, rows: &[Vec<u64>]) -> (usize, Vec<Vec<u64>>) {
    let n = ring.n;
    let mut a: Vec<Vec<u64>> = rows.iter().filter(|r| !ring.is_zero(r)).cloned().collect();
    let mut g = g;
    loop {
        let mut found = None;
        'outer: for (ri, r) in a.iter().enumerate() {
            for c in 0..g {
                if ring.is_unit(ring.entry(r, c)) {
                    found = Some((ri, c));
                    break 'outer;
                }
            }
        }
        let Some((ri, c)) = found else { break };
        let piv = a.remove(ri);
        let inv = ring.inv(ring.entry(&piv, c)).unwrap();
        let mut next = Vec::with_capacity(a.len());
        for r in a {
            let f = ring.neg(&ring.mul(ring.entry(&r, c), &inv));
            let mut r2 = r.clone();
            ring.axpy_vec(&mut r2, &f, &piv);
            let mut out = Vec::with_capacity((g - 1) * n);
            for j in 0..g {
                if j != c {
                    out.extend_from_slice(ring.entry(&r2, j));
                }
            }
            if !ring.is_zero(&out) {
                next.push(out);
            }
        }
        a = next;
        g -= 1;
    }
    (g, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_of_z2_over_z4() {
        let r = Ring::new(2, 2, &[]).unwrap();
        let x = FPModule::new(&r, 1, &[vec![2]]);
        let d = dual(&x);
        assert_eq!(d.gens, vec![vec![2]]);
        assert_eq!(d.module.log_size(), 1);
        assert!(bidual_map(&x).1);
    }

    #[test]
    fn fitting_diag22() {
        let r = Ring::new(2, 2, &[]).unwrap();
        let x = FPModule::new(&r, 2, &[vec![2, 0], vec![0, 2]]);
        assert!(fitting_ideal(&x, 0).is_zero());
        assert_eq!(fitting_ideal(&x, 1).exponent(), Some(1));
        assert!(fitting_ideal(&x, 2).is_unit());
    }

    #[test]
    fn annihilators() {
        let r = Ring::new(2, 2, &[]).unwrap();
        let x = FPModule::new(&r, 1, &[vec![2]]);
        assert_eq!(annihilator(&x).exponent(), Some(1));
        let y = FPModule::new(&r, 2, &[vec![2, 0]]);
        assert!(annihilator(&y).is_zero());
    }
}
