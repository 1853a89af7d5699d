//! Exterior powers and exterior power biduals.
//!
//! An element of the r-th bidual of X is a value table: its values on the
//! monomials e_I (I an r-subset of the chosen generators of X*) of the r-th
//! exterior power of X*. Wedge monomials use ascending index order.

use crate::combo::{elems, wedge_sign, Combos};
use crate::module::{dual, eval, min_gens, sub_presentation, Dual, FPModule, Ideal, ModuleMap};
use crate::report::Check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use crate::ring::{preimage, Ring, Span};

/// The r-th exterior power of X presented on the monomials e_J, J an
/// r-subset of the generators of X.
#[derive(Clone, Debug)]
pub struct Exterior {
    pub r: usize,
    pub combos: Combos,
    pub module: FPModule,
}

pub fn exterior_power(x: &FPModule, r: usize) -> Exterior {
    let ring = &x.ring;
    let n = ring.n;
    let combos = Combos::new(x.g, r);
    let lower = Combos::new(x.g, r.saturating_sub(1));
    let dim = combos.len() * n;
    let mut rows = Vec::new();
    if r >= 1 {
        for w in &x.rels.rows {
            for &jm in &lower.list {
                let mut v = vec![0u64; dim];
                let mut nz = false;
                for j in 0..x.g {
                    if jm >> j & 1 == 1 {
                        continue;
                    }
                    let wj = ring.entry(w, j);
                    if ring.is_zero(wj) {
                        continue;
                    }
                    let neg = (jm & ((1u32 << j) - 1)).count_ones() % 2 == 1;
                    let k = combos.idx(jm | 1 << j);
                    for h in 0..n {
                        let val = if neg { ring.base.neg(wj[h]) } else { wj[h] };
                        v[k * n + h] = ring.base.add(v[k * n + h], val);
                    }
                    nz = true;
                }
                if nz {
                    rows.push(v);
                }
            }
        }
    }
    let module = FPModule::from_span(ring, combos.len(), Span::new(ring.base, dim, rows));
    Exterior { r, combos, module }
}

/// Contraction: (Phi F)[J] = sum_K Phi_K sign(K, J) F[K u J], where Phi has
/// degree k and F degree s over the same t letters. The same formula acts on
/// exterior powers of a free module through its dual basis, on bidual tables,
/// and realizes Phi = phi_1 ^ ... ^ phi_k as phi_k o ... o phi_1.
pub fn contract(ring: &Ring, t: usize, k: usize, phi: &[u64], s: usize, f: &[u64]) -> Vec<u64> {
    let n = ring.n;
    let ck = Combos::new(t, k);
    let cs = Combos::new(t, s);
    let co = Combos::new(t, s - k);
    let mut out = vec![0u64; co.len() * n];
    for (ki, &km) in ck.list.iter().enumerate() {
        let pk = &phi[ki * n..(ki + 1) * n];
        if ring.is_zero(pk) {
            continue;
        }
        for (ji, &jm) in co.list.iter().enumerate() {
            if km & jm != 0 {
                continue;
            }
            let fi = cs.idx(km | jm);
            let fv = &f[fi * n..(fi + 1) * n];
            if ring.is_zero(fv) {
                continue;
            }
            let mut prod = ring.mul(pk, fv);
            if wedge_sign(km, jm) {
                prod = ring.neg(&prod);
            }
            let o = &mut out[ji * n..(ji + 1) * n];
            for h in 0..n {
                o[h] = ring.base.add(o[h], prod[h]);
            }
        }
    }
    out
}

/// Wedge of vectors v_1..v_k of R^t, in coordinates over k-subsets (minors).
pub fn wedge_vectors(ring: &Ring, t: usize, vs: &[Vec<u64>]) -> Vec<u64> {
    let k = vs.len();
    let c = Combos::new(t, k);
    let n = ring.n;
    let mut out = vec![0u64; c.len() * n];
    for (i, &m) in c.list.iter().enumerate() {
        let cols = elems(m);
        let sub: Vec<Vec<Vec<u64>>> =
            vs.iter().map(|v| cols.iter().map(|&j| ring.entry(v, j).to_vec()).collect()).collect();
        out[i * n..(i + 1) * n].copy_from_slice(&ring.det(&sub));
    }
    out
}

/// Matrix (rows indexed by source k-subsets) of the k-th compound of an
/// R-linear map given by a rows of R^b: e_I -> sum_J det(C[I, J]) e_J.
pub fn compound(ring: &Ring, a: usize, b: usize, c: &[Vec<u64>], k: usize) -> Vec<Vec<u64>> {
    let ca = Combos::new(a, k);
    ca.list
        .iter()
        .map(|&im| {
            let rows: Vec<Vec<u64>> = elems(im).iter().map(|&i| c[i].clone()).collect();
            wedge_vectors(ring, b, &rows)
        })
        .collect()
}

/// The r-th exterior bidual of X.
#[derive(Clone, Debug)]
pub struct Bidual {
    pub x: FPModule,
    pub r: usize,
    pub xdual: Dual,
    pub t: usize,
    pub wedge_dual: Exterior,
    pub combos: Combos,
    /// All elements, as value tables in R^{C(t, r)}.
    pub span: Span,
    /// Generators (tables) and presentation.
    pub gens: Vec<Vec<u64>>,
    pub module: FPModule,
}

pub fn exterior_bidual(x: &FPModule, r: usize) -> Bidual {
    let xdual = dual(x);
    bidual_with_dual(x, r, xdual)
}

pub fn bidual_with_dual(x: &FPModule, r: usize, xdual: Dual) -> Bidual {
    let t = xdual.gens.len();
    let wedge_dual = exterior_power(&xdual.module, r);
    let d = dual(&wedge_dual.module);
    Bidual {
        x: x.clone(),
        r,
        t,
        combos: Combos::new(t, r),
        span: d.span,
        gens: d.gens,
        module: d.module,
        xdual,
        wedge_dual,
    }
}

impl Bidual {
    pub fn ring(&self) -> &Ring {
        &self.x.ring
    }

    pub fn contains(&self, table: &[u64]) -> bool {
        self.span.contains(table)
    }

    /// xi(e_J): the table I -> det(phi_i(x_j))_{i in I, j in J}.
    pub fn xi(&self, jm: u32) -> Vec<u64> {
        let ring = self.ring();
        let n = ring.n;
        let js = elems(jm);
        let mut out = vec![0u64; self.combos.len() * n];
        for (ii, &im) in self.combos.list.iter().enumerate() {
            let sub: Vec<Vec<Vec<u64>>> = elems(im)
                .iter()
                .map(|&i| js.iter().map(|&j| ring.entry(&self.xdual.gens[i], j).to_vec()).collect())
                .collect();
            out[ii * n..(ii + 1) * n].copy_from_slice(&ring.det(&sub));
        }
        out
    }

    /// xi applied to an element of the r-th exterior power (coordinates over
    /// r-subsets of the generators of X).
    pub fn xi_elem(&self, w: &[u64]) -> Vec<u64> {
        let ring = self.ring();
        let n = ring.n;
        let cx = Combos::new(self.x.g, self.r);
        let mut out = vec![0u64; self.combos.len() * n];
        for (i, &jm) in cx.list.iter().enumerate() {
            let c = ring.entry(w, i);
            if ring.is_zero(c) {
                continue;
            }
            let tj = self.xi(jm);
            ring.axpy_vec(&mut out, c, &tj);
        }
        out
    }

    /// Element of X* (a vector in R^g) in coordinates of the chosen
    /// generators of X*.
    pub fn dual_coords(&self, phi: &[u64]) -> Vec<u64> {
        self.xdual.coords(self.ring(), phi).expect("functional lies in the dual")
    }

    /// Wedge of functionals (vectors in R^g) in coordinates over subsets of
    /// the chosen generators of X*.
    pub fn wedge_functionals(&self, phis: &[Vec<u64>]) -> Vec<u64> {
        let cs: Vec<Vec<u64>> = phis.iter().map(|p| self.dual_coords(p)).collect();
        wedge_vectors(self.ring(), self.t, &cs)
    }

    /// Contraction of a table of this bidual by Phi of degree k (coordinates
    /// over k-subsets of the generators of X*).
    pub fn contract(&self, k: usize, phi: &[u64], table: &[u64]) -> Vec<u64> {
        contract(self.ring(), self.t, k, phi, self.r, table)
    }

    /// Element of X represented by a degree-one table (values on X*
    /// generators), if r = 1: solves phi_l(x) = table_l.
    pub fn table_of(&self, xv: &[u64]) -> Vec<u64> {
        let ring = self.ring();
        self.xdual.gens.iter().flat_map(|phi| eval(ring, phi, xv)).collect()
    }

    pub fn log_size(&self) -> u32 {
        self.span.log_size()
    }
}

/// Linear map of value tables induced by f : Y -> X on r-th biduals,
/// rows indexed by the tables of `by` (source), landing in tables of `bx`.
/// For F in the bidual of Y: (f F)[I] = sum_J det(C[I, J]) F[J] where C
/// expresses the pullbacks of X* generators in Y* generators.
pub fn induced_rows(f: &ModuleMap, by: &Bidual, bx: &Bidual) -> Vec<Vec<u64>> {
    let ring = &f.src.ring;
    let n = ring.n;
    // pullback of phi in X*: (phi o f)(y_i) = phi(f(y_i))
    let c: Vec<Vec<u64>> = bx
        .xdual
        .gens
        .iter()
        .map(|phi| {
            let pulled: Vec<u64> = f.mat.iter().flat_map(|row| eval(ring, phi, row)).collect();
            by.dual_coords(&pulled)
        })
        .collect();
    let comp = compound(ring, bx.t, by.t, &c, bx.r);
    // comp[I] = (det C[I, J])_J; transpose into rows indexed by J
    let cy = by.combos.len();
    let cx = bx.combos.len();
    (0..cy)
        .map(|j| {
            let mut row = vec![0u64; cx * n];
            for i in 0..cx {
                row[i * n..(i + 1) * n].copy_from_slice(&comp[i][j * n..(j + 1) * n]);
            }
            row
        })
        .collect()
}

pub fn apply_table_map(ring: &Ring, rows: &[Vec<u64>], table: &[u64], out_len: usize) -> Vec<u64> {
    crate::module::apply_rows(ring, table, rows, out_len)
}

/// Image (as a span of tables of `bx`) of the bidual of Y under f.
pub fn induced_image(f: &ModuleMap, by: &Bidual, bx: &Bidual) -> Span {
    let ring = &f.src.ring;
    let rows = induced_rows(f, by, bx);
    let imgs: Vec<Vec<u64>> =
        by.span.rows.iter().map(|t| apply_table_map(ring, &rows, t, bx.combos.len())).collect();
    Span::new(ring.base, bx.combos.len() * ring.n, imgs)
}

/// Whether the induced map on r-th biduals is injective.
pub fn induced_injective(f: &ModuleMap, by: &Bidual, bx: &Bidual) -> bool {
    induced_image(f, by, bx).log_size() == by.span.log_size()
}

/// Membership of a table x of the r-th bidual of X in the bidual of the
/// submodule Y (generated by `ygens` inside X), decided by contracting with
/// all monomials of degree r - 1 in the generators of X*.
/// Returns the first failing monomial.
pub fn submodule_membership(b: &Bidual, ygens: &[Vec<u64>], x: &[u64]) -> Result<(), u32> {
    let ring = b.ring();
    if b.r == 0 {
        return Ok(());
    }
    let ytables: Vec<Vec<u64>> = ygens
        .iter()
        .map(|y| b.xdual.gens.iter().flat_map(|phi| eval(ring, phi, y)).collect())
        .collect();
    let yspan = ring.rspan(b.t, &ytables);
    let ck = Combos::new(b.t, b.r - 1);
    for (ki, &km) in ck.list.iter().enumerate() {
        let mut phi = vec![0u64; ck.len() * ring.n];
        phi[ki * ring.n] = 1;
        let v = b.contract(b.r - 1, &phi, x);
        if !yspan.contains(&v) {
            return Err(km);
        }
    }
    Ok(())
}

/// The bidual of ker(f) and the kernel of contraction by f on the bidual of
/// X, both as spans of tables of X. They agree over self-injective rings.
pub fn bidual_kernel(x: &FPModule, f: &[u64], r: usize) -> (Span, Span) {
    let ring = &x.ring;
    let bx = exterior_bidual(x, r);
    let target = FPModule::free(ring, 1);
    let fmap = ModuleMap { src: x.clone(), dst: target, mat: (0..x.g).map(|j| ring.entry(f, j).to_vec()).collect() };
    let inc = fmap.kernel();
    let bk = exterior_bidual(&inc.src, r);
    let lhs = induced_image(&inc, &bk, &bx);
    let rhs = if r == 0 {
        bx.span.clone()
    } else {
        let c = bx.dual_coords(f);
        let cols = Combos::new(bx.t, r - 1).len() * ring.n;
        // contraction map on tables restricted to the span
        let rows: Vec<Vec<u64>> = bx.span.rows.iter().map(|tb| bx.contract(1, &c, tb)).collect();
        let k = preimage(ring.base, &rows, cols, None);
        let gens: Vec<Vec<u64>> = k
            .rows
            .iter()
            .map(|y| {
                let mut v = vec![0u64; bx.combos.len() * ring.n];
                for (i, row) in bx.span.rows.iter().enumerate() {
                    crate::ring::axpy(ring.base, &mut v, y[i], row, 0);
                }
                v
            })
            .collect();
        Span::new(ring.base, bx.combos.len() * ring.n, gens)
    };
    (lhs, rhs)
}

/// Ideal generated by the values of the contraction of the top exterior
/// power of the free module R^{r+s} by phi_1 ^ ... ^ phi_s.
pub fn fitt0_via_bidual(ring: &Ring, d: usize, phis: &[Vec<u64>]) -> Ideal {
    let s = phis.len();
    let top = ring.one();
    let w = wedge_vectors(ring, d, phis);
    let out = contract(ring, d, s, &w, d, &top);
    let vals: Vec<Vec<u64>> = out.chunks(ring.n).map(|c| c.to_vec()).collect();
    Ideal::new(ring, &vals)
}

/// Kernel of the natural map between exterior powers of Y and of Y / X,
/// and the span of X ^ (r-1)-th power of Y, both as spans of monomial
/// coordinates of the r-th power of Y.
pub fn wedge_kernel(y: &FPModule, xgens: &[Vec<u64>], r: usize) -> (Span, Span) {
    let ring = &y.ring;
    let n = ring.n;
    let ey = exterior_power(y, r);
    let z = FPModule::from_span(ring, y.g, y.rels.with(&ring.restrict(xgens)));
    let ez = exterior_power(&z, r);
    // identity on monomials: kernel = relations of the target
    let kernel = ez.module.rels.clone();
    let lower = Combos::new(y.g, r.saturating_sub(1));
    let mut rows = ey.module.rels.rows.clone();
    if r >= 1 {
        for xv in xgens {
            for &jm in &lower.list {
                let mut basis: Vec<Vec<u64>> = Vec::new();
                basis.push(xv.clone());
                for j in elems(jm) {
                    basis.push(y.gen(j));
                }
                rows.extend(ring.translates(&wedge_vectors(ring, y.g, &basis)));
            }
        }
    }
    let span = Span::new(ring.base, ey.combos.len() * n, rows);
    (kernel, span)
}

/// Tables of the bidual of a submodule Y of X (given by generators) inside
/// the tables of X.
pub fn sub_bidual_image(x: &FPModule, ygens: &[Vec<u64>], r: usize) -> (Bidual, Span) {
    let bx = exterior_bidual(x, r);
    let inc = sub_presentation(x, ygens.to_vec());
    let by = exterior_bidual(&inc.src, r);
    let img = induced_image(&inc, &by, &bx);
    (bx, img)
}

/// Minimal generators of a span of tables (used to present images).
pub fn span_gens(ring: &Ring, s: &Span) -> Vec<Vec<u64>> {
    min_gens(ring, s, None)
}

/// Bidual of the free module R^k on the standard dual basis, so tables are
/// exterior power coordinates.
pub fn std_bidual(ring: &Ring, k: usize, r: usize) -> Bidual {
    let f = FPModule::free(ring, k);
    let gens: Vec<Vec<u64>> = (0..k)
        .map(|j| {
            let mut v = vec![0u64; k * ring.n];
            v[j * ring.n] = 1;
            v
        })
        .collect();
    let xdual = Dual { gens, module: FPModule::free(ring, k), span: Span::full(ring.base, k * ring.n) };
    bidual_with_dual(&f, r, xdual)
}

/// Random finitely presented module on g generators with relations of
/// mixed valuation.
pub fn random_module(ring: &Ring, g: usize, rng: &mut ChaCha8Rng) -> FPModule {
    let k = rng.gen_range(0..=g + 1);
    let rels: Vec<Vec<u64>> = (0..k)
        .map(|_| {
            (0..g * ring.n)
                .map(|_| {
                    let e = rng.gen_range(0..=ring.base.m);
                    if e == ring.base.m {
                        0
                    } else {
                        ring.base.mul(ring.base.pow_p(e), rng.gen_range(0..ring.base.q))
                    }
                })
                .collect()
        })
        .collect();
    FPModule::new(ring, g, &rels)
}

fn random_vec(ring: &Ring, len: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    (0..len * ring.n).map(|_| rng.gen_range(0..ring.base.q)).collect()
}

/// Random element of a span.
pub fn random_in_span(s: &Span, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut v = vec![0u64; s.ncols];
    for row in &s.rows {
        crate::ring::axpy(s.zq, &mut v, rng.gen_range(0..s.zq.q), row, 0);
    }
    v
}

fn ext_coords(ring: &Ring, g: usize, xs: &[Vec<u64>]) -> Vec<u64> {
    wedge_vectors(ring, g, xs)
}

/// Every structural statement about exterior biduals, on one module X and
/// degree r. Each check is independent and deterministic in the seed.
pub fn verify_bidual(x: &FPModule, r: usize, seed: u64) -> Vec<Check> {
    let ring = &x.ring;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = x.g;
    let bx = exterior_bidual(x, r);
    let mut out = Vec::new();

    // injectivity on a random submodule
    let ygens: Vec<Vec<u64>> = (0..rng.gen_range(1..=g.max(1))).map(|_| random_vec(ring, g, &mut rng)).collect();
    let inc = sub_presentation(x, ygens.clone());
    let by = exterior_bidual(&inc.src, r);
    let img = induced_image(&inc, &by, &bx);
    out.push(Check::new("bidual.submodule_injective", img.log_size() == by.span.log_size()));

    // membership criterion through contractions, on elements inside and
    // (usually) outside the sub-bidual
    let mut agree = true;
    for k in 0..4 {
        let t = if k % 2 == 0 { random_in_span(&img, &mut rng) } else { random_in_span(&bx.span, &mut rng) };
        if submodule_membership(&bx, &ygens, &t).is_ok() != img.contains(&t) {
            agree = false;
        }
    }
    out.push(Check::new("bidual.membership_criterion", agree));

    // Fitt0 through the bidual of a free module against minors
    let s = rng.gen_range(0..=2usize);
    let phis: Vec<Vec<u64>> = (0..s).map(|_| random_vec(ring, r + s, &mut rng)).collect();
    let via = fitt0_via_bidual(ring, r + s, &phis);
    let pres: Vec<Vec<u64>> =
        (0..r + s).map(|j| phis.iter().flat_map(|p| ring.entry(p, j).to_vec()).collect()).collect();
    let minors = crate::module::fitting_from_matrix(ring, s, &pres, 0);
    out.push(Check::new("bidual.fitt0_via_bidual", via == minors));

    // contraction by a wedge of functionals lands in the bidual of the
    // joint kernel
    let d = &bx.xdual;
    let s2 = rng.gen_range(1..=2usize);
    let fs: Vec<Vec<u64>> = (0..s2).map(|_| random_in_span(&d.span, &mut rng)).collect();
    let hi = bidual_with_dual(x, r + s2, d.clone());
    let phi = hi.wedge_functionals(&fs);
    let kmap = ModuleMap {
        src: x.clone(),
        dst: FPModule::free(ring, s2),
        mat: (0..g).map(|j| fs.iter().flat_map(|f| ring.entry(f, j).to_vec()).collect()).collect(),
    }
    .kernel();
    let kimg = induced_image(&kmap, &exterior_bidual(&kmap.src, r), &bx);
    let lands = hi.span.rows.iter().all(|t| kimg.contains(&contract(ring, hi.t, s2, &phi, r + s2, t)));
    out.push(Check::new("bidual.wedge_contraction_in_kernel", lands));

    // kernel of Y^r -> (Y/X)^r is X ^ Y^(r-1)
    let xg: Vec<Vec<u64>> = (0..rng.gen_range(1..=2usize)).map(|_| random_vec(ring, g, &mut rng)).collect();
    let (ker, sp) = wedge_kernel(x, &xg, r);
    out.push(Check::new("bidual.wedge_kernel", ker.contains_span(&sp) && sp.contains_span(&ker)));

    // bidual of ker(f) is the kernel of contraction by f
    let f = random_in_span(&d.span, &mut rng);
    let (lhs, rhs) = bidual_kernel(x, &f, r);
    out.push(Check::new("bidual.kernel_identification", lhs.contains_span(&rhs) && rhs.contains_span(&lhs)));

    // xi commutes with contraction by a functional
    let xs: Vec<Vec<u64>> = (0..r).map(|_| random_vec(ring, g, &mut rng)).collect();
    let lo = bidual_with_dual(x, r - 1, d.clone());
    let top = bx.xi_elem(&ext_coords(ring, g, &xs));
    let phi1 = random_in_span(&d.span, &mut rng);
    let lhs = bx.contract(1, &bx.dual_coords(&phi1), &top);
    let mut rhs = vec![0u64; lhs.len()];
    for i in 0..r {
        let rest: Vec<Vec<u64>> = xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.clone()).collect();
        let mut c = eval(ring, &phi1, &xs[i]);
        if i % 2 == 1 {
            c = ring.neg(&c);
        }
        ring.axpy_vec(&mut rhs, &c, &lo.xi_elem(&ext_coords(ring, g, &rest)));
    }
    out.push(Check::new("bidual.xi_natural", lhs == rhs));

    out.push(check_morph(ring, g, r, &mut rng));
    out
}

/// The map from the bidual of X inside a free F over R to the bidual of a
/// submodule Y of F/p^(m-1) containing the image of X, and its square with xi.
fn check_morph(ring: &Ring, g: usize, r: usize, rng: &mut ChaCha8Rng) -> Check {
    let k = g.max(r);
    let sring = ring.with_m(ring.base.m.saturating_sub(1).max(1));
    let fr = FPModule::free(ring, k);
    let xgens: Vec<Vec<u64>> = (0..g).map(|_| random_vec(ring, k, rng)).collect();
    let inc = sub_presentation(&fr, xgens.clone());
    let bxm = exterior_bidual(&inc.src, r);
    let bf = std_bidual(ring, k, r);
    let rows = induced_rows(&inc, &bxm, &bf);
    let fs = FPModule::free(&sring, k);
    let mut ygens: Vec<Vec<u64>> = xgens.iter().map(|v| reduce_vec(ring, &sring, v)).collect();
    ygens.push(random_vec(&sring, k, rng));
    let incy = sub_presentation(&fs, ygens);
    let by = exterior_bidual(&incy.src, r);
    let bfs = std_bidual(&sring, k, r);
    let yimg = induced_image(&incy, &by, &bfs);
    let push = |t: &[u64]| reduce_vec(ring, &sring, &apply_table_map(ring, &rows, t, bf.combos.len()));
    if !bxm.span.rows.iter().all(|t| yimg.contains(&push(t))) {
        return Check::new("bidual.morph", false).witness("image leaves the bidual of Y");
    }
    // xi square: x_1 ^ ... ^ x_r with x_i in X
    let cs: Vec<Vec<u64>> = (0..r).map(|_| random_vec(ring, g, rng)).collect();
    let xi_x = bxm.xi_elem(&wedge_vectors(ring, g, &cs));
    let lhs = push(&xi_x);
    let vs: Vec<Vec<u64>> = cs.iter().map(|c| reduce_vec(ring, &sring, &inc.apply(c))).collect();
    let minors = wedge_vectors(&sring, k, &vs);
    let mut cy: Vec<Vec<u64>> = cs.iter().map(|c| reduce_vec(ring, &sring, c)).collect();
    for c in cy.iter_mut() {
        c.extend(vec![0u64; sring.n]);
    }
    let xi_y = by.xi_elem(&wedge_vectors(&sring, g + 1, &cy));
    let rows_y = induced_rows(&incy, &by, &bfs);
    let via_y = apply_table_map(&sring, &rows_y, &xi_y, bfs.combos.len());
    Check::new("bidual.morph", lhs == minors && via_y == minors)
}

fn reduce_vec(from: &Ring, to: &Ring, v: &[u64]) -> Vec<u64> {
    v.chunks(from.n).flat_map(|a| from.reduce_elem(a, to.base.m)).collect()
}
