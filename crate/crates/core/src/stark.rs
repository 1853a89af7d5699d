//! Stark systems over a Selmer instance.
//!
//! For a free ambient H = R^d over a self-injective R, the bidual of any
//! submodule X of H embeds into the exterior power of H: restriction of
//! functionals H* -> X* is onto. Every component is therefore stored as a
//! table over k-subsets of the d coordinates, and lies in the bidual of X
//! exactly when it is killed by contraction with the functionals cutting X.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bidual::{contract, wedge_vectors};
use crate::combo::binom;
use crate::module::{fitting_ideal, min_gens, Ideal};
use crate::report::Check;
use crate::ring::Ring;
use crate::selmer::{divisors, label, nu, residue, SelmerInstance, Selector};
use crate::Error;

/// Single contraction of a degree-k table over d letters by a functional.
pub fn contract1(ring: &Ring, d: usize, psi: &[u64], k: usize, f: &[u64]) -> Vec<u64> {
    contract(ring, d, 1, psi, k, f)
}

pub fn scale_table(ring: &Ring, a: &[u64], f: &[u64]) -> Vec<u64> {
    f.chunks(ring.n).flat_map(|e| ring.mul(a, e)).collect()
}

pub fn neg_table(ring: &Ring, f: &[u64]) -> Vec<u64> {
    f.iter().map(|&x| ring.base.neg(x)).collect()
}

/// Image ideal of a bidual element: generated by its table entries.
pub fn image_ideal(ring: &Ring, f: &[u64]) -> Ideal {
    let gens: Vec<Vec<u64>> = f.chunks(ring.n).filter(|e| !ring.is_zero(e)).map(|e| e.to_vec()).collect();
    Ideal::new(ring, &gens)
}

/// Whether the table is killed by contraction with every functional.
pub fn killed_by(ring: &Ring, d: usize, k: usize, f: &[u64], psis: &[Vec<u64>]) -> bool {
    k == 0 || psis.iter().all(|psi| contract1(ring, d, psi, k, f).iter().all(|&x| x == 0))
}

/// Sign correction of the transition from m to n: parity of pairs (q, q')
/// with q | m/n, q' | N/m and q' < q.
pub fn transition_sign(top: u32, m: u32, n: u32) -> bool {
    let a = m & !n;
    let b = top & !m;
    let mut t = 0;
    for q in 0..32 {
        if a >> q & 1 == 1 {
            t += (b & ((1u32 << q) - 1)).count_ones();
        }
    }
    t % 2 == 1
}

/// v_{m,n}: contractions by v_q for q | m/n, the largest prime applied
/// first, times the correction sign.
pub fn transition(inst: &SelmerInstance, m: u32, n: u32, f: &[u64]) -> Result<Vec<u64>, Error> {
    if n & !m != 0 {
        return Err(Error::Invalid("transition needs n | m".into()));
    }
    let ring = &inst.ring;
    let d = inst.d();
    let mut k = inst.r + nu(m);
    let mut cur = f.to_vec();
    for q in (0..inst.s()).rev() {
        if (m & !n) >> q & 1 == 1 {
            cur = contract1(ring, d, &inst.primes[q].v, k, &cur);
            k -= 1;
        }
    }
    if transition_sign(inst.top(), m, n) {
        cur = neg_table(ring, &cur);
    }
    Ok(cur)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarkSystem {
    pub r: usize,
    /// Component at each divisor mask, a table over (r + nu(n))-subsets.
    pub comps: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentJson {
    pub divisor: String,
    pub mask: u32,
    pub values: Vec<Vec<u64>>,
}

pub fn components_json(inst: &SelmerInstance, comps: &[Vec<u64>]) -> Vec<ComponentJson> {
    comps
        .iter()
        .enumerate()
        .map(|(n, t)| ComponentJson {
            divisor: label(inst, n as u32),
            mask: n as u32,
            values: t.chunks(inst.ring.n).map(|c| c.to_vec()).collect(),
        })
        .collect()
}

pub fn components_from_json(inst: &SelmerInstance, deg: impl Fn(u32) -> usize, cs: &[ComponentJson]) -> Result<Vec<Vec<u64>>, Error> {
    let count = 1usize << inst.s();
    if cs.len() != count {
        return Err(Error::Invalid(format!("expected {count} components, found {}", cs.len())));
    }
    let mut out = vec![Vec::new(); count];
    for c in cs {
        let n = c.mask as usize;
        if n >= count || !out[n].is_empty() {
            return Err(Error::Invalid(format!("bad divisor mask {}", c.mask)));
        }
        let want = binom(inst.d(), deg(c.mask));
        if c.values.len() != want || c.values.iter().any(|v| v.len() != inst.ring.n || v.iter().any(|&x| x >= inst.ring.base.q)) {
            return Err(Error::Invalid(format!("component {} has malformed values", c.divisor)));
        }
        out[n] = c.values.concat();
    }
    Ok(out)
}

impl StarkSystem {
    pub fn scale(&self, ring: &Ring, a: &[u64]) -> StarkSystem {
        StarkSystem { r: self.r, comps: self.comps.iter().map(|c| scale_table(ring, a, c)).collect() }
    }

    pub fn to_json(&self, inst: &SelmerInstance) -> Vec<ComponentJson> {
        components_json(inst, &self.comps)
    }

    pub fn from_json(inst: &SelmerInstance, cs: &[ComponentJson]) -> Result<StarkSystem, Error> {
        let r = inst.r;
        Ok(StarkSystem { r, comps: components_from_json(inst, |n| r + nu(n), cs)? })
    }
}

/// The system with top component a * e_1 ^ ... ^ e_d.
pub fn stark_from_top(inst: &SelmerInstance, a: &[u64]) -> StarkSystem {
    let top = inst.top();
    let comps = (0..=top).map(|n| transition(inst, top, n, a).unwrap()).collect();
    StarkSystem { r: inst.r, comps }
}

pub fn basis(inst: &SelmerInstance) -> StarkSystem {
    stark_from_top(inst, &inst.ring.one())
}

/// I_i(eps) = sum over nu(n) = i of im(eps_n).
pub fn stark_ideal(inst: &SelmerInstance, eps: &StarkSystem, i: usize) -> Ideal {
    let mut out = Ideal::zero(&inst.ring);
    for n in divisors(inst.top()) {
        if nu(n) == i {
            out = out.sum(&image_ideal(&inst.ring, &eps.comps[n as usize]));
        }
    }
    out
}

/// Functionals whose kernels cut H^1_{F^n}.
pub fn relaxed_conditions(inst: &SelmerInstance, n: u32) -> Vec<Vec<u64>> {
    inst.conditions(Selector::relaxed(n))
}

/// Checks membership of every component and every transition relation.
pub fn check_stark(inst: &SelmerInstance, eps: &StarkSystem) -> Result<(), String> {
    let top = inst.top();
    for n in divisors(top) {
        let k = inst.r + nu(n);
        if !killed_by(&inst.ring, inst.d(), k, &eps.comps[n as usize], &relaxed_conditions(inst, n)) {
            return Err(format!("component at {} is not in the bidual of its Selmer module", label(inst, n)));
        }
    }
    for m in divisors(top) {
        for n in divisors(m) {
            let t = transition(inst, m, n, &eps.comps[m as usize]).unwrap();
            if t != eps.comps[n as usize] {
                return Err(format!("transition {} -> {} fails", label(inst, m), label(inst, n)));
            }
        }
    }
    Ok(())
}

/// v_{m',n} = v_{m,n} o v_{m',m} on random tables, over every chain.
pub fn check_cocycle(inst: &SelmerInstance, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ring = &inst.ring;
    let d = inst.d();
    let mut count = 0;
    for m2 in divisors(inst.top()) {
        let k = inst.r + nu(m2);
        let f: Vec<u64> = (0..binom(d, k) * ring.n).map(|_| rng.gen_range(0..ring.base.q)).collect();
        for m in divisors(m2) {
            let fm = transition(inst, m2, m, &f).unwrap();
            for n in divisors(m) {
                let a = transition(inst, m2, n, &f).unwrap();
                let b = transition(inst, m, n, &fm).unwrap();
                if a != b {
                    return Err(format!("{} > {} > {}", label(inst, m2), label(inst, m), label(inst, n)));
                }
                count += 1;
            }
        }
    }
    Ok(count)
}

/// At a vertex n where the dual Selmer module of F^n vanishes, the bidual
/// of H^1_{F^n} is free of rank one and eps_n must generate it.
pub fn projection_bijective(inst: &SelmerInstance, eps: &StarkSystem, n: u32) -> Result<bool, String> {
    if !inst.dual_selmer(Selector::relaxed(n)).is_zero() {
        return Ok(false);
    }
    let ring = &inst.ring;
    let k = inst.r + nu(n);
    let span = inst.selmer_span(Selector::relaxed(n));
    let gens = min_gens(ring, &span, None);
    if gens.len() != k || span.log_size() != k as u32 * ring.base.m * ring.n as u32 {
        return Err(format!("H^1 at {} is not free of rank {k}", label(inst, n)));
    }
    let w = wedge_vectors(ring, inst.d(), &gens);
    let cols = binom(inst.d(), k) * ring.n;
    let a = ring.rspan(cols / ring.n, &[w]);
    let b = ring.rspan(cols / ring.n, &[eps.comps[n as usize].clone()]);
    if a != b {
        return Err(format!("component at {} does not generate", label(inst, n)));
    }
    Ok(true)
}

/// Fitt^i of the base dual Selmer module.
pub fn base_fitting(inst: &SelmerInstance, i: usize) -> Ideal {
    inst.dual_fitting(Selector::transverse(0), i)
}

/// Sum over nu(m) = i of Fitt^0 of the dual Selmer module of F^m.
pub fn relaxed_fitting_sum(inst: &SelmerInstance, i: usize) -> Ideal {
    let mut out = Ideal::zero(&inst.ring);
    for m in divisors(inst.top()) {
        if nu(m) == i {
            out = out.sum(&fitting_ideal(&inst.dual_selmer(Selector::relaxed(m)), 0));
        }
    }
    out
}

/// A deterministic sample of scalars, including 0, 1 and non-units.
pub fn scalar_sample(ring: &Ring, seed: u64, count: usize) -> Vec<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![ring.zero(), ring.one(), ring.scalar(ring.base.p)];
    if ring.n > 1 {
        out.push(ring.sub(&ring.sigma(0), &ring.one()));
    }
    while out.len() < count {
        out.push((0..ring.n).map(|_| rng.gen_range(0..ring.base.q)).collect());
    }
    out
}

pub fn verify_thm_stark(inst: &SelmerInstance, seed: u64) -> Vec<Check> {
    let ring = &inst.ring;
    let s = inst.s();
    let mut out = Vec::new();
    out.push(match check_cocycle(inst, seed) {
        Ok(c) => Check::new("stark.cocycle", true).data(json!({ "chains": c })),
        Err(w) => Check::new("stark.cocycle", false).witness(w),
    });
    let eps = basis(inst);
    out.push(Check::from_result("stark.basis_is_system", check_stark(inst, &eps)));
    let mut bij = Ok(0usize);
    for n in divisors(inst.top()) {
        match projection_bijective(inst, &eps, n) {
            Ok(true) => bij = bij.map(|c| c + 1),
            Ok(false) => {}
            Err(w) => {
                bij = Err(w);
                break;
            }
        }
    }
    out.push(match bij {
        Ok(c) => Check::new("stark.projection_bijective", true).data(json!({ "vertices": c })),
        Err(w) => Check::new("stark.projection_bijective", false).witness(w),
    });
    let fitt: Vec<Ideal> = (0..=s).map(|i| base_fitting(inst, i)).collect();
    let ideals: Vec<Ideal> = (0..=s).map(|i| stark_ideal(inst, &eps, i)).collect();
    let mismatch = (0..=s).find(|&i| ideals[i] != fitt[i]);
    let mut c = Check::new("stark.basis_ideals_equal_fitting", mismatch.is_none());
    if let Some(i) = mismatch {
        c = c.witness(format!("i = {i}"));
    }
    out.push(c);
    let mismatch = (1..=s).find(|&i| relaxed_fitting_sum(inst, i) != fitt[i] || fitt[i] != sum_lower(inst, i));
    let mut c = Check::new("stark.fitting_sum_identity", mismatch.is_none());
    if let Some(i) = mismatch {
        c = c.witness(format!("i = {i}"));
    }
    out.push(c);
    // (a), (b), (c) for scaled bases
    let mut fail = None;
    for lam in scalar_sample(ring, seed ^ 0x51, 6) {
        let e = eps.scale(ring, &lam);
        let id: Vec<Ideal> = (0..=s).map(|i| stark_ideal(inst, &e, i)).collect();
        let inf = id[s].clone();
        for i in 0..=s {
            if id[i] != fitt[i].scale(&lam) {
                fail = Some(format!("I_{i}(lambda basis) != lambda Fitt^{i} for lambda {lam:?}"));
            } else if i < s && !id[i + 1].contains_ideal(&id[i]) {
                fail = Some(format!("I_{i} not contained in I_{} for lambda {lam:?}", i + 1));
            } else if id[i] != inf.product(&fitt[i]) {
                fail = Some(format!("I_{i} != I_inf Fitt^{i} for lambda {lam:?}"));
            }
        }
        if inf.is_unit() != ring.is_unit(&lam) {
            fail = Some(format!("I_inf = R does not match basis property for lambda {lam:?}"));
        }
        if fail.is_some() {
            break;
        }
    }
    let mut c = Check::new("stark.scaled_systems", fail.is_none());
    if let Some(w) = fail {
        c = c.witness(w);
    }
    out.push(c);
    out
}

/// Fitt^i of the dual Selmer module of F as the sum over q of Fitt^{i-1}
/// of the dual Selmer module of F^q.
pub fn sum_lower(inst: &SelmerInstance, i: usize) -> Ideal {
    let mut out = Ideal::zero(&inst.ring);
    for q in 0..inst.s() {
        out = out.sum(&inst.dual_fitting(Selector::relaxed(1 << q), i - 1));
    }
    out
}

/// Compatible Stark systems over Z/p^m for m = 1..m_max.
#[derive(Clone, Debug)]
pub struct StarkTower {
    pub levels: Vec<(SelmerInstance, StarkSystem)>,
}

pub fn build_tower(inst: &SelmerInstance, top: &[u64]) -> StarkTower {
    let mm = inst.ring.base.m;
    let levels = (1..=mm)
        .map(|m| {
            let im = inst.reduce(m);
            let a = inst.ring.reduce_elem(top, m);
            let e = stark_from_top(&im, &a);
            (im, e)
        })
        .collect();
    StarkTower { levels }
}

/// Reduction of a level-(m+1) system to level m: entrywise reduction.
pub fn tower_reduce(upper: &SelmerInstance, eps: &StarkSystem, lower: &SelmerInstance) -> Result<StarkSystem, Error> {
    if upper.reduce(lower.ring.base.m).to_json().primes != lower.primes {
        return Err(Error::Invalid("incompatible instances".into()));
    }
    let m = lower.ring.base.m;
    let comps = eps.comps.iter().map(|c| c.iter().map(|&x| upper.ring.base.reduce_to(x, m)).collect()).collect();
    Ok(StarkSystem { r: eps.r, comps })
}

/// A level-(m+1) system reducing to the given level-m system.
pub fn tower_lift(lower: &SelmerInstance, eps: &StarkSystem, upper: &SelmerInstance) -> Result<StarkSystem, Error> {
    if upper.reduce(lower.ring.base.m).to_json().primes != lower.primes {
        return Err(Error::Invalid("incompatible instances".into()));
    }
    let top = eps.comps.last().unwrap().clone();
    Ok(stark_from_top(upper, &top))
}

/// Ideals of a tower reduced from the top level; stabilization is checked
/// against every lower level.
pub fn tower_limit_ideal(tower: &StarkTower, i: usize) -> Result<Ideal, Error> {
    let (ti, te) = tower.levels.last().unwrap();
    let top = stark_ideal(ti, te, i);
    for (im, e) in &tower.levels {
        if top.reduce(&im.ring) != stark_ideal(im, e, i) {
            return Err(Error::Invalid(format!("tower ideals incoherent at level {}", im.ring.base.m)));
        }
    }
    Ok(top)
}

pub fn verify_tower(inst: &SelmerInstance, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tower = build_tower(inst, &inst.ring.one());
    let s = inst.s();
    let mut fail = None;
    for w in tower.levels.windows(2) {
        let (lo, elo) = &w[0];
        let (hi, ehi) = &w[1];
        let red = tower_reduce(hi, ehi, lo).unwrap();
        if &red != elo {
            fail = Some(format!("basis does not reduce to basis at level {}", lo.ring.base.m));
        }
        // surjectivity: a random lower system lifts
        let a: Vec<u64> = (0..lo.ring.n).map(|_| rng.gen_range(0..lo.ring.base.q)).collect();
        let x = elo.scale(&lo.ring, &a);
        let up = tower_lift(lo, &x, hi).unwrap();
        if check_stark(hi, &up).is_err() || tower_reduce(hi, &up, lo).unwrap() != x {
            fail = Some(format!("lift fails at level {}", lo.ring.base.m));
        }
        for i in 0..=s {
            if stark_ideal(hi, ehi, i).reduce(&lo.ring) != stark_ideal(lo, elo, i) {
                fail = Some(format!("ideal I_{i} not compatible at level {}", lo.ring.base.m));
            }
        }
    }
    let mut c = Check::new("tower.compatible", fail.is_none());
    if let Some(w) = fail {
        c = c.witness(w);
    }
    out.push(c);
    let mut fail = None;
    let mut exps = Vec::new();
    for i in 0..=s {
        match tower_limit_ideal(&tower, i) {
            Ok(lim) => {
                exps.push(lim.exponent());
                if lim != base_fitting(inst, i) {
                    fail = Some(format!("limit I_{i} differs from Fitt^{i}"));
                }
            }
            Err(e) => fail = Some(e.to_string()),
        }
    }
    let mut c = Check::new("tower.limit_equals_fitting", fail.is_none()).data(json!({ "exponents": exps }));
    if let Some(w) = fail {
        c = c.witness(w);
    }
    out.push(c);
    out
}

/// Residue of the top coefficient; used to decide whether a system is a basis.
pub fn is_basis(inst: &SelmerInstance, eps: &StarkSystem) -> bool {
    residue(&inst.ring, eps.comps.last().unwrap()) != 0
}
