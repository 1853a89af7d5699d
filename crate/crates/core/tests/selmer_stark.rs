mod common;

use std::collections::{HashMap, HashSet};

use common::{fitting_enum, ORing};
use eks::kolyvagin::*;
use eks::module::Ideal;
use eks::ring::Ring;
use eks::selmer::*;
use eks::stark::*;
use proptest::prelude::*;

fn chain(p: u64, m: u32) -> Ring {
    Ring::new(p, m, &[]).unwrap()
}

/// a * e_i in R^d over a chain ring.
fn e(d: usize, i: usize, a: u64) -> Vec<u64> {
    let mut v = vec![0; d];
    v[i] = a;
    v
}

fn toy(ring: &Ring, r: usize, f: Vec<Vec<u64>>, v: Vec<Vec<u64>>) -> SelmerInstance {
    let primes = f
        .into_iter()
        .zip(v)
        .enumerate()
        .map(|(q, (f, v))| PrimeData { label: format!("q{}", q + 1), f, v, u: ring.one(), fr: None })
        .collect();
    SelmerInstance { ring: ring.clone(), r, primes, profile: "toy".into(), seed: 0 }
}

/// H = R^3, r = 1, v_1 = e2*, v_2 = c e3*, f_1 = f_2 = e1*.
fn toy3(ring: &Ring, c: u64) -> SelmerInstance {
    toy(ring, 1, vec![e(3, 0, 1), e(3, 0, 1)], vec![e(3, 1, 1), e(3, 2, c)])
}

/// Interior product on alternating tables keyed by sorted index sets.
type Table = HashMap<Vec<usize>, i64>;

fn interior(psi: &[i64], f: &Table) -> Table {
    let mut out = Table::new();
    for (set, &val) in f {
        for (pos, &j) in set.iter().enumerate() {
            let mut rest = set.clone();
            rest.remove(pos);
            let sign = if pos % 2 == 0 { 1 } else { -1 };
            *out.entry(rest).or_insert(0) += sign * psi[j] * val;
        }
    }
    out
}

/// Flattens a table into the library layout (subsets ordered by bitmask).
fn flatten(d: usize, k: usize, t: &Table, q: u64) -> Vec<u64> {
    let mut masks: Vec<u32> = (0u32..1 << d).filter(|m| m.count_ones() as usize == k).collect();
    masks.sort();
    masks
        .iter()
        .map(|&m| {
            let key: Vec<usize> = (0..d).filter(|i| m >> i & 1 == 1).collect();
            t.get(&key).copied().unwrap_or(0).rem_euclid(q as i64) as u64
        })
        .collect()
}

fn vadd(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| (x + y) % 25).collect()
}

fn signed(v: &[u64]) -> Vec<i64> {
    v.iter().map(|&x| x as i64).collect()
}

fn ideal_as_set(id: &Ideal, o: &ORing) -> HashSet<Vec<u64>> {
    o.elements().into_iter().filter(|a| id.contains(a)).collect()
}

// ---- frobenius data

#[test]
fn frobenius_trivial_rank_one() {
    let r = chain(3, 2);
    let fd = frobenius_data(&r, &[vec![r.one()]]).unwrap();
    assert_eq!(fd.q, vec![vec![8]]);
    assert_eq!(fd.u, vec![8]);
}

#[test]
fn frobenius_diagonal() {
    let r = chain(3, 2);
    let fr = vec![vec![vec![1], vec![0]], vec![vec![0], vec![2]]];
    let fd = frobenius_data(&r, &fr).unwrap();
    // det(1 - Fr x) = (1 - x)(1 - 2x) = 1 - 3x + 2x^2; Q = -(1 - 2x)
    assert_eq!(fd.det, vec![vec![1], vec![6], vec![2]]);
    assert_eq!(fd.q, vec![vec![8], vec![2]]);
    assert_eq!(fd.u, vec![1]);
}

#[test]
fn frobenius_rejects_no_fixed_line() {
    let r = chain(3, 2);
    let fr = vec![vec![vec![2], vec![0]], vec![vec![0], vec![2]]];
    assert!(frobenius_data(&r, &fr).is_err());
}

// ---- selmer submodules and dual Selmer modules

#[test]
fn selmer_submodule_examples() {
    let r = chain(5, 2);
    let inst = toy3(&r, 1);
    let zq = r.base;
    let span = |gens: Vec<Vec<u64>>| eks::Span::new(zq, 3, gens);
    assert_eq!(inst.selmer_span(Selector::transverse(0)), span(vec![e(3, 0, 1)]));
    assert_eq!(inst.selmer_span(Selector::transverse(1)), span(vec![e(3, 1, 1)]));
    assert!(inst.selmer_span(Selector::relaxed(inst.top())).is_full());
}

#[test]
fn dual_selmer_examples() {
    let r = chain(2, 2);
    assert!(toy3(&r, 1).dual_selmer(Selector::transverse(0)).is_zero());
    let inst = toy3(&r, 2);
    let ds = inst.dual_selmer(Selector::transverse(0));
    assert_eq!(ds.log_size(), 1);
    assert_eq!(inst.dual_fitting(Selector::transverse(0), 0), Ideal::new(&r, &[vec![2]]));
    assert!(inst.dual_selmer(Selector::relaxed(inst.top())).is_zero());
    assert_eq!(inst.dual_selmer(Selector::relaxed(inst.top())).dim(), 0);
}

#[test]
fn selector_rejects_overlap() {
    assert!(Selector::new(1, 1, 0).is_err());
    assert!(Selector::new(1, 2, 4).is_ok());
}

#[test]
fn lambda_examples() {
    let r = chain(5, 2);
    let inst = generate_instance(3, &r, 1, 3, "class-trivial").unwrap();
    assert_eq!(inst.lambda(Selector::transverse(inst.top())), (1, 0));
    let g = generate_instance(4, &r, 2, 3, "generic").unwrap();
    let (l, ls) = g.lambda(Selector::transverse(0));
    assert_eq!(l - ls, 2);
    let dg = generate_instance(5, &r, 1, 2, "degenerate").unwrap();
    assert_eq!(dg.lambda(Selector::transverse(0)), (3, 2));
}

#[test]
fn lambda_difference_every_divisor() {
    let r = chain(5, 2);
    for seed in 0..10 {
        let inst = generate_instance(seed, &r, 1 + seed as usize % 3, 3, "generic").unwrap();
        for n in divisors(inst.top()) {
            let (l, ls) = inst.lambda(Selector::transverse(n));
            assert_eq!(l - ls, inst.r);
        }
    }
}

#[test]
fn core_graph_examples() {
    let r = chain(5, 2);
    let inst = generate_instance(1, &r, 1, 2, "generic").unwrap();
    let lam_star = inst.lambda(Selector::transverse(0)).1;
    let g = inst.core_graph();
    // exhaustive scan: core iff the residue dual Selmer dimension vanishes
    for n in divisors(inst.top()) {
        assert_eq!(g.vertices.contains(&n), inst.lambda(Selector::transverse(n)).1 == 0);
        if g.vertices.contains(&n) {
            assert!(nu(n) >= lam_star);
        }
    }
    assert!(g.connected);
    // a prime with f = 0 carries no edges
    let mut z = inst.clone();
    z.primes[0].f = vec![0; z.d()];
    assert!(z.core_graph().edges.iter().all(|&(a, b)| (a ^ b) != 1));
    // no primes: a single vertex, core iff lambda*(1) = 0
    let s0 = generate_instance(1, &r, 1, 0, "generic").unwrap();
    assert_eq!(s0.core_graph().vertices, vec![0]);
}

#[test]
fn generate_instance_examples() {
    let r = chain(5, 2);
    let a = generate_instance(1, &r, 1, 2, "generic").unwrap();
    assert!(verify_selmer(&a).iter().all(|c| !c.failed()));
    let b = generate_instance(1, &r, 1, 2, "generic").unwrap();
    assert_eq!(serde_json::to_string(&a.to_json()).unwrap(), serde_json::to_string(&b.to_json()).unwrap());
    let s0 = generate_instance(1, &r, 2, 0, "generic").unwrap();
    assert_eq!(s0.d(), 2);
    assert!(s0.primes.is_empty());
    assert!(generate_instance(1, &r, 1, 2, "bogus").is_err());
}

#[test]
fn fitting_sum_matches_minor_enumeration() {
    let o = ORing::new(3, 2, &[]);
    let r = chain(3, 2);
    for seed in 0..4 {
        let inst = generate_instance(seed, &r, 1, 2, "generic").unwrap();
        let rels = |sel: Selector| {
            let c = inst.conditions(sel);
            (c.len(), inst.loc_rows(&c))
        };
        for i in 0..=inst.s() {
            let (g, rows) = rels(Selector::transverse(0));
            let full = fitting_enum(&o, g, &rows, i);
            assert_eq!(ideal_as_set(&inst.dual_fitting(Selector::transverse(0), i), &o), full);
            if i >= 1 {
                let mut gens = Vec::new();
                for q in 0..inst.s() {
                    let (g, rows) = rels(Selector::relaxed(1 << q));
                    gens.extend(fitting_enum(&o, g, &rows, i - 1));
                }
                assert_eq!(o.span(&gens, 1), full, "seed {seed} i {i}");
            }
            // Fitt^i = sum over nu(m) = i of Fitt^0 of F^m
            let mut gens = Vec::new();
            for m in divisors(inst.top()).into_iter().filter(|&m| nu(m) == i) {
                let (g, rows) = rels(Selector::relaxed(m));
                gens.extend(fitting_enum(&o, g, &rows, 0));
            }
            assert_eq!(o.span(&gens, 1), full, "seed {seed} i {i}");
        }
    }
}

// ---- stark systems

#[test]
fn transition_identity_and_expansion() {
    let r = chain(5, 2);
    let inst = toy3(&r, 1);
    let top = vec![7u64];
    assert_eq!(transition(&inst, 3, 3, &top).unwrap(), top);
    // v_{q1 q2, 1}: contract by v_2 then v_1, no correction sign at the top
    let mut t = Table::new();
    t.insert(vec![0, 1, 2], 7);
    let once = interior(&signed(&inst.primes[1].v), &t);
    let twice = interior(&signed(&inst.primes[0].v), &once);
    assert_eq!(transition(&inst, 3, 0, &top).unwrap(), flatten(3, 1, &twice, 25));
    assert!(transition(&inst, 1, 2, &[0, 0, 0]).is_err());
}

#[test]
fn cocycle_on_nu3_chains() {
    let r = chain(5, 2);
    for seed in 0..5 {
        let inst = generate_instance(seed, &r, 2, 3, "generic").unwrap();
        assert_eq!(check_cocycle(&inst, seed).unwrap(), 64);
    }
}

#[test]
fn stark_from_top_examples() {
    let r = chain(5, 2);
    let inst = generate_instance(2, &r, 1, 3, "generic").unwrap();
    let eps = basis(&inst);
    assert!(check_stark(&inst, &eps).is_ok());
    let z = stark_from_top(&inst, &r.zero());
    assert!(z.comps.iter().all(|c| c.iter().all(|&x| x == 0)));
    let a = vec![7u64];
    assert_eq!(stark_from_top(&inst, &a), eps.scale(&r, &a));
}

#[test]
fn stark_ideal_examples() {
    let r = chain(5, 2);
    let ct = generate_instance(3, &r, 1, 2, "class-trivial").unwrap();
    assert!(stark_ideal(&ct, &basis(&ct), 0).is_unit());
    let z4 = chain(2, 2);
    let inst = toy3(&z4, 2);
    let eps = basis(&inst);
    assert!(check_stark(&inst, &eps).is_ok());
    assert_eq!(stark_ideal(&inst, &eps, 0), Ideal::new(&z4, &[vec![2]]));
    assert!(stark_ideal(&inst, &eps, 1).is_unit());
    for i in 0..=2 {
        assert_eq!(stark_ideal(&inst, &eps, i), base_fitting(&inst, i));
        assert!(stark_ideal(&inst, &eps.scale(&z4, &z4.zero()), i).is_zero());
    }
}

#[test]
fn thm_stark_over_z25() {
    let r = chain(5, 2);
    let inst = generate_instance(7, &r, 2, 3, "generic").unwrap();
    for c in verify_thm_stark(&inst, 7) {
        assert!(!c.failed(), "{} {:?}", c.name, c.witness);
    }
    let eps = basis(&inst);
    let five = eps.scale(&r, &[5]);
    for i in 0..=3 {
        assert_eq!(stark_ideal(&inst, &eps, i), base_fitting(&inst, i));
        assert_eq!(stark_ideal(&inst, &five, i), base_fitting(&inst, i).scale(&[5]));
    }
    assert!(stark_ideal(&inst, &eps, 3).is_unit());
}

#[test]
fn tower_examples() {
    let r = chain(5, 3);
    let inst = toy3(&r, 5);
    let tower = build_tower(&inst, &r.one());
    let (lo, elo) = &tower.levels[0];
    let (mid, emid) = &tower.levels[1];
    assert!(is_basis(lo, elo) && is_basis(mid, emid));
    assert_eq!(&tower_reduce(mid, emid, lo).unwrap(), elo);
    assert_eq!(stark_ideal(mid, emid, 0).reduce(&lo.ring), stark_ideal(lo, elo, 0));
    let lim = tower_limit_ideal(&tower, 0).unwrap();
    assert_eq!(lim.exponent(), Some(1));
    assert_eq!(stark_ideal(mid, emid, 0).exponent(), Some(1));
    assert!(tower_limit_ideal(&tower, 1).unwrap().is_unit());
    let zt = build_tower(&inst, &r.zero());
    assert!(tower_limit_ideal(&zt, 0).unwrap().is_zero());
    // lifting zero lands in the kernel of reduction
    let zero = elo.scale(&lo.ring, &lo.ring.zero());
    let up = tower_lift(lo, &zero, mid).unwrap();
    assert!(up.comps.iter().flatten().all(|&x| x % 5 == 0));
    let ct = generate_instance(1, &r, 1, 2, "class-trivial").unwrap();
    assert!(tower_limit_ideal(&build_tower(&ct, &r.one()), 0).unwrap().is_unit());
    for c in verify_tower(&inst, 1) {
        assert!(!c.failed(), "{} {:?}", c.name, c.witness);
    }
}

// ---- kolyvagin systems

#[test]
fn regulator_examples() {
    let r = chain(5, 2);
    let inst = toy3(&r, 1);
    let eps = basis(&inst);
    let kappa = regulator(&inst, &eps);
    assert_eq!(kappa.comps[0], eps.comps[0]);
    // kappa_{q1} = -(f_1 contraction of eps_{q1}) under the regulator sign
    let mut t = Table::new();
    let flat = &eps.comps[1];
    let masks: Vec<u32> = (0u32..8).filter(|m| m.count_ones() == 2).collect();
    for (i, &m) in masks.iter().enumerate() {
        t.insert((0..3).filter(|j| m >> j & 1 == 1).collect(), flat[i] as i64);
    }
    let c = interior(&signed(&inst.primes[0].f), &t);
    let want: Vec<u64> = flatten(3, 1, &c, 25).iter().map(|&x| (25 - x) % 25).collect();
    assert!(reg_sign(1));
    assert_eq!(kappa.comps[1], want);
    let a = vec![3u64];
    assert_eq!(regulator(&inst, &eps.scale(&r, &a)), kappa.scale(&r, &a));
}

#[test]
fn verify_fs_examples() {
    let r = chain(5, 2);
    let inst = generate_instance(11, &r, 1, 2, "generic").unwrap();
    let kappa = regulator(&inst, &basis(&inst));
    assert!(verify_fs(&inst, &kappa).is_ok());
    assert!(verify_fs(&inst, &KolyvaginSystem::zero(&inst)).is_ok());
    // perturb kappa_{q1} by an element of H_{F(q1)} with nonzero v_1
    let span = inst.selmer_span(Selector::transverse(1));
    let x = span.rows.iter().find(|x| x.iter().zip(&inst.primes[0].v).map(|(a, b)| a * b).sum::<u64>() % 25 != 0);
    let x = x.expect("generic instance has such an element");
    let mut bad = kappa.clone();
    bad.comps[1] = vadd(&bad.comps[1], x);
    assert_eq!(verify_fs(&inst, &bad), Err(FsFailure::Relation { n: 1, q: 0 }));
    // a component outside the bidual is a membership failure
    let mut bad = kappa.clone();
    let outside = (0..inst.d()).map(|i| e(inst.d(), i, 1)).find(|v| !span.contains(v)).unwrap();
    bad.comps[1] = vadd(&bad.comps[1], &outside);
    assert_eq!(verify_fs(&inst, &bad), Err(FsFailure::Membership { n: 1 }));
}

#[test]
fn regulator_is_fs_on_many_instances() {
    let r = chain(5, 2);
    let mut n = 0;
    for seed in 0..100 {
        let Ok(inst) = generate_instance(seed, &r, 1 + seed as usize % 3, seed as usize % 4, "generic") else { continue };
        assert!(verify_fs(&inst, &regulator(&inst, &basis(&inst))).is_ok(), "seed {seed}");
        n += 1;
    }
    assert!(n >= 90);
}

#[test]
fn kolyvagin_ideal_examples() {
    let r = chain(5, 2);
    let ct = generate_instance(3, &r, 1, 2, "class-trivial").unwrap();
    assert!(kolyvagin_ideal(&ct, &regulator(&ct, &basis(&ct)), 0).is_unit());
    let z4 = chain(2, 2);
    let inst = toy3(&z4, 2);
    let kappa = regulator(&inst, &basis(&inst));
    assert_eq!(kolyvagin_ideal(&inst, &kappa, 0), Ideal::new(&z4, &[vec![2]]));
    assert_eq!(kolyvagin_ideal(&inst, &kappa, 0), base_fitting(&inst, 0));
    assert!(kolyvagin_ideal(&inst, &KolyvaginSystem::zero(&inst), 0).is_zero());
}

#[test]
fn core_projection_round_trip() {
    let r = chain(5, 2);
    let inst = generate_instance(6, &r, 1, 3, "generic").unwrap();
    let eps = basis(&inst);
    let kappa = regulator(&inst, &eps);
    let core = inst.core_vertices();
    assert!(!core.is_empty());
    for &n in &core {
        let x = &kappa.comps[n as usize];
        assert_eq!(core_projection_invert(&inst, n, x).unwrap(), eps);
        let zero = vec![0; x.len()];
        let z = core_projection_invert(&inst, n, &zero).unwrap();
        assert!(z.comps.iter().flatten().all(|&a| a == 0));
        let sx: Vec<u64> = x.iter().map(|a| a * 6 % 25).collect();
        assert_eq!(core_projection_invert(&inst, n, &sx).unwrap(), eps.scale(&r, &[6]));
    }
    if let Some(n) = divisors(inst.top()).into_iter().find(|n| !core.contains(n)) {
        assert!(core_projection_invert(&inst, n, &kappa.comps[n as usize]).is_err());
    }
}

#[test]
fn thm_main_examples() {
    let r = chain(5, 2);
    let inst = generate_instance(8, &r, 1, 3, "generic").unwrap();
    let checks = verify_thm_main(&inst, 8, false);
    for c in &checks {
        assert!(!c.failed(), "{} {:?}", c.name, c.witness);
    }
    assert!(checks.iter().any(|c| c.name == "kolyvagin.ideals_equal_fitting" && c.status == eks::report::Status::Pass));
    let g = Ring::new(3, 2, &[3]).unwrap();
    let ginst = generate_instance(8, &g, 1, 2, "generic").unwrap();
    let checks = verify_thm_main(&ginst, 8, false);
    for c in &checks {
        assert!(!c.failed(), "{} {:?}", c.name, c.witness);
    }
    assert!(checks.iter().any(|c| c.name == "kolyvagin.ideals_in_fitting"));
    let kappa = regulator(&ginst, &basis(&ginst));
    for i in 0..=2 {
        assert!(base_fitting(&ginst, i).contains_ideal(&kolyvagin_ideal(&ginst, &kappa, i)));
    }
    let ct = generate_instance(3, &r, 1, 2, "class-trivial").unwrap();
    let kappa = regulator(&ct, &basis(&ct));
    for i in 0..=2 {
        assert!(kolyvagin_ideal(&ct, &kappa, i).is_unit());
        assert!(base_fitting(&ct, i).is_unit());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_invariants_hold(seed in 0u64..1_000_000, ri in 0usize..4, r in 1usize..=3, s in 0usize..=3) {
        let rings = [(5u64, 2u32, vec![]), (3, 2, vec![]), (3, 3, vec![]), (3, 1, vec![3u64])];
        let (p, m, o) = &rings[ri];
        let ring = Ring::new(*p, *m, o).unwrap();
        let Ok(inst) = generate_instance(seed, &ring, r, s, "generic") else { return Ok(()) };
        let mut checks = verify_selmer(&inst);
        checks.extend(verify_thm_stark(&inst, seed));
        checks.extend(verify_thm_main(&inst, seed, false));
        for c in checks {
            prop_assert!(!c.failed(), "{} {:?}", c.name, c.witness);
        }
        // freeness transport: vanishing dual Selmer of F^n makes H_{F^n} free of rank r + nu(n)
        for n in divisors(inst.top()) {
            if inst.dual_selmer(Selector::relaxed(n)).is_zero() {
                let span = inst.selmer_span(Selector::relaxed(n));
                prop_assert_eq!(span.log_size(), ((r + nu(n)) as u32) * ring.base.m * ring.n as u32);
            }
        }
    }
}
