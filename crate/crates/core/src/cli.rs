//! Command line harness: deterministic generation, verification suites,
//! derivations and reports. Every output is sorted, schema-versioned JSON
//! (or DOT for graphs) and depends only on the command line.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bidual::verify_bidual;
use crate::euler::{self, EulerArtifact, Generated};
use crate::kolyvagin::{kolyvagin_ideal, regulator, verify_fs, verify_thm_main, KolyvaginSystem};
use crate::module::Ideal;
use crate::report::{all_pass, Check, Status};
use crate::ring::{Ring, RingSpec};
use crate::selmer::{
    divisors, generate_instance, label, verify_selmer, InstanceJson, SelmerInstance, Selector, SCHEMA_VERSION,
};
use crate::stark::{basis, check_stark, image_ideal, stark_ideal, verify_thm_stark, verify_tower, ComponentJson, StarkSystem};

pub const SUITES: [&str; 5] = ["bidual", "selmer", "stark", "kolyvagin", "euler"];

#[derive(Parser, Debug)]
#[command(name = "eks", version, about = "Selmer models, Stark, Kolyvagin and Euler systems over finite rings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a Selmer instance, or an Euler system when --M is given.
    Gen(GenArgs),
    /// Run check suites on an instance, derivation or Euler artifact.
    Verify(VerifyArgs),
    /// Compute systems and ideal tables from an instance or Euler artifact.
    Derive(DeriveArgs),
    /// Emit the core vertex graph of an instance as DOT.
    Graph(GraphArgs),
    /// Summarize one or more reports.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// p,m[,orders...]: base ring Z/p^m, optionally a group ring. For Euler
    /// towers m is the working precision unless --mbig is given and the
    /// orders are the Galois group orders.
    #[arg(long)]
    pub ring: String,
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub s: usize,
    /// Target modulus of an Euler system (a power of p).
    #[arg(long = "M")]
    pub modulus: Option<u64>,
    #[arg(long)]
    pub mbig: Option<u32>,
    #[arg(long, default_value = "generic")]
    pub profile: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub artifact: PathBuf,
    /// Comma-separated suites among bidual, selmer, stark, kolyvagin, euler,
    /// all; empty for none.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DeriveArgs {
    pub artifact: PathBuf,
    /// Selmer instance bound to the base level of an Euler artifact.
    #[arg(long)]
    pub selmer: Option<PathBuf>,
    /// Expected target modulus of an Euler artifact.
    #[arg(long = "M")]
    pub modulus: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Exit {
    /// A check failed; the output was still written.
    Check,
    /// Unparseable or inconsistent input.
    Parse(String),
}

impl Exit {
    pub fn code(&self) -> i32 {
        match self {
            Exit::Check => 1,
            Exit::Parse(_) => 2,
        }
    }
}

fn parse_err(e: impl std::fmt::Display) -> Exit {
    Exit::Parse(e.to_string())
}

pub fn run(cli: Cli) -> Result<(), Exit> {
    if let Ok(t) = std::env::var("EKS_THREADS") {
        let n: usize = t.parse().map_err(|_| Exit::Parse(format!("EKS_THREADS must be a number, got {t}")))?;
        // a pool may already exist when run repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Verify(a) => verify(a),
        Command::Derive(a) => derive(a),
        Command::Graph(a) => graph(a),
        Command::Report(a) => report(a),
    }
}

fn timings_enabled() -> bool {
    std::env::var_os("EKS_TIMINGS").is_some()
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), Exit> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Exit::Parse(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Canonical JSON: keys sorted (serde_json maps are ordered), pretty
/// printed, trailing newline.
pub fn to_canonical<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("serializable");
    let mut s = serde_json::to_string_pretty(&value).expect("serializable");
    s.push('\n');
    s
}

pub fn parse_ring(s: &str) -> Result<RingSpec, Exit> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() < 2 {
        return Err(Exit::Parse(format!("--ring expects p,m[,orders], got {s:?}")));
    }
    let num = |x: &str| x.parse::<u64>().map_err(|_| Exit::Parse(format!("bad number {x:?} in --ring")));
    let p = num(parts[0])?;
    let m = num(parts[1])? as u32;
    let orders = parts[2..].iter().map(|x| num(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(RingSpec { p, m, orders })
}

fn log_p(p: u64, x: u64) -> Option<u32> {
    let mut k = 0;
    let mut v = 1u64;
    while v < x {
        v = v.checked_mul(p)?;
        k += 1;
    }
    (v == x && k > 0).then_some(k)
}

fn gen(a: GenArgs) -> Result<(), Exit> {
    let spec = parse_ring(&a.ring)?;
    let text = match a.modulus {
        None => {
            let ring = Ring::from_spec(&spec).map_err(parse_err)?;
            let inst = generate_instance(a.seed, &ring, a.r, a.s, &a.profile).map_err(parse_err)?;
            to_canonical(&inst.to_json())
        }
        Some(mm) => {
            let m = log_p(spec.p, mm).ok_or_else(|| Exit::Parse(format!("--M {mm} is not a positive power of {}", spec.p)))?;
            let m_big = a.mbig.unwrap_or(spec.m);
            let orders = if spec.orders.is_empty() { vec![mm; a.s] } else { spec.orders.clone() };
            if orders.len() != a.s {
                return Err(Exit::Parse(format!("expected {} group orders, got {}", a.s, orders.len())));
            }
            if !euler::EULER_PROFILES.contains(&a.profile.as_str()) {
                return Err(Exit::Parse(format!("unknown Euler profile {}", a.profile)));
            }
            let g = euler::generate(a.seed, spec.p, m_big, m, a.r, &orders, &a.profile).map_err(parse_err)?;
            to_canonical(&g.to_artifact(&a.profile, a.seed))
        }
    };
    write_out(&a.out, &text)
}

/// Derivation file: systems and ideal tables of one instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Derivation {
    pub schema_version: u32,
    pub kind: String,
    pub instance: InstanceJson,
    pub stark: Vec<ComponentJson>,
    pub kolyvagin: Vec<ComponentJson>,
    pub ideals: Value,
}

/// A parsed input artifact.
pub enum Artifact {
    Selmer(SelmerInstance),
    Derivation(SelmerInstance, Box<Derivation>),
    Euler(Box<Generated>),
}

pub fn load(path: &PathBuf) -> Result<Artifact, Exit> {
    let text = std::fs::read_to_string(path).map_err(|e| Exit::Parse(format!("cannot read {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(parse_err)?;
    if v.get("schema_version").and_then(Value::as_u64) != Some(SCHEMA_VERSION as u64) {
        return Err(Exit::Parse("missing or unsupported schema_version".into()));
    }
    match v.get("kind").and_then(Value::as_str) {
        Some("selmer_instance") => {
            let j: InstanceJson = serde_json::from_value(v).map_err(parse_err)?;
            Ok(Artifact::Selmer(SelmerInstance::from_json(&j).map_err(parse_err)?))
        }
        Some("derivation") => {
            let d: Derivation = serde_json::from_value(v).map_err(parse_err)?;
            let inst = SelmerInstance::from_json(&d.instance).map_err(parse_err)?;
            Ok(Artifact::Derivation(inst, Box::new(d)))
        }
        Some("euler_system") => {
            let a: EulerArtifact = serde_json::from_value(v).map_err(parse_err)?;
            Ok(Artifact::Euler(Box::new(Generated::from_artifact(&a).map_err(parse_err)?)))
        }
        other => Err(Exit::Parse(format!("unknown artifact kind {other:?}"))),
    }
}

pub fn parse_suites(s: &str) -> Result<Vec<String>, Exit> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        if part == "all" {
            out.extend(SUITES.iter().map(|x| x.to_string()));
        } else if SUITES.contains(&part) {
            out.push(part.to_string());
        } else {
            return Err(Exit::Parse(format!("unknown suite {part}")));
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Bidual checks on every dual Selmer module of the transverse structures.
fn bidual_on_instance(inst: &SelmerInstance, seed: u64) -> Vec<Check> {
    divisors(inst.top())
        .into_par_iter()
        .flat_map_iter(|n| {
            let x = inst.dual_selmer(Selector::transverse(n));
            let tag = label(inst, n);
            (1..=x.g.clamp(1, 3))
                .flat_map(|r| {
                    let tag = tag.clone();
                    verify_bidual(&x, r, seed ^ (n as u64) << 8 ^ r as u64).into_iter().map(move |mut c| {
                        c.name = format!("{}[{tag},r={r}]", c.name);
                        c
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn instance_suite(inst: &SelmerInstance, suite: &str, seed: u64) -> Vec<Check> {
    match suite {
        "bidual" => bidual_on_instance(inst, seed),
        "selmer" => verify_selmer(inst),
        "stark" => {
            let mut c = verify_thm_stark(inst, seed);
            c.extend(verify_tower(inst, seed));
            c
        }
        "kolyvagin" => {
            let small = inst.ring.base.q.pow(inst.ring.n as u32) <= 9 && inst.s() <= 3;
            verify_thm_main(inst, seed, small)
        }
        _ => Vec::new(),
    }
}

fn derivation_suite(inst: &SelmerInstance, d: &Derivation, suite: &str) -> Vec<Check> {
    match suite {
        "stark" => vec![match StarkSystem::from_json(inst, &d.stark) {
            Ok(eps) => Check::from_result("derivation.stark_system", check_stark(inst, &eps)),
            Err(e) => Check::new("derivation.stark_system", false).witness(e.to_string()),
        }],
        "kolyvagin" => vec![match KolyvaginSystem::from_json(inst, &d.kolyvagin) {
            Ok(k) => Check::from_result("derivation.kolyvagin_system", verify_fs(inst, &k).map_err(|e| e.describe(inst))),
            Err(e) => Check::new("derivation.kolyvagin_system", false).witness(e.to_string()),
        }],
        _ => instance_suite(inst, suite, 0),
    }
}

fn verify(a: VerifyArgs) -> Result<(), Exit> {
    let suites = parse_suites(&a.suite)?;
    let art = load(&a.artifact)?;
    let t0 = Instant::now();
    let (kind, per_suite): (&str, Vec<(String, Vec<Check>)>) = match &art {
        Artifact::Selmer(inst) => (
            "selmer_instance",
            suites.par_iter().map(|s| (s.clone(), instance_suite(inst, s, a.seed))).collect(),
        ),
        Artifact::Derivation(inst, d) => {
            ("derivation", suites.par_iter().map(|s| (s.clone(), derivation_suite(inst, d, s))).collect())
        }
        Artifact::Euler(g) => (
            "euler_system",
            suites
                .par_iter()
                .map(|s| {
                    let checks = if s == "euler" {
                        euler::verify_euler(&g.tower, &g.system, g.selmer.as_ref(), a.seed)
                    } else if let Some(inst) = &g.selmer {
                        instance_suite(inst, s, a.seed)
                    } else {
                        Vec::new()
                    };
                    (s.clone(), checks)
                })
                .collect(),
        ),
    };
    let mut checks: Vec<Value> = Vec::new();
    let mut all = Vec::new();
    for (suite, cs) in per_suite {
        for c in cs {
            let mut v = serde_json::to_value(&c).expect("serializable");
            v["suite"] = json!(suite);
            checks.push(v);
            all.push(c);
        }
    }
    checks.sort_by(|x, y| (x["suite"].as_str(), x["name"].as_str()).cmp(&(y["suite"].as_str(), y["name"].as_str())));
    let mut rep = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "report",
        "config": { "command": "verify", "artifact_kind": kind, "suites": suites, "seed": a.seed },
        "checks": checks,
        "summary": summary(&all),
    });
    if timings_enabled() {
        rep["timings_ms"] = json!(t0.elapsed().as_millis() as u64);
    }
    write_out(&a.out, &to_canonical(&rep))?;
    if all_pass(&all) {
        Ok(())
    } else {
        Err(Exit::Check)
    }
}

fn summary(checks: &[Check]) -> Value {
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    json!({ "pass": count(Status::Pass), "fail": count(Status::Fail), "info": count(Status::Info) })
}

fn ideal_row(i: usize, ideal: &Ideal) -> Value {
    json!({ "i": i, "ideal": ideal.to_json() })
}

fn derive(a: DeriveArgs) -> Result<(), Exit> {
    let art = load(&a.artifact)?;
    let text = match art {
        Artifact::Selmer(inst) | Artifact::Derivation(inst, _) => {
            if a.modulus.is_some() || a.selmer.is_some() {
                return Err(Exit::Parse("--M and --selmer apply to Euler artifacts only".into()));
            }
            to_canonical(&derive_instance(&inst))
        }
        Artifact::Euler(g) => {
            if let Some(mm) = a.modulus {
                if mm != g.tower.modulus() {
                    return Err(Exit::Parse(format!("--M {mm} does not match the artifact modulus {}", g.tower.modulus())));
                }
            }
            let selmer = match &a.selmer {
                Some(p) => match load(p)? {
                    Artifact::Selmer(s) => Some(s),
                    _ => return Err(Exit::Parse("--selmer must be a Selmer instance".into())),
                },
                None => g.selmer.clone(),
            };
            if let Some(s) = &selmer {
                euler::check_bound(&g.tower, s).map_err(parse_err)?;
            }
            let (v, ok) = derive_euler(&g, selmer.as_ref())?;
            write_out(&a.out, &to_canonical(&v))?;
            return if ok { Ok(()) } else { Err(Exit::Check) };
        }
    };
    write_out(&a.out, &text)
}

pub fn derive_instance(inst: &SelmerInstance) -> Derivation {
    let eps = basis(inst);
    let kappa = regulator(inst, &eps);
    let s = inst.s();
    let rows = |f: &dyn Fn(usize) -> Ideal| (0..=s).map(|i| ideal_row(i, &f(i))).collect::<Vec<_>>();
    let ideals = json!({
        "stark": rows(&|i| stark_ideal(inst, &eps, i)),
        "kolyvagin": rows(&|i| kolyvagin_ideal(inst, &kappa, i)),
        "fitting": rows(&|i| inst.dual_fitting(Selector::transverse(0), i)),
    });
    Derivation {
        schema_version: SCHEMA_VERSION,
        kind: "derivation".into(),
        instance: inst.to_json(),
        stark: eps.to_json(inst),
        kolyvagin: kappa.to_json(inst),
        ideals,
    }
}

/// kappa(c) with its ideal tables and, given a bound instance, the Fitting
/// tables and verdicts.
fn derive_euler(g: &Generated, selmer: Option<&SelmerInstance>) -> Result<(Value, bool), Exit> {
    let t = &g.tower;
    let kappa = euler::kappa_system(t, &g.system).map_err(|e| Exit::Parse(format!("not an Euler system: {e}")))?;
    let ring = euler::target_ring(t);
    let s = t.s();
    let ideal_i = |i: usize| {
        let mut out = Ideal::zero(&ring);
        for n in divisors(t.top()) {
            if n.count_ones() as usize == i {
                out = out.sum(&image_ideal(&ring, &kappa.comps[n as usize]));
            }
        }
        out
    };
    let ideals: Vec<Ideal> = (0..=s).map(ideal_i).collect();
    let comps: Vec<Value> = kappa
        .comps
        .iter()
        .enumerate()
        .map(|(n, c)| json!({ "divisor": euler::tower_label(t, n as u32), "mask": n, "values": c }))
        .collect();
    let base: Vec<u64> = g.system.classes[0].iter().map(|x| x % t.modulus()).collect();
    let mut verdicts = vec![Check::new("derive.i0_equals_base_image", ideals[0] == image_ideal(&ring, &base))];
    let mut out = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "euler_derivation",
        "modulus": t.modulus(),
        "r": t.r,
        "kappa": comps,
        "kolyvagin_ideals": ideals.iter().enumerate().map(|(i, x)| ideal_row(i, x)).collect::<Vec<_>>(),
    });
    if let Some(inst) = selmer {
        let fitt: Vec<Ideal> = (0..=s).map(|i| inst.dual_fitting(Selector::transverse(0), i)).collect();
        let bad = (0..=s).find(|&i| !fitt[i].contains_ideal(&ideals[i]));
        let mut c = Check::new("derive.ideals_in_fitting", bad.is_none());
        if let Some(i) = bad {
            c = c.witness(format!("i = {i}"));
        }
        verdicts.push(c);
        verdicts.push(Check::info(
            "derive.ideals_equal_fitting",
            json!((0..=s).map(|i| ideals[i] == fitt[i]).collect::<Vec<_>>()),
        ));
        verdicts.push(Check::from_result("derive.kappa_is_kolyvagin", verify_fs(inst, &kappa).map_err(|e| e.describe(inst))));
        out["fitting"] = json!(fitt.iter().enumerate().map(|(i, x)| ideal_row(i, x)).collect::<Vec<_>>());
    }
    verdicts.sort_by(|a, b| a.name.cmp(&b.name));
    let ok = all_pass(&verdicts);
    out["verdicts"] = serde_json::to_value(&verdicts).expect("serializable");
    Ok((out, ok))
}

fn graph(a: GraphArgs) -> Result<(), Exit> {
    let inst = match load(&a.instance)? {
        Artifact::Selmer(i) | Artifact::Derivation(i, _) => i,
        Artifact::Euler(g) => g.selmer.ok_or_else(|| Exit::Parse("Euler artifact has no bound instance".into()))?,
    };
    write_out(&a.out, &inst.core_graph().to_dot(&inst))
}

fn report(a: ReportArgs) -> Result<(), Exit> {
    let mut rows = Vec::new();
    let mut failed = false;
    for p in &a.reports {
        let text = std::fs::read_to_string(p).map_err(|e| Exit::Parse(format!("cannot read {}: {e}", p.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(parse_err)?;
        if v.get("kind").and_then(Value::as_str) != Some("report") {
            return Err(Exit::Parse(format!("{} is not a report", p.display())));
        }
        let fails: Vec<Value> = v["checks"]
            .as_array()
            .map(|cs| cs.iter().filter(|c| c["status"] == "fail").map(|c| c["name"].clone()).collect())
            .unwrap_or_default();
        failed |= !fails.is_empty();
        rows.push(json!({ "file": p.display().to_string(), "summary": v["summary"], "failed": fails }));
    }
    let out = json!({ "schema_version": SCHEMA_VERSION, "kind": "report_summary", "reports": rows });
    write_out(&a.out, &to_canonical(&out))?;
    if failed {
        Err(Exit::Check)
    } else {
        Ok(())
    }
}
