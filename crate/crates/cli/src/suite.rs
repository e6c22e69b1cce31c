//! The verification suite behind `verify-all`.
//!
//! Every check carries a stable identifier (`partition.case1`, `frame.euclid.energy`, ...)
//! and the number of the acceptance criterion it backs (0 for supporting checks). Groups run
//! concurrently; the report keeps the fixed group order so output is byte-stable.

use std::collections::HashMap;
use std::fmt::Write as _;

use anyhow::Result;
use rayon::prelude::*;
use twisted_haar::geometry::{
    intermediate_block, raw_shard, tube_sigma, tube_sigma_at, verify_partition, Case, FactorSpec,
};
use twisted_haar::grid::random_signal;
use twisted_haar::martingale::{cond_expect, lp_ratio_report, mart_diff, square_fn_dyadic, square_fn_dyadic_sq, square_fn_mart_sq};
use twisted_haar::nilpotent::comparability_check;
use twisted_haar::shear::verify_unimodular;
use twisted_haar::tensor::ScaleWindow;
use twisted_haar::{
    Dyadic, Euclid, GridSignal, Law, NilShape, NilSystem, RootDyadic, Scalar, ScalePair, ShearKind,
    ShearMap, TorusGrid,
};

use crate::config::{Mode, RunConfig};

/// Relative tolerance for identities evaluated in float mode.
pub const FLOAT_TOL: f64 = 1e-9;
/// Relative tolerance for the float-mode `L^p` transfer between systems.
pub const LP_TRANSFER_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: String,
    pub criterion: u8,
    pub passed: bool,
    pub value: String,
    pub detail: String,
}

impl Check {
    fn new(id: impl Into<String>, criterion: u8, passed: bool, value: impl Into<String>, detail: impl Into<String>) -> Self {
        Check { id: id.into(), criterion, passed, value: value.into(), detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,criterion,status,value,detail\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.id,
                c.criterion,
                if c.passed { "PASS" } else { "FAIL" },
                csv_field(&c.value),
                csv_field(&c.detail)
            );
        }
        out
    }

    pub fn summary(&self, cfg: &RunConfig) -> String {
        let failing = self.failing();
        let mut out = format!("verify-all: {} checks, {} failed\n\nconfiguration:\n", self.checks.len(), failing.len());
        for line in cfg.render().lines() {
            let _ = writeln!(out, "  {line}");
        }
        out.push('\n');
        for c in &self.checks {
            let _ = writeln!(out, "{} {:<34} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.value);
        }
        if !failing.is_empty() {
            let _ = writeln!(out, "\nfailing checks: {}", failing.join(" "));
        }
        out
    }
}

type Group = fn(&RunConfig) -> Result<Vec<Check>>;

macro_rules! by_mode {
    ($name:ident, $generic:ident) => {
        pub fn $name(cfg: &RunConfig) -> Result<Vec<Check>> {
            match cfg.mode {
                Mode::Exact => $generic::<RootDyadic>(cfg),
                Mode::Float => $generic::<f64>(cfg),
            }
        }
    };
}

pub const GROUPS: &[(&str, Group)] = &[
    ("shear", shears),
    ("orthonormal", euclid_orthonormality),
    ("frame.euclid", euclid_frame),
    ("mart", mart_projection),
    ("conjugation", conjugation),
    ("intertwining", intertwining),
    ("p2", p2_equality),
    ("lp", lp_brackets),
    ("fibers", fibers),
    ("partition", partitions),
    ("nesting", nesting),
    ("tube", tubes),
    ("comparability", comparability),
    ("nil", nil_basis),
    ("frame.nil", nil_frame),
];

/// Runs every group, concurrently, and assembles the checks in group order.
pub fn run_all(cfg: &RunConfig) -> SuiteReport {
    let results: Vec<Vec<Check>> = GROUPS
        .par_iter()
        .map(|(name, group)| {
            group(cfg).unwrap_or_else(|e| vec![Check::new(format!("{name}.error"), 0, false, "error", e.to_string())])
        })
        .collect();
    SuiteReport { checks: results.into_iter().flatten().collect() }
}

fn sample<S: Scalar>(grid: &TorusGrid, seed: u64) -> GridSignal<S> {
    let f = random_signal(grid, seed, Law::Uniform);
    GridSignal::from_fn(grid, |c| S::from_dyadic(f.get(c).as_dyadic().expect("uniform samples are dyadic")))
}

fn near<S: Scalar>(a: S, b: S) -> bool {
    if S::EXACT {
        a == b
    } else {
        (a.to_f64() - b.to_f64()).abs() <= FLOAT_TOL * (1.0 + b.to_f64().abs())
    }
}

fn same<S: Scalar>(a: &GridSignal<S>, b: &GridSignal<S>) -> bool {
    if S::EXACT {
        return a == b;
    }
    let scale = b.values().iter().fold(1.0f64, |m, v| m.max(v.to_f64().abs()));
    a.values().iter().zip(b.values()).all(|(x, y)| (x.to_f64() - y.to_f64()).abs() <= FLOAT_TOL * scale)
}

fn three<S: Scalar>() -> S {
    S::from_dyadic(Dyadic::from_int(3))
}

fn mode_tag<S: Scalar>() -> &'static str {
    if S::EXACT {
        "exact"
    } else {
        "float"
    }
}

fn seed_for(cfg: &RunConfig, stream: u64, trial: usize) -> u64 {
    cfg.seed.wrapping_mul(1_000_003).wrapping_add(stream * 100_000 + trial as u64)
}

fn all_levels(lo: i32, hi: i32, n: usize) -> Vec<Vec<i32>> {
    let w = ScaleWindow { lo: vec![lo; n], hi: vec![hi; n] };
    let mut t = w.tuples();
    if lo < 0 {
        t.insert(0, vec![lo; n]);
    }
    t
}

pub fn shears(cfg: &RunConfig) -> Result<Vec<Check>> {
    let grid = cfg.euclid_grid()?;
    let nil = cfg.nil_shape().grid()?;
    let mut out = Vec::new();
    for (kind, g) in [(ShearKind::T2, &grid), (ShearKind::T3, &grid), (ShearKind::Theta, &nil)] {
        let map = ShearMap::new(kind, g)?;
        let r = verify_unimodular(map.matrix(), Some(g));
        out.push(Check::new(format!("shear.{kind}"), 0, r.accepted && r.bijective == Some(true), r.to_string(), g.to_string()));
    }
    Ok(out)
}

by_mode!(euclid_orthonormality, euclid_orthonormality_in);

fn euclid_orthonormality_in<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Check>> {
    let e = Euclid::new(&cfg.euclid_grid()?)?;
    let mut out = Vec::new();
    for &i in &cfg.systems {
        let idx = e.indices(i)?;
        let signals: Vec<GridSignal<S>> = idx.par_iter().map(|h| e.haar_signal(h)).collect::<twisted_haar::Result<_>>()?;
        let bad: usize = (0..signals.len())
            .into_par_iter()
            .map(|a| {
                (a..signals.len())
                    .filter(|&b| {
                        let ip = signals[a].inner_product(&signals[b]).expect("same grid");
                        !near(ip, if a == b { S::one() } else { S::zero() })
                    })
                    .count()
            })
            .sum();
        let mean_free = signals.iter().all(|s| near(s.sum(), S::zero()));
        let complete = signals.len() + 1 == e.grid().len();
        let pairs = signals.len() * (signals.len() + 1) / 2;
        out.push(Check::new(
            format!("orthonormal.system{i}"),
            1,
            bad == 0 && mean_free && complete,
            format!("{} elements, {pairs} pairs, {bad} off", signals.len()),
            format!("{} grid {}", mode_tag::<S>(), e.grid()),
        ));
    }
    Ok(out)
}

by_mode!(euclid_frame, euclid_frame_in);

fn euclid_frame_in<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Check>> {
    let e = Euclid::new(&cfg.euclid_grid()?)?;
    let w = e.full_window();
    let results: Vec<(bool, bool, f64)> = (0..cfg.frame_signals)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool, f64)> {
            let f: GridSignal<S> = sample(e.grid(), seed_for(cfg, 1, t));
            let r = e.frame_apply(&f, &w)?;
            let c = f.centered();
            let energy = c.norm_sq();
            let recon = r.reconstruction.as_ref().is_some_and(|g| same(g, &c));
            Ok((near(r.energy, three::<S>() * energy), recon, r.energy.to_f64() / energy.to_f64()))
        })
        .collect::<Result<_>>()?;
    let energy_ok = results.iter().all(|r| r.0);
    let ratio = if energy_ok && S::EXACT {
        "frame_ratio=3".to_string()
    } else {
        let (lo, hi) = results.iter().fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r.2), hi.max(r.2)));
        format!("frame_ratio in [{lo:.15}, {hi:.15}]")
    };
    let n = results.len();
    Ok(vec![
        Check::new("frame.euclid.energy", 2, energy_ok && n > 0, ratio, format!("{n} signals, {}", mode_tag::<S>())),
        Check::new(
            "frame.euclid.reconstruction",
            2,
            results.iter().all(|r| r.1) && n > 0,
            format!("{}/{n} exact", results.iter().filter(|r| r.1).count()),
            "(1/3) triple sum = f - mean f",
        ),
    ])
}

by_mode!(mart_projection, mart_projection_in);

fn mart_projection_in<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Check>> {
    let e = Euclid::new(&cfg.euclid_grid()?)?;
    let full = e.full_window();
    let mut out = Vec::new();
    for &i in &cfg.systems {
        let sys = e.system(i)?;
        let tallies: Vec<(usize, usize, bool)> = (0..cfg.mart_signals)
            .into_par_iter()
            .map(|t| -> Result<(usize, usize, bool)> {
                let f: GridSignal<S> = sample(e.grid(), seed_for(cfg, 2, t));
                let mut total = GridSignal::zeros(e.grid());
                let (mut ok, mut seen) = (0, 0);
                for k in full.tuples() {
                    let d = mart_diff(&e, &f, ScalePair::new(k[0], k[1]), i)?;
                    let proj = sys.project(&f, &ScaleWindow { lo: k.clone(), hi: k.clone() })?;
                    seen += 1;
                    ok += same(&d, &proj) as usize;
                    total = total.add(&d)?;
                }
                Ok((ok, seen, same(&total, &f.centered())))
            })
            .collect::<Result<_>>()?;
        let ok: usize = tallies.iter().map(|t| t.0).sum();
        let seen: usize = tallies.iter().map(|t| t.1).sum();
        out.push(Check::new(
            format!("mart.projection.system{i}"),
            3,
            ok == seen && seen > 0,
            format!("{ok}/{seen} scale pairs"),
            format!("{} signals, {}", tallies.len(), mode_tag::<S>()),
        ));
        out.push(Check::new(
            format!("mart.telescoping.system{i}"),
            0,
            tallies.iter().all(|t| t.2),
            "sum of differences = f - mean f",
            "",
        ));
    }
    Ok(out)
}

by_mode!(conjugation, conjugation_in);

fn conjugation_in<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Check>> {
    let e = Euclid::new(&cfg.euclid_grid()?)?;
    let n = e.levels() as i32;
    let mut out = Vec::new();
    let signals = cfg.mart_signals.clamp(1, 3);
    for i in [2u8, 3] {
        let u = e.pullback(i)?;
        let (mut e_ok, mut d_ok, mut e_n, mut d_n) = (0, 0, 0, 0);
        for t in 0..signals {
            let f: GridSignal<S> = sample(e.grid(), seed_for(cfg, 3, t));
            let g = u.adjoint(&f)?;
            for k in all_levels(-1, n, 2) {
                let k = ScalePair::new(k[0], k[1]);
                e_n += 1;
                e_ok += same(&cond_expect(&e, &f, k, i)?, &u.apply(&cond_expect(&e, &g, k, 1)?)?) as usize;
            }
            for k in e.full_window().tuples() {
                let k = ScalePair::new(k[0], k[1]);
                d_n += 1;
                d_ok += same(&mart_diff(&e, &f, k, i)?, &u.apply(&mart_diff(&e, &g, k, 1)?)?) as usize;
            }
        }
        out.push(Check::new(format!("conjugation.expect.system{i}"), 4, e_ok == e_n, format!("{e_ok}/{e_n}"), "E(i) = U E(1) U*"));
        out.push(Check::new(format!("conjugation.diff.system{i}"), 4, d_ok == d_n, format!("{d_ok}/{d_n}"), "D(i) = U D(1) U*"));
    }
    let nil = NilSystem::new(cfg.nil_shape())?;
    let u = nil.u3();
    let nl = nil.shape().n as i32;
    let f: GridSignal<S> = sample(nil.grid(), seed_for(cfg, 3, 99));
    let g = u.adjoint(&f)?;
    let exp: Vec<bool> = all_levels(-1, nl, 3)
        .par_iter()
        .map(|l| -> Result<bool> {
            let l = [l[0], l[1], l[2]];
            Ok(same(&nil.cond_expect(&f, l, 3)?, &u.apply(&nil.cond_expect(&g, l, 2)?)?))
        })
        .collect::<Result<_>>()?;
    let diff: Vec<bool> = nil
        .full_window()
        .tuples()
        .par_iter()
        .map(|l| -> Result<bool> {
            let l = [l[0], l[1], l[2]];
            Ok(same(&nil.mart_diff(&f, l, 3)?, &u.apply(&nil.mart_diff(&g, l, 2)?)?))
        })
        .collect::<Result<_>>()?;
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count();
    out.push(Check::new("conjugation.expect.type3", 4, count(&exp) == exp.len(), format!("{}/{}", count(&exp), exp.len()), "E(3) = U3 E(2) U3*"));
    out.push(Check::new("conjugation.diff.type3", 4, count(&diff) == diff.len(), format!("{}/{}", count(&diff), diff.len()), "D(3) = U3 D(2) U3*"));
    Ok(out)
}

by_mode!(intertwining, intertwining_in);

fn intertwining_in<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Check>> {
    let e = Euclid::new(&cfg.euclid_grid()?)?;
    let w = e.full_window();
    let mut out = Vec::new();
    for i in [2u8, 3] {
        let u = e.pullback(i)?;
        let (mut exact_ok, mut worst) = (true, 0.0f64);
        for t in 0..cfg.mart_signals.max(1) {
            let f: GridSignal<S> = sample(e.grid(), seed_for(cfg, 4, t));
            let g = u.adjoint(&f)?;
            let lhs = square_fn_dyadic_sq(&e, &f, i, &w)?;
            exact_ok &= same(&lhs, &u.apply(&square_fn_dyadic_sq(&e, &g, 1, &w)?)?);
            // The L^p transfer is a float-mode statement.
            let ff = f.to_float();
            let gf = u.adjoint(&ff)?;
            let si = square_fn_dyadic(&e, &ff, i, &w)?;
            let s1 = square_fn_dyadic(&e, &gf, 1, &w)?;
            for &p in &cfg.lp_exponents {
                let (a, b) = (si.lp_norm(p)?, s1.lp_norm(p)?);
                worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
            }
        }
        out.push(Check::new(
            format!("intertwining.exact.system{i}"),
            5,
            exact_ok,
            "S(i)(f)^2 = S(1)(U* f)^2 o T",
            mode_tag::<S>(),
        ));
        out.push(Check::new(
            format!("intertwining.lp.system{i}"),
            5,
            worst <= LP_TRANSFER_TOL,
            format!("max rel dev {worst:.3e}"),
            format!("tol {LP_TRANSFER_TOL:e}"),
        ));
    }
    Ok(out)
}

by_mode!(p2_equality, p2_equality_in);

fn p2_equality_in<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Check>> {
    let e = Euclid::new(&cfg.euclid_grid()?)?;
    let w = e.full_window();
    let mut out = Vec::new();
    for &i in &cfg.systems {
        let mut ok = true;
        for t in 0..cfg.mart_signals.max(1) {
            let f: GridSignal<S> = sample(e.grid(), seed_for(cfg, 5, t));
            let energy = f.centered().norm_sq();
            ok &= near(square_fn_dyadic_sq(&e, &f, i, &w)?.integral(), energy);
            ok &= near(square_fn_mart_sq(&e, &f, i, &w)?.integral(), energy);
        }
        out.push(Check::new(format!("p2.system{i}"), 6, ok, "||S f||^2 = ||f - mean f||^2", mode_tag::<S>()));
    }
    let nil = NilSystem::new(cfg.nil_shape())?;
    let nw = nil.full_window();
    let f: GridSignal<S> = sample(nil.grid(), seed_for(cfg, 5, 99));
    let energy = f.centered().norm_sq();
    for k in 1..=3u8 {
        let ok = near(nil.square_fn_sq(&f, k, &nw)?.integral(), energy)
            && near(nil.square_fn_mart_sq(&f, k, &nw)?.integral(), energy);
        out.push(Check::new(format!("p2.type{k}"), 6, ok, "||S f||^2 = ||f - mean f||^2", mode_tag::<S>()));
    }
    Ok(out)
}

fn bracket_checks(prefix: &str, report: &twisted_haar::LpReport, trials: usize) -> Vec<Check> {
    let finite = report.rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0);
    let brackets: Vec<String> = report
        .summaries
        .iter()
        .map(|s| format!("{}@p={}:[{:.6},{:.6}]", s.system, s.p, s.min, s.max))
        .collect();
    let dev = report.max_transfer_deviation();
    vec![
        Check::new(format!("{prefix}.brackets"), 6, finite && trials >= 1, brackets.join(" "), format!("{trials} trials")),
        Check::new(
            format!("{prefix}.transfer"),
            6,
            report.exact_transfer && dev <= LP_TRANSFER_TOL,
            format!("max rel dev {dev:.3e}"),
            format!("exact squared transfer {}", report.exact_transfer),
        ),
    ]
}

pub fn lp_brackets(cfg: &RunConfig) -> Result<Vec<Check>> {
    let seed = seed_for(cfg, 6, 0);
    let euclid = lp_ratio_report(&cfg.euclid_grid()?, &cfg.systems, &cfg.lp_exponents, cfg.lp_trials, seed)?;
    let nil = NilSystem::new(cfg.nil_shape())?;
    let nil_report = nil.lp_ratio_report(&[1, 2, 3], &cfg.lp_exponents, cfg.lp_trials, seed)?;
    let mut out = bracket_checks("lp.euclid", &euclid, cfg.lp_trials);
    out.extend(bracket_checks("lp.nil", &nil_report, cfg.lp_trials));
    Ok(out)
}

/// Scale triples exercised per regime; the third Case III triple has `j1 < j2`.
pub fn case_triples(case: Case) -> [[i32; 3]; 3] {
    match case {
        Case::I => [[1, 0, -1], [2, 1, 0], [2, 0, -1]],
        Case::II => [[2, 0, 1], [3, 1, 2], [3, 0, 1]],
        Case::III => [[0, 0, 1], [1, 0, 2], [0, 1, 2]],
    }
}

const CASES: [Case; 3] = [Case::I, Case::II, Case::III];

fn fiber_failures(case: Case, specs: &[FactorSpec; 3], j: [i32; 3]) -> Result<Vec<String>> {
    let shard = raw_shard(case, specs, j)?;
    let oj = shard.oriented_j();
    let kappa = shard.kappa;
    let p = |e: i32| Dyadic::pow2(e);
    let two = Dyadic::from_int(2);
    let mut fails = Vec::new();
    match case {
        Case::I | Case::II => {
            let second = if case == Case::I { p(2 * oj[1] + kappa) } else { p(2 * oj[2] - 2 * oj[1]) * p(2 * oj[1] + kappa) };
            let want = (two * p(2 * oj[0] + kappa), two * second);
            for (flat, f) in shard.oriented.merged().fibers.iter().enumerate() {
                let sides: Vec<_> = f.iter().map(|q| (q.x.len(), q.y.len(), q.slope)).collect();
                if sides != [(want.0, want.1, 0)] {
                    fails.push(format!("cell {flat}: {sides:?}"));
                }
            }
            if shard.natural_steps() != want {
                fails.push(format!("period {:?}", shard.natural_steps()));
            }
        }
        Case::III => {
            let l = p(2 * oj[0] + kappa);
            let n = p(2 * (oj[2] - oj[0]));
            let want = (Dyadic::from_int(6) * l, two * n * l);
            for (flat, f) in shard.natural().fibers.iter().enumerate() {
                let lo = f.iter().map(|q| q.y.lo).min();
                let hi = f.iter().map(|q| q.y.hi).max();
                let extent = hi.zip(lo).map(|(h, l)| h - l);
                if f.iter().any(|q| q.x.len() != want.0) || extent != Some(want.1) {
                    fails.push(format!("cell {flat}: rectified extent {extent:?}"));
                }
            }
            if shard.natural_steps() != want {
                fails.push(format!("period {:?}", shard.natural_steps()));
            }
            let hat = intermediate_block(specs, oj)?;
            for (flat, f) in hat.fibers.iter().enumerate() {
                let sides: Vec<_> = f.iter().map(|q| (q.x.len(), q.y.len())).collect();
                if sides != [(two * l, two * l)] {
                    fails.push(format!("intermediate cell {flat}: {sides:?}"));
                }
            }
        }
    }
    Ok(fails)
}

pub fn fibers(cfg: &RunConfig) -> Result<Vec<Check>> {
    let profiles = ["zero".to_string(), cfg.profile.clone()];
    let mut out = Vec::new();
    for case in CASES {
        let mut fails = Vec::new();
        let mut runs = 0;
        for profile in &profiles {
            let specs = cfg.factor_specs_with(profile)?;
            for j in case_triples(case) {
                runs += 1;
                match fiber_failures(case, &specs, j) {
                    Ok(f) => fails.extend(f.into_iter().map(|m| format!("{profile} {j:?} {m}"))),
                    Err(e) => fails.push(format!("{profile} {j:?}: {e}")),
                }
            }
        }
        let what = match case {
            Case::I => "2L1 x 2L2",
            Case::II => "2L1 x 2N L2",
            Case::III => "6L x 2NL rectified, 2L x 2L intermediate",
        };
        out.push(Check::new(
            format!("fibers.case{}", case.id()),
            7,
            fails.is_empty(),
            format!("{what}; {runs} shards"),
            fails.first().cloned().unwrap_or_default(),
        ));
    }
    Ok(out)
}

pub fn partitions(cfg: &RunConfig) -> Result<Vec<Check>> {
    let specs = cfg.factor_specs()?;
    let mut out = Vec::new();
    for case in CASES {
        let mut cells = 0;
        let mut fails = Vec::new();
        for j in case_triples(case) {
            let r = verify_partition(case, &specs, j, None, cfg.inject_broken_lattice)?;
            cells += r.cells_checked;
            if !r.pass() {
                fails.push(format!(
                    "{j:?}: multiplicity spatial {:?} central {:?} {}",
                    r.spatial_multiplicity,
                    r.central_multiplicity,
                    r.failures.first().cloned().unwrap_or_default()
                ));
            }
        }
        out.push(Check::new(
            format!("partition.case{}", case.id()),
            8,
            fails.is_empty(),
            format!("{cells} cells, multiplicity {}", if fails.is_empty() { "1" } else { "not 1" }),
            fails.join("; "),
        ));
    }
    let control = verify_partition(Case::I, &specs, case_triples(Case::I)[0], None, true)?;
    out.push(Check::new(
        "partition.control",
        8,
        !control.pass(),
        format!("broken lattice central multiplicity {:?}", control.central_multiplicity),
        "negative control must fail",
    ));

    let nil = NilSystem::new(cfg.nil_shape())?;
    let n = nil.shape().n as i32;
    let ladder = [[1, 1, 1], [n, 0, 1], [0, n, 1]];
    for k in 1..=3u8 {
        let mut fails = Vec::new();
        for levels in ladder {
            let family = nil.analytic_family(k, levels)?;
            let mut cover = vec![0u32; nil.grid().len()];
            for shard in &family {
                let cells = nil.shard_cells(shard)?;
                let exp = nil.shard_volume_exp(shard)?;
                if Dyadic::from_int(cells.len() as i64) * nil.grid().cell_volume() != Dyadic::pow2(exp) {
                    fails.push(format!("{levels:?} volume of {:?}", shard.pos));
                }
                for c in cells {
                    cover[c] += 1;
                }
            }
            let (lo, hi) = (cover.iter().min().copied(), cover.iter().max().copied());
            if (lo, hi) != (Some(1), Some(1)) {
                fails.push(format!("{levels:?} multiplicity {lo:?}..{hi:?}"));
            }
        }
        out.push(Check::new(
            format!("partition.type{k}"),
            8,
            fails.is_empty(),
            format!("{} families", ladder.len()),
            fails.first().cloned().unwrap_or_default(),
        ));
    }
    Ok(out)
}

pub fn nesting(cfg: &RunConfig) -> Result<Vec<Check>> {
    // One level more than the desk grid gives a ladder of four scales.
    let mut shape = cfg.nil_shape();
    shape.n = shape.n.max(3);
    let nil = NilSystem::new(shape)?;
    let n = shape.n as i32;
    let mut out = Vec::new();
    for k in 1..=3u8 {
        let labels: Vec<Vec<usize>> =
            (0..=n).into_par_iter().map(|l| nil.shard_labels(k, [l, l, l])).collect::<twisted_haar::Result<_>>()?;
        let mut fails = Vec::new();
        for step in 0..n as usize {
            let (coarse, fine) = (&labels[step], &labels[step + 1]);
            let mut parent: HashMap<usize, usize> = HashMap::new();
            let ok = fine.iter().zip(coarse).all(|(&f, &c)| *parent.entry(f).or_insert(c) == c);
            if !ok {
                fails.push(format!("level {} to {}", step + 1, step));
            }
        }
        out.push(Check::new(
            format!("nesting.type{k}"),
            9,
            fails.is_empty(),
            format!("{n}-step ladder, unique parents"),
            fails.join("; "),
        ));
    }
    Ok(out)
}

pub fn tubes(cfg: &RunConfig) -> Result<Vec<Check>> {
    let specs = cfg.factor_specs_with("zero")?;
    let mut out = Vec::new();
    for case in CASES {
        let mut sigmas = Vec::new();
        let mut fails = Vec::new();
        for j in case_triples(case) {
            let shard = raw_shard(case, &specs, j)?;
            let base = match tube_sigma(&shard, cfg.sigma_max) {
                Ok(r) => r,
                Err(e) => {
                    fails.push(format!("{j:?}: {e}"));
                    continue;
                }
            };
            sigmas.push(base.sigma);
            let shifted = raw_shard(case, &specs, j.map(|x| x + 1)).and_then(|s| tube_sigma(&s, cfg.sigma_max));
            if shifted.as_ref().ok() != Some(&base) {
                fails.push(format!("{j:?}: not scale invariant"));
            }
            for pos in [[1, -1, 2, 1, 0], [-2, 0, 1, -1, 3]] {
                if tube_sigma_at(&shard, cfg.sigma_max, pos).ok() != Some(base) {
                    fails.push(format!("{j:?}: moves under translation {pos:?}"));
                }
            }
        }
        out.push(Check::new(
            format!("tube.case{}", case.id()),
            10,
            fails.is_empty(),
            format!("sigma {sigmas:?} (max {})", cfg.sigma_max),
            fails.join("; "),
        ));
    }
    Ok(out)
}

pub fn comparability(cfg: &RunConfig) -> Result<Vec<Check>> {
    let specs = cfg.factor_specs_with("zero")?;
    let mut out = Vec::new();
    for case in CASES {
        let j = case_triples(case)[0];
        let measure = |j: [i32; 3]| -> Result<twisted_haar::Comparability> {
            let ls = j.iter().copied().max().unwrap_or(0);
            let shape = NilShape::new(cfg.nil_dims, 1, ls, cfg.kappa);
            let raw = raw_shard(case, &specs, j)?;
            let analytic = shape.origin_shard(case.id(), j.map(|x| shape.level_of(x)));
            Ok(comparability_check(&raw, &analytic, &shape)?)
        };
        let base = measure(j);
        let (passed, value) = match &base {
            Ok(c) => {
                let stable = (1..=3).all(|s| measure(j.map(|x| x + s)).ok().as_ref() == Some(c));
                let (cin, cout) = c.constants();
                (stable, format!("c_in={} C_out={} at j={j:?}", cin.to_f64(), cout.to_f64()))
            }
            Err(e) => (false, e.to_string()),
        };
        out.push(Check::new(format!("comparability.case{}", case.id()), 0, passed, value, "stable over 3 scale shifts"));
    }
    Ok(out)
}

by_mode!(nil_basis, nil_basis_in);

fn nil_basis_in<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Check>> {
    let nil = NilSystem::new(cfg.nil_shape())?;
    let mut out = Vec::new();
    let f: GridSignal<S> = sample(nil.grid(), seed_for(cfg, 11, 0));
    for k in 1..=3u8 {
        let idx = nil.indices(k)?;
        let stride = (idx.len() / 96).max(1);
        let picks: Vec<_> = idx.iter().step_by(stride).collect();
        let hs: Vec<GridSignal<S>> = picks.par_iter().map(|i| nil.haar_signal(i)).collect::<twisted_haar::Result<_>>()?;
        let bad: usize = (0..hs.len())
            .into_par_iter()
            .map(|a| {
                (a..hs.len())
                    .filter(|&b| !near(hs[a].inner_product(&hs[b]).expect("same grid"), if a == b { S::one() } else { S::zero() }))
                    .count()
            })
            .sum();
        out.push(Check::new(
            format!("orthonormal.type{k}"),
            0,
            bad == 0 && idx.len() + 1 == nil.grid().len(),
            format!("{} of {} elements sampled, {bad} off", hs.len(), idx.len()),
            mode_tag::<S>(),
        ));
        let sys = nil.system(k)?;
        let proj: Vec<bool> = nil
            .full_window()
            .tuples()
            .par_iter()
            .map(|l| -> Result<bool> {
                let d = nil.mart_diff(&f, [l[0], l[1], l[2]], k)?;
                Ok(same(&d, &sys.project(&f, &ScaleWindow { lo: l.clone(), hi: l.clone() })?))
            })
            .collect::<Result<_>>()?;
        let ok = proj.iter().filter(|&&b| b).count();
        out.push(Check::new(format!("mart.projection.type{k}"), 0, ok == proj.len(), format!("{ok}/{}", proj.len()), ""));
    }
    Ok(out)
}

by_mode!(nil_frame, nil_frame_in);

fn nil_frame_in<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Check>> {
    let nil = NilSystem::new(cfg.nil_shape())?;
    let w = nil.full_window();
    let results: Vec<(bool, bool)> = (0..cfg.nil_signals)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool)> {
            let f: GridSignal<S> = sample(nil.grid(), seed_for(cfg, 12, t));
            let r = nil.frame(&f, &w)?;
            let c = f.centered();
            Ok((near(r.energy, three::<S>() * c.norm_sq()), r.reconstruction.as_ref().is_some_and(|g| same(g, &c))))
        })
        .collect::<Result<_>>()?;
    let n = results.len();
    let energy = results.iter().all(|r| r.0) && n > 0;
    Ok(vec![
        Check::new(
            "frame.nil.energy",
            11,
            energy,
            if energy { "frame_ratio=3" } else { "frame_ratio != 3" },
            format!("{n} signals on {} cells, {}", nil.grid().len(), mode_tag::<S>()),
        ),
        Check::new(
            "frame.nil.reconstruction",
            11,
            results.iter().all(|r| r.1) && n > 0,
            format!("{}/{n} exact", results.iter().filter(|r| r.1).count()),
            "(1/3) triple sum = f - mean f",
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            grid: "0,2;0,2".into(),
            frame_signals: 2,
            mart_signals: 2,
            lp_trials: 3,
            nil_levels: 1,
            nil_signals: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn small_suite_passes_in_both_modes() {
        for mode in [Mode::Exact, Mode::Float] {
            let cfg = RunConfig { mode, ..small() };
            let r = run_all(&cfg);
            assert!(r.passed(), "{mode}: {:?}", r.failing());
            assert_eq!(r.get("frame.euclid.energy").unwrap().value.starts_with("frame_ratio=3"), mode == Mode::Exact);
        }
    }

    #[test]
    fn broken_lattice_names_the_partition_checks() {
        let cfg = RunConfig { inject_broken_lattice: true, ..small() };
        let r = partitions(&cfg).unwrap();
        let failing: Vec<&str> = r.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
        assert!(failing.contains(&"partition.case1"));
        assert!(r.iter().find(|c| c.id == "partition.control").unwrap().passed);
    }

    #[test]
    fn csv_quotes_commas() {
        let r = SuiteReport { checks: vec![Check::new("a", 1, true, "x,y", "q\"z")] };
        assert_eq!(r.to_csv().lines().nth(1).unwrap(), "a,1,PASS,\"x,y\",\"q\"\"z\"");
    }
}
