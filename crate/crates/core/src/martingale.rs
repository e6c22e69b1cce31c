//! Twisted bi-parameter filtrations on a Euclidean grid, their martingale differences and
//! the two square functions, plus the `L^p` ratio sweep.
//!
//! Scale indices are grid-relative and grow toward fine scales: `E_{(ℓ1,ℓ2)}` averages over
//! rectangles whose sides are `2^{L−ℓ}`, so `ℓ = n` (cells) is the identity and `ℓ = -1`
//! annihilates the factor. The scale index is `k = ℓ − L` for `ℓ ≥ 0`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dyadic::Scalar;
use crate::error::{Error, Result};
use crate::grid::{random_signal, FloatSignal, GridSignal, Law, TorusGrid};
use crate::haar::Euclid;
use crate::tensor::ScaleWindow;

/// A pair of grid-relative levels, one per block of axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScalePair {
    pub k1: i32,
    pub k2: i32,
}

impl ScalePair {
    pub fn new(k1: i32, k2: i32) -> Self {
        ScalePair { k1, k2 }
    }

    fn levels(self) -> [i32; 2] {
        [self.k1, self.k2]
    }

    /// Componentwise minimum: the coarser of two filtrations.
    pub fn meet(self, other: ScalePair) -> ScalePair {
        ScalePair::new(self.k1.min(other.k1), self.k2.min(other.k2))
    }
}

impl std::str::FromStr for ScalePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(',').ok_or_else(|| Error::Parse(format!("expected k1,k2, got `{s}`")))?;
        let p = |t: &str| t.trim().parse::<i32>().map_err(|_| Error::Parse(format!("bad scale `{t}`")));
        Ok(ScalePair::new(p(a)?, p(b)?))
    }
}

/// `E_k^{(i)} f`; each level may range over `[-1, n]`.
pub fn cond_expect<S: Scalar>(e: &Euclid, f: &GridSignal<S>, k: ScalePair, i: u8) -> Result<GridSignal<S>> {
    e.system(i)?.cond_expect(f, &k.levels())
}

/// `Δ_k^{(i)} f = (E_{k1+1}−E_{k1}) ⊗ (E_{k2+1}−E_{k2})`; each level ranges over `[-1, n−1]`.
pub fn mart_diff<S: Scalar>(e: &Euclid, f: &GridSignal<S>, k: ScalePair, i: u8) -> Result<GridSignal<S>> {
    e.system(i)?.mart_diff(f, &k.levels())
}

/// `(S_mart^{(i)} f)²` over a window, exactly.
pub fn square_fn_mart_sq<S: Scalar>(e: &Euclid, f: &GridSignal<S>, i: u8, window: &ScaleWindow) -> Result<GridSignal<S>> {
    let sys = e.system(i)?;
    crate::haar::check_window(sys, window)?;
    let parts: Vec<GridSignal<S>> = window
        .tuples()
        .par_iter()
        .map(|levels| sys.mart_diff(f, levels).map(|d| d.square()))
        .collect::<Result<_>>()?;
    parts.iter().try_fold(GridSignal::zeros(e.grid()), |acc, p| acc.add(p))
}

/// `(S_d^{(i)} f)²` over a window from Haar coefficients, exactly.
pub fn square_fn_dyadic_sq<S: Scalar>(e: &Euclid, f: &GridSignal<S>, i: u8, window: &ScaleWindow) -> Result<GridSignal<S>> {
    let sys = e.system(i)?;
    crate::haar::check_window(sys, window)?;
    sys.square_dyadic_sq(&sys.analyze(f)?, window)
}

pub fn square_fn_mart<S: Scalar>(e: &Euclid, f: &GridSignal<S>, i: u8, window: &ScaleWindow) -> Result<FloatSignal> {
    Ok(sqrt_signal(&square_fn_mart_sq(e, f, i, window)?))
}

pub fn square_fn_dyadic<S: Scalar>(e: &Euclid, f: &GridSignal<S>, i: u8, window: &ScaleWindow) -> Result<FloatSignal> {
    Ok(sqrt_signal(&square_fn_dyadic_sq(e, f, i, window)?))
}

pub(crate) fn sqrt_signal<S: Scalar>(sq: &GridSignal<S>) -> FloatSignal {
    // Squares of exact values can come out as tiny negatives only in float mode.
    sq.to_float().map(|v| v.max(0.0).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub system: u8,
    pub p: f64,
    pub trial: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSummary {
    pub system: u8,
    pub p: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpReport {
    pub rows: Vec<LpRow>,
    pub summaries: Vec<LpSummary>,
    /// Largest `|max_i r_i / min_i r_i − 1|` over trials, per `p`.
    pub transfer_deviation: Vec<(f64, f64)>,
    /// Exact check on trial 0: `S_d^{(i)}(U_i f)² = U_i S_d^{(1)}(f)²` for every requested `i`.
    pub exact_transfer: bool,
}

impl LpReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("system,p,trial,ratio\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.17e}", r.system, r.p, r.trial, r.ratio);
        }
        out
    }

    pub fn max_transfer_deviation(&self) -> f64 {
        self.transfer_deviation.iter().map(|&(_, d)| d).fold(0.0, f64::max)
    }
}

/// Ratio sweep `‖S_d^{(i)} f_i‖_p / ‖f_i − mean‖_p` where `f_i = U_i f` is the trial signal
/// transported into system `i` (`U_1 = id`).
pub fn lp_ratio_report(grid: &TorusGrid, systems: &[u8], ps: &[f64], trials: usize, seed: u64) -> Result<LpReport> {
    if let Some(&bad) = ps.iter().find(|&&p| !(p > 1.0)) {
        return Err(Error::InvalidExponent(bad));
    }
    let e = Euclid::new(grid)?;
    for &i in systems {
        e.system(i)?;
    }
    let window = e.full_window();
    let transport = |f: &FloatSignal, i: u8| -> Result<FloatSignal> {
        if i == 1 {
            Ok(f.clone())
        } else {
            e.pullback(i)?.apply(f)
        }
    };

    // Per trial: (system, p, ratio) triples.
    let per_trial: Vec<Vec<(u8, f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<(u8, f64, f64)>> {
            let base = random_signal(grid, seed.wrapping_add(t as u64), Law::Uniform).to_float();
            let mut out = Vec::new();
            for &i in systems {
                let f = transport(&base, i)?;
                let s = square_fn_dyadic(&e, &f, i, &window)?;
                let centered = f.centered();
                for &p in ps {
                    out.push((i, p, s.lp_norm(p)? / centered.lp_norm(p)?));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (t, triples) in per_trial.iter().enumerate() {
        for &(system, p, ratio) in triples {
            rows.push(LpRow { system, p, trial: t, ratio });
        }
    }
    rows.sort_by(|a, b| a.system.cmp(&b.system).then(a.p.total_cmp(&b.p)).then(a.trial.cmp(&b.trial)));

    let mut summaries = Vec::new();
    for &i in systems {
        for &p in ps {
            let mut r: Vec<f64> = rows.iter().filter(|r| r.system == i && r.p == p).map(|r| r.ratio).collect();
            if r.is_empty() {
                continue;
            }
            r.sort_by(f64::total_cmp);
            let median = if r.len() % 2 == 1 { r[r.len() / 2] } else { 0.5 * (r[r.len() / 2 - 1] + r[r.len() / 2]) };
            summaries.push(LpSummary { system: i, p, min: r[0], max: r[r.len() - 1], median });
        }
    }

    let mut transfer_deviation = Vec::new();
    for &p in ps {
        let mut worst = 0.0f64;
        for triples in &per_trial {
            let r: Vec<f64> = triples.iter().filter(|x| x.1 == p).map(|x| x.2).collect();
            let hi = r.iter().cloned().fold(f64::MIN, f64::max);
            let lo = r.iter().cloned().fold(f64::MAX, f64::min);
            if !r.is_empty() {
                worst = worst.max((hi / lo - 1.0).abs());
            }
        }
        transfer_deviation.push((p, worst));
    }

    let exact_transfer = if trials == 0 {
        true
    } else {
        let f = random_signal(grid, seed, Law::Uniform);
        let s1 = square_fn_dyadic_sq(&e, &f, 1, &window)?;
        let mut ok = true;
        for &i in systems.iter().filter(|&&i| i != 1) {
            let u = e.pullback(i)?;
            ok &= square_fn_dyadic_sq(&e, &u.apply(&f)?, i, &window)? == u.apply(&s1)?;
        }
        ok
    };

    Ok(LpReport { rows, summaries, transfer_deviation, exact_transfer })
}
