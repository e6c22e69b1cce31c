//! Analytic dyadic shards and the three Haar systems on the quotient group `𝒩`.
//!
//! The `𝒩`-grid has axes `(z1, z2, z3, t1, t2)` where `z_μ` stands for `d_μ` spatial axes.
//! Every spatial axis covers `[0, 2^{Ls})` with `2^n` cells and each central axis covers
//! `[0, 2^{2Ls+κ})` with `4^n` cells, so a grid-relative level `ℓ ∈ [0, n]` is a parabolic
//! block of scale `j = Ls − ℓ`: spatial side `2^j`, central length `2^{2j+κ}`.
//!
//! Type 1 pairs `t1` with factor 1 and `t2` with factor 2, type 2 pairs `t2` with factor 3,
//! and type 3 is type 2 read through `Θ(t1, t2) = (t1 − t2, t2)`. A parabolic block has
//! `2^{d+2}` children (two halvings of the central interval per spatial halving), so its
//! Haar patterns run over `1..2^{d+2}`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dyadic::{Dyadic, Scalar};
use crate::error::{Error, Result};
use crate::geometry::{Case, FiberedRegion, Frame, Interval, Piece, Shard, SpatialBlock};
use crate::grid::{random_signal, AxisSpec, FloatSignal, GridSignal, Law, TorusGrid};
use crate::haar::{check_window, format_value, format_window, header, join, parse_window, split_pos, FrameResult};
use crate::martingale::{sqrt_signal, LpReport, LpRow, LpSummary};
use crate::shear::{PullbackOperator, ShearKind, ShearMap};
use crate::tensor::{Factor, FactorIndex, ScaleWindow, TensorCoefficients, TensorSystem};

/// Shape of an `𝒩`-grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NilShape {
    pub dims: [usize; 3],
    /// Number of parabolic levels below the root.
    pub n: u32,
    /// `Ls`: spatial extent exponent, the scale of the root.
    pub ls: i32,
    pub kappa: i32,
}

impl NilShape {
    pub fn new(dims: [usize; 3], n: u32, ls: i32, kappa: i32) -> Self {
        NilShape { dims, n, ls, kappa }
    }

    /// The desk-scale shape: one spatial axis per factor, two levels, `2^14` cells.
    pub fn desk() -> Self {
        NilShape::new([1, 1, 1], 2, 0, 0)
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGrid("every factor needs a spatial axis".into()));
        }
        if self.kappa < 0 {
            return Err(Error::InvalidGrid("κ must be non-negative".into()));
        }
        let n = self.n as i32;
        let spatial = AxisSpec::new(self.ls, n - self.ls);
        let central = AxisSpec::new(2 * self.ls + self.kappa, 2 * n - 2 * self.ls - self.kappa);
        let mut axes = vec![spatial; self.dims.iter().sum()];
        axes.push(central);
        axes.push(central);
        TorusGrid::new(axes)
    }

    /// First axis of factor μ (0-based).
    fn spatial_start(&self, mu: usize) -> usize {
        self.dims[..mu].iter().sum()
    }

    fn central_axis(&self, c: usize) -> usize {
        self.dims.iter().sum::<usize>() + c
    }

    /// Scale `j` of a grid-relative level.
    pub fn scale_of(&self, level: i32) -> i32 {
        self.ls - level
    }

    pub fn level_of(&self, scale: i32) -> i32 {
        self.ls - scale
    }

    /// Axes of factor `mu` for a type, with their child bits.
    fn factor(&self, type_k: u8, mu: usize) -> Factor {
        let s = self.spatial_start(mu);
        let mut axes: Vec<usize> = (s..s + self.dims[mu]).collect();
        let mut bits = vec![1; self.dims[mu]];
        let central = match (type_k, mu) {
            (1, 0) | (2 | 3, 0) => Some(0),
            (1, 1) => Some(1),
            (2 | 3, 2) => Some(1),
            _ => None,
        };
        if let Some(c) = central {
            axes.push(self.central_axis(c));
            bits.push(2);
        }
        Factor { axes, bits }
    }

    /// The shard of a family that contains the origin.
    pub fn origin_shard(&self, type_k: u8, levels: [i32; 3]) -> AnalyticShard {
        let pos = [0, 1, 2].map(|mu| vec![0; self.dims[mu] + NilShape::is_parabolic(type_k, mu) as usize]);
        AnalyticShard { type_k, levels, pos }
    }

    /// Whether factor `mu` carries a central axis in a type.
    pub fn is_parabolic(type_k: u8, mu: usize) -> bool {
        matches!((type_k, mu), (_, 0) | (1, 1) | (2 | 3, 2))
    }
}

/// A parabolic dyadic block: a spatial cube of side `2^j` and a central interval of length
/// `2^{2j+κ}`, both given by integer positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParabolicBlock {
    pub mu: u8,
    pub scale: i32,
    pub cube: Vec<i64>,
    pub interval: i64,
    pub kappa: i32,
}

impl ParabolicBlock {
    pub fn spatial(&self) -> Vec<Interval> {
        let side = Dyadic::pow2(self.scale);
        self.cube.iter().map(|&i| Interval::from_len(side * Dyadic::from_int(i), side)).collect()
    }

    pub fn central(&self) -> Interval {
        let len = Dyadic::pow2(2 * self.scale + self.kappa);
        Interval::from_len(len * Dyadic::from_int(self.interval), len)
    }
}

/// One shard of `ℛ^{(k)}` on the grid: levels and per-factor positions (spatial axes first,
/// then the central axis when the factor is parabolic).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnalyticShard {
    pub type_k: u8,
    pub levels: [i32; 3],
    pub pos: [Vec<u64>; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NilpotentHaarIndex {
    pub shard: AnalyticShard,
    /// Pattern per factor; 0 exactly at a factor's scaling level `-1`.
    pub eps: [u32; 3],
}

/// The three Haar systems on one `𝒩`-grid.
#[derive(Clone, Debug)]
pub struct NilSystem {
    shape: NilShape,
    grid: TorusGrid,
    systems: Vec<TensorSystem>,
    theta: ShearMap,
    u3: PullbackOperator,
}

impl NilSystem {
    pub fn new(shape: NilShape) -> Result<Self> {
        let grid = shape.grid()?;
        let theta = ShearMap::new(ShearKind::Theta, &grid)?;
        let factors = |k: u8| (0..3).map(|mu| shape.factor(k, mu)).collect::<Vec<_>>();
        let systems = vec![
            TensorSystem::new(&grid, factors(1), None)?,
            TensorSystem::new(&grid, factors(2), None)?,
            TensorSystem::new(&grid, factors(3), Some(&theta))?,
        ];
        let u3 = theta.pullback_operator();
        Ok(NilSystem { shape, grid, systems, theta, u3 })
    }

    pub fn shape(&self) -> NilShape {
        self.shape
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn system(&self, k: u8) -> Result<&TensorSystem> {
        match k {
            1..=3 => Ok(&self.systems[k as usize - 1]),
            _ => Err(Error::Parse(format!("type must be 1, 2 or 3, got {k}"))),
        }
    }

    /// `U_3 f = f ∘ Θ`.
    pub fn u3(&self) -> &PullbackOperator {
        &self.u3
    }

    pub fn theta(&self) -> &ShearMap {
        &self.theta
    }

    pub fn full_window(&self) -> ScaleWindow {
        self.systems[0].full_window()
    }

    /// Window of shard levels `[0, n]³`.
    pub fn shard_levels(&self) -> (i32, i32) {
        (0, self.shape.n as i32)
    }

    fn check_shard_levels(&self, levels: &[i32; 3]) -> Result<()> {
        let n = self.shape.n as i32;
        if levels.iter().any(|&l| !(0..=n).contains(&l)) {
            return Err(Error::Scale(format!("shard levels {levels:?} outside [0, {n}]")));
        }
        Ok(())
    }

    /// Every shard of type `k` at the given levels, in atom order.
    pub fn analytic_family(&self, type_k: u8, levels: [i32; 3]) -> Result<Vec<AnalyticShard>> {
        self.check_shard_levels(&levels)?;
        let sys = self.system(type_k)?;
        let counts: Vec<u64> = (0..3).map(|f| 1u64 << (sys.digit_bits(f) * levels[f] as u32)).collect();
        let mut out = Vec::new();
        for a0 in 0..counts[0] {
            for a1 in 0..counts[1] {
                for a2 in 0..counts[2] {
                    let atoms = [a0, a1, a2];
                    let pos = [0, 1, 2].map(|f| sys.atom_positions(f, levels[f], atoms[f]));
                    out.push(AnalyticShard { type_k, levels, pos });
                }
            }
        }
        Ok(out)
    }

    /// Shards of a family that meet a set of cells.
    pub fn family_meeting(&self, type_k: u8, levels: [i32; 3], window: &[usize]) -> Result<Vec<AnalyticShard>> {
        let labels = self.shard_labels(type_k, levels)?;
        let family = self.analytic_family(type_k, levels)?;
        let mut hit = vec![false; family.len()];
        for &c in window {
            hit[labels[c]] = true;
        }
        Ok(family.into_iter().zip(hit).filter(|(_, h)| *h).map(|(s, _)| s).collect())
    }

    /// Index into [`analytic_family`](Self::analytic_family) of the shard holding each cell.
    pub fn shard_labels(&self, type_k: u8, levels: [i32; 3]) -> Result<Vec<usize>> {
        self.check_shard_levels(&levels)?;
        let sys = self.system(type_k)?;
        let n = self.shape.n;
        let counts: Vec<usize> = (0..3).map(|f| 1usize << (sys.digit_bits(f) * levels[f] as u32)).collect();
        Ok((0..self.grid.len())
            .map(|c| {
                let r = sys.rectified_cell(c);
                let mut label = 0usize;
                for f in 0..3 {
                    let axes = sys.factor_axes(f);
                    let pos: Vec<u64> = axes
                        .iter()
                        .map(|&a| {
                            let b = if a >= self.shape.central_axis(0) { 2 } else { 1 };
                            self.grid.coord(r, a) >> (b * (n - levels[f] as u32))
                        })
                        .collect();
                    let atom = sys.atom_from_positions(f, levels[f], &pos).expect("positions in range") as usize;
                    label = label * counts[f] + atom;
                }
                label
            })
            .collect())
    }

    /// Cells of a shard, decided from cell coordinates (through `Θ` for type 3).
    pub fn shard_cells(&self, shard: &AnalyticShard) -> Result<Vec<usize>> {
        self.check_shard_levels(&shard.levels)?;
        let sys = self.system(shard.type_k)?;
        let n = self.shape.n;
        Ok((0..self.grid.len())
            .filter(|&c| {
                let r = if shard.type_k == 3 { self.theta.image_cell(c) } else { c };
                (0..3).all(|f| {
                    sys.factor_axes(f).iter().zip(&shard.pos[f]).all(|(&a, &p)| {
                        let b = if a >= self.shape.central_axis(0) { 2 } else { 1 };
                        self.grid.coord(r, a) >> (b * (n - shard.levels[f] as u32)) == p
                    })
                })
            })
            .collect())
    }

    /// `log2 |shard|`.
    pub fn shard_volume_exp(&self, shard: &AnalyticShard) -> Result<i32> {
        Ok(self.system(shard.type_k)?.support_volume_exp(&shard.levels))
    }

    /// The parabolic blocks and spatial cube of a shard, at its scales `j`.
    pub fn components(&self, shard: &AnalyticShard) -> Vec<(Vec<i64>, Option<ParabolicBlock>)> {
        (0..3)
            .map(|mu| {
                let d = self.shape.dims[mu];
                let cube: Vec<i64> = shard.pos[mu][..d].iter().map(|&p| p as i64).collect();
                let block = NilShape::is_parabolic(shard.type_k, mu).then(|| ParabolicBlock {
                    mu: mu as u8 + 1,
                    scale: self.shape.scale_of(shard.levels[mu]),
                    cube: cube.clone(),
                    interval: shard.pos[mu][d] as i64,
                    kappa: self.shape.kappa,
                });
                (cube, block)
            })
            .collect()
    }

    fn to_factor_index(&self, idx: &NilpotentHaarIndex) -> Result<Vec<FactorIndex>> {
        let sys = self.system(idx.shard.type_k)?;
        let out = (0..3)
            .map(|f| {
                let level = idx.shard.levels[f];
                let atom = sys.atom_from_positions(f, level, &idx.shard.pos[f])?;
                Ok(FactorIndex { level, atom, eps: idx.eps[f] })
            })
            .collect::<Result<Vec<_>>>()?;
        sys.validate_index(&out)?;
        Ok(out)
    }

    fn from_factor_index(&self, type_k: u8, fi: &[FactorIndex]) -> NilpotentHaarIndex {
        let sys = &self.systems[type_k as usize - 1];
        let pos = [0, 1, 2].map(|f| sys.atom_positions(f, fi[f].level, fi[f].atom));
        let levels = [fi[0].level, fi[1].level, fi[2].level];
        NilpotentHaarIndex { shard: AnalyticShard { type_k, levels, pos }, eps: [fi[0].eps, fi[1].eps, fi[2].eps] }
    }

    pub fn indices(&self, type_k: u8) -> Result<Vec<NilpotentHaarIndex>> {
        let sys = self.system(type_k)?;
        Ok(sys.indices().map(|fi| self.from_factor_index(type_k, &fi)).collect())
    }

    pub fn haar_signal<S: Scalar>(&self, idx: &NilpotentHaarIndex) -> Result<GridSignal<S>> {
        let fi = self.to_factor_index(idx)?;
        self.system(idx.shard.type_k)?.haar_signal(&fi)
    }

    /// `E_ℓ^{(k)} f`, levels in `[-1, n]` per factor.
    pub fn cond_expect<S: Scalar>(&self, f: &GridSignal<S>, levels: [i32; 3], type_k: u8) -> Result<GridSignal<S>> {
        self.system(type_k)?.cond_expect(f, &levels)
    }

    /// Product of one-factor differences, levels in `[-1, n−1]` per factor.
    pub fn mart_diff<S: Scalar>(&self, f: &GridSignal<S>, levels: [i32; 3], type_k: u8) -> Result<GridSignal<S>> {
        self.system(type_k)?.mart_diff(f, &levels)
    }

    pub fn analyze<S: Scalar>(&self, f: &GridSignal<S>, type_k: u8, window: &ScaleWindow) -> Result<NilCoefficients<S>> {
        let sys = self.system(type_k)?;
        check_window(sys, window)?;
        Ok(NilCoefficients { type_k, window: window.clone(), coeffs: sys.analyze(f)?.restricted(sys, window) })
    }

    pub fn synthesize<S: Scalar>(&self, c: &NilCoefficients<S>) -> Result<GridSignal<S>> {
        self.system(c.type_k)?.synthesize(&c.coeffs)
    }

    /// Energy over the three bases and the averaged reconstruction.
    pub fn frame<S: Scalar>(&self, f: &GridSignal<S>, window: &ScaleWindow) -> Result<FrameResult<S>> {
        let parts: Vec<(S, GridSignal<S>)> = (1..=3u8)
            .into_par_iter()
            .map(|k| {
                let c = self.analyze(f, k, window)?;
                Ok((c.coeffs.energy(), self.synthesize(&c)?))
            })
            .collect::<Result<_>>()?;
        let mut triple = GridSignal::zeros(&self.grid);
        for (_, s) in &parts {
            triple = triple.add(s)?;
        }
        Ok(FrameResult::new(parts.into_iter().map(|p| p.0).collect(), triple, *window == self.full_window()))
    }

    /// `(S_d^{(k)} f)²` from coefficients, exactly.
    pub fn square_fn_sq<S: Scalar>(&self, f: &GridSignal<S>, type_k: u8, window: &ScaleWindow) -> Result<GridSignal<S>> {
        let sys = self.system(type_k)?;
        check_window(sys, window)?;
        sys.square_dyadic_sq(&sys.analyze(f)?, window)
    }

    /// `Σ_ℓ |Δ_ℓ^{(k)} f|²`, exactly.
    pub fn square_fn_mart_sq<S: Scalar>(&self, f: &GridSignal<S>, type_k: u8, window: &ScaleWindow) -> Result<GridSignal<S>> {
        let sys = self.system(type_k)?;
        check_window(sys, window)?;
        sys.square_mart_sq(f, window)
    }

    pub fn square_fn<S: Scalar>(&self, f: &GridSignal<S>, type_k: u8, window: &ScaleWindow) -> Result<FloatSignal> {
        Ok(sqrt_signal(&self.square_fn_sq(f, type_k, window)?))
    }

    /// Ratio sweep `‖S_d^{(k)} f_k‖_p / ‖f_k − mean‖_p` with `f_3 = U_3 f` and `f_1 = f_2 = f`.
    pub fn lp_ratio_report(&self, types: &[u8], ps: &[f64], trials: usize, seed: u64) -> Result<LpReport> {
        if let Some(&bad) = ps.iter().find(|&&p| !(p > 1.0)) {
            return Err(Error::InvalidExponent(bad));
        }
        for &k in types {
            self.system(k)?;
        }
        let window = self.full_window();
        let per_trial: Vec<Vec<(u8, f64, f64)>> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<(u8, f64, f64)>> {
                let base = random_signal(&self.grid, seed.wrapping_add(t as u64), Law::Uniform).to_float();
                let mut out = Vec::new();
                for &k in types {
                    let f = if k == 3 { self.u3.apply(&base)? } else { base.clone() };
                    let s = self.square_fn(&f, k, &window)?;
                    let centered = f.centered();
                    for &p in ps {
                        out.push((k, p, s.lp_norm(p)? / centered.lp_norm(p)?));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut rows: Vec<LpRow> = per_trial
            .iter()
            .enumerate()
            .flat_map(|(t, v)| v.iter().map(move |&(system, p, ratio)| LpRow { system, p, trial: t, ratio }))
            .collect();
        rows.sort_by(|a, b| a.system.cmp(&b.system).then(a.p.total_cmp(&b.p)).then(a.trial.cmp(&b.trial)));
        let mut summaries = Vec::new();
        for &k in types {
            for &p in ps {
                let mut r: Vec<f64> = rows.iter().filter(|r| r.system == k && r.p == p).map(|r| r.ratio).collect();
                if r.is_empty() {
                    continue;
                }
                r.sort_by(f64::total_cmp);
                let median = if r.len() % 2 == 1 { r[r.len() / 2] } else { 0.5 * (r[r.len() / 2 - 1] + r[r.len() / 2]) };
                summaries.push(LpSummary { system: k, p, min: r[0], max: r[r.len() - 1], median });
            }
        }
        // Transfer is only an identity between types 2 and 3.
        let mut transfer_deviation = Vec::new();
        if types.contains(&2) && types.contains(&3) {
            for &p in ps {
                let mut worst = 0.0f64;
                for v in &per_trial {
                    let get = |k| v.iter().find(|x| x.0 == k && x.1 == p).map(|x| x.2).unwrap();
                    worst = worst.max((get(3) / get(2) - 1.0).abs());
                }
                transfer_deviation.push((p, worst));
            }
        }
        let exact_transfer = if trials == 0 {
            true
        } else {
            let f = random_signal(&self.grid, seed, Law::Uniform);
            let s2 = self.square_fn_sq(&f, 2, &window)?;
            self.square_fn_sq(&self.u3.apply(&f)?, 3, &window)? == self.u3.apply(&s2)?
        };
        Ok(LpReport { rows, summaries, transfer_deviation, exact_transfer })
    }
}

/// Coefficients of one type inside a window.
#[derive(Clone, Debug, PartialEq)]
pub struct NilCoefficients<S> {
    pub type_k: u8,
    pub window: ScaleWindow,
    pub coeffs: TensorCoefficients<S>,
}

impl<S: Scalar> NilCoefficients<S> {
    pub fn entries(&self, sys: &NilSystem) -> Vec<(NilpotentHaarIndex, S)> {
        let ts = &sys.systems[self.type_k as usize - 1];
        self.coeffs
            .iter(ts)
            .filter(|(fi, _)| self.window.contains(&fi.iter().map(|i| i.level).collect::<Vec<_>>()))
            .map(|(fi, v)| (sys.from_factor_index(self.type_k, &fi), v))
            .collect()
    }

    /// `THC1` with a leading type column and three level/position/pattern columns.
    pub fn to_thc1(&self, sys: &NilSystem) -> String {
        let s = sys.shape;
        let mut out = String::from("THC1\n");
        let _ = writeln!(out, "type: {}", self.type_k);
        let _ = writeln!(out, "nil: {},{},{} {} {} {}", s.dims[0], s.dims[1], s.dims[2], s.n, s.ls, s.kappa);
        let _ = writeln!(out, "scaleRange: {}", format_window(&self.window));
        for (idx, v) in self.entries(sys) {
            let l = idx.shard.levels;
            let p = &idx.shard.pos;
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {} {} {}",
                self.type_k,
                l[0],
                l[1],
                l[2],
                join(&p[0]),
                join(&p[1]),
                join(&p[2]),
                idx.eps[0],
                idx.eps[1],
                idx.eps[2],
                format_value(&v)
            );
        }
        out
    }

    pub fn from_thc1(text: &str) -> Result<(NilSystem, Self)> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some("THC1") {
            return Err(Error::Parse("missing THC1 magic line".into()));
        }
        let bad = |s: &str| Error::Parse(format!("bad value `{s}`"));
        let type_k: u8 = header(lines.next(), "type:")?.parse().map_err(|_| bad("type"))?;
        let nil = header(lines.next(), "nil:")?;
        let t: Vec<&str> = nil.split_whitespace().collect();
        if t.len() != 4 {
            return Err(bad(&nil));
        }
        let dims: Vec<usize> = t[0].split(',').map(|x| x.parse().map_err(|_| bad(x))).collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(bad(t[0]));
        }
        let shape = NilShape::new(
            [dims[0], dims[1], dims[2]],
            t[1].parse().map_err(|_| bad(t[1]))?,
            t[2].parse().map_err(|_| bad(t[2]))?,
            t[3].parse().map_err(|_| bad(t[3]))?,
        );
        let window = parse_window(&header(lines.next(), "scaleRange:")?)?;
        let sys = NilSystem::new(shape)?;
        let ts = sys.system(type_k)?;
        let mut coeffs = TensorCoefficients::zeros(ts);
        for line in lines {
            let tok: Vec<&str> = line.splitn(11, ' ').collect();
            if tok.len() != 11 || tok[0] != type_k.to_string() {
                return Err(Error::Parse(format!("bad coefficient line `{line}`")));
            }
            let int = |s: &str| s.parse::<i64>().map_err(|_| bad(s));
            let idx = NilpotentHaarIndex {
                shard: AnalyticShard {
                    type_k,
                    levels: [int(tok[1])? as i32, int(tok[2])? as i32, int(tok[3])? as i32],
                    pos: [split_pos(tok[4])?, split_pos(tok[5])?, split_pos(tok[6])?],
                },
                eps: [int(tok[7])? as u32, int(tok[8])? as u32, int(tok[9])? as u32],
            };
            let fi = sys.to_factor_index(&idx)?;
            coeffs.set(ts, &fi, S::parse_value(tok[10])?)?;
        }
        Ok((sys, NilCoefficients { type_k, window, coeffs }))
    }
}

/// Comparability exponents: `2^{-c_in}`-shrunk analytic shard inside the raw shard and
/// `2^{-c_out}`-shrunk raw shard inside the analytic one, both concentric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Comparability {
    pub c_in_exp: i32,
    pub c_out_exp: i32,
}

impl Comparability {
    pub fn constants(&self) -> (Dyadic, Dyadic) {
        (Dyadic::pow2(self.c_in_exp), Dyadic::pow2(self.c_out_exp))
    }
}

/// The analytic block of the type matching a raw shard's regime, at the origin, as a region
/// in the raw shard's natural frame (oriented factor order).
pub fn analytic_region(raw: &Shard, dims: [usize; 3]) -> FiberedRegion<Piece> {
    let oj = raw.oriented_j();
    let d = if raw.swapped { [dims[1], dims[0], dims[2]] } else { dims };
    let blocks = (0..3).map(|mu| SpatialBlock::new(d[mu], oj[mu], oj[mu])).collect();
    let second = if raw.case == Case::I { oj[1] } else { oj[2] };
    let piece = Piece::rect(
        Interval::from_len(Dyadic::ZERO, Dyadic::pow2(2 * oj[0] + raw.kappa)),
        Interval::from_len(Dyadic::ZERO, Dyadic::pow2(2 * second + raw.kappa)),
    );
    let t = if raw.swapped { Frame::TSwapped } else { Frame::T };
    let frame = if raw.case == Case::III { t.rectify() } else { t };
    FiberedRegion { frame, blocks, fibers: vec![vec![piece]] }
}

fn concentric_inside(a: &FiberedRegion<Piece>, b: &FiberedRegion<Piece>, e: i32) -> bool {
    let ca = a.center();
    let cb = b.center();
    let shrunk = a.dilate(&ca, -e);
    let shift: Vec<Dyadic> = cb.0.iter().zip(&ca.0).map(|(x, y)| *x - *y).collect();
    shrunk.translate(&shift, (cb.1 .0 - ca.1 .0, cb.1 .1 - ca.1 .1)).contained_in(b)
}

/// Smallest power-of-two shrink factors making each region fit concentrically in the other.
pub fn comparability_regions(raw: &FiberedRegion<Piece>, analytic: &FiberedRegion<Piece>, max_exp: i32) -> Result<Comparability> {
    if raw.frame != analytic.frame {
        return Err(Error::Regime(format!("frames differ: {} vs {}", raw.frame, analytic.frame)));
    }
    let find = |a: &FiberedRegion<Piece>, b: &FiberedRegion<Piece>| (0..=max_exp).find(|&e| concentric_inside(a, b, e));
    match (find(analytic, raw), find(raw, analytic)) {
        (Some(c_in_exp), Some(c_out_exp)) => Ok(Comparability { c_in_exp, c_out_exp }),
        (i, o) => Err(Error::ComparisonFailure(format!("no shrink up to 2^-{max_exp} (inner {i:?}, outer {o:?})"))),
    }
}

/// Compares a raw shard with an analytic shard of the same scale and matching type.
pub fn comparability_check(raw: &Shard, analytic: &AnalyticShard, shape: &NilShape) -> Result<Comparability> {
    let aj = analytic.levels.map(|l| shape.scale_of(l));
    if aj != raw.j {
        return Err(Error::Scale(format!("raw shard at {:?} vs analytic shard at {aj:?}", raw.j)));
    }
    if analytic.type_k != raw.case.id() {
        return Err(Error::Regime(format!("type {} shard against case {} raw shard", analytic.type_k, raw.case.id())));
    }
    comparability_regions(&raw.natural(), &analytic_region(raw, shape.dims), 12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::RootDyadic;
    use crate::geometry::{raw_shard, FactorSpec};
    use crate::grid::ExactSignal;
    use std::collections::BTreeSet;

    fn desk() -> NilSystem {
        NilSystem::new(NilShape::desk()).unwrap()
    }

    fn one() -> RootDyadic {
        RootDyadic::from(Dyadic::ONE)
    }

    #[test]
    fn desk_grid_shape() {
        let s = desk();
        assert_eq!(s.grid().len(), 1 << 14);
        assert_eq!(s.grid().to_string(), "0,2;0,2;0,2;0,4;0,4");
        assert_eq!(s.full_window(), ScaleWindow { lo: vec![-1; 3], hi: vec![1; 3] });
        assert!(NilShape::new([0, 1, 1], 2, 0, 0).grid().is_err());
    }

    #[test]
    fn families_partition_and_volumes() {
        let s = desk();
        for k in 1..=3 {
            for levels in [[0, 0, 0], [1, 0, 2], [2, 1, 1]] {
                let fam = s.analytic_family(k, levels).unwrap();
                let mut cover = vec![0u32; s.grid().len()];
                for sh in &fam {
                    let cells = s.shard_cells(sh).unwrap();
                    let exp = s.shard_volume_exp(sh).unwrap();
                    assert_eq!(Dyadic::from_int(cells.len() as i64) * s.grid().cell_volume(), Dyadic::pow2(exp));
                    for c in cells {
                        cover[c] += 1;
                    }
                }
                assert!(cover.iter().all(|&m| m == 1), "type {k} levels {levels:?}");
                let labels = s.shard_labels(k, levels).unwrap();
                for (i, sh) in fam.iter().enumerate().step_by(5) {
                    let by_label: Vec<usize> = (0..labels.len()).filter(|&c| labels[c] == i).collect();
                    assert_eq!(by_label, s.shard_cells(sh).unwrap());
                }
            }
        }
        // Volume formula: 2^{Σ d j} · 2^{2j1+κ} · 2^{2j2+κ} (type 1) or 2^{2j3+κ} (types 2, 3).
        let sh = s.analytic_family(1, [1, 2, 0]).unwrap()[3].clone();
        let j = sh.levels.map(|l| s.shape().scale_of(l));
        assert_eq!(s.shard_volume_exp(&sh).unwrap(), j.iter().sum::<i32>() + 2 * j[0] + 2 * j[1]);
        let sh = s.analytic_family(3, [1, 2, 0]).unwrap()[3].clone();
        assert_eq!(s.shard_volume_exp(&sh).unwrap(), j.iter().sum::<i32>() + 2 * j[0] + 2 * j[2]);
    }

    #[test]
    fn type_three_is_theta_image_of_type_two() {
        let s = desk();
        let f2 = s.analytic_family(2, [1, 1, 1]).unwrap();
        let f3 = s.analytic_family(3, [1, 1, 1]).unwrap();
        for (a, b) in f2.iter().zip(&f3) {
            let c2: BTreeSet<usize> = s.shard_cells(a).unwrap().into_iter().collect();
            let c3: BTreeSet<usize> = s.shard_cells(b).unwrap().into_iter().collect();
            // g ∈ R3 ⟺ Θ g ∈ R2.
            let image: BTreeSet<usize> = c3.iter().map(|&c| s.theta().image_cell(c)).collect();
            assert_eq!(image, c2);
        }
    }

    #[test]
    fn nesting_has_unique_parents() {
        let s = desk();
        for k in 1..=3 {
            let fine = s.shard_labels(k, [2, 1, 2]).unwrap();
            let coarse = s.shard_labels(k, [1, 0, 1]).unwrap();
            let mut parent = std::collections::HashMap::new();
            for c in 0..fine.len() {
                assert_eq!(*parent.entry(fine[c]).or_insert(coarse[c]), coarse[c]);
            }
        }
    }

    #[test]
    fn haar_elements() {
        let s = desk();
        for k in 1..=3 {
            let idx = s.indices(k).unwrap();
            let sample: Vec<&NilpotentHaarIndex> = idx.iter().step_by(997).collect();
            let hs: Vec<ExactSignal> = sample.iter().map(|i| s.haar_signal(i).unwrap()).collect();
            for (a, ha) in sample.iter().zip(&hs) {
                let support: Vec<usize> = (0..s.grid().len()).filter(|&c| !ha.get(c).is_zero()).collect();
                let shard_has_all_levels = a.shard.levels.iter().all(|&l| l >= 0);
                if shard_has_all_levels {
                    assert_eq!(support, s.shard_cells(&a.shard).unwrap());
                }
                for (b, hb) in sample.iter().zip(&hs) {
                    let ip = ha.inner_product(hb).unwrap();
                    assert_eq!(ip, if a == b { one() } else { RootDyadic::ZERO });
                }
            }
        }
        // Type 3 is the Θ-pullback of type 2, index for index.
        let i2 = &s.indices(2).unwrap()[12345];
        let mut i3 = i2.clone();
        i3.shard.type_k = 3;
        let h2: ExactSignal = s.haar_signal(i2).unwrap();
        let h3: ExactSignal = s.haar_signal(&i3).unwrap();
        assert_eq!(h3, s.u3().apply(&h2).unwrap());
    }

    #[test]
    fn expectations_and_differences() {
        let s = desk();
        let f = random_signal(s.grid(), 17, Law::Uniform);
        for k in 1..=3 {
            assert_eq!(s.cond_expect(&f, [0, 0, 0], k).unwrap(), GridSignal::constant(s.grid(), f.mean()));
            // Shard averaging oracle.
            let levels = [1, 2, 1];
            let e = s.cond_expect(&f, levels, k).unwrap();
            for sh in s.analytic_family(k, levels).unwrap().iter().step_by(7) {
                let cells = s.shard_cells(sh).unwrap();
                let mut sum = RootDyadic::ZERO;
                for &c in &cells {
                    sum += f.get(c);
                }
                let avg = sum.div_exact(cells.len() as i64).unwrap();
                assert!(cells.iter().all(|&c| e.get(c) == avg));
            }
        }
        let u = s.u3();
        for levels in [[1, 0, 2], [2, 2, 0]] {
            let direct = s.cond_expect(&f, levels, 3).unwrap();
            assert_eq!(direct, u.apply(&s.cond_expect(&u.adjoint(&f).unwrap(), levels, 2).unwrap()).unwrap());
        }
        let levels = [0, -1, 1];
        assert_eq!(
            s.mart_diff(&f, levels, 3).unwrap(),
            u.apply(&s.mart_diff(&u.adjoint(&f).unwrap(), levels, 2).unwrap()).unwrap()
        );
        assert!(s.mart_diff(&GridSignal::constant(s.grid(), one()), [1, 1, 1], 1).unwrap().is_zero());
    }

    #[test]
    fn difference_equals_projection() {
        let s = NilSystem::new(NilShape::new([1, 1, 1], 1, 0, 1)).unwrap();
        let f = random_signal(s.grid(), 4, Law::Uniform);
        for k in 1..=3 {
            for levels in [[0, 0, 0], [-1, 0, 0], [0, -1, -1]] {
                let d = s.mart_diff(&f, levels, k).unwrap();
                let mut proj = GridSignal::zeros(s.grid());
                for idx in s.indices(k).unwrap() {
                    if idx.shard.levels == levels {
                        let h: ExactSignal = s.haar_signal(&idx).unwrap();
                        proj = proj.add(&h.scale(f.inner_product(&h).unwrap())).unwrap();
                    }
                }
                assert_eq!(d, proj);
            }
        }
    }

    #[test]
    fn frame_and_square_functions() {
        let s = desk();
        let w = s.full_window();
        let f = random_signal(s.grid(), 23, Law::Uniform);
        let r = s.frame(&f, &w).unwrap();
        let e = f.centered().norm_sq();
        assert_eq!(r.energy, e * RootDyadic::from(Dyadic::from_int(3)));
        assert!(r.per_system.iter().all(|&x| x == e));
        assert_eq!(r.reconstruction.unwrap(), f.centered());
        let z = s.frame(&GridSignal::<RootDyadic>::zeros(s.grid()), &w).unwrap();
        assert!(z.energy.is_zero() && z.reconstruction.unwrap().is_zero());

        for k in 1..=3 {
            let sq = s.square_fn_sq(&f, k, &w).unwrap();
            assert_eq!(sq.integral(), e);
            assert_eq!(s.square_fn_mart_sq(&f, k, &w).unwrap().integral(), e);
        }
        let s2 = s.square_fn_sq(&s.u3().adjoint(&f).unwrap(), 2, &w).unwrap();
        assert_eq!(s.square_fn_sq(&f, 3, &w).unwrap(), s.u3().apply(&s2).unwrap());
        let h: ExactSignal = s.haar_signal(&s.indices(3).unwrap()[500]).unwrap();
        assert_eq!(s.square_fn_sq(&h, 3, &w).unwrap(), h.square());
    }

    #[test]
    fn telescoping() {
        let s = NilSystem::new(NilShape::new([1, 1, 1], 1, 0, 0)).unwrap();
        let f = random_signal(s.grid(), 8, Law::Sign);
        for k in 1..=3 {
            let mut total = GridSignal::zeros(s.grid());
            for t in s.full_window().tuples() {
                total = total.add(&s.mart_diff(&f, [t[0], t[1], t[2]], k).unwrap()).unwrap();
            }
            assert_eq!(total, f.centered());
        }
    }

    #[test]
    fn lp_report_and_thc1() {
        let s = NilSystem::new(NilShape::new([1, 1, 1], 1, 0, 0)).unwrap();
        let r = s.lp_ratio_report(&[1, 2, 3], &[1.5, 2.0, 4.0], 3, 5).unwrap();
        assert!(r.exact_transfer);
        assert!(r.max_transfer_deviation() < 1e-10);
        assert!(r.rows.iter().filter(|x| x.p == 2.0).all(|x| (x.ratio - 1.0).abs() < 1e-12));
        assert!(s.lp_ratio_report(&[1], &[0.5], 1, 0).is_err());

        let f = random_signal(s.grid(), 2, Law::Uniform);
        let c = s.analyze(&f, 3, &s.full_window()).unwrap();
        let (s2, back) = NilCoefficients::<RootDyadic>::from_thc1(&c.to_thc1(&s)).unwrap();
        assert_eq!(back, c);
        assert_eq!(s2.synthesize(&back).unwrap(), f.centered());
    }

    #[test]
    fn comparability() {
        let shape = NilShape::new([1, 1, 1], 3, 1, 0);
        let specs = [FactorSpec::zero(1, 0), FactorSpec::zero(2, 0), FactorSpec::zero(3, 0)];
        let sys = NilSystem::new(shape).unwrap();
        for (case, j) in [(Case::I, [1, 0, -1]), (Case::II, [1, -1, 0]), (Case::III, [0, 0, 1])] {
            let levels = j.map(|x| shape.level_of(x));
            let analytic = sys.analytic_family(case.id(), levels).unwrap()[0].clone();
            let raw = raw_shard(case, &specs, j).unwrap();
            let c = comparability_check(&raw, &analytic, &shape).unwrap();
            for shift in 1..=3 {
                let raw_s = raw_shard(case, &specs, j.map(|x| x + shift)).unwrap();
                let c_s = comparability_regions(&raw_s.natural(), &analytic_region(&raw_s, shape.dims), 12).unwrap();
                assert_eq!(c_s, c, "{case:?}");
            }
            let own = raw.natural();
            assert_eq!(comparability_regions(&own, &own, 4).unwrap(), Comparability { c_in_exp: 0, c_out_exp: 0 });
            let mut wrong = analytic.clone();
            wrong.type_k = (case.id() % 3) + 1;
            assert!(comparability_check(&raw, &wrong, &shape).is_err());
        }
    }
}
