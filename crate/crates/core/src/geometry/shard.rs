//! Stacked tiles, raw pre-shards, the three raw projected shard families, their lattices
//! and the exact partition check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::region::{FiberedRegion, SpatialBlock};
use super::{coverage_1d, interval_family, multiplicity, Frame, Interval, Piece};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Spatial cells per region are capped at `2^MAX_SPATIAL_BITS`.
const MAX_SPATIAL_BITS: i32 = 20;

/// Piecewise-constant function on the `2^res`-per-axis dyadic grid of `[0,1)^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Profile {
    pub d: usize,
    pub res: u32,
    /// Axis 0 slowest.
    pub values: Vec<Dyadic>,
}

impl Profile {
    pub fn zero(d: usize) -> Self {
        Profile { d, res: 0, values: vec![Dyadic::ZERO] }
    }

    /// Sum of seeded non-decreasing per-axis staircases with steps of `2^{-res}`, scaled
    /// into `[0, 1)`.
    pub fn staircase(d: usize, res: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1usize << res;
        let stairs: Vec<Vec<i64>> = (0..d)
            .map(|_| {
                let mut acc = 0;
                (0..n)
                    .map(|_| {
                        let v = acc;
                        acc += i64::from(rng.gen::<bool>());
                        v
                    })
                    .collect()
            })
            .collect();
        // Each staircase is below 2^res; the sum of d of them is below 2^{res + ceil log2 d}.
        let spread = (usize::BITS - (d.max(1) - 1).leading_zeros()) as i32;
        let values = (0..n.pow(d as u32))
            .map(|flat| {
                let mut r = flat;
                let mut total = 0;
                for a in (0..d).rev() {
                    total += stairs[a][r % n];
                    r /= n;
                }
                Dyadic::new(total as i128, -(res as i32) - spread)
            })
            .collect();
        Profile { d, res, values }
    }

    /// `zero` or `staircase:SEED` (staircases use 4 steps per axis).
    pub fn parse(spec: &str, d: usize) -> Result<Self> {
        match spec.split_once(':') {
            None if spec == "zero" => Ok(Profile::zero(d)),
            Some(("staircase", seed)) => {
                let seed = seed.parse().map_err(|_| Error::Parse(format!("bad staircase seed `{seed}`")))?;
                Ok(Profile::staircase(d, 2, seed))
            }
            _ => Err(Error::Parse(format!("unknown profile `{spec}`"))),
        }
    }

    pub fn sup_abs(&self) -> Dyadic {
        self.values.iter().map(Dyadic::abs).fold(Dyadic::ZERO, Dyadic::max)
    }

    /// Value on the profile cell containing the point of the `2^fine`-per-axis grid.
    pub fn value_at(&self, idx: &[u64], fine: u32) -> Dyadic {
        let n = 1u64 << self.res;
        let flat = idx.iter().fold(0u64, |acc, &i| acc * n + (i >> (fine - self.res)));
        self.values[flat as usize]
    }
}

/// One Heisenberg factor: spatial dimension, profile and stacking parameter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FactorSpec {
    pub mu: u8,
    pub d: usize,
    pub profile: Profile,
    pub kappa: i32,
}

impl FactorSpec {
    pub fn new(mu: u8, d: usize, profile: Profile, kappa: i32) -> Self {
        FactorSpec { mu, d, profile, kappa }
    }

    pub fn zero(mu: u8, kappa: i32) -> Self {
        FactorSpec::new(mu, 1, Profile::zero(1), kappa)
    }

    /// Strict mode enforces `κ ≥ 10`, `sup|f| ≤ 2^{κ−10}` and an even spatial dimension;
    /// relaxed mode only needs `κ ≥ 0` and returns the strict-mode violations as warnings.
    pub fn check(&self, strict: bool) -> Result<Vec<String>> {
        if self.profile.d != self.d || self.d == 0 {
            return Err(Error::InvalidSpec(format!("factor {}: profile dimension {} vs d = {}", self.mu, self.profile.d, self.d)));
        }
        if self.kappa < 0 {
            return Err(Error::InvalidSpec(format!("factor {}: κ = {} is negative", self.mu, self.kappa)));
        }
        let mut issues = Vec::new();
        if self.kappa < 10 {
            issues.push(format!("factor {}: κ = {} < 10", self.mu, self.kappa));
        }
        if self.profile.sup_abs() > Dyadic::pow2(self.kappa - 10) {
            issues.push(format!("factor {}: sup|profile| exceeds 2^(κ−10)", self.mu));
        }
        if self.d % 2 != 0 {
            issues.push(format!("factor {}: odd spatial dimension {}", self.mu, self.d));
        }
        if strict && !issues.is_empty() {
            return Err(Error::InvalidSpec(issues.join("; ")));
        }
        Ok(issues)
    }
}

/// `δ_{2^j}` of the stacked tile, with spatial cells at the profile's resolution.
pub fn stacked_tile(spec: &FactorSpec, j: i32) -> Result<FiberedRegion<Interval>> {
    stacked_tile_with_cells(spec, j, j - spec.profile.res as i32)
}

/// Same as [`stacked_tile`] with spatial cells of side `2^cell_exp`, which must not be
/// coarser than the profile's pieces.
pub fn stacked_tile_with_cells(spec: &FactorSpec, j: i32, cell_exp: i32) -> Result<FiberedRegion<Interval>> {
    spec.check(false)?;
    let res = spec.profile.res as i32;
    if cell_exp > j - res {
        return Err(Error::Resolution(format!("cells of side 2^{cell_exp} are coarser than profile pieces 2^{}", j - res)));
    }
    if (j - cell_exp) * spec.d as i32 > MAX_SPATIAL_BITS {
        return Err(Error::Resolution("too many spatial cells".into()));
    }
    let block = SpatialBlock::new(spec.d, j, cell_exp);
    let fine = (j - cell_exp) as u32;
    let len = Dyadic::pow2(2 * j + spec.kappa);
    let fibers = (0..block.num_cells())
        .map(|c| {
            let start = Dyadic::pow2(2 * j) * spec.profile.value_at(&block.cell_indices(c), fine);
            vec![Interval::from_len(start, len)]
        })
        .collect();
    Ok(FiberedRegion { frame: Frame::T, blocks: vec![block], fibers })
}

fn common_kappa(specs: &[FactorSpec; 3]) -> Result<i32> {
    let k = specs[0].kappa;
    if specs.iter().any(|s| s.kappa != k) {
        return Err(Error::InvalidSpec("all factors must share one κ".into()));
    }
    for s in specs {
        s.check(false)?;
    }
    Ok(k)
}

/// Raw pre-shard: stacked tiles of factors 1 and 2 times the spatial cube of factor 3.
pub fn raw_pre_shard(specs: &[FactorSpec; 3], j: [i32; 3]) -> Result<FiberedRegion<Piece>> {
    common_kappa(specs)?;
    let t1 = stacked_tile(&specs[0], j[0])?;
    let t2 = stacked_tile(&specs[1], j[1])?;
    let b3 = SpatialBlock::new(specs[2].d, j[2], j[2]);
    if (specs[0].profile.res as usize * specs[0].d + specs[1].profile.res as usize * specs[1].d) as i32 > MAX_SPATIAL_BITS {
        return Err(Error::Resolution("too many spatial cells".into()));
    }
    let mut fibers = Vec::with_capacity(t1.num_cells() * t2.num_cells());
    for c1 in 0..t1.num_cells() {
        for c2 in 0..t2.num_cells() {
            fibers.push(vec![Piece::rect(t1.fibers[c1][0], t2.fibers[c2][0])]);
        }
    }
    Ok(FiberedRegion { frame: Frame::T, blocks: vec![t1.blocks[0].clone(), t2.blocks[0].clone(), b3], fibers })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    I,
    II,
    III,
}

impl Case {
    pub fn id(self) -> u8 {
        match self {
            Case::I => 1,
            Case::II => 2,
            Case::III => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Case> {
        match id {
            1 => Ok(Case::I),
            2 => Ok(Case::II),
            3 => Ok(Case::III),
            _ => Err(Error::Parse(format!("case must be 1, 2 or 3, got {id}"))),
        }
    }
}

/// Regime of a scale and whether the first two factors must be exchanged (`j1 < j2`).
pub fn classify(j: [i32; 3]) -> Result<(Case, bool)> {
    let swapped = j[0] < j[1];
    let (hi, lo) = if swapped { (j[1], j[0]) } else { (j[0], j[1]) };
    let c = j[2];
    if c < lo {
        Ok((Case::I, swapped))
    } else if lo < c && c < hi {
        Ok((Case::II, swapped))
    } else if hi < c {
        Ok((Case::III, swapped))
    } else {
        Err(Error::Regime(format!("scale {j:?} sits on a regime boundary")))
    }
}

fn oriented(specs: &[FactorSpec; 3], j: [i32; 3], swapped: bool) -> ([FactorSpec; 3], [i32; 3]) {
    if swapped {
        ([specs[1].clone(), specs[0].clone(), specs[2].clone()], [j[1], j[0], j[2]])
    } else {
        (specs.clone(), j)
    }
}

/// Union of central translates `(m1·s1, m2·s2)` of every fiber of a region.
fn central_union(region: &FiberedRegion<Piece>, offsets: &[(Dyadic, Dyadic)]) -> FiberedRegion<Piece> {
    FiberedRegion {
        fibers: region
            .fibers
            .iter()
            .map(|f| f.iter().flat_map(|p| offsets.iter().map(move |&(a, b)| p.translate(a, b))).collect())
            .collect(),
        ..region.clone()
    }
}

fn grid_offsets(m1: &[i64], s1: Dyadic, m2: &[i64], s2: Dyadic) -> Vec<(Dyadic, Dyadic)> {
    m1.iter()
        .flat_map(|&a| m2.iter().map(move |&b| (s1 * Dyadic::from_int(a), s2 * Dyadic::from_int(b))))
        .collect()
}

fn symmetric_range(n: i64) -> Vec<i64> {
    (-n..n).collect()
}

/// `Ŝ`: the intermediate block of the slanted regime, in oriented coordinates.
pub fn intermediate_block(specs: &[FactorSpec; 3], j: [i32; 3]) -> Result<FiberedRegion<Piece>> {
    let (case, swapped) = classify(j)?;
    if case != Case::III {
        return Err(Error::Regime(format!("scale {j:?} is not in the slanted regime")));
    }
    let (s, j) = oriented(specs, j, swapped);
    Ok(hat_block(&s, j)?.0)
}

fn hat_block(specs: &[FactorSpec; 3], j: [i32; 3]) -> Result<(FiberedRegion<Piece>, usize)> {
    let kappa = common_kappa(specs)?;
    let pre = raw_pre_shard(specs, j)?;
    let n2 = 1i64 << (2 * (j[0] - j[1]));
    let offs = grid_offsets(&[0, -1], Dyadic::pow2(2 * j[0] + kappa), &symmetric_range(n2), Dyadic::pow2(2 * j[1] + kappa));
    Ok((central_union(&pre, &offs).merged(), offs.len()))
}

/// A raw projected shard together with its regime data.
#[derive(Clone, Debug, PartialEq)]
pub struct Shard {
    pub case: Case,
    pub j: [i32; 3],
    pub kappa: i32,
    pub swapped: bool,
    /// Number of pre-shard translates in the union.
    pub translates: usize,
    /// Region in oriented coordinates: factors exchanged when `swapped`.
    pub oriented: FiberedRegion<Piece>,
}

impl Shard {
    /// The shard in `(t1, t2)` with the factors in their given order.
    pub fn region(&self) -> FiberedRegion<Piece> {
        if self.swapped {
            self.oriented.swap_factors().expect("oriented shards are rectangles")
        } else {
            self.oriented.clone()
        }
    }

    /// The shard in the frame where its lattice is rectangular (rectified in the slanted regime).
    pub fn natural(&self) -> FiberedRegion<Piece> {
        match self.case {
            Case::III => self.oriented.to_frame(self.oriented.frame.rectify()).expect("rectangles rectify"),
            _ => self.oriented.clone(),
        }
    }

    pub fn natural_steps(&self) -> (Dyadic, Dyadic) {
        natural_steps(self.case, self.oriented_j(), self.kappa)
    }

    /// Oriented scales (`j1 ≥ j2`).
    pub fn oriented_j(&self) -> [i32; 3] {
        if self.swapped {
            [self.j[1], self.j[0], self.j[2]]
        } else {
            self.j
        }
    }
}

/// The basic raw shard of a regime at scale `j`. The regime must match `j`.
pub fn raw_shard(case: Case, specs: &[FactorSpec; 3], j: [i32; 3]) -> Result<Shard> {
    let (actual, swapped) = classify(j)?;
    if actual != case {
        return Err(Error::Regime(format!("scale {j:?} belongs to case {}, not case {}", actual.id(), case.id())));
    }
    let (s, oj) = oriented(specs, j, swapped);
    let kappa = common_kappa(&s)?;
    let l1 = Dyadic::pow2(2 * oj[0] + kappa);
    let l2 = Dyadic::pow2(2 * oj[1] + kappa);
    let (region, translates) = match case {
        Case::I => {
            let pre = raw_pre_shard(&s, oj)?;
            let offs = grid_offsets(&[0, -1], l1, &[0, -1], l2);
            (central_union(&pre, &offs), offs.len())
        }
        Case::II => {
            let pre = raw_pre_shard(&s, oj)?;
            let n = 1i64 << (2 * (oj[2] - oj[1]));
            let offs = grid_offsets(&[0, -1], l1, &symmetric_range(n), l2);
            (central_union(&pre, &offs), offs.len())
        }
        Case::III => {
            let (hat, count) = hat_block(&s, oj)?;
            let check = central_union(&hat, &grid_offsets(&[-2, 0, 2], l1, &[0], l2));
            let n = 1i64 << (2 * (oj[2] - oj[0]));
            let diag: Vec<(Dyadic, Dyadic)> =
                (-n..n).step_by(2).map(|m| (l1 * Dyadic::from_int(m), l1 * Dyadic::from_int(m))).collect();
            (central_union(&check, &diag), count * 3 * diag.len())
        }
    };
    let mut oriented = region.merged();
    oriented.frame = if swapped { Frame::TSwapped } else { Frame::T };
    Ok(Shard { case, j, kappa, swapped, translates, oriented })
}

/// Translation lattice of a regime.
#[derive(Clone, Debug, PartialEq)]
pub struct ShardLattice {
    pub case: Case,
    pub swapped: bool,
    /// Step `2^{j_μ}` on every axis of spatial factor μ.
    pub spatial: [Dyadic; 3],
    /// Basis of the central lattice in `(t1, t2)`.
    pub central: [(Dyadic, Dyadic); 2],
    /// Frame in which the central lattice is rectangular, and its two steps there.
    pub natural_frame: Frame,
    pub natural_steps: (Dyadic, Dyadic),
}

pub fn shard_lattice(case: Case, j: [i32; 3], specs: &[FactorSpec; 3]) -> Result<ShardLattice> {
    let (actual, swapped) = classify(j)?;
    if actual != case {
        return Err(Error::Regime(format!("scale {j:?} belongs to case {}, not case {}", actual.id(), case.id())));
    }
    let kappa = common_kappa(specs)?;
    let (_, oj) = oriented(specs, j, swapped);
    let z = Dyadic::ZERO;
    let steps = natural_steps(case, oj, kappa);
    let frame = if case == Case::III { Frame::Uv } else { Frame::T };
    // Natural-frame basis vectors (s1, 0) and (0, s2), mapped back to (t1, t2).
    let (a, b) = steps;
    let central = match (case, swapped) {
        (Case::III, false) => [(a, z), (b, b)],
        (Case::III, true) => [(z, a), (b, b)],
        (_, false) => [(a, z), (z, b)],
        (_, true) => [(z, a), (b, z)],
    };
    let natural_frame = match (frame, swapped) {
        (Frame::T, true) => Frame::TSwapped,
        (Frame::Uv, true) => Frame::UvSwapped,
        (f, _) => f,
    };
    Ok(ShardLattice {
        case,
        swapped,
        spatial: [Dyadic::pow2(j[0]), Dyadic::pow2(j[1]), Dyadic::pow2(j[2])],
        central,
        natural_frame,
        natural_steps: steps,
    })
}

/// Lattice steps in the natural frame for oriented scales.
pub(crate) fn natural_steps(case: Case, oj: [i32; 3], kappa: i32) -> (Dyadic, Dyadic) {
    let two = Dyadic::from_int(2);
    let l1 = Dyadic::pow2(2 * oj[0] + kappa);
    let l2 = Dyadic::pow2(2 * oj[1] + kappa);
    match case {
        Case::I => (two * l1, two * l2),
        Case::II => (two * l1, two * l2 * Dyadic::pow2(2 * (oj[2] - oj[1]))),
        Case::III => (Dyadic::from_int(6) * l1, two * l1 * Dyadic::pow2(2 * (oj[2] - oj[0]))),
    }
}

/// Box over which a partition is checked: one interval per spatial factor (applied to each
/// of its axes) and a central box in the regime's natural frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionWindow {
    pub spatial: [Interval; 3],
    pub central: (Interval, Interval),
}

impl PartitionWindow {
    /// Two spatial periods and four central periods around the origin.
    pub fn around_origin(lattice: &ShardLattice) -> Self {
        let sp = |s: Dyadic| Interval::new(-s, s * Dyadic::from_int(2));
        let two = Dyadic::from_int(2);
        let (a, b) = lattice.natural_steps;
        PartitionWindow {
            spatial: [sp(lattice.spatial[0]), sp(lattice.spatial[1]), sp(lattice.spatial[2])],
            central: (Interval::new(-(two * a), two * a), Interval::new(-(two * b), two * b)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionReport {
    pub case: Case,
    pub j: [i32; 3],
    pub cells_checked: usize,
    pub spatial_multiplicity: (u32, u32),
    pub central_multiplicity: (u32, u32),
    pub failures: Vec<String>,
}

impl PartitionReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty() && self.spatial_multiplicity == (1, 1) && self.central_multiplicity == (1, 1)
    }
}

/// Overlays every lattice translate of the basic shard meeting the window and reports the
/// multiplicity range. `broken_lattice` stretches the first natural step by 3/2, a negative
/// control that must fail.
pub fn verify_partition(
    case: Case,
    specs: &[FactorSpec; 3],
    j: [i32; 3],
    window: Option<&PartitionWindow>,
    broken_lattice: bool,
) -> Result<PartitionReport> {
    let shard = raw_shard(case, specs, j)?;
    let lattice = shard_lattice(case, j, specs)?;
    let window = window.cloned().unwrap_or_else(|| PartitionWindow::around_origin(&lattice));
    let natural = shard.natural();
    let oj = shard.oriented_j();
    // Window components in oriented factor order.
    let swin = if shard.swapped {
        [window.spatial[1], window.spatial[0], window.spatial[2]]
    } else {
        window.spatial.clone()
    };

    // Spatial factor boxes tile each axis with period 2^{j_μ}.
    let mut spatial = (u32::MAX, 0u32);
    for (mu, w) in window.spatial.iter().enumerate() {
        let fam = interval_family(Dyadic::pow2(j[mu]), 1, 0, w);
        let (lo, hi) = coverage_1d(&fam, w);
        spatial = (spatial.0.min(lo), spatial.1.max(hi));
    }

    let (mut s1, s2) = lattice.natural_steps;
    if broken_lattice {
        s1 = s1 * Dyadic::new(3, -1);
    }
    let meets = |cell: &[Interval], w: &Interval, period: Dyadic| -> bool {
        // Some translate by period·ℤ of the cell's first-axis range meets the window.
        cell.iter().all(|c| (w.lo - c.hi).floor_div(&period) + 1 <= -(c.lo - w.hi).floor_div(&period) - 1)
    };
    let cells: Vec<usize> = (0..natural.num_cells())
        .filter(|&flat| {
            natural
                .cell_box(flat)
                .iter()
                .enumerate()
                .all(|(mu, boxes)| meets(boxes, &swin[mu], Dyadic::pow2(oj[mu])))
        })
        .collect();
    let results: Vec<(u32, u32, Option<String>)> = cells
        .par_iter()
        .map(|&flat| {
            let fiber = natural.fiber(flat);
            let mut bx: Option<(Dyadic, Dyadic, Dyadic, Dyadic)> = None;
            for p in fiber {
                let (x, y) = p.bbox();
                bx = Some(match bx {
                    None => (x.lo, x.hi, y.lo, y.hi),
                    Some((a, b, c, d)) => (a.min(x.lo), b.max(x.hi), c.min(y.lo), d.max(y.hi)),
                });
            }
            let Some((xlo, xhi, ylo, yhi)) = bx else {
                return (0, 0, Some(format!("cell {flat}: empty fiber")));
            };
            let (wx, wy) = window.central;
            let mut translated = Vec::new();
            // A translate's x-sections are the original's shifted by dx, whatever dy is.
            for n2 in (wy.lo - yhi).floor_div(&s2)..=(wy.hi - ylo).floor_div(&s2) {
                for n1 in (wx.lo - xhi).floor_div(&s1)..=(wx.hi - xlo).floor_div(&s1) {
                    let (dx, dy) = (s1 * Dyadic::from_int(n1), s2 * Dyadic::from_int(n2));
                    translated.extend(fiber.iter().map(|p| p.translate(dx, dy)));
                }
            }
            let (lo, hi, witness) = multiplicity(&translated, window.central);
            let failure = witness.map(|(x, y)| {
                format!("cell {flat}: multiplicity range {lo}..{hi}, first defect near ({}, {})", x.to_f64(), y.to_f64())
            });
            (lo, hi, failure)
        })
        .collect();
    let mut central = (u32::MAX, 0u32);
    let mut failures = Vec::new();
    for (lo, hi, f) in results {
        central = (central.0.min(lo), central.1.max(hi));
        failures.extend(f);
    }
    if cells.is_empty() {
        central = (0, 0);
        failures.push("window meets no spatial cell".into());
    }
    if spatial != (1, 1) {
        failures.push(format!("spatial multiplicity range {}..{}", spatial.0, spatial.1));
    }
    Ok(PartitionReport {
        case,
        j,
        cells_checked: cells.len(),
        spatial_multiplicity: spatial,
        central_multiplicity: central,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::super::contained;
    use super::*;

    fn d(n: i64) -> Dyadic {
        Dyadic::from_int(n)
    }

    fn zero_specs(kappa: i32) -> [FactorSpec; 3] {
        [FactorSpec::zero(1, kappa), FactorSpec::zero(2, kappa), FactorSpec::zero(3, kappa)]
    }

    fn stair_specs(kappa: i32, seed: u64) -> [FactorSpec; 3] {
        [
            FactorSpec::new(1, 1, Profile::staircase(1, 2, seed), kappa),
            FactorSpec::new(2, 1, Profile::staircase(1, 2, seed + 1), kappa),
            FactorSpec::zero(3, kappa),
        ]
    }

    fn rect_sides(p: &Piece) -> (Dyadic, Dyadic) {
        (p.x.len(), p.y.len())
    }

    #[test]
    fn stacked_tiles() {
        let t = stacked_tile(&FactorSpec::zero(1, 0), 0).unwrap();
        assert_eq!(t.num_cells(), 1);
        assert_eq!(t.fibers[0], vec![Interval::new(d(0), d(1))]);
        assert_eq!(t.blocks[0].bounds(), vec![Interval::new(d(0), d(1))]);

        let t = stacked_tile(&FactorSpec::zero(1, 2), 1).unwrap();
        assert_eq!(t.blocks[0].bounds()[0].len(), d(2));
        assert_eq!(t.fibers[0][0].len(), d(16));

        let spec = FactorSpec::new(1, 1, Profile::staircase(1, 2, 5), 1);
        let t = stacked_tile(&spec, 3).unwrap();
        assert!(t.fibers.iter().all(|f| f[0].len() == Dyadic::pow2(7)));
        assert!(stacked_tile_with_cells(&spec, 3, 2).is_err());
        assert_eq!(stacked_tile_with_cells(&spec, 3, 0).unwrap().num_cells(), 8);
    }

    #[test]
    fn strict_mode() {
        let relaxed = FactorSpec::new(1, 1, Profile::staircase(1, 2, 1), 2);
        assert!(!relaxed.check(false).unwrap().is_empty());
        assert!(relaxed.check(true).is_err());
        let strict = FactorSpec::new(1, 2, Profile::zero(2), 10);
        assert!(strict.check(true).unwrap().is_empty());
    }

    #[test]
    fn pre_shard_sides() {
        let pre = raw_pre_shard(&zero_specs(0), [0, 0, 0]).unwrap();
        assert_eq!(pre.fibers, vec![vec![Piece::rect(Interval::new(d(0), d(1)), Interval::new(d(0), d(1)))]]);
        let pre = raw_pre_shard(&zero_specs(1), [1, 0, 0]).unwrap();
        assert_eq!(rect_sides(&pre.fibers[0][0]), (d(8), d(2)));
        let pre = raw_pre_shard(&stair_specs(2, 3), [2, -1, 4]).unwrap();
        assert_eq!(pre.num_cells(), 16);
        for f in &pre.fibers {
            assert_eq!(rect_sides(&f[0]), (Dyadic::pow2(6), Dyadic::pow2(0)));
        }
    }

    #[test]
    fn regimes() {
        assert_eq!(classify([1, 0, -1]).unwrap(), (Case::I, false));
        assert_eq!(classify([2, 0, 1]).unwrap(), (Case::II, false));
        assert_eq!(classify([0, 0, 1]).unwrap(), (Case::III, false));
        assert_eq!(classify([0, 1, -1]).unwrap(), (Case::I, true));
        assert!(classify([1, 0, 0]).is_err());
        assert!(raw_shard(Case::II, &zero_specs(0), [1, 0, -1]).is_err());
    }

    #[test]
    fn case_fibers() {
        let s = raw_shard(Case::I, &stair_specs(1, 2), [1, 0, -1]).unwrap();
        for f in &s.oriented.fibers {
            assert_eq!(f.len(), 1);
            assert_eq!(rect_sides(&f[0]), (d(2) * Dyadic::pow2(3), d(2) * Dyadic::pow2(1)));
        }
        assert_eq!(s.translates, 4);

        let s = raw_shard(Case::II, &zero_specs(0), [2, 0, 1]).unwrap();
        assert_eq!(s.oriented.fibers[0], vec![Piece::rect(Interval::new(d(-16), d(16)), Interval::new(d(-4), d(4)))]);
        assert_eq!(s.translates, 2 * 2 * 4);

        // L = 1, N = 4: t-frame fiber is 4 diagonal 6×2 boxes; rectified u-sections have length 6.
        let s = raw_shard(Case::III, &stair_specs(0, 9), [0, 0, 1]).unwrap();
        let nat = s.natural();
        assert_eq!(nat.frame, Frame::Uv);
        for (flat, f) in s.oriented.fibers.iter().enumerate() {
            assert_eq!(f.len(), 4);
            assert!(f.iter().all(|p| rect_sides(p) == (d(6), d(2))));
            let v: Vec<_> = nat.fibers[flat].iter().map(|p| p.y).collect();
            let (lo, hi) = (v.iter().map(|i| i.lo).min().unwrap(), v.iter().map(|i| i.hi).max().unwrap());
            assert_eq!(hi - lo, d(8));
            assert!(nat.fibers[flat].iter().all(|p| p.x.len() == d(6) && p.slope == 1));
        }
        let s0 = raw_shard(Case::III, &zero_specs(0), [0, 0, 1]).unwrap();
        let v: Vec<_> = s0.natural().fibers[0].iter().map(|p| p.y).collect();
        assert_eq!(v.iter().map(|i| i.lo).min().unwrap(), d(-5));
        assert_eq!(v.iter().map(|i| i.hi).max().unwrap(), d(3));
    }

    #[test]
    fn intermediate_block_is_square() {
        for (specs, j) in [(zero_specs(0), [1, 0, 2]), (stair_specs(1, 4), [1, -1, 3])] {
            let hat = intermediate_block(&specs, j).unwrap();
            let l = Dyadic::pow2(2 * j[0] + specs[0].kappa);
            for f in &hat.fibers {
                assert_eq!(f.len(), 1);
                assert_eq!(rect_sides(&f[0]), (d(2) * l, d(2) * l));
            }
        }
        assert!(intermediate_block(&zero_specs(0), [1, 0, -1]).is_err());
    }

    #[test]
    fn volume_additivity() {
        for (case, j) in [(Case::I, [1, 0, -1]), (Case::II, [2, 0, 1]), (Case::III, [1, 0, 2]), (Case::III, [0, 1, 2])] {
            let specs = stair_specs(1, 7);
            let s = raw_shard(case, &specs, j).unwrap();
            let oj = s.oriented_j();
            let sw = if s.swapped { [specs[1].clone(), specs[0].clone(), specs[2].clone()] } else { specs.clone() };
            let pre = raw_pre_shard(&sw, oj).unwrap();
            assert_eq!(s.oriented.volume(), pre.volume() * d(s.translates as i64));
            assert_eq!(s.region().volume(), s.oriented.volume());
        }
    }

    #[test]
    fn lattices() {
        let l = shard_lattice(Case::I, [1, 0, -1], &zero_specs(2)).unwrap();
        assert_eq!(l.central, [(d(32), d(0)), (d(0), d(8))]);
        assert_eq!(l.spatial, [d(2), d(1), Dyadic::new(1, -1)]);
        let l = shard_lattice(Case::III, [0, 0, 1], &zero_specs(0)).unwrap();
        assert_eq!(l.natural_steps, (d(6), d(8)));
        assert_eq!(l.central, [(d(6), d(0)), (d(8), d(8))]);
        assert!(shard_lattice(Case::III, [1, 0, -1], &zero_specs(0)).is_err());
    }

    #[test]
    fn partitions() {
        let cases = [
            (Case::I, [1, 0, -1], zero_specs(0)),
            (Case::I, [1, 1, 0], stair_specs(0, 1)),
            (Case::II, [2, 0, 1], stair_specs(1, 2)),
            (Case::III, [0, 0, 1], stair_specs(0, 3)),
            (Case::III, [0, 1, 2], stair_specs(0, 4)),
            (Case::II, [0, 2, 1], zero_specs(0)),
        ];
        for (case, j, specs) in cases {
            let r = verify_partition(case, &specs, j, None, false).unwrap();
            assert!(r.pass(), "{case:?} {j:?}: {:?}", r.failures);
            assert!(r.cells_checked > 0);
            let broken = verify_partition(case, &specs, j, None, true).unwrap();
            assert!(!broken.pass());
            assert_eq!(broken.central_multiplicity.0, 0);
        }
    }

    #[test]
    fn exchanging_factors_commutes_with_shards() {
        // Case I with j1 = j2 is symmetric under the exchange.
        let specs = stair_specs(1, 11);
        let swapped_specs = [specs[1].clone(), specs[0].clone(), specs[2].clone()];
        let a = raw_shard(Case::I, &specs, [1, 1, 0]).unwrap().region();
        let b = raw_shard(Case::I, &swapped_specs, [1, 1, 0]).unwrap().region().swap_factors().unwrap();
        let mut b = b;
        b.frame = Frame::T;
        assert_eq!(a, b);
        // Exchanged order: the shard is the exchanged oriented shard.
        for (case, j) in [(Case::II, [0, 2, 1]), (Case::III, [0, 1, 2])] {
            let direct = raw_shard(case, &specs, j).unwrap().region();
            let via = raw_shard(case, &swapped_specs, [j[1], j[0], j[2]]).unwrap().region().swap_factors().unwrap();
            assert_eq!(direct.fibers, via.fibers);
            assert_eq!(direct.blocks, via.blocks);
        }
    }

    #[test]
    fn fbr1_round_trip() {
        let s = raw_shard(Case::III, &stair_specs(0, 5), [0, 0, 1]).unwrap();
        for r in [s.region(), s.natural()] {
            assert_eq!(FiberedRegion::from_fbr1(&r.to_fbr1()).unwrap(), r);
        }
        assert!(FiberedRegion::from_fbr1("FBR2\n").is_err());
    }

    #[test]
    fn shard_contains_its_pre_shard() {
        let specs = stair_specs(0, 6);
        let s = raw_shard(Case::II, &specs, [2, 0, 1]).unwrap();
        let pre = raw_pre_shard(&specs, [2, 0, 1]).unwrap();
        for (a, b) in pre.fibers.iter().zip(&s.oriented.fibers) {
            assert!(contained(a, b));
        }
    }
}
