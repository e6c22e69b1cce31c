//! Exact planar geometry for central fibers: half-open intervals, slanted pieces and a slab
//! sweep that measures multiplicities and containment up to measure-zero boundaries.
//!
//! Coordinates are unwrapped dyadic rationals. A [`Piece`] is the set
//! `{(x, y) : y ∈ Y, x + s·y ∈ X}` with slope `s ∈ {-1, 0, 1}` (a rectangle when `s = 0`).

mod region;
mod shard;
mod tube;

pub use region::{CentralPiece, FiberedRegion, SpatialBlock};
pub use shard::{
    classify, intermediate_block, raw_pre_shard, raw_shard, shard_lattice, stacked_tile, stacked_tile_with_cells,
    verify_partition, Case, FactorSpec, PartitionReport, PartitionWindow, Profile, Shard, ShardLattice,
};
pub use tube::{inner_tube, outer_tube, tube_sigma, tube_sigma_at, SigmaReport, TubeModel};

use std::fmt;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// Half-open interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl Interval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Interval { lo, hi }
    }

    /// `[start, start + len)`.
    pub fn from_len(start: Dyadic, len: Dyadic) -> Self {
        Interval::new(start, start + len)
    }

    /// `[c − w, c + w)`.
    pub fn centered(c: Dyadic, w: Dyadic) -> Self {
        Interval::new(c - w, c + w)
    }

    pub fn len(&self) -> Dyadic {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    pub fn shift(&self, d: Dyadic) -> Self {
        Interval { lo: self.lo + d, hi: self.hi + d }
    }

    pub fn contains(&self, x: Dyadic) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn contains_interval(&self, o: &Interval) -> bool {
        o.is_empty() || (self.lo <= o.lo && o.hi <= self.hi)
    }

    /// Positive-length intersection.
    pub fn overlaps(&self, o: &Interval) -> bool {
        self.lo.max(o.lo) < self.hi.min(o.hi)
    }

    pub fn midpoint(&self) -> Dyadic {
        self.lo.midpoint(&self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo.to_f64(), self.hi.to_f64())
    }
}

/// The intervals `[mℓ, (m+n)ℓ)`, `m ∈ a + nℤ`, that meet `window`.
pub fn interval_family(ell: Dyadic, n: i64, a: i64, window: &Interval) -> Vec<Interval> {
    assert!(ell.signum() > 0 && n > 0, "interval family needs positive length and period");
    let period = ell * Dyadic::from_int(n);
    let base = ell * Dyadic::from_int(a);
    // Smallest q whose interval ends after window.lo.
    let first = (window.lo - base - period).floor_div(&period) + 1;
    let mut out = Vec::new();
    let mut q = first;
    loop {
        let lo = base + period * Dyadic::from_int(q);
        if lo >= window.hi {
            break;
        }
        out.push(Interval::from_len(lo, period));
        q += 1;
    }
    out
}

/// Minimum and maximum number of intervals covering a point of `window`.
pub fn coverage_1d(intervals: &[Interval], window: &Interval) -> (u32, u32) {
    let mut events: Vec<(Dyadic, i32)> = Vec::with_capacity(2 * intervals.len());
    for iv in intervals {
        let lo = iv.lo.max(window.lo);
        let hi = iv.hi.min(window.hi);
        if lo < hi {
            events.push((lo, 1));
            events.push((hi, -1));
        }
    }
    let mut cuts: Vec<Dyadic> = events.iter().map(|e| e.0).chain([window.lo, window.hi]).collect();
    cuts.sort();
    cuts.dedup();
    events.sort();
    let (mut lo_m, mut hi_m) = (u32::MAX, 0);
    let mut count = 0i32;
    let mut e = 0;
    for w in cuts.windows(2) {
        while e < events.len() && events[e].0 <= w[0] {
            count += events[e].1;
            e += 1;
        }
        if w[0] >= window.lo && w[1] <= window.hi && w[0] < w[1] {
            lo_m = lo_m.min(count as u32);
            hi_m = hi_m.max(count as u32);
        }
    }
    if window.is_empty() {
        (0, 0)
    } else {
        (lo_m, hi_m)
    }
}

/// Coordinate frame of a central plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    /// `(t1, t2)`.
    T,
    /// `(t2, t1)`, used when the first two factors are exchanged.
    TSwapped,
    /// `(u, v) = (t1 − t2, t2)`.
    Uv,
    /// `(t2 − t1, t1)`: the rectification of the exchanged order.
    UvSwapped,
}

impl Frame {
    fn swapped(self) -> bool {
        matches!(self, Frame::TSwapped | Frame::UvSwapped)
    }

    fn rectified(self) -> bool {
        matches!(self, Frame::Uv | Frame::UvSwapped)
    }

    pub fn rectify(self) -> Frame {
        if self.swapped() {
            Frame::UvSwapped
        } else {
            Frame::Uv
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::T => "t",
            Frame::TSwapped => "t-swapped",
            Frame::Uv => "uv",
            Frame::UvSwapped => "uv-swapped",
        })
    }
}

impl std::str::FromStr for Frame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(Frame::T),
            "t-swapped" => Ok(Frame::TSwapped),
            "uv" => Ok(Frame::Uv),
            "uv-swapped" => Ok(Frame::UvSwapped),
            _ => Err(Error::Parse(format!("unknown frame `{s}`"))),
        }
    }
}

/// `{(x, y) : y ∈ y_range, x + slope·y ∈ x_range}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Piece {
    pub x: Interval,
    pub y: Interval,
    pub slope: i8,
}

impl Piece {
    pub fn rect(x: Interval, y: Interval) -> Self {
        Piece { x, y, slope: 0 }
    }

    fn slope_d(&self) -> Dyadic {
        Dyadic::from_int(self.slope as i64)
    }

    pub fn area(&self) -> Dyadic {
        self.x.len() * self.y.len()
    }

    /// The x-section at height `y` (only meaningful for `y` in the y-range).
    pub fn x_at(&self, y: Dyadic) -> Interval {
        self.x.shift(-(self.slope_d() * y))
    }

    pub fn translate(&self, dx: Dyadic, dy: Dyadic) -> Self {
        Piece { x: self.x.shift(dx + self.slope_d() * dy), y: self.y.shift(dy), slope: self.slope }
    }

    pub fn bbox(&self) -> (Interval, Interval) {
        let a = self.x_at(self.y.lo);
        let b = self.x_at(self.y.hi);
        (Interval::new(a.lo.min(b.lo), a.hi.max(b.hi)), self.y)
    }

    /// Boundary lines `x = c − s·y` as `(c, s)`.
    fn edges(&self) -> [(Dyadic, i8); 2] {
        [(self.x.lo, self.slope), (self.x.hi, self.slope)]
    }

    /// Re-expresses the piece in another frame of the same orientation.
    pub fn reframe(&self, from: Frame, to: Frame) -> Result<Piece> {
        if from == to {
            return Ok(*self);
        }
        if from.swapped() != to.swapped() {
            if from.rectified() || to.rectified() || self.slope != 0 {
                return Err(Error::Regime(format!("cannot move a slanted piece from {from} to {to}")));
            }
            return Ok(Piece::rect(self.y, self.x));
        }
        // Rectifying adds one to the slope; undoing it subtracts one.
        let slope = if to.rectified() { self.slope + 1 } else { self.slope - 1 };
        if !(-1..=1).contains(&slope) {
            return Err(Error::Regime(format!("slope {slope} out of range moving from {from} to {to}")));
        }
        Ok(Piece { slope, ..*self })
    }

    /// Image under `p ↦ c + 2^e (p − c)`.
    pub fn dilate(&self, c: (Dyadic, Dyadic), e: i32) -> Self {
        let base = c.0 + self.slope_d() * c.1;
        let scale = |i: Interval, o: Dyadic| Interval::new(o + (i.lo - o).mul_pow2(e), o + (i.hi - o).mul_pow2(e));
        Piece { x: scale(self.x, base), y: scale(self.y, c.1), slope: self.slope }
    }

    pub fn contains_point(&self, x: Dyadic, y: Dyadic) -> bool {
        self.y.contains(y) && self.x.contains(x + self.slope_d() * y)
    }
}

/// Merges pieces of equal slope that share a full edge until none do, then sorts.
pub fn merge_pieces(pieces: &[Piece]) -> Vec<Piece> {
    let mut v: Vec<Piece> = pieces.to_vec();
    loop {
        let mut merged = false;
        'outer: for i in 0..v.len() {
            for k in i + 1..v.len() {
                let (a, b) = (v[i], v[k]);
                if a.slope != b.slope {
                    continue;
                }
                let joined = if a.x == b.x && (a.y.hi == b.y.lo || b.y.hi == a.y.lo) {
                    Some(Piece { y: Interval::new(a.y.lo.min(b.y.lo), a.y.hi.max(b.y.hi)), ..a })
                } else if a.y == b.y && (a.x.hi == b.x.lo || b.x.hi == a.x.lo) {
                    Some(Piece { x: Interval::new(a.x.lo.min(b.x.lo), a.x.hi.max(b.x.hi)), ..a })
                } else {
                    None
                };
                if let Some(p) = joined {
                    v[i] = p;
                    v.swap_remove(k);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    v.sort();
    v
}

/// One elementary cell of a sweep: a y-slab, an x-segment at the slab's middle height and
/// the number of pieces of each group covering it.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub y: Interval,
    pub mid_y: Dyadic,
    pub x: Interval,
    pub counts: Vec<u32>,
}

/// Slab sweep of several groups of pieces, optionally clipped to a box.
///
/// Slab boundaries are all piece y-endpoints and all crossings of boundary lines, so the
/// order of section endpoints is constant inside each slab and one sample height per slab
/// decides every count.
pub fn sweep(groups: &[&[Piece]], clip: Option<(Interval, Interval)>) -> Vec<SweepCell> {
    let mut lines: Vec<(Dyadic, i8)> = groups.iter().flat_map(|g| g.iter().flat_map(|p| p.edges())).collect();
    let mut ys: Vec<Dyadic> = groups.iter().flat_map(|g| g.iter().flat_map(|p| [p.y.lo, p.y.hi])).collect();
    if let Some((cx, cy)) = clip {
        lines.push((cx.lo, 0));
        lines.push((cx.hi, 0));
        ys.push(cy.lo);
        ys.push(cy.hi);
    }
    lines.sort();
    lines.dedup();
    for (i, &(c1, s1)) in lines.iter().enumerate() {
        for &(c2, s2) in &lines[i + 1..] {
            if s1 != s2 {
                // c1 − s1·y = c2 − s2·y.
                let diff = c1 - c2;
                let y = match s1 - s2 {
                    1 => diff,
                    -1 => -diff,
                    2 => diff.mul_pow2(-1),
                    -2 => -diff.mul_pow2(-1),
                    _ => unreachable!("slopes lie in [-1, 1]"),
                };
                ys.push(y);
            }
        }
    }
    ys.sort();
    ys.dedup();
    if let Some((_, cy)) = clip {
        ys.retain(|&y| cy.lo <= y && y <= cy.hi);
    }
    let mut out = Vec::new();
    for w in ys.windows(2) {
        let slab = Interval::new(w[0], w[1]);
        let mid = slab.midpoint();
        let mut events: Vec<(Dyadic, usize, i32)> = Vec::new();
        for (g, group) in groups.iter().enumerate() {
            for p in group.iter().filter(|p| p.y.contains(mid)) {
                let s = p.x_at(mid);
                events.push((s.lo, g, 1));
                events.push((s.hi, g, -1));
            }
        }
        let mut cuts: Vec<Dyadic> = events.iter().map(|e| e.0).collect();
        if let Some((cx, _)) = clip {
            cuts.push(cx.lo);
            cuts.push(cx.hi);
        }
        cuts.sort();
        cuts.dedup();
        events.sort();
        let mut counts = vec![0i32; groups.len()];
        let mut e = 0;
        for c in cuts.windows(2) {
            while e < events.len() && events[e].0 <= c[0] {
                counts[events[e].1] += events[e].2;
                e += 1;
            }
            let seg = Interval::new(c[0], c[1]);
            if let Some((cx, _)) = clip {
                if !cx.contains_interval(&seg) {
                    continue;
                }
            }
            out.push(SweepCell { y: slab, mid_y: mid, x: seg, counts: counts.iter().map(|&c| c as u32).collect() });
        }
    }
    out
}

/// Multiplicity range of a family over a box (`(0, 0)` for an empty box).
pub fn multiplicity(pieces: &[Piece], window: (Interval, Interval)) -> (u32, u32, Option<(Dyadic, Dyadic)>) {
    let cells = sweep(&[pieces], Some(window));
    let mut lo = u32::MAX;
    let mut hi = 0;
    let mut witness = None;
    for c in &cells {
        lo = lo.min(c.counts[0]);
        hi = hi.max(c.counts[0]);
        if c.counts[0] != 1 && witness.is_none() {
            witness = Some((c.x.midpoint(), c.mid_y));
        }
    }
    if cells.is_empty() {
        (0, 0, None)
    } else {
        (lo, hi, witness)
    }
}

/// `⋃a ⊂ ⋃b` up to measure zero.
pub fn contained(a: &[Piece], b: &[Piece]) -> bool {
    sweep(&[a, b], None).iter().all(|c| c.counts[0] == 0 || c.counts[1] > 0)
}

/// Total area of the union of the pieces.
pub fn union_area(pieces: &[Piece]) -> Dyadic {
    sweep(&[pieces], None)
        .iter()
        .filter(|c| c.counts[0] > 0)
        .map(|c| c.x.len() * c.y.len())
        .sum()
}
