//! Regions fibered over a product of dyadic spatial boxes.

use std::fmt::Write as _;

use super::{contained, merge_pieces, Frame, Interval, Piece};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// A box `origin + [0, 2^side_exp)^d` cut into cubes of side `2^cell_exp`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpatialBlock {
    pub d: usize,
    pub origin: Vec<Dyadic>,
    pub side_exp: i32,
    pub cell_exp: i32,
}

impl SpatialBlock {
    pub fn new(d: usize, side_exp: i32, cell_exp: i32) -> Self {
        SpatialBlock { d, origin: vec![Dyadic::ZERO; d], side_exp, cell_exp }
    }

    pub fn cells_per_axis(&self) -> u64 {
        1u64 << (self.side_exp - self.cell_exp)
    }

    pub fn num_cells(&self) -> usize {
        (self.cells_per_axis() as usize).pow(self.d as u32)
    }

    /// Per-axis cell indices of a flat cell number, axis 0 slowest.
    pub fn cell_indices(&self, flat: usize) -> Vec<u64> {
        let n = self.cells_per_axis();
        let mut out = vec![0; self.d];
        let mut r = flat as u64;
        for a in (0..self.d).rev() {
            out[a] = r % n;
            r /= n;
        }
        out
    }

    pub fn cell_box(&self, flat: usize) -> Vec<Interval> {
        let side = Dyadic::pow2(self.cell_exp);
        self.cell_indices(flat)
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| Interval::from_len(o + side * Dyadic::from_int(i as i64), side))
            .collect()
    }

    pub fn bounds(&self) -> Vec<Interval> {
        self.origin.iter().map(|&o| Interval::from_len(o, Dyadic::pow2(self.side_exp))).collect()
    }

    pub fn translate(&self, by: Dyadic) -> Self {
        SpatialBlock { origin: self.origin.iter().map(|&o| o + by).collect(), ..self.clone() }
    }
}

/// Anything with an exact measure that can sit in a central fiber.
pub trait CentralPiece: Clone {
    fn measure(&self) -> Dyadic;
}

impl CentralPiece for Interval {
    fn measure(&self) -> Dyadic {
        self.len()
    }
}

impl CentralPiece for Piece {
    fn measure(&self) -> Dyadic {
        self.area()
    }
}

/// A region given by a spatial product of blocks and, per spatial cell, a list of disjoint
/// central pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberedRegion<P> {
    pub frame: Frame,
    pub blocks: Vec<SpatialBlock>,
    /// Indexed by flat spatial cell, block 0 slowest.
    pub fibers: Vec<Vec<P>>,
}

impl<P: CentralPiece> FiberedRegion<P> {
    pub fn num_cells(&self) -> usize {
        self.blocks.iter().map(SpatialBlock::num_cells).product()
    }

    /// Per-block cell numbers of a flat cell.
    pub fn cell_parts(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.blocks.len()];
        let mut r = flat;
        for (b, block) in self.blocks.iter().enumerate().rev() {
            out[b] = r % block.num_cells();
            r /= block.num_cells();
        }
        out
    }

    pub fn flat_cell(&self, parts: &[usize]) -> usize {
        self.blocks.iter().zip(parts).fold(0, |acc, (b, &p)| acc * b.num_cells() + p)
    }

    pub fn cell_volume(&self) -> Dyadic {
        Dyadic::pow2(self.blocks.iter().map(|b| b.cell_exp * b.d as i32).sum())
    }

    pub fn volume(&self) -> Dyadic {
        let fibers: Dyadic = self.fibers.iter().flat_map(|f| f.iter().map(CentralPiece::measure)).sum();
        fibers * self.cell_volume()
    }

    pub fn fiber(&self, flat: usize) -> &[P] {
        &self.fibers[flat]
    }

    /// Spatial box of a cell, block by block.
    pub fn cell_box(&self, flat: usize) -> Vec<Vec<Interval>> {
        self.cell_parts(flat).iter().zip(&self.blocks).map(|(&c, b)| b.cell_box(c)).collect()
    }
}

impl FiberedRegion<Piece> {
    pub fn merged(&self) -> Self {
        FiberedRegion { fibers: self.fibers.iter().map(|f| merge_pieces(f)).collect(), ..self.clone() }
    }

    pub fn to_frame(&self, frame: Frame) -> Result<Self> {
        let fibers = self
            .fibers
            .iter()
            .map(|f| f.iter().map(|p| p.reframe(self.frame, frame)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(FiberedRegion { frame, blocks: self.blocks.clone(), fibers })
    }

    /// Translates spatially (the same amount on every axis of a block) and centrally.
    pub fn translate(&self, spatial: &[Dyadic], central: (Dyadic, Dyadic)) -> Self {
        FiberedRegion {
            frame: self.frame,
            blocks: self.blocks.iter().zip(spatial).map(|(b, &s)| b.translate(s)).collect(),
            fibers: self.fibers.iter().map(|f| f.iter().map(|p| p.translate(central.0, central.1)).collect()).collect(),
        }
    }

    /// `self ⊂ other` up to measure zero; both must use the same frame and block layout.
    pub fn contained_in(&self, other: &Self) -> bool {
        if self.frame != other.frame || self.blocks.len() != other.blocks.len() {
            return false;
        }
        let inside = self.blocks.iter().zip(&other.blocks).all(|(a, b)| {
            a.d == b.d && a.bounds().iter().zip(b.bounds()).all(|(x, y)| y.contains_interval(x))
        });
        if !inside {
            return false;
        }
        (0..self.num_cells()).all(|ca| {
            let abox = self.cell_box(ca);
            (0..other.num_cells()).all(|cb| {
                let overlap = abox
                    .iter()
                    .zip(other.cell_box(cb))
                    .all(|(xa, xb)| xa.iter().zip(&xb).all(|(p, q)| p.overlaps(q)));
                !overlap || contained(&self.fibers[ca], &other.fibers[cb])
            })
        })
    }

    /// Centers of the spatial boxes and of the bounding box of all central pieces.
    pub fn center(&self) -> (Vec<Dyadic>, (Dyadic, Dyadic)) {
        let spatial = self.blocks.iter().map(|b| b.bounds()[0].midpoint()).collect();
        let mut bb: Option<(Interval, Interval)> = None;
        for p in self.fibers.iter().flatten() {
            let (x, y) = p.bbox();
            bb = Some(match bb {
                None => (x, y),
                Some((bx, by)) => (
                    Interval::new(bx.lo.min(x.lo), bx.hi.max(x.hi)),
                    Interval::new(by.lo.min(y.lo), by.hi.max(y.hi)),
                ),
            });
        }
        let (bx, by) = bb.unwrap_or((Interval::new(Dyadic::ZERO, Dyadic::ZERO), Interval::new(Dyadic::ZERO, Dyadic::ZERO)));
        (spatial, (bx.midpoint(), by.midpoint()))
    }

    /// Parabolic dilation by `2^e` about `center`: spatial lengths scale by `2^e`, central
    /// ones by `2^{2e}`. Assumes every axis of a block shares one center coordinate.
    pub fn dilate(&self, center: &(Vec<Dyadic>, (Dyadic, Dyadic)), e: i32) -> Self {
        let blocks = self
            .blocks
            .iter()
            .zip(&center.0)
            .map(|(b, &c)| SpatialBlock {
                d: b.d,
                origin: b.origin.iter().map(|&o| c + (o - c).mul_pow2(e)).collect(),
                side_exp: b.side_exp + e,
                cell_exp: b.cell_exp + e,
            })
            .collect();
        let fibers = self.fibers.iter().map(|f| f.iter().map(|p| p.dilate(center.1, 2 * e)).collect()).collect();
        FiberedRegion { frame: self.frame, blocks, fibers }
    }

    /// Exchanges the first two spatial blocks and the two central coordinates.
    pub fn swap_factors(&self) -> Result<Self> {
        let frame = match self.frame {
            Frame::T => Frame::TSwapped,
            Frame::TSwapped => Frame::T,
            other => return Err(Error::Regime(format!("cannot exchange factors in the {other} frame"))),
        };
        let mut blocks = self.blocks.clone();
        blocks.swap(0, 1);
        let mut out = FiberedRegion { frame, blocks, fibers: vec![Vec::new(); self.num_cells()] };
        for flat in 0..self.num_cells() {
            let mut parts = self.cell_parts(flat);
            parts.swap(0, 1);
            let target = out.flat_cell(&parts);
            out.fibers[target] = merge_pieces(
                &self.fibers[flat].iter().map(|p| p.reframe(self.frame, frame)).collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(out)
    }

    /// `FBR1` text encoding; endpoints are written as `mantissa:exponent`.
    pub fn to_fbr1(&self) -> String {
        let mut out = String::from("FBR1\n");
        let _ = writeln!(out, "frame: {}", self.frame);
        let _ = writeln!(out, "blocks: {}", self.blocks.len());
        for b in &self.blocks {
            let origin: Vec<String> = b.origin.iter().map(tok).collect();
            let _ = writeln!(out, "block {} {} {} {}", b.d, b.side_exp, b.cell_exp, origin.join(" "));
        }
        for (flat, fiber) in self.fibers.iter().enumerate() {
            let _ = writeln!(out, "cell {flat} {}", fiber.len());
            for p in fiber {
                let _ = writeln!(out, "piece {} {} {} {} {}", p.slope, tok(&p.x.lo), tok(&p.x.hi), tok(&p.y.lo), tok(&p.y.hi));
            }
        }
        out
    }

    pub fn from_fbr1(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("FBR1") {
            return Err(Error::Parse("missing FBR1 magic line".into()));
        }
        let frame: Frame = crate::haar::header(lines.next(), "frame:")?.parse()?;
        let nblocks: usize = num(&crate::haar::header(lines.next(), "blocks:")?)?;
        let mut blocks = Vec::with_capacity(nblocks);
        for _ in 0..nblocks {
            let line = lines.next().ok_or_else(|| Error::Parse("missing block line".into()))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() < 4 || t[0] != "block" {
                return Err(Error::Parse(format!("bad block line `{line}`")));
            }
            let d: usize = num(t[1])?;
            let origin = t[4..].iter().map(|s| untok(s)).collect::<Result<Vec<_>>>()?;
            if origin.len() != d {
                return Err(Error::Parse(format!("block origin needs {d} entries")));
            }
            blocks.push(SpatialBlock { d, origin, side_exp: num(t[2])?, cell_exp: num(t[3])? });
        }
        let mut region = FiberedRegion { frame, blocks, fibers: Vec::new() };
        region.fibers = vec![Vec::new(); region.num_cells()];
        let mut current: Option<usize> = None;
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.first() {
                Some(&"cell") if t.len() == 3 => {
                    let flat: usize = num(t[1])?;
                    if flat >= region.fibers.len() {
                        return Err(Error::Parse(format!("cell {flat} out of range")));
                    }
                    current = Some(flat);
                }
                Some(&"piece") if t.len() == 6 => {
                    let cell = current.ok_or_else(|| Error::Parse("piece before any cell".into()))?;
                    let slope: i8 = num(t[1])?;
                    let x = Interval::new(untok(t[2])?, untok(t[3])?);
                    let y = Interval::new(untok(t[4])?, untok(t[5])?);
                    region.fibers[cell].push(Piece { x, y, slope });
                }
                _ => return Err(Error::Parse(format!("bad FBR1 line `{line}`"))),
            }
        }
        Ok(region)
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

fn tok(d: &Dyadic) -> String {
    format!("{}:{}", d.mantissa(), d.exponent())
}

fn untok(s: &str) -> Result<Dyadic> {
    let (m, e) = s.split_once(':').ok_or_else(|| Error::Parse(format!("bad endpoint `{s}`")))?;
    Ok(Dyadic::new(num(m)?, num(e)?))
}
