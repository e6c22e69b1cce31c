//! Plot data: polygon lists as CSV with a bare-bones SVG rendering of the same polygons.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use twisted_haar::geometry::{raw_shard, stacked_tile, Case, Interval, Piece};
use twisted_haar::{Dyadic, ShearKind, ShearMap, TorusGrid};

use crate::config::RunConfig;

/// A closed polygon tagged with the group it belongs to (system, case, shard, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub group: String,
    pub points: Vec<(Dyadic, Dyadic)>,
}

impl Polygon {
    fn rect(group: impl Into<String>, x: Interval, y: Interval) -> Self {
        Polygon { group: group.into(), points: vec![(x.lo, y.lo), (x.hi, y.lo), (x.hi, y.hi), (x.lo, y.hi)] }
    }

    /// Vertices of `{y ∈ Y, x + s·y ∈ X}`.
    fn piece(group: impl Into<String>, p: &Piece) -> Self {
        let s = Dyadic::from_int(p.slope as i64);
        let at = |x: Dyadic, y: Dyadic| (x - s * y, y);
        Polygon {
            group: group.into(),
            points: vec![at(p.x.lo, p.y.lo), at(p.x.hi, p.y.lo), at(p.x.hi, p.y.hi), at(p.x.lo, p.y.hi)],
        }
    }
}

pub fn to_csv(polys: &[Polygon]) -> String {
    let mut out = String::from("group,polygon,vertex,x,y\n");
    for (i, p) in polys.iter().enumerate() {
        for (v, (x, y)) in p.points.iter().enumerate() {
            let _ = writeln!(out, "{},{i},{v},{},{}", p.group, x.to_f64(), y.to_f64());
        }
    }
    out
}

pub fn to_svg(polys: &[Polygon]) -> String {
    let pts = polys.iter().flat_map(|p| p.points.iter()).map(|(x, y)| (x.to_f64(), y.to_f64()));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let scale = 480.0 / (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let (w, h) = ((x1 - x0) * scale + 20.0, (y1 - y0) * scale + 20.0);
    let mut out = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.1}\" height=\"{h:.1}\">\n");
    let mut groups: Vec<&str> = Vec::new();
    for p in polys {
        if !groups.contains(&p.group.as_str()) {
            groups.push(&p.group);
        }
        let hue = groups.iter().position(|g| *g == p.group).unwrap_or(0) * 67 % 360;
        let points: Vec<String> = p
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", (x.to_f64() - x0) * scale + 10.0, h - 10.0 - (y.to_f64() - y0) * scale))
            .collect();
        let _ = writeln!(
            out,
            "  <polygon points=\"{}\" fill=\"hsl({hue},60%,75%)\" fill-opacity=\"0.5\" stroke=\"black\" stroke-width=\"0.5\"><title>{}</title></polygon>",
            points.join(" "),
            p.group
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Cells of Euclidean system `i` on a two-axis grid: preimages of the dyadic squares under
/// the system's shear (the identity for system 1).
pub fn euclid_cells(grid: &TorusGrid, system: u8) -> Result<Vec<Polygon>> {
    let kind = match system {
        1 => ShearKind::Identity,
        2 => ShearKind::T2,
        3 => ShearKind::T3,
        _ => anyhow::bail!("system must be 1, 2 or 3"),
    };
    let map = ShearMap::new(kind, grid)?;
    let inv = map.inverse_matrix();
    let mut out = Vec::new();
    for c in 0..grid.len() {
        let anchor = grid.anchor(c);
        let side: Vec<Dyadic> = (0..grid.dim()).map(|a| Dyadic::pow2(-grid.axis(a).res_exp)).collect();
        let corners = [(0, 0), (1, 0), (1, 1), (0, 1)];
        let points = corners
            .iter()
            .map(|&(a, b)| {
                let p = [anchor[0] + side[0] * Dyadic::from_int(a), anchor[1] + side[1] * Dyadic::from_int(b)];
                let img = |row: &[i64]| Dyadic::from_int(row[0]) * p[0] + Dyadic::from_int(row[1]) * p[1];
                (img(&inv[0]), img(&inv[1]))
            })
            .collect();
        out.push(Polygon { group: format!("system{system}"), points });
    }
    Ok(out)
}

/// Spatial cells of a stacked tile with their central intervals, as rectangles in the
/// `(x, t)` plane.
pub fn stacked_tile_cells(cfg: &RunConfig, j: i32) -> Result<Vec<Polygon>> {
    let spec = cfg.factor_specs()?[0].clone();
    let tile = stacked_tile(&spec, j)?;
    let mut out = Vec::new();
    for flat in 0..tile.num_cells() {
        let x = tile.cell_box(flat)[0][0];
        for t in tile.fiber(flat) {
            out.push(Polygon::rect(format!("cell{flat}"), x, *t));
        }
    }
    Ok(out)
}

/// Central `(t1, t2)` slice of a raw shard over its first spatial cell.
pub fn shard_slice(cfg: &RunConfig, case: Case, j: [i32; 3]) -> Result<Vec<Polygon>> {
    let shard = raw_shard(case, &cfg.factor_specs()?, j)?;
    let region = shard.region();
    Ok(region.fiber(0).iter().enumerate().map(|(i, p)| Polygon::piece(format!("piece{i}"), p)).collect())
}

/// Central slices of the type-3 analytic blocks: `Θ`-preimages of dyadic rectangles of size
/// `2^{2 j1 + κ} × 2^{2 j3 + κ}`.
pub fn theta_grid(j1: i32, j3: i32, kappa: i32, count: (i64, i64)) -> Vec<Polygon> {
    let (a, b) = (Dyadic::pow2(2 * j1 + kappa), Dyadic::pow2(2 * j3 + kappa));
    let mut out = Vec::new();
    for u in 0..count.0 {
        for v in 0..count.1 {
            let x = Interval::from_len(a * Dyadic::from_int(u), a);
            let y = Interval::from_len(b * Dyadic::from_int(v), b);
            out.push(Polygon::piece(format!("block{u}_{v}"), &Piece { x, y, slope: -1 }));
        }
    }
    out
}

fn write_pair(dir: &Path, name: &str, polys: &[Polygon]) -> Result<Vec<PathBuf>> {
    let csv = dir.join(format!("{name}.csv"));
    let svg = dir.join(format!("{name}.svg"));
    std::fs::write(&csv, to_csv(polys)).with_context(|| format!("writing {}", csv.display()))?;
    std::fs::write(&svg, to_svg(polys)).with_context(|| format!("writing {}", svg.display()))?;
    Ok(vec![csv, svg])
}

/// Writes every figure into `dir` and returns the file list.
pub fn write_all(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let grid = TorusGrid::parse_spec("0,2;0,2")?;
    let mut files = Vec::new();
    for i in 1..=3 {
        files.extend(write_pair(dir, &format!("euclid_system{i}"), &euclid_cells(&grid, i)?)?);
    }
    files.extend(write_pair(dir, "stacked_tile", &stacked_tile_cells(cfg, 2)?)?);
    for (case, j) in [(Case::I, [1, 0, -1]), (Case::II, [2, 0, 1]), (Case::III, [0, 0, 1])] {
        files.extend(write_pair(dir, &format!("shard_case{}", case.id()), &shard_slice(cfg, case, j)?)?);
    }
    files.extend(write_pair(dir, "type3_grid", &theta_grid(0, 1, cfg.kappa, (4, 2)))?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: i64) -> Dyadic {
        Dyadic::from_int(n)
    }

    #[test]
    fn identity_cells_are_squares() {
        let grid = TorusGrid::parse_spec("0,1;0,1").unwrap();
        let cells = euclid_cells(&grid, 1).unwrap();
        let h = Dyadic::new(1, -1);
        assert_eq!(cells[0].points, vec![(d(0), d(0)), (h, d(0)), (h, h), (d(0), h)]);
        assert_eq!(cells.len(), 4);
    }

    #[test]
    fn sheared_cells_are_inverse_images() {
        let grid = TorusGrid::parse_spec("0,1;0,1").unwrap();
        let map = ShearMap::new(ShearKind::T2, &grid).unwrap();
        for c in euclid_cells(&grid, 2).unwrap() {
            // Pushing the vertices forward recovers an axis-aligned square of side 1/2.
            let fwd: Vec<(Dyadic, Dyadic)> = c
                .points
                .iter()
                .map(|&(x, y)| {
                    let m = map.matrix();
                    (d(m[0][0]) * x + d(m[0][1]) * y, d(m[1][0]) * x + d(m[1][1]) * y)
                })
                .collect();
            assert_eq!(fwd[1].0 - fwd[0].0, Dyadic::new(1, -1));
            assert_eq!(fwd[1].1, fwd[0].1);
            assert_eq!(fwd[3].0, fwd[0].0);
            // The preimage itself is slanted.
            assert_ne!(c.points[3].0, c.points[0].0);
        }
    }

    #[test]
    fn case_three_slice_is_a_staircase() {
        let cfg = RunConfig { profile: "zero".into(), ..RunConfig::default() };
        let slice = shard_slice(&cfg, Case::III, [0, 0, 1]).unwrap();
        assert_eq!(slice.len(), 4);
        // Consecutive translates step up by 2 in t2 and by 2 in t1.
        let lows: Vec<(Dyadic, Dyadic)> = slice.iter().map(|p| p.points[0]).collect();
        for w in lows.windows(2) {
            assert_eq!((w[1].0 - w[0].0, w[1].1 - w[0].1), (d(2), d(2)));
        }
        let svg = to_svg(&slice);
        assert_eq!(svg.matches("<polygon").count(), 4);
    }

    #[test]
    fn theta_blocks_are_parallelograms() {
        let g = theta_grid(0, 1, 0, (1, 1));
        assert_eq!(g[0].points, vec![(d(0), d(0)), (d(1), d(0)), (d(5), d(4)), (d(4), d(4))]);
    }
}
