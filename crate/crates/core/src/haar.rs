//! The Euclidean Haar systems B1, B2, B3 on a `2m`-axis torus.
//!
//! B1 is the tensor product of Haar systems on the first `m` and last `m` axes. B2 and B3
//! are its pullbacks `h ∘ T2`, `h ∘ T3`. On a torus each factor also carries its scaling
//! level (`level = -1`, `ε = 0`, the normalized constant), so each system is an
//! orthonormal basis of the mean-zero signals.
//!
//! Cube levels are grid-relative: level `ℓ ≥ 0` cubes have side `2^{L−ℓ}`, i.e. dyadic
//! scale `k = ℓ − L` in the `2^{-k}` convention.

use std::fmt::Write as _;

use crate::dyadic::Scalar;
use crate::error::{Error, Result};
use crate::grid::{GridSignal, TorusGrid};
use crate::shear::{PullbackOperator, ShearKind, ShearMap};
use crate::tensor::{Factor, FactorIndex, ScaleWindow, TensorCoefficients, TensorSystem};

/// A dyadic cube in one block of axes: grid-relative level and per-axis position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicCube {
    pub level: i32,
    pub pos: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HaarIndex {
    pub system: u8,
    pub cube_i: DyadicCube,
    pub cube_j: DyadicCube,
    pub eps: (u32, u32),
}

/// The three Euclidean systems on one grid.
#[derive(Clone, Debug)]
pub struct Euclid {
    grid: TorusGrid,
    m: usize,
    systems: Vec<TensorSystem>,
    pullbacks: Vec<PullbackOperator>,
}

impl Euclid {
    /// Needs `2m` identical axes.
    pub fn new(grid: &TorusGrid) -> Result<Self> {
        let n = grid.dim();
        if n % 2 != 0 || grid.axes().iter().any(|a| *a != grid.axis(0)) {
            return Err(Error::IncompatibleGrid("Euclidean systems need 2m identical axes".into()));
        }
        let m = n / 2;
        let factors = vec![Factor::dyadic(0..m), Factor::dyadic(m..n)];
        let t2 = ShearMap::new(ShearKind::T2, grid)?;
        let t3 = ShearMap::new(ShearKind::T3, grid)?;
        let systems = vec![
            TensorSystem::new(grid, factors.clone(), None)?,
            TensorSystem::new(grid, factors.clone(), Some(&t2))?,
            TensorSystem::new(grid, factors, Some(&t3))?,
        ];
        let pullbacks = vec![t2.pullback_operator(), t3.pullback_operator()];
        Ok(Euclid { grid: grid.clone(), m, systems, pullbacks })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of Haar levels per block (`L + K`).
    pub fn levels(&self) -> u32 {
        self.systems[0].levels(0)
    }

    pub fn system(&self, i: u8) -> Result<&TensorSystem> {
        match i {
            1..=3 => Ok(&self.systems[i as usize - 1]),
            _ => Err(Error::Parse(format!("system must be 1, 2 or 3, got {i}"))),
        }
    }

    /// `U_i` for `i = 2, 3`.
    pub fn pullback(&self, i: u8) -> Result<&PullbackOperator> {
        match i {
            2 | 3 => Ok(&self.pullbacks[i as usize - 2]),
            _ => Err(Error::Parse(format!("no shear for system {i}"))),
        }
    }

    pub fn full_window(&self) -> ScaleWindow {
        self.systems[0].full_window()
    }

    /// Converts a grid-relative level to the `2^{-k}` scale `k`, `None` for the scaling level.
    pub fn scale_index(&self, level: i32) -> Option<i32> {
        (level >= 0).then(|| level - self.grid.axis(0).extent_exp)
    }

    fn to_factor_index(&self, idx: &HaarIndex) -> Result<Vec<FactorIndex>> {
        let sys = self.system(idx.system)?;
        let fi = |f: usize, cube: &DyadicCube, eps: u32| -> Result<FactorIndex> {
            let atom = sys.atom_from_positions(f, cube.level, &cube.pos)?;
            Ok(FactorIndex { level: cube.level, atom, eps })
        };
        let out = vec![fi(0, &idx.cube_i, idx.eps.0)?, fi(1, &idx.cube_j, idx.eps.1)?];
        sys.validate_index(&out)?;
        Ok(out)
    }

    fn from_factor_index(&self, system: u8, idx: &[FactorIndex]) -> HaarIndex {
        let sys = &self.systems[system as usize - 1];
        let cube = |f: usize| DyadicCube { level: idx[f].level, pos: sys.atom_positions(f, idx[f].level, idx[f].atom) };
        HaarIndex { system, cube_i: cube(0), cube_j: cube(1), eps: (idx[0].eps, idx[1].eps) }
    }

    pub fn haar_signal<S: Scalar>(&self, idx: &HaarIndex) -> Result<GridSignal<S>> {
        let fi = self.to_factor_index(idx)?;
        self.system(idx.system)?.haar_signal(&fi)
    }

    /// `⟨f, h_idx⟩` by direct summation.
    pub fn coefficient<S: Scalar>(&self, f: &GridSignal<S>, idx: &HaarIndex) -> Result<S> {
        f.inner_product(&self.haar_signal(idx)?)
    }

    pub fn analyze<S: Scalar>(&self, f: &GridSignal<S>, system: u8, window: &ScaleWindow) -> Result<HaarCoefficients<S>> {
        let sys = self.system(system)?;
        check_window(sys, window)?;
        let coeffs = sys.analyze(f)?.restricted(sys, window);
        Ok(HaarCoefficients { system, window: window.clone(), coeffs })
    }

    pub fn synthesize<S: Scalar>(&self, coeffs: &HaarCoefficients<S>) -> Result<GridSignal<S>> {
        self.system(coeffs.system)?.synthesize(&coeffs.coeffs)
    }

    /// Enumerates every Haar index of a system in deterministic order.
    pub fn indices(&self, system: u8) -> Result<Vec<HaarIndex>> {
        let sys = self.system(system)?;
        Ok(sys.indices().map(|fi| self.from_factor_index(system, &fi)).collect())
    }

    /// Energy over the three systems and the averaged reconstruction.
    pub fn frame_apply<S: Scalar>(&self, f: &GridSignal<S>, window: &ScaleWindow) -> Result<FrameResult<S>> {
        let mut per_system = Vec::with_capacity(3);
        let mut triple = GridSignal::zeros(&self.grid);
        for i in 1..=3 {
            let c = self.analyze(f, i, window)?;
            per_system.push(c.coeffs.energy());
            triple = triple.add(&self.synthesize(&c)?)?;
        }
        Ok(FrameResult::new(per_system, triple, *window == self.full_window()))
    }
}

pub(crate) fn check_window(sys: &TensorSystem, window: &ScaleWindow) -> Result<()> {
    let full = sys.full_window();
    let ok = window.lo.len() == full.lo.len()
        && window.lo.iter().zip(&full.lo).all(|(a, b)| a >= b)
        && window.hi.iter().zip(&full.hi).all(|(a, b)| a <= b);
    if ok {
        Ok(())
    } else {
        Err(Error::Scale(format!("window {:?}..{:?} exceeds {:?}..{:?}", window.lo, window.hi, full.lo, full.hi)))
    }
}

/// Result of a three-system frame expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult<S> {
    pub energy: S,
    pub per_system: Vec<S>,
    /// `Σ_i Σ ⟨f,h⟩h`, three times the reconstruction.
    pub triple_sum: GridSignal<S>,
    /// `triple_sum / 3`, when that division stays inside the number ring.
    pub reconstruction: Option<GridSignal<S>>,
    /// `false` for a partial scale window, where no frame identity is claimed.
    pub full_window: bool,
}

impl<S: Scalar> FrameResult<S> {
    pub(crate) fn new(per_system: Vec<S>, triple_sum: GridSignal<S>, full_window: bool) -> Self {
        let mut energy = S::zero();
        for &e in &per_system {
            energy += e;
        }
        let divided: Option<Vec<S>> = triple_sum.values().iter().map(|v| v.div_exact(3)).collect();
        let reconstruction = divided.map(|v| GridSignal::from_values(triple_sum.grid(), v).expect("same grid"));
        FrameResult { energy, per_system, triple_sum, reconstruction, full_window }
    }
}

/// Coefficients of one system inside a scale window.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarCoefficients<S> {
    pub system: u8,
    pub window: ScaleWindow,
    pub coeffs: TensorCoefficients<S>,
}

impl<S: Scalar> HaarCoefficients<S> {
    pub fn empty(euclid: &Euclid, system: u8) -> Result<Self> {
        let sys = euclid.system(system)?;
        Ok(HaarCoefficients { system, window: sys.full_window(), coeffs: TensorCoefficients::zeros(sys) })
    }

    pub fn get(&self, euclid: &Euclid, idx: &HaarIndex) -> Result<S> {
        let fi = euclid.to_factor_index(idx)?;
        Ok(self.coeffs.get(euclid.system(self.system)?, &fi))
    }

    pub fn set(&mut self, euclid: &Euclid, idx: &HaarIndex, v: S) -> Result<()> {
        let fi = euclid.to_factor_index(idx)?;
        self.coeffs.set(euclid.system(self.system)?, &fi, v)
    }

    pub fn energy(&self) -> S {
        self.coeffs.energy()
    }

    /// Entries inside the window, in deterministic order.
    pub fn entries(&self, euclid: &Euclid) -> Vec<(HaarIndex, S)> {
        let sys = &euclid.systems[self.system as usize - 1];
        self.coeffs
            .iter(sys)
            .filter(|(fi, _)| self.window.contains(&fi.iter().map(|i| i.level).collect::<Vec<_>>()))
            .map(|(fi, v)| (euclid.from_factor_index(self.system, &fi), v))
            .collect()
    }

    /// `THC1` text encoding.
    pub fn to_thc1(&self, euclid: &Euclid) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "THC1");
        let _ = writeln!(out, "system: {}", self.system);
        let _ = writeln!(out, "grid: {}", euclid.grid);
        let _ = writeln!(out, "scaleRange: {}", format_window(&self.window));
        for (idx, v) in self.entries(euclid) {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                idx.cube_i.level,
                idx.cube_j.level,
                join(&idx.cube_i.pos),
                join(&idx.cube_j.pos),
                idx.eps.0,
                idx.eps.1,
                format_value(&v)
            );
        }
        out
    }

    pub fn from_thc1(text: &str) -> Result<(Euclid, Self)> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some("THC1") {
            return Err(Error::Parse("missing THC1 magic line".into()));
        }
        let system: u8 = header(lines.next(), "system:")?.parse().map_err(|_| Error::Parse("bad system".into()))?;
        let grid = TorusGrid::parse_spec(&header(lines.next(), "grid:")?)?;
        let window = parse_window(&header(lines.next(), "scaleRange:")?)?;
        let euclid = Euclid::new(&grid)?;
        let mut coeffs = HaarCoefficients::empty(&euclid, system)?;
        coeffs.window = window;
        for line in lines {
            let tok: Vec<&str> = line.splitn(7, ' ').collect();
            if tok.len() != 7 {
                return Err(Error::Parse(format!("short coefficient line `{line}`")));
            }
            let int = |s: &str| s.parse::<i64>().map_err(|_| Error::Parse(format!("bad integer `{s}`")));
            let idx = HaarIndex {
                system,
                cube_i: DyadicCube { level: int(tok[0])? as i32, pos: split_pos(tok[2])? },
                cube_j: DyadicCube { level: int(tok[1])? as i32, pos: split_pos(tok[3])? },
                eps: (int(tok[4])? as u32, int(tok[5])? as u32),
            };
            coeffs.set(&euclid, &idx, S::parse_value(tok[6])?)?;
        }
        Ok((euclid, coeffs))
    }
}

pub(crate) fn header(line: Option<&str>, key: &str) -> Result<String> {
    line.and_then(|l| l.strip_prefix(key))
        .map(|v| v.trim().to_string())
        .ok_or_else(|| Error::Parse(format!("expected `{key}` header")))
}

pub(crate) fn join(pos: &[u64]) -> String {
    if pos.is_empty() {
        return "-".into();
    }
    pos.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

pub(crate) fn split_pos(s: &str) -> Result<Vec<u64>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| p.parse().map_err(|_| Error::Parse(format!("bad position `{s}`")))).collect()
}

pub(crate) fn format_value<S: Scalar>(v: &S) -> String {
    if S::EXACT {
        v.to_string()
    } else {
        format!("{:e}", v.to_f64())
    }
}

pub(crate) fn format_window(w: &ScaleWindow) -> String {
    w.lo.iter().zip(&w.hi).map(|(a, b)| format!("{a}..{b}")).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_window(s: &str) -> Result<ScaleWindow> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (a, b) = part.split_once("..").ok_or_else(|| Error::Parse(format!("bad range `{part}`")))?;
        lo.push(a.trim().parse().map_err(|_| Error::Parse(format!("bad range `{part}`")))?);
        hi.push(b.trim().parse().map_err(|_| Error::Parse(format!("bad range `{part}`")))?);
    }
    Ok(ScaleWindow { lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{Dyadic, RootDyadic};
    use crate::grid::{random_signal, ExactSignal, Law};

    fn one() -> RootDyadic {
        RootDyadic::from(Dyadic::ONE)
    }

    fn euclid(res: i32) -> Euclid {
        Euclid::new(&TorusGrid::uniform(2, 0, res).unwrap()).unwrap()
    }

    fn top(system: u8) -> HaarIndex {
        let c = DyadicCube { level: 0, pos: vec![0] };
        HaarIndex { system, cube_i: c.clone(), cube_j: c, eps: (1, 1) }
    }

    /// Standard Haar value from real coordinates: cube side `2^{-level}` on `[0,1)`.
    fn haar_1d(x: Dyadic, level: i32, pos: u64, eps: u32) -> RootDyadic {
        if level < 0 {
            return one();
        }
        let side = Dyadic::pow2(-level);
        let lo = Dyadic::from_int(pos as i64) * side;
        if x < lo || x >= lo + side {
            return RootDyadic::ZERO;
        }
        let upper = x >= lo + side.mul_pow2(-1);
        let amp = RootDyadic::pow2_half(level as i64);
        if eps == 1 && upper {
            -amp
        } else {
            amp
        }
    }

    #[test]
    fn four_quadrant_pattern() {
        let e = euclid(3);
        let h: ExactSignal = e.haar_signal(&top(1)).unwrap();
        for c in 0..64 {
            let xy = e.grid().coords(c);
            let s = if (xy[0] < 4) == (xy[1] < 4) { one() } else { -one() };
            assert_eq!(h.get(c), s);
        }
        assert_eq!(h.norm_sq(), one());
    }

    #[test]
    fn system_two_is_composition_with_shear() {
        let e = euclid(3);
        let t2 = ShearMap::new(ShearKind::T2, e.grid()).unwrap();
        for idx in e.indices(2).unwrap().into_iter().step_by(7) {
            let h: ExactSignal = e.haar_signal(&idx).unwrap();
            for c in 0..e.grid().len() {
                let y = t2.apply(&e.grid().anchor(c)).unwrap();
                let direct = haar_1d(y[0], idx.cube_i.level, idx.cube_i.pos[0], idx.eps.0)
                    * haar_1d(y[1], idx.cube_j.level, idx.cube_j.pos[0], idx.eps.1);
                assert_eq!(h.get(c), direct);
            }
            let mut h1idx = idx.clone();
            h1idx.system = 1;
            let h1: ExactSignal = e.haar_signal(&h1idx).unwrap();
            assert_eq!(h, e.pullback(2).unwrap().apply(&h1).unwrap());
        }
    }

    #[test]
    fn slanted_support_and_cancellation() {
        let e = euclid(3);
        let t2 = ShearMap::new(ShearKind::T2, e.grid()).unwrap();
        let idx = HaarIndex {
            system: 2,
            cube_i: DyadicCube { level: 1, pos: vec![1] },
            cube_j: DyadicCube { level: 2, pos: vec![2] },
            eps: (1, 1),
        };
        let h: ExactSignal = e.haar_signal(&idx).unwrap();
        let mut support = 0;
        for c in 0..64 {
            let y = t2.apply(&e.grid().anchor(c)).unwrap();
            let in_i = y[0] >= Dyadic::new(1, -1) && y[0] < Dyadic::ONE;
            let in_j = y[1] >= Dyadic::new(1, -1) && y[1] < Dyadic::new(3, -2);
            assert_eq!(!h.get(c).is_zero(), in_i && in_j);
            support += usize::from(in_i && in_j);
        }
        // |I||J| = 1/2 · 1/4 = 8 cells of volume 1/64.
        assert_eq!(support, 8);
        // Cancellation along rectified fibers: fixed v = x2 (sum over u), fixed u = x1 − x2.
        for v in 0..8u64 {
            let mut s = RootDyadic::ZERO;
            for u in 0..8u64 {
                s += h.get(e.grid().index(&[(u + v) % 8, v]));
            }
            assert!(s.is_zero());
        }
        for u in 0..8u64 {
            let mut s = RootDyadic::ZERO;
            for v in 0..8u64 {
                s += h.get(e.grid().index(&[(u + v) % 8, v]));
            }
            assert!(s.is_zero());
        }
    }

    #[test]
    fn coefficient_examples() {
        let e = euclid(3);
        let c = GridSignal::constant(e.grid(), one());
        for idx in e.indices(3).unwrap().into_iter().step_by(5) {
            assert!(e.coefficient(&c, &idx).unwrap().is_zero());
            let h: ExactSignal = e.haar_signal(&idx).unwrap();
            assert_eq!(e.coefficient(&h, &idx).unwrap(), one());
        }
        let f = random_signal(e.grid(), 4, Law::Uniform);
        let idx = top(1);
        let mut direct = RootDyadic::ZERO;
        let h: ExactSignal = e.haar_signal(&idx).unwrap();
        for cell in 0..64 {
            direct += f.get(cell) * h.get(cell) * RootDyadic::from(Dyadic::pow2(-6));
        }
        assert_eq!(e.coefficient(&f, &idx).unwrap(), direct);
    }

    #[test]
    fn analyze_matches_brute_force_and_parseval() {
        let e = euclid(2);
        let f = random_signal(e.grid(), 21, Law::Uniform);
        for i in 1..=3 {
            let coeffs = e.analyze(&f, i, &e.full_window()).unwrap();
            for (idx, v) in coeffs.entries(&e) {
                assert_eq!(v, e.coefficient(&f, &idx).unwrap());
            }
            assert_eq!(coeffs.energy(), f.centered().norm_sq());
            assert_eq!(e.synthesize(&coeffs).unwrap(), f.centered());
        }
        // System 2 of f is system 1 of U2* f, index for index.
        let c2 = e.analyze(&f, 2, &e.full_window()).unwrap();
        let g = e.pullback(2).unwrap().adjoint(&f).unwrap();
        let c1 = e.analyze(&g, 1, &e.full_window()).unwrap();
        for ((i2, v2), (i1, v1)) in c2.entries(&e).into_iter().zip(c1.entries(&e)) {
            assert_eq!((i2.cube_i, i2.cube_j, i2.eps), (i1.cube_i, i1.cube_j, i1.eps));
            assert_eq!(v2, v1);
        }
    }

    #[test]
    fn single_element_analysis_and_synthesis() {
        let e = euclid(3);
        let idx = e.indices(1).unwrap()[17].clone();
        let h: ExactSignal = e.haar_signal(&idx).unwrap();
        let coeffs = e.analyze(&h, 1, &e.full_window()).unwrap();
        let nonzero: Vec<_> = coeffs.entries(&e).into_iter().filter(|(_, v)| !v.is_zero()).collect();
        assert_eq!(nonzero, vec![(idx.clone(), one())]);

        let mut single = HaarCoefficients::<RootDyadic>::empty(&e, 1).unwrap();
        let c = RootDyadic::from(Dyadic::new(3, -2));
        single.set(&e, &idx, c).unwrap();
        assert_eq!(e.synthesize(&single).unwrap(), h.scale(c));
        let empty = HaarCoefficients::<RootDyadic>::empty(&e, 1).unwrap();
        assert!(e.synthesize(&empty).unwrap().is_zero());
    }

    #[test]
    fn frame_examples() {
        let e = euclid(3);
        let f = random_signal(e.grid(), 2, Law::Uniform).centered();
        let r = e.frame_apply(&f, &e.full_window()).unwrap();
        assert_eq!(r.energy, f.norm_sq() * RootDyadic::from(Dyadic::from_int(3)));
        assert_eq!(r.reconstruction.unwrap(), f);

        let zero = GridSignal::<RootDyadic>::zeros(e.grid());
        let r = e.frame_apply(&zero, &e.full_window()).unwrap();
        assert!(r.energy.is_zero() && r.reconstruction.unwrap().is_zero());

        let h: ExactSignal = e.haar_signal(&e.indices(1).unwrap()[40]).unwrap();
        let r = e.frame_apply(&h, &e.full_window()).unwrap();
        assert_eq!(r.per_system, vec![one(), one(), one()]);

        let partial = ScaleWindow { lo: vec![0, 0], hi: vec![1, 1] };
        assert!(!e.frame_apply(&f, &partial).unwrap().full_window);
    }

    #[test]
    fn scale_index_orientation() {
        let e = Euclid::new(&TorusGrid::uniform(2, 1, 2).unwrap()).unwrap();
        assert_eq!(e.levels(), 3);
        assert_eq!(e.scale_index(0), Some(-1));
        assert_eq!(e.scale_index(-1), None);
    }

    #[test]
    fn thc1_round_trip() {
        let e = euclid(2);
        let f = random_signal(e.grid(), 9, Law::Uniform);
        let coeffs = e.analyze(&f, 3, &e.full_window()).unwrap();
        let (e2, back) = HaarCoefficients::<RootDyadic>::from_thc1(&coeffs.to_thc1(&e)).unwrap();
        assert_eq!(back, coeffs);
        assert_eq!(e2.synthesize(&back).unwrap(), f.centered());
    }
}
