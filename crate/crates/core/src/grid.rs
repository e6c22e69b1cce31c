//! Finite dyadic tori and piecewise-constant signals on them.
//!
//! Axis `a` covers `[0, 2^{L_a})` with cells of width `2^{-K_a}`, so it has
//! `2^{L_a+K_a}` cells. Cells are stored row-major with axis 0 slowest; a cell is
//! identified with its lower-left anchor point, which is where shears are evaluated.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyadic::{Dyadic, RootDyadic, Scalar};
use crate::error::{Error, Result};

/// Largest supported grid, as a power of two.
pub const MAX_CELL_BITS: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AxisSpec {
    /// `L`: the axis is `[0, 2^L)`.
    pub extent_exp: i32,
    /// `K`: cells have width `2^{-K}`.
    pub res_exp: i32,
}

impl AxisSpec {
    pub fn new(extent_exp: i32, res_exp: i32) -> Self {
        AxisSpec { extent_exp, res_exp }
    }

    /// Number of cells as a power of two.
    pub fn bits(&self) -> u32 {
        (self.extent_exp + self.res_exp) as u32
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    axes: Vec<AxisSpec>,
    shifts: Vec<u32>,
}

impl TorusGrid {
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("a grid needs at least one axis".into()));
        }
        for (a, ax) in axes.iter().enumerate() {
            if ax.extent_exp + ax.res_exp < 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: L + K = {} is negative",
                    ax.extent_exp + ax.res_exp
                )));
            }
        }
        let total: u32 = axes.iter().map(AxisSpec::bits).sum();
        if total > MAX_CELL_BITS {
            return Err(Error::InvalidGrid(format!("2^{total} cells exceeds the 2^{MAX_CELL_BITS} cap")));
        }
        let mut shifts = vec![0; axes.len()];
        let mut acc = 0;
        for a in (0..axes.len()).rev() {
            shifts[a] = acc;
            acc += axes[a].bits();
        }
        Ok(TorusGrid { axes, shifts })
    }

    /// `n` identical axes.
    pub fn uniform(n: usize, extent_exp: i32, res_exp: i32) -> Result<Self> {
        TorusGrid::new(vec![AxisSpec::new(extent_exp, res_exp); n])
    }

    /// Parses `L,K;L,K;...`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let mut axes = Vec::new();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (l, k) = part
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("axis `{part}` is not `L,K`")))?;
            let parse = |s: &str| s.trim().parse::<i32>().map_err(|_| Error::Parse(format!("bad integer in `{part}`")));
            axes.push(AxisSpec::new(parse(l)?, parse(k)?));
        }
        TorusGrid::new(axes)
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> AxisSpec {
        self.axes[a]
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        1usize << self.total_bits()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total_bits(&self) -> u32 {
        self.axes.iter().map(AxisSpec::bits).sum()
    }

    pub fn axis_cells(&self, a: usize) -> u64 {
        1u64 << self.axes[a].bits()
    }

    /// Bit offset of axis `a` inside a cell index.
    pub fn shift(&self, a: usize) -> u32 {
        self.shifts[a]
    }

    /// `log2` of the cell volume.
    pub fn cell_volume_exp(&self) -> i32 {
        -self.axes.iter().map(|a| a.res_exp).sum::<i32>()
    }

    pub fn cell_volume(&self) -> Dyadic {
        Dyadic::pow2(self.cell_volume_exp())
    }

    /// `log2` of the torus volume.
    pub fn volume_exp(&self) -> i32 {
        self.axes.iter().map(|a| a.extent_exp).sum()
    }

    pub fn coord(&self, cell: usize, a: usize) -> u64 {
        ((cell >> self.shifts[a]) as u64) & (self.axis_cells(a) - 1)
    }

    pub fn coords(&self, cell: usize) -> Vec<u64> {
        (0..self.dim()).map(|a| self.coord(cell, a)).collect()
    }

    /// Cell index of integer coordinates, each reduced modulo its axis.
    pub fn index(&self, coords: &[u64]) -> usize {
        coords
            .iter()
            .enumerate()
            .map(|(a, &c)| ((c & (self.axis_cells(a) - 1)) as usize) << self.shifts[a])
            .sum()
    }

    /// Lower-left anchor of a cell in real coordinates.
    pub fn anchor(&self, cell: usize) -> Vec<Dyadic> {
        (0..self.dim())
            .map(|a| Dyadic::new(self.coord(cell, a) as i128, -self.axes[a].res_exp))
            .collect()
    }

    /// The cell containing a point, with coordinates reduced modulo the torus.
    pub fn cell_of(&self, point: &[Dyadic]) -> Result<usize> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: point.len() });
        }
        let coords: Vec<u64> = point
            .iter()
            .enumerate()
            .map(|(a, x)| {
                let i = x.mul_pow2(self.axes[a].res_exp).floor();
                i.rem_euclid(self.axis_cells(a) as i64) as u64
            })
            .collect();
        Ok(self.index(&coords))
    }
}

/// Formats as `L,K;L,K;...`.
impl fmt::Display for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.axes.iter().map(|a| format!("{},{}", a.extent_exp, a.res_exp)).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// A piecewise-constant function on a torus grid, one value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSignal<S> {
    grid: TorusGrid,
    values: Vec<S>,
}

pub type ExactSignal = GridSignal<RootDyadic>;
pub type FloatSignal = GridSignal<f64>;

impl<S: Scalar> GridSignal<S> {
    pub fn from_values(grid: &TorusGrid, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(GridSignal { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &TorusGrid, f: impl FnMut(usize) -> S) -> Self {
        GridSignal { grid: grid.clone(), values: (0..grid.len()).map(f).collect() }
    }

    pub fn constant(grid: &TorusGrid, c: S) -> Self {
        GridSignal { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, S::zero())
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn get(&self, cell: usize) -> S {
        self.values[cell]
    }

    pub fn check_grid(&self, other: &GridSignal<S>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        GridSignal { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(GridSignal { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|v| v * c)
    }

    /// Pointwise square.
    pub fn square(&self) -> Self {
        self.map(|v| v * v)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Scalar::is_zero)
    }

    pub fn sum(&self) -> S {
        let mut acc = S::zero();
        for &v in &self.values {
            acc += v;
        }
        acc
    }

    /// `∫ f` over the torus.
    pub fn integral(&self) -> S {
        self.sum().mul_pow2(self.grid.cell_volume_exp())
    }

    /// Average value; exact because the cell count is a power of two.
    pub fn mean(&self) -> S {
        self.sum().mul_pow2(-(self.grid.total_bits() as i32))
    }

    /// `f − mean(f)`.
    pub fn centered(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// `Σ f·g·vol`.
    pub fn inner_product(&self, other: &Self) -> Result<S> {
        self.check_grid(other)?;
        let mut acc = S::zero();
        for (&a, &b) in self.values.iter().zip(&other.values) {
            acc += a * b;
        }
        Ok(acc.mul_pow2(self.grid.cell_volume_exp()))
    }

    /// `‖f‖₂²`, exact in exact mode.
    pub fn norm_sq(&self) -> S {
        let mut acc = S::zero();
        for &v in &self.values {
            acc += v * v;
        }
        acc.mul_pow2(self.grid.cell_volume_exp())
    }

    /// `‖f‖_p` for `p ≥ 1` (`f64::INFINITY` for the sup norm).
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(self.values.iter().map(Scalar::to_f64), self.grid.cell_volume().to_f64(), p)
    }

    pub fn to_float(&self) -> FloatSignal {
        GridSignal { grid: self.grid.clone(), values: self.values.iter().map(Scalar::to_f64).collect() }
    }

    /// `TGS1` text encoding.
    pub fn to_tgs1(&self) -> String {
        let mut out = String::with_capacity(16 * self.values.len() + 64);
        out.push_str("TGS1\n");
        out.push_str(&format!("axes: {}\n", self.grid));
        out.push_str(if S::EXACT { "mode: exact\n" } else { "mode: float\n" });
        for v in &self.values {
            if S::EXACT {
                out.push_str(&v.to_string());
            } else {
                out.push_str(&format!("{:e}", v.to_f64()));
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn lp_norm_of(values: impl Iterator<Item = f64>, cell_volume: f64, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(values.fold(0.0, |m, v| m.max(v.abs())));
    }
    let s: f64 = values.map(|v| v.abs().powf(p)).sum();
    Ok((s * cell_volume).powf(1.0 / p))
}

/// Value distribution for [`random_signal`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Law {
    /// `m/256` with `m` uniform in `[-256, 256]`.
    Uniform,
    /// `±1` with equal probability.
    Sign,
    /// Zero except with probability 1/8, where the value is drawn as in `Uniform`.
    Sparse,
}

impl std::str::FromStr for Law {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Law::Uniform),
            "sign" | "pm1" | "±1" => Ok(Law::Sign),
            "sparse" => Ok(Law::Sparse),
            _ => Err(Error::Parse(format!("unknown law `{s}`"))),
        }
    }
}

/// Seeded random signal with dyadic values.
pub fn random_signal(grid: &TorusGrid, seed: u64, law: Law) -> ExactSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng| Dyadic::new(rng.gen_range(-256i128..=256), -8);
    let values = (0..grid.len())
        .map(|_| {
            let v = match law {
                Law::Uniform => uniform(&mut rng),
                Law::Sign => {
                    if rng.gen::<bool>() {
                        Dyadic::ONE
                    } else {
                        -Dyadic::ONE
                    }
                }
                Law::Sparse => {
                    if rng.gen_range(0..8) == 0 {
                        uniform(&mut rng)
                    } else {
                        Dyadic::ZERO
                    }
                }
            };
            RootDyadic::from(v)
        })
        .collect();
    GridSignal { grid: grid.clone(), values }
}

/// A decoded `TGS1` signal in whichever mode the file declares.
#[derive(Clone, Debug, PartialEq)]
pub enum AnySignal {
    Exact(ExactSignal),
    Float(FloatSignal),
}

impl AnySignal {
    pub fn grid(&self) -> &TorusGrid {
        match self {
            AnySignal::Exact(s) => s.grid(),
            AnySignal::Float(s) => s.grid(),
        }
    }

    pub fn to_tgs1(&self) -> String {
        match self {
            AnySignal::Exact(s) => s.to_tgs1(),
            AnySignal::Float(s) => s.to_tgs1(),
        }
    }
}

pub fn parse_tgs1(text: &str) -> Result<AnySignal> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some("TGS1") {
        return Err(Error::Parse("missing TGS1 magic line".into()));
    }
    let header = |line: Option<&str>, key: &str| -> Result<String> {
        line.and_then(|l| l.strip_prefix(key))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| Error::Parse(format!("expected `{key}` header")))
    };
    let grid = TorusGrid::parse_spec(&header(lines.next(), "axes:")?)?;
    let mode = header(lines.next(), "mode:")?;
    let body: Vec<&str> = lines.collect();
    match mode.as_str() {
        "exact" => {
            let values = body.iter().map(|l| RootDyadic::parse_value(l)).collect::<Result<Vec<_>>>()?;
            Ok(AnySignal::Exact(GridSignal::from_values(&grid, values)?))
        }
        "float" => {
            let values = body.iter().map(|l| f64::parse_value(l)).collect::<Result<Vec<_>>>()?;
            Ok(AnySignal::Float(GridSignal::from_values(&grid, values)?))
        }
        other => Err(Error::Parse(format!("unknown mode `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex(v: Dyadic) -> RootDyadic {
        RootDyadic::from(v)
    }

    #[test]
    fn make_grid_examples() {
        let g = TorusGrid::parse_spec("0,3").unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.cell_volume(), Dyadic::pow2(-3));
        let g = TorusGrid::parse_spec("1,2;1,2").unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.axis_cells(0), 8);
        assert_eq!(g.anchor(g.index(&[7, 1])), vec![Dyadic::new(7, -2), Dyadic::new(1, -2)]);
        assert!(matches!(TorusGrid::parse_spec("0,-1"), Err(Error::InvalidGrid(_))));
        assert!(matches!(TorusGrid::uniform(2, 0, 13), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn index_coordinate_bijection() {
        let g = TorusGrid::parse_spec("1,1;0,2;-1,2").unwrap();
        for c in 0..g.len() {
            assert_eq!(g.index(&g.coords(c)), c);
            assert_eq!(g.cell_of(&g.anchor(c)).unwrap(), c);
        }
    }

    #[test]
    fn inner_product_examples() {
        let g = TorusGrid::parse_spec("0,2").unwrap();
        let one = GridSignal::constant(&g, ex(Dyadic::ONE));
        assert_eq!(one.inner_product(&one).unwrap(), ex(Dyadic::ONE));
        let left = GridSignal::from_fn(&g, |c| ex(if c < 2 { Dyadic::ONE } else { Dyadic::ZERO }));
        let right = GridSignal::from_fn(&g, |c| ex(if c >= 2 { Dyadic::ONE } else { Dyadic::ZERO }));
        assert_eq!(left.inner_product(&right).unwrap(), RootDyadic::ZERO);

        let g = TorusGrid::parse_spec("0,3").unwrap();
        let f = random_signal(&g, 3, Law::Uniform);
        let h = random_signal(&g, 4, Law::Uniform);
        let mut direct = Dyadic::ZERO;
        for c in 0..8 {
            direct += f.get(c).rational * h.get(c).rational * Dyadic::pow2(-3);
        }
        assert_eq!(f.inner_product(&h).unwrap(), ex(direct));
        let other = TorusGrid::parse_spec("0,2").unwrap();
        assert_eq!(f.inner_product(&GridSignal::zeros(&other)), Err(Error::GridMismatch));
    }

    #[test]
    fn lp_norm_examples() {
        let g = TorusGrid::parse_spec("0,1").unwrap();
        let one = GridSignal::constant(&g, 1.0);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((one.lp_norm(p).unwrap() - 1.0).abs() < 1e-15);
        }
        let pm = GridSignal::from_values(&g, vec![1.0, -1.0]).unwrap();
        assert!((pm.lp_norm(2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(pm.lp_norm(0.5), Err(Error::InvalidExponent(_))));

        let g = TorusGrid::parse_spec("0,4").unwrap();
        let f = random_signal(&g, 9, Law::Uniform).to_float();
        let direct: f64 = f.values().iter().map(|v| v.abs().powi(3)).sum::<f64>() / 16.0;
        let norm = f.lp_norm(3.0).unwrap();
        assert!((norm - direct.cbrt()).abs() <= 1e-12 * norm);
    }

    #[test]
    fn random_signal_laws() {
        let g = TorusGrid::parse_spec("0,4;0,4").unwrap();
        assert_eq!(random_signal(&g, 5, Law::Uniform), random_signal(&g, 5, Law::Uniform));
        assert_ne!(random_signal(&g, 1, Law::Uniform), random_signal(&g, 2, Law::Uniform));
        let s = random_signal(&g, 1, Law::Sign);
        assert!(s.values().iter().all(|v| v.rational.abs() == Dyadic::ONE));
        let sp = random_signal(&g, 1, Law::Sparse);
        let nz = sp.values().iter().filter(|v| !v.is_zero()).count();
        assert!(nz > 0 && nz < 100);
    }

    #[test]
    fn exact_p2_norm_is_self_inner_product() {
        let g = TorusGrid::parse_spec("1,2;0,2").unwrap();
        let f = random_signal(&g, 11, Law::Uniform);
        assert_eq!(f.norm_sq(), f.inner_product(&f).unwrap());
        let n2 = f.lp_norm(2.0).unwrap();
        assert!((n2 * n2 - f.norm_sq().to_f64()).abs() < 1e-12);
    }

    #[test]
    fn tgs1_round_trip() {
        let g = TorusGrid::parse_spec("0,2;1,1").unwrap();
        let f = random_signal(&g, 2, Law::Uniform);
        assert_eq!(parse_tgs1(&f.to_tgs1()).unwrap(), AnySignal::Exact(f.clone()));
        let ff = f.to_float();
        assert_eq!(parse_tgs1(&ff.to_tgs1()).unwrap(), AnySignal::Float(ff));
        assert!(parse_tgs1("axes: 0,1\nmode: exact\n1 e 0\n1 e 0\n").is_err());
    }

    proptest! {
        #[test]
        fn inner_product_symmetric_bilinear(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000, k in -8i64..8) {
            let g = TorusGrid::parse_spec("0,2;0,3").unwrap();
            let (f, h, w) = (random_signal(&g, s1, Law::Uniform), random_signal(&g, s2, Law::Uniform), random_signal(&g, s3, Law::Sparse));
            prop_assert_eq!(f.inner_product(&h).unwrap(), h.inner_product(&f).unwrap());
            let c = ex(Dyadic::from_int(k));
            let lhs = f.scale(c).add(&w).unwrap().inner_product(&h).unwrap();
            let rhs = c * f.inner_product(&h).unwrap() + w.inner_product(&h).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert!(f.norm_sq().signum() >= 0);
        }

        #[test]
        fn holder_inequality(s1 in 0u64..1000, s2 in 0u64..1000, p in 1.1f64..6.0) {
            let g = TorusGrid::parse_spec("0,3;0,3").unwrap();
            let f = random_signal(&g, s1, Law::Uniform).to_float();
            let h = random_signal(&g, s2, Law::Uniform).to_float();
            let q = p / (p - 1.0);
            let ip = f.inner_product(&h).unwrap().abs();
            prop_assert!(ip <= f.lp_norm(p).unwrap() * h.lp_norm(q).unwrap() * (1.0 + 1e-12));
        }
    }
}
