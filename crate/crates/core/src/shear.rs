//! Unimodular integer shears acting on torus points and, as cell permutations, on signals.
//!
//! `T2(x1, x2) = (x1 − x2, x2)` and `T3(x1, x2) = (x1, x2 − x1)` act blockwise on a grid
//! with `2m` axes; `Theta` sends the last two (central) axes `(t1, t2)` to `(t1 − t2, t2)`.
//! A map may only mix axes with identical `(L, K)`, so on anchors it is the same integer
//! matrix acting on cell coordinates modulo the axis lengths.

use std::fmt;

use crate::dyadic::{Dyadic, Scalar};
use crate::error::{Error, Result};
use crate::grid::{GridSignal, TorusGrid};

pub type IntMatrix = Vec<Vec<i64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShearKind {
    T2,
    T3,
    Theta,
    Identity,
    Custom,
}

impl std::str::FromStr for ShearKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t2" => Ok(ShearKind::T2),
            "t3" => Ok(ShearKind::T3),
            "theta" => Ok(ShearKind::Theta),
            "identity" | "id" => Ok(ShearKind::Identity),
            _ => Err(Error::Parse(format!("unknown shear kind `{s}`"))),
        }
    }
}

impl fmt::Display for ShearKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ShearKind::T2 => "T2",
            ShearKind::T3 => "T3",
            ShearKind::Theta => "Theta",
            ShearKind::Identity => "Identity",
            ShearKind::Custom => "Custom",
        };
        f.write_str(s)
    }
}

/// Determinant by fraction-free (Bareiss) elimination.
pub fn determinant(m: &IntMatrix) -> i64 {
    let n = m.len();
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    (sign * a[n - 1][n - 1]) as i64
}

fn minor(m: &IntMatrix, row: usize, col: usize) -> IntMatrix {
    m.iter()
        .enumerate()
        .filter(|&(r, _)| r != row)
        .map(|(_, rv)| rv.iter().enumerate().filter(|&(c, _)| c != col).map(|(_, &x)| x).collect())
        .collect()
}

/// Integer inverse of a determinant-one matrix (the adjugate).
fn unimodular_inverse(m: &IntMatrix) -> IntMatrix {
    let n = m.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut inv = vec![vec![0; n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            *entry = sign * determinant(&minor(m, j, i));
        }
    }
    inv
}

fn identity(n: usize) -> IntMatrix {
    (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect()
}

fn check_mixing(matrix: &IntMatrix, grid: &TorusGrid) -> Result<()> {
    let n = grid.dim();
    if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: matrix.len() });
    }
    for (a, row) in matrix.iter().enumerate() {
        for (b, &x) in row.iter().enumerate() {
            if a != b && x != 0 && grid.axis(a) != grid.axis(b) {
                return Err(Error::IncompatibleGrid(format!(
                    "axes {a} and {b} are mixed but have different (L, K)"
                )));
            }
        }
    }
    Ok(())
}

/// Images of every cell under the integer matrix, modulo the axis lengths.
fn cell_images(matrix: &IntMatrix, grid: &TorusGrid) -> Vec<u32> {
    let n = grid.dim();
    (0..grid.len())
        .map(|c| {
            let x = grid.coords(c);
            let y: Vec<u64> = (0..n)
                .map(|a| {
                    let s: i64 = (0..n).map(|b| matrix[a][b] * x[b] as i64).sum();
                    s.rem_euclid(grid.axis_cells(a) as i64) as u64
                })
                .collect();
            grid.index(&y) as u32
        })
        .collect()
}

/// A determinant-one integer map bound to a compatible torus grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ShearMap {
    kind: ShearKind,
    matrix: IntMatrix,
    inverse: IntMatrix,
    grid: TorusGrid,
}

impl ShearMap {
    pub fn new(kind: ShearKind, grid: &TorusGrid) -> Result<Self> {
        let n = grid.dim();
        let mut m = identity(n);
        match kind {
            ShearKind::Identity | ShearKind::Custom => {}
            ShearKind::T2 | ShearKind::T3 => {
                if n % 2 != 0 {
                    return Err(Error::IncompatibleGrid(format!("{kind} needs an even number of axes, got {n}")));
                }
                let h = n / 2;
                for a in 0..h {
                    if grid.axis(a) != grid.axis(a + h) {
                        return Err(Error::IncompatibleGrid(format!("axes {a} and {} differ", a + h)));
                    }
                    if kind == ShearKind::T2 {
                        m[a][a + h] = -1;
                    } else {
                        m[a + h][a] = -1;
                    }
                }
            }
            ShearKind::Theta => {
                if n < 2 {
                    return Err(Error::IncompatibleGrid("Theta needs two central axes".into()));
                }
                if grid.axis(n - 2) != grid.axis(n - 1) {
                    return Err(Error::IncompatibleGrid("central axes have different resolution".into()));
                }
                m[n - 2][n - 1] = -1;
            }
        }
        Self::build(kind, m, grid)
    }

    /// A user-supplied matrix; rejected unless it has determinant one.
    pub fn custom(matrix: IntMatrix, grid: &TorusGrid) -> Result<Self> {
        Self::build(ShearKind::Custom, matrix, grid)
    }

    fn build(kind: ShearKind, matrix: IntMatrix, grid: &TorusGrid) -> Result<Self> {
        check_mixing(&matrix, grid)?;
        let det = determinant(&matrix);
        if det != 1 {
            return Err(Error::NotUnimodular(det));
        }
        let inverse = unimodular_inverse(&matrix);
        Ok(ShearMap { kind, matrix, inverse, grid: grid.clone() })
    }

    pub fn kind(&self) -> ShearKind {
        self.kind
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &IntMatrix {
        &self.inverse
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn inverse(&self) -> ShearMap {
        ShearMap {
            kind: self.kind,
            matrix: self.inverse.clone(),
            inverse: self.matrix.clone(),
            grid: self.grid.clone(),
        }
    }

    /// Image of a point, reduced modulo the torus extents.
    pub fn apply(&self, point: &[Dyadic]) -> Result<Vec<Dyadic>> {
        let n = self.grid.dim();
        if point.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: point.len() });
        }
        Ok((0..n)
            .map(|a| {
                let y: Dyadic = (0..n).map(|b| Dyadic::from_int(self.matrix[a][b]) * point[b]).sum();
                let period = Dyadic::pow2(self.grid.axis(a).extent_exp);
                y - Dyadic::from_int(y.floor_div(&period)) * period
            })
            .collect())
    }

    /// Index of the cell whose anchor is the image of cell `c`'s anchor.
    pub fn image_cell(&self, c: usize) -> usize {
        let x = self.grid.coords(c);
        let n = x.len();
        let y: Vec<u64> = (0..n)
            .map(|a| {
                let s: i64 = (0..n).map(|b| self.matrix[a][b] * x[b] as i64).sum();
                s.rem_euclid(self.grid.axis_cells(a) as i64) as u64
            })
            .collect();
        self.grid.index(&y)
    }

    pub fn pullback_operator(&self) -> PullbackOperator {
        PullbackOperator::new(self)
    }
}

/// `U f = f ∘ T`, materialized as a cell permutation.
#[derive(Clone, Debug, PartialEq)]
pub struct PullbackOperator {
    map: ShearMap,
    permutation: Vec<u32>,
}

impl PullbackOperator {
    pub fn new(map: &ShearMap) -> Self {
        let permutation = cell_images(&map.matrix, &map.grid);
        PullbackOperator { map: map.clone(), permutation }
    }

    pub fn map(&self) -> &ShearMap {
        &self.map
    }

    /// `permutation[c]` is the cell `T c`.
    pub fn permutation(&self) -> &[u32] {
        &self.permutation
    }

    /// `(U f)(x) = f(T x)`.
    pub fn apply<S: Scalar>(&self, f: &GridSignal<S>) -> Result<GridSignal<S>> {
        if f.grid() != &self.map.grid {
            return Err(Error::GridMismatch);
        }
        let v = f.values();
        Ok(GridSignal::from_fn(f.grid(), |c| v[self.permutation[c] as usize]))
    }

    /// `U* = U⁻¹`: `(U* g)(T x) = g(x)`.
    pub fn adjoint<S: Scalar>(&self, g: &GridSignal<S>) -> Result<GridSignal<S>> {
        if g.grid() != &self.map.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![S::zero(); g.grid().len()];
        for (c, &p) in self.permutation.iter().enumerate() {
            out[p as usize] = g.get(c);
        }
        GridSignal::from_values(g.grid(), out)
    }

    /// `U A U*` for an operator `A`.
    pub fn conjugate<S: Scalar>(
        &self,
        f: &GridSignal<S>,
        op: impl FnOnce(&GridSignal<S>) -> Result<GridSignal<S>>,
    ) -> Result<GridSignal<S>> {
        self.apply(&op(&self.adjoint(f)?)?)
    }
}

pub fn pullback<S: Scalar>(op: &PullbackOperator, f: &GridSignal<S>) -> Result<GridSignal<S>> {
    op.apply(f)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnimodularReport {
    pub determinant: i64,
    /// Whether the cell map is a bijection on the supplied grid; `None` when no grid was
    /// given or the matrix mixes axes of different shape.
    pub bijective: Option<bool>,
    pub accepted: bool,
}

impl fmt::Display for UnimodularReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bij = match self.bijective {
            Some(true) => "yes",
            Some(false) => "no",
            None => "n/a",
        };
        write!(
            f,
            "determinant={} bijective={} verdict={}",
            self.determinant,
            bij,
            if self.accepted { "accepted" } else { "rejected" }
        )
    }
}

/// Determinant plus a bijectivity certificate: the image multiset of all cell indices
/// is compared against the full index set.
pub fn verify_unimodular(matrix: &IntMatrix, grid: Option<&TorusGrid>) -> UnimodularReport {
    let determinant = determinant(matrix);
    let bijective = grid.filter(|g| check_mixing(matrix, g).is_ok()).map(|g| {
        let mut seen = vec![false; g.len()];
        for img in cell_images(matrix, g) {
            seen[img as usize] = true;
        }
        seen.iter().all(|&s| s)
    });
    let accepted = determinant == 1 && bijective != Some(false);
    UnimodularReport { determinant, bijective, accepted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::RootDyadic;
    use crate::grid::{random_signal, Law};
    use proptest::prelude::*;

    fn d(m: i128, e: i32) -> Dyadic {
        Dyadic::new(m, e)
    }

    #[test]
    fn matrices() {
        let g = TorusGrid::uniform(2, 0, 3).unwrap();
        assert_eq!(ShearMap::new(ShearKind::T2, &g).unwrap().matrix(), &vec![vec![1, -1], vec![0, 1]]);
        assert_eq!(ShearMap::new(ShearKind::T3, &g).unwrap().matrix(), &vec![vec![1, 0], vec![-1, 1]]);
        assert_eq!(ShearMap::new(ShearKind::Identity, &g).unwrap().matrix(), &identity(2));
        let nil = TorusGrid::parse_spec("0,2;0,2;0,2;0,4;0,4").unwrap();
        let theta = ShearMap::new(ShearKind::Theta, &nil).unwrap();
        let mut expect = identity(5);
        expect[3][4] = -1;
        assert_eq!(theta.matrix(), &expect);
        assert_eq!(theta.inverse_matrix()[3][4], 1);
    }

    #[test]
    fn incompatible_grids() {
        let g = TorusGrid::parse_spec("0,3;0,2").unwrap();
        assert!(matches!(ShearMap::new(ShearKind::T2, &g), Err(Error::IncompatibleGrid(_))));
        let g = TorusGrid::parse_spec("0,3").unwrap();
        assert!(matches!(ShearMap::new(ShearKind::T3, &g), Err(Error::IncompatibleGrid(_))));
    }

    #[test]
    fn apply_examples() {
        let g = TorusGrid::uniform(2, 0, 3).unwrap();
        let t2 = ShearMap::new(ShearKind::T2, &g).unwrap();
        assert_eq!(t2.apply(&[d(3, -2), d(1, -2)]).unwrap(), vec![d(1, -1), d(1, -2)]);
        assert_eq!(t2.apply(&[d(1, -2), d(3, -2)]).unwrap(), vec![d(1, -1), d(3, -2)]);
        let id = ShearMap::new(ShearKind::Identity, &g).unwrap();
        assert_eq!(id.apply(&[d(3, -3), d(5, -3)]).unwrap(), vec![d(3, -3), d(5, -3)]);
        assert!(matches!(t2.apply(&[d(1, 0)]), Err(Error::DimensionMismatch { .. })));

        let nil = TorusGrid::parse_spec("0,3;0,3;0,3;0,3;0,3").unwrap();
        let theta = ShearMap::new(ShearKind::Theta, &nil).unwrap();
        let z = [d(1, -3), d(3, -3), d(0, 0)];
        let out = theta.apply(&[z[0], z[1], z[2], d(5, -3), d(1, -3)]).unwrap();
        assert_eq!(out, vec![z[0], z[1], z[2], d(1, -1), d(1, -3)]);
    }

    #[test]
    fn unimodular_reports() {
        let g = TorusGrid::uniform(2, 0, 3).unwrap();
        for kind in [ShearKind::T2, ShearKind::T3] {
            let m = ShearMap::new(kind, &g).unwrap();
            let r = verify_unimodular(m.matrix(), Some(&g));
            assert_eq!(r, UnimodularReport { determinant: 1, bijective: Some(true), accepted: true });
        }
        let bad = vec![vec![2, 0], vec![0, 1]];
        let r = verify_unimodular(&bad, Some(&g));
        assert_eq!(r.determinant, 2);
        assert_eq!(r.bijective, Some(false));
        assert!(!r.accepted);
        assert_eq!(ShearMap::custom(bad, &g), Err(Error::NotUnimodular(2)));
    }

    #[test]
    fn image_cell_agrees_with_point_map() {
        let g = TorusGrid::parse_spec("1,1;0,2;1,1;0,2").unwrap();
        for kind in [ShearKind::T2, ShearKind::T3] {
            let m = ShearMap::new(kind, &g).unwrap();
            for c in 0..g.len() {
                let img = m.apply(&g.anchor(c)).unwrap();
                assert_eq!(g.cell_of(&img).unwrap(), m.image_cell(c));
            }
        }
    }

    #[test]
    fn slanted_cell_sets() {
        // T2^{-1}(I×J) is {x1 − x2 ∈ I, x2 ∈ J} by direct membership.
        let g = TorusGrid::uniform(2, 0, 3).unwrap();
        let t2 = ShearMap::new(ShearKind::T2, &g).unwrap();
        let u = t2.pullback_operator();
        let (i_lo, i_hi, j_lo, j_hi) = (d(1, -2), d(1, -1), d(0, 0), d(1, -1));
        let inside = |x: &Dyadic, lo: &Dyadic, hi: &Dyadic| x >= lo && x < hi;
        for c in 0..g.len() {
            let x = g.anchor(c);
            let mut diff = x[0] - x[1];
            if diff.signum() < 0 {
                diff += Dyadic::ONE;
            }
            let direct = inside(&diff, &i_lo, &i_hi) && inside(&x[1], &j_lo, &j_hi);
            let y = g.anchor(u.permutation()[c] as usize);
            let via_map = inside(&y[0], &i_lo, &i_hi) && inside(&y[1], &j_lo, &j_hi);
            assert_eq!(direct, via_map);
        }
    }

    #[test]
    fn pullback_constant_and_inverse() {
        let g = TorusGrid::uniform(2, 0, 3).unwrap();
        let u = ShearMap::new(ShearKind::T2, &g).unwrap().pullback_operator();
        let one = GridSignal::constant(&g, RootDyadic::from(Dyadic::ONE));
        assert_eq!(u.apply(&one).unwrap(), one);
        let f = random_signal(&g, 7, Law::Uniform);
        assert_eq!(u.apply(&u.adjoint(&f).unwrap()).unwrap(), f);
        assert_eq!(u.adjoint(&u.apply(&f).unwrap()).unwrap(), f);
        let inv = ShearMap::new(ShearKind::T2, &g).unwrap().inverse().pullback_operator();
        assert_eq!(inv.apply(&f).unwrap(), u.adjoint(&f).unwrap());
    }

    proptest! {
        #[test]
        fn pullback_is_isometric_and_adjoint(seed in 0u64..500, kind in prop::sample::select(vec![ShearKind::T2, ShearKind::T3])) {
            let g = TorusGrid::parse_spec("0,3;0,3").unwrap();
            let u = ShearMap::new(kind, &g).unwrap().pullback_operator();
            let f = random_signal(&g, seed, Law::Uniform);
            let h = random_signal(&g, seed + 1000, Law::Sparse);
            let uf = u.apply(&f).unwrap();
            prop_assert_eq!(uf.norm_sq(), f.norm_sq());
            // A permutation of values: the value multisets agree, hence every L^p norm.
            let sorted = |s: &GridSignal<f64>| {
                let mut v = s.values().to_vec();
                v.sort_by(f64::total_cmp);
                v
            };
            prop_assert_eq!(sorted(&uf.to_float()), sorted(&f.to_float()));
            prop_assert_eq!(uf.lp_norm(f64::INFINITY).unwrap(), f.lp_norm(f64::INFINITY).unwrap());
            prop_assert_eq!(uf.inner_product(&h).unwrap(), f.inner_product(&u.adjoint(&h).unwrap()).unwrap());
        }
    }
}
