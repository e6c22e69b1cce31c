//! Tensor-product dyadic filtrations on a torus grid, optionally twisted by a shear.
//!
//! A system is a list of factors. Each factor owns a set of axes and refines all of them
//! together: one level step splits axis `a` into `2^{b_a}` pieces (`b_a = 1` for ordinary
//! dyadic axes, `b_a = 2` for parabolic central axes, whose intervals shrink four-fold
//! when the spatial sides halve). Levels are grid-relative: level 0 is the whole factor
//! torus and level `n` the cells. Level `-1` is the scaling (mean) level of a factor: its
//! conditional expectation is the zero operator, so `E_0 − E_{-1}` is the factor average
//! and the Haar element there is the normalized constant (`ε = 0`).
//!
//! Haar elements on an atom are Walsh characters of its children: with the child digit
//! `d` (the concatenated per-axis child positions, axis order, lowest bits first) the sign
//! is `(−1)^{popcount(ε & d)}`. For a one-bit axis this is `+1` on the lower half and `−1`
//! on the upper half; for a two-bit axis the high bit of `ε` is the half split and the low
//! bit alternates between quarters.
//!
//! A twisted system reads every cell through the shear: cell `c` is placed where the
//! untwisted system would place the cell `T c`.

use std::collections::BTreeMap;

use crate::dyadic::Scalar;
use crate::error::{Error, Result};
use crate::grid::{GridSignal, TorusGrid};
use crate::shear::ShearMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub axes: Vec<usize>,
    /// Child bits per level for each axis.
    pub bits: Vec<u32>,
}

impl Factor {
    pub fn dyadic(axes: impl IntoIterator<Item = usize>) -> Self {
        let axes: Vec<usize> = axes.into_iter().collect();
        let bits = vec![1; axes.len()];
        Factor { axes, bits }
    }
}

#[derive(Clone, Debug)]
struct FactorInfo {
    axes: Vec<usize>,
    bits: Vec<u32>,
    levels: u32,
    /// Bits of one child digit.
    digit: u32,
    /// Bit offset of each axis inside a digit.
    digit_offsets: Vec<u32>,
    /// Offset of this factor's coordinate inside a tensor index.
    tensor_offset: u32,
    /// `Σ L_a` over the factor's axes.
    extent_exp: i32,
}

impl FactorInfo {
    fn size_bits(&self) -> u32 {
        self.digit * self.levels
    }

    /// `log2` of an atom's volume at a level (levels -1 and 0 are the whole factor).
    fn volume_exp(&self, level: i32) -> i32 {
        let l = level.max(0);
        self.extent_exp - self.bits.iter().map(|&b| b as i32 * l).sum::<i32>()
    }

    /// Decomposition of a factor coordinate `z` in Mallat layout.
    fn decode(&self, idx: u64) -> (i32, u64, u32) {
        if idx == 0 {
            return (-1, 0, 0);
        }
        let level = ((63 - idx.leading_zeros()) / self.digit) as i32;
        let shift = self.digit * level as u32;
        (level, idx & ((1u64 << shift) - 1), (idx >> shift) as u32)
    }

    fn encode(&self, level: i32, atom: u64, eps: u32) -> u64 {
        if level < 0 {
            0
        } else {
            ((eps as u64) << (self.digit * level as u32)) | atom
        }
    }
}

/// Position of one Haar element inside one factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactorIndex {
    /// `-1` for the scaling level.
    pub level: i32,
    /// Atom number at `level` in the factor's interleaved order (0 at the scaling level).
    pub atom: u64,
    /// Walsh pattern over the atom's children (0 exactly at the scaling level).
    pub eps: u32,
}

/// Inclusive per-factor level bounds for Haar and martingale-difference levels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScaleWindow {
    pub lo: Vec<i32>,
    pub hi: Vec<i32>,
}

impl ScaleWindow {
    pub fn contains(&self, levels: &[i32]) -> bool {
        levels.iter().zip(self.lo.iter().zip(&self.hi)).all(|(l, (lo, hi))| l >= lo && l <= hi)
    }

    /// Level tuples inside the window, lexicographic, skipping the all-scaling tuple.
    pub fn tuples(&self) -> Vec<Vec<i32>> {
        let mut out = vec![Vec::new()];
        for (&lo, &hi) in self.lo.iter().zip(&self.hi) {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (lo..=hi).map(move |l| {
                        let mut p = prefix.clone();
                        p.push(l);
                        p
                    })
                })
                .collect();
        }
        out.retain(|t| t.iter().any(|&l| l >= 0));
        out
    }
}

#[derive(Clone, Debug)]
pub struct TensorSystem {
    grid: TorusGrid,
    factors: Vec<FactorInfo>,
    /// Cell read through the shear (`T c`); identity when untwisted.
    rectified: Vec<u32>,
    /// Cell → tensor index.
    layout: Vec<u32>,
    twisted: bool,
}

impl TensorSystem {
    pub fn new(grid: &TorusGrid, factors: Vec<Factor>, twist: Option<&ShearMap>) -> Result<Self> {
        let mut seen = vec![false; grid.dim()];
        let mut infos = Vec::with_capacity(factors.len());
        for (fi, f) in factors.iter().enumerate() {
            if f.axes.is_empty() || f.axes.len() != f.bits.len() {
                return Err(Error::InvalidGrid(format!("factor {fi} is malformed")));
            }
            let mut levels = None;
            let mut digit_offsets = Vec::new();
            let mut digit = 0;
            for (&a, &b) in f.axes.iter().zip(&f.bits) {
                if a >= grid.dim() || seen[a] {
                    return Err(Error::InvalidGrid(format!("axis {a} missing or used twice")));
                }
                seen[a] = true;
                let ab = grid.axis(a).bits();
                if b == 0 || ab % b != 0 {
                    return Err(Error::Resolution(format!("axis {a} has 2^{ab} cells, not a power of 2^{b}")));
                }
                let n = ab / b;
                if *levels.get_or_insert(n) != n {
                    return Err(Error::Resolution(format!("factor {fi} axes have different level counts")));
                }
                digit_offsets.push(digit);
                digit += b;
            }
            let extent_exp = f.axes.iter().map(|&a| grid.axis(a).extent_exp).sum();
            infos.push(FactorInfo {
                axes: f.axes.clone(),
                bits: f.bits.clone(),
                levels: levels.unwrap_or(0),
                digit,
                digit_offsets,
                tensor_offset: 0,
                extent_exp,
            });
        }
        if let Some(a) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidGrid(format!("axis {a} belongs to no factor")));
        }
        let mut off = 0;
        for info in infos.iter_mut().rev() {
            info.tensor_offset = off;
            off += info.size_bits();
        }
        let rectified: Vec<u32> = match twist {
            Some(map) => {
                if map.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                map.pullback_operator().permutation().to_vec()
            }
            None => (0..grid.len() as u32).collect(),
        };
        let mut sys = TensorSystem { grid: grid.clone(), factors: infos, rectified, layout: Vec::new(), twisted: twist.is_some() };
        sys.layout = (0..grid.len()).map(|c| sys.tensor_position(sys.rectified[c] as usize) as u32).collect();
        Ok(sys)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn is_twisted(&self) -> bool {
        self.twisted
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn levels(&self, f: usize) -> u32 {
        self.factors[f].levels
    }

    pub fn digit_bits(&self, f: usize) -> u32 {
        self.factors[f].digit
    }

    pub fn factor_axes(&self, f: usize) -> &[usize] {
        &self.factors[f].axes
    }

    pub fn full_window(&self) -> ScaleWindow {
        ScaleWindow {
            lo: vec![-1; self.factors.len()],
            hi: self.factors.iter().map(|f| f.levels as i32 - 1).collect(),
        }
    }

    /// The cell this system reads when it looks at cell `c`.
    pub fn rectified_cell(&self, c: usize) -> usize {
        self.rectified[c] as usize
    }

    /// Interleaved factor coordinate of an (already rectified) cell.
    fn factor_coord(&self, f: usize, cell: usize) -> u64 {
        let info = &self.factors[f];
        let mut z = 0u64;
        for lvl in 0..info.levels {
            let mut digit = 0u64;
            for (k, (&a, &b)) in info.axes.iter().zip(&info.bits).enumerate() {
                let x = self.grid.coord(cell, a);
                let part = (x >> (b * (info.levels - 1 - lvl))) & ((1u64 << b) - 1);
                digit |= part << info.digit_offsets[k];
            }
            z = (z << info.digit) | digit;
        }
        z
    }

    fn tensor_position(&self, cell: usize) -> usize {
        (0..self.factors.len())
            .map(|f| (self.factor_coord(f, cell) as usize) << self.factors[f].tensor_offset)
            .sum()
    }

    /// Per-axis positions of an atom given in interleaved order.
    pub fn atom_positions(&self, f: usize, level: i32, atom: u64) -> Vec<u64> {
        let info = &self.factors[f];
        let mut pos = vec![0u64; info.axes.len()];
        for l in 0..level.max(0) as u32 {
            let digit = atom >> (info.digit * (level as u32 - 1 - l));
            for (k, &b) in info.bits.iter().enumerate() {
                pos[k] = (pos[k] << b) | ((digit >> info.digit_offsets[k]) & ((1u64 << b) - 1));
            }
        }
        pos
    }

    /// Inverse of [`atom_positions`](Self::atom_positions).
    pub fn atom_from_positions(&self, f: usize, level: i32, pos: &[u64]) -> Result<u64> {
        let info = &self.factors[f];
        if pos.len() != info.axes.len() {
            return Err(Error::DimensionMismatch { expected: info.axes.len(), got: pos.len() });
        }
        if level < 0 {
            return Ok(0);
        }
        let mut atom = 0u64;
        for l in 0..level as u32 {
            let mut digit = 0u64;
            for (k, &b) in info.bits.iter().enumerate() {
                if pos[k] >> (b * level as u32) != 0 {
                    return Err(Error::Resolution(format!("position {} outside level {level}", pos[k])));
                }
                digit |= ((pos[k] >> (b * (level as u32 - 1 - l))) & ((1u64 << b) - 1)) << info.digit_offsets[k];
            }
            atom = (atom << info.digit) | digit;
        }
        Ok(atom)
    }

    pub fn validate_index(&self, idx: &[FactorIndex]) -> Result<()> {
        if idx.len() != self.factors.len() {
            return Err(Error::DimensionMismatch { expected: self.factors.len(), got: idx.len() });
        }
        if idx.iter().all(|i| i.level < 0) {
            return Err(Error::Scale("the all-scaling index is the mean, not a Haar element".into()));
        }
        for (info, i) in self.factors.iter().zip(idx) {
            if i.level < -1 || i.level >= info.levels as i32 {
                return Err(Error::Resolution(format!("level {} outside [-1, {}]", i.level, info.levels as i32 - 1)));
            }
            let ok = if i.level < 0 {
                i.eps == 0 && i.atom == 0
            } else {
                i.eps >= 1 && i.eps < (1 << info.digit) && i.atom < (1u64 << (info.digit * i.level as u32))
            };
            if !ok {
                return Err(Error::Resolution(format!("invalid atom/eps in {i:?}")));
            }
        }
        Ok(())
    }

    /// `log2 |R|` for the support of an element with these levels.
    pub fn support_volume_exp(&self, levels: &[i32]) -> i32 {
        self.factors.iter().zip(levels).map(|(f, &l)| f.volume_exp(l)).sum()
    }

    fn flat_index(&self, idx: &[FactorIndex]) -> usize {
        self.factors
            .iter()
            .zip(idx)
            .map(|(f, i)| (f.encode(i.level, i.atom, i.eps) as usize) << f.tensor_offset)
            .sum()
    }

    fn unflatten(&self, flat: usize) -> Vec<FactorIndex> {
        self.factors
            .iter()
            .map(|f| {
                let z = ((flat >> f.tensor_offset) as u64) & ((1u64 << f.size_bits()) - 1);
                let (level, atom, eps) = f.decode(z);
                FactorIndex { level, atom, eps }
            })
            .collect()
    }

    /// Value of the normalized Haar element at every cell, evaluated cell by cell.
    pub fn haar_signal<S: Scalar>(&self, idx: &[FactorIndex]) -> Result<GridSignal<S>> {
        self.validate_index(idx)?;
        let levels: Vec<i32> = idx.iter().map(|i| i.level).collect();
        let amp = S::pow2_half(-(self.support_volume_exp(&levels) as i64));
        Ok(GridSignal::from_fn(&self.grid, |c| {
            let cell = self.rectified[c] as usize;
            let mut sign = 1i32;
            for (f, (info, i)) in self.factors.iter().zip(idx).enumerate() {
                if i.level < 0 {
                    continue;
                }
                let z = self.factor_coord(f, cell);
                let l = i.level as u32;
                if z >> (info.digit * (info.levels - l)) != i.atom {
                    return S::zero();
                }
                let digit = (z >> (info.digit * (info.levels - l - 1))) & ((1u64 << info.digit) - 1);
                if (digit & i.eps as u64).count_ones() % 2 == 1 {
                    sign = -sign;
                }
            }
            if sign > 0 {
                amp
            } else {
                -amp
            }
        }))
    }

    fn check_signal<S: Scalar>(&self, f: &GridSignal<S>) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Conditional expectation in one factor at a level in `[-1, n]`.
    pub fn cond_expect_factor<S: Scalar>(&self, sig: &GridSignal<S>, f: usize, level: i32) -> Result<GridSignal<S>> {
        self.check_signal(sig)?;
        let info = &self.factors[f];
        if level < -1 || level > info.levels as i32 {
            return Err(Error::Scale(format!("level {level} outside [-1, {}] in factor {f}", info.levels)));
        }
        if level < 0 {
            return Ok(GridSignal::zeros(&self.grid));
        }
        if level == info.levels as i32 {
            return Ok(sig.clone());
        }
        // Clear the low (finer-than-level) bits of each of the factor's axis fields.
        let mut mask = usize::MAX;
        let mut count_bits = 0;
        for (&a, &b) in info.axes.iter().zip(&info.bits) {
            let low = b * (info.levels - level as u32);
            mask &= !(((1usize << low) - 1) << self.grid.shift(a));
            count_bits += low;
        }
        let mut sums = vec![S::zero(); self.grid.len()];
        for (c, &v) in sig.values().iter().enumerate() {
            sums[self.rectified[c] as usize & mask] += v;
        }
        let values = (0..self.grid.len())
            .map(|c| sums[self.rectified[c] as usize & mask].mul_pow2(-(count_bits as i32)))
            .collect();
        GridSignal::from_values(&self.grid, values)
    }

    /// Multi-parameter conditional expectation `Π_f E^f_{ℓ_f}`.
    pub fn cond_expect<S: Scalar>(&self, sig: &GridSignal<S>, levels: &[i32]) -> Result<GridSignal<S>> {
        self.check_levels(levels)?;
        let mut g = sig.clone();
        for (f, &l) in levels.iter().enumerate() {
            g = self.cond_expect_factor(&g, f, l)?;
        }
        Ok(g)
    }

    fn check_levels(&self, levels: &[i32]) -> Result<()> {
        if levels.len() != self.factors.len() {
            return Err(Error::DimensionMismatch { expected: self.factors.len(), got: levels.len() });
        }
        Ok(())
    }

    /// Product of one-factor differences `Π_f (E^f_{ℓ_f+1} − E^f_{ℓ_f})`, levels in `[-1, n−1]`.
    pub fn mart_diff<S: Scalar>(&self, sig: &GridSignal<S>, levels: &[i32]) -> Result<GridSignal<S>> {
        self.check_levels(levels)?;
        for (f, &l) in levels.iter().enumerate() {
            if l < -1 || l >= self.factors[f].levels as i32 {
                return Err(Error::Scale(format!("difference level {l} outside [-1, {}]", self.factors[f].levels as i32 - 1)));
            }
        }
        let mut g = sig.clone();
        for (f, &l) in levels.iter().enumerate() {
            let fine = self.cond_expect_factor(&g, f, l + 1)?;
            let coarse = self.cond_expect_factor(&g, f, l)?;
            g = fine.sub(&coarse)?;
        }
        Ok(g)
    }

    /// All Haar coefficients (and the mean term) by a separable Walsh–Haar transform.
    pub fn analyze<S: Scalar>(&self, sig: &GridSignal<S>) -> Result<TensorCoefficients<S>> {
        self.check_signal(sig)?;
        let mut t = vec![S::zero(); self.grid.len()];
        for (c, &v) in sig.values().iter().enumerate() {
            t[self.layout[c] as usize] = v;
        }
        for f in 0..self.factors.len() {
            self.along_factor(&mut t, f, forward_line);
        }
        let cve = self.grid.cell_volume_exp() as i64;
        let scales = self.normalization_table::<S>(|e| 2 * cve - e);
        for (flat, v) in t.iter_mut().enumerate() {
            *v = *v * scales[&self.level_key(flat)];
        }
        Ok(TensorCoefficients { values: t })
    }

    /// `Σ c·h` over the stored coefficients (the mean term included if nonzero).
    pub fn synthesize<S: Scalar>(&self, coeffs: &TensorCoefficients<S>) -> Result<GridSignal<S>> {
        if coeffs.values.len() != self.grid.len() {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), got: coeffs.values.len() });
        }
        let scales = self.normalization_table::<S>(|e| -e);
        let mut t: Vec<S> = coeffs
            .values
            .iter()
            .enumerate()
            .map(|(flat, &v)| if v.is_zero() { v } else { v * scales[&self.level_key(flat)] })
            .collect();
        for f in 0..self.factors.len() {
            self.along_factor(&mut t, f, transpose_line);
        }
        let values = (0..self.grid.len()).map(|c| t[self.layout[c] as usize]).collect();
        GridSignal::from_values(&self.grid, values)
    }

    /// Levels of each factor at a flat tensor index.
    fn level_key(&self, flat: usize) -> Vec<i32> {
        self.factors
            .iter()
            .map(|f| {
                let z = ((flat >> f.tensor_offset) as u64) & ((1u64 << f.size_bits()) - 1);
                if z == 0 {
                    -1
                } else {
                    ((63 - z.leading_zeros()) / f.digit) as i32
                }
            })
            .collect()
    }

    /// `2^{g(e)/2}` for every level tuple, where `e = log2 |R|`.
    fn normalization_table<S: Scalar>(&self, g: impl Fn(i64) -> i64) -> BTreeMap<Vec<i32>, S> {
        let all = ScaleWindow { lo: vec![-1; self.factors.len()], hi: self.full_window().hi };
        let mut tuples = all.tuples();
        tuples.push(vec![-1; self.factors.len()]);
        tuples
            .into_iter()
            .map(|t| {
                let e = self.support_volume_exp(&t) as i64;
                (t, S::pow2_half(g(e)))
            })
            .collect()
    }

    fn along_factor<S: Scalar>(&self, t: &mut [S], f: usize, line_op: fn(&mut [S], &mut [S], u32, u32)) {
        let info = &self.factors[f];
        let len = 1usize << info.size_bits();
        if len == 1 {
            return;
        }
        let stride = 1usize << info.tensor_offset;
        let block = len * stride;
        let mut line = vec![S::zero(); len];
        let mut scratch = vec![S::zero(); len];
        for outer in (0..t.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = t[base + k * stride];
                }
                line_op(&mut line, &mut scratch, info.digit, info.levels);
                for (k, &v) in line.iter().enumerate() {
                    t[base + k * stride] = v;
                }
            }
        }
    }

    /// `Σ_ℓ Δ_ℓ` restricted to a window, computed from coefficients.
    pub fn project<S: Scalar>(&self, sig: &GridSignal<S>, window: &ScaleWindow) -> Result<GridSignal<S>> {
        let coeffs = self.analyze(sig)?.restricted(self, window);
        self.synthesize(&coeffs)
    }

    /// Squared dyadic square function `Σ_R |⟨f,h_R⟩|² |h_R(x)|²` over a window.
    pub fn square_dyadic_sq<S: Scalar>(&self, coeffs: &TensorCoefficients<S>, window: &ScaleWindow) -> Result<GridSignal<S>> {
        // Energy per (level tuple, atom tuple): Σ_ε c² · |R|^{-1}.
        let mut per_atom: BTreeMap<(Vec<i32>, Vec<u64>), S> = BTreeMap::new();
        for (flat, &c) in coeffs.values.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let idx = self.unflatten(flat);
            let levels: Vec<i32> = idx.iter().map(|i| i.level).collect();
            if levels.iter().all(|&l| l < 0) || !window.contains(&levels) {
                continue;
            }
            let atoms: Vec<u64> = idx.iter().map(|i| i.atom).collect();
            let e = self.support_volume_exp(&levels);
            *per_atom.entry((levels, atoms)).or_insert_with(S::zero) += (c * c).mul_pow2(-e);
        }
        let mut out = vec![S::zero(); self.grid.len()];
        let coords: Vec<Vec<u64>> = (0..self.grid.len())
            .map(|c| (0..self.factors.len()).map(|f| self.factor_coord(f, self.rectified[c] as usize)).collect())
            .collect();
        for ((levels, atoms), energy) in per_atom {
            for (c, z) in coords.iter().enumerate() {
                let inside = self.factors.iter().zip(&levels).zip(&atoms).enumerate().all(|(f, ((info, &l), &a))| {
                    l < 0 || z[f] >> (info.digit * (info.levels - l as u32)) == a
                });
                if inside {
                    out[c] += energy;
                }
            }
        }
        GridSignal::from_values(&self.grid, out)
    }

    /// Squared martingale square function `Σ_ℓ |Δ_ℓ f|²` over a window.
    pub fn square_mart_sq<S: Scalar>(&self, sig: &GridSignal<S>, window: &ScaleWindow) -> Result<GridSignal<S>> {
        let mut acc = GridSignal::zeros(&self.grid);
        for levels in window.tuples() {
            acc = acc.add(&self.mart_diff(sig, &levels)?.square())?;
        }
        Ok(acc)
    }

    /// Iterates Haar indices (mean excluded) in flat tensor order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<FactorIndex>> + '_ {
        (1..self.grid.len()).map(|flat| self.unflatten(flat))
    }
}

/// Walsh–Hadamard butterfly: `y[ε] = Σ_d (−1)^{popcount(ε & d)} x[d]`.
fn walsh<S: Scalar>(x: &mut [S]) {
    let mut h = 1;
    while h < x.len() {
        for i in (0..x.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (x[j], x[j + h]);
                x[j] = a + b;
                x[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Multilevel unnormalized Walsh–Haar analysis of one factor line into Mallat layout.
fn forward_line<S: Scalar>(line: &mut [S], scratch: &mut [S], digit: u32, levels: u32) {
    let width = 1usize << digit;
    for level in (0..levels).rev() {
        let parents = 1usize << (digit * level);
        scratch[..parents * width].copy_from_slice(&line[..parents * width]);
        for p in 0..parents {
            let group = &mut scratch[p * width..(p + 1) * width];
            walsh(group);
            line[p] = group[0];
            for (eps, &v) in group.iter().enumerate().skip(1) {
                line[eps * parents + p] = v;
            }
        }
    }
}

/// Transpose of [`forward_line`].
fn transpose_line<S: Scalar>(line: &mut [S], scratch: &mut [S], digit: u32, levels: u32) {
    let width = 1usize << digit;
    for level in 0..levels {
        let parents = 1usize << (digit * level);
        scratch[..parents * width].copy_from_slice(&line[..parents * width]);
        for p in 0..parents {
            let group = &mut line[p * width..(p + 1) * width];
            group[0] = scratch[p];
            for eps in 1..width {
                group[eps] = scratch[eps * parents + p];
            }
            walsh(group);
        }
    }
}

/// Coefficients in tensor (Mallat) layout; entry 0 is the mean term.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorCoefficients<S> {
    values: Vec<S>,
}

impl<S: Scalar> TensorCoefficients<S> {
    pub fn zeros(sys: &TensorSystem) -> Self {
        TensorCoefficients { values: vec![S::zero(); sys.grid.len()] }
    }

    pub fn get(&self, sys: &TensorSystem, idx: &[FactorIndex]) -> S {
        self.values[sys.flat_index(idx)]
    }

    pub fn set(&mut self, sys: &TensorSystem, idx: &[FactorIndex], v: S) -> Result<()> {
        sys.validate_index(idx)?;
        self.values[sys.flat_index(idx)] = v;
        Ok(())
    }

    /// Mean-term coefficient `⟨f, 1⟩ / |torus|^{1/2}`.
    pub fn mean_term(&self) -> S {
        self.values[0]
    }

    /// Drops the mean term and everything outside the window.
    pub fn restricted(&self, sys: &TensorSystem, window: &ScaleWindow) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(flat, &v)| {
                let levels = sys.level_key(flat);
                if flat != 0 && window.contains(&levels) {
                    v
                } else {
                    S::zero()
                }
            })
            .collect();
        TensorCoefficients { values }
    }

    /// `Σ |c|²` over Haar entries (mean excluded).
    pub fn energy(&self) -> S {
        let mut acc = S::zero();
        for &v in &self.values[1..] {
            acc += v * v;
        }
        acc
    }

    /// Haar entries in flat order, mean excluded.
    pub fn iter<'a>(&'a self, sys: &'a TensorSystem) -> impl Iterator<Item = (Vec<FactorIndex>, S)> + 'a {
        self.values.iter().enumerate().skip(1).map(move |(flat, &v)| (sys.unflatten(flat), v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
