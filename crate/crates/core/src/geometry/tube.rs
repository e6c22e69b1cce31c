//! Model quotient tubes and the minimal `σ` with `T(gζ, 2^{j−σ}) ⊂ P ⊂ T(g, 2^{j+σ})`.

use super::region::FiberedRegion;
use super::shard::{Case, Shard};
use super::{contained, Frame, Interval, Piece};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// A box tube in oriented coordinates: spatial cubes per factor and a central box in the
/// regime's natural frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeModel {
    pub case: Case,
    /// Scale of the tube (not necessarily the shard's scale).
    pub scale: [i32; 3],
    pub frame: Frame,
    pub center_spatial: [Dyadic; 3],
    pub half_spatial: [Dyadic; 3],
    pub central: Piece,
}

impl TubeModel {
    /// Central half-widths: `(2^{2j1}, 2^{2j2})` in the product regime, `(2^{2j1}, 2^{2j3})`
    /// otherwise (rectified in the slanted regime).
    pub fn new(case: Case, frame: Frame, scale: [i32; 3], center_spatial: [Dyadic; 3], center_central: (Dyadic, Dyadic)) -> Self {
        let second = if case == Case::I { scale[1] } else { scale[2] };
        let central = Piece::rect(
            Interval::centered(center_central.0, Dyadic::pow2(2 * scale[0])),
            Interval::centered(center_central.1, Dyadic::pow2(2 * second)),
        );
        TubeModel {
            case,
            scale,
            frame,
            center_spatial,
            half_spatial: [Dyadic::pow2(scale[0]), Dyadic::pow2(scale[1]), Dyadic::pow2(scale[2])],
            central,
        }
    }

    pub fn spatial_interval(&self, mu: usize) -> Interval {
        Interval::centered(self.center_spatial[mu], self.half_spatial[mu])
    }

    /// `tube ⊂ region`.
    pub fn inside(&self, region: &FiberedRegion<Piece>) -> bool {
        for (mu, b) in region.blocks.iter().enumerate() {
            let t = self.spatial_interval(mu);
            if !b.bounds().iter().all(|r| r.contains_interval(&t)) {
                return false;
            }
        }
        (0..region.num_cells()).all(|flat| {
            let meets = region
                .cell_box(flat)
                .iter()
                .enumerate()
                .all(|(mu, axes)| axes.iter().all(|a| a.overlaps(&self.spatial_interval(mu))));
            !meets || contained(&[self.central], region.fiber(flat))
        })
    }

    /// `region ⊂ tube`.
    pub fn contains(&self, region: &FiberedRegion<Piece>) -> bool {
        for (mu, b) in region.blocks.iter().enumerate() {
            let t = self.spatial_interval(mu);
            if !b.bounds().iter().all(|r| t.contains_interval(r)) {
                return false;
            }
        }
        region.fibers.iter().all(|f| contained(f, &[self.central]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SigmaReport {
    pub sigma: i32,
    /// Smallest `σ ≥ 0` for the inner inclusion alone.
    pub sigma_inner: i32,
    pub sigma_outer: i32,
    pub slack_inner: i32,
    pub slack_outer: i32,
}

/// Inner tube at `σ` for a shard translated by lattice multiples `position`
/// (spatial per factor, then the two natural central steps).
pub fn inner_tube(shard: &Shard, sigma: i32, position: [i64; 5]) -> TubeModel {
    let (sp, c) = offsets(shard, position);
    let oj = shard.oriented_j();
    let zeta = [0, 1, 2].map(|mu| Dyadic::pow2(oj[mu] - 1) + sp[mu]);
    TubeModel::new(shard.case, natural_frame(shard), oj.map(|j| j - sigma), zeta, c)
}

pub fn outer_tube(shard: &Shard, sigma: i32, position: [i64; 5]) -> TubeModel {
    let (sp, c) = offsets(shard, position);
    TubeModel::new(shard.case, natural_frame(shard), shard.oriented_j().map(|j| j + sigma), sp, c)
}

fn natural_frame(shard: &Shard) -> Frame {
    let t = if shard.swapped { Frame::TSwapped } else { Frame::T };
    if shard.case == Case::III {
        t.rectify()
    } else {
        t
    }
}

fn offsets(shard: &Shard, position: [i64; 5]) -> ([Dyadic; 3], (Dyadic, Dyadic)) {
    let oj = shard.oriented_j();
    let sp = [0, 1, 2].map(|mu| Dyadic::pow2(oj[mu]) * Dyadic::from_int(position[mu]));
    let (s1, s2) = shard.natural_steps();
    (sp, (s1 * Dyadic::from_int(position[3]), s2 * Dyadic::from_int(position[4])))
}

/// Minimal `σ ∈ [1, sigma_max]` for which both tube inclusions hold, with the shard placed
/// at the lattice point `position`.
pub fn tube_sigma_at(shard: &Shard, sigma_max: i32, position: [i64; 5]) -> Result<SigmaReport> {
    let (sp, c) = offsets(shard, position);
    let region = shard.natural().translate(&sp, c);
    let first = |holds: &dyn Fn(i32) -> bool| (0..=sigma_max).find(|&s| holds(s));
    let sigma_inner = first(&|s| inner_tube(shard, s, position).inside(&region));
    let sigma_outer = first(&|s| outer_tube(shard, s, position).contains(&region));
    match (sigma_inner, sigma_outer) {
        (Some(i), Some(o)) => {
            let sigma = i.max(o).max(1);
            Ok(SigmaReport { sigma, sigma_inner: i, sigma_outer: o, slack_inner: sigma - i, slack_outer: sigma - o })
        }
        _ => Err(Error::ComparisonFailure(format!(
            "no σ ≤ {sigma_max} for case {} at scale {:?} (inner {:?}, outer {:?})",
            shard.case.id(),
            shard.j,
            sigma_inner,
            sigma_outer
        ))),
    }
}

pub fn tube_sigma(shard: &Shard, sigma_max: i32) -> Result<SigmaReport> {
    tube_sigma_at(shard, sigma_max, [0; 5])
}

#[cfg(test)]
mod tests {
    use super::super::shard::{raw_shard, FactorSpec, Profile};
    use super::*;

    fn specs(kappa: i32, stair: bool) -> [FactorSpec; 3] {
        let p = |seed| if stair { Profile::staircase(1, 2, seed) } else { Profile::zero(1) };
        [FactorSpec::new(1, 1, p(1), kappa), FactorSpec::new(2, 1, p(2), kappa), FactorSpec::zero(3, kappa)]
    }

    #[test]
    fn sigma_is_scale_and_translation_invariant() {
        for (case, j) in [(Case::I, [1, 0, -1]), (Case::II, [2, 0, 1]), (Case::III, [0, 0, 1]), (Case::III, [0, 1, 2])] {
            let s = tube_sigma(&raw_shard(case, &specs(0, false), j).unwrap(), 10).unwrap();
            assert!(s.sigma >= 1);
            let shifted = raw_shard(case, &specs(0, false), j.map(|x| x + 1)).unwrap();
            assert_eq!(tube_sigma(&shifted, 10).unwrap(), s, "{case:?}");
            let base = raw_shard(case, &specs(0, false), j).unwrap();
            for pos in [[1, 0, -1, 2, 0], [-3, 2, 1, -1, 1], [0, 0, 0, 0, -2]] {
                assert_eq!(tube_sigma_at(&base, 10, pos).unwrap(), s);
            }
        }
    }

    #[test]
    fn inner_inclusion_needs_shrinking() {
        let shard = raw_shard(Case::I, &specs(0, false), [1, 0, -1]).unwrap();
        // At σ = 0 the inner tube's spatial cube already exceeds the shard's.
        assert!(!inner_tube(&shard, 0, [0; 5]).inside(&shard.natural()));
        assert!(inner_tube(&shard, 3, [0; 5]).inside(&shard.natural()));
    }

    #[test]
    fn profiles_and_stacking_change_sigma_only_boundedly() {
        let flat = tube_sigma(&raw_shard(Case::II, &specs(1, false), [2, 0, 1]).unwrap(), 10).unwrap();
        let stair = tube_sigma(&raw_shard(Case::II, &specs(1, true), [2, 0, 1]).unwrap(), 10).unwrap();
        assert!((flat.sigma - stair.sigma).abs() <= 1);
        assert!(tube_sigma(&raw_shard(Case::I, &specs(0, false), [1, 0, -1]).unwrap(), 0).is_err());
    }
}
