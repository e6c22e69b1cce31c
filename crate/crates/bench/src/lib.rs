//! Fixtures shared by the benchmarks.

use twisted_haar::geometry::{FactorSpec, Profile};
use twisted_haar::grid::random_signal;
use twisted_haar::{Euclid, ExactSignal, Law, NilShape, NilSystem, TorusGrid};

/// Euclidean 2D torus with `2^res` cells per axis and a seeded signal on it.
pub fn euclid_fixture(res: i32) -> (Euclid, ExactSignal) {
    let grid = TorusGrid::uniform(2, 0, res).expect("valid grid");
    let e = Euclid::new(&grid).expect("two identical axes");
    let f = random_signal(&grid, 1, Law::Uniform);
    (e, f)
}

pub fn nil_fixture(levels: u32) -> (NilSystem, ExactSignal) {
    let sys = NilSystem::new(NilShape::new([1, 1, 1], levels, 0, 0)).expect("valid shape");
    let f = random_signal(sys.grid(), 1, Law::Uniform);
    (sys, f)
}

pub fn staircase_specs(kappa: i32) -> [FactorSpec; 3] {
    [
        FactorSpec::new(1, 1, Profile::staircase(1, 2, 1), kappa),
        FactorSpec::new(2, 1, Profile::staircase(1, 2, 2), kappa),
        FactorSpec::zero(3, kappa),
    ]
}
