//! Fixtures shared by the benchmarks.

use chainfree::lattice::Band;
use chainfree::ForbiddenFamily;

pub fn four_color() -> ForbiddenFamily {
    ForbiddenFamily::from_lists(
        4,
        &[&[1, 1], &[1, 2], &[1, 3], &[1, 4], &[2, 1], &[2, 2], &[2, 3], &[2, 4], &[3, 2], &[3, 3], &[3, 4], &[4, 3], &[4, 4]],
    )
    .expect("valid family")
}

pub fn two_color() -> ForbiddenFamily {
    ForbiddenFamily::from_lists(2, &[&[1, 1], &[2, 2], &[2, 1]]).expect("valid family")
}

pub fn chain(k: usize) -> ForbiddenFamily {
    ForbiddenFamily::monochromatic_chain(k).expect("valid family")
}

pub fn middle(n: u32) -> Band {
    Band::closed_middle_third(n)
}
