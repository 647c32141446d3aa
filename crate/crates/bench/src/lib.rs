//! Shared fixtures for the criterion benches in `benches/`.

use clicksim::reporting::{generate_phantoms, PHANTOM_SHAPE};
use clicksim::{Mask2D, Mask3D, Volume, VoxelData};

/// Ground truth of the first phantom case for `label`.
pub fn phantom_gt(label: u32) -> Mask3D {
    let case = &generate_phantoms(0)[0];
    let [nx, ny, nz] = PHANTOM_SHAPE;
    let mut m = Mask3D::new(PHANTOM_SHAPE);
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                if case.label(x, y, z) == label {
                    m.set(x, y, z, true);
                }
            }
        }
    }
    m
}

pub fn blank_image(shape: [usize; 3]) -> Volume {
    Volume::new(shape, [1.0; 3], VoxelData::U8(vec![0; shape.iter().product()])).expect("valid shape")
}

/// A CT-sized slice with a few overlapping discs, roughly the shape of
/// abdominal organ error regions.
pub fn disc_slice(side: usize) -> Mask2D {
    let mut m = Mask2D::new(side, side);
    let s = side as f64;
    let discs = [(0.3, 0.3, 0.12), (0.6, 0.4, 0.2), (0.45, 0.75, 0.08), (0.8, 0.8, 0.05)];
    for r in 0..side {
        for c in 0..side {
            let inside = discs.iter().any(|&(cr, cc, rad)| {
                let (dr, dc) = (r as f64 / s - cr, c as f64 / s - cc);
                dr * dr + dc * dc <= rad * rad
            });
            m.set(r, c, inside);
        }
    }
    m
}
