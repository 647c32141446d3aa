//! Synthetic CT-like phantoms with analytically known ground truth.
//!
//! Each case holds one ellipsoid "organ" (label 1, a single connected
//! object) and a "lesion" (label 2) made of two or three separate blobs that
//! share a central slice. Slices are thick relative to the in-plane
//! spacing, so objects span only a few slices of the stack.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestCase};
use super::{io_err, write_json, ReportError};
use crate::volume_io::{write_nifti, Volume, VoxelData};

pub const PHANTOM_SHAPE: [usize; 3] = [48, 48, 32];
pub const PHANTOM_SPACING: [f32; 3] = [1.5, 1.5, 5.0];
pub const PHANTOM_CASES: usize = 6;
pub const ORGAN_LABEL: u32 = 1;
pub const LESION_LABEL: u32 = 2;

const AIR_HU: i16 = -1000;
const BODY_HU: i16 = 40;
const ORGAN_HU: i16 = 110;
const LESION_HU: i16 = 170;
const NOISE_HU: i16 = 15;

/// Axis-aligned ellipsoid in voxel coordinates; a voxel belongs to it when
/// its index lies inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [usize; 3],
    pub radii: [f64; 3],
}

impl Ellipsoid {
    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let q = |i: usize, c: usize, r: f64| {
            let d = (i as f64 - c as f64) / r;
            d * d
        };
        q(x, self.center[0], self.radii[0]) + q(y, self.center[1], self.radii[1]) + q(z, self.center[2], self.radii[2])
            <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomCase {
    pub case_id: String,
    pub organ: Ellipsoid,
    pub lesions: Vec<Ellipsoid>,
}

impl PhantomCase {
    /// Label id at a voxel.
    pub fn label(&self, x: usize, y: usize, z: usize) -> u32 {
        if self.lesions.iter().any(|l| l.contains(x, y, z)) {
            LESION_LABEL
        } else if self.organ.contains(x, y, z) {
            ORGAN_LABEL
        } else {
            0
        }
    }
}

/// Geometry of every phantom case for `seed`.
pub fn generate_phantoms(seed: u64) -> Vec<PhantomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..PHANTOM_CASES)
        .map(|i| {
            let organ = Ellipsoid {
                center: [rng.gen_range(14..=20), rng.gen_range(14..=24), rng.gen_range(12..=19)],
                radii: [
                    rng.gen_range(6.0..9.5),
                    rng.gen_range(6.0..9.5),
                    rng.gen_range(2.0..3.6),
                ],
            };
            let blobs = rng.gen_range(2..=3);
            let cz = rng.gen_range(8..=23);
            let lesions = (0..blobs)
                .map(|b| Ellipsoid {
                    center: [rng.gen_range(34..=38), 10 + 13 * b, cz],
                    radii: [
                        rng.gen_range(2.5..4.0),
                        rng.gen_range(2.5..4.0),
                        rng.gen_range(1.0..2.5),
                    ],
                })
                .collect();
            PhantomCase {
                case_id: format!("phantom_{:03}", i),
                organ,
                lesions,
            }
        })
        .collect()
}

fn render(case: &PhantomCase, rng: &mut ChaCha8Rng) -> (Volume, Volume) {
    let [nx, ny, nz] = PHANTOM_SHAPE;
    let mut image = Vec::with_capacity(nx * ny * nz);
    let mut labels = Vec::with_capacity(nx * ny * nz);
    let body_r2 = 23.0f64 * 23.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let label = case.label(x, y, z);
                let (dx, dy) = (x as f64 - 23.5, y as f64 - 23.5);
                let base = match label {
                    ORGAN_LABEL => ORGAN_HU,
                    LESION_LABEL => LESION_HU,
                    _ if dx * dx + dy * dy <= body_r2 => BODY_HU,
                    _ => AIR_HU,
                };
                image.push(base + rng.gen_range(-NOISE_HU..=NOISE_HU));
                labels.push(label as u8);
            }
        }
    }
    let image = Volume::new(PHANTOM_SHAPE, PHANTOM_SPACING, VoxelData::I16(image)).expect("phantom geometry is valid");
    let labels = Volume::new(PHANTOM_SHAPE, PHANTOM_SPACING, VoxelData::U8(labels)).expect("phantom geometry is valid");
    (image, labels)
}

/// Write phantom images, label maps, and `manifest.json` under `out_dir`.
/// Identical seeds give byte-identical files.
pub fn make_phantoms(out_dir: &Path, seed: u64) -> Result<DatasetManifest, ReportError> {
    for sub in ["images", "labels"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cases = Vec::new();
    for case in generate_phantoms(seed) {
        let (image, labels) = render(&case, &mut rng);
        let image_rel = PathBuf::from("images").join(format!("{}.nii.gz", case.case_id));
        let label_rel = PathBuf::from("labels").join(format!("{}.nii.gz", case.case_id));
        write_nifti(&image, out_dir.join(&image_rel))?;
        write_nifti(&labels, out_dir.join(&label_rel))?;
        cases.push(ManifestCase {
            case_id: case.case_id,
            image_path: image_rel,
            label_path: label_rel,
        });
    }
    let manifest = DatasetManifest {
        name: "phantoms".to_string(),
        cases,
        labels: BTreeMap::from([("organ".to_string(), ORGAN_LABEL), ("lesion".to_string(), LESION_LABEL)]),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
