//! Brute-force reference implementations and random fixtures. These use
//! deliberately different algorithms from the library (direct neighbourhood
//! scans, union-find, exhaustive distance search) so agreement is evidence.

#![allow(dead_code)]

use clicksim::{Mask2D, Mask3D, PixelPoint};
use rand::Rng;

pub fn random_mask<R: Rng>(rng: &mut R, max_side: usize) -> Mask2D {
    let rows = rng.gen_range(1..=max_side);
    let cols = rng.gen_range(1..=max_side);
    let density = rng.gen_range(0.05..0.95);
    let bits = (0..rows * cols).map(|_| rng.gen_bool(density)).collect();
    Mask2D::from_bits(rows, cols, bits)
}

/// Random union of axis-aligned boxes, which gives thick regions that
/// survive erosion more often than white noise.
pub fn random_blobs<R: Rng>(rng: &mut R, rows: usize, cols: usize, boxes: usize) -> Mask2D {
    let mut m = Mask2D::new(rows, cols);
    for _ in 0..boxes {
        let r0 = rng.gen_range(0..rows);
        let c0 = rng.gen_range(0..cols);
        let h = rng.gen_range(1..=(rows - r0).min(12));
        let w = rng.gen_range(1..=(cols - c0).min(12));
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                m.set(r, c, true);
            }
        }
    }
    m
}

pub fn random_volume<R: Rng>(rng: &mut R, shape: [usize; 3], density: f64) -> Mask3D {
    let mut m = Mask3D::new(shape);
    for z in 0..shape[2] {
        // leave some slices empty so both conventions differ
        if rng.gen_bool(0.3) {
            continue;
        }
        for x in 0..shape[0] {
            for y in 0..shape[1] {
                if rng.gen_bool(density) {
                    m.set(x, y, z, true);
                }
            }
        }
    }
    m
}

pub fn erode_bf(m: &Mask2D) -> Mask2D {
    let (rows, cols) = (m.rows() as isize, m.cols() as isize);
    let mut out = Mask2D::new(m.rows(), m.cols());
    for r in 0..rows {
        for c in 0..cols {
            let mut all = true;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= rows || cc >= cols || !m.get(rr as usize, cc as usize) {
                        all = false;
                    }
                }
            }
            out.set(r as usize, c as usize, all);
        }
    }
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Components via union-find, ordered by size descending and then by the
/// row-major position of their first pixel.
pub fn components_bf(m: &Mask2D, eight: bool) -> Vec<Mask2D> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut parent: Vec<usize> = (0..rows * cols).collect();
    let mut offsets = vec![(0isize, 1isize), (1, 0)];
    if eight {
        offsets.extend([(1, 1), (1, -1)]);
    }
    for r in 0..rows {
        for c in 0..cols {
            if !m.get(r, c) {
                continue;
            }
            for &(dr, dc) in &offsets {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                    continue;
                }
                if m.get(rr as usize, cc as usize) {
                    let a = find(&mut parent, r * cols + c);
                    let b = find(&mut parent, rr as usize * cols + cc as usize);
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut root_of_group = std::collections::HashMap::new();
    for i in 0..rows * cols {
        if !m.bits()[i] {
            continue;
        }
        let root = find(&mut parent, i);
        let g = *root_of_group.entry(root).or_insert_with(|| {
            groups.push((i, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    groups
        .into_iter()
        .map(|(_, pixels)| {
            let mut out = Mask2D::new(rows, cols);
            for i in pixels {
                out.set(i / cols, i % cols, true);
            }
            out
        })
        .collect()
}

/// Exhaustive chessboard distance to the nearest background pixel, where
/// the ring just outside the image counts as background.
pub fn depth_bf(m: &Mask2D, r: usize, c: usize) -> usize {
    let (rows, cols) = (m.rows(), m.cols());
    let mut best = (r + 1).min(c + 1).min(rows - r).min(cols - c);
    for rr in 0..rows {
        for cc in 0..cols {
            if !m.get(rr, cc) {
                best = best.min(rr.abs_diff(r).max(cc.abs_diff(c)));
            }
        }
    }
    best
}

pub fn interior_center_bf(m: &Mask2D) -> Option<PixelPoint> {
    let mut best: Option<(usize, usize, usize)> = None;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            if m.get(r, c) {
                let d = depth_bf(m, r, c);
                if best.is_none_or(|(bd, _, _)| d > bd) {
                    best = Some((d, r, c));
                }
            }
        }
    }
    best.map(|(_, r, c)| PixelPoint::new(r, c))
}

pub fn seed_bf(gt: &Mask3D) -> Option<(usize, PixelPoint)> {
    let [nx, ny, nz] = gt.shape();
    let (mut n, mut zs) = (0.0f64, 0.0f64);
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                if gt.get(x, y, z) {
                    n += 1.0;
                    zs += z as f64;
                }
            }
        }
    }
    if n == 0.0 {
        return None;
    }
    let target = (zs / n).round() as i64;
    let mut best: Option<usize> = None;
    for z in 0..nz {
        if gt.slice_of(z).unwrap().is_empty() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => (z as i64 - target).abs() < (b as i64 - target).abs(),
        };
        if better {
            best = Some(z);
        }
    }
    let z = best?;
    let largest = components_bf(&gt.slice_of(z).unwrap(), true).into_iter().next()?;
    Some((z, interior_center_bf(&largest)?))
}

/// Volumetric Dice recomputed voxel by voxel, plus the counts behind it:
/// `(with, without, intersection, predicted voxels on empty-gt slices)`.
pub fn dice_bf(pred: &Mask3D, gt: &Mask3D) -> (f64, f64, usize, usize) {
    let [nx, ny, nz] = gt.shape();
    let (mut i, mut p, mut g, mut p_fg) = (0usize, 0usize, 0usize, 0usize);
    for z in 0..nz {
        let mut slice_has_gt = false;
        for x in 0..nx {
            for y in 0..ny {
                slice_has_gt |= gt.get(x, y, z);
            }
        }
        for x in 0..nx {
            for y in 0..ny {
                let (a, b) = (pred.get(x, y, z), gt.get(x, y, z));
                i += usize::from(a && b);
                p += usize::from(a);
                g += usize::from(b);
                if slice_has_gt {
                    p_fg += usize::from(a);
                }
            }
        }
    }
    let d = |p: usize| {
        if p + g == 0 {
            1.0
        } else {
            2.0 * i as f64 / (p + g) as f64
        }
    };
    (d(p_fg), d(p), i, p - p_fg)
}

/// Compare every morphology operation against its reference on `cases`
/// random 2D masks plus `cases` random volumes for seeding. Returns the
/// descriptions of any disagreements.
pub fn morphology_mismatches(seed: u64, cases: usize) -> Vec<String> {
    use clicksim::{connected_components, erode3x3, foreground_seed, interior_center, Connectivity};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for case in 0..cases {
        let m = if case % 2 == 0 {
            random_mask(&mut rng, 32)
        } else {
            let (rows, cols) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
            let boxes = rng.gen_range(1..6);
            random_blobs(&mut rng, rows, cols, boxes)
        };
        if erode3x3(&m) != erode_bf(&m) {
            bad.push(format!("erode3x3 case {case}"));
        }
        for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            if connected_components(&m, conn) != components_bf(&m, eight) {
                bad.push(format!("connected_components/{eight} case {case}"));
            }
        }
        if interior_center(&m).ok() != interior_center_bf(&m) {
            bad.push(format!("interior_center case {case}"));
        }

        let shape = [rng.gen_range(1..=16), rng.gen_range(1..=16), rng.gen_range(1..=16)];
        let density = rng.gen_range(0.0..0.6);
        let vol = random_volume(&mut rng, shape, density);
        if foreground_seed(&vol).ok() != seed_bf(&vol) {
            bad.push(format!("foreground_seed case {case} shape {shape:?}"));
        }
    }
    bad
}

/// Check `with >= without` and `with == without <=> (no predicted voxel on
/// an empty-gt slice, or no overlap at all)` on random pairs, and that both
/// values agree with the voxel-level reference.
pub fn dice_theorem_violations(seed: u64, cases: usize) -> Vec<String> {
    use clicksim::dice3d;
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    let mut done = 0;
    while done < cases {
        let shape = [rng.gen_range(1..=12), rng.gen_range(1..=12), rng.gen_range(1..=12)];
        let gt_density = rng.gen_range(0.05..0.7);
        let gt = random_volume(&mut rng, shape, gt_density);
        if gt.is_empty() {
            continue;
        }
        let pred_density = rng.gen_range(0.0..0.7);
        let pred = random_volume(&mut rng, shape, pred_density);
        let with = dice3d(&pred, &gt, true).unwrap();
        let without = dice3d(&pred, &gt, false).unwrap();
        let (ref_with, ref_without, overlap, stray) = dice_bf(&pred, &gt);
        if with != ref_with || without != ref_without {
            bad.push(format!("case {done}: values differ from reference"));
        }
        if with < without {
            bad.push(format!("case {done}: with {with} < without {without}"));
        }
        if (with == without) != (stray == 0 || overlap == 0) {
            bad.push(format!(
                "case {done}: equality {} but stray={stray} overlap={overlap}",
                with == without
            ));
        }
        done += 1;
    }
    bad
}

/// Numeric fields of the 348-byte header as `(offset, width, count)`.
const HEADER_FIELDS: &[(usize, usize, usize)] = &[
    (0, 4, 1),    // sizeof_hdr
    (32, 4, 1),   // extents
    (36, 2, 1),   // session_error
    (40, 2, 8),   // dim
    (56, 4, 3),   // intent_p1..p3
    (68, 2, 4),   // intent_code, datatype, bitpix, slice_start
    (76, 4, 8),   // pixdim
    (108, 4, 3),  // vox_offset, scl_slope, scl_inter
    (120, 2, 1),  // slice_end
    (124, 4, 4),  // cal_max, cal_min, slice_duration, toffset
    (140, 4, 2),  // glmax, glmin
    (252, 2, 2),  // qform_code, sform_code
    (256, 4, 18), // quatern_*, qoffset_*, srow_*
];

/// Rewrite a little-endian single-file image as its big-endian twin by
/// swapping every numeric header field and every voxel.
pub fn byte_swap_nifti(le: &[u8], bytes_per_voxel: usize) -> Vec<u8> {
    let mut out = le.to_vec();
    for &(offset, width, count) in HEADER_FIELDS {
        for k in 0..count {
            let at = offset + k * width;
            out[at..at + width].reverse();
        }
    }
    for voxel in out[352..].chunks_mut(bytes_per_voxel) {
        voxel.reverse();
    }
    out
}

/// A volume of the given type filled with seeded values that include the
/// type's extremes.
pub fn random_typed_volume<R: Rng>(rng: &mut R, datatype: clicksim::DataType) -> clicksim::Volume {
    use clicksim::{DataType, Volume, VoxelData};
    let shape = [rng.gen_range(1..=9), rng.gen_range(1..=9), rng.gen_range(1..=7)];
    let n = shape.iter().product::<usize>();
    macro_rules! fill {
        ($t:ty) => {{
            let mut v: Vec<$t> = (0..n).map(|_| rng.gen()).collect();
            v[0] = <$t>::MIN;
            v[n - 1] = <$t>::MAX;
            v
        }};
    }
    let data = match datatype {
        DataType::U8 => VoxelData::U8(fill!(u8)),
        DataType::I16 => VoxelData::I16(fill!(i16)),
        DataType::I32 => VoxelData::I32(fill!(i32)),
        DataType::U16 => VoxelData::U16(fill!(u16)),
        DataType::F32 => VoxelData::F32((0..n).map(|_| rng.gen_range(-3000.0f32..3000.0)).collect()),
        DataType::F64 => VoxelData::F64((0..n).map(|_| rng.gen_range(-1e9f64..1e9)).collect()),
    };
    let spacing = [
        rng.gen_range(0.3f32..2.0),
        rng.gen_range(0.3f32..2.0),
        rng.gen_range(0.5f32..6.0),
    ];
    Volume::new(shape, spacing, data).expect("consistent volume")
}

/// Write→read every supported datatype (plain and gzip) and parse a
/// byte-swapped twin of each. Returns descriptions of any failures.
pub fn nifti_round_trip_failures(dir: &std::path::Path, seed: u64) -> Vec<String> {
    use clicksim::volume_io::{decode_nifti, encode_nifti};
    use clicksim::{read_nifti, write_nifti, DataType};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for (i, &dt) in DataType::ALL.iter().enumerate() {
        let vol = random_typed_volume(&mut rng, dt);
        for ext in ["nii", "nii.gz"] {
            let path = dir.join(format!("rt_{i}.{ext}"));
            if let Err(e) = write_nifti(&vol, &path) {
                bad.push(format!("{}: write {ext}: {e}", dt.name()));
                continue;
            }
            match read_nifti(&path) {
                Ok(back) if back == vol => {}
                Ok(_) => bad.push(format!("{}: {ext} round trip differs", dt.name())),
                Err(e) => bad.push(format!("{}: read {ext}: {e}", dt.name())),
            }
        }
        let native = encode_nifti(&vol).expect("encodes");
        let swapped = byte_swap_nifti(&native, dt.bytes_per_voxel());
        if dt.bytes_per_voxel() > 1 && swapped == native {
            bad.push(format!("{}: swap fixture is not actually swapped", dt.name()));
        }
        match (decode_nifti(&native), decode_nifti(&swapped)) {
            (Ok(a), Ok(b)) if a == b && a == vol => {}
            (Ok(_), Ok(_)) => bad.push(format!("{}: byte-swapped twin parses differently", dt.name())),
            (a, b) => bad.push(format!("{}: decode failed: {:?} / {:?}", dt.name(), a.err(), b.err())),
        }
    }
    bad
}

/// Budget rules every result must satisfy: at most `initial` clicks on pass
/// 1, at most `correction` afterwards, at most `max_slices` passes on
/// distinct slices, and every click on its pass's slice.
pub fn budget_violations(
    result: &clicksim::SimulationResult,
    initial: usize,
    correction: usize,
    max_slices: usize,
) -> Vec<String> {
    let mut bad = Vec::new();
    let id = &result.case_id;
    if result.passes.len() > max_slices {
        bad.push(format!("{id}: {} passes", result.passes.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (i, p) in result.passes.iter().enumerate() {
        let limit = if i == 0 { initial } else { correction };
        if p.clicks.len() > limit || p.clicks.is_empty() {
            bad.push(format!("{id}: pass {} has {} clicks", i + 1, p.clicks.len()));
        }
        if p.pass_index != i + 1 {
            bad.push(format!("{id}: pass index {} at position {}", p.pass_index, i + 1));
        }
        if !seen.insert(p.annotated_slice) {
            bad.push(format!("{id}: slice {} annotated twice", p.annotated_slice));
        }
        if p.clicks.iter().any(|c| c.slice != p.annotated_slice) {
            bad.push(format!("{id}: pass {} has a click off its slice", i + 1));
        }
    }
    bad
}

/// Ground-truth mask of one label in a generated phantom.
pub fn phantom_mask(case: &clicksim::reporting::PhantomCase, label: u32) -> Mask3D {
    let shape = clicksim::reporting::PHANTOM_SHAPE;
    let mut m = Mask3D::new(shape);
    for x in 0..shape[0] {
        for y in 0..shape[1] {
            for z in 0..shape[2] {
                if case.label(x, y, z) == label {
                    m.set(x, y, z, true);
                }
            }
        }
    }
    m
}

pub fn foreground_slices(gt: &Mask3D) -> usize {
    (0..gt.depth()).filter(|&z| gt.slice_count(z) > 0).count()
}
