//! Binary masks and the morphology used to place simulated clicks.
//!
//! A [`Mask2D`] is one axial plane: rows run along the first volume axis
//! (x) and columns along the second (y). A [`Mask3D`] stacks planes along
//! the third axis.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("region is empty")]
    EmptyRegion,
    #[error("mask is empty")]
    EmptyMask,
    #[error("slice index {index} out of range for {len} slices")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelPoint {
    pub row: usize,
    pub col: usize,
}

impl PixelPoint {
    pub fn new(row: usize, col: usize) -> Self {
        PixelPoint { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {}", other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask2D {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask2D {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "mask dimensions must be positive");
        Mask2D {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    /// Build from row-major bits.
    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Self {
        assert!(rows >= 1 && cols >= 1, "mask dimensions must be positive");
        assert_eq!(bits.len(), rows * cols, "bit count does not match shape");
        Mask2D { rows, cols, bits }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::from_bits(rows, cols, vec![true; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.cols + col] = value;
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        p.row < self.rows && p.col < self.cols && self.get(p.row, p.col)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixels in row-major order.
    pub fn points(&self) -> impl Iterator<Item = PixelPoint> + '_ {
        let cols = self.cols;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| PixelPoint::new(i / cols, i % cols))
    }

    fn zip_with(&self, other: &Mask2D, f: impl Fn(bool, bool) -> bool) -> Mask2D {
        assert_eq!(self.shape(), other.shape(), "mask shapes differ");
        Mask2D {
            rows: self.rows,
            cols: self.cols,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn and(&self, other: &Mask2D) -> Mask2D {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn and_not(&self, other: &Mask2D) -> Mask2D {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn or(&self, other: &Mask2D) -> Mask2D {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn is_subset_of(&self, other: &Mask2D) -> bool {
        self.shape() == other.shape() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn neighbor(&self, row: usize, col: usize, dr: isize, dc: isize) -> Option<(usize, usize)> {
        let r = row.checked_add_signed(dr)?;
        let c = col.checked_add_signed(dc)?;
        (r < self.rows && c < self.cols).then_some((r, c))
    }
}

/// Slice-stacked binary volume. Plane `z` is stored contiguously.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask3D {
    shape: [usize; 3],
    bits: Vec<bool>,
}

impl Mask3D {
    pub fn new(shape: [usize; 3]) -> Self {
        assert!(shape.iter().all(|&n| n >= 1), "mask dimensions must be positive");
        Mask3D {
            shape,
            bits: vec![false; shape.iter().product()],
        }
    }

    pub fn from_slices(slices: &[Mask2D]) -> Self {
        assert!(!slices.is_empty(), "need at least one slice");
        let [rows, cols] = slices[0].shape();
        let mut bits = Vec::with_capacity(rows * cols * slices.len());
        for s in slices {
            assert_eq!(s.shape(), [rows, cols], "slice shapes differ");
            bits.extend_from_slice(&s.bits);
        }
        Mask3D {
            shape: [rows, cols, slices.len()],
            bits,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn depth(&self) -> usize {
        self.shape[2]
    }

    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.shape[0] + x) * self.shape[1] + y
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn plane(&self, z: usize) -> &[bool] {
        let n = self.shape[0] * self.shape[1];
        &self.bits[z * n..(z + 1) * n]
    }

    pub fn slice_count(&self, z: usize) -> usize {
        self.plane(z).iter().filter(|&&b| b).count()
    }

    /// Owned copy of plane `z`.
    pub fn slice_of(&self, z: usize) -> Result<Mask2D, MaskError> {
        if z >= self.shape[2] {
            return Err(MaskError::IndexOutOfRange {
                index: z,
                len: self.shape[2],
            });
        }
        Ok(Mask2D::from_bits(self.shape[0], self.shape[1], self.plane(z).to_vec()))
    }

    pub fn set_slice(&mut self, z: usize, slice: &Mask2D) -> Result<(), MaskError> {
        if z >= self.shape[2] {
            return Err(MaskError::IndexOutOfRange {
                index: z,
                len: self.shape[2],
            });
        }
        if slice.shape() != [self.shape[0], self.shape[1]] {
            return Err(MaskError::ShapeMismatch(
                slice.shape().to_vec(),
                self.shape[..2].to_vec(),
            ));
        }
        let n = self.shape[0] * self.shape[1];
        self.bits[z * n..(z + 1) * n].copy_from_slice(&slice.bits);
        Ok(())
    }

    pub fn slices(&self) -> impl Iterator<Item = Mask2D> + '_ {
        (0..self.shape[2]).map(|z| Mask2D::from_bits(self.shape[0], self.shape[1], self.plane(z).to_vec()))
    }

    /// Bits in C order over `[nx, ny, nz]` (z fastest).
    pub fn to_c_order(&self) -> Vec<bool> {
        let [nx, ny, nz] = self.shape;
        let mut out = Vec::with_capacity(self.bits.len());
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    out.push(self.get(x, y, z));
                }
            }
        }
        out
    }

    pub fn from_c_order(shape: [usize; 3], bits: &[bool]) -> Self {
        assert_eq!(
            bits.len(),
            shape.iter().product::<usize>(),
            "bit count does not match shape"
        );
        let mut m = Mask3D::new(shape);
        let mut it = bits.iter();
        for x in 0..shape[0] {
            for y in 0..shape[1] {
                for z in 0..shape[2] {
                    m.set(x, y, z, *it.next().unwrap());
                }
            }
        }
        m
    }
}

/// 3x3 square erosion; pixels whose neighborhood leaves the image are cleared.
pub fn erode3x3(mask: &Mask2D) -> Mask2D {
    let (rows, cols) = (mask.rows, mask.cols);
    let mut out = Mask2D::new(rows, cols);
    if rows < 3 || cols < 3 {
        return out;
    }
    for r in 1..rows - 1 {
        for c in 1..cols - 1 {
            let keep = (r - 1..=r + 1).all(|rr| (c - 1..=c + 1).all(|cc| mask.get(rr, cc)));
            if keep {
                out.set(r, c, true);
            }
        }
    }
    out
}

/// One-step 3x3 dilation, repeated `steps` times.
pub fn dilate3x3(mask: &Mask2D, steps: usize) -> Mask2D {
    let mut cur = mask.clone();
    for _ in 0..steps {
        let mut next = cur.clone();
        for p in cur.points() {
            for &(dr, dc) in Connectivity::Eight.offsets() {
                if let Some((r, c)) = cur.neighbor(p.row, p.col, dr, dc) {
                    next.set(r, c, true);
                }
            }
        }
        cur = next;
    }
    cur
}

/// Components sorted by size descending; equal sizes keep row-major order of
/// their first pixel.
pub fn connected_components(mask: &Mask2D, connectivity: Connectivity) -> Vec<Mask2D> {
    let (rows, cols) = (mask.rows, mask.cols);
    let mut seen = vec![false; rows * cols];
    let mut comps: Vec<(usize, Mask2D)> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..rows * cols {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        let mut comp = Mask2D::new(rows, cols);
        let mut size = 0;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            comp.bits[i] = true;
            size += 1;
            let (r, c) = (i / cols, i % cols);
            for &(dr, dc) in connectivity.offsets() {
                if let Some((nr, nc)) = mask.neighbor(r, c, dr, dc) {
                    let j = nr * cols + nc;
                    if mask.bits[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comps.push((size, comp));
    }
    comps.sort_by_key(|c| std::cmp::Reverse(c.0));
    comps.into_iter().map(|(_, m)| m).collect()
}

pub fn largest_component(mask: &Mask2D, connectivity: Connectivity) -> Result<Mask2D, MaskError> {
    connected_components(mask, connectivity)
        .into_iter()
        .next()
        .ok_or(MaskError::EmptyRegion)
}

/// Chessboard distance of every pixel to the nearest background pixel,
/// treating everything outside the image as background. Background pixels
/// get 0.
pub fn chessboard_distance(mask: &Mask2D) -> Vec<u32> {
    let (rows, cols) = (mask.rows, mask.cols);
    let inf = u32::MAX / 2;
    let mut d: Vec<u32> = mask.bits.iter().map(|&b| if b { inf } else { 0 }).collect();
    let at = |d: &Vec<u32>, r: isize, c: isize| -> u32 {
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            0
        } else {
            d[r as usize * cols + c as usize]
        }
    };
    for r in 0..rows as isize {
        for c in 0..cols as isize {
            let i = r as usize * cols + c as usize;
            if d[i] == 0 {
                continue;
            }
            let m = at(&d, r - 1, c - 1)
                .min(at(&d, r - 1, c))
                .min(at(&d, r - 1, c + 1))
                .min(at(&d, r, c - 1));
            d[i] = d[i].min(m + 1);
        }
    }
    for r in (0..rows as isize).rev() {
        for c in (0..cols as isize).rev() {
            let i = r as usize * cols + c as usize;
            if d[i] == 0 {
                continue;
            }
            let m = at(&d, r + 1, c + 1)
                .min(at(&d, r + 1, c))
                .min(at(&d, r + 1, c - 1))
                .min(at(&d, r, c + 1));
            d[i] = d[i].min(m + 1);
        }
    }
    d
}

/// The pixel deepest inside the region (chessboard metric), lowest row then
/// column on ties. Always a foreground pixel.
pub fn interior_center(region: &Mask2D) -> Result<PixelPoint, MaskError> {
    let d = chessboard_distance(region);
    let mut best: Option<(u32, usize)> = None;
    for (i, &v) in d.iter().enumerate() {
        if region.bits[i] && best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, i));
        }
    }
    best.map(|(_, i)| PixelPoint::new(i / region.cols, i % region.cols))
        .ok_or(MaskError::EmptyRegion)
}

/// Starting slice and first positive click: the slice holding the 3D
/// foreground centroid (or the nearest non-empty one), and the interior
/// center of that slice's largest 8-connected component.
pub fn foreground_seed(gt: &Mask3D) -> Result<(usize, PixelPoint), MaskError> {
    let nz = gt.depth();
    let mut total = 0usize;
    let mut z_sum = 0usize;
    for z in 0..nz {
        let n = gt.slice_count(z);
        total += n;
        z_sum += n * z;
    }
    if total == 0 {
        return Err(MaskError::EmptyMask);
    }
    let centroid = z_sum as f64 / total as f64;
    let target = (centroid.round() as usize).min(nz - 1);
    let slice = (0..nz)
        .filter(|&z| gt.slice_count(z) > 0)
        .min_by_key(|&z| (z.abs_diff(target), z))
        .expect("non-empty mask has a non-empty slice");
    let plane = gt.slice_of(slice)?;
    let comp = largest_component(&plane, Connectivity::Eight)?;
    Ok((slice, interior_center(&comp)?))
}
