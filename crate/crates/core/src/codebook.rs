//! k-means patch codebook and code grids.
//!
//! Images are cut into non-overlapping `patch × patch` RGB blocks; each block
//! is replaced by the index of its nearest codebook entry. A grid position may
//! also hold the MASK sentinel, which is always `K` (one past the last code).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::raster::{Raster, CHANNELS};
use crate::{Error, Result};

pub const DEFAULT_PATCH: usize = 16;
pub const DEFAULT_CODES: usize = 1024;
pub const MAX_ITERATIONS: usize = 50;
pub const CONVERGENCE_SHIFT: f64 = 1e-6;

const FILE_MAGIC: &[u8; 4] = b"ODCB";

/// Grid of code indices; `num_codes` doubles as the MASK sentinel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeGrid {
    rows: usize,
    cols: usize,
    num_codes: usize,
    codes: Vec<u32>,
}

impl CodeGrid {
    /// Grid with every position masked.
    pub fn masked(rows: usize, cols: usize, num_codes: usize) -> Self {
        Self {
            rows,
            cols,
            num_codes,
            codes: vec![num_codes as u32; rows * cols],
        }
    }

    pub fn from_codes(rows: usize, cols: usize, num_codes: usize, codes: Vec<u32>) -> Result<Self> {
        if codes.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} grid needs {} codes, got {}",
                rows * cols,
                codes.len()
            )));
        }
        if let Some(bad) = codes.iter().find(|c| **c as usize > num_codes) {
            return Err(Error::OutOfRange(format!("code {bad} not in [0, {num_codes}]")));
        }
        Ok(Self {
            rows,
            cols,
            num_codes,
            codes,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn num_codes(&self) -> usize {
        self.num_codes
    }

    pub fn mask_code(&self) -> u32 {
        self.num_codes as u32
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.codes[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, code: u32) {
        assert!(code as usize <= self.num_codes, "code {code} out of range");
        self.codes[row * self.cols + col] = code;
    }

    pub fn set_index(&mut self, idx: usize, code: u32) {
        assert!(code as usize <= self.num_codes, "code {code} out of range");
        self.codes[idx] = code;
    }

    pub fn is_masked(&self, idx: usize) -> bool {
        self.codes[idx] == self.mask_code()
    }

    pub fn mask_count(&self) -> usize {
        self.codes.iter().filter(|c| **c == self.mask_code()).count()
    }

    /// Row-major indices of masked positions.
    pub fn masked_positions(&self) -> Vec<usize> {
        let m = self.mask_code();
        self.codes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| (*c == m).then_some(i))
            .collect()
    }

    /// Plain-text form: a header comment followed by one line per row,
    /// MASK written as `M`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# codegrid k={} rows={} cols={}\n", self.num_codes, self.rows, self.cols);
        for row in self.codes.chunks(self.cols.max(1)) {
            let mut first = true;
            for &c in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                if c == self.mask_code() {
                    out.push('M');
                } else {
                    write!(out, "{c}").expect("writing to a String");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`CodeGrid::to_text`] output. `num_codes` is required when the
    /// header line is absent and must agree with it when present.
    pub fn from_text(text: &str, num_codes: Option<usize>) -> Result<Self> {
        let mut k_header = None;
        let mut rows: Vec<Vec<u32>> = Vec::new();
        let mut pending: Vec<Vec<&str>> = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    if let Some(v) = field.strip_prefix("k=") {
                        k_header = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("bad k: {e}")))?);
                    }
                }
                continue;
            }
            pending.push(line.split_whitespace().collect());
        }
        let k = match (k_header, num_codes) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Parse(format!("grid header says k={a}, expected {b}")));
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Parse("code grid has no k= header".into())),
        };
        for tokens in pending {
            let row = tokens
                .iter()
                .map(|t| {
                    if *t == "M" {
                        Ok(k as u32)
                    } else {
                        let c: u32 = t.parse().map_err(|_| Error::Parse(format!("bad code token {t:?}")))?;
                        if c as usize >= k {
                            return Err(Error::Parse(format!("code {c} not below k={k}")));
                        }
                        Ok(c)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("ragged code grid".into()));
        }
        let n_rows = rows.len();
        Self::from_codes(n_rows, cols, k, rows.concat())
    }
}

/// Flattened non-overlapping patches in row-major patch order.
pub fn image_patches(img: &Raster, patch_h: usize, patch_w: usize) -> Result<Vec<f32>> {
    if patch_h == 0 || patch_w == 0 || img.width() % patch_w != 0 || img.height() % patch_h != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} image is not divisible into {}x{} patches",
            img.width(),
            img.height(),
            patch_w,
            patch_h
        )));
    }
    let mut out = Vec::with_capacity(img.data().len());
    let mut buf = Vec::with_capacity(patch_h * patch_w * CHANNELS);
    for py in 0..img.height() / patch_h {
        for px in 0..img.width() / patch_w {
            img.block(px * patch_w, py * patch_h, patch_w, patch_h, &mut buf);
            out.extend_from_slice(&buf);
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += (x - y) * (x - y);
    }
    acc.iter().sum::<f32>() + tail
}

/// `K` patch centroids with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    num_codes: usize,
    patch_h: usize,
    patch_w: usize,
    entries: Vec<f32>,
}

impl Codebook {
    pub fn new(num_codes: usize, patch_h: usize, patch_w: usize, entries: Vec<f32>) -> Result<Self> {
        if num_codes < 2 {
            return Err(Error::Codebook(format!("need at least 2 entries, got {num_codes}")));
        }
        if patch_h == 0 || patch_w == 0 {
            return Err(Error::Codebook("zero patch size".into()));
        }
        let dim = patch_h * patch_w * CHANNELS;
        if entries.len() != num_codes * dim {
            return Err(Error::Codebook(format!(
                "{} values for {num_codes} entries of dimension {dim}",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Codebook("non-finite entry".into()));
        }
        let mut seen = HashSet::with_capacity(num_codes);
        for e in entries.chunks_exact(dim) {
            let bits: Vec<u32> = e.iter().map(|v| v.to_bits()).collect();
            if !seen.insert(bits) {
                return Err(Error::Codebook("duplicate entries".into()));
            }
        }
        Ok(Self {
            num_codes,
            patch_h,
            patch_w,
            entries,
        })
    }

    pub fn num_codes(&self) -> usize {
        self.num_codes
    }

    pub fn mask_code(&self) -> u32 {
        self.num_codes as u32
    }

    pub fn patch_size(&self) -> (usize, usize) {
        (self.patch_h, self.patch_w)
    }

    pub fn dim(&self) -> usize {
        self.patch_h * self.patch_w * CHANNELS
    }

    pub fn entries(&self) -> &[f32] {
        &self.entries
    }

    pub fn entry(&self, code: usize) -> &[f32] {
        let d = self.dim();
        &self.entries[code * d..(code + 1) * d]
    }

    /// Index of the closest entry by Euclidean distance; ties go to the
    /// lowest index.
    pub fn nearest(&self, patch: &[f32]) -> u32 {
        let mut best = 0;
        let mut best_d = f32::INFINITY;
        for (i, e) in self.entries.chunks_exact(self.dim()).enumerate() {
            let d = squared_distance(patch, e);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best as u32
    }

    /// Quantizes every patch of `img`.
    pub fn encode(&self, img: &Raster) -> Result<CodeGrid> {
        let patches = image_patches(img, self.patch_h, self.patch_w)?;
        let codes: Vec<u32> = patches.par_chunks_exact(self.dim()).map(|p| self.nearest(p)).collect();
        CodeGrid::from_codes(
            img.height() / self.patch_h,
            img.width() / self.patch_w,
            self.num_codes,
            codes,
        )
    }

    /// Replaces each code by its centroid patch.
    pub fn decode(&self, grid: &CodeGrid) -> Result<Raster> {
        if grid.num_codes() != self.num_codes {
            return Err(Error::DimensionMismatch(format!(
                "grid for k={} decoded with k={}",
                grid.num_codes(),
                self.num_codes
            )));
        }
        let mut out = Raster::new(grid.cols() * self.patch_w, grid.rows() * self.patch_h);
        let mut clamped = vec![0.0f32; self.dim()];
        for r in 0..grid.rows() {
            for c in 0..grid.cols() {
                let code = grid.get(r, c);
                if code == self.mask_code() {
                    return Err(Error::MaskedCode { row: r, col: c });
                }
                for (dst, src) in clamped.iter_mut().zip(self.entry(code as usize)) {
                    *dst = src.clamp(0.0, 1.0);
                }
                out.put_block(c * self.patch_w, r * self.patch_h, self.patch_w, self.patch_h, &clamped);
            }
        }
        Ok(out)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(FILE_MAGIC)?;
        for v in [self.num_codes, self.patch_h, self.patch_w] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.entries.len() * 4);
        for v in &self.entries {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FILE_MAGIC {
            return Err(Error::Codebook("bad magic, not a codebook file".into()));
        }
        let mut header = [0u32; 3];
        for h in header.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *h = u32::from_le_bytes(b);
        }
        let [k, ph, pw] = header.map(|v| v as usize);
        let count = k
            .checked_mul(ph)
            .and_then(|v| v.checked_mul(pw))
            .and_then(|v| v.checked_mul(CHANNELS))
            .ok_or_else(|| Error::Codebook("header overflows".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != count * 4 {
            return Err(Error::Codebook(format!(
                "expected {} bytes of entries, found {}",
                count * 4,
                bytes.len()
            )));
        }
        let entries = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Codebook::new(k, ph, pw, entries)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Outcome of a k-means run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Mean squared error per sample after each assignment step.
    pub mse_history: Vec<f64>,
    /// Per-sample mean squared error of the final codebook on the training
    /// patches.
    pub final_mse: f64,
    pub iterations: usize,
    pub patches: usize,
}

pub fn train_codebook(images: &[Raster], num_codes: usize, patch: usize, seed: u64) -> Result<Codebook> {
    train_codebook_with_report(images, num_codes, patch, seed).map(|(cb, _)| cb)
}

/// k-means++ seeded from `seed`, then Lloyd iterations until the largest
/// centroid shift drops below [`CONVERGENCE_SHIFT`] or [`MAX_ITERATIONS`].
pub fn train_codebook_with_report(
    images: &[Raster],
    num_codes: usize,
    patch: usize,
    seed: u64,
) -> Result<(Codebook, TrainReport)> {
    if num_codes < 2 {
        return Err(Error::Codebook(format!("need at least 2 entries, got {num_codes}")));
    }
    let mut data = Vec::new();
    for img in images {
        data.extend(image_patches(img, patch, patch)?);
    }
    let dim = patch * patch * CHANNELS;
    let n = data.len() / dim;
    let distinct = count_distinct(&data, dim, num_codes);
    if distinct < num_codes {
        return Err(Error::NotEnoughPatches {
            found: distinct,
            needed: num_codes,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&data, dim, num_codes, &mut rng)?;
    let mut assignment = vec![0u32; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        assign(&data, dim, &centroids, &mut assignment);
        history.push(assignment_mse(&data, dim, &centroids, &assignment));
        let shift = update_centroids(&data, dim, &assignment, &mut centroids);
        log::debug!("k-means iteration {iterations}: mse {:.6e}, shift {shift:.3e}", history.last().unwrap());
        if shift < CONVERGENCE_SHIFT {
            break;
        }
    }
    assign(&data, dim, &centroids, &mut assignment);
    let final_mse = assignment_mse(&data, dim, &centroids, &assignment);
    let codebook = Codebook::new(num_codes, patch, patch, centroids)?;
    Ok((
        codebook,
        TrainReport {
            mse_history: history,
            final_mse,
            iterations,
            patches: n,
        },
    ))
}

fn count_distinct(data: &[f32], dim: usize, enough: usize) -> usize {
    let mut seen = HashSet::new();
    for p in data.chunks_exact(dim) {
        seen.insert(p.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        if seen.len() >= enough {
            break;
        }
    }
    seen.len()
}

fn kmeans_plus_plus(data: &[f32], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f32>> {
    let n = data.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(&data[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = data
        .par_chunks_exact(dim)
        .map(|p| squared_distance(p, &centroids[..dim]) as f64)
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NotEnoughPatches {
                found: centroids.len() / dim,
                needed: k,
            });
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, d) in d2.iter().enumerate() {
            if *d <= 0.0 {
                continue;
            }
            acc += d;
            if acc > target {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can leave `acc` a hair below `target`; take the last
        // candidate with positive weight.
        let chosen = chosen
            .or_else(|| d2.iter().rposition(|d| *d > 0.0))
            .expect("positive total implies a candidate");
        let c = &data[chosen * dim..(chosen + 1) * dim];
        centroids.extend_from_slice(c);
        d2.par_iter_mut().zip(data.par_chunks_exact(dim)).for_each(|(d, p)| {
            let nd = squared_distance(p, c) as f64;
            if nd < *d {
                *d = nd;
            }
        });
    }
    Ok(centroids)
}

const ASSIGN_BLOCK: usize = 1024;

/// Nearest-centroid assignment through `‖c‖² − 2·x·c` computed with a GEMM.
fn assign(data: &[f32], dim: usize, centroids: &[f32], out: &mut [u32]) {
    let k = centroids.len() / dim;
    let norms: Vec<f32> = centroids.chunks_exact(dim).map(|c| c.iter().map(|v| v * v).sum()).collect();
    out.par_chunks_mut(ASSIGN_BLOCK)
        .zip(data.par_chunks(ASSIGN_BLOCK * dim))
        .for_each(|(labels, block)| {
            let m = labels.len();
            let mut dots = vec![0.0f32; m * k];
            // SAFETY: the strides describe `block` as m×dim row-major, the
            // transposed centroid matrix as dim×k and `dots` as m×k row-major;
            // all three buffers are exactly that large.
            unsafe {
                matrixmultiply::sgemm(
                    m,
                    dim,
                    k,
                    1.0,
                    block.as_ptr(),
                    dim as isize,
                    1,
                    centroids.as_ptr(),
                    1,
                    dim as isize,
                    0.0,
                    dots.as_mut_ptr(),
                    k as isize,
                    1,
                );
            }
            for (label, row) in labels.iter_mut().zip(dots.chunks_exact(k)) {
                let mut best = 0;
                let mut best_score = f32::INFINITY;
                for (j, (dot, norm)) in row.iter().zip(&norms).enumerate() {
                    let score = norm - 2.0 * dot;
                    if score < best_score {
                        best_score = score;
                        best = j;
                    }
                }
                *label = best as u32;
            }
        });
}

fn assignment_mse(data: &[f32], dim: usize, centroids: &[f32], assignment: &[u32]) -> f64 {
    let total: f64 = data
        .par_chunks_exact(dim)
        .zip(assignment.par_iter())
        .map(|(p, &a)| squared_distance(p, &centroids[a as usize * dim..(a as usize + 1) * dim]) as f64)
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / data.len() as f64
}

/// Moves each centroid to the mean of its cluster (serial, fixed order);
/// empty clusters keep their centroid. Returns the largest shift.
fn update_centroids(data: &[f32], dim: usize, assignment: &[u32], centroids: &mut [f32]) -> f64 {
    let k = centroids.len() / dim;
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &a) in data.chunks_exact(dim).zip(assignment) {
        let a = a as usize;
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *s += *v as f64;
        }
    }
    let mut max_shift: f64 = 0.0;
    for j in 0..k {
        if counts[j] == 0 {
            continue;
        }
        let inv = 1.0 / counts[j] as f64;
        let mut shift = 0.0f64;
        for (c, s) in centroids[j * dim..(j + 1) * dim].iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
            let new = (s * inv) as f32;
            shift += ((new - *c) as f64).powi(2);
            *c = new;
        }
        max_shift = max_shift.max(shift.sqrt());
    }
    max_shift
}
