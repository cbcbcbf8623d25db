//! Iterative masked-code sampling.
//!
//! Starting from a grid where unknown positions hold MASK, each of `T` steps
//! asks a [`Predictor`] for a distribution at every masked position, samples a
//! code per position, and keeps only the most confident samples so that
//! exactly `ceil(cos(π/2 · t/T) · M₀)` positions stay masked after step `t`.

use std::f64::consts::FRAC_PI_2;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codebook::CodeGrid;
use crate::raster::{Mask, Raster};
use crate::{Error, Result};

pub const DEFAULT_STEPS: usize = 16;
/// Tolerance on the sum of each predicted distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Fraction of the initial masked positions still masked after step `t`.
pub fn mask_ratio(t: usize, total: usize) -> Result<f64> {
    if total == 0 || t > total {
        return Err(Error::OutOfRange(format!("step {t} outside [0, {total}]")));
    }
    if t == total {
        // cos(π/2) is 6e-17 in floating point; the schedule must end at 0.
        return Ok(0.0);
    }
    Ok((FRAC_PI_2 * t as f64 / total as f64).cos())
}

/// Number of positions left masked after step `t` when `initial` were masked.
pub fn masked_after_step(t: usize, total: usize, initial: usize) -> Result<usize> {
    Ok((mask_ratio(t, total)? * initial as f64).ceil() as usize)
}

/// Training-time masking: replaces `round(cos(π/2 · r) · N)` uniformly chosen
/// positions with MASK.
pub fn training_mask<R: Rng + ?Sized>(codes: &CodeGrid, r: f64, rng: &mut R) -> Result<CodeGrid> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::OutOfRange(format!("mask draw r = {r} outside [0, 1)")));
    }
    let n = codes.len();
    let count = ((FRAC_PI_2 * r).cos() * n as f64).round() as usize;
    let mut out = codes.clone();
    for idx in index::sample(rng, n, count.min(n)) {
        out.set_index(idx, out.mask_code());
    }
    Ok(out)
}

/// Context handed to predictors alongside the partially masked grid.
#[derive(Clone, Copy, Debug, Default)]
pub struct Conditioning<'a> {
    /// View index for per-view predictors; `None` for the ERP stage.
    pub view: Option<usize>,
    pub image: Option<&'a Raster>,
    pub known: Option<&'a Mask>,
    /// Coarse first-stage image resampled into this grid's frame.
    pub low_res: Option<&'a Raster>,
}

/// One probability vector over `num_codes` codes per masked position, in
/// row-major position order.
#[derive(Clone, Debug, PartialEq)]
pub struct Distributions {
    pub num_codes: usize,
    pub probs: Vec<f64>,
}

impl Distributions {
    pub fn len(&self) -> usize {
        self.probs.len() / self.num_codes.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.num_codes..(i + 1) * self.num_codes]
    }

    /// Checks the predictor contract for `positions` masked entries.
    pub fn validate(&self, positions: usize, num_codes: usize) -> Result<()> {
        if self.num_codes != num_codes || self.probs.len() != positions * num_codes {
            return Err(Error::Predictor(format!(
                "expected {positions} distributions over {num_codes} codes, got {} values over {}",
                self.probs.len(),
                self.num_codes
            )));
        }
        for (i, row) in self.probs.chunks_exact(num_codes.max(1)).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Predictor(format!("distribution {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::Predictor(format!("distribution {i} sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// Predicts code distributions for every MASK position of a grid.
pub trait Predictor: Send + Sync {
    fn num_codes(&self) -> usize;

    fn predict(&self, codes: &CodeGrid, ctx: &Conditioning<'_>) -> Result<Distributions>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleConfig {
    pub steps: usize,
    /// Scale of the Gumbel noise added to confidences; 0 disables it.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            temperature: 1.0,
            seed: 0,
        }
    }
}

/// Sampling result plus the masked count after each step.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTrace {
    pub codes: CodeGrid,
    pub masked_counts: Vec<usize>,
}

pub fn sample(predictor: &dyn Predictor, initial: &CodeGrid, ctx: &Conditioning<'_>, cfg: &SampleConfig) -> Result<CodeGrid> {
    sample_traced(predictor, initial, ctx, cfg, None).map(|t| t.codes)
}

/// Like [`sample`] with an explicit RNG stream, so independent runs sharing a
/// seed (for instance the views of one image) draw unrelated noise.
pub fn sample_traced(
    predictor: &dyn Predictor,
    initial: &CodeGrid,
    ctx: &Conditioning<'_>,
    cfg: &SampleConfig,
    stream: Option<u64>,
) -> Result<SampleTrace> {
    if cfg.steps == 0 {
        return Err(Error::OutOfRange("sampling needs at least one step".into()));
    }
    if !(cfg.temperature >= 0.0 && cfg.temperature.is_finite()) {
        return Err(Error::OutOfRange(format!("temperature {} must be finite and ≥ 0", cfg.temperature)));
    }
    let k = initial.num_codes();
    if predictor.num_codes() != k {
        return Err(Error::Predictor(format!(
            "predictor covers {} codes, grid uses {k}",
            predictor.num_codes()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if let Some(s) = stream {
        rng.set_stream(s);
    }
    let initial_masked = initial.mask_count();
    let mut grid = initial.clone();
    let mut masked_counts = Vec::with_capacity(cfg.steps);
    let mut candidates: Vec<(f64, usize, u32)> = Vec::new();
    for t in 1..=cfg.steps {
        let positions = grid.masked_positions();
        if positions.is_empty() {
            masked_counts.push(0);
            continue;
        }
        let dists = predictor.predict(&grid, ctx)?;
        dists.validate(positions.len(), k)?;
        let noise_scale = cfg.temperature * (1.0 - t as f64 / cfg.steps as f64);
        candidates.clear();
        for (row, &pos) in positions.iter().enumerate() {
            let probs = dists.row(row);
            let code = sample_categorical(probs, &mut rng);
            let mut confidence = probs[code].ln();
            if noise_scale > 0.0 {
                confidence += noise_scale * gumbel(&mut rng);
            }
            candidates.push((confidence, pos, code as u32));
        }
        // Most confident first; ties resolved by ascending position.
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let remain = masked_after_step(t, cfg.steps, initial_masked)?;
        let keep = positions.len().saturating_sub(remain);
        for &(_, pos, code) in &candidates[..keep] {
            grid.set_index(pos, code);
        }
        masked_counts.push(positions.len() - keep);
    }
    debug_assert_eq!(grid.mask_count(), 0);
    Ok(SampleTrace {
        codes: grid,
        masked_counts,
    })
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if acc > u {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Open interval so both logarithms are finite.
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

/// Point masses on known ground-truth grids: one grid for the ERP stage, or
/// one per view selected through [`Conditioning::view`].
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    truths: Vec<CodeGrid>,
}

impl OraclePredictor {
    pub fn new(truth: CodeGrid) -> Result<Self> {
        Self::per_view(vec![truth])
    }

    pub fn per_view(truths: Vec<CodeGrid>) -> Result<Self> {
        let first = truths
            .first()
            .ok_or_else(|| Error::Predictor("oracle needs at least one grid".into()))?;
        let k = first.num_codes();
        if truths.iter().any(|t| t.num_codes() != k || t.mask_count() > 0) {
            return Err(Error::Predictor("oracle grids must share k and hold no MASK".into()));
        }
        Ok(Self { truths })
    }
}

impl Predictor for OraclePredictor {
    fn num_codes(&self) -> usize {
        self.truths[0].num_codes()
    }

    fn predict(&self, codes: &CodeGrid, ctx: &Conditioning<'_>) -> Result<Distributions> {
        let truth = self
            .truths
            .get(ctx.view.unwrap_or(0))
            .ok_or_else(|| Error::Predictor(format!("oracle has no grid for view {:?}", ctx.view)))?;
        if truth.rows() != codes.rows() || truth.cols() != codes.cols() {
            return Err(Error::Predictor("oracle grid shape differs from the sampled grid".into()));
        }
        let k = self.num_codes();
        let positions = codes.masked_positions();
        let mut probs = vec![0.0; positions.len() * k];
        for (row, pos) in positions.iter().enumerate() {
            probs[row * k + truth.codes()[*pos] as usize] = 1.0;
        }
        Ok(Distributions { num_codes: k, probs })
    }
}

fn normalized_counts(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        counts.iter().map(|c| c / total).collect()
    } else {
        vec![1.0 / counts.len() as f64; counts.len()]
    }
}

fn count_codes<'a>(k: usize, grids: impl IntoIterator<Item = &'a CodeGrid>) -> Vec<f64> {
    let mut counts = vec![0.0; k];
    for g in grids {
        for &c in g.codes() {
            if (c as usize) < k {
                counts[c as usize] += 1.0;
            }
        }
    }
    counts
}

/// Position-independent code frequencies gathered from a corpus of grids.
/// An empty corpus yields the uniform distribution.
#[derive(Clone, Debug)]
pub struct MarginalPredictor {
    probs: Vec<f64>,
}

impl MarginalPredictor {
    pub fn fit<'a>(num_codes: usize, corpus: impl IntoIterator<Item = &'a CodeGrid>) -> Self {
        Self {
            probs: normalized_counts(&count_codes(num_codes, corpus)),
        }
    }

    pub fn uniform(num_codes: usize) -> Self {
        Self {
            probs: vec![1.0 / num_codes as f64; num_codes],
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }
}

impl Predictor for MarginalPredictor {
    fn num_codes(&self) -> usize {
        self.probs.len()
    }

    fn predict(&self, codes: &CodeGrid, _ctx: &Conditioning<'_>) -> Result<Distributions> {
        let positions = codes.mask_count();
        let mut probs = Vec::with_capacity(positions * self.probs.len());
        for _ in 0..positions {
            probs.extend_from_slice(&self.probs);
        }
        Ok(Distributions {
            num_codes: self.probs.len(),
            probs,
        })
    }
}

/// Per-position code frequencies across a corpus of equally shaped grids;
/// positions never observed fall back to the corpus-wide marginal.
#[derive(Clone, Debug)]
pub struct ContextCopyPredictor {
    rows: usize,
    cols: usize,
    num_codes: usize,
    per_position: Vec<Option<Vec<f64>>>,
    fallback: Vec<f64>,
}

impl ContextCopyPredictor {
    pub fn fit<'a>(num_codes: usize, rows: usize, cols: usize, corpus: impl IntoIterator<Item = &'a CodeGrid>) -> Result<Self> {
        let corpus: Vec<&CodeGrid> = corpus.into_iter().collect();
        if corpus.iter().any(|g| g.rows() != rows || g.cols() != cols) {
            return Err(Error::Predictor(format!("context-copy corpus must be {rows}x{cols} grids")));
        }
        let mut counts = vec![vec![0.0; num_codes]; rows * cols];
        for g in &corpus {
            for (pos, &c) in g.codes().iter().enumerate() {
                if (c as usize) < num_codes {
                    counts[pos][c as usize] += 1.0;
                }
            }
        }
        let per_position = counts
            .iter()
            .map(|c| (c.iter().sum::<f64>() > 0.0).then(|| normalized_counts(c)))
            .collect();
        Ok(Self {
            rows,
            cols,
            num_codes,
            per_position,
            fallback: normalized_counts(&count_codes(num_codes, corpus.iter().copied())),
        })
    }
}

impl Predictor for ContextCopyPredictor {
    fn num_codes(&self) -> usize {
        self.num_codes
    }

    fn predict(&self, codes: &CodeGrid, _ctx: &Conditioning<'_>) -> Result<Distributions> {
        if codes.rows() != self.rows || codes.cols() != self.cols {
            return Err(Error::Predictor(format!(
                "context-copy fitted on {}x{} grids, asked for {}x{}",
                self.rows,
                self.cols,
                codes.rows(),
                codes.cols()
            )));
        }
        let positions = codes.masked_positions();
        let mut probs = Vec::with_capacity(positions.len() * self.num_codes);
        for pos in positions {
            probs.extend_from_slice(self.per_position[pos].as_deref().unwrap_or(&self.fallback));
        }
        Ok(Distributions {
            num_codes: self.num_codes,
            probs,
        })
    }
}
