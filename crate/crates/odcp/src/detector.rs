//! Single change-point scan, random-subset significance testing, and the
//! multiple-change-point active-window loop (batch and streaming).
//!
//! The scan fits one Dirichlet per side of every candidate split and keeps
//! the split maximizing the two-segment log-likelihood. Significance of the
//! resulting log-likelihood ratio is judged against replicates built from
//! random subsets of the window; the default method evaluates the same
//! max-over-split-sizes statistic on a coarse size grid for both the
//! observed window and each permuted replicate, which makes it an exact
//! permutation test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{
    fit_mle_from_stats, log_likelihood_stats, DirichletParams, SufficientStats,
};
use crate::error::{DetectorError, DirichletError};
use crate::seed::derive;
use crate::simplex::{Composition, Series, SeriesKind};

/// How replicate statistics for the significance test are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignificanceMethod {
    /// One random permutation per replicate; the statistic (observed and
    /// replicated) is the max split log-likelihood ratio over a coarse
    /// grid of split sizes. Exactly calibrated, O(grid) fits per replicate.
    GridSubsetMax,
    /// One random subset of uniformly random size per replicate, compared
    /// against the full max-over-splits statistic. Fastest, but the
    /// observed max is biased upward relative to single-split replicates,
    /// so rejections exceed the nominal level.
    SingleSubset,
    /// One random permutation per replicate, statistic recomputed as the
    /// full max over every candidate split. The reference test: exact and
    /// the most powerful, at O(window) fits per replicate.
    FullPermutation,
}

/// All detector tunables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Initial active-window size I.
    pub initial_window: usize,
    /// Growth batch b appended when no change is found.
    pub batch: usize,
    /// Significance replicates M.
    pub replicates: usize,
    /// Significance level α.
    pub alpha: f64,
    /// Minimum segment length; `None` derives max(10, K+1) from the
    /// compositional dimension K.
    pub min_segment: Option<usize>,
    pub mle_tol: f64,
    pub mle_max_iter: usize,
    /// Boundary clamp used when ingesting raw compositional data.
    pub eps: f64,
    pub seed: u64,
    pub significance: SignificanceMethod,
    /// Split-size grid for [`SignificanceMethod::GridSubsetMax`].
    pub subset_grid: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            initial_window: 200,
            batch: 50,
            replicates: 199,
            alpha: 0.05,
            min_segment: None,
            mle_tol: 1e-7,
            mle_max_iter: 1000,
            eps: 1e-6,
            seed: 0,
            significance: SignificanceMethod::GridSubsetMax,
            subset_grid: 20,
        }
    }
}

impl DetectorConfig {
    /// Minimum segment length for compositional dimension `k`.
    pub fn resolved_min_segment(&self, k: usize) -> usize {
        self.min_segment.unwrap_or_else(|| 10.max(k + 1))
    }

    /// Checks the invariants that need the data dimension and returns the
    /// resolved minimum segment length.
    pub fn validate(&self, k: usize) -> Result<usize, DetectorError> {
        let fail = |reason: String| Err(DetectorError::InvalidConfig { reason });
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.batch == 0 {
            return fail("batch must be >= 1".to_string());
        }
        if self.replicates < 19 {
            return fail(format!("replicates {} < 19", self.replicates));
        }
        if !(self.mle_tol > 0.0) || self.mle_max_iter == 0 {
            return fail("mle_tol must be positive and mle_max_iter >= 1".to_string());
        }
        if !(self.eps > 0.0 && self.eps < 1.0 / k as f64) {
            return fail(format!("eps {} outside (0, 1/{k})", self.eps));
        }
        if self.subset_grid < 2 {
            return fail("subset_grid must be >= 2".to_string());
        }
        let m = self.resolved_min_segment(k);
        if m < k + 1 {
            return fail(format!(
                "min_segment {m} below the dimension floor {} for K = {k}",
                k + 1
            ));
        }
        if self.initial_window < 2 * m {
            return fail(format!(
                "initial_window {} < 2 x min_segment {m}",
                self.initial_window
            ));
        }
        Ok(m)
    }
}

/// Result of a single-change-point scan over one window.
#[derive(Debug, Clone)]
pub struct ScanResult {
    /// Split with the highest two-segment log-likelihood: the window's
    /// first `tau_star` samples form the left segment. Smallest index wins
    /// ties.
    pub tau_star: usize,
    /// max(LL_tau) - LL_0, never negative.
    pub z_star: f64,
    /// LL_tau for tau = min_segment + j; NaN marks skipped candidates.
    pub ll_profile: Vec<f64>,
    pub ll0: f64,
    /// First candidate split (ll_profile[0] belongs to it).
    pub min_segment: usize,
    /// Candidate splits skipped because a segment fit failed.
    pub skipped: Vec<usize>,
    pub left_params: DirichletParams,
    pub right_params: DirichletParams,
    /// Single-Dirichlet fit of the whole window (the null model).
    pub pooled_params: DirichletParams,
}

/// Outcome of a significance test.
#[derive(Debug, Clone)]
pub struct SignificanceOutcome {
    /// (1 + #{replicates >= observed}) / (M + 1); always in [1/(M+1), 1].
    pub p_value: f64,
    /// Statistic the replicates were compared against.
    pub observed: f64,
}

/// An accepted change point.
#[derive(Debug, Clone, Serialize)]
pub struct ChangePointReport {
    /// Index into the original series: the first sample of the new segment.
    pub global_index: usize,
    pub z_star: f64,
    pub p_value: f64,
    /// Active window (global, half-open) the change was found in.
    pub window_span: (usize, usize),
    pub left_params: DirichletParams,
    pub right_params: DirichletParams,
}

/// Counters accumulated by a detector over its lifetime.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DetectorStats {
    pub scans: u64,
    pub significance_tests: u64,
    pub rejections: u64,
    pub skipped_candidates: u64,
}

// ---------------------------------------------------------------------------
// Window prefix sums
// ---------------------------------------------------------------------------

/// Prefix sums of (ln x, x, x²) over a window, possibly in permuted order.
/// Row i of each table holds sums over the first i samples.
struct WindowAccum {
    ln: Vec<f64>,
    x: Vec<f64>,
    x2: Vec<f64>,
    t: usize,
    k: usize,
}

impl WindowAccum {
    fn build(window: &[Composition]) -> Self {
        Self::build_with(window.len(), window[0].dim(), |i| window[i].values())
    }

    fn build_permuted(window: &[Composition], perm: &[usize]) -> Self {
        Self::build_with(window.len(), window[0].dim(), |i| window[perm[i]].values())
    }

    fn build_with<'a>(t: usize, k: usize, row: impl Fn(usize) -> &'a [f64]) -> Self {
        let mut ln = vec![0.0; (t + 1) * k];
        let mut x = vec![0.0; (t + 1) * k];
        let mut x2 = vec![0.0; (t + 1) * k];
        for i in 0..t {
            let values = row(i);
            let (prev, cur) = (i * k, (i + 1) * k);
            for j in 0..k {
                let v = values[j];
                ln[cur + j] = ln[prev + j] + v.ln();
                x[cur + j] = x[prev + j] + v;
                x2[cur + j] = x2[prev + j] + v * v;
            }
        }
        Self { ln, x, x2, t, k }
    }

    /// Mean statistics over samples [start, end).
    fn stats(&self, start: usize, end: usize) -> SufficientStats {
        debug_assert!(start < end && end <= self.t);
        let n = (end - start) as f64;
        let (lo, hi) = (start * self.k, end * self.k);
        let mean_log: Vec<f64> = (0..self.k)
            .map(|j| (self.ln[hi + j] - self.ln[lo + j]) / n)
            .collect();
        let mean: Vec<f64> = (0..self.k)
            .map(|j| (self.x[hi + j] - self.x[lo + j]) / n)
            .collect();
        let mean_sq: Vec<f64> = (0..self.k)
            .map(|j| (self.x2[hi + j] - self.x2[lo + j]) / n)
            .collect();
        SufficientStats::from_moments(end - start, mean_log, mean, mean_sq)
            .expect("non-empty range")
    }
}

// ---------------------------------------------------------------------------
// Split evaluation
// ---------------------------------------------------------------------------

struct SplitEval {
    ll: f64,
    left: DirichletParams,
    right: DirichletParams,
}

/// Fits both sides of a split and returns the two-segment log-likelihood.
/// The pooled parameters stay an admissible candidate on each side, so the
/// split log-likelihood never drops below `ll0`: when the pooled model wins
/// both sides the value is exactly `ll0`, otherwise the sum is clamped to
/// remove prefix-sum rounding.
fn eval_split(
    accum: &WindowAccum,
    split: usize,
    pooled: &DirichletParams,
    ll0: f64,
    cfg: &DetectorConfig,
) -> Result<SplitEval, DirichletError> {
    let left_stats = accum.stats(0, split);
    let right_stats = accum.stats(split, accum.t);
    let left_fit = fit_mle_from_stats(&left_stats, Some(pooled), cfg.mle_tol, cfg.mle_max_iter)?;
    let right_fit =
        fit_mle_from_stats(&right_stats, Some(pooled), cfg.mle_tol, cfg.mle_max_iter)?;

    let ll_left_fit = log_likelihood_stats(&left_stats, &left_fit.params);
    let ll_left_pooled = log_likelihood_stats(&left_stats, pooled);
    let left_improves = ll_left_fit > ll_left_pooled;
    let ll_right_fit = log_likelihood_stats(&right_stats, &right_fit.params);
    let ll_right_pooled = log_likelihood_stats(&right_stats, pooled);
    let right_improves = ll_right_fit > ll_right_pooled;

    if !left_improves && !right_improves {
        return Ok(SplitEval {
            ll: ll0,
            left: pooled.clone(),
            right: pooled.clone(),
        });
    }
    let (ll_left, left) = if left_improves {
        (ll_left_fit, left_fit.params)
    } else {
        (ll_left_pooled, pooled.clone())
    };
    let (ll_right, right) = if right_improves {
        (ll_right_fit, right_fit.params)
    } else {
        (ll_right_pooled, pooled.clone())
    };
    Ok(SplitEval {
        ll: (ll_left + ll_right).max(ll0),
        left,
        right,
    })
}

// ---------------------------------------------------------------------------
// Scan
// ---------------------------------------------------------------------------

/// Scans one window for the best single split: fits left/right Dirichlet
/// models for every candidate `tau` in [min_segment, t - min_segment] and
/// returns the argmax with the log-likelihood-ratio statistic. Candidates
/// whose fits fail to converge are skipped and listed, never silently
/// included.
pub fn scan_window(
    window: &[Composition],
    cfg: &DetectorConfig,
) -> Result<ScanResult, DetectorError> {
    if window.is_empty() {
        return Err(DetectorError::InsufficientWindow { len: 0, need: 2 });
    }
    let k = window[0].dim();
    let m = cfg.validate(k)?;
    let t = window.len();
    if t < 2 * m {
        return Err(DetectorError::InsufficientWindow { len: t, need: 2 * m });
    }
    let accum = WindowAccum::build(window);
    scan_accum(&accum, m, cfg)
}

fn scan_accum(
    accum: &WindowAccum,
    m: usize,
    cfg: &DetectorConfig,
) -> Result<ScanResult, DetectorError> {
    let t = accum.t;
    let pooled_stats = accum.stats(0, t);
    let pooled_fit = fit_mle_from_stats(&pooled_stats, None, cfg.mle_tol, cfg.mle_max_iter)?;
    let pooled = pooled_fit.params;
    let ll0 = log_likelihood_stats(&pooled_stats, &pooled);

    let candidates: Vec<usize> = (m..=t - m).collect();
    let evals: Vec<Result<SplitEval, DirichletError>> = candidates
        .par_iter()
        .map(|&tau| eval_split(accum, tau, &pooled, ll0, cfg))
        .collect();

    let mut ll_profile = Vec::with_capacity(candidates.len());
    let mut skipped = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut sides: Option<(DirichletParams, DirichletParams)> = None;
    for (idx, ev) in evals.into_iter().enumerate() {
        let tau = candidates[idx];
        match ev {
            Ok(ev) => {
                let ll = ev.ll;
                ll_profile.push(ll);
                let better = match best {
                    None => true,
                    Some((_, cur)) => ll > cur,
                };
                if better {
                    best = Some((tau, ll));
                    sides = Some((ev.left, ev.right));
                }
            }
            Err(_) => {
                ll_profile.push(f64::NAN);
                skipped.push(tau);
            }
        }
    }
    let (tau_star, best_ll) = best.ok_or(DetectorError::AllCandidatesFailed)?;
    let (left_params, right_params) = sides.expect("set with best");
    Ok(ScanResult {
        tau_star,
        z_star: best_ll - ll0,
        ll_profile,
        ll0,
        min_segment: m,
        skipped,
        left_params,
        right_params,
        pooled_params: pooled,
    })
}

// ---------------------------------------------------------------------------
// Significance
// ---------------------------------------------------------------------------

/// Evenly spaced split sizes over [m, t - m], at most `g` of them.
fn grid_sizes(m: usize, t: usize, g: usize) -> Vec<usize> {
    let n_candidates = t - 2 * m + 1;
    if n_candidates <= g {
        return (m..=t - m).collect();
    }
    let span = (t - 2 * m) as f64;
    let mut sizes: Vec<usize> = (0..g)
        .map(|j| m + (span * j as f64 / (g - 1) as f64).round() as usize)
        .collect();
    sizes.dedup();
    sizes
}

/// Max clamped split statistic over the given sizes; failed sizes are
/// skipped, `None` if every size failed.
fn grid_stat(
    accum: &WindowAccum,
    sizes: &[usize],
    pooled: &DirichletParams,
    ll0: f64,
    cfg: &DetectorConfig,
) -> Option<f64> {
    let mut best = None;
    for &s in sizes {
        if let Ok(ev) = eval_split(accum, s, pooled, ll0, cfg) {
            let z = ev.ll - ll0;
            best = Some(best.map_or(z, |b: f64| b.max(z)));
        }
    }
    best
}

fn shuffled_indices(t: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..t).collect();
    for i in (1..t).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Tests the significance of a scanned change point. `test_seed` keys the
/// replicate random streams: replicate i draws from a stream derived from
/// (test_seed, i), so results do not depend on scheduling.
pub fn significance(
    window: &[Composition],
    scan: &ScanResult,
    cfg: &DetectorConfig,
    test_seed: u64,
) -> Result<SignificanceOutcome, DetectorError> {
    let t = window.len();
    let m = scan.min_segment;
    if t < 2 * m {
        return Err(DetectorError::InsufficientWindow { len: t, need: 2 * m });
    }
    let accum = WindowAccum::build(window);
    let pooled = &scan.pooled_params;
    let ll0 = scan.ll0;
    let n_reps = cfg.replicates;

    let (observed, replicate): (f64, Box<dyn Fn(u64) -> Option<f64> + Sync>) =
        match cfg.significance {
            SignificanceMethod::GridSubsetMax => {
                let sizes = grid_sizes(m, t, cfg.subset_grid);
                let observed = grid_stat(&accum, &sizes, pooled, ll0, cfg)
                    .ok_or(DetectorError::SignificanceFailure)?;
                let window = window.to_vec();
                let sizes_c = sizes.clone();
                let f = move |rep_seed: u64| -> Option<f64> {
                    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
                    for _ in 0..4 {
                        let perm = shuffled_indices(window.len(), &mut rng);
                        let paccum = WindowAccum::build_permuted(&window, &perm);
                        if let Some(z) = grid_stat(&paccum, &sizes_c, pooled, ll0, cfg) {
                            return Some(z);
                        }
                    }
                    None
                };
                (observed, Box::new(f))
            }
            SignificanceMethod::SingleSubset => {
                let observed = scan.z_star;
                let window = window.to_vec();
                let f = move |rep_seed: u64| -> Option<f64> {
                    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
                    let t = window.len();
                    for _ in 0..4 {
                        let s = rng.gen_range(m..=t - m);
                        let perm = shuffled_indices(t, &mut rng);
                        let paccum = WindowAccum::build_permuted(&window, &perm);
                        if let Ok(ev) = eval_split(&paccum, s, pooled, ll0, cfg) {
                            return Some(ev.ll - ll0);
                        }
                    }
                    None
                };
                (observed, Box::new(f))
            }
            SignificanceMethod::FullPermutation => {
                let observed = scan.z_star;
                let window = window.to_vec();
                let sizes: Vec<usize> = (m..=t - m).collect();
                let f = move |rep_seed: u64| -> Option<f64> {
                    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
                    for _ in 0..4 {
                        let perm = shuffled_indices(window.len(), &mut rng);
                        let paccum = WindowAccum::build_permuted(&window, &perm);
                        if let Some(z) = grid_stat(&paccum, &sizes, pooled, ll0, cfg) {
                            return Some(z);
                        }
                    }
                    None
                };
                (observed, Box::new(f))
            }
        };

    let stats: Vec<Option<f64>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| replicate(derive(test_seed, rep as u64 + 1, 0)))
        .collect();
    let mut count = 0usize;
    for z in &stats {
        match z {
            Some(z) => {
                if *z >= observed {
                    count += 1;
                }
            }
            None => return Err(DetectorError::SignificanceFailure),
        }
    }
    Ok(SignificanceOutcome {
        p_value: (1 + count) as f64 / (n_reps + 1) as f64,
        observed,
    })
}

// ---------------------------------------------------------------------------
// Active-window detector
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Waiting for the window to refill to the initial size.
    Fill,
    /// Waiting for the next growth batch.
    Grow,
}

/// Streaming multiple-change-point detector. Feed samples in any chunking;
/// call [`Detector::finish`] at end of input to flush the trailing partial
/// window. A feed of the whole series followed by `finish` is exactly the
/// batch algorithm, so chunked and batch runs emit identical reports.
#[derive(Debug)]
pub struct Detector {
    cfg: DetectorConfig,
    dim: Option<usize>,
    min_segment: usize,
    samples: Vec<Composition>,
    window_start: usize,
    window_end: usize,
    phase: Phase,
    test_counter: u64,
    last_scanned: Option<(usize, usize)>,
    finished: bool,
    stats: DetectorStats,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Self {
        Self {
            cfg,
            dim: None,
            min_segment: 0,
            samples: Vec::new(),
            window_start: 0,
            window_end: 0,
            phase: Phase::Fill,
            test_counter: 0,
            last_scanned: None,
            finished: false,
            stats: DetectorStats::default(),
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &DetectorStats {
        &self.stats
    }

    /// Samples received so far.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends a batch of samples and runs every scan whose window fills
    /// completely. Returns the change points accepted along the way.
    pub fn feed(
        &mut self,
        batch: &[Composition],
    ) -> Result<Vec<ChangePointReport>, DetectorError> {
        let mut reports = Vec::new();
        for c in batch {
            match self.dim {
                None => {
                    let m = self.cfg.validate(c.dim())?;
                    self.dim = Some(c.dim());
                    self.min_segment = m;
                }
                Some(d) => {
                    if c.dim() != d {
                        return Err(DetectorError::DimensionMismatch {
                            left: d,
                            right: c.dim(),
                        });
                    }
                }
            }
            self.samples.push(c.clone());
        }
        self.pump(&mut reports)?;
        Ok(reports)
    }

    /// Flushes end-of-input: appends whatever remains to the window and
    /// keeps scanning trailing windows (of at least 2·min_segment samples)
    /// until no further change is significant. Idempotent.
    pub fn finish(&mut self) -> Result<Vec<ChangePointReport>, DetectorError> {
        let mut reports = Vec::new();
        if self.finished || self.dim.is_none() {
            self.finished = true;
            return Ok(reports);
        }
        self.finished = true;
        loop {
            self.pump(&mut reports)?;
            let avail = self.samples.len();
            let len = avail - self.window_start;
            if len < 2 * self.min_segment {
                break;
            }
            if self.last_scanned == Some((self.window_start, avail)) {
                break;
            }
            self.window_end = avail;
            if !self.scan_and_decide(&mut reports)? {
                break;
            }
        }
        Ok(reports)
    }

    fn pump(&mut self, reports: &mut Vec<ChangePointReport>) -> Result<(), DetectorError> {
        if self.dim.is_none() {
            return Ok(());
        }
        loop {
            let avail = self.samples.len();
            let target = match self.phase {
                Phase::Fill => self.window_start + self.cfg.initial_window,
                Phase::Grow => self.window_end + self.cfg.batch,
            };
            if avail < target {
                return Ok(());
            }
            self.window_end = target;
            self.scan_and_decide(reports)?;
        }
    }

    /// Scans the current window; on a significant change emits a report and
    /// resets the window to start at the change. Returns whether a change
    /// was accepted.
    fn scan_and_decide(
        &mut self,
        reports: &mut Vec<ChangePointReport>,
    ) -> Result<bool, DetectorError> {
        let window = &self.samples[self.window_start..self.window_end];
        self.stats.scans += 1;
        let scan = scan_accum(&WindowAccum::build(window), self.min_segment, &self.cfg)?;
        self.stats.skipped_candidates += scan.skipped.len() as u64;
        self.last_scanned = Some((self.window_start, self.window_end));

        let test_seed = derive(self.cfg.seed, 0x5167, self.test_counter);
        self.test_counter += 1;
        self.stats.significance_tests += 1;
        let sig = significance(window, &scan, &self.cfg, test_seed)?;
        if sig.p_value <= self.cfg.alpha {
            self.stats.rejections += 1;
            let global_index = self.window_start + scan.tau_star;
            reports.push(ChangePointReport {
                global_index,
                z_star: scan.z_star,
                p_value: sig.p_value,
                window_span: (self.window_start, self.window_end),
                left_params: scan.left_params,
                right_params: scan.right_params,
            });
            self.window_start = global_index;
            self.phase = Phase::Fill;
            Ok(true)
        } else {
            self.phase = Phase::Grow;
            Ok(false)
        }
    }
}

/// Batch detection over a compositional series: feeds everything into a
/// fresh [`Detector`] and flushes it.
pub fn detect(
    series: &Series,
    cfg: &DetectorConfig,
) -> Result<Vec<ChangePointReport>, DetectorError> {
    if series.kind() != SeriesKind::Compositional {
        return Err(DetectorError::NotCompositional);
    }
    let m = cfg.validate(series.dim())?;
    if series.len() < 2 * m {
        return Err(DetectorError::InsufficientData {
            len: series.len(),
            need: 2 * m,
        });
    }
    let comps = series.compositions().expect("compositional");
    let mut detector = Detector::new(cfg.clone());
    let mut reports = detector.feed(comps)?;
    reports.extend(detector.finish()?);
    Ok(reports)
}
