//! Seeded synthetic generators for the benchmark datasets: Dirichlet and
//! Dirichlet-mixture segments, Gaussian segments with optional projection
//! onto the simplex (L1 normalization or expit), and sparse mean/variance
//! change presets.
//!
//! All randomness flows from one 64-bit seed through counter-based stream
//! splitting, so each segment draws from its own stream and adding a
//! segment never perturbs earlier draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dirichlet::{symmetric_kl, DirichletParams};
use crate::error::DataGenError;
use crate::seed::derive;
use crate::simplex::{Composition, SegmentLabeling, Series};
use crate::transform::expit_map;

/// Per-sample redraw budget for positivity-constrained generation.
const REDRAW_BUDGET: usize = 100;

/// Covariance of a Gaussian segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Covariance {
    /// Independent components with the given standard deviations.
    Diagonal { sd: Vec<f64> },
    /// Full covariance matrix (symmetric positive definite).
    Full { matrix: Vec<Vec<f64>> },
}

impl Covariance {
    fn dim(&self) -> usize {
        match self {
            Covariance::Diagonal { sd } => sd.len(),
            Covariance::Full { matrix } => matrix.len(),
        }
    }

    fn validate(&self) -> Result<(), DataGenError> {
        match self {
            Covariance::Diagonal { sd } => {
                if sd.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
                    return Err(DataGenError::InvalidSpec {
                        reason: "diagonal covariance needs positive standard deviations"
                            .to_string(),
                    });
                }
            }
            Covariance::Full { matrix } => {
                let d = matrix.len();
                for row in matrix {
                    if row.len() != d {
                        return Err(DataGenError::InvalidSpec {
                            reason: "covariance matrix is not square".to_string(),
                        });
                    }
                }
                for i in 0..d {
                    for j in 0..d {
                        if (matrix[i][j] - matrix[j][i]).abs() > 1e-12 {
                            return Err(DataGenError::InvalidSpec {
                                reason: "covariance matrix is not symmetric".to_string(),
                            });
                        }
                    }
                }
                cholesky(matrix).ok_or_else(|| DataGenError::InvalidSpec {
                    reason: "covariance matrix is not positive definite".to_string(),
                })?;
            }
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor, or `None` if not positive definite.
fn cholesky(matrix: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = matrix.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Sampling family of one homogeneous segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SegmentFamily {
    Dirichlet { alpha: DirichletParams },
    DirichletMixture {
        components: Vec<DirichletParams>,
        weights: Vec<f64>,
    },
    Gaussian { mean: Vec<f64>, cov: Covariance },
}

impl SegmentFamily {
    fn dim(&self) -> usize {
        match self {
            SegmentFamily::Dirichlet { alpha } => alpha.dim(),
            SegmentFamily::DirichletMixture { components, .. } => {
                components.first().map_or(0, |c| c.dim())
            }
            SegmentFamily::Gaussian { mean, .. } => mean.len(),
        }
    }

    fn is_gaussian(&self) -> bool {
        matches!(self, SegmentFamily::Gaussian { .. })
    }

    fn validate(&self) -> Result<(), DataGenError> {
        match self {
            SegmentFamily::Dirichlet { .. } => Ok(()),
            SegmentFamily::DirichletMixture {
                components,
                weights,
            } => {
                if components.is_empty() || components.len() != weights.len() {
                    return Err(DataGenError::InvalidSpec {
                        reason: "mixture needs matching non-empty components and weights"
                            .to_string(),
                    });
                }
                let dim = components[0].dim();
                if components.iter().any(|c| c.dim() != dim) {
                    return Err(DataGenError::InvalidSpec {
                        reason: "mixture components differ in dimension".to_string(),
                    });
                }
                if weights.iter().any(|&w| !(w >= 0.0)) {
                    return Err(DataGenError::InvalidSpec {
                        reason: "mixture weights must be non-negative".to_string(),
                    });
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(DataGenError::InvalidSpec {
                        reason: format!("mixture weights sum to {sum}, expected 1"),
                    });
                }
                Ok(())
            }
            SegmentFamily::Gaussian { mean, cov } => {
                if mean.len() != cov.dim() {
                    return Err(DataGenError::InvalidSpec {
                        reason: "gaussian mean and covariance dimensions differ".to_string(),
                    });
                }
                cov.validate()
            }
        }
    }
}

/// One homogeneous run of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub length: usize,
    pub family: SegmentFamily,
}

/// Transformation applied to Gaussian samples after drawing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostTransform {
    None,
    /// x -> x / |x|_1, redrawing samples with non-positive components.
    L1Normalize,
    /// Inverse multinomial logit into the (d+1)-component simplex.
    Expit,
}

/// Full generation recipe: ordered segments, a post transform, and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub segments: Vec<SegmentSpec>,
    pub post_transform: PostTransform,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), DataGenError> {
        if self.segments.is_empty() {
            return Err(DataGenError::InvalidSpec {
                reason: "no segments".to_string(),
            });
        }
        let dim = self.segments[0].family.dim();
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.length == 0 {
                return Err(DataGenError::InvalidSpec {
                    reason: format!("segment {i} has zero length"),
                });
            }
            seg.family.validate()?;
            if seg.family.dim() != dim {
                return Err(DataGenError::InvalidSpec {
                    reason: format!("segment {i} dimension differs"),
                });
            }
        }
        let all_gaussian = self.segments.iter().all(|s| s.family.is_gaussian());
        let any_gaussian = self.segments.iter().any(|s| s.family.is_gaussian());
        if self.post_transform != PostTransform::None && !all_gaussian {
            return Err(DataGenError::InvalidSpec {
                reason: "post transform applies to gaussian segments only".to_string(),
            });
        }
        if any_gaussian != all_gaussian {
            return Err(DataGenError::InvalidSpec {
                reason: "cannot mix gaussian and simplex families in one spec".to_string(),
            });
        }
        Ok(())
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }
}

fn sample_dirichlet(alpha: &DirichletParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    alpha
        .alpha()
        .iter()
        .map(|&a| {
            let g = Gamma::new(a, 1.0).expect("positive shape");
            g.sample(rng)
        })
        .collect()
}

fn sample_gaussian(
    mean: &[f64],
    cov: &Covariance,
    chol: Option<&Vec<Vec<f64>>>,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    match cov {
        Covariance::Diagonal { sd } => mean
            .iter()
            .zip(sd)
            .map(|(&m, &s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect(),
        Covariance::Full { .. } => {
            let l = chol.expect("cholesky precomputed for full covariance");
            let d = mean.len();
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            (0..d)
                .map(|i| {
                    let mut v = mean[i];
                    for j in 0..=i {
                        v += l[i][j] * z[j];
                    }
                    v
                })
                .collect()
        }
    }
}

/// Draws the series described by `spec`. Returns the samples in segment
/// order together with the ground-truth boundaries (cumulative segment
/// lengths). Deterministic in `spec.seed`.
pub fn generate(spec: &GenSpec) -> Result<(Series, SegmentLabeling), DataGenError> {
    spec.validate()?;
    let total = spec.total_len();
    let gaussian = spec.segments[0].family.is_gaussian();

    let mut boundaries = Vec::new();
    let mut acc = 0usize;
    for seg in &spec.segments[..spec.segments.len() - 1] {
        acc += seg.length;
        boundaries.push(acc);
    }
    let labeling = SegmentLabeling::new(boundaries, total)?;

    if gaussian {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(total);
        let mut comps: Vec<Composition> = Vec::with_capacity(total);
        for (seg_idx, seg) in spec.segments.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, seg_idx as u64, 0));
            let (mean, cov) = match &seg.family {
                SegmentFamily::Gaussian { mean, cov } => (mean, cov),
                _ => unreachable!("validated gaussian"),
            };
            let chol = match cov {
                Covariance::Full { matrix } => Some(cholesky(matrix).expect("validated SPD")),
                Covariance::Diagonal { .. } => None,
            };
            for _ in 0..seg.length {
                match spec.post_transform {
                    PostTransform::None => {
                        rows.push(sample_gaussian(mean, cov, chol.as_ref(), &mut rng));
                    }
                    PostTransform::L1Normalize => {
                        let mut ok = None;
                        for _ in 0..REDRAW_BUDGET {
                            let y = sample_gaussian(mean, cov, chol.as_ref(), &mut rng);
                            if y.iter().all(|&v| v > 0.0) {
                                ok = Some(y);
                                break;
                            }
                        }
                        let y = ok.ok_or(DataGenError::RedrawBudgetExhausted {
                            segment: seg_idx,
                        })?;
                        let sum: f64 = y.iter().sum();
                        comps.push(Composition::from_validated(
                            y.iter().map(|&v| v / sum).collect(),
                        ));
                    }
                    PostTransform::Expit => {
                        let y = sample_gaussian(mean, cov, chol.as_ref(), &mut rng);
                        comps.push(expit_map(&y).expect("finite gaussian draw"));
                    }
                }
            }
        }
        let series = if spec.post_transform == PostTransform::None {
            Series::general(rows)?
        } else {
            Series::from_compositions(comps)?
        };
        return Ok((series, labeling));
    }

    let mut comps: Vec<Composition> = Vec::with_capacity(total);
    for (seg_idx, seg) in spec.segments.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, seg_idx as u64, 0));
        for _ in 0..seg.length {
            let raw = match &seg.family {
                SegmentFamily::Dirichlet { alpha } => sample_dirichlet(alpha, &mut rng),
                SegmentFamily::DirichletMixture {
                    components,
                    weights,
                } => {
                    let u: f64 = rng.gen();
                    let mut cum = 0.0;
                    let mut chosen = components.len() - 1;
                    for (ci, &w) in weights.iter().enumerate() {
                        cum += w;
                        if u < cum {
                            chosen = ci;
                            break;
                        }
                    }
                    sample_dirichlet(&components[chosen], &mut rng)
                }
                SegmentFamily::Gaussian { .. } => unreachable!("validated simplex"),
            };
            let comp = Composition::clamp_to_interior(&raw, 1e-12).map_err(|_| {
                DataGenError::RedrawBudgetExhausted { segment: seg_idx }
            })?;
            comps.push(comp);
        }
    }
    Ok((Series::from_compositions(comps)?, labeling))
}

/// Searches the perturbation path `α'(c) = base ⊙ exp(c·u)` (u the unit
/// direction with alternating ±1 components) for the parameter vector whose
/// symmetric KL distance from `base` hits `target_sym_kl`, by bisection on
/// `c ∈ [0, 10]`. Monotonicity of the distance along the path is checked
/// numerically while bracketing.
pub fn find_dirichlet_pair(
    base: &DirichletParams,
    target_sym_kl: f64,
    tol: f64,
) -> Result<DirichletParams, DataGenError> {
    if target_sym_kl < 0.0 || !target_sym_kl.is_finite() {
        return Err(DataGenError::InvalidSpec {
            reason: format!("target symmetric KL {target_sym_kl} must be non-negative"),
        });
    }
    if target_sym_kl == 0.0 {
        return Ok(base.clone());
    }
    let k = base.dim();
    let u: Vec<f64> = (0..k)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (k as f64).sqrt())
        .collect();
    let at = |c: f64| -> Result<(DirichletParams, f64), DataGenError> {
        let alpha: Vec<f64> = base
            .alpha()
            .iter()
            .zip(&u)
            .map(|(&a, &ui)| a * (c * ui).exp())
            .collect();
        let p = DirichletParams::new(alpha)?;
        let d = symmetric_kl(base, &p)?;
        Ok((p, d))
    };

    const C_MAX: f64 = 10.0;
    let mut lo = 0.0;
    let mut hi = 0.01;
    let mut prev = 0.0;
    loop {
        let (_, d) = at(hi)?;
        if d + 1e-12 < prev {
            return Err(DataGenError::SearchFailure {
                target: target_sym_kl,
            });
        }
        prev = d;
        if d >= target_sym_kl {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > C_MAX {
            return Err(DataGenError::SearchFailure {
                target: target_sym_kl,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (_, d) = at(mid)?;
        if (d - target_sym_kl).abs() <= tol {
            return at(mid).map(|(p, _)| p);
        }
        if d < target_sym_kl {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (p, d) = at(0.5 * (lo + hi))?;
    if (d - target_sym_kl).abs() <= tol {
        Ok(p)
    } else {
        Err(DataGenError::SearchFailure {
            target: target_sym_kl,
        })
    }
}

/// What changes between adjacent Gaussian segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    /// Selected means shift by one base-signal unit.
    Mean,
    /// Selected standard deviations double.
    Var,
}

/// Noise labels as the source experiments name them: the "high"
/// signal-to-noise setting is the low-noise one (σ = signal/5), "low" is
/// the high-noise one (σ four times larger).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrLabel {
    High,
    Low,
}

impl SnrLabel {
    pub fn noise_sd(self) -> f64 {
        match self {
            SnrLabel::High => 0.2,
            SnrLabel::Low => 0.8,
        }
    }
}

/// Builds consecutive Gaussian segments where each boundary changes a
/// uniformly chosen `⌈sparsity·d⌉`-subset of coordinates. Mean changes
/// shift the selected means by one signal unit (direction alternating per
/// boundary); variance changes double the selected standard deviations
/// (halved back on alternating boundaries). Diagonal covariance. The base
/// mean keeps every coordinate at least 5σ above zero so positivity-
/// constrained post transforms almost never redraw.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_preset(
    kind: ChangeKind,
    snr: SnrLabel,
    d: usize,
    sparsity: f64,
    segments: usize,
    seg_len: usize,
    seed: u64,
) -> Result<GenSpec, DataGenError> {
    if d < 2 || segments < 2 || seg_len == 0 {
        return Err(DataGenError::InvalidSpec {
            reason: "need d >= 2, segments >= 2, positive segment length".to_string(),
        });
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(DataGenError::InvalidSpec {
            reason: format!("sparsity {sparsity} outside (0, 1]"),
        });
    }
    let sigma0 = snr.noise_sd();
    let n_changed = ((sparsity * d as f64).ceil() as usize).clamp(1, d);
    // Worst-case sd after alternating doublings is 4σ0 for up to a handful
    // of segments; the mean wanders at most one unit per boundary.
    let base_mean = 5.0 * (4.0 * sigma0) + segments as f64;

    let mut mean = vec![base_mean; d];
    let mut sd = vec![sigma0; d];
    let mut specs = Vec::with_capacity(segments);
    specs.push(SegmentSpec {
        length: seg_len,
        family: SegmentFamily::Gaussian {
            mean: mean.clone(),
            cov: Covariance::Diagonal { sd: sd.clone() },
        },
    });
    for boundary in 1..segments {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, 0xC00D, boundary as u64));
        let mut coords: Vec<usize> = (0..d).collect();
        // partial Fisher-Yates: the first n_changed entries are a uniform
        // subset
        for i in 0..n_changed {
            let j = rng.gen_range(i..d);
            coords.swap(i, j);
        }
        let up = boundary % 2 == 1;
        for &c in &coords[..n_changed] {
            match kind {
                ChangeKind::Mean => mean[c] += if up { 1.0 } else { -1.0 },
                ChangeKind::Var => sd[c] *= if up { 2.0 } else { 0.5 },
            }
        }
        specs.push(SegmentSpec {
            length: seg_len,
            family: SegmentFamily::Gaussian {
                mean: mean.clone(),
                cov: Covariance::Diagonal { sd: sd.clone() },
            },
        });
    }
    Ok(GenSpec {
        segments: specs,
        post_transform: PostTransform::None,
        seed,
    })
}

/// Two Dirichlet segments at a prescribed symmetric-KL separation
/// (symmetric base α = 2).
pub fn preset_dirichlet_pair(
    d: usize,
    seg_len: usize,
    sym_kl: f64,
    seed: u64,
) -> Result<GenSpec, DataGenError> {
    let base = DirichletParams::symmetric(d, 2.0)?;
    let other = find_dirichlet_pair(&base, sym_kl, 1e-6)?;
    Ok(GenSpec {
        segments: vec![
            SegmentSpec {
                length: seg_len,
                family: SegmentFamily::Dirichlet { alpha: base },
            },
            SegmentSpec {
                length: seg_len,
                family: SegmentFamily::Dirichlet { alpha: other },
            },
        ],
        post_transform: PostTransform::None,
        seed,
    })
}

/// Two Dirichlet-mixture segments with three components, mixture weights
/// fixed at (0.3, 0.4, 0.3); the second segment's component parameters are
/// each multiplied by exp(±0.15) with alternating signs.
pub fn preset_mixture_pair(
    d: usize,
    seg_len: usize,
    seed: u64,
) -> Result<GenSpec, DataGenError> {
    let weights = vec![0.3, 0.4, 0.3];
    let comps_a: Vec<DirichletParams> = (0..3)
        .map(|j| {
            DirichletParams::new(
                (0..d)
                    .map(|i| if i % 3 == j { 6.0 } else { 1.5 })
                    .collect(),
            )
        })
        .collect::<Result<_, _>>()?;
    let comps_b: Vec<DirichletParams> = comps_a
        .iter()
        .map(|c| {
            DirichletParams::new(
                c.alpha()
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| a * if i % 2 == 0 { 0.15f64 } else { -0.15 }.exp())
                    .collect(),
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(GenSpec {
        segments: vec![
            SegmentSpec {
                length: seg_len,
                family: SegmentFamily::DirichletMixture {
                    components: comps_a,
                    weights: weights.clone(),
                },
            },
            SegmentSpec {
                length: seg_len,
                family: SegmentFamily::DirichletMixture {
                    components: comps_b,
                    weights,
                },
            },
        ],
        post_transform: PostTransform::None,
        seed,
    })
}
