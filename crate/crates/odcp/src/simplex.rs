//! Core data types for compositional series: interior simplex samples,
//! multivariate series, and change-point labelings.

use serde::{Deserialize, Serialize};

use crate::error::SimplexError;

/// Ingestion tolerance on the component sum of a compositional sample.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A strictly interior point of the probability simplex: every component
/// positive, components summing to one.
///
/// Construction renormalizes exactly, so downstream code can rely on the
/// sum being 1 up to one rounding of the division.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Composition {
    values: Vec<f64>,
}

impl Composition {
    /// Validates and renormalizes a sample already expected to be interior.
    pub fn new(values: Vec<f64>) -> Result<Self, SimplexError> {
        if values.len() < 2 {
            return Err(SimplexError::InvalidSample {
                reason: format!("need at least 2 components, got {}", values.len()),
            });
        }
        let mut sum = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SimplexError::InvalidSample {
                    reason: format!("component {i} is not finite"),
                });
            }
            if v <= 0.0 {
                return Err(SimplexError::InvalidSample {
                    reason: format!("component {i} = {v} is not strictly positive"),
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SimplexError::InvalidSample {
                reason: format!("components sum to {sum}, outside 1 ± {SUM_TOLERANCE}"),
            });
        }
        Ok(Self::renormalized(values, sum))
    }

    /// Clamps a raw non-negative vector away from the simplex boundary and
    /// renormalizes. Inputs that are already interior and normalized come
    /// back unchanged up to rounding.
    pub fn clamp_to_interior(raw: &[f64], eps: f64) -> Result<Self, SimplexError> {
        let k = raw.len();
        if k < 2 {
            return Err(SimplexError::InvalidSample {
                reason: format!("need at least 2 components, got {k}"),
            });
        }
        if !(eps > 0.0 && eps < 1.0 / k as f64) {
            return Err(SimplexError::InvalidSample {
                reason: format!("eps {eps} outside (0, 1/{k})"),
            });
        }
        let mut sum = 0.0;
        for (i, &v) in raw.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(SimplexError::InvalidSample {
                    reason: format!("component {i} = {v} is negative or not finite"),
                });
            }
            sum += v;
        }
        if sum <= 0.0 {
            return Err(SimplexError::InvalidSample {
                reason: "all components are zero".to_string(),
            });
        }
        let mut values: Vec<f64> = raw.iter().map(|&v| (v / sum).max(eps)).collect();
        let new_sum: f64 = values.iter().sum();
        for v in &mut values {
            *v /= new_sum;
        }
        Ok(Self { values })
    }

    /// Wraps values already known to satisfy the invariants (e.g. produced
    /// by the simplex transform or a validated series).
    pub(crate) fn from_validated(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|&v| v > 0.0));
        debug_assert!((values.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        Self { values }
    }

    fn renormalized(mut values: Vec<f64>, sum: f64) -> Self {
        for v in &mut values {
            *v /= sum;
        }
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of components K.
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Whether a series carries simplex samples or unconstrained vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Compositional,
    General,
}

#[derive(Debug, Clone)]
enum Samples {
    Compositional(Vec<Composition>),
    General(Vec<Vec<f64>>),
}

/// An ordered, fixed-dimension sequence of samples.
#[derive(Debug, Clone)]
pub struct Series {
    samples: Samples,
    dim: usize,
}

impl Series {
    /// Builds a compositional series, validating every row.
    pub fn compositional(rows: Vec<Vec<f64>>) -> Result<Self, SimplexError> {
        let comps = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                Composition::new(row).map_err(|e| SimplexError::InvalidSeries {
                    reason: format!("sample {i}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_compositions(comps)
    }

    /// Builds a compositional series by clamping every row away from the
    /// boundary first. This is the ingestion path for real data, where
    /// exact zeros occur.
    pub fn compositional_clamped(rows: Vec<Vec<f64>>, eps: f64) -> Result<Self, SimplexError> {
        let comps = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                Composition::clamp_to_interior(&row, eps).map_err(|e| {
                    SimplexError::InvalidSeries {
                        reason: format!("sample {i}: {e}"),
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_compositions(comps)
    }

    pub fn from_compositions(comps: Vec<Composition>) -> Result<Self, SimplexError> {
        if comps.is_empty() {
            return Err(SimplexError::InvalidSeries {
                reason: "series is empty".to_string(),
            });
        }
        let dim = comps[0].dim();
        for (i, c) in comps.iter().enumerate() {
            if c.dim() != dim {
                return Err(SimplexError::InvalidSeries {
                    reason: format!("sample {i} has dimension {}, expected {dim}", c.dim()),
                });
            }
        }
        Ok(Self {
            samples: Samples::Compositional(comps),
            dim,
        })
    }

    /// Builds a general (unconstrained) series.
    pub fn general(rows: Vec<Vec<f64>>) -> Result<Self, SimplexError> {
        if rows.is_empty() {
            return Err(SimplexError::InvalidSeries {
                reason: "series is empty".to_string(),
            });
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(SimplexError::InvalidSeries {
                reason: "samples have zero dimension".to_string(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(SimplexError::InvalidSeries {
                    reason: format!("sample {i} has dimension {}, expected {dim}", row.len()),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(SimplexError::InvalidSeries {
                    reason: format!("sample {i} component {j} is not finite"),
                });
            }
        }
        Ok(Self {
            samples: Samples::General(rows),
            dim,
        })
    }

    pub fn kind(&self) -> SeriesKind {
        match self.samples {
            Samples::Compositional(_) => SeriesKind::Compositional,
            Samples::General(_) => SeriesKind::General,
        }
    }

    /// Number of samples T.
    pub fn len(&self) -> usize {
        match &self.samples {
            Samples::Compositional(c) => c.len(),
            Samples::General(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-sample dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        match &self.samples {
            Samples::Compositional(c) => c[i].values(),
            Samples::General(g) => &g[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    /// Simplex samples, when the series is compositional.
    pub fn compositions(&self) -> Option<&[Composition]> {
        match &self.samples {
            Samples::Compositional(c) => Some(c),
            Samples::General(_) => None,
        }
    }
}

/// Positions of the change points of a series: strictly increasing interior
/// indices, each the count of samples before the boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLabeling {
    change_points: Vec<usize>,
}

impl SegmentLabeling {
    pub fn new(change_points: Vec<usize>, series_len: usize) -> Result<Self, SimplexError> {
        for w in change_points.windows(2) {
            if w[0] >= w[1] {
                return Err(SimplexError::InvalidLabeling {
                    reason: format!("indices not strictly increasing: {} then {}", w[0], w[1]),
                });
            }
        }
        for &cp in &change_points {
            if cp == 0 || cp >= series_len {
                return Err(SimplexError::InvalidLabeling {
                    reason: format!("index {cp} not interior to a series of length {series_len}"),
                });
            }
        }
        Ok(Self { change_points })
    }

    pub fn empty() -> Self {
        Self {
            change_points: Vec::new(),
        }
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    /// Number of segments k.
    pub fn segment_count(&self) -> usize {
        self.change_points.len() + 1
    }
}

/// Per-column summary produced by [`validate_series`].
#[derive(Debug, Clone, Serialize)]
pub struct ColumnSummary {
    pub min: f64,
    pub max: f64,
}

/// Diagnostics for a series: shape, kind check and boundary flags.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesDiagnostics {
    pub len: usize,
    pub dim: usize,
    pub kind: SeriesKind,
    pub columns: Vec<ColumnSummary>,
    /// Indices of compositional samples that touch the simplex boundary
    /// (some component ≤ 0) or whose components do not sum to 1 within
    /// tolerance. Always empty for general series.
    pub flagged_samples: Vec<usize>,
    pub ok: bool,
}

/// Inspects raw rows as a prospective series of the given kind and reports
/// shape plus per-column ranges. Boundary-touching or badly normalized
/// compositional rows are flagged rather than rejected; ragged dimensions
/// are an error.
pub fn validate_series(
    rows: &[Vec<f64>],
    kind: SeriesKind,
) -> Result<SeriesDiagnostics, SimplexError> {
    if rows.is_empty() {
        return Err(SimplexError::InvalidSeries {
            reason: "series is empty".to_string(),
        });
    }
    let dim = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(SimplexError::InvalidSeries {
                reason: format!("sample {i} has dimension {}, expected {dim}", row.len()),
            });
        }
    }
    let mut columns = vec![
        ColumnSummary {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        dim
    ];
    let mut flagged = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut sum = 0.0;
        let mut boundary = false;
        for (j, &v) in row.iter().enumerate() {
            columns[j].min = columns[j].min.min(v);
            columns[j].max = columns[j].max.max(v);
            sum += v;
            if v <= 0.0 {
                boundary = true;
            }
        }
        if kind == SeriesKind::Compositional && (boundary || (sum - 1.0).abs() > SUM_TOLERANCE) {
            flagged.push(i);
        }
    }
    let ok = flagged.is_empty();
    Ok(SeriesDiagnostics {
        len: rows.len(),
        dim,
        kind,
        columns,
        flagged_samples: flagged,
        ok,
    })
}
