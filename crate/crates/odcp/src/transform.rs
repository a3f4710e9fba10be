//! Simplex transform for general multivariate data: standardize, then map
//! into the interior of the simplex with the multi-dimensional expit
//! (inverse multinomial logit). Includes the inverse map, the log-Jacobian
//! of the inverse, and executable checks that log-likelihood ratios and KL
//! integrands are preserved by the transform.
//!
//! The standardization is fitted from data, so the transform is only fixed
//! if the fit window is fixed: fit once (whole series in batch mode, or an
//! initial window that is then frozen) and reuse the same
//! [`Standardization`] for every likelihood comparison. An externally
//! supplied `Standardization` is accepted everywhere for that reason.

use serde::{Deserialize, Serialize};

use crate::error::TransformError;
use crate::simplex::{Composition, Series, SeriesKind};

/// Per-column affine normalization `z = (y - mu) / sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    /// Columns whose standard deviation vanished and was replaced by 1.
    guarded: Vec<usize>,
}

impl Standardization {
    /// Builds a standardization from explicit statistics.
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self, TransformError> {
        if mu.len() != sigma.len() {
            return Err(TransformError::DimensionMismatch {
                left: mu.len(),
                right: sigma.len(),
            });
        }
        let mut guarded = Vec::new();
        let sigma = sigma
            .into_iter()
            .enumerate()
            .map(|(j, s)| {
                if s < 1e-12 || !s.is_finite() {
                    guarded.push(j);
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Self { mu, sigma, guarded })
    }

    /// Per-column mean and sample (n-1) standard deviation of a
    /// general-kind series.
    pub fn fit(series: &Series) -> Result<Self, TransformError> {
        if series.kind() != SeriesKind::General {
            return Err(TransformError::NotGeneral);
        }
        let n = series.len();
        if n < 2 {
            return Err(TransformError::InsufficientData { got: n });
        }
        let d = series.dim();
        let mut mu = vec![0.0; d];
        for row in series.rows() {
            for (m, &v) in mu.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mu {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for row in series.rows() {
            for j in 0..d {
                let c = row[j] - mu[j];
                var[j] += c * c;
            }
        }
        let sigma = var.iter().map(|&v| (v / (n - 1) as f64).sqrt()).collect();
        Self::new(mu, sigma)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Columns where a vanishing standard deviation was replaced by 1.
    pub fn guarded_columns(&self) -> &[usize] {
        &self.guarded
    }

    pub fn standardize(&self, y: &[f64]) -> Result<Vec<f64>, TransformError> {
        if y.len() != self.dim() {
            return Err(TransformError::DimensionMismatch {
                left: y.len(),
                right: self.dim(),
            });
        }
        Ok(y.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    pub fn unstandardize(&self, z: &[f64]) -> Result<Vec<f64>, TransformError> {
        if z.len() != self.dim() {
            return Err(TransformError::DimensionMismatch {
                left: z.len(),
                right: self.dim(),
            });
        }
        Ok(z.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect())
    }
}

/// Multi-dimensional expit: maps d reals to a strictly interior point of
/// the d-simplex with an appended pivot coordinate.
///
/// Computed with a max shift (treating the implicit pivot logit as 0) so
/// components up to ±700 stay finite; fully underflowed components are
/// floored at the smallest normal positive double.
pub fn expit_map(y: &[f64]) -> Result<Composition, TransformError> {
    if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
        return Err(TransformError::Domain { function: "expit_map" });
    }
    let shift = y.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut values = Vec::with_capacity(y.len() + 1);
    let mut denom = (-shift).exp();
    for &v in y {
        let e = (v - shift).exp();
        denom += e;
        values.push(e);
    }
    values.push((-shift).exp());
    for v in &mut values {
        *v = (*v / denom).max(f64::MIN_POSITIVE);
    }
    Ok(Composition::from_validated(values))
}

/// Inverse of [`expit_map`]: `yᵢ = ln(xᵢ / x_{d+1})` for a strictly interior
/// simplex point of d+1 components.
pub fn logit_unmap(x: &[f64]) -> Result<Vec<f64>, TransformError> {
    if x.len() < 2 || x.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(TransformError::Domain {
            function: "logit_unmap",
        });
    }
    let ln_pivot = x[x.len() - 1].ln();
    Ok(x[..x.len() - 1]
        .iter()
        .map(|&v| v.ln() - ln_pivot)
        .collect())
}

/// Log absolute determinant of the Jacobian of the full inverse map
/// (logit, then de-standardize): `-Σ_{i=1}^{d+1} ln xᵢ + Σ_{i=1}^{d} ln σᵢ`.
pub fn log_abs_det_jacobian(
    x: &[f64],
    std: &Standardization,
) -> Result<f64, TransformError> {
    if x.len() != std.dim() + 1 {
        return Err(TransformError::DimensionMismatch {
            left: x.len(),
            right: std.dim() + 1,
        });
    }
    if x.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(TransformError::Domain {
            function: "log_abs_det_jacobian",
        });
    }
    let neg_sum_ln_x: f64 = x.iter().map(|&v| -v.ln()).sum();
    let sum_ln_sigma: f64 = std.sigma().iter().map(|&s| s.ln()).sum();
    Ok(neg_sum_ln_x + sum_ln_sigma)
}

/// Applies the full forward map `f² ∘ f¹` to a general-kind series,
/// producing a compositional series of dimension d+1 in the same order.
pub fn to_compositional(
    series: &Series,
    std: &Standardization,
) -> Result<Series, TransformError> {
    if series.kind() != SeriesKind::General {
        return Err(TransformError::NotGeneral);
    }
    if series.dim() != std.dim() {
        return Err(TransformError::DimensionMismatch {
            left: series.dim(),
            right: std.dim(),
        });
    }
    let comps = series
        .rows()
        .map(|row| expit_map(&std.standardize(row)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Series::from_compositions(comps).expect("non-empty, uniform dimension"))
}

/// Full inverse map `g = (f¹)⁻¹ ∘ (f²)⁻¹` from a simplex point back to data
/// space.
pub fn inverse_map(x: &[f64], std: &Standardization) -> Result<Vec<f64>, TransformError> {
    std.unstandardize(&logit_unmap(x)?)
}

/// An evaluable log-density on ℝᵈ, used by the transform-invariance checks.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Natural log of the density at `y`; `-inf` marks a zero-density point.
    fn log_density(&self, y: &[f64]) -> f64;
}

/// Independent-component Gaussian density.
#[derive(Debug, Clone)]
pub struct DiagonalGaussian {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn new(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self, TransformError> {
        if mean.len() != sd.len() {
            return Err(TransformError::DimensionMismatch {
                left: mean.len(),
                right: sd.len(),
            });
        }
        if sd.iter().any(|&s| !(s > 0.0)) {
            return Err(TransformError::Domain {
                function: "DiagonalGaussian::new",
            });
        }
        Ok(Self { mean, sd })
    }
}

impl LogDensity for DiagonalGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, y: &[f64]) -> f64 {
        const LN_2PI: f64 = 1.837_877_066_409_345_3;
        let mut acc = 0.0;
        for ((&v, &m), &s) in y.iter().zip(&self.mean).zip(&self.sd) {
            let z = (v - m) / s;
            acc += -0.5 * z * z - s.ln() - 0.5 * LN_2PI;
        }
        acc
    }
}

/// One invariance check instance: three hypothesis densities, a candidate
/// split, a general-kind series, and the (fixed) transform.
pub struct LemmaTestCase<'a> {
    pub p0: &'a dyn LogDensity,
    pub p1: &'a dyn LogDensity,
    pub p2: &'a dyn LogDensity,
    pub tau: usize,
    pub series: &'a Series,
    pub std: Standardization,
}

impl<'a> LemmaTestCase<'a> {
    /// Fits the standardization from the series itself.
    pub fn new(
        p0: &'a dyn LogDensity,
        p1: &'a dyn LogDensity,
        p2: &'a dyn LogDensity,
        tau: usize,
        series: &'a Series,
    ) -> Result<Self, TransformError> {
        let std = Standardization::fit(series)?;
        Self::with_standardization(p0, p1, p2, tau, series, std)
    }

    /// Uses an externally supplied standardization (the transform must be
    /// fixed for the invariance statements to apply, and a data-independent
    /// choice sidesteps the circularity of fitting it from the series under
    /// test).
    pub fn with_standardization(
        p0: &'a dyn LogDensity,
        p1: &'a dyn LogDensity,
        p2: &'a dyn LogDensity,
        tau: usize,
        series: &'a Series,
        std: Standardization,
    ) -> Result<Self, TransformError> {
        if series.kind() != SeriesKind::General {
            return Err(TransformError::NotGeneral);
        }
        let d = series.dim();
        if p0.dim() != d || p1.dim() != d || p2.dim() != d || std.dim() != d {
            return Err(TransformError::DimensionMismatch {
                left: p0.dim(),
                right: d,
            });
        }
        if tau == 0 || tau >= series.len() {
            return Err(TransformError::Domain {
                function: "LemmaTestCase::tau",
            });
        }
        Ok(Self {
            p0,
            p1,
            p2,
            tau,
            series,
            std,
        })
    }
}

fn finite_log_density(
    p: &dyn LogDensity,
    y: &[f64],
    index: usize,
) -> Result<f64, TransformError> {
    let v = p.log_density(y);
    if v.is_nan() || v == f64::NEG_INFINITY {
        return Err(TransformError::DegenerateDensity { index });
    }
    Ok(v)
}

/// Computes the log-likelihood ratio of the split hypothesis against the
/// no-change hypothesis twice: once in data space and once on the
/// transformed series with the change-of-variables densities
/// `q(x) = p(g(x)) |det J(x)|`. The two values are equal up to round-trip
/// rounding of `g`.
pub fn check_llr_invariance(case: &LemmaTestCase) -> Result<(f64, f64), TransformError> {
    let series = case.series;
    let t = series.len();

    let mut llr_y = 0.0;
    for (i, y) in series.rows().enumerate() {
        let p_alt = if i < case.tau { case.p1 } else { case.p2 };
        llr_y += finite_log_density(p_alt, y, i)?;
        llr_y -= finite_log_density(case.p0, y, i)?;
    }

    let transformed = to_compositional(series, &case.std)?;
    let mut llr_x = 0.0;
    for i in 0..t {
        let x = transformed.row(i);
        let y_back = inverse_map(x, &case.std)?;
        let log_j = log_abs_det_jacobian(x, &case.std)?;
        let p_alt = if i < case.tau { case.p1 } else { case.p2 };
        let q_alt = finite_log_density(p_alt, &y_back, i)? + log_j;
        let q_null = finite_log_density(case.p0, &y_back, i)? + log_j;
        llr_x += q_alt - q_null;
    }
    Ok((llr_y, llr_x))
}

/// Pointwise KL integrand identity: for every sample, the log-ratio of the
/// mixture density to the null density is the same in data space and on the
/// transformed series (the Jacobian factor cancels). Returns the per-sample
/// (data-space, simplex-space) pairs.
pub fn kl_integrand_identity(
    case: &LemmaTestCase,
) -> Result<Vec<(f64, f64)>, TransformError> {
    let series = case.series;
    let t = series.len();
    let w1 = case.tau as f64 / t as f64;
    let w2 = 1.0 - w1;

    let log_mix = |lp1: f64, lp2: f64| -> f64 {
        let m = (lp1 + w1.ln()).max(lp2 + w2.ln());
        m + ((lp1 + w1.ln() - m).exp() + (lp2 + w2.ln() - m).exp()).ln()
    };

    let transformed = to_compositional(series, &case.std)?;
    let mut pairs = Vec::with_capacity(t);
    for i in 0..t {
        let y = series.row(i);
        let lp1 = finite_log_density(case.p1, y, i)?;
        let lp2 = finite_log_density(case.p2, y, i)?;
        let lp0 = finite_log_density(case.p0, y, i)?;
        let ratio_y = log_mix(lp1, lp2) - lp0;

        let x = transformed.row(i);
        let y_back = inverse_map(x, &case.std)?;
        let log_j = log_abs_det_jacobian(x, &case.std)?;
        let lq1 = finite_log_density(case.p1, &y_back, i)? + log_j;
        let lq2 = finite_log_density(case.p2, &y_back, i)? + log_j;
        let lq0 = finite_log_density(case.p0, &y_back, i)? + log_j;
        let ratio_x = log_mix(lq1, lq2) - lq0;
        pairs.push((ratio_y, ratio_x));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn fit_two_point_example() {
        let s = Series::general(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let std = Standardization::fit(&s).unwrap();
        assert_eq!(std.mu(), &[2.0, 3.0]);
        let rt2 = 2.0f64.sqrt();
        assert!((std.sigma()[0] - rt2).abs() < 1e-12);
        assert!((std.sigma()[1] - rt2).abs() < 1e-12);
        assert!(std.guarded_columns().is_empty());
    }

    #[test]
    fn fit_guards_constant_column() {
        let s = Series::general(vec![vec![5.0, 1.0], vec![5.0, 2.0]]).unwrap();
        let std = Standardization::fit(&s).unwrap();
        assert_eq!(std.sigma()[0], 1.0);
        assert_eq!(std.guarded_columns(), &[0]);
    }

    #[test]
    fn fit_rejects_short_series() {
        let s = Series::general(vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            Standardization::fit(&s),
            Err(TransformError::InsufficientData { got: 1 })
        ));
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_std() {
        let mut rng = StdRng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.gen_range(-4.0..9.0)).collect())
            .collect();
        let s = Series::general(rows.clone()).unwrap();
        let std = Standardization::fit(&s).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| std.standardize(r).unwrap()).collect();
        for j in 0..3 {
            let mean: f64 = z.iter().map(|r| r[j]).sum::<f64>() / z.len() as f64;
            let var: f64 =
                z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expit_examples() {
        let c = expit_map(&[0.0]).unwrap();
        assert!((c.values()[0] - 0.5).abs() < 1e-15);
        assert!((c.values()[1] - 0.5).abs() < 1e-15);

        let c = expit_map(&[0.0, 0.0]).unwrap();
        for &v in c.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let c = expit_map(&[2.0f64.ln(), 0.0]).unwrap();
        assert!((c.values()[0] - 0.5).abs() < 1e-15);
        assert!((c.values()[1] - 0.25).abs() < 1e-15);
        assert!((c.values()[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn expit_rejects_non_finite() {
        assert!(expit_map(&[f64::NAN]).is_err());
        assert!(expit_map(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn logit_examples() {
        let y = logit_unmap(&[0.5, 0.5]).unwrap();
        assert!(y[0].abs() < 1e-15);
        let y = logit_unmap(&[0.5, 0.25, 0.25]).unwrap();
        assert!((y[0] - 2.0f64.ln()).abs() < 1e-15);
        assert!(y[1].abs() < 1e-15);
        assert!(logit_unmap(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let std1 = Standardization::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let third = 1.0 / 3.0;
        let got = log_abs_det_jacobian(&[third, third, third], &std1).unwrap();
        assert!((got - 27.0f64.ln()).abs() < 1e-12);

        let std2 = Standardization::new(vec![0.0], vec![1.0]).unwrap();
        let got = log_abs_det_jacobian(&[0.5, 0.5], &std2).unwrap();
        assert!((got - 4.0f64.ln()).abs() < 1e-12);

        let std3 = Standardization::new(vec![0.0; 2], vec![2.0; 2]).unwrap();
        let scaled = log_abs_det_jacobian(&[third, third, third], &std3).unwrap();
        assert!((scaled - (27.0f64.ln() + 2.0 * 2.0f64.ln())).abs() < 1e-12);
    }

    /// Finite-difference determinant of the Jacobian of the inverse map on
    /// the free coordinates (x₁..x_d), with x_{d+1} = 1 − Σ xᵢ.
    fn fd_log_abs_det(x: &[f64], std: &Standardization) -> f64 {
        let d = x.len() - 1;
        let h = 1e-6;
        let eval = |free: &[f64]| -> Vec<f64> {
            let mut full = free.to_vec();
            full.push(1.0 - free.iter().sum::<f64>());
            inverse_map(&full, std).unwrap()
        };
        let mut jac = vec![vec![0.0; d]; d];
        let free: Vec<f64> = x[..d].to_vec();
        for j in 0..d {
            let mut up = free.clone();
            up[j] += h;
            let mut down = free.clone();
            down[j] -= h;
            let yu = eval(&up);
            let yd = eval(&down);
            for i in 0..d {
                jac[i][j] = (yu[i] - yd[i]) / (2.0 * h);
            }
        }
        log_abs_det(jac)
    }

    fn log_abs_det(mut m: Vec<Vec<f64>>) -> f64 {
        let n = m.len();
        let mut log_det = 0.0;
        for col in 0..n {
            let (pivot_row, _) = m
                .iter()
                .enumerate()
                .skip(col)
                .map(|(i, row)| (i, row[col].abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            m.swap(col, pivot_row);
            let pivot = m[col][col];
            log_det += pivot.abs().ln();
            for row in col + 1..n {
                let factor = m[row][col] / pivot;
                for k in col..n {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
        log_det
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(17);
        for &d in &[1usize, 2, 3, 5] {
            let std = Standardization::new(
                (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                (0..d).map(|_| rng.gen_range(0.3..3.0)).collect(),
            )
            .unwrap();
            for _ in 0..8 {
                let raw: Vec<f64> = (0..d + 1).map(|_| rng.gen_range(0.05..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                let x: Vec<f64> = raw.iter().map(|&v| v / sum).collect();
                let analytic = log_abs_det_jacobian(&x, &std).unwrap();
                let numeric = fd_log_abs_det(&x, &std);
                assert!(
                    (analytic - numeric).abs() < 1e-4,
                    "d={d}: analytic {analytic} vs fd {numeric}"
                );
            }
        }
    }

    #[test]
    fn to_compositional_zero_input_maps_to_barycenter() {
        let s = Series::general(vec![vec![0.0, 0.0]; 5]).unwrap();
        let std = Standardization::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let t = to_compositional(&s, &std).unwrap();
        assert_eq!(t.kind(), SeriesKind::Compositional);
        assert_eq!(t.len(), 5);
        assert_eq!(t.dim(), 3);
        for row in t.rows() {
            for &v in row {
                assert!((v - 1.0 / 3.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn to_compositional_round_trips_through_inverse() {
        let mut rng = StdRng::seed_from_u64(23);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let s = Series::general(rows.clone()).unwrap();
        let std = Standardization::fit(&s).unwrap();
        let t = to_compositional(&s, &std).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let back = inverse_map(t.row(i), &std).unwrap();
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() < 1e-8, "sample {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn llr_zero_for_identical_densities() {
        let g = DiagonalGaussian::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut rng = StdRng::seed_from_u64(29);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                (0..2)
                    .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect();
        let s = Series::general(rows).unwrap();
        let case = LemmaTestCase::new(&g, &g, &g, 20, &s).unwrap();
        let (y, x) = check_llr_invariance(&case).unwrap();
        assert_eq!(y, 0.0);
        assert!(x.abs() < 1e-8);
    }

    #[test]
    fn llr_equal_for_mean_shifted_gaussians() {
        let p0 = DiagonalGaussian::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let p1 = DiagonalGaussian::new(vec![1.0, -0.5], vec![1.0, 1.0]).unwrap();
        let p2 = DiagonalGaussian::new(vec![-1.0, 0.5], vec![1.3, 0.7]).unwrap();
        let mut rng = StdRng::seed_from_u64(31);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                (0..2)
                    .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect();
        let s = Series::general(rows).unwrap();
        let case = LemmaTestCase::new(&p0, &p1, &p2, 30, &s).unwrap();
        let (y, x) = check_llr_invariance(&case).unwrap();
        assert!((y - x).abs() < 1e-8, "{y} vs {x}");
    }

    #[test]
    fn kl_integrand_matches_pointwise() {
        let p0 = DiagonalGaussian::new(vec![0.0], vec![1.0]).unwrap();
        let p1 = DiagonalGaussian::new(vec![0.8], vec![1.0]).unwrap();
        let p2 = DiagonalGaussian::new(vec![-0.2], vec![1.5]).unwrap();
        let mut rng = StdRng::seed_from_u64(37);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)])
            .collect();
        let s = Series::general(rows).unwrap();
        let case = LemmaTestCase::new(&p0, &p1, &p2, 25, &s).unwrap();
        for (i, (a, b)) in kl_integrand_identity(&case).unwrap().iter().enumerate() {
            assert!((a - b).abs() < 1e-10, "sample {i}: {a} vs {b}");
        }
    }

    #[test]
    fn degenerate_density_is_an_error() {
        struct Spike;
        impl LogDensity for Spike {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, y: &[f64]) -> f64 {
                if y[0] > 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
        let p0 = Spike;
        let g = DiagonalGaussian::new(vec![0.0], vec![1.0]).unwrap();
        let s = Series::general(vec![vec![-1.0], vec![1.0], vec![2.0]]).unwrap();
        let case = LemmaTestCase::new(&p0, &g, &g, 1, &s).unwrap();
        assert!(matches!(
            check_llr_invariance(&case),
            Err(TransformError::DegenerateDensity { index: 0 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn expit_sums_to_one_and_stays_positive(
            y in proptest::collection::vec(-700.0f64..700.0, 1..6),
        ) {
            let c = expit_map(&y).unwrap();
            let sum: f64 = c.values().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(c.values().iter().all(|&v| v > 0.0));
        }

        #[test]
        fn logit_round_trips_expit(
            y in proptest::collection::vec(-30.0f64..30.0, 1..6),
        ) {
            let c = expit_map(&y).unwrap();
            let back = logit_unmap(c.values()).unwrap();
            for (a, b) in back.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn expit_shift_preserves_ratios(
            y in proptest::collection::vec(-20.0f64..20.0, 2..5),
            c in -5.0f64..5.0,
        ) {
            let shifted: Vec<f64> = y.iter().map(|&v| v + c).collect();
            let out = expit_map(&shifted).unwrap();
            let d = y.len();
            for i in 0..d {
                for j in (i + 1)..d {
                    let ratio = out.values()[i] / out.values()[j];
                    let want = (y[i] - y[j]).exp();
                    prop_assert!((ratio / want - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}
