//! Detection scoring: tolerance-window precision/recall with one-to-one
//! matching, window sweeps, and Monte-Carlo aggregation over seeded runs.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::EvalError;

/// Matching discipline between detections and ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Greedy one-to-one matching by increasing distance; a detection can
    /// claim at most one truth index and vice versa.
    #[default]
    OneToOne,
    /// A detection is correct if any truth index lies within the window;
    /// a truth index is recalled if any detection lies within the window.
    AnyWithinWindow,
}

/// Precision/recall of a detection list against ground truth at tolerance
/// window `w`. `precision` is `None` when there are no detections to score
/// (serialized as null downstream).
#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    pub precision: Option<f64>,
    pub recall: f64,
    /// Matched `(detected index, truth index)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub tolerance_w: usize,
    pub n_detected: usize,
    pub n_truth: usize,
}

fn check_sorted(name: &str, xs: &[usize]) -> Result<(), EvalError> {
    if xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(EvalError::Contract {
            reason: format!("{name} list is not sorted ascending"),
        });
    }
    Ok(())
}

/// Scores `detected` against `truth` within tolerance `w` under one-to-one
/// matching. Both lists must be sorted ascending.
pub fn match_and_score(
    detected: &[usize],
    truth: &[usize],
    w: usize,
) -> Result<EvalResult, EvalError> {
    match_and_score_with_mode(detected, truth, w, MatchMode::OneToOne)
}

/// Scores with an explicit matching discipline.
pub fn match_and_score_with_mode(
    detected: &[usize],
    truth: &[usize],
    w: usize,
    mode: MatchMode,
) -> Result<EvalResult, EvalError> {
    check_sorted("detected", detected)?;
    check_sorted("truth", truth)?;

    if detected.is_empty() {
        return Ok(EvalResult {
            precision: None,
            recall: if truth.is_empty() { 1.0 } else { 0.0 },
            matches: Vec::new(),
            tolerance_w: w,
            n_detected: 0,
            n_truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Ok(EvalResult {
            precision: Some(0.0),
            recall: 0.0,
            matches: Vec::new(),
            tolerance_w: w,
            n_detected: detected.len(),
            n_truth: 0,
        });
    }

    let matches = match mode {
        MatchMode::OneToOne => one_to_one_matches(detected, truth, w),
        MatchMode::AnyWithinWindow => any_within_matches(detected, truth, w),
    };
    let (matched_detected, matched_truth) = match mode {
        MatchMode::OneToOne => (matches.len(), matches.len()),
        MatchMode::AnyWithinWindow => {
            let mut det: Vec<usize> = matches.iter().map(|m| m.0).collect();
            let mut tr: Vec<usize> = matches.iter().map(|m| m.1).collect();
            det.dedup();
            tr.sort_unstable();
            tr.dedup();
            (det.len(), tr.len())
        }
    };
    Ok(EvalResult {
        precision: Some(matched_detected as f64 / detected.len() as f64),
        recall: matched_truth as f64 / truth.len() as f64,
        matches,
        tolerance_w: w,
        n_detected: detected.len(),
        n_truth: truth.len(),
    })
}

fn distance(a: usize, b: usize) -> usize {
    a.abs_diff(b)
}

fn one_to_one_matches(detected: &[usize], truth: &[usize], w: usize) -> Vec<(usize, usize)> {
    // Candidate pairs sorted by (distance, truth index, detected index);
    // new pairs admitted by a larger w always sort after existing ones, so
    // the matched count is non-decreasing in w.
    let mut pairs = Vec::new();
    for &d in detected {
        for &t in truth {
            let dist = distance(d, t);
            if dist <= w {
                pairs.push((dist, t, d));
            }
        }
    }
    pairs.sort_unstable();
    let mut used_detected = std::collections::HashSet::new();
    let mut used_truth = std::collections::HashSet::new();
    let mut matches = Vec::new();
    for (_, t, d) in pairs {
        if used_detected.contains(&d) || used_truth.contains(&t) {
            continue;
        }
        used_detected.insert(d);
        used_truth.insert(t);
        matches.push((d, t));
    }
    matches.sort_unstable();
    matches
}

fn any_within_matches(detected: &[usize], truth: &[usize], w: usize) -> Vec<(usize, usize)> {
    let mut matches = Vec::new();
    for &d in detected {
        if let Some(&t) = truth.iter().min_by_key(|&&t| distance(d, t)) {
            if distance(d, t) <= w {
                matches.push((d, t));
            }
        }
    }
    matches
}

/// Precision/recall for every tolerance `w` in `0..=w_max`.
pub fn sweep_curves(
    detected: &[usize],
    truth: &[usize],
    w_max: usize,
) -> Result<Vec<(usize, Option<f64>, f64)>, EvalError> {
    (0..=w_max)
        .map(|w| {
            let r = match_and_score(detected, truth, w)?;
            Ok((w, r.precision, r.recall))
        })
        .collect()
}

/// Per-run record emitted by [`monte_carlo`].
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    /// `Ok` carries the run's scores; `Err` carries the failure message.
    pub outcome: Result<EvalOutcome, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutcome {
    pub precision: Option<f64>,
    pub recall: f64,
    pub detected: usize,
    pub matched: usize,
}

/// Aggregate of a Monte-Carlo experiment.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub failed: usize,
    /// Mean over runs with a defined precision; `None` if every run was
    /// null or failed.
    pub mean_precision: Option<f64>,
    /// Number of successful runs whose precision was undefined.
    pub null_precision_runs: usize,
    pub mean_recall: Option<f64>,
    pub records: Vec<RunRecord>,
}

/// Runs a seeded experiment `runs` times with seeds `seed0..seed0+runs-1`
/// (in parallel; each run is independent) and aggregates the scores. Null
/// precisions are excluded from the precision mean and counted separately;
/// failed runs are excluded from both means and counted.
pub fn monte_carlo<F>(runs: usize, seed0: u64, runner: F) -> MonteCarloSummary
where
    F: Fn(u64) -> Result<EvalResult, String> + Sync,
{
    let records: Vec<RunRecord> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let seed = seed0.wrapping_add(run as u64);
            let outcome = runner(seed).map(|r| EvalOutcome {
                precision: r.precision,
                recall: r.recall,
                detected: r.n_detected,
                matched: r.matches.len(),
            });
            RunRecord { run, seed, outcome }
        })
        .collect();
    summarize(runs, records)
}

fn summarize(runs: usize, records: Vec<RunRecord>) -> MonteCarloSummary {
    let mut failed = 0;
    let mut precision_sum = 0.0;
    let mut precision_n = 0usize;
    let mut null_precision = 0usize;
    let mut recall_sum = 0.0;
    let mut recall_n = 0usize;
    for rec in &records {
        match &rec.outcome {
            Ok(o) => {
                match o.precision {
                    Some(p) => {
                        precision_sum += p;
                        precision_n += 1;
                    }
                    None => null_precision += 1,
                }
                recall_sum += o.recall;
                recall_n += 1;
            }
            Err(_) => failed += 1,
        }
    }
    MonteCarloSummary {
        runs,
        failed,
        mean_precision: (precision_n > 0).then(|| precision_sum / precision_n as f64),
        null_precision_runs: null_precision,
        mean_recall: (recall_n > 0).then(|| recall_sum / recall_n as f64),
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_detection_against_three_truths() {
        let r = match_and_score(&[298], &[300, 600, 900], 12).unwrap();
        assert_eq!(r.precision, Some(1.0));
        assert!((r.recall - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.matches, vec![(298, 300)]);
    }

    #[test]
    fn empty_detected_gives_null_precision() {
        let r = match_and_score(&[], &[300], 12).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, 0.0);

        let r = match_and_score(&[], &[], 12).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, 1.0);
    }

    #[test]
    fn detections_without_truth_are_false_positives() {
        let r = match_and_score(&[10, 20], &[], 5).unwrap();
        assert_eq!(r.precision, Some(0.0));
        assert_eq!(r.recall, 0.0);
    }

    #[test]
    fn one_to_one_blocks_double_matching() {
        let r = match_and_score(&[300, 305], &[300], 12).unwrap();
        assert_eq!(r.precision, Some(0.5));
        assert_eq!(r.recall, 1.0);
        assert_eq!(r.matches, vec![(300, 300)]);
    }

    #[test]
    fn any_within_mode_counts_overlap() {
        let r =
            match_and_score_with_mode(&[300, 305], &[300], 12, MatchMode::AnyWithinWindow)
                .unwrap();
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.recall, 1.0);
    }

    #[test]
    fn ties_prefer_earlier_truth() {
        // detection 10 is equidistant from truths 8 and 12
        let r = match_and_score(&[10], &[8, 12], 5).unwrap();
        assert_eq!(r.matches, vec![(10, 8)]);
    }

    #[test]
    fn rejects_unsorted_input() {
        assert!(match_and_score(&[5, 3], &[1], 2).is_err());
        assert!(match_and_score(&[1], &[9, 2], 2).is_err());
    }

    #[test]
    fn exact_match_at_zero_window() {
        let r = match_and_score(&[3, 9], &[3, 9], 0).unwrap();
        assert_eq!(r.precision, Some(1.0));
        assert_eq!(r.recall, 1.0);
    }

    #[test]
    fn sweep_is_non_decreasing() {
        let sweep = sweep_curves(&[5, 40, 90], &[10, 50, 95], 50).unwrap();
        assert_eq!(sweep.len(), 51);
        for w in sweep.windows(2) {
            let (_, p0, r0) = w[0];
            let (_, p1, r1) = w[1];
            assert!(p1.unwrap() >= p0.unwrap());
            assert!(r1 >= r0);
        }
    }

    #[test]
    fn monte_carlo_single_run_matches_runner() {
        let s = monte_carlo(1, 9, |_seed| {
            Ok(EvalResult {
                precision: Some(0.75),
                recall: 0.5,
                matches: vec![(1, 2)],
                tolerance_w: 3,
                n_detected: 2,
                n_truth: 2,
            })
        });
        assert_eq!(s.runs, 1);
        assert_eq!(s.failed, 0);
        assert_eq!(s.mean_precision, Some(0.75));
        assert_eq!(s.mean_recall, Some(0.5));
    }

    #[test]
    fn monte_carlo_excludes_nulls_and_failures() {
        let s = monte_carlo(4, 0, |seed| match seed {
            0 => Ok(EvalResult {
                precision: Some(1.0),
                recall: 1.0,
                matches: vec![],
                tolerance_w: 0,
                n_detected: 1,
                n_truth: 1,
            }),
            1 => Ok(EvalResult {
                precision: None,
                recall: 0.0,
                matches: vec![],
                tolerance_w: 0,
                n_detected: 0,
                n_truth: 1,
            }),
            2 => Err("boom".to_string()),
            _ => Ok(EvalResult {
                precision: Some(0.5),
                recall: 0.5,
                matches: vec![],
                tolerance_w: 0,
                n_detected: 2,
                n_truth: 2,
            }),
        });
        assert_eq!(s.failed, 1);
        assert_eq!(s.null_precision_runs, 1);
        assert_eq!(s.mean_precision, Some(0.75));
        assert!((s.mean_recall.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_all_null_gives_null_aggregate() {
        let s = monte_carlo(3, 0, |_seed| {
            Ok(EvalResult {
                precision: None,
                recall: 0.0,
                matches: vec![],
                tolerance_w: 0,
                n_detected: 0,
                n_truth: 1,
            })
        });
        assert_eq!(s.mean_precision, None);
        assert_eq!(s.null_precision_runs, 3);
    }

    proptest! {
        #[test]
        fn matching_is_one_to_one_and_self_match_is_perfect(
            mut detected in proptest::collection::vec(0usize..1000, 0..12),
            mut truth in proptest::collection::vec(0usize..1000, 0..12),
            w in 0usize..60,
        ) {
            detected.sort_unstable();
            detected.dedup();
            truth.sort_unstable();
            truth.dedup();
            let r = match_and_score(&detected, &truth, w).unwrap();
            prop_assert!(r.matches.len() <= detected.len().min(truth.len()));
            for &(d, t) in &r.matches {
                prop_assert!(d.abs_diff(t) <= w);
            }
            if !detected.is_empty() {
                let own = match_and_score(&detected, &detected, 0).unwrap();
                prop_assert_eq!(own.precision, Some(1.0));
                prop_assert!((own.recall - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn sweep_monotone_random(
            mut detected in proptest::collection::vec(0usize..300, 0..8),
            mut truth in proptest::collection::vec(0usize..300, 0..8),
        ) {
            detected.sort_unstable();
            detected.dedup();
            truth.sort_unstable();
            truth.dedup();
            let sweep = sweep_curves(&detected, &truth, 40).unwrap();
            for w in sweep.windows(2) {
                match (w[0].1, w[1].1) {
                    (Some(p0), Some(p1)) => prop_assert!(p1 >= p0),
                    (None, None) => {}
                    _ => prop_assert!(false, "precision definedness changed with w"),
                }
                prop_assert!(w[1].2 >= w[0].2);
            }
        }
    }
}
