// marginal exactness vs sequential conditioning
use odcp::datagen::{generate, GenSpec, PostTransform, SegmentFamily, SegmentSpec};
use odcp::detector::{scan_window, significance, Detector, DetectorConfig};
use odcp::dirichlet::DirichletParams;
use rayon::prelude::*;
use std::time::Instant;

fn null_series(len: usize, seed: u64) -> odcp::Series {
    let spec = GenSpec {
        segments: vec![SegmentSpec {
            length: len,
            family: SegmentFamily::Dirichlet {
                alpha: DirichletParams::new((0..10).map(|i| 0.5 + 0.45 * i as f64).collect())
                    .unwrap(),
            },
        }],
        post_transform: PostTransform::None,
        seed,
    };
    generate(&spec).unwrap().0
}

fn main() {
    let t0 = Instant::now();
    // marginal: 400 independent null windows of t=200
    let rejects: usize = (0..400u64)
        .into_par_iter()
        .map(|i| {
            let series = null_series(200, 31_000 + i);
            let cfg = DetectorConfig { seed: 500_000 + i, ..DetectorConfig::default() };
            let window = series.compositions().unwrap();
            let scan = scan_window(window, &cfg).unwrap();
            let sig = significance(window, &scan, &cfg, 77_000 + i).unwrap();
            usize::from(sig.p_value <= 0.05)
        })
        .sum();
    println!(
        "independent windows t=200: rate={:.4} ({} of 400) [{:?}]",
        rejects as f64 / 400.0,
        rejects,
        t0.elapsed()
    );

    // sequential: position of each test within the run
    let t1 = Instant::now();
    let per_pos: Vec<(u64, u64, u64)> = (0..100u64)
        .into_par_iter()
        .map(|run| {
            let series = null_series(600, 9000 + run);
            let cfg = DetectorConfig { seed: 70_000 + run, ..DetectorConfig::default() };
            let mut det = Detector::new(cfg);
            det.feed(series.compositions().unwrap()).unwrap();
            det.finish().unwrap();
            let s = det.stats();
            (s.significance_tests, s.rejections, u64::from(s.rejections > 0))
        })
        .collect();
    let tests: u64 = per_pos.iter().map(|x| x.0).sum();
    let rej: u64 = per_pos.iter().map(|x| x.1).sum();
    let runs_with: u64 = per_pos.iter().map(|x| x.2).sum();
    println!(
        "loop: tests={tests} rej={rej} rate={:.4} runs_with_any={runs_with}/100 [{:?}]",
        rej as f64 / tests as f64,
        t1.elapsed()
    );
}
