//! Compares the five strategies on a pair of synthetic phantoms.
//!
//! ```text
//! cargo run --release -p geoal --example strategy_comparison -- reps=10 noise=0.8 smooth=2
//! ```

use std::time::Instant;

use geoal::engine::{
    run_strategy_traced, summarize, variability_interval, Dataset, PreprocessConfig, RunConfig,
    Strategy,
};
use geoal::volume::{generate_synthetic, SyntheticConfig};

fn main() -> geoal::Result<()> {
    // key=value overrides, e.g. `reps=4 noise=0.25 target=1500`
    let args: Vec<(String, f64)> = std::env::args()
        .skip(1)
        .filter_map(|a| {
            a.split_once('=')
                .and_then(|(k, v)| Some((k.to_string(), v.parse().ok()?)))
        })
        .collect();
    let arg = |key: &str, default: f64| {
        args.iter()
            .find(|(k, _)| k == key)
            .map(|a| a.1)
            .unwrap_or(default)
    };
    let defaults = (
        PreprocessConfig::default(),
        RunConfig::default(),
        SyntheticConfig::default(),
    );
    let repetitions = arg("reps", 10.0) as usize;
    let preprocess = PreprocessConfig {
        target_supervoxels: arg("target", defaults.0.target_supervoxels as f64) as usize,
        compactness: arg("comp", defaults.0.compactness),
        slic_smoothing: arg("smooth", defaults.0.slic_smoothing),
        ..Default::default()
    };
    let radius = arg("radius", defaults.1.radius);
    let phantom = SyntheticConfig {
        noise_sigma: arg("noise", defaults.2.noise_sigma),
        fg_intensity: arg("fg", defaults.2.fg_intensity),
        bg_intensity: arg("bg", defaults.2.bg_intensity),
        ..Default::default()
    };

    let start = Instant::now();
    let (v, l) = generate_synthetic(&SyntheticConfig {
        rng_seed: arg("train_seed", 1.0) as u64,
        ..phantom.clone()
    })?;
    let train = Dataset::prepare(v, l, &preprocess)?;
    let (v, l) = generate_synthetic(&SyntheticConfig {
        rng_seed: arg("test_seed", 2.0) as u64,
        ..phantom
    })?;
    let test = Dataset::prepare(v, l, &preprocess)?;
    println!(
        "prepared {} / {} supervoxels, k = {}, in {:.1?}",
        train.count(),
        test.count(),
        train.graph.k(),
        start.elapsed()
    );

    // best VOC any supervoxel labeling can reach
    let oracle: Vec<bool> = test.truth.iter().map(|&t| t == 1).collect();
    println!(
        "supervoxel ceiling VOC {:.4}",
        test.score_prediction(&oracle).0
    );

    let mut finals = Vec::new();
    for strategy in Strategy::ALL {
        let t = Instant::now();
        let cfg = RunConfig {
            strategy,
            repetitions,
            radius,
            rng_seed: arg("seed", 42.0) as u64,
            ..Default::default()
        };
        let (curve, traces) = run_strategy_traced(&train, &test, &cfg)?;
        let queried: Vec<usize> = traces
            .iter()
            .flat_map(|t| t.queries.iter().flat_map(|q| q.ids.iter().copied()))
            .collect();
        let fg = queried.iter().filter(|&&i| train.truth[i] == 1).count();
        let s = summarize(&curve)?;
        println!(
            "{:>5}: mean VOC {:.4}  dice {:.4}  80% interval {:.4}  queried fg {:.2}  ({:.1?})",
            s.label,
            s.mean_voc,
            s.mean_dice,
            variability_interval(&curve.final_voc())?,
            fg as f64 / queried.len().max(1) as f64,
            t.elapsed()
        );
        finals.push(curve.final_voc());
    }
    let wins = finals[2]
        .iter()
        .zip(&finals[1])
        .filter(|(c, f)| c >= f)
        .count();
    println!(
        "CUs >= FUs in {wins}/{repetitions} repetitions; total {:.1?}",
        start.elapsed()
    );
    Ok(())
}
