//! Statistical properties of the simulator and the paired statistics,
//! checked on large batches.

use powerforge_core::design::{generate_trial_table, Direction};
use powerforge_core::simulate::{simulate_batch, simulate_dataset, simulate_range, dataset_seed};
use powerforge_core::stats::pairwise::pairwise_frames;
use powerforge_core::stats::{cohens_d_paired, simulated_power};
use powerforge_core::{
    ConfoundSpec, DependentVariableMeta, ExperimentDesign, IndependentVariable, LevelPair, PopulationModel, Strategy,
};

fn design(strategy: Strategy, n: u32, r: u32) -> ExperimentDesign {
    ExperimentDesign {
        ivs: vec![
            IndependentVariable::new("MEDIUM", ["P", "S"]),
            IndependentVariable::new("LAYOUT", ["1", "2"]),
        ],
        dv: DependentVariableMeta {
            name: "TIME".into(),
            unit: "s".into(),
            expected_range: (0.0, 60.0),
            direction: Direction::LowerIsBetter,
            variability: 5.0,
        },
        strategy,
        replications: r,
        participants: n,
    }
}

fn model(strategy: Strategy, n: u32, r: u32, means: [f64; 4], sd: f64, sd_p: f64) -> PopulationModel {
    let mut c = ConfoundSpec::with_residual_sd(sd);
    c.participant_sd = sd_p;
    PopulationModel::new(design(strategy, n, r), means.to_vec(), c)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn grand_mean_is_calibrated() {
    let (n, r, k, count) = (6u32, 2u32, 4usize, 10_000usize);
    let m = model(Strategy::Random, n, r, [10.0, 12.0, 14.0, 16.0], 2.0, 1.5);
    let batch = simulate_batch(&m, n, count, 42).unwrap();
    let total: f64 = batch.datasets.iter().flat_map(|d| d.responses.iter()).sum();
    let obs = (count * n as usize * k * r as usize) as f64;
    let sigma_total = (2.0f64.powi(2) + 1.5f64.powi(2)).sqrt();
    let tol = 4.0 * sigma_total / obs.sqrt();
    assert!((total / obs - 13.0).abs() < tol, "grand mean {} vs 13 (tol {tol})", total / obs);
}

/// Least-squares slope of mean response on trial index.
fn trial_slope(m: &PopulationModel, n: u32, count: usize, seed: u64) -> f64 {
    let batch = simulate_batch(m, n, count, seed).unwrap();
    let tpp = batch.datasets[0].trials_per_participant;
    let mut sums = vec![0.0; tpp];
    let mut cnt = vec![0usize; tpp];
    for d in &batch.datasets {
        for row in d.rows() {
            sums[row.trial_index] += row.response;
            cnt[row.trial_index] += 1;
        }
    }
    let ys: Vec<f64> = sums.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect();
    let t_bar = (tpp - 1) as f64 / 2.0;
    let y_bar = mean(&ys);
    let num: f64 = ys.iter().enumerate().map(|(t, y)| (t as f64 - t_bar) * (y - y_bar)).sum();
    let den: f64 = (0..tpp).map(|t| (t as f64 - t_bar).powi(2)).sum();
    num / den
}

#[test]
fn doubling_fatigue_doubles_the_slope() {
    let mut m = model(Strategy::Random, 8, 3, [10.0, 12.0, 14.0, 16.0], 3.0, 2.0);
    m.confounds.fatigue_per_trial = 0.8;
    let one = trial_slope(&m, 8, 2000, 1);
    m.confounds.fatigue_per_trial = 1.6;
    let two = trial_slope(&m, 8, 2000, 2);
    assert!((one - 0.8).abs() < 0.04, "slope {one}");
    assert!((two / one - 2.0).abs() < 0.1, "ratio {}", two / one);

    // Higher-is-better flips the direction of the drift.
    m.design.dv.direction = Direction::HigherIsBetter;
    assert!(trial_slope(&m, 8, 500, 3) < -1.4);
}

#[test]
fn datasets_are_independent() {
    let count = 4000;
    let m = model(Strategy::LatinSquare, 4, 1, [1.0, 2.0, 3.0, 4.0], 1.0, 1.0);
    let batch = simulate_batch(&m, 4, count, 9).unwrap();
    let means: Vec<f64> = batch.datasets.iter().map(|d| mean(&d.responses)).collect();
    let mu = mean(&means);
    let num: f64 = means.windows(2).map(|w| (w[0] - mu) * (w[1] - mu)).sum();
    let den: f64 = means.iter().map(|x| (x - mu).powi(2)).sum();
    let rho = num / den;
    assert!(rho.abs() < 4.0 / (count as f64).sqrt(), "lag-1 correlation {rho}");
}

#[test]
fn subranges_compose_to_the_full_batch() {
    let m = model(Strategy::CompleteCounterbalance, 5, 2, [1.0, 2.0, 3.0, 4.0], 1.0, 0.5);
    let full = simulate_batch(&m, 5, 12, 77).unwrap();
    let mut pieces = simulate_range(&m, 5, 77, 7..12).unwrap();
    let mut front = simulate_range(&m, 5, 77, 0..7).unwrap();
    front.append(&mut pieces);
    assert_eq!(front, full.datasets);
    assert_eq!(full.datasets[0], {
        let mut d = simulate_dataset(&m, 5, dataset_seed(77, 0)).unwrap();
        d.provenance = full.datasets[0].provenance;
        d
    });
    for d in &full.datasets {
        assert_eq!(d.len(), 5 * 4 * 2);
        assert!(d.responses.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn null_effect_sizes_center_on_zero() {
    let (n, count) = (10u32, 4000usize);
    let m = model(Strategy::Random, n, 1, [5.0; 4], 1.0, 2.0);
    let pair = LevelPair::new(0, 0, 1);
    let batch = simulate_batch(&m, n, count, 5).unwrap();
    let ds: Vec<f64> = batch
        .datasets
        .iter()
        .map(|d| cohens_d_paired(d, &m.design, &pair).unwrap())
        .collect();
    let tol = 4.0 / ((count * n as usize) as f64).sqrt();
    assert!(mean(&ds).abs() < tol, "mean d {} (tol {tol})", mean(&ds));
}

#[test]
fn frame_spread_matches_the_sampling_sd() {
    // 2x2, r = 1: a level marginal averages two cells, so the per-participant
    // difference has SD sigma and its mean over n participants sigma/sqrt(n).
    let (n, sigma) = (9u32, 2.0);
    let m = model(Strategy::LatinSquare, n, 1, [5.0, 6.0, 7.0, 9.0], sigma, 3.0);
    let frames = pairwise_frames(&m, &[LevelPair::new(0, 0, 1)], n, 1000, 0.05, 4).unwrap();
    let diffs: Vec<f64> = frames.iter().map(|f| f[0].mean_diff).collect();
    let expected = sigma / f64::from(n).sqrt();
    assert!((sd(&diffs) / expected - 1.0).abs() < 0.2, "sd {} vs {expected}", sd(&diffs));
    assert!((mean(&diffs) + 2.5).abs() < 4.0 * expected / 1000f64.sqrt());
}

#[test]
fn fatigue_under_random_order_costs_power() {
    let n = 12;
    let base = model(Strategy::Random, n, 3, [10.0, 10.0, 11.0, 11.0], 1.5, 1.0);
    let pair = LevelPair::new(0, 0, 1);
    let clean = simulated_power(&base, &pair, n, 1000, 0.05, 3).unwrap();
    let mut tired = base.clone();
    tired.confounds.fatigue_per_trial = 1.0;
    let noisy = simulated_power(&tired, &pair, n, 1000, 0.05, 3).unwrap();
    assert!(noisy.power + 3.0 * noisy.mc_stderr < clean.power, "{} vs {}", noisy.power, clean.power);

    // A position-balanced table is immune to the same fatigue in expectation.
    let mut square = tired.clone();
    square.design.strategy = Strategy::LatinSquare;
    let table = generate_trial_table(&square.design, 0);
    assert!(table.position_counts().iter().flatten().all(|&c| c == 3));
}
