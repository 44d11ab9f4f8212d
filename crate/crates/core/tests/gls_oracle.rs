//! For a balanced within-subject design with a random participant
//! intercept, the generalized-least-squares fixed-effect contrast equals the
//! mean of per-participant paired differences, and its GLS variance equals
//! the paired-difference variance over n. Checked against a dense GLS fit.

use nalgebra::{DMatrix, DVector};

use powerforge_core::design::Direction;
use powerforge_core::simulate::simulate_dataset;
use powerforge_core::stats::paired_differences;
use powerforge_core::{
    ConfoundSpec, DependentVariableMeta, ExperimentDesign, IndependentVariable, LevelPair, PopulationModel, Strategy,
};

struct Fit {
    beta: DVector<f64>,
    cov: DMatrix<f64>,
}

/// GLS with cell-mean indicators and covariance `sd^2 I + sd_p^2 J` within
/// each participant's block.
fn gls(conditions: &[usize], responses: &[f64], participants: usize, k: usize, sd: f64, sd_p: f64) -> Fit {
    let rows = responses.len();
    let tpp = rows / participants;
    let x = DMatrix::from_fn(rows, k, |i, c| if conditions[i] == c { 1.0 } else { 0.0 });
    let y = DVector::from_column_slice(responses);
    let v = DMatrix::from_fn(rows, rows, |i, j| {
        let same = i / tpp == j / tpp;
        let mut v = if same { sd_p * sd_p } else { 0.0 };
        if i == j {
            v += sd * sd;
        }
        v
    });
    let v_inv = v.try_inverse().unwrap();
    let xtv = x.transpose() * &v_inv;
    let cov = (&xtv * &x).try_inverse().unwrap();
    let beta = &cov * (xtv * y);
    Fit { beta, cov }
}

fn design(strategy: Strategy, n: u32, r: u32, levels: &[&str]) -> ExperimentDesign {
    ExperimentDesign {
        ivs: vec![
            IndependentVariable::new("A", levels.iter().copied()),
            IndependentVariable::new("B", ["x", "y"]),
        ],
        dv: DependentVariableMeta {
            name: "Y".into(),
            unit: "u".into(),
            expected_range: (0.0, 10.0),
            direction: Direction::HigherIsBetter,
            variability: 1.0,
        },
        strategy,
        replications: r,
        participants: n,
    }
}

fn contrast(d: &ExperimentDesign, pair: &LevelPair) -> DVector<f64> {
    let k = d.condition_count();
    let per_level = (k / d.ivs[pair.iv].levels.len()) as f64;
    DVector::from_fn(k, |c, _| {
        let l = d.condition_levels(c)[pair.iv];
        if l == pair.level_a {
            1.0 / per_level
        } else if l == pair.level_b {
            -1.0 / per_level
        } else {
            0.0
        }
    })
}

#[test]
fn paired_aggregation_matches_gls() {
    let cases = [
        (Strategy::Random, 5u32, 2u32, vec!["p", "q"], 1.3, 0.7),
        (Strategy::LatinSquare, 6, 1, vec!["p", "q", "s"], 0.8, 2.5),
        (Strategy::CompleteCounterbalance, 4, 3, vec!["p", "q"], 2.0, 0.0),
    ];
    for (seed, (strategy, n, r, levels, sd, sd_p)) in cases.into_iter().enumerate() {
        let d = design(strategy, n, r, &levels);
        let k = d.condition_count();
        let means: Vec<f64> = (0..k).map(|c| 3.0 + 0.4 * c as f64).collect();
        let mut conf = ConfoundSpec::with_residual_sd(sd);
        conf.participant_sd = sd_p;
        let model = PopulationModel::new(d.clone(), means, conf);
        let data = simulate_dataset(&model, n, seed as u64 + 10).unwrap();
        let fit = gls(&data.conditions, &data.responses, n as usize, k, sd, sd_p);

        for a in 0..levels.len() {
            for b in a + 1..levels.len() {
                for pair in [LevelPair::new(0, a, b), LevelPair::new(1, 0, 1)] {
                    let c = contrast(&d, &pair);
                    let gls_est = c.dot(&fit.beta);
                    let diffs = paired_differences(&data, &d, &pair);
                    let paired = diffs.iter().sum::<f64>() / diffs.len() as f64;
                    assert!((gls_est - paired).abs() < 1e-9, "{strategy:?} {pair:?}: {gls_est} vs {paired}");

                    // Var of one participant's difference: sd^2 * sum(c_j^2 / r).
                    let var_diff = sd * sd * c.iter().map(|w| w * w).sum::<f64>() / f64::from(r);
                    let gls_var = (c.transpose() * &fit.cov * &c)[(0, 0)];
                    assert!((gls_var - var_diff / f64::from(n)).abs() < 1e-9);
                }
            }
        }
    }
}
