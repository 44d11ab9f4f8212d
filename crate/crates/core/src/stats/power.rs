//! Analytic and simulation-based power.
//!
//! Two tiers: the analytic tier turns the expected cell means into a paired
//! Cohen's d and evaluates the noncentral t power (fast, confound-blind);
//! the simulated tier runs paired t tests over Monte Carlo datasets and so
//! sees every confound and the trial order.

use alloc::vec::Vec;
use core::ops::Range;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use super::paired::{participant_condition_means, LevelPair, PairCells, Summary};
use super::special::{noncentral_t_cdf, t_quantile};
use crate::error::{Error, Result};
use crate::rng;
use crate::simulate::{simulate_range, PopulationModel, SimulatedDataset};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_DATASETS: usize = 1000;
/// Below this many datasets the curve keeps its analytic points.
pub const MIN_SIMULATED_DATASETS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Tails {
    #[default]
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisMode {
    Participants,
    Replications,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub x: u32,
    pub power: f64,
    pub mc_stderr: f64,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub axis: AxisMode,
    /// The quantity held fixed: replications on the participants axis,
    /// participants on the replications axis.
    pub fixed: u32,
    pub pair: LevelPair,
    pub alpha: f64,
    pub points: Vec<PowerPoint>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(alloc::format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Power of a paired t test with `n` pairs at standardized effect `d`.
pub fn noncentral_t_power(d: f64, n: u32, alpha: f64, tails: Tails) -> f64 {
    assert!(n >= 2, "paired t test needs n >= 2");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let df = f64::from(n - 1);
    let ncp = d * sqrt(f64::from(n));
    let power = match tails {
        Tails::TwoSided => {
            let crit = t_quantile(1.0 - 0.5 * alpha, df);
            (1.0 - noncentral_t_cdf(crit, df, ncp)) + noncentral_t_cdf(-crit, df, ncp)
        }
        Tails::Greater => 1.0 - noncentral_t_cdf(t_quantile(1.0 - alpha, df), df, ncp),
        Tails::Less => noncentral_t_cdf(t_quantile(alpha, df), df, ncp),
    };
    power.clamp(0.0, 1.0)
}

/// Expected paired Cohen's d of `pair` under `model`, ignoring confounds.
///
/// Each side of the contrast averages `m` cells of `r` replications, so the
/// per-participant difference has SD `sigma * sqrt(2 / (m r))`.
pub fn analytic_effect_size(model: &PopulationModel, pair: &LevelPair) -> Result<f64> {
    pair.validate(&model.design)?;
    model.validate()?;
    let cells = PairCells::new(&model.design, pair);
    let diff = cells.difference(&model.cell_means);
    let per_side = (cells.a.len() as f64) * f64::from(model.design.replications);
    let sd = model.residual_sd() * sqrt(2.0 / per_side);
    Ok(diff / sd)
}

pub fn analytic_power(model: &PopulationModel, pair: &LevelPair, n: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(Error::InvalidArgument("at least 2 participants required".into()));
    }
    Ok(noncentral_t_power(analytic_effect_size(model, pair)?, n, alpha, Tails::TwoSided))
}

/// Two-sided paired t test at a fixed critical value.
#[derive(Debug, Clone)]
pub(crate) struct PairedTest {
    cells: PairCells,
    conditions: usize,
    critical: f64,
}

impl PairedTest {
    pub fn new(model: &PopulationModel, pair: &LevelPair, n: u32, alpha: f64) -> Self {
        Self {
            cells: PairCells::new(&model.design, pair),
            conditions: model.design.condition_count(),
            critical: t_quantile(1.0 - 0.5 * alpha, f64::from(n - 1)),
        }
    }

    pub fn summary(&self, dataset: &SimulatedDataset) -> Summary {
        let diffs: Vec<f64> = participant_condition_means(dataset, self.conditions)
            .chunks_exact(self.conditions)
            .map(|row| self.cells.difference(row))
            .collect();
        Summary::of(&diffs)
    }

    pub fn rejects(&self, dataset: &SimulatedDataset) -> bool {
        let s = self.summary(dataset);
        if s.is_degenerate() {
            return s.mean != 0.0;
        }
        s.t_statistic().abs() > self.critical
    }
}

/// Number of datasets in `range` of the batch rooted at `master_seed` whose
/// paired t test rejects at `alpha`. Checks `cancelled` between datasets.
pub fn count_rejections(
    model: &PopulationModel,
    pair: &LevelPair,
    n: u32,
    alpha: f64,
    master_seed: u64,
    range: Range<u64>,
    cancelled: &dyn Fn() -> bool,
) -> Result<u64> {
    check_alpha(alpha)?;
    pair.validate(&model.design)?;
    if n < 2 {
        return Err(Error::InvalidArgument("at least 2 participants required".into()));
    }
    let test = PairedTest::new(model, pair, n, alpha);
    let mut hits = 0;
    for j in range {
        if cancelled() {
            return Err(Error::CancelledByNewerRequest);
        }
        let ds = simulate_range(model, n, master_seed, j..j + 1)?;
        if test.rejects(&ds[0]) {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Builds a simulated power point from a rejection count.
pub fn simulated_point(x: u32, rejections: u64, datasets: usize) -> PowerPoint {
    let p = rejections as f64 / datasets as f64;
    PowerPoint {
        x,
        power: p,
        mc_stderr: sqrt(p * (1.0 - p) / datasets as f64),
        tier: Tier::Simulated,
    }
}

/// Fraction of `datasets` simulated experiments whose paired t test on
/// `pair` rejects at `alpha`.
pub fn simulated_power(
    model: &PopulationModel,
    pair: &LevelPair,
    n: u32,
    datasets: usize,
    alpha: f64,
    seed: u64,
) -> Result<PowerPoint> {
    if datasets < 1 {
        return Err(Error::InvalidArgument("need at least one dataset".into()));
    }
    let hits = count_rejections(model, pair, n, alpha, seed, 0..datasets as u64, &|| false)?;
    Ok(simulated_point(n, hits, datasets))
}

/// Model and participant count for curve position `x`.
pub fn curve_model(model: &PopulationModel, axis: AxisMode, x: u32) -> (PopulationModel, u32) {
    match axis {
        AxisMode::Participants => (model.with_participants(x), x),
        AxisMode::Replications => (model.with_replications(x), model.design.participants),
    }
}

/// Master seed of the simulated point at `x`.
pub fn curve_point_seed(seed: u64, x: u32) -> u64 {
    rng::split(rng::tagged(seed, rng::domain::CURVE_POINT), u64::from(x))
}

pub fn check_curve_range(axis: AxisMode, xs: &[u32]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("curve range is empty".into()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("curve range must be strictly increasing".into()));
    }
    let min = match axis {
        AxisMode::Participants => 2,
        AxisMode::Replications => 1,
    };
    if xs[0] < min {
        return Err(Error::InvalidArgument(alloc::format!("curve range must start at {min} or above")));
    }
    Ok(())
}

/// The analytic tier for every `x`.
pub fn analytic_curve_points(
    model: &PopulationModel,
    pair: &LevelPair,
    axis: AxisMode,
    xs: &[u32],
    alpha: f64,
) -> Result<Vec<PowerPoint>> {
    check_curve_range(axis, xs)?;
    xs.iter()
        .map(|&x| {
            let (m, n) = curve_model(model, axis, x);
            Ok(PowerPoint {
                x,
                power: analytic_power(&m, pair, n, alpha)?,
                mc_stderr: 0.0,
                tier: Tier::Analytic,
            })
        })
        .collect()
}

/// Power curve with progressive delivery.
///
/// Every analytic point is emitted first; then, when `datasets` reaches
/// [`MIN_SIMULATED_DATASETS`], simulated points follow in ascending `x`,
/// each superseding its analytic placeholder. `cancelled` is polled between
/// datasets; once it returns true the computation stops with
/// [`Error::CancelledByNewerRequest`] and emits nothing further.
#[allow(clippy::too_many_arguments)]
pub fn power_curve(
    model: &PopulationModel,
    pair: &LevelPair,
    axis: AxisMode,
    xs: &[u32],
    datasets: usize,
    alpha: f64,
    seed: u64,
    emit: &mut dyn FnMut(&PowerPoint),
    cancelled: &dyn Fn() -> bool,
) -> Result<PowerCurve> {
    let mut points = analytic_curve_points(model, pair, axis, xs, alpha)?;
    for p in &points {
        if cancelled() {
            return Err(Error::CancelledByNewerRequest);
        }
        emit(p);
    }
    if datasets >= MIN_SIMULATED_DATASETS {
        for (slot, &x) in points.iter_mut().zip(xs) {
            let (m, n) = curve_model(model, axis, x);
            let hits = count_rejections(&m, pair, n, alpha, curve_point_seed(seed, x), 0..datasets as u64, cancelled)?;
            *slot = simulated_point(x, hits, datasets);
            emit(slot);
        }
    }
    Ok(PowerCurve {
        axis,
        fixed: match axis {
            AxisMode::Participants => model.design.replications,
            AxisMode::Replications => model.design.participants,
        },
        pair: *pair,
        alpha,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPower {
    pub pair: LevelPair,
    pub power: f64,
}

/// Candidate with the lowest analytic power; ties go to the canonically
/// smallest pair.
pub fn min_power_pair(model: &PopulationModel, candidates: &[LevelPair], n: u32, alpha: f64) -> Result<PairPower> {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut best: Option<PairPower> = None;
    for pair in sorted {
        let power = analytic_power(model, &pair, n, alpha)?;
        if best.is_none_or(|b| power < b.power) {
            best = Some(PairPower { pair, power });
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no candidate pairs".into()))
}

/// Candidates whose analytic power is below that of `displayed`.
pub fn lower_power_pairs(
    model: &PopulationModel,
    candidates: &[LevelPair],
    displayed: &LevelPair,
    n: u32,
    alpha: f64,
) -> Result<Vec<PairPower>> {
    let reference = analytic_power(model, displayed, n, alpha)?;
    let mut out = Vec::new();
    for pair in candidates {
        let power = analytic_power(model, pair, n, alpha)?;
        if power < reference && pair != displayed {
            out.push(PairPower { pair: *pair, power });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Strategy;
    use crate::simulate::tests::model;
    use alloc::vec;

    #[test]
    fn null_effect_gives_alpha() {
        for n in [2, 5, 16, 40] {
            for alpha in [0.01, 0.05, 0.2] {
                assert!((noncentral_t_power(0.0, n, alpha, Tails::TwoSided) - alpha).abs() < 1e-9);
                assert!((noncentral_t_power(0.0, n, alpha, Tails::Greater) - alpha).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn classic_anchor_and_monotonicity() {
        let p34 = noncentral_t_power(0.5, 34, 0.05, Tails::TwoSided);
        assert!((p34 - 0.80).abs() < 0.01, "{p34}");
        assert!(noncentral_t_power(0.5, 35, 0.05, Tails::TwoSided) > p34);
        let mut last = 0.0;
        for n in 2..80 {
            let p = noncentral_t_power(0.3, n, 0.05, Tails::TwoSided);
            assert!(p >= last);
            last = p;
        }
        assert!(noncentral_t_power(0.6, 20, 0.05, Tails::TwoSided) > noncentral_t_power(0.5, 20, 0.05, Tails::TwoSided));
        assert!(noncentral_t_power(0.5, 20, 0.10, Tails::TwoSided) > noncentral_t_power(0.5, 20, 0.05, Tails::TwoSided));
        assert_eq!(
            noncentral_t_power(-0.5, 20, 0.05, Tails::TwoSided).to_bits(),
            noncentral_t_power(0.5, 20, 0.05, Tails::TwoSided).to_bits()
        );
    }

    #[test]
    fn effect_size_accounts_for_cells_and_replications() {
        // 2x2, contrast on MEDIUM: each side averages 2 cells of r reps.
        let m = model(Strategy::Random, 1, [1.0, 1.0, 0.0, 0.0], 0.0, 1.0);
        let d = analytic_effect_size(&m, &LevelPair::new(0, 0, 1)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let m3 = m.with_replications(3);
        let d3 = analytic_effect_size(&m3, &LevelPair::new(0, 0, 1)).unwrap();
        assert!((d3 - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(analytic_effect_size(&m, &LevelPair::new(1, 0, 1)).unwrap(), 0.0);
    }

    #[test]
    fn simulated_power_is_deterministic() {
        let m = model(Strategy::LatinSquare, 1, [1.0, 1.0, 0.0, 0.0], 0.5, 1.0);
        let pair = LevelPair::new(0, 0, 1);
        let a = simulated_power(&m, &pair, 8, 200, 0.05, 3).unwrap();
        let b = simulated_power(&m, &pair, 8, 200, 0.05, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tier, Tier::Simulated);
        assert!(a.mc_stderr > 0.0);
    }

    #[test]
    fn curve_emits_analytic_then_simulated() {
        let m = model(Strategy::Random, 1, [1.0, 1.0, 0.0, 0.0], 0.0, 1.0);
        let pair = LevelPair::new(0, 0, 1);
        let xs = [4, 6, 8];
        let mut seen = vec![];
        let curve = power_curve(&m, &pair, AxisMode::Participants, &xs, 100, 0.05, 1, &mut |p| seen.push(*p), &|| false).unwrap();
        assert_eq!(seen.len(), 6);
        assert!(seen[..3].iter().all(|p| p.tier == Tier::Analytic));
        assert!(seen[3..].iter().all(|p| p.tier == Tier::Simulated));
        assert_eq!(seen[3..].iter().map(|p| p.x).collect::<Vec<_>>(), xs);
        assert!(curve.points.iter().all(|p| p.tier == Tier::Simulated));

        let short = power_curve(&m, &pair, AxisMode::Participants, &xs, 10, 0.05, 1, &mut |_| {}, &|| false).unwrap();
        assert!(short.points.iter().all(|p| p.tier == Tier::Analytic));
    }

    #[test]
    fn curve_stops_when_cancelled() {
        let m = model(Strategy::Random, 1, [1.0, 1.0, 0.0, 0.0], 0.0, 1.0);
        let pair = LevelPair::new(0, 0, 1);
        let calls = core::cell::Cell::new(0);
        let cancel = || {
            calls.set(calls.get() + 1);
            calls.get() > 10
        };
        let mut emitted = 0;
        let r = power_curve(&m, &pair, AxisMode::Participants, &[4, 6], 500, 0.05, 1, &mut |_| emitted += 1, &cancel);
        assert_eq!(r, Err(Error::CancelledByNewerRequest));
        assert_eq!(emitted, 2);
    }

    #[test]
    fn curve_range_validation() {
        assert!(check_curve_range(AxisMode::Participants, &[]).is_err());
        assert!(check_curve_range(AxisMode::Participants, &[1, 2]).is_err());
        assert!(check_curve_range(AxisMode::Participants, &[3, 3]).is_err());
        assert!(check_curve_range(AxisMode::Replications, &[1, 2, 3]).is_ok());
    }

    #[test]
    fn min_power_single_candidate_and_ties() {
        let m = model(Strategy::Random, 1, [3.0, 1.0, 1.0, -1.0], 0.0, 1.0);
        let a = LevelPair::new(0, 0, 1);
        let b = LevelPair::new(1, 0, 1);
        assert_eq!(min_power_pair(&m, &[b], 10, 0.05).unwrap().pair, b);
        // Both contrasts differ by 2 with equal variance: tie -> canonical order.
        assert_eq!(min_power_pair(&m, &[b, a], 10, 0.05).unwrap().pair, a);
        assert!(min_power_pair(&m, &[], 10, 0.05).is_err());
    }
}
