//! Multi-threaded drivers over the core's seed-split batch interface.
//!
//! Dataset `j` always comes from the same derived seed, so splitting the
//! index range across threads changes nothing but the wall-clock time.

use rayon::prelude::*;

use powerforge_core::stats::power::{
    analytic_curve_points, count_rejections, curve_model, curve_point_seed, simulated_point, MIN_SIMULATED_DATASETS,
};
use powerforge_core::stats::{AxisMode, PowerCurve, PowerPoint};
use powerforge_core::{Error, LevelPair, PopulationModel};

use crate::session::CurveRequest;

/// Datasets per work item.
const CHUNK: u64 = 50;

/// Rejections among datasets `0..datasets`, counted in parallel.
pub fn parallel_rejections(
    model: &PopulationModel,
    pair: &LevelPair,
    n: u32,
    alpha: f64,
    master_seed: u64,
    datasets: u64,
    cancelled: &(dyn Fn() -> bool + Sync),
) -> powerforge_core::Result<u64> {
    let chunks = datasets.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(datasets);
            count_rejections(model, pair, n, alpha, master_seed, range, cancelled)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Same contract and results as the core `power_curve`, with each simulated
/// point's datasets spread over the thread pool. Points are still delivered
/// in ascending `x`.
pub fn power_curve(
    req: &CurveRequest,
    emit: &mut dyn FnMut(&PowerPoint),
    cancelled: &(dyn Fn() -> bool + Sync),
) -> powerforge_core::Result<PowerCurve> {
    let mut points = analytic_curve_points(&req.model, &req.pair, req.axis, &req.xs, req.alpha)?;
    for p in &points {
        if cancelled() {
            return Err(Error::CancelledByNewerRequest);
        }
        emit(p);
    }
    if req.datasets >= MIN_SIMULATED_DATASETS {
        for (slot, &x) in points.iter_mut().zip(&req.xs) {
            let (m, n) = curve_model(&req.model, req.axis, x);
            let seed = curve_point_seed(req.seed, x);
            let hits = parallel_rejections(&m, &req.pair, n, req.alpha, seed, req.datasets as u64, cancelled)?;
            if cancelled() {
                return Err(Error::CancelledByNewerRequest);
            }
            *slot = simulated_point(x, hits, req.datasets);
            emit(slot);
        }
    }
    Ok(PowerCurve {
        axis: req.axis,
        fixed: match req.axis {
            AxisMode::Participants => req.model.design.replications,
            AxisMode::Replications => req.model.design.participants,
        },
        pair: req.pair,
        alpha: req.alpha,
        points,
    })
}

/// Analytic tier only.
pub fn analytic_curve(req: &CurveRequest) -> powerforge_core::Result<PowerCurve> {
    let mut fast = req.clone();
    fast.datasets = 0;
    power_curve(&fast, &mut |_| {}, &|| false)
}
