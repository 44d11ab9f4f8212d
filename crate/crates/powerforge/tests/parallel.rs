mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use powerforge::parallel;
use powerforge::{Update, UpdateRequest};
use powerforge_core::confound::ConfoundId;
use powerforge_core::stats::{power_curve, AxisMode, Tier};
use powerforge_core::{Error, MeanNode};

use common::two_by_two;

fn request(datasets: usize) -> powerforge::session::CurveRequest {
    let mut s = two_by_two();
    for u in [
        Update::MoveMean { node: MeanNode::Condition(0), value: 26.0 },
        Update::Confound { confound: ConfoundId::Fatigue, value: 0.5 },
        Update::Confound { confound: ConfoundId::ParticipantVariability, value: 3.0 },
        Update::Settings { datasets: Some(datasets), alpha: None, seed: Some(5), x_range: None, frames: None },
    ] {
        s.apply(&UpdateRequest::commit(u)).unwrap();
    }
    let mut req = s.curve_request().unwrap();
    req.xs = vec![4, 8, 13];
    req
}

#[test]
fn parallel_curve_matches_sequential() {
    let req = request(230);
    let mut seen = Vec::new();
    let par = parallel::power_curve(&req, &mut |p| seen.push(*p), &|| false).unwrap();
    let mut seq_seen = Vec::new();
    let seq = power_curve(
        &req.model,
        &req.pair,
        req.axis,
        &req.xs,
        req.datasets,
        req.alpha,
        req.seed,
        &mut |p| seq_seen.push(*p),
        &|| false,
    )
    .unwrap();
    assert_eq!(par, seq);
    assert_eq!(seen, seq_seen);
    assert_eq!(seen.len(), 6);
    assert!(seen[..3].iter().all(|p| p.tier == Tier::Analytic));
    assert!(seen[3..].iter().all(|p| p.tier == Tier::Simulated));
}

#[test]
fn replications_axis() {
    let mut req = request(150);
    req.axis = AxisMode::Replications;
    req.xs = vec![1, 2, 3];
    let curve = parallel::power_curve(&req, &mut |_| {}, &|| false).unwrap();
    assert_eq!(curve.fixed, req.model.design.participants);
    let powers: Vec<f64> = parallel::analytic_curve(&req).unwrap().points.iter().map(|p| p.power).collect();
    assert!(powers.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn cancellation_stops_delivery() {
    let req = request(400);
    let polls = AtomicUsize::new(0);
    let mut delivered = 0;
    let cancelled = || polls.fetch_add(1, Ordering::SeqCst) > 500;
    let err = parallel::power_curve(&req, &mut |_| delivered += 1, &cancelled).unwrap_err();
    assert_eq!(err, Error::CancelledByNewerRequest);
    assert!(delivered < 6);
}
