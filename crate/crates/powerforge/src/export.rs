//! CSV exports. Floats are written in shortest round-trip form, so equal
//! inputs give byte-identical files.

use std::io::Write;

use powerforge_core::stats::power::{PowerCurve, Tier};
use powerforge_core::{ExperimentDesign, PairwiseFrame, SimulatedDataset, TrialTable};

use crate::error::Result;

fn level_names<'a>(design: &'a ExperimentDesign, condition: usize) -> impl Iterator<Item = &'a str> + 'a {
    design
        .condition_levels(condition)
        .into_iter()
        .zip(&design.ivs)
        .map(|(l, iv)| iv.levels[l].as_str())
}

fn header<'a>(design: &'a ExperimentDesign, tail: &'a [&'a str]) -> Vec<&'a str> {
    let mut cols = vec!["participant", "trial_index"];
    cols.extend(design.ivs.iter().map(|iv| iv.name.as_str()));
    cols.extend_from_slice(tail);
    cols
}

/// `participant, trial_index, <one column per IV>`.
pub fn write_trial_table<W: Write>(out: W, design: &ExperimentDesign, table: &TrialTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(design, &[]))?;
    for trial in table.trials() {
        let mut rec = vec![trial.participant.to_string(), trial.index.to_string()];
        rec.extend(level_names(design, trial.condition).map(str::to_owned));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `participant, trial_index, <one column per IV>, response`.
pub fn write_dataset<W: Write>(out: W, design: &ExperimentDesign, dataset: &SimulatedDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(design, &["response"]))?;
    for row in dataset.rows() {
        let mut rec = vec![row.participant.to_string(), row.trial_index.to_string()];
        rec.extend(level_names(design, row.condition).map(str::to_owned));
        rec.push(row.response.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn tier_name(tier: Tier) -> &'static str {
    match tier {
        Tier::Analytic => "analytic",
        Tier::Simulated => "simulated",
    }
}

/// `x, power, mc_stderr, tier`.
pub fn write_power_curve<W: Write>(out: W, curve: &PowerCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "power", "mc_stderr", "tier"])?;
    for p in &curve.points {
        w.write_record([
            p.x.to_string(),
            p.power.to_string(),
            p.mc_stderr.to_string(),
            tier_name(p.tier).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `frame, pair, mean_diff, ci_lo, ci_hi, cohens_d`, one row per frame and pair.
pub fn write_frames<W: Write>(out: W, design: &ExperimentDesign, frames: &[Vec<PairwiseFrame>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "pair", "mean_diff", "ci_lo", "ci_hi", "cohens_d"])?;
    for f in frames.iter().flatten() {
        w.write_record([
            f.frame.to_string(),
            f.pair.label(design),
            f.mean_diff.to_string(),
            f.ci_lo.to_string(),
            f.ci_hi.to_string(),
            f.cohens_d.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
