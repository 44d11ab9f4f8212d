//! Effect sizes, power and pairwise intervals.

pub mod paired;
pub mod pairwise;
pub mod power;
pub mod special;

pub use paired::{all_pairs, cohens_d_paired, paired_differences, participant_condition_means, LevelPair, Summary};
pub use pairwise::{expected_confound_shift, pairwise_frames, PairwiseFrame};
pub use power::{
    analytic_effect_size, analytic_power, count_rejections, min_power_pair, noncentral_t_power, power_curve,
    simulated_power, AxisMode, PairPower, PowerCurve, PowerPoint, Tails, Tier,
};
