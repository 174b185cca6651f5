//! Lifespan analysis: the closed-form Zipf model and the matching statistics
//! measured on annotated traces.

mod empirical;
mod zipf;

pub use empirical::{
    collected_gp_distribution, empirical_cond_prob_gc, empirical_cond_prob_user, median, observation_stats,
    trim_censored, Bucket, FrequencyGroup, GpDistribution, ObservationReport, SHORT_LIVED_MULTIPLES, FREQUENCY_GROUPS,
    RARE_LIFESPAN_MULTIPLES, RARE_UPDATES,
};
pub use zipf::{gc_grid, traffic_table, user_grid, GcProbRow, TrafficRow, UserProbRow, ZipfModel};
