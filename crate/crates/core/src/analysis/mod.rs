//! EV behavior analytics, grid-savings estimation and the high-potential
//! synthetic household.

mod behavior;
mod cluster;
mod savings;
mod synth;

pub use behavior::{
    classify_optimizable, filter_transactions, hour_of_day, median, FilterStats, Optimizability,
    SurplusWindow, UserChargingProfile, MAX_DURATION_H, MIN_DURATION_H,
};
pub use cluster::{
    best_k, elbow_sweep, kmeans, mean_silhouette, silhouette_samples, standardize,
    write_cluster_report, ClusterResult, ElbowPoint, CLUSTER_HEADER,
};
pub use savings::{
    annual_kwh, annualize_savings, flows_from_records, flows_from_trace, grid_savings,
    household_monthly, monthly_report, purchase_shift_value, write_monthly_report, HourFlows,
    MonthlySavings, TransactionSavings, EMISSION_FACTOR_KG_PER_KWH,
};
pub use synth::{synthesize, PV_SCALE, SHIFTED_START_HOUR, SYNTH_BESS_KW, SYNTH_BESS_KWH};
