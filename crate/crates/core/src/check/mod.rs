//! The model checks: the surprisal-based averaged p-value with its
//! dispersion, a sequential variant over growing prefixes, the Ljung-Box
//! whiteness test, and a residual z-test built on one smoothed state draw.

mod itmc;
mod ljung_box;
mod smw;

pub use itmc::{itmc_cumulative, itmc_run, two_sided_pvalue, ItmcResult, MIN_REPLICATES};
pub use ljung_box::{lag_rule, ljung_box, ljung_box_for_ar, LagRule, LjungBoxResult};
pub use smw::{smw_check, z_test_zero_mean, SmwResult, SMW_SWEEPS};
