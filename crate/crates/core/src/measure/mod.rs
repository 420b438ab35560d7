//! Finite-volume measures on `Φ^{V_n}`, their projections, and consistent
//! families.

mod consistency;
mod family;
mod kernel;
mod table;
mod volume;

pub use consistency::{
    check_consistency, check_consistency_with_budget, violation_ratio, CheckMode,
    ConsistencyReport, Method, Violation, DEFAULT_CHECK_BUDGET,
};
pub use family::{FamilyKind, MeasureFamily};
pub use kernel::TransitionKernel;
pub use table::DenseTable;
pub use volume::{Form, VolumeMeasure};
