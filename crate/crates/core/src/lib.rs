//! Column-generation planning and plan-guided online bin packing.
//!
//! Items arrive one at a time and must be placed irrevocably into bins of a
//! fixed capacity. The planning policies periodically forecast the remaining
//! demand per item type, solve the pattern LP by column generation, round it
//! to an integer plan, and then steer arrivals into the planned bin patterns,
//! falling back to Best-Fit when the plan cannot absorb an item.

pub mod analytics;
pub mod bounds;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod generator;
pub mod lp;
pub mod model;
pub mod planner;
pub mod policy;
pub mod pricing;

pub use error::{Error, Result};
pub use model::{Instance, PackingSolution, Pattern, Plan};
pub use planner::{generate_plan, solve_offline, PlannerConfig};
pub use policy::{run_policy, PolicyKind, PolicyParams};
