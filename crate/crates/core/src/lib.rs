//! Direct simplified symbolic analysis of linear small-signal circuits.
//!
//! The pipeline parses a netlist, characterizes the exact transfer function
//! numerically over Monte Carlo parameter samples, and evolves a compact
//! sum-of-products rational that tracks it within dc-gain and pole/zero
//! tolerances.

pub mod fitness;
pub mod ga;
pub mod netlist;
pub mod numeric;
pub mod oracle;
pub mod report;
pub mod sampling;
pub mod symbolic;

pub use fitness::{EvaluationResult, FitnessConfig, FitnessContext};
pub use ga::{GaConfig, GaOutcome, Population};
pub use netlist::{parse_netlist, CircuitModel, NetlistError};
pub use numeric::NumericRational;
pub use report::TestMetrics;
pub use sampling::{DataPoint, Dataset, FrequencyGrid};
pub use symbolic::{Chromosome, Layout, SymbolicRational};
