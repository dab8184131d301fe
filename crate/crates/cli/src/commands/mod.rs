pub mod analyze;
pub mod compare;
pub mod decode;
pub mod map;
pub mod prefill;

pub use analyze::run_analyze;
pub use compare::{quartile_counts, run_compare, CompareRow};
pub use decode::{run_decode, simulate, RunOutcome};
pub use map::run_map;
pub use prefill::{run_prefill, PrefillInput};
