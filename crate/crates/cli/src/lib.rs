//! Batch front-end for `pcwk`: a JSON problem specification in, CSV reports
//! out. See `docs/spec-schema.md` for the schema.

pub mod run;
pub mod spec;

pub use run::{run, Outcome, RunError, Summary};
pub use spec::{parse_spec, parse_spec_str, ProblemSpec, SpecErrors, Task};
