//! Experiment harness over `otcert-core`: configuration, trained-run
//! pipelines, the experiment suites, and CSV/SVG output.

pub mod config;
pub mod experiments;
pub mod out;
pub mod pipeline;
pub mod svg;
