//! Acceptance harness for the pipeline; the criteria live in `tests/acceptance.rs`.
