//! Acceptance checks for the workspace. Everything lives in
//! `tests/acceptance.rs`, which drives the `locobs` binary and the library.
