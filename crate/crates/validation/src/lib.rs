//! Acceptance suite for `gpdps`; the checks live in `tests/acceptance.rs`.
