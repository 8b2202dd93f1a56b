//! File formats: record and dense-signal CSV, model and result JSON.

pub mod csv;
pub mod json;
