//! JSON problem files.
//!
//! The document mirrors [`GridLQProblem`]: top-level `K`, `N`, `T`,
//! `subsystems` (indexed `[i][j]`) and `boundary`. Each matrix is an object
//! `{"rows": r, "cols": c, "data": [...]}` with `data` in row-major order.
//! Floats are written with round-trip precision, so `load(save(p)) == p`.

use std::fs;
use std::path::Path;

use super::GridLQProblem;
use crate::Error;

pub fn to_json(p: &GridLQProblem) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(p)?)
}

pub fn from_json(s: &str) -> Result<GridLQProblem, Error> {
    Ok(serde_json::from_str(s)?)
}

pub fn save_problem(p: &GridLQProblem, path: impl AsRef<Path>) -> Result<(), Error> {
    fs::write(path, to_json(p)?)?;
    Ok(())
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<GridLQProblem, Error> {
    from_json(&fs::read_to_string(path)?)
}
