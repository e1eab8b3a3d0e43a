//! Many generations or validations at once.
//!
//! With the `parallel` feature (on by default) batches run on the rayon
//! thread pool; without it they run in order on the calling thread. Results
//! are identical either way since every item is a pure function of its
//! input. The `*_sequential` variants are always available.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::generator::{generate, validate, GenerateError, GeneratorConstraints, Violation};
use crate::score::Score;

fn map_items<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

pub fn generate_all(constraints: &[GeneratorConstraints]) -> Vec<Result<Score, GenerateError>> {
    map_items(constraints, generate)
}

pub fn generate_all_sequential(constraints: &[GeneratorConstraints]) -> Vec<Result<Score, GenerateError>> {
    constraints.iter().map(generate).collect()
}

pub fn validate_all(cases: &[(Score, GeneratorConstraints)]) -> Vec<Vec<Violation>> {
    map_items(cases, |(score, c)| validate(score, c))
}

pub fn validate_all_sequential(cases: &[(Score, GeneratorConstraints)]) -> Vec<Vec<Violation>> {
    cases.iter().map(|(score, c)| validate(score, c)).collect()
}

/// A constraint set whose generated score did not come out clean.
#[derive(Debug, PartialEq)]
pub struct Unsound {
    pub index: usize,
    pub error: Option<GenerateError>,
    pub violations: Vec<Violation>,
}

/// Generates a score for each constraint set and validates it against the
/// same constraints. Returns the failures (empty when all are sound).
pub fn soundness_sweep(constraints: &[GeneratorConstraints]) -> Vec<Unsound> {
    let indexed: Vec<(usize, &GeneratorConstraints)> = constraints.iter().enumerate().collect();
    map_items(&indexed, |&(index, c)| check_one(index, c)).into_iter().flatten().collect()
}

pub fn soundness_sweep_sequential(constraints: &[GeneratorConstraints]) -> Vec<Unsound> {
    constraints.iter().enumerate().filter_map(|(index, c)| check_one(index, c)).collect()
}

fn check_one(index: usize, c: &GeneratorConstraints) -> Option<Unsound> {
    match generate(c) {
        Ok(score) => {
            let violations = validate(&score, c);
            (!violations.is_empty()).then_some(Unsound { index, error: None, violations })
        }
        Err(e) => Some(Unsound { index, error: Some(e), violations: Vec::new() }),
    }
}
