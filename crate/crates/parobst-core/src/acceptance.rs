//! Built-in acceptance suite (placeholder; filled in after the modules).

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub number: usize,
    pub name: &'static str,
    pub pass: bool,
    pub details: Vec<String>,
}

pub fn run_all() -> Vec<CriterionResult> {
    Vec::new()
}
