//! Locality-aware Map task assignment for `r = 2` hybrid jobs.
//!
//! The program maximizes `Σ X(i,j,k)·C(i,j,k)` subject to four constraints
//! on `X` and `Y`. Its feasible set is exactly the set of hybrid assignments:
//! `Y` must be a disjoint union of cliques with one server per rack, i.e. a
//! layer grouping, and `X` places `M` subfiles on every cross-rack pair of a
//! layer.

mod model;
mod solve;
mod transport;

pub use model::{
    check_constraints, objective, xy_from_assignment, Constraint, ConstraintReport, ConstraintResult, LocalityCosts,
    PairIndicator, ServerGraph,
};
pub use solve::{
    all_groupings, brute_force_oracle, oracle_candidates, random_assignment, solve_random, solve_structured, Budget,
    LocalityProblem, Method, SolverResult, ORACLE_LIMIT,
};

use crate::assignment::HybridAssignment;

/// Whether the `(X, Y)` induced by `assignment` satisfies all constraints.
pub fn is_feasible(assignment: &HybridAssignment) -> bool {
    match xy_from_assignment(assignment) {
        Ok((x, y)) => check_constraints(&x, &y, assignment.as_map().topology(), assignment.per_subset())
            .map(|r| r.passed())
            .unwrap_or(false),
        Err(_) => false,
    }
}
