#![allow(dead_code)]

use powerforge::Session;
use powerforge_core::{DependentVariableMeta, Direction, IndependentVariable};

pub fn reading_time() -> DependentVariableMeta {
    DependentVariableMeta {
        name: "READINGTIME".into(),
        unit: "minutes".into(),
        expected_range: (0.0, 60.0),
        direction: Direction::LowerIsBetter,
        variability: 5.0,
    }
}

/// MEDIUM {PAPER, SCREEN} x LAYOUT {ONE, TWO}.
pub fn two_by_two() -> Session {
    Session::create(
        reading_time(),
        vec![
            IndependentVariable::new("MEDIUM", ["PAPER", "SCREEN"]),
            IndependentVariable::new("LAYOUT", ["ONE", "TWO"]),
        ],
    )
    .unwrap()
}
