#![allow(dead_code)]

/// Generator and payoff pairs for the cross-solver comparison.
pub const SOLVER_CATALOG: [(&str, &str); 10] = [
    ("0", "x"),
    ("0", "x*x"),
    ("y", "1"),
    ("abs(z1)", "x"),
    ("abs(z1)", "-x"),
    ("0.5*y + 2*z1", "x"),
    ("abs(z1)", "x*x"),
    ("-abs(z1)", "x"),
    ("-y", "x*x"),
    ("abs(z1) + 1", "x"),
];
