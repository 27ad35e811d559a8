//! Named pass/fail rows shared by reports and verification suites.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Above,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Above => value > threshold,
        };
        Self {
            name: name.into(),
            value,
            relation,
            threshold,
            pass,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::AtMost, threshold)
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::AtLeast, threshold)
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Relation::Above, threshold)
    }
}

impl fmt::Display for Check {
    /// `PASS name value <= threshold`, values in 17-digit scientific form so
    /// that reports are bit-stable.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.16e} {} {:.16e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.relation.symbol(),
            self.threshold
        )
    }
}

/// True when every check passed.
pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::above("b", 0.0, 0.0).pass);
        assert!(Check::at_least("c", 2.0, 1.0).pass);
        assert!(!Check::at_most("nan", f64::NAN, 1.0).pass);
        let line = Check::at_most("x", 0.5, 1.0).to_string();
        assert!(
            line.starts_with("PASS x 5.0000000000000000e-1 <= "),
            "{line}"
        );
    }
}
