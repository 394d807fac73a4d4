//! Pass/fail records shared by the invariant suites.

use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// A list of named residual checks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub items: Vec<CheckItem>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `residual <= tol`. NaN residuals fail.
    pub fn at_most(&mut self, name: impl Into<String>, residual: f64, tol: f64) {
        let pass = residual <= tol;
        self.items.push(CheckItem {
            name: name.into(),
            residual,
            tol,
            pass,
        });
    }

    /// Records `value > tol` (used for rank-type checks where the value must stay away from zero).
    pub fn at_least(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        let pass = value > tol;
        self.items.push(CheckItem {
            name: name.into(),
            residual: value,
            tol,
            pass,
        });
    }

    pub fn extend(&mut self, prefix: &str, other: Report) {
        for mut it in other.items {
            it.name = format!("{prefix}{}", it.name);
            self.items.push(it);
        }
    }

    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self
            .items
            .iter()
            .map(|i| i.name.len())
            .max()
            .unwrap_or(4)
            .max(4);
        writeln!(f, "{:<w$}  {:>11}  {:>9}  result", "check", "value", "tol")?;
        for it in &self.items {
            let verdict = if it.pass { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "{:<w$}  {:>11.3e}  {:>9.1e}  {verdict}",
                it.name, it.residual, it.tol
            )?;
        }
        Ok(())
    }
}
