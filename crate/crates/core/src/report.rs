//! Residual reports shared by every checker.

use std::fmt;

use serde::Serialize;

/// One nonzero residual: which law, where, and the offending value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Finding {
    pub law: String,
    pub location: String,
    pub residual: String,
}

/// Outcome of a checker. Failures are kept sorted so output is deterministic.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub name: String,
    pub checked: usize,
    pub failures: Vec<Finding>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(name: impl Into<String>) -> Report {
        Report { name: name.into(), ..Default::default() }
    }

    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn fail(&mut self, law: impl Into<String>, location: impl Into<String>, residual: impl Into<String>) {
        self.failures.push(Finding { law: law.into(), location: location.into(), residual: residual.into() });
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn merge(&mut self, other: Report) {
        self.checked += other.checked;
        self.failures.extend(other.failures);
        self.notes.extend(other.notes);
    }

    pub fn finish(mut self) -> Report {
        self.failures.sort();
        self.failures.dedup();
        self
    }

    /// Failures grouped by law, for compact summaries.
    pub fn counts_by_law(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for f in &self.failures {
            match out.iter_mut().find(|(l, _)| *l == f.law) {
                Some((_, c)) => *c += 1,
                None => out.push((f.law.clone(), 1)),
            }
        }
        out.sort();
        out
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.is_clean() { "ok" } else { "FAIL" };
        writeln!(f, "{}: {} ({} checked, {} nonzero residuals)", self.name, status, self.checked, self.failures.len())?;
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        for x in self.failures.iter().take(50) {
            writeln!(f, "  [{}] {} => {}", x.law, x.location, x.residual)?;
        }
        if self.failures.len() > 50 {
            writeln!(f, "  ... {} more", self.failures.len() - 50)?;
        }
        Ok(())
    }
}
