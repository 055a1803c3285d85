//! Tab-separated check reports.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Error => "ERROR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportLine {
    pub status: Status,
    pub check_id: String,
    pub witness: Option<String>,
}

impl fmt::Display for ReportLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}", self.status, self.check_id)?;
        if let Some(w) = &self.witness {
            // Keep one check per line.
            write!(f, "\t{}", w.replace(['\t', '\n'], " "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    /// Rendered as `# key value` lines before the checks.
    pub header: Vec<(String, String)>,
    pub lines: Vec<ReportLine>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_header(mut self, key: &str, value: impl ToString) -> Self {
        self.header.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, status: Status, check_id: impl Into<String>, witness: Option<String>) {
        self.lines.push(ReportLine {
            status,
            check_id: check_id.into(),
            witness,
        });
    }

    pub fn pass(&mut self, check_id: impl Into<String>, witness: impl Into<Option<String>>) {
        self.push(Status::Pass, check_id, witness.into());
    }

    pub fn fail(&mut self, check_id: impl Into<String>, witness: impl Into<String>) {
        self.push(Status::Fail, check_id, Some(witness.into()));
    }

    pub fn error(&mut self, check_id: impl Into<String>, err: impl ToString) {
        self.push(Status::Error, check_id, Some(err.to_string()));
    }

    /// PASS when `ok`, FAIL with `witness` otherwise.
    pub fn check(&mut self, check_id: impl Into<String>, ok: bool, witness: impl FnOnce() -> String) {
        if ok {
            self.pass(check_id, None);
        } else {
            self.fail(check_id, witness());
        }
    }

    pub fn extend(&mut self, other: Report) {
        self.lines.extend(other.lines);
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.status == Status::Pass)
    }

    pub fn count(&self, status: Status) -> usize {
        self.lines.iter().filter(|l| l.status == status).count()
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(!self.passed())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.header {
            writeln!(f, "# {k} {v}")?;
        }
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_and_status() {
        let mut r = Report::new().with_header("seed", 3);
        r.pass("a", None);
        r.fail("b", "x\ty");
        assert_eq!(r.to_string(), "# seed 3\nPASS\ta\nFAIL\tb\tx y\n");
        assert!(!r.passed());
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.count(Status::Pass), 1);
    }
}
