//! Deterministic machine-readable reports.
//!
//! Rendering is byte-deterministic given (config, seed, engine version):
//! records appear in config order, witnesses are truncated polynomial text,
//! and no timing or host data is included.

/// Outcome of a single verified identity or congruence.
#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub name: String,
    /// Short label of the identity family being checked.
    pub anchor: String,
    pub pass: bool,
    /// First failing monomial / residues, empty when passing.
    pub witness: String,
}

impl CheckRecord {
    pub fn pass(name: impl Into<String>, anchor: impl Into<String>) -> Self {
        CheckRecord { name: name.into(), anchor: anchor.into(), pass: true, witness: String::new() }
    }

    pub fn fail(
        name: impl Into<String>,
        anchor: impl Into<String>,
        witness: impl Into<String>,
    ) -> Self {
        CheckRecord { name: name.into(), anchor: anchor.into(), pass: false, witness: witness.into() }
    }

    pub fn from_bool(
        name: impl Into<String>,
        anchor: impl Into<String>,
        ok: bool,
        witness: impl Into<String>,
    ) -> Self {
        if ok {
            Self::pass(name, anchor)
        } else {
            Self::fail(name, anchor, witness)
        }
    }
}

/// Report for one job of a config file.
#[derive(Debug, Clone)]
pub struct JobReport {
    pub job: String,
    pub command: String,
    pub echo: Vec<(String, String)>,
    pub records: Vec<CheckRecord>,
    /// Extra computed values worth echoing (deterministic).
    pub values: Vec<(String, String)>,
    pub error: Option<String>,
}

impl JobReport {
    pub fn new(job: impl Into<String>, command: impl Into<String>) -> Self {
        JobReport {
            job: job.into(),
            command: command.into(),
            echo: vec![],
            records: vec![],
            values: vec![],
            error: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.error.is_none() && self.records.iter().all(|r| r.pass)
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub engine: String,
    pub seed: u64,
    pub jobs: Vec<JobReport>,
}

impl Report {
    pub fn new(seed: u64) -> Self {
        Report { engine: crate::ENGINE_VERSION.to_string(), seed, jobs: vec![] }
    }

    pub fn all_pass(&self) -> bool {
        self.jobs.iter().all(|j| j.all_pass())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("engine = \"{}\"\n", self.engine));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!(
            "status = \"{}\"\n",
            if self.all_pass() { "pass" } else { "fail" }
        ));
        for j in &self.jobs {
            out.push_str(&format!("\n[job.{}]\n", j.job));
            out.push_str(&format!("command = \"{}\"\n", j.command));
            for (k, v) in &j.echo {
                out.push_str(&format!("{} = \"{}\"\n", k, v));
            }
            if let Some(e) = &j.error {
                out.push_str(&format!("error = \"{}\"\n", e));
            }
            for (k, v) in &j.values {
                out.push_str(&format!("value.{} = \"{}\"\n", k, v));
            }
            for r in &j.records {
                out.push_str(&format!(
                    "check = {{ name = \"{}\", anchor = \"{}\", status = \"{}\"{} }}\n",
                    r.name,
                    r.anchor,
                    if r.pass { "pass" } else { "fail" },
                    if r.witness.is_empty() {
                        String::new()
                    } else {
                        format!(", witness = \"{}\"", r.witness)
                    }
                ));
            }
            out.push_str(&format!(
                "job_status = \"{}\"\n",
                if j.all_pass() { "pass" } else { "fail" }
            ));
        }
        out
    }
}
