use std::time::Instant;

use gfnoma_core::checks::{chain_oracle, gamp_lmmse, invariant_sweep, unit_vectors, Perturbation};

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SelftestOptions {
    /// Negative control: shifts the coefficient of the surrogate digamma
    /// used by the unit vectors.
    pub perturb_psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckStatus {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckStatus>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("[{}] {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: String) {
        self.checks.push(CheckStatus {
            name: name.into(),
            passed,
            detail,
        });
    }
}

pub fn selftest(opts: SelftestOptions) -> Result<SelftestReport, CliError> {
    let mut report = SelftestReport::default();

    let start = Instant::now();
    let worst = chain_oracle(1000, 1)?;
    report.push(
        "chain enumeration oracle",
        worst < 1e-10,
        format!("1000 chains, max deviation {worst:.2e} (tol 1e-10), {:.2?}", start.elapsed()),
    );

    let start = Instant::now();
    let worst = gamp_lmmse(100, 30, 20, 300, 1.0, 1)?;
    report.push(
        "GAMP fixed point vs dense LMMSE",
        worst < 1e-6,
        format!("100 instances, max relative error {worst:.2e} (tol 1e-6), {:.2?}", start.elapsed()),
    );

    let vectors = unit_vectors(Perturbation {
        psi_coefficient: opts.perturb_psi,
    })?;
    for v in vectors {
        report.push(
            format!("unit vector: {}", v.name),
            v.error() < 1e-6,
            format!("{:.9} vs {:.9}", v.computed, v.expected),
        );
    }

    let start = Instant::now();
    let inv = invariant_sweep(1000, 1)?;
    report.push(
        "randomized invariants",
        inv.violation_count == 0,
        format!(
            "{} iterations, {} violations{}, {:.2?}",
            inv.iterations,
            inv.violation_count,
            inv.violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default(),
            start.elapsed()
        ),
    );
    Ok(report)
}
