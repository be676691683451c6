//! `verify-theory`: canonical instances followed by seeded random sweeps.

use std::fmt::Write as _;

use bankfuse::infotheory::{
    canonical, check_dpi, conditional_mi, mutual_information, random_joint_with, verify_theorem1,
    Channel, JointDistribution, TheoremReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{write_file, CliError, Result, TheoryArgs};

/// Largest allowed `|I(y; b1 b2) - I(y; b1) - I(b2; y | b1)|`.
pub const CHAIN_TOLERANCE: f64 = 1e-10;

/// Random candidates drawn per requested theorem instance before giving up.
const MAX_ATTEMPTS_PER_INSTANCE: u64 = 100;

pub const HEADER: &str =
    "suite,instance,arities,joint_info,best_single,pairwise_margin,grouped_margin,gap,\
source_info,processed_info,chain_residual,status";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The complementarity precondition did not hold.
    Skipped,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        }
    }
}

/// One CSV row. Fields that do not apply to a suite stay `None`.
#[derive(Clone, Debug, Default)]
pub struct Row {
    pub suite: &'static str,
    pub instance: String,
    pub arities: Vec<usize>,
    pub joint_info: Option<f64>,
    pub best_single: Option<f64>,
    pub pairwise_margin: Option<f64>,
    pub grouped_margin: Option<f64>,
    pub gap: Option<f64>,
    pub source_info: Option<f64>,
    pub processed_info: Option<f64>,
    pub chain_residual: Option<f64>,
    pub status: Option<Status>,
}

impl Row {
    fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        let arities: Vec<String> = self.arities.iter().map(usize::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.suite,
            self.instance,
            arities.join("x"),
            f(self.joint_info),
            f(self.best_single),
            f(self.pairwise_margin),
            f(self.grouped_margin),
            f(self.gap),
            f(self.source_info),
            f(self.processed_info),
            f(self.chain_residual),
            self.status.map_or("", Status::as_str)
        )
    }
}

/// Pass/fail tally for one suite.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Default)]
pub struct TheoryReport {
    pub rows: Vec<Row>,
    pub canonical: Tally,
    pub theorem: Tally,
    pub dpi: Tally,
    pub chain: Tally,
    /// Smallest gap over the random theorem instances that ran.
    pub min_gap: Option<f64>,
    pub max_chain_residual: f64,
}

impl TheoryReport {
    pub fn failures(&self) -> usize {
        self.canonical.failed + self.theorem.failed + self.dpi.failed + self.chain.failed
    }

    pub fn checks(&self) -> usize {
        [&self.canonical, &self.theorem, &self.dpi, &self.chain]
            .iter()
            .map(|t| t.passed + t.failed)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for row in &self.rows {
            out.push_str(&row.to_csv());
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let line = |name: &str, t: &Tally| {
            let total = t.passed + t.failed;
            let mut s = format!("{name:<10} {}/{total} passed", t.passed);
            if t.skipped > 0 {
                let _ = write!(
                    s,
                    " ({} skipped by the complementarity precheck)",
                    t.skipped
                );
            }
            s.push('\n');
            s
        };
        let mut out = String::new();
        out += &line("canonical", &self.canonical);
        out += &line("theorem", &self.theorem);
        if let Some(g) = self.min_gap {
            let _ = writeln!(out, "           smallest gap {g:.6} bits");
        }
        out += &line("dpi", &self.dpi);
        out += &line("chain", &self.chain);
        let _ = writeln!(
            out,
            "           largest residual {:.3e}",
            self.max_chain_residual
        );
        out
    }
}

fn theorem_row(
    suite: &'static str,
    instance: String,
    dist: &JointDistribution,
    r: &TheoremReport,
) -> Row {
    Row {
        suite,
        instance,
        arities: dist.arities().to_vec(),
        joint_info: Some(r.joint_info),
        best_single: Some(r.best_single()),
        pairwise_margin: Some(r.pairwise_margin),
        grouped_margin: Some(r.grouped_margin),
        gap: Some(r.gap),
        status: Some(match r.holds {
            Some(true) => Status::Pass,
            Some(false) => Status::Fail,
            None => Status::Skipped,
        }),
        ..Row::default()
    }
}

fn count(t: &mut Tally, status: Status) {
    match status {
        Status::Pass => t.passed += 1,
        Status::Fail => t.failed += 1,
        Status::Skipped => t.skipped += 1,
    }
}

/// Canonical instances with known answers: xor and pair-copy must show a
/// gap of exactly one bit; the redundant bank must fail the precheck.
fn canonical_rows(report: &mut TheoryReport) -> bankfuse::Result<()> {
    let cases: [(&str, JointDistribution, Option<f64>); 3] = [
        ("xor", canonical::xor(), Some(1.0)),
        ("pair-copy", canonical::pair_copy(), Some(1.0)),
        ("redundant", canonical::redundant(), None),
    ];
    for (name, dist, expected_gap) in cases {
        let r = verify_theorem1(&dist)?;
        let mut row = theorem_row("canonical", name.into(), &dist, &r);
        let ok = match expected_gap {
            Some(g) => r.holds == Some(true) && (r.gap - g).abs() < 1e-12,
            None => r.holds.is_none(),
        };
        row.status = Some(if ok { Status::Pass } else { Status::Fail });
        count(&mut report.canonical, row.status.unwrap());
        report.rows.push(row);
    }
    Ok(())
}

fn draw_arities(rng: &mut ChaCha8Rng, count: usize, max: usize) -> Vec<usize> {
    (0..count).map(|_| rng.random_range(2..=max)).collect()
}

/// Each suite draws from its own stream of the seeded generator, so adding
/// instances to one suite never shifts another.
fn suite_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run_sweeps(instances: usize, seed: u64, max_arity: usize) -> bankfuse::Result<TheoryReport> {
    let mut report = TheoryReport::default();
    canonical_rows(&mut report)?;

    // Theorem: keep drawing until `instances` candidates pass the precheck.
    let mut rng = suite_rng(seed, 1);
    let mut attempt = 0u64;
    while report.theorem.passed + report.theorem.failed < instances {
        if attempt >= MAX_ATTEMPTS_PER_INSTANCE * instances as u64 {
            return Err(bankfuse::Error::Usage(format!(
                "only {} of {instances} random distributions passed the precheck",
                report.theorem.passed + report.theorem.failed
            )));
        }
        let n = rng.random_range(2..=3);
        let arities = draw_arities(&mut rng, n + 1, max_arity);
        let dist = random_joint_with(&arities, &mut rng)?;
        let r = verify_theorem1(&dist)?;
        let row = theorem_row("theorem", attempt.to_string(), &dist, &r);
        let status = row.status.unwrap();
        count(&mut report.theorem, status);
        if status != Status::Skipped {
            report.min_gap = Some(report.min_gap.map_or(r.gap, |g: f64| g.min(r.gap)));
        }
        report.rows.push(row);
        attempt += 1;
    }

    let mut rng = suite_rng(seed, 2);
    for i in 0..instances {
        let arities = draw_arities(&mut rng, 2, max_arity);
        let dist = random_joint_with(&arities, &mut rng)?;
        let out_arity = rng.random_range(2..=max_arity);
        let channel = Channel::random(arities[1], out_arity, &mut rng)?;
        let d = check_dpi(&dist, &channel)?;
        let status = if d.holds { Status::Pass } else { Status::Fail };
        count(&mut report.dpi, status);
        report.rows.push(Row {
            suite: "dpi",
            instance: i.to_string(),
            arities: vec![arities[0], arities[1], out_arity],
            source_info: Some(d.source_info),
            processed_info: Some(d.processed_info),
            status: Some(status),
            ..Row::default()
        });
    }

    let mut rng = suite_rng(seed, 3);
    for i in 0..instances {
        let arities = draw_arities(&mut rng, 3, max_arity);
        let dist = random_joint_with(&arities, &mut rng)?;
        let joint = mutual_information(&dist, &[0], &[1, 2])?;
        let first = mutual_information(&dist, &[0], &[1])?;
        let rest = conditional_mi(&dist, &[2], &[0], &[1])?;
        let residual = (joint - first - rest).abs();
        report.max_chain_residual = report.max_chain_residual.max(residual);
        let status = if residual < CHAIN_TOLERANCE {
            Status::Pass
        } else {
            Status::Fail
        };
        count(&mut report.chain, status);
        report.rows.push(Row {
            suite: "chain",
            instance: i.to_string(),
            arities,
            joint_info: Some(joint),
            chain_residual: Some(residual),
            status: Some(status),
            ..Row::default()
        });
    }
    Ok(report)
}

pub fn verify(args: &TheoryArgs) -> Result<String> {
    let report = run_sweeps(args.instances as usize, args.seed, args.max_arity as usize)?;
    write_file(&args.out, &report.to_csv())?;
    let summary = report.summary();
    match report.failures() {
        0 => Ok(summary),
        failed => Err(CliError::ChecksFailed {
            summary,
            failed,
            total: report.checks(),
        }),
    }
}
