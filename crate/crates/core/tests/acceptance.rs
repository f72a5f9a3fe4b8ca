//! Acceptance criteria on seeded desk-scale corpora. Prints one line per
//! criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use noncollapse::checks::{self, Check, CriterionReport, DEFAULT_SEED};

fn main() -> ExitCode {
    let seed = DEFAULT_SEED;
    let mut reports: Vec<CriterionReport> = Vec::new();
    let mut run = |f: &dyn Fn() -> noncollapse::Result<Vec<CriterionReport>>| match f() {
        Ok(r) => reports.extend(r),
        Err(e) => {
            println!("[FAIL] error: {e}");
            reports.push(CriterionReport {
                id: 0,
                name: format!("error: {e}"),
                checks: vec![Check::holds("ran", false)],
                info: vec![],
            });
        }
    };

    run(&|| {
        let start = Instant::now();
        let mut r = checks::oracle_core(seed, 50, 100_000)?;
        r.checks.push(Check::at_most(
            "runtime s",
            start.elapsed().as_secs_f64(),
            60.0,
        ));
        Ok(vec![r])
    });
    run(&|| Ok(vec![checks::non_collapse_signature()?]));
    run(&|| checks::hybrid_identities(seed, 20));
    run(&|| Ok(vec![checks::col_oracle_equivalence(seed, 10)?]));
    run(&|| Ok(vec![checks::mac_reduction(seed, 10_000)?]));
    run(&|| Ok(vec![checks::commitment_reduction(seed, 10_000)?]));
    run(&|| Ok(vec![checks::adaptive_replacement(seed, 5)?]));
    run(&|| Ok(vec![checks::preimage_pairs(seed, 10, 100_000)?]));

    let mut failed = 0;
    for r in &reports {
        println!("{}", r.summary());
        for (k, v) in &r.info {
            println!("       {k} = {v:.6}");
        }
        failed += usize::from(!r.pass());
    }
    println!(
        "acceptance: {} of {} criteria passed",
        reports.len() - failed,
        reports.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
