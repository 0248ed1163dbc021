//! The eight acceptance criteria, one line each. Runs without the libtest
//! harness so the table is always printed.

use std::time::{Duration, Instant};

use ofbm::verify::{format_rows, run_suite, SuiteRow};

struct Criterion {
    id: u32,
    title: &'static str,
    suites: &'static [&'static str],
    budget: Duration,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "matrix functions", suites: &["matfun"], budget: Duration::from_secs(1) },
    Criterion { id: 2, title: "parameter conversion", suites: &["conversion"], budget: Duration::from_secs(5) },
    Criterion { id: 3, title: "closed-form covariance", suites: &["covariance"], budget: Duration::from_secs(10) },
    Criterion { id: 4, title: "self-similarity", suites: &["selfsim"], budget: Duration::from_secs(10) },
    Criterion { id: 5, title: "time reversibility", suites: &["reversibility"], budget: Duration::from_secs(30) },
    Criterion {
        id: 6,
        title: "time vs spectral integrals",
        suites: &["plancherel", "appendix-b"],
        budget: Duration::from_secs(60),
    },
    Criterion { id: 7, title: "dichotomy", suites: &["dichotomy"], budget: Duration::from_secs(60) },
    Criterion { id: 8, title: "Monte Carlo", suites: &["montecarlo"], budget: Duration::from_secs(300) },
];

fn main() {
    let mut all_ok = true;
    for c in CRITERIA {
        let start = Instant::now();
        let mut rows: Vec<SuiteRow> = Vec::new();
        let mut error = None;
        for s in c.suites {
            match run_suite(s, None) {
                Ok(r) => rows.extend(r),
                Err(e) => error = Some(format!("{s}: {e}")),
            }
        }
        let elapsed = start.elapsed();
        let failed: Vec<&SuiteRow> = rows.iter().filter(|r| !r.passed).collect();
        let in_budget = elapsed <= c.budget;
        let ok = error.is_none() && failed.is_empty() && !rows.is_empty() && in_budget;
        all_ok &= ok;
        println!(
            "criterion {} {:<28} {}  rows {:>3}  failed {}  {:.2}s (budget {}s)",
            c.id,
            c.title,
            if ok { "PASS" } else { "FAIL" },
            rows.len(),
            failed.len(),
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
        if let Some(e) = error {
            println!("    error: {e}");
        }
        for r in failed {
            print!("    {}", format_rows(std::slice::from_ref(r)));
        }
        if !in_budget {
            println!("    over runtime budget");
        }
    }
    if !all_ok {
        std::process::exit(1);
    }
}
