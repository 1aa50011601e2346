use std::process::ExitCode;
use std::time::Instant;

use mrd::acceptance::run;

/// Runs the criteria named on the command line, or all of them, printing one
/// line per criterion. Flags passed by `cargo test` are ignored.
fn main() -> ExitCode {
    let mut ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if ids.is_empty() {
        ids = (1..=9).collect();
    }
    let mut failed = 0;
    for id in ids {
        let t = Instant::now();
        let o = run(id);
        println!("{} [{:.1}s]", o.summary(), t.elapsed().as_secs_f64());
        for l in o.failures() {
            println!("  {l}");
        }
        if !o.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
