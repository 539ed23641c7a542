use std::process::ExitCode;

use confope::battery;

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for id in 1..=14 {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let o = battery::run(id);
        println!("{}", o.line());
        if !o.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
