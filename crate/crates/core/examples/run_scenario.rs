//! Run a scenario from TOML text and print its CSV report.
//!
//! With a path argument the file is loaded instead.

use poisson_lab::scenario::{self, RunOptions};

const DEFAULT: &str = r#"
schema_version = 1
name = "inline"
seed = 1

[[checks]]
check = "chi"
measure = { kind = "weighted_line" }
cases = [{ map = { kind = "translation", t = -1.0 }, expected = 1.0 }]

[[checks]]
check = "normalization"
ratios = [{ kind = "step", value = 2.0, window = [0.0, 1.0] }]
trials = 20000
"#;

fn main() -> poisson_lab::Result<()> {
    let s = match std::env::args().nth(1) {
        Some(p) => scenario::load(p.as_ref())?,
        None => scenario::parse(DEFAULT)?,
    };
    let o = scenario::run(&s, RunOptions::default())?;
    print!("{}", o.report.to_csv());
    println!("{} passed, {} failed", o.report.passed, o.report.failed);
    Ok(())
}
