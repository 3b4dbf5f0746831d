//! Runs an experiment from an inline TOML config and prints its summary
//! table as CSV.

use std::path::Path;

use lipdf::harness::{run, ExperimentConfig};

const CONFIG: &str = r#"
version = 1
experiment = "bench1d"
filter = "lipdf-batch"
steps = 500
trials = 3
sweep = "particles=50:200:50"
"#;

fn main() -> lipdf::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG, Path::new("inline.toml"))?;
    cfg.validate()?;
    let report = run(&cfg)?;
    for line in &report.summary {
        println!("{line}");
    }
    print!("{}", report.table("summary").unwrap().to_csv_string());
    Ok(())
}
