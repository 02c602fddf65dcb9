//! Drives the experiment runner from a config string, as the CLI does.

use hcmr::experiment::{run, ExperimentConfig};

fn main() -> hcmr::Result<()> {
    for text in [
        "mode=costs\ntuples=9,3,18,72,2;16,4,16,240,2\n",
        "mode=shuffle-verify\ntuples=8,4,8,168,2\nwidths=1,8\n",
        "mode=locality\ntuples=8,2,2,160;9,3,2,144\ntrials=3\nbudget=2\nformat=table\n",
    ] {
        let config = ExperimentConfig::from_text(text)?;
        let outcome = run(&config)?;
        print!("{}", outcome.text);
        println!("exit status {}\n", outcome.exit_code());
    }
    Ok(())
}
