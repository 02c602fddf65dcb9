//! Closed-form traffic for the published tuples, plus the cells whose
//! printed values disagree with the formulas.

use hcmr::analysis::{compare, published};

fn main() {
    println!("{}", hcmr::analysis::CSV_HEADER);
    for tuple in published::tuples() {
        let (rows, rejected) = compare(&tuple);
        for row in rows {
            println!("{}", row.csv());
        }
        for (scheme, err) in rejected {
            println!("# {tuple} {scheme}: {err}");
        }
    }
    for cell in published::anomalies() {
        println!("# {cell}");
    }
}
