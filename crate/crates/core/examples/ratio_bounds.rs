//! Exact coded/hybrid traffic ratios against their closed-form bounds.

use hcmr::analysis::{rational_to_f64, ratio_bounds};

fn main() -> hcmr::Result<()> {
    println!("K\tP\tr\tcod/hyb cross\tlower\thyb/cod intra\tupper");
    for (k, p, r) in [(9, 3, 2), (16, 4, 2), (16, 4, 3), (20, 5, 2), (25, 5, 3), (30, 6, 2)] {
        let b = ratio_bounds(k, p, r)?;
        let intra = b.exact_intra_ratio.as_ref().map_or("inf".to_string(), |v| format!("{:.3}", rational_to_f64(v)));
        println!(
            "{k}\t{p}\t{r}\t{:.3}\t\t{:.3}\t{intra}\t\t{:.1}",
            rational_to_f64(&b.exact_cross_ratio),
            b.cross_lower,
            b.intra_upper
        );
        assert!(b.cross_holds() && b.intra_holds());
    }
    Ok(())
}
