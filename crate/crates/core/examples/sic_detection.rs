//! Successive interference cancellation two ways: a threshold tree and the
//! classic subtract-then-compare receiver, on a handful of sample pairs.

use molcomm_noma::gains::GainMatrix;
use molcomm_noma::ma_schemes::{sic_detect, subtraction_sic_detect, tree_from_subtraction};
use molcomm_noma::scenario::Scenario;

fn main() -> molcomm_noma::Result<()> {
    let s = Scenario::baseline(2).with_isi_length(0).with_emitted(vec![1e6, 5e5]);
    let g = GainMatrix::build(&s)?;
    let means: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| g.get(i, j, 0)).collect()).collect();
    let base = [308, 154];
    let tree = tree_from_subtraction(&base, &means)?;
    println!("base thresholds {base:?} -> tree levels {:?}", tree.levels());

    for x in [[20u64, 10], [320, 200], [320, 500], [900, 300], [900, 700]] {
        let a = sic_detect(&x, &tree)?;
        let b = subtraction_sic_detect(&x, &base, &means)?;
        println!("samples {x:?}: tree {a:?}, subtraction {b:?}");
    }
    Ok(())
}
