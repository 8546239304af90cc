//! System error over a grid of emission offsets, drawn in the terminal.

use molcomm_noma::analytic::Engine;
use molcomm_noma::optimizer::{offset_grid, offset_heatmap};
use molcomm_noma::scenario::Scenario;

fn main() -> molcomm_noma::Result<()> {
    let n = 24;
    let grid = offset_grid(n, 1.0);
    let cells = offset_heatmap(&Engine::new(), &Scenario::baseline(2), &grid)?;
    let shades = [' ', '.', ':', '+', '#', '@'];
    println!("rows t_off,1, columns t_off,2; darker = higher log10 P_e,sys");
    for i in 0..n {
        let line: String = (0..n)
            .map(|j| {
                let lg = cells[i * n + j].p_e_sys.max(1e-60).log10();
                // -60 .. 0 onto the six shades.
                let idx = (((lg + 60.0) / 10.0).floor() as usize).min(shades.len() - 1);
                shades[idx]
            })
            .collect();
        println!("{:5.3} |{line}|", grid[i]);
    }
    Ok(())
}
