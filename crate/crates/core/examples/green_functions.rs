//! The two coupling kernels between element pairs: free space (between
//! any two elements) and inside a shared waveguide (same microstrip).

use dmaloc::circuit::{green_free_space, green_waveguide};
use dmaloc::geometry::{element_position, GuideCoord, PanelConfig};

fn main() -> dmaloc::Result<()> {
    let panel = PanelConfig::new(2, 16, 28e9);
    let consts = panel.constants();
    let lambda = panel.wavelength();
    let origin = element_position(&panel, 0, 0)?;
    println!("{:>6} {:>10} {:>24} {:>24}", "n", "dist/lam", "free space", "waveguide");
    for n in 1..panel.n_e {
        let p = element_position(&panel, 0, n)?;
        let g_fs = green_free_space(&origin, &p, consts.k0)?;
        let g_wg = green_waveguide(GuideCoord::of(&panel, &origin), GuideCoord::of(&panel, &p), &consts, &panel)?;
        println!(
            "{n:>6} {:>10.3} {:>11.3e}{:+11.3e}j {:>11.3e}{:+11.3e}j",
            origin.distance(&p) / lambda,
            g_fs.re,
            g_fs.im,
            g_wg.re,
            g_wg.im
        );
    }
    // across strips only free space couples
    let other = element_position(&panel, 1, 0)?;
    println!("neighbour strip: {:.3e}", green_free_space(&origin, &other, consts.k0)?);
    Ok(())
}
