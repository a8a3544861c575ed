//! Why higher moments identify the rotation: mixing two independent
//! heavy-tailed shocks leaves their levels uncorrelated but makes their
//! squares co-move; Gaussian shocks stay indistinguishable.

use ngsvar::identification::{rotation_demo, RotationSource};
use ngsvar::RngStream;

fn main() -> ngsvar::Result<()> {
    let angle = std::f64::consts::PI / 5.0;
    let t = 1_000_000;

    println!("rotation by pi/5 on T = {t} independent pairs");
    println!("{:<14} {:>12} {:>12} {:>12} {:>12}", "source", "corr", "corr sq", "corr rot", "corr sq rot");
    for (name, source, stream) in [
        ("gaussian", RotationSource::Gaussian, 0),
        ("student-t(4)", RotationSource::StudentT(4.0), 1),
    ] {
        let mut rng = RngStream::new(2, stream);
        let demo = rotation_demo(source, angle, t, &mut rng)?;
        println!(
            "{name:<14} {:>12.5} {:>12.5} {:>12.5} {:>12.5}",
            demo.corr_before, demo.corr_sq_before, demo.corr_after, demo.corr_sq_after
        );
    }
    println!();
    println!("the rotated t pair stays uncorrelated in levels, but the squares");
    println!("give the mixing away; for the Gaussian pair every rotation looks");
    println!("the same, which is exactly the identification failure.");
    Ok(())
}
