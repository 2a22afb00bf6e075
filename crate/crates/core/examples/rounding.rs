//! Rounds hand-made lifted rows by mean, thresholding and mode extraction.

use laplift::lifting::LiftedField;
use laplift::rounding::{extract_modes, round_mean, round_threshold};
use laplift::Triangulation;

fn main() -> laplift::Result<()> {
    let tri = Triangulation::interval(-1.0, 1.0, 5)?;
    let rows: [[f64; 5]; 3] = [
        [0.0, 0.0, 0.6, 0.4, 0.0],  // sublabel Dirac at 0.2
        [0.5, 0.0, 0.0, 0.0, 0.5],  // even split between the ends
        [0.3, 0.2, 0.0, 0.25, 0.25], // two clusters
    ];
    let u = LiftedField::new(3, 5, rows.iter().flatten().copied().collect())?;
    let mean = round_mean(&tri, &u)?;
    let modes = extract_modes(&tri, &u, 0.05, 4)?;
    for (i, row) in rows.iter().enumerate() {
        let thresholds: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&s| round_threshold(&tri, &u, s).map(|r| r.values[i]))
            .collect::<laplift::Result<_>>()?;
        let m: Vec<String> = modes[i].iter().map(|m| format!("{:+.2} (weight {:.2})", m.position[0], m.weight)).collect();
        println!("{row:?}\n  mean {:+.3}, thresholds at 0.25/0.5/0.75 {thresholds:?}\n  modes {}", mean.values[i], m.join(", "));
    }
    Ok(())
}
