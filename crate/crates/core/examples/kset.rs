//! Compares the finite membership test of the regularizer's constraint set
//! with the randomized check of its defining inequality.

use laplift::lifting::{KSetNorm, KSetSpec};
use laplift::Triangulation;

fn main() -> laplift::Result<()> {
    let tri = Triangulation::interval(-1.0, 1.0, 3)?;
    let disk = Triangulation::disk(1.0, &[8, 16])?;
    let tent: Vec<f64> = (0..disk.num_labels()).map(|k| -0.8 * disk.label(k).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let cases: [(&str, &Triangulation, Vec<f64>); 4] = [
        ("concave tent", &tri, vec![-1.0, 0.0, -1.0]),
        ("too steep", &tri, vec![0.0, 1.5, 0.0]),
        ("valley", &tri, vec![0.0, -1.0, 0.0]),
        ("cone on disk", &disk, tent),
    ];
    for (name, mesh, f) in cases {
        for m in [1, 2] {
            let spec = KSetSpec::new(mesh, KSetNorm::EuclidNorm, m)?;
            let exact = spec.membership(&f, 1e-9);
            let sampled = spec.sampled_check(&f, 10_000, 7)?;
            println!(
                "{name:>12} m={m}: finite test {:5} (concavity {:+.2}, gradient {:.2}, {} constraints) sampled {sampled}",
                exact.member, exact.worst_concavity, exact.worst_gradient, exact.constraints
            );
        }
    }
    Ok(())
}
