//! Builds interval and disk label spaces, locates points and embeds them as
//! lifted Dirac rows.

use laplift::Triangulation;

fn main() -> laplift::Result<()> {
    let line = Triangulation::interval(-1.0, 1.0, 5)?;
    println!("interval: {} labels, {} segments, {} interior faces", line.num_labels(), line.num_simplices(), line.interior_faces().len());
    println!("dirac at 0.3 -> {:?}", line.embed_dirac(&[0.3])?);

    let disk = Triangulation::disk(2.0, &[8, 16])?;
    println!(
        "disk: {} labels, {} triangles, {} faces ({} interior), {} boundary triangles",
        disk.num_labels(),
        disk.num_simplices(),
        disk.num_faces(),
        disk.interior_faces().len(),
        disk.boundary_simplices().len()
    );
    let z = [0.4, -0.7];
    let j = disk.locate(&z)?;
    println!("{z:?} lies in triangle {j} {:?} with weights {:?}", disk.simplex(j), disk.barycentric(j, &z)?);

    // PL function f(z) = z_x on the disk: every triangle reports gradient (1, 0)
    let coeffs: Vec<f64> = (0..disk.num_labels()).map(|k| disk.label(k)[0]).collect();
    println!("gradient on triangle {j}: {:?}", disk.pl_gradient_of(j, &coeffs));

    let json = serde_json::to_string(&disk.to_json()).expect("plain data");
    let back = Triangulation::from_json(&serde_json::from_str(&json).expect("just written"))?;
    println!("json round trip keeps {} interior faces", back.interior_faces().len());
    Ok(())
}
