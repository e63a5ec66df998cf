// Cropping from a mother matrix and the binary system file round trip.

use kaczmarz::prelude::*;

pub fn run_example() -> Result<bool> {
    let cfg = GeneratorConfig::new(400, 40, 4);
    let mother = generate_mother(&cfg)?;
    let small = crop(&mother, 100, 20, &cfg)?;
    let noisy = make_inconsistent(&small, 8)?;
    println!(
        "cropped {}x{}, normal-equation residual of x_ls = {:.1e}",
        noisy.rows(),
        noisy.cols(),
        noisy.normal_residual().unwrap_or(f64::NAN)
    );

    let path = std::env::temp_dir().join(format!("kz-example-{}.bin", std::process::id()));
    save_system(&noisy, &path)?;
    let back = load_system(&path)?;
    std::fs::remove_file(&path)?;
    let same = back == noisy;
    println!("round trip exact: {same}");
    Ok(same)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
