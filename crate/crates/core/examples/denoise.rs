// Noise variance estimation on pure-noise views, and the denoised
// covariance of a heteroskedastic dataset.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sipca::denoise::{bema_sigma2, denoise, BemaConfig, NoiseSource};
use sipca::simulate::SimulationSetup;

pub fn run_example() -> sipca::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for sigma2 in [0.25, 1.0, 4.0] {
        let normal = Normal::new(0.0, f64::sqrt(sigma2)).unwrap();
        let x = DMatrix::from_fn(1000, 50, |_, _| normal.sample(&mut rng));
        let est = bema_sigma2(&x, &BemaConfig::default())?;
        println!("sigma^2 = {sigma2}: estimate {est:.4} (ratio {:.4})", est / sigma2);
    }

    let setup = SimulationSetup { views: 8, block_size: 20, n: 400, alpha: 15.0, seed: 3, ..Default::default() };
    let sim = setup.generate()?;
    let d = denoise(&sim.data, &setup.layout()?, &NoiseSource::default())?;
    println!("view  true     estimated");
    for (k, (t, e)) in sim.spec.noise_variances.iter().zip(&d.sigma2_hat).enumerate() {
        println!("{k:>4}  {t:<7.4}  {e:.4}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
