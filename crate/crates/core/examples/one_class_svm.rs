//! Fit a one-class SVM on a 2-D blob, pick (nu, gamma) by grid search and
//! inspect which points it accepts.

use campaigner::occ::{fit, grid_search, KernelChoice, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> campaigner::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let target: Vec<Vec<f64>> = (0..80)
        .map(|_| {
            let r = rng.gen_range(0.0..1.0f64).sqrt();
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            vec![2.0 + r * t.cos(), -1.0 + 0.5 * r * t.sin()]
        })
        .collect();

    for kernel in [KernelChoice::Rbf, KernelChoice::Linear] {
        // the linear boundary separates the data from the origin, so
        // centring the blob on itself would leave nothing to separate
        let cfg = TrainConfig {
            kernel,
            standardize: kernel == KernelChoice::Rbf,
            ..TrainConfig::default()
        };
        let chosen = grid_search(&target, &cfg, cfg.folds)?;
        let model = fit(&target, &chosen)?;
        let outside = target.iter().filter(|x| !model.accepts(x).unwrap_or(false)).count();
        println!(
            "{kernel:?}: nu {} gamma {:?}, {} support vectors, {outside}/{} training points outside",
            model.nu,
            model.gamma,
            model.support.len(),
            target.len()
        );
        for probe in [[2.0, -1.0], [2.8, -1.0], [4.0, 0.0], [-3.0, 5.0]] {
            println!("  f({probe:?}) = {:+.4}", model.score(&probe)?);
        }
    }

    // the nu-property: at most a nu share of training points fall outside
    let cfg = TrainConfig::default();
    for &nu in &cfg.nu_grid {
        let model = fit(&target, &cfg.at(nu, 0.5))?;
        let outside = target.iter().filter(|x| model.score(x).map_or(true, |s| s < 0.0)).count();
        println!("nu {nu:.2}: {:.3} outside", outside as f64 / target.len() as f64);
    }
    Ok(())
}
