//! Fit the factor-VAR to simulated data and compare posterior means with
//! the values that generated it.

use nalgebra::{DMatrix, DVector};
use ngsvar::gibbs::{run_chain, SamplerSettings};
use ngsvar::identification::{normalize_posterior, NormalizationMode};
use ngsvar::model::{prepare, Dataset, ModelSpec};
use ngsvar::priors::PriorHyperparams;
use ngsvar::restrict::RestrictionSet;
use ngsvar::RngStream;
use rand_distr::{Distribution, StandardNormal, StudentT};

fn main() -> ngsvar::Result<()> {
    let (n, r, p, t) = (5, 2, 1, 400);
    let dof: f64 = 5.0;
    let mut rng = RngStream::new(42, 0);

    let loadings = DMatrix::from_row_slice(
        n,
        r,
        &[0.9, 0.0, 0.7, 0.5, -0.6, 0.8, 0.4, -0.7, 0.0, 0.9],
    );
    let own = 0.4;
    let tdist = StudentT::new(dof).unwrap();
    let scale = ((dof - 2.0) / dof).sqrt();

    let mut values = DMatrix::zeros(t, n);
    for ti in 1..t {
        let f = DVector::from_fn(r, |_, _| scale * tdist.sample(&mut rng));
        for i in 0..n {
            let noise: f64 = StandardNormal.sample(&mut rng);
            values[(ti, i)] =
                own * values[(ti - 1, i)] + (loadings.row(i) * &f)[0] + 0.5 * noise;
        }
    }
    let names = (0..n).map(|i| format!("y{i}")).collect();
    let data = Dataset::new(values, names)?;
    let prepared = prepare(&data, p, false)?;

    let spec = ModelSpec {
        n,
        p,
        r,
        prior: PriorHyperparams::default(),
        restrictions: RestrictionSet::default(),
        standardize: false,
    };
    let settings = SamplerSettings {
        burn_in: 500,
        retain: 1000,
        thin: 1,
        griddy_grid: 200,
        seed: 42,
        stream: 1,
    };
    let mut posterior = run_chain(&spec, &prepared.y, &prepared.x, None, &settings)?;
    // Signed column permutations are unidentified; align all draws on a
    // template before averaging anything indexed by factor.
    normalize_posterior(&mut posterior, &NormalizationMode::Template(loadings.clone()), None)?;

    let mean_l = posterior.mean_loadings();
    println!("loadings (posterior mean | truth):");
    for i in 0..n {
        let est: Vec<String> = (0..r).map(|a| format!("{:+.2}", mean_l[(i, a)])).collect();
        let tru: Vec<String> = (0..r).map(|a| format!("{:+.2}", loadings[(i, a)])).collect();
        println!("  y{i}: {} | {}", est.join(" "), tru.join(" "));
    }
    let mean_dof = posterior.mean_dof();
    println!("tail parameters (truth {dof}): {:.2} {:.2}", mean_dof[0], mean_dof[1]);
    println!("noise variances (truth 0.25): {:.3?}", posterior.mean_sigma2().as_slice());
    let own_means: Vec<f64> = (0..n).map(|i| posterior.mean_coef()[(i, 1 + i)]).collect();
    println!("own-lag coefficients (truth {own}): {own_means:.2?}");
    Ok(())
}
