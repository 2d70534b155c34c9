//! Statistical integration tests: distributional checks of the simulator,
//! agreement of the two covariance estimators, plug-in standard errors at
//! data scale, test calibration, and the full pipeline on synthetic data.

use bnsvol::{
    acf, analyze, ljung_box, mc_study, moment_stats, sandwich_empirical, simulate_gamma_ou,
    theoretical_moments, upsilon_mc, AnalysisOptions, GridConstants, McStudyConfig, ModelParams,
    RngStream,
};
use rand::SeedableRng;
use rand_distr::Distribution;

const DELTA: f64 = 1.0 / 250.0;

fn reference() -> ModelParams {
    ModelParams::new(6.17, 1.42, 177.95, 0.435, -0.015, 0.087, -0.00056).unwrap()
}

#[test]
fn simulated_moments_match_stationary_targets() {
    let p = reference();
    let n = 100_000;
    let s = simulate_gamma_ou(&p, n, DELTA, &RngStream::new(4242, 0), false).unwrap();
    let grid = GridConstants::new(p.lambda, DELTA).unwrap();
    let g = grid.gamma_grid;
    let nf = n as f64;

    // volume variance against eta, with an AR(1) long-run factor on the
    // fourth-moment error of the variance estimator
    let mean_tau = s.tau.iter().sum::<f64>() / s.tau.len() as f64;
    let var_tau = s
        .tau
        .iter()
        .map(|t| (t - mean_tau) * (t - mean_tau))
        .sum::<f64>()
        / s.tau.len() as f64;
    let eta = p.eta();
    // Gamma central fourth moment: 3 eta^2 (1 + 2/nu)
    let m4 = 3.0 * eta * eta * (1.0 + 2.0 / p.nu);
    let se_var = ((m4 - eta * eta) * (1.0 + g * g) / (1.0 - g * g) / nf).sqrt();
    assert!(
        (var_tau - eta).abs() < 4.0 * se_var,
        "volume variance {var_tau} vs {eta} (se {se_var})"
    );

    // lag-1 autocorrelation against gamma_grid
    let a = acf(&s.tau, 1).unwrap();
    let se_rho = ((1.0 - g * g) / nf).sqrt();
    assert!(
        (a.rho[0] - g).abs() < 4.0 * se_rho,
        "lag-1 acf {} vs {g}",
        a.rho[0]
    );

    // unconditional return mean and variance against the stationary limits
    let th = theoretical_moments(&p, &grid).unwrap();
    let mean_x = s.x.iter().sum::<f64>() / nf;
    let var_x = s.x.iter().map(|x| (x - mean_x) * (x - mean_x)).sum::<f64>() / nf;
    let want_var = th.xi[6] - th.xi[3] * th.xi[3];
    // returns are nearly uncorrelated; mild inflation for the volume memory
    let se_mean = (want_var / nf).sqrt() * 1.5;
    assert!(
        (mean_x - th.xi[3]).abs() < 4.0 * se_mean,
        "return mean {mean_x} vs {}",
        th.xi[3]
    );
    let kurt = moment_stats(&s.x).unwrap().kurtosis;
    let se_var_x = want_var * ((kurt - 1.0) / nf).sqrt() * 1.5;
    assert!(
        (var_x - want_var).abs() < 4.0 * se_var_x,
        "return variance {var_x} vs {want_var}"
    );
}

#[test]
fn empirical_and_nested_mc_covariances_agree() {
    let p = reference();
    let grid = GridConstants::new(p.lambda, DELTA).unwrap();
    let ups = upsilon_mc(&p, &grid, 1200, 1200, &RngStream::new(8, 0)).unwrap();
    let s = simulate_gamma_ou(&p, 100_000, DELTA, &RngStream::new(9, 0), false).unwrap();
    // evaluated at the true parameters
    let rep = sandwich_empirical(&s.x, &s.tau, &p, &grid).unwrap();
    for i in 0..7 {
        let emp = rep.upsilon.data[i * 7 + i];
        let mc = ups[(i, i)];
        let rel = (emp - mc).abs() / mc;
        assert!(rel < 0.15, "Upsilon[{i}][{i}]: empirical {emp} vs MC {mc}");
    }
}

#[test]
fn plug_in_standard_errors_at_data_scale() {
    // at n = 1259 the plug-in standard errors should sit near the reported
    // magnitudes for a daily equity sample: nu 0.339, alpha 0.079,
    // lambda 12.509, sigma 0.002
    let p = reference();
    let grid = GridConstants::new(p.lambda, DELTA).unwrap();
    let n = 1259;
    let s = simulate_gamma_ou(&p, n, DELTA, &RngStream::new(77, 0), false).unwrap();
    let rep = sandwich_empirical(&s.x, &s.tau, &p, &grid).unwrap();
    let se = rep.standard_errors.unwrap();
    let targets = [0.339, 0.079, 12.509, f64::NAN, f64::NAN, 0.002, f64::NAN];
    for (i, t) in targets.into_iter().enumerate() {
        if t.is_nan() {
            continue;
        }
        assert!(
            se[i] > 0.6 * t && se[i] < 1.6 * t,
            "se[{i}] = {} vs reported {t}",
            se[i]
        );
    }
    assert!(rep.cond_a.is_finite() && rep.cond_a < 1e12);
}

#[test]
fn ljung_box_p_values_are_uniform_under_the_null() {
    // KS distance of the p-value sample from uniform under iid input
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(55);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let reps = 1000;
    let n = 500;
    let mut pvals: Vec<f64> = (0..reps)
        .map(|_| {
            let z: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            ljung_box(&z, 22).unwrap().p_value
        })
        .collect();
    pvals.sort_unstable_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &p) in pvals.iter().enumerate() {
        d = d
            .max(((i + 1) as f64 / reps as f64 - p).abs())
            .max((p - i as f64 / reps as f64).abs());
    }
    assert!(d < 0.06, "KS distance from uniform {d}");
}

#[test]
fn analyze_recovers_parameters_from_synthetic_market_data() {
    // simulated path disguised as a price/volume dataset
    let p = reference();
    let n = 2500;
    let s = simulate_gamma_ou(&p, n, DELTA, &RngStream::new(1001, 0), false).unwrap();
    let mut close = vec![100.0];
    for &x in &s.x {
        close.push(close.last().unwrap() * x.exp());
    }
    let mut csv = String::from("date,close,volume\n");
    for (i, (c, t)) in close.iter().zip(&s.tau).enumerate() {
        // synthetic calendar: YYYY-MM-DD with lexicographic = chronological
        let (y, rem) = (2000 + i / 372, i % 372);
        let (mo, day) = (rem / 31 + 1, rem % 31 + 1);
        csv.push_str(&format!(
            "{y:04}-{mo:02}-{day:02},{c:.12e},{:.12e}\n",
            t * 1e6
        ));
    }
    let ds = bnsvol::market::load_csv_reader(csv.as_bytes(), 1e6).unwrap();
    assert_eq!(ds.n_returns(), n);
    let x = ds.returns();
    let tau = ds.tau();
    let rep = analyze(
        &x,
        &tau,
        DELTA,
        &AnalysisOptions {
            density_points: 41,
            density_tol: 1e-7,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(rep.estimate.valid);
    // the pipeline adds nothing to the estimator path; compare to the
    // in-memory estimate from the same data
    let direct = bnsvol::estimate(&x, &tau, DELTA).unwrap();
    assert_eq!(rep.estimate.theta(), direct.theta());
    // and the estimate is close to the generating parameters
    let sds = [0.2552, 0.0588, 8.9257, 0.1849, 0.053, 0.0013, 1.43e-4];
    for ((got, want), sd) in rep.estimate.theta().into_iter().zip(p.as_array()).zip(sds) {
        assert!((got - want).abs() < 4.0 * sd, "{got} vs {want}");
    }
    let stats = rep.residual_moments.unwrap();
    assert!(
        (stats.kurtosis - 3.3).abs() < 0.5,
        "kurt {}",
        stats.kurtosis
    );
    assert!(stats.mean.abs() < 0.2);
    let ks = rep.ks_residuals.unwrap();
    assert!(ks.p_value >= 0.0 && ks.p_value <= 1.0);
    let lb = rep.ljung_box_squared_residuals.unwrap();
    assert_eq!(lb.lags_or_n, 35);
    let u = rep.unconditional.unwrap();
    assert!((u.mean_v - 0.033).abs() < 0.004, "E[V] {}", u.mean_v);
}

#[test]
fn mc_study_residual_block_matches_reported_scale_at_n8000() {
    // reported residual shape at the larger sample size: kurtosis 3.299
    let rep = mc_study(&McStudyConfig {
        theta0: reference(),
        n: 8000,
        m: 60,
        seed: 21,
        delta: DELTA,
    })
    .unwrap();
    let k = rep.residual_stat("kurtosis").mean;
    assert!((k - 3.299).abs() < 0.06, "kurtosis {k}");
    let sd = rep.residual_stat("std").mean;
    assert!((sd - 1.028).abs() < 0.01, "std {sd}");
}
