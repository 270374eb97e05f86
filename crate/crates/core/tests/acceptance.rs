//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p pvqc-core --test acceptance -- --nocapture` to see
//! the per-criterion lines and measured values.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use pvqc_core::ensembles::{haar_unitary, Initializer, SeedPolicy};
use pvqc_core::fock::{
    enumerate_basis, evolve_state, expectation_value, lift_operator, lift_unitary, permanent,
    permanent_naive, ModeUnitary, OccupationVector, SectorOperator,
};
use pvqc_core::harness::{
    cells, fit_scaling, gradcheck_suite, purity_table, read_variance_csv, run_gradcheck, sweep,
    ScalingModel, SweepConfig, VarianceEstimate, GRADCHECK_REL_TOL,
};
use pvqc_core::liealg::predicted_variance;
use pvqc_core::linalg::{frobenius_dist, identity, C64, CMat};
use pvqc_core::loss::{bhattacharyya_coefficient, chi_squared};
use pvqc_core::mesh::MeshParams;
use pvqc_core::postselect::Regime;

fn random_complex(k: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_shape_fn((k, k), |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
}

#[test]
fn ac1_hong_ou_mandel() {
    let started = Instant::now();
    let basis = enumerate_basis(2, 2);
    let params = MeshParams::new(2, vec![PI / 4.0], vec![0.0], vec![0.0, 0.0]).unwrap();
    let s = pvqc_core::mesh::build_unitary(&params);
    let psi = evolve_state(&s, &OccupationVector::new(vec![1, 1]), &basis).unwrap();
    let probs: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let dev = (probs[0] - 0.5)
        .abs()
        .max(probs[1].abs())
        .max((probs[2] - 0.5).abs());
    assert!(
        dev <= 1e-10,
        "AC-1 FAIL: HOM deviation {dev:.3e} exceeds 1e-10"
    );
    println!(
        "AC-1 PASS: HOM p=(0.5, 0, 0.5) within {dev:.3e} ({} ms)",
        started.elapsed().as_millis()
    );
}

#[test]
fn ac2_permanent_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(20_250_802);
    let mut max_rel: f64 = 0.0;
    for trial in 0..500 {
        let k = 2 + trial % 6; // sizes 2..=7
        let a = random_complex(k, &mut rng);
        let fast = permanent(&a).unwrap();
        let slow = permanent_naive(&a).unwrap();
        let rel = (fast - slow).norm() / slow.norm().max(1e-300);
        max_rel = max_rel.max(rel);
    }
    assert!(
        max_rel <= 1e-10,
        "AC-2 FAIL: max relative error {max_rel:.3e} exceeds 1e-10"
    );
    println!(
        "AC-2 PASS: Ryser vs naive on 500 matrices, max rel err {max_rel:.3e} ({} ms)",
        started.elapsed().as_millis()
    );
}

#[test]
fn ac3_representation_residuals() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let sectors = [(2usize, 2u32), (3, 2), (3, 3), (4, 2), (5, 3)];
    let mut max_residual: f64 = 0.0;
    for pair in 0..100 {
        let (m, n) = sectors[pair % sectors.len()];
        let basis = enumerate_basis(m, n);
        let s1 = ModeUnitary::new(haar_unitary(m, &mut rng)).unwrap();
        let s2 = ModeUnitary::new(haar_unitary(m, &mut rng)).unwrap();
        let l1 = lift_unitary(&s1, &basis).unwrap();
        let l2 = lift_unitary(&s2, &basis).unwrap();

        let unitarity = pvqc_core::linalg::unitarity_residual(l1.entries());
        let prod = ModeUnitary::new(s1.entries().dot(s2.entries())).unwrap();
        let lifted_prod = lift_unitary(&prod, &basis).unwrap();
        let homomorphism =
            frobenius_dist(lifted_prod.entries(), &l1.entries().dot(l2.entries()));
        max_residual = max_residual.max(unitarity).max(homomorphism);
    }

    // dπ commutator identity on random Hermitian pairs.
    let basis = enumerate_basis(3, 2);
    for _ in 0..20 {
        let a = random_complex(3, &mut rng);
        let h1 = (&a + &pvqc_core::linalg::dagger(&a)) / 2.0;
        let b = random_complex(3, &mut rng);
        let h2 = (&b + &pvqc_core::linalg::dagger(&b)) / 2.0;
        let l1 = lift_operator(&h1, &basis).unwrap();
        let l2 = lift_operator(&h2, &basis).unwrap();
        let lhs = l1.entries().dot(l2.entries()) - l2.entries().dot(l1.entries());
        let comm = h1.dot(&h2) - h2.dot(&h1);
        let rhs = lift_operator(&comm, &basis).unwrap();
        max_residual = max_residual.max(frobenius_dist(&lhs, rhs.entries()));
    }
    assert!(
        max_residual <= 1e-9,
        "AC-3 FAIL: max residual {max_residual:.3e} exceeds 1e-9"
    );
    println!(
        "AC-3 PASS: homomorphism/unitarity/commutator residuals <= {max_residual:.3e} ({} ms)",
        started.elapsed().as_millis()
    );
}

fn haar_variance_mc(
    m: usize,
    rho: &SectorOperator,
    obs: &SectorOperator,
    samples: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let vals: Vec<f64> = (0..samples)
        .map(|_| {
            let s = ModeUnitary::new(haar_unitary(m, rng)).unwrap();
            expectation_value(&s, rho, obs).unwrap()
        })
        .collect();
    let mean: f64 = vals.iter().sum::<f64>() / samples as f64;
    let var: f64 =
        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (samples - 1) as f64;
    let mut boot = Vec::with_capacity(200);
    for _ in 0..200 {
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..samples {
            let v = vals[rng.gen_range(0..samples)];
            acc += v;
            acc2 += v * v;
        }
        let bmean = acc / samples as f64;
        boot.push((acc2 / samples as f64 - bmean * bmean) * samples as f64 / (samples - 1) as f64);
    }
    let bmean: f64 = boot.iter().sum::<f64>() / boot.len() as f64;
    let bse = (boot.iter().map(|v| (v - bmean) * (v - bmean)).sum::<f64>() / 199.0).sqrt();
    (var, bse)
}

#[test]
fn ac4_variance_formula() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(4);

    // m=2, n=1: predicted variance is exactly 1/3.
    let basis = enumerate_basis(2, 1);
    let rho = SectorOperator::from_diagonal(&basis, &[1.0, 0.0]).unwrap();
    let obs = SectorOperator::from_diagonal(&basis, &[1.0, -1.0]).unwrap();
    let predicted = predicted_variance(&rho, &obs, 2).unwrap();
    assert!(
        (predicted - 1.0 / 3.0).abs() <= 1e-12,
        "AC-4 FAIL: predicted {predicted} differs from 1/3"
    );
    let (mc, se) = haar_variance_mc(2, &rho, &obs, 100_000, &mut rng);
    assert!(
        (mc - predicted).abs() <= 3.0 * se,
        "AC-4 FAIL: m=2 MC {mc:.5} vs predicted {predicted:.5} (3SE = {:.2e})",
        3.0 * se
    );

    // m=3, n=1: one lifted su(3) generator observable.
    let basis3 = enumerate_basis(3, 1);
    let gens = pvqc_core::liealg::generator_basis(3, pvqc_core::liealg::AlgebraKind::Su);
    let obs3 = pvqc_core::fock::lift_generator(&gens.elements()[0], &basis3).unwrap();
    let rho3 = SectorOperator::from_diagonal(&basis3, &[1.0, 0.0, 0.0]).unwrap();
    let predicted3 = predicted_variance(&rho3, &obs3, 3).unwrap();
    let (mc3, se3) = haar_variance_mc(3, &rho3, &obs3, 100_000, &mut rng);
    assert!(
        (mc3 - predicted3).abs() <= 3.0 * se3,
        "AC-4 FAIL: m=3 MC {mc3:.5} vs predicted {predicted3:.5} (3SE = {:.2e})",
        3.0 * se3
    );
    println!(
        "AC-4 PASS: Var formula m=2 exact 1/3, MC {mc:.5} (SE {se:.1e}); m=3 predicted {predicted3:.5}, MC {mc3:.5} (SE {se3:.1e}) ({} ms)",
        started.elapsed().as_millis()
    );
}

#[test]
fn ac5_gradient_exactness() {
    let started = Instant::now();
    let suite = gradcheck_suite();
    assert_eq!(suite.len(), 30);
    let report = run_gradcheck(&suite, 1e-5).unwrap();
    assert!(
        report.max_rel_err <= GRADCHECK_REL_TOL,
        "AC-5 FAIL: max rel err {:.3e} exceeds 1e-6 at {}",
        report.max_rel_err,
        report.worst_case
    );
    println!(
        "AC-5 PASS: FD suite over 30 configs, max rel err {:.3e} ({} ms)",
        report.max_rel_err,
        started.elapsed().as_millis()
    );
}

#[test]
fn ac6_chi_squared_local_expansion() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    for trial in 0..10 {
        let k = 3 + trial % 4;
        // min q_x >= 0.05 holds after normalization by construction.
        let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw
            .iter()
            .map(|e| 0.05 + e / total * (1.0 - 0.05 * k as f64))
            .collect();
        let mut delta: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mean: f64 = delta.iter().sum::<f64>() / k as f64;
        delta.iter_mut().for_each(|v| *v -= mean);

        let chi_dir: f64 = delta.iter().zip(q.iter()).map(|(&d, &qx)| d * d / qx).sum();
        let residual = |t: f64| {
            let p: Vec<f64> = q
                .iter()
                .zip(delta.iter())
                .map(|(&qx, &d)| qx + t * d)
                .collect();
            let b = bhattacharyya_coefficient(&p, &q);
            ((1.0 - b * b) - t * t / 4.0 * chi_dir).abs()
        };
        for t in [1e-2, 5e-3, 2.5e-3] {
            let full = residual(t);
            let half = residual(t / 2.0);
            assert!(
                half <= full / 7.0 + 1e-16,
                "AC-6 FAIL: trial {trial}, t={t}: residual {full:.3e} -> {half:.3e}"
            );
        }
        // Sanity: the quadratic form itself matches chi_squared.
        let p: Vec<f64> = q
            .iter()
            .zip(delta.iter())
            .map(|(&qx, &d)| qx + 1e-2 * d)
            .collect();
        let chi = chi_squared(&p, &q).unwrap();
        assert!((chi - 1e-4 * chi_dir).abs() <= 1e-12);
    }
    println!(
        "AC-6 PASS: Bhattacharyya local expansion is (t²/4)·χ² with cubic residual decay ({} ms)",
        started.elapsed().as_millis()
    );
}

fn ac7_config(workers: usize) -> SweepConfig {
    SweepConfig {
        regimes: vec![
            Regime::AllowBunching,
            Regime::CollisionFree,
            Regime::RailCode { rails: 2 },
        ],
        inits: vec![Initializer::Uniform],
        n_values: vec![3, 4, 5, 6, 7],
        m_values: None,
        samples: 200,
        master_seed: 42,
        epsilon: 1e-12,
        d_cap: 100_000,
        workers,
    }
}

fn by_regime(rows: &[VarianceEstimate], regime: &str, n: usize) -> VarianceEstimate {
    rows.iter()
        .find(|r| r.regime == regime && r.n_logical == n)
        .cloned()
        .unwrap_or_else(|| panic!("missing row for {regime} N={n}"))
}

#[test]
fn ac7_scaled_trend_grid() {
    let started = Instant::now();
    let config = ac7_config(0);
    let mut buf = Vec::new();
    let rows = sweep(&config, &mut buf).unwrap();
    assert_eq!(rows.len(), 15);

    println!("AC-7 grid (S = 200, seed 42, init = uniform):");
    println!("  N  fock          unbunched     dual_rail");
    for n in 3..=7 {
        let f = by_regime(&rows, "fock", n);
        let u = by_regime(&rows, "unbunched", n);
        let d = by_regime(&rows, "dual_rail", n);
        println!(
            "  {n}  {:.3e}±{:.1e}  {:.3e}±{:.1e}  {:.3e}±{:.1e}",
            f.var_mean, f.var_se, u.var_mean, u.var_se, d.var_mean, d.var_se
        );
    }

    // (ii) all estimates positive and finite.
    let all_positive = rows
        .iter()
        .all(|r| r.var_mean.is_finite() && r.var_mean > 0.0 && r.var_se.is_finite());
    assert!(all_positive, "AC-7(ii) FAIL: non-finite or non-positive V̂");
    println!("AC-7(ii) PASS: all 15 estimates positive and finite");

    // (i) strict ordering dual_rail < unbunched < fock at every N, with
    // non-overlapping ±2 SE intervals at >= 4 of 5 sizes.
    let mut ordered_everywhere = true;
    let mut separated_sizes = 0;
    for n in 3..=7 {
        let f = by_regime(&rows, "fock", n);
        let u = by_regime(&rows, "unbunched", n);
        let d = by_regime(&rows, "dual_rail", n);
        if !(d.var_mean < u.var_mean && u.var_mean < f.var_mean) {
            ordered_everywhere = false;
        }
        let separated = d.var_mean + 2.0 * d.var_se < u.var_mean - 2.0 * u.var_se
            && u.var_mean + 2.0 * u.var_se < f.var_mean - 2.0 * f.var_se;
        if separated {
            separated_sizes += 1;
        }
    }
    let elapsed = started.elapsed().as_secs();
    if ordered_everywhere && separated_sizes >= 4 {
        println!("AC-7(i) PASS: dual_rail < unbunched < fock at every N ({elapsed} s)");
    } else {
        println!(
            "AC-7(i) FAIL: expected dual_rail < unbunched < fock; measured ordering is \
             inverted (fock < unbunched < dual_rail at every N in this desk-scale window, \
             {separated_sizes}/5 sizes cleanly separated) ({elapsed} s)"
        );
    }
    assert!(
        ordered_everywhere && separated_sizes >= 4,
        "AC-7(i) FAIL: stated ordering dual_rail < unbunched < fock does not hold at desk \
         scale; the measured ordering is strictly inverted at every N (see printed table). \
         The separation between regimes is qualitative and clean, but its direction in this \
         pre-asymptotic window is the opposite of the criterion's inequality."
    );
}

#[test]
fn ac8_purity_hierarchy() {
    let started = Instant::now();
    let rows = purity_table(
        &[
            Regime::AllowBunching,
            Regime::CollisionFree,
            Regime::RailCode { rails: 2 },
        ],
        &[4, 6],
    )
    .unwrap();
    assert_eq!(rows.len(), 6);

    // The criterion is about the emitted CSV: write it and read it back.
    let mut buf = Vec::new();
    pvqc_core::harness::write_purity_csv(&rows, &mut buf).unwrap();
    let csv = String::from_utf8(buf).unwrap();
    assert!(csv.starts_with("regime,m,n,subspace_dim,purity"));
    let purity_from_csv = |name: &str, m: usize| -> f64 {
        csv.lines()
            .find(|l| l.starts_with(&format!("{name},{m},")))
            .unwrap_or_else(|| panic!("missing CSV row for {name}, m={m}"))
            .rsplit(',')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    for &m in &[4usize, 6] {
        let f = purity_from_csv("fock", m);
        let u = purity_from_csv("unbunched", m);
        let d = purity_from_csv("dual_rail", m);
        assert!(
            f > u && u > d,
            "AC-8 FAIL: m={m} purities not strictly ordered: fock {f}, unbunched {u}, dual_rail {d}"
        );
    }
    println!(
        "AC-8 PASS: purity CSV strictly ordered fock > unbunched > dual_rail at m=4 and m=6 ({} ms)",
        started.elapsed().as_millis()
    );
}

#[test]
fn ac9_fit_machinery() {
    let started = Instant::now();

    // Exact recovery to 1e-10 with R² = 1.
    let exp_points: Vec<(f64, f64)> = (3..=10)
        .map(|n| (n as f64, 1.7 * (-0.6 * n as f64).exp()))
        .collect();
    let fit = fit_scaling(&exp_points, ScalingModel::Exponential).unwrap();
    assert!((fit.coefficients[0] - 1.7).abs() <= 1e-10);
    assert!((fit.coefficients[1] - 0.6).abs() <= 1e-10);
    assert!((fit.r_squared - 1.0).abs() <= 1e-12);

    let pow_points: Vec<(f64, f64)> = (3..=10)
        .map(|n| (n as f64, 0.9 * (n as f64).powf(-2.4)))
        .collect();
    let fit = fit_scaling(&pow_points, ScalingModel::Power).unwrap();
    assert!((fit.coefficients[0] - 0.9).abs() <= 1e-10);
    assert!((fit.coefficients[1] - 2.4).abs() <= 1e-10);
    assert!((fit.r_squared - 1.0).abs() <= 1e-12);

    // AIC prefers the generating model on 1% multiplicative noise.
    let policy = SeedPolicy::new(9);
    let ns: Vec<f64> = (3..=12).map(|n| n as f64).collect();
    let mut exp_correct = 0;
    let mut pow_correct = 0;
    for seed in 0..20u64 {
        let mut rng = policy.stream("ac9", seed);
        let noisy = |v: f64, rng: &mut ChaCha12Rng| {
            use rand_distr::{Distribution, StandardNormal};
            let g: f64 = StandardNormal.sample(rng);
            v * (1.0 + 0.01 * g)
        };
        let exp_data: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| (n, noisy(2.0 * (-0.8 * n).exp(), &mut rng)))
            .collect();
        let e = fit_scaling(&exp_data, ScalingModel::Exponential).unwrap();
        let p = fit_scaling(&exp_data, ScalingModel::Power).unwrap();
        if e.aic < p.aic {
            exp_correct += 1;
        }
        let pow_data: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| (n, noisy(2.0 * n.powf(-2.5), &mut rng)))
            .collect();
        let e = fit_scaling(&pow_data, ScalingModel::Exponential).unwrap();
        let p = fit_scaling(&pow_data, ScalingModel::Power).unwrap();
        if p.aic < e.aic {
            pow_correct += 1;
        }
    }
    assert!(
        exp_correct >= 18 && pow_correct >= 18,
        "AC-9 FAIL: AIC preference {exp_correct}/20 exponential, {pow_correct}/20 power"
    );
    println!(
        "AC-9 PASS: exact fits recovered to 1e-10; AIC preference {exp_correct}/20 and {pow_correct}/20 ({} ms)",
        started.elapsed().as_millis()
    );
}

#[test]
fn ac10_worker_count_determinism() {
    let started = Instant::now();
    let config_serial = ac7_config(1);
    let mut serial = Vec::new();
    sweep(&config_serial, &mut serial).unwrap();

    let config_parallel = ac7_config(0);
    let mut parallel = Vec::new();
    sweep(&config_parallel, &mut parallel).unwrap();

    assert_eq!(
        serial, parallel,
        "AC-10 FAIL: worker count changed the sorted CSV bytes"
    );
    // The rows parse identically too.
    let a = read_variance_csv(std::str::from_utf8(&serial).unwrap()).unwrap();
    let b = read_variance_csv(std::str::from_utf8(&parallel).unwrap()).unwrap();
    assert_eq!(a, b);
    println!(
        "AC-10 PASS: 1-worker and max-worker grids byte-identical ({} s)",
        started.elapsed().as_secs()
    );
}

#[test]
fn grid_cells_are_exactly_the_ac7_grid() {
    let grid = cells(&ac7_config(0)).unwrap();
    assert_eq!(grid.len(), 15);
    for cell in &grid {
        assert_eq!(cell.m, 2 * cell.n_logical);
        assert_eq!(cell.n as usize, cell.n_logical);
    }
    let mut hit = [false; 5];
    for cell in &grid {
        hit[cell.n_logical - 3] = true;
    }
    assert!(hit.iter().all(|&h| h));
}

#[test]
fn identity_sanity_for_suite_wiring() {
    // Guards against accidental basis/identity regressions in the suite deps.
    let basis = enumerate_basis(3, 2);
    let lifted = lift_unitary(&ModeUnitary::identity(3), &basis).unwrap();
    assert!(frobenius_dist(lifted.entries(), &identity(basis.dim())) < 1e-12);
}
