mod common;

use std::io::Write as _;

use ate_repair::data::{load_csv, read_csv, write_csv, AttrKind, Attribute, Column};
use ate_repair::estimator::{fit, refit_ate, EstimatorConfig, EstimatorKind, Fitted, UpdateMode};
use ate_repair::ipw::{fisher_unlearn, fit_logistic, hajek_ate, IpwConfig};
use ate_repair::ols::{fit_ols, fit_ols_rows};
use ate_repair::oracle::fixtures::subset_sum;
use ate_repair::oracle::{generate, SynthSpec};
use ate_repair::{CausalQuery, Dataset, Error, Schema};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn numeric(name: &str, kind: AttrKind) -> Attribute {
    Attribute {
        name: name.into(),
        kind,
    }
}

fn table(t: Vec<f64>, o: Vec<f64>, z: Vec<Vec<f64>>) -> (Dataset, CausalQuery) {
    let mut attrs = vec![numeric("T", AttrKind::NumericBinary), numeric("O", AttrKind::NumericContinuous)];
    let mut cols = vec![Column::Numeric(t), Column::Numeric(o)];
    let mut names = Vec::new();
    for (j, col) in z.into_iter().enumerate() {
        let name = format!("Z{}", j + 1);
        attrs.push(numeric(&name, AttrKind::NumericContinuous));
        cols.push(Column::Numeric(col));
        names.push(name);
    }
    let data = Dataset::from_columns(Schema::new(attrs).unwrap(), cols).unwrap();
    (data, CausalQuery::new("T", "O", names, 0.0, 0.0))
}

fn col(data: &Dataset, name: &str) -> Vec<f64> {
    data.column_by_name(name).unwrap().as_numeric().unwrap().to_vec()
}

#[test]
fn ols_matches_the_reference_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (data, q) = common::random_dataset(&mut rng, 30, 1, 0);
    let rows: Vec<usize> = (0..30).collect();
    let expect = common::ols_ate_oracle(&data, &q, &rows).unwrap();
    let state = fit_ols(&data, &q).unwrap();
    assert!((state.ate() - expect).abs() < 1e-10, "{} vs {expect}", state.ate());

    let a = state.gram();
    assert!((a - a.transpose()).amax() < 1e-12);
    let eye = a * state.gram_inverse();
    assert!((eye - DMatrix::identity(a.nrows(), a.ncols())).amax() < 1e-8);
    let beta = state.gram_inverse() * state.moment();
    assert!((beta - state.beta()).amax() < 1e-10);
}

#[test]
fn fixture_effect_is_a_difference_of_means() {
    let (data, q) = subset_sum();
    assert!((fit_ols(&data, &q).unwrap().ate() - 1.25).abs() < 1e-12);
    let cfg = EstimatorConfig {
        estimator: EstimatorKind::Ipw,
        ..EstimatorConfig::default()
    };
    assert!((refit_ate(&data, &q, &cfg, &[]).unwrap() - 1.25).abs() < 1e-12);
}

#[test]
fn constant_outcome_has_no_effect() {
    let (data, q) = table(
        vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        vec![4.0; 6],
        vec![vec![0.3, -1.0, 2.0, 0.5, -0.2, 1.1]],
    );
    assert!(fit_ols(&data, &q).unwrap().ate().abs() < 1e-10);
}

#[test]
fn downdate_to_a_square_system_interpolates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (data, q) = common::random_dataset(&mut rng, 40, 2, 0);
    let state = fit_ols(&data, &q).unwrap();
    // keep exactly as many rows as parameters: both arms present, full rank
    let keep = [0usize, 1, 2, 3];
    let removed: Vec<usize> = (0..40).filter(|i| !keep.contains(i)).collect();
    let (x, o) = state.encode_removal(&data, &removed);
    let small = state.downdate_exact(&x, &o).unwrap();
    let expect = common::ols_ate_oracle(&data, &q, &keep).unwrap();
    assert!((small.ate() - expect).abs() < 1e-6 * expect.abs().max(1.0));
    let xs = common::design_matrix(&data, &q, &keep, &[]);
    let ys = DVector::from_iterator(4, keep.iter().map(|&r| col(&data, "O")[r]));
    assert!((xs * small.beta() - ys).amax() < 1e-6);
}

#[test]
fn removing_duplicates_recovers_the_original_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (base, _) = common::random_dataset(&mut rng, 25, 2, 0);
    let mut t = col(&base, "T");
    let mut o = col(&base, "O");
    let mut z1 = col(&base, "Z1");
    let mut z2 = col(&base, "Z2");
    for i in 0..10 {
        t.push(t[i]);
        o.push(o[i]);
        z1.push(z1[i]);
        z2.push(z2[i]);
    }
    let (data, q) = table(t, o, vec![z1, z2]);
    let full = fit_ols(&data, &q).unwrap();
    let dupes: Vec<usize> = (25..35).collect();
    let (x, y) = full.encode_removal(&data, &dupes);
    let down = full.downdate_exact(&x, &y).unwrap();
    let refit = fit_ols_rows(&data, &q, &(0..25).collect::<Vec<_>>()).unwrap();
    assert!((down.ate() - refit.ate()).abs() < 1e-10);
}

#[test]
fn neumann_single_row_is_close_and_empty_removal_is_identity() {
    let (data, truth) = generate(&SynthSpec::default(), 3).unwrap();
    let q = truth.query.clone();
    let state = fit_ols(&data, &q).unwrap();
    let (x, o) = state.encode_removal(&data, &[17]);
    let approx = state.downdate_neumann(&x, &o).unwrap();
    let exact = state.downdate_exact(&x, &o).unwrap();
    assert!((approx.ate() - exact.ate()).abs() / exact.ate().abs() < 1e-3);

    let cfg = EstimatorConfig {
        update: UpdateMode::Neumann,
        ..EstimatorConfig::default()
    };
    let fitted = fit(&data, &q, &cfg).unwrap();
    let same = fitted.without(&data, &q, &cfg, &[]).unwrap();
    assert_eq!(fitted, same);
}

/// Plain damped Newton on the penalised logistic loss over `[1, z...]`.
fn newton_logistic(t: &[f64], z: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let n = t.len();
    let d = z.len() + 1;
    let row = |i: usize| -> Vec<f64> { std::iter::once(1.0).chain(z.iter().map(|c| c[i])).collect() };
    let mut theta = vec![0.0; d];
    for _ in 0..100 {
        let mut g = DVector::from_iterator(d, theta.iter().map(|&v| lambda * v));
        let mut h = DMatrix::identity(d, d) * lambda;
        for i in 0..n {
            let x = row(i);
            let eta: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            for a in 0..d {
                g[a] += (p - t[i]) * x[a];
                for b in 0..d {
                    h[(a, b)] += p * (1.0 - p) * x[a] * x[b];
                }
            }
        }
        let step = h.lu().solve(&g).unwrap();
        for a in 0..d {
            theta[a] -= step[a];
        }
        if step.amax() < 1e-13 {
            break;
        }
    }
    theta
}

#[test]
fn logistic_fit_matches_newton_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let z1: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
    let z2: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
    let t: Vec<f64> = (0..20)
        .map(|i| if rng.random::<f64>() < 1.0 / (1.0 + (-(0.4 * z1[i] - 0.3 * z2[i])).exp()) { 1.0 } else { 0.0 })
        .collect();
    let o = vec![0.0; 20];
    let lambda = 0.1;
    let expect = newton_logistic(&t, &[z1.clone(), z2.clone()], lambda);
    let (data, q) = table(t, o, vec![z1, z2]);
    let state = fit_logistic(&data, &q, lambda).unwrap();
    for (a, b) in state.theta().iter().zip(&expect) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn balanced_confounder_gets_no_weight() {
    let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut t = Vec::new();
    let mut z = Vec::new();
    for arm in [1.0, 0.0] {
        for &g in &grid {
            t.push(arm);
            z.push(g);
        }
    }
    let o = vec![1.0; t.len()];
    let (data, q) = table(t, o, vec![z]);
    let state = fit_logistic(&data, &q, 1e-4).unwrap();
    assert!(state.theta().amax() < 1e-3, "{}", state.theta());
}

#[test]
fn hajek_matches_brute_force_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (data, q) = common::random_dataset(&mut rng, 200, 2, 0);
    let cfg = IpwConfig::default();
    let state = fit_logistic(&data, &q, cfg.lambda).unwrap();
    let (t, o, z1, z2) = (col(&data, "T"), col(&data, "O"), col(&data, "Z1"), col(&data, "Z2"));
    let th = state.theta();
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..200 {
        let eta = th[0] + th[1] * z1[i] + th[2] * z2[i];
        let p = (1.0 / (1.0 + (-eta).exp())).clamp(cfg.clip, 1.0 - cfg.clip);
        if t[i] == 1.0 {
            a += o[i] / p;
            b += 1.0 / p;
        } else {
            c += o[i] / (1.0 - p);
            d += 1.0 / (1.0 - p);
        }
    }
    let expect = a / b - c / d;
    let rows: Vec<usize> = (0..200).collect();
    assert!((state.ate_on_rows(&data, &rows).unwrap() - expect).abs() < 1e-12);
    assert!(matches!(hajek_ate([(1.0, 2.0, 0.5)], 0.01), Err(Error::EmptyGroup)));
}

fn ipw_cfg(update: UpdateMode, sigma: f64) -> EstimatorConfig {
    EstimatorConfig {
        estimator: EstimatorKind::Ipw,
        update,
        ipw: IpwConfig {
            sigma,
            ..IpwConfig::default()
        },
        seed: 7,
        ..EstimatorConfig::default()
    }
}

#[test]
fn unlearning_tracks_a_refit() {
    let (data, truth) = generate(&SynthSpec::default(), 9).unwrap();
    let q = truth.query.clone();
    let cfg = ipw_cfg(UpdateMode::Exact, 0.0);
    let Fitted::Ipw(state) = fit(&data, &q, &cfg).unwrap() else {
        unreachable!()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let same = fisher_unlearn(&state, &data, &[], 512, 0.0, &mut rng).unwrap();
    assert_eq!(same.theta(), state.theta());

    let removed: Vec<usize> = (0..data.n()).step_by(100).collect();
    let un = fisher_unlearn(&state, &data, &removed, 512, 0.0, &mut rng).unwrap();
    let refit = ate_repair::ipw::fit_logistic_rows(&data, &q, &cfg.ipw, &data.alive_excluding(&removed)).unwrap();
    assert!((un.theta() - refit.theta()).amax() < 1e-3);
}

#[test]
fn noisy_unlearning_is_reproducible() {
    let (data, truth) = generate(&SynthSpec::default(), 4).unwrap();
    let q = truth.query.clone();
    let cfg = ipw_cfg(UpdateMode::Exact, 0.05);
    let fitted = fit(&data, &q, &cfg).unwrap();
    let removed = [3usize, 40, 41, 500];
    let a = fitted.probe(&data, &q, &cfg, &removed).unwrap();
    let b = fitted.probe(&data, &q, &cfg, &removed).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let quiet = fitted.probe(&data, &q, &ipw_cfg(UpdateMode::Exact, 0.0), &removed).unwrap();
    assert_ne!(a, quiet);
}

#[test]
fn csv_round_trip_and_errors() {
    let (data, q) = subset_sum();
    let mut buf = Vec::new();
    write_csv(&data, &mut buf, None, None).unwrap();
    let back = read_csv(buf.as_slice(), None).unwrap();
    assert_eq!(back.n(), 7);
    assert_eq!(back.schema().kind(0), AttrKind::NumericBinary);
    assert!((fit_ols(&back, &q).unwrap().ate() - 1.25).abs() < 1e-12);

    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(b"T,O\n").unwrap();
    assert_eq!(load_csv(f.path(), None).unwrap().n(), 0);

    let bad = "T,O\n1,2\n0,abc\n";
    let hint = Schema::new(vec![numeric("T", AttrKind::NumericBinary), numeric("O", AttrKind::NumericContinuous)]).unwrap();
    match read_csv(bad.as_bytes(), Some(&hint)) {
        Err(Error::UnparseableValue { row, column, .. }) => {
            assert_eq!(row, 1);
            assert_eq!(column, "O");
        }
        other => panic!("{other:?}"),
    }
}
