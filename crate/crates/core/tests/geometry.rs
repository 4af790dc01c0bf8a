use holotrans::geometry::{
    compatible_almost_complex, moser_darboux, moser_darboux_with_grid, rescaled_distance, standard_j, standard_omega, AlmostComplexField,
    GeometryContext, TwoFormField,
};
use holotrans::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_antisymmetric(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let v = rng.gen_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    a
}

/// Compatibility identities checked directly on random vectors.
fn check_compatible(w: &DMatrix<f64>, j: &DMatrix<f64>, rng: &mut ChaCha8Rng) {
    let d = w.nrows();
    assert!((j * j + DMatrix::identity(d, d)).amax() <= 1e-10);
    for _ in 0..10 {
        let u = DMatrix::from_fn(d, 1, |_, _| rng.gen_range(-1.0..1.0));
        let v = DMatrix::from_fn(d, 1, |_, _| rng.gen_range(-1.0..1.0));
        let om = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a.transpose() * w * b)[(0, 0)];
        assert!((om(&(j * &u), &(j * &v)) - om(&u, &v)).abs() <= 1e-10);
        assert!(om(&v, &(j * &v)) > 0.0);
    }
}

#[test]
fn compatible_structure_for_small_constant_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=2 {
        let d = 2 * n;
        for _ in 0..50 {
            let p = random_antisymmetric(d, &mut rng);
            let size = rng.gen_range(0.001..0.1);
            let w = standard_omega(n) + &p * (size / p.norm());
            let cs = compatible_almost_complex(
                &TwoFormField::constant(w.clone()),
                &AlmostComplexField::standard(n),
                &[vec![0.0; d]],
            )
            .unwrap();
            let j = cs.field.at(&vec![0.2; d]);
            check_compatible(&w, &j, &mut rng);
            assert!((&j - standard_j(n)).norm() <= 5.0 * size);
            assert!(cs.square_residual <= 1e-10 && cs.invariance_residual <= 1e-10);
            assert!(cs.min_taming > 0.0);
        }
    }
}

#[test]
fn compatible_structure_for_varying_form() {
    // ω₀ + 0.05 dx₁∧dx₂ (closed, constant) plus a closed varying term
    let om = TwoFormField::new(4, |x, out| {
        let f = 0.02 * (2.0 * std::f64::consts::PI * x[0]).sin();
        let mut w = [0.0; 16];
        w[1] = 1.0 + f;
        w[4] = -(1.0 + f);
        w[2 * 4 + 3] = 1.0;
        w[3 * 4 + 2] = -1.0;
        w[2] = 0.05;
        w[2 * 4] = -0.05;
        out.copy_from_slice(&w);
    });
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<Vec<f64>> = (0..1000).map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let cs = compatible_almost_complex(&om, &AlmostComplexField::standard(2), &samples).unwrap();
    assert!(cs.square_residual <= 1e-10);
    for x in samples.iter().take(200) {
        let j = cs.field.at(x);
        check_compatible(&om.at(x), &j, &mut rng);
        assert!((&j - standard_j(2)).norm() <= 0.5);
    }
    assert!(om.closedness_residual(&[0.3, 0.1, 0.2, 0.4], 1e-4) < 1e-8);
}

#[test]
fn taming_failure_is_rejected() {
    let om = TwoFormField::constant(-standard_omega(1));
    let err = compatible_almost_complex(&om, &AlmostComplexField::standard(1), &[vec![0.0, 0.0]]).unwrap_err();
    assert!(matches!(err, Error::TamingFailure { .. }));
    let degenerate = TwoFormField::constant(DMatrix::zeros(2, 2));
    let err = compatible_almost_complex(&degenerate, &AlmostComplexField::standard(1), &[vec![0.0, 0.0]]).unwrap_err();
    assert!(matches!(err, Error::DegenerateForm { .. }));
}

fn moser_form(n: usize) -> TwoFormField {
    TwoFormField::new(2 * n, move |x, out| {
        let d = 2 * n;
        out.iter_mut().for_each(|v| *v = 0.0);
        let f = 1.0 + 0.05 * x[0];
        out[1] = f;
        out[d] = -f;
        if n == 2 {
            out[2 * d + 3] = 1.0;
            out[3 * d + 2] = -1.0;
        }
    })
}

/// `Dψᵀ W₁(ψ) Dψ − W₀` with a finite-difference Jacobian of the chart map.
fn fd_pullback_defect(chart: &holotrans::geometry::DarbouxChart, om: &TwoFormField, z: &[f64]) -> f64 {
    let d = z.len();
    let h = 1e-5;
    let mut jac = DMatrix::zeros(d, d);
    for b in 0..d {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[b] += h;
        zm[b] -= h;
        let p = chart.inverse(&zp).unwrap();
        let m = chart.inverse(&zm).unwrap();
        for a in 0..d {
            jac[(a, b)] = (p[a] - m[a]) / (2.0 * h);
        }
    }
    let w1 = om.at(&chart.inverse(z).unwrap());
    (jac.transpose() * w1 * &jac - standard_omega(d / 2)).amax()
}

#[test]
fn moser_chart_pulls_back_to_standard_form() {
    for n in 1..=2 {
        let om = moser_form(n);
        let center = vec![0.1; 2 * n];
        let chart = moser_darboux(&om, &center, 0.5, 0.01).unwrap();
        assert!(chart.residual <= 1e-6, "{}", chart.residual);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let z: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-0.25..0.25)).collect();
            assert!(fd_pullback_defect(&chart, &om, &z) <= 1e-6);
            let back = chart.forward(&chart.inverse(&z).unwrap()).unwrap();
            let err = z.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-8);
        }
    }
}

#[test]
fn moser_identity_chart() {
    let chart = moser_darboux_with_grid(&TwoFormField::standard(1), &[0.3, 0.3], 0.5, 0.1, 10).unwrap();
    assert_eq!(chart.residual, 0.0);
    let x = chart.inverse(&[0.1, -0.2]).unwrap();
    assert!((x[0] - 0.4).abs() < 1e-15 && (x[1] - 0.1).abs() < 1e-15);
}

#[test]
fn moser_fourth_order_convergence() {
    let om = moser_form(1);
    let coarse = moser_darboux_with_grid(&om, &[0.0, 0.0], 0.5, 0.5, 20).unwrap().residual;
    let fine = moser_darboux_with_grid(&om, &[0.0, 0.0], 0.5, 0.25, 20).unwrap().residual;
    let ratio = coarse / fine;
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn large_deformation_is_degenerate() {
    let om = TwoFormField::new(2, |x, out| {
        let f = 1.0 - 4.0 * x[0];
        out.copy_from_slice(&[0.0, f, -f, 0.0]);
    });
    let err = moser_darboux_with_grid(&om, &[0.0, 0.0], 0.5, 0.05, 5).unwrap_err();
    assert!(
        matches!(err, Error::InterpolantDegenerate { .. } | Error::FlowEscaped { .. }),
        "{err:?}"
    );
}

#[test]
fn rescaled_distance_is_a_metric() {
    let ctx = GeometryContext::new(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pt = || -> Vec<f64> { (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect() };
    for _ in 0..500 {
        let (x, y, z) = (pt(), pt(), pt());
        let dxy = rescaled_distance(&x, &y, &ctx);
        assert_eq!(rescaled_distance(&x, &x, &ctx), 0.0);
        assert!((dxy - rescaled_distance(&y, &x, &ctx)).abs() < 1e-12);
        assert!(dxy <= rescaled_distance(&x, &z, &ctx) + rescaled_distance(&z, &y, &ctx) + 1e-12);
    }
}

#[test]
fn context_invariants() {
    for n in 1..=2 {
        let ctx = GeometryContext::new(n, 5).unwrap();
        assert!((ctx.c_k - 10.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((ctx.omega0().determinant() - 1.0).abs() < 1e-14);
        let j = ctx.j0();
        let d = 2 * n;
        // J₀ is orthogonal for the flat metric
        assert!((j.transpose() * &j - DMatrix::identity(d, d)).amax() < 1e-15);
    }
    assert!(GeometryContext::new(3, 1).is_err());
    assert!(GeometryContext::new(1, 0).is_err());
}
