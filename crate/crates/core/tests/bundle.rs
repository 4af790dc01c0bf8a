use holotrans::bundle::{antiholomorphic_part, automorphy_factor, covariant_derivative, holonomy_square, transport, BundleSpec};
use holotrans::geometry::GeometryContext;
use holotrans::sections::{evaluate, standard_cutoff, GaussianAtom, SectionField};
use holotrans::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(n: usize, k: u32, m1: usize) -> BundleSpec {
    BundleSpec::new(GeometryContext::new(n, k).unwrap(), m1).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_section(sp: &BundleSpec, atoms: usize, rng: &mut ChaCha8Rng, cutoff: bool) -> SectionField {
    let d = sp.ctx.dim();
    let atoms = (0..atoms)
        .map(|_| {
            let mut mi = vec![0u32; sp.n()];
            mi[rng.gen_range(0..sp.n())] = rng.gen_range(0..=2);
            GaussianAtom {
                center: (0..d).map(|_| rng.gen_range(0.0..1.0)).collect(),
                component: rng.gen_range(0..sp.m_plus_1),
                multi_index: mi,
                coeff: c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                cutoff: cutoff.then(|| standard_cutoff(sp.c_k())),
            }
        })
        .collect();
    SectionField::from_atoms(sp.clone(), atoms).unwrap()
}

/// Central difference of parallel-transported samples along coordinate
/// `axis`, step `h` in g_k units.
fn fd_axis(sp: &BundleSpec, f: &dyn Fn(&[f64]) -> Vec<Complex64>, x: &[f64], axis: usize, h: f64) -> Vec<Complex64> {
    let step = h / sp.ctx.sqrt_ck();
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[axis] += step;
    xm[axis] -= step;
    let (tp, tm) = (transport(sp, x, &xp), transport(sp, x, &xm));
    f(&xp).iter().zip(f(&xm)).map(|(p, m)| (tp * p - tm * m) / (2.0 * h)).collect()
}

/// Complex-coframe components of the covariant derivative by finite
/// differences: letters `< n` are ∂_w, letters `≥ n` are ∂_w̄.
fn fd_covariant(sp: &BundleSpec, f: &dyn Fn(&[f64]) -> Vec<Complex64>, x: &[f64], letter: usize, h: f64) -> Vec<Complex64> {
    let n = sp.n();
    let j = letter % n;
    let da = fd_axis(sp, f, x, 2 * j, h);
    let db = fd_axis(sp, f, x, 2 * j + 1, h);
    let sign = if letter < n { -1.0 } else { 1.0 };
    da.iter().zip(&db).map(|(a, b)| (a + c(0.0, sign) * b) / 2.0).collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn cocycle_on_random_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for n in 1..=2 {
        for k in [1, 2, 5] {
            let sp = spec(n, k, 1);
            for _ in 0..100 {
                let lam: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3..=3) as f64).collect();
                let mu: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3..=3) as f64).collect();
                let z: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let sum: Vec<f64> = lam.iter().zip(&mu).map(|(a, b)| a + b).collect();
                let zm: Vec<f64> = z.iter().zip(&mu).map(|(a, b)| a + b).collect();
                let lhs = automorphy_factor(&sum, &z, &sp).unwrap();
                let rhs = automorphy_factor(&lam, &zm, &sp).unwrap() * automorphy_factor(&mu, &z, &sp).unwrap();
                assert!((lhs - rhs).norm() <= 1e-12);
                assert!((lhs.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }
    let sp = spec(1, 3, 1);
    assert_eq!(automorphy_factor(&[0.0, 0.0], &[0.4, 0.9], &sp).unwrap(), c(1.0, 0.0));
    assert!(matches!(
        automorphy_factor(&[0.5, 1.0], &[0.0, 0.0], &sp),
        Err(Error::NonLatticeVector(_))
    ));
}

#[test]
fn small_square_holonomy() {
    let sp = spec(2, 3, 1);
    let x = [0.1, 0.2, 0.3, 0.4];
    for h in [1e-2, 1e-3] {
        let want = c(0.0, sp.c_k() * h * h).exp();
        assert!((holonomy_square(&sp, &x, 0, 1, h) - want).norm() <= h * h * h);
        assert!((holonomy_square(&sp, &x, 2, 3, h) - want).norm() <= h * h * h);
        // mixed directions carry no curvature
        assert!((holonomy_square(&sp, &x, 0, 2, h) - c(1.0, 0.0)).norm() <= 1e-12);
    }
}

#[test]
fn gauge_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=2 {
        let sp = spec(n, 2, 2);
        let s = random_section(&sp, 4, &mut rng, true);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let lam: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-2..=2) as f64).collect();
            let xl: Vec<f64> = x.iter().zip(&lam).map(|(a, b)| a + b).collect();
            let e = automorphy_factor(&lam, &x, &sp).unwrap();
            let (v, vl) = (evaluate(&s, &x), evaluate(&s, &xl));
            let scaled: Vec<Complex64> = v.iter().map(|z| e * z).collect();
            assert!(max_diff(&vl, &scaled) <= 1e-12);
            let nrm = |u: &[Complex64]| u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((nrm(&v) - nrm(&vl)).abs() <= 1e-12);
        }
    }
}

#[test]
fn covariant_derivatives_match_transported_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-3;
    for n in 1..=2 {
        let sp = spec(n, 3, 2);
        let s = random_section(&sp, 3, &mut rng, true);
        let value = |x: &[f64]| evaluate(&s, x);
        for _ in 0..5 {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let d1 = covariant_derivative(&s, &x, 1).unwrap();
            let d2 = covariant_derivative(&s, &x, 2).unwrap();
            let scale1 = d1.norm().max(1e-3);
            let scale2 = d2.norm().max(1e-3);
            for a in 0..2 * n {
                let fd = fd_covariant(&sp, &value, &x, a, h);
                assert!(max_diff(&fd, d1.get(&[a])) <= 1e-5 * scale1);
                for b in 0..2 * n {
                    let inner = |y: &[f64]| covariant_derivative(&s, y, 1).unwrap().get(&[b]).to_vec();
                    let fd = fd_covariant(&sp, &inner, &x, a, h);
                    assert!(max_diff(&fd, d2.get(&[a, b])) <= 1e-5 * scale2);
                }
            }
        }
    }
}

#[test]
fn reference_atom_derivatives() {
    // k = 16 puts the inner cutoff radius beyond g_k-distance 2
    let sp = spec(1, 16, 1);
    let s = SectionField::from_atoms(
        sp.clone(),
        vec![GaussianAtom {
            center: vec![0.5, 0.5],
            component: 0,
            multi_index: vec![0],
            coeff: c(1.0, 0.0),
            cutoff: Some(standard_cutoff(sp.c_k())),
        }],
    )
    .unwrap();
    assert!(covariant_derivative(&s, &[0.5, 0.5], 1).unwrap().norm() <= 1e-14);
    let y = [0.5 + 2.0 / sp.ctx.sqrt_ck(), 0.5];
    let v = covariant_derivative(&s, &y, 0).unwrap().norm();
    assert!((v - (-1.0f64).exp()).abs() <= 1e-6);
    assert!(matches!(covariant_derivative(&s, &y, 4), Err(Error::OrderTooHigh { .. })));
    assert!(matches!(antiholomorphic_part(&s, &y, 3), Err(Error::OrderTooHigh { .. })));
}

#[test]
fn leibniz_linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let sp = spec(2, 2, 1);
    let a = random_section(&sp, 2, &mut rng, true);
    let b = random_section(&sp, 2, &mut rng, true);
    let mut ab = a.clone();
    ab.extend(&b).unwrap();
    let f = c(0.3, -1.7);
    let af = a.scaled(f);
    let x = [0.3, 0.6, 0.1, 0.8];
    for order in 0..=3 {
        let (da, db, dab, daf) = (
            covariant_derivative(&a, &x, order).unwrap(),
            covariant_derivative(&b, &x, order).unwrap(),
            covariant_derivative(&ab, &x, order).unwrap(),
            covariant_derivative(&af, &x, order).unwrap(),
        );
        let tol = 1e-14 * (1.0 + dab.norm());
        for i in 0..dab.data.len() {
            assert!((dab.data[i] - da.data[i] - db.data[i]).norm() <= tol);
            assert!((daf.data[i] - f * da.data[i]).norm() <= tol);
        }
    }
}

fn bare_atom(sp: &BundleSpec, center: &[f64]) -> SectionField {
    SectionField::from_atoms(
        sp.clone(),
        vec![GaussianAtom {
            center: center.to_vec(),
            component: 0,
            multi_index: vec![0; sp.n()],
            coeff: c(1.0, 0.0),
            cutoff: None,
        }],
    )
    .unwrap()
}

#[test]
fn bare_atoms_are_holomorphic() {
    let sp = spec(1, 4, 1);
    let s = bare_atom(&sp, &[0.5, 0.5]);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let x = [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)];
        for order in 0..=2 {
            assert!(antiholomorphic_part(&s, &x, order).unwrap().norm() <= 1e-12);
        }
    }
    // the periodized sum over the whole torus: only truncated tails remain
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        for j in 0..40 {
            let x = [i as f64 / 40.0, j as f64 / 40.0];
            worst = worst.max(antiholomorphic_part(&s, &x, 0).unwrap().norm());
        }
    }
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn cutoff_confines_dbar_to_annulus() {
    let sp = spec(1, 16, 1);
    let (r1, r2) = standard_cutoff(sp.c_k());
    let s = SectionField::from_atoms(
        sp.clone(),
        vec![GaussianAtom {
            center: vec![0.5, 0.5],
            component: 0,
            multi_index: vec![0],
            coeff: c(1.0, 0.0),
            cutoff: Some((r1, r2)),
        }],
    )
    .unwrap();
    let sc = sp.ctx.sqrt_ck();
    let mut inside: f64 = 0.0;
    let mut annulus: f64 = 0.0;
    let mut outside: f64 = 0.0;
    for i in 0..60 {
        for j in 0..60 {
            let x = [i as f64 / 60.0, j as f64 / 60.0];
            let t = sc * ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
            let v = antiholomorphic_part(&s, &x, 0).unwrap().norm();
            if t < r1 - 1e-9 {
                inside = inside.max(v);
            } else if t > r2 + 1e-9 {
                outside = outside.max(v);
            } else {
                annulus = annulus.max(v);
            }
        }
    }
    assert!(inside <= 1e-12 && outside <= 1e-12, "{inside} {outside}");
    assert!(annulus > 1e-3);
}
