use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rayleigh_core::impedance::{impedance_diagnostics, impedance_tensor, sylvester_solve};
use rayleigh_core::isotropic::{iso_blocks, IsoSurfaceState};
use rayleigh_core::linalg::{hermitian_eigen, norm_c, symmetric_eigenvalues};
use rayleigh_core::material::fibonacci_sphere;
use rayleigh_core::polyfactor::{
    build_pencil, factor_eigenvalues, factor_integral, pencil_spectrum, spectral_factor, QuadraticPencil,
};
use rayleigh_core::rayleigh::{limiting_speed, rayleigh_point, z_in_frame};
use rayleigh_core::selftest::{random_frame, random_stable, synthetic_anisotropic};
use rayleigh_core::{acoustic_tensor, Material, SurfaceFrame, Vec3, C64};

const GPA: f64 = 1e9;

fn vec3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-10.0..10.0f64).prop_map(Vec3::from)
}

/// Rotated, perturbed isotropic stiffness; Lamé draws in GPa.
fn material() -> impl Strategy<Value = Material> {
    (any::<u64>(), 1.0..100.0f64, 1.0..100.0f64, 0.0..0.6f64, 1000.0..9000.0f64).prop_map(
        |(seed, lambda, mu, strength, rho)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = synthetic_anisotropic(&mut rng, lambda * GPA, mu * GPA, strength);
            Material::new("prop", c, rho).unwrap()
        },
    )
}

fn frame() -> impl Strategy<Value = SurfaceFrame> {
    any::<u64>().prop_map(|s| random_frame(&mut ChaCha8Rng::seed_from_u64(s)))
}

/// Elliptic point at speed `frac * c_lim`.
fn elliptic_point() -> impl Strategy<Value = (Material, SurfaceFrame, f64)> {
    (material(), frame(), 0.2..0.98f64).prop_map(|(m, f, frac)| {
        let c_lim = limiting_speed(&m, &f).unwrap();
        (m, f, 1.0 / (frac * c_lim))
    })
}

fn sorted_spectrum(p: &QuadraticPencil) -> Vec<C64> {
    let mut s: Vec<C64> = pencil_spectrum(p).unwrap().into_iter().map(|e| e.s).collect();
    s.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn acoustic_tensor_transpose_swaps_arguments(m in material(), xi in vec3(), eta in vec3()) {
        let c = &m.stiffness;
        let d = acoustic_tensor(c, &xi, &eta).transpose() - acoustic_tensor(c, &eta, &xi);
        prop_assert!(d.norm() <= 1e-12 * acoustic_tensor(c, &xi, &eta).norm().max(1.0));
    }

    #[test]
    fn acoustic_tensor_is_quadratic(m in material(), xi in vec3(), eta in vec3(), t in -5.0..5.0f64) {
        let c = &m.stiffness;
        let base = acoustic_tensor(c, &xi, &eta);
        let scaled = acoustic_tensor(c, &(xi * t), &(eta * t));
        prop_assert!((scaled - base * (t * t)).norm() <= 1e-12 * (base.norm() * t * t).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn strongly_convex_means_uniformly_elliptic(m in material(), eta in vec3()) {
        prop_assume!(eta.norm() > 1e-3);
        let delta = fibonacci_sphere(50)
            .iter()
            .map(|e| symmetric_eigenvalues(&acoustic_tensor(&m.stiffness, e, e))[0])
            .fold(f64::INFINITY, f64::min);
        prop_assert!(delta > 0.0);
        let e = eta.normalize();
        prop_assert!(symmetric_eigenvalues(&acoustic_tensor(&m.stiffness, &e, &e))[0] > 0.0);
    }

    #[test]
    fn factor_routes_agree((m, f, xi) in elliptic_point()) {
        let p = build_pencil(&m, &f, xi);
        let q = spectral_factor(&p).unwrap().q;
        let qi = factor_integral(&p).unwrap().q;
        prop_assert!(norm_c(&(q - qi)) <= 1e-8 * norm_c(&qi));
    }

    #[test]
    fn factor_spectrum_in_lower_half_plane((m, f, xi) in elliptic_point()) {
        let p = build_pencil(&m, &f, xi);
        let sf = spectral_factor(&p).unwrap();
        let scale = norm_c(&sf.q);
        for ev in factor_eigenvalues(&sf.q).unwrap() {
            prop_assert!(ev.im < -1e-3 * sf.spectral_margin.min(1.0) * scale, "{ev}");
        }
    }

    #[test]
    fn reflection_conjugates_i_q((m, f, xi) in elliptic_point()) {
        let p = build_pencil(&m, &f, xi);
        let q = spectral_factor(&p).unwrap().q;
        let qr = spectral_factor(&p.reflected()).unwrap().q;
        let iq = q * C64::i();
        let iqr = qr * C64::i();
        prop_assert!(norm_c(&(iqr - iq.map(|z| z.conj()))) <= 1e-9 * norm_c(&iq));
    }

    #[test]
    fn spectrum_scales_with_covector((m, f, xi) in elliptic_point(), t in 1.0..20.0f64) {
        let scaled = build_pencil(&m, &f, t * xi);
        let mut reduced = build_pencil(&m, &f, xi);
        reduced.rho /= t * t;
        let a = sorted_spectrum(&scaled);
        let b = sorted_spectrum(&reduced);
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y * t).norm() <= 1e-8 * scale, "{x} vs {}", y * t);
        }
    }

    #[test]
    fn impedance_structure((m, f, xi) in elliptic_point()) {
        let p = build_pencil(&m, &f, xi);
        let d = impedance_tensor(&p, &spectral_factor(&p).unwrap()).unwrap();
        let diag = impedance_diagnostics(&d, &p);
        prop_assert!(d.hermiticity_defect < 1e-9);
        prop_assert!(diag.re_z_min_eigenvalue > 0.0);
        let zn = norm_c(&d.z);
        prop_assert!(diag.z_eigenvalues.iter().filter(|&&l| l > 1e-9 * zn).count() >= 2);
    }

    #[test]
    fn sylvester_is_linear(seed in any::<u64>(), alpha in -10.0..10.0f64, n in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_stable(&mut rng, n);
        let b1 = random_stable(&mut rng, n);
        let b2 = random_stable(&mut rng, n).adjoint();
        let x1 = sylvester_solve(&a, &b1).unwrap();
        let x2 = sylvester_solve(&a, &b2).unwrap();
        let x = sylvester_solve(&a, &(&b1 * C64::from(alpha) + &b2)).unwrap();
        let expect: DMatrix<C64> = x1 * C64::from(alpha) + x2;
        prop_assert!((x - &expect).norm() <= 1e-12 * expect.norm().max(1.0));
    }

    #[test]
    fn rayleigh_root_has_small_kernel_residual(m in material(), f in frame()) {
        let pt = rayleigh_point(&m, &f).unwrap();
        if pt.exists {
            prop_assert!(pt.res_kernel.unwrap() <= 1e-7);
            prop_assert!(pt.c_r.unwrap() < pt.c_lim);
        }
    }

    #[test]
    fn isotropic_blocks_match_general_route(
        lambda in -0.6..100.0f64,
        mu in 0.1..100.0f64,
        rho in 500.0..12000.0f64,
        k in 1.05..20.0f64,
        f in frame(),
    ) {
        // 3 lambda + 2 mu > 0 keeps the medium strongly convex
        prop_assume!(3.0 * lambda + 2.0 * mu > 0.05 * mu);
        let (lambda, mu) = (lambda * GPA, mu * GPA);
        let xi = k / (mu / rho).sqrt();
        let mat = Material::isotropic("prop", lambda, mu, rho).unwrap();
        let p = build_pencil(&mat, &f, xi);
        let d = impedance_tensor(&p, &spectral_factor(&p).unwrap()).unwrap();
        let bl = iso_blocks(&IsoSurfaceState::new(lambda, mu, rho, xi).unwrap()).unwrap();
        let zc = bl.z_full();
        prop_assert!(norm_c(&(z_in_frame(&d.z, &f) - zc)) <= 1e-10 * norm_c(&zc));
        let iqc = bl.iq_full();
        prop_assert!(norm_c(&(z_in_frame(&d.iq(), &f) - iqc)) <= 1e-10 * norm_c(&iqc));
    }

    #[test]
    fn isotropic_speed_ordering(lambda in -0.6..100.0f64, mu in 0.1..100.0f64, rho in 500.0..12000.0f64) {
        prop_assume!(3.0 * lambda + 2.0 * mu > 0.05 * mu);
        let st = IsoSurfaceState::on_sigma(lambda * GPA, mu * GPA, rho).unwrap();
        prop_assert!(0.0 < st.c_r && st.c_r < st.c_s && st.c_s < st.c_p);
        let bl = iso_blocks(&st).unwrap();
        prop_assert!(bl.det_z11.abs() <= 1e-11 * norm_c(&bl.z_full()).powi(2));
        prop_assert!((2.0 * (2.0 * st.b - st.t) - st.t * (2.0 - st.t)).abs() <= 1e-11);
    }

    #[test]
    fn isotropic_z_positive_far_inside(lambda in 0.1..100.0f64, mu in 0.1..100.0f64, rho in 500.0..12000.0f64, f in frame()) {
        let (lambda, mu) = (lambda * GPA, mu * GPA);
        let mat = Material::isotropic("prop", lambda, mu, rho).unwrap();
        let p = build_pencil(&mat, &f, 10.0 / (mu / rho).sqrt());
        let d = impedance_tensor(&p, &spectral_factor(&p).unwrap()).unwrap();
        prop_assert!(hermitian_eigen(&d.z).0[0] > 0.0);
    }
}
