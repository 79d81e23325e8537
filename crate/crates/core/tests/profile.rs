use num_complex::Complex;

use polyshrink::frag_forward::{self_similar_profile, FragmentationKernel, FragmentationParams, ProfileOptions};
use polyshrink::frag_inverse::kappa_mellin_from_profile;
use polyshrink::grid::log_grid;
use polyshrink::measures::{bl_norm, mellin_real, Measure};

fn profile(kernel: &FragmentationKernel<f64>, initial: Option<Measure<f64>>) -> Measure<f64> {
    let p = FragmentationParams::new(1.0, 2.0).unwrap();
    self_similar_profile(&p, kernel, &ProfileOptions { initial, ..Default::default() }).unwrap().profile
}

#[test]
fn profile_does_not_depend_on_the_initial_datum() {
    let k = FragmentationKernel::uniform();
    let flat = profile(&k, None);
    let bump = Measure::from_fn(log_grid(1e-4, 1.0, 256, true), |x| (-(x - 0.8f64).powi(2) / 0.005).exp()).unwrap();
    let peaked = profile(&k, Some(bump));
    let d = bl_norm(&flat.sub(&peaked)).unwrap();
    assert!(d <= 1e-2, "BL distance between profiles {d}");
}

/// The steady equation in Mellin form: `(2 − s) M[g](s) = αγ (M[κ](s) − 1) M[g](s + γ)`.
#[test]
fn profile_satisfies_the_steady_equation() {
    for k in [FragmentationKernel::uniform(), FragmentationKernel::center_weighted(3.0, 64).unwrap()] {
        let g = profile(&k, None);
        for s in [1.5, 3.0, 4.0] {
            let lhs = (2.0 - s) * mellin_real(&g, s).unwrap();
            let rhs = 2.0 * (mellin_real(k.measure(), s).unwrap() - 1.0) * mellin_real(&g, s + 2.0).unwrap();
            assert!((lhs - rhs).abs() <= 2e-2 * lhs.abs().max(rhs.abs()), "s = {s}: {lhs} vs {rhs}");
            let est = kappa_mellin_from_profile(&g, 1.0, 2.0, Complex::new(s, 0.0), 1e-12).unwrap().re;
            assert!((est - mellin_real(k.measure(), s).unwrap()).abs() <= 2e-2);
        }
    }
}
