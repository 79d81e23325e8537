//! The numerical core is generic over the scalar type; spot-check `f32`.

use polyshrink::frag_forward::{fundamental_solution, FragmentationKernel, FragmentationParams, SeriesOptions};
use polyshrink::measures::{bl_norm, kde_estimate, mult_convolve, tv_norm, Measure};
use polyshrink::Measure32;

#[test]
fn measures_in_f32() {
    let mu: Measure32 = Measure::from_atoms(vec![(0.25f32, 1.0), (1.0, -1.0)]).unwrap();
    assert!((bl_norm(&mu).unwrap() - 0.75).abs() < 1e-5);
    let c = mult_convolve(&Measure::dirac(2.0f32), &Measure::dirac(0.5)).unwrap();
    assert_eq!(c.atoms(), &[(1.0, 1.0)]);
    let kde = kde_estimate(&[0.5f32, 0.6, 0.7, 0.9], None).unwrap();
    assert!((kde.total_mass() - 1.0).abs() < 1e-5);
}

#[test]
fn series_in_f32_tracks_f64() {
    let t = 0.3;
    let p32 = FragmentationParams::new(1.0f32, 1.0).unwrap();
    let p64 = FragmentationParams::new(1.0f64, 1.0).unwrap();
    let s32 = fundamental_solution(
        &p32,
        &FragmentationKernel::uniform(),
        t as f32,
        &SeriesOptions { cells: 100, ..Default::default() },
    )
    .unwrap();
    let s64 = fundamental_solution(
        &p64,
        &FragmentationKernel::uniform(),
        t,
        &SeriesOptions { cells: 100, ..Default::default() },
    )
    .unwrap();
    assert!((s32.measure.moment(1.0).unwrap() - 1.0).abs() < 1e-5);
    let m0_32 = f64::from(tv_norm(&s32.measure));
    let m0_64 = tv_norm(&s64.measure);
    assert!((m0_32 - m0_64).abs() < 1e-4 * m0_64, "{m0_32} vs {m0_64}");
}
