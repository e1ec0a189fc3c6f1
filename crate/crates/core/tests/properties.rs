use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use proptest::prelude::*;

use pfrecon::fft::{fft_centered, ifft_centered};
use pfrecon::io::{read_volume, write_volume};
use pfrecon::metrics::recon_error;
use pfrecon::parallel::sos_combine;
use pfrecon::pcmra::{mip, speed_image};
use pfrecon::phantoms::blend_phase;
use pfrecon::sampling::{
    acquisition_mask, ramp_weight, AcquiredSide, AxisSampling, RampMode, SamplingSpec,
};
use pfrecon::volume::centered_coord;
use pfrecon::{ComplexVolume, RealMap, Space};

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![
        (1usize..=5).prop_map(|a| vec![2 * a]),
        (1usize..=4, 1usize..=4).prop_map(|(a, b)| vec![2 * a, 2 * b]),
        (1usize..=3, 1usize..=3, 1usize..=3).prop_map(|(a, b, c)| vec![2 * a, 2 * b, 2 * c]),
    ]
}

fn volume_strategy(space: Space) -> impl Strategy<Value = ComplexVolume> {
    dims_strategy().prop_flat_map(move |dims| {
        let n: usize = dims.iter().product();
        prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), n).prop_map(move |v| {
            let data = v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
            ComplexVolume::new(&dims, data, space).unwrap()
        })
    })
}

fn real_volume_strategy() -> impl Strategy<Value = ComplexVolume> {
    dims_strategy().prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        prop::collection::vec(-10.0f64..10.0, n).prop_map(move |v| {
            let data = v.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
            ComplexVolume::new(&dims, data, Space::Image).unwrap()
        })
    })
}

fn max_diff(a: &ComplexVolume, b: &ComplexVolume) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_round_trip(v in volume_strategy(Space::Image)) {
        let back = ifft_centered(&fft_centered(&v).unwrap()).unwrap();
        prop_assert!(max_diff(&back, &v) <= 1e-12 * (1.0 + v.max_abs()));
    }

    #[test]
    fn parseval(v in volume_strategy(Space::Image)) {
        let k = fft_centered(&v).unwrap();
        prop_assert!((k.energy() - v.energy()).abs() <= 1e-12 * v.energy().max(1.0));
    }

    #[test]
    fn linearity(v in volume_strategy(Space::Image), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let w = v.map(|z| z * Complex64::new(0.5, -1.5) + Complex64::new(1.0, 0.0));
        let lhs = fft_centered(&v.scale(a).add(&w.scale(b)).unwrap()).unwrap();
        let rhs = fft_centered(&v).unwrap().scale(a).add(&fft_centered(&w).unwrap().scale(b)).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * (1.0 + lhs.max_abs()));
    }

    #[test]
    fn real_image_spectrum_is_conjugate_symmetric(v in real_volume_strategy()) {
        let k = fft_centered(&v).unwrap();
        let dims = k.dims().to_vec();
        let tol = 1e-12 * (1.0 + k.max_abs());
        for (flat, z) in k.samples().iter().enumerate() {
            let mut rest = flat;
            let mut idx = vec![0usize; dims.len()];
            for a in (0..dims.len()).rev() {
                idx[a] = rest % dims[a];
                rest /= dims[a];
            }
            // k -> -k; the unpaired -N/2 line maps to itself.
            let mirror: Vec<usize> = idx
                .iter()
                .zip(&dims)
                .map(|(&i, &n)| {
                    let kk = centered_coord(i, n);
                    ((-kk).rem_euclid(n as isize) as usize + n / 2) % n
                })
                .collect();
            let partner = k.get(&mirror);
            prop_assert!((z - partner.conj()).norm() <= tol);
        }
    }

    #[test]
    fn cplx_round_trip_is_bitwise(v in volume_strategy(Space::Kspace)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.cplx");
        write_volume(&v, &path).unwrap();
        let back = read_volume(&path).unwrap();
        prop_assert_eq!(back.dims(), v.dims());
        prop_assert_eq!(back.space(), v.space());
        for (a, b) in back.samples().iter().zip(v.samples()) {
            prop_assert_eq!((a.re as f32).to_bits(), (b.re as f32).to_bits());
            prop_assert_eq!((a.im as f32).to_bits(), (b.im as f32).to_bits());
        }
        // A second round trip is exact in f64.
        write_volume(&back, &path).unwrap();
        prop_assert_eq!(read_volume(&path).unwrap(), back);
    }

    #[test]
    fn mask_is_separable(
        a in 2usize..=8, b in 2usize..=8,
        ha in 1usize..=3, hb in 1usize..=3,
        pos_a in any::<bool>(), pos_b in any::<bool>(),
        r in 1usize..=3,
    ) {
        let dims = [2 * a, 2 * b];
        let side = |p: bool| if p { AcquiredSide::Positive } else { AcquiredSide::Negative };
        let spec = SamplingSpec::new(vec![
            AxisSampling::truncated(ha.min(a - 1).max(1), side(pos_a)).with_undersampling(r, 1),
            AxisSampling::truncated(hb.min(b - 1).max(1), side(pos_b)),
        ]);
        prop_assume!(spec.validate(&dims).is_ok());
        let mask = acquisition_mask(&dims, &spec).unwrap();
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                prop_assert_eq!(mask.is_acquired(&[i, j]), mask.profile(0)[i] && mask.profile(1)[j]);
            }
        }
    }

    #[test]
    fn ramp_pairs_sum_to_two(half in 2usize..=32, hfrac in 0.05f64..0.95, pos in any::<bool>()) {
        let n = 2 * half;
        let h = ((hfrac * (half - 1) as f64) as usize).max(1).min(half - 1);
        let side = if pos { AcquiredSide::Positive } else { AcquiredSide::Negative };
        let w = ramp_weight(n, h, side, RampMode::StandardExtension).unwrap();
        for k in -(half as isize - 1)..(half as isize) {
            let at = |k: isize| w[(k + half as isize) as usize];
            prop_assert!((at(k) + at(-k) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn blend_is_affine(
        vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..32),
        g in 0.0f64..=1.0,
    ) {
        let n = vals.len();
        let low = RealMap::from_shape_vec(IxDyn(&[n]), vals.iter().map(|v| v.0).collect()).unwrap();
        let high = RealMap::from_shape_vec(IxDyn(&[n]), vals.iter().map(|v| v.1).collect()).unwrap();
        let b = blend_phase(&low, &high, g).unwrap();
        prop_assert_eq!(blend_phase(&low, &high, 0.0).unwrap(), low.clone());
        prop_assert_eq!(blend_phase(&low, &high, 1.0).unwrap(), high.clone());
        for i in 0..n {
            let want = low[[i].as_slice()] + g * (high[[i].as_slice()] - low[[i].as_slice()]);
            prop_assert!((b[[i].as_slice()] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn recon_error_is_scale_aware(v in volume_strategy(Space::Image), c in 0.0f64..3.0) {
        prop_assume!(v.energy() > 0.0);
        let e = recon_error(&v, &v.scale(c)).unwrap();
        prop_assert!((e - (1.0 - c) * (1.0 - c)).abs() < 1e-12);
    }

    #[test]
    fn sos_is_nonnegative_and_order_free(a in volume_strategy(Space::Image)) {
        let b = a.map(|z| z * Complex64::new(0.0, 2.0) - Complex64::new(1.0, 0.0));
        let ab = sos_combine(&[a.clone(), b.clone()]).unwrap();
        prop_assert!(ab.iter().all(|&x| x >= 0.0));
        prop_assert_eq!(ab, sos_combine(&[b, a]).unwrap());
    }

    #[test]
    fn speed_ignores_axis_order_and_signs(
        vals in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..16),
    ) {
        let n = vals.len();
        let mk = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
            RealMap::from_shape_vec(IxDyn(&[n]), vals.iter().map(f).collect()).unwrap()
        };
        let (x, y, z) = (mk(&|v| v.0), mk(&|v| v.1), mk(&|v| v.2));
        let s = speed_image(&[x.clone(), y.clone(), z.clone()], None, 0.0).unwrap();
        let permuted = speed_image(&[z.clone(), x.clone(), y.clone()], None, 0.0).unwrap();
        let flipped = speed_image(&[-x, y, -z], None, 0.0).unwrap();
        prop_assert!(s.iter().zip(&permuted).all(|(a, b)| (a - b).abs() <= 1e-14 * (1.0 + a)));
        prop_assert_eq!(&s, &flipped);
    }

    #[test]
    fn mip_of_replicated_slice_is_the_slice(
        (rows, cols, vals) in (1usize..6, 1usize..6)
            .prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(-5.0f64..5.0, r * c))),
        depth in 1usize..5,
    ) {
        let slice = ArrayD::from_shape_vec(IxDyn(&[rows, cols]), vals).unwrap();
        let views: Vec<_> = (0..depth).map(|_| slice.view().insert_axis(Axis(2))).collect();
        let vol = ndarray::concatenate(Axis(2), &views).unwrap();
        prop_assert_eq!(mip(&vol, 2).unwrap(), slice.clone());
        for d in 0..depth {
            let p = mip(&vol, 2).unwrap();
            prop_assert!(p.iter().zip(vol.index_axis(Axis(2), d).iter()).all(|(m, x)| m >= x));
        }
    }
}
