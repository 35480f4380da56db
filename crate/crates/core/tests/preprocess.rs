use cardiorefine_core::preprocess::{crop_or_pad, fit_field_of_view, heart_center, resample_isotropic, FovOptions};
use cardiorefine_core::{Error, Geometry, IntensityVolume, LabelSchema, LabelVolume, Volume};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labels(dims: [usize; 3], spacing: f64, data: Vec<u8>) -> LabelVolume {
    LabelVolume::new(Geometry::isotropic(dims, spacing).unwrap(), LabelSchema::Ten, data).unwrap()
}

fn random_labels(dims: [usize; 3], spacing: f64, rng: &mut ChaCha8Rng) -> LabelVolume {
    let n = dims.iter().product();
    labels(dims, spacing, (0..n).map(|_| rng.random_range(0..=10)).collect())
}

/// Nearest-neighbour by containment: the source voxel whose physical cell
/// holds the output voxel's centre. Spacings are given in integer quarter
/// millimetres so the search is exact.
fn containment_oracle(src: &LabelVolume, src_q: usize, dst_q: usize) -> (Vec<usize>, Vec<u8>) {
    let dims = src.dims();
    let out_dims: Vec<usize> = dims
        .iter()
        .map(|&d| (((d * src_q) as f64 / dst_q as f64).round() as usize).max(1))
        .collect();
    let pick = |j: usize, n: usize| -> usize {
        // centre at (2j+1)*dst_q/2 quarter-mm; cell k spans [k*src_q, (k+1)*src_q)
        let centre2 = (2 * j + 1) * dst_q;
        (centre2 / (2 * src_q)).min(n - 1)
    };
    let mut out = Vec::new();
    for z in 0..out_dims[0] {
        for y in 0..out_dims[1] {
            for x in 0..out_dims[2] {
                out.push(src.at(pick(z, dims[0]), pick(y, dims[1]), pick(x, dims[2])));
            }
        }
    }
    (out_dims, out)
}

#[test]
fn nearest_neighbour_matches_containment_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let dims = [rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=8)];
        let src_q = rng.random_range(2..=8);
        let dst_q = rng.random_range(2..=8);
        let vol = random_labels(dims, src_q as f64 / 4.0, &mut rng);
        let out = resample_isotropic(&vol, dst_q as f64 / 4.0).unwrap();
        let (odims, expected) = containment_oracle(&vol, src_q, dst_q);
        assert_eq!(out.dims().to_vec(), odims, "trial {trial}");
        assert_eq!(out.data(), &expected[..], "trial {trial}: {dims:?} {src_q}->{dst_q}");
    }
}

#[test]
fn six_cube_downsampled_by_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vol = random_labels([6, 6, 6], 1.0, &mut rng);
    let out = resample_isotropic(&vol, 2.0).unwrap();
    let (_, expected) = containment_oracle(&vol, 4, 8);
    assert_eq!(out.dims(), [3, 3, 3]);
    assert_eq!(out.data(), &expected[..]);
}

#[test]
fn factor_two_upsampling_dims() {
    let g = Geometry::isotropic([64, 96, 96], 2.0).unwrap();
    let vol = LabelVolume::background(g, LabelSchema::Six);
    let out = resample_isotropic(&vol, 1.0).unwrap();
    assert_eq!(out.dims(), [128, 192, 192]);
    assert_eq!(out.geometry().spacing, [1.0; 3]);
}

#[test]
fn anisotropic_volume_becomes_isotropic() {
    let g = Geometry::new([10, 20, 20], [2.5, 0.5, 0.5], [0.0; 3]).unwrap();
    let img = IntensityVolume::filled(g, 42.0);
    let out = resample_isotropic(&img, 1.0).unwrap();
    assert_eq!(out.dims(), [25, 10, 10]);
    assert!(out.data().iter().all(|&v| v == 42.0));
}

#[test]
fn heart_center_examples() {
    let g = Geometry::isotropic([12, 12, 12], 1.0).unwrap();
    let mut data = vec![0u8; g.len()];
    for z in 2..6 {
        for y in 2..6 {
            for x in 2..6 {
                data[g.index(z, y, x)] = 1;
            }
        }
    }
    // bounding box 2..=5: centre 3.5 rounds up
    assert_eq!(heart_center(&labels(g.dims, 1.0, data)).unwrap(), [4, 4, 4]);
    let empty = LabelVolume::background(g, LabelSchema::Six);
    assert!(matches!(heart_center(&empty), Err(Error::EmptyLabels)));
}

/// Direct index map: output o reads input o + center - target/2.
fn crop_oracle(vol: &LabelVolume, target: [usize; 3], center: [usize; 3], fill: u8) -> Vec<u8> {
    let d = vol.dims();
    let mut out = Vec::new();
    for z in 0..target[0] {
        for y in 0..target[1] {
            for x in 0..target[2] {
                let src = [z, y, x]
                    .iter()
                    .enumerate()
                    .map(|(a, &o)| o as isize + center[a] as isize - (target[a] / 2) as isize)
                    .collect::<Vec<_>>();
                let inside = (0..3).all(|a| src[a] >= 0 && (src[a] as usize) < d[a]);
                out.push(if inside {
                    vol.at(src[0] as usize, src[1] as usize, src[2] as usize)
                } else {
                    fill
                });
            }
        }
    }
    out
}

#[test]
fn crop_then_pad_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let dims = [rng.random_range(1..=9), rng.random_range(1..=9), rng.random_range(1..=9)];
        let vol = random_labels(dims, 1.0, &mut rng);
        let target = [rng.random_range(1..=9), rng.random_range(1..=9), rng.random_range(1..=9)];
        let center: [usize; 3] = std::array::from_fn(|a| rng.random_range(0..dims[a]));
        let cropped = crop_or_pad(&vol, target, center, None).unwrap();
        assert_eq!(cropped.data(), &crop_oracle(&vol, target, center, 0)[..]);
        // back to the original frame: cropped voxel c' came from c' + center - target/2
        let mid: [usize; 3] = std::array::from_fn(|a| target[a] / 2);
        let back: Vec<isize> = (0..3)
            .map(|a| (dims[a] / 2) as isize - center[a] as isize + mid[a] as isize)
            .collect();
        if back.iter().any(|&c| c < 0) {
            continue;
        }
        let back = [back[0] as usize, back[1] as usize, back[2] as usize];
        let restored = crop_or_pad(&cropped, dims, back, None).unwrap();
        assert_eq!(restored.geometry().origin, vol.geometry().origin);
        for z in 0..dims[0] {
            for y in 0..dims[1] {
                for x in 0..dims[2] {
                    let kept = [z, y, x].iter().enumerate().all(|(a, &c)| {
                        let o = c as isize - center[a] as isize + mid[a] as isize;
                        o >= 0 && (o as usize) < target[a]
                    });
                    let expected = if kept { vol.at(z, y, x) } else { 0 };
                    assert_eq!(restored.at(z, y, x), expected);
                }
            }
        }
    }
}

#[test]
fn pad_small_volume_keeps_everything() {
    let g = Geometry::isotropic([4, 4, 4], 1.0).unwrap();
    let img = IntensityVolume::new(g, (0..64).map(|v| v as f32 + 10.0).collect()).unwrap();
    let out = crop_or_pad(&img, [8, 8, 8], [2, 2, 2], None).unwrap();
    let mut vals: Vec<f32> = out.data().iter().copied().filter(|&v| v != 10.0).collect();
    vals.sort_by(f32::total_cmp);
    assert_eq!(vals.len(), 63);
    // the pad default is the input minimum
    assert_eq!(out.data().iter().filter(|&&v| v == 10.0).count(), 512 - 63);
    assert_eq!(out.geometry().origin, [-2.0; 3]);
}

/// Smallest `k` at which a bar of `length` 1 mm voxels, resampled by
/// containment at spacing 1.1^k, spans at most `target` voxels.
fn fov_oracle(volume_len: usize, bar: std::ops::Range<usize>, target: usize) -> usize {
    for k in 0..=20 {
        let t = 1.1f64.powi(k);
        let n = (volume_len as f64 / t).round() as usize;
        let hits: Vec<usize> = (0..n)
            .filter(|&j| {
                let src = (((j as f64 + 0.5) * t).floor() as usize).min(volume_len - 1);
                bar.contains(&src)
            })
            .collect();
        if hits.last().unwrap() - hits[0] < target {
            return k as usize;
        }
    }
    panic!("no fit within the cap");
}

fn bar_case(volume_len: usize, bar: std::ops::Range<usize>) -> (IntensityVolume, LabelVolume) {
    let g = Geometry::isotropic([volume_len, 3, 3], 1.0).unwrap();
    let mut data = vec![0u8; g.len()];
    for z in bar {
        for i in 0..9 {
            data[z * 9 + i] = 1;
        }
    }
    (
        IntensityVolume::filled(g.clone(), 1.0),
        LabelVolume::new(g, LabelSchema::Six, data).unwrap(),
    )
}

#[test]
fn fov_extent_that_already_fits() {
    let (img, lab) = bar_case(160, 30..130);
    let fit = fit_field_of_view(&img, &lab, [128, 3, 3], &FovOptions::default()).unwrap();
    assert_eq!((fit.iterations, fit.spacing), (0, 1.0));
    assert_eq!(fit.labels.dims(), [128, 3, 3]);
    assert_eq!(fit.labels.foreground_count(), 100 * 9);
}

#[test]
fn fov_140_needs_one_iteration() {
    let (img, lab) = bar_case(200, 30..170);
    let fit = fit_field_of_view(&img, &lab, [128, 3, 3], &FovOptions::default()).unwrap();
    assert_eq!(fov_oracle(200, 30..170, 128), 1);
    assert_eq!(fit.iterations, 1);
    assert!((fit.spacing - 1.1).abs() < 1e-12);
}

#[test]
fn fov_170_matches_simulated_loop() {
    let (img, lab) = bar_case(240, 35..205);
    let fit = fit_field_of_view(&img, &lab, [128, 3, 3], &FovOptions::default()).unwrap();
    let k = fov_oracle(240, 35..205, 128);
    // 170 / 1.21 is about 140.5 voxels, so two steps are not enough
    assert_eq!(k, 3);
    assert_eq!(fit.iterations, k);
    assert_eq!(fit.spacing, 1.1f64.powi(k as i32));
    let (lo, hi) = fit.labels.foreground_bounds().unwrap();
    assert!(hi[0] - lo[0] < 128);
}

#[test]
fn fov_iteration_cap() {
    let (img, lab) = bar_case(60, 0..60);
    let opts = FovOptions {
        max_iterations: 2,
        ..FovOptions::default()
    };
    assert!(matches!(
        fit_field_of_view(&img, &lab, [8, 3, 3], &opts),
        Err(Error::FovIterationCap(2))
    ));
}

fn arb_labels(max: usize) -> impl Strategy<Value = LabelVolume> {
    (1..=max, 1..=max, 1..=max).prop_flat_map(|(z, y, x)| {
        prop::collection::vec(prop_oneof![3 => Just(0u8), 1 => 1u8..=10], z * y * x)
            .prop_map(move |d| labels([z, y, x], 1.0, d))
    })
}

proptest! {
    #[test]
    fn nearest_neighbour_adds_no_labels(vol in arb_labels(7), q in 1usize..=12) {
        let out = resample_isotropic(&vol, q as f64 / 4.0).unwrap();
        let before = vol.histogram();
        let after = out.histogram();
        for (id, &n) in after.iter().enumerate() {
            prop_assert!(n == 0 || before[id] > 0);
        }
    }

    #[test]
    fn unit_factor_is_identity(vol in arb_labels(6)) {
        prop_assert_eq!(resample_isotropic(&vol, 1.0).unwrap(), vol);
    }

    #[test]
    fn crop_keeps_retained_multiset(
        vol in arb_labels(8),
        t in (1usize..=8, 1usize..=8, 1usize..=8),
        c in (0usize..8, 0usize..8, 0usize..8),
    ) {
        let d = vol.dims();
        let center = [c.0 % d[0], c.1 % d[1], c.2 % d[2]];
        let target = [t.0, t.1, t.2];
        let out = crop_or_pad(&vol, target, center, None).unwrap();
        let mut retained = Vec::new();
        for z in 0..d[0] {
            for y in 0..d[1] {
                for x in 0..d[2] {
                    let inside = [z, y, x].iter().enumerate().all(|(a, &v)| {
                        let o = v as isize - center[a] as isize + (target[a] / 2) as isize;
                        o >= 0 && (o as usize) < target[a]
                    });
                    if inside {
                        retained.push(vol.at(z, y, x));
                    }
                }
            }
        }
        let mut got: Vec<u8> = out.data().to_vec();
        let pad = got.len() - retained.len();
        retained.extend(std::iter::repeat_n(0, pad));
        retained.sort();
        got.sort();
        prop_assert_eq!(got, retained);
    }

    #[test]
    fn heart_center_follows_translation(vol in arb_labels(6), t in (0usize..4, 0usize..4, 0usize..4)) {
        prop_assume!(vol.foreground_count() > 0);
        let d = vol.dims();
        let big = [d[0] + 4, d[1] + 4, d[2] + 4];
        let place = |off: [usize; 3]| {
            let g = Geometry::isotropic(big, 1.0).unwrap();
            let mut data = vec![0u8; g.len()];
            for z in 0..d[0] {
                for y in 0..d[1] {
                    for x in 0..d[2] {
                        data[g.index(z + off[0], y + off[1], x + off[2])] = vol.at(z, y, x);
                    }
                }
            }
            LabelVolume::new(g, LabelSchema::Ten, data).unwrap()
        };
        let c0 = heart_center(&place([0; 3])).unwrap();
        let c1 = heart_center(&place([t.0, t.1, t.2])).unwrap();
        prop_assert_eq!(c1, [c0[0] + t.0, c0[1] + t.1, c0[2] + t.2]);
    }

    #[test]
    fn fitted_labels_lie_inside_target(len in 20usize..70, a in 0usize..10, b in 0usize..10, target in 12usize..40) {
        let (img, lab) = bar_case(len, a..len - b);
        let fit = fit_field_of_view(&img, &lab, [target, 3, 3], &FovOptions::default()).unwrap();
        prop_assert_eq!(fit.labels.dims(), [target, 3, 3]);
        prop_assert!(fit.labels.foreground_count() > 0);
        let (lo, hi) = fit.labels.foreground_bounds().unwrap();
        prop_assert!(hi[0] - lo[0] < target);
        let resampled = if fit.iterations == 0 { lab.clone() } else { resample_isotropic(&lab, fit.spacing).unwrap() };
        prop_assert_eq!(fit.labels.foreground_count(), resampled.foreground_count());
    }
}
