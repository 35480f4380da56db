use cardiorefine_core::labels::{
    connected_components, dilate, extract_pav, parcellate_la_boxes, split_by_plane, BinaryMask, Connectivity,
};
use cardiorefine_core::phantom::{generate_phantom, PhantomParams};
use cardiorefine_core::preprocess::{fit_field_of_view, resample_isotropic, FovOptions};
use cardiorefine_core::{LabelSchema, LabelVolume, Structure, Volume};

fn mask(l: &LabelVolume, s: Structure) -> BinaryMask {
    BinaryMask::from_label(l, l.schema().id_of(s).unwrap())
}

#[test]
fn bit_identical_for_equal_seeds() {
    for seed in [0, 17, 123] {
        let a = generate_phantom(&PhantomParams::standard(seed)).unwrap();
        let b = generate_phantom(&PhantomParams::standard(seed)).unwrap();
        assert_eq!(a.labels.data(), b.labels.data());
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.intensity.data()), bits(b.intensity.data()));
        assert_eq!(a.annotations, b.annotations);
    }
}

#[test]
fn single_objects_are_connected_and_attached() {
    for seed in 0..60 {
        let ph = generate_phantom(&PhantomParams::standard(seed)).unwrap();
        let l = &ph.labels;
        assert_eq!(l.schema(), LabelSchema::Ten);
        for s in [
            Structure::LV,
            Structure::LVMyo,
            Structure::RV,
            Structure::RA,
            Structure::AA,
            Structure::PA,
            Structure::LAbody,
            Structure::LAA,
        ] {
            assert_eq!(connected_components(&mask(l, s), Connectivity::Vertex26).len(), 1, "seed {seed} {s}");
        }
        let touches = |a: Structure, b: Structure| {
            let grown = dilate(&mask(l, a), Connectivity::Face6, 1);
            !grown.and(&mask(l, b)).none()
        };
        assert!(touches(Structure::PA, Structure::RV), "seed {seed}");
        for part in [Structure::LPV, Structure::RPV, Structure::LAA] {
            assert!(touches(part, Structure::LAbody), "seed {seed} {part}");
        }
        // the wall encloses the cavity: no LV voxel touches anything but LV/LVMyo
        let lv_id = LabelSchema::Ten.id_of(Structure::LV).unwrap();
        let myo_id = LabelSchema::Ten.id_of(Structure::LVMyo).unwrap();
        let grown = dilate(&mask(l, Structure::LV), Connectivity::Vertex26, 1);
        assert!(grown.indices().all(|i| l.data()[i] == lv_id || l.data()[i] == myo_id));
    }
}

#[test]
fn intensity_means_match_model() {
    let params = PhantomParams::standard(3);
    let ph = generate_phantom(&params).unwrap();
    let sd = params.intensity.noise_sd;
    let ten = LabelSchema::Ten;
    for (id, s) in ten.entries() {
        let vals: Vec<f64> = ph
            .labels
            .data()
            .iter()
            .zip(ph.intensity.data())
            .filter(|(&l, _)| l == id)
            .map(|(_, &v)| v as f64)
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let want = params.intensity.mean_of(s);
        assert!((mean - want).abs() <= 3.0 * sd / n.sqrt(), "{s}: {mean} vs {want} (n={n})");
    }
}

#[test]
fn ten_map_rebuilt_from_six_and_annotations() {
    for seed in 0..8 {
        let ph = generate_phantom(&PhantomParams::standard(seed)).unwrap();
        let six = ph.labels.merge_into(LabelSchema::Six).unwrap();
        let rv = LabelSchema::Six.id_of(Structure::RV).unwrap();
        let pa = LabelSchema::Seven.id_of(Structure::PA).unwrap();
        let seven = split_by_plane(&six, rv, &ph.annotations.plane, rv, pa, LabelSchema::Seven).unwrap();
        let ten = parcellate_la_boxes(&seven, &ph.annotations.boxes).unwrap();
        assert_eq!(ten, ph.labels, "seed {seed}");
        assert_eq!(ten.foreground_count(), six.foreground_count());
    }
}

#[test]
fn valve_band_hugs_the_plane() {
    for seed in 0..20 {
        let ph = generate_phantom(&PhantomParams::standard(seed)).unwrap();
        let seven = ph.labels.merge_into(LabelSchema::Seven).unwrap();
        let pav = extract_pav(&seven, Connectivity::Face6).unwrap();
        assert!(!pav.none());
        let g = seven.geometry();
        for i in pav.indices() {
            let d = ph.annotations.plane.signed_distance(g.physical(g.coord(i)));
            assert!(d.abs() <= g.spacing[0], "seed {seed}: {d}");
        }
    }
}

#[test]
fn standard_preset_fits_at_one_millimetre() {
    let ph = generate_phantom(&PhantomParams::standard(0)).unwrap();
    let img = resample_isotropic(&ph.intensity, 1.0).unwrap();
    let lab = resample_isotropic(&ph.labels, 1.0).unwrap();
    assert_eq!(lab.dims(), [128, 192, 192]);
    let fit = fit_field_of_view(&img, &lab, [128, 192, 192], &FovOptions::default()).unwrap();
    assert_eq!(fit.iterations, 0);
}

#[test]
fn large_preset_needs_coarsening() {
    let ph = generate_phantom(&PhantomParams::large(0)).unwrap();
    let (lo, hi) = ph.labels.foreground_bounds().unwrap();
    let z_extent_mm = (hi[0] - lo[0] + 1) as f64 * 5.0;
    assert!(z_extent_mm > 128.0, "{z_extent_mm}");
    // a cheaper stand-in for 1 mm: fit at 2 mm into a 64-slice window
    let img = resample_isotropic(&ph.intensity, 2.0).unwrap();
    let lab = resample_isotropic(&ph.labels, 2.0).unwrap();
    let fit = fit_field_of_view(&img, &lab, [64, 96, 96], &FovOptions::default()).unwrap();
    assert!(fit.iterations >= 1);
}

#[test]
fn other_spacings_keep_anatomy() {
    let ph = generate_phantom(&PhantomParams::with_spacing(2, 2.0)).unwrap();
    assert_eq!(ph.labels.dims(), [64, 96, 96]);
    for s in LabelSchema::Ten.structures() {
        assert!(ph.labels.count_structure(*s) > 0, "{s}");
    }
}
