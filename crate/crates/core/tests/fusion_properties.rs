use uip_core::pipeline::*;
use uip_core::skeleton::*;
use uip_core::NUM_PAIRS;

fn setup() -> (Skeleton, SensorPlacement) {
    let skel = Skeleton::standard(1.75).unwrap();
    let placement = SensorPlacement::standard(&skel);
    (skel, placement)
}

#[test]
fn filtering_beats_raw_ranges_on_mixed_motion() {
    let (skel, placement) = setup();
    let clips = generate_motion_suite(5, &["mixed"], &skel, 60.0).unwrap();
    let ds = build_dataset(5, &clips, &skel, &placement, &SimConfig::default(), &FilterConfig::default()).unwrap();
    let (raw, filt) = distance_rmse(&ds.raw[0], &ds.filtered[0]);
    println!("raw  {:?}", raw.map(|v| (v * 1000.0).round() / 1000.0));
    println!("filt {:?}", filt.map(|v| (v * 1000.0).round() / 1000.0));
    let mean = filt.iter().sum::<f64>() / NUM_PAIRS as f64;
    println!("mean filtered {mean:.4}");
    for k in 0..NUM_PAIRS {
        assert!(filt[k] < raw[k], "pair {k}: {} vs {}", filt[k], raw[k]);
    }
    assert!(mean < 0.06);
}

#[test]
fn perfect_inputs_track_within_a_centimetre() {
    let (skel, placement) = setup();
    for kind in ["walk", "squat", "arm-swing", "sit-stand", "idle"] {
        let clips = generate_motion_suite(2, &[kind], &skel, 20.0).unwrap();
        let ds =
            build_dataset(2, &clips, &skel, &placement, &SimConfig::noiseless(), &FilterConfig::default()).unwrap();
        let (_, filt) = distance_rmse(&ds.raw[0], &ds.filtered[0]);
        let worst = filt.iter().cloned().fold(0.0, f64::max);
        println!("{kind}: worst pair RMSE {worst:.5}");
        assert!(worst < 0.01, "{kind}: {filt:?}");
    }
}
