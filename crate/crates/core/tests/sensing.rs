mod common;

use common::{march, random_box_world};
use gaitguide::world_sense::{simulate_lidar, NO_RETURN};
use gaitguide::Pose;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn raycasts_agree_with_marching_oracle() {
    let sigma = 0.02;
    let tol = f64::max(3.0 * sigma, 0.05);
    let mut beams = 0;
    let mut seed = 0;
    while beams < 1000 {
        let w = random_box_world(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let pose = loop {
            let p = Pose::new(rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0), rng.gen_range(-3.1..3.1));
            if w.clearance(p.position()) > 0.05 {
                break p;
            }
        };
        let scan = simulate_lidar(&pose, &w, 100, seed, 0, sigma).unwrap();
        for i in 0..scan.n_beams {
            let oracle = march(&w, pose.position(), pose.heading + scan.beam_angle(i), 30.0);
            match oracle {
                Some(d) => assert!((scan.ranges[i] - d).abs() <= tol, "seed {seed} beam {i}: {} vs {d}", scan.ranges[i]),
                None => assert_eq!(scan.ranges[i], NO_RETURN),
            }
            beams += 1;
        }
        seed += 1;
    }
}

#[test]
fn lidar_is_replay_deterministic() {
    let w = random_box_world(3);
    let p = Pose::new(0.5, 0.5, 0.3);
    for tick in 0..5 {
        let a = simulate_lidar(&p, &w, 360, 11, tick, 0.02).unwrap();
        let b = simulate_lidar(&p, &w, 360, 11, tick, 0.02).unwrap();
        assert_eq!(a, b);
    }
    let a = simulate_lidar(&p, &w, 360, 11, 0, 0.02).unwrap();
    let b = simulate_lidar(&p, &w, 360, 11, 1, 0.02).unwrap();
    assert_ne!(a.ranges, b.ranges);
}

proptest! {
    #[test]
    fn mirrored_world_mirrors_scan(seed in 0u64..200, x in -8.0f64..8.0, y in -8.0f64..8.0, h in -3.1f64..3.1, n in 3usize..400) {
        let w = random_box_world(seed);
        let pose = Pose::new(x, y, h);
        prop_assume!(w.clearance(pose.position()) > 0.01);
        let m = w.mirrored_y();
        let mp = Pose::new(x, -y, -h);
        let a = simulate_lidar(&pose, &w, n, 0, 0, 0.0).unwrap();
        let b = simulate_lidar(&mp, &m, n, 0, 0, 0.0).unwrap();
        for i in 0..n {
            let (ra, rb) = (a.ranges[i], b.ranges[n - 1 - i]);
            prop_assert_eq!(ra, rb, "beam {}", i);
        }
    }
}
