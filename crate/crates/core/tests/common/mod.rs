//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use gaitguide::gait_model::{emit_rope_sample, GaitModel, Leg, RopeGeometry};
use gaitguide::gait_sense::{Recognizer, RecognizerConfig};
use gaitguide::geom::{Bounds, Segment};
use gaitguide::world_sense::{OccupancyGrid, WorldModel};
use gaitguide::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N: usize = 64;

pub fn random_grid(seed: u64) -> (OccupancyGrid, (usize, usize), (usize, usize)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = OccupancyGrid::new(Vec2::new(0.0, 0.0), 1.0, N, N);
    for r in 0..N {
        for c in 0..N {
            if rng.gen_bool(0.3) {
                g.set(c, r, 1.0);
            }
        }
    }
    let mut free = || loop {
        let (c, r) = (rng.gen_range(0..N), rng.gen_range(0..N));
        if !g.is_occupied(c, r) {
            break (c, r);
        }
    };
    let (s, t) = (free(), free());
    (g, s, t)
}

/// Plain Dijkstra with the same move rules: 8-connected, no squeezing past a
/// blocked corner. Returns (straight, diagonal) move counts of a shortest path.
pub fn dijkstra(g: &OccupancyGrid, s: (usize, usize), t: (usize, usize)) -> Option<(u32, u32)> {
    let free = |c: i64, r: i64| c >= 0 && r >= 0 && c < N as i64 && r < N as i64 && !g.is_occupied(c as usize, r as usize);
    let mut dist = vec![f64::INFINITY; N * N];
    let mut counts = vec![(0u32, 0u32); N * N];
    let mut heap = BinaryHeap::new();
    dist[s.1 * N + s.0] = 0.0;
    heap.push(Reverse((0u64, s.1 * N + s.0)));
    while let Some(Reverse((dbits, k))) = heap.pop() {
        let d = f64::from_bits(dbits);
        if d > dist[k] {
            continue;
        }
        let (c, r) = ((k % N) as i64, (k / N) as i64);
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if (dx, dy) == (0, 0) || !free(c + dx, r + dy) {
                    continue;
                }
                let diag = dx != 0 && dy != 0;
                if diag && !(free(c + dx, r) && free(c, r + dy)) {
                    continue;
                }
                let nk = (r + dy) as usize * N + (c + dx) as usize;
                let (ns, nd) = if diag { (counts[k].0, counts[k].1 + 1) } else { (counts[k].0 + 1, counts[k].1) };
                let nd_cost = ns as f64 + nd as f64 * std::f64::consts::SQRT_2;
                if nd_cost < dist[nk] {
                    dist[nk] = nd_cost;
                    counts[nk] = (ns, nd);
                    // Non-negative floats order like their bit patterns.
                    heap.push(Reverse((nd_cost.to_bits(), nk)));
                }
            }
        }
    }
    let k = t.1 * N + t.0;
    dist[k].is_finite().then_some(counts[k])
}

pub fn random_box_world(seed: u64) -> WorldModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = Bounds::new(Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0));
    let mut w = WorldModel::empty(b);
    w.add_box(Vec2::new(-9.5, -9.5), Vec2::new(9.5, 9.5));
    for _ in 0..4 {
        let x = rng.gen_range(-8.0..6.0);
        let y = rng.gen_range(-8.0..6.0);
        let sx = rng.gen_range(0.3..2.0);
        let sy = rng.gen_range(0.3..2.0);
        w.add_box(Vec2::new(x, y), Vec2::new(x + sx, y + sy));
    }
    w
}

/// Marches the ray in 1 mm steps and reports the first step at which it has
/// crossed a segment.
pub fn march(world: &WorldModel, origin: Vec2, angle: f64, max: f64) -> Option<f64> {
    let dir = Vec2::from_angle(angle);
    let side = |s: &Segment, p: Vec2| (s.b - s.a).cross(p - s.a);
    let within = |s: &Segment, p: Vec2| {
        let e = s.b - s.a;
        let t = (p - s.a).dot(e) / e.dot(e);
        (0.0..=1.0).contains(&t)
    };
    let step = 0.001;
    let mut prev = origin;
    let mut t = 0.0;
    while t < max {
        t += step;
        let p = origin + dir * t;
        for s in &world.segments {
            if side(s, prev).signum() != side(s, p).signum() && within(s, p) {
                return Some(t);
            }
        }
        prev = p;
    }
    None
}

pub struct Walk {
    /// Ground-truth heel-strike times per leg.
    pub truth: Vec<(Leg, f64)>,
    /// Recognized step events per leg.
    pub detected: Vec<(Leg, f64)>,
    pub phase_hits: usize,
    pub samples: usize,
}

pub fn simulate(steps: usize, rate_hz: f64, noise: f64, seed: u64, left_fraction: f64) -> Walk {
    let model = GaitModel::default();
    let geom = RopeGeometry::default();
    let mut state = model.initial_state(Vec2::ZERO, 0.0, 0.45, 0.8 / 0.45, left_fraction);
    let mut rec = Recognizer::new(RecognizerConfig::default());
    let dt = 1.0 / rate_hz;
    let mut walk = Walk { truth: vec![], detected: vec![], phase_hits: 0, samples: 0 };
    let mut tick = 0u64;
    // Stop half a step after the last counted heel strike.
    let mut stop_at = f64::INFINITY;
    loop {
        let t = tick as f64 * dt;
        if t > stop_at {
            break;
        }
        let est = rec.ingest(emit_rope_sample(&state, &geom, t, tick, noise, seed)).unwrap();
        for leg in [Leg::Left, Leg::Right] {
            if est.leg(leg).stepped {
                walk.detected.push((leg, t));
            }
            walk.samples += 1;
            if est.leg(leg).phase == state.leg(leg).phase.coarse() {
                walk.phase_hits += 1;
            }
        }
        let (next, events) = model.advance(&state, dt, 0.0, 0.0).unwrap();
        for e in events {
            walk.truth.push((e.leg, t + e.offset));
            if walk.truth.len() == steps {
                stop_at = t + e.offset + 0.5 / state.cadence;
            }
        }
        state = next;
        tick += 1;
    }
    walk
}

/// Rope length by summing the rotated thigh link and the fixed link
/// component-wise.
pub fn rope_length_oracle(theta: f64, l1: Vec2, l2: Vec2) -> f64 {
    let x = theta.cos() * l1.x - theta.sin() * l1.y + l2.x;
    let y = theta.sin() * l1.x + theta.cos() * l1.y + l2.y;
    (x * x + y * y).sqrt()
}
