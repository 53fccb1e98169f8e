mod common;

use std::collections::BTreeMap;

use mitoseg::denoise::{apply_kernels, restore_slices, Frame, KernelField, NoiseMask};
use mitoseg::Volume;
use proptest::prelude::*;
use rand::Rng;

fn random_frame(h: usize, w: usize, rng: &mut impl Rng) -> Frame {
    Frame::new(h, w, (0..h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
}

/// Nonnegative kernels normalized jointly per pixel.
fn random_field(h: usize, w: usize, k: usize, rng: &mut impl Rng) -> KernelField {
    let kk = k * k;
    let mut k1 = Vec::with_capacity(h * w * kk);
    let mut k2 = Vec::with_capacity(h * w * kk);
    for _ in 0..h * w {
        let raw: Vec<f64> = (0..2 * kk)
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let s: f64 = raw.iter().sum::<f64>().max(1e-12);
        let raw: Vec<f64> = if s <= 1e-12 {
            (0..2 * kk).map(|i| f64::from(u8::from(i == 0))).collect()
        } else {
            raw.iter().map(|v| v / s).collect()
        };
        k1.extend(raw[..kk].iter().map(|&v| v as f32));
        k2.extend(raw[kk..].iter().map(|&v| v as f32));
    }
    KernelField::new(k, h, w, k1, k2).unwrap()
}

/// Min and max of both frames over the k×k window around `(y, x)`.
fn window_bounds(prev: &Frame, next: &Frame, y: usize, x: usize, r: usize) -> (f32, f32) {
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for yy in y - r..=y + r {
        for xx in x - r..=x + r {
            for f in [prev, next] {
                lo = lo.min(f.get(yy, xx));
                hi = hi.max(f.get(yy, xx));
            }
        }
    }
    (lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interior_output_is_a_convex_combination(
        k in prop::sample::select(vec![1usize, 3, 5]),
        h in 5usize..12, w in 5usize..12,
        seed in any::<u64>(),
    ) {
        let mut r = common::rng(seed);
        let prev = random_frame(h, w, &mut r);
        let next = random_frame(h, w, &mut r);
        let kf = random_field(h, w, k, &mut r);
        let out = apply_kernels(&prev, &next, &kf).unwrap();
        let rad = k / 2;
        for y in rad..h - rad {
            for x in rad..w - rad {
                let (lo, hi) = window_bounds(&prev, &next, y, x, rad);
                let (k1, k2) = kf.kernels_at(y, x);
                let slack = (k1.iter().chain(k2).map(|&v| f64::from(v)).sum::<f64>() - 1.0).abs() as f32 + 1e-6;
                let v = out.get(y, x);
                prop_assert!(v >= lo - slack && v <= hi + slack, "({}, {}): {} not in [{}, {}]", y, x, v, lo, hi);
            }
        }
    }

    #[test]
    fn far_pixels_do_not_matter(h in 7usize..12, w in 7usize..12, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let prev = random_frame(h, w, &mut r);
        let next = random_frame(h, w, &mut r);
        let kf = random_field(h, w, 3, &mut r);
        let base = apply_kernels(&prev, &next, &kf).unwrap();
        let (py, px) = (r.random_range(0..h), r.random_range(0..w));
        let mut p2 = prev.clone();
        let mut n2 = next.clone();
        p2.data[py * w + px] += 5.0;
        n2.data[py * w + px] -= 5.0;
        let moved = apply_kernels(&p2, &n2, &kf).unwrap();
        for y in 0..h {
            for x in 0..w {
                if y.abs_diff(py) > 1 || x.abs_diff(px) > 1 {
                    prop_assert_eq!(base.get(y, x).to_bits(), moved.get(y, x).to_bits());
                }
            }
        }
    }

    #[test]
    fn masked_select_and_idempotence(d in 3usize..6, h in 2usize..6, w in 2usize..6, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let vol = common::random_probability([d, h, w], &mut r);
        let mut masks = BTreeMap::new();
        let mut kernels = BTreeMap::new();
        for z in 1..d - 1 {
            if r.random_bool(0.6) {
                let data = (0..h * w).map(|_| u8::from(r.random_bool(0.5))).collect();
                masks.insert(z, NoiseMask::new(h, w, data).unwrap());
                kernels.insert(z, random_field(h, w, 3, &mut r));
            }
        }
        let out = restore_slices(&vol, &masks, &kernels).unwrap();
        // Per-pixel select against a direct application.
        for z in 0..d {
            let restored = masks.get(&z).map(|_| {
                apply_kernels(&Frame::from_slice(&vol, z - 1), &Frame::from_slice(&vol, z + 1), &kernels[&z]).unwrap()
            });
            for i in 0..h * w {
                let expect = match (&restored, masks.get(&z)) {
                    (Some(f), Some(m)) if m.data[i] == 1 => f.data[i],
                    _ => vol.slice_z(z)[i],
                };
                prop_assert_eq!(out.slice_z(z)[i].to_bits(), expect.to_bits());
            }
        }
        prop_assert_eq!(restore_slices(&vol, &masks, &kernels).unwrap(), out);
    }
}

#[test]
fn checkerboard_interleaves() {
    let vol = Volume::from_fn([3, 4, 4], |z, y, x| (z * 100 + y * 4 + x) as f32);
    let data = (0..16).map(|i| ((i / 4 + i % 4) % 2) as u8).collect();
    let masks: BTreeMap<_, _> = [(1, NoiseMask::new(4, 4, data).unwrap())].into();
    let kernels: BTreeMap<_, _> = [(1, KernelField::delta(4, 4, 13, 0.5, 0.5).unwrap())].into();
    let out = restore_slices(&vol, &masks, &kernels).unwrap();
    for y in 0..4 {
        for x in 0..4 {
            let expect = if (y + x) % 2 == 1 {
                (vol.get(0, y, x) + vol.get(2, y, x)) / 2.0
            } else {
                vol.get(1, y, x)
            };
            assert_eq!(out.get(1, y, x), expect);
        }
    }
    assert_eq!(out.slice_z(0), vol.slice_z(0));
    assert_eq!(out.slice_z(2), vol.slice_z(2));
}

#[test]
fn border_uses_zero_padding() {
    let (h, w, k) = (4, 5, 3);
    let tap = 1.0 / 18.0;
    let kf = KernelField::uniform(h, w, &[tap; 9], &[tap; 9]).unwrap();
    let f = Frame::filled(h, w, 9.0);
    let out = apply_kernels(&f, &f, &kf).unwrap();
    // Corners see 4 of 9 taps per frame, edges 6, interior 9.
    assert!((out.get(0, 0) - 4.0).abs() < 1e-5);
    assert!((out.get(0, 2) - 6.0).abs() < 1e-5);
    assert!((out.get(1, 1) - 9.0).abs() < 1e-5);
    assert_eq!(kf.k(), k);
}

#[test]
fn kernel_files_round_trip() {
    let mut r = common::rng(8);
    let kf = random_field(3, 4, 5, &mut r);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("z7.emv");
    kf.save(&p, 7).unwrap();
    assert!(dir.path().join("z7.json").exists());
    let (z, back) = KernelField::load(&p).unwrap();
    assert_eq!(z, 7);
    assert_eq!(back, kf);
}

#[test]
fn empty_mask_set_is_identity() {
    let mut r = common::rng(2);
    let vol = Volume::from_fn([4, 6, 6], |_, _, _| r.random::<u16>());
    let out = restore_slices(&vol, &BTreeMap::new(), &BTreeMap::new()).unwrap();
    assert_eq!(out, vol);
}
