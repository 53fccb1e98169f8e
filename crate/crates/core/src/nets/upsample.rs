use super::Tensor5;

/// Linear interpolation weights for one axis, align-corners = false.
fn axis_table(input: usize, scale: usize) -> Vec<(usize, usize, f32)> {
    (0..input * scale)
        .map(|o| {
            let src = ((o as f64 + 0.5) / scale as f64 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, (src - i0 as f64) as f32)
        })
        .collect()
}

/// Separable trilinear upsampling by integer factors `(sd, sh, sw)`.
///
/// Uses the `a + t * (b - a)` form so constant regions stay exactly constant.
pub fn trilinear_upsample(x: &Tensor5, scale: [usize; 3]) -> Tensor5 {
    assert!(!scale.contains(&0), "upsampling scale must be positive");
    let [n, c, d, h, w] = x.dims();
    let (od, oh, ow) = (d * scale[0], h * scale[1], w * scale[2]);
    let tz = axis_table(d, scale[0]);
    let ty = axis_table(h, scale[1]);
    let tx = axis_table(w, scale[2]);
    let src = x.as_slice();

    // Along x.
    let mut a = Vec::with_capacity(n * c * d * h * ow);
    for row in src.chunks_exact(w) {
        a.extend(
            tx.iter()
                .map(|&(i0, i1, t)| row[i0] + t * (row[i1] - row[i0])),
        );
    }
    // Along y.
    let mut b = Vec::with_capacity(n * c * d * oh * ow);
    for plane in a.chunks_exact(h * ow) {
        for &(i0, i1, t) in &ty {
            let (r0, r1) = (&plane[i0 * ow..][..ow], &plane[i1 * ow..][..ow]);
            b.extend(r0.iter().zip(r1).map(|(&p, &q)| p + t * (q - p)));
        }
    }
    drop(a);
    // Along z.
    let slab = oh * ow;
    let mut out = Vec::with_capacity(n * c * od * slab);
    for vol in b.chunks_exact(d * slab) {
        for &(i0, i1, t) in &tz {
            let (s0, s1) = (&vol[i0 * slab..][..slab], &vol[i1 * slab..][..slab]);
            out.extend(s0.iter().zip(s1).map(|(&p, &q)| p + t * (q - p)));
        }
    }
    Tensor5::new([n, c, od, oh, ow], out).expect("upsampled dims")
}
