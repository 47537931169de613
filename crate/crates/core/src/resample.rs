//! Corner-aligned bilinear resampling of single-channel planes.

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    let v = a + (b - a) * t;
    // keep the result inside [min(a, b), max(a, b)] despite rounding
    v.clamp(a.min(b), a.max(b))
}

fn source_coord(i: usize, from: usize, to: usize) -> (usize, usize, f64) {
    if to == 1 || from == 1 {
        return (0, 0, 0.0);
    }
    let pos = i as f64 * (from - 1) as f64 / (to - 1) as f64;
    let lo = (pos.floor() as usize).min(from - 1);
    let hi = (lo + 1).min(from - 1);
    (lo, hi, pos - lo as f64)
}

/// Resize a row-major `height x width` plane to `out_h x out_w`.
/// Output corners coincide with input corners.
pub fn bilinear(src: &[f64], height: usize, width: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    debug_assert_eq!(src.len(), height * width);
    let cols: Vec<_> = (0..out_w).map(|x| source_coord(x, width, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let (y0, y1, fy) = source_coord(y, height, out_h);
        let (r0, r1) = (&src[y0 * width..][..width], &src[y1 * width..][..width]);
        for &(x0, x1, fx) in &cols {
            let top = lerp(r0[x0], r0[x1], fx);
            let bottom = lerp(r1[x0], r1[x1], fx);
            out.push(lerp(top, bottom, fy));
        }
    }
    out
}
