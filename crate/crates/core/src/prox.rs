//! Closed-form Euclidean projections used by the solver.

/// Projection onto the unit simplex `{x >= 0, sum x = 1}` (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    let mut scratch = Vec::with_capacity(v.len());
    project_simplex_in_place(&mut out, &mut scratch);
    out
}

pub fn project_simplex_in_place(v: &mut [f64], scratch: &mut Vec<f64>) {
    if v.is_empty() {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in scratch.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if x - candidate > 0.0 {
            theta = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Projection onto the box `{|g_d| <= bound}`.
pub fn project_box(g: &mut [f64], bound: f64) {
    for v in g.iter_mut() {
        *v = v.clamp(-bound, bound);
    }
}

/// Projection onto the Euclidean ball of the given radius.
pub fn project_ball(g: &mut [f64], radius: f64) {
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > radius {
        let s = if n > 0.0 { radius / n } else { 0.0 };
        g.iter_mut().for_each(|v| *v *= s);
    }
}

/// Projection of `(g, t)` onto the epigraph `{t >= a |g|^2}` for `a > 0`.
///
/// For infeasible points the projected gradient is `g * r / |g|` where `r` is
/// the unique positive root of `2 a^2 r^3 + (1 - 2 a t) r - |g| = 0`; the
/// cubic is convex on `r >= 0`, so Newton from `r = |g|` decreases
/// monotonically onto the root.
pub fn project_parabola_epigraph(g: &mut [f64], t: &mut f64, a: f64) {
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if *t >= a * gn * gn {
        return;
    }
    if gn == 0.0 {
        *t = 0.0;
        return;
    }
    let c3 = 2.0 * a * a;
    let c1 = 1.0 - 2.0 * a * *t;
    let mut r = gn;
    for _ in 0..100 {
        let f = c3 * r * r * r + c1 * r - gn;
        let df = 3.0 * c3 * r * r + c1;
        let next = r - f / df;
        if !(next < r) {
            break;
        }
        r = next;
    }
    let s = r / gn;
    g.iter_mut().for_each(|v| *v *= s);
    *t = a * r * r;
}
