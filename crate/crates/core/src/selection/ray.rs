//! Depth picks along a ray through the density field.

use crate::error::{Error, Result};
use crate::field::{DensityField, GridBox};
use crate::geometry::{Ray, Vec3};

/// Parameter interval `[t0, t1]`, `t0 >= 0`, over which the ray is inside
/// the box, or `None` on a miss.
pub fn clip_ray_to_box(ray: &Ray, grid: &GridBox) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        let (o, d) = (ray.origin[a], ray.direction[a]);
        if d == 0.0 {
            if o < grid.min[a] || o > grid.max[a] {
                return None;
            }
            continue;
        }
        let (mut lo, mut hi) = ((grid.min[a] - o) / d, (grid.max[a] - o) / d);
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    (t0 <= t1).then_some((t0, t1))
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("ray step", "must be positive"))
    }
}

/// Fixed-step parameters `t0, t0 + step, ...` not beyond `t1`.
fn step_params(t0: f64, t1: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = ((t1 - t0) / step).floor() as usize;
    (0..=n).map(move |k| t0 + k as f64 * step).filter(move |&t| t <= t1)
}

/// Roots in `(0, 3)` of the derivative of the cubic through `f` sampled at
/// `u = 0, 1, 2, 3`.
fn cubic_critical_points(f: [f64; 4]) -> impl Iterator<Item = f64> {
    let d1 = f[1] - f[0];
    let d2 = f[2] - 2.0 * f[1] + f[0];
    let d3 = f[3] - 3.0 * f[2] + 3.0 * f[1] - f[0];
    // f'(u) = a u^2 + b u + c from the Newton forward form
    let (a, b, c) = (0.5 * d3, d2 - d3, d1 - 0.5 * d2 + d3 / 3.0);
    let scale = a.abs().max(b.abs()).max(c.abs());
    let mut roots = [f64::NAN; 2];
    if scale > 0.0 {
        if a.abs() <= 1e-12 * scale {
            if b != 0.0 {
                roots[0] = -c / b;
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                roots[0] = q / a;
                if q != 0.0 {
                    roots[1] = c / q;
                }
            }
        }
    }
    roots.into_iter().filter(|u| *u > 0.0 && *u < 3.0)
}

/// Point of maximum interpolated density along the ray inside the box.
///
/// The ray is walked in fixed steps. Within each step the interpolated
/// density is a piecewise cubic in the ray parameter, one piece per grid
/// cell crossed, so every piece is maximized exactly from its endpoints and
/// critical points. Ties go to the candidate nearest the ray origin. Returns
/// `None` when the ray misses the box or sees no positive density.
pub fn ray_max_density(ray: &Ray, field: &DensityField, step: f64) -> Result<Option<Vec3>> {
    check_step(step)?;
    let grid = &field.grid;
    let Some((t0, t1)) = clip_ray_to_box(ray, grid) else {
        return Ok(None);
    };

    let mut breaks: Vec<f64> = step_params(t0, t1, step).collect();
    breaks.push(t1);
    for a in 0..3 {
        let d = ray.direction[a];
        if d == 0.0 {
            continue;
        }
        for i in 0..grid.resolution[a] {
            let t = (grid.node_coord(a, i) - ray.origin[a]) / d;
            if t > t0 && t < t1 {
                breaks.push(t);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let density = |t: f64| field.sample(&ray.at(t));
    let mut best = (f64::NEG_INFINITY, t0);
    let mut consider = |t: f64, v: f64| {
        if v > best.0 {
            best = (v, t);
        }
    };
    consider(breaks[0], density(breaks[0]));
    for w in breaks.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let h = (tb - ta) / 3.0;
        let f = [density(ta), density(ta + h), density(ta + 2.0 * h), density(tb)];
        let mut interior: Vec<f64> = cubic_critical_points(f).collect();
        interior.sort_by(f64::total_cmp);
        for u in interior {
            let t = ta + h * u;
            consider(t, density(t));
        }
        consider(tb, f[3]);
    }
    Ok((best.0 > 0.0).then(|| ray.at(best.1)))
}

/// Front-to-back accumulation pick.
///
/// Each fixed step adds `rho * step` to the accumulated value. The pick is
/// the end of the steepest accumulation jump: after the largest single-step
/// increase, the sample where the increase falls off most sharply.
pub fn ray_accumulated_jump(ray: &Ray, field: &DensityField, step: f64) -> Result<Option<Vec3>> {
    check_step(step)?;
    let Some((t0, t1)) = clip_ray_to_box(ray, &field.grid) else {
        return Ok(None);
    };
    let ts: Vec<f64> = step_params(t0, t1, step).collect();
    let rise: Vec<f64> = ts.iter().map(|&t| field.sample(&ray.at(t)) * step).collect();
    if rise.iter().all(|&d| d <= 0.0) {
        return Ok(None);
    }
    let mut peak = 0;
    for (k, &d) in rise.iter().enumerate() {
        if d > rise[peak] {
            peak = k;
        }
    }
    let mut pick = peak;
    let mut steepest = f64::INFINITY;
    for k in peak..rise.len().saturating_sub(1) {
        let fall = rise[k + 1] - rise[k];
        if fall < steepest {
            steepest = fall;
            pick = k;
        }
    }
    Ok(Some(ray.at(ts[pick])))
}
