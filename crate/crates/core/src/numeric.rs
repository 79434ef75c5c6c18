//! Small numerical building blocks shared by the quadrature code.

use std::f64::consts::PI;

/// Neumaier compensated sum over an iterator, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]` split into `panels` equal panels.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// Area of the axis-aligned rectangle `[x0,x1]×[y0,y1]` intersected with the
/// disc of radius `r` centred at the origin.
pub fn rect_disc_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    (below_area(x0, x1, y1, r) - below_area(x0, x1, y0, r)).max(0.0)
}

/// Antiderivative of `sqrt(r^2 - x^2)`.
fn half_chord_integral(x: f64, r: f64) -> f64 {
    let x = x.clamp(-r, r);
    0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).asin())
}

fn chord_between(a: f64, b: f64, r: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    half_chord_integral(b, r) - half_chord_integral(a, r)
}

/// Area of `{(x, y) in disc : x0 <= x <= x1, y <= level}`.
fn below_area(x0: f64, x1: f64, level: f64, r: f64) -> f64 {
    let a = x0.max(-r);
    let b = x1.min(r);
    if b <= a {
        return 0.0;
    }
    if level >= r {
        return 2.0 * chord_between(a, b, r);
    }
    if level <= -r {
        return 0.0;
    }
    let c = (r * r - level * level).sqrt();
    // |x| <= c: segment from -s(x) to level has length level + s(x)
    let ia = a.max(-c);
    let ib = b.min(c);
    let mut area = 0.0;
    if ib > ia {
        area += level * (ib - ia) + chord_between(ia, ib, r);
    }
    if level > 0.0 {
        // |x| > c: whole chord lies below the level
        area += 2.0 * chord_between(a, b.min(-c), r);
        area += 2.0 * chord_between(a.max(c), b, r);
    }
    area
}

/// Smooth radial cut-off: 1 on `[0, inner]`, 0 on `[outer, ∞)`, C^∞ between.
pub fn smooth_cutoff(r: f64, inner: f64, outer: f64) -> f64 {
    if r <= inner {
        return 1.0;
    }
    if r >= outer {
        return 0.0;
    }
    let s = (r - inner) / (outer - inner);
    let f = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
    let up = f(s);
    let down = f(1.0 - s);
    down / (up + down)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let pts = composite_gauss(0.0, 2.0, 3, 5);
        let s: f64 = pts.iter().map(|(x, w)| w * x.exp()).sum();
        assert!((s - (2f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn rect_disc_area_cases() {
        let r = 1.3;
        assert!((rect_disc_area(-2.0, 2.0, -2.0, 2.0, r) - PI * r * r).abs() < 1e-13);
        assert!((rect_disc_area(0.0, 2.0, 0.0, 2.0, r) - PI * r * r / 4.0).abs() < 1e-13);
        assert!((rect_disc_area(-0.1, 0.1, -0.2, 0.3, r) - 0.1).abs() < 1e-14);
        assert_eq!(rect_disc_area(1.5, 2.0, 0.0, 1.0, r), 0.0);
        // brute-force oracle on an arbitrary boundary cell
        let (x0, x1, y0, y1) = (0.7, 1.1, -1.0, -0.45);
        let n = 2000;
        let mut hits = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = x0 + (i as f64 + 0.5) * (x1 - x0) / n as f64;
                let y = y0 + (j as f64 + 0.5) * (y1 - y0) / n as f64;
                if x * x + y * y <= r * r {
                    hits += 1;
                }
            }
        }
        let mc = hits as f64 / (n * n) as f64 * (x1 - x0) * (y1 - y0);
        assert!((rect_disc_area(x0, x1, y0, y1, r) - mc).abs() < 1e-4);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn cutoff_is_monotone() {
        let mut prev = 1.0;
        for i in 0..=100 {
            let c = smooth_cutoff(i as f64 / 100.0, 0.25, 0.75);
            assert!(c <= prev + 1e-15);
            prev = c;
        }
        assert_eq!(smooth_cutoff(0.1, 0.25, 0.75), 1.0);
        assert_eq!(smooth_cutoff(0.8, 0.25, 0.75), 0.0);
    }
}
