//! Cumulative composite Simpson quadrature on sampled data.
//!
//! Even-indexed nodes carry the composite Simpson sum over node pairs. An
//! odd-indexed node adds the integral of the cubic through four neighbouring
//! nodes over its half pair, so every node is exact for cubics.

/// Weights of the Lagrange interpolant through `xs`, integrated over `[a, b]`.
fn lagrange_weights<const K: usize>(xs: [f64; K], a: f64, b: f64) -> [f64; K] {
    // shift to the first node for conditioning
    let c = xs[0];
    let t: [f64; K] = xs.map(|x| x - c);
    let (lo, hi) = (a - c, b - c);
    let mut out = [0.0; K];
    for j in 0..K {
        // coefficients of prod_{m != j} (x - t_m) / (t_j - t_m), lowest first
        let mut poly = [0.0; K];
        poly[0] = 1.0;
        let mut deg = 0;
        let mut denom = 1.0;
        for m in 0..K {
            if m == j {
                continue;
            }
            for k in (0..=deg).rev() {
                poly[k + 1] += poly[k];
                poly[k] *= -t[m];
            }
            deg += 1;
            denom *= t[j] - t[m];
        }
        let mut integral = 0.0;
        for (k, coef) in poly.iter().enumerate() {
            let p = (k + 1) as i32;
            integral += coef * (hi.powi(p) - lo.powi(p)) / f64::from(p);
        }
        out[j] = integral / denom;
    }
    out
}

fn dot<const K: usize>(w: [f64; K], y: &[f64]) -> f64 {
    w.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Running integral `I[i] = int_{x[0]}^{x[i]} y` on a strictly increasing grid.
pub fn cumulative_simpson(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len(), "abscissae and ordinates differ in length");
    let n = x.len();
    let mut out = vec![0.0; n];
    match n {
        0 | 1 => return out,
        2 => {
            out[1] = 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
            return out;
        }
        3 => {
            let w = lagrange_weights([x[0], x[1], x[2]], x[0], x[1]);
            out[1] = dot(w, y);
            out[2] = dot(lagrange_weights([x[0], x[1], x[2]], x[0], x[2]), y);
            return out;
        }
        _ => {}
    }
    let half = |i: usize| -> f64 {
        // cubic through four nodes around [x_i, x_(i+1)]
        let s = if i + 3 < n { i } else { n - 4 };
        let w = lagrange_weights([x[s], x[s + 1], x[s + 2], x[s + 3]], x[i], x[i + 1]);
        dot(w, &y[s..s + 4])
    };
    let mut i = 0;
    while i + 2 < n {
        let full = lagrange_weights([x[i], x[i + 1], x[i + 2]], x[i], x[i + 2]);
        out[i + 1] = out[i] + half(i);
        out[i + 2] = out[i] + dot(full, &y[i..i + 3]);
        i += 2;
    }
    if i + 1 < n {
        out[i + 1] = out[i] + half(i);
    }
    out
}

/// Integral over the whole grid.
pub fn simpson(x: &[f64], y: &[f64]) -> f64 {
    cumulative_simpson(x, y).last().copied().unwrap_or(0.0)
}

/// Uniform-spacing specialisation of [`cumulative_simpson`]; the fixed-point
/// iterations call this on grids of up to a million nodes.
pub fn cumulative_simpson_uniform(h: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut out = vec![0.0; n];
    match n {
        0 | 1 => return out,
        2 => {
            out[1] = 0.5 * h * (y[0] + y[1]);
            return out;
        }
        3 => {
            out[1] = h / 12.0 * (5.0 * y[0] + 8.0 * y[1] - y[2]);
            out[2] = h / 3.0 * (y[0] + 4.0 * y[1] + y[2]);
            return out;
        }
        _ => {}
    }
    let third = h / 3.0;
    let c24 = h / 24.0;
    let mut i = 0;
    while i + 2 < n {
        let (y0, y1, y2) = (y[i], y[i + 1], y[i + 2]);
        out[i + 1] = out[i]
            + if i + 3 < n {
                c24 * (9.0 * y0 + 19.0 * y1 - 5.0 * y2 + y[i + 3])
            } else {
                c24 * (-y[i - 1] + 13.0 * y0 + 13.0 * y1 - y2)
            };
        out[i + 2] = out[i] + third * (y0 + 4.0 * y1 + y2);
        i += 2;
    }
    if i + 1 < n {
        out[i + 1] = out[i] + c24 * (y[i - 2] - 5.0 * y[i - 1] + 19.0 * y[i] + 9.0 * y[i + 1]);
    }
    out
}
#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(x: f64) -> f64 {
        1.0 - 2.0 * x + 3.0 * x * x - 0.5 * x * x * x
    }

    fn cubic_int(x: f64) -> f64 {
        x - x * x + x * x * x - 0.125 * x.powi(4)
    }

    #[test]
    fn uniform_exact_on_quadratics_at_every_node() {
        let h = 0.1;
        let x: Vec<f64> = (0..12).map(|i| i as f64 * h).collect();
        let y: Vec<f64> = x.iter().map(|&t| 2.0 + t - 3.0 * t * t).collect();
        let i = cumulative_simpson_uniform(h, &y);
        for (k, &t) in x.iter().enumerate() {
            let exact = 2.0 * t + 0.5 * t * t - t * t * t;
            assert!((i[k] - exact).abs() < 1e-13, "node {k}");
        }
    }

    #[test]
    fn uniform_simpson_exact_on_cubics_at_even_nodes() {
        let h = 0.05;
        let y: Vec<f64> = (0..21).map(|i| cubic(i as f64 * h)).collect();
        let i = cumulative_simpson_uniform(h, &y);
        for k in (0..21).step_by(2) {
            assert!((i[k] - cubic_int(k as f64 * h)).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_on_cubics_at_every_node() {
        for count in [4usize, 5, 6, 7, 12, 13] {
            let h = 0.07;
            let x: Vec<f64> = (0..count).map(|i| 0.3 + i as f64 * h).collect();
            let y: Vec<f64> = x.iter().map(|&t| cubic(t)).collect();
            let xg: Vec<f64> = x.iter().map(|t| t * t).collect();
            // graded grids: pairs are quadratic-exact, half pairs cubic-exact
            let quad = |t: f64| 2.0 - t + 0.5 * t * t;
            let quad_int = |t: f64| 2.0 * t - 0.5 * t * t + t * t * t / 6.0;
            let yg: Vec<f64> = xg.iter().map(|&t| quad(t)).collect();
            let u = cumulative_simpson_uniform(h, &y);
            let g = cumulative_simpson(&xg, &yg);
            for k in 0..count {
                assert!((u[k] - (cubic_int(x[k]) - cubic_int(x[0]))).abs() < 1e-13, "uniform {count} node {k}");
                assert!((g[k] - (quad_int(xg[k]) - quad_int(xg[0]))).abs() < 1e-13, "graded {count} node {k}");
            }
        }
    }

    #[test]
    fn nonuniform_matches_uniform_on_uniform_grid() {
        let h = 0.03;
        let x: Vec<f64> = (0..17).map(|i| 0.2 + i as f64 * h).collect();
        let y: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let a = cumulative_simpson(&x, &y);
        let b = cumulative_simpson_uniform(h, &y);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn nonuniform_fourth_order_on_geometric_grid() {
        // int_1^10 exp(-x/4) dx on geometric grids; error should drop ~16x per halving
        let exact = 4.0 * ((-0.25f64).exp() - (-2.5f64).exp());
        let err = |m: usize| {
            let x: Vec<f64> = (0..=m).map(|i| 10f64.powf(i as f64 / m as f64)).collect();
            let y: Vec<f64> = x.iter().map(|t| (-t / 4.0).exp()).collect();
            (simpson(&x, &y) - exact).abs()
        };
        let (e1, e2) = (err(40), err(80));
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
        // odd interval counts use the tail rule
        let (e3, e4) = (err(41), err(81));
        assert!(e3 / e4 > 12.0, "ratio {}", e3 / e4);
    }

    #[test]
    fn short_grids() {
        assert_eq!(cumulative_simpson(&[1.0], &[3.0]), vec![0.0]);
        assert_eq!(cumulative_simpson(&[0.0, 2.0], &[1.0, 3.0]), vec![0.0, 4.0]);
        assert_eq!(cumulative_simpson_uniform(1.0, &[]), Vec::<f64>::new());
    }
}
