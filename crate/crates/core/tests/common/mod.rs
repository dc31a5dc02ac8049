//! Test-only oracles. Nothing here calls into the closed-form kinematics.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Pin-joint model of a closed ring of angulated scissor units, solved
/// numerically by Levenberg-Marquardt on the raw constraint residuals.
///
/// Unknowns are the 2D positions of all `3N` joints, ordered
/// `[outer_0..outer_N, pivot_0..pivot_N, inner_0..inner_N]`.
pub struct PinJointRing {
    pub unit_count: usize,
    pub segment_length: f64,
    pub kink_angle: f64,
    /// Chord between adjacent outer joints, which fixes the opening angle.
    pub opening: f64,
}

impl PinJointRing {
    pub fn new(unit_count: usize, segment_length: f64, kink_angle: f64, theta: f64) -> Self {
        Self {
            unit_count,
            segment_length,
            kink_angle,
            opening: theta,
        }
    }

    fn outer(&self, i: usize) -> usize {
        i % self.unit_count
    }
    fn pivot(&self, i: usize) -> usize {
        self.unit_count + i % self.unit_count
    }
    fn inner(&self, i: usize) -> usize {
        2 * self.unit_count + i % self.unit_count
    }

    /// Distance constraints `(joint a, joint b, length)`.
    fn links(&self) -> Vec<(usize, usize, f64)> {
        let l = self.segment_length;
        let across_kink = 2.0 * l * (self.kink_angle / 2.0).sin();
        let mut out = Vec::new();
        for i in 0..self.unit_count {
            let k = self.pivot(i);
            // rod A: outer_i - pivot_i - inner_{i+1}
            out.push((self.outer(i), k, l));
            out.push((k, self.inner(i + 1), l));
            out.push((self.outer(i), self.inner(i + 1), across_kink));
            // rod B: inner_i - pivot_i - outer_{i+1}
            out.push((self.inner(i), k, l));
            out.push((k, self.outer(i + 1), l));
            out.push((self.inner(i), self.outer(i + 1), across_kink));
        }
        out
    }

    pub fn unknowns(&self) -> usize {
        6 * self.unit_count
    }

    /// Residual vector: rod constraints, the opening of unit 0, and a gauge
    /// (outer-joint centroid at the origin, pivot 0 on the ray at π/N).
    pub fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = |j: usize| (x[2 * j], x[2 * j + 1]);
        let dist = |a: usize, b: usize| {
            let (ax, ay) = p(a);
            let (bx, by) = p(b);
            ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
        };
        let mut r = Vec::new();
        for (a, b, len) in self.links() {
            r.push(dist(a, b) - len);
        }
        let chord = 2.0 * self.segment_length * (self.opening / 2.0).sin();
        r.push(dist(self.outer(0), self.outer(1)) - chord);
        let n = self.unit_count as f64;
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..self.unit_count {
            let (px, py) = p(self.outer(i));
            cx += px;
            cy += py;
        }
        r.push(cx / n);
        r.push(cy / n);
        let h = std::f64::consts::PI / n;
        let (kx, ky) = p(self.pivot(0));
        r.push(h.sin() * kx - h.cos() * ky);
        DVector::from_vec(r)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let links = self.links();
        let rows = links.len() + 4;
        let mut j = DMatrix::zeros(rows, self.unknowns());
        let set_link = |row: usize, a: usize, b: usize, j: &mut DMatrix<f64>| {
            let dx = x[2 * a] - x[2 * b];
            let dy = x[2 * a + 1] - x[2 * b + 1];
            let d = (dx * dx + dy * dy).sqrt().max(1e-300);
            j[(row, 2 * a)] += dx / d;
            j[(row, 2 * a + 1)] += dy / d;
            j[(row, 2 * b)] -= dx / d;
            j[(row, 2 * b + 1)] -= dy / d;
        };
        for (row, (a, b, _)) in links.iter().enumerate() {
            set_link(row, *a, *b, &mut j);
        }
        let base = links.len();
        set_link(base, self.outer(0), self.outer(1), &mut j);
        let n = self.unit_count as f64;
        for i in 0..self.unit_count {
            let o = self.outer(i);
            j[(base + 1, 2 * o)] = 1.0 / n;
            j[(base + 2, 2 * o + 1)] = 1.0 / n;
        }
        let h = std::f64::consts::PI / n;
        let k = self.pivot(0);
        j[(base + 3, 2 * k)] = h.sin();
        j[(base + 3, 2 * k + 1)] = -h.cos();
        j
    }

    /// Levenberg-Marquardt from `start`; returns the final point and the
    /// max-abs residual.
    pub fn solve(&self, start: DVector<f64>) -> (DVector<f64>, f64) {
        let mut x = start;
        let mut lambda = 1e-6;
        let mut r = self.residuals(&x);
        let mut cost = r.norm_squared();
        for _ in 0..200 {
            if r.amax() < 1e-14 {
                break;
            }
            let jac = self.jacobian(&x);
            let jt = jac.transpose();
            let jtj = &jt * &jac;
            let g = &jt * &r;
            let mut improved = false;
            for _ in 0..30 {
                let mut a = jtj.clone();
                for d in 0..a.nrows() {
                    a[(d, d)] += lambda * (1.0 + jtj[(d, d)]);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&g));
                let candidate = &x + &step;
                let rc = self.residuals(&candidate);
                let c = rc.norm_squared();
                if c < cost {
                    x = candidate;
                    r = rc;
                    cost = c;
                    lambda = (lambda * 0.1).max(1e-15);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        let amax = r.amax();
        (x, amax)
    }
}

/// Tiny deterministic generator so test oracles do not depend on the
/// crate's RNG plumbing.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

/// Distance from `p` to the segment `a`-`b` in 3D, by dense sampling plus a
/// golden-section polish. Independent of the crate's analytic distance code.
pub fn sampled_point_segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let at = |t: f64| {
        let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])];
        ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt()
    };
    let samples = 64;
    let mut best = (0.0, at(0.0));
    for k in 1..=samples {
        let t = k as f64 / samples as f64;
        let d = at(t);
        if d < best.1 {
            best = (t, d);
        }
    }
    let (mut lo, mut hi) = (
        (best.0 - 1.0 / samples as f64).max(0.0),
        (best.0 + 1.0 / samples as f64).min(1.0),
    );
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if at(m1) < at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    at(0.5 * (lo + hi)).min(best.1)
}
