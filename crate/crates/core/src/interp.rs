//! Natural cubic spline on uniformly spaced samples.

#[derive(Debug, Clone)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl UniformSpline {
    pub fn new(x0: f64, h: f64, y: &[f64]) -> Self {
        let n = y.len();
        assert!(n >= 3, "spline needs at least three samples");
        // Tridiagonal system m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]) / h^2
        // with m[0] = m[n-1] = 0, solved by the Thomas algorithm.
        let mut m = vec![0.0; n];
        let inner = n - 2;
        let mut c = vec![0.0; inner];
        let mut d = vec![0.0; inner];
        let scale = 6.0 / (h * h);
        for k in 0..inner {
            let i = k + 1;
            let rhs = scale * ((y[i + 1] + y[i - 1]) - 2.0 * y[i]);
            if k == 0 {
                c[k] = 0.25;
                d[k] = rhs / 4.0;
            } else {
                let denom = 4.0 - c[k - 1];
                c[k] = 1.0 / denom;
                d[k] = (rhs - d[k - 1]) / denom;
            }
        }
        for k in (0..inner).rev() {
            let next = if k + 1 < inner { m[k + 2] } else { 0.0 };
            m[k + 1] = d[k] - c[k] * next;
        }
        Self {
            x0,
            h,
            y: y.to_vec(),
            m,
        }
    }

    fn segment(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.y.len();
        let t = (x - self.x0) / self.h;
        if !(t >= 0.0 && t <= (n - 1) as f64) {
            return None;
        }
        let i = (t.floor() as usize).min(n - 2);
        Some((i, t - i as f64))
    }

    /// Value and first derivative at `x`; outside the knot range the end
    /// value is held constant with zero slope.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.y.len();
        let Some((i, t)) = self.segment(x) else {
            let end = if x < self.x0 { self.y[0] } else { self.y[n - 1] };
            return (end, 0.0);
        };
        let h = self.h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let a = 1.0 - t;
        let value = a * y0 + t * y1 + h * h / 6.0 * ((a * a * a - a) * m0 + (t * t * t - t) * m1);
        let slope = (y1 - y0) / h + h / 6.0 * ((1.0 - 3.0 * a * a) * m0 + (3.0 * t * t - 1.0) * m1);
        (value, slope)
    }
}
