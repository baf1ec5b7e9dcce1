//! Adaptive integration on top of double-exponential (tanh-sinh) panels.
//!
//! Panels are refined globally by largest error estimate until the summed
//! estimate meets the absolute tolerance.

/// Integral value with an error bound.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Quad {
    type Output = Quad;
    fn add(self, o: Quad) -> Quad {
        Quad {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

/// Panels allowed per call before the current estimate is returned.
const MAX_PANELS: usize = 2000;

struct Panel {
    a: f64,
    b: f64,
    q: Quad,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.q.error == o.q.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.q.error.total_cmp(&o.q.error)
    }
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Quad {
    if a == b {
        return Quad::default();
    }
    if b < a {
        let q = integrate(f, b, a, tol);
        return Quad {
            value: -q.value,
            error: q.error,
        };
    }
    adapt(f, a, b, tol.max(1e-15))
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Panel {
    let o = quadrature::integrate(f, a, b, tol);
    Panel {
        a,
        b,
        q: Quad {
            value: o.integral,
            error: o.error_estimate,
        },
    }
}

// Global refinement: always split the panel with the largest error, so
// noisy integrands cost at most MAX_PANELS panel evaluations.
fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Quad {
    let mut heap = std::collections::BinaryHeap::new();
    let first = panel(f, a, b, 0.5 * tol);
    let mut err = first.q.error;
    heap.push(first);
    let mut n = 1;
    while err > tol && n < MAX_PANELS {
        let worst = heap.pop().expect("non-empty");
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            heap.push(worst);
            break;
        }
        let panel_tol = 0.5 * tol * (worst.b - worst.a) / (b - a);
        let l = panel(f, worst.a, m, panel_tol);
        let r = panel(f, m, worst.b, panel_tol);
        err += l.q.error + r.q.error - worst.q.error;
        heap.push(l);
        heap.push(r);
        n += 1;
    }
    // re-sum to avoid drift in the running error
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    panels.iter().fold(Quad::default(), |acc, p| acc + p.q)
}

/// `∫_a^b f` split at the given interior break points (kinks, table nodes).
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> Quad {
    let n = breaks.len().saturating_sub(1).max(1);
    let mut q = Quad::default();
    for w in breaks.windows(2) {
        q = q + integrate(f, w[0], w[1], tol / n as f64);
    }
    q
}

/// `∫_a^∞ f` through `x = a + s/(1-s)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> Quad {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - s;
        let v = f(a + s / d) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(&g, 0.0, 0.5, tol * 0.5) + integrate(&g, 0.5, 1.0, tol * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let q = integrate(&|x: f64| x * x, 0.0, 3.0, 1e-12);
        assert!((q.value - 9.0).abs() < 1e-12);
        let q = integrate(&|x: f64| (-x).exp(), 0.0, 10.0, 1e-12);
        assert!((q.value - (1.0 - (-10f64).exp())).abs() < 1e-12);
        let q = integrate(&|x: f64| x, 2.0, 0.0, 1e-12);
        assert!((q.value + 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let q = integrate(&|x: f64| x.ln(), 0.0, 1.0, 1e-10);
        assert!((q.value + 1.0).abs() < 1e-9);
    }

    #[test]
    fn kinked_integrand_with_breaks() {
        let f = |x: f64| (x - 0.3).abs();
        let q = integrate_pieces(&f, &[0.0, 0.3, 1.0], 1e-12);
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite() {
        let q = integrate_to_infinity(&|x: f64| 1.0 / (1.0 + x * x), 0.0, 1e-11);
        assert!((q.value - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        let q = integrate_to_infinity(&|x: f64| (-x).exp(), 1.0, 1e-12);
        assert!((q.value - (-1f64).exp()).abs() < 1e-10);
    }
}
