//! Segment quadrature rules on the reference interval `[0, 1]`.

use crate::mesh::PeriodicMesh;

pub const MAX_POINTS: usize = 10;

/// Rule selection for the error functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Gauss–Legendre with the given number of points (1..=10).
    Gauss(usize),
    /// Composite trapezoid on the given number of equispaced points (>= 2).
    Trapezoid(usize),
}

impl Quadrature {
    pub fn rule(self) -> QuadRule {
        match self {
            Quadrature::Gauss(n) => QuadRule::gauss(n),
            Quadrature::Trapezoid(n) => QuadRule::trapezoid(n),
        }
    }

    pub fn validate(self) -> Result<(), String> {
        match self {
            Quadrature::Gauss(n) if (1..=MAX_POINTS).contains(&n) => Ok(()),
            Quadrature::Trapezoid(n) if n >= 2 => Ok(()),
            other => Err(format!("unsupported quadrature {other:?}")),
        }
    }
}

impl std::fmt::Display for Quadrature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Quadrature::Gauss(n) => write!(f, "gauss{n}"),
            Quadrature::Trapezoid(n) => write!(f, "trapezoid{n}"),
        }
    }
}

impl std::str::FromStr for Quadrature {
    type Err = String;

    /// `gauss<N>`, `trapezoid<N>`, or a bare count meaning Gauss.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (ctor, digits): (fn(usize) -> Quadrature, &str) = if let Some(d) = s.strip_prefix("gauss") {
            (Quadrature::Gauss, d)
        } else if let Some(d) = s.strip_prefix("trapezoid") {
            (Quadrature::Trapezoid, d)
        } else {
            (Quadrature::Gauss, s)
        };
        let n: usize = digits
            .parse()
            .map_err(|_| format!("expected gauss<N>, trapezoid<N> or <N>, got `{s}`"))?;
        let q = ctor(n);
        q.validate()?;
        Ok(q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    /// Abscissae in `[0, 1]`, ascending.
    pub points: Vec<f64>,
    /// Weights summing to one.
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// `n`-point Gauss–Legendre rule, `1 <= n <= MAX_POINTS`; exact for
    /// polynomials of degree `2n - 1`.
    pub fn gauss(n: usize) -> Self {
        assert!(
            (1..=MAX_POINTS).contains(&n),
            "quadrature point count must lie in 1..={MAX_POINTS}, got {n}"
        );
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
            points[i] = 0.5 * (x + 1.0);
            weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { points, weights }
    }

    /// Composite trapezoidal rule on `n >= 2` equispaced points (`n - 1`
    /// sub-intervals); exact only for linear integrands.
    pub fn trapezoid(n: usize) -> Self {
        assert!(n >= 2, "trapezoidal rule needs at least 2 points, got {n}");
        let k = (n - 1) as f64;
        let points = (0..n).map(|i| i as f64 / k).collect();
        let weights = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 / k } else { 1.0 / k })
            .collect();
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `Σ_j ∫_{S_j} f dx`, Gauss–Legendre on each segment.
pub fn gauss_segment_integrate<F: Fn(f64) -> f64>(f: F, mesh: &PeriodicMesh, points: usize) -> f64 {
    segment_integrate(f, mesh, &QuadRule::gauss(points))
}

pub fn segment_integrate<F: Fn(f64) -> f64>(f: F, mesh: &PeriodicMesh, rule: &QuadRule) -> f64 {
    (0..mesh.len())
        .map(|j| {
            let (a, b) = mesh.segment(j);
            let h = b - a;
            h * rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&xi, &w)| w * f(a + xi * h))
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn weights_sum_to_one_and_points_symmetric() {
        for n in 1..=MAX_POINTS {
            let r = QuadRule::gauss(n);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for i in 0..n {
                assert!((r.points[i] + r.points[n - 1 - i] - 1.0).abs() < 1e-14);
                assert!(r.weights[i] > 0.0);
            }
        }
    }

    #[test]
    fn exact_degree() {
        for n in 1..=MAX_POINTS {
            let r = QuadRule::gauss(n);
            for deg in 0..2 * n {
                let q: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                assert!((q - 1.0 / (deg + 1) as f64).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn known_two_point_rule() {
        let r = QuadRule::gauss(2);
        let s = 0.5 / 3f64.sqrt();
        assert!((r.points[0] - (0.5 - s)).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_rule() {
        let r = QuadRule::trapezoid(5);
        assert_eq!(r.points, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // squared linear deviation: 1/12 + 1/96
        let q: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * (x - 0.5).powi(2)).sum();
        assert!((q - 9.0 / 96.0).abs() < 1e-15);
    }

    #[test]
    fn parse_quadrature() {
        assert_eq!("5".parse::<Quadrature>(), Ok(Quadrature::Gauss(5)));
        assert_eq!("gauss3".parse::<Quadrature>(), Ok(Quadrature::Gauss(3)));
        assert_eq!("trapezoid5".parse::<Quadrature>(), Ok(Quadrature::Trapezoid(5)));
        assert!("gauss11".parse::<Quadrature>().is_err());
        assert!("trapezoid1".parse::<Quadrature>().is_err());
        assert!("simpson".parse::<Quadrature>().is_err());
        for q in [Quadrature::Gauss(7), Quadrature::Trapezoid(9)] {
            assert_eq!(q.to_string().parse::<Quadrature>(), Ok(q));
        }
    }

    #[test]
    fn segment_integration_examples() {
        let m = PeriodicMesh::from_segment_lengths(&[0.1, 0.4, 0.2, 0.3]).unwrap();
        assert!((gauss_segment_integrate(|_| 1.0, &m, 1) - 1.0).abs() < 1e-15);

        let m64 = PeriodicMesh::uniform(64).unwrap();
        let v = gauss_segment_integrate(|x| (2.0 * PI * x).sin().powi(2), &m64, 5);
        assert!((v - 0.5).abs() < 1e-12);

        let m8 = PeriodicMesh::uniform(8).unwrap();
        let v = gauss_segment_integrate(|x| x * x, &m8, 2);
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }
}
