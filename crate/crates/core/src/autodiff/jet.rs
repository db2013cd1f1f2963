use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

/// Value and first three derivatives with respect to one seeded input.
///
/// Derivatives are stored in natural units (`d2` is the second derivative,
/// not the Taylor coefficient `d2 / 2`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet3 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet3 {
    pub const fn new(value: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Jet3 { value, d1, d2, d3 }
    }

    pub const fn constant(value: f64) -> Self {
        Jet3::new(value, 0.0, 0.0, 0.0)
    }

    /// The seeded input itself: derivative 1.
    pub const fn variable(value: f64) -> Self {
        Jet3::new(value, 1.0, 0.0, 0.0)
    }

    /// Component `k` (0 = value).
    pub fn get(&self, k: usize) -> f64 {
        match k {
            0 => self.value,
            1 => self.d1,
            2 => self.d2,
            3 => self.d3,
            _ => panic!("Jet3 has no derivative of order {k}"),
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.value, self.d1, self.d2, self.d3]
    }

    /// Zeroes derivatives above `order`.
    pub fn truncate(self, order: usize) -> Self {
        Jet3 {
            value: self.value,
            d1: if order >= 1 { self.d1 } else { 0.0 },
            d2: if order >= 2 { self.d2 } else { 0.0 },
            d3: if order >= 3 { self.d3 } else { 0.0 },
        }
    }

    /// `φ(u)` given `φ(u₀), φ′(u₀), φ″(u₀), φ‴(u₀)` (Faà di Bruno).
    pub fn compose(self, phi: [f64; 4]) -> Self {
        let [p0, p1, p2, p3] = phi;
        let (u1, u2, u3) = (self.d1, self.d2, self.d3);
        Jet3 {
            value: p0,
            d1: p1 * u1,
            d2: p2 * u1 * u1 + p1 * u2,
            d3: p3 * u1 * u1 * u1 + 3.0 * p2 * u1 * u2 + p1 * u3,
        }
    }

    pub fn recip(self) -> Self {
        let u = self.value;
        let r = 1.0 / u;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn scale(self, c: f64) -> Self {
        Jet3::new(self.value * c, self.d1 * c, self.d2 * c, self.d3 * c)
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(self, o: Jet3) -> Jet3 {
        Jet3::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2, self.d3 + o.d3)
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(self, o: Jet3) -> Jet3 {
        Jet3::new(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2, self.d3 - o.d3)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, o: Jet3) -> Jet3 {
        let (f0, f1, f2, f3) = (self.value, self.d1, self.d2, self.d3);
        let (g0, g1, g2, g3) = (o.value, o.d1, o.d2, o.d3);
        Jet3 {
            value: f0 * g0,
            d1: f1 * g0 + f0 * g1,
            d2: f2 * g0 + 2.0 * f1 * g1 + f0 * g2,
            d3: f3 * g0 + 3.0 * f2 * g1 + 3.0 * f1 * g2 + f0 * g3,
        }
    }
}

impl Div for Jet3 {
    type Output = Jet3;
    fn div(self, o: Jet3) -> Jet3 {
        self * o.recip()
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet3 {
    type Output = Jet3;
    fn add(mut self, c: f64) -> Jet3 {
        self.value += c;
        self
    }
}

impl Mul<f64> for Jet3 {
    type Output = Jet3;
    fn mul(self, c: f64) -> Jet3 {
        self.scale(c)
    }
}

// k (k-1) ... (k-j+1) u^(k-j), zero when the falling factorial vanishes.
fn power_derivative(u: f64, k: i32, j: i32) -> f64 {
    let mut coef = 1.0;
    for i in 0..j {
        coef *= (k - i) as f64;
    }
    if coef == 0.0 {
        0.0
    } else {
        coef * u.powi(k - j)
    }
}

impl Scalar for Jet3 {
    fn lift(&self, c: f64) -> Self {
        Jet3::constant(c)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn scale(&self, c: f64) -> Self {
        Jet3::scale(*self, c)
    }

    fn add_const(&self, c: f64) -> Self {
        *self + c
    }

    fn tanh(&self) -> Self {
        let y = self.value.tanh();
        let p1 = 1.0 - y * y;
        let p2 = -2.0 * y * p1;
        let p3 = -2.0 * p1 * p1 + 4.0 * y * y * p1;
        self.compose([y, p1, p2, p3])
    }

    fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose([s, c, -s, -c])
    }

    fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose([c, -s, -c, s])
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose([e; 4])
    }

    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        let s3 = s * s * s;
        self.compose([s, 0.5 / s, -0.25 / s3, 0.375 / (s3 * s * s)])
    }

    fn powi(&self, k: i32) -> Self {
        let u = self.value;
        self.compose([
            u.powi(k),
            power_derivative(u, k, 1),
            power_derivative(u, k, 2),
            power_derivative(u, k, 3),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial() {
        let t = Jet3::variable(3.0);
        let y = t * t;
        assert_eq!(y.to_array(), [9.0, 6.0, 2.0, 0.0]);
        assert_eq!(t.powi(2).to_array(), [9.0, 6.0, 2.0, 0.0]);
    }

    #[test]
    fn tanh_first_derivative() {
        let y = Jet3::variable(0.5).tanh();
        let expected = 1.0 - 0.5f64.tanh().powi(2);
        assert!((y.d1 - expected).abs() < 1e-15);
        assert!((y.d1 - 0.786448).abs() < 1e-6);
    }

    #[test]
    fn constant_has_no_derivatives() {
        let c = Jet3::constant(2.0).sin().exp();
        assert_eq!((c.d1, c.d2, c.d3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn powi_at_zero_is_finite() {
        let y = Jet3::variable(0.0).powi(2);
        assert_eq!(y.to_array(), [0.0, 0.0, 2.0, 0.0]);
        let y = Jet3::variable(0.0).powi(1);
        assert_eq!(y.to_array(), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn truncate_zeroes_high_orders() {
        let y = Jet3::variable(0.3).exp().truncate(1);
        assert_eq!((y.d2, y.d3), (0.0, 0.0));
        assert!(y.d1 > 0.0);
    }
}
