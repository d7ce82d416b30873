use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct P2 {
    pub x: f64,
    pub y: f64,
}

impl P2 {
    pub const ZERO: P2 = P2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        P2 { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        P2::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: P2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: P2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: P2) -> f64 {
        (self - o).norm()
    }

    pub fn perp(self) -> P2 {
        P2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn unit(self) -> P2 {
        let n = self.norm();
        P2::new(self.x / n, self.y / n)
    }
}

impl Add for P2 {
    type Output = P2;
    fn add(self, o: P2) -> P2 {
        P2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for P2 {
    fn add_assign(&mut self, o: P2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for P2 {
    type Output = P2;
    fn sub(self, o: P2) -> P2 {
        P2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for P2 {
    type Output = P2;
    fn neg(self) -> P2 {
        P2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for P2 {
    type Output = P2;
    fn mul(self, s: f64) -> P2 {
        P2::new(self.x * s, self.y * s)
    }
}

impl Mul<P2> for f64 {
    type Output = P2;
    fn mul(self, p: P2) -> P2 {
        p * self
    }
}

impl std::fmt::Display for P2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}
