use std::ops::{Add, Div, Mul, Neg, Sub};

use super::special;
use super::{AdError, Var};

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "add", self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "sub", self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "mul", self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self.value / rhs.value;
        self.binary(rhs, "div", q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn neg(self) -> Var<'t> {
        self.unary("neg", -self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary("add_c", self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary("sub_c", self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary("mul_c", self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    #[inline]
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary("div_c", self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    #[inline]
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    #[inline]
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary("rsub_c", self - rhs.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    #[inline]
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

impl<'t> Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    #[inline]
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self / rhs.value;
        rhs.unary("rdiv_c", q, -q / rhs.value)
    }
}

impl<'t> Var<'t> {
    #[inline]
    pub fn square(self) -> Var<'t> {
        self.unary("square", self.value * self.value, 2.0 * self.value)
    }

    #[inline]
    pub fn exp(self) -> Var<'t> {
        let e = self.value.exp();
        self.unary("exp", e, e)
    }

    /// eˣ − 1, accurate near zero.
    #[inline]
    pub fn exp_m1(self) -> Var<'t> {
        self.unary("exp_m1", self.value.exp_m1(), self.value.exp())
    }

    /// Natural logarithm; a non-positive argument poisons the tape.
    pub fn ln(self) -> Var<'t> {
        if self.value <= 0.0 {
            self.tape.poison(AdError::Domain {
                op: "ln",
                node: self.tape.len(),
                arg: self.value,
            });
        }
        self.unary("ln", self.value.ln(), 1.0 / self.value)
    }

    pub fn try_ln(self) -> Result<Var<'t>, AdError> {
        if self.value <= 0.0 {
            return Err(AdError::Domain {
                op: "ln",
                node: self.tape.len(),
                arg: self.value,
            });
        }
        Ok(self.ln())
    }

    /// Square root; a non-positive argument poisons the tape (the derivative
    /// is unbounded at zero).
    pub fn sqrt(self) -> Var<'t> {
        if self.value <= 0.0 {
            self.tape.poison(AdError::Domain {
                op: "sqrt",
                node: self.tape.len(),
                arg: self.value,
            });
        }
        let s = self.value.sqrt();
        self.unary("sqrt", s, 0.5 / s)
    }

    pub fn try_sqrt(self) -> Result<Var<'t>, AdError> {
        if self.value <= 0.0 {
            return Err(AdError::Domain {
                op: "sqrt",
                node: self.tape.len(),
                arg: self.value,
            });
        }
        Ok(self.sqrt())
    }

    /// xᵖ for a constant exponent.
    pub fn powf(self, p: f64) -> Var<'t> {
        let v = self.value.powf(p);
        self.unary("powf", v, p * self.value.powf(p - 1.0))
    }

    /// xʸ = exp(y·ln x) for x > 0.
    pub fn pow(self, y: Var<'t>) -> Var<'t> {
        if self.value <= 0.0 {
            self.tape.poison(AdError::Domain {
                op: "pow",
                node: self.tape.len(),
                arg: self.value,
            });
        }
        let v = self.value.powf(y.value);
        self.binary(y, "pow", v, y.value * v / self.value, v * self.value.ln())
    }

    /// max(x, 0); the subgradient at 0 is 0.
    #[inline]
    pub fn max0(self) -> Var<'t> {
        if self.value > 0.0 {
            self.unary("max0", self.value, 1.0)
        } else {
            self.unary("max0", 0.0, 0.0)
        }
    }

    #[inline]
    pub fn sigmoid(self) -> Var<'t> {
        let s = special::sigmoid(self.value);
        self.unary("sigmoid", s, s * (1.0 - s))
    }

    /// x·σ(x).
    #[inline]
    pub fn silu(self) -> Var<'t> {
        let s = special::sigmoid(self.value);
        let x = self.value;
        self.unary("silu", x * s, s + x * s * (1.0 - s))
    }

    #[inline]
    pub fn tanh(self) -> Var<'t> {
        let t = self.value.tanh();
        self.unary("tanh", t, 1.0 - t * t)
    }

    #[inline]
    pub fn softplus(self) -> Var<'t> {
        self.unary("softplus", special::softplus(self.value), special::sigmoid(self.value))
    }

    /// Φ(x); the local partial is the closed-form density.
    #[inline]
    pub fn norm_cdf(self) -> Var<'t> {
        self.unary("norm_cdf", special::norm_cdf(self.value), special::norm_pdf(self.value))
    }

    #[inline]
    pub fn norm_pdf(self) -> Var<'t> {
        let p = special::norm_pdf(self.value);
        self.unary("norm_pdf", p, -self.value * p)
    }

    #[inline]
    pub fn sin(self) -> Var<'t> {
        self.unary("sin", self.value.sin(), self.value.cos())
    }

    #[inline]
    pub fn cos(self) -> Var<'t> {
        self.unary("cos", self.value.cos(), -self.value.sin())
    }

    /// Two-argument arctangent of (self, x), i.e. the angle of the point (x, self).
    pub fn atan2(self, x: Var<'t>) -> Var<'t> {
        let y = self.value;
        let r2 = x.value * x.value + y * y;
        if r2 == 0.0 {
            self.tape.poison(AdError::Domain {
                op: "atan2",
                node: self.tape.len(),
                arg: 0.0,
            });
        }
        self.binary(x, "atan2", y.atan2(x.value), x.value / r2, -y / r2)
    }

    /// Larger of two variables; ties route the gradient to `self`.
    pub fn max(self, other: Var<'t>) -> Var<'t> {
        if self.value >= other.value {
            self.binary(other, "max", self.value, 1.0, 0.0)
        } else {
            self.binary(other, "max", other.value, 0.0, 1.0)
        }
    }

    /// Clamp into [lo, hi]; the derivative is 1 strictly inside and 0 outside.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        if self.value < lo {
            self.unary("clamp", lo, 0.0)
        } else if self.value > hi {
            self.unary("clamp", hi, 0.0)
        } else {
            self.unary("clamp", self.value, 1.0)
        }
    }
}
