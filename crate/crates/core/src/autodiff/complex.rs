use std::ops::{Add, Mul, Neg, Sub};

use super::{AdError, Tape, Var};

/// Complex number as a pair of real tape variables. Adjoints flow through the
/// real and imaginary parts separately.
#[derive(Clone, Copy, Debug)]
pub struct CVar<'t> {
    pub re: Var<'t>,
    pub im: Var<'t>,
}

impl<'t> CVar<'t> {
    pub fn new(re: Var<'t>, im: Var<'t>) -> Self {
        CVar { re, im }
    }

    pub fn constant(tape: &'t Tape, re: f64, im: f64) -> Self {
        CVar {
            re: tape.constant(re),
            im: tape.constant(im),
        }
    }

    /// Embeds a real variable.
    pub fn from_real(re: Var<'t>) -> Self {
        CVar { re, im: re.lift(0.0) }
    }

    /// Purely imaginary i·x.
    pub fn from_imag(im: Var<'t>) -> Self {
        CVar { re: im.lift(0.0), im }
    }

    pub fn value(&self) -> (f64, f64) {
        (self.re.value(), self.im.value())
    }

    pub fn creal(self) -> Var<'t> {
        self.re
    }

    pub fn conj(self) -> Self {
        CVar {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn scale(self, k: Var<'t>) -> Self {
        CVar {
            re: self.re * k,
            im: self.im * k,
        }
    }

    pub fn scale_c(self, k: f64) -> Self {
        CVar {
            re: self.re * k,
            im: self.im * k,
        }
    }

    pub fn add_real(self, k: Var<'t>) -> Self {
        CVar {
            re: self.re + k,
            im: self.im,
        }
    }

    pub fn add_c(self, re: f64, im: f64) -> Self {
        CVar {
            re: self.re + re,
            im: self.im + im,
        }
    }

    /// Product with the constant complex number (re + i·im).
    pub fn mul_c(self, re: f64, im: f64) -> Self {
        let t = self.re.tape();
        CVar {
            re: t.dot_const(&[self.re, self.im], &[re, -im], 0.0),
            im: t.dot_const(&[self.re, self.im], &[im, re], 0.0),
        }
    }

    pub fn norm_sqr(self) -> Var<'t> {
        self.re.square() + self.im.square()
    }

    pub fn cdiv(self, rhs: CVar<'t>) -> Self {
        let den = rhs.norm_sqr();
        let re = (self.re * rhs.re + self.im * rhs.im) / den;
        let im = (self.im * rhs.re - self.re * rhs.im) / den;
        CVar { re, im }
    }

    /// 1 / z.
    pub fn recip(self) -> Self {
        let den = self.norm_sqr();
        CVar {
            re: self.re / den,
            im: -self.im / den,
        }
    }

    pub fn cexp(self) -> Self {
        let m = self.re.exp();
        CVar {
            re: m * self.im.cos(),
            im: m * self.im.sin(),
        }
    }

    /// Principal logarithm, arg ∈ (−π, π].
    pub fn clog(self) -> Self {
        let t = self.re.tape();
        if self.re.value() == 0.0 && self.im.value() == 0.0 {
            t.poison(AdError::Domain {
                op: "clog",
                node: t.len(),
                arg: 0.0,
            });
        }
        CVar {
            re: self.norm_sqr().ln() * 0.5,
            im: self.im.atan2(self.re),
        }
    }

    /// Principal square root, Re ≥ 0, evaluated in polar form so the local
    /// partials stay finite on the positive real axis.
    pub fn csqrt(self) -> Self {
        let r = self.norm_sqr().sqrt().sqrt();
        let half = self.im.atan2(self.re) * 0.5;
        CVar {
            re: r * half.cos(),
            im: r * half.sin(),
        }
    }
}

impl<'t> Add for CVar<'t> {
    type Output = CVar<'t>;
    fn add(self, rhs: CVar<'t>) -> CVar<'t> {
        CVar {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl<'t> Sub for CVar<'t> {
    type Output = CVar<'t>;
    fn sub(self, rhs: CVar<'t>) -> CVar<'t> {
        CVar {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl<'t> Mul for CVar<'t> {
    type Output = CVar<'t>;
    fn mul(self, rhs: CVar<'t>) -> CVar<'t> {
        let t = self.re.tape();
        let zero = t.constant(0.0);
        let re = t.dot(&[self.re, -self.im], &[rhs.re, rhs.im], zero);
        let im = t.dot(&[self.re, self.im], &[rhs.im, rhs.re], zero);
        CVar { re, im }
    }
}

impl<'t> Neg for CVar<'t> {
    type Output = CVar<'t>;
    fn neg(self) -> CVar<'t> {
        CVar {
            re: -self.re,
            im: -self.im,
        }
    }
}

/// Free-function aliases matching the elementary-operation vocabulary.
pub fn cadd<'t>(a: CVar<'t>, b: CVar<'t>) -> CVar<'t> {
    a + b
}

pub fn cmul<'t>(a: CVar<'t>, b: CVar<'t>) -> CVar<'t> {
    a * b
}

pub fn cdiv<'t>(a: CVar<'t>, b: CVar<'t>) -> CVar<'t> {
    a.cdiv(b)
}

pub fn cexp(z: CVar<'_>) -> CVar<'_> {
    z.cexp()
}

pub fn clog(z: CVar<'_>) -> CVar<'_> {
    z.clog()
}

pub fn csqrt(z: CVar<'_>) -> CVar<'_> {
    z.csqrt()
}

pub fn creal(z: CVar<'_>) -> Var<'_> {
    z.re
}
