//! Double-double arithmetic (roughly 32 significant digits) for small-divisor
//! evaluation. A sum of three dispersion frequencies can cancel to far below
//! the 1e-9 resonance window, and deciding which side of the window it lands
//! on in plain f64 would be noise; carrying an error term settles it.

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: err }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let err = b - (s - a);
    Dd { hi: s, lo: err }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    let err = f64::mul_add(a, b, -p);
    Dd { hi: p, lo: err }
}

impl Dd {
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn add(self, other: Dd) -> Dd {
        let s = two_sum(self.hi, other.hi);
        let t = two_sum(self.lo, other.lo);
        let mut lo = s.lo + t.hi;
        let mut r = quick_two_sum(s.hi, lo);
        lo = t.lo + r.lo;
        r = quick_two_sum(r.hi, lo);
        r
    }

    pub fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    pub fn mul(self, other: Dd) -> Dd {
        let p = two_prod(self.hi, other.hi);
        let lo = p.lo + self.hi * other.lo + self.lo * other.hi;
        quick_two_sum(p.hi, lo)
    }

    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from_f64(q1)));
        let q2 = r.hi / other.hi;
        let r2 = r.sub(other.mul(Dd::from_f64(q2)));
        let q3 = r2.hi / other.hi;
        quick_two_sum(q1, q2).add(Dd::from_f64(q3))
    }

    /// Newton iteration seeded with the f64 square root; exact zero maps to zero.
    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::from_f64(0.0);
        }
        let x0 = self.hi.sqrt();
        let x = Dd::from_f64(x0);
        // One Newton step x -> (x + a/x)/2 doubles the correct digits.
        let half = Dd::from_f64(0.5);
        let y = x.add(self.div(x)).mul(half);
        y.add(self.div(y)).mul(half)
    }

    pub fn scale_int(self, k: i64) -> Dd {
        self.mul(Dd::from_f64(k as f64))
    }
}
