//! Compensated accumulation for the long sums that show up in degree,
//! energy and pairing evaluations.
//!
//! Plain left-to-right summation loses digits once a few thousand terms of
//! mixed magnitude are involved; the Neumaier variant of Kahan summation
//! keeps the error at a couple of ulps of the result independent of length,
//! which is what the 1e-11..1e-12 tolerances elsewhere in the crate assume.

use num_complex::Complex64;

/// Neumaier (improved Kahan–Babuška) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of terms.
pub fn sum_compensated<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = Neumaier::new();
    for t in terms {
        acc.add(t);
    }
    acc.total()
}

/// Componentwise-compensated accumulator for complex terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexNeumaier {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexNeumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn total(&self) -> Complex64 {
        Complex64::new(self.re.total(), self.im.total())
    }
}
