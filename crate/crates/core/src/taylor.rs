//! Truncated power series in `u = z - center`.
//!
//! All arithmetic keeps the length of the shorter operand; coefficients past
//! the truncation order are dropped. The nominal `radius` only feeds the
//! magnitude estimate used by tolerance checks.

use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub struct Taylor {
    pub center: C64,
    pub radius: f64,
    pub c: Vec<C64>,
}

impl Taylor {
    pub fn new(center: C64, radius: f64, c: Vec<C64>) -> Self {
        assert!(!c.is_empty(), "empty series");
        Self { center, radius, c }
    }

    pub fn zeros(center: C64, radius: f64, len: usize) -> Self {
        Self::new(center, radius, vec![C64::new(0.0, 0.0); len])
    }

    pub fn constant(center: C64, radius: f64, len: usize, value: C64) -> Self {
        let mut s = Self::zeros(center, radius, len);
        s.c[0] = value;
        s
    }

    /// The series of `z - center`.
    pub fn variable(center: C64, radius: f64, len: usize) -> Self {
        let mut s = Self::zeros(center, radius, len);
        if len > 1 {
            s.c[1] = C64::new(1.0, 0.0);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn truncate(&self, len: usize) -> Self {
        let mut c = self.c.clone();
        c.resize(len, C64::new(0.0, 0.0));
        Self::new(self.center, self.radius, c)
    }

    pub fn eval(&self, z: C64) -> C64 {
        let u = z - self.center;
        self.c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &ck| acc * u + ck)
    }

    /// Value and first derivative.
    pub fn eval_d(&self, z: C64) -> (C64, C64) {
        let u = z - self.center;
        let mut f = C64::new(0.0, 0.0);
        let mut df = C64::new(0.0, 0.0);
        for &ck in self.c.iter().rev() {
            df = df * u + f;
            f = f * u + ck;
        }
        (f, df)
    }

    /// Taylor coefficients `f^(m)(z)/m!` for `m = 0..=order`.
    pub fn jet_at(&self, z: C64, order: usize) -> Vec<C64> {
        let u = z - self.center;
        let mut work = self.c.clone();
        let n = work.len();
        let mut out = Vec::with_capacity(order + 1);
        for m in 0..=order {
            if m >= n {
                out.push(C64::new(0.0, 0.0));
                continue;
            }
            // Horner pass: the final accumulator is the m-th coefficient at z,
            // and the intermediate values become the deflated series.
            for k in (m..n - 1).rev() {
                let t = work[k + 1] * u;
                work[k] += t;
            }
            out.push(work[m]);
        }
        out
    }

    pub fn derivative(&self) -> Self {
        let n = self.len();
        let mut c = vec![C64::new(0.0, 0.0); n];
        for k in 1..n {
            c[k - 1] = self.c[k] * k as f64;
        }
        Self::new(self.center, self.radius, c)
    }

    /// Antiderivative vanishing at the center.
    pub fn integral(&self) -> Self {
        let n = self.len();
        let mut c = vec![C64::new(0.0, 0.0); n];
        for k in 1..n {
            c[k] = self.c[k - 1] / k as f64;
        }
        Self::new(self.center, self.radius, c)
    }

    /// Multiply by `u`.
    pub fn mul_u(&self) -> Self {
        let n = self.len();
        let mut c = vec![C64::new(0.0, 0.0); n];
        c[1..n].copy_from_slice(&self.c[..n - 1]);
        Self::new(self.center, self.radius, c)
    }

    /// Divide by `u`; the constant term is discarded (it must vanish).
    pub fn div_u(&self) -> Self {
        let n = self.len();
        let mut c = vec![C64::new(0.0, 0.0); n];
        c[..n - 1].copy_from_slice(&self.c[1..n]);
        Self::new(self.center, self.radius, c)
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.len().min(o.len());
        let c = (0..n).map(|k| self.c[k] + o.c[k]).collect();
        Self::new(self.center, self.radius, c)
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.len().min(o.len());
        let c = (0..n).map(|k| self.c[k] - o.c[k]).collect();
        Self::new(self.center, self.radius, c)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.center, self.radius, self.c.iter().map(|&x| x * s).collect())
    }

    pub fn add_const(&self, s: C64) -> Self {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.len().min(o.len());
        let mut c = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let a = self.c[i];
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n - i {
                c[i + j] += a * o.c[j];
            }
        }
        Self::new(self.center, self.radius, c)
    }

    /// `self += a * b`, truncated to `self`'s length.
    pub fn add_mul(&mut self, a: &Self, b: &Self) {
        let n = self.len().min(a.len()).min(b.len());
        for i in 0..n {
            let x = a.c[i];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n - i {
                self.c[i + j] += x * b.c[j];
            }
        }
    }

    /// Power `self^alpha` with the branch of the leading term given by `c0_pow`.
    pub fn powf_with(&self, alpha: f64, c0_pow: C64) -> Self {
        let n = self.len();
        let c0 = self.c[0];
        assert!(c0.norm() > 0.0, "power of a series with vanishing constant term");
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[0] = c0_pow;
        for m in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=m {
                acc += self.c[k] * y[m - k] * (alpha * k as f64 - (m - k) as f64);
            }
            y[m] = acc / (c0 * m as f64);
        }
        Self::new(self.center, self.radius, y)
    }

    /// Principal-branch power of the leading term.
    pub fn powf(&self, alpha: f64) -> Self {
        self.powf_with(alpha, self.c[0].powf(alpha))
    }

    pub fn recip(&self) -> Self {
        self.powf_with(-1.0, 1.0 / self.c[0])
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    /// `sum_n f[n] * self^n`; requires a vanishing constant term for the
    /// truncation to be exact.
    pub fn compose(&self, f: &[C64]) -> Self {
        let n = self.len();
        let mut r = Self::zeros(self.center, self.radius, n);
        for &fk in f.iter().rev() {
            r = r.mul(self);
            r.c[0] += fk;
        }
        r
    }

    pub fn exp(&self) -> Self {
        // y' = f' y
        let n = self.len();
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[0] = self.c[0].exp();
        for m in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=m {
                acc += self.c[k] * y[m - k] * k as f64;
            }
            y[m] = acc / m as f64;
        }
        Self::new(self.center, self.radius, y)
    }

    /// `max_k |c_k| r^k` at the nominal radius.
    pub fn magnitude(&self) -> f64 {
        let mut rk = 1.0;
        let mut m: f64 = 0.0;
        for ck in &self.c {
            m = m.max(ck.norm() * rk);
            rk *= self.radius;
        }
        m
    }

    /// `|c_{n-1}| r^{n-1}` relative to the magnitude: a cheap truncation check.
    pub fn tail_ratio(&self) -> f64 {
        let m = self.magnitude();
        if m == 0.0 {
            return 0.0;
        }
        let n = self.len();
        let tail = (n.saturating_sub(4)..n)
            .map(|k| self.c[k].norm() * self.radius.powi(k as i32))
            .fold(0.0, f64::max);
        tail / m
    }
}
