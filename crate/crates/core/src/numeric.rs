//! Small numeric helpers shared across modules.

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<Accumulator>().value()
}

pub fn mean(v: &[f64]) -> f64 {
    sum(v.iter().copied()) / v.len() as f64
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Weighted mean and population variance, two-pass.
pub fn weighted_moments(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let wsum = sum(weights.iter().copied());
    let m = sum(values.iter().zip(weights).map(|(v, w)| v * w)) / wsum;
    let var = sum(values.iter().zip(weights).map(|(v, w)| w * (v - m) * (v - m))) / wsum;
    (m, var)
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        let num = (n - i) as u128;
        match r.checked_mul(num) {
            Some(v) => r = v / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    r
}

/// Falling factorial a (a-1) ... (a-m+1) as a float; zero when a < m.
pub fn falling(a: usize, m: usize) -> f64 {
    if m > a {
        return 0.0;
    }
    (0..m).map(|q| (a - q) as f64).product()
}
