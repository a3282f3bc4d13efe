//! Welch's unequal-variance t-test and the Student-t distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TTestResult<F> {
    pub t_statistic: F,
    /// Welch-Satterthwaite degrees of freedom.
    pub nu: F,
    /// Two-sided critical value at `significance`.
    pub critical_value: F,
    pub significance: F,
    pub reject_null: bool,
    pub n1: usize,
    pub n2: usize,
}

fn mean_var<F: Scalar>(xs: &[F]) -> (F, F) {
    let n = F::of_usize(xs.len());
    let mean = xs.iter().copied().sum::<F>() / n;
    let ss = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>();
    (mean, ss / (n - F::one()))
}

pub fn welch_t_test<F: Scalar>(sample1: &[F], sample2: &[F], significance: F) -> Result<TTestResult<F>> {
    if sample1.len() < 2 || sample2.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "the t-test needs two values per sample, got {} and {}",
            sample1.len(),
            sample2.len()
        )));
    }
    if !(significance > F::zero() && significance < F::one()) {
        return Err(Error::Config(format!("significance {significance} is outside (0, 1)")));
    }
    let (m1, v1) = mean_var(sample1);
    let (m2, v2) = mean_var(sample2);
    let (n1, n2) = (F::of_usize(sample1.len()), F::of_usize(sample2.len()));
    let (a, b) = (v1 / n1, v2 / n2);
    let se2 = a + b;
    if se2 <= F::zero() {
        return Err(Error::ZeroVariance);
    }
    let t = (m1 - m2) / se2.sqrt();
    let nu = se2 * se2 / (a * a / (n1 - F::one()) + b * b / (n2 - F::one()));
    let critical = student_t_inv_cdf(F::one() - significance / F::of(2.0), nu);
    Ok(TTestResult {
        t_statistic: t,
        nu,
        critical_value: critical,
        significance,
        reject_null: t.abs() > critical,
        n1: sample1.len(),
        n2: sample2.len(),
    })
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<F: Scalar>(x: F) -> F {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let half = F::of(0.5);
    if x < half {
        // reflection
        let pi = F::of(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(F::one() - x);
    }
    let x = x - F::one();
    let mut acc = F::of(COEF[0]);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc = acc + F::of(c) / (x + F::of_usize(i));
    }
    let t = x + F::of(7.5);
    F::of(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf<F: Scalar>(a: F, b: F, x: F) -> F {
    let tiny = F::of(1e-300).max(F::min_positive_value());
    let eps = F::epsilon() * F::of(4.0);
    let one = F::one();
    let (qab, qap, qam) = (a + b, a + one, a - one);
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..=500 {
        let m = F::of_usize(m);
        let m2 = m + m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h = h * d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let del = d * c;
        h = h * del;
        if (del - one).abs() < eps {
            break;
        }
    }
    h
}

/// Regularised incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta<F: Scalar>(a: F, b: F, x: F) -> F {
    let one = F::one();
    if x <= F::zero() {
        return F::zero();
    }
    if x >= one {
        return one;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (one - x).ln();
    let front = ln_front.exp();
    if x < (a + one) / (a + b + F::of(2.0)) {
        front * beta_cf(a, b, x) / a
    } else {
        one - front * beta_cf(b, a, one - x) / b
    }
}

/// CDF of Student's t with `nu` degrees of freedom.
pub fn student_t_cdf<F: Scalar>(t: F, nu: F) -> F {
    let half = F::of(0.5);
    let tail = half * reg_inc_beta(nu * half, half, nu / (nu + t * t));
    if t >= F::zero() {
        F::one() - tail
    } else {
        tail
    }
}

/// Quantile of Student's t with `nu` degrees of freedom, by bisection.
pub fn student_t_inv_cdf<F: Scalar>(p: F, nu: F) -> F {
    let half = F::of(0.5);
    if p == half {
        return F::zero();
    }
    if p < half {
        return -student_t_inv_cdf(F::one() - p, nu);
    }
    if p >= F::one() {
        return F::infinity();
    }
    let mut hi = F::one();
    while student_t_cdf(hi, nu) < p && hi < F::of(1e12) {
        hi = hi * F::of(2.0);
    }
    let mut lo = F::zero();
    for _ in 0..200 {
        let mid = half * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if student_t_cdf(mid, nu) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    half * (lo + hi)
}
