//! Small dense kernels over any [`Real`].
//!
//! nalgebra covers the double-precision paths; these exist for the
//! extended-precision ones, where nalgebra's `ComplexField` bound rules out
//! the software float.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

/// Row-major square matrix.
#[derive(Clone, Debug)]
pub struct Dense<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(n: usize, like: &T) -> Self {
        Dense {
            n,
            data: vec![like.zero_like(); n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn map_f64(&self) -> Dense<f64> {
        Dense {
            n: self.n,
            data: self.data.iter().map(Real::to_f64).collect(),
        }
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real>(a: &Dense<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::Argument(format!(
            "rhs length {} for a {n}x{n} system",
            b.len()
        )));
    }
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                m[i * n + col]
                    .abs()
                    .partial_cmp(&m[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if m[pivot * n + col].is_zero() {
            return Err(Error::Numeric("singular Jacobian".into()));
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            x.swap(pivot, col);
        }
        let p = m[col * n + col].clone();
        for row in col + 1..n {
            let factor = m[row * n + col].clone() / p.clone();
            if factor.is_zero() {
                continue;
            }
            for k in col..n {
                let v = m[row * n + k].clone() - factor.clone() * m[col * n + k].clone();
                m[row * n + k] = v;
            }
            let v = x[row].clone() - factor * x[col].clone();
            x[row] = v;
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row].clone();
        for k in row + 1..n {
            acc = acc - m[row * n + k].clone() * x[k].clone();
        }
        x[row] = acc / m[row * n + row].clone();
    }
    Ok(x)
}

/// Eigenvalues of a general real matrix: Householder reduction to upper
/// Hessenberg form followed by the Francis double-shift QR iteration.
pub fn eigenvalues<T: Real>(a: &Dense<T>) -> Result<Vec<Complex<f64>>> {
    let n = a.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    let like = a.data[0].clone();
    let mut h = a.data.clone();
    hessenberg(&mut h, n, &like);
    hqr(&mut h, n, &like)
}

fn hessenberg<T: Real>(h: &mut [T], n: usize, like: &T) {
    let zero = like.zero_like();
    for k in 0..n.saturating_sub(2) {
        let mut alpha = zero.clone();
        for i in k + 1..n {
            alpha = alpha + h[i * n + k].square();
        }
        if alpha.is_zero() {
            continue;
        }
        let mut alpha = alpha.sqrt();
        if h[(k + 1) * n + k] > zero {
            alpha = -alpha;
        }
        // v = x - alpha e1, reflector P = I - 2 v v^T / (v^T v)
        let mut v = vec![zero.clone(); n];
        for i in k + 1..n {
            v[i] = h[i * n + k].clone();
        }
        v[k + 1] = v[k + 1].clone() - alpha.clone();
        let mut vnorm2 = zero.clone();
        for vi in v.iter().skip(k + 1) {
            vnorm2 = vnorm2 + vi.square();
        }
        if vnorm2.is_zero() {
            continue;
        }
        let two = like.cast(2.0);
        for j in 0..n {
            let mut s = zero.clone();
            for i in k + 1..n {
                s = s + v[i].clone() * h[i * n + j].clone();
            }
            let s = two.clone() * s / vnorm2.clone();
            for i in k + 1..n {
                h[i * n + j] = h[i * n + j].clone() - s.clone() * v[i].clone();
            }
        }
        for i in 0..n {
            let mut s = zero.clone();
            for j in k + 1..n {
                s = s + h[i * n + j].clone() * v[j].clone();
            }
            let s = two.clone() * s / vnorm2.clone();
            for j in k + 1..n {
                h[i * n + j] = h[i * n + j].clone() - s.clone() * v[j].clone();
            }
        }
        for i in k + 2..n {
            h[i * n + k] = zero.clone();
        }
    }
}

fn sign_of<T: Real>(mag: &T, sgn: &T) -> T {
    if *sgn >= sgn.zero_like() {
        mag.abs()
    } else {
        -mag.abs()
    }
}

/// Double-shift QR on an upper Hessenberg matrix (EISPACK `hqr`).
fn hqr<T: Real>(a: &mut [T], n: usize, like: &T) -> Result<Vec<Complex<f64>>> {
    let zero = like.zero_like();
    let eps = like.cast(like.epsilon());
    let idx = |i: usize, j: usize| i * n + j;
    let mut wr = vec![zero.clone(); n];
    let mut wi = vec![zero.clone(); n];

    let mut anorm = zero.clone();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm = anorm + a[idx(i, j)].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = zero.clone();
    let (mut p, mut q, mut r) = (zero.clone(), zero.clone(), zero.clone());
    let max_its = 60 * n.max(1);
    while nn >= 0 {
        let mut its = 0usize;
        let mut l: isize;
        loop {
            l = nn;
            while l >= 1 {
                let lu = l as usize;
                let mut s = a[idx(lu - 1, lu - 1)].abs() + a[idx(lu, lu)].abs();
                if s.is_zero() {
                    s = anorm.clone();
                }
                if a[idx(lu, lu - 1)].abs() <= eps.clone() * s {
                    a[idx(lu, lu - 1)] = zero.clone();
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            let x = a[idx(nu, nu)].clone();
            if l == nn {
                wr[nu] = x + t.clone();
                wi[nu] = zero.clone();
                nn -= 1;
                break;
            }
            let y = a[idx(nu - 1, nu - 1)].clone();
            let w = a[idx(nu, nu - 1)].clone() * a[idx(nu - 1, nu)].clone();
            if l == nn - 1 {
                p = like.cast(0.5) * (y.clone() - x.clone());
                q = p.square() + w.clone();
                let z = q.abs().sqrt();
                let xs = x + t.clone();
                if q >= zero {
                    let z = p.clone() + sign_of(&z, &p);
                    wr[nu - 1] = xs.clone() + z.clone();
                    wr[nu] = wr[nu - 1].clone();
                    if !z.is_zero() {
                        wr[nu] = xs - w / z;
                    }
                    wi[nu - 1] = zero.clone();
                    wi[nu] = zero.clone();
                } else {
                    wr[nu - 1] = xs.clone() + p.clone();
                    wr[nu] = xs + p.clone();
                    wi[nu - 1] = -z.clone();
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if its == max_its {
                return Err(Error::Numeric("QR iteration did not converge".into()));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t = t + x.clone();
                for i in 0..=nu {
                    a[idx(i, i)] = a[idx(i, i)].clone() - x.clone();
                }
                let s = a[idx(nu, nu - 1)].abs() + a[idx(nu - 1, nu - 2)].abs();
                x = like.cast(0.75) * s.clone();
                y = x.clone();
                w = like.cast(-0.4375) * s.square();
            }
            its += 1;
            let lu = l as usize;
            let mut m = nu as isize - 2;
            while m >= l {
                let mu = m as usize;
                let z = a[idx(mu, mu)].clone();
                let rr = x.clone() - z.clone();
                let ss = y.clone() - z.clone();
                p = (rr.clone() * ss.clone() - w.clone()) / a[idx(mu + 1, mu)].clone()
                    + a[idx(mu, mu + 1)].clone();
                q = a[idx(mu + 1, mu + 1)].clone() - z - rr - ss;
                r = a[idx(mu + 2, mu + 1)].clone();
                let s = p.abs() + q.abs() + r.abs();
                p = p / s.clone();
                q = q / s.clone();
                r = r / s;
                if m == l {
                    break;
                }
                let u = a[idx(mu, mu - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a[idx(mu - 1, mu - 1)].abs()
                        + a[idx(mu, mu)].abs()
                        + a[idx(mu + 1, mu + 1)].abs());
                if u <= eps.clone() * v {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;
            for i in mu + 2..=nu {
                a[idx(i, i - 2)] = zero.clone();
                if i != mu + 2 {
                    a[idx(i, i - 3)] = zero.clone();
                }
            }
            let mut k = mu;
            while k < nu {
                let mut xk = zero.clone();
                if k != mu {
                    p = a[idx(k, k - 1)].clone();
                    q = a[idx(k + 1, k - 1)].clone();
                    r = if k + 1 != nu {
                        a[idx(k + 2, k - 1)].clone()
                    } else {
                        zero.clone()
                    };
                    xk = p.abs() + q.abs() + r.abs();
                    if !xk.is_zero() {
                        p = p / xk.clone();
                        q = q / xk.clone();
                        r = r / xk.clone();
                    }
                }
                let s = sign_of(&(p.square() + q.square() + r.square()).sqrt(), &p);
                if !s.is_zero() {
                    if k == mu {
                        if l != m {
                            a[idx(k, k - 1)] = -a[idx(k, k - 1)].clone();
                        }
                    } else {
                        a[idx(k, k - 1)] = -s.clone() * xk;
                    }
                    p = p + s.clone();
                    let xx = p.clone() / s.clone();
                    let yy = q.clone() / s.clone();
                    let zz = r.clone() / s.clone();
                    q = q / p.clone();
                    r = r / p.clone();
                    for j in k..=nu {
                        let mut pp = a[idx(k, j)].clone() + q.clone() * a[idx(k + 1, j)].clone();
                        if k + 1 != nu {
                            pp = pp + r.clone() * a[idx(k + 2, j)].clone();
                            a[idx(k + 2, j)] = a[idx(k + 2, j)].clone() - pp.clone() * zz.clone();
                        }
                        a[idx(k + 1, j)] = a[idx(k + 1, j)].clone() - pp.clone() * yy.clone();
                        a[idx(k, j)] = a[idx(k, j)].clone() - pp * xx.clone();
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in lu..=mmin {
                        let mut pp = xx.clone() * a[idx(i, k)].clone()
                            + yy.clone() * a[idx(i, k + 1)].clone();
                        if k + 1 != nu {
                            pp = pp + zz.clone() * a[idx(i, k + 2)].clone();
                            a[idx(i, k + 2)] = a[idx(i, k + 2)].clone() - pp.clone() * r.clone();
                        }
                        a[idx(i, k + 1)] = a[idx(i, k + 1)].clone() - pp.clone() * q.clone();
                        a[idx(i, k)] = a[idx(i, k)].clone() - pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr
        .iter()
        .zip(&wi)
        .map(|(re, im)| Complex::new(re.to_f64(), im.to_f64()))
        .collect())
}
