use num_traits::Float;

use crate::error::{Error, Result};

fn k<T: Float>(x: f64) -> T {
    T::from(x).expect("float constant")
}

/// Brent's method on a sign-changing bracket [a, b]. Stops when the
/// bracket is below `xtol` or |f| below `ftol`.
pub fn brent<T: Float, F: FnMut(T) -> Result<T>>(mut f: F, a: T, b: T, xtol: T, ftol: T, max_iter: usize) -> Result<T> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::NoSignChange(f64::NAN));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = k::<T>(2.0) * T::epsilon() * b.abs() + k::<T>(0.5) * xtol;
        let m = k::<T>(0.5) * (c - b);
        if m.abs() <= tol || fb.abs() <= ftol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = k::<T>(2.0) * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (k::<T>(2.0) * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if k::<T>(2.0) * p < (k::<T>(3.0) * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol { b + d } else if m > T::zero() { b + tol } else { b - tol };
        fb = f(b)?;
    }
    Ok(b)
}

/// Brent's derivative-free minimizer on [a, b]; returns (argmin, min).
pub fn minimize<T: Float, F: FnMut(T) -> T>(mut f: F, a: T, b: T, xtol: T, max_iter: usize) -> (T, T) {
    let golden: T = k(0.381_966_011_250_105_1);
    let (mut a, mut b) = (a, b);
    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (T::zero(), T::zero());
    for _ in 0..max_iter {
        let m = k::<T>(0.5) * (a + b);
        let tol = xtol + T::epsilon().sqrt() * x.abs() * k(0.1);
        let t2 = k::<T>(2.0) * tol;
        if (x - m).abs() <= t2 - k::<T>(0.5) * (b - a) {
            break;
        }
        let mut golden_step = true;
        if e.abs() > tol {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = k::<T>(2.0) * (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (k::<T>(0.5) * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < t2 || b - u < t2 {
                    d = if m >= x { tol } else { -tol };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= m { a - x } else { b - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol { x + d } else if d > T::zero() { x + tol } else { x - tol };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = brent(|x: f64| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-15, 0.0, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn transcendental_root() {
        let r = brent(|x: f64| Ok(x.cos() - x), 0.0, 1.0, 1e-15, 0.0, 200).unwrap();
        assert!((r.cos() - r).abs() < 1e-15);
    }

    #[test]
    fn no_bracket() {
        assert!(brent(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 0.0, 100).is_err());
    }

    #[test]
    fn minimize_parabola() {
        let (x, fx) = minimize(|x: f64| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10, 200);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn minimize_f32() {
        let (x, _) = minimize(|x: f32| (x - 1.5).powi(2), 0.0, 3.0, 1e-5, 100);
        assert!((x - 1.5).abs() < 1e-3);
    }
}
