//! Adaptive Gauss–Kronrod quadrature, generic over the float type.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::Float;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub est_error: T,
    pub evaluations: usize,
}

const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn k<T: Float>(x: f64) -> T {
    T::from(x).expect("float constant")
}

/// One K15 panel with the QUADPACK error heuristic.
fn kronrod15<T: Float, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T, T) {
    let half = (b - a) * k(0.5);
    let mid = (a + b) * k(0.5);
    let fc = f(mid);
    let mut fv = [(T::zero(), T::zero()); 7];
    let mut rk = fc * k(WK[7]);
    let mut rg = fc * k(WG[3]);
    let mut rabs = fc.abs() * k(WK[7]);
    for j in 0..7 {
        let dx = half * k(XK[j]);
        let (f1, f2) = (f(mid - dx), f(mid + dx));
        fv[j] = (f1, f2);
        rk = rk + (f1 + f2) * k(WK[j]);
        rabs = rabs + (f1.abs() + f2.abs()) * k(WK[j]);
        if j % 2 == 1 {
            rg = rg + (f1 + f2) * k(WG[j / 2]);
        }
    }
    let mean = rk * k(0.5);
    let mut asc = (fc - mean).abs() * k(WK[7]);
    for j in 0..7 {
        asc = asc + ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs()) * k(WK[j]);
    }
    let (h, asc, rabs) = (half.abs(), asc * half.abs(), rabs * half.abs());
    let mut err = ((rk - rg) * h).abs();
    if asc != T::zero() && err != T::zero() {
        let r: T = (k::<T>(200.0) * err / asc).powf(k(1.5));
        err = asc * r.min(T::one());
    }
    let floor = k::<T>(50.0) * T::epsilon() * rabs;
    if rabs > T::min_positive_value() / (k::<T>(50.0) * T::epsilon()) && floor > err {
        err = floor;
    }
    (rk * half, err, rabs)
}

struct Piece<T> {
    a: T,
    b: T,
    val: T,
    err: T,
    abs: T,
}

impl<T: Float> PartialEq for Piece<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T: Float> Eq for Piece<T> {}
impl<T: Float> PartialOrd for Piece<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Float> Ord for Piece<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

/// Adaptive G7/K15 on [a, b]: bisect the worst interval until the summed
/// error estimate falls below `tol`, or below the round-off level of the sum.
pub fn integrate<T: Float, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T, max_pieces: usize) -> Result<QuadratureResult<T>> {
    let (v, e, r) = kronrod15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val: v, err: e, abs: r });
    let mut evals = 15;
    let (mut total, mut err, mut rabs) = (v, e, r);
    let floor = |rabs: T| k::<T>(200.0) * T::epsilon() * rabs;
    while err > tol && err > floor(rabs) {
        if heap.len() >= max_pieces || !total.is_finite() {
            return Err(Error::NoConvergence {
                value: total.to_f64().unwrap_or(f64::NAN),
                error: err.to_f64().unwrap_or(f64::NAN),
            });
        }
        let p = heap.pop().expect("nonempty");
        let m = (p.a + p.b) * k(0.5);
        let (v1, e1, r1) = kronrod15(&mut f, p.a, m);
        let (v2, e2, r2) = kronrod15(&mut f, m, p.b);
        evals += 30;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1, abs: r1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2, abs: r2 });
        // resum to keep round-off from accumulating in the running totals
        total = heap.iter().fold(T::zero(), |s, q| s + q.val);
        err = heap.iter().fold(T::zero(), |s, q| s + q.err);
        rabs = heap.iter().fold(T::zero(), |s, q| s + q.abs);
        if p.b - p.a <= T::epsilon() * (p.a.abs() + p.b.abs()) {
            return Err(Error::NoConvergence {
                value: total.to_f64().unwrap_or(f64::NAN),
                error: err.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(QuadratureResult { value: total, est_error: err, evaluations: evals })
}

/// ∫₀^∞ g(y) dy through y = (1 - t)/t on (0, 1].
pub fn improper_integral<T: Float, F: FnMut(T) -> T>(mut g: F, tol: T) -> Result<QuadratureResult<T>> {
    let one = T::one();
    integrate(
        |t: T| {
            let y = (one - t) / t;
            let v = g(y) / (t * t);
            if v.is_finite() {
                v
            } else if y > one {
                // underflowed tail
                T::zero()
            } else {
                v
            }
        },
        T::zero(),
        one,
        tol,
        4000,
    )
}
