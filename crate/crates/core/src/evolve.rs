//! Pseudo-spectral time stepping for i u_t + u_xx + i|u|^{2σ}u_x = 0 on the
//! periodic grid, written as û_t = −ik²û + N(u) with N(u) = −F(|u|^{2σ}u_x).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Exponential time differencing RK4 (Cox–Matthews).
    Etdrk4,
    /// Classical RK4 in the integrating-factor frame.
    Ifrk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Retained fraction of the wavenumber range in nonlinear products.
    pub dealias: f64,
    pub record_every: usize,
    pub cfl_guard: f64,
    pub scheme: Scheme,
    /// Switches the nonlinear term off; used to test the linear part in isolation.
    pub nonlinear: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            dt: 1e-3,
            t_final: 10.0,
            dealias: 2.0 / 3.0,
            record_every: 100,
            cfl_guard: 1.0,
            scheme: Scheme::Etdrk4,
            nonlinear: true,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::Config(format!("T = {} must be non-negative", self.t_final)));
        }
        if !(self.dealias > 0.0 && self.dealias <= 1.0) {
            return Err(Error::Config(format!("dealias = {} must lie in (0, 1]", self.dealias)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if !(self.cfl_guard > 0.0) {
            return Err(Error::Config("cfl_guard must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Largest admissible step for a field of the given maximum modulus.
pub fn step_limit(grid: &Grid, sigma: f64, max_abs: f64, cfl_guard: f64) -> f64 {
    cfl_guard * grid.dx() / max_abs.powf(2.0 * sigma).max(1.0)
}

const BLOWUP: f64 = 1e6;
const CONTOUR_POINTS: usize = 64;

/// Precomputed propagator for one (grid, σ, dt, scheme).
pub struct Stepper {
    grid: Grid,
    sigma: f64,
    dt: f64,
    scheme: Scheme,
    nonlinear: bool,
    cfl_guard: f64,
    ik: Vec<Complex64>,
    mask: Vec<f64>,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
    buf: Vec<Complex64>,
    dbuf: Vec<Complex64>,
    last_max: f64,
}

impl Stepper {
    pub fn new(grid: &Grid, sigma: f64, config: &EvolveConfig) -> Result<Self> {
        config.validate()?;
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma = {sigma} must be positive")));
        }
        let h = config.dt;
        let ny = grid.nyquist();
        let kcut = config.dealias * grid.k_max();
        let ik = grid.k().iter().enumerate().map(|(m, &k)| Complex64::new(0.0, if m == ny { 0.0 } else { k })).collect();
        let mask = grid.k().iter().map(|k| if k.abs() <= kcut * (1.0 + 1e-12) { 1.0 } else { 0.0 }).collect();
        let n = grid.n();
        let (mut e, mut e2, mut q, mut f1, mut f2, mut f3) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64 * 2.0))
            .collect();
        for &k in grid.k() {
            let lh = Complex64::new(0.0, -k * k * h);
            e.push(lh.exp());
            e2.push((lh * 0.5).exp());
            // φ-functions by a contour mean around hL, stable for small |hL|
            let (mut sq, mut s1, mut s2, mut s3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for r in &roots {
                let z = lh + r;
                let ez = z.exp();
                let z3 = z * z * z;
                sq += ((z * 0.5).exp() - 1.0) / z;
                s1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                s2 += (2.0 + z + ez * (z - 2.0)) / z3;
                s3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let m = CONTOUR_POINTS as f64;
            q.push(sq * (h / m));
            f1.push(s1 * (h / m));
            f2.push(s2 * (h / m));
            f3.push(s3 * (h / m));
        }
        Ok(Stepper {
            grid: grid.clone(),
            sigma,
            dt: h,
            scheme: config.scheme,
            nonlinear: config.nonlinear,
            cfl_guard: config.cfl_guard,
            ik,
            mask,
            e,
            e2,
            q,
            f1,
            f2,
            f3,
            buf: vec![Complex64::default(); n],
            dbuf: vec![Complex64::default(); n],
            last_max: 0.0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Largest modulus seen by the most recent nonlinear evaluation.
    pub fn last_max(&self) -> f64 {
        self.last_max
    }

    /// N(v) in Fourier space.
    fn nonlinear(&mut self, vh: &[Complex64], out: &mut [Complex64]) {
        if !self.nonlinear {
            out.iter_mut().for_each(|z| *z = Complex64::default());
            return;
        }
        self.buf.copy_from_slice(vh);
        for ((d, v), ik) in self.dbuf.iter_mut().zip(vh).zip(&self.ik) {
            *d = v * ik;
        }
        self.grid.ifft(&mut self.buf);
        self.grid.ifft(&mut self.dbuf);
        let mut mx = 0.0f64;
        for (u, ux) in self.buf.iter_mut().zip(&self.dbuf) {
            let a = u.norm_sqr();
            mx = mx.max(a);
            *u = -a.powf(self.sigma) * ux;
        }
        self.last_max = mx.sqrt();
        self.grid.fft(&mut self.buf);
        for ((o, b), m) in out.iter_mut().zip(&self.buf).zip(&self.mask) {
            *o = b * m;
        }
    }

    /// Advances û by one step in place.
    pub fn step_hat(&mut self, vh: &mut [Complex64]) {
        match self.scheme {
            Scheme::Etdrk4 => self.etdrk4(vh),
            Scheme::Ifrk4 => self.ifrk4(vh),
        }
    }

    fn etdrk4(&mut self, v: &mut [Complex64]) {
        let n = v.len();
        let z = Complex64::default();
        let (mut nv, mut na, mut nb, mut nc) = (vec![z; n], vec![z; n], vec![z; n], vec![z; n]);
        let (mut a, mut b, mut c) = (vec![z; n], vec![z; n], vec![z; n]);
        self.nonlinear(v, &mut nv);
        for j in 0..n {
            a[j] = self.e2[j] * v[j] + self.q[j] * nv[j];
        }
        self.nonlinear(&a, &mut na);
        for j in 0..n {
            b[j] = self.e2[j] * v[j] + self.q[j] * na[j];
        }
        self.nonlinear(&b, &mut nb);
        for j in 0..n {
            c[j] = self.e2[j] * a[j] + self.q[j] * (2.0 * nb[j] - nv[j]);
        }
        self.nonlinear(&c, &mut nc);
        for j in 0..n {
            v[j] = self.e[j] * v[j] + nv[j] * self.f1[j] + (na[j] + nb[j]) * 2.0 * self.f2[j] + nc[j] * self.f3[j];
        }
    }

    fn ifrk4(&mut self, v: &mut [Complex64]) {
        let n = v.len();
        let z = Complex64::default();
        let h = self.dt;
        let (mut k1, mut k2, mut k3, mut k4) = (vec![z; n], vec![z; n], vec![z; n], vec![z; n]);
        let mut w = vec![z; n];
        self.nonlinear(v, &mut k1);
        for j in 0..n {
            w[j] = self.e2[j] * (v[j] + k1[j] * (0.5 * h));
        }
        self.nonlinear(&w, &mut k2);
        for j in 0..n {
            w[j] = self.e2[j] * v[j] + k2[j] * (0.5 * h);
        }
        self.nonlinear(&w, &mut k3);
        for j in 0..n {
            w[j] = self.e[j] * v[j] + self.e2[j] * k3[j] * h;
        }
        self.nonlinear(&w, &mut k4);
        for j in 0..n {
            v[j] = self.e[j] * v[j] + (self.e[j] * k1[j] + 2.0 * self.e2[j] * (k2[j] + k3[j]) + k4[j]) * (h / 6.0);
        }
    }

    /// Advances a physical-space field by one step, with the blow-up and step-size guards.
    pub fn step(&mut self, u: &Field, t: f64) -> Result<Field> {
        u.check_finite("step")?;
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let limit = step_limit(&self.grid, self.sigma, u.max_abs(), self.cfl_guard);
        if self.nonlinear && self.dt > limit {
            return Err(Error::StepTooLarge { dt: self.dt, limit });
        }
        let mut vh = u.values().to_vec();
        self.grid.fft(&mut vh);
        self.step_hat(&mut vh);
        self.grid.ifft(&mut vh);
        let out = Field::new(&self.grid, vh)?;
        let m = out.max_abs();
        if !m.is_finite() || m > BLOWUP {
            return Err(Error::BlowupDetected(t + self.dt));
        }
        Ok(out)
    }
}

/// One step of the scheme from `u`.
pub fn step(u: &Field, sigma: f64, config: &EvolveConfig) -> Result<Field> {
    Stepper::new(u.grid(), sigma, config)?.step(u, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Trajectory<R> {
    pub records: Vec<R>,
    pub last: Field,
    pub t: f64,
    pub steps: usize,
    /// An observer asked to stop before T.
    pub stopped: bool,
    /// Set when the run aborted; the records up to the abort are kept.
    pub error: Option<Error>,
}

/// Runs to T, calling `observe(step, t, u)` at step 0 and every `record_every` steps.
///
/// Step errors end the run and are returned inside the trajectory; observer
/// errors are propagated.
pub fn integrate<R, F>(u0: &Field, sigma: f64, config: &EvolveConfig, mut observe: F) -> Result<Trajectory<R>>
where
    F: FnMut(usize, f64, &Field) -> Result<(R, Flow)>,
{
    u0.check_finite("integrate")?;
    let mut stepper = Stepper::new(u0.grid(), sigma, config)?;
    let grid = u0.grid().clone();
    let total = config.steps();
    let mut records = Vec::new();
    let (r, flow) = observe(0, 0.0, u0)?;
    records.push(r);
    let mut traj = Trajectory { records, last: u0.clone(), t: 0.0, steps: 0, stopped: flow == Flow::Stop, error: None };
    if traj.stopped {
        return Ok(traj);
    }
    let limit = step_limit(&grid, sigma, u0.max_abs(), config.cfl_guard);
    if config.nonlinear && config.dt > limit {
        traj.error = Some(Error::StepTooLarge { dt: config.dt, limit });
        return Ok(traj);
    }
    let mut vh = u0.values().to_vec();
    grid.fft(&mut vh);
    for n in 1..=total {
        stepper.step_hat(&mut vh);
        let t = n as f64 * config.dt;
        let mx = stepper.last_max();
        let bad = !vh.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if bad || mx > BLOWUP {
            traj.error = Some(Error::BlowupDetected(t));
            break;
        }
        let limit = step_limit(&grid, sigma, mx, config.cfl_guard);
        if config.nonlinear && config.dt > limit {
            traj.error = Some(Error::StepTooLarge { dt: config.dt, limit });
            break;
        }
        traj.steps = n;
        traj.t = t;
        if n % config.record_every == 0 || n == total {
            let mut u = vh.clone();
            grid.ifft(&mut u);
            let u = Field::new(&grid, u)?;
            if u.max_abs() > BLOWUP {
                traj.error = Some(Error::BlowupDetected(t));
                break;
            }
            let (r, flow) = observe(n, t, &u)?;
            traj.records.push(r);
            traj.last = u;
            if flow == Flow::Stop {
                traj.stopped = true;
                break;
            }
        }
    }
    if traj.error.is_some() || traj.stopped {
        return Ok(traj);
    }
    let mut u = vh;
    grid.ifft(&mut u);
    traj.last = Field::new(&grid, u)?;
    Ok(traj)
}

/// Runs to T and returns the final field, or the step error.
pub fn evolve(u0: &Field, sigma: f64, config: &EvolveConfig) -> Result<Field> {
    let mut cfg = *config;
    cfg.record_every = usize::MAX;
    let traj = integrate(u0, sigma, &cfg, |_, _, _| Ok(((), Flow::Continue)))?;
    match traj.error {
        Some(e) => Err(e),
        None => Ok(traj.last),
    }
}

/// x ↦ conj(u(−x)) on the grid; with t ↦ −t this maps solutions to solutions.
pub fn reflect_conj(u: &Field) -> Field {
    let n = u.len();
    let v = u.values();
    let out = (0..n).map(|j| v[(n - j) % n].conj()).collect();
    Field::new(u.grid(), out).expect("same length")
}
