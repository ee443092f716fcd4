//! Perturbed-soliton runs: u₀ = φ + δ₁(−a₀φ + i∂ₓφ) evolved with orbit,
//! modulation and virial diagnostics at every record.

use serde::Serialize;

use crate::conserved::{action, conserved_set, orbit_fit};
use crate::critical::{classify, critical_constants, CriticalData, Stability};
use crate::error::{Error, Result};
use crate::evolve::{integrate, EvolveConfig, Flow};
use crate::modulation::{b3_fit, Modulator, Tracker};
use crate::numerics::spectral::h1_norm;
use crate::numerics::Grid;
use crate::soliton::{perturbation_direction, soliton_field, SolitonParams};
use crate::virial::{a_functional, auto_radius, c_tilde, i_bound, i_composite, rate_decomposition_check, Cutoff, RateDecomposition, VirialRecord};

/// Escape threshold ε₀ relative to ‖φ‖_{H¹}.
pub const ESCAPE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub params: SolitonParams,
    pub delta1: f64,
    pub grid: Grid,
    pub evolve: EvolveConfig,
    /// Cutoff radius; None picks 10/(b₂δ₁) capped at 0.45L.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Escaped,
    Stayed,
    Aborted,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub status: Status,
    pub exit_time: Option<f64>,
    pub eps0: f64,
    pub delta1: f64,
    pub params: SolitonParams,
    /// Speed equals 2z₀√ω; modulation tracking and the rate decomposition apply.
    pub critical: bool,
    pub a_u0: f64,
    /// A(u₀) / (8ω√ω σ(2−σ) M(φ) δ₁).
    pub a_ratio: f64,
    /// A(u₀) / ((4√ω − 2c)·2ωσ(2−σ) M(φ) δ₁), the first-order prediction.
    pub a_ratio_first_order: f64,
    pub radius: f64,
    pub radius_capped: bool,
    pub c_tilde: Option<f64>,
    pub records: Vec<VirialRecord>,
    pub modulation_exit: Option<(f64, String)>,
    pub abort: Option<String>,
    pub decomposition: Option<RateDecomposition>,
    pub b3: Option<f64>,
    /// |I| ≤ 1.5R(‖u‖² + ‖u‖‖∂ₓu‖) + |C̃||λ| at every record.
    pub i_bounded: bool,
}

impl RunReport {
    pub fn aborted_with(&self) -> Option<&str> {
        self.abort.as_deref()
    }
}

fn critical_data(p: &SolitonParams) -> Option<CriticalData> {
    match classify(p.sigma, p.omega, p.c) {
        Ok(Stability::Critical) => critical_constants(p.sigma, p.omega).ok(),
        _ => None,
    }
}

pub fn perturbed_run(spec: &RunSpec) -> Result<RunReport> {
    spec.evolve.validate()?;
    if !(spec.delta1.is_finite() && spec.delta1 >= 0.0) {
        return Err(Error::Config(format!("delta1 = {} must be a nonnegative number", spec.delta1)));
    }
    let p = spec.params;
    let grid = &spec.grid;
    let data = critical_data(&p);
    let phi = soliton_field(&p, grid)?;
    let u0 = perturbation_direction(&p, grid, spec.delta1)?;
    let eps0 = ESCAPE_FRACTION * h1_norm(&phi)?;
    let q_phi = conserved_set(&phi, p.sigma)?;
    let a_u0 = a_functional(&u0, &p, &q_phi, action(&phi, &p)?)?;
    let slope = 8.0 * p.omega * p.omega.sqrt() * p.sigma * (2.0 - p.sigma) * q_phi.m;
    let a_ratio = a_u0 / (slope * spec.delta1);
    let a_ratio_first_order = a_ratio / (1.0 - p.c / (2.0 * p.omega.sqrt()));

    let (radius, radius_capped) = match (spec.radius, &data) {
        (Some(r), _) => (r, false),
        (None, Some(d)) if spec.delta1 > 0.0 => auto_radius(d.b2, spec.delta1, grid),
        (None, _) => (0.45 * grid.l(), true),
    };
    let cutoff = Cutoff::new(radius, grid)?;

    let mut tracker = match &data {
        Some(d) => Some(Tracker::new(Modulator::new(&p, &d.direction(), grid)?)),
        None => None,
    };
    let ct = match (&tracker, &data) {
        (Some(t), Some(d)) => Some(c_tilde(t.modulator.c_coefficient()?, d)),
        _ => None,
    };
    let sw = p.omega.sqrt();
    let mut escape = None;
    let mut bounded = true;

    let traj = integrate(&u0, p.sigma, &spec.evolve, |_, t, u| {
        let q = conserved_set(u, p.sigma)?;
        let fit = orbit_fit(u, &phi)?;
        let mut rec = VirialRecord {
            t,
            theta: fit.theta,
            y: fit.y,
            i1: f64::NAN,
            i2: f64::NAN,
            i: f64::NAN,
            a_term: a_u0,
            lambda: f64::NAN,
            m: q.m,
            p: q.p,
            e: q.e,
            j: q.j,
            orbit_dist: fit.dist,
            eps_h1: f64::NAN,
        };
        match tracker.as_mut() {
            Some(tr) => {
                if tr.push(t, u)?.is_some() {
                    let pt = tr.points.last().expect("just pushed");
                    let (a, b, i) = i_composite(u, pt.y, pt.lambda, p.omega, ct.unwrap_or(0.0), &cutoff)?;
                    rec = VirialRecord { theta: pt.theta, y: pt.y, lambda: pt.lambda, eps_h1: pt.eps_h1, i1: a, i2: b, i, ..rec };
                    bounded &= i.abs() <= i_bound(u, &cutoff, ct.unwrap_or(0.0), pt.lambda);
                }
            }
            None => {
                let (a, b, _) = i_composite(u, fit.y, 0.0, p.omega, 0.0, &cutoff)?;
                rec = VirialRecord { i1: a, i2: b, i: -sw * a + b, ..rec };
                bounded &= rec.i.abs() <= i_bound(u, &cutoff, 0.0, 0.0);
            }
        }
        if fit.dist > eps0 {
            escape = Some(t);
            return Ok((rec, Flow::Stop));
        }
        Ok((rec, Flow::Continue))
    })?;

    let status = if escape.is_some() {
        Status::Escaped
    } else if traj.error.is_some() {
        Status::Aborted
    } else {
        Status::Stayed
    };
    let records = traj.records;
    let modulation_exit = tracker.as_ref().and_then(|t| t.exit.as_ref().map(|(t, e)| (*t, e.to_string())));
    let (decomposition, b3) = match (&tracker, &data) {
        (Some(tr), Some(d)) if spec.delta1 > 0.0 => {
            let tracked: Vec<VirialRecord> = records.iter().filter(|r| r.lambda.is_finite()).copied().collect();
            let dec = rate_decomposition_check(&tracked, d, a_u0, spec.delta1, radius).ok();
            (dec, b3_fit(&tr.points, spec.delta1))
        }
        _ => (None, None),
    };
    Ok(RunReport {
        status,
        exit_time: escape,
        eps0,
        delta1: spec.delta1,
        params: p,
        critical: data.is_some(),
        a_u0,
        a_ratio,
        a_ratio_first_order,
        radius,
        radius_capped,
        c_tilde: ct,
        records,
        modulation_exit,
        abort: traj.error.map(|e| e.to_string()),
        decomposition,
        b3,
        i_bounded: bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unperturbed_soliton_stays() {
        let p = SolitonParams::new(1.5, 1.0, 0.3).unwrap();
        let g = p.auto_grid(2048).unwrap();
        let spec = RunSpec { params: p, delta1: 0.0, grid: g, evolve: EvolveConfig { t_final: 0.2, record_every: 20, ..Default::default() }, radius: Some(3.0) };
        let r = perturbed_run(&spec).unwrap();
        assert_eq!(r.status, Status::Stayed);
        assert!(!r.critical && r.decomposition.is_none());
        assert_eq!(r.records.len(), 11);
        assert!(r.records.iter().all(|x| x.orbit_dist < 1e-6));
        assert!(r.i_bounded);
        assert_eq!(r.a_u0, 0.0);
    }

    #[test]
    fn critical_run_tracks() {
        let d = critical_constants(1.5, 1.0).unwrap();
        let p = d.params();
        let g = Grid::new(40.0, 2048).unwrap();
        let spec = RunSpec { params: p, delta1: 1e-2, grid: g, evolve: EvolveConfig { t_final: 0.3, record_every: 10, ..Default::default() }, radius: None };
        let r = perturbed_run(&spec).unwrap();
        assert!(r.critical && r.radius_capped);
        assert!(r.records.iter().all(|x| x.lambda.is_finite()));
        assert!(r.decomposition.is_some() && r.c_tilde.is_some());
        assert!((r.a_ratio_first_order - 1.0).abs() < 0.05, "{}", r.a_ratio_first_order);
    }

    #[test]
    fn rejects_bad_delta() {
        let p = SolitonParams::new(1.5, 1.0, 0.3).unwrap();
        let spec = RunSpec { params: p, delta1: f64::NAN, grid: p.auto_grid(256).unwrap(), evolve: EvolveConfig::default(), radius: None };
        assert!(matches!(perturbed_run(&spec), Err(Error::Config(_))));
    }
}
