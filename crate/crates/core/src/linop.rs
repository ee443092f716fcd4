//! Linearization around the soliton: S', S''(φ), J', the discrete spectrum
//! of S''(φ) and the constrained coercivity constant.
//!
//! S''(φ) contains a conjugate term, so it is only ℝ-linear. All matrix work
//! uses the real representation (Re f, Im f) of length 2N, where the inner
//! product ⟨f, g⟩ = Re ∫ f ḡ becomes dx times the Euclidean dot product.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use serde::Serialize;

use crate::conserved::conserved_set;
use crate::error::{Error, Result};
use crate::numerics::spectral::{apply_symbol, dx, h1_weight, inner, l2_norm};
use crate::numerics::{Field, Grid};
use crate::soliton::{elliptic_operator, soliton_field, SolitonParams};

/// S'_{ω,c}(u) = −u_xx − i|u|^{2σ}u_x + ωu + icu_x.
pub fn apply_s_prime(u: &Field, p: &SolitonParams) -> Result<Field> {
    elliptic_operator(u, p)
}

/// J'(u) = 2(σ+1) i|u|^{2σ}u_x.
pub fn apply_j_prime(u: &Field, sigma: f64) -> Result<Field> {
    u.check_finite("apply_j_prime")?;
    let i2 = Complex64::new(0.0, 2.0 * (sigma + 1.0));
    Ok(u.zip_map(&dx(u), |u, ux| i2 * u.norm().powf(2.0 * sigma) * ux))
}

/// S''_{ω,c}(φ) with the φ-dependent coefficients precomputed.
#[derive(Debug, Clone)]
pub struct SecondVariation {
    params: SolitonParams,
    grid: Grid,
    /// |φ|^{2σ}
    g: Vec<f64>,
    /// σ|φ|^{2σ−2} φ̄ φ_x
    w: Vec<Complex64>,
    /// σ|φ|^{2σ−2} φ φ_x
    v: Vec<Complex64>,
}

impl SecondVariation {
    pub fn new(base: &Field, params: &SolitonParams) -> Result<Self> {
        base.check_finite("SecondVariation")?;
        params.validate()?;
        let s = params.sigma;
        let bx = dx(base);
        let mut g = Vec::with_capacity(base.len());
        let mut w = Vec::with_capacity(base.len());
        let mut v = Vec::with_capacity(base.len());
        for (&f, &fx) in base.values().iter().zip(bx.values()) {
            let a = f.norm_sqr();
            g.push(a.powf(s));
            // |φ|^{2σ−2} is bounded for σ ≥ 1 and vanishes with φ otherwise
            let pre = if a > 0.0 { s * a.powf(s - 1.0) } else { 0.0 };
            w.push(pre * f.conj() * fx);
            v.push(pre * f * fx);
        }
        Ok(SecondVariation { params: *params, grid: base.grid().clone(), g, w, v })
    }

    /// Operator at the exact soliton on `grid`.
    pub fn at_soliton(params: &SolitonParams, grid: &Grid) -> Result<Self> {
        SecondVariation::new(&soliton_field(params, grid)?, params)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &SolitonParams {
        &self.params
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        f.check_finite("apply_s_double_prime")?;
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let SolitonParams { omega, c, .. } = self.params;
        let grid = &self.grid;
        // −f_xx + ωf + icf_x in one pass through Fourier space
        let lin: Vec<Complex64> = grid
            .k()
            .iter()
            .enumerate()
            .map(|(m, &k)| {
                let k1 = if m == grid.nyquist() { 0.0 } else { k };
                Complex64::new(k * k + omega - c * k1, 0.0)
            })
            .collect();
        let lf = apply_symbol(f, &lin);
        let fx = dx(f);
        let i = Complex64::i();
        let out = lf
            .values()
            .iter()
            .zip(f.values())
            .zip(fx.values())
            .enumerate()
            .map(|(j, ((&l, &f), &fx))| l - i * (self.g[j] * fx + self.w[j] * f + self.v[j] * f.conj()))
            .collect();
        Field::new(grid, out)
    }

    /// Dense 2N×2N matrix in the real representation, symmetrized.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n2 = 2 * self.grid.n();
        let mut a = DMatrix::<f64>::zeros(n2, n2);
        let mut e = vec![0.0; n2];
        for j in 0..n2 {
            e[j] = 1.0;
            let col = self.apply(&Field::from_real_rep(&self.grid, &e)?)?.to_real();
            a.set_column(j, &DVector::from_vec(col));
            e[j] = 0.0;
        }
        // the pointwise coefficient terms balance only up to aliasing at the top modes
        let at = a.transpose();
        a += at;
        a *= 0.5;
        Ok(a)
    }
}

pub fn apply_s_double_prime(f: &Field, base: &Field, params: &SolitonParams) -> Result<Field> {
    SecondVariation::new(base, params)?.apply(f)
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// The k smallest eigenvalues, ascending.
    pub values: Vec<f64>,
    pub fields: Vec<Field>,
    /// Largest |eigenvalue| among those returned.
    pub scale: f64,
    /// Max of ‖Av − λv‖ / max(1, |λ|) over the returned pairs.
    pub residual: f64,
}

impl Spectrum {
    pub fn negative_count(&self) -> usize {
        let tol = 1e-6 * self.scale;
        self.values.iter().filter(|&&l| l < -tol).count()
    }

    /// Indices of eigenvalues within `tol` of zero.
    pub fn near_zero(&self, tol: f64) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i].abs() <= tol).collect()
    }

    /// Norm of the L²-normalized `f` projected onto the span of the selected eigenfields.
    pub fn capture(&self, f: &Field, idx: &[usize]) -> Result<f64> {
        let nf = l2_norm(f);
        let mut s = 0.0;
        for &i in idx {
            let e = &self.fields[i];
            let c = inner(f, e)? / (nf * l2_norm(e));
            s += c * c;
        }
        Ok(s.sqrt())
    }
}

fn orthonormalize(x: DMatrix<f64>) -> DMatrix<f64> {
    x.qr().q()
}

/// Seed block for subspace iteration: smooth fields built from the base soliton.
fn seed_block(op: &SecondVariation, m: usize) -> Result<DMatrix<f64>> {
    let grid = op.grid();
    let base = soliton_field(op.params(), grid)?;
    let bx = dx(&base);
    let l = grid.l();
    let mut cols: Vec<Vec<f64>> = vec![
        base.mul_i().to_real(),
        bx.to_real(),
        base.to_real(),
        bx.mul_i().to_real(),
    ];
    let mut j = 1;
    while cols.len() < m {
        let env = base.abs();
        let s = Field::from_real(grid, |x| (j as f64 * std::f64::consts::PI * x / (2.0 * l)).sin());
        let c = Field::from_real(grid, |x| (j as f64 * std::f64::consts::PI * x / (2.0 * l)).cos());
        cols.push(s.weighted(&env).to_real());
        cols.push(c.weighted(&env).mul_i().to_real());
        j += 1;
    }
    cols.truncate(m);
    let n2 = 2 * grid.n();
    Ok(DMatrix::from_fn(n2, m, |i, c| cols[c][i]))
}

/// The k smallest eigenpairs of the symmetrized discretization of S''(φ).
///
/// Eigenvalues come from a dense tridiagonal reduction; eigenfields from
/// block inverse iteration at each cluster of eigenvalues and a Rayleigh–Ritz step.
pub fn spectrum(op: &SecondVariation, k: usize) -> Result<Spectrum> {
    if k < 4 {
        return Err(Error::Config(format!("spectrum needs k >= 4, got {k}")));
    }
    let a = op.dense()?;
    let n2 = a.nrows();
    if k > n2 {
        return Err(Error::Config(format!("k = {k} exceeds the dimension {n2}")));
    }
    let mut vals: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("non-finite eigenvalue".into()));
    }
    vals.sort_by(f64::total_cmp);
    let values: Vec<f64> = vals[..k].to_vec();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let grid = op.grid();
    let seeds = seed_block(op, (k + 4).min(n2))?;
    let mut fields = Vec::with_capacity(k);
    let mut residual = 0.0f64;
    let mut start = 0;
    while start < k {
        // eigenvalues closer than this share one shift and one block
        let tol = 1e-6 * scale.max(1.0);
        let mut end = start + 1;
        while end < k && values[end] - values[end - 1] <= tol {
            end += 1;
        }
        let size = end - start;
        let block = (size + 2).min(n2);
        let mut shifted = a.clone();
        let s0 = values[start] - 1e-9 * scale.max(1.0);
        for i in 0..n2 {
            shifted[(i, i)] -= s0;
        }
        let lu = shifted.lu();
        let mut x = DMatrix::from_fn(n2, block, |i, c| seeds[(i, (start + c) % seeds.ncols())] + 1e-3 * (((i * 7 + c * 13) % 17) as f64 - 8.0) / 8.0);
        x = orthonormalize(x);
        for _ in 0..4 {
            x = lu.solve(&x).ok_or_else(|| Error::EigenFailure("singular shifted matrix".into()))?;
            x = orthonormalize(x);
        }
        let h = x.transpose() * &a * &x;
        let eig = ((&h + h.transpose()) * 0.5).symmetric_eigen();
        // Ritz pairs nearest the shift
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| (eig.eigenvalues[i] - s0).abs().total_cmp(&(eig.eigenvalues[j] - s0).abs()));
        let mut chosen: Vec<usize> = order.into_iter().take(size).collect();
        chosen.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        for &i in &chosen {
            let v = &x * eig.eigenvectors.column(i);
            let lam = eig.eigenvalues[i];
            residual = residual.max((&a * &v - &v * lam).norm() / lam.abs().max(1.0));
            fields.push(Field::from_real_rep(grid, v.as_slice())?);
        }
        start = end;
    }
    Ok(Spectrum { values, fields, scale, residual })
}

/// Multiplies by (1 + k²)^{−1/2}, the inverse square root of the H¹ Gram operator.
fn h1_inv_sqrt(grid: &Grid, x: &[f64]) -> Result<Vec<f64>> {
    let sym: Vec<Complex64> = h1_weight(grid).iter().map(|w| Complex64::new(1.0 / w.sqrt(), 0.0)).collect();
    Ok(apply_symbol(&Field::from_real_rep(grid, x)?, &sym).to_real())
}

fn h1_inv_sqrt_columns(grid: &Grid, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
    for j in 0..a.ncols() {
        let col: Vec<f64> = a.column(j).iter().copied().collect();
        out.set_column(j, &DVector::from_vec(h1_inv_sqrt(grid, &col)?));
    }
    Ok(out)
}

/// min ⟨S''ε, ε⟩ / ‖ε‖²_{H¹} over ε orthogonal to every field in `constraints`.
pub fn coercivity_constant(op: &SecondVariation, constraints: &[Field]) -> Result<f64> {
    let grid = op.grid();
    let a = op.dense()?;
    let n2 = a.nrows();
    // B = W A W with W = (1 + k²)^{−1/2}; both factors are symmetric
    let wa = h1_inv_sqrt_columns(grid, &a)?;
    let b = h1_inv_sqrt_columns(grid, &wa.transpose())?;
    let b = (&b + b.transpose()) * 0.5;

    // ⟨W y, c⟩ = yᵀ(W c), so the constraints become orthogonality to W c
    let mut d = DMatrix::<f64>::zeros(n2, constraints.len());
    for (j, c) in constraints.iter().enumerate() {
        if c.grid() != grid {
            return Err(Error::GridMismatch);
        }
        d.set_column(j, &DVector::from_vec(h1_inv_sqrt(grid, &c.to_real())?));
    }
    let q = if constraints.is_empty() { d } else { orthonormalize(d) };
    let qtb = q.transpose() * &b;
    let bq = &b * &q;
    let qbq = &qtb * &q;
    let proj = &b - &q * &qtb - &bq * q.transpose() + &q * qbq * q.transpose();
    let big = 1e2 * (0..n2).fold(1.0f64, |m, i| m.max(b[(i, i)].abs()));
    let mut bp = proj + &q * q.transpose() * big;
    bp = (&bp + bp.transpose()) * 0.5;
    let vals = bp.symmetric_eigenvalues();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::EigenFailure("non-finite constrained eigenvalue".into()));
    }
    Ok(min)
}

/// The constraint fields iφ, ∂ₓφ, J'(φ) of the modulation decomposition.
pub fn modulation_constraints(base: &Field, sigma: f64) -> Result<[Field; 3]> {
    Ok([base.mul_i(), dx(base), apply_j_prime(base, sigma)?])
}

/// Jacobian of (F₁, F₂, F₃) with respect to (θ, y, λ) at (0, 0, 0; φ), assembled
/// from the inner products of iφ, ∂ₓφ, J'(φ) and ψ.
pub fn modulation_jacobian(base: &Field, psi: &Field, sigma: f64) -> Result<Matrix3<f64>> {
    let [iphi, phix, jp] = modulation_constraints(base, sigma)?;
    let d_theta = -&iphi;
    let d_y = phix.clone();
    let d_lambda = -psi;
    let rows = [&iphi, &phix, &jp];
    let cols = [&d_theta, &d_y, &d_lambda];
    let mut m = Matrix3::zeros();
    for (r, g) in rows.iter().enumerate() {
        for (c, e) in cols.iter().enumerate() {
            m[(r, c)] = inner(e, g)?;
        }
    }
    Ok(m)
}

/// 4σ(2−σ)ω M(φ)² ⟨J'(φ), ψ⟩, the closed form of the Jacobian determinant at critical speed.
pub fn jacobian_det_formula(base: &Field, psi: &Field, params: &SolitonParams) -> Result<f64> {
    let s = params.sigma;
    let m = conserved_set(base, s)?.m;
    let jp = apply_j_prime(base, s)?;
    Ok(4.0 * s * (2.0 - s) * params.omega * m * m * inner(&jp, psi)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub negative: usize,
    pub near_zero: usize,
    pub lowest: f64,
    pub capture_iphi: f64,
    pub capture_dx_phi: f64,
    pub residual: f64,
}

/// Negative count, near-zero count and kernel capture of iφ, ∂ₓφ.
pub fn spectrum_summary(op: &SecondVariation, k: usize) -> Result<SpectrumSummary> {
    let sp = spectrum(op, k)?;
    let base = soliton_field(op.params(), op.grid())?;
    let zero = sp.near_zero(1e-4 * sp.scale.max(1.0));
    Ok(SpectrumSummary {
        negative: sp.negative_count(),
        near_zero: zero.len(),
        lowest: sp.values[0],
        capture_iphi: sp.capture(&base.mul_i(), &zero)?,
        capture_dx_phi: sp.capture(&dx(&base), &zero)?,
        residual: sp.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conserved::j_functional;
    use crate::critical::{critical_constants, psi_field};
    use crate::numerics::spectral::h1_norm;

    fn setup(n: usize) -> (SolitonParams, Grid, Field) {
        let p = SolitonParams::new(1.5, 1.0, 0.5).unwrap();
        let g = p.auto_grid(n).unwrap();
        let phi = soliton_field(&p, &g).unwrap();
        (p, g, phi)
    }

    /// Smooth pseudo-random field from a fixed linear congruential sequence.
    fn smooth_field(g: &Grid, seed: u64) -> Field {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let coefs: Vec<(f64, f64, f64, f64)> = (0..8).map(|_| (next(), next(), next(), 3.0 * next())).collect();
        Field::from_fn(g, |x| {
            let env = (-x * x / 16.0).exp();
            let mut z = Complex64::new(0.0, 0.0);
            for (m, &(a, b, _, sh)) in coefs.iter().enumerate() {
                z += Complex64::new(a, b) * (m as f64 * 0.4 * (x - sh)).cos();
            }
            z * env
        })
    }

    #[test]
    fn s_prime_vanishes_on_soliton() {
        let (p, _g, phi) = setup(2048);
        assert!(l2_norm(&apply_s_prime(&phi, &p).unwrap()) <= 1e-8);
        let z = Field::zeros(phi.grid());
        assert_eq!(l2_norm(&apply_s_prime(&z, &p).unwrap()), 0.0);
    }

    #[test]
    fn s_prime_linear_symbol() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = SolitonParams::new(1.5, 1.0, 0.5).unwrap();
        let k = std::f64::consts::PI / 20.0;
        let u = Field::from_fn(&g, |x| Complex64::from_polar(1e-9, k * x));
        let r = apply_s_prime(&u, &p).unwrap();
        let want = &u * (k * k + 1.0 - 0.5 * k);
        // the nonlinear term is O(1e-9)^{2σ+1}, far below rounding
        assert!(l2_norm(&(&r - &want)) < 1e-20);
    }

    #[test]
    fn s_double_prime_on_phi_and_dx_phi() {
        let (p, _g, phi) = setup(2048);
        let op = SecondVariation::new(&phi, &p).unwrap();
        let s = p.sigma;
        let phix = dx(&phi);
        let r1 = op.apply(&phi).unwrap();
        let want1 = phi.zip_map(&phix, |u, ux| Complex64::new(0.0, -2.0 * s) * u.norm().powf(2.0 * s) * ux);
        assert!(l2_norm(&(&r1 - &want1)) <= 1e-7);
        let r2 = op.apply(&phix.mul_i()).unwrap();
        let want2 = phi.map(|u| -2.0 * s * p.omega * u.norm().powf(2.0 * s) * u);
        assert!(l2_norm(&(&r2 - &want2)) <= 1e-7);
    }

    #[test]
    fn j_prime_relation_and_gradient() {
        let (p, g, phi) = setup(2048);
        let s = p.sigma;
        let jp = apply_j_prime(&phi, s).unwrap();
        let sp = apply_s_double_prime(&phi, &phi, &p).unwrap();
        let want = &sp * (-(s + 1.0) / s);
        assert!(l2_norm(&(&jp - &want)) <= 1e-7);
        assert_eq!(l2_norm(&apply_j_prime(&Field::zeros(&g), s).unwrap()), 0.0);
        let v = smooth_field(&g, 3);
        let exact = inner(&jp, &v).unwrap();
        let fd = |h: f64| (j_functional(&phi.axpy(h, &v), s) - j_functional(&phi.axpy(-h, &v), s)) / (2.0 * h);
        let (e1, e2) = ((fd(1e-2) - exact).abs(), (fd(1e-3) - exact).abs());
        assert!(e2 < 1e-5 * exact.abs().max(1.0) && e1 > 30.0 * e2, "{e1} {e2}");
    }

    #[test]
    fn self_adjoint_on_smooth_fields() {
        let (p, g, phi) = setup(1024);
        let op = SecondVariation::new(&phi, &p).unwrap();
        for seed in 0..20 {
            let f = smooth_field(&g, 2 * seed + 1);
            let h = smooth_field(&g, 2 * seed + 2);
            let lhs = inner(&op.apply(&f).unwrap(), &h).unwrap();
            let rhs = inner(&f, &op.apply(&h).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8 * l2_norm(&f) * l2_norm(&h), "seed {seed}: {lhs} {rhs}");
        }
    }

    #[test]
    fn finite_difference_of_s_prime() {
        let (p, g, phi) = setup(1024);
        let f = smooth_field(&g, 11);
        let exact = apply_s_double_prime(&f, &phi, &p).unwrap();
        let err = |h: f64| {
            let a = apply_s_prime(&phi.axpy(h, &f), &p).unwrap();
            let b = apply_s_prime(&phi.axpy(-h, &f), &p).unwrap();
            l2_norm(&(&(&(&a - &b) * (0.5 / h)) - &exact))
        };
        let ratio = err(1e-2) / err(1e-3);
        assert!(ratio > 70.0 && ratio < 130.0, "{ratio}");
    }

    #[test]
    fn dense_matrix_is_symmetric_and_matches_apply() {
        let p = SolitonParams::new(1.5, 1.0, 0.5).unwrap();
        let g = Grid::new(12.0, 512).unwrap();
        let phi = crate::soliton::sample(&p, &g);
        let op = SecondVariation::new(&phi, &p).unwrap();
        let a = op.dense().unwrap();
        assert_eq!(a, a.transpose());
        let f = Field::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.3 * x * (-x * x).exp()));
        let av = &a * DVector::from_vec(f.to_real());
        let direct = op.apply(&f).unwrap().to_real();
        let diff: f64 = av.iter().zip(&direct).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff < 1e-6 * av.norm(), "{diff}");
    }

    #[test]
    fn spectrum_has_one_negative_direction_and_gauge_kernel() {
        let p = SolitonParams::new(1.5, 1.0, 0.5).unwrap();
        let g = p.auto_grid(512).unwrap();
        let op = SecondVariation::at_soliton(&p, &g).unwrap();
        let s = spectrum_summary(&op, 6).unwrap();
        assert_eq!(s.negative, 1, "{s:?}");
        assert!(s.near_zero >= 2, "{s:?}");
        assert!(s.capture_iphi > 0.999 && s.capture_dx_phi > 0.999, "{s:?}");
        assert!(s.residual < 1e-6, "{s:?}");
    }

    #[test]
    fn critical_point_operator_relations() {
        let d = critical_constants(1.5, 1.0).unwrap();
        let p = d.params();
        let g = p.auto_grid(2048).unwrap();
        let phi = soliton_field(&p, &g).unwrap();
        let psi = psi_field(&p, &d.direction(), &g).unwrap();
        let op = SecondVariation::new(&phi, &p).unwrap();
        let spsi = op.apply(&psi).unwrap();
        let q = phi.zip_map(&dx(&phi), |u, ux| d.mu * u + Complex64::new(0.0, d.nu) * ux);
        assert!(l2_norm(&(&spsi + &q)) <= 1e-5, "{}", l2_norm(&(&spsi + &q)));
        let form = inner(&spsi, &psi).unwrap();
        assert!(form.abs() <= 1e-6 * h1_norm(&psi).unwrap().powi(2), "{form}");
        let jac = modulation_jacobian(&phi, &psi, p.sigma).unwrap();
        let want = jacobian_det_formula(&phi, &psi, &p).unwrap();
        assert!((jac.determinant() - want).abs() <= 1e-5 * want.abs(), "{} {want}", jac.determinant());
    }

    #[test]
    fn coercivity_at_critical_speed() {
        let d = critical_constants(1.5, 1.0).unwrap();
        let p = d.params();
        let g = p.auto_grid(256).unwrap();
        let phi = soliton_field(&p, &g).unwrap();
        let op = SecondVariation::new(&phi, &p).unwrap();
        let cons = modulation_constraints(&phi, p.sigma).unwrap();
        let k = coercivity_constant(&op, &cons).unwrap();
        assert!(k > 0.0, "{k}");
        let scaled = [&cons[0] * 3.0, &cons[1] * -0.5, &cons[2] * 1e3];
        let k2 = coercivity_constant(&op, &scaled).unwrap();
        assert!((k - k2).abs() <= 1e-10 * k.abs().max(1.0), "{k} {k2}");
        let k3 = coercivity_constant(&op, &cons[..2]).unwrap();
        assert!(k3 <= 0.0, "{k3}");
    }
}
