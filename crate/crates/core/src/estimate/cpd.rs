//! Canonical polyadic decomposition by alternating least squares.
//!
//! Large tensors are first compressed to a small Tucker core: a randomized
//! range finder (with subspace iterations) per mode down to `L + oversample`,
//! then a truncated HOSVD of that core down to `L`. ALS runs on the `L x L x L`
//! core and the factors are lifted back with the mode bases. For a rank-`L`
//! tensor this loses nothing.
//!
//! The Doppler columns of a short pilot burst are nearly collinear, so
//! unconstrained ALS alone converges slowly. Restart 0 therefore starts from
//! the shift-invariance (ESPRIT-type) solution of the Vandermonde frequency
//! mode.

use log::warn;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, ChannelTensor};
use crate::{Complex, Error, Result};

pub type CMatrix = DMatrix<Complex>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpdConfig {
    pub max_iter: usize,
    /// Stop once the largest relative factor change in a sweep drops below this.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Compress to a Tucker core before ALS.
    pub compress: bool,
    /// Extra compressed dimensions beyond `L` per mode.
    pub oversample: usize,
    /// Subspace iterations refining each sketched basis.
    pub power_iters: usize,
}

impl Default for CpdConfig {
    fn default() -> Self {
        CpdConfig { max_iter: 500, tol: 1e-10, restarts: 5, seed: 0x5eed, compress: true, oversample: 4, power_iters: 1 }
    }
}

/// Factor matrices of a rank-`L` CP model plus fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringEstimates {
    pub b_s: CMatrix,
    pub b_f: CMatrix,
    pub b_t: CMatrix,
    /// `|H - reconstruction|_F / |H|_F`.
    pub als_residual: f64,
    pub restarts_used: usize,
    pub converged: bool,
    /// Common delay removed from the tensor before factorisation, seconds.
    pub bulk_delay: f64,
    /// False where a column cannot be normalised (near-zero first entry).
    pub column_valid: Vec<bool>,
}

impl SteeringEstimates {
    pub fn rank(&self) -> usize {
        self.b_s.ncols()
    }

    /// `sum_l b_s[:,l] (x) b_f[:,l] (x) b_t[:,l]`, scaled by `gains` if given.
    pub fn reconstruct(&self, gains: Option<&[Complex]>) -> ChannelTensor {
        let (m, nf, nt) = (self.b_s.nrows(), self.b_f.nrows(), self.b_t.nrows());
        let mut out = ChannelTensor::zeros(m, nf, nt);
        let data = out.as_mut_slice();
        for l in 0..self.rank() {
            let g = gains.map_or(Complex::new(1.0, 0.0), |g| g[l]);
            for k in 0..nt {
                for s in 0..nf {
                    let w = g * self.b_f[(s, l)] * self.b_t[(k, l)];
                    let base = m * (s + nf * k);
                    for i in 0..m {
                        data[base + i] += w * self.b_s[(i, l)];
                    }
                }
            }
        }
        out
    }
}

/// Generic-position form of Kruskal's condition:
/// `min(M,L) + min(N_f,L) + min(N_t,L) >= 2L + 2`.
pub fn kruskal_condition(dims: (usize, usize, usize), l: usize) -> bool {
    dims.0.min(l) + dims.1.min(l) + dims.2.min(l) >= 2 * l + 2
}

/// Dense third-order tensor, first index fastest.
#[derive(Debug, Clone)]
struct Dense3 {
    dims: [usize; 3],
    data: Vec<Complex>,
}

impl Dense3 {
    fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Mode-`n` unfolding, `dims[n] x (product of the others)`; column
    /// `a + dims[a] b` for the remaining modes `a < b`.
    fn unfold(&self, mode: usize) -> CMatrix {
        let [d0, d1, d2] = self.dims;
        match mode {
            0 => CMatrix::from_column_slice(d0, d1 * d2, &self.data),
            2 => CMatrix::from_column_slice(d0 * d1, d2, &self.data).transpose(),
            _ => {
                let mut u = CMatrix::zeros(d1, d0 * d2);
                for k in 0..d2 {
                    for j in 0..d1 {
                        let base = d0 * (j + d1 * k);
                        for i in 0..d0 {
                            u[(j, i + d0 * k)] = self.data[base + i];
                        }
                    }
                }
                u
            }
        }
    }

    fn fold(mode: usize, u: &CMatrix, dims: [usize; 3]) -> Dense3 {
        let [d0, d1, d2] = dims;
        let data = match mode {
            0 => u.as_slice().to_vec(),
            2 => u.transpose().as_slice().to_vec(),
            _ => {
                let mut data = vec![Complex::new(0.0, 0.0); d0 * d1 * d2];
                for k in 0..d2 {
                    for j in 0..d1 {
                        let base = d0 * (j + d1 * k);
                        for i in 0..d0 {
                            data[base + i] = u[(j, i + d0 * k)];
                        }
                    }
                }
                data
            }
        };
        Dense3 { dims, data }
    }
}

/// `X Y` for `X` stored column-major as `rows x (x.len() / rows)`.
fn mul_raw(x: &[Complex], rows: usize, y: &CMatrix) -> CMatrix {
    let r = y.ncols();
    // y transposed so that each X column reads one contiguous row of weights
    let yt: Vec<Complex> = y.transpose().as_slice().to_vec();
    let mut out = vec![Complex::new(0.0, 0.0); rows * r];
    for (xc, w) in x.chunks_exact(rows).zip(yt.chunks_exact(r)) {
        for (oc, wc) in out.chunks_exact_mut(rows).zip(w) {
            for (o, v) in oc.iter_mut().zip(xc) {
                *o += v * wc;
            }
        }
    }
    CMatrix::from_vec(rows, r, out)
}

/// `X^H Q` for `X` stored column-major as `rows x (x.len() / rows)`.
fn adjoint_mul_raw(x: &[Complex], rows: usize, q: &CMatrix) -> CMatrix {
    let r = q.ncols();
    let n = x.len() / rows;
    let qs = q.as_slice();
    let mut out = vec![Complex::new(0.0, 0.0); n * r];
    for (col, xc) in x.chunks_exact(rows).enumerate() {
        for (c, qc) in qs.chunks_exact(rows).enumerate() {
            let mut acc = Complex::new(0.0, 0.0);
            for (v, w) in xc.iter().zip(qc) {
                acc += v.conj() * w;
            }
            out[col * r + c] = acc;
        }
    }
    // out is row-major n x r
    CMatrix::from_row_slice(n, r, &out)
}

/// Khatri-Rao product with row index `a + rows(fa) b`.
fn khatri_rao(fa: &CMatrix, fb: &CMatrix) -> CMatrix {
    let (na, nb) = (fa.nrows(), fb.nrows());
    CMatrix::from_fn(na * nb, fa.ncols(), |r, c| fa[(r % na, c)] * fb[(r / na, c)])
}

/// The three unfoldings of a small tensor, reused across ALS sweeps.
struct Unfolded {
    u: [CMatrix; 3],
    tensor: Dense3,
}

impl Unfolded {
    fn new(t: &Dense3) -> Self {
        Unfolded { u: [t.unfold(0), t.unfold(1), t.unfold(2)], tensor: t.clone() }
    }

    fn dims(&self) -> [usize; 3] {
        [self.u[0].nrows(), self.u[1].nrows(), self.u[2].nrows()]
    }

    /// `|X - [[A, B, C]]|_F^2`.
    fn misfit_sqr(&self, f: [&CMatrix; 3]) -> f64 {
        (&self.u[0] - f[0] * khatri_rao(f[1], f[2]).transpose()).norm_squared()
    }
}

fn orthonormal_columns(y: CMatrix) -> CMatrix {
    let qr = y.qr();
    qr.q()
}

/// Column-major `n x l` factor used inside the ALS sweeps.
#[derive(Clone)]
struct Factor {
    n: usize,
    data: Vec<Complex>,
}

impl Factor {
    fn from_matrix(m: &CMatrix) -> Self {
        Factor { n: m.nrows(), data: m.as_slice().to_vec() }
    }

    fn to_matrix(&self, l: usize) -> CMatrix {
        CMatrix::from_column_slice(self.n, l, &self.data)
    }

    fn col(&self, c: usize) -> &[Complex] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    /// Hermitian-transposed Gram `G[p, q] = sum_j F[j, p] conj(F[j, q])`.
    fn gram(&self, l: usize) -> Vec<Complex> {
        let mut g = vec![Complex::new(0.0, 0.0); l * l];
        for p in 0..l {
            for q in 0..l {
                g[p + l * q] = self.col(p).iter().zip(self.col(q)).map(|(x, y)| x * y.conj()).sum();
            }
        }
        g
    }
}

/// `X_(n) conj(KR)` for mode `n` of the (small) core, looping over the raw
/// tensor so nothing is materialised.
fn mttkrp(x: &Dense3, mode: usize, f: [&Factor; 3], l: usize) -> Factor {
    let [d0, d1, d2] = x.dims;
    let mut out = Factor { n: x.dims[mode], data: vec![Complex::new(0.0, 0.0); x.dims[mode] * l] };
    let m = &mut out.data;
    let mut w = vec![Complex::new(0.0, 0.0); l];
    for k in 0..d2 {
        for j in 0..d1 {
            let slab = &x.data[d0 * (j + d1 * k)..d0 * (j + d1 * k + 1)];
            match mode {
                0 => {
                    for c in 0..l {
                        w[c] = (f[1].data[j + d1 * c] * f[2].data[k + d2 * c]).conj();
                    }
                    for c in 0..l {
                        let dst = &mut m[d0 * c..d0 * (c + 1)];
                        for (o, v) in dst.iter_mut().zip(slab) {
                            *o += v * w[c];
                        }
                    }
                }
                _ => {
                    for c in 0..l {
                        let s: Complex = slab.iter().zip(f[0].col(c)).map(|(v, a)| v * a.conj()).sum();
                        if mode == 1 {
                            m[j + d1 * c] += s * f[2].data[k + d2 * c].conj();
                        } else {
                            m[k + d2 * c] += s * f[1].data[j + d1 * c].conj();
                        }
                    }
                }
            }
        }
    }
    out
}

/// Solves `A Gamma = M` for `A` (`Gamma` is `l x l`, column-major) by LU with
/// partial pivoting on `Gamma^T`; falls back to a pseudo-inverse when a
/// pivot vanishes.
fn solve_gram(m: &Factor, gamma: &[Complex], l: usize) -> Factor {
    // lu holds Gamma^T
    let mut lu: Vec<Complex> = (0..l * l).map(|idx| gamma[(idx / l) + l * (idx % l)]).collect();
    let mut perm: Vec<usize> = (0..l).collect();
    let scale = lu.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut singular = scale == 0.0 || !scale.is_finite();
    for col in 0..l {
        if singular {
            break;
        }
        let piv = (col..l).max_by(|a, b| lu[*a + l * col].norm().total_cmp(&lu[*b + l * col].norm())).unwrap();
        if lu[piv + l * col].norm() <= 1e-14 * scale {
            singular = true;
            break;
        }
        if piv != col {
            for c in 0..l {
                lu.swap(col + l * c, piv + l * c);
            }
            perm.swap(col, piv);
        }
        let d = lu[col + l * col];
        for r in col + 1..l {
            let factor = lu[r + l * col] / d;
            lu[r + l * col] = factor;
            for c in col + 1..l {
                let v = lu[col + l * c];
                lu[r + l * c] -= factor * v;
            }
        }
    }
    if singular {
        let g = CMatrix::from_column_slice(l, l, gamma);
        let pinv = g.pseudo_inverse(1e-12).unwrap_or_else(|_| CMatrix::zeros(l, l));
        return Factor::from_matrix(&(m.to_matrix(l) * pinv));
    }
    let n = m.n;
    let mut out = Factor { n, data: vec![Complex::new(0.0, 0.0); n * l] };
    let mut rhs = vec![Complex::new(0.0, 0.0); l];
    for i in 0..n {
        for (r, p) in perm.iter().enumerate() {
            rhs[r] = m.data[i + n * p];
        }
        for r in 0..l {
            for c in 0..r {
                let v = lu[r + l * c] * rhs[c];
                rhs[r] -= v;
            }
        }
        for r in (0..l).rev() {
            for c in r + 1..l {
                let v = lu[r + l * c] * rhs[c];
                rhs[r] -= v;
            }
            rhs[r] /= lu[r + l * r];
        }
        for c in 0..l {
            out.data[i + n * c] = rhs[c];
        }
    }
    out
}

fn normalize_columns(f: &mut Factor, into: &mut Factor, l: usize) {
    for c in 0..l {
        let n = f.col(c).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 && n.is_finite() {
            f.data[c * f.n..(c + 1) * f.n].iter_mut().for_each(|v| *v /= n);
            into.data[c * into.n..(c + 1) * into.n].iter_mut().for_each(|v| *v *= n);
        }
    }
}

fn relative_change(new: &Factor, old: &Factor) -> f64 {
    let n: f64 = new.data.iter().map(|v| v.norm_sqr()).sum();
    if n == 0.0 {
        return 0.0;
    }
    let d: f64 = new.data.iter().zip(&old.data).map(|(a, b)| (a - b).norm_sqr()).sum();
    (d / n).sqrt()
}

struct AlsRun {
    factors: [CMatrix; 3],
    misfit_sqr: f64,
    converged: bool,
}

fn als(core: &Unfolded, init: [CMatrix; 3], cfg: &CpdConfig) -> AlsRun {
    let l = init[0].ncols();
    let [mut a, mut b, mut c] = init.map(|m| Factor::from_matrix(&m));
    let had = |x: Vec<Complex>, y: Vec<Complex>| -> Vec<Complex> { x.iter().zip(&y).map(|(p, q)| p * q).collect() };
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let (a0, b0, c0) = (a.clone(), b.clone(), c.clone());
        a = solve_gram(&mttkrp(&core.tensor, 0, [&a, &b, &c], l), &had(b.gram(l), c.gram(l)), l);
        b = solve_gram(&mttkrp(&core.tensor, 1, [&a, &b, &c], l), &had(a.gram(l), c.gram(l)), l);
        c = solve_gram(&mttkrp(&core.tensor, 2, [&a, &b, &c], l), &had(a.gram(l), b.gram(l)), l);
        normalize_columns(&mut a, &mut c, l);
        normalize_columns(&mut b, &mut c, l);
        let step = relative_change(&a, &a0).max(relative_change(&b, &b0)).max(relative_change(&c, &c0));
        if !step.is_finite() {
            break;
        }
        if step < cfg.tol {
            converged = true;
            break;
        }
    }
    let factors = [a.to_matrix(l), b.to_matrix(l), c.to_matrix(l)];
    let misfit_sqr = core.misfit_sqr([&factors[0], &factors[1], &factors[2]]);
    AlsRun { factors, misfit_sqr, converged }
}

/// Leading left singular vectors of each unfolding, padded with noise when a
/// mode is smaller than `L`.
fn svd_init(core: &Unfolded, l: usize, rng: &mut ChaCha8Rng) -> [CMatrix; 3] {
    let dims = core.dims();
    let mut out: Vec<CMatrix> = Vec::with_capacity(3);
    for mode in 0..3 {
        let u = core.u[mode].clone().svd(true, false).u.expect("left singular vectors");
        let mut f = CMatrix::from_fn(dims[mode], l, |_, _| complex_gaussian(1e-3, rng));
        for c in 0..l.min(u.ncols()) {
            f.column_mut(c).copy_from(&u.column(c));
        }
        out.push(f);
    }
    let c = out.pop().unwrap();
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    [a, b, c]
}

/// Algebraic start from the shift invariance of the frequency mode: the
/// generators `z_l` of the Vandermonde columns are the eigenvalues of
/// `U_up^+ U_down` for the dominant frequency subspace `U`; the other two
/// factors follow from rank-1 fits of the rows of `B_f^+ G_(1)`.
/// `None` when the frequency mode is too short or the eigenproblem fails.
fn shift_invariance_init(core: &Unfolded, q_f: Option<&CMatrix>, nf: usize, l: usize) -> Option<[CMatrix; 3]> {
    if nf < l + 1 {
        return None;
    }
    let g1 = core.u[1].clone();
    let w = g1.clone().svd(true, false).u?;
    if w.ncols() < l {
        return None;
    }
    let w = w.columns(0, l).into_owned();
    let u = match q_f {
        Some(q) => q * &w,
        None => w,
    };
    let up = u.rows(0, nf - 1).into_owned();
    let down = u.rows(1, nf - 1).into_owned();
    let psi = up.pseudo_inverse(1e-12).ok()? * down;
    let z = psi.eigenvalues()?;
    let vand = CMatrix::from_fn(nf, l, |s, c| {
        let zc = z[c];
        if zc.norm() > 0.0 {
            (zc / zc.norm()).powi(s as i32)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    let b = match q_f {
        Some(q) => q.adjoint() * vand,
        None => vand,
    };
    let x = b.clone().pseudo_inverse(1e-12).ok()? * g1;
    let [r0, _, r2] = core.dims();
    let mut a = CMatrix::zeros(r0, l);
    let mut c = CMatrix::zeros(r2, l);
    for col in 0..l {
        // row `col` of X holds conj-free entries G[i, ., k] ordered i + r0 k
        let slab = CMatrix::from_fn(r0, r2, |i, k| x[(col, i + r0 * k)]);
        let svd = slab.svd(true, true);
        let (uu, vt) = (svd.u?, svd.v_t?);
        let sigma = svd.singular_values[0];
        a.column_mut(col).copy_from(&(uu.column(0) * Complex::new(sigma, 0.0)));
        c.column_mut(col).copy_from(&vt.row(0).transpose());
    }
    let ok = [&a, &b, &c].iter().all(|f| f.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    ok.then_some([a, b, c])
}

fn random_init(core: &Unfolded, l: usize, rng: &mut ChaCha8Rng) -> [CMatrix; 3] {
    let dims = core.dims();
    let f = |n: usize, rng: &mut ChaCha8Rng| CMatrix::from_fn(n, l, |_, _| complex_gaussian(1.0, rng));
    let a = f(dims[0], rng);
    let b = f(dims[1], rng);
    let c = f(dims[2], rng);
    [a, b, c]
}

/// Rank-`l` CP decomposition of `h`. Restart 0 starts from the
/// shift-invariance solution of the frequency mode, restart 1 from the
/// leading singular vectors of each unfolding, the rest from seeded random
/// factors;
/// the best fit wins (ties go to the lower restart index).
pub fn cpd(h: &ChannelTensor, l: usize, cfg: &CpdConfig) -> Result<SteeringEstimates> {
    let (m, nf, nt) = h.dims();
    if l == 0 {
        return Err(Error::config("CP rank must be at least 1"));
    }
    if l > (m * nf).min(m * nt).min(nf * nt) {
        return Err(Error::config(format!("CP rank {l} too large for a {m}x{nf}x{nt} tensor")));
    }
    if !h.is_finite() {
        return Err(Error::numerical("channel tensor has non-finite entries"));
    }
    if !kruskal_condition((m, nf, nt), l) {
        warn!("Kruskal condition fails for L = {l} on {m}x{nf}x{nt}; factors may not be unique");
    }
    let src = h.as_slice();
    let total: f64 = src.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::numerical("channel tensor is identically zero"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bases: Vec<Option<CMatrix>> = vec![None, None, None];
    let width = l + cfg.oversample;
    let mut core = if cfg.compress && m > width {
        // the raw layout is the mode-0 unfolding, so this stage works in place
        let omega = CMatrix::from_fn(nf * nt, width, |_, _| complex_gaussian(1.0, &mut rng));
        let mut q = orthonormal_columns(mul_raw(src, m, &omega));
        for _ in 0..cfg.power_iters {
            let z = adjoint_mul_raw(src, m, &q);
            q = orthonormal_columns(mul_raw(src, m, &z));
        }
        let z = adjoint_mul_raw(src, m, &q);
        bases[0] = Some(q);
        Dense3 { dims: [width, nf, nt], data: z.adjoint().as_slice().to_vec() }
    } else {
        Dense3 { dims: [m, nf, nt], data: src.to_vec() }
    };
    if cfg.compress {
        for mode in [1, 2] {
            if core.dims[mode] <= width {
                continue;
            }
            let mut dims = core.dims;
            dims[mode] = width;
            let x = core.unfold(mode);
            let omega = CMatrix::from_fn(x.ncols(), width, |_, _| complex_gaussian(1.0, &mut rng));
            let mut q = orthonormal_columns(&x * omega);
            for _ in 0..cfg.power_iters {
                let z = x.adjoint() * &q;
                q = orthonormal_columns(&x * z);
            }
            core = Dense3::fold(mode, &(q.adjoint() * x), dims);
            bases[mode] = Some(q);
        }
    }
    // energy outside the compressed subspace
    let outside = (total - core.norm_sqr()).max(0.0);
    if cfg.compress {
        // second stage: truncate the core to the leading L-dimensional
        // subspace of every mode
        for mode in 0..3 {
            if core.dims[mode] > l {
                let x = core.unfold(mode);
                let u = x.clone().svd(true, false).u.ok_or_else(|| Error::numerical("core SVD failed"))?;
                let u = u.columns(0, l).into_owned();
                let mut dims = core.dims;
                dims[mode] = l;
                core = Dense3::fold(mode, &(u.adjoint() * x), dims);
                bases[mode] = Some(match bases[mode].take() {
                    Some(q) => q * u,
                    None => u,
                });
            }
        }
    }
    let core = Unfolded::new(&core);

    let mut best: Option<AlsRun> = None;
    let restarts = cfg.restarts.max(1);
    for r in 0..restarts {
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1 + r as u64));
        let init = match r {
            0 => shift_invariance_init(&core, bases[1].as_ref(), nf, l).unwrap_or_else(|| svd_init(&core, l, &mut init_rng)),
            1 => svd_init(&core, l, &mut init_rng),
            _ => random_init(&core, l, &mut init_rng),
        };
        let run = als(&core, init, cfg);
        let better = match &best {
            None => true,
            Some(b) => run.misfit_sqr.is_finite() && run.misfit_sqr < b.misfit_sqr * (1.0 - 1e-9) - 1e-300,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    if !best.misfit_sqr.is_finite() {
        return Err(Error::numerical("ALS diverged"));
    }
    let [a, b, c] = best.factors;
    let lift = |f: CMatrix, mode: usize| match &bases[mode] {
        Some(q) => q * f,
        None => f,
    };
    Ok(SteeringEstimates {
        b_s: lift(a, 0),
        b_f: lift(b, 1),
        b_t: lift(c, 2),
        als_residual: ((best.misfit_sqr + outside) / total).sqrt(),
        restarts_used: restarts,
        converged: best.converged,
        bulk_delay: 0.0,
        column_valid: vec![true; l],
    })
}

/// `alpha_l = B_s(0,l) B_f(0,l) B_t(0,l)`, then every column divided by its
/// first entry. Columns with a first entry below `1e-12` in magnitude are
/// left as they are and marked invalid.
pub fn resolve_scaling(mut est: SteeringEstimates) -> (SteeringEstimates, Vec<Complex>) {
    let l = est.rank();
    let mut gains = vec![Complex::new(0.0, 0.0); l];
    for c in 0..l {
        let heads = [est.b_s[(0, c)], est.b_f[(0, c)], est.b_t[(0, c)]];
        if heads.iter().any(|v| v.norm() <= 1e-12) {
            est.column_valid[c] = false;
            continue;
        }
        gains[c] = heads[0] * heads[1] * heads[2];
        for (mat, head) in [(&mut est.b_s, heads[0]), (&mut est.b_f, heads[1]), (&mut est.b_t, heads[2])] {
            for v in mat.column_mut(c).iter_mut() {
                *v /= head;
            }
        }
    }
    (est, gains)
}

/// Per-column phase increment `angle(sum_n conj(b[n]) b[n+1])` of a
/// shift-invariant (Vandermonde) column.
pub fn vandermonde_roots(b: &CMatrix) -> Vec<f64> {
    (0..b.ncols())
        .map(|c| {
            let col = b.column(c);
            let mut acc = Complex::new(0.0, 0.0);
            for n in 0..col.len().saturating_sub(1) {
                acc += col[n].conj() * col[n + 1];
            }
            acc.arg()
        })
        .collect()
}
