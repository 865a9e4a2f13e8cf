//! Dense numeric kernel shared by every learnable component.
//!
//! Everything is row-major `f64`. Gradients are hand-derived per model and
//! stored in a [`ParamSet`] with the same slot layout as the parameters they
//! differentiate, so the optimizer and the finite-difference checker can treat
//! all models uniformly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::new",
                format!("{} entries for {rows}x{cols}", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("{cols} columns"),
                    format!("{} columns in row {i}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Entries drawn uniformly from `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                if bound > 0.0 {
                    rng.random_range(-bound..=bound)
                } else {
                    0.0
                }
            })
            .collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Standard matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "matmul",
                format!("lhs cols = rhs rows ({})", self.cols),
                format!("rhs rows = {}", rhs.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::shape(
                "t_matmul",
                format!("lhs rows = rhs rows ({})", self.rows),
                format!("rhs rows = {}", rhs.rows),
            ));
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let lhs_row = &self.data[k * self.cols..(k + 1) * self.cols];
            let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
            for (i, &a) in lhs_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::shape(
                "matmul_t",
                format!("lhs cols = rhs cols ({})", self.cols),
                format!("rhs cols = {}", rhs.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] = dot(a, rhs.row(j));
            }
        }
        Ok(out)
    }

    /// Adds `bias` (length `cols`) to every row.
    pub fn add_row_broadcast(&mut self, bias: &[f64]) {
        debug_assert_eq!(bias.len(), self.cols);
        for r in 0..self.rows {
            for (v, b) in self.row_mut(r).iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        self.require_same_shape(other, "zip_map")?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.require_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `i` of the output is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Matrix> {
        if perm.len() != self.rows {
            return Err(Error::shape(
                "permute_rows",
                format!("{} indices", self.rows),
                format!("{}", perm.len()),
            ));
        }
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(p));
        }
        Ok(out)
    }

    pub fn require_shape(&self, rows: usize, cols: usize, context: &'static str) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::shape(
                context,
                format!("{rows}x{cols}"),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        Ok(())
    }

    fn require_same_shape(&self, other: &Matrix, context: &'static str) -> Result<()> {
        other.require_shape(self.rows, self.cols, context)
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
///
/// A pivot below `1e-12` times the largest entry of `a` is treated as singular.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::shape(
            "solve_linear",
            format!("{n}x{n} system with {n} right-hand entries"),
            format!("{}x{} with {}", a.rows(), a.cols(), b.len()),
        ));
    }
    let scale = a.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::SingularSystem);
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m.get(i, col).abs().total_cmp(&m.get(j, col).abs()))
            .expect("non-empty range");
        if m.get(pivot, col).abs() <= 1e-12 * scale {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(pivot, c));
                m.set(pivot, c, tmp);
            }
            rhs.swap(col, pivot);
        }
        let p = m.get(col, col);
        for r in col + 1..n {
            let factor = m.get(r, col) / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m.get(r, c) - factor * m.get(col, c);
                m.set(r, c, v);
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m.get(r, c) * x[c]).sum();
        x[r] = (rhs[r] - s) / m.get(r, r);
    }
    Ok(x)
}

/// Mean squared error over all entries.
pub fn mse(yhat: &Matrix, y: &Matrix) -> Result<f64> {
    y.require_shape(yhat.rows(), yhat.cols(), "mse target")?;
    let n = yhat.len().max(1) as f64;
    Ok(yhat
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Mean absolute error over all entries.
pub fn mae(yhat: &Matrix, y: &Matrix) -> Result<f64> {
    y.require_shape(yhat.rows(), yhat.cols(), "mae target")?;
    let n = yhat.len().max(1) as f64;
    Ok(yhat
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n)
}

/// `∂ mse / ∂ yhat`.
pub fn mse_grad(yhat: &Matrix, y: &Matrix) -> Result<Matrix> {
    let n = yhat.len().max(1) as f64;
    yhat.zip_map(y, |a, b| 2.0 * (a - b) / n)
}

/// Named parameter slots plus the moment accumulators used by adaptive updates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
    step: u64,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a slot and returns its index.
    pub fn push(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        let (r, c) = value.shape();
        self.names.push(name.into());
        self.values.push(value);
        self.first_moment.push(Matrix::zeros(r, c));
        self.second_moment.push(Matrix::zeros(r, c));
        self.values.len() - 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, slot: usize) -> &Matrix {
        &self.values[slot]
    }

    #[inline]
    pub fn get_mut(&mut self, slot: usize) -> &mut Matrix {
        &mut self.values[slot]
    }

    pub fn by_name(&self, name: &str) -> Option<&Matrix> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.values[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn slots(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Same slots, all zero, fresh accumulators. Used as a gradient buffer.
    pub fn zeros_like(&self) -> ParamSet {
        let mut out = ParamSet::new();
        for (name, v) in self.slots() {
            out.push(name, Matrix::zeros(v.rows(), v.cols()));
        }
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values
            .iter()
            .flat_map(|m| m.data().iter().copied())
            .collect()
    }

    /// Overwrites all slots from a flat vector in [`flatten`](Self::flatten) order.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::shape(
                "ParamSet::assign_flat",
                format!("{} scalars", self.num_scalars()),
                format!("{}", flat.len()),
            ));
        }
        let mut offset = 0;
        for v in &mut self.values {
            let n = v.len();
            v.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|m| m.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Matrix::is_finite)
    }

    /// Index of the first slot holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.slots()
            .find(|(_, m)| !m.is_finite())
            .map(|(name, _)| name)
    }

    pub fn add_assign(&mut self, other: &ParamSet) -> Result<()> {
        self.require_same_layout(other, "ParamSet::add_assign")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    /// Applies `f` to every scalar of every slot.
    pub fn map_inplace(&mut self, mut f: impl FnMut(f64) -> f64) {
        for v in &mut self.values {
            for x in v.data_mut() {
                *x = f(*x);
            }
        }
    }

    fn require_same_layout(&self, other: &ParamSet, context: &'static str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::shape(
                context,
                format!("{} slots", self.len()),
                format!("{} slots", other.len()),
            ));
        }
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            if a.shape() != b.shape() {
                return Err(Error::shape(
                    context,
                    format!("slot {} ({}) {:?}", i, self.names[i], a.shape()),
                    format!("{:?}", b.shape()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimMethod {
    Sgd,
    #[serde(alias = "adam", alias = "adaptive-moment")]
    Adamw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub method: OptimMethod,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            method: OptimMethod::Adamw,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            method: OptimMethod::Sgd,
            learning_rate,
            ..Self::default()
        }
    }

    pub fn adamw(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    /// `learning_rate = 0` is accepted so frozen components can share the code path.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// One optimizer step, in place. Increments the step counter.
///
/// SGD: `p ← p − lr·(g + wd·p)`.
/// AdamW: bias-corrected moments with decoupled decay, `p ← p − lr·wd·p − lr·m̂/(√v̂ + eps)`.
pub fn optim_step(params: &mut ParamSet, grads: &ParamSet, cfg: &OptimConfig) -> Result<()> {
    params.require_same_layout(grads, "optim_step")?;
    cfg.validate()?;
    params.step += 1;
    let lr = cfg.learning_rate;
    let wd = cfg.weight_decay;
    match cfg.method {
        OptimMethod::Sgd => {
            for (p, g) in params.values.iter_mut().zip(&grads.values) {
                for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                    *pv -= lr * (gv + wd * *pv);
                }
            }
        }
        OptimMethod::Adamw => {
            let t = params.step as i32;
            let bc1 = 1.0 - cfg.beta1.powi(t);
            let bc2 = 1.0 - cfg.beta2.powi(t);
            for slot in 0..params.values.len() {
                let g = grads.values[slot].data();
                let m = params.first_moment[slot].data_mut();
                for (mv, gv) in m.iter_mut().zip(g) {
                    *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
                }
                let v = params.second_moment[slot].data_mut();
                for (vv, gv) in v.iter_mut().zip(g) {
                    *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
                }
                let m = params.first_moment[slot].data();
                let v = params.second_moment[slot].data();
                let p = params.values[slot].data_mut();
                for i in 0..p.len() {
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    p[i] -= lr * wd * p[i];
                    p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
                }
            }
        }
    }
    if let Some(slot) = params.first_non_finite() {
        return Err(Error::NonFinite {
            context: "optim_step",
            detail: format!("parameter slot {slot} diverged"),
        });
    }
    Ok(())
}

/// Largest relative discrepancy between `analytic` and central differences of `loss_fn`.
///
/// Each entry contributes `|a − c| / (|c| + 1e-8)`.
pub fn finite_diff_check<F>(
    mut loss_fn: F,
    params: &ParamSet,
    analytic: &ParamSet,
    h: f64,
) -> Result<f64>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step h must be positive, got {h}"
        )));
    }
    params.require_same_layout(analytic, "finite_diff_check")?;
    let n = params.num_scalars();
    if n >= 10_000 {
        return Err(Error::InvalidArgument(format!(
            "{n} scalars is too many to enumerate"
        )));
    }
    let base = params.flatten();
    let grad = analytic.flatten();
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut worst = 0.0_f64;
    for i in 0..n {
        flat[i] = base[i] + h;
        probe.assign_flat(&flat)?;
        let plus = loss_fn(&probe)?;
        flat[i] = base[i] - h;
        probe.assign_flat(&flat)?;
        let minus = loss_fn(&probe)?;
        flat[i] = base[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                context: "finite_diff_check",
                detail: format!("loss at scalar {i} is {plus} / {minus}"),
            });
        }
        let central = (plus - minus) / (2.0 * h);
        let rel = (grad[i] - central).abs() / (central.abs() + 1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Deterministic generator for a top-level seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for one component of a run, derived from `(seed, tag)`.
pub fn component_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_F42D))))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("p", Matrix::filled(1, 1, v));
        p
    }

    #[test]
    fn identity_product_is_neutral() {
        let a = Matrix::from_rows(&[[1.5, -2.0], [0.25, 4.0]]).unwrap();
        assert_eq!(Matrix::identity(2).matmul(&a).unwrap(), a);
    }

    #[test]
    fn small_product_by_hand() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[3.0, 7.0]);
    }

    #[test]
    fn zero_matrix_annihilates() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let z = Matrix::zeros(3, 2);
        assert_eq!(z.matmul(&a).unwrap(), Matrix::zeros(3, 2));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Shape { .. })));
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let mut rng = seeded_rng(3);
        let a = Matrix::uniform(4, 3, 1.0, &mut rng);
        let b = Matrix::uniform(4, 5, 1.0, &mut rng);
        let c = Matrix::uniform(5, 3, 1.0, &mut rng);
        let tn = a.t_matmul(&b).unwrap();
        let tn_ref = a.transpose().matmul(&b).unwrap();
        let nt = a.matmul_t(&c).unwrap();
        let nt_ref = a.matmul(&c.transpose()).unwrap();
        for (x, y) in tn.data().iter().zip(tn_ref.data()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        for (x, y) in nt.data().iter().zip(nt_ref.data()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn sgd_step_definition() {
        let mut p = single(1.0);
        let g = single(2.0);
        optim_step(&mut p, &g, &OptimConfig::sgd(0.1)).unwrap();
        assert_abs_diff_eq!(p.get(0).get(0, 0), 0.8, epsilon = 1e-15);
        assert_eq!(p.step(), 1);
    }

    #[test]
    fn sgd_with_decay_is_exact_formula() {
        let mut p = single(0.7);
        let g = single(-0.3);
        let cfg = OptimConfig {
            weight_decay: 0.05,
            ..OptimConfig::sgd(0.2)
        };
        optim_step(&mut p, &g, &cfg).unwrap();
        assert_eq!(p.get(0).get(0, 0), 0.7 - 0.2 * (-0.3 + 0.05 * 0.7));
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        for cfg in [OptimConfig::sgd(0.5), OptimConfig::adamw(0.5)] {
            let mut p = single(1.25);
            optim_step(&mut p, &single(0.0), &cfg).unwrap();
            assert_eq!(p.get(0).get(0, 0), 1.25);
        }
    }

    #[test]
    fn adamw_first_step() {
        // m̂ = 1, v̂ = 1 on the first step, so p' = −lr / (1 + eps).
        let mut p = single(0.0);
        optim_step(&mut p, &single(1.0), &OptimConfig::adamw(1e-3)).unwrap();
        assert_abs_diff_eq!(p.get(0).get(0, 0), -1e-3 / (1.0 + 1e-8), epsilon = 1e-18);
        assert_abs_diff_eq!(p.get(0).get(0, 0), -1e-3, epsilon = 1e-10);
    }

    #[test]
    fn optim_step_rejects_layout_mismatch() {
        let mut p = single(0.0);
        let mut g = ParamSet::new();
        g.push("p", Matrix::zeros(2, 1));
        assert!(optim_step(&mut p, &g, &OptimConfig::sgd(0.1)).is_err());
    }

    #[test]
    fn invalid_betas_rejected() {
        let cfg = OptimConfig {
            beta1: 1.0,
            ..OptimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn finite_diff_on_quadratic() {
        let mut rng = seeded_rng(11);
        let mut p = ParamSet::new();
        p.push("a", Matrix::uniform(3, 2, 1.0, &mut rng));
        p.push("b", Matrix::uniform(1, 4, 1.0, &mut rng));
        let mut analytic = p.clone();
        analytic.map_inplace(|v| 2.0 * v);
        let loss = |q: &ParamSet| Ok(q.flatten().iter().map(|v| v * v).sum::<f64>());
        let err = finite_diff_check(loss, &p, &analytic, 1e-5).unwrap();
        assert!(err < 1e-6, "err = {err}");
    }

    #[test]
    fn finite_diff_detects_zeroed_gradient() {
        let p = single(0.8);
        let analytic = p.zeros_like();
        let loss = |q: &ParamSet| Ok(q.get(0).get(0, 0).powi(2));
        let err = finite_diff_check(loss, &p, &analytic, 1e-5).unwrap();
        assert!((err - 1.0).abs() < 1e-6, "err = {err}");
    }

    #[test]
    fn finite_diff_rejects_non_finite_loss() {
        let p = single(0.8);
        let analytic = p.zeros_like();
        let loss = |_: &ParamSet| Ok(f64::NAN);
        assert!(matches!(
            finite_diff_check(loss, &p, &analytic, 1e-5),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn solve_linear_recovers_known_solution() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]).unwrap();
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|r| dot(a.row(r), &x)).collect();
        let got = solve_linear(&a, &b).unwrap();
        for (g, e) in got.iter().zip(x) {
            assert_abs_diff_eq!(*g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn solve_linear_flags_singular() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve_linear(&a, &[1.0, 2.0]),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn component_streams_are_distinct_and_reproducible() {
        let a: u64 = component_rng(7, 1).random();
        let b: u64 = component_rng(7, 2).random();
        let a2: u64 = component_rng(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
