//! Tabulated distance-from-origin on a Carnot group, used as a fast ball
//! membership test.
//!
//! By homogeneity `d(0, u) = |u|_h ρ(ω)` where `|·|_h` is a smooth homogeneous
//! norm and `ω = δ_{1/|u|_h} u` lies on its unit sphere. `ρ` is tabulated on a
//! cube-sphere grid (directions parametrized by Euclidean radial projection
//! onto the faces of `[−1, 1]ⁿ`) and interpolated with tensor Catmull–Rom
//! splines. Points whose estimate is within a local error band of a
//! threshold are resolved by precise shooting.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::distance::DistanceEngine;
use crate::error::{Error, Result};
use crate::flows::ChartBox;
use crate::group::CarnotGroup;
use crate::nilpotent::NilpotentFrame;
use crate::rng;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// `(Σ_w (Σ_{w_i = w} (u_i/κ_i)²)^{c/w})^{1/(2c)}` with `c = lcm(w)`.
///
/// The scales `κ_i` are chosen so the norm agrees with a given distance on
/// the coordinate axes, which keeps the tabulated ratio close to one.
#[derive(Clone, Debug)]
pub struct HomogeneousNorm {
    weights: Vec<u32>,
    layer_exps: Vec<(u32, f64)>,
    scales: Vec<f64>,
    power: f64,
}

impl HomogeneousNorm {
    pub fn new(weights: &[u32]) -> Self {
        Self::with_scales(weights, &vec![1.0; weights.len()])
    }

    pub fn with_scales(weights: &[u32], scales: &[f64]) -> Self {
        let c = weights.iter().fold(1, |acc, &w| acc / gcd(acc, w) * w);
        let mut layers: Vec<u32> = weights.to_vec();
        layers.sort_unstable();
        layers.dedup();
        HomogeneousNorm {
            weights: weights.to_vec(),
            layer_exps: layers.into_iter().map(|w| (w, (c / w) as f64)).collect(),
            scales: scales.to_vec(),
            power: 1.0 / (2 * c) as f64,
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(w, e) in &self.layer_exps {
            let sq: f64 = u
                .iter()
                .zip(&self.weights)
                .zip(&self.scales)
                .filter(|((_, &wi), _)| wi == w)
                .map(|((v, _), k)| (v / k).powi(2))
                .sum();
            acc += sq.powf(e);
        }
        acc.powf(self.power)
    }

    /// `δ_{1/|u|_h} u`.
    pub fn normalize(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let t = self.eval(u);
        (t, u.iter().zip(&self.weights).map(|(v, &w)| v / t.powi(w as i32)).collect())
    }

    fn layer_magnitudes(&self, u: &[f64]) -> Vec<(u32, f64)> {
        self.layer_exps
            .iter()
            .map(|&(w, _)| {
                let sq: f64 = u
                    .iter()
                    .zip(&self.weights)
                    .zip(&self.scales)
                    .filter(|((_, &wi), _)| wi == w)
                    .map(|((v, _), k)| (v / k).powi(2))
                    .sum();
                (w, sq.sqrt())
            })
            .collect()
    }

    /// Homogeneous-to-radial map: each scaled layer keeps its direction and
    /// has its length `m` replaced by `m^{1/w}`, so `ψ(δ_λ u) = λ ψ(u)`.
    pub fn flatten(&self, u: &[f64]) -> Vec<f64> {
        let mags = self.layer_magnitudes(u);
        u.iter()
            .zip(&self.weights)
            .zip(&self.scales)
            .map(|((v, &w), k)| {
                let m = mags.iter().find(|(lw, _)| *lw == w).map_or(0.0, |x| x.1);
                if m == 0.0 { 0.0 } else { v / k * m.powf(1.0 / w as f64 - 1.0) }
            })
            .collect()
    }

    /// The point of the unit sphere whose flattened direction is `s`.
    pub fn sphere_point(&self, s: &[f64]) -> Vec<f64> {
        let mut mags = vec![0.0; s.len()];
        for &(w, _) in &self.layer_exps {
            let m = s.iter().zip(&self.weights).filter(|(_, &wi)| wi == w).map(|(v, _)| v * v).sum::<f64>().sqrt();
            for (mi, _) in mags.iter_mut().zip(&self.weights).filter(|(_, &wi)| wi == w) {
                *mi = m;
            }
        }
        let raw: Vec<f64> = s
            .iter()
            .zip(&self.weights)
            .zip(&self.scales)
            .zip(&mags)
            .map(|(((v, &w), k), m)| k * v * m.powi(w as i32 - 1))
            .collect();
        self.normalize(&raw).1
    }
}

/// Relative band always resolved by shooting, covering integrator noise.
const MARGIN_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeConfig {
    /// Grid cells per face axis.
    pub grid: usize,
    /// Random directions used to measure the interpolation error.
    pub probes: usize,
    pub seed: u64,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        GaugeConfig { grid: 16, probes: 48, seed: 0 }
    }
}

#[derive(Clone, Debug)]
struct Face {
    axis: usize,
    sign: f64,
    values: Vec<f64>,
    covectors: Vec<Vec<f64>>,
}

/// Outcome of a membership query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// Whether precise shooting was needed.
    pub refined: bool,
    /// Whether precise shooting failed (the table estimate was used).
    pub failed: bool,
}

#[derive(Clone, Debug)]
pub struct GaugeTable {
    n: usize,
    weights: Vec<u32>,
    norm: HomogeneousNorm,
    grid: usize,
    side: usize,
    faces: Vec<Face>,
    group: CarnotGroup,
    engine: DistanceEngine,
    margin: f64,
    max_error: f64,
}

impl GaugeTable {
    pub fn build(nf: &NilpotentFrame<f64>, cfg: &GaugeConfig) -> Result<Self> {
        let n = nf.dim();
        if n < 2 {
            return Err(Error::InvalidInput("gauge table needs dimension at least 2".into()));
        }
        let weights = nf.weights.clone();
        let engine = DistanceEngine::from_fields(&nf.fields, &weights, ChartBox::cube(n, 1e3));
        let origin = vec![0.0; n];
        let mut scales = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let d = engine.distance_shooting(&origin, &e)?.value;
            // Halfway (in log scale) between the unit scale and the one matching
            // the distance on the axis.
            scales.push(d.powf(-(weights[i] as f64) / 2.0));
        }
        let norm = HomogeneousNorm::with_scales(&weights, &scales);
        let group = CarnotGroup::new(nf);
        let grid = cfg.grid.max(2);
        let side = grid + 3;
        let face_ids: Vec<(usize, f64)> = (0..n).flat_map(|a| [(a, 1.0), (a, -1.0)]).collect();
        let faces: Vec<Face> = face_ids
            .par_iter()
            .map(|&(axis, sign)| Self::build_face(&engine, &norm, n, grid, side, axis, sign))
            .collect::<Result<Vec<_>>>()?;
        let mut table = GaugeTable { n, weights, norm, grid, side, faces, group, engine, margin: 0.0, max_error: 0.0 };
        let mut err = 0.0f64;
        let mut ratio = 0.0f64;
        for k in 0..cfg.probes {
            let dir = rng::halton_sphere(k as u64 + 1000 * cfg.seed, n);
            let omega = table.norm.sphere_point(&dir);
            let (est, ind) = table.estimate_with_error(&omega);
            let guesses = table.warm_covectors(&omega);
            let exact = table.engine.distance_shooting_with(&origin, &omega, &guesses, 2)?.value;
            err = err.max((est - exact).abs() / exact);
            ratio = ratio.max((est - exact).abs() / (ind + MARGIN_FLOOR * exact));
        }
        table.max_error = err;
        table.margin = (2.0 * ratio).max(2.0);
        Ok(table)
    }

    /// Process-wide cached table, keyed by the group fields and the config.
    pub fn shared(nf: &NilpotentFrame<f64>, cfg: &GaugeConfig) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<String, Arc<GaugeTable>>>> = OnceLock::new();
        let key = format!("{:?}|{:?}|{:?}", nf.fields.iter().map(|f| f.to_string()).collect::<Vec<_>>(), nf.weights, cfg);
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("gauge cache poisoned").get(&key) {
            return Ok(t.clone());
        }
        let table = Arc::new(Self::build(nf, cfg)?);
        cache.lock().expect("gauge cache poisoned").insert(key, table.clone());
        Ok(table)
    }

    fn node_point(n: usize, grid: usize, axis: usize, sign: f64, idx: &[usize]) -> Vec<f64> {
        let h = 2.0 / grid as f64;
        let mut v = vec![0.0; n];
        v[axis] = sign;
        let mut k = 0;
        for (j, vj) in v.iter_mut().enumerate() {
            if j == axis {
                continue;
            }
            *vj = -1.0 + (idx[k] as f64 - 1.0) * h;
            k += 1;
        }
        v
    }

    fn unravel(mut flat: usize, side: usize, dims: usize) -> Vec<usize> {
        let mut idx = vec![0; dims];
        for d in (0..dims).rev() {
            idx[d] = flat % side;
            flat /= side;
        }
        idx
    }

    fn build_face(engine: &DistanceEngine, norm: &HomogeneousNorm, n: usize, grid: usize, side: usize, axis: usize, sign: f64) -> Result<Face> {
        let dims = n - 1;
        let total = side.pow(dims as u32);
        let origin = vec![0.0; n];
        let mut values = vec![0.0; total];
        let mut covectors: Vec<Vec<f64>> = vec![Vec::new(); total];
        for flat in 0..total {
            let idx = Self::unravel(flat, side, dims);
            let omega = norm.sphere_point(&Self::node_point(n, grid, axis, sign, &idx));
            // Continuation from the already computed neighbours.
            let mut guesses = Vec::new();
            for d in 0..dims {
                if idx[d] > 0 {
                    guesses.push(covectors[flat - side.pow((dims - 1 - d) as u32)].clone());
                }
            }
            let attempts = if guesses.is_empty() { engine.shooting_config().attempts } else { 1 };
            let res = engine
                .distance_shooting_with(&origin, &omega, &guesses, attempts)
                .or_else(|_| engine.distance_shooting_with(&origin, &omega, &guesses, engine.shooting_config().attempts))?;
            values[flat] = res.value;
            if let crate::distance::Witness::Covector { covector, .. } = res.witness {
                covectors[flat] = covector;
            }
        }
        Ok(Face { axis, sign, values, covectors })
    }

    /// Multiplier applied to the local error indicator.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Largest relative interpolation error seen on the probe directions.
    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }

    pub fn norm(&self) -> &HomogeneousNorm {
        &self.norm
    }

    pub fn engine(&self) -> &DistanceEngine {
        &self.engine
    }

    /// Face index and continuous grid coordinates of a flattened direction.
    fn locate(&self, dir: &[f64]) -> (usize, Vec<f64>) {
        let (axis, _) = dir.iter().enumerate().fold((0, 0.0), |(ba, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (ba, bv) });
        let sign = if dir[axis] >= 0.0 { 1.0 } else { -1.0 };
        let face = self.faces.iter().position(|f| f.axis == axis && f.sign == sign).expect("face exists");
        let h = 2.0 / self.grid as f64;
        let coords = dir
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != axis)
            .map(|(_, v)| (v / dir[axis].abs() + 1.0) / h + 1.0)
            .collect();
        (face, coords)
    }

    /// Catmull–Rom value and the multilinear value on the same cell.
    fn interpolate(&self, face: usize, coords: &[f64]) -> (f64, f64) {
        let dims = coords.len();
        let f = &self.faces[face];
        let mut base = Vec::with_capacity(dims);
        let mut weights = Vec::with_capacity(dims);
        let mut frac = Vec::with_capacity(dims);
        for &c in coords {
            let i = (c.floor() as isize).clamp(1, self.side as isize - 3) as usize;
            let t = c - i as f64;
            base.push(i - 1);
            weights.push(catmull_rom(t));
            frac.push(t);
        }
        let mut acc = 0.0;
        let mut lin = 0.0;
        for corner in 0..4usize.pow(dims as u32) {
            let mut flat = 0;
            let mut w = 1.0;
            let mut wl = 1.0;
            let mut rem = corner;
            for d in 0..dims {
                let o = rem % 4;
                rem /= 4;
                flat = flat * self.side + base[d] + o;
                w *= weights[d][o];
                wl *= match o {
                    1 => 1.0 - frac[d],
                    2 => frac[d],
                    _ => 0.0,
                };
            }
            acc += w * f.values[flat];
            lin += wl * f.values[flat];
        }
        (acc, lin)
    }

    /// Interpolated `d(0, u)`.
    pub fn estimate(&self, u: &[f64]) -> f64 {
        self.estimate_with_error(u).0
    }

    /// Interpolated `d(0, u)` and a local error indicator (the gap between
    /// the cubic and the linear interpolant).
    pub fn estimate_with_error(&self, u: &[f64]) -> (f64, f64) {
        let t = self.norm.eval(u);
        if t == 0.0 {
            return (0.0, 0.0);
        }
        let (face, coords) = self.locate(&self.norm.flatten(u));
        let (cubic, lin) = self.interpolate(face, &coords);
        (t * cubic, t * (cubic - lin).abs())
    }

    /// Half-width of the band around a threshold inside which a point is
    /// resolved by shooting.
    fn band(&self, est: f64, indicator: f64) -> f64 {
        self.margin * indicator + MARGIN_FLOOR * est
    }

    fn warm_covectors(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let t = self.norm.eval(u);
        let (face, coords) = self.locate(&self.norm.flatten(u));
        let f = &self.faces[face];
        let dims = coords.len();
        let mut out = Vec::new();
        for corner in 0..2usize.pow(dims as u32) {
            let mut flat = 0;
            for (d, &c) in coords.iter().enumerate() {
                let i = (c.floor() as usize).min(self.side - 2) + ((corner >> d) & 1);
                flat = flat * self.side + i;
            }
            let p = &f.covectors[flat];
            if p.is_empty() {
                continue;
            }
            // Covectors of the time-one problem scale like t^{2 − w_k}.
            out.push(p.iter().zip(&self.weights).map(|(v, &w)| v * t.powi(2 - w as i32)).collect());
        }
        out
    }

    /// Precise `d(0, u)` by shooting warm-started from the table.
    pub fn precise(&self, u: &[f64]) -> Result<f64> {
        let origin = vec![0.0; self.n];
        let guesses = self.warm_covectors(u);
        self.engine
            .distance_shooting_with(&origin, u, &guesses, 0)
            .or_else(|_| self.engine.distance_shooting_with(&origin, u, &guesses, 4))
            .map(|r| r.value)
    }

    /// Whether `d(z, x) ≤ radius`, using `d(z, x) = d(0, z⁻¹ x)`.
    pub fn member(&self, z: &[f64], x: &[f64], radius: f64, refine: bool) -> Membership {
        let u = self.group.mul(&self.group.inv(z), x);
        let (est, ind) = self.estimate_with_error(&u);
        if !refine || (est - radius).abs() > self.band(est, ind) {
            return Membership { inside: est <= radius, refined: false, failed: false };
        }
        match self.precise(&u) {
            Ok(d) => Membership { inside: d <= radius, refined: true, failed: false },
            Err(_) => Membership { inside: est <= radius, refined: true, failed: true },
        }
    }

    /// Points of the unit sphere `∂B(0, 1)` at the table nodes.
    pub fn unit_sphere_points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let dims = self.n - 1;
        for f in &self.faces {
            for (flat, &rho) in f.values.iter().enumerate() {
                let idx = Self::unravel(flat, self.side, dims);
                let omega = self.norm.sphere_point(&Self::node_point(self.n, self.grid, f.axis, f.sign, &idx));
                out.push(omega.iter().zip(&self.weights).map(|(v, &w)| v / rho.powi(w as i32)).collect());
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_norm_scales() {
        let h = HomogeneousNorm::new(&[1, 1, 2]);
        let u = [0.3, -0.2, 0.5];
        let r: f64 = 0.7;
        let du = [u[0] * r, u[1] * r, u[2] * r * r];
        assert!((h.eval(&du) - r * h.eval(&u)).abs() < 1e-14);
        let s = h.sphere_point(&[1.0, 2.0, 3.0]);
        assert!((h.eval(&s) - 1.0).abs() < 1e-12);
        let f = h.flatten(&s);
        assert!((f[1] / f[0] - 2.0).abs() < 1e-12 && (f[2] / f[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn catmull_rom_partition_of_unity() {
        for &t in &[0.0, 0.3, 0.9] {
            assert!((catmull_rom(t).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
