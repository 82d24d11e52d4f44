//! Time-dependent spatial diffeomorphisms that straighten moving observation
//! trajectories onto fixed points, and the induced coefficient pullback.
//!
//! Maps are built on the unit interval and rescaled: for a domain `[0, L]`,
//! `χ_L(t, x) = L χ(t, x / L)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{CoefficientSet, ScalarField, TimeGrid};

const EXTREMA_SAMPLES: usize = 10_000;
const MAX_EXPONENT: u32 = 200;
const MIN_M_TILDE: f64 = 1e-8;

/// A smooth observation path `t -> h(t)` on `[0, T]`.
#[derive(Clone)]
pub struct Trajectory {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    horizon: f64,
    min: f64,
    max: f64,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("horizon", &self.horizon)
            .field("min", &self.min)
            .field("max", &self.max)
            .finish_non_exhaustive()
    }
}

impl Trajectory {
    /// Extrema are taken over 10,001 equispaced samples of `[0, horizon]`.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidTrajectory(format!("horizon {horizon} must be positive")));
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..=EXTREMA_SAMPLES {
            let v = f(horizon * i as f64 / EXTREMA_SAMPLES as f64);
            if !v.is_finite() {
                return Err(Error::InvalidTrajectory("trajectory is not finite".into()));
            }
            min = min.min(v);
            max = max.max(v);
        }
        Ok(Self { f: Arc::new(f), horizon, min, max })
    }

    pub fn constant(value: f64, horizon: f64) -> Result<Self> {
        Self::new(move |_| value, horizon)
    }

    /// `center + amplitude sin(π t / T)`.
    pub fn sine_bump(center: f64, amplitude: f64, horizon: f64) -> Result<Self> {
        Self::new(move |t| center + amplitude * (std::f64::consts::PI * t / horizon).sin(), horizon)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn is_constant(&self) -> bool {
        self.min == self.max
    }

    /// Values at the levels `t_0 .. t_{N_t}` of `grid`.
    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..=grid.steps()).map(|n| self.eval(grid.time(n))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffeoMode {
    /// `χ = α xⁿ + β x`, straightening `h` onto `m`.
    Single { n: u32, m: f64 },
    /// `χ = α xⁿ + β x^r + γ x`, straightening `k` onto `k̃` and `h` onto `m̃`.
    Double { n: u32, r: u32, k: f64, k_tilde: f64, m_tilde: f64, ratio: f64 },
}

/// A diffeomorphism of `[0, L]` for each `t`, polynomial in `x`.
#[derive(Debug, Clone)]
pub struct DiffeoMap {
    mode: DiffeoMode,
    length: f64,
    grid: TimeGrid,
    h: Trajectory,
}

/// Signs of the four Cramer determinants at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Determinants {
    pub main: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Determinants {
    pub fn all_negative(&self) -> bool {
        self.main < 0.0 && self.alpha < 0.0 && self.beta < 0.0 && self.gamma < 0.0
    }
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn double_determinants(n: u32, r: u32, k: f64, h: f64, k_tilde: f64, m_tilde: f64) -> Determinants {
    let (n, r) = (n as i32, r as i32);
    Determinants {
        main: det3([[1.0, 1.0, 1.0], [k.powi(n), k.powi(r), k], [h.powi(n), h.powi(r), h]]),
        alpha: det3([[1.0, 1.0, 1.0], [k_tilde, k.powi(r), k], [m_tilde, h.powi(r), h]]),
        beta: det3([[1.0, 1.0, 1.0], [k.powi(n), k_tilde, k], [h.powi(n), m_tilde, h]]),
        gamma: det3([[1.0, 1.0, 1.0], [k.powi(n), k.powi(r), k_tilde], [h.powi(n), h.powi(r), m_tilde]]),
    }
}

/// Single-trajectory straightening map on `[0, length]`.
pub fn build_single_diffeo(h: &Trajectory, grid: &TimeGrid, length: f64) -> Result<DiffeoMap> {
    if !(length > 0.0) {
        return Err(Error::invalid("domain length must be positive"));
    }
    let (m, big_m) = (h.min() / length, h.max() / length);
    if m <= 0.0 || big_m >= 1.0 {
        return Err(Error::InvalidTrajectory(format!(
            "trajectory range [{}, {}] must lie inside (0, {length})",
            h.min(),
            h.max()
        )));
    }
    let n = (2..=MAX_EXPONENT)
        .find(|&n| m - big_m.powi(n as i32) > 0.0)
        .ok_or_else(|| Error::Construction(format!("no exponent n <= {MAX_EXPONENT} with m - M^n > 0")))?;
    Ok(DiffeoMap { mode: DiffeoMode::Single { n, m }, length, grid: *grid, h: h.clone() })
}

/// Two-point straightening map: the fixed point `k` and the trajectory `h`
/// (with `k < min h`) are sent to fixed points `k̃ < m̃`.
///
/// Parameters are selected in order: ratio `k̃/m̃ = k / (2 max h)`, the smallest
/// `r >= 2` with `(k / min h)^r` below the ratio, `m̃` halved from `0.1` until the
/// α-numerator is negative, then the smallest `n > r` making the main, β and γ
/// determinants negative at every level of `grid`.
pub fn build_double_diffeo(k: f64, h: &Trajectory, grid: &TimeGrid, length: f64) -> Result<DiffeoMap> {
    if !(length > 0.0) {
        return Err(Error::invalid("domain length must be positive"));
    }
    let k = k / length;
    let (hmin, hmax) = (h.min() / length, h.max() / length);
    if !(k > 0.0 && k < hmin) {
        return Err(Error::InvalidTrajectory(format!(
            "fixed point {} must satisfy 0 < k < min h = {}",
            k * length,
            h.min()
        )));
    }
    if hmax >= 1.0 {
        return Err(Error::InvalidTrajectory(format!("max h = {} must be below {length}", h.max())));
    }
    let hs: Vec<f64> = h.sample(grid).into_iter().map(|v| v / length).collect();

    let ratio = 0.5 * k / hmax;
    let r = (2..=MAX_EXPONENT)
        .find(|&r| (k / hmin).powi(r as i32) < ratio)
        .ok_or_else(|| Error::Construction(format!("no exponent r <= {MAX_EXPONENT} with (k/min h)^r < ratio")))?;

    let mut m_tilde = 0.1;
    loop {
        let k_tilde = ratio * m_tilde;
        // The α-numerator does not involve n.
        if hs.iter().all(|&hv| double_determinants(r + 1, r, k, hv, k_tilde, m_tilde).alpha < 0.0) {
            break;
        }
        m_tilde *= 0.5;
        if m_tilde < MIN_M_TILDE {
            return Err(Error::Construction(
                "alpha-numerator determinant stays nonnegative: m_tilde fell below 1e-8".into(),
            ));
        }
    }
    let k_tilde = ratio * m_tilde;

    let mut failed = "main";
    for n in r + 1..=MAX_EXPONENT {
        let bad = hs.iter().find_map(|&hv| {
            let d = double_determinants(n, r, k, hv, k_tilde, m_tilde);
            if d.main >= 0.0 {
                Some("main")
            } else if d.beta >= 0.0 {
                Some("beta-numerator")
            } else if d.gamma >= 0.0 {
                Some("gamma-numerator")
            } else {
                None
            }
        });
        match bad {
            None => {
                return Ok(DiffeoMap {
                    mode: DiffeoMode::Double { n, r, k, k_tilde, m_tilde, ratio },
                    length,
                    grid: *grid,
                    h: h.clone(),
                })
            }
            Some(which) => failed = which,
        }
    }
    Err(Error::Construction(format!("no exponent n <= {MAX_EXPONENT}: {failed} determinant stays nonnegative")))
}

/// Invariant residuals of a map on a verification grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub pin_left: f64,
    pub pin_right: f64,
    /// `max |χ(t, h(t)) - target|` (and at `k` in double mode).
    pub interpolation: f64,
    pub min_slope: f64,
}

impl DiffeoMap {
    pub fn mode(&self) -> DiffeoMode {
        self.mode
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.h
    }

    /// Straightened (fixed) images, physical units: `[m]` or `[k̃, m̃]`.
    pub fn targets(&self) -> Vec<f64> {
        match self.mode {
            DiffeoMode::Single { m, .. } => vec![m * self.length],
            DiffeoMode::Double { k_tilde, m_tilde, .. } => vec![k_tilde * self.length, m_tilde * self.length],
        }
    }

    fn exponents(&self) -> Vec<u32> {
        match self.mode {
            DiffeoMode::Single { n, .. } => vec![n, 1],
            DiffeoMode::Double { n, r, .. } => vec![n, r, 1],
        }
    }

    /// Monomial coefficients at time `t` (`[α, β]` or `[α, β, γ]`).
    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        let hv = self.h.eval(t) / self.length;
        match self.mode {
            DiffeoMode::Single { n, m } => {
                let hn = hv.powi(n as i32);
                let denom = hv - hn;
                vec![(hv - m) / denom, (m - hn) / denom]
            }
            DiffeoMode::Double { n, r, k, k_tilde, m_tilde, .. } => {
                let d = double_determinants(n, r, k, hv, k_tilde, m_tilde);
                vec![d.alpha / d.main, d.beta / d.main, d.gamma / d.main]
            }
        }
    }

    pub fn determinants(&self, t: f64) -> Option<Determinants> {
        match self.mode {
            DiffeoMode::Single { .. } => None,
            DiffeoMode::Double { n, r, k, k_tilde, m_tilde, .. } => {
                Some(double_determinants(n, r, k, self.h.eval(t) / self.length, k_tilde, m_tilde))
            }
        }
    }

    /// Time derivatives of [`DiffeoMap::coefficients`] by centered differences with the
    /// grid step (one-sided within one step of the ends).
    pub fn coefficient_rates(&self, t: f64) -> Vec<f64> {
        let dt = self.grid.dt();
        let horizon = self.grid.horizon();
        let (lo, hi) = if t - dt < 0.0 {
            (t, t + dt)
        } else if t + dt > horizon {
            (t - dt, t)
        } else {
            (t - dt, t + dt)
        };
        let a = self.coefficients(lo);
        let b = self.coefficients(hi);
        a.iter().zip(&b).map(|(u, v)| (v - u) / (hi - lo)).collect()
    }

    fn unit_eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        let mut curvature = 0.0;
        for (e, c) in self.exponents().into_iter().zip(self.coefficients(t)) {
            let e_i = e as i32;
            let ef = e as f64;
            value += c * x.powi(e_i);
            slope += c * ef * x.powi(e_i - 1);
            if e >= 2 {
                curvature += c * ef * (ef - 1.0) * x.powi(e_i - 2);
            }
        }
        (value, slope, curvature)
    }

    /// `χ(t, x)` in physical coordinates.
    pub fn apply(&self, t: f64, x: f64) -> f64 {
        self.length * self.unit_eval(t, x / self.length).0
    }

    pub fn chi_x(&self, t: f64, x: f64) -> f64 {
        self.unit_eval(t, x / self.length).1
    }

    pub fn chi_xx(&self, t: f64, x: f64) -> f64 {
        self.unit_eval(t, x / self.length).2 / self.length
    }

    pub fn chi_t(&self, t: f64, x: f64) -> f64 {
        let u = x / self.length;
        let rates = self.coefficient_rates(t);
        self.length * self.exponents().into_iter().zip(rates).map(|(e, c)| c * u.powi(e as i32)).sum::<f64>()
    }

    /// `η(t, ξ)` with `χ(t, η) = ξ`, by bisection refined with Newton steps.
    pub fn invert(&self, t: f64, xi: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, self.length);
        if xi <= 0.0 {
            return 0.0;
        }
        if xi >= self.length {
            return self.length;
        }
        let mut x = xi;
        for _ in 0..200 {
            let fx = self.apply(t, x) - xi;
            if fx.abs() <= 1e-15 * self.length {
                return x;
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - fx / self.chi_x(t, x);
            x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-16 * self.length {
                break;
            }
        }
        x
    }

    /// Boundary pinning, interpolation identities and the minimum of `∂ₓχ` over
    /// `time_samples x space_samples` points.
    pub fn check_invariants(&self, time_samples: usize, space_samples: usize) -> InvariantReport {
        let horizon = self.grid.horizon();
        let targets = self.targets();
        let mut rep = InvariantReport { pin_left: 0.0, pin_right: 0.0, interpolation: 0.0, min_slope: f64::INFINITY };
        for i in 0..=time_samples {
            let t = horizon * i as f64 / time_samples as f64;
            rep.pin_left = rep.pin_left.max(self.apply(t, 0.0).abs());
            rep.pin_right = rep.pin_right.max((self.apply(t, self.length) - self.length).abs());
            let hv = self.h.eval(t);
            match self.mode {
                DiffeoMode::Single { .. } => {
                    rep.interpolation = rep.interpolation.max((self.apply(t, hv) - targets[0]).abs());
                }
                DiffeoMode::Double { k, .. } => {
                    let e1 = (self.apply(t, k * self.length) - targets[0]).abs();
                    let e2 = (self.apply(t, hv) - targets[1]).abs();
                    rep.interpolation = rep.interpolation.max(e1).max(e2);
                }
            }
            for j in 0..=space_samples {
                let x = self.length * j as f64 / space_samples as f64;
                rep.min_slope = rep.min_slope.min(self.chi_x(t, x));
            }
        }
        rep
    }

    /// `max ∂ₓχ` over the time grid levels and 201 points in space.
    fn max_slope(&self) -> f64 {
        let mut out: f64 = 0.0;
        for n in 0..=self.grid.steps() {
            let t = self.grid.time(n);
            for j in 0..=200 {
                out = out.max(self.chi_x(t, self.length * j as f64 / 200.0));
            }
        }
        out
    }
}

/// Coefficients of the equation satisfied by `z(t, x) = y(t, χ(t, x))`:
/// `ã = a(χ) η_ξ²`, `b̃ = η_t - a(χ) η_ξξ + b(χ) η_ξ`, `c̃ = c(χ)`, with the inverse
/// derivatives at `ξ = χ(t, x)` from implicit differentiation:
/// `η_ξ = 1/χ_x`, `η_ξξ = -χ_xx/χ_x³`, `η_t = -χ_t/χ_x`.
pub fn transform_coefficients(coeffs: &CoefficientSet, map: &DiffeoMap) -> Result<CoefficientSet> {
    let a0 = coeffs.a0() / map.max_slope().powi(2);
    let (ca, cb, cc) = (coeffs.clone(), coeffs.clone(), coeffs.clone());
    let (ma, mb, mc) = (map.clone(), map.clone(), map.clone());
    let a: ScalarField = Arc::new(move |t, x| {
        let s = ma.chi_x(t, x);
        ca.a(t, ma.apply(t, x)) / (s * s)
    });
    let b: ScalarField = Arc::new(move |t, x| {
        let s = mb.chi_x(t, x);
        let xi = mb.apply(t, x);
        let eta_t = -mb.chi_t(t, x) / s;
        let eta_xx = -mb.chi_xx(t, x) / (s * s * s);
        eta_t - cb.a(t, xi) * eta_xx + cb.b(t, xi) / s
    });
    let c: ScalarField = Arc::new(move |t, x| cc.c(t, mc.apply(t, x)));
    let identity = map.h.is_constant() && matches!(map.mode, DiffeoMode::Single { .. });
    if identity {
        return Ok(coeffs.clone());
    }
    CoefficientSet::new(a, b, c, a0, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn grid() -> TimeGrid {
        TimeGrid::new(0.5, 500).unwrap()
    }

    #[test]
    fn constant_trajectory_gives_identity() {
        let h = Trajectory::constant(0.5, 0.5).unwrap();
        let map = build_single_diffeo(&h, &grid(), 1.0).unwrap();
        for t in [0.0, 0.2, 0.5] {
            let c = map.coefficients(t);
            assert_eq!(c[0], 0.0);
            assert_eq!(c[1], 1.0);
            for x in [0.0, 0.1, 0.77, 1.0] {
                assert_eq!(map.apply(t, x), x);
                assert_eq!(map.invert(t, x), x);
            }
        }
        let coeffs = CoefficientSet::constant(2.0, 0.5, 0.1).unwrap();
        let out = transform_coefficients(&coeffs, &map).unwrap();
        assert_eq!(out.a(0.1, 0.3), 2.0);
        assert_eq!(out.b(0.1, 0.3), 0.5);
        assert_eq!(out.c(0.1, 0.3), 0.1);
    }

    #[test]
    fn example4_trajectory_exponent_and_monotonicity() {
        let h = Trajectory::sine_bump(0.5, 0.15, 0.5).unwrap();
        assert!((h.min() - 0.5).abs() < 1e-12);
        assert!((h.max() - 0.65).abs() < 1e-12);
        let map = build_single_diffeo(&h, &grid(), 1.0).unwrap();
        assert!(matches!(map.mode(), DiffeoMode::Single { n: 2, .. }));
        let rep = map.check_invariants(5000, 1000);
        assert!(rep.min_slope > 0.0);
        assert!(rep.interpolation <= 1e-12);
        assert!(rep.pin_left == 0.0 && rep.pin_right <= 1e-12);
    }

    #[test]
    fn single_inverse_recovers_trajectory() {
        let h = Trajectory::sine_bump(0.5, 0.15, 0.5).unwrap();
        let map = build_single_diffeo(&h, &grid(), 1.0).unwrap();
        for i in 0..=50 {
            let t = 0.5 * i as f64 / 50.0;
            assert!((map.invert(t, 0.5) - h.eval(t)).abs() <= 1e-10);
        }
    }

    #[test]
    fn round_trips_random_points() {
        let h = Trajectory::sine_bump(0.5, 0.1, 0.5).unwrap();
        let maps = [
            build_single_diffeo(&Trajectory::sine_bump(0.5, 0.15, 0.5).unwrap(), &grid(), 1.0).unwrap(),
            build_double_diffeo(0.25, &h, &grid(), 1.0).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for map in &maps {
            for _ in 0..100 {
                let t: f64 = rng.gen_range(0.0..0.5);
                let x: f64 = rng.gen_range(0.0..1.0);
                assert!((map.invert(t, map.apply(t, x)) - x).abs() <= 1e-10);
                assert!((map.apply(t, map.invert(t, x)) - x).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn double_constant_case_picks_r_three() {
        let h = Trajectory::constant(0.5, 0.5).unwrap();
        let map = build_double_diffeo(0.25, &h, &grid(), 1.0).unwrap();
        match map.mode() {
            DiffeoMode::Double { r, n, ratio, .. } => {
                assert_eq!(r, 3);
                assert!(n > r);
                assert!((ratio - 0.25).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        for t in [0.0, 0.25, 0.5] {
            assert!(map.determinants(t).unwrap().all_negative());
            assert!(map.coefficients(t).iter().all(|c| *c > 0.0));
        }
        assert!(map.check_invariants(100, 400).min_slope > 0.0);
    }

    #[test]
    fn double_moving_identities() {
        let h = Trajectory::sine_bump(0.5, 0.1, 0.5).unwrap();
        let map = build_double_diffeo(0.25, &h, &grid(), 1.0).unwrap();
        let rep = map.check_invariants(5000, 200);
        assert!(rep.interpolation <= 1e-12, "{rep:?}");
        assert!(rep.pin_right <= 1e-12);
        assert!(rep.min_slope > 0.0);
    }

    #[test]
    fn double_rejects_k_not_below_trajectory() {
        let h = Trajectory::constant(0.5, 0.5).unwrap();
        assert!(matches!(build_double_diffeo(0.5, &h, &grid(), 1.0), Err(Error::InvalidTrajectory(_))));
    }

    #[test]
    fn single_rejects_touching_boundary() {
        let g = grid();
        assert!(build_single_diffeo(&Trajectory::sine_bump(0.5, 0.5, 0.5).unwrap(), &g, 1.0).is_err());
        assert!(build_single_diffeo(&Trajectory::constant(0.0, 0.5).unwrap(), &g, 1.0).is_err());
    }

    #[test]
    fn rescaled_domain_maps_consistently() {
        let h = Trajectory::sine_bump(1.0, 0.3, 0.5).unwrap();
        let map = build_single_diffeo(&h, &grid(), 2.0).unwrap();
        let rep = map.check_invariants(200, 200);
        assert!(rep.interpolation <= 1e-12 && rep.pin_right <= 1e-12);
        assert!((map.targets()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transformed_diffusion_floor_holds() {
        let h = Trajectory::sine_bump(0.5, 0.15, 0.5).unwrap();
        let map = build_single_diffeo(&h, &grid(), 1.0).unwrap();
        let coeffs = CoefficientSet::heat();
        let out = transform_coefficients(&coeffs, &map).unwrap();
        assert!(out.a0() > 0.0);
        for i in 0..=50 {
            for j in 0..=50 {
                let (t, x) = (0.5 * i as f64 / 50.0, j as f64 / 50.0);
                assert!(out.a(t, x) >= out.a0() * (1.0 - 1e-12));
            }
        }
    }
}
