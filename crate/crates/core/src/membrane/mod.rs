//! Membrane conductivity laws and pore-density dynamics.

mod params;

use serde::{Deserialize, Serialize};

pub use params::{beta_formula, ModelParams};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembraneModel {
    /// `sigma_m0 + K (exp(beta_exp v) - 1)`, no internal state.
    Static,
    /// `sigma_m0 + beta N` with the pore-creation ODE.
    NeuKrassowska,
    /// `sigma_m0 + beta N` with N relaxing towards a tanh switch.
    Relaxation,
}

/// `dN/dt = alpha exp((v/V_ep)^2) (1 - (N/N0) exp(-q (v/V_ep)^2))`.
pub fn pore_rhs(v: f64, n: f64, p: &ModelParams) -> f64 {
    let x2 = (v / p.v_ep).powi(2);
    p.alpha * x2.exp() * (1.0 - n / p.n0 * (-p.q * x2).exp())
}

/// Target of the relaxation law, `(1 + tanh(k_ep (|v| - V_ep))) / 2`.
pub fn relaxation_target(v: f64, p: &ModelParams) -> f64 {
    0.5 * (1.0 + (p.k_ep * (v.abs() - p.v_ep)).tanh())
}

pub fn relaxation_rhs(v: f64, n: f64, p: &ModelParams) -> f64 {
    let d = relaxation_target(v, p) - n;
    (d / p.tau_ep).max(d / p.tau_res)
}

/// `sign(v) min(|v|, M)`; returns `v` unchanged when `|v| <= M`.
pub fn cutoff(v: f64, m: f64) -> f64 {
    if v.abs() <= m {
        v
    } else {
        m.copysign(v)
    }
}

pub fn sigma_m(model: MembraneModel, v: f64, n: f64, p: &ModelParams) -> Result<f64> {
    match model {
        MembraneModel::Static => Ok(p.sigma_m0 + p.k_static * (p.beta_exp * v).exp_m1()),
        MembraneModel::NeuKrassowska | MembraneModel::Relaxation => {
            if n < 0.0 || n.is_nan() {
                return Err(Error::InvalidPoreDensity(n));
            }
            Ok(p.sigma_m0 + p.beta * n)
        }
    }
}

/// Rate of the internal state for `model` (zero for the static law).
pub fn state_rhs(model: MembraneModel, v: f64, n: f64, p: &ModelParams) -> f64 {
    match model {
        MembraneModel::Static => 0.0,
        MembraneModel::NeuKrassowska => pore_rhs(v, n, p),
        MembraneModel::Relaxation => relaxation_rhs(v, n, p),
    }
}

/// Internal state at rest (`v = 0` for all past times).
pub fn rest_state(model: MembraneModel, p: &ModelParams) -> f64 {
    match model {
        MembraneModel::Relaxation => relaxation_target(0.0, p),
        _ => p.n0,
    }
}

/// One classical RK4 step of the state ODE at frozen voltage `v`.
pub fn rk4_step(model: MembraneModel, v: f64, n: f64, dt: f64, p: &ModelParams) -> f64 {
    let f = |n| state_rhs(model, v, n, p);
    let k1 = f(n);
    let k2 = f(n + 0.5 * dt * k1);
    let k3 = f(n + 0.5 * dt * k2);
    let k4 = f(n + dt * k3);
    n + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Per-node membrane state on the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneState {
    /// Transmembrane potential per interface node (V).
    pub v: Vec<f64>,
    /// Pore density (or open fraction for the relaxation law) per node.
    pub n: Vec<f64>,
    /// Time (s).
    pub t: f64,
}

impl MembraneState {
    pub fn rest(nodes: usize, model: MembraneModel, p: &ModelParams) -> Self {
        Self { v: vec![0.0; nodes], n: vec![rest_state(model, p); nodes], t: 0.0 }
    }

    /// Advances the internal state one step with the (new) voltage `v`,
    /// clipped at the cutoff level.
    pub fn advance_pores(&mut self, model: MembraneModel, dt: f64, p: &ModelParams) {
        for (n, v) in self.n.iter_mut().zip(&self.v) {
            *n = rk4_step(model, cutoff(*v, p.cutoff), *n, dt, p);
        }
    }
}

/// Voltage samples `v(t_k)` on a strictly increasing grid starting at 0,
/// linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageHistory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl VoltageHistory {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::NoHistory);
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("history times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: f64, t_end: f64, samples: usize) -> Self {
        let n = samples.max(2);
        let times = (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect();
        Self { times, values: vec![value; n] }
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0];
        }
        if k == self.times.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] * (1.0 - w) + self.values[k] * w
    }
}

/// Pore density from the variation-of-constants representation
/// `N(t) = e^{-int_0^t a} N0 + int_0^t b(s) e^{-int_s^t a} ds`,
/// `a = (alpha/N0) e^{(1-q)(v/V_ep)^2}`, `b = alpha e^{(v/V_ep)^2}`.
///
/// Integrals of `a` and `b` use the trapezoid rule on each history interval;
/// the outer integral is taken exactly against the resulting piecewise
/// exponential, so `v = 0` returns `N0` up to rounding.
pub fn pore_closed_form(history: &VoltageHistory, t: f64, p: &ModelParams) -> Result<f64> {
    if history.times.is_empty() {
        return Err(Error::NoHistory);
    }
    let mut grid: Vec<f64> = history.times.iter().copied().take_while(|&s| s < t).collect();
    grid.push(t);
    let series = closed_form_on(&grid, &|s| history.at(s), p);
    Ok(*series.last().unwrap())
}

/// [`pore_closed_form`] at every history sample.
pub fn pore_closed_form_series(history: &VoltageHistory, p: &ModelParams) -> Result<Vec<f64>> {
    if history.times.is_empty() {
        return Err(Error::NoHistory);
    }
    Ok(closed_form_on(&history.times, &|s| history.at(s), p))
}

fn closed_form_on(grid: &[f64], v: &dyn Fn(f64) -> f64, p: &ModelParams) -> Vec<f64> {
    let a = |v: f64| p.alpha / p.n0 * ((1.0 - p.q) * (v / p.v_ep).powi(2)).exp();
    let b = |v: f64| p.alpha * (v / p.v_ep).powi(2).exp();
    let mut out = Vec::with_capacity(grid.len());
    let mut n = p.n0;
    out.push(n);
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        let (v0, v1) = (v(w[0]), v(w[1]));
        let ab = 0.5 * (a(v0) + a(v1));
        let bb = 0.5 * (b(v0) + b(v1));
        let decay = (-ab * h).exp();
        n = decay * n + bb / ab * (-(-ab * h).exp_m1());
        out.push(n);
    }
    if grid.len() == 1 {
        out.truncate(1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn pore_rhs_values() {
        let p = p();
        assert_eq!(pore_rhs(0.0, p.n0, &p), 0.0);
        assert_eq!(pore_rhs(0.0, 0.0, &p), p.alpha);
        let e = std::f64::consts::E;
        let expect = p.alpha * e * (1.0 - (-2.46f64).exp());
        assert!((pore_rhs(p.v_ep, p.n0, &p) - expect).abs() < 1e-12 * expect);
        assert!((expect / p.alpha - 2.4861).abs() < 1e-4);
    }

    #[test]
    fn beta_matches_hand_arithmetic() {
        let p = p();
        assert!((p.beta - 5.670e-10).abs() < 0.001e-10);
        let q = ModelParams { delta: 0.0, ..p };
        assert_eq!(beta_formula(&q), 0.0);
        let r = ModelParams { sigma_p: 2.0 * p.sigma_p, ..p };
        assert!((beta_formula(&r) - 2.0 * p.beta).abs() < 1e-24);
    }

    #[test]
    fn conductivity_laws() {
        let p = p();
        assert_eq!(sigma_m(MembraneModel::NeuKrassowska, 0.3, 0.0, &p).unwrap(), p.sigma_m0);
        assert_eq!(sigma_m(MembraneModel::Static, 0.0, 0.0, &p).unwrap(), p.sigma_m0);
        let s = sigma_m(MembraneModel::NeuKrassowska, 0.0, p.n0, &p).unwrap();
        assert!((s - (1.9 + 5.670e-10 * 1.5e9)).abs() < 1e-3);
        assert_eq!(
            sigma_m(MembraneModel::NeuKrassowska, 0.0, -1.0, &p),
            Err(Error::InvalidPoreDensity(-1.0))
        );
    }

    #[test]
    fn relaxation_law() {
        let p = p();
        assert_eq!(relaxation_target(p.v_ep, &p), 0.5);
        assert_eq!(relaxation_target(-p.v_ep, &p), 0.5);
        let b = relaxation_target(0.1, &p);
        assert_eq!(relaxation_rhs(0.1, b, &p), 0.0);
        let r = relaxation_rhs(2.0, 0.0, &p);
        assert!((r * p.tau_ep - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff(0.3, 1.0), 0.3);
        assert_eq!(cutoff(5.0, 1.0), 1.0);
        assert_eq!(cutoff(-5.0, 1.0), -1.0);
    }

    #[test]
    fn params_validation() {
        p().validate().unwrap();
        assert!(ModelParams { q: 1.0, ..p() }.validate().is_err());
        assert!(ModelParams { cutoff: 0.2, ..p() }.validate().is_err());
        assert!(ModelParams { sigma_m0: -1.9, ..p() }.validate().is_err());
        assert!(ModelParams { u_ref: -0.07, k_static: 0.0, ..p() }.validate().is_ok());
    }

    #[test]
    fn rest_state_is_preserved() {
        let p = p();
        let mut s = MembraneState::rest(5, MembraneModel::NeuKrassowska, &p);
        for _ in 0..1000 {
            s.advance_pores(MembraneModel::NeuKrassowska, 2e-9, &p);
        }
        assert!(s.n.iter().all(|n| (n - p.n0).abs() <= 1e-12 * p.n0));
        let h = VoltageHistory::constant(0.0, 1.0, 1001);
        let series = pore_closed_form_series(&h, &p).unwrap();
        assert!(series.iter().all(|n| (n - p.n0).abs() <= 1e-12 * p.n0));
    }

    #[test]
    fn constant_voltage_relaxes_to_stationary_point() {
        let p = p();
        let c = 0.2;
        let n_inf = p.n0 * (p.q * (c / p.v_ep).powi(2)).exp();
        assert!(pore_rhs(c, n_inf, &p).abs() < 1e-6 * p.alpha);
        let rate = p.alpha / p.n0 * ((1.0 - p.q) * (c / p.v_ep).powi(2)).exp();
        let h = VoltageHistory::constant(c, 40.0 / rate, 200);
        let n = pore_closed_form(&h, 40.0 / rate, &p).unwrap();
        assert!((n - n_inf).abs() < 1e-12 * n_inf);
    }

    #[test]
    fn empty_history_is_an_error() {
        assert_eq!(VoltageHistory::new(vec![], vec![]), Err(Error::NoHistory));
    }

    /// Reference RK4 with step halving until successive results agree.
    fn rk4_reference(h: &VoltageHistory, t_end: f64, p: &ModelParams) -> f64 {
        let run = |steps: usize| {
            let dt = t_end / steps as f64;
            let f = |t: f64, n: f64| pore_rhs(h.at(t), n, p);
            let mut n = p.n0;
            for k in 0..steps {
                let t = k as f64 * dt;
                let k1 = f(t, n);
                let k2 = f(t + 0.5 * dt, n + 0.5 * dt * k1);
                let k3 = f(t + 0.5 * dt, n + 0.5 * dt * k2);
                let k4 = f(t + dt, n + dt * k3);
                n += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            n
        };
        let mut steps = 1000;
        let mut prev = run(steps);
        loop {
            steps *= 2;
            let next = run(steps);
            if (next - prev).abs() <= 1e-10 * next.abs() || steps > 1 << 22 {
                return next;
            }
            prev = next;
        }
    }

    #[test]
    fn closed_form_matches_rk4_on_random_histories() {
        let p = p();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let t_end = 10f64.powf(rng.gen_range(-7.0..0.0));
            let knots: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.4..0.4)).collect();
            let samples = 4001;
            let times: Vec<f64> = (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect();
            let values = times
                .iter()
                .map(|t| {
                    let x = t / t_end * 5.0;
                    let i = (x.floor() as usize).min(4);
                    let w = x - i as f64;
                    knots[i] * (1.0 - w) + knots[i + 1] * w
                })
                .collect();
            let h = VoltageHistory::new(times, values).unwrap();
            let cf = pore_closed_form(&h, t_end, &p).unwrap();
            let rk = rk4_reference(&h, t_end, &p);
            assert!((cf - rk).abs() <= 1e-6 * rk.abs(), "{cf} vs {rk}");
        }
    }

    proptest! {
        #[test]
        fn cutoff_is_idempotent_and_bounded(v in -10.0f64..10.0, m in 0.01f64..5.0) {
            let c = cutoff(v, m);
            prop_assert!(c.abs() <= m);
            prop_assert_eq!(cutoff(c, m), c);
            if v.abs() <= m { prop_assert_eq!(c, v); }
        }

        #[test]
        fn conductivity_floor(v in -2.0f64..2.0, n in 0.0f64..1e12) {
            let p = ModelParams::default();
            prop_assert!(sigma_m(MembraneModel::NeuKrassowska, v, n, &p).unwrap() >= p.sigma_m0);
        }

        #[test]
        fn pore_density_stays_positive(v in -1.5f64..1.5, dt in 1e-10f64..1e-6, steps in 1usize..50) {
            let p = ModelParams::default();
            let mut n = p.n0;
            for _ in 0..steps {
                n = rk4_step(MembraneModel::NeuKrassowska, v, n, dt, &p);
                prop_assert!(n > 0.0);
            }
        }

        #[test]
        fn relaxation_target_in_unit_interval(v in -5.0f64..5.0) {
            let b = relaxation_target(v, &ModelParams::default());
            prop_assert!((0.0..=1.0).contains(&b));
        }
    }
}
