//! The two-state polynomial plant
//!
//! ```text
//! x1' = (-x1 + x1 x2 + x2 u) / T
//! x2' = (x1 + 2 x2 + x1^2 + x1^2 x2 + u) / T
//! ```
//!
//! under zero-order-hold control, integrated with fixed-step RK4.

use crate::error::{Error, Result};
use crate::harness::{RunMetrics, Session, SessionConfig};
use crate::polyctrl::{encode_state, evaluate_plaintext, evaluate_secure, plan_evaluation, ConstantMode, QuantizedLaw};
use crate::scheme;

pub type State = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantModel {
    pub time_scale: f64,
}

impl Default for PlantModel {
    fn default() -> Self {
        Self { time_scale: 1000.0 }
    }
}

impl PlantModel {
    pub fn new(time_scale: f64) -> Result<Self> {
        if !(time_scale > 0.0 && time_scale.is_finite()) {
            return Err(Error::InvalidLaw(format!("time scale must be positive, got {time_scale}")));
        }
        Ok(Self { time_scale })
    }

    pub fn derivative(&self, x: State, u: f64) -> State {
        let [x1, x2] = x;
        [(-x1 + x1 * x2 + x2 * u) / self.time_scale, (x1 + 2.0 * x2 + x1 * x1 + x1 * x1 * x2 + u) / self.time_scale]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Sample period in seconds.
    pub ts: f64,
    pub substeps: u32,
    pub horizon: u32,
    pub x0: State,
    /// The run is flagged as diverged once some `|x_i|` reaches this bound.
    pub safety_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { ts: 1.0, substeps: 10, horizon: 1000, x0: [2.0, -2.0], safety_bound: 6.0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ts > 0.0 && self.ts.is_finite()) || self.substeps == 0 {
            return Err(Error::Session("sample period must be positive and substeps at least 1".into()));
        }
        Ok(())
    }

    pub fn inside(&self, x: State) -> bool {
        x.iter().all(|v| v.is_finite() && v.abs() < self.safety_bound)
    }
}

fn axpy(x: State, h: f64, k: State) -> State {
    [x[0] + h * k[0], x[1] + h * k[1]]
}

/// Holds `u` for one sample period.
pub fn plant_step(model: &PlantModel, x: State, u: f64, cfg: &SimConfig) -> Result<State> {
    if !u.is_finite() || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(if u.is_finite() { x[0] + x[1] } else { u }));
    }
    let h = cfg.ts / cfg.substeps as f64;
    let mut x = x;
    for _ in 0..cfg.substeps {
        let k1 = model.derivative(x, u);
        let k2 = model.derivative(axpy(x, h / 2.0, k1), u);
        let k3 = model.derivative(axpy(x, h / 2.0, k2), u);
        let k4 = model.derivative(axpy(x, h, k3), u);
        x = [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
    }
    if !cfg.inside(x) {
        return Err(Error::Diverged { x1: x[0], x2: x[1] });
    }
    Ok(x)
}

/// Who computes `u`: the plaintext oracle or a secure scheme by name.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorConfig {
    pub scheme: String,
    pub session: SessionConfig,
    pub constant_mode: ConstantMode,
}

impl EvaluatorConfig {
    pub const PLAINTEXT: &'static str = "plaintext";

    pub fn plaintext() -> Self {
        Self::secure(Self::PLAINTEXT, SessionConfig::default())
    }

    pub fn secure(scheme: &str, session: SessionConfig) -> Self {
        Self { scheme: scheme.into(), session, constant_mode: ConstantMode::Direct }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub step: u32,
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    /// `u` as the signed integer behind the collector's residue.
    pub u_quantized: i64,
    pub u_decoded: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub rows: Vec<TrajectoryRow>,
    pub final_state: State,
    pub diverged: bool,
    /// Counters per control step; empty for the plaintext evaluator.
    pub step_metrics: Vec<RunMetrics>,
    pub setup_metrics: RunMetrics,
}

impl ClosedLoop {
    pub fn max_abs_u(&self) -> f64 {
        self.rows.iter().map(|r| r.u_decoded.abs()).fold(0.0, f64::max)
    }
}

pub fn run_closed_loop(
    qlaw: &QuantizedLaw,
    model: &PlantModel,
    cfg: &SimConfig,
    evaluator: &EvaluatorConfig,
) -> Result<ClosedLoop> {
    cfg.validate()?;
    if qlaw.n_x() != 2 {
        return Err(Error::InvalidLaw(format!("the plant has 2 states, the law {}", qlaw.n_x())));
    }
    let mut session = if evaluator.scheme == EvaluatorConfig::PLAINTEXT {
        None
    } else {
        let s = scheme::scheme(&evaluator.scheme)?;
        let plan = plan_evaluation(qlaw, s.as_ref(), evaluator.constant_mode)?;
        Some(Session::open(&plan, evaluator.session.clone())?)
    };
    let setup_metrics = session.as_ref().map(|s| s.metrics().clone()).unwrap_or_default();
    let ring = qlaw.ring();
    let mut out = ClosedLoop {
        rows: Vec::with_capacity(cfg.horizon as usize),
        final_state: cfg.x0,
        diverged: !cfg.inside(cfg.x0),
        step_metrics: Vec::new(),
        setup_metrics,
    };
    let mut x = cfg.x0;
    for step in 0..cfg.horizon {
        if out.diverged {
            break;
        }
        let state = encode_state(&x, qlaw.format())?;
        let u = match session.as_mut() {
            None => evaluate_plaintext(qlaw, &state)?,
            Some(s) => {
                let u = evaluate_secure(qlaw, s, &state)?;
                out.step_metrics.push(s.step_metrics().clone());
                u
            }
        };
        let u_decoded = qlaw.decode(u);
        out.rows.push(TrajectoryRow {
            step,
            t: step as f64 * cfg.ts,
            x1: x[0],
            x2: x[1],
            u_quantized: ring.signed(u.value) as i64,
            u_decoded,
        });
        match plant_step(model, x, u_decoded, cfg) {
            Ok(next) => x = next,
            Err(Error::Diverged { x1, x2 }) => {
                x = [x1, x2];
                out.diverged = true;
            }
            Err(e) => return Err(e),
        }
    }
    out.final_state = x;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(ts: f64, substeps: u32) -> SimConfig {
        SimConfig { ts, substeps, safety_bound: 1e9, ..SimConfig::default() }
    }

    #[test]
    fn origin_is_an_equilibrium() {
        let m = PlantModel::default();
        assert_eq!(plant_step(&m, [0.0, 0.0], 0.0, &SimConfig::default()).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn unit_state_derivative_and_fine_reference() {
        let m = PlantModel::default();
        assert_eq!(m.derivative([1.0, 1.0], 0.0), [0.0, 0.005]);
        let coarse = plant_step(&m, [1.0, 1.0], 0.0, &cfg(1.0, 1)).unwrap();
        let fine = plant_step(&m, [1.0, 1.0], 0.0, &cfg(1.0, 1000)).unwrap();
        assert!((coarse[0] - 1.0).abs() < 1e-4 && (coarse[1] - 1.005).abs() < 1e-4);
        for i in 0..2 {
            assert!((coarse[i] - fine[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        // large period so the truncation error dominates rounding
        let m = PlantModel::default();
        let x = [1.0, 1.0];
        let reference = plant_step(&m, x, 0.5, &cfg(300.0, 2000)).unwrap();
        let err = |n| {
            let y = plant_step(&m, x, 0.5, &cfg(300.0, n)).unwrap();
            ((y[0] - reference[0]).powi(2) + (y[1] - reference[1]).powi(2)).sqrt()
        };
        let ratio = err(4) / err(8);
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn leaving_the_box_is_flagged() {
        let m = PlantModel::default();
        let c = SimConfig { ts: 100.0, ..SimConfig::default() };
        assert!(matches!(plant_step(&m, [5.9, 5.9], 0.0, &c), Err(Error::Diverged { .. })));
        assert!(plant_step(&m, [0.0, 0.0], f64::NAN, &c).is_err());
        assert!(SimConfig { substeps: 0, ..SimConfig::default() }.validate().is_err());
    }
}
