//! Fixed-step classical RK4 used as ground truth.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::symbolic::{Program, SymbolicError};
use crate::systems::OdeSystem;

/// Internal step used for ground-truth trajectories.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("step size must be positive, got {0}")]
    Step(f64),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("writing trajectory: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub x0: Vec<f64>,
    pub theta: Vec<f64>,
    pub times: Vec<f64>,
    /// `times.len()` rows of `n` states; row 0 is `x0`.
    pub states: Vec<Vec<f64>>,
    pub step: f64,
}

impl TrajectoryRecord {
    /// Writes `t,x1..xn` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.x0.len();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("x{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (t, row) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), SolverError> {
        crate::io::write_atomic(path, |w| self.write_csv(w))?;
        Ok(())
    }
}

/// Right-hand side evaluator with reusable scratch space.
struct Rhs<'a> {
    program: &'a Program,
    params: &'a [f64],
    scratch: Vec<f64>,
}

impl Rhs<'_> {
    fn eval(&mut self, x: &[f64], t: f64, out: &mut [f64]) -> Result<(), SymbolicError> {
        self.program.eval_into(x, self.params, t, &mut self.scratch, out)
    }
}

fn rk4_step(rhs: &mut Rhs<'_>, x: &mut [f64], t: f64, h: f64, work: &mut [Vec<f64>; 5]) -> Result<(), SymbolicError> {
    let n = x.len();
    let [k1, k2, k3, k4, tmp] = work;
    rhs.eval(x, t, k1)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    rhs.eval(tmp, t + 0.5 * h, k2)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    rhs.eval(tmp, t + 0.5 * h, k3)?;
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    rhs.eval(tmp, t + h, k4)?;
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

// Number of substeps covering `gap` with step `h`, tolerating round-off in
// gap/h so that exact multiples do not produce a tiny trailing step.
fn substeps(gap: f64, h: f64) -> usize {
    let ratio = gap / h;
    let nearest = ratio.round();
    if (ratio - nearest).abs() < 1e-9 * ratio.max(1.0) {
        nearest.max(1.0) as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Integrates from `grid[0] = 0` and samples the state at each grid time.
///
/// Steps of size `h` are taken between consecutive grid points; the last
/// substep of each gap is shortened so grid times are hit exactly.
pub fn integrate(
    system: &OdeSystem,
    x0: &[f64],
    theta: &[f64],
    grid: &[f64],
    h: f64,
) -> Result<TrajectoryRecord, SolverError> {
    let params = system.full_params(x0, theta)?;
    let mut rec = integrate_with_params(system.field(), x0, &params, grid, h)?;
    rec.theta = theta.to_vec();
    Ok(rec)
}

/// As [`integrate`], with the full parameter vector supplied directly.
pub fn integrate_with_params(
    field: &Program,
    x0: &[f64],
    params: &[f64],
    grid: &[f64],
    h: f64,
) -> Result<TrajectoryRecord, SolverError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(SolverError::Step(h));
    }
    match grid.first() {
        Some(&t0) if t0 == 0.0 => {}
        _ => return Err(SolverError::Grid("grid must start at 0".into())),
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolverError::Grid("grid must be strictly increasing".into()));
    }
    let n = x0.len();
    let mut rhs = Rhs {
        program: field,
        params,
        scratch: Vec::new(),
    };
    let mut work: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity(grid.len());
    states.push(x.clone());
    for w in grid.windows(2) {
        let (start, end) = (w[0], w[1]);
        let k = substeps(end - start, h);
        let mut t = start;
        for s in 0..k {
            let step = if s + 1 == k { end - t } else { h };
            rk4_step(&mut rhs, &mut x, t, step, &mut work)?;
            t = if s + 1 == k { end } else { start + (s + 1) as f64 * h };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::NonFinite { time: t });
            }
        }
        states.push(x.clone());
    }
    Ok(TrajectoryRecord {
        x0: x0.to_vec(),
        theta: Vec::new(),
        times: grid.to_vec(),
        states,
        step: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{builtin_system, OdeSystem, SystemSpec};

    fn scalar(rhs: &str) -> OdeSystem {
        OdeSystem::from_spec(SystemSpec {
            name: "toy".into(),
            states: vec!["x".into()],
            params: vec![],
            rhs: vec![rhs.into()],
            state_bounds: vec![[0.0, 1.0]],
            param_bounds: vec![],
            constants: Default::default(),
            derived: vec![],
            horizon: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn zero_field_is_constant() {
        let s = scalar("0");
        let r = integrate(&s, &[0.7], &[], &[0.0, 0.5, 1.0], 0.1).unwrap();
        assert!(r.states.iter().all(|row| row[0] == 0.7));
    }

    #[test]
    fn exponential_growth() {
        let s = scalar("x");
        let r = integrate(&s, &[1.0], &[], &[0.0, 1.0], 1e-3).unwrap();
        assert!((r.states[1][0] - std::f64::consts::E).abs() < 1e-9);
        assert_eq!(r.states[0], vec![1.0]);
    }

    #[test]
    fn uneven_gaps_hit_grid_exactly() {
        let s = scalar("x");
        let r = integrate(&s, &[1.0], &[], &[0.0, 0.0105, 0.3], 1e-2).unwrap();
        assert!((r.states[1][0] - 0.0105f64.exp()).abs() < 1e-12);
        assert!((r.states[2][0] - 0.3f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn blow_up_reports_time() {
        // x(t) = 1/(1 - t) blows up at t = 1.
        let s = scalar("x^2");
        match integrate(&s, &[1.0], &[], &[0.0, 2.0], 1e-2) {
            Err(SolverError::NonFinite { time }) => assert!(time > 0.9 && time <= 2.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_inputs() {
        let s = scalar("x");
        assert!(matches!(integrate(&s, &[1.0], &[], &[0.5, 1.0], 0.1), Err(SolverError::Grid(_))));
        assert!(matches!(integrate(&s, &[1.0], &[], &[0.0, 0.0], 0.1), Err(SolverError::Grid(_))));
        assert!(matches!(integrate(&s, &[1.0], &[], &[0.0, 1.0], 0.0), Err(SolverError::Step(_))));
    }

    #[test]
    fn csv_header_and_rows() {
        let s = builtin_system("duffing").unwrap();
        let r = integrate(&s, &[0.1, -0.2], &[0.3], &[0.0, 0.5], 1e-2).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        assert_eq!(lines[1], "0,0.1,-0.2");
        assert_eq!(lines.len(), 3);
    }
}
