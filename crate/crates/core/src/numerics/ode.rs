use crate::error::{Error, Result};

/// Time points and the state recorded at each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    /// Appends a point. Panics if time does not increase or the dimension
    /// differs.
    pub fn push(&mut self, t: f64, state: &[f64]) {
        assert_eq!(state.len(), self.dim, "trajectory state dimension");
        if let Some(&last) = self.times.last() {
            assert!(t > last, "trajectory times must increase");
        }
        self.times.push(t);
        self.states.extend_from_slice(state);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim.max(1))
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        let n = self.len();
        (n > 0).then(|| (self.times[n - 1], self.state(n - 1)))
    }
}

/// Classical RK4 from `t = 0` to `t_end`, calling `observe` at every step
/// (including `t = 0`). The final step is shortened to land on `t_end`.
/// Returns the final state.
pub fn integrate_ode_observed<F, O>(
    mut rhs: F,
    y0: &[f64],
    t_end: f64,
    step: f64,
    mut observe: O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    if !(step > 0.0 && t_end > 0.0) {
        return Err(Error::config(format!(
            "integrate_ode needs step > 0 and t_end > 0 (got {step}, {t_end})"
        )));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    observe(0.0, &y);
    let mut t = 0.0;
    let mut k: u64 = 0;
    while t < t_end {
        k += 1;
        let mut t_next = k as f64 * step;
        // Snap to t_end when within rounding of it, so no sliver step remains.
        if t_next >= t_end - 1e-12 * t_end.max(1.0) {
            t_next = t_end;
        }
        let h = t_next - t;

        rhs(t, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        t = t_next;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { time: t });
        }
        observe(t, &y);
    }
    Ok(y)
}

/// Classical RK4 recording every step into a [`Trajectory`].
pub fn integrate_ode<F>(rhs: F, y0: &[f64], t_end: f64, step: f64) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut traj = Trajectory::new(y0.len());
    integrate_ode_observed(rhs, y0, t_end, step, |t, y| traj.push(t, y))?;
    Ok(traj)
}
