//! Classical fixed-step Runge-Kutta.

/// A state that lives in a vector space, so that stages can be combined.
pub trait OdeState: Sized {
    /// `self + k * d`
    fn scaled_add(&self, k: f64, d: &Self) -> Self;
}

impl OdeState for f64 {
    fn scaled_add(&self, k: f64, d: &f64) -> f64 {
        self + k * d
    }
}

impl<const N: usize> OdeState for [f64; N] {
    fn scaled_add(&self, k: f64, d: &[f64; N]) -> [f64; N] {
        std::array::from_fn(|i| self[i] + k * d[i])
    }
}

/// One RK4 step of `dy/dt = f(y)`. The derivative is re-evaluated from the
/// stage state at each of the four stages.
pub fn rk4_step<S, E>(s: &S, dt: f64, mut f: impl FnMut(&S) -> Result<S, E>) -> Result<S, E>
where
    S: OdeState,
{
    let half = 0.5 * dt;
    let k1 = f(s)?;
    let k2 = f(&s.scaled_add(half, &k1))?;
    let k3 = f(&s.scaled_add(half, &k2))?;
    let k4 = f(&s.scaled_add(dt, &k3))?;
    Ok(s.scaled_add(dt / 6.0, &k1)
        .scaled_add(dt / 3.0, &k2)
        .scaled_add(dt / 3.0, &k3)
        .scaled_add(dt / 6.0, &k4))
}
