//! Three-stage, third-order strong-stability-preserving Runge-Kutta.

use crate::Result;

/// Vector-space operations needed by the stage combinations.
pub trait StageVector: Clone {
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
}

impl StageVector for f64 {
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }

    fn scale(&mut self, a: f64) {
        *self *= a;
    }
}

impl StageVector for Vec<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, x) in self.iter_mut().zip(x) {
            *s += a * x;
        }
    }

    fn scale(&mut self, a: f64) {
        self.iter_mut().for_each(|s| *s *= a);
    }
}

/// The spatial operator and the per-stage hooks.
pub trait StageOperator<S> {
    fn rhs(&mut self, u: &S, t: f64) -> Result<S>;

    /// Called on each forward-Euler substep `u + dt L(u)` before it is combined.
    fn after_euler(&mut self, _euler: &S, _t: f64) -> Result<()> {
        Ok(())
    }

    /// Called on each stage result; slope then realizability limiting.
    fn limit(&mut self, _u: &mut S, _t: f64) -> Result<()> {
        Ok(())
    }
}

/// Butcher weights of the three stages, for mass budgets.
pub const SSP33_WEIGHTS: [f64; 3] = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];

/// Stage evaluation times relative to `t`, in units of `dt`.
pub const SSP33_NODES: [f64; 3] = [0.0, 1.0, 0.5];

/// One SSP(3,3) step:
/// `u1 = u + dt L(u)`, `u2 = 3/4 u + 1/4 (u1 + dt L(u1))`, `u' = 1/3 u + 2/3 (u2 + dt L(u2))`.
pub fn ssp33_step<S: StageVector, O: StageOperator<S>>(u: &S, t: f64, dt: f64, op: &mut O) -> Result<S> {
    let euler = |op: &mut O, v: &S, tv: f64| -> Result<S> {
        let l = op.rhs(v, tv)?;
        let mut e = v.clone();
        e.axpy(dt, &l);
        op.after_euler(&e, tv + dt)?;
        Ok(e)
    };

    let mut u1 = euler(op, u, t)?;
    op.limit(&mut u1, t + dt)?;

    let mut u2 = euler(op, &u1, t + dt)?;
    u2.scale(0.25);
    u2.axpy(0.75, u);
    op.limit(&mut u2, t + 0.5 * dt)?;

    let mut u3 = euler(op, &u2, t + 0.5 * dt)?;
    u3.scale(2.0 / 3.0);
    u3.axpy(1.0 / 3.0, u);
    op.limit(&mut u3, t + dt)?;
    Ok(u3)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(f64);

    impl StageOperator<f64> for Linear {
        fn rhs(&mut self, u: &f64, _t: f64) -> Result<f64> {
            Ok(self.0 * u)
        }
    }

    struct Clock;

    impl StageOperator<f64> for Clock {
        fn rhs(&mut self, _u: &f64, t: f64) -> Result<f64> {
            Ok(3.0 * t * t)
        }
    }

    #[test]
    fn zero_rhs_keeps_state() {
        struct Zero;
        impl StageOperator<Vec<f64>> for Zero {
            fn rhs(&mut self, u: &Vec<f64>, _t: f64) -> Result<Vec<f64>> {
                Ok(vec![0.0; u.len()])
            }
        }
        let u = vec![1.0, -2.0, 3.5];
        let v = ssp33_step(&u, 0.0, 0.1, &mut Zero).unwrap();
        for (a, b) in v.iter().zip(&u) {
            assert!((a - b).abs() <= 2.0 * f64::EPSILON * b.abs());
        }
    }

    #[test]
    fn local_error_is_fourth_order() {
        let lambda = -1.3;
        let err = |dt: f64| (ssp33_step(&1.0, 0.0, dt, &mut Linear(lambda)).unwrap() - (lambda * dt).exp()).abs();
        let (e1, e2) = (err(0.1), err(0.05));
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.1, "{order}");
        // The stability polynomial is the cubic Taylor polynomial.
        let z: f64 = lambda * 0.1;
        let p = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
        assert!((ssp33_step(&1.0, 0.0, 0.1, &mut Linear(lambda)).unwrap() - p).abs() < 1e-15);
    }

    #[test]
    fn stage_times_integrate_quadratics_exactly() {
        // u' = 3t^2 is integrated exactly by a third-order quadrature in time.
        let u = ssp33_step(&0.0, 1.0, 0.5, &mut Clock).unwrap();
        assert!((u - (1.5f64.powi(3) - 1.0)).abs() < 1e-14);
    }
}
