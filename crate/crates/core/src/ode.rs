//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrator settings.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-10, atol: 1e-12, max_steps: 200_000 }
    }
}

fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` through each point of `stops`
/// (increasing, all > `t0`) and return the state at every stop.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    stops: &[f64],
    tol: Tolerances,
) -> Result<Vec<[f64; N]>> {
    let mut out = Vec::with_capacity(stops.len());
    let (mut t, mut y) = (t0, y0);
    let span = stops.last().map_or(0.0, |&e| e - t0);
    let mut h = 1e-3 * span.abs().max(1e-12);
    let mut k1 = f(t, &y);
    let mut steps = 0;
    for &stop in stops {
        while t < stop {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::NoConvergence {
                    method: "dopri5",
                    iterations: steps,
                    residual: stop - t,
                    trace: Vec::new(),
                });
            }
            let last = t + h >= stop;
            let hs = if last { stop - t } else { h };
            let k2 = f(t + C2 * hs, &lin(&y, hs, &[(A21, &k1)]));
            let k3 = f(t + C3 * hs, &lin(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * hs, &lin(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * hs,
                &lin(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + hs,
                &lin(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = lin(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + hs, &y_new);
            let mut err = 0.0f64;
            for i in 0..N {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(Error::Numeric("ODE state became non-finite".into()));
            }
            if err <= 1.0 {
                t = if last { stop } else { t + hs };
                y = y_new;
                k1 = k7;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // Do not let a short final step shrink the next one.
            h = if last && err <= 1.0 { h.max(hs * factor) } else { hs * factor };
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let ys = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], &[0.5, 1.0], Tolerances::default()).unwrap();
        assert!((ys[1][0] - 1f64.exp()).abs() < 1e-9);
        let ys = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            &[std::f64::consts::PI],
            Tolerances { rtol: 1e-12, atol: 1e-14, max_steps: 100_000 },
        )
        .unwrap();
        assert!(ys[0][0].abs() < 1e-10 && (ys[0][1] + 1.0).abs() < 1e-10);
    }
}
