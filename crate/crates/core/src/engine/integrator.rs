//! Fixed-step explicit integrators over flat state vectors.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn fit(&mut self, n: usize) {
        for v in [
            &mut self.k1,
            &mut self.k2,
            &mut self.k3,
            &mut self.k4,
            &mut self.tmp,
        ] {
            v.resize(n, 0.0);
        }
    }
}

/// Advances `x` by `h` for the autonomous system `dx = f(x)`.
pub fn advance<F>(method: Integrator, x: &mut [f64], h: f64, ws: &mut Workspace, mut f: F)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x.len();
    ws.fit(n);
    match method {
        Integrator::Euler => {
            f(x, &mut ws.k1);
            for i in 0..n {
                x[i] += h * ws.k1[i];
            }
        }
        Integrator::Rk4 => {
            f(x, &mut ws.k1);
            for i in 0..n {
                ws.tmp[i] = x[i] + 0.5 * h * ws.k1[i];
            }
            f(&ws.tmp, &mut ws.k2);
            for i in 0..n {
                ws.tmp[i] = x[i] + 0.5 * h * ws.k2[i];
            }
            f(&ws.tmp, &mut ws.k3);
            for i in 0..n {
                ws.tmp[i] = x[i] + h * ws.k3[i];
            }
            f(&ws.tmp, &mut ws.k4);
            for i in 0..n {
                x[i] += h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
            }
        }
    }
}
