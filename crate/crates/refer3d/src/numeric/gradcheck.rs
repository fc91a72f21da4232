//! Central-finite-difference verification of analytic gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numeric::mlp::Param;

/// Anything exposing a stable, ordered list of trainable parameters.
pub trait ParamCollection {
    fn params_mut(&mut self) -> Vec<&mut Param>;
}

impl ParamCollection for Vec<Param> {
    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.iter_mut().collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckSettings {
    pub eps: f64,
    pub tol: f64,
    /// Cap on probed coordinates per parameter; `None` probes all.
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings { eps: 1e-5, tol: 1e-4, max_coords_per_param: None, seed: 7 }
    }
}

/// Outcome of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_coord: usize,
    pub coords_checked: usize,
    pub tol: f64,
    pub pass: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (max rel err {:.3e} at {}[{}], {} coords, tol {:.1e})",
            if self.pass { "pass" } else { "FAIL" },
            self.max_rel_err,
            self.worst_param,
            self.worst_coord,
            self.coords_checked,
            self.tol
        )
    }
}

// Relative error with a floor so near-zero gradient pairs compare absolutely.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Compare analytic gradients against central finite differences.
///
/// `backward` must zero nothing itself: the harness zeroes gradients, runs
/// `backward` once to populate them, then probes `loss` at `value ± eps`
/// coordinate by coordinate. `loss` must be a pure function of the current
/// parameter values.
pub fn grad_check<S, L, B>(
    state: &mut S,
    mut loss: L,
    mut backward: B,
    settings: GradCheckSettings,
) -> GradCheckReport
where
    S: ParamCollection,
    L: FnMut(&mut S) -> f64,
    B: FnMut(&mut S),
{
    for p in state.params_mut() {
        p.zero_grad();
    }
    backward(state);
    let analytic: Vec<(String, Vec<f64>)> = state
        .params_mut()
        .iter()
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_coord: 0,
        coords_checked: 0,
        tol: settings.tol,
        pass: true,
    };
    let n_params = analytic.len();
    for pi in 0..n_params {
        let len = analytic[pi].1.len();
        let mut coords: Vec<usize> = (0..len).collect();
        if let Some(cap) = settings.max_coords_per_param {
            if len > cap {
                coords.shuffle(&mut rng);
                coords.truncate(cap);
                coords.sort_unstable();
            }
        }
        for &c in &coords {
            let orig = {
                let mut ps = state.params_mut();
                let v = ps[pi].value.data()[c];
                ps[pi].value.data_mut()[c] = v + settings.eps;
                v
            };
            let f_plus = loss(state);
            {
                let mut ps = state.params_mut();
                ps[pi].value.data_mut()[c] = orig - settings.eps;
            }
            let f_minus = loss(state);
            {
                let mut ps = state.params_mut();
                ps[pi].value.data_mut()[c] = orig;
            }
            let numeric = (f_plus - f_minus) / (2.0 * settings.eps);
            let err = rel_err(analytic[pi].1[c], numeric);
            report.coords_checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_param = analytic[pi].0.clone();
                report.worst_coord = c;
            }
        }
    }
    report.pass = report.max_rel_err < settings.tol;
    report
}
