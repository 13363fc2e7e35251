//! Multinomial NUTS with the generalised no-U-turn criterion and a diagonal
//! Euclidean metric.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LogDensity;
use crate::SamplerError;

/// Energy error that marks a trajectory as divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
}

impl Point {
    pub fn new<D: LogDensity + ?Sized>(target: &D, q: Vec<f64>) -> Result<Self, String> {
        let mut grad = vec![0.0; q.len()];
        let logp = target.logp_grad(&q, &mut grad).map_err(|e| e.to_string())?;
        if !logp.is_finite() {
            return Err(format!("log density is {logp}"));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(format!("gradient coordinate {i} is not finite"));
        }
        Ok(Self {
            p: vec![0.0; q.len()],
            q,
            logp,
            grad,
        })
    }
}

/// Sampler statistics of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStats {
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

pub(crate) struct Nuts<'a, D: ?Sized> {
    target: &'a D,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub max_depth: usize,
    pub rng: ChaCha8Rng,
    divergent: bool,
    n_leapfrog: usize,
    sum_metro_prob: f64,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

fn add_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x + y;
    }
}

impl<'a, D: LogDensity + ?Sized> Nuts<'a, D> {
    pub fn new(target: &'a D, rng: ChaCha8Rng, max_depth: usize) -> Self {
        Self {
            target,
            step_size: 1.0,
            inv_metric: vec![1.0; target.dim()],
            max_depth,
            rng,
            divergent: false,
            n_leapfrog: 0,
            sum_metro_prob: 0.0,
        }
    }

    fn sample_momentum(&mut self, z: &mut Point) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            *p = n / m.sqrt();
        }
    }

    fn hamiltonian(&self, z: &Point) -> f64 {
        let kinetic: f64 = z.p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum();
        -z.logp + 0.5 * kinetic
    }

    fn p_sharp(&self, z: &Point, out: &mut [f64]) {
        for ((o, p), m) in out.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *o = p * m;
        }
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        match self.target.logp_grad(&z.q, &mut z.grad) {
            Ok(lp) if lp.is_finite() && z.grad.iter().all(|g| g.is_finite()) => {
                z.logp = lp;
                for (p, g) in z.p.iter_mut().zip(&z.grad) {
                    *p += 0.5 * eps * g;
                }
            }
            _ => z.logp = f64::NEG_INFINITY,
        }
    }

    /// Doubles or halves the step size until a single leapfrog step crosses
    /// an acceptance probability of 0.8.
    pub fn init_step_size(&mut self, z: &mut Point) -> Result<(), SamplerError> {
        let eps0 = self.step_size;
        if eps0 == 0.0 || eps0 > 1e7 || eps0.is_nan() {
            return Ok(());
        }
        let start = z.clone();
        let trial = |s: &mut Self, z: &mut Point| -> f64 {
            z.clone_from(&start);
            s.sample_momentum(z);
            let h0 = s.hamiltonian(z);
            s.leapfrog(z, s.step_size);
            let mut h = s.hamiltonian(z);
            if h.is_nan() {
                h = f64::INFINITY;
            }
            h0 - h
        };
        let threshold = 0.8f64.ln();
        let direction = if trial(self, z) > threshold { 1 } else { -1 };
        loop {
            let delta_h = trial(self, z);
            if direction == 1 && !(delta_h > threshold) {
                break;
            }
            if direction == -1 && !(delta_h < threshold) {
                break;
            }
            self.step_size = if direction == 1 {
                2.0 * self.step_size
            } else {
                0.5 * self.step_size
            };
            if self.step_size > 1e7 {
                return Err(SamplerError::StepSize(
                    "posterior is improper, step size grew beyond 1e7".into(),
                ));
            }
            if self.step_size == 0.0 {
                return Err(SamplerError::StepSize("no acceptably small step size".into()));
            }
        }
        z.clone_from(&start);
        Ok(())
    }

    pub fn transition(&mut self, z: &mut Point) -> TransitionStats {
        let dim = z.q.len();
        self.sample_momentum(z);
        let h0 = self.hamiltonian(z);

        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let mut p_sharp0 = vec![0.0; dim];
        self.p_sharp(z, &mut p_sharp0);
        let mut p_fwd_fwd = z.p.clone();
        let mut p_sharp_fwd_fwd = p_sharp0.clone();
        let mut p_fwd_bck = z.p.clone();
        let mut p_sharp_fwd_bck = p_sharp0.clone();
        let mut p_bck_fwd = z.p.clone();
        let mut p_sharp_bck_fwd = p_sharp0.clone();
        let mut p_bck_bck = z.p.clone();
        let mut p_sharp_bck_bck = p_sharp0;

        let mut rho = z.p.clone();
        let mut log_sum_weight = 0.0;
        let mut depth = 0;
        self.n_leapfrog = 0;
        self.sum_metro_prob = 0.0;
        self.divergent = false;

        let mut rho_fwd = vec![0.0; dim];
        let mut rho_bck = vec![0.0; dim];
        let mut rho_ext = vec![0.0; dim];
        while depth < self.max_depth {
            rho_fwd.iter_mut().for_each(|v| *v = 0.0);
            rho_bck.iter_mut().for_each(|v| *v = 0.0);
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid = if self.rng.random::<f64>() > 0.5 {
                rho_bck.copy_from_slice(&rho);
                p_bck_fwd.copy_from_slice(&p_fwd_bck);
                p_sharp_bck_fwd.copy_from_slice(&p_sharp_fwd_bck);
                let mut cur = z_fwd.clone();
                let ok = self.build_tree(
                    depth,
                    &mut cur,
                    &mut z_propose,
                    &mut p_sharp_fwd_bck,
                    &mut p_sharp_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    h0,
                    1.0,
                    &mut lsw_subtree,
                );
                z_fwd = cur;
                ok
            } else {
                rho_fwd.copy_from_slice(&rho);
                p_fwd_bck.copy_from_slice(&p_bck_fwd);
                p_sharp_fwd_bck.copy_from_slice(&p_sharp_bck_fwd);
                let mut cur = z_bck.clone();
                let ok = self.build_tree(
                    depth,
                    &mut cur,
                    &mut z_propose,
                    &mut p_sharp_bck_fwd,
                    &mut p_sharp_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    h0,
                    -1.0,
                    &mut lsw_subtree,
                );
                z_bck = cur;
                ok
            };
            if !valid {
                break;
            }
            depth += 1;
            if lsw_subtree > log_sum_weight {
                z_sample.clone_from(&z_propose);
            } else {
                let accept = (lsw_subtree - log_sum_weight).exp();
                if self.rng.random::<f64>() < accept {
                    z_sample.clone_from(&z_propose);
                }
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

            add_into(&rho_bck, &rho_fwd, &mut rho);
            let mut persist = criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            add_into(&rho_bck, &p_fwd_bck, &mut rho_ext);
            persist &= criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
            add_into(&rho_fwd, &p_bck_fwd, &mut rho_ext);
            persist &= criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_ext);
            if !persist {
                break;
            }
        }
        *z = z_sample;
        TransitionStats {
            accept_stat: self.sum_metro_prob / self.n_leapfrog as f64,
            tree_depth: depth,
            n_leapfrog: self.n_leapfrog,
            divergent: self.divergent,
            energy: self.hamiltonian(z),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        depth: usize,
        z: &mut Point,
        z_propose: &mut Point,
        p_sharp_beg: &mut [f64],
        p_sharp_end: &mut [f64],
        rho: &mut [f64],
        p_beg: &mut [f64],
        p_end: &mut [f64],
        h0: f64,
        sign: f64,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.step_size);
            self.n_leapfrog += 1;
            let mut h = self.hamiltonian(z);
            if h.is_nan() {
                h = f64::INFINITY;
            }
            if h - h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, h0 - h);
            self.sum_metro_prob += if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
            z_propose.clone_from(z);
            self.p_sharp(z, p_sharp_beg);
            p_sharp_end.copy_from_slice(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            p_beg.copy_from_slice(&z.p);
            p_end.copy_from_slice(&z.p);
            return !self.divergent;
        }
        let dim = z.q.len();

        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        if !self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            h0,
            sign,
            &mut lsw_init,
        ) {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        if !self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            h0,
            sign,
            &mut lsw_final,
        ) {
            return false;
        }

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = (lsw_final - lsw_subtree).exp();
            if self.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }

        let mut rho_subtree = vec![0.0; dim];
        add_into(&rho_init, &rho_final, &mut rho_subtree);
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = criterion(p_sharp_beg, p_sharp_end, &rho_subtree);
        let mut rho_ext = vec![0.0; dim];
        add_into(&rho_init, &p_final_beg, &mut rho_ext);
        persist &= criterion(p_sharp_beg, &p_sharp_final_beg, &rho_ext);
        add_into(&rho_final, &p_init_end, &mut rho_ext);
        persist &= criterion(&p_sharp_init_end, p_sharp_end, &rho_ext);
        persist
    }
}
