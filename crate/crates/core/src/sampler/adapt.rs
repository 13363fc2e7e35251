//! Warmup adaptation: dual-averaging step size and windowed diagonal metric.

/// Nesterov dual averaging of `log ε` toward a target acceptance statistic.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    pub delta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub t0: f64,
    pub mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            gamma: 0.05,
            kappa: 0.75,
            t0: 10.0,
            mu: 0.5f64.ln(),
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    pub fn restart(&mut self, step_size: f64) {
        self.mu = (10.0 * step_size).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    /// Returns the next step size.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let x_eta = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// Final step size after warmup.
    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Welford running variance.
#[derive(Debug, Clone)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn add(&mut self, q: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(q) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    fn restart(&mut self) {
        self.n = 0;
        self.mean.iter_mut().for_each(|v| *v = 0.0);
        self.m2.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Diagonal inverse metric estimated over doubling windows between an
/// initial fast buffer and a terminal step-size-only buffer.
#[derive(Debug, Clone)]
pub struct WindowedVariance {
    num_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    counter: usize,
    window_size: usize,
    next_window: usize,
    estimator: Welford,
}

impl WindowedVariance {
    pub fn new(dim: usize, num_warmup: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut base_window) = (75, 50, 25);
        if num_warmup >= 20 && init_buffer + base_window + term_buffer > num_warmup {
            init_buffer = (0.15 * num_warmup as f64) as usize;
            term_buffer = (0.1 * num_warmup as f64) as usize;
            base_window = num_warmup - (init_buffer + term_buffer);
        }
        if num_warmup < 20 {
            log::warn!("no metric adaptation with fewer than 20 warmup iterations");
        }
        Self {
            num_warmup,
            init_buffer,
            term_buffer,
            counter: 0,
            window_size: base_window,
            next_window: init_buffer + base_window - 1,
            estimator: Welford::new(dim),
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter + self.term_buffer < self.num_warmup
            && self.counter != self.num_warmup
    }

    fn window_ends(&self) -> bool {
        self.counter == self.next_window && self.counter != self.num_warmup
    }

    fn compute_next_window(&mut self) {
        let last = self.num_warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last && self.next_window + 2 * self.window_size >= self.num_warmup - self.term_buffer {
            self.next_window = last;
        }
    }

    /// Feeds one warmup position; returns `true` when `inv_metric` was updated.
    pub fn learn(&mut self, inv_metric: &mut [f64], q: &[f64]) -> bool {
        if self.num_warmup < 20 {
            return false;
        }
        if self.in_window() {
            self.estimator.add(q);
        }
        if self.window_ends() {
            self.compute_next_window();
            let n = self.estimator.n as f64;
            for (v, s) in inv_metric.iter_mut().zip(&self.estimator.m2) {
                let var = s / (n - 1.0);
                *v = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
            }
            self.estimator.restart();
            self.counter += 1;
            return true;
        }
        self.counter += 1;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_schedule_for_default_warmup() {
        let mut w = WindowedVariance::new(1, 500);
        let mut m = vec![1.0];
        let ends: Vec<usize> = (0..500).filter(|&i| w.learn(&mut m, &[i as f64])).collect();
        assert_eq!(ends, vec![99, 149, 249, 449]);
    }

    #[test]
    fn short_warmup_uses_proportional_buffers() {
        let mut w = WindowedVariance::new(1, 100);
        let mut m = vec![1.0];
        let ends: Vec<usize> = (0..100).filter(|&i| w.learn(&mut m, &[i as f64])).collect();
        assert_eq!(ends, vec![89]);
    }

    #[test]
    fn regularised_variance() {
        let mut w = WindowedVariance::new(2, 500);
        let mut m = vec![1.0, 1.0];
        for i in 0..100 {
            let x = if i % 2 == 0 { 1.0 } else { -1.0 };
            w.learn(&mut m, &[x, 3.0]);
        }
        // the first window covers iterations 75..100
        let xs: Vec<f64> = (75..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mean = xs.iter().sum::<f64>() / 25.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 24.0;
        assert!((m[0] - (25.0 / 30.0 * var + 1e-3 * 5.0 / 30.0)).abs() < 1e-12);
        assert!((m[1] - 1e-3 * 5.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn dual_averaging_moves_toward_target() {
        let mut da = DualAveraging::new(0.8);
        da.restart(1.0);
        let bigger = da.learn(1.0);
        da.restart(1.0);
        let smaller = da.learn(0.0);
        assert!(bigger > smaller);
    }
}
