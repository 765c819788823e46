use ndarray::{concatenate, Array2, Axis, Zip};

/// Adam moments for the two classifier weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m1: Array2<f64>,
    pub v1: Array2<f64>,
    pub m2: Array2<f64>,
    pub v2: Array2<f64>,
    pub step: u64,
}

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

impl AdamState {
    pub fn zeros(w1: (usize, usize), w2: (usize, usize)) -> Self {
        AdamState {
            m1: Array2::zeros(w1),
            v1: Array2::zeros(w1),
            m2: Array2::zeros(w2),
            v2: Array2::zeros(w2),
            step: 0,
        }
    }

    pub(crate) fn grow_columns(&mut self, extra: usize) {
        let rows = self.m2.nrows();
        let pad = Array2::zeros((rows, extra));
        self.m2 = concatenate(Axis(1), &[self.m2.view(), pad.view()]).unwrap();
        self.v2 = concatenate(Axis(1), &[self.v2.view(), pad.view()]).unwrap();
    }

    pub(crate) fn apply(&mut self, lr: f64, w1: &mut Array2<f64>, g1: &Array2<f64>, w2: &mut Array2<f64>, g2: &Array2<f64>) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let update = |w: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>| {
            Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
            });
        };
        update(w1, g1, &mut self.m1, &mut self.v1);
        update(w2, g2, &mut self.m2, &mut self.v2);
    }
}
