//! Multi-head self-attention with rotary positions and a band mask.

use gravview_core::Real;
use rand::Rng;

use crate::nn::{join, Linear, ParamSet};
use crate::rope::rotate_in_place;
use crate::tensor::{dot, Matrix};
use crate::SeqError;

#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T> {
    pub wq: Linear<T>,
    pub wk: Linear<T>,
    pub wv: Linear<T>,
    pub wo: Linear<T>,
    pub heads: usize,
}

/// Softmax weights of one query row: `(key index, weight)` for every
/// unmasked key, in increasing key order.
pub type WeightRow<T> = Vec<(usize, T)>;

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    x: Matrix<T>,
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    o: Matrix<T>,
    /// `weights[head][t]`.
    pub weights: Vec<Vec<WeightRow<T>>>,
    positions: Vec<T>,
}

/// Whether query position `t` may attend to key position `s`:
/// `−band < t − s < band`.
#[inline]
pub fn in_band(t: i64, s: i64, band: usize) -> bool {
    (t - s).unsigned_abs() < band as u64
}

impl<T: Real> Attention<T> {
    pub fn zeros(dim: usize, heads: usize) -> Self {
        Self {
            wq: Linear::zeros(dim, dim),
            wk: Linear::zeros(dim, dim),
            wv: Linear::zeros(dim, dim),
            wo: Linear::zeros(dim, dim),
            heads,
        }
    }

    pub fn init(dim: usize, heads: usize, rng: &mut impl Rng) -> Self {
        Self {
            wq: Linear::init(dim, dim, rng),
            wk: Linear::init(dim, dim, rng),
            wv: Linear::init(dim, dim, rng),
            wo: Linear::init(dim, dim, rng),
            heads,
        }
    }

    fn head_dim(&self) -> usize {
        self.wq.output_dim() / self.heads
    }

    fn rotate_rows(&self, m: &mut Matrix<T>, positions: &[T], freqs: &[T]) {
        let dh = self.head_dim();
        for (t, &p) in positions.iter().enumerate() {
            for h in 0..self.heads {
                rotate_in_place(&mut m.row_mut(t)[h * dh..(h + 1) * dh], p, freqs);
            }
        }
    }

    /// Unmasked logits `(W_q f^t)ᵀ R(p^s − p^t) (W_k f^s) / √d_h` of one
    /// head, rows indexed by query and columns by key.
    pub fn logits(
        &self,
        q_tokens: &Matrix<T>,
        q_positions: &[i64],
        k_tokens: &Matrix<T>,
        k_positions: &[i64],
        head: usize,
        freqs: &[T],
    ) -> Result<Matrix<T>, SeqError> {
        check_len("query positions", q_tokens.rows(), q_positions.len())?;
        check_len("key positions", k_tokens.rows(), k_positions.len())?;
        if head >= self.heads {
            return Err(SeqError::ShapeMismatch { what: "head index", expected: self.heads, got: head });
        }
        let to_t = |p: &[i64]| p.iter().map(|&x| T::lit(x as f64)).collect::<Vec<T>>();
        let mut q = self.wq.forward(q_tokens);
        let mut k = self.wk.forward(k_tokens);
        self.rotate_rows(&mut q, &to_t(q_positions), freqs);
        self.rotate_rows(&mut k, &to_t(k_positions), freqs);
        let dh = self.head_dim();
        let scale = T::one() / T::from_usize_lossy(dh).sqrt();
        let r = head * dh..(head + 1) * dh;
        Ok(Matrix::from_fn(q.rows(), k.rows(), |t, s| dot(&q.row(t)[r.clone()], &k.row(s)[r.clone()]) * scale))
    }

    pub fn forward(&self, x: &Matrix<T>, positions: &[i64], band: usize, freqs: &[T]) -> (Matrix<T>, AttentionCache<T>) {
        let n = x.rows();
        let dh = self.head_dim();
        let scale = T::one() / T::from_usize_lossy(dh).sqrt();
        let pos_t: Vec<T> = positions.iter().map(|&p| T::lit(p as f64)).collect();
        let mut q = self.wq.forward(x);
        let mut k = self.wk.forward(x);
        let v = self.wv.forward(x);
        self.rotate_rows(&mut q, &pos_t, freqs);
        self.rotate_rows(&mut k, &pos_t, freqs);

        let mut o = Matrix::zeros(n, self.wq.output_dim());
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let r = h * dh..(h + 1) * dh;
            let mut head_rows = Vec::with_capacity(n);
            for t in 0..n {
                let qt = &q.row(t)[r.clone()];
                let mut row: WeightRow<T> = (0..n)
                    .filter(|&s| in_band(positions[t], positions[s], band))
                    .map(|s| (s, dot(qt, &k.row(s)[r.clone()]) * scale))
                    .collect();
                let max = row.iter().map(|&(_, l)| l).fold(T::neg_infinity(), T::max);
                let mut total = T::zero();
                for (_, l) in row.iter_mut() {
                    *l = (*l - max).exp();
                    total += *l;
                }
                let out = &mut o.row_mut(t)[r.clone()];
                for (s, w) in row.iter_mut() {
                    *w /= total;
                    for (o_j, &v_j) in out.iter_mut().zip(&v.row(*s)[r.clone()]) {
                        *o_j += *w * v_j;
                    }
                }
                head_rows.push(row);
            }
            weights.push(head_rows);
        }
        let y = self.wo.forward(&o);
        (y, AttentionCache { x: x.clone(), q, k, v, o, weights, positions: pos_t })
    }

    pub fn backward(&self, cache: &AttentionCache<T>, dy: &Matrix<T>, freqs: &[T], grad: &mut Self) -> Matrix<T> {
        let n = dy.rows();
        let dh = self.head_dim();
        let scale = T::one() / T::from_usize_lossy(dh).sqrt();
        let d_o = self.wo.backward(&cache.o, dy, &mut grad.wo);
        let dim = self.wq.output_dim();
        let mut dq = Matrix::zeros(n, dim);
        let mut dk = Matrix::zeros(n, dim);
        let mut dv = Matrix::zeros(n, dim);
        for h in 0..self.heads {
            let r = h * dh..(h + 1) * dh;
            for t in 0..n {
                let row = &cache.weights[h][t];
                let dot_t = &d_o.row(t)[r.clone()];
                let dw: Vec<T> = row.iter().map(|&(s, _)| dot(dot_t, &cache.v.row(s)[r.clone()])).collect();
                let mean: T = row.iter().zip(&dw).map(|(&(_, w), &d)| w * d).sum();
                for (&(s, w), &d) in row.iter().zip(&dw) {
                    for (dv_j, &g) in dv.row_mut(s)[r.clone()].iter_mut().zip(dot_t) {
                        *dv_j += w * g;
                    }
                    let dl = w * (d - mean) * scale;
                    if dl == T::zero() {
                        continue;
                    }
                    for j in r.clone() {
                        let dq_tj = dl * cache.k.get(s, j);
                        let dk_sj = dl * cache.q.get(t, j);
                        dq.data_mut()[t * dim + j] += dq_tj;
                        dk.data_mut()[s * dim + j] += dk_sj;
                    }
                }
            }
        }
        // Undo the rotary rotation (its transpose is the rotation by −p).
        let neg: Vec<T> = cache.positions.iter().map(|&p| -p).collect();
        self.rotate_rows(&mut dq, &neg, freqs);
        self.rotate_rows(&mut dk, &neg, freqs);
        let mut dx = self.wq.backward(&cache.x, &dq, &mut grad.wq);
        dx.add_assign(&self.wk.backward(&cache.x, &dk, &mut grad.wk));
        dx.add_assign(&self.wv.backward(&cache.x, &dv, &mut grad.wv));
        dx
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), SeqError> {
    if expected == got {
        Ok(())
    } else {
        Err(SeqError::ShapeMismatch { what, expected, got })
    }
}

impl<T: Real> ParamSet<T> for Attention<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix<T>)>) {
        self.wq.visit(&join(prefix, "wq"), out);
        self.wk.visit(&join(prefix, "wk"), out);
        self.wv.visit(&join(prefix, "wv"), out);
        self.wo.visit(&join(prefix, "wo"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix<T>)>) {
        self.wq.visit_mut(&join(prefix, "wq"), out);
        self.wk.visit_mut(&join(prefix, "wk"), out);
        self.wv.visit_mut(&join(prefix, "wv"), out);
        self.wo.visit_mut(&join(prefix, "wo"), out);
    }
}
