//! Stacked unidirectional LSTM over encoder outputs.
//!
//! Gates read the concatenation `z_t = [h_{t−1}, x_t]` as a row vector, so
//! each gate matrix is `(hidden + input) × hidden`:
//!
//! ```text
//! f = σ(z·W_f + b_f)   i = σ(z·W_i + b_i)   o = σ(z·W_o + b_o)
//! C̃ = tanh(z·W_c + b_c)
//! C_t = f ∗ C_{t−1} + i ∗ C̃      h_t = o ∗ tanh(C_t)
//! ```

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Which time step supplies the sentence representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    /// Last step of the full padded length.
    #[default]
    LastStep,
    /// Last unmasked step.
    LastUnmasked,
}

impl Readout {
    pub fn as_str(self) -> &'static str {
        match self {
            Readout::LastStep => "last_step",
            Readout::LastUnmasked => "last_unmasked",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "last_step" => Ok(Readout::LastStep),
            "last_unmasked" => Ok(Readout::LastUnmasked),
            other => Err(Error::config(format!("unknown readout {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub interlayer_dropout_p: f64,
    pub readout: Readout,
}

impl LstmConfig {
    pub fn new(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            n_layers: 2,
            interlayer_dropout_p: 0.3,
            readout: Readout::LastStep,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.n_layers == 0 {
            return Err(Error::config("LSTM dims and layer count must be positive"));
        }
        if !(0.0..1.0).contains(&self.interlayer_dropout_p) {
            return Err(Error::config("LSTM dropout outside [0, 1)"));
        }
        Ok(())
    }

    /// Width of `[h_{t−1}, x_t]` for a layer.
    pub fn concat_width(&self, layer: usize) -> usize {
        self.hidden_dim + if layer == 0 { self.input_dim } else { self.hidden_dim }
    }

    pub fn param_count(&self) -> usize {
        (0..self.n_layers)
            .map(|l| 4 * (self.concat_width(l) * self.hidden_dim + self.hidden_dim))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct LstmLayer {
    pub w_f: ParamId,
    pub w_i: ParamId,
    pub w_c: ParamId,
    pub w_o: ParamId,
    pub b_f: ParamId,
    pub b_i: ParamId,
    pub b_c: ParamId,
    pub b_o: ParamId,
}

#[derive(Debug, Clone)]
pub struct Lstm {
    pub config: LstmConfig,
    pub layers: Vec<LstmLayer>,
}

/// Everything one cell application computes.
#[derive(Debug, Clone, Copy)]
pub struct CellOutput {
    pub h: Var,
    pub c: Var,
    pub forget: Var,
    pub input: Var,
    pub output: Var,
    pub candidate: Var,
}

impl Lstm {
    /// Weights uniform in ±1/√hidden, forget-gate bias 1, other biases 0.
    pub fn init(config: LstmConfig, store: &mut ParamStore, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let bound = 1.0 / (h as f64).sqrt();
        let mut uniform = |rows: usize| {
            let data = (0..rows * h).map(|_| rng.random_range(-bound..bound)).collect();
            Tensor::new(vec![rows, h], data).expect("shape matches")
        };
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let w = config.concat_width(l);
            let p = |s: &str| format!("lstm.layer{l}.{s}");
            layers.push(LstmLayer {
                w_f: store.register(p("w_f"), uniform(w), true)?,
                w_i: store.register(p("w_i"), uniform(w), true)?,
                w_c: store.register(p("w_c"), uniform(w), true)?,
                w_o: store.register(p("w_o"), uniform(w), true)?,
                b_f: store.register(p("b_f"), Tensor::full(&[h], 1.0), false)?,
                b_i: store.register(p("b_i"), Tensor::zeros(&[h]), false)?,
                b_c: store.register(p("b_c"), Tensor::zeros(&[h]), false)?,
                b_o: store.register(p("b_o"), Tensor::zeros(&[h]), false)?,
            });
        }
        Ok(Self { config, layers })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers
            .iter()
            .flat_map(|l| [l.w_f, l.w_i, l.w_c, l.w_o, l.b_f, l.b_i, l.b_c, l.b_o])
            .collect()
    }

    /// One cell step. `x_t`, `h_prev`, `c_prev` are `1 × width` rows.
    pub fn cell<'p>(
        &self,
        g: &mut Graph<'p>,
        store: &'p ParamStore,
        layer: usize,
        x_t: Var,
        h_prev: Var,
        c_prev: Var,
    ) -> Result<CellOutput> {
        let lw = &self.layers[layer];
        let z = g.concat_lastdim(&[h_prev, x_t])?;
        let gate = |g: &mut Graph<'p>, w: ParamId, b: ParamId| -> Result<Var> {
            let (w, b) = (g.param(store, w), g.param(store, b));
            let pre = g.matmul(z, w)?;
            g.add_row(pre, b)
        };
        let f_pre = gate(g, lw.w_f, lw.b_f)?;
        let i_pre = gate(g, lw.w_i, lw.b_i)?;
        let c_pre = gate(g, lw.w_c, lw.b_c)?;
        let o_pre = gate(g, lw.w_o, lw.b_o)?;
        let forget = g.sigmoid(f_pre);
        let input = g.sigmoid(i_pre);
        let candidate = g.tanh(c_pre);
        let output = g.sigmoid(o_pre);
        let kept = g.mul(forget, c_prev)?;
        let written = g.mul(input, candidate)?;
        let c = g.add(kept, written)?;
        let squashed = g.tanh(c);
        let h = g.mul(output, squashed)?;
        Ok(CellOutput {
            h,
            c,
            forget,
            input,
            output,
            candidate,
        })
    }

    /// Runs every layer over the `L × input_dim` sequence and returns the top
    /// layer's hidden state (`1 × hidden`) at the step chosen by the readout.
    /// Dropout is applied to hidden states passed between layers only.
    pub fn run_stacked<'p>(&self, g: &mut Graph<'p>, store: &'p ParamStore, seq: Var, keep: &[bool]) -> Result<Var> {
        let shape = g.shape(seq).to_vec();
        if shape.len() != 2 || shape[1] != self.config.input_dim {
            return Err(Error::shape("run_stacked", &shape, &[0, self.config.input_dim]));
        }
        let len = shape[0];
        if len == 0 {
            return Err(Error::config("empty sequence"));
        }
        if keep.len() != len {
            return Err(Error::shape("run_stacked mask", &shape, &[keep.len()]));
        }
        let last = match self.config.readout {
            Readout::LastStep => len - 1,
            Readout::LastUnmasked => keep.iter().rposition(|&k| k).unwrap_or(0),
        };
        let steps = last + 1;
        let mut inputs: Vec<Var> = (0..steps).map(|t| g.slice_rows(seq, t, 1)).collect::<Result<_>>()?;
        let h = self.config.hidden_dim;
        let mut top = None;
        for l in 0..self.layers.len() {
            let mut h_prev = g.constant(Tensor::zeros(&[1, h]));
            let mut c_prev = g.constant(Tensor::zeros(&[1, h]));
            let mut outputs = Vec::with_capacity(steps);
            for &x_t in &inputs {
                let out = self.cell(g, store, l, x_t, h_prev, c_prev)?;
                h_prev = out.h;
                c_prev = out.c;
                outputs.push(out.h);
            }
            top = Some(h_prev);
            if l + 1 < self.layers.len() {
                inputs = outputs
                    .into_iter()
                    .map(|o| g.dropout(o, self.config.interlayer_dropout_p))
                    .collect::<Result<_>>()?;
            }
        }
        Ok(top.expect("at least one layer"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn setup(input: usize, hidden: usize) -> (Lstm, ParamStore) {
        let mut store = ParamStore::new();
        let lstm = Lstm::init(
            LstmConfig::new(input, hidden),
            &mut store,
            &mut SeedStream::new(1).rng(),
        )
        .unwrap();
        (lstm, store)
    }

    fn zero_all(store: &mut ParamStore) {
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn param_count_and_widths() {
        let (lstm, store) = setup(32, 16);
        assert_eq!(store.num_scalars(), lstm.config.param_count());
        assert_eq!(store.value(lstm.layers[0].w_f).shape(), &[48, 16]);
        assert_eq!(store.value(lstm.layers[1].w_f).shape(), &[32, 16]);
        assert_eq!(store.value(lstm.layers[0].b_f).data(), &[1.0; 16]);
    }

    #[test]
    fn zero_weights_zero_state() {
        let (lstm, mut store) = setup(3, 4);
        zero_all(&mut store);
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![1, 3], vec![0.3, -1.0, 2.0]).unwrap());
        let z = g.constant(Tensor::zeros(&[1, 4]));
        let out = lstm.cell(&mut g, &store, 0, x, z, z).unwrap();
        assert!(g.value(out.forget).iter().all(|&v| v == 0.5));
        assert!(g.value(out.candidate).iter().all(|&v| v == 0.0));
        assert!(g.value(out.c).iter().all(|&v| v == 0.0));
        assert!(g.value(out.h).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let (lstm, mut store) = setup(3, 4);
        zero_all(&mut store);
        store
            .value_mut(lstm.layers[0].b_f)
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 50.0);
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![1, 3], vec![0.3, -1.0, 2.0]).unwrap());
        let h0 = g.constant(Tensor::zeros(&[1, 4]));
        let c0 = g.constant(Tensor::new(vec![1, 4], vec![0.7, -0.2, 1.5, 0.0]).unwrap());
        let out = lstm.cell(&mut g, &store, 0, x, h0, c0).unwrap();
        for (a, b) in g.value(out.c).iter().zip([0.7, -0.2, 1.5, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn length_one_is_two_stacked_cells() {
        let (lstm, store) = setup(3, 4);
        let x = Tensor::new(vec![1, 3], vec![0.5, -0.4, 0.1]).unwrap();
        let mut g = Graph::new();
        let xs = g.constant(x.clone());
        let h_final = lstm.run_stacked(&mut g, &store, xs, &[true]).unwrap();

        let mut g2 = Graph::new();
        let x1 = g2.constant(x);
        let z = g2.constant(Tensor::zeros(&[1, 4]));
        let first = lstm.cell(&mut g2, &store, 0, x1, z, z).unwrap();
        let second = lstm.cell(&mut g2, &store, 1, first.h, z, z).unwrap();
        assert_eq!(g.value(h_final), g2.value(second.h));
    }

    #[test]
    fn zero_dropout_train_equals_eval() {
        let mut store = ParamStore::new();
        let mut cfg = LstmConfig::new(3, 4);
        cfg.interlayer_dropout_p = 0.0;
        let lstm = Lstm::init(cfg, &mut store, &mut SeedStream::new(1).rng()).unwrap();
        let x = Tensor::new(vec![2, 3], vec![0.5, -0.4, 0.1, 0.2, 0.2, 0.9]).unwrap();
        let mut ge = Graph::new();
        let xe = ge.constant(x.clone());
        let he = lstm.run_stacked(&mut ge, &store, xe, &[true, true]).unwrap();
        let mut gt = Graph::training(SeedStream::new(4).rng());
        let xt = gt.constant(x);
        let ht = lstm.run_stacked(&mut gt, &store, xt, &[true, true]).unwrap();
        assert_eq!(ge.value(he), gt.value(ht));
    }

    #[test]
    fn readout_modes_differ_on_padded_input() {
        let mut store = ParamStore::new();
        let mut cfg = LstmConfig::new(3, 4);
        cfg.readout = Readout::LastUnmasked;
        let lstm = Lstm::init(cfg, &mut store, &mut SeedStream::new(1).rng()).unwrap();
        let x = Tensor::new(vec![3, 3], vec![0.5, -0.4, 0.1, 0.2, 0.2, 0.9, 1.0, 1.0, 1.0]).unwrap();
        let keep = [true, true, false];
        let mut g = Graph::new();
        let xs = g.constant(x.clone());
        let masked = lstm.run_stacked(&mut g, &store, xs, &keep).unwrap();
        let masked = g.tensor(masked);

        let prefix = Tensor::new(vec![2, 3], x.data()[..6].to_vec()).unwrap();
        let mut g2 = Graph::new();
        let xp = g2.constant(prefix);
        let expect = lstm.run_stacked(&mut g2, &store, xp, &[true, true]).unwrap();
        let expect = g2.tensor(expect);
        assert_eq!(masked, expect);
    }

    #[test]
    fn zero_weights_and_input_give_zero_state() {
        let (lstm, mut store) = setup(3, 4);
        zero_all(&mut store);
        let mut g = Graph::new();
        let xs = g.constant(Tensor::zeros(&[5, 3]));
        let h = lstm.run_stacked(&mut g, &store, xs, &[true; 5]).unwrap();
        assert!(g.value(h).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_input_width() {
        let (lstm, store) = setup(3, 4);
        let mut g = Graph::new();
        let xs = g.constant(Tensor::zeros(&[2, 5]));
        assert!(lstm.run_stacked(&mut g, &store, xs, &[true; 2]).is_err());
    }
}
