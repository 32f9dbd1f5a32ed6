//! Independent oracles shared by the integration tests: central finite
//! differences for gradients and brute-force counting for metrics.

#![allow(dead_code)]

use hybrid_core::rng::SeedStream;
use hybrid_core::tensor::{Graph, ParamId, ParamStore, Tensor, Var};
use hybrid_core::Result;
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn random_tensor(shape: &[usize], seed: u64, scale: f64) -> Tensor {
    let mut rng = SeedStream::new(seed).rng();
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Builds a graph (training mode with a fixed dropout seed when `train_seed`
/// is given), runs `f`, and reduces the output to `Σ out ⊙ R` with a fixed
/// random `R` so every output coordinate receives a distinct upstream grad.
fn weighted_loss<'p, F>(g: &mut Graph<'p>, store: &'p ParamStore, inputs: &[Tensor], f: &F) -> Result<(Var, Vec<Var>)>
where
    F: Fn(&mut Graph<'p>, &'p ParamStore, &[Var]) -> Result<Var>,
{
    let leaves: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
    let out = f(g, store, &leaves)?;
    let shape = g.shape(out).to_vec();
    let r = g.constant(random_tensor(&shape, 0xFEED, 1.0));
    let prod = g.mul(out, r)?;
    Ok((g.sum(prod), leaves))
}

fn graph(train_seed: Option<u64>) -> Graph<'static> {
    match train_seed {
        Some(s) => Graph::training(SeedStream::new(s).rng()),
        None => Graph::new(),
    }
}

fn eval_loss<F>(store: &ParamStore, inputs: &[Tensor], train_seed: Option<u64>, f: &F) -> f64
where
    F: for<'p> Fn(&mut Graph<'p>, &'p ParamStore, &[Var]) -> Result<Var>,
{
    let mut g = graph(train_seed);
    let (loss, _) = weighted_loss(&mut g, store, inputs, f).unwrap();
    g.scalar(loss)
}

/// Which parameter coordinates to check: all of them, or up to `n` seeded picks per tensor.
#[derive(Clone, Copy)]
pub enum Coords {
    All,
    Sample(usize),
}

fn pick(len: usize, coords: Coords, seed: u64) -> Vec<usize> {
    match coords {
        Coords::All => (0..len).collect(),
        Coords::Sample(n) if n >= len => (0..len).collect(),
        Coords::Sample(n) => {
            let mut rng = SeedStream::new(seed).rng();
            (0..n).map(|_| rng.random_range(0..len)).collect()
        }
    }
}

#[derive(Debug, Default)]
pub struct GradReport {
    pub max_rel: f64,
    pub checked: usize,
    pub worst: String,
}

impl GradReport {
    fn record(&mut self, what: String, a: f64, n: f64) {
        let e = rel_err(a, n);
        self.checked += 1;
        if self.worst.is_empty() || e > self.max_rel {
            self.max_rel = e;
            self.worst = format!("{what}: analytic {a:e} numeric {n:e}");
        }
    }
}

/// Compares the tape's gradients for every input coordinate and the selected
/// trainable parameter coordinates against central differences.
pub fn gradcheck<F>(store: &ParamStore, inputs: &[Tensor], train_seed: Option<u64>, coords: Coords, f: F) -> GradReport
where
    F: for<'p> Fn(&mut Graph<'p>, &'p ParamStore, &[Var]) -> Result<Var>,
{
    let mut g = graph(train_seed);
    let (loss, leaves) = weighted_loss(&mut g, store, inputs, &f).unwrap();
    g.backward(loss).unwrap();
    let input_grads: Vec<Vec<f64>> = leaves.iter().map(|&v| g.grad(v).unwrap().to_vec()).collect();
    let param_grads: Vec<(ParamId, Vec<f64>)> = g.param_grads().map(|(id, gr)| (id, gr.to_vec())).collect();
    drop(g);

    let mut report = GradReport::default();
    for (i, t) in inputs.iter().enumerate() {
        for j in 0..t.numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            let n =
                (eval_loss(store, &plus, train_seed, &f) - eval_loss(store, &minus, train_seed, &f)) / (2.0 * FD_STEP);
            report.record(format!("input{i}[{j}]"), input_grads[i][j], n);
        }
    }
    let mut work = store.clone();
    for (id, grad) in &param_grads {
        for j in pick(grad.len(), coords, id.index() as u64) {
            let orig = work.value(*id).data()[j];
            work.value_mut(*id).data_mut()[j] = orig + FD_STEP;
            let lp = eval_loss(&work, inputs, train_seed, &f);
            work.value_mut(*id).data_mut()[j] = orig - FD_STEP;
            let lm = eval_loss(&work, inputs, train_seed, &f);
            work.value_mut(*id).data_mut()[j] = orig;
            report.record(
                format!("{}[{j}]", store.name(*id)),
                grad[j],
                (lp - lm) / (2.0 * FD_STEP),
            );
        }
    }
    report
}

// ---- metric oracles: direct counting, no shared code with the library ----

pub fn random_labels(n: usize, k: usize, rng: &mut impl rand::Rng, p: f64) -> Vec<Vec<bool>> {
    (0..n).map(|_| (0..k).map(|_| rng.random_bool(p)).collect()).collect()
}

pub fn oracle_hamming(t: &[Vec<bool>], p: &[Vec<bool>]) -> f64 {
    let mut wrong = 0;
    let mut cells = 0;
    for i in 0..t.len() {
        for j in 0..t[i].len() {
            cells += 1;
            if t[i][j] != p[i][j] {
                wrong += 1;
            }
        }
    }
    wrong as f64 / cells as f64
}

/// `(tp, fp, fn, tn)` over the given `(row, col)` cells.
pub fn oracle_counts(t: &[Vec<bool>], p: &[Vec<bool>], cols: &[usize]) -> (f64, f64, f64, f64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..t.len() {
        for &j in cols {
            match (t[i][j], p[i][j]) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                (false, false) => tn += 1.0,
            }
        }
    }
    (tp, fp, fn_, tn)
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// `(precision, recall, f1)` from counts.
pub fn oracle_prf(tp: f64, fp: f64, fn_: f64) -> (f64, f64, f64) {
    let p = safe_div(tp, tp + fp);
    let r = safe_div(tp, tp + fn_);
    (p, r, safe_div(2.0 * p * r, p + r))
}

pub fn oracle_micro(t: &[Vec<bool>], p: &[Vec<bool>]) -> (f64, f64, f64) {
    let cols: Vec<usize> = (0..t[0].len()).collect();
    let (tp, fp, fn_, _) = oracle_counts(t, p, &cols);
    oracle_prf(tp, fp, fn_)
}

pub fn oracle_macro(t: &[Vec<bool>], p: &[Vec<bool>]) -> (f64, f64, f64) {
    let k = t[0].len();
    let mut s = (0.0, 0.0, 0.0);
    for j in 0..k {
        let (tp, fp, fn_, _) = oracle_counts(t, p, &[j]);
        let (a, b, c) = oracle_prf(tp, fp, fn_);
        s = (s.0 + a, s.1 + b, s.2 + c);
    }
    (s.0 / k as f64, s.1 / k as f64, s.2 / k as f64)
}

pub fn oracle_mcc(t: &[Vec<bool>], p: &[Vec<bool>]) -> f64 {
    let cols: Vec<usize> = (0..t[0].len()).collect();
    let (tp, fp, fn_, tn) = oracle_counts(t, p, &cols);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    safe_div(tp * tn - fp * fn_, den)
}

pub fn oracle_kappa(t: &[Vec<bool>], p: &[Vec<bool>]) -> f64 {
    let cols: Vec<usize> = (0..t[0].len()).collect();
    let (tp, fp, fn_, tn) = oracle_counts(t, p, &cols);
    let n = tp + fp + fn_ + tn;
    let observed = (tp + tn) / n;
    let p_yes = ((tp + fp) / n) * ((tp + fn_) / n);
    let p_no = ((fn_ + tn) / n) * ((fp + tn) / n);
    let expected = p_yes + p_no;
    if expected == 1.0 {
        0.0
    } else {
        (observed - expected) / (1.0 - expected)
    }
}

/// Mann–Whitney: fraction of (positive, negative) pairs ranked correctly, ties count ½.
pub fn oracle_auc(truth: &[bool], scores: &[f64]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..truth.len() {
        for j in 0..truth.len() {
            if truth[i] && !truth[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

// ---- gradient-check cases shared by the unit-level and acceptance suites ----

pub type GraphFn = Box<dyn for<'p> Fn(&mut Graph<'p>, &'p ParamStore, &[Var]) -> Result<Var>>;

pub struct Case {
    pub name: &'static str,
    pub inputs: Vec<Tensor>,
    pub train_seed: Option<u64>,
    pub f: GraphFn,
}

fn case(name: &'static str, shapes: &[&[usize]], f: GraphFn) -> Case {
    let inputs = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| random_tensor(s, 100 + i as u64, 1.5))
        .collect();
    Case {
        name,
        inputs,
        train_seed: None,
        f,
    }
}

/// One case per differentiable graph primitive.
pub fn primitive_cases() -> Vec<Case> {
    let mut cases = vec![
        case("matmul", &[&[3, 4], &[4, 2]], Box::new(|g, _, v| g.matmul(v[0], v[1]))),
        case("transpose", &[&[3, 4]], Box::new(|g, _, v| g.transpose(v[0]))),
        case("add", &[&[2, 3], &[2, 3]], Box::new(|g, _, v| g.add(v[0], v[1]))),
        case("add_row", &[&[3, 4], &[4]], Box::new(|g, _, v| g.add_row(v[0], v[1]))),
        case("mul", &[&[2, 3], &[2, 3]], Box::new(|g, _, v| g.mul(v[0], v[1]))),
        case("scale", &[&[2, 3]], Box::new(|g, _, v| Ok(g.scale(v[0], -1.7)))),
        case("sigmoid", &[&[2, 4]], Box::new(|g, _, v| Ok(g.sigmoid(v[0])))),
        case("tanh", &[&[2, 4]], Box::new(|g, _, v| Ok(g.tanh(v[0])))),
        case("gelu", &[&[2, 4]], Box::new(|g, _, v| Ok(g.gelu(v[0])))),
        case("softmax", &[&[3, 5]], Box::new(|g, _, v| g.softmax_lastdim(v[0], None))),
        case(
            "softmax_masked",
            &[&[3, 5]],
            Box::new(|g, _, v| g.softmax_lastdim(v[0], Some(&[true, false, true, true, false]))),
        ),
        case(
            "layer_norm",
            &[&[3, 6], &[6], &[6]],
            Box::new(|g, _, v| g.layer_norm(v[0], v[1], v[2], 1e-5)),
        ),
        case(
            "concat_lastdim",
            &[&[2, 3], &[2, 2]],
            Box::new(|g, _, v| g.concat_lastdim(&[v[0], v[1]])),
        ),
        case("slice_cols", &[&[3, 5]], Box::new(|g, _, v| g.slice_cols(v[0], 1, 3))),
        case("slice_rows", &[&[4, 3]], Box::new(|g, _, v| g.slice_rows(v[0], 1, 2))),
        case(
            "stack_rows",
            &[&[1, 3], &[1, 3], &[1, 3]],
            Box::new(|g, _, v| g.stack_rows(&[v[0], v[2], v[1]])),
        ),
        case(
            "embedding_lookup",
            &[&[6, 3]],
            Box::new(|g, _, v| g.embedding_lookup(v[0], &[1, 4, 1, 0])),
        ),
        case("sum", &[&[2, 3]], Box::new(|g, _, v| Ok(g.sum(v[0])))),
        case(
            "bce_with_logits",
            &[&[2, 5]],
            Box::new(|g, _, v| {
                let y = Tensor::new(vec![2, 5], vec![1., 0., 0., 1., 1., 0., 1., 0., 0., 1.]).unwrap();
                g.bce_with_logits(v[0], &y)
            }),
        ),
    ];
    let mut dropout = case("dropout", &[&[3, 4]], Box::new(|g, _, v| g.dropout(v[0], 0.3)));
    dropout.train_seed = Some(7);
    cases.push(dropout);
    cases
}

/// Replaces every parameter with seeded values of the given scale, so
/// gradients are not dominated by the tiny initialization.
pub fn randomize_params(store: &mut ParamStore, scale: f64) {
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let shape = store.value(id).shape().to_vec();
        *store.value_mut(id) = random_tensor(&shape, 1000 + id.index() as u64, scale);
    }
}
