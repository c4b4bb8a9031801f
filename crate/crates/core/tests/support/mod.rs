//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use latentsig_core::numcore::{
    kl_diag_gaussian, normal_vec, stream, tape_gaussian_loglik_unit, tape_kl_diag, tape_reparam, DiagGaussian,
    Purpose, Tape, Tensor, Var,
};
use rand_chacha::rand_core::RngCore;

pub type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;

pub struct Case {
    pub name: String,
    pub inputs: Vec<Tensor>,
    pub build: Build,
}

fn uniform(rng: &mut latentsig_core::numcore::StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn random_tensor(shape: &[usize], seed: u64, index: u64, lo: f64, hi: f64) -> Tensor {
    let mut rng = stream(seed, Purpose::Validation, index);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| uniform(&mut rng, lo, hi)).collect()).unwrap()
}

/// Fixed weights that turn any output into a scalar with a non-trivial gradient.
fn project(t: &mut Tape, out: Var) -> Var {
    let shape = t.value(out).shape().to_vec();
    let w = t.constant(random_tensor(&shape, 77, 5, -1.0, 1.0));
    let prod = t.mul(out, w).unwrap();
    t.sum_all(prod)
}

fn eval(case: &Case, inputs: &[Tensor]) -> (f64, Vec<Tensor>) {
    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| t.leaf(x.clone())).collect();
    let out = (case.build)(&mut t, &vars);
    let f = project(&mut t, out);
    let value = t.value(f).item().unwrap();
    let g = t.backward(f).unwrap();
    (value, vars.iter().map(|v| g.wrt(*v).clone()).collect())
}

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)` over every input scalar.
pub fn max_rel_error(case: &Case, h: f64, floor: f64) -> f64 {
    let (_, grads) = eval(case, &case.inputs);
    let mut worst: f64 = 0.0;
    for (i, x) in case.inputs.iter().enumerate() {
        for k in 0..x.len() {
            let shifted = |d: f64| {
                let mut inp = case.inputs.clone();
                inp[i].data_mut()[k] += d;
                eval(case, &inp).0
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            let analytic = grads[i].data()[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}

fn case(name: &str, inputs: Vec<Tensor>, build: impl Fn(&mut Tape, &[Var]) -> Var + 'static) -> Case {
    Case {
        name: name.into(),
        inputs,
        build: Box::new(build),
    }
}

/// One case per differentiable tape operation, on inputs away from kinks and poles.
pub fn primitive_cases() -> Vec<Case> {
    let m = |i: u64| random_tensor(&[3, 4], 1, i, -1.5, 1.5);
    let pos = |i: u64| random_tensor(&[3, 4], 1, i, 0.3, 2.0);
    vec![
        case("matmul", vec![m(0), random_tensor(&[4, 2], 1, 1, -1.0, 1.0)], |t, v| t.matmul(v[0], v[1]).unwrap()),
        case(
            "linear",
            vec![m(2), random_tensor(&[5, 4], 1, 3, -1.0, 1.0), random_tensor(&[5], 1, 4, -1.0, 1.0)],
            |t, v| t.linear(v[0], v[1], Some(v[2])).unwrap(),
        ),
        case("linear_no_bias", vec![m(5), random_tensor(&[2, 4], 1, 6, -1.0, 1.0)], |t, v| {
            t.linear(v[0], v[1], None).unwrap()
        }),
        case("add", vec![m(7), m(8)], |t, v| t.add(v[0], v[1]).unwrap()),
        case("sub", vec![m(9), m(10)], |t, v| t.sub(v[0], v[1]).unwrap()),
        case("mul", vec![m(11), m(12)], |t, v| t.mul(v[0], v[1]).unwrap()),
        case("div", vec![m(13), pos(14)], |t, v| t.div(v[0], v[1]).unwrap()),
        case("add_row", vec![m(15), random_tensor(&[4], 1, 16, -1.0, 1.0)], |t, v| {
            t.add_row(v[0], v[1]).unwrap()
        }),
        case("mul_col", vec![m(17), random_tensor(&[3, 1], 1, 18, -1.0, 1.0)], |t, v| {
            t.mul_col(v[0], v[1]).unwrap()
        }),
        case("column", vec![m(19)], |t, v| t.column(v[0], 2).unwrap()),
        case("concat_cols", vec![m(20), random_tensor(&[3, 2], 1, 21, -1.0, 1.0)], |t, v| {
            t.concat_cols(&[v[0], v[1]]).unwrap()
        }),
        case("tanh", vec![m(22)], |t, v| t.tanh(v[0])),
        case("sigmoid", vec![m(23)], |t, v| t.sigmoid(v[0])),
        case("relu", vec![m(24)], |t, v| t.relu(v[0])),
        case("softplus", vec![m(25)], |t, v| t.softplus(v[0])),
        case("exp", vec![m(26)], |t, v| t.exp(v[0])),
        case("ln", vec![pos(27)], |t, v| t.ln(v[0])),
        case("sqrt", vec![pos(28)], |t, v| t.sqrt(v[0])),
        case("square", vec![m(29)], |t, v| t.square(v[0])),
        case("affine", vec![m(30)], |t, v| t.affine(v[0], -1.7, 0.4)),
        case("softmax_rows", vec![m(31)], |t, v| t.softmax(v[0], 1).unwrap()),
        case("softmax_cols", vec![m(32)], |t, v| t.softmax(v[0], 0).unwrap()),
        case("sum_all", vec![m(33)], |t, v| t.sum_all(v[0])),
        case("reparam", vec![m(34), pos(35), m(36)], |t, v| tape_reparam(t, v[0], v[1], v[2]).unwrap()),
        case("kl_diag", vec![m(37), pos(38), m(39), pos(40)], |t, v| {
            tape_kl_diag(t, v[0], v[1], v[2], v[3]).unwrap()
        }),
        case("gaussian_loglik_unit", vec![m(41), m(42)], |t, v| {
            tape_gaussian_loglik_unit(t, v[0], v[1]).unwrap()
        }),
    ]
}

/// A random chain of 3 to 8 operations over two `[3, 4]` leaves, a `[4, 4]`
/// weight, a row and a column. Domain-restricted ops get a strictly positive
/// argument.
pub fn composite_case(seed: u64) -> Case {
    let mut rng = stream(seed, Purpose::Sampling, 1000);
    let steps = 3 + (rng.next_u64() % 6) as usize;
    let ops: Vec<u64> = (0..steps).map(|_| rng.next_u64() % 14).collect();
    let inputs = vec![
        random_tensor(&[3, 4], seed, 0, -1.0, 1.0),
        random_tensor(&[3, 4], seed, 1, -1.0, 1.0),
        random_tensor(&[4, 4], seed, 2, -0.8, 0.8),
        random_tensor(&[4], seed, 3, -1.0, 1.0),
        random_tensor(&[3, 1], seed, 4, -1.0, 1.0),
    ];
    let name = format!("composite[{seed}] ops {ops:?}");
    case(&name, inputs, move |t, v| {
        let positive = |t: &mut Tape, x: Var| {
            let s = t.softplus(x);
            t.affine(s, 1.0, 0.5)
        };
        let mut x = v[0];
        for &op in &ops {
            x = match op {
                0 => t.tanh(x),
                1 => t.sigmoid(x),
                2 => t.add(x, v[1]).unwrap(),
                3 => t.mul(x, v[1]).unwrap(),
                4 => {
                    let d = positive(t, v[1]);
                    t.div(x, d).unwrap()
                }
                5 => t.matmul(x, v[2]).unwrap(),
                6 => t.add_row(x, v[3]).unwrap(),
                7 => t.mul_col(x, v[4]).unwrap(),
                8 => t.softmax(x, 1).unwrap(),
                9 => {
                    let p = positive(t, x);
                    t.ln(p)
                }
                10 => {
                    let p = positive(t, x);
                    t.sqrt(p)
                }
                11 => {
                    let s = t.affine(x, 0.5, 0.0);
                    t.exp(s)
                }
                12 => t.softplus(x),
                _ => {
                    let sq = t.square(x);
                    t.sub(sq, v[0]).unwrap()
                }
            };
        }
        x
    })
}

/// Random `dim`-dimensional pair with means in `[-1, 1]` and variances in `[0.5, 2]`.
pub fn random_gaussian_pair(seed: u64, dim: usize) -> (DiagGaussian, DiagGaussian) {
    let mut rng = stream(seed, Purpose::Sampling, 2000);
    let mut g = || {
        let mean = (0..dim).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let var = (0..dim).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
        DiagGaussian::new(mean, var).unwrap()
    };
    (g(), g())
}

/// Monte Carlo `E_q[log q - log p]`.
pub fn mc_kl(q: &DiagGaussian, p: &DiagGaussian, samples: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, Purpose::Sampling, 3000);
    let sd: Vec<f64> = q.var().iter().map(|v| v.sqrt()).collect();
    let mut total = 0.0;
    let mut z = vec![0.0; q.dim()];
    for _ in 0..samples {
        let eps = normal_vec(&mut rng, q.dim());
        for i in 0..q.dim() {
            z[i] = q.mean()[i] + sd[i] * eps[i];
        }
        total += q.log_density(&z) - p.log_density(&z);
    }
    total / samples as f64
}

pub fn kl_rel_error(seed: u64, dim: usize, samples: usize) -> f64 {
    let (q, p) = random_gaussian_pair(seed, dim);
    let exact = kl_diag_gaussian(&q, &p).unwrap();
    (mc_kl(&q, &p, samples, seed) - exact).abs() / exact
}
