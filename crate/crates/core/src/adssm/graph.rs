// Network pieces recorded on a tape. Every function works on a batch:
// latents are [batch, latent], segments [batch, seg_len].

use alloc::vec;
use alloc::vec::Vec;

use super::params::{Param, ParamVars};
use super::PosteriorWindow;
use crate::numcore::{
    tape_gaussian_loglik_unit, tape_kl_diag, tape_reparam, Tape, Tensor, TensorError, Var, VAR_FLOOR,
};

type R<T> = Result<T, TensorError>;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Cell {
    Backward,
    Forward,
}

/// Projections `W_s_x W_x x_i`, shared by every attention query over the sequence.
pub(crate) fn attention_keys(t: &mut Tape, p: &ParamVars, xs: &[Var]) -> R<Vec<Var>> {
    xs.iter()
        .map(|&x| {
            let wx = t.linear(x, p[Param::Wx], None)?;
            t.linear(wx, p[Param::WsX], None)
        })
        .collect()
}

/// Context `sum_i alpha_i x_i` with `alpha = softmax_i(v_s^T tanh(W_s [z; W_x x_i] + b_s))`.
pub(crate) fn attention(t: &mut Tape, p: &ParamVars, z_prev: Var, xs: &[Var], keys: &[Var]) -> R<(Var, Var)> {
    let q = t.linear(z_prev, p[Param::WsZ], Some(p[Param::Bs]))?;
    let mut scores = Vec::with_capacity(keys.len());
    for &k in keys {
        let a = t.add(q, k)?;
        let a = t.tanh(a);
        scores.push(t.linear(a, p[Param::Vs], None)?);
    }
    let s = t.concat_cols(&scores)?;
    let alpha = t.softmax(s, 1)?;
    let mut c: Option<Var> = None;
    for (i, &x) in xs.iter().enumerate() {
        let w = t.column(alpha, i)?;
        let term = t.mul_col(x, w)?;
        c = Some(match c {
            None => term,
            Some(acc) => t.add(acc, term)?,
        });
    }
    Ok((c.ok_or(TensorError::Empty { op: "attention" })?, alpha))
}

fn mlp3(t: &mut Tape, p: &ParamVars, x: Var, layers: [(Param, Param); 3]) -> R<Var> {
    let [(w1, b1), (w2, b2), (w3, b3)] = layers;
    let h = t.linear(x, p[w1], Some(p[b1]))?;
    let h = t.relu(h);
    let h = t.linear(h, p[w2], Some(p[b2]))?;
    let h = t.relu(h);
    t.linear(h, p[w3], Some(p[b3]))
}

/// Gated transition: mean and variance of `p(z_{t+1} | z_t, c_{t+1})`.
pub(crate) fn transition(t: &mut Tape, p: &ParamVars, z: Var, c: Var) -> R<(Var, Var)> {
    use Param::*;
    let zc = t.concat_cols(&[z, c])?;
    let g = mlp3(t, p, zc, [(Wg1, Bg1), (Wg2, Bg2), (Wg3, Bg3)])?;
    let g = t.sigmoid(g);
    let d = mlp3(t, p, zc, [(Wd1, Bd1), (Wd2, Bd2), (Wd3, Bd3)])?;
    let lin = t.linear(zc, p[WMuZ], Some(p[BMuZ]))?;
    let keep = t.affine(g, -1.0, 1.0);
    let a = t.mul(keep, lin)?;
    let b = t.mul(g, d)?;
    let mean = t.add(a, b)?;
    let rd = t.relu(d);
    let v = t.linear(rd, p[WVarZ], Some(p[BVarZ]))?;
    let v = t.softplus(v);
    Ok((mean, t.affine(v, 1.0, VAR_FLOOR)))
}

/// Emission mean; the emission variance is fixed at one.
pub(crate) fn emission(t: &mut Tape, p: &ParamVars, z: Var) -> R<Var> {
    use Param::*;
    mlp3(t, p, z, [(We1, Be1), (We2, Be2), (We3, Be3)])
}

pub(crate) fn gru(t: &mut Tape, p: &ParamVars, cell: Cell, x: Var, h: Var) -> R<Var> {
    use Param::*;
    let [wz, uz, bz, wr, ur, br, wn, un, bn] = match cell {
        Cell::Backward => [BwdWz, BwdUz, BwdBz, BwdWr, BwdUr, BwdBr, BwdWn, BwdUn, BwdBn],
        Cell::Forward => [FwdWz, FwdUz, FwdBz, FwdWr, FwdUr, FwdBr, FwdWn, FwdUn, FwdBn],
    };
    let a = t.linear(x, p[wz], Some(p[bz]))?;
    let b = t.linear(h, p[uz], None)?;
    let s = t.add(a, b)?;
    let update = t.sigmoid(s);
    let a = t.linear(x, p[wr], Some(p[br]))?;
    let b = t.linear(h, p[ur], None)?;
    let s = t.add(a, b)?;
    let reset = t.sigmoid(s);
    let a = t.linear(x, p[wn], Some(p[bn]))?;
    let b = t.linear(h, p[un], None)?;
    let b = t.mul(reset, b)?;
    let s = t.add(a, b)?;
    let cand = t.tanh(s);
    let keep = t.affine(update, -1.0, 1.0);
    let a = t.mul(keep, cand)?;
    let b = t.mul(update, h)?;
    t.add(a, b)
}

/// Combiner `(tanh(W_h z + b_h) + h + g) / 3` followed by the mean and variance heads.
pub(crate) fn posterior(t: &mut Tape, p: &ParamVars, z: Var, h_bwd: Var, g_fwd: Var) -> R<(Var, Var)> {
    use Param::*;
    let a = t.linear(z, p[Wh], Some(p[Bh]))?;
    let a = t.tanh(a);
    let s = t.add(a, h_bwd)?;
    let s = t.add(s, g_fwd)?;
    let ht = t.affine(s, 1.0 / 3.0, 0.0);
    let mean = t.linear(ht, p[WMu], Some(p[BMu]))?;
    let v = t.linear(ht, p[WVar], Some(p[BVar]))?;
    let v = t.softplus(v);
    Ok((mean, t.affine(v, 1.0, VAR_FLOOR)))
}

/// First segment index the posterior for step `s` (0-based) may look at.
pub(crate) fn window_start(window: PosteriorWindow, s: usize) -> usize {
    match window {
        PosteriorWindow::Future => s,
        PosteriorWindow::Inclusive => s.saturating_sub(1),
    }
}

/// Recurrent summaries of `y[start..T]` for every start: one backward sweep
/// and one forward pass per start.
pub(crate) fn encode(t: &mut Tape, p: &ParamVars, ys: &[Var], batch: usize, hidden: usize) -> R<(Vec<Var>, Vec<Var>)> {
    let n = ys.len();
    let u: Vec<Var> = ys.iter().map(|&y| t.linear(y, p[Param::Wy], None)).collect::<R<_>>()?;
    let zero = t.constant(Tensor::zeros(&[batch, hidden]));
    let mut bwd = vec![zero; n];
    let mut h = zero;
    for s in (0..n).rev() {
        h = gru(t, p, Cell::Backward, u[s], h)?;
        bwd[s] = h;
    }
    let mut fwd = Vec::with_capacity(n);
    for s in 0..n {
        let mut g = zero;
        for &us in &u[s..] {
            g = gru(t, p, Cell::Forward, us, g)?;
        }
        fwd.push(g);
    }
    Ok((bwd, fwd))
}

pub(crate) struct ElboNodes {
    pub total: Var,
    /// Per step, summed over the batch.
    pub recon: Vec<Var>,
    pub kl: Vec<Var>,
    pub z: Vec<Var>,
    pub q: Vec<(Var, Var)>,
    pub prior: Vec<(Var, Var)>,
    pub alpha: Vec<Var>,
}

pub(crate) struct ElboInputs {
    pub xs: Vec<Tensor>,
    pub ys: Vec<Tensor>,
    pub eps: Vec<Tensor>,
}

/// Single-sample estimate `sum_t log N(y_t | mu_y(z_t), I) - beta sum_t KL(q_t || p_t)`
/// summed over the batch.
pub(crate) fn elbo(
    t: &mut Tape,
    p: &ParamVars,
    inputs: ElboInputs,
    beta: f64,
    window: PosteriorWindow,
    hidden: usize,
    latent: usize,
) -> R<ElboNodes> {
    let n = inputs.xs.len();
    if n == 0 {
        return Err(TensorError::Empty { op: "elbo" });
    }
    let batch = inputs.xs[0].rows();
    let xs: Vec<Var> = inputs.xs.into_iter().map(|x| t.constant(x)).collect();
    let ys: Vec<Var> = inputs.ys.into_iter().map(|y| t.constant(y)).collect();
    let eps: Vec<Var> = inputs.eps.into_iter().map(|e| t.constant(e)).collect();
    let keys = attention_keys(t, p, &xs)?;
    let (bwd, fwd) = encode(t, p, &ys, batch, hidden)?;

    let mut z_prev = t.constant(Tensor::zeros(&[batch, latent]));
    let mut out = ElboNodes {
        total: z_prev,
        recon: Vec::with_capacity(n),
        kl: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        prior: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
    };
    for s in 0..n {
        let w = window_start(window, s);
        let (qm, qv) = posterior(t, p, z_prev, bwd[w], fwd[w])?;
        let (c, alpha) = attention(t, p, z_prev, &xs, &keys)?;
        let (pm, pv) = transition(t, p, z_prev, c)?;
        let z = tape_reparam(t, qm, qv, eps[s])?;
        let ym = emission(t, p, z)?;
        out.recon.push(tape_gaussian_loglik_unit(t, ys[s], ym)?);
        out.kl.push(tape_kl_diag(t, qm, qv, pm, pv)?);
        out.z.push(z);
        out.q.push((qm, qv));
        out.prior.push((pm, pv));
        out.alpha.push(alpha);
        z_prev = z;
    }
    let recon = sum_scalars(t, &out.recon)?;
    let kl = sum_scalars(t, &out.kl)?;
    let penalty = t.affine(kl, -beta, 0.0);
    out.total = t.add(recon, penalty)?;
    Ok(out)
}

fn sum_scalars(t: &mut Tape, vs: &[Var]) -> R<Var> {
    let mut acc = vs[0];
    for &v in &vs[1..] {
        acc = t.add(acc, v)?;
    }
    Ok(acc)
}
