use crate::error::Result;
use crate::numeric::{ParamId, Real, Tape, Var};

/// One layer's weights, gates fused in the column order `[ĉ, f, i, o]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
}

/// LSTM update given the input's pre-activation contribution `x·W_x`.
pub fn lstm_gates<F: Real>(
    tape: &mut Tape<'_, F>,
    x_contrib: Var,
    h_prev: Var,
    c_prev: Var,
    w_h: ParamId,
    b: ParamId,
) -> Result<(Var, Var)> {
    let w_h = tape.param(w_h);
    let b = tape.param(b);
    let rec = tape.matmul(h_prev, w_h)?;
    let pre = tape.add(x_contrib, rec)?;
    let pre = tape.add_row(pre, b)?;
    let h = tape.value(h_prev).cols();
    let cand = tape.slice_cols(pre, 0, h)?;
    let cand = tape.tanh(cand);
    let rest = tape.slice_cols(pre, h, 4 * h)?;
    let rest = tape.sigmoid(rest);
    let f = tape.slice_cols(rest, 0, h)?;
    let i = tape.slice_cols(rest, h, 2 * h)?;
    let o = tape.slice_cols(rest, 2 * h, 3 * h)?;
    let kept = tape.mul(f, c_prev)?;
    let fresh = tape.mul(i, cand)?;
    let c = tape.add(kept, fresh)?;
    let squashed = tape.tanh(c);
    let h = tape.mul(o, squashed)?;
    Ok((h, c))
}

/// `ĉ = tanh(x W_x^c + H W_h^c + b_c)`, `f, i, o = σ(·)`,
/// `C = f ⊙ C_prev + i ⊙ ĉ`, `H = o ⊙ tanh(C)`.
pub fn lstm_cell<F: Real>(
    tape: &mut Tape<'_, F>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmParams,
) -> Result<(Var, Var)> {
    let w_x = tape.param(p.w_x);
    let contrib = tape.matmul(x, w_x)?;
    lstm_gates(tape, contrib, h_prev, c_prev, p.w_h, p.b)
}
