use super::params::Arch;
use crate::dropout::apply_mask;
use crate::error::Result;
use crate::numerics::{Real, Tape, Var};

/// One gate's weights as placed on a tape.
#[derive(Clone, Copy, Debug)]
pub struct GateVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
}

fn pre<F: Real>(tape: &mut Tape<F>, g: &GateVars, x: Var, h: Var) -> Result<Var> {
    let xw = tape.affine(x, g.w, g.b)?;
    let hu = tape.matmul(h, g.u)?;
    tape.add(xw, hu)
}

/// One recurrent step. `hidden_mask` multiplies `h_{t-1}` before it enters
/// the recurrent products. Returns the new `h` and, for the LSTM, the new `c`.
pub fn cell_step<F: Real>(
    tape: &mut Tape<F>,
    arch: Arch,
    gates: &[GateVars],
    x: Var,
    h: Var,
    c: Option<Var>,
    hidden_mask: Option<Var>,
) -> Result<(Var, Option<Var>)> {
    let hm = match hidden_mask {
        Some(m) => apply_mask(tape, h, m)?,
        None => h,
    };
    match arch {
        Arch::Lstm => {
            let c = c.expect("LSTM state carries a cell");
            let i = pre(tape, &gates[0], x, hm)?;
            let i = tape.sigmoid(i);
            let f = pre(tape, &gates[1], x, hm)?;
            let f = tape.sigmoid(f);
            let g = pre(tape, &gates[2], x, hm)?;
            let g = tape.tanh(g);
            let o = pre(tape, &gates[3], x, hm)?;
            let o = tape.sigmoid(o);
            let fc = tape.mul(f, c)?;
            let ig = tape.mul(i, g)?;
            let c2 = tape.add(fc, ig)?;
            let tc = tape.tanh(c2);
            let h2 = tape.mul(o, tc)?;
            Ok((h2, Some(c2)))
        }
        Arch::Gru => {
            let z = pre(tape, &gates[0], x, hm)?;
            let z = tape.sigmoid(z);
            let r = pre(tape, &gates[1], x, hm)?;
            let r = tape.sigmoid(r);
            let n = &gates[2];
            let xw = tape.affine(x, n.w, n.b)?;
            let hu = tape.matmul(hm, n.u)?;
            let rhu = tape.mul(r, hu)?;
            let n = tape.add(xw, rhu)?;
            let n = tape.tanh(n);
            let keep = tape.one_minus(z);
            let a = tape.mul(keep, n)?;
            let b = tape.mul(z, h)?;
            Ok((tape.add(a, b)?, None))
        }
        Arch::Highway => {
            let t = pre(tape, &gates[0], x, hm)?;
            let t = tape.sigmoid(t);
            let s = pre(tape, &gates[1], x, hm)?;
            let s = tape.tanh(s);
            let carry = tape.one_minus(t);
            let a = tape.mul(t, s)?;
            let b = tape.mul(carry, hm)?;
            Ok((tape.add(a, b)?, None))
        }
    }
}
