//! Exact random-coding exponents of the hierarchical ensemble.

use crate::error::{Error, Result};
use crate::opt::{minimize_from, ConstraintSet, ExponentResult, SolverConfig, SolverStatus};
use crate::prob::{entropy_of, pos_part, Alphabet, Axis, ChannelModel, CondPmf, EnsembleSpec, RatePair};

/// Flat view of `Q_{UXO}` cells with the divergence and information terms
/// the random-coding objectives need.
pub(crate) struct UxoTerms {
    pub div: f64,
    pub i_u_o: f64,
    pub i_x_o_u: f64,
}

pub(crate) struct UxoCtx {
    pub nu: usize,
    pub nx: usize,
    pub no: usize,
    pub p_ux: Vec<f64>,
    pub w: Vec<f64>,
}

impl UxoCtx {
    pub fn new(ensemble: &EnsembleSpec, w: &CondPmf) -> Result<Self> {
        if w.n_from() != ensemble.nx() {
            return Err(Error::ShapeMismatch("channel input vs ensemble X".into()));
        }
        Ok(UxoCtx {
            nu: ensemble.nu(),
            nx: ensemble.nx(),
            no: w.n_to(),
            p_ux: ensemble.p_ux().into_probs(),
            w: w.rows().to_vec(),
        })
    }

    pub fn shape(&self, out: Axis) -> Vec<Alphabet> {
        vec![
            Alphabet::new(Axis::U, self.nu),
            Alphabet::new(Axis::X, self.nx),
            Alphabet::new(out, self.no),
        ]
    }

    /// `P_UX x W` as cells on `(U, X, O)`.
    pub fn true_channel(&self) -> Vec<f64> {
        let mut q = Vec::with_capacity(self.p_ux.len() * self.no);
        for (ux, &p) in self.p_ux.iter().enumerate() {
            let x = ux % self.nx;
            q.extend(self.w[x * self.no..(x + 1) * self.no].iter().map(|&w| p * w));
        }
        q
    }

    pub fn terms(&self, q: &[f64]) -> UxoTerms {
        let (nu, nx, no) = (self.nu, self.nx, self.no);
        let mut div = 0.0;
        let mut q_ux = vec![0.0; nu * nx];
        let mut q_uo = vec![0.0; nu * no];
        let mut q_u = vec![0.0; nu];
        let mut q_o = vec![0.0; no];
        for u in 0..nu {
            for x in 0..nx {
                for o in 0..no {
                    let v = q[(u * nx + x) * no + o];
                    q_ux[u * nx + x] += v;
                    q_uo[u * no + o] += v;
                    q_u[u] += v;
                    q_o[o] += v;
                }
            }
        }
        for u in 0..nu {
            for x in 0..nx {
                let m = q_ux[u * nx + x];
                for o in 0..no {
                    let v = q[(u * nx + x) * no + o];
                    if v > 0.0 {
                        let w = self.w[x * no + o];
                        if w > 0.0 {
                            div += v * (v / (m * w)).ln();
                        } else {
                            div = f64::INFINITY;
                        }
                    }
                }
            }
        }
        let h_u = entropy_of(&q_u);
        let h_uo = entropy_of(&q_uo);
        UxoTerms {
            div: div.max(0.0),
            i_u_o: (h_u + entropy_of(&q_o) - h_uo).max(0.0),
            i_x_o_u: (entropy_of(&q_ux) + h_uo - entropy_of(q) - h_u).max(0.0),
        }
    }
}

fn rc_min(
    ctx: &UxoCtx,
    out: Axis,
    ensemble: &EnsembleSpec,
    cfg: &SolverConfig,
    bracket: &(dyn Fn(&UxoTerms) -> f64 + Sync),
) -> Result<ExponentResult> {
    let shape = ctx.shape(out);
    let cs = ConstraintSet::new().fix(ensemble.p_ux());
    let obj = |q: &crate::prob::JointPmf| {
        let t = ctx.terms(q.probs());
        t.div + bracket(&t)
    };
    minimize_from(&obj, &cs, &shape, cfg, vec![ctx.true_channel()])
}

/// `E_w = min_{Q_{Z|UX}} D(Q_{Z|UX} || W_2 | P_UX) + [I(U;Z) + [I(X;Z|U) - R_y]_+ - R_z]_+`.
pub fn e_weak_rc(
    rates: RatePair,
    ensemble: &EnsembleSpec,
    channel: &ChannelModel,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let ctx = UxoCtx::new(ensemble, channel.w2())?;
    let bracket = |t: &UxoTerms| pos_part(t.i_u_o + pos_part(t.i_x_o_u - rates.r_y) - rates.r_z);
    rc_min(&ctx, Axis::Z, ensemble, cfg, &bracket)
}

/// `E_s = min_{Q_{Y|UX}} D + min{[I(UX;Y) - R_y - R_z]_+, [I(X;Y|U) - R_y]_+}`,
/// evaluated as the smaller of the two convex minimizations.
pub fn e_strong_rc(
    rates: RatePair,
    ensemble: &EnsembleSpec,
    channel: &ChannelModel,
    cfg: &SolverConfig,
) -> Result<ExponentResult> {
    let ctx = UxoCtx::new(ensemble, channel.w1())?;
    let joint = |t: &UxoTerms| pos_part(t.i_u_o + t.i_x_o_u - rates.r_y - rates.r_z);
    let cloud = |t: &UxoTerms| pos_part(t.i_x_o_u - rates.r_y);
    let a = rc_min(&ctx, Axis::Y, ensemble, cfg, &joint)?;
    let b = rc_min(&ctx, Axis::Y, ensemble, cfg, &cloud)?;
    let components = vec![("joint".to_string(), a.value), ("cloud".to_string(), b.value)];
    let mut best = if b.value < a.value { b } else { a };
    best.components = components;
    if best.status == SolverStatus::Infeasible {
        best.value = f64::INFINITY;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::{grid_oracle_refined, OracleSpec};
    use crate::prob::{mutual_info, JointPmf};

    fn setup() -> (EnsembleSpec, ChannelModel) {
        (
            EnsembleSpec::from_vectors(&[0.5, 0.5], &[vec![0.85, 0.15], vec![0.15, 0.85]]).unwrap(),
            ChannelModel::bsc_pair(0.05, 0.2).unwrap(),
        )
    }

    #[test]
    fn zero_inside_capacity_region() {
        let (e, ch) = setup();
        let q = e.p_ux().compose(ch.w2()).unwrap();
        let i_uz = mutual_info(&q, &[Axis::U], &[Axis::Z]).unwrap();
        let i_xz_u = crate::prob::conditional_mutual_info(&q, &[Axis::X], &[Axis::Z], &[Axis::U]).unwrap();
        let r_y = 0.01;
        let r_z = i_uz + pos_part(i_xz_u - r_y) + 0.01;
        let v = e_weak_rc(RatePair::new(r_y, r_z).unwrap(), &e, &ch, &SolverConfig::default()).unwrap();
        assert!(v.value.abs() < 1e-9, "{}", v.value);
    }

    #[test]
    fn weak_matches_oracle_at_zero_rate() {
        let (e, ch) = setup();
        let cfg = SolverConfig::default();
        let v = e_weak_rc(RatePair::new(0.0, 0.0).unwrap(), &e, &ch, &cfg).unwrap();
        let ctx = UxoCtx::new(&e, ch.w2()).unwrap();
        let obj = |q: &JointPmf| {
            let t = ctx.terms(q.probs());
            t.div + t.i_u_o + t.i_x_o_u
        };
        let cs = ConstraintSet::new().fix(e.p_ux());
        let o = grid_oracle_refined(&obj, &cs, &ctx.shape(Axis::Z), &OracleSpec::new(0.025).zoom(3))
            .unwrap()
            .0;
        assert!(v.value <= o + 1e-9 && o - v.value < 1e-3, "{} vs {o}", v.value);
        assert!(v.value > 0.0);
    }

    #[test]
    fn strong_is_monotone_along_a_ray() {
        let (e, ch) = setup();
        let cfg = SolverConfig::default();
        let mut prev = f64::INFINITY;
        for k in 0..4 {
            let r = 0.05 * k as f64;
            let v = e_strong_rc(RatePair::new(r, r).unwrap(), &e, &ch, &cfg).unwrap().value;
            assert!(v <= prev + 1e-6);
            prev = v;
        }
    }
}
