//! Central-difference gradient checker.
//!
//! Each entry first gets five-point estimates at steps `h / 10`, `h`,
//! `h / 100` and `h / 1000`. If none agrees with autodiff to a tenth of the
//! tolerance, the entry is re-estimated with Ridders' extrapolation (central differences at
//! geometrically shrinking steps combined in a Richardson tableau) from
//! several starting steps, keeping the estimate with the smallest internal
//! error. Gradients near 1e-10 need large steps to rise above roundoff while
//! strongly curved entries need small ones; this covers both.
//!
//! Any probe that moves a relu input across zero is discarded, so every
//! difference is taken inside one smooth piece.

use super::rng::Rng;
use super::tape::{Tape, Var};
use super::tensor::ParameterSet;
use super::NumError;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub h: f64,
    pub tol: f64,
    /// Check at most this many randomly chosen entries per parameter.
    pub max_entries_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            h: 1e-2,
            tol: 1e-4,
            max_entries_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter and flat entry index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
    /// Entries whose step had to be shrunk to avoid a relu kink.
    pub kink_retries: usize,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-12)
}

/// Compares autodiff gradients of the scalar returned by `f` against central
/// differences for every parameter entry (or a seeded sample of them). `f`
/// must be deterministic; run stochastic layers in eval mode.
pub fn grad_check<F>(
    params: &ParameterSet,
    f: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NumError>
where
    F: for<'a> Fn(&mut Tape<'a>, &'a ParameterSet) -> Result<Var, NumError>,
{
    let analytic = {
        let mut tape = Tape::new();
        let loss = f(&mut tape, params)?;
        tape.backward(loss)?;
        tape.param_grads()
    };

    let eval = |p: &ParameterSet| -> Result<(f64, Vec<bool>), NumError> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, p)?;
        let v = tape.value(loss);
        if v.len() != 1 {
            return Err(NumError::NotScalar(vec![v.nrows(), v.ncols()]));
        }
        Ok((v[[0, 0]], tape.kink_pattern()))
    };
    let base_pattern = eval(params)?.1;

    let mut rng = Rng::new(opts.seed);
    let mut work = params.clone();
    let mut max_rel = 0.0_f64;
    let mut worst = None;
    let mut checked = 0;
    let mut retries = 0;
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let len = params.get(&name)?.data.len();
        let mut idx: Vec<usize> = (0..len).collect();
        if let Some(k) = opts.max_entries_per_param {
            if k < len {
                rng.shuffle(&mut idx);
                idx.truncate(k);
            }
        }
        for flat in idx {
            let orig = params.get(&name)?.data.as_slice().expect("standard layout")[flat];
            let a = analytic
                .get(&name)
                .map(|g| g.as_slice().expect("standard layout")[flat])
                .unwrap_or(0.0);
            let mut probe = |x: f64| -> Result<(f64, bool), NumError> {
                set_entry(&mut work, &name, flat, orig + x)?;
                let (up, pu) = eval(&work)?;
                set_entry(&mut work, &name, flat, orig - x)?;
                let (down, pd) = eval(&work)?;
                set_entry(&mut work, &name, flat, orig)?;
                Ok((up - down, pu == base_pattern && pd == base_pattern))
            };
            let mut quick = None;
            let mut kinked = false;
            for step in [opts.h / 10.0, opts.h, opts.h / 100.0, opts.h / 1000.0] {
                let (d1, s1) = probe(step)?;
                let (d2, s2) = probe(2.0 * step)?;
                let q = (8.0 * d1 - d2) / (12.0 * step);
                kinked |= !(s1 && s2);
                if s1 && s2 && relative_error(a, q) < opts.tol / 10.0 {
                    quick = Some(q);
                    break;
                }
            }
            let numeric = match quick {
                Some(q) => q,
                None => {
                    let mut best: Option<(f64, f64)> = None;
                    let mut start = opts.h * 10.0;
                    let mut tried = 0;
                    while tried < 3 && start >= opts.h * 1e-6 {
                        match ridders(start, &mut probe)? {
                            Some((d, err)) => {
                                tried += 1;
                                if best.is_none_or(|(_, e)| err < e) {
                                    best = Some((d, err));
                                }
                                if err <= opts.tol * 1e-2 * d.abs() {
                                    break;
                                }
                            }
                            None => kinked = true,
                        }
                        start /= 10.0;
                    }
                    match best {
                        Some((d, _)) => d,
                        None => probe(start)?.0 / (2.0 * start),
                    }
                }
            };
            if kinked {
                retries += 1;
            }
            let rel = relative_error(a, numeric);
            if rel > max_rel || worst.is_none() {
                max_rel = max_rel.max(rel);
                worst = Some((name.clone(), flat));
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst,
        entries_checked: checked,
        kink_retries: retries,
        passed: max_rel < opts.tol,
    })
}

/// Ridders' derivative estimate and its error estimate, from the symmetric
/// differences `f(x + step) - f(x - step)` returned by `probe`. `None` if any
/// probe leaves the smooth piece around the origin.
fn ridders(
    h: f64,
    probe: &mut impl FnMut(f64) -> Result<(f64, bool), NumError>,
) -> Result<Option<(f64, f64)>, NumError> {
    const SHRINK: f64 = 1.4;
    const STEPS: usize = 10;
    const SAFE: f64 = 2.0;
    let mut table = [[0.0; STEPS]; STEPS];
    let mut step = h;
    let (d, smooth) = probe(step)?;
    if !smooth {
        return Ok(None);
    }
    table[0][0] = d / (2.0 * step);
    let mut best = table[0][0];
    let mut err = f64::INFINITY;
    for i in 1..STEPS {
        step /= SHRINK;
        let (d, smooth) = probe(step)?;
        if !smooth {
            return Ok(None);
        }
        table[0][i] = d / (2.0 * step);
        let mut fac = SHRINK * SHRINK;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK * SHRINK;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= SAFE * err {
            break;
        }
    }
    Ok(Some((best, err)))
}

fn set_entry(p: &mut ParameterSet, name: &str, flat: usize, v: f64) -> Result<(), NumError> {
    let t = p.get_mut(name)?;
    t.data.as_slice_mut().expect("standard layout")[flat] = v;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn linear_function_is_exact() {
        let mut p = ParameterSet::new();
        p.insert("w", array![[0.3, -1.2], [2.0, 0.5]]).unwrap();
        let report = grad_check(
            &p,
            |t, p| {
                let w = t.param(p, "w")?;
                let xv = t.constant(array![[1.0, -3.0]]);
                let y = t.matmul(xv, w)?;
                Ok(t.sum_all(y))
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert_eq!(report.entries_checked, 4);
    }

    #[test]
    fn every_primitive_passes() {
        let mut rng = Rng::new(11);
        let mut p = ParameterSet::new();
        p.insert_uniform("a", 3, 4, &mut rng).unwrap();
        p.insert_uniform("b", 4, 3, &mut rng).unwrap();
        p.insert_uniform("row", 1, 3, &mut rng).unwrap();
        p.insert_uniform("emb", 5, 3, &mut rng).unwrap();
        let mask = array![[0.0, f64::NEG_INFINITY, 0.0], [0.0, 0.0, 0.0], [f64::NEG_INFINITY, 0.0, 0.0]];
        let report = grad_check(
            &p,
            |t, p| {
                let a = t.param(p, "a")?;
                let b = t.param(p, "b")?;
                let row = t.param(p, "row")?;
                let emb = t.param(p, "emb")?;
                let ab = t.matmul(a, b)?;
                let s = t.sigmoid(ab);
                let th = t.tanh(ab);
                let m = t.mul(s, th)?;
                let ln = t.layer_norm(m, row, row)?;
                let masked = t.add_const(ln, &mask)?;
                let sm = t.row_softmax(masked);
                let g = t.gather(emb, vec![vec![(0, 0.5), (4, 0.5)], vec![(1, 1.0)], vec![(2, 1.0), (3, -1.0)]])?;
                let r = t.relu(g);
                let x = t.add(sm, r)?;
                let x = t.sub(x, ab)?;
                let xt = t.transpose(x);
                let x = t.matmul(x, xt)?;
                let x = t.scale(x, 0.3);
                let x = t.add_scalar(x, 1.0);
                let cc = t.concat_cols(&[x, ab])?;
                let cr = t.concat_rows(&[cc, cc])?;
                let sl = t.slice_cols(cr, 1, 5)?;
                let sl = t.slice_rows(sl, 2, 6)?;
                let sr = t.sum_rows(sl);
                let mr = t.mean_rows(sl);
                let mr = t.mul(mr, mr)?;
                let c = t.cosine(sr, mr)?;
                let mb = t.mul_row(ab, row)?;
                let ma = t.mean_all(mb);
                let tot = t.add(c, ma)?;
                Ok(tot)
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn relu_kink_inside_step_is_avoided() {
        // w sits 5e-4 from the kink, inside the quick and first Ridders steps
        let mut p = ParameterSet::new();
        p.insert("w", array![[5e-4, 0.7]]).unwrap();
        let report = grad_check(
            &p,
            |t, p| {
                let w = t.param(p, "w")?;
                let r = t.relu(w);
                Ok(t.sum_all(r))
            },
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert_eq!(report.kink_retries, 1);
    }
}
