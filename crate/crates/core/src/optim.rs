//! Derivative-free Nelder–Mead simplex search with projection onto a feasible set.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop once every vertex lies within this Euclidean distance of the best vertex.
    pub diameter_tol: f64,
    /// Initial edge length relative to `|x0_i|`, with [`Self::min_step`] as a floor.
    pub rel_step: f64,
    pub min_step: f64,
    /// Extra runs restarted from the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            diameter_tol: 1e-8,
            rel_step: 0.1,
            min_step: 0.05,
            restarts: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Vertex {
    x: Vec<f64>,
    fx: f64,
}

/// Minimize `objective` from `x0`. Every trial point is passed through `project` before
/// it is evaluated, so all vertices stay feasible.
pub fn nelder_mead<O, P>(objective: O, x0: &[f64], project: P, opts: &NelderMeadOptions) -> Minimum
where
    O: Fn(&[f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let mut evaluations = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    project(&mut start);
    let mut best = Vertex {
        fx: eval(&start, &mut evaluations),
        x: start,
    };
    let mut iterations = 0usize;
    let mut converged = false;

    for _ in 0..=opts.restarts {
        let before = best.fx;
        let run = run_simplex(
            &best,
            &eval,
            &project,
            opts,
            opts.max_iter - iterations,
            &mut evaluations,
        );
        iterations += run.1;
        converged = run.2;
        if run.0.fx <= best.fx {
            best = run.0;
        }
        let gain = before - best.fx;
        if !converged || iterations >= opts.max_iter || gain <= 1e-12 * best.fx.abs().max(1.0) {
            break;
        }
    }

    Minimum {
        x: best.x,
        fx: best.fx,
        iterations,
        evaluations,
        converged,
    }
}

fn run_simplex<E, P>(
    start: &Vertex,
    eval: &E,
    project: &P,
    opts: &NelderMeadOptions,
    budget: usize,
    evaluations: &mut usize,
) -> (Vertex, usize, bool)
where
    E: Fn(&[f64], &mut usize) -> f64,
    P: Fn(&mut [f64]),
{
    let dim = start.x.len();
    let mut simplex = Vec::with_capacity(dim + 1);
    simplex.push(Vertex {
        x: start.x.clone(),
        fx: start.fx,
    });
    for i in 0..dim {
        let step = (opts.rel_step * start.x[i].abs()).max(opts.min_step);
        let mut x = start.x.clone();
        x[i] += step;
        project(&mut x);
        if x == start.x {
            // pinned against the feasible boundary: step the other way
            x[i] = start.x[i] - step;
            project(&mut x);
        }
        simplex.push(Vertex {
            fx: eval(&x, evaluations),
            x,
        });
    }

    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| a.fx.total_cmp(&b.fx));
        if diameter(&simplex) < opts.diameter_tol {
            return (simplex.swap_remove(0), iterations, true);
        }
        if iterations >= budget {
            return (simplex.swap_remove(0), iterations, false);
        }
        iterations += 1;

        let worst = dim;
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..worst].iter().map(|v| v.x[j]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |coef: f64| {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst].x)
                .map(|(&c, &w)| c + coef * (c - w))
                .collect();
            project(&mut x);
            x
        };

        let xr = toward(1.0);
        let fr = eval(&xr, evaluations);
        if fr < simplex[0].fx {
            let xe = toward(2.0);
            let fe = eval(&xe, evaluations);
            simplex[worst] = if fe < fr {
                Vertex { x: xe, fx: fe }
            } else {
                Vertex { x: xr, fx: fr }
            };
            continue;
        }
        if fr < simplex[worst - 1].fx {
            simplex[worst] = Vertex { x: xr, fx: fr };
            continue;
        }
        // outside contraction if the reflection improved on the worst vertex, else inside
        let xc = toward(if fr < simplex[worst].fx { 0.5 } else { -0.5 });
        let fc = eval(&xc, evaluations);
        if fc < fr.min(simplex[worst].fx) {
            simplex[worst] = Vertex { x: xc, fx: fc };
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].x.clone();
        for v in simplex.iter_mut().skip(1) {
            for (xi, &bi) in v.x.iter_mut().zip(&best) {
                *xi = bi + 0.5 * (*xi - bi);
            }
            project(&mut v.x);
            v.fx = eval(&v.x, evaluations);
        }
    }
}

fn diameter(simplex: &[Vertex]) -> f64 {
    let best = &simplex[0].x;
    simplex[1..]
        .iter()
        .map(|v| {
            v.x.iter()
                .zip(best)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], |_| {}, &NelderMeadOptions::default());
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6,
            "{m:?}"
        );
    }

    #[test]
    fn projection_keeps_iterates_feasible() {
        // unconstrained minimum at (-1, -1); feasible set is the positive quadrant
        let f = |x: &[f64]| {
            assert!(x.iter().all(|&v| v >= 0.0));
            (x[0] + 1.0).powi(2) + (x[1] + 1.0).powi(2)
        };
        let clamp = |x: &mut [f64]| x.iter_mut().for_each(|v| *v = v.max(0.0));
        let m = nelder_mead(f, &[2.0, 3.0], clamp, &NelderMeadOptions::default());
        assert!(m.x.iter().all(|&v| v.abs() < 1e-7), "{m:?}");
    }

    #[test]
    fn iteration_cap() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            max_iter: 5,
            ..Default::default()
        };
        let m = nelder_mead(f, &[-1.2, 1.0], |_| {}, &opts);
        assert!(!m.converged);
        assert_eq!(m.iterations, 5);
    }

    #[test]
    fn one_dimensional() {
        let m = nelder_mead(
            |x: &[f64]| (x[0] - 3.0).powi(2),
            &[0.0],
            |_| {},
            &NelderMeadOptions::default(),
        );
        assert!((m.x[0] - 3.0).abs() < 1e-7);
    }
}
