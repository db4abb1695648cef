//! Nelder–Mead downhill simplex with restarts.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop once `max f - min f` over the simplex falls below this.
    pub tolerance: f64,
    /// Or once every vertex lies within this distance (per coordinate) of
    /// the best one.
    pub x_tolerance: f64,
    pub max_iterations: usize,
    /// Fresh simplices built around the incumbent after convergence.
    pub max_restarts: usize,
}

#[derive(Debug, Clone)]
pub struct SimplexResult<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

/// One Nelder–Mead run with the standard coefficients
/// (reflection 1, expansion 2, contraction ½, shrink ½).
pub fn nelder_mead<const N: usize>(
    mut f: impl FnMut(&[f64; N]) -> f64,
    x0: [f64; N],
    steps: [f64; N],
    tolerance: f64,
    x_tolerance: f64,
    max_iterations: usize,
) -> SimplexResult<N> {
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64; N]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<[f64; N]> = Vec::with_capacity(N + 1);
    pts.push(x0);
    for i in 0..N {
        let mut p = x0;
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(&mut eval).collect();

    let mut iterations = 0;
    while iterations < max_iterations {
        // Sort ascending; ties keep insertion order so runs are reproducible.
        let mut order: Vec<usize> = (0..=N).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i]).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[N] - vals[0];
        if spread.is_finite() && spread < tolerance {
            break;
        }
        let diameter = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.is_finite() && diameter < x_tolerance {
            break;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for p in &pts[..N] {
            for k in 0..N {
                centroid[k] += p[k] / N as f64;
            }
        }
        let along = |t: f64| {
            let mut q = [0.0; N];
            for k in 0..N {
                q[k] = centroid[k] + t * (pts[N][k] - centroid[k]);
            }
            q
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[N] = xe;
                vals[N] = fe;
            } else {
                pts[N] = xr;
                vals[N] = fr;
            }
            continue;
        }
        if fr < vals[N - 1] {
            pts[N] = xr;
            vals[N] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[N] {
            let xc = along(-0.5);
            (xc, eval(&xc))
        } else {
            let xc = along(0.5);
            (xc, eval(&xc))
        };
        if fc < vals[N].min(fr) {
            pts[N] = xc;
            vals[N] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for i in 1..=N {
            for k in 0..N {
                pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
            }
            vals[i] = eval(&pts[i]);
        }
    }

    let best = (0..=N).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    SimplexResult {
        x: pts[best],
        value: vals[best],
        iterations,
        evaluations,
    }
}

/// Repeats [`nelder_mead`] from the incumbent with a fresh simplex until a
/// restart no longer improves the value by more than the tolerance. Each
/// restart uses steps a quarter the size of the previous one.
pub fn minimize<const N: usize>(
    mut f: impl FnMut(&[f64; N]) -> f64,
    x0: [f64; N],
    steps: [f64; N],
    opts: SimplexOptions,
) -> SimplexResult<N> {
    let mut best = nelder_mead(&mut f, x0, steps, opts.tolerance, opts.x_tolerance, opts.max_iterations);
    let mut steps = steps;
    for _ in 0..opts.max_restarts {
        for s in &mut steps {
            *s *= 0.25;
        }
        let next = nelder_mead(&mut f, best.x, steps, opts.tolerance, opts.x_tolerance, opts.max_iterations);
        let improved = best.value - next.value;
        let (iterations, evaluations) = (
            best.iterations + next.iterations,
            best.evaluations + next.evaluations,
        );
        if next.value < best.value {
            best = SimplexResult {
                iterations,
                evaluations,
                ..next
            };
        } else {
            best.iterations = iterations;
            best.evaluations = evaluations;
        }
        if !(improved > opts.tolerance) {
            break;
        }
    }
    best
}
