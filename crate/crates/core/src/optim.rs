//! Two-dimensional Nelder–Mead simplex minimiser.

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    pub initial_step: f64,
    pub max_iterations: usize,
    /// Stop once best and worst vertex values differ by less than this.
    pub f_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            initial_step: 0.25,
            max_iterations: 500,
            f_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexResult {
    pub point: [f64; 2],
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum SimplexOutcome {
    Finished(SimplexResult),
    /// A vertex left the admissible region; carries the offending point.
    Escaped([f64; 2]),
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn lerp(from: [f64; 2], to: [f64; 2], t: f64) -> [f64; 2] {
    [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])]
}

pub(crate) fn nelder_mead<F, B>(
    mut f: F,
    start: [f64; 2],
    options: &SimplexOptions,
    escaped: B,
) -> SimplexOutcome
where
    F: FnMut([f64; 2]) -> f64,
    B: Fn([f64; 2]) -> bool,
{
    let step = options.initial_step;
    let mut simplex = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut values = simplex.map(&mut f);

    let mut iterations = 0;
    loop {
        // order vertices best..worst
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);

        if let Some(bad) = simplex.iter().find(|p| escaped(**p)) {
            return SimplexOutcome::Escaped(*bad);
        }

        if (values[2] - values[0]).abs() < options.f_tolerance || iterations >= options.max_iterations {
            return SimplexOutcome::Finished(SimplexResult {
                point: simplex[0],
                value: values[0],
                iterations,
            });
        }
        iterations += 1;

        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let worst = simplex[2];
        let reflected = lerp(centroid, worst, -REFLECT);
        let f_reflected = f(reflected);

        if f_reflected < values[0] {
            let expanded = lerp(centroid, worst, -EXPAND);
            let f_expanded = f(expanded);
            if f_expanded < f_reflected {
                simplex[2] = expanded;
                values[2] = f_expanded;
            } else {
                simplex[2] = reflected;
                values[2] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[1] {
            simplex[2] = reflected;
            values[2] = f_reflected;
            continue;
        }

        let (contracted, f_contracted) = if f_reflected < values[2] {
            let p = lerp(centroid, reflected, CONTRACT);
            (p, f(p))
        } else {
            let p = lerp(centroid, worst, CONTRACT);
            (p, f(p))
        };
        if f_contracted < values[2].min(f_reflected) {
            simplex[2] = contracted;
            values[2] = f_contracted;
            continue;
        }

        for i in 1..3 {
            simplex[i] = lerp(simplex[0], simplex[i], SHRINK);
            values[i] = f(simplex[i]);
        }
    }
}
