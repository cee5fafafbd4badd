//! Two-dimensional Nelder-Mead search restricted to the quadrant `x >= 0`.
//!
//! Trial points are projected onto the bound before evaluation, so every
//! vertex stays feasible. Only strict improvements replace the best vertex.

pub(crate) struct SimplexOutcome {
    pub point: [f64; 2],
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn project(p: [f64; 2]) -> [f64; 2] {
    [p[0].max(0.0), p[1].max(0.0)]
}

fn along(from: [f64; 2], to: [f64; 2], t: f64) -> [f64; 2] {
    project([from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])])
}

pub(crate) fn minimize<F>(
    mut f: F,
    start: [f64; 2],
    steps: [f64; 2],
    tolerance: f64,
    max_evaluations: usize,
) -> SimplexOutcome
where
    F: FnMut([f64; 2]) -> f64,
{
    let start = project(start);
    let mut vertices = [
        start,
        project([start[0] + steps[0], start[1]]),
        project([start[0], start[1] + steps[1]]),
    ];
    let mut values = [f(vertices[0]), f(vertices[1]), f(vertices[2])];
    let mut evaluations = 3;
    let mut converged = false;

    loop {
        // order: best at 0, worst at 2; stable so ties keep the earlier vertex
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        vertices = order.map(|i| vertices[i]);
        values = order.map(|i| values[i]);

        let spread = |k: usize| {
            (vertices[1][k] - vertices[0][k])
                .abs()
                .max((vertices[2][k] - vertices[0][k]).abs())
        };
        if spread(0) < tolerance && spread(1) < tolerance {
            converged = true;
            break;
        }
        if evaluations >= max_evaluations {
            break;
        }

        let centroid = [
            0.5 * (vertices[0][0] + vertices[1][0]),
            0.5 * (vertices[0][1] + vertices[1][1]),
        ];
        let worst = vertices[2];
        let reflected = along(centroid, worst, -REFLECT);
        let f_reflected = f(reflected);
        evaluations += 1;

        if f_reflected < values[0] {
            let expanded = along(centroid, worst, -EXPAND);
            let f_expanded = f(expanded);
            evaluations += 1;
            if f_expanded < f_reflected {
                vertices[2] = expanded;
                values[2] = f_expanded;
            } else {
                vertices[2] = reflected;
                values[2] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[1] {
            vertices[2] = reflected;
            values[2] = f_reflected;
            continue;
        }

        let (contracted, f_contracted) = if f_reflected < values[2] {
            let p = along(centroid, reflected, CONTRACT);
            (p, f(p))
        } else {
            let p = along(centroid, worst, CONTRACT);
            (p, f(p))
        };
        evaluations += 1;
        if f_contracted < values[2].min(f_reflected) {
            vertices[2] = contracted;
            values[2] = f_contracted;
            continue;
        }

        for k in 1..3 {
            vertices[k] = along(vertices[0], vertices[k], SHRINK);
            values[k] = f(vertices[k]);
        }
        evaluations += 2;
    }

    SimplexOutcome {
        point: vertices[0],
        value: values[0],
        evaluations,
        converged,
    }
}
