//! Classical fixed-step fourth-order Runge-Kutta.

/// Uniform grid `0, dt, 2dt, ...` ending exactly at `t_end` (the last step
/// is shortened if `t_end` is not a multiple of `dt`).
pub fn uniform_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut grid: Vec<f64> = (0..steps).map(|i| i as f64 * dt).collect();
    grid.push(t_end);
    grid
}

/// Integrates `y' = f(t, y)` over `grid`, returning the solution row-major
/// (one row of `y0.len()` values per grid point).
pub fn rk4<F>(mut f: F, y0: &[f64], grid: &[f64]) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let m = y0.len();
    let mut out = Vec::with_capacity(m * grid.len());
    out.extend_from_slice(y0);
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    for w in grid.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        f(t, &y, &mut k1);
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..m {
            tmp[i] = y[i] + h * k3[i];
        }
        f(t + h, &tmp, &mut k4);
        for i in 0..m {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.extend_from_slice(&y);
    }
    out
}

/// Linear interpolation of column `col` of a row-major table on `grid`.
/// Clamps to the end values outside the grid.
pub(crate) fn interpolate(grid: &[f64], values: &[f64], width: usize, col: usize, t: f64) -> f64 {
    // Grids here are uniform apart from a short last step, so guess the
    // slot from the first spacing and walk to the exact one.
    let len = grid.len();
    let mut i = if len >= 2 && t.is_finite() {
        let h = grid[1] - grid[0];
        (((t - grid[0]) / h).floor().max(-1.0) as usize).saturating_add(1).min(len)
    } else {
        grid.partition_point(|&g| g <= t)
    };
    while i > 0 && grid[i - 1] > t {
        i -= 1;
    }
    while i < len && grid[i] <= t {
        i += 1;
    }
    if i == 0 {
        return values[col];
    }
    if i == grid.len() {
        return values[(grid.len() - 1) * width + col];
    }
    let (t0, t1) = (grid[i - 1], grid[i]);
    let (y0, y1) = (values[(i - 1) * width + col], values[i * width + col]);
    y0 + (y1 - y0) * (t - t0) / (t1 - t0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ends_exactly_at_horizon() {
        assert_eq!(uniform_grid(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = uniform_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(uniform_grid(0.0, 0.1), vec![0.0]);
    }

    #[test]
    fn exponential_decay_is_fourth_order() {
        let err = |dt: f64| {
            let grid = uniform_grid(1.0, dt);
            let y = rk4(|_, y, dy| dy[0] = -y[0], &[1.0], &grid);
            (y.last().unwrap() - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn interpolation_is_linear_between_nodes() {
        let grid = [0.0, 1.0, 2.0];
        let vals = [0.0, 10.0, 2.0, 20.0, 4.0, 40.0];
        assert_eq!(interpolate(&grid, &vals, 2, 1, 0.5), 15.0);
        assert_eq!(interpolate(&grid, &vals, 2, 0, 2.0), 4.0);
        assert_eq!(interpolate(&grid, &vals, 2, 0, 5.0), 4.0);
    }
}
