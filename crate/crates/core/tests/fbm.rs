use gammakit::fbm::{euler_solve, fbm_cov, sde_malliavin, DriftSpec, FbmGrid, FbmPath};

/// Columns of the linear map ξ ↦ B^H(t_k), recovered from unit vectors.
fn loading(grid: &FbmGrid) -> Vec<Vec<f64>> {
    let m = grid.steps();
    (0..m)
        .map(|j| {
            let mut xi = vec![0.0; m];
            xi[j] = 1.0;
            FbmPath::from_coordinates(grid, xi).values
        })
        .collect()
}

#[test]
fn path_covariance_is_exact_and_refinement_consistent() {
    for h in [0.55, 0.7, 0.9] {
        let coarse = FbmGrid::uniform(h, 2.0, 16).unwrap();
        let fine = FbmGrid::uniform(h, 2.0, 32).unwrap();
        let (lc, lf) = (loading(&coarse), loading(&fine));
        let cov = |l: &[Vec<f64>], a: usize, b: usize| l.iter().map(|col| col[a] * col[b]).sum::<f64>();
        for a in 0..=16 {
            for b in 0..=16 {
                let want = fbm_cov(h, coarse.times()[a], coarse.times()[b]);
                assert!((cov(&lc, a, b) - want).abs() < 1e-10, "H={h} ({a},{b})");
                // the same time pair on the refined grid
                assert!((cov(&lf, 2 * a, 2 * b) - want).abs() < 1e-10);
            }
        }
    }
}

/// Forward-difference derivative of the Euler scheme with respect to the
/// driving increment over `(t_l, t_{l+1}]`, evaluated at `t_k`.
fn euler_sensitivity(grid: &FbmGrid, drift: &DriftSpec, path: &FbmPath, l: usize, k: usize) -> f64 {
    let eps = 1e-7;
    let base = euler_solve(0.2, drift, grid, path).values[k];
    let mut bumped = path.clone();
    bumped.increments[l] += eps;
    (euler_solve(0.2, drift, grid, &bumped).values[k] - base) / eps
}

#[test]
fn malliavin_derivative_matches_euler_sensitivity_as_grid_refines() {
    let drift = DriftSpec::Tanh { a: 1.5 };
    let mut errors = Vec::new();
    for m in [16usize, 64, 256] {
        let grid = FbmGrid::uniform(0.7, 1.0, m).unwrap();
        // a smooth deterministic driver keeps the comparison path-independent of m
        let values: Vec<f64> = grid.times().iter().map(|t| (3.0 * t).sin()).collect();
        let increments: Vec<f64> = values.windows(2).map(|p| p[1] - p[0]).collect();
        let path = FbmPath { xi: vec![0.0; m], increments, values };
        let sde = euler_solve(0.2, &drift, &grid, &path);
        let d = sde_malliavin(&sde, &drift);
        let mut worst: f64 = 0.0;
        for (s, t) in [(0.25, 0.75), (0.0, 1.0), (0.5, 0.625)] {
            let (j, k) = ((s * m as f64) as usize, (t * m as f64) as usize);
            // the increment over (t_{j-1}, t_j] enters at t_j
            let l = j.saturating_sub(1);
            let fd = euler_sensitivity(&grid, &drift, &path, l, k);
            worst = worst.max((fd - d[(k, l + 1)]).abs());
        }
        assert!(d[(3, 5)] == 0.0 && d[(4, 4)] == 1.0);
        errors.push(worst);
    }
    assert!(errors[0] < 0.1, "{errors:?}");
    assert!(errors[2] < errors[1] && errors[1] < errors[0], "{errors:?}");
    assert!(errors[2] < 5e-3, "{errors:?}");
}
