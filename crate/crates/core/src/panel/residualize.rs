use crate::error::{Error, Result};

/// What the residualizer actually fit: which control columns survived and
/// which were dropped as degenerate (constant or collinear).
#[derive(Debug, Clone, Default)]
pub struct ResidualizeInfo {
    pub kept_columns: Vec<String>,
    pub dropped_columns: Vec<String>,
}

/// Replaces each response column by the residual of an OLS on an intercept,
/// age, age squared, and gender indicators, all fit on the full sample.
/// Degenerate control columns are dropped (reported, not fatal); the
/// intercept guarantees residuals with mean zero.
pub fn residualize_wages(
    responses: &mut [&mut Vec<f64>],
    age: &[f64],
    gender: &[u8],
) -> Result<ResidualizeInfo> {
    let n = age.len();
    if n == 0 {
        return Err(Error::EmptySample("residualization".to_string()));
    }
    for r in responses.iter() {
        if r.len() != n {
            return Err(Error::Data(format!(
                "residualize: response length {} != sample size {n}",
                r.len()
            )));
        }
    }
    if gender.len() != n {
        return Err(Error::Data("residualize: gender length mismatch".to_string()));
    }

    let mut controls: Vec<(String, Vec<f64>)> = Vec::new();
    controls.push(("intercept".to_string(), vec![1.0; n]));
    controls.push(("age".to_string(), age.to_vec()));
    controls.push((
        "age_sq".to_string(),
        age.iter().map(|a| a * a).collect(),
    ));
    let mut levels: Vec<u8> = gender.to_vec();
    levels.sort_unstable();
    levels.dedup();
    // First level is the reference category.
    for &g in levels.iter().skip(1) {
        controls.push((
            format!("gender_{g}"),
            gender.iter().map(|&x| if x == g { 1.0 } else { 0.0 }).collect(),
        ));
    }

    // Modified Gram-Schmidt with a drop rule for degenerate columns; the
    // accepted orthonormal basis then projects each response.
    let mut info = ResidualizeInfo::default();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (name, mut col) in controls {
        let norm0 = l2(&col);
        for q in &basis {
            let c = dot(q, &col);
            axpy(&mut col, q, -c);
        }
        let norm = l2(&col);
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            info.dropped_columns.push(name);
            continue;
        }
        for v in col.iter_mut() {
            *v /= norm;
        }
        info.kept_columns.push(name);
        basis.push(col);
    }

    for response in responses.iter_mut() {
        for q in &basis {
            let c = dot(q, response);
            axpy(response, q, -c);
        }
    }
    Ok(info)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], x: &[f64], alpha: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_controls_reduce_to_demeaning() {
        let age = vec![40.0; 5];
        let gender = vec![1u8; 5];
        let mut wage = vec![1.0, 2.0, 3.0, 4.0, 10.0];
        let mean = wage.iter().sum::<f64>() / 5.0;
        let expected: Vec<f64> = wage.iter().map(|w| w - mean).collect();
        let info = residualize_wages(&mut [&mut wage], &age, &gender).unwrap();
        for (got, want) in wage.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(info.dropped_columns.contains(&"age".to_string()));
        assert!(info.dropped_columns.contains(&"age_sq".to_string()));
        assert_eq!(info.kept_columns, vec!["intercept".to_string()]);
    }

    #[test]
    fn perfect_fit_gives_zero_residuals() {
        let age: Vec<f64> = (0..50).map(|i| 20.0 + i as f64).collect();
        let gender: Vec<u8> = (0..50).map(|i| 1 + (i % 2) as u8).collect();
        let mut wage: Vec<f64> = age.iter().map(|a| 2.0 * a).collect();
        residualize_wages(&mut [&mut wage], &age, &gender).unwrap();
        for w in &wage {
            assert!(w.abs() < 1e-10, "residual {w}");
        }
    }

    #[test]
    fn residuals_orthogonal_to_controls() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let age: Vec<f64> = (0..n).map(|_| rng.random_range(18.0..65.0)).collect();
        let gender: Vec<u8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { 2 }).collect();
        let mut wage: Vec<f64> = (0..n)
            .map(|i| 5.0 + 0.3 * age[i] + 2.0 * gender[i] as f64 + rng.random::<f64>())
            .collect();
        let mut wage_prev = wage.clone();
        residualize_wages(&mut [&mut wage, &mut wage_prev], &age, &gender).unwrap();

        let mean: f64 = wage.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-10);
        let age_col = age.clone();
        let gender_col: Vec<f64> = gender.iter().map(|&g| g as f64).collect();
        for col in [&age_col, &gender_col] {
            let d = dot(&wage, col);
            assert!(
                d.abs() <= 1e-8 * l2(&wage).max(1.0) * l2(col),
                "dot product {d}"
            );
        }
    }

    #[test]
    fn single_gender_drops_indicator_with_warning() {
        let age: Vec<f64> = (0..10).map(|i| 20.0 + i as f64).collect();
        let gender = vec![1u8; 10];
        let mut wage: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let info = residualize_wages(&mut [&mut wage], &age, &gender).unwrap();
        assert!(info.kept_columns.iter().all(|c| !c.starts_with("gender")));
    }
}
