use crate::error::{Error, Result};

/// Kendall's tau-b by Knight's O(n log n) merge-sort algorithm.
///
/// Equals the pairwise concordance definition; ties are handled as in
/// tau-b, which coincides with tau-a for untied samples.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let n0 = (n * (n - 1) / 2) as f64;

    // Ties in x, and joint ties in (x, y).
    let mut ties_x = 0.0;
    let mut ties_xy = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let run = (j - i) as f64;
        ties_x += run * (run - 1.0) / 2.0;
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && y[idx[l]] == y[idx[k]] {
                l += 1;
            }
            let r = (l - k) as f64;
            ties_xy += r * (r - 1.0) / 2.0;
            k = l;
        }
        i = j;
    }

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf) as f64;

    let mut ties_y = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let run = (j - i) as f64;
        ties_y += run * (run - 1.0) / 2.0;
        i = j;
    }

    let denom = ((n0 - ties_x) * (n0 - ties_y)).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    let numer = n0 - ties_x - ties_y + ties_xy - 2.0 * swaps;
    Ok((numer / denom).clamp(-1.0, 1.0))
}

/// Quadratic pairwise-concordance tau-b; used as a reference.
pub fn kendall_tau_naive(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1.0;
            } else if dy == 0.0 {
                ty += 1.0;
            } else if dx * dy > 0.0 {
                conc += 1.0;
            } else {
                disc += 1.0;
            }
        }
    }
    let denom = ((conc + disc + tx) * (conc + disc + ty)).sqrt();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((conc - disc) / denom)
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "kendall_tau samples have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(
            "kendall_tau needs at least 2 observations".into(),
        ));
    }
    Ok(())
}

/// Sorts `v` ascending, returning the number of inversions (strict).
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left_buf, right_buf) = buf.split_at_mut(mid);
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        merge_count(l, left_buf) + merge_count(r, right_buf)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = v[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    swaps
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_concordance() {
        let x: Vec<f64> = (0..50).map(f64::from).collect();
        assert_eq!(kendall_tau(&x, &x).unwrap(), 1.0);
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau(&x, &rev).unwrap(), -1.0);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(kendall_tau(&[1.0], &[2.0]).is_err());
        assert!(kendall_tau(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn small_hand_example() {
        // Pairs: (1,1),(2,3),(3,2): concordant 2, discordant 1 -> 1/3.
        let t = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn merge_sort_matches_quadratic(
            pts in prop::collection::vec((0u8..6, 0u8..6), 2..40)
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1 as f64).collect();
            let fast = kendall_tau(&x, &y).unwrap();
            let slow = kendall_tau_naive(&x, &y).unwrap();
            prop_assert!((fast - slow).abs() < 1e-12, "fast {} slow {}", fast, slow);
        }
    }
}
