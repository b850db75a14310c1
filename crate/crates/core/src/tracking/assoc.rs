/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols");
    // potentials and matching are 1-based; index 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if row_of[j] > 0 {
            out[row_of[j] - 1] = j - 1;
        }
    }
    out
}

/// Cost standing in for "forbidden" pairs; large but finite so the solver stays exact.
const FORBIDDEN: f64 = 1e12;

/// Result of gated global-nearest-neighbour association.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Detection index per track, `None` for a miss.
    pub track_to_detection: Vec<Option<usize>>,
    pub unassigned_detections: Vec<usize>,
    /// Sum of gated costs of the chosen pairs plus `gate` per missed track.
    pub total_cost: f64,
}

/// Gated GNN. `cost[i][j]` is the squared Mahalanobis distance of detection
/// `j` to track `i`; pairs above `gate` are not allowed, and leaving a track
/// unassigned costs `gate`.
pub fn associate(cost: &[Vec<f64>], n_detections: usize, gate: f64) -> Assignment {
    let n = cost.len();
    let padded: Vec<Vec<f64>> = cost
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<f64> = row
                .iter()
                .map(|&c| if c.is_finite() && c <= gate { c } else { FORBIDDEN })
                .collect();
            r.extend((0..n).map(|d| if d == i { gate } else { FORBIDDEN }));
            r
        })
        .collect();
    let cols = hungarian(&padded);
    let mut used = vec![false; n_detections];
    let mut total_cost = 0.0;
    let track_to_detection = cols
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            if j < n_detections && padded[i][j] < FORBIDDEN {
                used[j] = true;
                total_cost += padded[i][j];
                Some(j)
            } else {
                total_cost += gate;
                None
            }
        })
        .collect();
    Assignment {
        track_to_detection,
        unassigned_detections: (0..n_detections).filter(|&j| !used[j]).collect(),
        total_cost,
    }
}
