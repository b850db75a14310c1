use super::cfar::CfarHit;

/// Groups 8-connected hits and keeps the strongest cell of each group.
/// Output is ordered by (delay index, Doppler index) of the kept cells.
pub fn cluster_hits(hits: &[CfarHit], n_delay: usize, n_doppler: usize) -> Vec<CfarHit> {
    let mut grid = vec![usize::MAX; n_delay * n_doppler];
    for (i, h) in hits.iter().enumerate() {
        grid[h.delay_idx * n_doppler + h.doppler_idx] = i;
    }
    let mut seen = vec![false; hits.len()];
    let mut peaks = Vec::new();
    let mut stack = Vec::new();
    for start in 0..hits.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut best = start;
        while let Some(i) = stack.pop() {
            let h = &hits[i];
            if h.power > hits[best].power {
                best = i;
            }
            for dk in -1i64..=1 {
                for dm in -1i64..=1 {
                    let k = h.delay_idx as i64 + dk;
                    let m = h.doppler_idx as i64 + dm;
                    if k < 0 || m < 0 || k >= n_delay as i64 || m >= n_doppler as i64 {
                        continue;
                    }
                    let j = grid[k as usize * n_doppler + m as usize];
                    if j != usize::MAX && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        peaks.push(hits[best]);
    }
    peaks.sort_by_key(|h| (h.delay_idx, h.doppler_idx));
    peaks
}
