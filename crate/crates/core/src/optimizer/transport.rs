//! Exact assignment of subfiles to equal-capacity bins.
//!
//! Every bin holds exactly `capacity` subfiles and `bins · capacity = N`.
//! An assignment is optimal iff its exchange graph (bin `a → b` weighted by
//! the best gain of moving one subfile of `a` into `b`) has no positive
//! cycle, so we start anywhere and cancel positive cycles until none remain.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct Transport {
    subfiles: usize,
    bins: usize,
    // weight[i * bins + b]
    weight: Vec<f64>,
    bin_of: Vec<usize>,
}

impl Transport {
    /// Greedy start: subfiles in order, each to its best bin with room.
    pub(crate) fn new(subfiles: usize, bins: usize, capacity: usize, weight: Vec<f64>) -> Self {
        debug_assert_eq!(subfiles, bins * capacity);
        debug_assert_eq!(weight.len(), subfiles * bins);
        let mut room = vec![capacity; bins];
        let mut bin_of = Vec::with_capacity(subfiles);
        for i in 0..subfiles {
            let row = &weight[i * bins..(i + 1) * bins];
            let b = (0..bins)
                .filter(|&b| room[b] > 0)
                .fold(None, |best: Option<usize>, b| match best {
                    Some(x) if row[x] >= row[b] => Some(x),
                    _ => Some(b),
                })
                .expect("total capacity equals the number of subfiles");
            room[b] -= 1;
            bin_of.push(b);
        }
        Transport { subfiles, bins, weight, bin_of }
    }

    /// Keeps the current assignment but replaces the weights.
    pub(crate) fn reweight(&mut self, weight: Vec<f64>) {
        debug_assert_eq!(weight.len(), self.subfiles * self.bins);
        self.weight = weight;
    }

    pub(crate) fn bin_of(&self) -> &[usize] {
        &self.bin_of
    }

    pub(crate) fn value(&self) -> f64 {
        self.bin_of.iter().enumerate().map(|(i, &b)| self.weight[i * self.bins + b]).sum()
    }

    fn w(&self, i: usize, b: usize) -> f64 {
        self.weight[i * self.bins + b]
    }

    /// Cancels positive cycles until the assignment is optimal; returns the
    /// number of cycles applied.
    pub(crate) fn optimize(&mut self) -> usize {
        let g = self.bins;
        let mut gain = vec![f64::NEG_INFINITY; g * g];
        let mut mover = vec![usize::MAX; g * g];
        let mut cycles = 0;
        loop {
            gain.fill(f64::NEG_INFINITY);
            for i in 0..self.subfiles {
                let a = self.bin_of[i];
                let base = self.w(i, a);
                for b in 0..g {
                    if b == a {
                        continue;
                    }
                    let d = self.w(i, b) - base;
                    if d > gain[a * g + b] {
                        gain[a * g + b] = d;
                        mover[a * g + b] = i;
                    }
                }
            }
            let cycle = self.two_cycle(&gain).or_else(|| self.long_cycle(&gain));
            match cycle {
                Some(bins) => {
                    let moves: Vec<(usize, usize)> = (0..bins.len())
                        .map(|t| {
                            let (a, b) = (bins[t], bins[(t + 1) % bins.len()]);
                            (mover[a * g + b], b)
                        })
                        .collect();
                    for (i, b) in moves {
                        self.bin_of[i] = b;
                    }
                    cycles += 1;
                }
                None => return cycles,
            }
        }
    }

    fn two_cycle(&self, gain: &[f64]) -> Option<Vec<usize>> {
        let g = self.bins;
        let mut best = (EPS, None);
        for a in 0..g {
            for b in a + 1..g {
                let v = gain[a * g + b] + gain[b * g + a];
                if v > best.0 {
                    best = (v, Some(vec![a, b]));
                }
            }
        }
        best.1
    }

    /// Longest-path Bellman-Ford from a virtual source joined to every bin.
    fn long_cycle(&self, gain: &[f64]) -> Option<Vec<usize>> {
        let g = self.bins;
        let mut dist = vec![0.0f64; g];
        let mut pred = vec![usize::MAX; g];
        let mut last = None;
        for _ in 0..g {
            last = None;
            for a in 0..g {
                for b in 0..g {
                    let e = gain[a * g + b];
                    if a != b && e.is_finite() && dist[a] + e > dist[b] + EPS {
                        dist[b] = dist[a] + e;
                        pred[b] = a;
                        last = Some(b);
                    }
                }
            }
            last?;
        }
        // still relaxing after g rounds: walk back into the cycle
        let mut v = last?;
        for _ in 0..g {
            v = pred[v];
        }
        let mut cycle = vec![v];
        let mut u = pred[v];
        while u != v {
            cycle.push(u);
            u = pred[u];
        }
        cycle.reverse();
        let total: f64 = (0..cycle.len()).map(|t| gain[cycle[t] * g + cycle[(t + 1) % cycle.len()]]).sum();
        (total > EPS).then_some(cycle)
    }
}
