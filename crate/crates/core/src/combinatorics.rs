//! Binomials and lexicographic subset enumeration.

/// `C(n, k)` in 128-bit arithmetic, exact for every `n <= 64`. Returns 0 when `k > n`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `C(n, k)` as `usize`, panicking if it does not fit.
pub fn binomial_usize(n: usize, k: usize) -> usize {
    usize::try_from(binomial(n, k)).expect("binomial coefficient overflows usize")
}

/// Iterator over the `k`-subsets of `{1, ..., n}` in lexicographic order.
///
/// Each item is a sorted vector of 1-based members. `k = 0` yields the
/// empty set once; `k > n` yields nothing.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Subsets {
    pub fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((1..=k).collect()) } else { None };
        Subsets { n, current }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        // rightmost position that can still be incremented
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if next[pos] < self.n - (k - 1 - pos) {
                next[pos] += 1;
                for q in pos + 1..k {
                    next[q] = next[q - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
        Some(out)
    }
}

/// All `k`-subsets of `{1, ..., n}`, lexicographic.
pub fn subsets(n: usize, k: usize) -> Subsets {
    Subsets::new(n, k)
}

/// Zero-based rank of a sorted 1-based subset among the lexicographic
/// `k`-subsets of `{1, ..., n}`.
pub fn subset_rank(n: usize, subset: &[usize]) -> usize {
    let k = subset.len();
    let mut rank = 0usize;
    let mut prev = 0usize;
    for (pos, &v) in subset.iter().enumerate() {
        for skipped in prev + 1..v {
            rank += binomial_usize(n - skipped, k - pos - 1);
        }
        prev = v;
    }
    rank
}

pub fn gcd(a: usize, b: usize) -> usize {
    num_integer::gcd(a, b)
}

pub fn lcm(a: usize, b: usize) -> usize {
    num_integer::lcm(a, b)
}
