//! Strictly increasing multi-indices, lexicographic enumeration and permutation signs.

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

pub fn factorial(p: usize) -> f64 {
    (1..=p).map(|i| i as f64).product()
}

pub fn mask_of(idx: &[usize]) -> usize {
    idx.iter().fold(0usize, |m, &i| m | (1 << i))
}

/// Sorts `idx` and returns the sign of the sorting permutation, or `None` if an index repeats.
pub fn sort_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

/// Sign of the permutation that sorts the concatenation `a ++ b` of two disjoint increasing lists.
pub fn shuffle_sign(a: &[usize], b: &[usize]) -> f64 {
    let mut inversions = 0usize;
    for &x in a {
        inversions += b.iter().filter(|&&y| y < x).count();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// All increasing `p`-subsets of `0..n` in lexicographic order, with reverse lookup by bitmask.
#[derive(Clone, Debug)]
pub struct IndexSet {
    n: usize,
    p: usize,
    list: Vec<Vec<usize>>,
    pos: Vec<u32>,
}

impl IndexSet {
    pub fn new(n: usize, p: usize) -> Self {
        let mut list = Vec::with_capacity(binomial(n, p));
        let mut cur = Vec::with_capacity(p);
        fn rec(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == p {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, p, cur, out);
                cur.pop();
            }
        }
        if p <= n {
            rec(0, n, p, &mut cur, &mut list);
        }
        let mut pos = vec![u32::MAX; 1 << n];
        for (i, idx) in list.iter().enumerate() {
            pos[mask_of(idx)] = i as u32;
        }
        Self { n, p, list, pos }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.list[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.list.iter().map(|v| v.as_slice())
    }

    pub fn position_mask(&self, mask: usize) -> Option<usize> {
        match self.pos.get(mask) {
            Some(&p) if p != u32::MAX => Some(p as usize),
            _ => None,
        }
    }

    /// Position of an arbitrary index tuple together with the sign bringing it to increasing order.
    pub fn locate(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let (sorted, sign) = sort_sign(idx)?;
        self.position_mask(mask_of(&sorted)).map(|p| (p, sign))
    }

    pub fn complement(&self, i: usize) -> Vec<usize> {
        let m = mask_of(&self.list[i]);
        (0..self.n).filter(|j| m & (1 << j) == 0).collect()
    }
}

/// Calls `f` on every `p`-tuple over `0..n` (with repetition), in lexicographic order.
pub fn for_each_tuple(n: usize, p: usize, mut f: impl FnMut(&[usize])) {
    let mut t = vec![0usize; p];
    if p == 0 {
        f(&t);
        return;
    }
    if n == 0 {
        return;
    }
    loop {
        f(&t);
        let mut i = p;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < n {
                break;
            }
            t[i] = 0;
        }
    }
}
