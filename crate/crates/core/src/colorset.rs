//! Fixed-capacity bitset over colors `1..=cap`.

use rand::Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ColorSet {
    words: Vec<u64>,
    len: usize,
    cap: u32,
}

impl ColorSet {
    pub fn empty(cap: u32) -> Self {
        ColorSet { words: vec![0; (cap as usize + 64) / 64], len: 0, cap }
    }

    /// All colors `1..=cap`.
    pub fn full(cap: u32) -> Self {
        let mut s = Self::empty(cap);
        for c in 1..=cap {
            s.insert(c);
        }
        s
    }

    /// Colors `lo..=hi`, clipped to the capacity.
    pub fn range(cap: u32, lo: u32, hi: u32) -> Self {
        let mut s = Self::empty(cap);
        for c in lo.max(1)..=hi.min(cap) {
            s.insert(c);
        }
        s
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, c: u32) -> bool {
        c >= 1 && c <= self.cap && self.words[c as usize / 64] >> (c % 64) & 1 == 1
    }

    pub fn insert(&mut self, c: u32) -> bool {
        if c == 0 || c > self.cap || self.contains(c) {
            return false;
        }
        self.words[c as usize / 64] |= 1 << (c % 64);
        self.len += 1;
        true
    }

    pub fn remove(&mut self, c: u32) -> bool {
        if !self.contains(c) {
            return false;
        }
        self.words[c as usize / 64] &= !(1 << (c % 64));
        self.len -= 1;
        true
    }

    pub fn intersect(&self, other: &ColorSet) -> ColorSet {
        let mut out = ColorSet::empty(self.cap.min(other.cap));
        for (i, w) in out.words.iter_mut().enumerate() {
            *w = self.words.get(i).copied().unwrap_or(0) & other.words.get(i).copied().unwrap_or(0);
        }
        out.len = out.words.iter().map(|w| w.count_ones() as usize).sum();
        out
    }

    pub fn intersection_len(&self, other: &ColorSet) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    /// The `k`-th smallest member, 0-based.
    pub fn nth(&self, mut k: usize) -> Option<u32> {
        for (i, &w) in self.words.iter().enumerate() {
            let ones = w.count_ones() as usize;
            if k < ones {
                let mut w = w;
                for _ in 0..k {
                    w &= w - 1;
                }
                return Some(i as u32 * 64 + w.trailing_zeros());
            }
            k -= ones;
        }
        None
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u32> {
        if self.len == 0 {
            return None;
        }
        self.nth(rng.gen_range(0..self.len))
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some(i as u32 * 64 + b)
            })
        })
    }
}
