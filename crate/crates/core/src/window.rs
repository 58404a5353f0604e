use std::collections::VecDeque;
use std::ops::Index;

/// A deque addressed by absolute stream position.
///
/// Streaming stages append at the back and discard from the front while
/// keeping the positions of the retained items stable.
#[derive(Debug, Clone)]
pub(crate) struct IndexedDeque<T> {
    base: u64,
    items: VecDeque<T>,
}

impl<T> Default for IndexedDeque<T> {
    fn default() -> Self {
        IndexedDeque {
            base: 0,
            items: VecDeque::new(),
        }
    }
}

impl<T> IndexedDeque<T> {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, item: T) {
        self.items.push_back(item);
    }

    /// One past the absolute position of the newest item.
    pub(crate) fn end(&self) -> u64 {
        self.base + self.items.len() as u64
    }

    pub(crate) fn get(&self, pos: u64) -> Option<&T> {
        pos.checked_sub(self.base)
            .and_then(|i| self.items.get(i as usize))
    }

    /// Drops every item positioned before `pos`.
    pub(crate) fn trim_before(&mut self, pos: u64) {
        while self.base < pos && !self.items.is_empty() {
            self.items.pop_front();
            self.base += 1;
        }
    }

    pub(crate) fn range(&self, start: u64, end: u64) -> impl Iterator<Item = &T> {
        let lo = (start - self.base) as usize;
        let hi = (end - self.base) as usize;
        self.items.range(lo..hi)
    }
}

impl<T> Index<u64> for IndexedDeque<T> {
    type Output = T;

    fn index(&self, pos: u64) -> &T {
        self.get(pos)
            .unwrap_or_else(|| panic!("position {pos} outside retained window"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_survive_trimming() {
        let mut d = IndexedDeque::new();
        for i in 0..10u32 {
            d.push(i);
        }
        d.trim_before(4);
        assert_eq!(d.get(3), None);
        assert_eq!(d[4], 4);
        assert_eq!(d.end(), 10);
        assert_eq!(d.range(5, 8).copied().collect::<Vec<_>>(), vec![5, 6, 7]);
    }
}
