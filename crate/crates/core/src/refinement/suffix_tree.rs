//! Online generalized suffix tree (Ukkonen) over `u32` symbols.
//!
//! Strings are appended one after another, each followed by a unique
//! terminator, so the tree over the concatenation answers substring queries
//! for every inserted string at once.

use std::collections::HashMap;

type Sym = u64;

const TERMINATOR_BASE: Sym = 1 << 32;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    /// Exclusive end; `None` for leaves, which grow with the text.
    end: Option<usize>,
    link: usize,
    children: HashMap<Sym, usize>,
}

#[derive(Debug, Clone)]
pub struct SuffixTree {
    text: Vec<Sym>,
    nodes: Vec<Node>,
    active_node: usize,
    active_edge: usize,
    active_len: usize,
    remainder: usize,
    strings: usize,
}

impl Default for SuffixTree {
    fn default() -> Self {
        Self::new()
    }
}

impl SuffixTree {
    pub fn new() -> Self {
        SuffixTree {
            text: Vec::new(),
            nodes: vec![Node {
                start: 0,
                end: Some(0),
                link: 0,
                children: HashMap::new(),
            }],
            active_node: 0,
            active_edge: 0,
            active_len: 0,
            remainder: 0,
            strings: 0,
        }
    }

    pub fn string_count(&self) -> usize {
        self.strings
    }

    fn edge_len(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        n.end.unwrap_or(self.text.len()) - n.start
    }

    fn new_node(&mut self, start: usize, end: Option<usize>) -> usize {
        self.nodes.push(Node {
            start,
            end,
            link: 0,
            children: HashMap::new(),
        });
        self.nodes.len() - 1
    }

    fn extend(&mut self, sym: Sym) {
        self.text.push(sym);
        let i = self.text.len() - 1;
        self.remainder += 1;
        let mut last_new: Option<usize> = None;
        while self.remainder > 0 {
            if self.active_len == 0 {
                self.active_edge = i;
            }
            let c = self.text[self.active_edge];
            match self.nodes[self.active_node].children.get(&c).copied() {
                None => {
                    let leaf = self.new_node(i, None);
                    self.nodes[self.active_node].children.insert(c, leaf);
                    if let Some(l) = last_new.take() {
                        self.nodes[l].link = self.active_node;
                    }
                }
                Some(next) => {
                    let len = self.edge_len(next);
                    if self.active_len >= len {
                        self.active_edge += len;
                        self.active_len -= len;
                        self.active_node = next;
                        continue;
                    }
                    if self.text[self.nodes[next].start + self.active_len] == sym {
                        if let Some(l) = last_new.take() {
                            self.nodes[l].link = self.active_node;
                        }
                        self.active_len += 1;
                        break;
                    }
                    let split_start = self.nodes[next].start;
                    let split = self.new_node(split_start, Some(split_start + self.active_len));
                    self.nodes[self.active_node].children.insert(c, split);
                    let leaf = self.new_node(i, None);
                    self.nodes[split].children.insert(sym, leaf);
                    self.nodes[next].start += self.active_len;
                    let key = self.text[self.nodes[next].start];
                    self.nodes[split].children.insert(key, next);
                    if let Some(l) = last_new {
                        self.nodes[l].link = split;
                    }
                    last_new = Some(split);
                }
            }
            self.remainder -= 1;
            if self.active_node == 0 && self.active_len > 0 {
                self.active_len -= 1;
                self.active_edge = i + 1 - self.remainder;
            } else if self.active_node != 0 {
                self.active_node = self.nodes[self.active_node].link;
            }
        }
    }

    /// Appends one string.
    pub fn insert(&mut self, s: &[u32]) {
        for &x in s {
            self.extend(Sym::from(x));
        }
        self.extend(TERMINATOR_BASE + self.strings as Sym);
        self.strings += 1;
    }

    /// Whether `pattern` is a contiguous substring of some inserted string.
    pub fn contains(&self, pattern: &[u32]) -> bool {
        let mut node = 0;
        let mut k = 0;
        while k < pattern.len() {
            let Some(&child) = self.nodes[node].children.get(&Sym::from(pattern[k])) else {
                return false;
            };
            let n = &self.nodes[child];
            let end = n.end.unwrap_or(self.text.len());
            for j in n.start..end {
                if k == pattern.len() {
                    return true;
                }
                if self.text[j] != Sym::from(pattern[k]) {
                    return false;
                }
                k += 1;
            }
            node = child;
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(strings: &[Vec<u32>], p: &[u32]) -> bool {
        p.is_empty() || strings.iter().any(|s| s.windows(p.len()).any(|w| w == p))
    }

    #[test]
    fn classic_banana() {
        let mut t = SuffixTree::new();
        // b a n a n a
        t.insert(&[1, 0, 2, 0, 2, 0]);
        for p in [&[0, 2, 0][..], &[2, 0, 2], &[1, 0, 2, 0, 2, 0], &[0]] {
            assert!(t.contains(p), "{p:?}");
        }
        for p in [&[0, 1][..], &[2, 2], &[1, 0, 2, 0, 2, 0, 0]] {
            assert!(!t.contains(p), "{p:?}");
        }
    }

    #[test]
    fn no_match_across_strings() {
        let mut t = SuffixTree::new();
        t.insert(&[1, 2]);
        t.insert(&[3, 4]);
        assert!(!t.contains(&[2, 3]));
        assert!(t.contains(&[3, 4]));
    }

    proptest! {
        #[test]
        fn agrees_with_naive_scan(
            strings in prop::collection::vec(prop::collection::vec(0u32..3, 0..12), 0..6),
            queries in prop::collection::vec(prop::collection::vec(0u32..3, 0..6), 1..20),
        ) {
            let mut t = SuffixTree::new();
            for s in &strings {
                t.insert(s);
            }
            for q in &queries {
                prop_assert_eq!(t.contains(q), naive(&strings, q), "query {:?}", q);
            }
            // Every substring of every string is found.
            for s in &strings {
                for i in 0..s.len() {
                    for j in i + 1..=s.len() {
                        prop_assert!(t.contains(&s[i..j]));
                    }
                }
            }
        }
    }
}
