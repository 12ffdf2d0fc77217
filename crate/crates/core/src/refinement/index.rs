//! Containment index over the sequences of accepted clusters.

use std::collections::{BTreeSet, HashMap};

use super::suffix_tree::SuffixTree;
use crate::metrics::Token;

/// Answers whether a token string occurs contiguously inside any sequence
/// added so far.
pub trait SequenceIndex {
    fn insert(&mut self, tokens: &[Token]);
    fn contains(&self, tokens: &[Token]) -> bool;
}

#[derive(Debug, Default)]
struct Interner {
    ids: HashMap<Token, u32>,
}

impl Interner {
    fn intern(&mut self, t: &Token) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(t.clone()).or_insert(next)
    }

    /// `None` if some token was never interned, in which case nothing can
    /// contain the string.
    fn lookup(&self, tokens: &[Token]) -> Option<Vec<u32>> {
        tokens.iter().map(|t| self.ids.get(t).copied()).collect()
    }
}

/// Generalized suffix tree backed index.
#[derive(Debug, Default)]
pub struct SuffixTreeIndex {
    interner: Interner,
    tree: SuffixTree,
    seen: BTreeSet<Vec<u32>>,
}

impl SuffixTreeIndex {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SequenceIndex for SuffixTreeIndex {
    fn insert(&mut self, tokens: &[Token]) {
        let s: Vec<u32> = tokens.iter().map(|t| self.interner.intern(t)).collect();
        if self.seen.insert(s.clone()) {
            self.tree.insert(&s);
        }
    }

    fn contains(&self, tokens: &[Token]) -> bool {
        match self.interner.lookup(tokens) {
            Some(s) => self.tree.contains(&s),
            None => false,
        }
    }
}

/// Reference index: scans every stored string.
#[derive(Debug, Default)]
pub struct LinearScanIndex {
    strings: Vec<Vec<Token>>,
}

impl LinearScanIndex {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SequenceIndex for LinearScanIndex {
    fn insert(&mut self, tokens: &[Token]) {
        self.strings.push(tokens.to_vec());
    }

    fn contains(&self, tokens: &[Token]) -> bool {
        if tokens.is_empty() {
            return true;
        }
        self.strings.iter().any(|s| s.windows(tokens.len()).any(|w| w == tokens))
    }
}
