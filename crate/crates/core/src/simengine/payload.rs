use std::hash::{Hash, Hasher};
use std::ops::Deref;
use std::sync::Arc;

use rustc_hash::FxHasher;

pub fn digest_of<T: Hash + ?Sized>(value: &T) -> u64 {
    let mut h = FxHasher::default();
    value.hash(&mut h);
    h.finish()
}

/// Immutable payload shared between envelopes, with its digest computed
/// once at construction. Cloning is a reference-count bump.
#[derive(Debug)]
pub struct Shared<T> {
    value: Arc<T>,
    digest: u64,
}

impl<T> Clone for Shared<T> {
    fn clone(&self) -> Self {
        Shared {
            value: Arc::clone(&self.value),
            digest: self.digest,
        }
    }
}

impl<T: Hash> Shared<T> {
    pub fn new(value: T) -> Self {
        let digest = digest_of(&value);
        Shared {
            value: Arc::new(value),
            digest,
        }
    }
}

impl<T> Shared<T> {
    /// Wraps a value whose digest the caller already knows (for types that
    /// are not `Hash`, such as hash maps).
    pub fn with_digest(value: T, digest: u64) -> Self {
        Shared {
            value: Arc::new(value),
            digest,
        }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }
}

impl<T> Deref for Shared<T> {
    type Target = T;

    fn deref(&self) -> &T {
        &self.value
    }
}

impl<T> Hash for Shared<T> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.digest);
    }
}

/// Concatenation of items gathered up a tree, built without copying:
/// joining a node's own item with its children's bundles is O(children).
#[derive(Debug)]
pub struct Bundle<T>(Arc<BundleNode<T>>);

#[derive(Debug)]
struct BundleNode<T> {
    own: T,
    parts: Vec<Bundle<T>>,
    len: usize,
    digest: u64,
}

impl<T> Clone for Bundle<T> {
    fn clone(&self) -> Self {
        Bundle(Arc::clone(&self.0))
    }
}

impl<T: Hash> Bundle<T> {
    pub fn leaf(own: T) -> Self {
        Self::join(own, Vec::new())
    }

    pub fn join(own: T, parts: Vec<Bundle<T>>) -> Self {
        let mut h = FxHasher::default();
        own.hash(&mut h);
        for p in &parts {
            h.write_u64(p.0.digest);
        }
        let len = 1 + parts.iter().map(|p| p.0.len).sum::<usize>();
        Bundle(Arc::new(BundleNode {
            own,
            parts,
            len,
            digest: h.finish(),
        }))
    }
}

impl<T> Bundle<T> {
    pub fn len(&self) -> usize {
        self.0.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn digest(&self) -> u64 {
        self.0.digest
    }

    /// Items in pre-order (own item first, then each part in order).
    pub fn iter(&self) -> BundleIter<'_, T> {
        BundleIter { stack: vec![self] }
    }
}

impl<T> Hash for Bundle<T> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.digest);
    }
}

pub struct BundleIter<'a, T> {
    stack: Vec<&'a Bundle<T>>,
}

impl<'a, T> Iterator for BundleIter<'a, T> {
    type Item = &'a T;

    fn next(&mut self) -> Option<&'a T> {
        let b = self.stack.pop()?;
        self.stack.extend(b.0.parts.iter().rev());
        Some(&b.0.own)
    }
}
