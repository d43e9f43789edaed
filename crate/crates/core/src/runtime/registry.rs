//! Server-side store of objects handed out by reference.

use alloc::collections::BTreeMap;

use super::object::Object;

struct Entry {
    object: Object,
    refcount: u64,
}

/// Id → object table. Ids are even and never reused within a session;
/// odd ids belong to client callbacks.
#[derive(Default)]
pub struct Registry {
    entries: BTreeMap<u64, Entry>,
    by_identity: BTreeMap<usize, u64>,
    issued: u64,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Stores `object` and returns its id. Registering the same object
    /// again returns the same id with one more reference.
    pub fn register(&mut self, object: Object) -> u64 {
        let identity = object.identity();
        if let Some(id) = identity.and_then(|k| self.by_identity.get(&k)) {
            let id = *id;
            if let Some(e) = self.entries.get_mut(&id) {
                e.refcount += 1;
                return id;
            }
        }
        self.issued += 1;
        let id = self.issued * 2;
        self.entries.insert(id, Entry { object, refcount: 1 });
        if let Some(k) = identity {
            self.by_identity.insert(k, id);
        }
        id
    }

    pub fn get(&self, id: u64) -> Option<&Object> {
        self.entries.get(&id).map(|e| &e.object)
    }

    pub fn refcount(&self, id: u64) -> u64 {
        self.entries.get(&id).map_or(0, |e| e.refcount)
    }

    /// Drops one reference. Returns false for unknown ids.
    pub fn release(&mut self, id: u64) -> bool {
        let Some(e) = self.entries.get_mut(&id) else { return false };
        e.refcount -= 1;
        if e.refcount == 0 {
            let e = self.entries.remove(&id).expect("entry present");
            if let Some(k) = e.object.identity() {
                self.by_identity.remove(&k);
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_even_and_not_reused() {
        let mut r = Registry::new();
        let a = r.register(Object::f64(1.0));
        let b = r.register(Object::f64(1.0));
        assert_eq!((a, b), (2, 4));
        assert!(r.release(a));
        let c = r.register(Object::f64(1.0));
        assert_eq!(c, 6);
        assert!(!r.release(a));
    }

    #[test]
    fn same_object_shares_an_id() {
        let mut r = Registry::new();
        let obj = Object::str("x");
        let a = r.register(obj.clone());
        let b = r.register(obj);
        assert_eq!(a, b);
        assert_eq!(r.refcount(a), 2);
        r.release(a);
        assert_eq!(r.len(), 1);
        r.release(a);
        assert!(r.is_empty());
    }
}
