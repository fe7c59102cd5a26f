//! Ordered set of `u64` keys with logarithmic rank queries.
//!
//! An arena-backed treap whose priorities are a fixed hash of the key, so
//! the tree shape depends only on the key set.

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    key: u64,
    prio: u64,
    size: u32,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
pub struct RankSet {
    nodes: Vec<Node>,
    free: Vec<u32>,
    root: u32,
}

impl Default for RankSet {
    fn default() -> Self {
        Self::new()
    }
}

fn priority(key: u64) -> u64 {
    let mut z = key.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RankSet {
    pub fn new() -> Self {
        RankSet { nodes: Vec::new(), free: Vec::new(), root: NIL }
    }

    pub fn len(&self) -> usize {
        self.size(self.root) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.root == NIL
    }

    fn size(&self, n: u32) -> u32 {
        if n == NIL {
            0
        } else {
            self.nodes[n as usize].size
        }
    }

    fn update(&mut self, n: u32) {
        let (l, r) = {
            let node = &self.nodes[n as usize];
            (node.left, node.right)
        };
        self.nodes[n as usize].size = 1 + self.size(l) + self.size(r);
    }

    /// Splits `t` into keys `< key` and keys `>= key`.
    fn split(&mut self, t: u32, key: u64) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        if self.nodes[t as usize].key < key {
            let (l, r) = self.split(self.nodes[t as usize].right, key);
            self.nodes[t as usize].right = l;
            self.update(t);
            (t, r)
        } else {
            let (l, r) = self.split(self.nodes[t as usize].left, key);
            self.nodes[t as usize].left = r;
            self.update(t);
            (l, t)
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        if self.nodes[a as usize].prio > self.nodes[b as usize].prio {
            let r = self.merge(self.nodes[a as usize].right, b);
            self.nodes[a as usize].right = r;
            self.update(a);
            a
        } else {
            let l = self.merge(a, self.nodes[b as usize].left);
            self.nodes[b as usize].left = l;
            self.update(b);
            b
        }
    }

    pub fn contains(&self, key: u64) -> bool {
        let mut t = self.root;
        while t != NIL {
            let node = &self.nodes[t as usize];
            if key == node.key {
                return true;
            }
            t = if key < node.key { node.left } else { node.right };
        }
        false
    }

    /// Returns `false` if the key was already present.
    pub fn insert(&mut self, key: u64) -> bool {
        if self.contains(key) {
            return false;
        }
        let node = Node { key, prio: priority(key), size: 1, left: NIL, right: NIL };
        let idx = match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        let (l, r) = self.split(self.root, key);
        let l = self.merge(l, idx);
        self.root = self.merge(l, r);
        true
    }

    /// Returns `false` if the key was absent.
    pub fn remove(&mut self, key: u64) -> bool {
        if !self.contains(key) {
            return false;
        }
        let (l, r) = self.split(self.root, key);
        let (mid, r) = self.split(r, key + 1);
        debug_assert_eq!(self.size(mid), 1);
        self.free.push(mid);
        self.root = self.merge(l, r);
        true
    }

    /// 1-based position of `key` in ascending order.
    pub fn rank(&self, key: u64) -> Option<usize> {
        let mut t = self.root;
        let mut before = 0usize;
        while t != NIL {
            let node = &self.nodes[t as usize];
            if key < node.key {
                t = node.left;
            } else if key > node.key {
                before += self.size(node.left) as usize + 1;
                t = node.right;
            } else {
                return Some(before + self.size(node.left) as usize + 1);
            }
        }
        None
    }

    /// Key with 1-based rank `k`.
    pub fn select(&self, k: usize) -> Option<u64> {
        if k == 0 || k > self.len() {
            return None;
        }
        let mut t = self.root;
        let mut k = k;
        while t != NIL {
            let node = &self.nodes[t as usize];
            let left = self.size(node.left) as usize;
            if k <= left {
                t = node.left;
            } else if k == left + 1 {
                return Some(node.key);
            } else {
                k -= left + 1;
                t = node.right;
            }
        }
        None
    }

    pub fn to_vec(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = Vec::new();
        let mut t = self.root;
        while t != NIL || !stack.is_empty() {
            while t != NIL {
                stack.push(t);
                t = self.nodes[t as usize].left;
            }
            let n = stack.pop().expect("stack nonempty");
            out.push(self.nodes[n as usize].key);
            t = self.nodes[n as usize].right;
        }
        out
    }
}
