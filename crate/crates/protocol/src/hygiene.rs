//! Byte-level scan for leaked secrets.
//!
//! Key material is cut into windows of up to 32 bytes (stride 32, plus one
//! window aligned to its end), so any copy of at least 63 contiguous bytes
//! is found, not just whole copies. Plaintext vectors match only whole:
//! short runs of small integers also occur in public data (the rotation
//! step list of an evaluation key, for one). A 3-byte prefix bitmap keeps the sliding scan cheap.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

pub const WINDOW: usize = 32;

#[derive(Clone, Debug)]
pub struct Needle {
    pub label: String,
    pub bytes: Vec<u8>,
    window: usize,
}

impl Needle {
    /// Windowed: partial copies count.
    pub fn new(label: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            label: label.into(),
            bytes: bytes.into(),
            window: WINDOW,
        }
    }

    /// Only a complete copy counts.
    pub fn whole(label: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        let bytes = bytes.into();
        Self {
            label: label.into(),
            window: bytes.len(),
            bytes,
        }
    }

    /// The same needle as lowercase hex text.
    pub fn hex(&self) -> Self {
        Self {
            label: format!("{} (hex)", self.label),
            bytes: hex::encode(&self.bytes).into_bytes(),
            window: 2 * self.window,
        }
    }

    fn windows(&self) -> Vec<&[u8]> {
        let n = self.bytes.len();
        let w = n.min(self.window);
        if w == 0 {
            return Vec::new();
        }
        let mut out: Vec<&[u8]> = (0..=n - w).step_by(w).map(|i| &self.bytes[i..i + w]).collect();
        out.push(&self.bytes[n - w..]);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub haystack: String,
    pub needle: String,
    pub offset: usize,
}

struct Group<'a> {
    width: usize,
    prefix: Vec<u64>,
    windows: HashMap<&'a [u8], Vec<usize>>,
}

fn prefix_index(b: &[u8]) -> usize {
    match b.len() {
        0 => 0,
        1 => b[0] as usize,
        2 => b[0] as usize | (b[1] as usize) << 8,
        _ => b[0] as usize | (b[1] as usize) << 8 | (b[2] as usize) << 16,
    }
}

/// First hit of each needle in each haystack.
pub fn scan<'h>(haystacks: impl IntoIterator<Item = (&'h str, &'h [u8])>, needles: &[Needle]) -> Vec<Finding> {
    let mut groups: Vec<Group> = Vec::new();
    for (k, n) in needles.iter().enumerate() {
        for w in n.windows() {
            let g = match groups.iter_mut().position(|g| g.width == w.len()) {
                Some(i) => &mut groups[i],
                None => {
                    groups.push(Group {
                        width: w.len(),
                        prefix: vec![0; (1 << 24) / 64],
                        windows: HashMap::new(),
                    });
                    groups.last_mut().expect("pushed")
                }
            };
            let p = prefix_index(w);
            g.prefix[p / 64] |= 1 << (p % 64);
            g.windows.entry(w).or_default().push(k);
        }
    }
    let mut out = Vec::new();
    for (name, hay) in haystacks {
        let mut seen = HashSet::new();
        for g in &groups {
            if hay.len() < g.width {
                continue;
            }
            for i in 0..=hay.len() - g.width {
                let p = prefix_index(&hay[i..(i + 3).min(i + g.width)]);
                if g.prefix[p / 64] & (1 << (p % 64)) == 0 {
                    continue;
                }
                if let Some(ks) = g.windows.get(&hay[i..i + g.width]) {
                    for &k in ks {
                        if seen.insert(k) {
                            out.push(Finding {
                                haystack: name.to_string(),
                                needle: needles[k].label.clone(),
                                offset: i,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}
