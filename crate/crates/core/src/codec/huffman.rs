//! Canonical Huffman coding of quantization-index streams.
//!
//! Codebook layout: varint symbol count, then for each symbol in canonical
//! order (code length, then symbol value) a zigzag varint symbol and a one
//! byte code length. The payload follows as MSB-first codes padded to a
//! byte boundary. A stream with a single distinct symbol spends one bit per
//! symbol.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use super::bits::{read_varint, unzigzag, write_varint, zigzag, BitReader, BitWriter};
use crate::error::{Error, Result};

/// Longest code the coder emits; deeper trees are flattened by count scaling.
pub const MAX_CODE_LEN: u8 = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanStream {
    pub codebook: Vec<u8>,
    pub payload: Vec<u8>,
}

impl HuffmanStream {
    pub fn len(&self) -> usize {
        self.codebook.len() + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        [self.codebook.as_slice(), self.payload.as_slice()].concat()
    }
}

fn frequencies(symbols: &[i32]) -> BTreeMap<i32, u64> {
    let mut freq = BTreeMap::new();
    for &s in symbols {
        *freq.entry(s).or_insert(0u64) += 1;
    }
    freq
}

fn tree_depths(counts: &[u64]) -> Vec<u8> {
    let n = counts.len();
    if n == 1 {
        return vec![1];
    }
    // nodes: leaves 0..n, internal nodes appended; ties broken by node id
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        counts.iter().enumerate().map(|(i, &c)| Reverse((c, i))).collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((ca, a)) = heap.pop().unwrap();
        let Reverse((cb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((ca + cb, next)));
        next += 1;
    }
    let root = next - 1;
    let mut depth = vec![0u8; 2 * n - 1];
    for node in (0..root).rev() {
        depth[node] = depth[parent[node]].saturating_add(1);
    }
    depth.truncate(n);
    depth
}

/// Code length per distinct symbol of `symbols`.
pub fn code_lengths(symbols: &[i32]) -> BTreeMap<i32, u8> {
    let freq = frequencies(symbols);
    let syms: Vec<i32> = freq.keys().copied().collect();
    let mut counts: Vec<u64> = freq.values().copied().collect();
    let mut depths = tree_depths(&counts);
    while depths.iter().any(|&d| d > MAX_CODE_LEN) {
        for c in &mut counts {
            *c = c.div_ceil(2);
        }
        depths = tree_depths(&counts);
    }
    syms.into_iter().zip(depths).collect()
}

/// `(symbol, length)` pairs in canonical order plus their codes.
fn canonical(lengths: &BTreeMap<i32, u8>) -> Vec<(i32, u8, u32)> {
    let mut order: Vec<(i32, u8)> = lengths.iter().map(|(&s, &l)| (s, l)).collect();
    order.sort_by_key(|&(s, l)| (l, s));
    let mut code = 0u32;
    let mut prev_len = 0u8;
    order
        .into_iter()
        .map(|(s, l)| {
            if prev_len != 0 {
                code = (code + 1) << (l - prev_len);
            }
            prev_len = l;
            (s, l, code)
        })
        .collect()
}

pub fn encode(symbols: &[i32]) -> Result<HuffmanStream> {
    if symbols.is_empty() {
        return Err(Error::Argument("cannot entropy-code an empty stream".into()));
    }
    let lengths = code_lengths(symbols);
    let table = canonical(&lengths);

    let mut codebook = Vec::new();
    write_varint(&mut codebook, table.len() as u64);
    for &(s, l, _) in &table {
        write_varint(&mut codebook, zigzag(s));
        codebook.push(l);
    }

    let codes: BTreeMap<i32, (u32, u32)> = table.iter().map(|&(s, l, c)| (s, (c, l as u32))).collect();
    let mut w = BitWriter::new();
    if table.len() == 1 {
        for _ in symbols {
            w.write(0, 1);
        }
    } else {
        for s in symbols {
            let (c, l) = codes[s];
            w.write(c, l);
        }
    }
    Ok(HuffmanStream {
        codebook,
        payload: w.finish(),
    })
}

/// Streaming decoder over a codebook followed by a payload.
pub struct Decoder<'a> {
    table: Vec<(i32, u8, u32)>,
    first: Vec<u32>,
    num: Vec<u32>,
    offset: Vec<usize>,
    header_len: usize,
    reader: BitReader<'a>,
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        let mut pos = 0;
        let n = read_varint(bytes, &mut pos)? as usize;
        if n == 0 {
            return Err(Error::Integrity("empty Huffman codebook".into()));
        }
        let mut lengths = BTreeMap::new();
        for _ in 0..n {
            let s = unzigzag(read_varint(bytes, &mut pos)?);
            let l = *bytes
                .get(pos)
                .ok_or_else(|| Error::Integrity("codebook truncated".into()))?;
            pos += 1;
            if l == 0 || l > MAX_CODE_LEN {
                return Err(Error::Integrity(format!("invalid code length {l}")));
            }
            lengths.insert(s, l);
        }
        let table = canonical(&lengths);

        // per-length first code, count and offset into the canonical list
        let max_len = table.last().map(|t| t.1).unwrap_or(1) as usize;
        let mut first = vec![0u32; max_len + 1];
        let mut num = vec![0u32; max_len + 1];
        let mut offset = vec![0usize; max_len + 1];
        for (i, &(_, l, c)) in table.iter().enumerate() {
            let l = l as usize;
            if num[l] == 0 {
                first[l] = c;
                offset[l] = i;
            }
            num[l] += 1;
        }
        Ok(Decoder {
            table,
            first,
            num,
            offset,
            header_len: pos,
            reader: BitReader::new(&bytes[pos..]),
        })
    }

    pub fn next_symbol(&mut self) -> Result<i32> {
        if self.table.len() == 1 {
            self.reader.bit()?;
            return Ok(self.table[0].0);
        }
        let mut code = 0u32;
        for len in 1..self.num.len() {
            code = (code << 1) | self.reader.bit()?;
            let (first, num) = (self.first[len], self.num[len]);
            if num > 0 && code >= first && code - first < num {
                return Ok(self.table[self.offset[len] + (code - first) as usize].0);
            }
        }
        Err(Error::Integrity("invalid Huffman code".into()))
    }

    /// Codebook plus payload bytes consumed so far.
    pub fn bytes_consumed(&self) -> usize {
        self.header_len + self.reader.bytes_consumed()
    }
}

/// Decodes `count` symbols; returns them with the number of bytes consumed.
pub fn decode(bytes: &[u8], count: usize) -> Result<(Vec<i32>, usize)> {
    let mut d = Decoder::new(bytes)?;
    let out = (0..count).map(|_| d.next_symbol()).collect::<Result<Vec<_>>>()?;
    Ok((out, d.bytes_consumed()))
}
