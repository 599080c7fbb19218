use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Table3;
use crate::error::{Error, Result};

/// Largest number of Alice (or Bob) deterministic strategies we are willing to enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;
/// Largest number of strategy pairs the brute-force oracle will visit.
pub const BRUTEFORCE_LIMIT: u128 = 100_000_000;

/// `base^exp`, saturating at `u128::MAX`.
fn saturating_pow(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}

/// `d_C^{I_A}`, saturating.
pub fn encoding_count(ia: usize, d_c: usize) -> u128 {
    saturating_pow(d_c, ia)
}

fn guard(what: &'static str, size: u128, limit: u128) -> Result<u64> {
    if size > limit {
        Err(Error::GuardExceeded { what, size, limit })
    } else {
        Ok(size as u64)
    }
}

/// Alice's deterministic map `x -> c`, numbered lexicographically with `x = 0` most significant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicEncoding {
    pub index: u64,
    pub map: Vec<usize>,
}

impl DeterministicEncoding {
    pub fn from_index(index: u64, ia: usize, d_c: usize) -> Self {
        let mut map = vec![0; ia];
        decode_into(index, d_c, &mut map);
        Self { index, map }
    }

    pub fn index_of(map: &[usize], d_c: usize) -> u64 {
        map.iter().fold(0u64, |acc, &c| acc * d_c as u64 + c as u64)
    }
}

fn decode_into(mut index: u64, base: usize, digits: &mut [usize]) {
    for d in digits.iter_mut().rev() {
        *d = (index % base as u64) as usize;
        index /= base as u64;
    }
}

/// Iterator over all `d_C^{I_A}` encodings in lexicographic order.
#[derive(Clone, Debug)]
pub struct Encodings {
    d_c: usize,
    next: u64,
    count: u64,
    map: Vec<usize>,
}

impl Iterator for Encodings {
    type Item = DeterministicEncoding;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let item = DeterministicEncoding {
            index: self.next,
            map: self.map.clone(),
        };
        self.next += 1;
        for d in self.map.iter_mut().rev() {
            *d += 1;
            if *d < self.d_c {
                break;
            }
            *d = 0;
        }
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Encodings {}

pub fn enumerate_encodings(ia: usize, d_c: usize) -> Result<Encodings> {
    if d_c == 0 {
        return Err(Error::InvalidArgument("d_C must be positive".into()));
    }
    let count = guard("encodings", encoding_count(ia, d_c), ENUMERATION_LIMIT)?;
    Ok(Encodings {
        d_c,
        next: 0,
        count,
        map: vec![0; ia],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Alice,
    Bob,
}

/// Enumerate Alice when `d_C^{I_A} ≤ O_B^{I_B·d_C}`, otherwise Bob.
pub fn choose_enumeration_side(ia: usize, ib: usize, ob: usize, d_c: usize) -> Side {
    let alice = encoding_count(ia, d_c);
    let bob = saturating_pow(ob, ib.saturating_mul(d_c));
    if alice <= bob {
        Side::Alice
    } else {
        Side::Bob
    }
}

/// Value of the best Bob response to encoding `map`: `Σ_{y,c} max_b Σ_{x: map(x)=c} γ(b|x,y)`.
///
/// Buckets start at zero and accumulate in ascending `x`; cells are summed `y`-major.
/// The brute-force oracle follows the same order, so both agree bit for bit.
pub(crate) fn alice_value(
    gamma: &Table3,
    d_c: usize,
    map: &[usize],
    buckets: &mut [f64],
    decoding: Option<&mut [usize]>,
) -> f64 {
    let (ib, ob) = (gamma.ib(), gamma.ob());
    buckets.iter_mut().for_each(|v| *v = 0.0);
    for (x, &c) in map.iter().enumerate() {
        for y in 0..ib {
            let cell = &mut buckets[(y * d_c + c) * ob..(y * d_c + c + 1) * ob];
            for (acc, g) in cell.iter_mut().zip(gamma.cell(x, y)) {
                *acc += g;
            }
        }
    }
    let mut total = 0.0;
    let mut decoding = decoding;
    for k in 0..ib * d_c {
        let cell = &buckets[k * ob..(k + 1) * ob];
        let mut best = 0;
        for b in 1..ob {
            if cell[b] > cell[best] {
                best = b;
            }
        }
        if let Some(d) = decoding.as_deref_mut() {
            d[k] = best;
        }
        total += cell[best];
    }
    total
}

/// Value of the best Alice response to decoding `dec` (cells `y·d_C + c`):
/// `Σ_x max_c Σ_y γ(dec(y,c)|x,y)`.
pub(crate) fn bob_value(gamma: &Table3, d_c: usize, dec: &[usize], encoding: Option<&mut [usize]>) -> f64 {
    let mut total = 0.0;
    let mut encoding = encoding;
    for x in 0..gamma.ia() {
        let mut best = (f64::NEG_INFINITY, 0);
        for c in 0..d_c {
            let mut s = 0.0;
            for y in 0..gamma.ib() {
                s += gamma.get(dec[y * d_c + c], x, y);
            }
            if s > best.0 {
                best = (s, c);
            }
        }
        if let Some(e) = encoding.as_deref_mut() {
            e[x] = best.1;
        }
        total += best.0;
    }
    total
}

/// Higher value first; ties go to the smaller index so the result is thread-count independent.
fn better(a: &(f64, u64), b: &(f64, u64)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// `C_d = max_λ Σ_{y,c} max_b Σ_x γ(b|x,y) D_A(c|x,λ)`: Bob best-responds in every `(y, c)` cell.
pub fn classical_bound(gamma: &Table3, d_c: usize) -> Result<f64> {
    classical_bound_with_strategy(gamma, d_c).map(|(v, _, _)| v)
}

/// [`classical_bound`] together with a maximizing encoding and Bob's decoding `(y·d_C + c) -> b`.
pub fn classical_bound_with_strategy(gamma: &Table3, d_c: usize) -> Result<(f64, DeterministicEncoding, Vec<usize>)> {
    if d_c == 0 {
        return Err(Error::InvalidArgument("d_C must be positive".into()));
    }
    let (ia, ib, ob) = gamma.shape();
    let count = guard("encodings", encoding_count(ia, d_c), ENUMERATION_LIMIT)?;
    let best = (0..count)
        .into_par_iter()
        .map_init(
            || (vec![0usize; ia], vec![0.0; ib * d_c * ob]),
            |(map, buckets), i| {
                decode_into(i, d_c, map);
                (alice_value(gamma, d_c, map, buckets, None), i)
            },
        )
        .min_by(better)
        .expect("at least one encoding");
    let enc = DeterministicEncoding::from_index(best.1, ia, d_c);
    let mut decoding = vec![0; ib * d_c];
    let mut buckets = vec![0.0; ib * d_c * ob];
    let v = alice_value(gamma, d_c, &enc.map, &mut buckets, Some(&mut decoding));
    debug_assert_eq!(v, best.0);
    Ok((v, enc, decoding))
}

/// Exhaustive maximum over all `(D_A, D_B)` pairs.
pub fn classical_bound_bruteforce(gamma: &Table3, d_c: usize) -> Result<f64> {
    if d_c == 0 {
        return Err(Error::InvalidArgument("d_C must be positive".into()));
    }
    let (ia, ib, ob) = gamma.shape();
    let cells = ib * d_c;
    let pairs = encoding_count(ia, d_c).saturating_mul(saturating_pow(ob, cells));
    guard("strategy pairs", pairs, BRUTEFORCE_LIMIT)?;
    let n_dec = saturating_pow(ob, cells) as u64;
    let mut best = f64::NEG_INFINITY;
    let mut dec = vec![0; cells];
    for enc in enumerate_encodings(ia, d_c)? {
        for j in 0..n_dec {
            decode_into(j, ob, &mut dec);
            let mut total = 0.0;
            for y in 0..ib {
                for c in 0..d_c {
                    let b = dec[y * d_c + c];
                    let mut s = 0.0;
                    for x in (0..ia).filter(|&x| enc.map[x] == c) {
                        s += gamma.get(b, x, y);
                    }
                    total += s;
                }
            }
            if total > best {
                best = total;
            }
        }
    }
    Ok(best)
}

/// A deterministic strategy pair proposed by pricing.
#[derive(Clone, Debug)]
pub(crate) struct PricedColumn {
    #[cfg_attr(not(test), allow(dead_code))]
    pub value: f64,
    pub encoding: Vec<usize>,
    pub decoding: Vec<usize>,
}

/// Up to `k` strategy pairs with `Σγ V > tol`, best first, plus the overall maximum of `Σγ V`.
pub(crate) fn price_columns(
    gamma: &Table3,
    d_c: usize,
    side: Side,
    tol: f64,
    k: usize,
) -> Result<(f64, Vec<PricedColumn>)> {
    let (ia, ib, ob) = gamma.shape();
    let cells = ib * d_c;
    let count = match side {
        Side::Alice => guard("encodings", encoding_count(ia, d_c), ENUMERATION_LIMIT)?,
        Side::Bob => guard("decodings", saturating_pow(ob, cells), ENUMERATION_LIMIT)?,
    };
    let value_at = |i: u64, scratch: &mut (Vec<usize>, Vec<f64>)| match side {
        Side::Alice => {
            decode_into(i, d_c, &mut scratch.0);
            alice_value(gamma, d_c, &scratch.0, &mut scratch.1, None)
        }
        Side::Bob => {
            decode_into(i, ob, &mut scratch.0);
            bob_value(gamma, d_c, &scratch.0, None)
        }
    };
    let scratch_len = match side {
        Side::Alice => ia,
        Side::Bob => cells,
    };
    let keep = |mut v: Vec<(f64, u64)>| {
        v.sort_by(better);
        v.truncate(k);
        v
    };
    let (max, top) = (0..count)
        .into_par_iter()
        .fold(
            || {
                (
                    (vec![0usize; scratch_len], vec![0.0; cells * ob]),
                    f64::NEG_INFINITY,
                    Vec::new(),
                )
            },
            |(mut scratch, max, mut top), i| {
                let v = value_at(i, &mut scratch);
                if v > tol {
                    top.push((v, i));
                    if top.len() >= 2 * k.max(1) {
                        top = keep(top);
                    }
                }
                (scratch, max.max(v), top)
            },
        )
        .map(|(_, m, t)| (m, t))
        .reduce(
            || (f64::NEG_INFINITY, Vec::new()),
            |(m1, mut t1), (m2, t2)| {
                t1.extend(t2);
                (m1.max(m2), keep(t1))
            },
        );
    let top = keep(top);
    let columns = top
        .into_iter()
        .map(|(value, i)| match side {
            Side::Alice => {
                let encoding = DeterministicEncoding::from_index(i, ia, d_c).map;
                let mut decoding = vec![0; cells];
                let mut buckets = vec![0.0; cells * ob];
                alice_value(gamma, d_c, &encoding, &mut buckets, Some(&mut decoding));
                PricedColumn {
                    value,
                    encoding,
                    decoding,
                }
            }
            Side::Bob => {
                let mut decoding = vec![0; cells];
                decode_into(i, ob, &mut decoding);
                let mut encoding = vec![0; ia];
                bob_value(gamma, d_c, &decoding, Some(&mut encoding));
                PricedColumn {
                    value,
                    encoding,
                    decoding,
                }
            }
        })
        .collect();
    Ok((max, columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{round_rng, uniform};

    fn random_gamma(ia: usize, ib: usize, ob: usize, seed: u64) -> Table3 {
        let mut rng = round_rng(seed, 0);
        Table3::from_fn(ia, ib, ob, |_, _, _| 2.0 * uniform(&mut rng) - 1.0)
    }

    #[test]
    fn encoding_counts_and_order() {
        assert_eq!(enumerate_encodings(2, 2).unwrap().count(), 4);
        assert_eq!(enumerate_encodings(6, 3).unwrap().len(), 729);
        assert_eq!(enumerate_encodings(1, 5).unwrap().count(), 5);
        let all: Vec<_> = enumerate_encodings(3, 2).unwrap().collect();
        assert_eq!(all[1].map, vec![0, 0, 1]);
        assert_eq!(all[4].map, vec![1, 0, 0]);
        for e in &all {
            assert_eq!(DeterministicEncoding::from_index(e.index, 3, 2), *e);
            assert_eq!(DeterministicEncoding::index_of(&e.map, 2), e.index);
        }
        assert!(matches!(enumerate_encodings(15, 3), Err(Error::GuardExceeded { .. })));
    }

    #[test]
    fn enumeration_side() {
        assert_eq!(choose_enumeration_side(6, 24, 2, 3), Side::Alice);
        assert_eq!(choose_enumeration_side(12, 1, 2, 3), Side::Bob);
        // 2^2 = 2^(1*2)
        assert_eq!(choose_enumeration_side(2, 1, 2, 2), Side::Alice);
        assert_eq!(choose_enumeration_side(1000, 1000, 1000, 1000), Side::Alice);
    }

    #[test]
    fn trivial_bounds() {
        assert_eq!(classical_bound(&Table3::zeros(3, 2, 2), 2).unwrap(), 0.0);
        let mut g = Table3::zeros(1, 1, 2);
        *g.get_mut(0, 0, 0) = 1.0;
        for d in 1..5 {
            assert_eq!(classical_bound(&g, d).unwrap(), 1.0);
            assert_eq!(classical_bound_bruteforce(&g, d).unwrap(), 1.0);
        }
    }

    #[test]
    fn fast_bound_matches_bruteforce_exactly() {
        for (seed, &(ia, ib, ob, d)) in [(3, 3, 2, 2), (2, 3, 3, 2), (4, 1, 3, 3)].iter().enumerate() {
            for k in 0..10 {
                let g = random_gamma(ia, ib, ob, 100 * seed as u64 + k);
                assert_eq!(
                    classical_bound(&g, d).unwrap(),
                    classical_bound_bruteforce(&g, d).unwrap()
                );
            }
        }
    }

    #[test]
    fn bob_side_pricing_agrees() {
        for k in 0..10 {
            let g = random_gamma(4, 2, 2, 7 + k);
            let cd = classical_bound(&g, 2).unwrap();
            let (ma, ca) = price_columns(&g, 2, Side::Alice, f64::NEG_INFINITY, 3).unwrap();
            let (mb, cb) = price_columns(&g, 2, Side::Bob, f64::NEG_INFINITY, 3).unwrap();
            assert_eq!(ma, cd);
            assert!((mb - cd).abs() < 1e-12);
            assert_eq!(ca.len(), 3);
            assert!(ca.windows(2).all(|w| w[0].value >= w[1].value));
            assert!((cb[0].value - cd).abs() < 1e-12);
        }
    }
}
