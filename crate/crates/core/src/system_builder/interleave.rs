//! Lane-striped host layout: word `w` of element `e` sits in beat
//! `(e / lanes) * words + w`, lane `e % lanes`.

/// Elements of `words` scalars each, striped over `lanes`. A trailing
/// partial block is padded with `T::default()`.
pub fn interleave<T: Copy + Default>(data: &[T], words: usize, lanes: usize) -> Vec<T> {
    assert!(lanes > 0 && words > 0 && data.len().is_multiple_of(words));
    let elements = data.len() / words;
    let blocks = elements.div_ceil(lanes);
    let mut out = vec![T::default(); blocks * lanes * words];
    for e in 0..elements {
        let (b, l) = (e / lanes, e % lanes);
        for w in 0..words {
            out[(b * words + w) * lanes + l] = data[e * words + w];
        }
    }
    out
}

pub fn deinterleave<T: Copy + Default>(data: &[T], words: usize, lanes: usize, elements: usize) -> Vec<T> {
    assert!(lanes > 0 && words > 0);
    let mut out = Vec::with_capacity(elements * words);
    for e in 0..elements {
        let (b, l) = (e / lanes, e % lanes);
        for w in 0..words {
            out.push(data[(b * words + w) * lanes + l]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elements_stripe_lanes() {
        let data: Vec<u32> = (0..8).flat_map(|e| [e * 10, e * 10 + 1]).collect();
        let x = interleave(&data, 2, 4);
        assert_eq!(&x[..8], &[0, 10, 20, 30, 1, 11, 21, 31]);
        assert_eq!(deinterleave(&x, 2, 4, 8), data);
    }

    #[test]
    fn partial_block_is_padded() {
        let data = [1.0, 2.0, 3.0];
        let x = interleave(&data, 1, 2);
        assert_eq!(x, vec![1.0, 2.0, 3.0, 0.0]);
        assert_eq!(deinterleave(&x, 1, 2, 3), data);
    }
}
