use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EncodedReview;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairKind {
    SameUser,
    SameItem,
}

/// Two training reviews that share a user or an item, as indices into the
/// slice passed to [`build_pairs`]. Only the anchor's rating is a target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReviewPair {
    pub anchor: usize,
    pub companion: usize,
    pub kind: PairKind,
}

/// Cyclic successor of every member of its group after a seeded shuffle.
fn successors<'a>(keys: impl Iterator<Item = &'a str>, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, key) in keys.enumerate() {
        let g = *slot.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let mut next = vec![0; n];
    for group in &mut groups {
        group.shuffle(rng);
        for (pos, &member) in group.iter().enumerate() {
            next[member] = group[(pos + 1) % group.len()];
        }
    }
    next
}

/// One same-user and one same-item pair per review, so exactly
/// `2 * train.len()` pairs. A review alone in its group is paired with
/// itself.
pub fn build_pairs(train: &[EncodedReview], seed: u64) -> Vec<ReviewPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = train.len();
    let by_user = successors(train.iter().map(|r| r.user_id.as_str()), n, &mut rng);
    let by_item = successors(train.iter().map(|r| r.item_id.as_str()), n, &mut rng);
    let mut pairs = Vec::with_capacity(2 * n);
    for i in 0..n {
        pairs.push(ReviewPair {
            anchor: i,
            companion: by_user[i],
            kind: PairKind::SameUser,
        });
        pairs.push(ReviewPair {
            anchor: i,
            companion: by_item[i],
            kind: PairKind::SameItem,
        });
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(user: &str, item: &str) -> EncodedReview {
        EncodedReview {
            review_id: format!("{user}-{item}"),
            user_id: user.into(),
            item_id: item.into(),
            rating: 3.0,
            token_indices: vec![2],
            mask: vec![true],
        }
    }

    #[test]
    fn four_reviews_eight_pairs() {
        let train = vec![enc("u1", "i1"), enc("u1", "i2"), enc("u2", "i1"), enc("u2", "i2")];
        let pairs = build_pairs(&train, 1);
        assert_eq!(pairs.len(), 8);
        for p in &pairs {
            assert_ne!(p.anchor, p.companion);
        }
    }

    #[test]
    fn singleton_user_pairs_with_itself() {
        let train = vec![enc("solo", "i1"), enc("u2", "i1")];
        let pairs = build_pairs(&train, 5);
        let own = pairs
            .iter()
            .find(|p| p.anchor == 0 && p.kind == PairKind::SameUser)
            .unwrap();
        assert_eq!(own.companion, 0);
        let item = pairs
            .iter()
            .find(|p| p.anchor == 0 && p.kind == PairKind::SameItem)
            .unwrap();
        assert_eq!(item.companion, 1);
    }

    #[test]
    fn companions_cover_each_group() {
        // Following the successor chain inside a group visits every member.
        let train: Vec<_> = (0..5).map(|i| enc("u", &format!("i{i}"))).collect();
        let pairs = build_pairs(&train, 9);
        let mut at = 0;
        let mut seen = [false; 5];
        for _ in 0..5 {
            seen[at] = true;
            at = pairs[2 * at].companion;
        }
        assert!(seen.iter().all(|s| *s));
        assert_eq!(at, 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let train: Vec<_> = (0..30)
            .map(|i| enc(&format!("u{}", i % 4), &format!("i{}", i % 7)))
            .collect();
        assert_eq!(build_pairs(&train, 11), build_pairs(&train, 11));
        assert_ne!(build_pairs(&train, 11), build_pairs(&train, 12));
    }
}
