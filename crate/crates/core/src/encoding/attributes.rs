use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ReviewRecord;
use crate::error::{Error, Result};
use crate::numeric::{init_uniform_with, ParamId, ParamStore, Real, Tape, Tensor, Var};

pub const RATING_LEVELS: usize = 5;

/// Attribute values of one review, with ids already mapped to table rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeBundle {
    pub user: usize,
    pub item: usize,
    pub rating: u8,
    pub helpful_ratio: f64,
}

impl AttributeBundle {
    fn rating_index(&self) -> Result<usize> {
        match self.rating {
            1..=5 => Ok(self.rating as usize - 1),
            r => Err(Error::Encoding(format!("rating {r} outside 1..5"))),
        }
    }

    fn helpful_bin(&self, bins: usize) -> usize {
        ((self.helpful_ratio.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
    }
}

/// Sorted user and item ids mapped to dense indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdTables {
    pub users: Vec<String>,
    pub items: Vec<String>,
    #[serde(skip)]
    user_index: HashMap<String, usize>,
    #[serde(skip)]
    item_index: HashMap<String, usize>,
}

impl IdTables {
    pub fn from_records(records: &[ReviewRecord]) -> Self {
        let users: BTreeSet<&str> = records.iter().map(|r| r.user_id.as_str()).collect();
        let items: BTreeSet<&str> = records.iter().map(|r| r.item_id.as_str()).collect();
        Self::from_ids(
            users.into_iter().map(String::from).collect(),
            items.into_iter().map(String::from).collect(),
        )
    }

    pub fn from_ids(users: Vec<String>, items: Vec<String>) -> Self {
        let index = |v: &[String]| v.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        IdTables {
            user_index: index(&users),
            item_index: index(&items),
            users,
            items,
        }
    }

    /// Rebuild the lookup maps after deserialisation.
    pub fn reindexed(self) -> Self {
        Self::from_ids(self.users, self.items)
    }

    pub fn user(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn item(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    pub fn bundle(&self, r: &ReviewRecord) -> Result<AttributeBundle> {
        let user = self
            .user(&r.user_id)
            .ok_or_else(|| Error::Encoding(format!("unknown user `{}`", r.user_id)))?;
        let item = self
            .item(&r.item_id)
            .ok_or_else(|| Error::Encoding(format!("unknown item `{}`", r.item_id)))?;
        let b = AttributeBundle {
            user,
            item,
            rating: r.rating,
            helpful_ratio: r.helpful_ratio,
        };
        b.rating_index()?;
        Ok(b)
    }
}

/// Fixed-length attribute vector fed to the generator's input at every step:
/// `[user embedding : item embedding : rating one-hot : helpful ratio]`.
#[derive(Debug, Clone)]
pub struct GcnAttributeEncoder {
    pub user: ParamId,
    pub item: ParamId,
    pub dim: usize,
    pub use_helpful: bool,
}

impl GcnAttributeEncoder {
    pub fn new<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        num_users: usize,
        num_items: usize,
        dim: usize,
        use_helpful: bool,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(GcnAttributeEncoder {
            user: store.add("attr.user", init_uniform_with(&[num_users, dim], rng)?)?,
            item: store.add("attr.item", init_uniform_with(&[num_items, dim], rng)?)?,
            dim,
            use_helpful,
        })
    }

    /// Attach to tables already present in `store`.
    pub fn attach<F: Real>(store: &ParamStore<F>, use_helpful: bool) -> Result<Self> {
        let find = |n: &str| store.id(n).ok_or_else(|| Error::Format(format!("missing parameter `{n}`")));
        let user = find("attr.user")?;
        Ok(GcnAttributeEncoder {
            user,
            item: find("attr.item")?,
            dim: store.tensor(user).cols(),
            use_helpful,
        })
    }

    pub fn width(&self) -> usize {
        2 * self.dim + RATING_LEVELS + usize::from(self.use_helpful)
    }

    /// `B × width` attribute matrix for a batch.
    pub fn encode<F: Real>(&self, tape: &mut Tape<'_, F>, bundles: &[AttributeBundle]) -> Result<Var> {
        let users: Vec<usize> = bundles.iter().map(|b| b.user).collect();
        let items: Vec<usize> = bundles.iter().map(|b| b.item).collect();
        let extra = RATING_LEVELS + usize::from(self.use_helpful);
        let mut rest = vec![F::zero(); bundles.len() * extra];
        for (b, row) in bundles.iter().zip(rest.chunks_mut(extra)) {
            row[b.rating_index()?] = F::one();
            if self.use_helpful {
                row[RATING_LEVELS] = F::from_f64(b.helpful_ratio);
            }
        }
        let u = tape.param(self.user);
        let u = tape.gather_rows(u, &users)?;
        let i = tape.param(self.item);
        let i = tape.gather_rows(i, &items)?;
        let rest = tape.leaf(Tensor::new(vec![bundles.len(), extra], rest)?);
        tape.concat_cols(&[u, i, rest])
    }

    pub fn encode_values<F: Real>(&self, store: &ParamStore<F>, bundle: &AttributeBundle) -> Result<Vec<F>> {
        let mut tape = Tape::with_params(store);
        let v = self.encode(&mut tape, std::slice::from_ref(bundle))?;
        Ok(tape.value(v).values().to_vec())
    }
}

/// Per-attribute embeddings plus their fused `tanh(W·[x_1..x_k] + b)` encoding.
#[derive(Debug, Clone, Copy)]
pub struct MlpEncoding {
    /// `B·k × dim`, each example's `k` attribute embeddings on adjacent rows.
    pub grouped: Var,
    /// `B × out`.
    pub fused: Var,
}

/// One-hot attributes embedded by per-attribute tables and fused by a
/// single tanh layer.
#[derive(Debug, Clone)]
pub struct MlpAttributeEncoder {
    pub tables: Vec<ParamId>,
    pub fuse_w: ParamId,
    pub fuse_b: ParamId,
    pub dim: usize,
    pub out: usize,
    pub helpful_bins: Option<usize>,
}

const MLP_TABLES: [&str; 4] = ["attr.user", "attr.item", "attr.rating", "attr.helpful"];

impl MlpAttributeEncoder {
    /// Tables for user, item, rating and (optionally) binned helpfulness.
    #[allow(clippy::too_many_arguments)]
    pub fn new<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        num_users: usize,
        num_items: usize,
        helpful_bins: Option<usize>,
        dim: usize,
        out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut cards = vec![num_users, num_items, RATING_LEVELS];
        cards.extend(helpful_bins);
        let mut enc = Self::with_cardinalities(store, &cards, dim, out, rng)?;
        enc.helpful_bins = helpful_bins;
        Ok(enc)
    }

    /// Generic form over arbitrary categorical attributes.
    pub fn with_cardinalities<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        cardinalities: &[usize],
        dim: usize,
        out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut tables = Vec::with_capacity(cardinalities.len());
        for (k, &card) in cardinalities.iter().enumerate() {
            let name = MLP_TABLES
                .get(k)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("attr.{k}"));
            tables.push(store.add(name, init_uniform_with(&[card, dim], rng)?)?);
        }
        let k = cardinalities.len();
        Ok(MlpAttributeEncoder {
            tables,
            fuse_w: store.add("attr.fuse.w", init_uniform_with(&[k * dim, out], rng)?)?,
            fuse_b: store.add("attr.fuse.b", Tensor::zeros(&[1, out]))?,
            dim,
            out,
            helpful_bins: None,
        })
    }

    pub fn attach<F: Real>(store: &ParamStore<F>, use_helpful: bool) -> Result<Self> {
        let find = |n: &str| store.id(n).ok_or_else(|| Error::Format(format!("missing parameter `{n}`")));
        let n = if use_helpful { 4 } else { 3 };
        let tables = MLP_TABLES[..n].iter().map(|t| find(t)).collect::<Result<Vec<_>>>()?;
        let fuse_w = find("attr.fuse.w")?;
        Ok(MlpAttributeEncoder {
            dim: store.tensor(tables[0]).cols(),
            out: store.tensor(fuse_w).cols(),
            helpful_bins: use_helpful.then(|| store.tensor(tables[3]).rows()),
            tables,
            fuse_w,
            fuse_b: find("attr.fuse.b")?,
        })
    }

    pub fn num_attributes(&self) -> usize {
        self.tables.len()
    }

    /// Row index per attribute per bundle: `out[attribute][batch]`.
    pub fn indices(&self, bundles: &[AttributeBundle]) -> Result<Vec<Vec<usize>>> {
        let mut out = vec![
            bundles.iter().map(|b| b.user).collect(),
            bundles.iter().map(|b| b.item).collect(),
            bundles.iter().map(|b| b.rating_index()).collect::<Result<_>>()?,
        ];
        if let Some(bins) = self.helpful_bins {
            out.push(bundles.iter().map(|b| b.helpful_bin(bins)).collect());
        }
        Ok(out)
    }

    pub fn encode_indices<F: Real>(
        &self,
        tape: &mut Tape<'_, F>,
        indices: &[Vec<usize>],
    ) -> Result<MlpEncoding> {
        if indices.len() != self.tables.len() {
            return Err(Error::Dimension(format!(
                "{} attribute index lists for {} tables",
                indices.len(),
                self.tables.len()
            )));
        }
        let batch = indices[0].len();
        let parts = self
            .tables
            .iter()
            .zip(indices)
            .map(|(&t, idx)| {
                let t = tape.param(t);
                tape.gather_rows(t, idx)
            })
            .collect::<Result<Vec<_>>>()?;
        let concat = tape.concat_cols(&parts)?;
        let w = tape.param(self.fuse_w);
        let b = tape.param(self.fuse_b);
        let pre = tape.matmul(concat, w)?;
        let pre = tape.add_row(pre, b)?;
        let fused = tape.tanh(pre);
        // Interleave so each example's k embeddings are contiguous rows.
        let k = parts.len();
        let stacked = tape.concat_rows(&parts)?;
        let order: Vec<usize> = (0..batch)
            .flat_map(|b| (0..k).map(move |a| a * batch + b))
            .collect();
        let grouped = tape.gather_rows(stacked, &order)?;
        Ok(MlpEncoding { grouped, fused })
    }

    pub fn encode<F: Real>(
        &self,
        tape: &mut Tape<'_, F>,
        bundles: &[AttributeBundle],
    ) -> Result<MlpEncoding> {
        let idx = self.indices(bundles)?;
        self.encode_indices(tape, &idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bundle(rating: u8, ratio: f64) -> AttributeBundle {
        AttributeBundle {
            user: 1,
            item: 0,
            rating,
            helpful_ratio: ratio,
        }
    }

    fn gcn(use_helpful: bool) -> (ParamStore<f64>, GcnAttributeEncoder) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = GcnAttributeEncoder::new(&mut store, 3, 2, 64, use_helpful, &mut rng).unwrap();
        (store, enc)
    }

    #[test]
    fn gcn_vector_layout() {
        let (store, enc) = gcn(true);
        let v = enc.encode_values(&store, &bundle(4, 0.75)).unwrap();
        assert_eq!(v.len(), 134);
        assert_eq!(&v[..64], store.tensor(enc.user).row(1));
        assert_eq!(&v[64..128], store.tensor(enc.item).row(0));
        assert_eq!(&v[128..133], &[0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(v[133], 0.75);
    }

    #[test]
    fn gcn_without_helpful() {
        let (store, enc) = gcn(false);
        let v = enc.encode_values(&store, &bundle(1, 0.5)).unwrap();
        assert_eq!(v.len(), 133);
        assert_eq!(&v[128..], &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rating_outside_range_is_rejected() {
        let (store, enc) = gcn(true);
        assert!(matches!(
            enc.encode_values(&store, &bundle(0, 0.5)),
            Err(Error::Encoding(_))
        ));
    }

    #[test]
    fn mlp_matches_hand_evaluation() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc = MlpAttributeEncoder::with_cardinalities(&mut store, &[2, 2], 1, 2, &mut rng).unwrap();
        store.get_mut(enc.tables[0]).tensor = Tensor::from_rows(&[vec![0.5], vec![-1.0]]).unwrap();
        store.get_mut(enc.tables[1]).tensor = Tensor::from_rows(&[vec![2.0], vec![0.25]]).unwrap();
        store.get_mut(enc.fuse_w).tensor =
            Tensor::from_rows(&[vec![1.0, -0.5], vec![0.3, 0.2]]).unwrap();
        store.get_mut(enc.fuse_b).tensor = Tensor::from_rows(&[vec![0.1, -0.1]]).unwrap();
        let mut tape = Tape::with_params(&store);
        let m = enc.encode_indices(&mut tape, &[vec![1], vec![0]]).unwrap();
        let (x1, x2) = (-1.0f64, 2.0f64);
        let expect = [
            (x1 * 1.0 + x2 * 0.3 + 0.1).tanh(),
            (x1 * -0.5 + x2 * 0.2 - 0.1).tanh(),
        ];
        let got = tape.value(m.fused).values();
        for (g, e) in got.iter().zip(expect) {
            assert!((g - e).abs() < 1e-12);
        }
        assert_eq!(tape.value(m.grouped).values(), &[x1, x2]);
    }

    #[test]
    fn mlp_groups_rows_per_example() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = MlpAttributeEncoder::new(&mut store, 3, 2, Some(10), 4, 6, &mut rng).unwrap();
        let bundles = [bundle(5, 1.0), bundle(2, 0.05)];
        let idx = enc.indices(&bundles).unwrap();
        assert_eq!(idx[2], vec![4, 1]);
        assert_eq!(idx[3], vec![9, 0]);
        let mut tape = Tape::with_params(&store);
        let m = enc.encode(&mut tape, &bundles).unwrap();
        assert_eq!(tape.value(m.grouped).shape(), &[8, 4]);
        assert_eq!(tape.value(m.fused).shape(), &[2, 6]);
        assert_eq!(tape.value(m.grouped).row(6), store.tensor(enc.tables[2]).row(1));
    }

    #[test]
    fn id_tables_are_sorted_and_reject_unknown() {
        let recs = vec![
            ReviewRecord::new("u2", "b", 3, 1, 2, "x"),
            ReviewRecord::new("u1", "a", 5, 0, 1, "y"),
        ];
        let t = IdTables::from_records(&recs);
        assert_eq!(t.users, vec!["u1", "u2"]);
        assert_eq!(t.bundle(&recs[0]).unwrap().user, 1);
        let other = ReviewRecord::new("u9", "a", 5, 0, 1, "y");
        assert!(t.bundle(&other).is_err());
        let json = serde_json::to_string(&t).unwrap();
        let back: IdTables = serde_json::from_str::<IdTables>(&json).unwrap().reindexed();
        assert_eq!(back.item("b"), Some(1));
    }
}
