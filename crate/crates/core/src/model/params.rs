use crate::error::{Error, Result};
use crate::numerics::{xavier_init, DenseMatrix, ParamSlot};
use crate::rng::{derived_rng, Stream};

/// Sizes of every parameter block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelShape {
    pub users: usize,
    pub items: usize,
    pub dim: usize,
    pub clusters: usize,
    pub hidden: usize,
    pub assign: usize,
}

impl ModelShape {
    /// Requires `dim ≥ hidden ≥ clusters ≥ assign ≥ 1`.
    pub fn validate(&self) -> Result<()> {
        let ModelShape {
            dim,
            clusters,
            hidden,
            assign,
            ..
        } = *self;
        if !(dim >= hidden && hidden >= clusters && clusters >= assign && assign >= 1) {
            return Err(Error::Config(format!(
                "sizes must satisfy d >= K_h >= K >= K_q >= 1, got d={dim}, K_h={hidden}, K={clusters}, K_q={assign}"
            )));
        }
        Ok(())
    }
}

/// Two-layer perceptron `relu(x·W1 + b1)·W2 + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub w1: DenseMatrix,
    pub b1: DenseMatrix,
    pub w2: DenseMatrix,
    pub b2: DenseMatrix,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: DenseMatrix::zeros(input, hidden),
            b1: DenseMatrix::zeros(1, hidden),
            w2: DenseMatrix::zeros(hidden, output),
            b2: DenseMatrix::zeros(1, output),
        }
    }

    fn xavier<R: rand::Rng>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w1: xavier_init(input, hidden, rng),
            b1: DenseMatrix::zeros(1, hidden),
            w2: xavier_init(hidden, output, rng),
            b2: DenseMatrix::zeros(1, output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }
}

/// Every trainable tensor of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct CcbieParams {
    /// `I×d` user embeddings.
    pub users: DenseMatrix,
    /// `J×d` item embeddings.
    pub items: DenseMatrix,
    /// `K×d` cluster centers.
    pub clusters: DenseMatrix,
    /// Refines item–cluster affinities.
    pub item_mlp: Mlp,
    /// Refines user–cluster preferences.
    pub user_mlp: Mlp,
}

pub const BLOCK_COUNT: usize = 11;

pub const BLOCK_NAMES: [&str; BLOCK_COUNT] = [
    "users",
    "items",
    "clusters",
    "item_mlp.w1",
    "item_mlp.b1",
    "item_mlp.w2",
    "item_mlp.b2",
    "user_mlp.w1",
    "user_mlp.b1",
    "user_mlp.w2",
    "user_mlp.b2",
];

pub const USERS: ParamSlot = ParamSlot(0);
pub const ITEMS: ParamSlot = ParamSlot(1);
pub const CLUSTERS: ParamSlot = ParamSlot(2);
pub const ITEM_MLP: [ParamSlot; 4] = [ParamSlot(3), ParamSlot(4), ParamSlot(5), ParamSlot(6)];
pub const USER_MLP: [ParamSlot; 4] = [ParamSlot(7), ParamSlot(8), ParamSlot(9), ParamSlot(10)];

impl CcbieParams {
    /// Xavier-uniform weights and zero biases, drawn from `seed`.
    pub fn init(shape: &ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = derived_rng(seed, Stream::Init, 0);
        let users = xavier_init(shape.users, shape.dim, &mut rng);
        let items = xavier_init(shape.items, shape.dim, &mut rng);
        let clusters = xavier_init(shape.clusters, shape.dim, &mut rng);
        let item_mlp = Mlp::xavier(shape.clusters, shape.hidden, shape.assign, &mut rng);
        let user_mlp = Mlp::xavier(shape.clusters, shape.hidden, shape.assign, &mut rng);
        Ok(Self {
            users,
            items,
            clusters,
            item_mlp,
            user_mlp,
        })
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            users: self.users.rows(),
            items: self.items.rows(),
            dim: self.users.cols(),
            clusters: self.clusters.rows(),
            hidden: self.item_mlp.w1.cols(),
            assign: self.item_mlp.w2.cols(),
        }
    }

    pub fn blocks(&self) -> [&DenseMatrix; BLOCK_COUNT] {
        [
            &self.users,
            &self.items,
            &self.clusters,
            &self.item_mlp.w1,
            &self.item_mlp.b1,
            &self.item_mlp.w2,
            &self.item_mlp.b2,
            &self.user_mlp.w1,
            &self.user_mlp.b1,
            &self.user_mlp.w2,
            &self.user_mlp.b2,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut DenseMatrix; BLOCK_COUNT] {
        [
            &mut self.users,
            &mut self.items,
            &mut self.clusters,
            &mut self.item_mlp.w1,
            &mut self.item_mlp.b1,
            &mut self.item_mlp.w2,
            &mut self.item_mlp.b2,
            &mut self.user_mlp.w1,
            &mut self.user_mlp.b1,
            &mut self.user_mlp.w2,
            &mut self.user_mlp.b2,
        ]
    }

    pub fn block_shapes(&self) -> Vec<(usize, usize)> {
        self.blocks().iter().map(|b| b.shape()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// All blocks concatenated in slot order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks()
            .iter()
            .flat_map(|b| b.data().iter().copied())
            .collect()
    }

    /// Overwrites every block from a vector produced by [`Self::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::dim(
                "set_flat",
                format!("{} values for {} parameters", flat.len(), self.parameter_count()),
            ));
        }
        let mut offset = 0;
        for block in self.blocks_mut() {
            let n = block.len();
            block.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> ModelShape {
        ModelShape {
            users: 6,
            items: 8,
            dim: 8,
            clusters: 3,
            hidden: 3,
            assign: 2,
        }
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let a = CcbieParams::init(&shape(), 1).unwrap();
        assert_eq!(a, CcbieParams::init(&shape(), 1).unwrap());
        assert_ne!(a, CcbieParams::init(&shape(), 2).unwrap());
        assert_eq!(a.shape(), shape());
        assert_eq!(a.item_mlp.b1.data(), &[0.0; 3]);
        assert_ne!(a.item_mlp.w1, a.user_mlp.w1);
    }

    #[test]
    fn size_ordering_is_enforced() {
        let bad = ModelShape {
            hidden: 2,
            ..shape()
        };
        assert!(CcbieParams::init(&bad, 0).is_err());
        let bad = ModelShape {
            assign: 4,
            ..shape()
        };
        assert!(CcbieParams::init(&bad, 0).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let a = CcbieParams::init(&shape(), 3).unwrap();
        let mut b = CcbieParams::init(&shape(), 4).unwrap();
        b.set_flat(&a.to_flat()).unwrap();
        assert_eq!(a, b);
        assert!(b.set_flat(&[0.0; 3]).is_err());
    }
}
