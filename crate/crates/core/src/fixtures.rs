//! Reference (5,3) LETS used by the regression tests: two VNs of degree
//! three joined to three others (a K_{2,3} in the VN graph), each of the
//! three carrying one unsatisfied CN, laid out over three layers.

use crate::lets::{Lets, MisCheck, UnsatCheck};
use crate::state_space::{build_layer_matrices_with, Labeling, LayeredModel};

pub struct FiveThree {
    pub lets: Lets,
    /// CN -> layer position.
    pub layers: Vec<usize>,
}

// VNs 0..5; missatisfied CNs 0..6, unsatisfied CNs 6..9.
const MIS: [(usize, [usize; 2]); 6] = [(0, [0, 3]), (1, [1, 4]), (2, [1, 2]), (3, [0, 4]), (4, [0, 2]), (5, [1, 3])];
const UNSAT: [(usize, usize); 3] = [(6, 2), (7, 3), (8, 4)];
const LAYERS: [usize; 9] = [0, 0, 1, 1, 2, 2, 0, 1, 2];

pub fn five_three() -> FiveThree {
    FiveThree {
        lets: Lets {
            vns: (0..5).collect(),
            misatisfied: MIS.iter().map(|&(cn, vns)| MisCheck { cn, vns }).collect(),
            unsatisfied: UNSAT.iter().map(|&(cn, vn)| UnsatCheck { cn, vn }).collect(),
        },
        layers: LAYERS.to_vec(),
    }
}

impl FiveThree {
    pub fn layer_fn(&self) -> impl Fn(usize) -> usize + '_ {
        move |cn| self.layers[cn]
    }

    /// Labeling that walks the two degree-3 VNs first.
    pub fn natural_labeling(&self) -> Labeling {
        let pairs = [(0, 4), (0, 0), (0, 3), (1, 2), (1, 5), (1, 1), (2, 4), (2, 2), (3, 0), (3, 5), (4, 3), (4, 1)];
        Labeling::from_pairs(&self.lets, &pairs).unwrap()
    }

    /// Layer-ordered labeling with consecutive pairs.
    pub fn systematic_labeling(&self) -> Labeling {
        let pairs = [(0, 0), (3, 0), (4, 1), (1, 1), (2, 2), (1, 2), (0, 3), (4, 3), (0, 4), (2, 4), (3, 5), (1, 5)];
        Labeling::from_pairs(&self.lets, &pairs).unwrap()
    }

    pub fn layered_model(&self) -> LayeredModel {
        build_layer_matrices_with(&self.lets, &self.systematic_labeling(), self.layer_fn()).unwrap()
    }
}

/// Matrices printed for the reference set, 1-based column lists per row.
pub mod printed {
    use nalgebra::{DMatrix, DVector};

    pub fn ones(rows: &[&[usize]], ncols: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows.len(), ncols);
        for (i, r) in rows.iter().enumerate() {
            for &c in r.iter() {
                m[(i, c - 1)] = 1.0;
            }
        }
        m
    }

    /// Flooding model under the natural labeling: A, B, B_ex, C, D_ex.
    pub fn flooding_natural() -> [DMatrix<f64>; 5] {
        [
            ones(&[&[9, 11], &[7, 11], &[7, 9], &[10, 12], &[8, 12], &[8, 10], &[4], &[1], &[5], &[2], &[6], &[3]], 12),
            ones(&[&[1], &[1], &[1], &[2], &[2], &[2], &[3], &[3], &[4], &[4], &[5], &[5]], 5),
            ones(&[&[], &[], &[], &[], &[], &[], &[1], &[1], &[2], &[2], &[3], &[3]], 3),
            ones(&[&[7, 9, 11], &[8, 10, 12], &[1, 4], &[2, 5], &[3, 6]], 12),
            ones(&[&[], &[], &[1], &[2], &[3]], 3),
        ]
    }

    /// Flooding A, B, B_ex under the systematic labeling.
    pub fn flooding_systematic() -> [DMatrix<f64>; 3] {
        [
            ones(&[&[8, 10], &[12], &[7], &[5, 11], &[9], &[3, 11], &[2, 10], &[4], &[2, 8], &[6], &[1], &[3, 5]], 12),
            ones(&[&[1], &[4], &[5], &[2], &[3], &[2], &[1], &[5], &[1], &[3], &[4], &[2]], 5),
            ones(&[&[], &[2], &[3], &[], &[1], &[], &[], &[3], &[], &[1], &[2], &[]], 3),
        ]
    }

    /// Second-layer matrices: layer map, channel input, unsatisfied inputs
    /// from the previous and the current iteration.
    pub fn second_layer() -> [DMatrix<f64>; 4] {
        let [a, b, _] = flooding_systematic();
        let mut a2 = DMatrix::identity(12, 12);
        let mut b2 = DMatrix::zeros(12, 5);
        for i in 4..8 {
            a2.set_row(i, &a.row(i));
            b2.set_row(i, &b.row(i));
        }
        let mut prev = DMatrix::zeros(12, 3);
        prev[(7, 2)] = 1.0;
        let mut cur = DMatrix::zeros(12, 3);
        cur[(4, 0)] = 1.0;
        [a2, b2, prev, cur]
    }

    /// One-iteration transition matrix with unit gains.
    pub fn composite_transition() -> DMatrix<f64> {
        ones(
            &[
                &[8, 10], &[12], &[7], &[5, 11], &[9], &[7, 11], &[10, 12], &[5, 11], &[5, 11, 12], &[7, 11], &[8, 10],
                &[7, 9],
            ],
            12,
        )
    }

    /// Irreducible block and zero-column coupling block of its normal form.
    pub fn normal_form_blocks() -> (DMatrix<f64>, DMatrix<f64>) {
        let core = ones(&[&[4], &[5, 7], &[1, 6], &[1, 6, 7], &[2, 6], &[3, 5], &[2, 4]], 7);
        let prime = ones(&[&[3, 5], &[7], &[2], &[1, 6], &[2, 6]], 7);
        (core, prime)
    }

    pub const DOMINANT: f64 = 2.0136;

    /// Left and right dominant eigenvectors in normal-form order, 4 decimals.
    pub fn eigenvectors() -> (DVector<f64>, DVector<f64>) {
        let w = [0.0, 0.0, 0.0, 0.0, 0.0, 0.2838, 0.4027, 0.2525, 0.3189, 0.4525, 0.5085, 0.3584];
        let u = [0.3342, 0.2355, 0.2096, 0.2974, 0.3756, 0.2647, 0.4220, 0.2974, 0.5329, 0.3756, 0.3342, 0.4743];
        (DVector::from_row_slice(&w), DVector::from_row_slice(&u))
    }
}
