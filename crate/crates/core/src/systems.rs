//! Preset plants.

use nalgebra::DMatrix;

use crate::lds::LinearSystem;

#[rustfmt::skip]
const ADMIRE_A: [f64; 25] = [
    1.5109, 0.0084, 0.0009, 0.8598, -0.0043,
    0.0, -0.0295, 0.0903, 0.0, -0.4500,
    0.0, -3.1070, -0.1427, 0.0, 2.7006,
    2.3057, 0.0097, 0.0006, 1.5439, -0.0029,
    0.0, 0.5000, 0.0125, 0.0, 0.4878,
];

#[rustfmt::skip]
const ADMIRE_B: [f64; 20] = [
    0.6981, -0.5388, -0.5367, 0.0029,
    0.0, -0.2031, 0.2031, 0.3912,
    0.0, -2.0768, 2.0768, -0.4667,
    1.8415, -1.4190, -1.4190, 0.0035,
    0.0, -0.1854, 0.1854, -0.7047,
];

/// Discretised ADMIRE aircraft model: five states, four single-input actuators,
/// each actuator owned by its own agent. Open-loop unstable.
pub fn admire() -> LinearSystem {
    let a = DMatrix::from_row_slice(5, 5, &ADMIRE_A);
    let b = DMatrix::from_row_slice(5, 4, &ADMIRE_B);
    let blocks = (0..4).map(|j| b.columns(j, 1).into_owned()).collect();
    LinearSystem::new(a, blocks).expect("ADMIRE dimensions are consistent")
}

/// Strongly stable two-state plant shared by two single-input agents.
pub fn desk_pair() -> LinearSystem {
    let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.5]);
    let b1 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
    let b2 = DMatrix::from_row_slice(2, 1, &[0.3, 1.0]);
    LinearSystem::new(a, vec![b1, b2]).expect("desk plant dimensions are consistent")
}

/// Scalar plant `x' = a x + b_1 u^1 + … + b_k u^k + w`.
pub fn scalar(a: f64, b: &[f64]) -> LinearSystem {
    let blocks = b.iter().map(|&bi| DMatrix::from_element(1, 1, bi)).collect();
    LinearSystem::new(DMatrix::from_element(1, 1, a), blocks).expect("scalar plant needs at least one input")
}
