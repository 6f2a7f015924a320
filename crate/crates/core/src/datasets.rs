//! Reference tables used throughout the tests and the bundled data files.

use crate::table::{IncompleteTable, Validation};

fn build(y11: &[&[u64]], y12: &[u64], y21: &[u64], y22: u64) -> IncompleteTable {
    IncompleteTable::new(
        y11.iter().map(|r| r.to_vec()).collect(),
        y12.to_vec(),
        y21.to_vec(),
        y22,
        Validation::Strict,
    )
    .expect("reference table is valid")
}

/// Maternal smoking (rows: smoker, non-smoker) against birth weight
/// (columns: under 2500 g, at least 2500 g).
pub fn smoking_birthweight() -> IncompleteTable {
    build(
        &[&[4512, 21009], &[3394, 24132]],
        &[1049, 1135],
        &[142, 464],
        1224,
    )
}

/// Small 2×2 table with almost empty `Y2`-missing margins.
pub fn sparse_margins() -> IncompleteTable {
    build(&[&[100, 40], &[50, 1000]], &[1, 1], &[100, 10], 2)
}

/// [`smoking_birthweight`] with `y_2+12 = 750` and `y_+221 = 700`.
pub fn smoking_birthweight_modified() -> IncompleteTable {
    build(
        &[&[4512, 21009], &[3394, 24132]],
        &[1049, 750],
        &[142, 700],
        1224,
    )
}

/// Bone mineral density (rows) against family income (columns), 3×3.
pub fn bone_density_income() -> IncompleteTable {
    build(
        &[&[621, 290, 284], &[260, 131, 117], &[93, 30, 18]],
        &[135, 69, 27],
        &[456, 156, 266],
        45,
    )
}

/// [`bone_density_income`] with margins reduced so that no odds condition
/// flags a boundary, although every model still has one.
pub fn bone_density_income_modified() -> IncompleteTable {
    build(
        &[&[621, 290, 284], &[260, 131, 117], &[93, 30, 18]],
        &[135, 60, 20],
        &[456, 156, 125],
        45,
    )
}

/// [`bone_density_income_modified`] with `y_+121 = 366` and `y_3+12 = 15`;
/// both dominance conditions hold, yet every model is interior.
pub fn bone_density_income_interior() -> IncompleteTable {
    build(
        &[&[621, 290, 284], &[260, 131, 117], &[93, 30, 18]],
        &[135, 60, 15],
        &[366, 156, 125],
        45,
    )
}

/// All reference tables with their file stems.
pub fn all() -> Vec<(&'static str, IncompleteTable)> {
    vec![
        ("smoking_birthweight", smoking_birthweight()),
        ("sparse_margins", sparse_margins()),
        (
            "smoking_birthweight_modified",
            smoking_birthweight_modified(),
        ),
        ("bone_density_income", bone_density_income()),
        (
            "bone_density_income_modified",
            bone_density_income_modified(),
        ),
        (
            "bone_density_income_interior",
            bone_density_income_interior(),
        ),
    ]
}
