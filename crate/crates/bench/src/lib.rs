//! Shared fixtures for the benchmarks.

use attrib_core::{cross_fit, generate_case, registry, Dataset, NuisanceFit, NuisanceModel};

/// Case 1 data of size `n` with cross-fitted logistic nuisances.
pub fn case1_fixture(n: usize) -> (Dataset, NuisanceFit) {
    let g = generate_case(&registry(1).expect("case 1"), n, 1).expect("generate");
    let nf = cross_fit(&g.dataset, 5, NuisanceModel::logistic(), None, 1).expect("cross-fit");
    (g.dataset, nf)
}
