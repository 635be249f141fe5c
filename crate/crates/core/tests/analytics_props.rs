mod common;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rosetta_core::analytics::{leaf_stats, overlap_matrix};
use rosetta_core::registry::{Crosswalk, Registry};

use common::{brute_overlap, canonical_dir, random_overlap_case};

fn reordered(reg: &Registry, seed: u64) -> Registry {
    let mut links = reg.crosswalk().links.clone();
    links.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Registry::new(
        reg.ontology().clone(),
        reg.instruments().to_vec(),
        reg.rosetta_questions().to_vec(),
        Crosswalk { links },
    )
}

#[test]
fn leaf_stats_ignore_crosswalk_row_order() {
    let reg = Registry::load_dir(canonical_dir()).unwrap();
    let base = leaf_stats(&reg);
    for seed in 0..5 {
        assert_eq!(leaf_stats(&reordered(&reg, seed)), base);
    }
}

#[test]
fn overlap_matrix_matches_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let reg = random_overlap_case(&mut rng);
        let m = overlap_matrix(&reg);
        let (cells, totals) = brute_overlap(&reg);
        assert_eq!(m.instruments.len(), totals.len(), "case {case}");
        for (i, a) in m.instruments.iter().enumerate() {
            assert_eq!(m.totals[i], totals[a], "case {case} total {a}");
            for (j, b) in m.instruments.iter().enumerate() {
                assert_eq!(m.cells[i][j], cells[&(a.clone(), b.clone())], "case {case} {a}/{b}");
                assert_eq!(m.cells[i][j], m.cells[j][i]);
                assert!(m.cells[i][j] <= m.totals[i].min(m.totals[j]));
            }
        }
        assert_eq!(overlap_matrix(&reordered(&reg, case)), m);
    }
}
