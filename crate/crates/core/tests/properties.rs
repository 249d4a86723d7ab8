use std::collections::BTreeMap;

use proptest::prelude::*;

use brownian_lt::experiments::config::{parse_f64_list, parse_key_values};
use brownian_lt::functionals::make_monomial;
use brownian_lt::local_time::{estimate_pl, occupation, SpatialGrid};
use brownian_lt::path_engine::{path_range, simulate_path, BrownianPath, SeedId};
use brownian_lt::statistics::v_stat;

const DX: f64 = 1.0 / 64.0;

fn small_path() -> impl Strategy<Value = BrownianPath> {
    prop::collection::vec(-0.5f64..0.5, 1..40).prop_map(|steps| {
        let mut values = vec![0.0];
        for s in steps {
            values.push(values.last().unwrap() + s);
        }
        BrownianPath::from_values(values).unwrap()
    })
}

fn symmetric_grid(path: &BrownianPath) -> SpatialGrid {
    let (lo, hi) = path_range(path);
    let m = lo.abs().max(hi);
    SpatialGrid::covering(-m, m, DX, 0.25).unwrap()
}

proptest! {
    #[test]
    fn pl_field_has_unit_mass(path in small_path()) {
        let field = estimate_pl(&path, &symmetric_grid(&path)).unwrap();
        prop_assert!((occupation(&field) - 1.0).abs() <= 1e-12);
        prop_assert!(field.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn pl_field_mirrors_with_the_path(path in small_path()) {
        let grid = symmetric_grid(&path);
        let mirrored = BrownianPath::from_values(path.values().iter().map(|v| -v).collect()).unwrap();
        let a = estimate_pl(&path, &grid).unwrap();
        let b = estimate_pl(&mirrored, &grid).unwrap();
        let scale = a.values().iter().cloned().fold(1.0, f64::max);
        for (x, y) in a.values().iter().zip(b.values().iter().rev()) {
            prop_assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn lattice_translation_preserves_statistics(path in small_path(), cells in -200i64..200, k in 1usize..16) {
        let field = estimate_pl(&path, &symmetric_grid(&path)).unwrap();
        let f = make_monomial(3).unwrap();
        let h = k as f64 * DX;
        let moved = field.translated(cells);
        prop_assert_eq!(v_stat(&field, &f, h).unwrap(), v_stat(&moved, &f, h).unwrap());
        let x = 0.1;
        let shifted = x + cells as f64 * DX;
        prop_assert!((field.value_at(x) - moved.value_at(shifted)).abs() <= 1e-12 * (1.0 + field.value_at(x)));
    }

    #[test]
    fn substreams_are_reproducible(master in any::<u64>(), index in 0u64..1000, n in 1usize..256) {
        let a = simulate_path(n, SeedId::new(master, index)).unwrap();
        let b = simulate_path(n, SeedId::new(master, index)).unwrap();
        prop_assert_eq!(a.values(), b.values());
        let other = simulate_path(n, SeedId::new(master, index + 1)).unwrap();
        prop_assert_ne!(a.values(), other.values());
    }

    #[test]
    fn key_value_files_round_trip(
        entries in prop::collection::btree_map("[a-z][a-z0-9-]{0,10}", "[A-Za-z0-9.,:+-][A-Za-z0-9.,:+ -]{0,12}[A-Za-z0-9.,:+-]", 0..8)
    ) {
        let text: String = entries.iter().map(|(k, v)| format!("  {k} =  {v}  # note\n\n")).collect();
        let parsed = parse_key_values(&text).unwrap();
        prop_assert_eq!(parsed, entries.clone());
        let underscored: String = entries.iter().map(|(k, v)| format!("{}={v}\n", k.replace('-', "_"))).collect();
        prop_assert_eq!(parse_key_values(&underscored).unwrap(), entries);
    }

    #[test]
    fn number_lists_round_trip(xs in prop::collection::vec(-1e6f64..1e6, 0..10)) {
        let text = xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        prop_assert_eq!(parse_f64_list(&text).unwrap(), xs);
    }
}

#[test]
fn duplicate_keys_after_normalization_are_rejected() {
    assert!(parse_key_values("u_grid = 0:1:3\nu-grid = 0:2:3\n").is_err());
    assert_eq!(parse_key_values("# only a comment\n").unwrap(), BTreeMap::new());
}
