mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdot::geometry::{build_diagram, cell_clip, Cell, ConvexPolygon, EdgeLabel};
use sdot::{SiteSet, SupportRegion};

fn cell_volume(c: &Cell) -> f64 {
    c.volume().expect("exact cell")
}

/// Distance from `y` to the nearest facet plane of cell `i`.
fn facet_gap(sites: &SiteSet, z: &[f64], i: usize, y: &[f64]) -> f64 {
    (0..sites.len())
        .filter(|&j| j != i)
        .map(|j| {
            let n = sites.difference(i, j);
            let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = n.iter().zip(y).map(|(a, b)| a * b).sum();
            (dot - sites.offset(z, i, j)).abs() / norm
        })
        .fold(f64::INFINITY, f64::min)
}

fn in_exact_cell(c: &Cell, y: &[f64]) -> bool {
    match c {
        Cell::Empty => false,
        Cell::Interval { lo, hi } => *lo <= y[0] && y[0] <= *hi,
        Cell::Polygon(p) => p.contains([y[0], y[1]], 0.0),
        Cell::Implicit => unreachable!("exact diagram"),
    }
}

fn sites_2d() -> impl Strategy<Value = (SiteSet, Vec<f64>)> {
    (2usize..7)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((-0.5f64..1.5, -0.5f64..1.5), n),
                prop::collection::vec(-0.5f64..0.5, n),
            )
        })
        .prop_filter_map("distinct sites", |(pts, z)| {
            SiteSet::new(pts.into_iter().map(|(a, b)| vec![a, b]).collect())
                .ok()
                .filter(|s| {
                    (0..s.len()).all(|i| (i + 1..s.len()).all(|j| s.distance(i, j) > 1e-3))
                })
                .map(|s| (s, z))
        })
}

fn sites_1d() -> impl Strategy<Value = (SiteSet, Vec<f64>)> {
    (1usize..8)
        .prop_flat_map(|n| (prop::collection::vec(-1.0f64..2.0, n), prop::collection::vec(-0.5f64..0.5, n)))
        .prop_filter_map("distinct sites", |(pts, z)| {
            SiteSet::new(pts.into_iter().map(|a| vec![a]).collect())
                .ok()
                .filter(|s| (0..s.len()).all(|i| (i + 1..s.len()).all(|j| s.distance(i, j) > 1e-3)))
                .map(|s| (s, z))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cells_partition_the_square((sites, z) in sites_2d()) {
        let y = SupportRegion::unit_cube(2).unwrap();
        let d = build_diagram(&sites, &z, &y).unwrap();
        let total: f64 = d.cells().iter().map(cell_volume).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9, "total {total}");
    }

    #[test]
    fn cells_partition_the_interval((sites, z) in sites_1d()) {
        let y = SupportRegion::interval(0.0, 1.0).unwrap();
        let d = build_diagram(&sites, &z, &y).unwrap();
        let total: f64 = d.cells().iter().map(cell_volume).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9, "total {total}");
    }

    #[test]
    fn offsets_are_antisymmetric_cocycles((sites, z) in sites_2d()) {
        let n = sites.len();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((sites.offset(&z, i, j) + sites.offset(&z, j, i)).abs() <= 1e-12);
                for k in 0..n {
                    let lhs = sites.offset(&z, i, j) + sites.offset(&z, j, k);
                    prop_assert!((lhs - sites.offset(&z, i, k)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn shifting_potentials_changes_nothing((sites, z) in sites_2d(), c in -5.0f64..5.0, seed in any::<u64>()) {
        let y = SupportRegion::unit_cube(2).unwrap();
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let a = build_diagram(&sites, &z, &y).unwrap();
        let b = build_diagram(&sites, &shifted, &y).unwrap();
        for i in 0..sites.len() {
            for j in 0..sites.len() {
                prop_assert!((a.offset(i, j) - b.offset(i, j)).abs() <= 1e-12);
            }
            prop_assert!((cell_volume(a.cell(i)) - cell_volume(b.cell(i))).abs() <= 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let p = [rng.random::<f64>(), rng.random::<f64>()];
            if facet_gap(&sites, &z, sites.locate(&z, &p).unwrap(), &p) < 1e-10 {
                continue;
            }
            prop_assert_eq!(a.locate(&p).unwrap(), b.locate(&p).unwrap());
        }
    }
}

#[test]
fn locate_agrees_with_clipped_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let support = SupportRegion::unit_cube(2).unwrap();
    let mut checked = 0;
    for _ in 0..10 {
        let n = rng.random_range(2..7);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-0.5..1.5), rng.random_range(-0.5..1.5)]).collect();
        let sites = SiteSet::new(pts).unwrap();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        let d = build_diagram(&sites, &z, &support).unwrap();
        for _ in 0..1000 {
            let y = [rng.random::<f64>(), rng.random::<f64>()];
            let i = sites.locate(&z, &y).unwrap();
            if facet_gap(&sites, &z, i, &y) < 1e-10 {
                continue;
            }
            for k in 0..n {
                let inside = in_exact_cell(cell_clip(&d, k).unwrap(), &y);
                assert_eq!(inside, k == i, "y={y:?} k={k} locate={i}");
            }
            checked += 1;
        }
    }
    assert!(checked > 9_000);
}

#[test]
fn clipped_polygons_stay_convex_and_ccw() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let square = ConvexPolygon::rectangle([0.0, 0.0], [1.0, 1.0]).unwrap();
    for _ in 0..500 {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let normal = [a.cos(), a.sin()];
        let offset = rng.random_range(-1.0..1.0);
        if let Some(p) = square.clip(normal, offset, EdgeLabel::Site(0)) {
            // constructor revalidates convexity, orientation and duplicates
            assert!(ConvexPolygon::new(p.vertices().to_vec()).is_ok());
            assert!(p.area() > 0.0 && p.area() <= 1.0 + 1e-12);
        }
    }
}
