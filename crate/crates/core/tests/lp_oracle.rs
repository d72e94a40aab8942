mod common;

use common::{coupling_cost, small_measure_battery, vertex_enumeration_min};
use uclab::coupling::worst_coupling_value;
use uclab::transport::solve_transport;

#[test]
fn worst_coupling_matches_vertex_enumeration() {
    for mu in small_measure_battery(300, 11) {
        let xs: Vec<f64> = mu.atoms().iter().map(|a| a.location).collect();
        let ws: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
        let oracle = vertex_enumeration_min(&ws, &coupling_cost(&xs));
        let lp = worst_coupling_value(&mu).unwrap();
        assert!((lp.value - oracle).abs() < 1e-9, "{mu:?}: lp {} oracle {oracle}", lp.value);
        assert!(lp.value <= lp.independent_value + 1e-12);
    }
}

#[test]
fn transport_matches_vertex_enumeration_on_random_costs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let m = rng.gen_range(1..=3);
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let cost: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = solve_transport(&w, &w, &cost).unwrap();
        assert!((sol.cost - vertex_enumeration_min(&w, &cost)).abs() < 1e-12);
    }
}
