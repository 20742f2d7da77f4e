use parobst_core::field::ScalarField;
use parobst_core::grid::SpaceTimeGrid;
use parobst_core::weiss::{weiss_energy, WeissQuadrature};

fn main() {
    let quad = WeissQuadrature::<f64>::default();
    let h = 1.0 / 128.0;
    let k = 1.0 / 4096.0;
    let g = SpaceTimeGrid::new(1, 1.0, h, 1.0, k).unwrap().into_arc();
    // Sampled path: no evaluator attached.
    let u = ScalarField::sampled_only(&g, &|x: [f64; 2], _| 0.5 * x[0].max(0.0).powi(2));
    let f = ScalarField::sampled_only(&g, &|_, _| 1.0);
    for j in 1..=7 {
        let r = 0.5f64.powi(j);
        match weiss_energy(&u, &f, [0.0, 0.0], 0.0, r, &quad) {
            Ok(w) => println!("r = 2^-{} : W_sampled = {:.8}", j, w),
            Err(e) => println!("r = 2^-{} : error {}", j, e),
        }
    }
}
