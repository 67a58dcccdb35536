use hjred::pathint::{compare_to_operator, compose, kernel_comparison, slice_kernel, sliced_kernel};
use hjred::quantize::Grid;

fn grid() -> Grid {
    Grid::new(128, 8.0).unwrap()
}

#[test]
fn sliced_kernel_matches_operator_exponential() {
    let c = kernel_comparison(1.0, 1.0, 1.0, 256, &grid()).unwrap();
    assert!(c.error <= 1e-3, "error {:e}", c.error);
    let ratio = c.ratio.unwrap();
    assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
}

#[test]
fn zero_time_is_the_identity_on_both_sides() {
    let k = sliced_kernel(1.0, 1.0, 0.0, 256, &grid()).unwrap();
    assert!(compare_to_operator(&k, 1.0, 1.0, 0.0).unwrap() <= 1e-12);
}

#[test]
fn einbein_enters_only_through_e_beta() {
    let a = sliced_kernel(1.0, 1.0, 1.0, 256, &grid()).unwrap();
    let b = sliced_kernel(1.0, 0.5, 2.0, 256, &grid()).unwrap();
    assert!(a.max_deviation(&b) <= 1e-10);
}

#[test]
fn composed_kernels_stay_symmetric_and_positive() {
    let k = sliced_kernel(1.0, 1.0, 1.0, 256, &grid()).unwrap();
    assert!(k.asymmetry() <= 1e-12 * k.matrix.amax());
    assert!(k.min_entry() > 0.0);
}

#[test]
fn composition_is_chapman_kolmogorov() {
    let g = grid();
    let db = 1e-3;
    let two = compose(&slice_kernel(1.0, 1.0, db, &g).unwrap(), 2).unwrap();
    let one = slice_kernel(1.0, 1.0, 2.0 * db, &g).unwrap();
    // Agreement up to the second-order term of a single slice.
    let scale = one.matrix.amax();
    assert!(two.max_deviation(&one) <= 1e-2 * scale, "{:e}", two.max_deviation(&one));
    let k = slice_kernel(1.0, 1.0, db, &g).unwrap();
    let left = compose(&k, 2).unwrap().then(&k).unwrap();
    let right = k.then(&compose(&k, 2).unwrap()).unwrap();
    assert!(left.max_deviation(&right) <= 1e-12 * scale);
    assert_eq!(compose(&k, 3).unwrap().slices, 3);
}
