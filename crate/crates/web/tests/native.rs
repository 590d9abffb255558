//! The bindings are plain Rust underneath, so the happy paths run natively.

use widthtopo_web::{saddle_gradient, saddle_image, saddle_width, Diagram, Minimizer};

#[test]
fn minimizer_reaches_one_component() {
    let mut m = Minimizer::new("wt", 0.0625, 1).unwrap();
    assert_eq!(m.components(), 2);
    for _ in 0..10 {
        m.step(10).unwrap();
        if m.target_met() {
            break;
        }
    }
    assert_eq!(m.components(), 1);
    assert_eq!(m.pixels().len(), m.width() * m.height());
    assert!(m.iterations() <= 100);
}

#[test]
fn gradient_spreads_with_epsilon() {
    let support = |eps: f64| saddle_gradient(eps, 2).unwrap().iter().filter(|g| g.abs() > 1e-4).count();
    assert_eq!(saddle_image().len() % saddle_width(), 0);
    assert!(support(0.0) <= support(0.01));
    assert!(support(0.01) < support(0.25));
}

#[test]
fn diagram_betti_slider() {
    let d = Diagram::new("staircase").unwrap();
    assert_eq!(d.pairs().len(), 5 * 3);
    assert_eq!(d.betti(242.0 / 255.0), vec![3, 0]);
    assert_eq!(d.betti(0.5), vec![2, 1]);
    assert_eq!(d.pixels().len() % d.width(), 0);
}
