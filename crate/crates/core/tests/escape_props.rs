use arcdim_core::components::label_binary;
use arcdim_core::escape::{classify, render};
use arcdim_core::{ComplexBox, ComplexPoint, DynSetup, OrbitClass, PixelGrid, Polynomial};
use proptest::prelude::*;

fn union_find_count(w: usize, h: usize, bits: &[bool]) -> (usize, Vec<usize>) {
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut Vec<usize>, mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for r in 0..h {
        for col in 0..w {
            let i = r * w + col;
            if !bits[i] {
                continue;
            }
            for j in [(col + 1 < w).then(|| i + 1), (r + 1 < h).then(|| i + w)]
                .into_iter()
                .flatten()
            {
                if bits[j] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
    }
    let roots: Vec<usize> = (0..w * h).map(|i| find(&mut parent, i)).collect();
    let mut distinct: Vec<usize> = (0..w * h).filter(|&i| bits[i]).map(|i| roots[i]).collect();
    distinct.sort_unstable();
    distinct.dedup();
    (distinct.len(), roots)
}

proptest! {
    #[test]
    fn escape_radius_doubles_modulus(coeffs in prop::collection::vec(-3.0f64..3.0, 3..5), angle in 0.0f64..6.283, scale in 1.001f64..4.0) {
        prop_assume!(coeffs.last().unwrap().abs() > 0.05);
        let p = Polynomial::from_real(&coeffs).unwrap();
        let setup = DynSetup::new(p.clone()).unwrap();
        let z = ComplexPoint::from_polar(setup.radius * scale, angle);
        prop_assert!(p.eval(z).norm() >= 2.0 * z.norm() * (1.0 - 1e-12));
        prop_assert_eq!(classify(&setup, z), OrbitClass::Escaped(0));
    }

    #[test]
    fn real_polynomials_render_symmetrically(b in 0.5f64..2.5, eps in 0.0f64..0.2) {
        let p = Polynomial::cubic_family(eps, b).unwrap();
        let setup = DynSetup::new(p).unwrap().with_max_iter(64);
        let r = setup.radius;
        let img = render(&setup, ComplexBox::new(-r, r, -r, r).unwrap(), 24, 24).unwrap();
        // Pixel rows mirror about the real axis.
        for row in 0..12 {
            for col in 0..24 {
                prop_assert_eq!(img.get(col, row), img.get(col, 23 - row));
            }
        }
    }

    #[test]
    fn labels_agree_with_union_find(bits in prop::collection::vec(any::<bool>(), 12 * 9)) {
        let grid = PixelGrid::new(ComplexBox::new(0.0, 12.0, 0.0, 9.0).unwrap(), 12, 9).unwrap();
        let (labels, infos) = label_binary(&grid, |i| bits[i]);
        let (count, roots) = union_find_count(12, 9, &bits);
        prop_assert_eq!(infos.len(), count);
        for i in 0..bits.len() {
            prop_assert_eq!(labels[i] == 0, !bits[i]);
            for j in 0..bits.len() {
                if bits[i] && bits[j] {
                    prop_assert_eq!(labels[i] == labels[j], roots[i] == roots[j]);
                }
            }
        }
        prop_assert_eq!(infos.iter().map(|c| c.pixel_count).sum::<usize>(), bits.iter().filter(|&&b| b).count());
    }
}
