//! Gauss quadrature rules used by the assembly and indicator code.

/// Gauss-Legendre points and weights on [0, 1].
pub fn gauss_1d(order: usize) -> &'static [(f64, f64)] {
    const G2: [(f64, f64); 2] = [
        (0.5 - 0.288_675_134_594_812_9, 0.5),
        (0.5 + 0.288_675_134_594_812_9, 0.5),
    ];
    const G3: [(f64, f64); 3] = [
        (0.5 - 0.387_298_334_620_741_7, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + 0.387_298_334_620_741_7, 5.0 / 18.0),
    ];
    const G5: [(f64, f64); 5] = [
        (0.5 - 0.453_089_922_969_332_0, 0.118_463_442_528_094_54),
        (0.5 - 0.269_234_655_052_841_55, 0.239_314_335_249_683_24),
        (0.5, 0.284_444_444_444_444_44),
        (0.5 + 0.269_234_655_052_841_55, 0.239_314_335_249_683_24),
        (0.5 + 0.453_089_922_969_332_0, 0.118_463_442_528_094_54),
    ];
    match order {
        2 => &G2,
        3 => &G3,
        5 => &G5,
        _ => panic!("unsupported 1D Gauss order {order}"),
    }
}

/// Quadrature rule on the reference triangle, in barycentric coordinates.
/// Weights sum to 1; multiply by the physical triangle area.
pub fn triangle_rule(degree: usize) -> &'static [([f64; 3], f64)] {
    // degree 2: edge midpoints
    const T2: [([f64; 3], f64); 3] = [
        ([0.5, 0.5, 0.0], 1.0 / 3.0),
        ([0.0, 0.5, 0.5], 1.0 / 3.0),
        ([0.5, 0.0, 0.5], 1.0 / 3.0),
    ];
    // degree 5: 7-point rule (centroid + two symmetric orbits)
    const A1: f64 = 0.470_142_064_105_115_1;
    const W1: f64 = 0.132_394_152_788_506_25;
    const A2: f64 = 0.101_286_507_323_456_34;
    const W2: f64 = 0.125_939_180_544_827_15;
    const T5: [([f64; 3], f64); 7] = [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([1.0 - 2.0 * A2, A2, A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
    ];
    match degree {
        0..=2 => &T2,
        3..=5 => &T5,
        _ => panic!("unsupported triangle quadrature degree {degree}"),
    }
}

/// Merges two sorted breakpoint lists into their common refinement,
/// dropping near-duplicates (relative tolerance on the total span).
pub fn common_refinement(a: &[f64], b: &[f64], span: f64) -> Vec<f64> {
    let tol = 1e-12 * span.max(1e-300);
    let mut merged: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    merged.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(merged.len());
    for v in merged {
        match out.last() {
            Some(&last) if (v - last).abs() <= tol => {}
            _ => out.push(v),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral_1d(p: u32) -> f64 {
        1.0 / (p as f64 + 1.0)
    }

    #[test]
    fn gauss_1d_exactness() {
        for (order, max_deg) in [(2usize, 3u32), (3, 5), (5, 9)] {
            for p in 0..=max_deg {
                let q: f64 = gauss_1d(order).iter().map(|&(x, w)| w * x.powi(p as i32)).sum();
                assert!(
                    (q - monomial_integral_1d(p)).abs() < 1e-14,
                    "order {order} degree {p}: {q}"
                );
            }
        }
    }

    #[test]
    fn triangle_rule_exactness() {
        // integral of x^i y^j over the unit right triangle = i! j! / (i+j+2)!
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
        }
        for (deg_rule, max_deg) in [(2usize, 2u32), (5, 5)] {
            for i in 0..=max_deg {
                for j in 0..=(max_deg - i) {
                    let exact = fact(i) * fact(j) / fact(i + j + 2);
                    // reference triangle (0,0), (1,0), (0,1); area 1/2
                    let q: f64 = triangle_rule(deg_rule)
                        .iter()
                        .map(|&(bary, w)| {
                            let x = bary[1];
                            let y = bary[2];
                            0.5 * w * x.powi(i as i32) * y.powi(j as i32)
                        })
                        .sum();
                    assert!((q - exact).abs() < 1e-14, "rule {deg_rule} x^{i} y^{j}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn common_refinement_merges() {
        let a = [0.0, 0.5, 1.0];
        let b = [0.0, 0.25, 0.5 + 1e-15, 1.0];
        let m = common_refinement(&a, &b, 1.0);
        assert_eq!(m.len(), 4);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[1], 0.25);
        assert_eq!(m[3], 1.0);
    }
}
