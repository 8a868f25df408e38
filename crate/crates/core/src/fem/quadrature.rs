//! Quadrature rules on the reference triangle and the unit interval.

/// Barycentric point and weight; weights sum to one (multiply by the triangle area).
#[derive(Clone, Copy, Debug)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// 7-point symmetric rule, exact for polynomials of degree 5.
pub fn triangle_degree5() -> [TriPoint; 7] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w2 = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    [
        TriPoint { bary: [third, third, third], weight: 9.0 / 40.0 },
        TriPoint { bary: [a1, a1, b1], weight: w1 },
        TriPoint { bary: [a1, b1, a1], weight: w1 },
        TriPoint { bary: [b1, a1, a1], weight: w1 },
        TriPoint { bary: [a2, a2, b2], weight: w2 },
        TriPoint { bary: [a2, b2, a2], weight: w2 },
        TriPoint { bary: [b2, a2, a2], weight: w2 },
    ]
}

/// 4-point Gauss–Legendre on [0, 1]: `(t, weight)`, weights sum to one.
pub fn edge_gauss4() -> [(f64, f64); 4] {
    const X: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_8];
    [
        (0.5 * (1.0 - X[1]), 0.5 * W[1]),
        (0.5 * (1.0 - X[0]), 0.5 * W[0]),
        (0.5 * (1.0 + X[0]), 0.5 * W[0]),
        (0.5 * (1.0 + X[1]), 0.5 * W[1]),
    ]
}
