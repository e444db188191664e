//! Fixed-order tensor-product Gauss–Legendre quadrature over boxes.

/// Nodes of the 8-point rule on [-1, 1] (positive half).
const NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

const WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Points per axis.
pub const ORDER: usize = 8;

fn rule() -> ([f64; ORDER], [f64; ORDER]) {
    let mut x = [0.0; ORDER];
    let mut w = [0.0; ORDER];
    for i in 0..4 {
        x[3 - i] = -NODES[i];
        w[3 - i] = WEIGHTS[i];
        x[4 + i] = NODES[i];
        w[4 + i] = WEIGHTS[i];
    }
    (x, w)
}

/// Integrates each of `f`'s outputs over the box `[lower, upper]`.
///
/// `f` writes `K` integrand values for a point; all `K` integrals share the
/// same nodes.
pub fn integrate_box<const K: usize>(
    lower: &[f64],
    upper: &[f64],
    mut f: impl FnMut(&[f64]) -> [f64; K],
) -> [f64; K] {
    let dim = lower.len();
    let (x, w) = rule();
    let half: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.5 * (u - l)).collect();
    let mid: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.5 * (u + l)).collect();
    let jacobian: f64 = half.iter().product();

    let mut acc = [0.0; K];
    let mut point = vec![0.0; dim];
    let total = ORDER.pow(dim as u32);
    for t in 0..total {
        let mut rest = t;
        let mut weight = jacobian;
        for axis in (0..dim).rev() {
            let i = rest % ORDER;
            rest /= ORDER;
            point[axis] = mid[axis] + half[axis] * x[i];
            weight *= w[i];
        }
        let values = f(&point);
        for (a, v) in acc.iter_mut().zip(values) {
            *a += weight * v;
        }
    }
    acc
}
