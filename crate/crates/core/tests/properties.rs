use permanent_bp::bench::kendall_distance;
use permanent_bp::{
    parse_matrix, serialize_matrix, MatrixFormat, Permutation, RngSpec, SquareMatrix,
};
use proptest::prelude::*;

fn quadratic_kendall(r1: &Permutation, r2: &Permutation) -> f64 {
    let m = r1.len();
    let mut discordant = 0u64;
    for i in 0..m {
        for j in i + 1..m {
            let a = r1.get(i) < r1.get(j);
            let b = r2.get(i) < r2.get(j);
            discordant += u64::from(a != b);
        }
    }
    discordant as f64 / (m * (m - 1) / 2) as f64
}

#[test]
fn fast_kendall_matches_quadratic_count() {
    let spec = RngSpec::new(1000);
    let mut rng = spec.rng().unwrap();
    for k in 0..1000 {
        let m = 2 + k % 60;
        let a = Permutation::random(m, &mut rng);
        let b = Permutation::random(m, &mut rng);
        assert_eq!(kendall_distance(&a, &b).unwrap(), quadratic_kendall(&a, &b));
    }
}

fn permutation(m: usize) -> impl Strategy<Value = Permutation> {
    Just((0..m).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::new(v).unwrap())
}

fn triple() -> impl Strategy<Value = (Permutation, Permutation, Permutation)> {
    (2usize..40).prop_flat_map(|m| (permutation(m), permutation(m), permutation(m)))
}

fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        0.0..50.0f64,
        (0.0..1.0f64).prop_map(|x| x * 1e-300),
        (1.0..10.0f64).prop_map(|x| x * 1e300),
        any::<u32>().prop_map(f64::from),
    ]
}

fn matrix() -> impl Strategy<Value = SquareMatrix> {
    (1usize..7).prop_flat_map(|n| {
        prop::collection::vec(entry(), n * n)
            .prop_map(move |data| SquareMatrix::from_vec(n, data).unwrap())
    })
}

proptest! {
    #[test]
    fn kendall_is_a_metric((a, b, c) in triple()) {
        let ab = kendall_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, kendall_distance(&b, &a).unwrap());
        prop_assert_eq!(kendall_distance(&a, &a).unwrap(), 0.0);
        prop_assert!((0.0..=1.0).contains(&ab));
        if a != b {
            prop_assert!(ab > 0.0);
        }
        let ac = kendall_distance(&a, &c).unwrap();
        let cb = kendall_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn serialize_then_parse_is_identity(m in matrix()) {
        for format in [MatrixFormat::DenseText, MatrixFormat::Csv, MatrixFormat::Json] {
            let bytes = serialize_matrix(&m, format);
            let back = parse_matrix(&bytes, format).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(serialize_matrix(&back, format), bytes);
        }
    }
}
