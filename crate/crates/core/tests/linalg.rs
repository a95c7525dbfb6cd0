use approx::assert_relative_eq;
use schrolab::linalg::{
    block_bidiagonal, cg_solve, dense_lu_solve, factorize, kron_all, SkylineLu, SparseMatrix,
};
use schrolab::{Error, Rational};

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

#[test]
fn kron_is_row_major() {
    // [[1,2],[3,4]] ⊗ [[0,1],[1,0]] written out by hand
    let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
    let b = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
    let k = a.kron(&b).unwrap();
    let want = [
        [0.0, 1.0, 0.0, 2.0],
        [1.0, 0.0, 2.0, 0.0],
        [0.0, 3.0, 0.0, 4.0],
        [3.0, 0.0, 4.0, 0.0],
    ];
    for (i, row) in want.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(k.get(i, j), v, "entry ({i},{j})");
        }
    }
}

#[test]
fn kron_all_matches_pairwise() {
    let t = SparseMatrix::tridiagonal(3, r(1, 6), r(2, 3), r(1, 6));
    let i2 = SparseMatrix::<Rational>::identity(2);
    let triple = kron_all(&[&t, &i2, &t]).unwrap();
    let pair = t.kron(&i2).unwrap().kron(&t).unwrap();
    assert_eq!(triple, pair);
    assert_eq!(triple.n_rows(), 18);
    assert!(kron_all::<f64>(&[]).is_err());
}

#[test]
fn matmul_against_dense_product() {
    let a = SparseMatrix::from_dense(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]]);
    let b = SparseMatrix::from_dense(&[vec![1.0, 4.0], vec![0.0, -1.0], vec![5.0, 0.0]]);
    let c = a.matmul(&b).unwrap();
    assert_eq!(c.to_dense(), vec![vec![11.0, 4.0], vec![0.0, -3.0]]);
    assert!(b.matmul(&b).is_err());
}

#[test]
fn exact_rational_matvec() {
    // first column of the inverse of the N = 3 Laplacian is (3/4, 1/2, 1/4)
    let a = SparseMatrix::tridiagonal(3, r(-1, 1), r(2, 1), r(-1, 1));
    assert_eq!(a.matvec(&[r(3, 4), r(1, 2), r(1, 4)]), vec![r(1, 1), r(0, 1), r(0, 1)]);
    assert_eq!(a.transpose(), a);
}

#[test]
fn direct_and_dense_lu_agree() {
    let n = 40;
    let a = SparseMatrix::tridiagonal(n, -1.0, 2.5, -1.0).add(&SparseMatrix::identity(n)).unwrap();
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    let x = factorize(&a).unwrap().solve(&b);
    let y = dense_lu_solve(&a, &b).unwrap();
    for (p, q) in x.iter().zip(&y) {
        assert_relative_eq!(p, q, epsilon = 1e-13);
    }
}

#[test]
fn cg_in_single_and_double_precision() {
    let a64 = SparseMatrix::tridiagonal(20, -1.0f64, 2.0, -1.0);
    let a32 = SparseMatrix::tridiagonal(20, -1.0f32, 2.0, -1.0);
    let (x64, s64) = cg_solve(&a64, &[1.0; 20], 1e-12).unwrap();
    let (x32, _) = cg_solve(&a32, &[1.0; 20], 1e-5).unwrap();
    // exact solution x_i = i(n+1-i)/2 with 1-based i
    for i in 0..20 {
        let e = ((i + 1) * (20 - i)) as f64 / 2.0;
        assert_relative_eq!(x64[i], e, max_relative = 1e-10);
        assert_relative_eq!(x32[i] as f64, e, max_relative = 1e-3);
    }
    assert!(s64.iterations <= 20);
}

#[test]
fn cg_reports_negative_curvature() {
    let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
    match cg_solve(&a, &[0.0, 1.0], 1e-12) {
        Err(Error::NegativeCurvature { direction, .. }) => assert_eq!(direction.len(), 2),
        other => panic!("expected negative curvature, got {other:?}"),
    }
}

#[test]
fn singular_pivot_is_reported() {
    let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
    assert!(matches!(SkylineLu::factor(&a), Err(Error::Singular { .. })));
}

#[test]
fn block_bidiagonal_layout() {
    let a = SparseMatrix::from_dense(&[vec![2.0]]);
    let b = SparseMatrix::from_dense(&[vec![1.0]]);
    let l = block_bidiagonal(&a, &b, 3).unwrap();
    assert_eq!(
        l.to_dense(),
        vec![vec![2.0, 0.0, 0.0], vec![-1.0, 2.0, 0.0], vec![0.0, -1.0, 2.0]]
    );
}

#[test]
fn dump_format_is_one_based_scientific() {
    let a = SparseMatrix::from_dense(&[vec![0.5, 0.0], vec![-2.0, 1.0]]);
    let mut buf = Vec::new();
    a.write_dump(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("2 2 3"));
    let first: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(&first[..2], &["1", "1"]);
    assert!(first[2].contains('e'), "value not in scientific notation: {}", first[2]);
    let back = SparseMatrix::<f64>::read_dump(buf.as_slice()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn sparsity_and_max_entry() {
    let a = SparseMatrix::tridiagonal(5, -1.0, 4.0, -1.0);
    assert_eq!(a.sparsity(), 3);
    assert_eq!(a.sparsity_over([0usize, 4]), 2);
    assert_eq!(a.max_entry(), 4.0);
    assert!(a.check_symmetric());
}
