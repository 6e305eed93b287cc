use std::collections::BTreeSet;

use pmds_core::codec::{
    decode_erasures, repair_single, validate, CodewordArray, Encoder, ErasurePattern, PatternClass,
};
use pmds_core::construction_general::{AlphaMode, GeneralCode, GeneralOptions};
use pmds_core::construction_s2::{construct_pmds_s2, construct_sd_s2, ScalarS2Code};
use pmds_core::linalg::{self, Matrix};
use pmds_core::msr::{row_digits, row_from_digits, MsrParams};
use pmds_core::verifier::{verify_local_mds, verify_pmds, verify_sd, VerifyOptions};
use pmds_core::{ArrayCode, Field, FieldElement};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn digits_round_trip() {
    for a in 0..27 {
        let d = row_digits(a, 3, 3).unwrap();
        assert_eq!(row_from_digits(&d, 3), a);
    }
    assert_eq!(row_digits(5, 2, 4).unwrap(), vec![1, 0, 1, 0]);
    assert!(row_digits(16, 2, 4).is_err());
}

/// Erases one column of every row and recovers it by plain MDS decoding of
/// the row against its local parity checks.
fn mds_oracle(params: &MsrParams, rows: &[Vec<FieldElement>], failed: usize) -> Vec<FieldElement> {
    let f = params.field();
    (0..params.ell())
        .map(|a| {
            let h = params.local_parity_matrix(a);
            let known: Vec<usize> = (0..params.n()).filter(|&k| k != failed).collect();
            let rhs = Matrix::from_fn(params.r(), 1, |t, _| {
                known.iter().fold(f.zero(), |acc, &k| f.sub(&acc, &f.mul(h.get(t, k), &rows[a][k])))
            });
            linalg::solve(f, &h.select_columns(&[failed]), &rhs).unwrap().get(0, 0).clone()
        })
        .collect()
}

#[test]
fn msr_repair_matches_mds_oracle() {
    let code = construct_pmds_s2(1, 5, 3, 4, None).unwrap();
    let local = code.local_code().clone();
    let enc = Encoder::new(&code).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let cw = enc.encode(&enc.random_data(&mut rng)).unwrap();
        for failed in 0..5 {
            let out = repair_single(&code, &cw, failed, &BTreeSet::new()).unwrap();
            assert_eq!(out.column, mds_oracle(&local, cw.rows(), failed));
            assert_eq!(out.column, cw.column(failed));
        }
    }
}

#[test]
fn s2_local_blocks_are_msr_matrices() {
    let code = construct_sd_s2(3, 4, 2, 3, None).unwrap();
    let sh = code.shape();
    for a in 0..sh.ell {
        let h = code.parity_check(a);
        let local = code.local_code().local_parity_matrix(a);
        for g in 0..sh.mu {
            for t in 0..sh.r {
                for k in 0..sh.n {
                    assert_eq!(h.get(g * sh.r + t, g * sh.n + k), local.get(t, k));
                }
            }
        }
    }
}

fn random_locators<R: Rng>(rng: &mut R, n: usize, max: u64) -> Vec<u64> {
    let mut set = BTreeSet::new();
    while set.len() < n {
        set.insert(rng.gen_range(0..=max));
    }
    let mut v: Vec<u64> = set.into_iter().collect();
    v.sort_by_key(|_| rng.gen::<u32>());
    v
}

#[test]
fn scalar_codes_are_pmds_and_sd_on_random_locators() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = VerifyOptions::default();
    for _ in 0..5 {
        let (mu, n, r) = (3, 5, 2);
        let l = random_locators(&mut rng, n, 2 * (r * n) as u64);
        let np = pmds_core::construction_s2::min_n_pmds(&l, r);
        let pmds = ScalarS2Code::with_smallest_field(mu, r, l.clone(), np).unwrap();
        assert!(verify_pmds(&pmds, &opts).unwrap().passed(), "L = {l:?}, N = {np}");
        let ns = pmds_core::construction_s2::min_n_sd(&l);
        let sd = ScalarS2Code::with_smallest_field(mu, r, l.clone(), ns).unwrap();
        assert!(verify_sd(&sd, &opts).unwrap().passed(), "L = {l:?}, N = {ns}");
    }
}

#[test]
fn general_code_small_instances() {
    let opts = VerifyOptions::default();
    for (mu, n, r, s, d, mode) in [
        (2, 3, 1, 2, 2, AlphaMode::Bch),
        (2, 4, 1, 2, 3, AlphaMode::Bch),
        (2, 3, 1, 1, 2, AlphaMode::Basis),
        (3, 3, 1, 2, 2, AlphaMode::Bch),
    ] {
        let code = GeneralCode::build(GeneralOptions::new(mu, n, r, s, d, mode)).unwrap();
        let p = code.params();
        assert_eq!(p.ell, p.b.pow(n as u32));
        assert!(verify_local_mds(&code, &opts).unwrap().passed());
        assert!(verify_pmds(&code, &opts).unwrap().passed(), "{mu} {n} {r} {s} {d}");
    }
}

#[test]
fn general_code_repairs_in_extension_field() {
    let code = GeneralCode::build(GeneralOptions::new(2, 4, 2, 1, 3, AlphaMode::Bch)).unwrap();
    assert!(code.params().m > 1);
    let enc = Encoder::new(&code).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cw = enc.encode(&enc.random_data(&mut rng)).unwrap();
    for node in 0..8 {
        let out = repair_single(&code, &cw, node, &BTreeSet::new()).unwrap();
        assert!(out.regenerated);
        assert_eq!(out.downloaded, 24);
        assert_eq!(out.column, cw.column(node));
    }
}

#[test]
fn restricted_group_is_local_codeword() {
    let code = construct_pmds_s2(3, 4, 2, 3, None).unwrap();
    let enc = Encoder::new(&code).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cw = enc.encode(&enc.random_data(&mut rng)).unwrap();
    let f = code.field();
    for g in 0..3 {
        let cols: Vec<usize> = (g * 4..g * 4 + 4).collect();
        let part = cw.restrict(&cols);
        assert_eq!(part.width(), 4);
        for a in 0..part.ell() {
            let syn = code.local_code().local_parity_matrix(a).mul_vec(f, part.row(a));
            assert!(syn.iter().all(|x| f.is_zero(x)));
        }
    }
}

#[test]
fn scalar_codes_have_one_row() {
    let code = ScalarS2Code::with_smallest_field(2, 2, vec![0, 1, 2, 3], 4).unwrap();
    let enc = Encoder::new(&code).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cw = enc.encode(&enc.random_data(&mut rng)).unwrap();
    assert_eq!(cw.ell(), 1);
    validate(&code, &cw).unwrap();
    let pat = ErasurePattern::random_pmds(&code.shape(), &mut rng);
    assert_eq!(decode_erasures(&code, &cw, &pat).unwrap(), cw);
    let out = repair_single(&code, &cw, 1, &BTreeSet::new()).unwrap();
    assert_eq!((out.downloaded, out.naive), (2, 2));
}

fn add_arrays(f: &Field, x: &CodewordArray, y: &CodewordArray) -> CodewordArray {
    CodewordArray::from_rows(
        x.rows()
            .iter()
            .zip(y.rows())
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| f.add(u, v)).collect())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encode_is_linear_and_systematic(seed in any::<u64>()) {
        let code = construct_pmds_s2(2, 4, 2, 3, None).unwrap();
        let enc = Encoder::new(&code).unwrap();
        let f = code.field().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = enc.random_data(&mut rng);
        let y = enc.random_data(&mut rng);
        let xy: Vec<Vec<FieldElement>> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| f.add(u, v)).collect())
            .collect();
        let (cx, cy) = (enc.encode(&x).unwrap(), enc.encode(&y).unwrap());
        prop_assert_eq!(enc.encode(&xy).unwrap(), add_arrays(&f, &cx, &cy));
        prop_assert_eq!(enc.extract_info(&cx).unwrap(), x);
        prop_assert!(validate(&code, &cx).is_ok());
    }

    #[test]
    fn decode_inverts_certified_patterns(seed in any::<u64>()) {
        let code = GeneralCode::build(GeneralOptions::new(2, 3, 1, 2, 2, AlphaMode::Bch)).unwrap();
        let enc = Encoder::new(&code).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cw = enc.encode(&enc.random_data(&mut rng)).unwrap();
        let pat = ErasurePattern::random_pmds(&code.shape(), &mut rng);
        prop_assert!(pat.classify(&code.shape()) != PatternClass::Uncorrectable);
        let mut damaged = cw.clone();
        for &c in pat.erased() {
            damaged.set_column(c, &vec![code.field().one(); 1]);
        }
        prop_assert_eq!(decode_erasures(&code, &damaged, &pat).unwrap(), cw);
    }

    #[test]
    fn msr_repair_any_helpers(seed in any::<u64>(), failed in 0usize..4, skip in 0usize..3) {
        let code = construct_pmds_s2(1, 4, 2, 3, None).unwrap();
        let enc = Encoder::new(&code).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cw = enc.encode(&enc.random_data(&mut rng)).unwrap();
        let others: Vec<usize> = (0..4).filter(|&k| k != failed).collect();
        // d = 3 means every other node helps; skipping one forces the fallback
        let unavailable = BTreeSet::from([others[skip]]);
        let out = repair_single(&code, &cw, failed, &unavailable).unwrap();
        prop_assert!(!out.regenerated);
        prop_assert_eq!(out.column, cw.column(failed));
        let out = repair_single(&code, &cw, failed, &BTreeSet::new()).unwrap();
        prop_assert!(out.regenerated);
        prop_assert_eq!(out.column, cw.column(failed));
    }
}
