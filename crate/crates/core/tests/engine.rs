mod oracle;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rip_core::{
    best_case_evaluate, build_hevc_set, build_uniform_angular_set, predict, predict_all, select_mode, stack,
    worst_case_reconstruct, BlockGeometry, Plane, PredictorMatrix, PredictorSet, Provenance, Psnr, ReferenceVector,
    TargetBlock,
};

fn random_set(rng: &mut ChaCha8Rng, g: BlockGeometry, k: usize) -> PredictorSet {
    let modes = (0..k)
        .map(|i| {
            PredictorMatrix::new(
                format!("r{i}"),
                DMatrix::from_fn(g.block_len(), g.ref_len(), |_, _| rng.random_range(-0.2..0.3)),
            )
        })
        .collect();
    PredictorSet::new(g, modes, Provenance::RipTrained, 1.0, 3).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0.0..255.0)).collect()
}

fn textured(w: usize, h: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random_range(-6.0..6.0)).collect();
    Plane::from_fn(w, h, |r, c| {
        let base = 128.0 + 60.0 * ((r as f64) * 0.11).sin() * ((c as f64) * 0.07 + 0.3).cos();
        (base + noise[r * w + c]).round().clamp(0.0, 255.0)
    })
}

#[test]
fn predict_matches_multiply_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = BlockGeometry::new(8).unwrap();
    let set = random_set(&mut rng, g, 3);
    for m in set.modes() {
        let x = random_vec(&mut rng, 25);
        let got = predict(m, &ReferenceVector(x.clone())).unwrap();
        let want = oracle::mat_vec(&m.matrix, &x);
        for (a, b) in got.0.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn stacked_slices_equal_per_mode_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [4usize, 8] {
        let g = BlockGeometry::new(n).unwrap();
        for k in [1usize, 5, 35] {
            let set = random_set(&mut rng, g, k);
            let s = stack(&set).unwrap();
            assert_eq!(s.multiply_accumulates(), k * g.block_len() * g.ref_len());
            for _ in 0..20 {
                let x = ReferenceVector(random_vec(&mut rng, g.ref_len()));
                let all = predict_all(&s, &x).unwrap();
                assert_eq!(all.len(), k);
                for (p, est) in all.iter().enumerate() {
                    assert_eq!(est, &predict(&set.modes()[p], &x).unwrap());
                }
            }
        }
    }
}

#[test]
fn hevc_stack_operation_count() {
    let s = stack(&build_hevc_set(BlockGeometry::new(8).unwrap()).unwrap()).unwrap();
    assert_eq!(s.multiply_accumulates(), 56_000);
}

#[test]
fn mode_selection_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = BlockGeometry::new(4).unwrap();
    for _ in 0..50 {
        let set = random_set(&mut rng, g, 7);
        let x = random_vec(&mut rng, 13);
        let y = random_vec(&mut rng, 16);
        let mats: Vec<_> = set.modes().iter().map(|m| m.matrix.clone()).collect();
        let want = oracle::brute_force_labels(
            &DMatrix::from_column_slice(13, 1, &x),
            &DMatrix::from_column_slice(16, 1, &y),
            &mats,
        )[0];
        let (x, y) = (ReferenceVector(x), TargetBlock(y));
        let a = select_mode(&set, &x, &y).unwrap();
        let b = stack(&set).unwrap().select_mode(&x, &y).unwrap();
        assert_eq!(a.mode, want);
        assert_eq!(a, b);
        // norm vs squared norm ordering agree
        let by_norm = set
            .modes()
            .iter()
            .map(|m| rip_core::prediction_error(m, &x, &y).unwrap())
            .enumerate()
            .fold((0, f64::INFINITY), |best, (p, e)| if e < best.1 { (p, e) } else { best });
        assert_eq!(by_norm.0, a.mode);
    }
}

#[test]
fn best_case_constant_image_is_exact_away_from_origin() {
    // the origin block has no references and sees mid-gray
    let plane = Plane::filled(40, 24, 93.0);
    for set in [
        build_uniform_angular_set(BlockGeometry::new(8).unwrap(), 13).unwrap(),
        build_hevc_set(BlockGeometry::new(8).unwrap()).unwrap(),
    ] {
        let report = best_case_evaluate(&plane, &set).unwrap();
        assert_eq!(report.blocks.len(), 15);
        assert_eq!(report.mode_histogram.iter().sum::<usize>(), 15);
        assert!((report.blocks[0].squared_error - 64.0 * 35.0 * 35.0).abs() < 1e-6);
        assert!(report.blocks[1..].iter().all(|b| b.squared_error < 1e-18 && b.mode == 0));

        let gray = best_case_evaluate(&Plane::filled(40, 24, 128.0), &set).unwrap();
        assert_eq!(gray.psnr, Psnr::Infinite);
    }
}

#[test]
fn adding_modes_never_hurts_best_case() {
    let plane = textured(64, 48, 4);
    let g = BlockGeometry::new(8).unwrap();
    let full = build_uniform_angular_set(g, 9).unwrap();
    let mut previous = f64::INFINITY;
    for k in 1..=9 {
        let subset = PredictorSet::new(g, full.modes()[..k].to_vec(), Provenance::DesignedUniform, 0.0, 0).unwrap();
        let mse = best_case_evaluate(&plane, &subset).unwrap().mse;
        assert!(mse <= previous);
        previous = mse;
    }
}

#[test]
fn worst_case_hand_traced_row_gradient() {
    // rows are constant: p(r, c) = 10 r + 5
    let plane = Plane::from_fn(16, 16, |r, _| 10.0 * r as f64 + 5.0);
    let set = build_uniform_angular_set(BlockGeometry::new(8).unwrap(), 5).unwrap();
    let (recon, report) = worst_case_reconstruct(&plane, &set).unwrap();

    // block (0, 8): left column is true, horizontal copy (mode 3) is exact
    assert_eq!(report.blocks[0].mode, 3);
    assert_eq!(report.blocks[0].squared_error, 0.0);
    for r in 0..8 {
        for c in 0..16 {
            assert_eq!(recon.get(r, c), plane.get(r, c));
        }
    }
    // lower blocks only see row 7 (value 75): every mode predicts 75, ties to mode 0
    for b in &report.blocks[1..] {
        assert_eq!(b.mode, 0);
        assert_eq!(b.squared_error, 163_200.0);
    }
    for r in 8..16 {
        for c in 0..16 {
            assert_eq!(recon.get(r, c), 75.0);
        }
    }
    assert_eq!(report.mse, 1275.0);
    assert!((report.psnr.db() - 10.0 * 51f64.log10()).abs() < 1e-12);
}

#[test]
fn worst_case_reads_only_decoded_blocks() {
    let g = BlockGeometry::new(8).unwrap();
    let set = build_hevc_set(g).unwrap();
    let a = textured(48, 32, 5);
    let (ra, _) = worst_case_reconstruct(&a, &set).unwrap();
    assert!(ra.data().iter().all(|v| v.is_finite()));

    // change the source from block 7 onward (raster order, 6 blocks per row)
    let cut = 7;
    let b = Plane::from_fn(48, 32, |r, c| {
        let idx = (r / 8) * 6 + c / 8;
        if idx >= cut {
            255.0 - a.get(r, c)
        } else {
            a.get(r, c)
        }
    });
    let (rb, _) = worst_case_reconstruct(&b, &set).unwrap();
    for r in 0..32 {
        for c in 0..48 {
            if (r / 8) * 6 + c / 8 < cut {
                assert_eq!(ra.get(r, c), rb.get(r, c));
            }
        }
    }
}

#[test]
fn worst_case_is_deterministic() {
    let g = BlockGeometry::new(4).unwrap();
    let set = build_uniform_angular_set(g, 17).unwrap();
    let plane = textured(64, 64, 6);
    let (a, ra) = worst_case_reconstruct(&plane, &set).unwrap();
    let (b, rb) = worst_case_reconstruct(&plane, &set).unwrap();
    assert_eq!(a.to_u8(), b.to_u8());
    assert_eq!(ra, rb);
}
