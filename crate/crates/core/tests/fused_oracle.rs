use dsfuse_core::fused::{expected_trace, run_fused, FusedScheme, LayoutTriple, TraceItem};
use dsfuse_core::model::{layout_convert, LayerGeometry, Layout, TensorBuf};
use dsfuse_core::reference::{ref_block, ref_dw, ref_pw, LayerParams};
use dsfuse_core::synth;
use rand::Rng;

const CASES: usize = 100;

fn triple(rng: &mut impl Rng) -> LayoutTriple {
    let all = LayoutTriple::all();
    all[rng.random_range(0..all.len())]
}

struct Case {
    scheme: FusedScheme,
    a: LayerParams,
    b: LayerParams,
    input: TensorBuf,
}

fn dwpw_case(rng: &mut impl Rng) -> Case {
    let (ix, iy) = (rng.random_range(8..=32), rng.random_range(8..=32));
    let c = rng.random_range(4..=32);
    let k = if rng.random_bool(0.5) { c } else { 2 * c };
    let f = if rng.random_bool(0.8) { 3 } else { 5 };
    let s = rng.random_range(1..=2);
    let dw = LayerGeometry::dw(ix, iy, c, f, s, f / 2).unwrap();
    let pw = LayerGeometry::pw(dw.ox, dw.oy, c, k).unwrap();
    let fd = rng.random_range(1..=8).min(dw.oy);
    let scheme = FusedScheme::dwpw_rows(triple(rng), fd).unwrap();
    let input = synth::tensor(rng, iy, ix, c, scheme.layouts.input);
    Case { scheme, a: synth::layer_params(&dw, rng), b: synth::layer_params(&pw, rng), input }
}

fn pwdw_case(rng: &mut impl Rng, rows: bool) -> Case {
    let (ix, iy) = (rng.random_range(8..=32), rng.random_range(8..=32));
    let c = rng.random_range(4..=32);
    let k = if rng.random_bool(0.5) { c } else { 2 * c };
    let f = if rows { [3, 5, 7][rng.random_range(0..3)] } else if rng.random_bool(0.8) { 3 } else { 5 };
    let s = rng.random_range(1..=2);
    let pw = LayerGeometry::pw(ix, iy, c, k).unwrap();
    let dw = LayerGeometry::dw(ix, iy, k, f, s, f / 2).unwrap();
    let scheme = if rows {
        FusedScheme::pwdw_rows(triple(rng), rng.random_range(f..=f + 6)).unwrap()
    } else {
        FusedScheme::pwdw_channels(triple(rng), rng.random_range(1..=k.min(24))).unwrap()
    };
    let input = synth::tensor(rng, iy, ix, c, scheme.layouts.input);
    Case { scheme, a: synth::layer_params(&pw, rng), b: synth::layer_params(&dw, rng), input }
}

fn hand_buffer_bytes(case: &Case) -> u64 {
    let (a, b, fd) = (&case.a.geometry, &case.b.geometry, case.scheme.fd as u64);
    match case.scheme.name() {
        "DWPW-Rows" => (a.c * a.ox) as u64 * fd,
        "PWDW-Channels" => fd * (b.ix * b.iy) as u64,
        _ => (b.c * b.ix) as u64 * fd,
    }
}

fn check(case: &Case) {
    let expected = ref_block(&case.input, &case.a, &case.b).unwrap();
    let run = run_fused(&case.input, &case.a, &case.b, &case.scheme).unwrap();
    let ctx = format!("{} a={:?} b={:?}", case.scheme, case.a.geometry, case.b.geometry);
    assert_eq!(run.output.layout(), case.scheme.layouts.output, "{ctx}");
    assert_eq!(layout_convert(&run.output, Layout::Hwc), expected, "{ctx}");
    assert_eq!(run.stats.buffer_bytes, hand_buffer_bytes(case), "{ctx}");
    assert!(run.stats.produced.iter().all(|&n| n <= 1), "{ctx}: intermediate recomputed");
    let trace = expected_trace(&case.scheme, &case.a.geometry, &case.b.geometry, None).unwrap();
    assert_eq!(run.stats.trace, trace, "{ctx}");
}

#[test]
fn dwpw_rows_matches_reference() {
    let mut rng = synth::rng(0xd1);
    for _ in 0..CASES {
        let case = dwpw_case(&mut rng);
        check(&case);
        // All intermediate channels of a row are produced by one tile.
        let run = run_fused(&case.input, &case.a, &case.b, &case.scheme).unwrap();
        assert!(run.stats.produced.iter().all(|&n| n == 1));
        for t in run.stats.trace.iter().filter_map(|t| match t {
            TraceItem::Dw(w) => Some(w),
            _ => None,
        }) {
            assert_eq!(t.units, case.a.geometry.c as u64);
        }
    }
}

#[test]
fn pwdw_channels_matches_reference() {
    let mut rng = synth::rng(0xc2);
    for _ in 0..CASES {
        check(&pwdw_case(&mut rng, false));
    }
}

#[test]
fn pwdw_rows_matches_reference() {
    let mut rng = synth::rng(0x3a);
    for _ in 0..CASES {
        check(&pwdw_case(&mut rng, true));
    }
}

/// Row-wise PW-DW without the shift: every DW output row recomputes the
/// PW rows of its window from the block input.
fn recompute_oracle(case: &Case) -> TensorBuf {
    let (pw, dw) = (&case.a, &case.b);
    let (ga, gb) = (&pw.geometry, &dw.geometry);
    let x = layout_convert(&case.input, Layout::Hwc);
    let mut out = TensorBuf::zeros(gb.oy, gb.ox, gb.k, Layout::Hwc);
    for o in 0..gb.oy {
        let top = (o * gb.s) as isize - gb.p as isize;
        let rows: Vec<isize> = (0..gb.fy as isize).map(|i| top + i).collect();
        let window = TensorBuf::from_fn(gb.fy, ga.ix, ga.k, Layout::Hwc, |i, xx, kk| {
            let y = rows[i];
            if y < 0 || y as usize >= ga.iy {
                return 0;
            }
            let mut acc = 0i32;
            for c in 0..ga.c {
                acc += i32::from(x.get(y as usize, xx, c)) * i32::from(pw.weights.as_ref().unwrap().pw_at(kk, c));
            }
            pw.quant.requant(acc, kk)
        });
        for ox in 0..gb.ox {
            for k in 0..gb.k {
                let mut acc = 0i32;
                for i in 0..gb.fy {
                    if rows[i] < 0 || rows[i] as usize >= ga.iy {
                        continue;
                    }
                    for j in 0..gb.fx {
                        let xx = (ox * gb.s + j) as isize - gb.p as isize;
                        if xx < 0 || xx as usize >= gb.ix {
                            continue;
                        }
                        acc += i32::from(window.get(i, xx as usize, k)) * i32::from(dw.weights.as_ref().unwrap().dw_at(k, i, j));
                    }
                }
                out.set(o, ox, k, dw.quant.requant(acc, k));
            }
        }
    }
    out
}

#[test]
fn shifted_buffer_equals_recomputation() {
    let mut rng = synth::rng(0x5f);
    for _ in 0..40 {
        let case = pwdw_case(&mut rng, true);
        let run = run_fused(&case.input, &case.a, &case.b, &case.scheme).unwrap();
        assert_eq!(layout_convert(&run.output, Layout::Hwc), recompute_oracle(&case));
    }
}

#[test]
fn output_is_independent_of_fd() {
    let mut rng = synth::rng(0x77);
    for _ in 0..10 {
        let case = pwdw_case(&mut rng, true);
        let fy = case.b.geometry.fy;
        let base = run_fused(&case.input, &case.a, &case.b, &case.scheme.with_fd(fy).unwrap()).unwrap().output;
        for fd in fy + 1..fy + 8 {
            let o = run_fused(&case.input, &case.a, &case.b, &case.scheme.with_fd(fd).unwrap()).unwrap().output;
            assert_eq!(o, base);
        }
        let case = dwpw_case(&mut rng);
        let base = run_fused(&case.input, &case.a, &case.b, &case.scheme.with_fd(1).unwrap()).unwrap().output;
        for fd in 2..=case.a.geometry.oy.min(9) {
            let o = run_fused(&case.input, &case.a, &case.b, &case.scheme.with_fd(fd).unwrap()).unwrap().output;
            assert_eq!(o, base);
        }
    }
}

#[test]
fn identity_block_passes_input_through() {
    let dw = LayerGeometry::dw(6, 5, 3, 1, 1, 0).unwrap();
    let pw = LayerGeometry::pw(6, 5, 3, 3).unwrap();
    let id_dw = LayerParams::new(dw, dsfuse_core::model::WeightsBuf::dw(3, 1, 1, vec![1; 3]).unwrap(), dsfuse_core::model::QuantParams::identity(3));
    let mut eye = vec![0i8; 9];
    for i in 0..3 {
        eye[i * 3 + i] = 1;
    }
    let id_pw = LayerParams::new(
        pw,
        dsfuse_core::model::WeightsBuf::pw(3, 3, dsfuse_core::model::PwWeightOrder::OutMajor, eye).unwrap(),
        dsfuse_core::model::QuantParams::identity(3),
    );
    let mut rng = synth::rng(1);
    let x = synth::tensor(&mut rng, 5, 6, 3, Layout::Hwc);
    let s = FusedScheme::dwpw_rows(LayoutTriple::new(Layout::Hwc, Layout::Hwc, Layout::Hwc), 1).unwrap();
    assert_eq!(run_fused(&x, &id_dw, &id_pw, &s).unwrap().output, x);
}

#[test]
fn single_channel_tile_matches_unfused_trace() {
    use dsfuse_core::kernels::{run_dw, run_pw, KernelOp, KernelVariant};
    let pw = LayerGeometry::pw(9, 7, 6, 10).unwrap();
    let dw = LayerGeometry::dw(9, 7, 10, 3, 1, 1).unwrap();
    let mut rng = synth::rng(9);
    let (a, b) = (synth::layer_params(&pw, &mut rng), synth::layer_params(&dw, &mut rng));
    let l = LayoutTriple::new(Layout::Hwc, Layout::Chw, Layout::Hwc);
    let x = synth::tensor(&mut rng, 7, 9, 6, Layout::Hwc);
    let run = run_fused(&x, &a, &b, &FusedScheme::pwdw_channels(l, 10).unwrap()).unwrap();
    let p = run_pw(&KernelVariant::new(KernelOp::Pw, Layout::Hwc, Layout::Chw), &x, a.weights.as_ref().unwrap(), &a.quant, &pw).unwrap();
    let d = run_dw(&KernelVariant::new(KernelOp::Dw, Layout::Chw, Layout::Hwc), &p.output, b.weights.as_ref().unwrap(), &b.quant, &dw).unwrap();
    assert_eq!(run.stats.trace, vec![TraceItem::Pw(p.work), TraceItem::Dw(d.work)]);
    assert_eq!(run.output, d.output);
}

#[test]
fn fd_out_of_range_is_rejected() {
    let mut rng = synth::rng(2);
    let dw = LayerGeometry::dw(8, 8, 4, 3, 1, 1).unwrap();
    let pw = LayerGeometry::pw(8, 8, 4, 8).unwrap();
    let (a, b) = (synth::layer_params(&dw, &mut rng), synth::layer_params(&pw, &mut rng));
    let x = synth::tensor(&mut rng, 8, 8, 4, Layout::Chw);
    let l = LayoutTriple::new(Layout::Chw, Layout::Hwc, Layout::Chw);
    assert!(run_fused(&x, &a, &b, &FusedScheme::dwpw_rows(l, 9).unwrap()).is_err());
    let pw2 = LayerGeometry::pw(8, 8, 4, 4).unwrap();
    let dw2 = LayerGeometry::dw(8, 8, 4, 3, 1, 1).unwrap();
    let (a2, b2) = (synth::layer_params(&pw2, &mut rng), synth::layer_params(&dw2, &mut rng));
    assert!(run_fused(&x, &a2, &b2, &FusedScheme::pwdw_channels(l, 5).unwrap()).is_err());
    assert!(run_fused(&x, &a2, &b2, &FusedScheme::pwdw_rows(l, 2).unwrap()).is_err());
    // Wrong input layout.
    let hwc = layout_convert(&x, Layout::Hwc);
    assert!(run_fused(&hwc, &a, &b, &FusedScheme::dwpw_rows(l, 2).unwrap()).is_err());
}

#[test]
fn synthetic_outputs_are_not_saturated() {
    let mut rng = synth::rng(4);
    let case = dwpw_case(&mut rng);
    let out = ref_block(&case.input, &case.a, &case.b).unwrap();
    let sat = out.data().iter().filter(|&&v| v == 127 || v == -128).count();
    assert!(sat * 10 < out.len(), "{sat} of {} saturated", out.len());
    let mid = ref_dw(&case.input, case.a.weights.as_ref().unwrap(), &case.a.quant, &case.a.geometry).unwrap();
    let _ = ref_pw(&mid, case.b.weights.as_ref().unwrap(), &case.b.quant, &case.b.geometry).unwrap();
}
