use crowdgaze::analysis::{self, chi2_distance, DensityGrid, SampleSet};
use crowdgaze::chart::{derive_spacing, generate_chart, ChartParams};
use crowdgaze::geometry::{FrameSize, Point};
use crowdgaze::tutorial::{
    generate_tutorial, score_tutorial, ParticipantScreeningState, PathParams, ScreeningStatus,
};
use proptest::prelude::*;

fn normalized(raw: Vec<f64>) -> DensityGrid<f64> {
    let total: f64 = raw.iter().sum();
    DensityGrid {
        width: raw.len() as u32,
        height: 1,
        downsample: 1,
        values: raw.iter().map(|v| v / total).collect(),
    }
}

fn grid_pair() -> impl Strategy<Value = (DensityGrid<f64>, DensityGrid<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
            .prop_filter("non-zero mass", |(a, b)| {
                a.iter().sum::<f64>() > 1e-3 && b.iter().sum::<f64>() > 1e-3
            })
            .prop_map(|(a, b)| (normalized(a), normalized(b)))
    })
}

proptest! {
    #[test]
    fn chi2_is_a_bounded_symmetric_distance((p, q) in grid_pair()) {
        let pq = chi2_distance(&p, &q).unwrap();
        let qp = chi2_distance(&q, &p).unwrap();
        prop_assert!((pq - qp).abs() < 1e-15);
        prop_assert!(pq >= 0.0);
        prop_assert!(pq <= 1.0 + 1e-12);
        prop_assert!(chi2_distance(&p, &p).unwrap() == 0.0);
    }

    #[test]
    fn spacing_respects_density_up_to_rounding(f_s in 8.0f64..40.0, d_r in 0.2f64..1.2) {
        let s = derive_spacing(f_s, d_r).unwrap();
        prop_assert_eq!(s.horizontal, 2 * s.vertical);
        let achieved = f_s / s.vertical as f64;
        // |f_s/d_v − D_r| ≤ 0.5 · D_r² / f_s, up to second order in the rounding step
        let d_v_exact = f_s / d_r;
        let tol = 0.5 * f_s / (d_v_exact * (d_v_exact - 0.5));
        prop_assert!((achieved - d_r).abs() <= tol + 1e-12);
    }

    #[test]
    fn chart_lookup_round_trips(seed in any::<u64>()) {
        let chart = generate_chart(&ChartParams::default().with_seed(seed)).unwrap();
        for p in &chart.placements {
            prop_assert_eq!(chart.lookup(&p.label.to_string()), Some(p.anchor));
        }
        prop_assert_eq!(generate_chart(&ChartParams::default().with_seed(seed)).unwrap(), chart);
    }

    #[test]
    fn screening_sequences(results in prop::collection::vec(any::<bool>(), 0..14)) {
        let mut state = ParticipantScreeningState::default();
        for &passed in &results {
            match state.record(passed) {
                Ok(next) => {
                    prop_assert!(!state.is_terminal());
                    prop_assert!(next.attempts <= 10 && next.passes <= next.attempts);
                    match next.status {
                        ScreeningStatus::Approved => prop_assert_eq!(next.passes, 2),
                        ScreeningStatus::Rejected => {
                            prop_assert_eq!(next.attempts, 10);
                            prop_assert!(next.passes < 2);
                        }
                        ScreeningStatus::InTraining => {
                            prop_assert!(next.passes < 2 && next.attempts < 10);
                        }
                    }
                    state = next;
                }
                Err(_) => prop_assert!(state.is_terminal()),
            }
        }
    }

    #[test]
    fn tutorial_paths_stay_inside_at_constant_speed(seed in any::<u64>(), sigma in 0.0f64..0.6) {
        let frame = FrameSize::new(1024, 576);
        let params = PathParams { heading_sigma: sigma, ..PathParams::for_font_size(20.0) };
        let spec = generate_tutorial(frame, &params, &ChartParams::default(), seed).unwrap();
        let m = params.edge_margin;
        let step = params.step_length();
        for pair in spec.samples().windows(2) {
            let d = pair[0].point().distance(&pair[1].point());
            prop_assert!((d - step).abs() <= 0.01 * step);
        }
        for s in spec.samples() {
            prop_assert!(s.x >= m && s.x <= 1024.0 - m && s.y >= m && s.y <= 576.0 - m);
        }
    }

    #[test]
    fn scoring_monotone_in_radius(seed in any::<u64>(), pick in 0usize..168, r in 1.0f64..300.0, extra in 0.0f64..100.0) {
        let frame = FrameSize::new(1024, 576);
        let spec = generate_tutorial(frame, &PathParams::for_font_size(20.0), &ChartParams::default(), seed).unwrap();
        let text = spec.chart.placements[pick].label.to_string();
        if score_tutorial(&spec, &text, r).passed() {
            prop_assert!(score_tutorial(&spec, &text, r + extra + 1e-9).passed());
        }
    }

    #[test]
    fn kde_ignores_point_order(seed in any::<u64>()) {
        use rand::{seq::SliceRandom, Rng};
        let mut rng = crowdgaze::rng::rng_from_seed(seed);
        let frame = FrameSize::new(48, 30);
        let points: Vec<Point<f64>> = (0..12)
            .map(|_| Point::new(rng.random_range(0.0..48.0), rng.random_range(0.0..30.0)))
            .collect();
        let mut shuffled = points.clone();
        shuffled.shuffle(&mut rng);
        let a = SampleSet::new(frame, points).unwrap();
        let b = SampleSet::new(frame, shuffled).unwrap();
        let bw = analysis::estimate_bandwidth(&a).unwrap();
        let ga = analysis::kde(&a, &bw).unwrap();
        let gb = analysis::kde(&b, &bw).unwrap();
        for (x, y) in ga.values.iter().zip(&gb.values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_heatmap_is_flat(w in 1u32..80, h in 1u32..80) {
        let img = analysis::render_heatmap(&analysis::uniform_density::<f64>(w, h));
        prop_assert!(img.pixels.iter().all(|&p| p == img.pixels[0]));
        prop_assert_eq!(img.pixels.len(), (w * h) as usize);
    }
}
