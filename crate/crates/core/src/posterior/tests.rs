use super::*;
use crate::ingest::{ConfirmedPresence, CovariateInfo, Visit};
use crate::model::ModelOptions;
use proptest::prelude::*;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// 4 sites, 2 years, 2 observers; covariates forest and urban are land-cover
/// fractions, elev is continuous.
fn fixture() -> (SiteTable, OccupancyModel) {
    let mut info = vec![
        CovariateInfo::continuous("forest"),
        CovariateInfo::continuous("urban"),
        CovariateInfo::continuous("elev"),
    ];
    info[0].kind = CovariateKind::Compositional;
    info[1].kind = CovariateKind::Compositional;
    info[2].original_min = 100.0;
    info[2].original_max = 300.0;
    let sites = SiteTable::new(
        vec![-1.0, -0.3, 0.4, 1.0],
        vec![0.5, -1.0, 1.0, -0.2],
        vec![
            0.1, 0.3, 0.0, //
            0.4, 0.2, 0.5, //
            0.3, 0.1, 1.0, //
            0.0, 0.2, 0.25,
        ],
        info,
    )
    .unwrap();
    let mut presence = ConfirmedPresence::new(4, 2, 2010);
    presence.set(0, 2010).unwrap();
    let visit = |site, year, week, obs: &str, y| Visit {
        site,
        year,
        week,
        observer: obs.into(),
        list_length: ListLengthClass::L4Plus,
        y,
    };
    let visits = vec![
        visit(0, 2010, 20, "a", true),
        visit(0, 2010, 21, "b", false),
        visit(1, 2010, 22, "a", false),
        visit(1, 2011, 30, "b", false),
        visit(2, 2011, 12, "b", false),
    ];
    let options = ModelOptions {
        spline_n: 4,
        ..ModelOptions::default()
    };
    let model = OccupancyModel::new(&sites, &visits, &presence, options).unwrap();
    (sites, model)
}

fn neutral(model: &OccupancyModel) -> ModelState {
    let mut s = ModelState::neutral(model.layout());
    s.beta_psi.iter_mut().for_each(|b| *b = 0.0);
    s
}

#[test]
fn zero_effects_give_half_map() {
    let (sites, model) = fixture();
    let post = Posterior::from_states(&model, &sites, &[neutral(&model)]).unwrap();
    for r in post.occupancy_map(2011).unwrap() {
        assert!((r.summary.mean - 0.5).abs() < 1e-15);
        assert!(r.summary.quantiles.iter().all(|&q| (q - 0.5).abs() < 1e-15));
    }
}

#[test]
fn very_negative_intercept_gives_empty_map() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_psi = -20.0;
    let post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    assert!(post.occupancy_map(2010).unwrap().iter().all(|r| r.summary.mean <= 1e-8));
}

#[test]
fn invalid_year_is_rejected() {
    let (sites, model) = fixture();
    let post = Posterior::from_states(&model, &sites, &[neutral(&model)]).unwrap();
    assert!(post.occupancy_map(2009).is_err());
    assert!(post.occupancy_map(2012).is_err());
}

#[test]
fn two_draw_map_by_hand() {
    let (sites, model) = fixture();
    let (mut a, mut b) = (neutral(&model), neutral(&model));
    a.beta0_psi = 0.3;
    a.beta_psi = vec![1.0, -2.0, 0.5];
    b.beta0_psi = -0.7;
    b.beta_psi = vec![0.0, 1.0, -1.0];
    let post = Posterior::from_states(&model, &sites, &[a.clone(), b.clone()]).unwrap();
    let map = post.occupancy_map(2010).unwrap();
    for s in 0..4 {
        let x = sites.row(s);
        let ea = 0.3 + x[0] - 2.0 * x[1] + 0.5 * x[2];
        let eb = -0.7 + x[1] - x[2];
        let want = (sig(ea) + sig(eb)) / 2.0;
        assert!((map[s].summary.mean - want).abs() < 1e-14, "site {s}");
    }
}

#[test]
fn trend_single_draw_is_spatial_mean() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta_psi = vec![2.0, -1.0, 0.3];
    let post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    let trend = post.fraction_occupied_trend("all", &[0, 1, 2, 3], TrendMode::Expected).unwrap();
    let map = post.occupancy_map(2010).unwrap();
    let want = map.iter().map(|r| r.summary.mean).sum::<f64>() / 4.0;
    assert!((trend.summaries[0].mean - want).abs() < 1e-14);
}

#[test]
fn certain_occupancy_gives_flat_trend() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_psi = 40.0;
    let post = Posterior::from_states(&model, &sites, &[s.clone(), s]).unwrap();
    for mode in [TrendMode::Expected, TrendMode::Realized { seed: 3 }] {
        let trend = post.fraction_occupied_trend("all", &[0, 1, 2, 3], mode).unwrap();
        for sm in &trend.summaries {
            assert_eq!(sm.mean, 1.0);
            assert!(sm.quantiles.iter().all(|&q| q == 1.0));
        }
    }
}

#[test]
fn trend_toy_by_hand() {
    // 3 sites, 2 years, 2 draws; the year effect enters through β_δ t*
    let (sites, model) = fixture();
    let (mut a, mut b) = (neutral(&model), neutral(&model));
    a.beta0_psi = 0.5;
    a.beta_delta = 1.0;
    b.beta0_psi = -1.0;
    b.beta_delta = -2.0;
    b.beta_psi = vec![0.0, 0.0, 1.0];
    let post = Posterior::from_states(&model, &sites, &[a, b]).unwrap();
    let trend = post.fraction_occupied_trend("west", &[0, 1, 2], TrendMode::Expected).unwrap();
    let t_star = [-0.5, 0.5];
    for (t, ts) in t_star.iter().enumerate() {
        let da = (0..3).map(|_| sig(0.5 + ts)).sum::<f64>() / 3.0;
        let db = (0..3).map(|s| sig(-1.0 - 2.0 * ts + sites.row(s)[2])).sum::<f64>() / 3.0;
        assert!((trend.draws[t][0] - da).abs() < 1e-14);
        assert!((trend.draws[t][1] - db).abs() < 1e-14);
        assert!((trend.summaries[t].mean - (da + db) / 2.0).abs() < 1e-14);
    }
    assert_eq!(trend.years, vec![2010, 2011]);
    assert_eq!(trend.region, "west");
}

#[test]
fn empty_subset_is_rejected() {
    let (sites, model) = fixture();
    let post = Posterior::from_states(&model, &sites, &[neutral(&model)]).unwrap();
    assert!(post.fraction_occupied_trend("none", &[], TrendMode::Expected).is_err());
    assert!(post.fraction_occupied_trend("bad", &[9], TrendMode::Expected).is_err());
}

#[test]
fn realized_mode_respects_confirmed_presence() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_psi = -40.0;
    let post = Posterior::from_states(&model, &sites, &[s.clone(), s.clone(), s]).unwrap();
    let trend = post
        .fraction_occupied_trend("one", &[0], TrendMode::Realized { seed: 1 })
        .unwrap();
    // (0, 2010) is confirmed, (0, 2011) is almost surely empty
    assert!(trend.draws[0].iter().all(|&v| v == 1.0));
    assert!(trend.draws[1].iter().all(|&v| v == 0.0));
}

#[test]
fn realized_probability_matches_bayes_rule() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_psi = 0.4;
    s.beta0_p = -0.2;
    s.beta_p = [0.1, 0.6];
    let post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    let prob = post.cell_probabilities(&post.fields[0], true);
    // site 1, 2010: one L4plus non-detection in week 22, all random effects 0
    let psi = sig(0.4);
    let p = sig(-0.2 + 0.6);
    let want = psi * (1.0 - p) / (psi * (1.0 - p) + 1.0 - psi);
    assert!((prob[2] - want).abs() < 1e-14);
    // unvisited cell keeps its prior probability
    assert!((prob[3 * 2 + 1] - psi).abs() < 1e-14);
}

#[test]
fn trend_over_union_is_weighted_mean() {
    let (sites, model) = fixture();
    let positions: Vec<Vec<f64>> = (0..5)
        .map(|i| {
            (0..model.layout().dim)
                .map(|j| ((i * 31 + j * 7) % 13) as f64 / 13.0 - 0.5)
                .collect()
        })
        .collect();
    let post = Posterior::from_positions(&model, &sites, &positions).unwrap();
    for mode in [TrendMode::Expected, TrendMode::Realized { seed: 9 }] {
        let a = post.fraction_occupied_trend("a", &[0, 2], mode).unwrap();
        let b = post.fraction_occupied_trend("b", &[1, 3], mode).unwrap();
        let all = post.fraction_occupied_trend("all", &[0, 1, 2, 3], mode).unwrap();
        for t in 0..2 {
            for i in 0..5 {
                let w = (2.0 * a.draws[t][i] + 2.0 * b.draws[t][i]) / 4.0;
                assert!((all.draws[t][i] - w).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn flat_phenology_without_seasonal_effect() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_p = -1.0;
    s.beta_p = [0.4, 0.9];
    let post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    let curve = post.phenology_curve();
    assert_eq!(curve.weeks.len(), 53);
    for w in &curve.weeks {
        assert!((w.mean - sig(-0.1)).abs() < 1e-15);
    }
    assert_eq!(curve.peak_week, 1);
}

#[test]
fn phenology_hand_values_and_peak() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_p = -0.5;
    s.beta_p = [0.0, 1.0];
    let mut post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    let f: Vec<f64> = (1..=53).map(|w| (2.0 * std::f64::consts::PI * (w as f64 - 26.0) / 53.0).cos()).collect();
    post.fields[0].f_phen = f.clone();
    let curve = post.phenology_curve();
    for w in 0..53 {
        assert!((curve.weeks[w].mean - sig(0.5 + f[w])).abs() < 1e-15);
    }
    assert_eq!(curve.peak_week, 26);
    // ties go to the earliest week
    post.fields[0].f_phen = vec![0.0; 53];
    post.fields[0].f_phen[9] = 1.0;
    post.fields[0].f_phen[40] = 1.0;
    assert_eq!(post.phenology_curve().peak_week, 10);
}

#[test]
fn phenology_follows_cyclic_relabelling() {
    let (sites, model) = fixture();
    let x: Vec<f64> = (0..model.layout().dim).map(|j| ((j * 17) % 11) as f64 / 5.0 - 1.0).collect();
    let mut post = Posterior::from_positions(&model, &sites, &[x]).unwrap();
    let base = post.phenology_curve();
    let shift = 13;
    let f = post.fields[0].f_phen.clone();
    post.fields[0].f_phen = (0..53).map(|w| f[(w + 53 - shift) % 53]).collect();
    let moved = post.phenology_curve();
    for w in 0..53 {
        assert_eq!(moved.weeks[(w + shift) % 53], base.weeks[w]);
    }
    assert_eq!(moved.peak_week, (base.peak_week - 1 + shift) % 53 + 1);
}

#[test]
fn observers_identical_without_heterogeneity() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.sigma_obs = 1e-300;
    s.b_obs_raw = vec![2.0; s.b_obs_raw.len()];
    let post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    let obs = post.observer_distribution();
    assert_eq!(obs.len(), 2);
    assert_eq!(obs[0].mean, obs[1].mean);
}

#[test]
fn observer_offsets_are_symmetric_on_logit_scale() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_p = -0.8;
    s.beta_p = [0.2, 0.5];
    let mut post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    post.fields[0].b_obs = vec![1.0, -1.0];
    let obs = post.observer_distribution();
    let centre = -0.8 + 0.5;
    assert!((logit(obs[0].mean) - centre - 1.0).abs() < 1e-12);
    assert!((centre - logit(obs[1].mean) - 1.0).abs() < 1e-12);
    assert!((obs[0].mean - sig(0.7)).abs() < 1e-15);
}

#[test]
fn list_length_classes() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_p = -1.2;
    s.beta_p = [0.7, 1.5];
    let post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    let ll = post.list_length_effect();
    assert_eq!(ll[0].class, ListLengthClass::L1);
    assert!((ll[0].summary.mean - sig(-1.2)).abs() < 1e-15);
    assert!((ll[1].summary.mean - sig(-0.5)).abs() < 1e-15);
    assert!((ll[2].summary.mean - sig(0.3)).abs() < 1e-15);
    assert!(ll[0].summary.mean < ll[1].summary.mean && ll[1].summary.mean < ll[2].summary.mean);
}

#[test]
fn flat_effect_without_coefficients() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_psi = 0.9;
    let post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    for e in post.all_covariate_effects().unwrap() {
        assert_eq!(e.points.len(), 25);
        assert!(e.points.iter().all(|p| (p.summary.mean - sig(0.9)).abs() < 1e-15));
    }
}

#[test]
fn effect_at_mean_is_average_cell() {
    let (sites, model) = fixture();
    let mut s = neutral(&model);
    s.beta0_psi = -0.4;
    s.beta_psi = vec![1.3, -0.6, 2.0];
    let post = Posterior::from_states(&model, &sites, &[s]).unwrap();
    let m = sites.means();
    let avg = sig(-0.4 + 1.3 * m[0] - 0.6 * m[1] + 2.0 * m[2]);
    for k in 0..3 {
        let e = post.marginal_covariate_effect(k, &[m[k]]).unwrap();
        assert!((e.points[0].summary.mean - avg).abs() < 1e-15, "covariate {k}");
    }
    let e = post.marginal_covariate_effect(2, &[0.5]).unwrap();
    assert_eq!(e.points[0].original_value, 200.0);
}

#[test]
fn compositional_rescaling_by_hand() {
    let kinds = [CovariateKind::Compositional, CovariateKind::Compositional];
    let names = ["a".to_string(), "b".to_string()];
    let x = rescale_composition(&[0.2, 0.3], &kinds, &names, 0, 0.6).unwrap();
    assert!((x[0] - 0.6).abs() < 1e-15);
    assert!((x[1] - 0.15).abs() < 1e-15);
    let eta = 0.1 + x[0] - x[1];
    assert!((eta - (0.1 + 0.6 - 0.15)).abs() < 1e-15);
}

#[test]
fn continuous_sweep_leaves_others_at_mean() {
    let kinds = [CovariateKind::Compositional, CovariateKind::Continuous];
    let names = ["a".to_string(), "b".to_string()];
    let x = rescale_composition(&[0.2, 0.3], &kinds, &names, 1, 0.9).unwrap();
    assert_eq!(x, vec![0.2, 0.9]);
}

#[test]
fn full_cover_is_degenerate() {
    let kinds = [CovariateKind::Compositional, CovariateKind::Compositional];
    let names = ["a".to_string(), "b".to_string()];
    let err = rescale_composition(&[1.0, 0.0], &kinds, &names, 0, 0.5).unwrap_err();
    assert!(matches!(err, PosteriorError::DegenerateComposition(n) if n == "a"));
    assert!(rescale_composition(&[0.5, 0.0], &kinds, &names, 2, 0.5).is_err());
}

#[test]
fn slopes_by_hand() {
    let (sites, model) = fixture();
    let states = vec![neutral(&model), neutral(&model)];
    let mut post = Posterior::from_states(&model, &sites, &states).unwrap();
    assert!(post.trend_slope_map().iter().all(|s| s.mean == 0.0 && s.p_positive == 0.0));
    post.fields[0].varsigma = vec![1.0, -2.0, 0.5, 0.0];
    post.fields[1].varsigma = vec![3.0, -1.0, -0.5, 0.0];
    let m = post.trend_slope_map();
    let want = [(2.0, 1.0), (-1.5, 0.0), (0.0, 0.5), (0.0, 0.0)];
    for (s, (mean, p)) in want.iter().enumerate() {
        assert!((m[s].mean - mean).abs() < 1e-15);
        assert_eq!(m[s].p_positive, *p);
    }
}

#[test]
fn support_counts_positive_draws() {
    assert_eq!(positive_fraction(&[-1.0, 1.0, 2.0, 3.0]), 0.75);
    assert_eq!(positive_fraction(&[0.1, 2.0]), 1.0);
    let (sites, model) = fixture();
    let states: Vec<ModelState> = [-1.0, 1.0, 2.0, 3.0]
        .iter()
        .map(|&b| {
            let mut s = neutral(&model);
            s.beta_psi = vec![b, -b, 1.0];
            s
        })
        .collect();
    let post = Posterior::from_states(&model, &sites, &states).unwrap();
    let sup = post.covariate_support();
    assert_eq!(sup[0].p_positive, 0.75);
    assert_eq!(sup[1].p_positive, 0.25);
    assert_eq!(sup[2].p_positive, 1.0);
    assert_eq!(sup[0].covariate, "forest");
}

#[test]
fn unit_grid_has_25_points() {
    let g = unit_grid(25);
    assert_eq!(g.len(), 25);
    assert_eq!(g[0], 0.0);
    assert_eq!(g[24], 1.0);
    assert!((g[12] - 0.5).abs() < 1e-15);
}

#[test]
fn map_ignores_draw_order() {
    let (sites, model) = fixture();
    let positions: Vec<Vec<f64>> = (0..6)
        .map(|i| (0..model.layout().dim).map(|j| ((i * 5 + j * 3) % 7) as f64 / 3.0 - 1.0).collect())
        .collect();
    let mut rev = positions.clone();
    rev.reverse();
    let a = Posterior::from_positions(&model, &sites, &positions).unwrap();
    let b = Posterior::from_positions(&model, &sites, &rev).unwrap();
    for (x, y) in a.occupancy_map(2011).unwrap().iter().zip(b.occupancy_map(2011).unwrap()) {
        assert!((x.summary.mean - y.summary.mean).abs() < 1e-12);
        assert_eq!(x.summary.quantiles, y.summary.quantiles);
    }
}

#[test]
fn csv_headers() {
    let (sites, model) = fixture();
    let post = Posterior::from_states(&model, &sites, &[neutral(&model)]).unwrap();
    let mut buf = Vec::new();
    output::write_occupancy_map(&mut buf, &sites, &post.occupancy_map(2010).unwrap()).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("site_id,lon,lat,mean,sd,q025,q10,q25,q50,q75,q90,q975\n0,-1,0.5,0.5,0,"));
    let mut buf = Vec::new();
    output::write_trend(&mut buf, &post.fraction_occupied_trend("all", &[0, 1], TrendMode::Expected).unwrap()).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("region,year,mean,sd,q005,q025,q10,q25,q50,q75,q90,q975,q995\nall,2010,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn summaries_are_nested_probabilities(seed in 0u64..1000) {
        let (sites, model) = fixture();
        let dim = model.layout().dim;
        let positions: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                (0..dim)
                    .map(|j| (((seed as usize + 1) * (i + 3) * (j + 5)) % 97) as f64 / 24.0 - 2.0)
                    .collect()
            })
            .collect();
        let post = Posterior::from_positions(&model, &sites, &positions).unwrap();
        let mut all: Vec<Summary> = Vec::new();
        for y in [2010, 2011] {
            all.extend(post.occupancy_map(y).unwrap().into_iter().map(|r| r.summary));
        }
        all.extend(post.fraction_occupied_trend("all", &[0, 1, 2, 3], TrendMode::Expected).unwrap().summaries);
        all.extend(post.fraction_occupied_trend("all", &[0, 1, 2, 3], TrendMode::Realized { seed }).unwrap().summaries);
        all.extend(post.phenology_curve().weeks);
        all.extend(post.list_length_effect().into_iter().map(|c| c.summary));
        for e in post.all_covariate_effects().unwrap() {
            all.extend(e.points.into_iter().map(|p| p.summary));
        }
        for s in &all {
            prop_assert!(s.is_nested());
            prop_assert!(s.is_probability());
        }
        for o in post.observer_distribution() {
            prop_assert!((0.0..=1.0).contains(&o.mean));
        }
    }
}
