use capdrop::config::{parse_config, RunConfig};
use capdrop::linear::{hessian_block, resonance_delta, resonance_f, resonance_solve};
use capdrop::{Field, Grid, Mode, PhysicalParams};
use num_rational::Ratio;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(
        sigma0 in 0.01f64..10.0,
        alpha0 in -5.0f64..5.0,
        half_n in 4usize..64,
        seed in 0u64..=i64::MAX as u64,
        l in 1usize..6,
        points in 1usize..20,
        stop in 1e-4f64..1e-2,
    ) {
        let text = format!(
            "sigma0 = {sigma0:?}\nalpha0 = {alpha0:?}\nN = {}\nseed = {seed}\n[branch]\nl = {l}\npoints = {points}\nstart = 0.0\nstop = {stop:?}\n",
            2 * half_n
        );
        let cfg = parse_config(&text).unwrap();
        let again: RunConfig = parse_config(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(cfg.hash().unwrap(), again.hash().unwrap());
    }

    #[test]
    fn transform_round_trip(seed in any::<u64>(), half_n in 4usize..128) {
        use rand::SeedableRng;
        let g = Grid::new(2 * half_n).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = Field::random_smooth(&g, &mut rng, half_n, 1.0, 1e9, true);
        let back = Field::from_values(&g, f.values().to_vec()).unwrap();
        prop_assert!(back.max_abs_diff(&f) <= 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn resonant_roots_solve_the_relation(sigma0 in 0.1f64..5.0, alpha0 in -4.0f64..4.0, l in 2usize..30) {
        let p = PhysicalParams::new(sigma0, alpha0).unwrap();
        let r = resonance_solve(l, 1, &p).unwrap();
        for w in [r.omega_plus, r.omega_minus].into_iter().flatten() {
            let scale = sigma0 * (l * l) as f64 + w * w * l as f64 + alpha0 * alpha0;
            prop_assert!(resonance_f(sigma0, alpha0, w, l).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn delta_sign_tracks_bond_number(num in 1i64..200, den in 1i64..200, n in 1usize..50) {
        let c = Ratio::new(num, den);
        let d = resonance_delta(n, c);
        let boundary = Ratio::new(1, 4 * (n as i64) * (n as i64 + 1));
        if n == 1 {
            prop_assert_eq!(d, Ratio::from_integer(0));
        } else {
            prop_assert_eq!(d > Ratio::from_integer(0), c > boundary);
        }
    }

    #[test]
    fn hessian_mode_one_is_degenerate(sn in 1i64..100, sd in 1i64..100, an in -100i64..100, ad in 1i64..100) {
        let (s, a) = (Ratio::new(sn, sd), Ratio::new(an, ad));
        prop_assert_eq!(hessian_block(1, 1, s, a).det(), Ratio::from_integer(0));
    }

    #[test]
    fn shift_is_a_group_action(a in -6.0f64..6.0, b in -6.0f64..6.0, l in 1usize..10) {
        let g = Grid::new(32).unwrap();
        let f = Field::basis(&g, Mode::new(l, 1)).unwrap();
        prop_assert!(f.shift(a).shift(b).max_abs_diff(&f.shift(a + b)) <= 1e-12);
    }
}
