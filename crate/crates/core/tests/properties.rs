use std::f64::consts::PI;

use proptest::prelude::*;

use translator_core::analytic::{tilted_reaper, Tilt, TiltedReaperParams};
use translator_core::cli::{field_csv, parse_real, read_field_csv};
use translator_core::geometry::{Grid, PlanarDomain, ScalarField};
use translator_core::surface::{graph_to_mesh, obj_bytes, schwarz_reflect};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reals_round_trip(v in -1e6f64..1e6) {
        prop_assert_eq!(parse_real(&v.to_string()).unwrap(), v);
    }

    #[test]
    fn field_csv_round_trips(
        alpha in 0.3f64..2.8,
        w in 0.2f64..4.0,
        len in 0.5f64..6.0,
        ox in -3.0f64..3.0,
        oy in -3.0f64..3.0,
        n_s in 3usize..12,
        n_t in 3usize..12,
    ) {
        let d = PlanarDomain::parallelogram(alpha, w, len).unwrap().translated(ox, oy);
        let u = ScalarField::from_fn(Grid::new(d, n_s, n_t).unwrap(), |x, y| (x - 2.0 * y).sin() + x * y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, field_csv(&u)).unwrap();
        let v = read_field_csv(&p).unwrap();
        prop_assert_eq!(v.values(), u.values());
        prop_assert_eq!((v.grid.n_s, v.grid.n_t), (n_s, n_t));
        prop_assert!((v.grid.domain.alpha - alpha).abs() < 1e-9);
    }

    #[test]
    fn double_half_turn_is_identity(alpha in 0.3f64..2.8, corner in 0usize..4, n in 3usize..9) {
        let d = PlanarDomain::make_parallelogram(alpha, 1.3, 2.1, true).unwrap();
        let u = ScalarField::from_fn(Grid::new(d, n, n + 1).unwrap(), |x, y| x * x - 0.5 * y).unwrap();
        let piece = graph_to_mesh(&u);
        let c = d.corners()[corner];
        let twice = schwarz_reflect(&schwarz_reflect(&piece, c).unwrap(), c).unwrap();
        prop_assert_eq!(obj_bytes(&twice), obj_bytes(&piece));
    }

    #[test]
    fn tilted_reaper_slope_is_exact(w in PI..4.0 * PI, x in -10.0f64..10.0, t in 0.05f64..0.95, up in any::<bool>()) {
        let tilt = if up { Tilt::Up } else { Tilt::Down };
        let p = TiltedReaperParams::new(w, tilt).unwrap();
        let y = t * w;
        let (z, zx, _) = p.eval(x, y).unwrap();
        prop_assert_eq!(z, tilted_reaper(&p, x, y).unwrap());
        prop_assert!((zx - tilt.sign() * ((w / PI).powi(2) - 1.0).sqrt()).abs() < 1e-12);
    }
}
