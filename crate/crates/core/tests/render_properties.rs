use proptest::prelude::*;
use scenforge::dsl::AgentClass;
use scenforge::render::control::{combine_controls, preset, ControlMapSet, Modality, PRESET_NAMES};
use scenforge::render::*;
use scenforge::sim::map::builtin_straight;
use scenforge::sim::WorldMap;
use std::collections::BTreeMap;

fn empty_map() -> WorldMap {
    WorldMap::from_json(r#"{"lanes":[]}"#).unwrap()
}

fn car(x: f64, y: f64, heading: f64) -> RenderAgent {
    RenderAgent { class: AgentClass::Car, x, y, heading, length: 4.5, width: 2.0, active: true }
}

/// Independent edge oracle: compare against every in-bounds 4-neighbor.
fn edge_oracle(seg: &Raster<u8>) -> Raster<u8> {
    let (w, h) = seg.dims();
    let mut out = Raster::filled(w, h, 0u8);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let v = seg.get(x as usize, y as usize);
            let mut hit = false;
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 && seg.get(nx as usize, ny as usize) != v {
                    hit = true;
                }
            }
            out.set(x as usize, y as usize, hit as u8);
        }
    }
    out
}

fn raster_strategy() -> impl Strategy<Value = Raster<u8>> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0u8..3, w * h).prop_map(move |v| Raster::from_vec(w, h, v).unwrap())
    })
}

fn unit_raster(w: usize, h: usize) -> impl Strategy<Value = Raster<f32>> {
    proptest::collection::vec(0.0f32..=1.0, w * h).prop_map(move |v| Raster::from_vec(w, h, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn edges_match_neighbor_scan(seg in raster_strategy()) {
        let e = edge_from_seg(&seg);
        prop_assert_eq!(&e, &edge_oracle(&seg));
        prop_assert!(e.data().iter().all(|&v| v <= 1));
    }

    #[test]
    fn rectangle_edges(w in 3usize..30, h in 3usize..30, x0 in 1usize..10, y0 in 1usize..10, rw in 1usize..12, rh in 1usize..12) {
        let (rw, rh) = (rw.min(w), rh.min(h));
        let (cw, ch) = (x0 + rw + 1, y0 + rh + 1);
        let mut seg = Raster::filled(cw.max(w), ch.max(h), 0u8);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                seg.set(x, y, 2);
            }
        }
        let e = edge_from_seg(&seg);
        let inside = |x: usize, y: usize| (x0..x0 + rw).contains(&x) && (y0..y0 + rh).contains(&y);
        let (mut inner, mut outer) = (0usize, 0usize);
        for y in 0..seg.height() {
            for x in 0..seg.width() {
                if e.get(x, y) == 1 {
                    if inside(x, y) { inner += 1 } else { outer += 1 }
                }
            }
        }
        // inner boundary of a rw × rh block, corners counted once
        let perimeter = if rw == 1 || rh == 1 { rw * rh } else { 2 * (rw + rh) - 4 };
        prop_assert_eq!(inner, perimeter);
        // the background pixels sharing a side with the block
        prop_assert_eq!(outer, 2 * (rw + rh));
    }

    #[test]
    fn combine_is_linear(d in unit_raster(6, 5), e in unit_raster(6, 5), wd in 0.0f32..1.0, we in 0.0f32..1.0, alpha in 0.0f32..1.0) {
        let maps = BTreeMap::from([(Modality::Depth, d.clone()), (Modality::Edge, e.clone())]);
        let set = |wd: f32, we: f32| ControlMapSet::new(maps.clone(), BTreeMap::from([(Modality::Depth, wd), (Modality::Edge, we)])).unwrap();
        let base = combine_controls(&set(wd, we)).unwrap();
        let scaled = combine_controls(&set(alpha * wd, alpha * we)).unwrap();
        for (s, b) in scaled.data().iter().zip(base.data()) {
            prop_assert!((s - alpha * b).abs() <= 1e-6);
        }
        // superposition over disjoint modality subsets
        let only = |m: Modality, r: &Raster<f32>, w: f32| {
            combine_controls(&ControlMapSet::new(BTreeMap::from([(m, r.clone())]), BTreeMap::from([(m, w)])).unwrap()).unwrap()
        };
        let (cd, ce) = (only(Modality::Depth, &d, wd), only(Modality::Edge, &e, we));
        for ((x, y), z) in cd.data().iter().zip(ce.data()).zip(base.data()) {
            prop_assert_eq!((x + y).to_bits(), z.to_bits());
        }
    }

    #[test]
    fn preset_outputs_stay_in_unit_range(d in unit_raster(4, 4), e in unit_raster(4, 4)) {
        for name in PRESET_NAMES {
            let set = ControlMapSet::new(BTreeMap::from([(Modality::Depth, d.clone()), (Modality::Edge, e.clone())]), preset(name).unwrap()).unwrap();
            prop_assert!(combine_controls(&set).unwrap().data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn three_modalities_stay_in_range(s in unit_raster(3, 3), d in unit_raster(3, 3), e in unit_raster(3, 3), w in proptest::array::uniform3(0.0f32..=1.0)) {
        let maps = BTreeMap::from([(Modality::Seg, s), (Modality::Depth, d), (Modality::Edge, e)]);
        let weights = BTreeMap::from([(Modality::Seg, w[0]), (Modality::Depth, w[1]), (Modality::Edge, w[2])]);
        let c = combine_controls(&ControlMapSet::new(maps, weights).unwrap()).unwrap();
        prop_assert!(c.data().iter().all(|v| (0.0..=3.0).contains(v)));
    }
}

#[test]
fn single_modality_weight_one_is_identity() {
    let d = Raster::from_vec(3, 1, vec![0.1f32, 0.5, 0.9]).unwrap();
    let set = ControlMapSet::new(BTreeMap::from([(Modality::Depth, d.clone())]), BTreeMap::from([(Modality::Depth, 1.0)])).unwrap();
    assert_eq!(combine_controls(&set).unwrap(), d);
    let zero = ControlMapSet::new(BTreeMap::from([(Modality::Depth, d)]), BTreeMap::from([(Modality::Depth, 0.0)])).unwrap();
    assert!(combine_controls(&zero).unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn edges_sit_on_class_boundaries() {
    let map = builtin_straight();
    let cam = CameraModel::top_down([0.0, 0.0], 0.1, 96, 96);
    let r = Renderer::new(&map, &cam);
    let seg = r.segmentation(&[car(0.0, -1.75, 0.3), car(3.0, 1.75, 0.0)]);
    let edge = edge_from_seg(&seg);
    for y in 0..96 {
        for x in 0..96 {
            if edge.get(x, y) == 1 {
                let v = seg.get(x, y);
                let n = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
                assert!(n.iter().any(|&(a, b)| a < 96 && b < 96 && seg.get(a, b) != v), "({x}, {y})");
            }
        }
    }
    assert!(seg.data().iter().all(|&id| SegClass::from_id(id).is_some()));
}

fn min_depth(agents: &[RenderAgent], cam: &CameraModel) -> f32 {
    render_depth(agents, &empty_map(), cam).data().iter().copied().fold(f32::INFINITY, f32::min)
}

#[test]
fn pinhole_depth_tracks_translation() {
    let cam = CameraModel::pinhole([-10.0, 0.0, 1.0], 0.0, 0.0, 200.0, 64, 64);
    let near = min_depth(&[car(0.0, 0.0, 0.0)], &cam);
    let far = min_depth(&[car(5.0, 0.0, 0.0)], &cam);
    assert!((near - 7.75).abs() < 0.01, "{near}");
    // one pixel subtends about depth / focal meters
    let quantum = far / 200.0;
    assert!((far - near - 5.0).abs() <= quantum, "{near} -> {far}");

    let mut prev = 0.0;
    for k in 0..20 {
        let d = min_depth(&[car(k as f64 * 0.5, 0.0, 0.0)], &cam);
        assert!(d >= prev, "step {k}: {d} < {prev}");
        prev = d;
    }
}

#[test]
fn rendering_is_deterministic() {
    let map = builtin_straight();
    let cam = CameraModel::top_down([0.0, 0.0], 0.2, 64, 48);
    let agents = [car(1.0, -1.75, 0.1)];
    let w = preset("preset-d").unwrap();
    let r = Renderer::new(&map, &cam);
    assert_eq!(render_frame(&r, 0, &agents, &w).unwrap(), render_frame(&r, 0, &agents, &w).unwrap());
    let depth = r.depth(&agents);
    assert!(depth.data().iter().all(|d| d.is_finite() && *d >= 0.0));
}
