use super::{DistanceField, NavError};
use crate::geometry::{Cell, Point};
use crate::mapping::OccGrid;

/// Steepest descent over the 8-neighbourhood from `start` to the field's
/// source. Values along the result strictly decrease.
pub fn plan_path(field: &DistanceField, start: Cell) -> Result<Vec<Cell>, NavError> {
    if !field.value(start).is_finite() {
        return Err(NavError::NoPath(start));
    }
    let mut path = vec![start];
    let mut cur = start;
    while cur != field.source {
        let here = field.value(cur);
        // neighbors8 is row-major, so min_by keeps the row-major first on ties
        let next = cur
            .neighbors8()
            .into_iter()
            .map(|n| (n, field.value(n)))
            .filter(|(_, v)| *v < here)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match next {
            Some((n, _)) => {
                path.push(n);
                cur = n;
            }
            None => return Err(NavError::NoPath(start)),
        }
    }
    Ok(path)
}

/// Length of a cell path in meters (unit or diagonal steps).
pub fn path_length(path: &[Cell], resolution: f64) -> f64 {
    path.windows(2).map(|w| w[0].dist(w[1])).sum::<f64>() * resolution
}

/// Farthest cell of the path prefix lying within `lookahead` meters of the
/// first cell, as a point in the map's frame.
pub fn next_subgoal(path: &[Cell], lookahead: f64, map: &OccGrid) -> Point {
    let first = path[0];
    let reach = path
        .iter()
        .take_while(|c| c.dist(first) * map.resolution <= lookahead + 1e-9)
        .last()
        .copied()
        .unwrap_or(first);
    map.center_of(reach)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::nav::{fmm_field, TraversableMask};
    use crate::scene::CellRect;

    fn line_map() -> OccGrid {
        OccGrid::world(CellRect { x0: 0, y0: 0, x1: 99, y1: 9 }, 0.05)
    }

    #[test]
    fn start_at_source() {
        let f = fmm_field(&TraversableMask::from_bools(Grid::filled(5, 5, true), 0.05), Cell::new(2, 2))
            .unwrap();
        assert_eq!(plan_path(&f, Cell::new(2, 2)).unwrap(), vec![Cell::new(2, 2)]);
    }

    #[test]
    fn corridor_path_matches_straight_line() {
        let f = fmm_field(
            &TraversableMask::from_bools(Grid::filled(80, 5, true), 0.05),
            Cell::new(2, 2),
        )
        .unwrap();
        let path = plan_path(&f, Cell::new(77, 2)).unwrap();
        let euclid = 75.0 * 0.05;
        assert!((path_length(&path, 0.05) - euclid).abs() / euclid < 0.05);
        assert!(path.windows(2).all(|w| f.value(w[0]) > f.value(w[1])));
    }

    #[test]
    fn unreachable_start_has_no_path() {
        let mut t = Grid::filled(6, 3, true);
        for y in 0..3 {
            t[Cell::new(3, y)] = false;
        }
        let f = fmm_field(&TraversableMask::from_bools(t, 0.05), Cell::new(0, 0)).unwrap();
        assert_eq!(plan_path(&f, Cell::new(5, 1)), Err(NavError::NoPath(Cell::new(5, 1))));
    }

    #[test]
    fn subgoal_lookahead() {
        let map = line_map();
        let short: Vec<Cell> = (0..3).map(|x| Cell::new(x, 0)).collect();
        assert_eq!(next_subgoal(&short, 0.5, &map), map.center_of(Cell::new(2, 0)));
        let long: Vec<Cell> = (0..40).map(|x| Cell::new(x, 0)).collect();
        assert_eq!(next_subgoal(&long, 0.5, &map), map.center_of(Cell::new(10, 0)));
        let single = [Cell::new(4, 4)];
        assert_eq!(next_subgoal(&single, 0.5, &map), map.center_of(Cell::new(4, 4)));
    }
}
