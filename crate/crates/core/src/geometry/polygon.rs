use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist2(&self, other: &Point<T>) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(&self, other: &Point<T>) -> T {
        self.dist2(other).sqrt()
    }
}

/// Shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area<T: Real>(poly: &[Point<T>]) -> T {
    if poly.len() < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for (i, p) in poly.iter().enumerate() {
        let q = &poly[(i + 1) % poly.len()];
        acc = acc + (p.x * q.y - q.x * p.y);
    }
    acc * T::lit(0.5)
}

/// Area centroid of a simple polygon, or `None` when the area vanishes.
pub fn area_centroid<T: Real>(poly: &[Point<T>]) -> Option<Point<T>> {
    let a = signed_area(poly);
    if a.abs() <= T::epsilon() {
        return None;
    }
    let (mut cx, mut cy) = (T::zero(), T::zero());
    for (i, p) in poly.iter().enumerate() {
        let q = &poly[(i + 1) % poly.len()];
        let cross = p.x * q.y - q.x * p.y;
        cx = cx + (p.x + q.x) * cross;
        cy = cy + (p.y + q.y) * cross;
    }
    let six_a = T::lit(6.0) * a;
    Some(Point::new(cx / six_a, cy / six_a))
}

/// Sutherland-Hodgman clip of a convex polygon against `a*x + b*y <= c`.
///
/// Vertices within `tol` of the line count as inside, so a line that only
/// touches the polygon leaves it unchanged.
pub fn clip_half_plane<T: Real>(poly: &[Point<T>], a: T, b: T, c: T, tol: T) -> Vec<Point<T>> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    if n == 0 {
        return out;
    }
    let side = |p: &Point<T>| a * p.x + b * p.y - c;
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let sc = side(&cur);
        let sn = side(&next);
        let cur_in = sc <= tol;
        let next_in = sn <= tol;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            // strictly crossing: one side is beyond the tolerance band
            if (sc > tol && sn < -tol) || (sc < -tol && sn > tol) {
                let t = sc / (sc - sn);
                out.push(Point::new(
                    cur.x + t * (next.x - cur.x),
                    cur.y + t * (next.y - cur.y),
                ));
            }
        }
    }
    out
}

/// Drops repeated and collinear vertices.
pub fn simplify<T: Real>(poly: Vec<Point<T>>, tol: T) -> Vec<Point<T>> {
    let mut pts: Vec<Point<T>> = Vec::with_capacity(poly.len());
    for p in poly {
        if pts.last().is_none_or(|q| q.dist(&p) > tol) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts[0].dist(pts.last().unwrap()) <= tol {
        pts.pop();
    }
    let mut changed = true;
    while changed && pts.len() > 3 {
        changed = false;
        let n = pts.len();
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let cur = pts[i];
            let next = pts[(i + 1) % n];
            let cross = (cur.x - prev.x) * (next.y - cur.y) - (cur.y - prev.y) * (next.x - cur.x);
            let scale = prev.dist(&cur).max(cur.dist(&next));
            if cross.abs() <= tol * scale {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point<f64>> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn clip_halves_square() {
        let out = clip_half_plane(&square(), 1.0, 0.0, 0.5, 1e-12);
        assert!((signed_area(&out) - 0.5).abs() < 1e-15);
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn touching_line_keeps_polygon() {
        let out = clip_half_plane(&square(), 1.0, 1.0, 2.0, 1e-12);
        assert_eq!(out, square());
    }

    #[test]
    fn centroid_of_square() {
        let c = area_centroid(&square()).unwrap();
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn simplify_removes_collinear_and_duplicates() {
        let mut p = square();
        p.insert(1, Point::new(0.5, 0.0));
        p.insert(3, Point::new(1.0, 0.0));
        let s = simplify(p, 1e-12);
        assert_eq!(s.len(), 4);
    }
}
