//! Arch ordering of detected teeth and universal code assignment.
//!
//! Box centres are joined into a concave hull by rolling a disc of radius
//! `r` around their outside; each contact change is a hull side. When the
//! opening of the arch is wider than `2r` the disc rolls back along the
//! inner side, so the walk is out-and-back rather than a simple polygon.
//! Either way the adjacent-tooth polyline is the run of walk steps that
//! visits every centre once, and its closing side is the longest one.

use super::{ProjectionError, ToothClass};
use crate::arch::{Jaw, ToothCode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullConfig {
    /// Pivot radius as a multiple of the median nearest-neighbour spacing.
    pub radius_factor: f64,
}

impl Default for HullConfig {
    fn default() -> Self {
        Self { radius_factor: 1.5 }
    }
}

/// Teeth in arch order with their codes; codes ascend along `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchOrdering {
    /// Input indices in arch order.
    pub order: Vec<usize>,
    pub classes: Vec<ToothClass>,
    pub codes: Vec<ToothCode>,
}

impl ArchOrdering {
    pub fn code_of(&self, index: usize) -> Option<ToothCode> {
        self.order.iter().position(|&i| i == index).map(|k| self.codes[k])
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Open polyline through all centres, as indices from one end to the other
/// (starting at the end with the lower index).
pub fn arch_polyline(centers: &[[f64; 2]], cfg: &HullConfig) -> Result<Vec<usize>, ProjectionError> {
    let n = centers.len();
    if n < 3 {
        return Err(ProjectionError::HullFailure(format!("need >= 3 centres, got {n}")));
    }
    if !centers.iter().flatten().all(|c| c.is_finite()) {
        return Err(ProjectionError::InvalidInput("non-finite centre".into()));
    }
    let nn: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| dist2(centers[i], centers[j])).fold(f64::INFINITY, f64::min).sqrt())
        .collect();
    let r = cfg.radius_factor * median(nn);
    if !(r > 0.0) {
        return Err(ProjectionError::HullFailure("coincident centres".into()));
    }

    let seq = pivot_walk(centers, r)?;

    // Every run of n distinct consecutive centres is a candidate polyline;
    // its closing side is the polygon side being dropped. Keep the longest
    // closing side, ties to the smallest side as an index pair, then to the
    // smallest oriented index sequence.
    let m = seq.len();
    let mut best: Option<(f64, (usize, usize), Vec<usize>)> = None;
    for s in 0..m {
        let mut run: Vec<usize> = (0..n).map(|k| seq[(s + k) % m]).collect();
        let mut seen = vec![false; n];
        if n > m || !run.iter().all(|&i| !std::mem::replace(&mut seen[i], true)) {
            continue;
        }
        if run[0] > run[n - 1] {
            run.reverse();
        }
        let closing = dist2(centers[run[0]], centers[run[n - 1]]);
        let side = (run[0].min(run[n - 1]), run[0].max(run[n - 1]));
        let better = match &best {
            None => true,
            Some((c, k, b)) => closing.total_cmp(c).then(k.cmp(&side)).then(b.cmp(&run)).is_gt(),
        };
        if better {
            best = Some((closing, side, run));
        }
    }
    best.map(|(_, _, run)| run).ok_or_else(|| ProjectionError::HullFailure("hull does not pass through every centre".into()))
}

/// Boundary walk of a radius-`r` disc rolled counter-clockwise around the
/// outside of the centres, from the lowest one (ties to lower x, then
/// index). Returns the visited centres up to the first repeated step.
fn pivot_walk(centers: &[[f64; 2]], r: f64) -> Result<Vec<usize>, ProjectionError> {
    let n = centers.len();
    let start = (0..n)
        .min_by(|&a, &b| {
            let (p, q) = (centers[a], centers[b]);
            p[1].total_cmp(&q[1]).then(p[0].total_cmp(&q[0])).then(a.cmp(&b))
        })
        .expect("n >= 3");
    // the disc below the lowest centre holds no centre
    let (mut pivot, mut ball) = (start, [centers[start][0], centers[start][1] - r]);
    let mut seq = vec![start];
    let mut first_step: Option<usize> = None;
    for _ in 0..4 * n + 4 {
        let p = centers[pivot];
        let from = (ball[1] - p[1]).atan2(ball[0] - p[0]);
        // (rotation angle, distance, index, new ball centre)
        let mut hit: Option<(f64, f64, usize, [f64; 2])> = None;
        for (j, &q) in centers.iter().enumerate() {
            let d2 = dist2(p, q);
            if j == pivot || d2 == 0.0 || d2 > 4.0 * r * r {
                continue;
            }
            let d = d2.sqrt();
            let h = (r * r - 0.25 * d2).max(0.0).sqrt();
            let (mx, my) = (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]));
            let (px, py) = (-(q[1] - p[1]) / d, (q[0] - p[0]) / d);
            for c in [[mx + h * px, my + h * py], [mx - h * px, my - h * py]] {
                let turn = ((c[1] - p[1]).atan2(c[0] - p[0]) - from).rem_euclid(std::f64::consts::TAU);
                if turn <= 1e-12 {
                    continue;
                }
                let key = (turn, d2, j, c);
                if hit.is_none_or(|h| (key.0, key.1, key.2) < (h.0, h.1, h.2)) {
                    hit = Some(key);
                }
            }
        }
        let (_, _, next, c) = hit.ok_or_else(|| ProjectionError::HullFailure(format!("centre {pivot} has no neighbour within the pivot diameter")))?;
        if pivot == start {
            match first_step {
                Some(f) if f == next => {
                    seq.pop(); // the arrival back at `start`
                    return Ok(seq);
                }
                None => first_step = Some(next),
                _ => {}
            }
        }
        seq.push(next);
        pivot = next;
        ball = c;
    }
    Err(ProjectionError::HullFailure("pivot walk did not close".into()))
}

/// Codes from the midline outward for one quadrant.
fn quadrant_slots(jaw: Jaw, left: bool, class: ToothClass) -> &'static [u8] {
    use ToothClass::*;
    match (jaw, left, class) {
        (Jaw::Mandible, true, Incisor) => &[24, 23],
        (Jaw::Mandible, true, Canine) => &[22],
        (Jaw::Mandible, true, Premolar) => &[21, 20],
        (Jaw::Mandible, true, Molar) => &[19, 18, 17],
        (Jaw::Mandible, false, Incisor) => &[25, 26],
        (Jaw::Mandible, false, Canine) => &[27],
        (Jaw::Mandible, false, Premolar) => &[28, 29],
        (Jaw::Mandible, false, Molar) => &[30, 31, 32],
        (Jaw::Maxilla, true, Incisor) => &[9, 10],
        (Jaw::Maxilla, true, Canine) => &[11],
        (Jaw::Maxilla, true, Premolar) => &[12, 13],
        (Jaw::Maxilla, true, Molar) => &[14, 15, 16],
        (Jaw::Maxilla, false, Incisor) => &[8, 7],
        (Jaw::Maxilla, false, Canine) => &[6],
        (Jaw::Maxilla, false, Premolar) => &[5, 4],
        (Jaw::Maxilla, false, Molar) => &[3, 2, 1],
    }
}

fn assign_side(side: &[usize], classes: &[ToothClass], jaw: Jaw, left: bool) -> Result<Vec<ToothCode>, ProjectionError> {
    let mut counts = [0usize; 4];
    let mut last = ToothClass::Incisor;
    side.iter()
        .map(|&i| {
            let c = classes[i];
            if c < last {
                return Err(ProjectionError::InconsistentClasses(format!(
                    "{} found outward of a {} on one side",
                    c.name(),
                    last.name()
                )));
            }
            last = c;
            let slot = &mut counts[c as usize];
            let codes = quadrant_slots(jaw, left, c);
            let code = codes.get(*slot).ok_or_else(|| {
                ProjectionError::InconsistentClasses(format!("more than {} {}s in one quadrant", c.per_quadrant(), c.name()))
            })?;
            *slot += 1;
            Ok(ToothCode::new(*code as u32).expect("table codes are valid"))
        })
        .collect()
}

/// Orders box centres (in the `(u, −v)` image plane) along the arch and
/// assigns universal codes from the classes.
pub fn order_and_identify(centers: &[[f64; 2]], classes: &[ToothClass], jaw: Jaw) -> Result<ArchOrdering, ProjectionError> {
    order_and_identify_with(centers, classes, jaw, &HullConfig::default())
}

pub fn order_and_identify_with(
    centers: &[[f64; 2]],
    classes: &[ToothClass],
    jaw: Jaw,
    cfg: &HullConfig,
) -> Result<ArchOrdering, ProjectionError> {
    if centers.len() != classes.len() {
        return Err(ProjectionError::InvalidInput(format!("{} centres but {} classes", centers.len(), classes.len())));
    }
    let path = arch_polyline(centers, cfg)?;
    let n = path.len();
    let pt = |k: usize| centers[path[k]];

    // Arc length at each vertex; the split between k and k+1 sits at the
    // middle of that segment.
    let mut arc = vec![0.0; n];
    for k in 1..n {
        arc[k] = arc[k - 1] + dist2(pt(k - 1), pt(k)).sqrt();
    }
    let half = 0.5 * arc[n - 1];
    let incisors: Vec<usize> = (0..n).filter(|&k| classes[path[k]] == ToothClass::Incisor).collect();
    let split = (0..n - 1)
        .filter(|&k| classes[path[k]] == ToothClass::Incisor && classes[path[k + 1]] == ToothClass::Incisor)
        .min_by(|&a, &b| {
            let balance = |k: usize| {
                let before = incisors.iter().filter(|&&i| i <= k).count() as i64;
                (2 * before - incisors.len() as i64).abs()
            };
            let off = |k: usize| (0.5 * (arc[k] + arc[k + 1]) - half).abs();
            balance(a).cmp(&balance(b)).then(off(a).total_cmp(&off(b))).then(a.cmp(&b))
        })
        .ok_or_else(|| ProjectionError::InconsistentClasses("no two adjacent incisors to place the midline".into()))?;

    let (a, b) = (pt(split), pt(split + 1));
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let (e0, e1) = (pt(0), pt(n - 1));
    let anterior = [mid[0] - 0.5 * (e0[0] + e1[0]), mid[1] - 0.5 * (e0[1] + e1[1])];
    if anterior == [0.0, 0.0] {
        return Err(ProjectionError::HullFailure("arch has no anterior direction".into()));
    }
    // Patient's left = up × anterior, with up = u3 for the mandible and −u3
    // for the maxilla.
    let left = match jaw {
        Jaw::Mandible => [-anterior[1], anterior[0]],
        Jaw::Maxilla => [anterior[1], -anterior[0]],
    };
    let side_score = |ks: &mut dyn Iterator<Item = usize>| {
        let (mut s, mut m) = (0.0, 0usize);
        for k in ks {
            let p = pt(k);
            s += (p[0] - mid[0]) * left[0] + (p[1] - mid[1]) * left[1];
            m += 1;
        }
        s / m as f64
    };
    let first_is_left = side_score(&mut (0..=split)) > side_score(&mut (split + 1..n));

    let first_side: Vec<usize> = path[..=split].iter().rev().copied().collect();
    let second_side: Vec<usize> = path[split + 1..].to_vec();
    let first_codes = assign_side(&first_side, classes, jaw, first_is_left)?;
    let second_codes = assign_side(&second_side, classes, jaw, !first_is_left)?;

    let mut labeled: Vec<(ToothCode, usize)> = first_codes
        .into_iter()
        .zip(first_side)
        .chain(second_codes.into_iter().zip(second_side))
        .collect();
    labeled.sort();
    Ok(ArchOrdering {
        order: labeled.iter().map(|&(_, i)| i).collect(),
        classes: labeled.iter().map(|&(_, i)| classes[i]).collect(),
        codes: labeled.iter().map(|&(c, _)| c).collect(),
    })
}
