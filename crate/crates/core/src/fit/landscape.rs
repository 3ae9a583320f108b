//! Dense cost scans over a two-parameter plane on the periodic parameter torus.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::CostFunction;
use crate::error::{input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Theta,
    Eps0,
    Eps1,
}

impl Param {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Param::Theta),
            "eps0" => Ok(Param::Eps0),
            "eps1" => Ok(Param::Eps1),
            other => input(format!("unknown parameter `{other}`")),
        }
    }

    fn index(self) -> usize {
        match self {
            Param::Theta => 0,
            Param::Eps0 => 1,
            Param::Eps1 => 2,
        }
    }
}

/// The fixed parameter and its value; the remaining two span full periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub fixed: Param,
    pub value: f64,
    /// Lower edge of the energy axes.
    pub eps_start: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub plane: Plane,
    pub x_param: Param,
    pub y_param: Param,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[iy][ix]`.
    pub values: Vec<Vec<f64>>,
    pub minima: usize,
}

impl Landscape {
    pub fn to_csv(&self) -> String {
        let name = |p: Param| match p {
            Param::Theta => "theta",
            Param::Eps0 => "eps0",
            Param::Eps1 => "eps1",
        };
        let mut s = format!("{},{},cost\n", name(self.x_param), name(self.y_param));
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                s.push_str(&format!("{x:.6},{y:.6},{:.10}\n", self.values[iy][ix]));
            }
        }
        s.push_str(&format!("# strict_local_minima,{}\n", self.minima));
        s
    }
}

/// Cells strictly below all distinct 8-neighbours, with wrap-around in both axes.
pub fn count_strict_minima(values: &[Vec<f64>]) -> usize {
    let ny = values.len();
    if ny == 0 {
        return 0;
    }
    let nx = values[0].len();
    let mut count = 0;
    for iy in 0..ny {
        for ix in 0..nx {
            let v = values[iy][ix];
            let mut has_neighbour = false;
            let mut strict = true;
            for dy in [-1i64, 0, 1] {
                for dx in [-1i64, 0, 1] {
                    let jy = (iy as i64 + dy).rem_euclid(ny as i64) as usize;
                    let jx = (ix as i64 + dx).rem_euclid(nx as i64) as usize;
                    if (jy, jx) == (iy, ix) {
                        continue;
                    }
                    has_neighbour = true;
                    if values[jy][jx] <= v {
                        strict = false;
                    }
                }
            }
            if has_neighbour && strict {
                count += 1;
            }
        }
    }
    count
}

pub fn landscape_scan(cost: &CostFunction, plane: &Plane) -> Result<Landscape> {
    if plane.nx == 0 || plane.ny == 0 {
        return input("landscape grid needs at least one point per axis");
    }
    let period = cost.settings.period();
    let free: Vec<Param> = [Param::Theta, Param::Eps0, Param::Eps1].into_iter().filter(|&p| p != plane.fixed).collect();
    let axis = |p: Param, n: usize| -> Vec<f64> {
        let (lo, width) = match p {
            Param::Theta => (0.0, PI),
            _ => (plane.eps_start, period),
        };
        (0..n).map(|i| lo + width * i as f64 / n as f64).collect()
    };
    let (xs, ys) = (axis(free[0], plane.nx), axis(free[1], plane.ny));
    let values: Vec<Vec<f64>> = ys
        .par_iter()
        .map(|&y| {
            xs.iter()
                .map(|&x| {
                    let mut p = [0.0; 3];
                    p[plane.fixed.index()] = plane.value;
                    p[free[0].index()] = x;
                    p[free[1].index()] = y;
                    cost.eval_raw(p[0], [p[1], p[2]])
                })
                .collect()
        })
        .collect();
    let minima = count_strict_minima(&values);
    Ok(Landscape { plane: *plane, x_param: free[0], y_param: free[1], xs, ys, values, minima })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_surface_has_no_minima() {
        assert_eq!(count_strict_minima(&vec![vec![0.3; 5]; 4]), 0);
        assert_eq!(count_strict_minima(&[vec![0.1]]), 0);
    }

    #[test]
    fn wrapped_minimum_counts_once() {
        let mut v = vec![vec![1.0; 6]; 6];
        v[0][5] = 0.0;
        assert_eq!(count_strict_minima(&v), 1);
        v[5][0] = 0.5;
        assert_eq!(count_strict_minima(&v), 1);
        v[3][3] = 0.2;
        assert_eq!(count_strict_minima(&v), 2);
    }

    #[test]
    fn plateau_is_not_strict() {
        let mut v = vec![vec![1.0; 5]; 5];
        v[2][2] = 0.0;
        v[2][3] = 0.0;
        assert_eq!(count_strict_minima(&v), 0);
    }
}
