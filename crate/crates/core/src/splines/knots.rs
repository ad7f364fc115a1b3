use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Open knot vector of a univariate B-spline space on `[0, 1]`.
///
/// The number of basis functions is `#knots - degree - 1`; the first and the
/// last knot are repeated `degree + 1` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidKnotVector(format!("degree {degree} < 1")));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::InvalidKnotVector(format!("{} knots cannot carry {} basis functions of degree {degree}", knots.len(), degree + 1)));
        }
        if knots.iter().any(|k| !k.is_finite() || *k < 0.0 || *k > 1.0) {
            return Err(Error::InvalidKnotVector("knots must lie in [0, 1]".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnotVector("knots must be non-decreasing".into()));
        }
        let n = knots.len();
        if knots[..=degree].iter().any(|&k| k != 0.0) || knots[n - degree - 1..].iter().any(|&k| k != 1.0) {
            return Err(Error::InvalidKnotVector(format!("open knot vector needs {} leading zeros and trailing ones", degree + 1)));
        }
        // interior multiplicity above the degree would disconnect the space
        let mut run = 1;
        for w in knots[degree..n - degree].windows(2) {
            run = if w[1] == w[0] { run + 1 } else { 1 };
            if run > degree && w[0] != 0.0 && w[0] != 1.0 {
                return Err(Error::InvalidKnotVector(format!("interior knot {} repeated more than {degree} times", w[0])));
            }
        }
        Ok(Self { degree, knots })
    }

    /// Uniform open knot vector with `elements` equal spans.
    pub fn uniform(degree: usize, elements: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidKnotVector(format!("degree {degree} < 1")));
        }
        if elements < 1 {
            return Err(Error::InvalidKnotVector("at least one element is required".into()));
        }
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..elements).map(|e| e as f64 / elements as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints().len() - 1
    }

    /// Knot span index `s` with `knots[s] <= x < knots[s + 1]`; `x = 1` is
    /// assigned to the last non-empty span.
    pub fn span(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        let n = self.num_basis();
        let p = self.degree;
        if x >= self.knots[n] {
            return Ok(n - 1);
        }
        // binary search over knots[p..=n]
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }

    /// Values of the `degree + 1` basis functions that may be nonzero at `x`,
    /// returned together with the index of the first one (Cox-de Boor).
    pub fn eval_basis(&self, x: f64) -> Result<(usize, Vec<f64>)> {
        let span = self.span(x)?;
        let p = self.degree;
        let u = &self.knots;
        let mut values = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        values[0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok((span - p, values))
    }

    /// Values and derivatives up to order `order`; `ders[k][j]` is the k-th
    /// derivative of basis function `first + j`.
    pub fn eval_basis_ders(&self, x: f64, order: usize) -> Result<(usize, Vec<Vec<f64>>)> {
        let span = self.span(x)?;
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let top = order.min(p);
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=top {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if rk >= 0 {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1: usize = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2: usize = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (k, row) in ders.iter_mut().enumerate().take(top + 1).skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        Ok((span - p, ders))
    }

    /// First derivatives of the basis functions active at `x`.
    pub fn eval_basis_deriv(&self, x: f64) -> Result<(usize, Vec<f64>)> {
        let (first, mut ders) = self.eval_basis_ders(x, 1)?;
        Ok((first, ders.swap_remove(1)))
    }

    /// Greville abscissae (knot averages), one per basis function.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.num_basis()).map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64).collect()
    }

    /// Knot vector of the reparametrization `x -> 1 - x`.
    pub fn reversed(&self) -> Self {
        let knots = self.knots.iter().rev().map(|k| 1.0 - k).collect();
        Self { degree: self.degree, knots }
    }

    /// Uniform refinement: one knot inserted in the middle of every span.
    pub fn refined(&self) -> Self {
        let bp = self.breakpoints();
        let mut knots = Vec::with_capacity(self.knots.len() + bp.len());
        for (i, &k) in self.knots.iter().enumerate() {
            knots.push(k);
            if let Some(&next) = self.knots.get(i + 1) {
                if next > k {
                    knots.push(0.5 * (k + next));
                }
            }
        }
        Self { degree: self.degree, knots }
    }

    /// True when both vectors describe the same space up to rounding.
    pub fn matches(&self, other: &KnotVector, tol: f64) -> bool {
        self.degree == other.degree && self.knots.len() == other.knots.len() && self.knots.iter().zip(&other.knots).all(|(a, b)| (a - b).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Recursive Cox-de Boor definition, kept independent of the table-based
    /// evaluation above.
    fn cox_de_boor(knots: &[f64], i: usize, p: usize, x: f64, last: bool) -> f64 {
        if p == 0 {
            let inside = knots[i] <= x && x < knots[i + 1];
            // closure at the right end of the last non-empty span
            let closing = last && x == knots[i + 1] && knots[i] < knots[i + 1] && knots[i + 1..].iter().all(|&k| k == x);
            return if inside || closing { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * cox_de_boor(knots, i, p - 1, x, last);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - x) / d2 * cox_de_boor(knots, i + 1, p - 1, x, last);
        }
        v
    }

    #[test]
    fn uniform_constructor() {
        let kv = KnotVector::uniform(1, 1).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(kv.num_basis(), 2);

        let kv = KnotVector::uniform(2, 2).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(kv.num_basis(), 4);

        assert_eq!(KnotVector::uniform(3, 4).unwrap().num_basis(), 7);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(KnotVector::uniform(0, 3).is_err());
        assert!(KnotVector::uniform(2, 0).is_err());
        assert!(KnotVector::new(1, vec![0.0, 0.5, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(1, vec![0.0, 0.0, 0.7, 0.3, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn linear_hats() {
        let kv = KnotVector::uniform(1, 1).unwrap();
        let (first, v) = kv.eval_basis(0.25).unwrap();
        assert_eq!(first, 0);
        assert!((v[0] - 0.75).abs() < 1e-15 && (v[1] - 0.25).abs() < 1e-15);
        let (_, d) = kv.eval_basis_deriv(0.6).unwrap();
        assert!((d[0] + 1.0).abs() < 1e-15 && (d[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_midpoint_matches_recursive_oracle() {
        let kv = KnotVector::uniform(2, 2).unwrap();
        // frozen from the recursive oracle: N_1(0.5) = N_2(0.5) = 0.5, N_0 = N_3 = 0
        let frozen = [0.0, 0.5, 0.5, 0.0];
        for (i, f) in frozen.iter().enumerate() {
            let o = cox_de_boor(kv.knots(), i, 2, 0.5, true);
            assert!((o - f).abs() < 1e-15);
        }
        let (first, v) = kv.eval_basis(0.5).unwrap();
        let mut full = [0.0; 4];
        for (j, val) in v.iter().enumerate() {
            full[first + j] = *val;
        }
        for i in 0..4 {
            assert!((full[i] - frozen[i]).abs() < 1e-15, "i = {i}");
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let kv = KnotVector::uniform(2, 4).unwrap();
        let x = 0.25 + 1e-3; // stay off the knot so the FD stencil sees one span
        let h = 1e-6;
        let (first, d) = kv.eval_basis_deriv(x).unwrap();
        let (fp, vp) = kv.eval_basis(x + h).unwrap();
        let (fm, vm) = kv.eval_basis(x - h).unwrap();
        assert_eq!(first, fp);
        assert_eq!(first, fm);
        for j in 0..3 {
            let fd = (vp[j] - vm[j]) / (2.0 * h);
            assert!((fd - d[j]).abs() < 1e-6, "j={j}: {fd} vs {}", d[j]);
        }
    }

    #[test]
    fn evaluation_outside_domain_is_rejected() {
        let kv = KnotVector::uniform(2, 3).unwrap();
        assert!(matches!(kv.eval_basis(1.5), Err(Error::OutOfDomain(_))));
        assert!(kv.eval_basis_deriv(-0.1).is_err());
    }

    #[test]
    fn right_end_belongs_to_last_span() {
        let kv = KnotVector::uniform(3, 5).unwrap();
        let (first, v) = kv.eval_basis(1.0).unwrap();
        assert_eq!(first + 3, kv.num_basis() - 1);
        assert!((v[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn greville_and_reverse() {
        let kv = KnotVector::uniform(2, 2).unwrap();
        assert_eq!(kv.greville(), vec![0.0, 0.25, 0.75, 1.0]);
        let nonuniform = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.3, 1.0, 1.0, 1.0]).unwrap();
        let rev = nonuniform.reversed();
        assert!((rev.knots()[3] - 0.7).abs() < 1e-15);
        assert!(rev.reversed().matches(&nonuniform, 1e-15));
        assert_eq!(kv.refined().num_elements(), 4);
    }

    #[test]
    fn partition_of_unity_dense_sample() {
        let mut state = 0x2545f4914f6cdd1du64;
        for p in 1..=4 {
            let kv = KnotVector::uniform(p, 7).unwrap();
            for _ in 0..2500 {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let x = (state >> 11) as f64 / (1u64 << 53) as f64;
                let (_, v) = kv.eval_basis(x).unwrap();
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn values_agree_with_recursive_definition(p in 1usize..5, elements in 1usize..7, x in 0.0f64..=1.0) {
            let kv = KnotVector::uniform(p, elements).unwrap();
            let (first, v) = kv.eval_basis(x).unwrap();
            for i in 0..kv.num_basis() {
                let expected = cox_de_boor(kv.knots(), i, p, x, true);
                let got = if i >= first && i <= first + p { v[i - first] } else { 0.0 };
                prop_assert!((expected - got).abs() < 1e-12);
            }
        }

        #[test]
        fn local_support_and_positivity(p in 1usize..5, elements in 1usize..9, x in 0.0f64..=1.0) {
            let kv = KnotVector::uniform(p, elements).unwrap();
            let (first, v) = kv.eval_basis(x).unwrap();
            for (j, val) in v.iter().enumerate() {
                let i = first + j;
                prop_assert!(*val >= -1e-15);
                if *val > 1e-14 {
                    prop_assert!(kv.knots()[i] <= x && x <= kv.knots()[i + p + 1]);
                }
            }
            let (_, d) = kv.eval_basis_deriv(x).unwrap();
            prop_assert!(d.iter().sum::<f64>().abs() < 1e-10);
        }
    }
}
