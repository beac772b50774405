//! Dirichlet characters modulo an odd prime, enumerated through a primitive
//! root, as an exact oracle for Steinhaus moments.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{ensure, Result};
use crate::stats::compensated_sum;

pub const MAX_MODULUS: u32 = 1_000_000;

#[derive(Clone, Debug)]
pub struct CharacterTable {
    pub p: u32,
    pub g: u32,
    /// dlog[n] for 1 ≤ n ≤ p−1, with g^{dlog[n]} ≡ n (mod p). Entry 0 unused.
    pub dlog: Vec<u32>,
}

fn is_prime_trial(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

fn prime_divisors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

pub fn build_character_table(p: u32) -> Result<CharacterTable> {
    ensure((3..=MAX_MODULUS).contains(&p), || format!("modulus {p} outside [3, {MAX_MODULUS}]"))?;
    ensure(is_prime_trial(p), || format!("modulus {p} is not prime"))?;
    let order = (p - 1) as u64;
    let qs = prime_divisors(p - 1);
    let g = (2..p)
        .find(|&g| qs.iter().all(|&q| pow_mod(g as u64, order / q as u64, p as u64) != 1))
        .expect("every prime modulus has a primitive root");
    let mut dlog = vec![0u32; p as usize];
    let mut v = 1u64;
    for k in 0..order {
        dlog[v as usize] = k as u32;
        v = v * g as u64 % p as u64;
    }
    Ok(CharacterTable { p, g, dlog })
}

impl CharacterTable {
    /// χ_j(n) = e^{2πi·j·dlog[n]/(p−1)} for p ∤ n.
    pub fn chi(&self, j: u32, n: u64) -> Complex64 {
        let m = (self.p - 1) as u64;
        let r = n % self.p as u64;
        if r == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let k = (j as u64 * self.dlog[r as usize] as u64) % m;
        Complex64::from_polar(1.0, TAU * k as f64 / m as f64)
    }

    /// (1/(p−1)) Σ_χ |Σ_{n≤x} χ(n)|^{2q}, with 0^0 = 1.
    pub fn char_sum_moment(&self, x: u64, q: f64) -> Result<f64> {
        ensure(x >= 1 && x < self.p as u64, || format!("need 1 <= x < p, got x = {x}, p = {}", self.p))?;
        ensure((0.0..=1.0).contains(&q), || format!("q = {q} outside [0, 1]"))?;
        let m = (self.p - 1) as u64;
        let roots: Vec<Complex64> = (0..m).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / m as f64)).collect();
        let logs: Vec<u64> = (1..=x).map(|n| self.dlog[n as usize] as u64).collect();
        let terms: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut s = Complex64::new(0.0, 0.0);
                for &l in &logs {
                    s += roots[((j * l) % m) as usize];
                }
                s.norm_sqr().powf(q)
            })
            .collect();
        Ok(compensated_sum(terms) / m as f64)
    }
}
