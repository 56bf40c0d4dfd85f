use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopCount {
    pub multiplies: u64,
    pub adds: u64,
    pub total: u64,
}

impl FlopCount {
    pub fn new(multiplies: u64, adds: u64) -> Self {
        FlopCount { multiplies, adds, total: multiplies + adds }
    }

    /// Scale to `n` independent elements.
    pub fn times(self, n: u64) -> Self {
        FlopCount::new(self.multiplies * n, self.adds * n)
    }
}

impl Add for FlopCount {
    type Output = FlopCount;

    fn add(self, o: FlopCount) -> FlopCount {
        FlopCount::new(self.multiplies + o.multiplies, self.adds + o.adds)
    }
}

impl AddAssign for FlopCount {
    fn add_assign(&mut self, o: FlopCount) {
        *self = *self + o;
    }
}

/// Closed form for the factorized Helmholtz kernel: six p^4 multiply-add
/// stages and one p^3 Hadamard product, `(12p + 1) p^3` in total.
pub fn count_flops_helmholtz(p: u64) -> FlopCount {
    let p3 = p * p * p;
    FlopCount::new((6 * p + 1) * p3, 6 * p * p3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(count_flops_helmholtz(11).total, 177_023);
        assert_eq!(count_flops_helmholtz(7).total, 29_155);
        assert_eq!(count_flops_helmholtz(1).total, 13);
        let c = count_flops_helmholtz(11);
        assert_eq!(c.total, c.multiplies + c.adds);
    }
}
