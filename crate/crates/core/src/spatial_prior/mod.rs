//! Second-order random walk (RW2D) prior on the grid and the block-diagonal
//! prior precision of a multi-parameter field.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid_data::GridSpec;
use crate::scalar::Real;
use crate::sparse_linalg::{cholesky, kron, CscMatrix, SparseSym};

/// `D_n = ¼ · tridiag(−1; 1, 2, …, 2, 1; −1)`.
pub fn make_dn<T: Real>(n: usize) -> Result<CscMatrix<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("D_n needs n >= 2, got {n}")));
    }
    let q = T::lit(0.25);
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        let d = if i == 0 || i == n - 1 { q } else { q + q };
        trip.push((i, i, d));
        if i + 1 < n {
            trip.push((i, i + 1, -q));
            trip.push((i + 1, i, -q));
        }
    }
    CscMatrix::from_triplets(n, n, trip)
}

/// RW2D structure on a grid: `D = D_{N_j} ⊗ I_{N_i} + I_{N_j} ⊗ D_{N_i}` and
/// `R = D′D`. `R` has rank `S − 1` with the constants as null space.
#[derive(Debug, Clone)]
pub struct Rw2dStructure<T> {
    pub grid: GridSpec,
    pub d: CscMatrix<T>,
    pub r: SparseSym<T>,
}

pub fn make_structure<T: Real>(grid: &GridSpec) -> Result<Rw2dStructure<T>> {
    let (ni, nj) = (grid.n_rows(), grid.n_cols());
    let d = kron(&make_dn(nj)?, &CscMatrix::identity(ni))?
        .add(&kron(&CscMatrix::identity(nj), &make_dn(ni)?)?)?;
    let r = d.transpose().matmul(&d)?;
    // average with the transpose to remove any rounding asymmetry
    let half = T::lit(0.5);
    let r = SparseSym::new(r.add(&r.transpose())?.scale(half))?;
    Ok(Rw2dStructure {
        grid: grid.clone(),
        d,
        r,
    })
}

impl<T: Real> Rw2dStructure<T> {
    pub fn n_sites(&self) -> usize {
        self.grid.n_sites()
    }

    /// Unconditional draws from the intrinsic prior do not exist.
    pub fn sample<R: Rng + ?Sized>(&self, _kappa: T, _rng: &mut R) -> Result<Vec<T>> {
        Err(Error::InvalidArgument(
            "the RW2D precision is rank deficient; sample with one site pinned instead".into(),
        ))
    }

    /// Draw a field with precision `κR` conditioned on `x[pin] = value`.
    pub fn sample_pinned<R: Rng + ?Sized>(&self, kappa: T, pin: usize, value: T, rng: &mut R) -> Result<Vec<T>> {
        let n = self.n_sites();
        if pin >= n {
            return Err(Error::Index(format!("pinned site {pin} outside 0..{n}")));
        }
        if !(kappa > T::zero()) {
            return Err(Error::InvalidArgument("kappa must be positive".into()));
        }
        let keep = |i: usize| if i < pin { Some(i) } else if i > pin { Some(i - 1) } else { None };
        let trip = self
            .r
            .as_csc()
            .triplets()
            .filter_map(|(r, c, v)| Some((keep(r)?, keep(c)?, v * kappa)));
        let sub = SparseSym::new(CscMatrix::from_triplets(n - 1, n - 1, trip)?)?;
        let free = cholesky(&sub)?.sample(rng);
        // conditional mean of the free sites given x[pin] = value is value·1
        let mut x = Vec::with_capacity(n);
        for i in 0..n {
            x.push(match keep(i) {
                Some(k) => value + free[k],
                None => value,
            });
        }
        Ok(x)
    }
}

/// Prior for a `p`-parameter field in blocked order.
#[derive(Debug, Clone)]
pub struct PriorSpec<T> {
    pub structure: Rw2dStructure<T>,
    pub kappas: Vec<T>,
    /// Prior mean `μ_θ` in blocked order (length `p·S`).
    pub prior_mean: Vec<T>,
}

impl<T: Real> PriorSpec<T> {
    /// Zero-mean prior.
    pub fn new(structure: Rw2dStructure<T>, kappas: Vec<T>) -> Self {
        let len = kappas.len() * structure.n_sites();
        Self {
            structure,
            kappas,
            prior_mean: vec![T::zero(); len],
        }
    }

    pub fn with_prior_mean(mut self, mean: Vec<T>) -> Result<Self> {
        if mean.len() != self.kappas.len() * self.structure.n_sites() {
            return Err(Error::Dimension(format!(
                "prior mean has length {}, expected {}",
                mean.len(),
                self.kappas.len() * self.structure.n_sites()
            )));
        }
        self.prior_mean = mean;
        Ok(self)
    }

    pub fn n_params(&self) -> usize {
        self.kappas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.kappas.iter().find(|k| !(**k > T::zero()) || !k.is_finite()) {
            return Err(Error::InvalidArgument(format!("precision parameters must be positive, got {k}")));
        }
        Ok(())
    }
}

/// `blockdiag(κ_1 R, …, κ_p R)`; zero weights are allowed here.
pub fn block_precision<T: Real>(r: &SparseSym<T>, kappas: &[T]) -> Result<SparseSym<T>> {
    let blocks: Vec<SparseSym<T>> = kappas.iter().map(|&k| r.scale(k)).collect();
    SparseSym::block_diag(&blocks.iter().collect::<Vec<_>>())
}

/// Prior precision `Q_θ`.
pub fn assemble_q<T: Real>(prior: &PriorSpec<T>) -> Result<SparseSym<T>> {
    prior.validate()?;
    block_precision(&prior.structure.r, &prior.kappas)
}

/// `log det Q_θ` up to a κ-independent constant, which is set to zero:
/// `(S − 1) Σ_m log κ_m`.
pub fn q_logdet_generalized<T: Real>(prior: &PriorSpec<T>) -> T {
    logdet_generalized(prior.structure.n_sites(), &prior.kappas)
}

pub(crate) fn logdet_generalized<T: Real>(n_sites: usize, kappas: &[T]) -> T {
    T::from_usize_lossy(n_sites - 1) * kappas.iter().map(|k| k.ln()).sum::<T>()
}
