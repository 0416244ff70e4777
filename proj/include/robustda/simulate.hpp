#pragma once

// Synthetic datasets for simulation studies: x_i = (1, xi_i) with standard
// normal xi_i, errors drawn as w ~ mixing then eps ~ N(0, Sigma_true / w).

#include "robustda/core.hpp"
#include "robustda/missing.hpp"
#include "robustda/mixing.hpp"
#include "robustda/random.hpp"

#include <cstdint>
#include <string>

namespace robustda {

struct SimulationBlock {
    Index n = 50;
    Index d = 2;
    Index p = 2;
    /// p x d; all ones when left empty.
    Matrix coefficients;
    /// d x d; identity when left empty.
    Matrix sigma;
    MixingSpec mixing = family::Gamma{1.0, 1.0};
    std::uint64_t seed = 1;

    Matrix coefficients_or_default() const { return coefficients.size() ? coefficients : Matrix::Ones(p, d); }
    Matrix sigma_or_default() const { return sigma.size() ? sigma : Matrix::Identity(d, d); }

    void validate() const {
        if (n < 1 || d < 1 || p < 1) throw InvalidArgument("simulate: n, d and p must be positive");
        const Matrix b = coefficients_or_default(), s = sigma_or_default();
        if (b.rows() != p || b.cols() != d)
            throw InvalidArgument("simulate: coefficient matrix must be " + std::to_string(p) + " x " +
                                  std::to_string(d));
        if (s.rows() != d || s.cols() != d) throw InvalidArgument("simulate: sigma must be " + std::to_string(d) + " x " + std::to_string(d));
        if (!linalg::is_symmetric(s) || !linalg::is_positive_definite(s))
            throw DegenerateScatter("simulate: sigma must be symmetric positive definite");
    }
};

/// Fully observed synthetic dataset. Per row, draws are taken in the order
/// xi_i (p - 1 normals), w_i, then d normals for the error.
template <class URBG>
Dataset simulate_dataset(const SimulationBlock& block, URBG& rng) {
    block.validate();
    const Matrix b = block.coefficients_or_default();
    const Matrix l = *linalg::try_cholesky(block.sigma_or_default());
    Matrix x(block.n, block.p), y(block.n, block.d);
    for (Index i = 0; i < block.n; ++i) {
        x(i, 0) = 1.0;
        for (Index k = 1; k < block.p; ++k) x(i, k) = rnd::standard_normal(rng);
        const double w = sample_mixing(block.mixing, rng);
        Vector z(block.d);
        for (Index k = 0; k < block.d; ++k) z(k) = rnd::standard_normal(rng);
        y.row(i) = (b.transpose() * x.row(i).transpose() + l * z / std::sqrt(w)).transpose();
    }
    return Dataset::complete(std::move(y), std::move(x));
}

inline Dataset simulate_dataset(const SimulationBlock& block) {
    Rng rng(block.seed);
    return simulate_dataset(block, rng);
}

/// Monotone structure with the first `complete_rows` rows fully observed and
/// every other row observing only the last response.
inline MissingStructure complete_rows_structure(Index n, Index d, Index complete_rows) {
    if (complete_rows < 1 || complete_rows > n)
        throw InvalidArgument("complete_rows must lie in [1, " + std::to_string(n) + "]");
    Mask m = Mask::Constant(n, d, true);
    for (Index i = complete_rows; i < n; ++i) m.row(i).head(d - 1).setConstant(false);
    return MissingStructure(std::move(m));
}

/// Copy of `data` with the entries outside `ms` masked.
inline Dataset apply_structure(const Dataset& data, const MissingStructure& ms) {
    if (ms.n() != data.n() || ms.d() != data.d()) throw StructureError("structure shape does not match the dataset");
    if ((ms.mask() && !data.observed()).any())
        throw StructureError("structure observes entries that are missing in the dataset");
    return Dataset(data.y(), ms.mask(), data.x());
}

}  // namespace robustda
