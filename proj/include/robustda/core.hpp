#pragma once

// Core value types for robust multivariate regression with incomplete
// responses: datasets with observation masks, priors, regression states,
// latent weights and recorded chains.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace robustda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// n x d observation mask; true marks an observed response entry.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Errors. Every module throws a subclass of Error so the CLI can attribute
// failures to the module that raised them.

class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(what), module_(std::move(module)) {}
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

#define ROBUSTDA_DEFINE_ERROR(Name, Module)                                   \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what) : Error(Module, what) {}       \
    };

ROBUSTDA_DEFINE_ERROR(InvalidArgument, "data_model")
ROBUSTDA_DEFINE_ERROR(DegenerateScatter, "data_model")
ROBUSTDA_DEFINE_ERROR(StructureError, "missing_structures")
ROBUSTDA_DEFINE_ERROR(MixingError, "mixing")
ROBUSTDA_DEFINE_ERROR(TiltDegenerate, "mixing")
ROBUSTDA_DEFINE_ERROR(SamplingBudgetExceeded, "mixing")
ROBUSTDA_DEFINE_ERROR(OracleError, "mixing")
ROBUSTDA_DEFINE_ERROR(H1Violation, "samplers")
ROBUSTDA_DEFINE_ERROR(NumericalDegeneracy, "samplers")
ROBUSTDA_DEFINE_ERROR(ImproperConditional, "samplers")
ROBUSTDA_DEFINE_ERROR(ChainError, "samplers")
ROBUSTDA_DEFINE_ERROR(InsufficientData, "diagnostics")
ROBUSTDA_DEFINE_ERROR(IngestionError, "cli")
ROBUSTDA_DEFINE_ERROR(ParseError, "cli")
ROBUSTDA_DEFINE_ERROR(ConfigError, "cli")

#undef ROBUSTDA_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Numerical helpers shared by every module.

namespace linalg {

/// Positive-definiteness criterion used throughout: Cholesky succeeds and
/// every diagonal entry of the factor exceeds this value.
inline constexpr double kPdDiagonalFloor = 1e-12;
inline constexpr double kSymmetryTolerance = 1e-10;

/// Lower Cholesky factor, or nullopt when the matrix is not positive definite
/// under the shared criterion.
inline std::optional<Matrix> try_cholesky(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) return std::nullopt;
    if (!m.allFinite()) return std::nullopt;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Matrix l = llt.matrixL();
    if ((l.diagonal().array() <= kPdDiagonalFloor).any()) return std::nullopt;
    return l;
}

inline bool is_positive_definite(const Matrix& m) { return try_cholesky(m).has_value(); }

inline bool is_symmetric(const Matrix& m, double tol = kSymmetryTolerance) {
    return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Reverses row and column order (J m J with J the exchange matrix).
inline Matrix reversed(const Matrix& m) { return m.reverse(); }

/// Lower-triangular e with e e^T = m^{-1}, computed from the Cholesky factor
/// of the reversed matrix; m^{-1} itself is never formed.
///
/// If J m J = L L^T then m^{-1} = (J L^{-T} J)(J L^{-T} J)^T, and J L^{-T} J
/// is lower triangular with positive diagonal.
inline std::optional<Matrix> try_lower_cholesky_of_inverse(const Matrix& m) {
    auto l = try_cholesky(reversed(m));
    if (!l) return std::nullopt;
    const Index k = m.rows();
    Matrix l_inv_t = l->transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));
    return reversed(l_inv_t);
}

/// Solves m x = b through a lower Cholesky factor l of m.
inline Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
    Matrix tmp = l.triangularView<Eigen::Lower>().solve(b);
    return l.transpose().triangularView<Eigen::Upper>().solve(tmp);
}

inline std::vector<Index> true_indices(const Eigen::Ref<const Eigen::Array<bool, 1, Eigen::Dynamic>>& row) {
    std::vector<Index> out;
    for (Index j = 0; j < row.size(); ++j)
        if (row(j)) out.push_back(j);
    return out;
}

}  // namespace linalg

// ---------------------------------------------------------------------------
// Value types.

/// Response matrix with observation mask plus a fully observed design matrix.
///
/// Masked response entries are stored as 0; the mask is authoritative and no
/// sampler reads a masked value.
class Dataset {
public:
    Dataset() = default;

    Dataset(Matrix y, Mask observed, Matrix x)
        : y_(std::move(y)), observed_(std::move(observed)), x_(std::move(x)) {
        if (y_.rows() == 0 || y_.cols() == 0 || x_.cols() == 0)
            throw InvalidArgument("dataset dimensions must be positive");
        if (x_.rows() != y_.rows())
            throw InvalidArgument("design matrix has " + std::to_string(x_.rows()) +
                                  " rows but response has " + std::to_string(y_.rows()));
        if (observed_.rows() != y_.rows() || observed_.cols() != y_.cols())
            throw InvalidArgument("mask shape does not match response shape");
        if (!x_.allFinite()) throw InvalidArgument("design matrix contains non-finite values");
        for (Index i = 0; i < y_.rows(); ++i) {
            if (!observed_.row(i).any())
                throw InvalidArgument("row " + std::to_string(i + 1) + " has no observed response");
            for (Index j = 0; j < y_.cols(); ++j) {
                if (!observed_(i, j))
                    y_(i, j) = 0.0;
                else if (!std::isfinite(y_(i, j)))
                    throw InvalidArgument("response entry (" + std::to_string(i + 1) + "," +
                                          std::to_string(j + 1) + ") is not finite");
            }
        }
    }

    /// Fully observed dataset.
    static Dataset complete(Matrix y, Matrix x) {
        Mask m = Mask::Constant(y.rows(), y.cols(), true);
        return Dataset(std::move(y), std::move(m), std::move(x));
    }

    Index n() const { return y_.rows(); }
    Index d() const { return y_.cols(); }
    Index p() const { return x_.cols(); }

    const Matrix& y() const { return y_; }
    const Matrix& x() const { return x_; }
    const Mask& observed() const { return observed_; }

    /// d_i: number of observed responses in row i.
    Index observed_count(Index i) const { return observed_.row(i).count(); }
    Index min_observed_count() const {
        Index best = d();
        for (Index i = 0; i < n(); ++i) best = std::min(best, observed_count(i));
        return best;
    }
    bool fully_observed() const { return observed_.all(); }

    /// Copy with the given entries filled in and marked observed.
    Dataset with_filled(const Matrix& y_full, const Mask& new_mask) const {
        return Dataset(y_full, new_mask, x_);
    }

private:
    Matrix y_;
    Mask observed_;
    Matrix x_;
};

/// Prior density proportional to |sigma|^{-(m+1)/2} exp(-tr(sigma^{-1} a)/2).
struct Prior {
    double m = 0.0;
    Matrix a;

    Prior() = default;
    Prior(double m_, Matrix a_) : m(m_), a(std::move(a_)) { validate(); }

    /// Independence Jeffreys prior: m = d, a = 0.
    static Prior jeffreys(Index d) { return Prior(static_cast<double>(d), Matrix::Zero(d, d)); }

    void validate() const {
        if (!std::isfinite(m)) throw InvalidArgument("prior scalar m must be finite");
        if (a.rows() != a.cols() || a.rows() == 0) throw InvalidArgument("prior matrix a must be square");
        if (!linalg::is_symmetric(a)) throw InvalidArgument("prior matrix a is not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrized(a), Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw InvalidArgument("prior matrix a is not positive semi-definite");
    }
};

/// One draw (B, Sigma): p x d coefficients and d x d scatter matrix.
struct RegressionState {
    Matrix beta;
    Matrix sigma;

    RegressionState() = default;
    RegressionState(Matrix b, Matrix s) : beta(std::move(b)), sigma(std::move(s)) { validate(); }

    void validate() const {
        if (sigma.rows() != sigma.cols() || beta.cols() != sigma.rows())
            throw InvalidArgument("state dimensions are inconsistent");
        if (!linalg::is_symmetric(sigma)) throw InvalidArgument("scatter matrix is not symmetric");
        if (!linalg::is_positive_definite(sigma))
            throw DegenerateScatter("scatter matrix is not positive definite");
    }
};

struct LatentWeights {
    Vector w;

    LatentWeights() = default;
    explicit LatentWeights(Vector v) : w(std::move(v)) {
        for (Index i = 0; i < w.size(); ++i)
            if (!(w(i) > 0.0) || !std::isfinite(w(i)))
                throw InvalidArgument("latent weight " + std::to_string(i + 1) +
                                      " is not a finite positive number");
    }
};

/// A response cell addressed by zero-based row and column.
struct Cell {
    Index row = 0;
    Index col = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct ChainMeta {
    std::uint64_t seed = 0;
    std::string algorithm;
    /// Number of recorded iterations; every recorded sequence has this length.
    std::size_t iterations = 0;
    std::size_t burn_in = 0;
    std::chrono::duration<double> duration{0.0};
    std::vector<std::string> warnings;

    double minutes() const { return duration.count() / 60.0; }
};

/// Recorded chain: ordered draws, optionally with latent weights and
/// imputed values. Imputed values for iteration t are listed in the order of
/// `imputed_cells`.
struct ChainOutput {
    std::vector<RegressionState> states;
    std::optional<std::vector<LatentWeights>> weights;
    std::vector<Cell> imputed_cells;
    std::optional<std::vector<Vector>> imputations;
    ChainMeta meta;

    bool consistent() const {
        const auto len = meta.iterations;
        if (states.size() != len) return false;
        if (weights && weights->size() != len) return false;
        if (imputations) {
            if (imputations->size() != len) return false;
            for (const auto& v : *imputations)
                if (static_cast<std::size_t>(v.size()) != imputed_cells.size()) return false;
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Operations.

/// Mahalanobis-type residual of the observed part of row i:
/// (y_obs - C B^T x_i)^T (C Sigma C^T)^{-1} (y_obs - C B^T x_i).
inline double residual_quadratic_form(const RegressionState& state, const Dataset& data, Index i) {
    const auto obs = linalg::true_indices(data.observed().row(i));
    if (obs.empty()) throw InvalidArgument("row " + std::to_string(i + 1) + " has no observed entries");
    const Vector mean = state.beta.transpose() * data.x().row(i).transpose();
    Vector resid(static_cast<Index>(obs.size()));
    for (std::size_t k = 0; k < obs.size(); ++k) resid(static_cast<Index>(k)) = data.y()(i, obs[k]) - mean(obs[k]);
    const Matrix block = state.sigma(obs, obs);
    auto l = linalg::try_cholesky(block);
    if (!l)
        throw DegenerateScatter("observed block of the scatter matrix is singular for row " +
                                std::to_string(i + 1));
    Vector z = l->triangularView<Eigen::Lower>().solve(resid);
    return z.squaredNorm();
}

/// Sum of residual quadratic forms over all rows.
inline double drift_value(const RegressionState& state, const Dataset& data) {
    double total = 0.0;
    for (Index i = 0; i < data.n(); ++i) total += residual_quadratic_form(state, data, i);
    return total;
}

}  // namespace robustda
