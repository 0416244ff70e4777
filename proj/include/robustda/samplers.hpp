#pragma once

// Data augmentation samplers for robust multivariate regression with
// incomplete responses.
//
//   DA:  I step (latent weights given (B, Sigma)) then the monotone P step,
//        with optional post hoc imputation replayed after the chain.
//   DAI: I1 step (latent weights), I2 step (conditional-normal imputation of
//        the entries in k' - k), then the P step on the k'-completed data.
//
// Random draw order within one iteration is fixed: w_1..w_n; then for
// l = 1..d the vector f_l (diagonal first, then off-diagonals top to bottom);
// then z_1..z_d; then imputations row-major.

#include "robustda/core.hpp"
#include "robustda/missing.hpp"
#include "robustda/mixing.hpp"
#include "robustda/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace robustda {

struct DaConfig {
    std::size_t iterations = 0;
    std::size_t burn_in = 0;
    std::uint64_t seed = 0;
    bool record_weights = false;
    bool posthoc_impute = false;

    void validate() const {
        if (iterations == 0) throw InvalidArgument("iterations must be positive");
        if (burn_in >= iterations) throw InvalidArgument("burn_in must be smaller than iterations");
    }
};

struct DaiConfig : DaConfig {
    /// Monotone superstructure of the observed structure, chosen by the user.
    MissingStructure k_prime;
};

/// Deterministic quantities of one pattern in the monotone P step.
struct PatternWork {
    Matrix gram;       // G_l = x_(k,l)^T lambda'_l x_(k,l), p x p
    Matrix beta_hat;   // p x (d-l+1) weighted least squares coefficients
    Matrix scatter;    // s_l, weighted residual cross-products
    Matrix c;          // a_l + s_l
    Matrix e;          // lower Cholesky factor of c^{-1}
    Matrix u;          // lower Cholesky factor of G_l^{-1}
    double df = 0.0;   // chi-square degrees of freedom of the diagonal factor
};

struct PatternSweepWork {
    std::vector<PatternWork> patterns;
    /// d x d lower-triangular factor with Sigma^{-1} = h h^T (filled by a draw).
    Matrix h;
};

/// Conditional-normal law of one row's target-missing entries.
struct ConditionalNormal {
    std::vector<Index> missing;   // columns to impute
    std::vector<Index> observed;  // conditioning columns
    Vector mean;
    Matrix cov;  // already scaled by 1/w_i
};

struct Imputation {
    std::vector<Cell> cells;
    Vector values;
};

namespace detail {

/// Builds the per-pattern quantities from raw matrices; `cumulative[l-1]`
/// is N_l and rows are in monotone order.
inline PatternSweepWork build_sweep(const Matrix& y, const Matrix& x, const std::vector<Index>& cumulative,
                                    const Prior& prior, const Vector& w) {
    const Index d = y.cols(), p = x.cols();
    PatternSweepWork work;
    work.patterns.reserve(static_cast<std::size_t>(d));
    for (Index l = 1; l <= d; ++l) {
        const Index rows = cumulative[static_cast<std::size_t>(l - 1)];
        const Index q = d - l + 1;
        PatternWork pw;
        pw.df = pattern_degrees_of_freedom(rows, l, prior.m, p, d);
        if (!(pw.df > 0.0))
            throw H1Violation("pattern " + std::to_string(l) + ": chi-square degrees of freedom " +
                              std::to_string(pw.df) + " are not positive");
        const auto xl = x.topRows(rows);
        const auto yl = y.block(0, l - 1, rows, q);
        const auto wl = w.head(rows);
        const Matrix wx = wl.asDiagonal() * xl;
        pw.gram = xl.transpose() * wx;
        auto lg = linalg::try_cholesky(pw.gram);
        if (!lg) throw NumericalDegeneracy("pattern " + std::to_string(l) + ": weighted Gram matrix is singular");
        pw.beta_hat = linalg::cholesky_solve(*lg, wx.transpose() * yl);
        const Matrix resid = yl - xl * pw.beta_hat;
        pw.scatter = resid.transpose() * wl.asDiagonal() * resid;
        pw.c = prior.a.bottomRightCorner(q, q) + pw.scatter;
        auto e = linalg::try_lower_cholesky_of_inverse(pw.c);
        if (!e) throw NumericalDegeneracy("pattern " + std::to_string(l) + ": a_l + s_l is not positive definite");
        pw.e = std::move(*e);
        auto u = linalg::try_lower_cholesky_of_inverse(pw.gram);
        if (!u) throw NumericalDegeneracy("pattern " + std::to_string(l) + ": weighted Gram matrix is singular");
        pw.u = std::move(*u);
        work.patterns.push_back(std::move(pw));
    }
    return work;
}

template <class URBG>
RegressionState monotone_p_step(const Matrix& y, const Matrix& x, const std::vector<Index>& cumulative,
                                const Prior& prior, const Vector& w, URBG& rng, PatternSweepWork* out = nullptr) {
    const Index d = y.cols(), p = x.cols();
    PatternSweepWork work = build_sweep(y, x, cumulative, prior, w);

    // Sigma^{-1} = h h^T, column l of h (rows l..d) = e_l f_l.
    Matrix h = Matrix::Zero(d, d);
    for (Index l = 1; l <= d; ++l) {
        const auto& pw = work.patterns[static_cast<std::size_t>(l - 1)];
        const Index q = d - l + 1;
        Vector f(q);
        f(0) = std::sqrt(rnd::chi_square(pw.df, rng));
        for (Index k = 1; k < q; ++k) f(k) = rnd::standard_normal(rng);
        h.block(l - 1, l - 1, q, 1) = pw.e * f;
    }
    if ((h.diagonal().array() <= 0.0).any()) throw NumericalDegeneracy("P step produced a non-positive diagonal in h");

    Matrix m(p, d);
    for (Index l = 1; l <= d; ++l) {
        const auto& pw = work.patterns[static_cast<std::size_t>(l - 1)];
        Vector z(p);
        for (Index k = 0; k < p; ++k) z(k) = rnd::standard_normal(rng);
        const Index q = d - l + 1;
        m.col(l - 1) = pw.u * z + pw.beta_hat * h.block(l - 1, l - 1, q, 1);
    }

    // B = m h^{-1}  <=>  h^T B^T = m^T.
    RegressionState s;
    s.beta = h.transpose().triangularView<Eigen::Upper>().solve(m.transpose()).transpose();
    const Matrix h_inv = h.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
    s.sigma = linalg::symmetrized(h_inv.transpose() * h_inv);
    if (out) {
        work.h = h;
        *out = std::move(work);
    }
    return s;
}

template <class URBG>
RegressionState full_p_step(const Matrix& y, const Matrix& x, const Prior& prior, const Vector& w, URBG& rng) {
    const Index n = y.rows(), d = y.cols(), p = x.cols();
    const double nu = static_cast<double>(n - p - d) + prior.m;
    if (!(nu > static_cast<double>(d - 1)))
        throw ImproperConditional("inverse Wishart degrees of freedom " + std::to_string(nu) + " must exceed d - 1");
    const Matrix wx = w.asDiagonal() * x;
    const Matrix gram = x.transpose() * wx;
    auto lg = linalg::try_cholesky(gram);
    if (!lg) throw NumericalDegeneracy("weighted Gram matrix is singular");
    const Matrix beta_hat = linalg::cholesky_solve(*lg, wx.transpose() * y);
    const Matrix resid = y - x * beta_hat;
    const Matrix c = resid.transpose() * w.asDiagonal() * resid + prior.a;
    auto l_scale = linalg::try_lower_cholesky_of_inverse(c);
    if (!l_scale) throw NumericalDegeneracy("s + a is not positive definite");

    // Bartlett: Sigma^{-1} = (L A)(L A)^T with A lower triangular,
    // A_jj^2 ~ chi2(nu - j), A_ij ~ N(0,1) below the diagonal.
    Matrix a = Matrix::Zero(d, d);
    for (Index j = 0; j < d; ++j) {
        a(j, j) = std::sqrt(rnd::chi_square(nu - static_cast<double>(j), rng));
        for (Index i = j + 1; i < d; ++i) a(i, j) = rnd::standard_normal(rng);
    }
    const Matrix h = (*l_scale) * a;
    const Matrix h_inv = h.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
    RegressionState s;
    s.sigma = linalg::symmetrized(h_inv.transpose() * h_inv);

    // B = beta_hat + L_xi Z L_Sigma^T.
    auto l_xi = linalg::try_lower_cholesky_of_inverse(gram);
    auto l_sigma = linalg::try_cholesky(s.sigma);
    if (!l_xi || !l_sigma) throw NumericalDegeneracy("matrix normal factors are not positive definite");
    Matrix z(p, d);
    for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < p; ++i) z(i, j) = rnd::standard_normal(rng);
    s.beta = beta_hat + (*l_xi) * z * l_sigma->transpose();
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Steps.

/// I step: w_i drawn independently from the tilted conditional with
/// d_i observed entries and residual r_i, for i = 1..n in order.
template <class URBG>
LatentWeights i_step(const RegressionState& state, const Dataset& data, const MixingSpec& spec, URBG& rng) {
    Vector w(data.n());
    for (Index i = 0; i < data.n(); ++i) {
        const double r = residual_quadratic_form(state, data, i);
        try {
            w(i) = sample_tilted(spec, data.observed_count(i), r, rng);
        } catch (const TiltDegenerate& e) {
            throw TiltDegenerate("row " + std::to_string(i + 1) + ": " + e.what());
        } catch (const SamplingBudgetExceeded& e) {
            throw SamplingBudgetExceeded("row " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    LatentWeights out;
    out.w = std::move(w);
    return out;
}

/// Deterministic part of the monotone P step (exposed for inspection).
inline PatternSweepWork build_sweep_work(const MonotoneDecomposition& dec, const Dataset& data, const Prior& prior,
                                         const LatentWeights& w) {
    return detail::build_sweep(data.y(), data.x(), dec.cumulative, prior, w.w);
}

/// Monotone P step: one draw of (B, Sigma) given the weights and the observed
/// responses. `data` must be in the decomposition's monotone order.
template <class URBG>
RegressionState p_step_monotone(const MonotoneDecomposition& dec, const Dataset& data, const Prior& prior,
                                const LatentWeights& w, URBG& rng, PatternSweepWork* work = nullptr) {
    if (dec.d() != data.d() || dec.n() != data.n())
        throw StructureError("decomposition does not match the dataset");
    if (w.w.size() != data.n()) throw InvalidArgument("weight vector length does not match the dataset");
    return detail::monotone_p_step(data.y(), data.x(), dec.cumulative, prior, w.w, rng, work);
}

/// Complete-data P step: Sigma ~ IW_d(n - p + m - d, s + a) and
/// B | Sigma ~ N_{p,d}(beta_hat, xi, Sigma).
template <class URBG>
RegressionState p_step_full(const Dataset& data_complete, const Prior& prior, const LatentWeights& w, URBG& rng) {
    if (!data_complete.fully_observed()) throw StructureError("p_step_full requires fully observed responses");
    if (w.w.size() != data_complete.n()) throw InvalidArgument("weight vector length does not match the dataset");
    return detail::full_p_step(data_complete.y(), data_complete.x(), prior, w.w, rng);
}

/// Conditional law of row i's entries that are observed under `targets` but
/// missing in `data`, given the observed entries, (B, Sigma) and w_i.
inline ConditionalNormal conditional_normal_parameters(const RegressionState& state, const Dataset& data,
                                                       const LatentWeights& w, const MissingStructure& targets,
                                                       Index i) {
    ConditionalNormal cn;
    for (Index j = 0; j < data.d(); ++j) {
        if (data.observed()(i, j))
            cn.observed.push_back(j);
        else if (targets(i, j))
            cn.missing.push_back(j);
    }
    if (cn.missing.empty()) return cn;
    const Vector mu = state.beta.transpose() * data.x().row(i).transpose();
    const auto& O = cn.observed;
    const auto& M = cn.missing;
    auto lo = linalg::try_cholesky(state.sigma(O, O));
    if (!lo) throw NumericalDegeneracy("row " + std::to_string(i + 1) + ": observed scatter block is singular");
    Vector resid(static_cast<Index>(O.size()));
    for (std::size_t k = 0; k < O.size(); ++k) resid(static_cast<Index>(k)) = data.y()(i, O[k]) - mu(O[k]);
    const Matrix s_mo = state.sigma(M, O);
    // K = Sigma_MO Sigma_OO^{-1}, via the Cholesky factor of Sigma_OO.
    const Matrix k_t = linalg::cholesky_solve(*lo, s_mo.transpose());
    cn.mean = mu(M) + k_t.transpose() * resid;
    cn.cov = (state.sigma(M, M) - k_t.transpose() * s_mo.transpose()) / w.w(i);
    cn.cov = linalg::symmetrized(cn.cov);
    return cn;
}

/// Draws every entry observed under `targets` but missing in `data`, rows in
/// index order and columns ascending within a row.
template <class URBG>
Imputation impute_conditional_normal(const RegressionState& state, const Dataset& data, const LatentWeights& w,
                                     const MissingStructure& targets, URBG& rng) {
    if (targets.n() != data.n() || targets.d() != data.d())
        throw StructureError("imputation targets do not match the dataset shape");
    Imputation out;
    std::vector<double> values;
    for (Index i = 0; i < data.n(); ++i) {
        const ConditionalNormal cn = conditional_normal_parameters(state, data, w, targets, i);
        if (cn.missing.empty()) continue;
        auto lc = linalg::try_cholesky(cn.cov);
        if (!lc) throw NumericalDegeneracy("row " + std::to_string(i + 1) + ": conditional covariance is singular");
        Vector z(static_cast<Index>(cn.missing.size()));
        for (Index k = 0; k < z.size(); ++k) z(k) = rnd::standard_normal(rng);
        const Vector draw = cn.mean + (*lc) * z;
        for (std::size_t k = 0; k < cn.missing.size(); ++k) {
            out.cells.push_back({i, cn.missing[k]});
            values.push_back(draw(static_cast<Index>(k)));
        }
    }
    out.values = Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
    return out;
}

// ---------------------------------------------------------------------------
// Initialization and chains.

/// OLS on the fully observed rows; Sigma from their residual covariance
/// plus 1e-6 I.
inline RegressionState default_initial_state(const Dataset& data) {
    std::vector<Index> rows;
    for (Index i = 0; i < data.n(); ++i)
        if (data.observed_count(i) == data.d()) rows.push_back(i);
    const Index n1 = static_cast<Index>(rows.size()), p = data.p(), d = data.d();
    if (n1 <= p)
        throw InvalidArgument("default initialization needs more than p fully observed rows (have " +
                              std::to_string(n1) + ")");
    const Matrix x = data.x()(rows, Eigen::all);
    const Matrix y = data.y()(rows, Eigen::all);
    auto l = linalg::try_cholesky(x.transpose() * x);
    if (!l) throw NumericalDegeneracy("design matrix of the fully observed rows is rank deficient");
    const Matrix beta = linalg::cholesky_solve(*l, x.transpose() * y);
    const Matrix resid = y - x * beta;
    Matrix sigma = resid.transpose() * resid / static_cast<double>(n1 - p) + 1e-6 * Matrix::Identity(d, d);
    return RegressionState(beta, linalg::symmetrized(sigma));
}

namespace detail {

[[noreturn]] inline void rethrow_in_chain(const Error& e, std::size_t t) {
    throw ChainError("iteration " + std::to_string(t + 1) + " [" + e.module() + "]: " + e.what());
}

inline std::vector<Cell> cells_between(const Mask& observed, const Mask& target) {
    std::vector<Cell> cells;
    for (Index i = 0; i < observed.rows(); ++i)
        for (Index j = 0; j < observed.cols(); ++j)
            if (!observed(i, j) && target(i, j)) cells.push_back({i, j});
    return cells;
}

}  // namespace detail

/// DA chain on a structure that is monotone in the dataset's given order.
///
/// Preconditions checked up front: monotone structure, the per-pattern
/// rank/count condition, and the moment condition on the mixing
/// distribution. With `posthoc_impute`, every missing response is drawn after
/// the chain from the recorded (w, B, Sigma) of each iteration; this replay is
/// not part of the recorded sampling time.
template <class URBG = Rng>
ChainOutput run_da(const Dataset& data, const Prior& prior, const MixingSpec& spec, const DaConfig& cfg,
                   const RegressionState& init) {
    cfg.validate();
    const MissingStructure ms = MissingStructure::of(data);
    if (!is_monotone(ms))
        throw StructureError("DA requires a monotone missing structure in the given row/column order");
    const MonotoneDecomposition dec = decompose(ms, data);
    const H1Report h1 = check_h1(dec, data, prior);
    if (!h1.pass) throw H1Violation("the rank/count condition fails for the observed structure");
    if (!check_h2(spec, data.d()))
        throw MixingError("Condition H2 fails: " + std::string(spec.name()) + " " + h2_rule(spec));

    URBG rng(cfg.seed);
    ChainOutput out;
    out.meta.seed = cfg.seed;
    out.meta.algorithm = "da";
    out.meta.burn_in = cfg.burn_in;
    const std::size_t kept = cfg.iterations - cfg.burn_in;
    out.states.reserve(kept);
    const bool keep_w = cfg.record_weights || cfg.posthoc_impute;
    std::vector<LatentWeights> weights;
    if (keep_w) weights.reserve(kept);

    const auto start = std::chrono::steady_clock::now();
    RegressionState state = init;
    for (std::size_t t = 0; t < cfg.iterations; ++t) {
        try {
            LatentWeights w = i_step(state, data, spec, rng);
            state = detail::monotone_p_step(data.y(), data.x(), dec.cumulative, prior, w.w, rng);
            if (t >= cfg.burn_in) {
                out.states.push_back(state);
                if (keep_w) weights.push_back(std::move(w));
            }
        } catch (const Error& e) {
            detail::rethrow_in_chain(e, t);
        }
    }

    out.meta.duration = std::chrono::steady_clock::now() - start;

    if (cfg.posthoc_impute && !data.fully_observed()) {
        const MissingStructure all = MissingStructure::all_observed(data.n(), data.d());
        out.imputed_cells = detail::cells_between(data.observed(), all.mask());
        std::vector<Vector> imps;
        imps.reserve(kept);
        for (std::size_t t = 0; t < kept; ++t) {
            try {
                imps.push_back(impute_conditional_normal(out.states[t], data, weights[t], all, rng).values);
            } catch (const Error& e) {
                detail::rethrow_in_chain(e, t + cfg.burn_in);
            }
        }
        out.imputations = std::move(imps);
    }
    if (cfg.record_weights) out.weights = std::move(weights);
    out.meta.iterations = kept;
    return out;
}

/// DAI chain: imputes the entries of k' - k each iteration and runs the P
/// step on the k'-completed responses (complete-data P step when k' is
/// all-observed).
template <class URBG = Rng>
ChainOutput run_dai(const Dataset& data, const Prior& prior, const MixingSpec& spec, const DaiConfig& cfg,
                    const RegressionState& init) {
    cfg.validate();
    const MissingStructure ms = MissingStructure::of(data);
    const MissingStructure& kp = cfg.k_prime;
    if (kp.n() != data.n() || kp.d() != data.d()) throw StructureError("k_prime shape does not match the dataset");
    if (!precedes(ms, kp)) throw StructureError("k_prime must strictly contain the observed structure");
    if (!is_monotone(kp)) throw StructureError("k_prime must be monotone");
    if (!check_h2(spec, data.d()))
        throw MixingError("Condition H2 fails: " + std::string(spec.name()) + " " + h2_rule(spec));

    ChainOutput out;
    out.meta.seed = cfg.seed;
    out.meta.algorithm = "dai";
    out.meta.burn_in = cfg.burn_in;

    const bool complete_target = kp.complete();
    std::vector<Index> cumulative;
    {
        const Index p = data.p(), d = data.d();
        if (complete_target) {
            const double nu = static_cast<double>(data.n() - p - d) + prior.m;
            if (!(nu > static_cast<double>(d - 1)))
                throw ImproperConditional("inverse Wishart degrees of freedom " + std::to_string(nu) +
                                          " must exceed d - 1");
        } else {
            const auto dec = detail::layout_from(kp.mask(), detail::identity_order(kp.n()), detail::identity_order(d));
            cumulative = dec.cumulative;
            for (Index l = 1; l <= d; ++l)
                if (!(pattern_degrees_of_freedom(dec.rows_through(l), l, prior.m, p, d) > 0.0))
                    throw H1Violation("k_prime pattern " + std::to_string(l) + " violates the count condition");
        }
    }
    const auto witness = check_proposition1(ms, data, prior);
    if (!witness.witness)
        out.meta.warnings.push_back(
            "no monotone sub-structure satisfying the rank/count condition was found; Harris ergodicity of the DAI "
            "chain is not certified");

    URBG rng(cfg.seed);
    const std::size_t kept = cfg.iterations - cfg.burn_in;
    out.states.reserve(kept);
    out.imputed_cells = detail::cells_between(data.observed(), kp.mask());
    std::vector<Vector> imps;
    imps.reserve(kept);
    std::vector<LatentWeights> weights;
    if (cfg.record_weights) weights.reserve(kept);

    const auto start = std::chrono::steady_clock::now();
    RegressionState state = init;
    Matrix y_star = data.y();
    for (std::size_t t = 0; t < cfg.iterations; ++t) {
        try {
            LatentWeights w = i_step(state, data, spec, rng);
            Imputation z = impute_conditional_normal(state, data, w, kp, rng);
            for (std::size_t k = 0; k < z.cells.size(); ++k)
                y_star(z.cells[k].row, z.cells[k].col) = z.values(static_cast<Index>(k));
            state = complete_target ? detail::full_p_step(y_star, data.x(), prior, w.w, rng)
                                    : detail::monotone_p_step(y_star, data.x(), cumulative, prior, w.w, rng);
            if (t >= cfg.burn_in) {
                out.states.push_back(state);
                imps.push_back(std::move(z.values));
                if (cfg.record_weights) weights.push_back(std::move(w));
            }
        } catch (const Error& e) {
            detail::rethrow_in_chain(e, t);
        }
    }
    out.meta.duration = std::chrono::steady_clock::now() - start;
    out.imputations = std::move(imps);
    if (cfg.record_weights) out.weights = std::move(weights);
    out.meta.iterations = kept;
    return out;
}

}  // namespace robustda
