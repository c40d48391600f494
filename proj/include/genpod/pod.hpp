#pragma once

// Multidimensional Galerkin POD.
//
// A coefficient tensor X represents x = vec(X)^T [Psi_N (x) ... (x) Psi_1].
// With M_i = L_i L_i^T the mass matrix of dimension i,
//
//   ||x||_V^2 = || L_i^T (cycle^{i} X)^{(1)} [L_{i-1} (x) ... (x) L_1 (x) L_N (x) ... (x) L_{i+1}] ||_F^2
//
// for every dimension i, and the leading left singular vectors V_i of that
// weighted matricization span the best d^_i-dimensional subspace of
// dimension i. The reduced basis functions are Psi^_i = V_i^T L_i^{-1} Psi_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "genpod/errors.hpp"
#include "genpod/quadrature.hpp"
#include "genpod/tensor.hpp"

namespace genpod {

/// Singular values below this fraction of sigma_1 count as numerically zero.
inline constexpr double kNumericalZero = 1e-14;

/// Use the Gram-matrix eigensolver when the matricization is wider than
/// this multiple of its height.
inline constexpr std::size_t kGramRatio = 50;

struct PodBasis {
    std::size_t dim = 0;       // tensor dimension this basis reduces
    std::size_t k = 0;         // reduced size
    Matrix vectors;            // d_i x k, orthonormal columns
    Vector singular_values;    // full spectrum, nonincreasing
    Matrix coeff_map;          // k x d_i, V^T L^{-1}
    MassFactor factor;         // L_i
    std::size_t numerical_rank = 0;
    std::vector<std::string> warnings;

    std::size_t full_size() const { return static_cast<std::size_t>(vectors.rows()); }

    /// V^T L^T: coefficients in the original basis -> reduced coefficients.
    Matrix reduce_map() const { return factor.apply(vectors).transpose(); }
    /// L^{-T} V: reduced coefficients -> coefficients in the original basis.
    Matrix expand_map() const { return coeff_map.transpose(); }
    /// V-orthogonal projector L^{-T} V V^T L^T in the original coefficients.
    Matrix projector() const { return expand_map() * reduce_map(); }

    /// Reduced basis functions at a point, Psi^(alpha) = coeff_map Psi(alpha).
    Vector eval(const Vector& psi) const { return coeff_map * psi; }
};

namespace detail {

inline void check_factors(const CoeffTensor& t, const std::vector<MassFactor>& factors) {
    if (factors.size() != t.order()) {
        throw ShapeError("expected one mass factor per tensor dimension (" +
                         std::to_string(t.order()) + "), got " +
                         std::to_string(factors.size()));
    }
    for (std::size_t m = 0; m < t.order(); ++m) {
        if (factors[m].size() != t.dim(m)) {
            throw ShapeError("mass factor " + std::to_string(m) + " has size " +
                             std::to_string(factors[m].size()) + ", dimension has " +
                             std::to_string(t.dim(m)));
        }
    }
}

/// L_m^T applied along every mode m of t.
inline CoeffTensor weight_all_modes(CoeffTensor t, const std::vector<const MassFactor*>& factors) {
    for (std::size_t m = 0; m < t.order(); ++m) {
        const MassFactor& f = *factors[m];
        t = mode_map(t, m, f.size(), [&](const Matrix& x) { return f.apply_transpose(x); });
    }
    return t;
}

/// The tensor cycled so that dimension i leads, weighted by the matching
/// factors; its mode-1 matricization is the matrix of the norm identity.
inline CoeffTensor cycled_weighted(const CoeffTensor& t, const std::vector<MassFactor>& factors,
                                   std::size_t i) {
    check_factors(t, factors);
    if (i >= t.order()) throw ShapeError("dimension index out of range");
    const std::size_t n = t.order();
    std::vector<const MassFactor*> cycled(n);
    for (std::size_t m = 0; m < n; ++m) cycled[m] = &factors[(i + m) % n];
    return weight_all_modes(cycle(t, i), cycled);
}

inline void normalize_signs(Matrix& v) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            const double a = std::abs(v(r, c));
            if (a > best) {
                best = a;
                arg = r;
            }
        }
        if (v(arg, c) < 0.0) v.col(c) *= -1.0;
    }
}

}  // namespace detail

/// L_i^T (cycle^{i} X)^{(1)} [... (x) L_{i+1}], the matrix whose SVD defines
/// the POD basis of dimension i.
inline Matrix weighted_matricization(const CoeffTensor& t, const std::vector<MassFactor>& factors,
                                     std::size_t i) {
    return matricize_mode1(detail::cycled_weighted(t, factors, i));
}

/// ||x||_V evaluated with dimension i brought to the front.
inline double weighted_norm_cycled(const CoeffTensor& t, const std::vector<MassFactor>& factors,
                                   std::size_t i) {
    return frobenius_norm(detail::cycled_weighted(t, factors, i));
}

/// ||x||_V = sqrt(vec(X)^T (M_N (x) ... (x) M_1) vec(X)).
inline double weighted_norm(const CoeffTensor& t, const std::vector<MassFactor>& factors) {
    return weighted_norm_cycled(t, factors, 0);
}

/// POD basis of size k for dimension i.
inline PodBasis pod_basis(const CoeffTensor& t, const std::vector<MassFactor>& factors,
                          std::size_t i, std::size_t k) {
    const Matrix w = weighted_matricization(t, factors, i);
    const auto d = static_cast<std::size_t>(w.rows());
    const auto rest = static_cast<std::size_t>(w.cols());
    if (k < 1 || k > d) {
        throw ShapeError("pod_basis: requested k = " + std::to_string(k) +
                         " outside [1, " + std::to_string(d) + "]");
    }

    PodBasis basis;
    basis.dim = i;
    basis.k = k;
    basis.factor = factors[i];

    Matrix u;
    if (rest > kGramRatio * d) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(w * w.transpose());
        if (eig.info() != Eigen::Success) throw std::runtime_error("Gram eigensolver failed");
        // Ascending eigenvalues: reverse into singular value order.
        const Vector lambda = eig.eigenvalues().reverse();
        u = eig.eigenvectors().rowwise().reverse();
        basis.singular_values = lambda.cwiseMax(0.0).cwiseSqrt();
    } else {
        const std::size_t thin = std::min(d, rest);
        const unsigned opts = k <= thin ? Eigen::ComputeThinU : Eigen::ComputeFullU;
        Eigen::BDCSVD<Matrix> svd(w, opts);
        u = svd.matrixU();
        basis.singular_values = svd.singularValues();
    }
    basis.vectors = u.leftCols(static_cast<Eigen::Index>(k));
    detail::normalize_signs(basis.vectors);

    const double s1 = basis.singular_values.size() > 0 ? basis.singular_values[0] : 0.0;
    std::size_t rank = 0;
    for (Eigen::Index j = 0; j < basis.singular_values.size(); ++j) {
        if (basis.singular_values[j] > kNumericalZero * s1) ++rank;
    }
    basis.numerical_rank = rank;
    if (k > rank) {
        basis.warnings.push_back("dimension " + std::to_string(i) + ": k = " +
                                 std::to_string(k) + " exceeds numerical rank " +
                                 std::to_string(rank) + "; trailing modes are noise");
    }
    basis.coeff_map = basis.factor.solve_transpose(basis.vectors).transpose();
    return basis;
}

/// The leading k vectors of an existing basis.
inline PodBasis truncate(const PodBasis& b, std::size_t k) {
    if (k < 1 || k > b.k) {
        throw ShapeError("truncate: k = " + std::to_string(k) + " outside [1, " +
                         std::to_string(b.k) + "]");
    }
    PodBasis out = b;
    out.k = k;
    out.vectors = b.vectors.leftCols(static_cast<Eigen::Index>(k));
    out.coeff_map = b.coeff_map.topRows(static_cast<Eigen::Index>(k));
    out.warnings.clear();
    if (k > b.numerical_rank) {
        out.warnings.push_back("dimension " + std::to_string(b.dim) + ": k = " + std::to_string(k) +
                               " exceeds numerical rank " + std::to_string(b.numerical_rank) +
                               "; trailing modes are noise");
    }
    return out;
}

/// Per-dimension selection: a basis reduces that dimension, nullopt keeps it.
using BasisSelection = std::vector<std::optional<PodBasis>>;

namespace detail {

inline void check_selection(const CoeffTensor& t, const BasisSelection& bases) {
    if (bases.size() != t.order()) {
        throw ShapeError("need one basis entry (or keep) per tensor dimension");
    }
}

}  // namespace detail

/// Coefficients (in the original bases) of the V-orthogonal projection onto
/// the product of the selected reduced spaces.
inline CoeffTensor project(const CoeffTensor& t, const BasisSelection& bases) {
    detail::check_selection(t, bases);
    CoeffTensor out = t;
    for (std::size_t m = 0; m < t.order(); ++m) {
        if (!bases[m]) continue;
        if (bases[m]->full_size() != t.dim(m)) {
            throw ShapeError("basis for dimension " + std::to_string(m) + " has wrong size");
        }
        out = mode_product(out, bases[m]->projector(), m);
    }
    return out;
}

/// Coefficients with respect to the reduced bases Psi^_i (kept dimensions
/// unchanged).
inline CoeffTensor reduce(const CoeffTensor& t, const BasisSelection& bases) {
    detail::check_selection(t, bases);
    CoeffTensor out = t;
    for (std::size_t m = 0; m < t.order(); ++m) {
        if (!bases[m]) continue;
        if (bases[m]->full_size() != t.dim(m)) {
            throw ShapeError("basis for dimension " + std::to_string(m) + " has wrong size");
        }
        out = mode_product(out, bases[m]->reduce_map(), m);
    }
    return out;
}

/// Inverse direction of reduce: reduced coefficients back to the original
/// bases.
inline CoeffTensor expand(const CoeffTensor& reduced, const BasisSelection& bases) {
    detail::check_selection(reduced, bases);
    CoeffTensor out = reduced;
    for (std::size_t m = 0; m < reduced.order(); ++m) {
        if (!bases[m]) continue;
        if (bases[m]->k != reduced.dim(m)) {
            throw ShapeError("reduced tensor dimension " + std::to_string(m) +
                             " does not match basis size");
        }
        out = mode_product(out, bases[m]->expand_map(), m);
    }
    return out;
}

/// sqrt(sum_i sum_{k > ks[i]} sigma_k^{(i)2}), the HOSVD bound on ||x - x^||_V.
inline double projection_error_bound(const std::vector<PodBasis>& bases,
                                     const std::vector<std::size_t>& ks) {
    if (ks.size() != bases.size()) throw ShapeError("need one rank per basis");
    double sq = 0.0;
    for (std::size_t i = 0; i < bases.size(); ++i) {
        const auto& s = bases[i].singular_values;
        for (auto j = static_cast<Eigen::Index>(ks[i]); j < s.size(); ++j) sq += s[j] * s[j];
    }
    return std::sqrt(sq);
}

/// Bound using each basis's own k.
inline double projection_error_bound(const std::vector<PodBasis>& bases) {
    std::vector<std::size_t> ks;
    for (const auto& b : bases) ks.push_back(b.k);
    return projection_error_bound(bases, ks);
}

/// Serialized form: {"dim", "k", "vectors": list of k columns, "singular_values"}.
inline nlohmann::json pod_basis_to_json(const PodBasis& b) {
    std::vector<std::vector<double>> cols;
    for (Eigen::Index c = 0; c < b.vectors.cols(); ++c) {
        cols.emplace_back(b.vectors.col(c).data(), b.vectors.col(c).data() + b.vectors.rows());
    }
    return {{"dim", b.dim},
            {"k", b.k},
            {"vectors", cols},
            {"singular_values",
             std::vector<double>(b.singular_values.data(),
                                 b.singular_values.data() + b.singular_values.size())}};
}

/// Rebuilds a basis; coeff_map is recomputed from the vectors and `factor`.
inline PodBasis pod_basis_from_json(const nlohmann::json& j, MassFactor factor) {
    PodBasis b;
    b.dim = j.at("dim").get<std::size_t>();
    b.k = j.at("k").get<std::size_t>();
    const auto cols = j.at("vectors").get<std::vector<std::vector<double>>>();
    if (cols.size() != b.k || cols.empty()) throw ShapeError("basis has wrong number of vectors");
    const auto d = static_cast<Eigen::Index>(cols.front().size());
    if (static_cast<std::size_t>(d) != factor.size()) {
        throw ShapeError("basis vectors do not match the mass factor");
    }
    b.vectors.resize(d, static_cast<Eigen::Index>(b.k));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (static_cast<Eigen::Index>(cols[c].size()) != d) throw ShapeError("ragged basis");
        b.vectors.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector>(cols[c].data(), d);
    }
    const auto sv = j.at("singular_values").get<std::vector<double>>();
    b.singular_values = Eigen::Map<const Vector>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    const double s1 = sv.empty() ? 0.0 : sv.front();
    b.numerical_rank = static_cast<std::size_t>(
        std::count_if(sv.begin(), sv.end(), [&](double s) { return s > kNumericalZero * s1; }));
    b.factor = std::move(factor);
    b.coeff_map = b.factor.solve_transpose(b.vectors).transpose();
    return b;
}

}  // namespace genpod
