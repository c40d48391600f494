#pragma once

// Polynomial chaos spaces: Gauss rules for probability measures, the nodal
// Lagrange basis on their nodes, diagonal mass matrices and mass factors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>
#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "genpod/errors.hpp"
#include "genpod/tensor.hpp"

namespace genpod {

/// Uniform probability measure on [lo, hi], density 1/(hi - lo).
struct UniformMeasure {
    double lo = 0.0;
    double hi = 1.0;

    UniformMeasure() = default;
    UniformMeasure(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
            throw ValidationError("uniform measure needs lo < hi, got [" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
    }

    std::pair<double, double> support() const { return {lo, hi}; }
    double density() const { return 1.0 / (hi - lo); }
    double mean() const { return 0.5 * (lo + hi); }

    /// E[alpha^p] = (hi^{p+1} - lo^{p+1}) / ((p+1)(hi - lo)).
    double moment(unsigned p) const {
        const double q = p + 1.0;
        return (std::pow(hi, q) - std::pow(lo, q)) / (q * (hi - lo));
    }

    /// Maps u in [0, 1) to the support.
    double from_unit(double u) const { return lo + (hi - lo) * u; }

    friend bool operator==(const UniformMeasure&, const UniformMeasure&) = default;
};

struct QuadratureRule {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> nodes;    // strictly increasing
    std::vector<double> weights;  // positive, sum to one

    std::size_t size() const noexcept { return nodes.size(); }
    UniformMeasure measure() const { return {lo, hi}; }

    template <class F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) s += weights[k] * f(nodes[k]);
        return s;
    }
};

namespace detail {

/// Legendre P_n(z) and P_n'(z) by the three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int n, double z) {
    double p1 = 1.0;
    double p2 = 0.0;
    for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
    }
    const double dp = n * (z * p1 - p2) / (z * z - 1.0);
    return {p1, dp};
}

}  // namespace detail

inline constexpr int kMaxGaussPoints = 64;

/// d-point Gauss rule for the uniform probability measure: Gauss-Legendre
/// nodes by Newton iteration from Chebyshev-type guesses, mapped affinely,
/// weights rescaled to sum to one.
inline QuadratureRule gauss_rule(const UniformMeasure& measure, int d) {
    if (d < 1) throw ValidationError("gauss_rule needs d >= 1");
    if (d > kMaxGaussPoints) {
        throw ValidationError("gauss_rule supports at most " +
                              std::to_string(kMaxGaussPoints) + " points");
    }
    constexpr double tol = 1e-15;
    constexpr int max_iter = 100;

    std::vector<double> z(d);
    std::vector<double> w(d);
    const int half = (d + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (d + 0.5));
        double step = 1.0;
        for (int it = 0; it < max_iter && std::abs(step) > tol; ++it) {
            const auto [p, dp] = detail::legendre_with_derivative(d, x);
            step = p / dp;
            x -= step;
        }
        if (std::abs(step) > 1e-12) {
            throw std::runtime_error("Gauss-Legendre Newton iteration did not converge");
        }
        const auto [p, dp] = detail::legendre_with_derivative(d, x);
        (void)p;
        const double wx = 2.0 / ((1.0 - x * x) * dp * dp);
        // Roots come out in decreasing order; mirror into ascending slots.
        z[d - 1 - i] = x;
        z[i] = -x;
        w[d - 1 - i] = wx;
        w[i] = wx;
    }
    if (d % 2 == 1) z[d / 2] = 0.0;

    QuadratureRule rule;
    rule.lo = measure.lo;
    rule.hi = measure.hi;
    rule.nodes.resize(d);
    rule.weights.resize(d);
    const double mid = 0.5 * (measure.lo + measure.hi);
    const double half_width = 0.5 * (measure.hi - measure.lo);
    double sum = 0.0;
    for (double wk : w) sum += wk;
    for (int k = 0; k < d; ++k) {
        rule.nodes[k] = mid + half_width * z[k];
        rule.weights[k] = w[k] / sum;
    }
    return rule;
}

/// Mass matrix of the nodal Lagrange basis under the rule's measure. The
/// Gauss rule is exact for the degree 2d-2 integrands, so it is diag(w).
inline Matrix mass_matrix(const QuadratureRule& rule) {
    return Eigen::Map<const Vector>(rule.weights.data(),
                                    static_cast<Eigen::Index>(rule.size()))
        .asDiagonal();
}

/// Value at `alpha` of the Lagrange polynomial of node j (0-based).
inline double lagrange_eval(const QuadratureRule& rule, std::size_t j, double alpha) {
    if (j >= rule.size()) throw ShapeError("lagrange_eval: node index out of range");
    double v = 1.0;
    const double xj = rule.nodes[j];
    for (std::size_t m = 0; m < rule.size(); ++m) {
        if (m == j) continue;
        v *= (alpha - rule.nodes[m]) / (xj - rule.nodes[m]);
    }
    return v;
}

/// The formal basis vector Psi(alpha) = (psi_1(alpha), ..., psi_d(alpha)).
inline Vector lagrange_basis(const QuadratureRule& rule, double alpha) {
    Vector psi(static_cast<Eigen::Index>(rule.size()));
    for (std::size_t j = 0; j < rule.size(); ++j) {
        psi[static_cast<Eigen::Index>(j)] = lagrange_eval(rule, j, alpha);
    }
    return psi;
}

/// Factor L of a mass matrix, M = L L^T. Diagonal factors are kept as a
/// vector so large spatial masses stay cheap.
class MassFactor {
public:
    MassFactor() = default;

    static MassFactor from_diagonal(Vector sqrt_diag) {
        MassFactor f;
        f.diag_ = std::move(sqrt_diag);
        f.diagonal_ = true;
        return f;
    }

    static MassFactor from_lower(Matrix lower) {
        if (lower.rows() != lower.cols()) throw ShapeError("mass factor must be square");
        MassFactor f;
        f.lower_ = std::move(lower);
        f.diagonal_ = false;
        return f;
    }

    static MassFactor identity(std::size_t n) {
        return from_diagonal(Vector::Ones(static_cast<Eigen::Index>(n)));
    }

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(diagonal_ ? diag_.size() : lower_.rows());
    }
    bool is_diagonal() const noexcept { return diagonal_; }

    Matrix dense() const {
        return diagonal_ ? Matrix(diag_.asDiagonal()) : lower_;
    }
    Matrix mass() const {
        if (diagonal_) return Matrix(diag_.cwiseAbs2().asDiagonal());
        return lower_ * lower_.transpose();
    }

    /// L x
    Matrix apply(const Matrix& x) const {
        check(x);
        if (diagonal_) return diag_.asDiagonal() * x;
        return lower_.triangularView<Eigen::Lower>() * x;
    }
    /// L^T x
    Matrix apply_transpose(const Matrix& x) const {
        check(x);
        if (diagonal_) return diag_.asDiagonal() * x;
        return lower_.transpose().triangularView<Eigen::Upper>() * x;
    }
    /// L^{-1} x
    Matrix solve(const Matrix& x) const {
        check(x);
        if (diagonal_) return diag_.cwiseInverse().asDiagonal() * x;
        return lower_.triangularView<Eigen::Lower>().solve(x);
    }
    /// L^{-T} x
    Matrix solve_transpose(const Matrix& x) const {
        check(x);
        if (diagonal_) return diag_.cwiseInverse().asDiagonal() * x;
        return lower_.transpose().triangularView<Eigen::Upper>().solve(x);
    }

    /// 2-norm condition number of L.
    double condition() const {
        if (diagonal_) {
            const Vector a = diag_.cwiseAbs();
            return a.maxCoeff() / a.minCoeff();
        }
        Eigen::JacobiSVD<Matrix> svd(lower_);
        const auto& s = svd.singularValues();
        return s[0] / s[s.size() - 1];
    }

private:
    void check(const Matrix& x) const {
        if (static_cast<std::size_t>(x.rows()) != size()) {
            throw ShapeError("mass factor of size " + std::to_string(size()) +
                             " applied to " + std::to_string(x.rows()) + " rows");
        }
    }

    bool diagonal_ = true;
    Vector diag_;
    Matrix lower_;
};

inline constexpr double kPivotTolerance = 1e-14;

/// Cholesky factor of an SPD matrix; diagonal input gives diag(sqrt(m_kk)).
inline MassFactor mass_factor(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw ShapeError("mass_factor needs a nonempty square matrix");
    }
    const Eigen::Index n = m.rows();
    const double scale = m.cwiseAbs().maxCoeff();
    if (!((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale)) {
        throw IndefiniteError("mass matrix is not symmetric");
    }
    const double pivot_floor = kPivotTolerance * scale;

    const bool is_diag = (m - Matrix(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
    if (is_diag) {
        const Vector d = m.diagonal();
        if (!(d.minCoeff() > pivot_floor)) {
            throw IndefiniteError("mass matrix has a nonpositive diagonal entry");
        }
        return MassFactor::from_diagonal(d.cwiseSqrt());
    }

    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = m(j, j) - l.row(j).head(j).squaredNorm();
        if (!(pivot > pivot_floor)) {
            throw IndefiniteError("mass matrix is not positive definite (pivot " +
                                  std::to_string(pivot) + " at row " + std::to_string(j) +
                                  ")");
        }
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
        }
    }
    return MassFactor::from_lower(std::move(l));
}

inline MassFactor mass_factor(const Eigen::SparseMatrix<double>& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw ShapeError("mass_factor needs a nonempty square matrix");
    }
    bool is_diag = true;
    for (int k = 0; k < m.outerSize() && is_diag; ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
            if (it.row() != it.col() && it.value() != 0.0) {
                is_diag = false;
                break;
            }
        }
    }
    if (!is_diag) return mass_factor(Matrix(m));
    const Vector d = m.diagonal();
    if (!(d.minCoeff() > kPivotTolerance * d.cwiseAbs().maxCoeff())) {
        throw IndefiniteError("mass matrix has a nonpositive diagonal entry");
    }
    return MassFactor::from_diagonal(d.cwiseSqrt());
}

/// Mass factor of a PCE dimension: diag(sqrt(w)).
inline MassFactor mass_factor(const QuadratureRule& rule) {
    return mass_factor(mass_matrix(rule));
}

struct GridPoint {
    Index index;                 // (k_1, ..., k_N), 0-based
    std::vector<double> alpha;   // (alpha_1^{k_1}, ..., alpha_N^{k_N})
    double weight = 1.0;         // prod_i w_i^{k_i}
};

/// Tensor-product grid, enumerated in tensor storage order (dimension 1
/// fastest), so point p belongs to flat index p of a coefficient tensor.
inline std::vector<GridPoint> tensor_grid(const std::vector<QuadratureRule>& rules) {
    if (rules.empty()) throw ValidationError("tensor_grid needs at least one rule");
    Index dims;
    for (const auto& r : rules) dims.push_back(r.size());
    const std::size_t total = product(dims);
    std::vector<GridPoint> grid;
    grid.reserve(total);
    Index idx(rules.size(), 0);
    for (std::size_t p = 0; p < total; ++p) {
        GridPoint g;
        g.index = idx;
        g.alpha.resize(rules.size());
        for (std::size_t i = 0; i < rules.size(); ++i) {
            g.alpha[i] = rules[i].nodes[idx[i]];
            g.weight *= rules[i].weights[idx[i]];
        }
        grid.push_back(std::move(g));
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (++idx[i] < dims[i]) break;
            idx[i] = 0;
        }
    }
    return grid;
}

inline void to_json(nlohmann::json& j, const QuadratureRule& r) {
    j = nlohmann::json{{"lo", r.lo}, {"hi", r.hi}, {"nodes", r.nodes}, {"weights", r.weights}};
}

inline void from_json(const nlohmann::json& j, QuadratureRule& r) {
    r.lo = j.at("lo").get<double>();
    r.hi = j.at("hi").get<double>();
    r.nodes = j.at("nodes").get<std::vector<double>>();
    r.weights = j.at("weights").get<std::vector<double>>();
    if (r.nodes.size() != r.weights.size() || r.nodes.empty()) {
        throw ShapeError("quadrature rule needs matching, nonempty nodes and weights");
    }
}

}  // namespace genpod
