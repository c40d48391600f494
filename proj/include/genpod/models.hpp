#pragma once

// Parametric discrete models alpha -> (A_alpha, f, C), all affine in alpha:
//   A_alpha = A_base + sum_i alpha_i A_i.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "genpod/errors.hpp"
#include "genpod/quadrature.hpp"
#include "genpod/tensor.hpp"

namespace genpod {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct Toy1dParams {
    double lo = 3e-4;
    double hi = 7e-4;
};

struct Toy2dParams {
    double lo1 = 3e-4;
    double hi1 = 7e-4;
    double lo2 = 3e-4;
    double hi2 = 7e-4;
    double eps = 1e-4;
};

enum class Source { Corners, Zero, One };
enum class DirichletSides { Bottom, All };

/// Four-quadrant convection-diffusion problem on the unit square.
/// Subdomains are numbered counterclockwise from the lower-left quadrant;
/// the default source lives on subdomains 0 and 2 (opposite corners).
struct ConvDiffParams {
    int grid = 32;
    double kappa_bar = 5e-4;
    double lo = -2e-4;
    double hi = 2e-4;
    bool convection = true;
    Source source = Source::Corners;
    DirichletSides dirichlet = DirichletSides::Bottom;
    double patch_lo = 0.45;   // observation: top-row cells with center x in [patch_lo, patch_hi]
    double patch_hi = 0.55;
};

using ModelParams = std::variant<Toy1dParams, Toy2dParams, ConvDiffParams>;

struct AssembledSystem {
    SparseMatrix a;
    Vector f;
    Vector c;
};

/// Below this size systems are solved with dense partial-pivot LU.
inline constexpr Eigen::Index kDenseSolveLimit = 64;

class ParametricModel {
public:
    ParametricModel(std::string name, ModelParams params, std::vector<UniformMeasure> domains,
                    SparseMatrix base, std::vector<SparseMatrix> terms, Vector load,
                    Vector observation, SparseMatrix spatial_mass)
        : name_(std::move(name)),
          params_(std::move(params)),
          domains_(std::move(domains)),
          base_(std::move(base)),
          terms_(std::move(terms)),
          load_(std::move(load)),
          observation_(std::move(observation)),
          mass_(std::move(spatial_mass)) {
        const auto n = base_.rows();
        if (base_.cols() != n || load_.size() != n || observation_.size() != n ||
            mass_.rows() != n || mass_.cols() != n) {
            throw ShapeError("model components have inconsistent sizes");
        }
        if (terms_.size() != domains_.size()) {
            throw ShapeError("need one affine term per parameter");
        }
        for (const auto& t : terms_) {
            if (t.rows() != n || t.cols() != n) throw ShapeError("affine term has wrong size");
        }
        if (n <= kDenseSolveLimit) {
            dense_base_ = Matrix(base_);
            for (const auto& t : terms_) dense_terms_.emplace_back(t);
        }
        (void)mass_factor(mass_);  // throws unless SPD
        check_invertible_on_box();
    }

    const std::string& name() const noexcept { return name_; }
    const ModelParams& params() const noexcept { return params_; }
    std::size_t n_dof() const noexcept { return static_cast<std::size_t>(base_.rows()); }
    std::size_t n_params() const noexcept { return domains_.size(); }
    const std::vector<UniformMeasure>& param_domains() const noexcept { return domains_; }

    const SparseMatrix& base_operator() const noexcept { return base_; }
    const std::vector<SparseMatrix>& parameter_operators() const noexcept { return terms_; }
    const Vector& load() const noexcept { return load_; }
    const Vector& observation() const noexcept { return observation_; }
    const SparseMatrix& spatial_mass() const noexcept { return mass_; }

    SparseMatrix operator_at(std::span<const double> alpha) const {
        check_alpha(alpha);
        SparseMatrix a = base_;
        for (std::size_t i = 0; i < terms_.size(); ++i) a += alpha[i] * terms_[i];
        return a;
    }

    AssembledSystem assemble(std::span<const double> alpha) const {
        return {operator_at(alpha), load_, observation_};
    }

    double observe(const Vector& y) const { return observation_.dot(y); }

    /// y = A_alpha^{-1} f; throws SingularSystemError.
    Vector solve(std::span<const double> alpha) const {
        check_alpha(alpha);
        if (base_.rows() <= kDenseSolveLimit) {
            Matrix a = dense_base_;
            for (std::size_t i = 0; i < dense_terms_.size(); ++i) a += alpha[i] * dense_terms_[i];
            Eigen::PartialPivLU<Matrix> lu(a);
            const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
            const double scale = a.cwiseAbs().maxCoeff();
            if (!(diag.minCoeff() > 1e-14 * scale)) {
                throw SingularSystemError("singular system matrix");
            }
            return lu.solve(load_);
        }
        Eigen::SparseLU<SparseMatrix> lu;
        SparseMatrix a = operator_at(alpha);
        a.makeCompressed();
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw SingularSystemError("sparse LU failed: " + lu.lastErrorMessage());
        Vector y = lu.solve(load_);
        if (lu.info() != Eigen::Success || !y.allFinite()) {
            throw SingularSystemError("sparse solve failed");
        }
        return y;
    }

private:
    void check_alpha(std::span<const double> alpha) const {
        if (alpha.size() != domains_.size()) {
            throw ShapeError("model " + name_ + " takes " + std::to_string(domains_.size()) +
                             " parameters, got " + std::to_string(alpha.size()));
        }
    }

    void check_invertible_on_box() const {
        const std::size_t n = domains_.size();
        std::vector<double> alpha(n);
        const std::size_t corners = std::size_t{1} << n;
        for (std::size_t c = 0; c <= corners; ++c) {
            // c == corners is the box center.
            for (std::size_t i = 0; i < n; ++i) {
                alpha[i] = c == corners ? domains_[i].mean()
                                        : ((c >> i) & 1U ? domains_[i].hi : domains_[i].lo);
            }
            try {
                (void)solve(alpha);
            } catch (const SingularSystemError&) {
                throw ValidationError("model " + name_ +
                                      " is singular at a corner or the center of the parameter box");
            }
        }
    }

    std::string name_;
    ModelParams params_;
    std::vector<UniformMeasure> domains_;
    SparseMatrix base_;
    std::vector<SparseMatrix> terms_;
    Vector load_;
    Vector observation_;
    SparseMatrix mass_;
    Matrix dense_base_;
    std::vector<Matrix> dense_terms_;
};

namespace detail {

inline SparseMatrix sparse_from(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& t) {
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

inline SparseMatrix sparse_identity(Eigen::Index n) {
    SparseMatrix m(n, n);
    m.setIdentity();
    return m;
}

}  // namespace detail

/// Scalar model y(alpha) = 1 / alpha_1 (A = [alpha_1], f = C = 1).
inline ParametricModel toy1d_model(double lo, double hi) {
    if (!(lo > 0.0)) throw ValidationError("toy1d needs lo > 0 (A_alpha = alpha is singular at 0)");
    return ParametricModel("toy1d", Toy1dParams{lo, hi}, {UniformMeasure(lo, hi)},
                           SparseMatrix(1, 1), {detail::sparse_identity(1)}, Vector::Ones(1),
                           Vector::Ones(1), detail::sparse_identity(1));
}

/// Two coupled compartments: A = [[alpha_1, eps], [eps, alpha_2]], f = (1, 1),
/// C = (1, 1), so Cy = (alpha_1 + alpha_2 - 2 eps) / (alpha_1 alpha_2 - eps^2).
inline ParametricModel toy2d_model(double lo1, double hi1, double lo2, double hi2, double eps) {
    if (!(lo1 > 0.0 && lo2 > 0.0 && lo1 * lo2 > eps * eps)) {
        throw ValidationError("toy2d needs 0 < lo1, 0 < lo2 and lo1 * lo2 > eps^2");
    }
    using T = Eigen::Triplet<double>;
    SparseMatrix base = detail::sparse_from(2, {T(0, 1, eps), T(1, 0, eps)});
    SparseMatrix e1 = detail::sparse_from(2, {T(0, 0, 1.0)});
    SparseMatrix e2 = detail::sparse_from(2, {T(1, 1, 1.0)});
    return ParametricModel("toy2d", Toy2dParams{lo1, hi1, lo2, hi2, eps},
                           {UniformMeasure(lo1, hi1), UniformMeasure(lo2, hi2)}, std::move(base),
                           {std::move(e1), std::move(e2)}, Vector::Ones(2), Vector::Ones(2),
                           detail::sparse_identity(2));
}

/// Quadrant (0..3, counterclockwise from lower-left) of a point.
inline int quadrant_of(double x, double y) {
    if (x < 0.5) return y < 0.5 ? 0 : 3;
    return y < 0.5 ? 1 : 2;
}

/// Cell-centered finite volumes for b . grad y - div(kappa grad y) = f on the
/// unit square, kappa = kappa_bar + alpha_i on quadrant i. Rows are scaled by
/// the cell area h^2 so the diffusion part is symmetric and the spatial mass
/// matrix is diag(h^2). Face diffusivities are arithmetic means (affine in
/// alpha); convection is first-order upwind with b = (y - 1/2, -(x - 1/2)).
/// Dirichlet faces sit half a cell from the center (ghost value -y_P);
/// Neumann faces contribute nothing.
inline ParametricModel convdiff_model(const ConvDiffParams& p) {
    const int n = p.grid;
    if (n < 8) throw ValidationError("convdiff grid must be at least 8x8");
    const UniformMeasure box(p.lo, p.hi);
    if (!(p.kappa_bar + p.lo > 0.0)) {
        throw ValidationError("convdiff needs kappa_bar + lo > 0 (ellipticity)");
    }
    const double h = 1.0 / n;
    const auto dof = static_cast<Eigen::Index>(n) * n;
    auto index = [n](int ix, int iy) { return static_cast<Eigen::Index>(ix + n * iy); };
    auto center = [h](int i) { return (i + 0.5) * h; };
    auto on_dirichlet = [&](int side) {
        // side: 0 left, 1 right, 2 bottom, 3 top
        return p.dirichlet == DirichletSides::All || side == 2;
    };

    using T = Eigen::Triplet<double>;
    std::vector<std::vector<T>> diff(4);
    std::vector<T> conv;

    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const Eigen::Index pp = index(ix, iy);
            const int qp = quadrant_of(center(ix), center(iy));
            // Interior faces to the east and north, each handled once.
            const std::pair<int, int> nbrs[2] = {{ix + 1, iy}, {ix, iy + 1}};
            for (auto [jx, jy] : nbrs) {
                if (jx >= n || jy >= n) continue;
                const Eigen::Index qq = index(jx, jy);
                const int qn = quadrant_of(center(jx), center(jy));
                // kappa_face = (kappa_P + kappa_Q) / 2, split by quadrant indicator.
                for (int s : {qp, qn}) {
                    auto& tr = diff[static_cast<std::size_t>(s)];
                    tr.emplace_back(pp, pp, 0.5);
                    tr.emplace_back(qq, qq, 0.5);
                    tr.emplace_back(pp, qq, -0.5);
                    tr.emplace_back(qq, pp, -0.5);
                }
            }
            const bool boundary[4] = {ix == 0, ix == n - 1, iy == 0, iy == n - 1};
            for (int side = 0; side < 4; ++side) {
                if (boundary[side] && on_dirichlet(side)) {
                    diff[static_cast<std::size_t>(qp)].emplace_back(pp, pp, 2.0);
                }
            }

            if (p.convection) {
                const double bx = center(iy) - 0.5;
                const double by = -(center(ix) - 0.5);
                // Upwind neighbor and the boundary side it would cross.
                const struct {
                    double b;
                    int ux, uy, side;
                } dirs[2] = {{bx, bx > 0 ? ix - 1 : ix + 1, iy, bx > 0 ? 0 : 1},
                             {by, ix, by > 0 ? iy - 1 : iy + 1, by > 0 ? 2 : 3}};
                for (const auto& dr : dirs) {
                    const double c = h * std::abs(dr.b);
                    if (c == 0.0) continue;
                    if (dr.ux >= 0 && dr.ux < n && dr.uy >= 0 && dr.uy < n) {
                        conv.emplace_back(pp, pp, c);
                        conv.emplace_back(pp, index(dr.ux, dr.uy), -c);
                    } else if (on_dirichlet(dr.side)) {
                        conv.emplace_back(pp, pp, 2.0 * c);
                    }
                }
            }
        }
    }

    std::vector<SparseMatrix> terms;
    SparseMatrix total(dof, dof);
    for (auto& tr : diff) {
        terms.push_back(detail::sparse_from(dof, tr));
        total += terms.back();
    }
    SparseMatrix base = p.kappa_bar * total + detail::sparse_from(dof, conv);
    base.makeCompressed();

    Vector f = Vector::Zero(dof);
    Vector c = Vector::Zero(dof);
    int patch = 0;
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const double x = center(ix);
            const double y = center(iy);
            const int q = quadrant_of(x, y);
            switch (p.source) {
                case Source::Corners:
                    if (q == 0 || q == 2) {
                        f[index(ix, iy)] = h * h * std::sin(2 * std::numbers::pi * x) *
                                           std::sin(4 * std::numbers::pi * y);
                    }
                    break;
                case Source::One:
                    f[index(ix, iy)] = h * h;
                    break;
                case Source::Zero:
                    break;
            }
            if (iy == n - 1 && x >= p.patch_lo && x <= p.patch_hi) {
                c[index(ix, iy)] = 1.0;
                ++patch;
            }
        }
    }
    if (patch == 0) throw ValidationError("observation patch contains no cells");
    c /= patch;

    SparseMatrix mass = h * h * detail::sparse_identity(dof);
    return ParametricModel("convdiff", p, std::vector<UniformMeasure>(4, box), std::move(base),
                           std::move(terms), std::move(f), std::move(c), std::move(mass));
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Closed-form mean and variance of 1/alpha under U[lo, hi].
inline Moments toy1d_reference(const UniformMeasure& m) {
    const double mean = std::log(m.hi / m.lo) / (m.hi - m.lo);
    return {mean, 1.0 / (m.lo * m.hi) - mean * mean};
}

/// Mean and variance of Cy for the two-compartment model by nested adaptive
/// Gauss-Kronrod integration.
inline Moments toy2d_reference(const UniformMeasure& m1, const UniformMeasure& m2, double eps) {
    using boost::math::quadrature::gauss_kronrod;
    constexpr double tol = 1e-11;
    constexpr unsigned depth = 15;
    double worst = 0.0;

    auto cy = [eps](double a1, double a2) { return (a1 + a2 - 2 * eps) / (a1 * a2 - eps * eps); };
    auto integrate2 = [&](auto&& g) {
        auto inner = [&](double a1) {
            double err = 0.0;
            const double v = gauss_kronrod<double, 31>::integrate(
                [&](double a2) { return g(a1, a2); }, m2.lo, m2.hi, depth, tol, &err);
            worst = std::max(worst, err / std::max(std::abs(v), 1e-300));
            return v;
        };
        double err = 0.0;
        const double v = gauss_kronrod<double, 31>::integrate(inner, m1.lo, m1.hi, depth, tol, &err);
        worst = std::max(worst, err / std::max(std::abs(v), 1e-300));
        return v * m1.density() * m2.density();
    };

    const double mean = integrate2(cy);
    const double variance = integrate2([&](double a1, double a2) {
        const double d = cy(a1, a2) - mean;
        return d * d;
    });
    if (worst > 1e-10) {
        throw IntegrationError("toy2d reference integration did not converge (rel. error estimate " +
                               std::to_string(worst) + ")");
    }
    return {mean, variance};
}

/// Reference moments of the analytic toy models.
inline Moments analytic_reference(const ParametricModel& model) {
    return std::visit(
        [](const auto& p) -> Moments {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Toy1dParams>) {
                return toy1d_reference(UniformMeasure(p.lo, p.hi));
            } else if constexpr (std::is_same_v<P, Toy2dParams>) {
                return toy2d_reference(UniformMeasure(p.lo1, p.hi1), UniformMeasure(p.lo2, p.hi2),
                                       p.eps);
            } else {
                throw ValidationError("analytic reference exists only for toy1d and toy2d");
            }
        },
        model.params());
}

}  // namespace genpod
