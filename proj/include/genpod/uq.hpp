#pragma once

// Uncertainty quantification pipeline: decoupled full-order PCE sweeps,
// statistics of the observation Cy, reduced Galerkin models built from POD
// bases, plain Monte Carlo and random-snapshot POD baselines.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/LU>

#include "genpod/errors.hpp"
#include "genpod/models.hpp"
#include "genpod/parallel.hpp"
#include "genpod/pod.hpp"
#include "genpod/quadrature.hpp"
#include "genpod/tensor.hpp"

namespace genpod {

enum class Method { Pce, PcePod, Mc, McPod };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::Pce: return "pce";
        case Method::PcePod: return "pce-pod";
        case Method::Mc: return "mc";
        case Method::McPod: return "mc-pod";
    }
    return "?";
}

struct UqResult {
    Method method = Method::Pce;
    double mean = 0.0;
    double variance = 0.0;
    std::size_t n_solves = 0;
    double wall_time = 0.0;   // seconds
    double clipped = 0.0;     // magnitude removed when clipping a negative variance
    std::vector<std::string> warnings;
};

/// Full-order solutions on the quadrature grid: dims (d_0, d_1, ..., d_N),
/// slice (:, k_1, ..., k_N) is the solution at (alpha_1^{k_1}, ..., alpha_N^{k_N}).
struct SnapshotTensor {
    CoeffTensor coeffs;
    std::vector<QuadratureRule> rules;
    std::size_t n_solves = 0;
    double wall_time = 0.0;

    std::size_t n_dof() const { return coeffs.dim(0); }
    std::size_t n_nodes() const { return coeffs.size() / coeffs.dim(0); }

    /// Column p of the mode-1 matricization: the solution at grid point p.
    Eigen::Map<const Vector> slice(std::size_t p) const {
        const auto n = static_cast<Eigen::Index>(n_dof());
        return Eigen::Map<const Vector>(coeffs.data().data() + p * n_dof(), n);
    }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Neumaier-compensated sum in index order.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline void check_rules(const ParametricModel& model, const std::vector<QuadratureRule>& rules) {
    if (rules.size() != model.n_params()) {
        throw ShapeError("need one quadrature rule per model parameter (" +
                         std::to_string(model.n_params()) + ")");
    }
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto& dom = model.param_domains()[i];
        const double tol = 1e-14 * (std::abs(dom.lo) + std::abs(dom.hi));
        if (std::abs(rules[i].lo - dom.lo) > tol || std::abs(rules[i].hi - dom.hi) > tol) {
            throw ValidationError("quadrature rule " + std::to_string(i) +
                                  " does not match the parameter domain");
        }
    }
}

}  // namespace detail

/// Gauss rules with `d` points on every parameter domain of the model.
inline std::vector<QuadratureRule> pce_rules(const ParametricModel& model, int d) {
    std::vector<QuadratureRule> rules;
    for (const auto& dom : model.param_domains()) rules.push_back(gauss_rule(dom, d));
    return rules;
}

/// Weighted moments of observations: mean = sum w c, variance = sum w (c - mean)^2.
inline UqResult weighted_statistics(std::span<const double> obs, std::span<const double> weights,
                                    Method method) {
    if (obs.size() != weights.size() || obs.empty()) {
        throw ShapeError("statistics need one weight per observation");
    }
    detail::CompensatedSum m;
    for (std::size_t p = 0; p < obs.size(); ++p) m.add(weights[p] * obs[p]);
    UqResult r;
    r.method = method;
    r.mean = m.value();
    detail::CompensatedSum v;
    for (std::size_t p = 0; p < obs.size(); ++p) {
        const double d = obs[p] - r.mean;
        v.add(weights[p] * d * d);
    }
    r.variance = v.value();
    if (r.variance < 0.0) {
        r.clipped = -r.variance;
        r.variance = 0.0;
        r.warnings.push_back("negative variance clipped to zero");
    }
    return r;
}

/// Solves A_alpha y = f independently at every grid node. `order` optionally
/// permutes the processing order; results are identical for any order.
inline SnapshotTensor pce_sweep(const ParametricModel& model, const std::vector<QuadratureRule>& rules,
                                unsigned threads = 0, std::span<const std::size_t> order = {}) {
    detail::check_rules(model, rules);
    const auto t0 = detail::Clock::now();
    const auto grid = tensor_grid(rules);
    if (!order.empty() && order.size() != grid.size()) {
        throw ShapeError("processing order must be a permutation of the grid");
    }
    Index dims{model.n_dof()};
    for (const auto& r : rules) dims.push_back(r.size());
    SnapshotTensor snap{CoeffTensor(dims), rules, grid.size(), 0.0};
    const std::size_t n = model.n_dof();
    parallel_for(
        grid.size(),
        [&](std::size_t s) {
            const std::size_t p = order.empty() ? s : order[s];
            try {
                const Vector y = model.solve(grid[p].alpha);
                std::copy(y.data(), y.data() + n, snap.coeffs.data().data() + p * n);
            } catch (const SingularSystemError& e) {
                throw SingularSystemError(std::string(e.what()) + " at grid node", grid[p].index);
            }
        },
        threads);
    snap.wall_time = detail::seconds_since(t0);
    return snap;
}

/// Mean and variance of Cy over the snapshot grid.
inline UqResult statistics(const SnapshotTensor& snap, const Vector& observation) {
    if (static_cast<std::size_t>(observation.size()) != snap.n_dof()) {
        throw ShapeError("observation functional does not match the spatial dimension");
    }
    const auto grid = tensor_grid(snap.rules);
    std::vector<double> obs(grid.size());
    std::vector<double> w(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p) {
        obs[p] = observation.dot(snap.slice(p));
        w[p] = grid[p].weight;
    }
    UqResult r = weighted_statistics(obs, w, Method::Pce);
    r.n_solves = snap.n_solves;
    r.wall_time = snap.wall_time;
    return r;
}

/// One full-order PCE evaluation: sweep plus statistics.
inline UqResult pce_statistics(const ParametricModel& model, int d, unsigned threads = 0) {
    const auto t0 = detail::Clock::now();
    UqResult r = statistics(pce_sweep(model, pce_rules(model, d), threads), model.observation());
    r.wall_time = detail::seconds_since(t0);
    return r;
}

/// Mass factors of all snapshot dimensions: spatial first, then diag(sqrt(w)).
inline std::vector<MassFactor> snapshot_factors(const ParametricModel& model,
                                                const std::vector<QuadratureRule>& rules) {
    std::vector<MassFactor> f{mass_factor(model.spatial_mass())};
    for (const auto& r : rules) f.push_back(mass_factor(r));
    return f;
}

/// sum_k w^k Psi^(alpha^k) Psi^(alpha^k)^T for a reduced PCE dimension;
/// the identity for any POD basis built with diag(sqrt(w)) factors.
inline Matrix reduced_pce_gram(const PodBasis& basis, const QuadratureRule& rule) {
    const auto k = static_cast<Eigen::Index>(basis.k);
    Matrix g = Matrix::Zero(k, k);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const Vector psi = basis.eval(lagrange_basis(rule, rule.nodes[q]));
        g += rule.weights[q] * psi * psi.transpose();
    }
    return g;
}

/// Galerkin projection of the affine model onto the spatial POD space
/// (and optionally reduced PCE spaces). Each affine component is projected
/// once: A^_j = V^T L^{-1} A_j L^{-T} V.
struct ReducedModel {
    PodBasis spatial;
    BasisSelection pce;   // one entry per parameter; nullopt keeps the nodal basis
    std::vector<QuadratureRule> training_rules;
    std::vector<UniformMeasure> domains;
    Matrix base;
    std::vector<Matrix> terms;
    Vector load;
    Vector observation;

    std::size_t k0() const { return spatial.k; }
    bool coupled() const {
        for (const auto& b : pce) {
            if (b) return true;
        }
        return false;
    }
    Matrix operator_at(std::span<const double> alpha) const {
        Matrix a = base;
        for (std::size_t i = 0; i < terms.size(); ++i) a += alpha[i] * terms[i];
        return a;
    }
};

inline ReducedModel build_reduced_model(const ParametricModel& model,
                                        const std::vector<QuadratureRule>& rules,
                                        const PodBasis& spatial_basis,
                                        const BasisSelection& pce_bases = {}) {
    detail::check_rules(model, rules);
    if (spatial_basis.dim != 0 || spatial_basis.full_size() != model.n_dof() ||
        spatial_basis.factor.size() != model.n_dof()) {
        throw ShapeError("spatial basis does not match the model's spatial dimension");
    }
    if (!pce_bases.empty() && pce_bases.size() != rules.size()) {
        throw ShapeError("need one PCE basis entry (or keep) per parameter");
    }
    ReducedModel rm;
    rm.spatial = spatial_basis;
    rm.pce = pce_bases.empty() ? BasisSelection(rules.size()) : pce_bases;
    for (std::size_t i = 0; i < rm.pce.size(); ++i) {
        const auto& b = rm.pce[i];
        if (b && (b->full_size() != rules[i].size() || b->factor.size() != rules[i].size())) {
            throw ShapeError("PCE basis " + std::to_string(i) + " does not match its rule");
        }
    }
    rm.training_rules = rules;
    rm.domains = model.param_domains();
    const Matrix& cm = spatial_basis.coeff_map;   // k0 x n
    const Matrix cmt = cm.transpose();
    auto project = [&](const SparseMatrix& a) -> Matrix {
        const Matrix acm = a * cmt;
        return cm * acm;
    };
    rm.base = project(model.base_operator());
    for (const auto& t : model.parameter_operators()) rm.terms.push_back(project(t));
    rm.load = cm * model.load();
    // C L^{-T} V = (V^T L^{-1} C^T)^T
    rm.observation = cm * model.observation();
    return rm;
}

namespace detail {

inline Vector solve_small(const Matrix& a, const Vector& b, const GridPoint* node) {
    Eigen::PartialPivLU<Matrix> lu(a);
    const Vector diag = lu.matrixLU().diagonal().cwiseAbs();
    const double scale = a.cwiseAbs().maxCoeff();
    if (!(diag.minCoeff() > 1e-13 * scale)) {
        throw SingularSystemError("reduced system is singular (under-resolved basis?)",
                                  node ? node->index : Index{});
    }
    return lu.solve(b);
}

}  // namespace detail

/// Evaluates the reduced model on a (possibly finer) tensor grid.
inline UqResult solve_reduced(const ReducedModel& rm, const std::vector<QuadratureRule>& eval_rules,
                              Method tag = Method::PcePod, unsigned threads = 0) {
    if (eval_rules.size() != rm.domains.size()) {
        throw ShapeError("need one evaluation rule per parameter");
    }
    for (std::size_t i = 0; i < eval_rules.size(); ++i) {
        if (eval_rules[i].measure() != rm.domains[i]) {
            throw ValidationError("evaluation rule " + std::to_string(i) +
                                  " has a different support than the model");
        }
    }
    const auto t0 = detail::Clock::now();
    const auto grid = tensor_grid(eval_rules);
    std::vector<double> obs(grid.size());
    std::vector<double> w(grid.size());
    for (std::size_t p = 0; p < grid.size(); ++p) w[p] = grid[p].weight;

    if (!rm.coupled()) {
        parallel_for(
            grid.size(),
            [&](std::size_t p) {
                const Vector y = detail::solve_small(rm.operator_at(grid[p].alpha), rm.load, &grid[p]);
                obs[p] = rm.observation.dot(y);
            },
            threads);
    } else {
        // phi(alpha) = phi_N (x) ... (x) phi_1, with phi_i the reduced basis
        // Psi^_i(alpha_i) for reduced dimensions and the nodal unit vector of
        // the evaluation rule otherwise.
        auto phi_at = [&](const GridPoint& g) {
            Matrix phi = Matrix::Ones(1, 1);
            for (std::size_t i = 0; i < eval_rules.size(); ++i) {
                Vector pi;
                if (rm.pce[i]) {
                    pi = rm.pce[i]->eval(lagrange_basis(rm.training_rules[i], g.alpha[i]));
                } else {
                    pi = Vector::Unit(static_cast<Eigen::Index>(eval_rules[i].size()),
                                      static_cast<Eigen::Index>(g.index[i]));
                }
                phi = kron(pi, phi);
            }
            return Vector(phi.col(0));
        };
        const auto k0 = static_cast<Eigen::Index>(rm.k0());
        std::vector<Vector> phis;
        phis.reserve(grid.size());
        for (const auto& g : grid) phis.push_back(phi_at(g));
        const Eigen::Index np = phis.front().size();
        Matrix s = Matrix::Zero(np * k0, np * k0);
        Vector rhs = Vector::Zero(np * k0);
        for (std::size_t p = 0; p < grid.size(); ++p) {
            const Matrix a = rm.operator_at(grid[p].alpha);
            const Vector& phi = phis[p];
            for (Eigen::Index r = 0; r < np; ++r) {
                if (phi[r] == 0.0) continue;
                rhs.segment(r * k0, k0) += (w[p] * phi[r]) * rm.load;
                for (Eigen::Index c = 0; c < np; ++c) {
                    if (phi[c] == 0.0) continue;
                    s.block(r * k0, c * k0, k0, k0) += (w[p] * phi[r] * phi[c]) * a;
                }
            }
        }
        const Vector y = detail::solve_small(s, rhs, nullptr);
        const Eigen::Map<const Matrix> ymat(y.data(), k0, np);
        for (std::size_t p = 0; p < grid.size(); ++p) {
            obs[p] = rm.observation.dot(ymat * phis[p]);
        }
    }
    UqResult r = weighted_statistics(obs, w, tag);
    r.n_solves = rm.coupled() ? 1 : grid.size();
    r.wall_time = detail::seconds_since(t0);
    for (const auto& wmsg : rm.spatial.warnings) r.warnings.push_back(wmsg);
    return r;
}

/// Seeded sampling streams. A SplitMix64 sequence started at the user seed
/// yields one mt19937_64 seed per parameter dimension (child i is the
/// (i+1)-th SplitMix64 output), plus one extra child for resampling.
/// Uniform variates are the top 53 bits of each draw scaled to [0, 1).
class SampleStreams {
public:
    SampleStreams(std::uint64_t seed, std::size_t dims) {
        std::uint64_t state = seed;
        for (std::size_t i = 0; i <= dims; ++i) streams_.emplace_back(splitmix64(state));
    }

    static std::uint64_t splitmix64(std::uint64_t& state) {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform(std::size_t dim) { return static_cast<double>(streams_.at(dim)() >> 11) * 0x1.0p-53; }

    std::size_t dims() const { return streams_.size() - 1; }

    /// Draw from the resampling stream.
    double uniform_resample() { return static_cast<double>(streams_.back()() >> 11) * 0x1.0p-53; }

private:
    std::vector<std::mt19937_64> streams_;
};

/// `n` parameter tuples, dimension i drawn from child stream i.
inline std::vector<std::vector<double>> draw_parameters(const std::vector<UniformMeasure>& domains,
                                                        std::size_t n, SampleStreams& streams) {
    std::vector<std::vector<double>> alpha(n, std::vector<double>(domains.size()));
    for (std::size_t i = 0; i < domains.size(); ++i) {
        for (std::size_t s = 0; s < n; ++s) alpha[s][i] = domains[i].from_unit(streams.uniform(i));
    }
    return alpha;
}

/// Plain Monte Carlo estimate of mean and (population) variance of Cy.
inline UqResult monte_carlo(const ParametricModel& model, std::size_t n, std::uint64_t seed,
                            unsigned threads = 0) {
    if (n < 1) throw ValidationError("monte_carlo needs at least one sample");
    const auto t0 = detail::Clock::now();
    SampleStreams streams(seed, model.n_params());
    auto alpha = draw_parameters(model.param_domains(), n, streams);
    std::vector<double> obs(n);
    std::vector<char> failed(n, 0);
    parallel_for(
        n,
        [&](std::size_t s) {
            try {
                obs[s] = model.observe(model.solve(alpha[s]));
            } catch (const SingularSystemError&) {
                failed[s] = 1;
            }
        },
        threads);
    std::size_t resampled = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (!failed[s]) continue;
        for (std::size_t i = 0; i < model.n_params(); ++i) {
            alpha[s][i] = model.param_domains()[i].from_unit(streams.uniform_resample());
        }
        ++resampled;
        obs[s] = model.observe(model.solve(alpha[s]));   // a second failure propagates
    }
    const std::vector<double> w(n, 1.0 / static_cast<double>(n));
    UqResult r = weighted_statistics(obs, w, Method::Mc);
    r.n_solves = n + resampled;
    if (resampled > 0) r.warnings.push_back(std::to_string(resampled) + " singular draws resampled");
    r.wall_time = detail::seconds_since(t0);
    return r;
}

/// Monte Carlo on a reduced model with only the spatial dimension reduced.
inline UqResult monte_carlo_reduced(const ReducedModel& rm, std::size_t n, std::uint64_t seed,
                                    unsigned threads = 0) {
    if (n < 1) throw ValidationError("monte_carlo_reduced needs at least one sample");
    if (rm.coupled()) {
        throw ValidationError("Monte Carlo needs a reduced model without PCE reduction");
    }
    const auto t0 = detail::Clock::now();
    SampleStreams streams(seed, rm.domains.size());
    const auto alpha = draw_parameters(rm.domains, n, streams);
    std::vector<double> obs(n);
    parallel_for(
        n,
        [&](std::size_t s) {
            obs[s] = rm.observation.dot(detail::solve_small(rm.operator_at(alpha[s]), rm.load, nullptr));
        },
        threads);
    const std::vector<double> w(n, 1.0 / static_cast<double>(n));
    UqResult r = weighted_statistics(obs, w, Method::McPod);
    r.n_solves = n;
    r.wall_time = detail::seconds_since(t0);
    for (const auto& wmsg : rm.spatial.warnings) r.warnings.push_back(wmsg);
    return r;
}

struct RandomSnapshotPod {
    PodBasis basis;
    double e_proj = 0.0;   // (1/k) || C (I - L^{-T} V V^T L^T) Y ||_1
    double scale = 0.0;    // (1/k) || C Y ||_1
    Matrix snapshots;      // d_0 x k
    std::vector<std::vector<double>> alpha;
};

/// POD basis from k random snapshots and the projection error in the
/// estimated mean of Cy.
inline RandomSnapshotPod random_snapshot_pod(const ParametricModel& model, std::size_t k,
                                             std::size_t kprime, std::uint64_t seed,
                                             const MassFactor& spatial_factor, unsigned threads = 0) {
    if (!(kprime >= 1 && kprime <= k && k <= model.n_dof())) {
        throw ValidationError("random_snapshot_pod needs 1 <= kprime <= k <= n_dof");
    }
    if (spatial_factor.size() != model.n_dof()) throw ShapeError("spatial factor has wrong size");
    SampleStreams streams(seed, model.n_params());
    RandomSnapshotPod out;
    out.alpha = draw_parameters(model.param_domains(), k, streams);
    const auto n = static_cast<Eigen::Index>(model.n_dof());
    out.snapshots.resize(n, static_cast<Eigen::Index>(k));
    parallel_for(
        k,
        [&](std::size_t s) {
            out.snapshots.col(static_cast<Eigen::Index>(s)) = model.solve(out.alpha[s]);
        },
        threads);

    const CoeffTensor t({model.n_dof(), k},
                        std::vector<double>(out.snapshots.data(), out.snapshots.data() + out.snapshots.size()));
    out.basis = pod_basis(t, {spatial_factor, MassFactor::identity(k)}, 0, kprime);

    const Matrix residual = out.snapshots - out.basis.expand_map() * (out.basis.reduce_map() * out.snapshots);
    const Vector& c = model.observation();
    out.e_proj = (c.transpose() * residual).cwiseAbs().sum() / static_cast<double>(k);
    out.scale = (c.transpose() * out.snapshots).cwiseAbs().sum() / static_cast<double>(k);
    return out;
}

}  // namespace genpod
