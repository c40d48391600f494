#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "genpod/pod.hpp"
#include "oracles.hpp"

using namespace genpod;

namespace {

struct Setup {
    CoeffTensor t;
    std::vector<Matrix> masses;
    std::vector<MassFactor> factors;
};

Setup random_setup(std::mt19937_64& rng, const Index& dims, bool identity = false) {
    Setup s{oracle::random_tensor(rng, dims), {}, {}};
    for (auto d : dims) {
        const auto n = static_cast<Eigen::Index>(d);
        s.masses.push_back(identity ? Matrix(Matrix::Identity(n, n)) : oracle::random_spd(rng, n));
        s.factors.push_back(mass_factor(s.masses.back()));
    }
    return s;
}

double v_norm(const CoeffTensor& t, const std::vector<Matrix>& masses) {
    return std::sqrt(std::max(0.0, oracle::quadratic_form(t, masses)));
}

CoeffTensor difference(const CoeffTensor& a, const CoeffTensor& b) {
    CoeffTensor d = a;
    for (std::size_t p = 0; p < d.size(); ++p) d.data()[p] -= b.data()[p];
    return d;
}

BasisSelection only(std::size_t order, std::size_t i, const PodBasis& b) {
    BasisSelection sel(order);
    sel[i] = b;
    return sel;
}

}  // namespace

TEST(WeightedNorm, MatchesDenseKroneckerQuadraticForm) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_setup(rng, {3, 2, 4});
        const double ref = v_norm(s.t, s.masses);
        EXPECT_LT(oracle::rel(weighted_norm(s.t, s.factors), ref), 1e-12);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_LT(oracle::rel(weighted_norm_cycled(s.t, s.factors, i), ref), 1e-13);
        }
    }
}

TEST(WeightedNorm, IdentityFactorsGiveFrobenius) {
    std::mt19937_64 rng(22);
    const auto s = random_setup(rng, {2, 3, 2, 2}, true);
    EXPECT_LT(oracle::rel(weighted_norm(s.t, s.factors), frobenius_norm(s.t)), 1e-14);
}

TEST(WeightedNorm, RejectsMismatchedFactors) {
    std::mt19937_64 rng(23);
    auto s = random_setup(rng, {3, 2});
    s.factors.pop_back();
    EXPECT_THROW(weighted_norm(s.t, s.factors), ShapeError);
    s.factors.push_back(MassFactor::identity(3));
    EXPECT_THROW(weighted_norm(s.t, s.factors), ShapeError);
}

TEST(PodBasis, RankOneTensor) {
    Vector a(3), b(2), c(2);
    a << 1, -2, 2;
    b << 3, 4;
    c << 1, 0;
    CoeffTensor t({3, 2, 2});
    oracle::for_each_index(t.dims(), [&](const auto& k) { t(k) = a[k[0]] * b[k[1]] * c[k[2]]; });
    const std::vector<MassFactor> ids{MassFactor::identity(3), MassFactor::identity(2), MassFactor::identity(2)};
    const PodBasis p = pod_basis(t, ids, 0, 1);
    EXPECT_NEAR(p.singular_values[0], 15.0, 1e-13);
    EXPECT_LT(p.singular_values.tail(p.singular_values.size() - 1).norm(), 1e-13);
    EXPECT_EQ(p.numerical_rank, 1U);
    // largest-magnitude entry positive
    const Vector expected = -a / 3.0;
    EXPECT_LT((p.vectors.col(0) - expected).norm(), 1e-14);
    EXPECT_TRUE(p.warnings.empty());
}

TEST(PodBasis, IdentityFactorsMatchJacobiSvd) {
    std::mt19937_64 rng(24);
    const auto s = random_setup(rng, {4, 3, 5}, true);
    for (std::size_t i = 0; i < 3; ++i) {
        const Eigen::JacobiSVD<Matrix> svd(oracle::unfold(s.t, i), Eigen::ComputeFullU);
        const std::size_t d = s.t.dim(i);
        const PodBasis p = pod_basis(s.t, s.factors, i, d);
        for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) {
            EXPECT_LT(oracle::rel(p.singular_values[j], svd.singularValues()[j]), 1e-12);
        }
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(std::min<std::size_t>(d, 3)); ++c) {
            const double dot = std::abs(p.vectors.col(c).dot(svd.matrixU().col(c)));
            EXPECT_NEAR(dot, 1.0, 1e-12);
            Eigen::Index arg;
            p.vectors.col(c).cwiseAbs().maxCoeff(&arg);
            EXPECT_GT(p.vectors(arg, c), 0.0);
        }
        const Matrix g = p.vectors.transpose() * p.vectors;
        EXPECT_LT((g - Matrix::Identity(g.rows(), g.cols())).norm(), 1e-13);
    }
}

TEST(PodBasis, EnergyEqualsSquaredNormProperty) {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_setup(rng, {3, 4, 2});
        const double n2 = oracle::quadratic_form(s.t, s.masses);
        for (std::size_t i = 0; i < 3; ++i) {
            const PodBasis p = pod_basis(s.t, s.factors, i, 1);
            EXPECT_LT(oracle::rel(p.singular_values.squaredNorm(), n2), 1e-12);
        }
    }
}

TEST(PodBasis, CoefficientMapIsMassOrthonormal) {
    std::mt19937_64 rng(26);
    const auto s = random_setup(rng, {5, 3, 3});
    for (std::size_t k = 1; k <= 5; ++k) {
        const PodBasis p = pod_basis(s.t, s.factors, 0, k);
        const Matrix g = p.coeff_map * s.masses[0] * p.coeff_map.transpose();
        EXPECT_LT((g - Matrix::Identity(g.rows(), g.cols())).norm(), 1e-12);
        EXPECT_EQ(p.coeff_map.rows(), static_cast<Eigen::Index>(k));
        // reduced functions evaluated at a nodal point are the matching column of coeff_map
        const Vector e2 = Vector::Unit(5, 2);
        EXPECT_LT((p.eval(e2) - p.coeff_map.col(2)).norm(), 1e-15);
    }
}

TEST(PodBasis, GramPathMatchesSvd) {
    std::mt19937_64 rng(27);
    // rest = 20 * 10 = 200 > 50 * 3
    const auto s = random_setup(rng, {3, 20, 10});
    const PodBasis p = pod_basis(s.t, s.factors, 0, 2);
    Matrix w = oracle::unfold(s.t, 0);
    const Matrix l0 = s.factors[0].dense();
    const Matrix right = oracle::kron(s.factors[2].dense(), s.factors[1].dense());
    w = l0.transpose() * w * right;
    const Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU);
    for (Eigen::Index j = 0; j < 3; ++j) {
        EXPECT_LT(oracle::rel(p.singular_values[j], svd.singularValues()[j]), 1e-10);
    }
    for (Eigen::Index c = 0; c < 2; ++c) {
        EXPECT_NEAR(std::abs(p.vectors.col(c).dot(svd.matrixU().col(c))), 1.0, 1e-10);
    }
}

TEST(PodBasis, KOutsideRangeAndRankWarning) {
    std::mt19937_64 rng(28);
    const auto s = random_setup(rng, {3, 2});
    EXPECT_THROW(pod_basis(s.t, s.factors, 0, 0), ShapeError);
    EXPECT_THROW(pod_basis(s.t, s.factors, 0, 4), ShapeError);
    EXPECT_THROW(pod_basis(s.t, s.factors, 2, 1), ShapeError);
    // a 3 x 2 matricization has rank at most 2
    const PodBasis p = pod_basis(s.t, s.factors, 0, 3);
    EXPECT_EQ(p.numerical_rank, 2U);
    EXPECT_EQ(p.warnings.size(), 1U);
    EXPECT_EQ(p.vectors.cols(), 3);
}

TEST(Project, KeepingEverythingIsIdentity) {
    std::mt19937_64 rng(29);
    const auto s = random_setup(rng, {3, 2, 2});
    EXPECT_EQ(project(s.t, BasisSelection(3)), s.t);
}

TEST(Project, FullRankBasesReproduceTensor) {
    std::mt19937_64 rng(30);
    const auto s = random_setup(rng, {3, 4, 2});
    BasisSelection sel(3);
    for (std::size_t i = 0; i < 3; ++i) sel[i] = pod_basis(s.t, s.factors, i, s.t.dim(i));
    const CoeffTensor p = project(s.t, sel);
    EXPECT_LT(v_norm(difference(p, s.t), s.masses) / v_norm(s.t, s.masses), 1e-12);
}

TEST(Project, IsIdempotentProperty) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = random_setup(rng, {4, 3, 3});
        BasisSelection sel(3);
        sel[0] = pod_basis(s.t, s.factors, 0, 2);
        sel[2] = pod_basis(s.t, s.factors, 2, 1);
        const CoeffTensor once = project(s.t, sel);
        const CoeffTensor twice = project(once, sel);
        EXPECT_LT(v_norm(difference(twice, once), s.masses), 1e-12 * v_norm(s.t, s.masses));
    }
}

TEST(ReduceExpand, ExpandOfReduceIsProjection) {
    std::mt19937_64 rng(32);
    const auto s = random_setup(rng, {4, 3, 3});
    BasisSelection sel(3);
    sel[0] = pod_basis(s.t, s.factors, 0, 2);
    sel[1] = pod_basis(s.t, s.factors, 1, 2);
    const CoeffTensor r = reduce(s.t, sel);
    EXPECT_EQ(r.dims(), (Index{2, 2, 3}));
    const CoeffTensor back = expand(r, sel);
    EXPECT_LT(v_norm(difference(back, project(s.t, sel)), s.masses), 1e-12 * v_norm(s.t, s.masses));
    // reduced bases are V-orthonormal, so the reduced Euclidean-weighted norm equals the V-norm
    std::vector<Matrix> reduced_masses{Matrix::Identity(2, 2), Matrix::Identity(2, 2), s.masses[2]};
    EXPECT_LT(oracle::rel(v_norm(r, reduced_masses), v_norm(back, s.masses)), 1e-12);
    EXPECT_THROW(expand(s.t, sel), ShapeError);
}

TEST(ReduceExpand, RankOneReducesToSingleEntry) {
    Vector a(2), b(3);
    a << 3, 4;
    b << 0, 0, 2;
    CoeffTensor t({2, 3});
    oracle::for_each_index(t.dims(), [&](const auto& k) { t(k) = a[k[0]] * b[k[1]]; });
    const std::vector<MassFactor> ids{MassFactor::identity(2), MassFactor::identity(3)};
    BasisSelection sel{pod_basis(t, ids, 0, 1), pod_basis(t, ids, 1, 1)};
    const CoeffTensor r = reduce(t, sel);
    ASSERT_EQ(r.size(), 1U);
    EXPECT_NEAR(std::abs(r.data()[0]), 10.0, 1e-13);
}

TEST(ErrorBound, ExactForSingleDimensionTruncation) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = random_setup(rng, {5, 3, 4});
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t k = 1; k < s.t.dim(i); ++k) {
                const PodBasis p = pod_basis(s.t, s.factors, i, k);
                const double err = v_norm(difference(project(s.t, only(3, i, p)), s.t), s.masses);
                const double tail = p.singular_values.tail(p.singular_values.size() - k).norm();
                EXPECT_LT(oracle::rel(err, tail), 1e-10) << "i=" << i << " k=" << k;
            }
        }
    }
}

TEST(ErrorBound, BoundsMultiDimensionTruncationProperty) {
    std::mt19937_64 rng(34);
    std::uniform_int_distribution<std::size_t> u(1, 4);
    const auto s = random_setup(rng, {4, 4, 4});
    std::vector<PodBasis> full;
    for (std::size_t i = 0; i < 3; ++i) full.push_back(pod_basis(s.t, s.factors, i, 4));
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<std::size_t> ks{u(rng), u(rng), u(rng)};
        BasisSelection sel(3);
        std::vector<PodBasis> bases;
        for (std::size_t i = 0; i < 3; ++i) {
            bases.push_back(pod_basis(s.t, s.factors, i, ks[i]));
            sel[i] = bases.back();
        }
        const double err = v_norm(difference(project(s.t, sel), s.t), s.masses);
        const double bound = projection_error_bound(bases);
        EXPECT_LE(err, bound * (1 + 1e-12) + 1e-13 * v_norm(s.t, s.masses));
        EXPECT_NEAR(projection_error_bound(full, ks), bound, 1e-14 * (1 + bound));
    }
}

TEST(ErrorBound, PodBeatsRandomSubspaces) {
    std::mt19937_64 rng(35);
    const auto s = random_setup(rng, {5, 3, 3});
    for (std::size_t k = 1; k <= 3; ++k) {
        const PodBasis p = pod_basis(s.t, s.factors, 0, k);
        const double pod_err = v_norm(difference(project(s.t, only(3, 0, p)), s.t), s.masses);
        for (int trial = 0; trial < 50; ++trial) {
            const Matrix q = oracle::random_m_orthonormal(rng, s.masses[0], static_cast<Eigen::Index>(k));
            const Matrix proj = q * q.transpose() * s.masses[0];
            CoeffTensor other(s.t.dims());
            oracle::for_each_index(s.t.dims(), [&](const auto& idx) {
                double v = 0.0;
                auto j = idx;
                for (std::size_t r = 0; r < 5; ++r) {
                    j[0] = r;
                    v += proj(static_cast<Eigen::Index>(idx[0]), static_cast<Eigen::Index>(r)) * oracle::entry(s.t, j);
                }
                other(idx) = v;
            });
            EXPECT_GE(v_norm(difference(other, s.t), s.masses), pod_err * (1 - 1e-12));
        }
    }
}

TEST(PodJson, RoundTrip) {
    std::mt19937_64 rng(36);
    const auto s = random_setup(rng, {4, 3});
    const PodBasis p = pod_basis(s.t, s.factors, 0, 2);
    const nlohmann::json j = pod_basis_to_json(p);
    EXPECT_EQ(j.at("vectors").size(), 2U);
    const PodBasis back = pod_basis_from_json(j, s.factors[0]);
    EXPECT_EQ(back.vectors, p.vectors);
    EXPECT_EQ(back.singular_values, p.singular_values);
    EXPECT_LT((back.coeff_map - p.coeff_map).norm(), 1e-15);
    EXPECT_EQ(back.numerical_rank, p.numerical_rank);
    EXPECT_THROW(pod_basis_from_json(j, MassFactor::identity(3)), ShapeError);
}
