#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "genpod/tensor.hpp"
#include "oracles.hpp"

using namespace genpod;

namespace {

CoeffTensor from_rows_2x2(double a, double b, double c, double d) {
    CoeffTensor t({2, 2});
    t.at({0, 0}) = a;
    t.at({0, 1}) = b;
    t.at({1, 0}) = c;
    t.at({1, 1}) = d;
    return t;
}

std::vector<std::size_t> random_dims(std::mt19937_64& rng, std::size_t order, std::size_t max_dim) {
    std::uniform_int_distribution<std::size_t> u(1, max_dim);
    std::vector<std::size_t> dims(order);
    for (auto& d : dims) d = u(rng);
    return dims;
}

}  // namespace

TEST(CoeffTensor, RejectsBadShapes) {
    EXPECT_THROW(CoeffTensor({2, 0}), ShapeError);
    EXPECT_THROW(CoeffTensor(Index{}), ShapeError);
    EXPECT_THROW(CoeffTensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST(Vec, TwoByTwoIsDimensionOneFastest) {
    const Vector v = vec(from_rows_2x2(1, 2, 3, 4));
    EXPECT_EQ(std::vector<double>(v.data(), v.data() + 4), (std::vector<double>{1, 3, 2, 4}));
}

TEST(Vec, SingleEntry) {
    CoeffTensor t({1}, {7.5});
    EXPECT_EQ(vec(t).size(), 1);
    EXPECT_EQ(vec(t)[0], 7.5);
}

TEST(Vec, TwoByThreeEnumeration) {
    CoeffTensor t({2, 3});
    for (std::size_t k1 = 0; k1 < 2; ++k1)
        for (std::size_t k2 = 0; k2 < 3; ++k2) t.at({k1, k2}) = 10.0 * (k1 + 1) + (k2 + 1);
    const Vector v = vec(t);
    EXPECT_EQ(std::vector<double>(v.data(), v.data() + 6),
              (std::vector<double>{11, 21, 12, 22, 13, 23}));
}

TEST(MatricizeMode1, VectorBecomesColumn) {
    CoeffTensor t({3}, {1, 2, 3});
    const Matrix m = matricize_mode1(t);
    EXPECT_EQ(m.rows(), 3);
    EXPECT_EQ(m.cols(), 1);
    EXPECT_EQ(m(2, 0), 3.0);
}

TEST(MatricizeMode1, IdentityOnMatrices) {
    Matrix expected(2, 2);
    expected << 1, 2, 3, 4;
    EXPECT_EQ(matricize_mode1(from_rows_2x2(1, 2, 3, 4)), expected);
}

TEST(MatricizeMode1, ThreeWayColumnOrder) {
    CoeffTensor t({2, 2, 2});
    oracle::for_each_index(t.dims(), [&](const auto& k) {
        t(k) = 100.0 * (k[0] + 1) + 10.0 * (k[1] + 1) + (k[2] + 1);
    });
    Matrix expected(2, 4);
    // columns (k2, k3) = (1,1), (2,1), (1,2), (2,2)
    expected << 111, 121, 112, 122, 211, 221, 212, 222;
    EXPECT_EQ(matricize_mode1(t), expected);
    EXPECT_EQ(fold_mode1(matricize_mode1(t), t.dims()), t);
}

TEST(Cycle, MatrixTranspose) {
    std::mt19937_64 rng(1);
    const CoeffTensor t = oracle::random_tensor(rng, {2, 3});
    const CoeffTensor c = cycle(t);
    EXPECT_EQ(c.dims(), (Index{3, 2}));
    EXPECT_EQ(matricize_mode1(c), matricize_mode1(t).transpose());
}

TEST(Cycle, ThreeWayEntrywiseAndPeriod) {
    CoeffTensor t({2, 2, 2});
    for (std::size_t p = 0; p < t.size(); ++p) t.data()[p] = static_cast<double>(p + 1);
    const CoeffTensor c = cycle(t);
    oracle::for_each_index(t.dims(), [&](const auto& k) {
        // t(k1, k2, k3) sits at (k2, k3, k1) after one cycle.
        EXPECT_EQ(c.at({k[1], k[2], k[0]}), t(k));
    });
    EXPECT_EQ(cycle(cycle(cycle(t))), t);
    EXPECT_NE(cycle(cycle(t)), t);
}

TEST(Cycle, PeriodEqualsOrderProperty) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        for (std::size_t order = 1; order <= 4; ++order) {
            const CoeffTensor t = oracle::random_tensor(rng, random_dims(rng, order, 4));
            CoeffTensor c = t;
            for (std::size_t s = 0; s < order; ++s) c = cycle(c);
            ASSERT_EQ(c, t);
        }
    }
}

TEST(Matricize, CycledModeOneMatchesEnumeratedFibersProperty) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        for (std::size_t order = 1; order <= 4; ++order) {
            const CoeffTensor t = oracle::random_tensor(rng, random_dims(rng, order, 4));
            for (std::size_t mode = 0; mode < order; ++mode) {
                ASSERT_EQ(matricize_mode1(cycle(t, mode)), oracle::unfold(t, mode));
                ASSERT_EQ(matricize(t, mode), oracle::unfold(t, mode));
            }
        }
    }
}

TEST(ModeProduct, IdentityLeavesTensorUnchanged) {
    std::mt19937_64 rng(4);
    const CoeffTensor t = oracle::random_tensor(rng, {3, 2, 4});
    for (std::size_t m = 0; m < 3; ++m) {
        EXPECT_EQ(mode_product(t, Matrix::Identity(t.dim(m), t.dim(m)), m), t);
    }
}

TEST(ModeProduct, RowOfOnesSumsFibers) {
    std::mt19937_64 rng(5);
    const CoeffTensor t = oracle::random_tensor(rng, {3, 2, 4});
    for (std::size_t m = 0; m < 3; ++m) {
        const CoeffTensor s = mode_product(t, Matrix::Ones(1, t.dim(m)), m);
        Index sd = t.dims();
        sd[m] = 1;
        ASSERT_EQ(s.dims(), sd);
        oracle::for_each_index(sd, [&](const auto& k) {
            double sum = 0.0;
            auto kk = k;
            for (std::size_t j = 0; j < t.dim(m); ++j) {
                kk[m] = j;
                sum += oracle::entry(t, kk);
            }
            EXPECT_NEAR(s(k), sum, 1e-14);
        });
    }
}

TEST(ModeProduct, VecIdentityWithKronecker) {
    std::mt19937_64 rng(6);
    const CoeffTensor t = oracle::random_tensor(rng, {2, 3, 2});
    for (std::size_t mode = 0; mode < 3; ++mode) {
        const Matrix m = oracle::random_matrix(rng, 4, static_cast<Eigen::Index>(t.dim(mode)));
        std::vector<Matrix> factors;
        for (std::size_t j = 0; j < 3; ++j) {
            factors.push_back(j == mode ? m : Matrix::Identity(t.dim(j), t.dim(j)));
        }
        const Vector lhs = vec(mode_product(t, m, mode));
        const Vector rhs = oracle::kron_reversed(factors) * vec(t);
        EXPECT_LT((lhs - rhs).norm(), 1e-13);
    }
}

TEST(ModeProduct, IntegerIdentityChainIsExactProperty) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto dims = random_dims(rng, 3, 4);
        const CoeffTensor t = oracle::random_tensor(rng, dims, true);
        const std::size_t mode = static_cast<std::size_t>(trial % 3);
        const Matrix m = oracle::random_matrix(rng, 3, static_cast<Eigen::Index>(dims[mode]), true);
        std::vector<Matrix> factors;
        for (std::size_t j = 0; j < 3; ++j) {
            factors.push_back(j == mode ? m : Matrix::Identity(dims[j], dims[j]));
        }
        ASSERT_EQ(vec(mode_product(t, m, mode)), oracle::kron_reversed(factors) * vec(t));
        // folding m * (mode matricization) gives the same tensor
        ASSERT_EQ(matricize(mode_product(t, m, mode), mode), m * matricize(t, mode));
    }
}

TEST(ModeProduct, RejectsMismatch) {
    const CoeffTensor t({2, 3});
    EXPECT_THROW(mode_product(t, Matrix::Identity(2, 2), 1), ShapeError);
    EXPECT_THROW(mode_product(t, Matrix::Identity(2, 2), 2), ShapeError);
}

TEST(Kron, IdentitiesAndScalars) {
    EXPECT_EQ(kron(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), Matrix::Identity(6, 6));
    std::mt19937_64 rng(8);
    const Matrix b = oracle::random_matrix(rng, 2, 3);
    EXPECT_EQ(kron(Matrix::Constant(1, 1, 2.0), b), 2.0 * b);
    EXPECT_EQ(kron(b, Matrix::Identity(2, 2)), oracle::kron(b, Matrix::Identity(2, 2)));
}

TEST(Kron, VecIdentity) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = oracle::random_matrix(rng, 2, 2);
        const Matrix b = oracle::random_matrix(rng, 2, 2);
        const Matrix x = oracle::random_matrix(rng, 2, 2);
        const Matrix bxa = b * x * a.transpose();
        const Vector lhs = kron(a, b) * Eigen::Map<const Vector>(x.data(), 4);
        EXPECT_LT((lhs - Eigen::Map<const Vector>(bxa.data(), 4)).norm(), 1e-14);
    }
}

TEST(TensorJson, RoundTripAndValidation) {
    std::mt19937_64 rng(10);
    const CoeffTensor t = oracle::random_tensor(rng, {2, 3, 2});
    const nlohmann::json j = t;
    EXPECT_EQ(j.at("dims"), nlohmann::json({2, 3, 2}));
    EXPECT_EQ(j.at("data").size(), 12U);
    EXPECT_EQ(j.get<CoeffTensor>(), t);
    const auto bad = nlohmann::json::parse(R"({"dims":[2,2],"data":[1,2,3]})");
    EXPECT_THROW(bad.get<CoeffTensor>(), ShapeError);
}
