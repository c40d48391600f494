#pragma once

// Dense N-way coefficient tensors and the mode algebra around them.
//
// Storage order is normative: entry (k_1,...,k_N) lives at flat index
//   k_1 + d_1 k_2 + d_1 d_2 k_3 + ...      (0-based, dimension 1 fastest)
// so that vec(X) pairs with the Kronecker ordering Psi_N (x) ... (x) Psi_1.
// Serialized tensors use the same order.

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "genpod/errors.hpp"

namespace genpod {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::vector<std::size_t>;

inline std::size_t product(std::span<const std::size_t> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
}

class CoeffTensor {
public:
    CoeffTensor() = default;

    explicit CoeffTensor(Index dims) : dims_(std::move(dims)) {
        check_dims();
        data_.assign(product(dims_), 0.0);
    }

    CoeffTensor(Index dims, std::vector<double> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        check_dims();
        if (data_.size() != product(dims_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match product of dims " +
                             std::to_string(product(dims_)));
        }
    }

    const Index& dims() const noexcept { return dims_; }
    std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
    std::size_t order() const noexcept { return dims_.size(); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    std::size_t flat_index(std::span<const std::size_t> idx) const {
        if (idx.size() != dims_.size()) {
            throw ShapeError("multi-index has wrong length");
        }
        std::size_t flat = 0;
        std::size_t stride = 1;
        for (std::size_t m = 0; m < dims_.size(); ++m) {
            if (idx[m] >= dims_[m]) {
                throw ShapeError("multi-index out of range");
            }
            flat += idx[m] * stride;
            stride *= dims_[m];
        }
        return flat;
    }

    Index multi_index(std::size_t flat) const {
        Index idx(dims_.size());
        for (std::size_t m = 0; m < dims_.size(); ++m) {
            idx[m] = flat % dims_[m];
            flat /= dims_[m];
        }
        return idx;
    }

    double operator()(std::span<const std::size_t> idx) const {
        return data_[flat_index(idx)];
    }
    double& operator()(std::span<const std::size_t> idx) {
        return data_[flat_index(idx)];
    }
    double at(std::initializer_list<std::size_t> idx) const {
        return (*this)(std::span<const std::size_t>(idx.begin(), idx.size()));
    }
    double& at(std::initializer_list<std::size_t> idx) {
        return (*this)(std::span<const std::size_t>(idx.begin(), idx.size()));
    }

    friend bool operator==(const CoeffTensor&, const CoeffTensor&) = default;

private:
    void check_dims() const {
        if (dims_.empty()) {
            throw ShapeError("tensor needs at least one dimension");
        }
        for (auto d : dims_) {
            if (d == 0) throw ShapeError("tensor dimensions must be positive");
        }
    }

    Index dims_;
    std::vector<double> data_;
};

/// Flat coefficient vector in storage order.
inline Vector vec(const CoeffTensor& t) {
    return Eigen::Map<const Vector>(t.data().data(),
                                    static_cast<Eigen::Index>(t.size()));
}

/// Inverse of vec for given dims.
inline CoeffTensor unvec(Index dims, const Vector& v) {
    return CoeffTensor(std::move(dims), std::vector<double>(v.data(), v.data() + v.size()));
}

/// d_1 x (d_2 ... d_N) matrix whose column j is the fiber t(:, k_2, ..., k_N)
/// with j = k_2 + d_2 k_3 + ... . Under the storage order this is a reshape.
inline Matrix matricize_mode1(const CoeffTensor& t) {
    const auto rows = static_cast<Eigen::Index>(t.dim(0));
    const auto cols = static_cast<Eigen::Index>(t.size() / t.dim(0));
    return Eigen::Map<const Matrix>(t.data().data(), rows, cols);
}

/// Fold a mode-1 matricization back into a tensor with the given dims.
inline CoeffTensor fold_mode1(const Matrix& m, Index dims) {
    if (dims.empty() || static_cast<std::size_t>(m.rows()) != dims[0] ||
        static_cast<std::size_t>(m.size()) != product(dims)) {
        throw ShapeError("matrix does not fold into the requested dims");
    }
    return CoeffTensor(std::move(dims), std::vector<double>(m.data(), m.data() + m.size()));
}

/// Cyclic permutation of the dimensions: dims (d_1,...,d_N) become
/// (d_2,...,d_N,d_1) and t(k_1,...,k_N) lands at (k_2,...,k_N,k_1).
/// N-fold application is the identity; for matrices it is the transpose.
inline CoeffTensor cycle(const CoeffTensor& t) {
    const auto& d = t.dims();
    const std::size_t lead = d[0];
    const std::size_t rest = t.size() / lead;
    Index nd(d.begin() + 1, d.end());
    nd.push_back(lead);
    // Old flat = k1 + lead * r with r the flat index of (k2..kN);
    // new flat = r + rest * k1.
    std::vector<double> out(t.size());
    const auto src = t.data();
    for (std::size_t r = 0; r < rest; ++r) {
        for (std::size_t k1 = 0; k1 < lead; ++k1) {
            out[r + rest * k1] = src[k1 + lead * r];
        }
    }
    return CoeffTensor(std::move(nd), std::move(out));
}

/// Apply cycle `times` times.
inline CoeffTensor cycle(const CoeffTensor& t, std::size_t times) {
    times %= t.order();
    CoeffTensor out = t;
    for (std::size_t s = 0; s < times; ++s) out = cycle(out);
    return out;
}

/// Mode-`mode` matricization: rows index dimension `mode`, columns run over
/// the remaining dimensions in cyclic order mode+1, ..., N, 1, ..., mode-1.
inline Matrix matricize(const CoeffTensor& t, std::size_t mode) {
    if (mode >= t.order()) throw ShapeError("mode out of range");
    return matricize_mode1(cycle(t, mode));
}

/// mode-`mode` product m o_mode t: every mode fiber is multiplied by m.
/// vec(m o_1 t) = (I (x) ... (x) I (x) m) vec(t).
inline CoeffTensor mode_product(const CoeffTensor& t, const Matrix& m, std::size_t mode) {
    if (mode >= t.order()) throw ShapeError("mode out of range");
    const std::size_t d = t.dim(mode);
    if (static_cast<std::size_t>(m.cols()) != d) {
        throw ShapeError("mode_product: matrix has " + std::to_string(m.cols()) +
                         " columns, tensor mode " + std::to_string(mode) + " has size " +
                         std::to_string(d));
    }
    const auto& dims = t.dims();
    const std::size_t left = product(std::span(dims).first(mode));
    const std::size_t right = product(std::span(dims).subspan(mode + 1));
    const auto new_d = static_cast<std::size_t>(m.rows());

    Index nd = dims;
    nd[mode] = new_d;
    CoeffTensor out(nd);
    const auto l = static_cast<Eigen::Index>(left);
    for (std::size_t r = 0; r < right; ++r) {
        Eigen::Map<const Matrix> slice(t.data().data() + left * d * r, l,
                                       static_cast<Eigen::Index>(d));
        Eigen::Map<Matrix> dst(out.data().data() + left * new_d * r, l,
                               static_cast<Eigen::Index>(new_d));
        dst.noalias() = slice * m.transpose();
    }
    return out;
}

/// Generalized mode product: `fn` maps a (d_mode x c) block of mode fibers
/// to a (d_new x c) block. mode_product(t, m, mode) is mode_map with m * x.
template <class Fn>
CoeffTensor mode_map(const CoeffTensor& t, std::size_t mode, std::size_t new_d, Fn&& fn) {
    if (mode >= t.order()) throw ShapeError("mode out of range");
    const auto& dims = t.dims();
    const std::size_t d = dims[mode];
    const std::size_t left = product(std::span(dims).first(mode));
    const std::size_t right = product(std::span(dims).subspan(mode + 1));
    Index nd = dims;
    nd[mode] = new_d;
    CoeffTensor out(nd);
    const auto l = static_cast<Eigen::Index>(left);
    for (std::size_t r = 0; r < right; ++r) {
        Eigen::Map<const Matrix> slice(t.data().data() + left * d * r, l,
                                       static_cast<Eigen::Index>(d));
        const Matrix mapped = fn(Matrix(slice.transpose()));
        if (static_cast<std::size_t>(mapped.rows()) != new_d || mapped.cols() != l) {
            throw ShapeError("mode_map: mapped block has wrong shape");
        }
        Eigen::Map<Matrix> dst(out.data().data() + left * new_d * r, l,
                               static_cast<Eigen::Index>(new_d));
        dst = mapped.transpose();
    }
    return out;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline double frobenius_norm(const CoeffTensor& t) { return vec(t).norm(); }

inline void to_json(nlohmann::json& j, const CoeffTensor& t) {
    j = nlohmann::json{{"dims", t.dims()},
                       {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

inline void from_json(const nlohmann::json& j, CoeffTensor& t) {
    t = CoeffTensor(j.at("dims").get<Index>(), j.at("data").get<std::vector<double>>());
}

}  // namespace genpod
