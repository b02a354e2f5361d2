#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <vector>

#include "crowdguard/errors.hpp"

namespace crowdguard {

// Dense row-major tensor. Training runs on float; the double instantiation
// exists for high-precision check paths in tests.
template <typename T>
struct BasicTensor {
    std::vector<int> shape;
    std::vector<T> data;

    BasicTensor() = default;
    explicit BasicTensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), T(0));
    }
    BasicTensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::size_t>(numel_of(shape)) != data.size())
            throw ConfigError("tensor shape/data size mismatch");
    }

    static long numel_of(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) n *= d;
        return n;
    }

    long numel() const { return static_cast<long>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    T& operator[](long i) { return data[static_cast<std::size_t>(i)]; }
    const T& operator[](long i) const { return data[static_cast<std::size_t>(i)]; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    BasicTensor<U> cast() const {
        BasicTensor<U> out(shape);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ")";
        return os.str();
    }
};

using Tensor = BasicTensor<float>;

inline bool same_shape(const std::vector<int>& a, const std::vector<int>& b) { return a == b; }

}  // namespace crowdguard
