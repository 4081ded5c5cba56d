// Copyright (C) 2026 DVF contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "dvf/errors.hpp"

namespace dvf {

// Dense row-major tensor. Deliberately minimal: kernels take raw pointers,
// this only owns storage and remembers the shape.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::initializer_list<int> dims) { resize(dims); }

    void resize(std::initializer_list<int> dims) { resize(std::vector<int>(dims)); }
    void resize(const std::vector<int>& dims) {
        shape = dims;
        v.assign(count(dims), T(0));
    }

    static size_t count(const std::vector<int>& dims) {
        size_t n = 1;
        for (int d : dims) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t size() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    T& operator[](size_t i) { return v[i]; }
    const T& operator[](size_t i) const { return v[i]; }
};

}  // namespace dvf
