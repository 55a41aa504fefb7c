#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctes {

// Dense row-major tensor; cols == 1 means vector, 1x1 means scalar.
struct Tensor {
    int rows = 0;
    int cols = 1;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }
    static Tensor vec(std::vector<double> data) {
        Tensor t;
        t.rows = static_cast<int>(data.size());
        t.cols = 1;
        t.v = std::move(data);
        return t;
    }
    static Tensor zeros(int r, int c = 1) { return Tensor(r, c); }

    int size() const { return rows * cols; }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::string shape_str() const {
        return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
    }
};

}  // namespace ctes
