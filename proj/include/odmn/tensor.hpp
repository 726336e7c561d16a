#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "odmn/errors.hpp"

namespace odmn {

/// Dense 2-D matrix of doubles, row-major. The only numeric container in the
/// library; vectors are 1xN or Nx1 tensors.
class Tensor2 {
  public:
    Tensor2() = default;
    Tensor2(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw ShapeError("Tensor2: negative dimension");
    }

    static Tensor2 row(std::vector<double> values) {
        Tensor2 t;
        t.rows_ = 1;
        t.cols_ = static_cast<int>(values.size());
        t.v_ = std::move(values);
        return t;
    }
    static Tensor2 col(std::vector<double> values) {
        Tensor2 t;
        t.rows_ = static_cast<int>(values.size());
        t.cols_ = 1;
        t.v_ = std::move(values);
        return t;
    }
    static Tensor2 scalar(double x) { return row({x}); }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return v_.size(); }

    double& at(int r, int c) { return v_[static_cast<size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return v_[static_cast<size_t>(r) * cols_ + c]; }
    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

inline std::string shape_str(const Tensor2& t) {
    return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

/// Plain matrix product, no gradient tracking.
inline Tensor2 matmul_plain(const Tensor2& a, const Tensor2& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions differ " + shape_str(a) + " vs " + shape_str(b));
    Tensor2 out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
        }
    }
    return out;
}

}  // namespace odmn
