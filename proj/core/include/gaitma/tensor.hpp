#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gaitma/errors.hpp"

namespace gaitma {

/// Dense row-major tensor of doubles. All feature maps, parameters and
/// gradients in the pipeline are instances of this type; rank is dynamic
/// (vectors, matrices, C×T×H×W maps). Values are 64-bit throughout so the
/// finite-difference gradient contract can be checked at tight tolerances.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
        init_strides();
        data_.assign(static_cast<std::size_t>(size_), 0.0);
    }

    Tensor(std::vector<int> dims, std::vector<double> values) : dims_(std::move(dims)), data_(std::move(values)) {
        init_strides();
        if (static_cast<std::int64_t>(data_.size()) != size_)
            throw InvalidArgument("Tensor: value count does not match dims");
    }

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

    static Tensor full(std::vector<int> dims, double v) {
        Tensor t(std::move(dims));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(dims_.size()); }
    std::int64_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i * strides_[0] + j)]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i * strides_[0] + j)]; }
    double& at(int i, int j, int k) { return data_[static_cast<std::size_t>(i * strides_[0] + j * strides_[1] + k)]; }
    double at(int i, int j, int k) const {
        return data_[static_cast<std::size_t>(i * strides_[0] + j * strides_[1] + k)];
    }
    double& at(int i, int j, int k, int l) {
        return data_[static_cast<std::size_t>(i * strides_[0] + j * strides_[1] + k * strides_[2] + l)];
    }
    double at(int i, int j, int k, int l) const {
        return data_[static_cast<std::size_t>(i * strides_[0] + j * strides_[1] + k * strides_[2] + l)];
    }
    double& at(int i, int j, int k, int l, int m) {
        return data_[static_cast<std::size_t>(i * strides_[0] + j * strides_[1] + k * strides_[2] + l * strides_[3] +
                                              m)];
    }
    double at(int i, int j, int k, int l, int m) const {
        return data_[static_cast<std::size_t>(i * strides_[0] + j * strides_[1] + k * strides_[2] + l * strides_[3] +
                                              m)];
    }

    std::int64_t offset(int i, int j, int k) const { return i * strides_[0] + j * strides_[1] + k; }
    std::int64_t offset(int i, int j, int k, int l) const {
        return i * strides_[0] + j * strides_[1] + k * strides_[2] + l;
    }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }

    bool all_finite() const;

    /// Max absolute element; 0 for an empty tensor.
    double max_abs() const;

    void fill(double v) {
        for (auto& x : data_) x = v;
    }

private:
    void init_strides() {
        size_ = 1;
        for (int d : dims_) {
            if (d <= 0) throw InvalidArgument("Tensor: dims must be positive");
            size_ *= d;
        }
        strides_.assign(dims_.size(), 1);
        for (int i = static_cast<int>(dims_.size()) - 2; i >= 0; --i)
            strides_[static_cast<std::size_t>(i)] =
                strides_[static_cast<std::size_t>(i + 1)] * dims_[static_cast<std::size_t>(i + 1)];
        if (!strides_.empty()) strides_.pop_back();  // last stride is always 1, keep leading ones
        // strides_[i] now holds the stride of axis i for rank >= 2 access; for
        // rank-1 tensors the at(i) overload indexes data_ directly.
    }

    std::vector<int> dims_;
    std::vector<std::int64_t> strides_;
    std::vector<double> data_;
    std::int64_t size_ = 0;
};

std::string dims_to_string(const std::vector<int>& dims);

}  // namespace gaitma
