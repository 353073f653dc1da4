#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace viewgrid {

// Dense row-major tensor of 64-bit floats. Rank 0 is a scalar.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}
    Tensor(std::vector<std::size_t> shape, double fill)
        : shape_(std::move(shape)), data_(count(shape_), fill) {}
    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor ones(std::vector<std::size_t> shape) { return Tensor(std::move(shape), 1.0); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Scalar extraction; valid for any single-element tensor.
    double item() const {
        if (data_.size() != 1) throw std::logic_error("Tensor::item on non-scalar");
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    void fill(double v) { for (double& x : data_) x = v; }
    void add_inplace(const Tensor& o);          // this += o
    void axpy_inplace(double a, const Tensor& o);  // this += a*o
    void scale_inplace(double a) { for (double& x : data_) x *= a; }

    std::string shape_str() const;

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace viewgrid
