#include "viewgrid/tensor.hpp"

#include <cmath>
#include <sstream>

namespace viewgrid {

bool Tensor::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

void Tensor::add_inplace(const Tensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("Tensor::add_inplace shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
}

void Tensor::axpy_inplace(double a, const Tensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("Tensor::axpy_inplace shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

}  // namespace viewgrid
