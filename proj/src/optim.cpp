#include "viewgrid/optim.hpp"

#include <stdexcept>

namespace viewgrid {

void sgd_step(std::vector<Parameter*>& params, double lr, double momentum) {
    if (lr < 0.0) throw std::invalid_argument("sgd_step: negative learning rate");
    for (Parameter* p : params) {
        Tensor& v = p->velocity;
        v.scale_inplace(momentum);
        v.add_inplace(p->grad);
        p->value.axpy_inplace(-lr, v);
        p->grad.fill(0.0);
    }
}

void zero_grad(std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->grad.fill(0.0);
}

}  // namespace viewgrid
