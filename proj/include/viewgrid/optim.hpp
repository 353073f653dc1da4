#pragma once

#include <vector>

#include "viewgrid/tape.hpp"

namespace viewgrid {

// SGD with classical momentum:
//   v <- m*v + g
//   p <- p - lr*v
void sgd_step(std::vector<Parameter*>& params, double lr, double momentum);

void zero_grad(std::vector<Parameter*>& params);

}  // namespace viewgrid
