#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "viewgrid/npl.hpp"
#include "viewgrid/tape.hpp"

namespace viewgrid {

struct LossWeights {
    double lambda1 = 1.0;  // 3D consistency term
    double lambda2 = 0.1;  // camera regularization term
    double alpha = 1.0;    // camera margin
};

namespace losses {

// Frobenius norm of (a - b); shapes must match.
Var three_d_loss(Var a, Var b);

// Full 3x3 camera matrix K for one learned camera, on the given tape.
Var camera_matrix(Tape& tape, LearnedCamera& cam);

// Margin hinge max(alpha - ||K1 - K2||_F, 0).
Var cam_reg(Tape& tape, LearnedCamera& c1, LearnedCamera& c2, double alpha);

// Softmax negative log-likelihood (stabilized).
Var cross_entropy(Var logits, std::size_t label);

struct LossBreakdown {
    Var total;
    Var ce;       // mean cross-entropy
    Var three_d;  // invalid when no pairs / lambda1 == 0
    Var cam;      // invalid when fewer than 2 cameras / lambda2 == 0
};

// mean CE over the batch
//   + lambda1 * sum of three_d_loss over the given same-label pairs
//   + lambda2 * sum of cam_reg over all unordered camera pairs.
// `representations` may be empty (no 3D term regardless of pairs); `cams`
// may be null (no camera term).
LossBreakdown total_loss(Tape& tape, const std::vector<Var>& logits,
                         const std::vector<std::size_t>& labels,
                         const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                         const std::vector<Var>& representations,
                         std::vector<LearnedCamera>* cams, const LossWeights& w);

}  // namespace losses

}  // namespace viewgrid
