#include "viewgrid/losses.hpp"

#include <stdexcept>

#include "viewgrid/ops.hpp"

namespace viewgrid::losses {

Var three_d_loss(Var a, Var b) { return ops::frobenius_diff(a, b); }

Var camera_matrix(Tape& tape, LearnedCamera& cam) {
    Var rot = diff::euler_rotation(tape.leaf(cam.yaw), tape.leaf(cam.pitch),
                                   tape.leaf(cam.roll));
    return diff::intrinsic_matrix(ops::exp(tape.leaf(cam.s_x_raw)),
                                  ops::exp(tape.leaf(cam.s_y_raw)), tape.leaf(cam.x_0),
                                  tape.leaf(cam.y_0), rot);
}

Var cam_reg(Tape& tape, LearnedCamera& c1, LearnedCamera& c2, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("cam_reg: alpha must be >= 0");
    Var d = ops::frobenius_diff(camera_matrix(tape, c1), camera_matrix(tape, c2));
    return ops::relu(ops::add_scalar(ops::neg(d), alpha));
}

Var cross_entropy(Var logits, std::size_t label) { return ops::cross_entropy(logits, label); }

LossBreakdown total_loss(Tape& tape, const std::vector<Var>& logits,
                         const std::vector<std::size_t>& labels,
                         const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                         const std::vector<Var>& representations,
                         std::vector<LearnedCamera>* cams, const LossWeights& w) {
    if (logits.empty() || logits.size() != labels.size())
        throw std::invalid_argument("total_loss: logits/labels mismatch");

    LossBreakdown out;
    Var ce_sum = cross_entropy(logits[0], labels[0]);
    for (std::size_t i = 1; i < logits.size(); ++i)
        ce_sum = ops::add(ce_sum, cross_entropy(logits[i], labels[i]));
    out.ce = ops::scale(ce_sum, 1.0 / static_cast<double>(logits.size()));
    out.total = out.ce;

    if (w.lambda1 > 0.0 && !representations.empty() && !pairs.empty()) {
        Var sum3d;
        for (const auto& [i, j] : pairs) {
            if (i >= representations.size() || j >= representations.size())
                throw std::out_of_range("total_loss: pair index out of range");
            Var term = three_d_loss(representations[i], representations[j]);
            sum3d = sum3d.valid() ? ops::add(sum3d, term) : term;
        }
        out.three_d = sum3d;
        out.total = ops::add(out.total, ops::scale(sum3d, w.lambda1));
    }

    if (w.lambda2 > 0.0 && cams != nullptr && cams->size() >= 2) {
        Var sumcam;
        for (std::size_t i = 0; i < cams->size(); ++i)
            for (std::size_t j = i + 1; j < cams->size(); ++j) {
                Var term = cam_reg(tape, (*cams)[i], (*cams)[j], w.alpha);
                sumcam = sumcam.valid() ? ops::add(sumcam, term) : term;
            }
        out.cam = sumcam;
        out.total = ops::add(out.total, ops::scale(sumcam, w.lambda2));
    }
    return out;
}

}  // namespace viewgrid::losses
