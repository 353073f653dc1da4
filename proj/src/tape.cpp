#include "viewgrid/tape.hpp"

#include <stdexcept>

namespace viewgrid {

Var Tape::leaf(Parameter& p) {
    Node n;
    n.value = p.value;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::emit(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

void Tape::backward(const Var& loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss is not on this tape");
    if (loss.id >= nodes_.size()) throw std::invalid_argument("backward: invalid loss node");
    if (nodes_[loss.id].value.size() != 1)
        throw std::invalid_argument("backward: loss must be a scalar");

    // Mark ancestry of the loss; everything else is skipped.
    for (Node& n : nodes_) n.reachable = false;
    std::vector<std::size_t> stack{loss.id};
    nodes_[loss.id].reachable = true;
    while (!stack.empty()) {
        std::size_t id = stack.back();
        stack.pop_back();
        for (std::size_t p : nodes_[id].parents) {
            if (!nodes_[p].reachable) {
                nodes_[p].reachable = true;
                stack.push_back(p);
            }
        }
    }

    for (Node& n : nodes_)
        if (n.reachable) n.grad = Tensor::zeros(n.value.shape());
    nodes_[loss.id].grad.fill(1.0);

    // Exact reverse execution order. A leaf's grad is complete once every
    // later consumer has run, so parameters are flushed in the same sweep.
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.reachable) continue;
        if (n.backward) n.backward(*this, i);
        if (n.param) n.param->grad.add_inplace(n.grad);
    }
}

}  // namespace viewgrid
