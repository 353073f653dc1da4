#pragma once

#include <functional>
#include <string>
#include <vector>

#include "viewgrid/tensor.hpp"

namespace viewgrid {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid for the tape's lifetime.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    bool valid() const { return tape != nullptr; }
    const Tensor& value() const;
    double item() const { return value().item(); }
};

// Trainable state. Lives outside any tape and persists across forward passes.
// grad accumulates additively until sgd_step / zero_grad clears it.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor velocity;

    Parameter(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(Tensor::zeros(value.shape())),
          velocity(Tensor::zeros(value.shape())) {}
};

// Record of one forward pass. Nodes are appended in execution order; backward
// replays them in exact reverse order. A tape is confined to one thread.
class Tape {
public:
    // Backward rule: reads grad(node_id), accumulates into parent grads.
    using BackwardFn = std::function<void(Tape&, std::size_t)>;

    Var leaf(Parameter& p);
    Var constant(Tensor value);
    Var emit(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    Tensor& grad(std::size_t id) { return nodes_[id].grad; }

    // Seeds d(loss)/d(loss)=1 and propagates to every reachable node; flushes
    // leaf grads into their Parameters (additively).
    void backward(const Var& loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool reachable = false;
    };

    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

}  // namespace viewgrid
