#pragma once

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "lmpcast/autodiff/tensor.hpp"

namespace lmpcast::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Records a computation as a list of nodes in creation order (a valid topological
/// order) and runs reverse-mode accumulation over it. Single-threaded.
class Tape {
public:
    /// Receives the output gradient; adds contributions to inputs via accumulate().
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var variable(Tensor value) { return push(std::move(value), true, {}); }
    Var constant(Tensor value) { return push(std::move(value), false, {}); }

    /// Adds an op output. It requires a gradient iff any input does; the backward
    /// function is dropped otherwise.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
        return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
    }
    Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
#ifndef NDEBUG
        bool inputs_finite = true;
        for (const auto& v : inputs) inputs_finite = inputs_finite && v.value().all_finite();
        if (inputs_finite && !value.all_finite()) throw ValidationError("non-finite output from finite inputs");
#endif
        bool rg = false;
        for (const auto& v : inputs) rg = rg || nodes_[v.id()].requires_grad;
        return push(std::move(value), rg, rg ? std::move(backward) : BackwardFn{});
    }

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Gradient of the last backward() target with respect to `v`; zeros if unreached.
    Tensor grad(Var v) const {
        const auto& n = nodes_[v.id()];
        if (n.grad.empty() && !n.value.empty()) return Tensor(n.value.shape());
        return n.grad;
    }

    /// Adds `g` into the gradient buffer of node `id` (no-op for constants).
    void accumulate(std::size_t id, const Tensor& g) {
        auto& n = nodes_[id];
        if (!n.requires_grad) return;
        if (n.grad.empty())
            n.grad = g;
        else
            n.grad.array() += g.array();
    }
    /// Mutable gradient buffer, zero-initialized on first use.
    Tensor& grad_buffer(std::size_t id) {
        auto& n = nodes_[id];
        if (n.grad.empty()) n.grad = Tensor(n.value.shape());
        return n.grad;
    }

    /// Reverse sweep from a scalar. Gradients of intermediate nodes are released as
    /// soon as they are propagated unless `retain_intermediate` is set.
    void backward(Var loss, bool retain_intermediate = false) {
        if (loss.value().size() != 1 || loss.value().rank() != 0)
            throw ValidationError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
        for (auto& n : nodes_) n.grad = Tensor();
        nodes_[loss.id()].grad = Tensor::scalar(1.0);
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.backward || n.grad.empty()) continue;
            // Copy out: the callback may touch other nodes while we hold the reference.
            Tensor g = std::move(n.grad);
            n.backward(*this, g);
            if (retain_intermediate) nodes_[i].grad = std::move(g);
        }
    }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var push(Tensor value, bool rg, BackwardFn fn) {
        nodes_.push_back(Node{std::move(value), Tensor(), rg, std::move(fn)});
        return Var(this, nodes_.size() - 1);
    }

    std::deque<Node> nodes_;  // stable references: value() stays valid as the tape grows
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

}  // namespace lmpcast::ad
