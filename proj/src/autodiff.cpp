// SPDX-License-Identifier: Apache-2.0
#include "aca/autodiff.hpp"

namespace aca {

const Tensor& Var::value() const {
    if (!tape_) throw UsageError("use of an unbound Var");
    return tape_->value(id_);
}

Tape& Var::tape() const {
    if (!tape_) throw UsageError("use of an unbound Var");
    return *tape_;
}

bool Var::requires_grad() const { return tape().requires_grad(id_); }

const Tensor& Gradients::of(Var v) const {
    if (!has(v)) throw UsageError("no gradient recorded for node " + std::to_string(v.id()));
    return grads_[v.id()];
}

const Tensor& BackwardContext::input(std::size_t i) const { return tape_.nodes_[parents_[i]].value; }

Tensor* BackwardContext::grad(std::size_t i) {
    const std::size_t p = parents_[i];
    if (!tape_.nodes_[p].requires_grad) return nullptr;
    Tensor& g = (*tape_.active_grads_)[p];
    if (g.size() == 0) g = Tensor(tape_.nodes_[p].value.shape());
    return &g;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.parents.reserve(parents.size());
    for (const Var& p : parents) {
        if (p.tape_ != this) throw UsageError("operands recorded on different tapes");
        node.parents.push_back(p.id_);
        node.requires_grad = node.requires_grad || nodes_[p.id_].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) {
    if (loss.tape_ != this || loss.id_ >= nodes_.size())
        throw UsageError("backward on a tensor that is not on this tape");
    if (nodes_[loss.id_].value.size() != 1) throw UsageError("backward requires a single-element loss");

    Gradients out;
    out.grads_.resize(nodes_.size());
    active_grads_ = &out.grads_;
    out.grads_[loss.id_] = Tensor(nodes_[loss.id_].value.shape(), Real(1));

    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.backward || out.grads_[i].size() == 0) continue;
        BackwardContext ctx(*this, node.parents, out.grads_[i]);
        node.backward(ctx);
    }
    active_grads_ = nullptr;
    return out;
}

} // namespace aca
