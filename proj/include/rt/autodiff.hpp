#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "rt/tensor.hpp"

namespace rt::ag {

template <class T>
struct Node;

template <class T>
using Var = std::shared_ptr<Node<T>>;

// Reverse-mode tape node. Backward functions build gradient expressions out of
// the same op vocabulary, so gradients are themselves differentiable and a
// second backward pass (e.g. for gradient penalties) works unchanged.
template <class T>
struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    std::vector<Var<T>> parents;
    // Reads this->grad, accumulates contributions into parents' grad slots.
    std::function<void(Node<T>*)> backprop;
    Var<T> grad;
};

inline thread_local bool g_grad_enabled = true;

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
    ~NoGradGuard() { g_grad_enabled = prev; }
};

template <class T>
Var<T> leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

template <class T>
Var<T> constant(Tensor<T> value) {
    return leaf(std::move(value), false);
}

// Cuts the graph: result shares the value but has no history.
template <class T>
Var<T> detach(const Var<T>& v) {
    return constant(v->value);
}

template <class T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents,
                 std::function<void(Node<T>*)> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    if (g_grad_enabled) {
        for (const auto& p : parents)
            if (p && p->requires_grad) {
                n->requires_grad = true;
                break;
            }
        if (n->requires_grad) {
            n->parents = std::move(parents);
            n->backprop = std::move(backprop);
        }
    }
    return n;
}

template <class T>
void accumulate_grad(const Var<T>& target, const Var<T>& g);

template <class T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    if (!root->requires_grad) return order;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* p = node->parents[idx++].get();
            if (p && p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;  // post-order; reverse-iterate for backprop
}

// Runs backprop from a scalar root. Gradients are left on the visited nodes'
// grad slots; the returned list names every visited node so the caller can
// harvest and clear them. With create_graph the gradient expressions keep
// their own history (needed for gradient penalties).
template <class T>
std::vector<Node<T>*> backward(const Var<T>& root, bool create_graph = false) {
    if (root->value.numel() != 1)
        throw std::invalid_argument("backward requires a scalar root");
    auto order = topo_order(root.get());
    if (order.empty()) return order;
    root->grad = constant(Tensor<T>::full(root->value.shape(), T(1)));
    std::unique_ptr<NoGradGuard> guard;
    if (!create_graph) guard = std::make_unique<NoGradGuard>();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->grad && n->backprop) n->backprop(n);
    }
    return order;
}

template <class T>
void clear_grads(const std::vector<Node<T>*>& nodes) {
    for (Node<T>* n : nodes) n->grad = nullptr;
}

// d(output)/d(wrt) as fresh Vars; all intermediate grad slots are cleared so a
// later backward pass starts clean.
template <class T>
std::vector<Var<T>> grad_of(const Var<T>& output, const std::vector<Var<T>>& wrt,
                            bool create_graph) {
    auto visited = backward(output, create_graph);
    std::vector<Var<T>> out;
    out.reserve(wrt.size());
    for (const auto& w : wrt) out.push_back(w->grad);
    clear_grads(visited);
    return out;
}

}  // namespace rt::ag
