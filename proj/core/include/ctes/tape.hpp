#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctes/tensor.hpp"

namespace ctes {

class ParamStore;

using Var = int;

// Reverse-mode tape over Tensor values. Nodes are appended during the
// forward pass; backward() walks them once in reverse insertion order.
class Tape {
public:
    Var leaf(Tensor t);
    Var scalar(double x) { return leaf(Tensor::scalar(x)); }

    // Leaf bound to a named parameter; gradients flow back into the store
    // via accumulate_grads().
    Var param(ParamStore& store, const std::string& name);

    const Tensor& val(Var x) const { return nodes_[x].val; }
    double value(Var x) const;
    const Tensor& grad(Var x) const { return nodes_[x].grad; }

    // elementwise; one operand may be scalar (broadcast)
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);

    Var neg(Var a) { return scale(a, -1.0); }
    Var scale(Var a, double c);
    Var add_const(Var a, double c);

    Var matvec(Var m, Var x);
    Var matmul(Var a, Var b);

    Var tanh_(Var a);
    Var sigmoid_(Var a);
    Var exp_(Var a);
    Var log_(Var a);
    Var softplus_(Var a);
    Var sqrt_(Var a);

    Var sum(Var a);        // -> scalar
    Var logsumexp(Var a);  // vector -> scalar, max-stabilized
    Var concat(Var a, Var b);
    Var pick(Var a, int i);         // element i -> scalar
    Var row(Var m, int i);          // matrix row -> vector
    Var dot_const(Var a, const std::vector<double>& c);  // -> scalar

    void backward(Var root);
    void accumulate_grads();

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> back;
    };

    struct Binding {
        ParamStore* store;
        std::string name;
        Var var;
    };

    Tensor& grad_ref(Var x) { return nodes_[x].grad; }
    Var push(Tensor val, std::function<void(Tape&)> back);
    static void check_elementwise(const char* op, const Tensor& a, const Tensor& b);

    std::vector<Node> nodes_;
    std::vector<Binding> bindings_;
    bool ran_backward_ = false;
};

// Central finite differences against tape gradients over every parameter in
// `stores`. `loss` must be deterministic, return the objective, and leave its
// gradients accumulated in the stores.
double grad_check(const std::function<double()>& loss, std::vector<ParamStore*> stores,
                  double step);

}  // namespace ctes
